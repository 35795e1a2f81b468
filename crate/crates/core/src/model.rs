//! Shared domain types: ensemble configuration, coupling-weight generation,
//! protocol parameters and regime-validity checks.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold below which a "much less than one" condition counts as met.
pub const REGIME_THRESHOLD: f64 = 0.1;

/// Atom count, photons per probe pulse and the per-atom coupling weights.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleConfig {
    n_photons: usize,
    weights: Vec<f64>,
}

impl EnsembleConfig {
    pub fn new(n_photons: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Parameter("ensemble needs at least one atom".into()));
        }
        if n_photons == 0 {
            return Err(Error::Parameter("probe pulse needs at least one photon".into()));
        }
        if let Some(bad) = weights.iter().find(|g| !g.is_finite()) {
            return Err(Error::Parameter(format!("non-finite coupling weight {bad}")));
        }
        Ok(Self { n_photons, weights })
    }

    /// All weights equal to one.
    pub fn uniform(n_atoms: usize, n_photons: usize) -> Result<Self> {
        Self::new(n_photons, vec![1.0; n_atoms])
    }

    pub fn n_atoms(&self) -> usize {
        self.weights.len()
    }

    pub fn n_photons(&self) -> usize {
        self.n_photons
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sample mean and population variance of the weights.
    pub fn disorder(&self) -> (f64, f64) {
        empirical_disorder(&self.weights).expect("weights are non-empty by construction")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingKind {
    UniformUnit,
    Gaussian,
    StandingWave,
}

impl FromStr for CouplingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-unit" | "uniform" => Ok(Self::UniformUnit),
            "gaussian" => Ok(Self::Gaussian),
            "standing-wave" => Ok(Self::StandingWave),
            other => Err(Error::Parameter(format!("unknown coupling kind '{other}'"))),
        }
    }
}

impl fmt::Display for CouplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::UniformUnit => "uniform-unit",
            Self::Gaussian => "gaussian",
            Self::StandingWave => "standing-wave",
        })
    }
}

/// How coupling weights are drawn. `variance` is only read by the Gaussian kind.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingDistribution {
    pub kind: CouplingKind,
    pub variance: f64,
    pub seed: u64,
}

impl CouplingDistribution {
    pub fn uniform() -> Self {
        Self {
            kind: CouplingKind::UniformUnit,
            variance: 0.0,
            seed: 0,
        }
    }

    pub fn gaussian(variance: f64, seed: u64) -> Self {
        Self {
            kind: CouplingKind::Gaussian,
            variance,
            seed,
        }
    }

    pub fn standing_wave(seed: u64) -> Self {
        Self {
            kind: CouplingKind::StandingWave,
            variance: 0.5,
            seed,
        }
    }

    /// Variance of the distribution itself (not of a finite sample).
    pub fn population_variance(&self) -> f64 {
        match self.kind {
            CouplingKind::UniformUnit => 0.0,
            CouplingKind::Gaussian => self.variance,
            CouplingKind::StandingWave => 0.5,
        }
    }
}

/// Draws `n_atoms` weights from `dist` using stream 0 of its seed.
pub fn make_weights(dist: &CouplingDistribution, n_atoms: usize) -> Result<Vec<f64>> {
    make_weights_stream(dist, n_atoms, 0)
}

/// Like [`make_weights`], but from an independent ChaCha stream of the same
/// seed. Disorder averaging uses one stream per sample.
pub fn make_weights_stream(
    dist: &CouplingDistribution,
    n_atoms: usize,
    stream: u64,
) -> Result<Vec<f64>> {
    if n_atoms == 0 {
        return Err(Error::Parameter("n_atoms must be at least 1".into()));
    }
    if !(dist.variance >= 0.0) || !dist.variance.is_finite() {
        return Err(Error::Parameter(format!(
            "coupling variance must be finite and non-negative, got {}",
            dist.variance
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(dist.seed);
    rng.set_stream(stream);
    let weights = match dist.kind {
        CouplingKind::UniformUnit => vec![1.0; n_atoms],
        CouplingKind::Gaussian => {
            let normal = Normal::new(1.0, dist.variance.sqrt())
                .map_err(|e| Error::Parameter(e.to_string()))?;
            normal.sample_iter(&mut rng).take(n_atoms).collect()
        }
        CouplingKind::StandingWave => (0..n_atoms)
            .map(|_| {
                let theta = 2.0 * PI * rng.random::<f64>();
                2.0 * theta.cos().powi(2)
            })
            .collect(),
    };
    Ok(weights)
}

/// Sample mean and population variance (divisor N).
pub fn empirical_disorder(weights: &[f64]) -> Result<(f64, f64)> {
    if weights.is_empty() {
        return Err(Error::Parameter("empty weight array".into()));
    }
    let n = weights.len() as f64;
    // shifted accumulation keeps identical inputs exact
    let shift = weights[0];
    let (s, s2) = weights.iter().fold((0.0, 0.0), |(s, s2), &g| {
        let d = g - shift;
        (s + d, s2 + d * d)
    });
    let mean_shift = s / n;
    let variance = (s2 / n - mean_shift * mean_shift).max(0.0);
    Ok((shift + mean_shift, variance))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Single probe pulse, readout of the symmetric F_z corrected by the probe.
    Unmatched,
    /// Two probe pulses coupled identically before and after the rotation.
    Matched,
    /// One probe pulse stored and re-coupled with reversed sign.
    Stored,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Unmatched, Protocol::Matched, Protocol::Stored];

    pub fn pulses(self) -> usize {
        match self {
            Protocol::Matched => 2,
            _ => 1,
        }
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unmatched" => Ok(Self::Unmatched),
            "matched" | "matched-two-pulse" => Ok(Self::Matched),
            "stored" | "stored-pulse" => Ok(Self::Stored),
            other => Err(Error::Parameter(format!("unknown protocol '{other}'"))),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Unmatched => "unmatched",
            Self::Matched => "matched",
            Self::Stored => "stored",
        })
    }
}

/// Interaction angle χ = Ωτ, rotation angle φ and the protocol. The
/// interaction parameter ξ = nχ²/4 is always recomputed from χ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolParams {
    pub chi: f64,
    pub phi: f64,
    pub protocol: Protocol,
}

impl ProtocolParams {
    pub fn new(chi: f64, phi: f64, protocol: Protocol) -> Self {
        Self { chi, phi, protocol }
    }

    /// χ chosen so that nχ²/4 = ξ.
    pub fn from_xi(xi: f64, n_photons: usize, phi: f64, protocol: Protocol) -> Result<Self> {
        if !(xi >= 0.0) || !xi.is_finite() {
            return Err(Error::Parameter(format!("xi must be finite and non-negative, got {xi}")));
        }
        let chi = 2.0 * (xi / n_photons as f64).sqrt();
        Ok(Self::new(chi, phi, protocol))
    }

    pub fn xi(&self, n_photons: usize) -> f64 {
        n_photons as f64 * self.chi * self.chi / 4.0
    }

    pub fn with_phi(self, phi: f64) -> Self {
        Self { phi, ..self }
    }
}

/// Raw ratio of a "x ≪ 1" condition and whether it passes [`REGIME_THRESHOLD`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Margin {
    pub ratio: f64,
    pub satisfied: bool,
}

impl Margin {
    pub fn of(ratio: f64) -> Self {
        Self {
            ratio,
            satisfied: ratio < REGIME_THRESHOLD,
        }
    }
}

/// Validity of the small-parameter expansions behind the closed-form results.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegimeReport {
    /// χ·√(N/4): the probe kick per unit of atomic noise.
    pub small_kick: Margin,
    /// Nχ².
    pub small_bend: Margin,
    /// N/√n; small when photons dominate atoms.
    pub photon_dominance: Margin,
    /// ξ·(Δg)².
    pub small_disorder_xi: Margin,
    /// Set when χ = 0: nothing is measured and every χ-margin is trivially met.
    pub zero_interaction: bool,
}

impl RegimeReport {
    /// Report for the large-probe limit at fixed ξ, where χ → 0 and n → ∞.
    /// This is the regime the closed-form expressions are written for.
    pub fn asymptotic(xi: f64, dg2: f64) -> Self {
        Self {
            small_kick: Margin::of(0.0),
            small_bend: Margin::of(0.0),
            photon_dominance: Margin::of(0.0),
            small_disorder_xi: Margin::of(xi * dg2),
            zero_interaction: xi == 0.0,
        }
    }

    pub fn all_satisfied(&self) -> bool {
        self.small_kick.satisfied
            && self.small_bend.satisfied
            && self.photon_dominance.satisfied
            && self.small_disorder_xi.satisfied
    }
}

/// Advisory validity check; never blocks a computation.
pub fn check_regime(cfg: &EnsembleConfig, params: &ProtocolParams) -> RegimeReport {
    let n_atoms = cfg.n_atoms() as f64;
    let n_photons = cfg.n_photons() as f64;
    let chi = params.chi.abs();
    let (_, dg2) = cfg.disorder();
    RegimeReport {
        small_kick: Margin::of(chi * (n_atoms / 4.0).sqrt()),
        small_bend: Margin::of(n_atoms * chi * chi),
        photon_dominance: Margin::of(n_atoms / n_photons.sqrt()),
        small_disorder_xi: Margin::of(params.xi(cfg.n_photons()) * dg2),
        zero_interaction: params.chi == 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_weights_are_ones() {
        let w = make_weights(&CouplingDistribution::uniform(), 5).unwrap();
        assert_eq!(w, vec![1.0; 5]);
        assert_eq!(empirical_disorder(&w).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn gaussian_weights_match_requested_moments() {
        let w = make_weights(&CouplingDistribution::gaussian(0.04, 7), 10_000).unwrap();
        let (mean, var) = empirical_disorder(&w).unwrap();
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!((var - 0.04).abs() < 0.005, "var {var}");
    }

    /// Box-Muller over SplitMix64: a generator sharing no code with the
    /// production path, checked against the same bands.
    #[test]
    fn independent_gaussian_generator_agrees() {
        let mut state = 7u64;
        let mut next = || {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
        };
        let sigma = 0.04f64.sqrt();
        let w: Vec<f64> = (0..10_000)
            .map(|_| {
                let u1 = next().max(1e-300);
                let u2 = next();
                1.0 + sigma * (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
            })
            .collect();
        let (mean, var) = empirical_disorder(&w).unwrap();
        assert!((mean - 1.0).abs() < 0.01);
        assert!((var - 0.04).abs() < 0.005);
    }

    #[test]
    fn standing_wave_moments() {
        // mean and variance of 2cos²θ by midpoint quadrature over one period
        let m = 100_000;
        let (mut m1, mut m2) = (0.0, 0.0);
        for i in 0..m {
            let theta = 2.0 * PI * (i as f64 + 0.5) / m as f64;
            let g = 2.0 * theta.cos().powi(2);
            m1 += g / m as f64;
            m2 += g * g / m as f64;
        }
        assert_abs_diff_eq!(m1, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m2 - m1 * m1, 0.5, epsilon = 1e-12);

        let w = make_weights(&CouplingDistribution::standing_wave(1), 100_000).unwrap();
        let (mean, var) = empirical_disorder(&w).unwrap();
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        assert!((var - 0.5).abs() < 0.02, "var {var}");
    }

    #[test]
    fn empirical_disorder_by_hand() {
        assert_eq!(empirical_disorder(&[1.0, 1.0, 1.0]).unwrap(), (1.0, 0.0));
        let (m, v) = empirical_disorder(&[0.5, 1.5]).unwrap();
        assert_abs_diff_eq!(m, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
        assert!(matches!(empirical_disorder(&[]), Err(Error::Parameter(_))));
    }

    #[test]
    fn large_gaussian_sample_variance() {
        let w = make_weights(&CouplingDistribution::gaussian(0.25, 3), 1_000_000).unwrap();
        let (_, v) = empirical_disorder(&w).unwrap();
        assert!((v - 0.25).abs() < 0.001, "var {v}");
    }

    #[test]
    fn negative_variance_rejected() {
        let d = CouplingDistribution::gaussian(-0.1, 0);
        assert!(matches!(make_weights(&d, 3), Err(Error::Parameter(_))));
    }

    #[test]
    fn regime_examples() {
        let cfg = EnsembleConfig::uniform(4, 4096).unwrap();
        let p = ProtocolParams::from_xi(1.0, 4096, 0.0, Protocol::Unmatched).unwrap();
        assert_eq!(p.chi, 1.0 / 32.0);
        let r = check_regime(&cfg, &p);
        assert!(r.photon_dominance.satisfied);
        assert_abs_diff_eq!(1.0 / r.photon_dominance.ratio, 16.0, epsilon = 1e-12);
        assert!(r.small_bend.satisfied);
        assert_abs_diff_eq!(r.small_bend.ratio, 4.0 / 1024.0, epsilon = 1e-15);

        let cfg = EnsembleConfig::uniform(100, 100).unwrap();
        let p = ProtocolParams::from_xi(1.0, 100, 0.0, Protocol::Unmatched).unwrap();
        assert!(!check_regime(&cfg, &p).photon_dominance.satisfied);

        let cfg = EnsembleConfig::uniform(4, 4096).unwrap();
        let r = check_regime(&cfg, &ProtocolParams::new(0.0, 0.0, Protocol::Matched));
        assert!(r.zero_interaction);
        assert!(r.all_satisfied());
    }

    proptest! {
        #[test]
        fn weights_deterministic(seed in any::<u64>(), n in 1usize..200, var in 0.0f64..2.0) {
            for kind in [CouplingKind::UniformUnit, CouplingKind::Gaussian, CouplingKind::StandingWave] {
                let d = CouplingDistribution { kind, variance: var, seed };
                prop_assert_eq!(make_weights(&d, n).unwrap(), make_weights(&d, n).unwrap());
            }
        }

        #[test]
        fn xi_recomputes_exactly(chi in -3.0f64..3.0, n in 1usize..100_000) {
            let p = ProtocolParams::new(chi, 0.0, Protocol::Matched);
            prop_assert_eq!(p.xi(n), n as f64 * chi * chi / 4.0);
        }
    }
}
