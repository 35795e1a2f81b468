//! Closed-form, Gaussian-disorder-averaged signals, variances and phase errors
//! for the three readout protocols.
//!
//! All expressions hold in the large-probe limit (n → ∞ at fixed
//! ξ = nχ²/4) and to first order in φ. They remain computable outside the
//! validity regime; the attached [`RegimeReport`] says when they are being
//! extrapolated.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Protocol, RegimeReport};
use crate::numeric::golden_section;

/// Default upper end of the ξ search interval.
pub const XI_MAX: f64 = 100.0;
const XI_MIN: f64 = 1e-3;
const LN_XI_TOL: f64 = 1e-10;

/// Split of the referred signal variance into its physical sources, in units
/// of F_z variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseBreakdown {
    /// Atomic projection noise.
    pub shot: f64,
    /// Probe quantum noise left after conditioning on the probe.
    pub entanglement: f64,
    /// Classical noise from the spread of coupling weights.
    pub inhomogeneity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseErrorResult {
    pub protocol: Protocol,
    pub delta_phi: f64,
    /// √N · δφ; below one means sub-shot-noise interferometry.
    pub eta: f64,
    /// Variance of the measured signal at φ = 0.
    pub signal_variance: f64,
    /// d⟨signal⟩/dφ at φ = 0.
    pub signal_slope: f64,
    /// Only available from the closed forms.
    pub noise: Option<NoiseBreakdown>,
    pub regime: RegimeReport,
    /// The matched-readout exponent is taken with positive sign, consistent
    /// with the slope expression and the symmetric minimum √(2e)/N; the
    /// negative sign sometimes printed for it is treated as an erratum.
    pub sign_corrected: bool,
}

impl PhaseErrorResult {
    pub(crate) fn from_moments(
        protocol: Protocol,
        n_atoms: usize,
        signal_variance: f64,
        signal_slope: f64,
        regime: RegimeReport,
    ) -> Result<Self> {
        let delta_phi = signal_variance.max(0.0).sqrt() / signal_slope.abs();
        if !delta_phi.is_finite() || delta_phi > 1e12 {
            return Err(Error::DegenerateProtocol(format!(
                "{protocol} signal has no usable slope (d<signal>/dphi = {signal_slope:e})"
            )));
        }
        Ok(Self {
            protocol,
            delta_phi,
            eta: (n_atoms as f64).sqrt() * delta_phi,
            signal_variance,
            signal_slope,
            noise: None,
            regime,
            sign_corrected: false,
        })
    }
}

/// A closed-form value together with whether ξ(Δg)² ≥ 1 made it an
/// extrapolation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluated {
    pub value: f64,
    pub extrapolated: bool,
}

fn check_inputs(xi: f64, dg2: f64, n_atoms: usize) -> Result<()> {
    if !(dg2 >= 0.0) || !dg2.is_finite() {
        return Err(Error::Parameter(format!("dg2 must be finite and non-negative, got {dg2}")));
    }
    if n_atoms == 0 {
        return Err(Error::Parameter("n_atoms must be at least 1".into()));
    }
    if !xi.is_finite() || xi < 0.0 {
        return Err(Error::Parameter(format!("xi must be finite and non-negative, got {xi}")));
    }
    if xi == 0.0 {
        return Err(Error::Divergence("xi = 0: no information is acquired by the probe".into()));
    }
    Ok(())
}

/// ⟨e^{-ξg²/2}⟩ for Gaussian g with mean 1 and variance `dg2`.
pub fn gaussian_coherence(xi: f64, dg2: f64) -> f64 {
    let s = 1.0 + dg2 * xi;
    (-xi / (2.0 * s)).exp() / s.sqrt()
}

/// ⟨F′_z⟩ to first order in φ.
pub fn mean_signal_unmatched(phi: f64, xi: f64, dg2: f64, n_atoms: usize) -> Evaluated {
    Evaluated {
        value: -(n_atoms as f64 * phi / 2.0) * gaussian_coherence(xi, dg2),
        extrapolated: xi * dg2 >= 1.0,
    }
}

/// Variance of F′_z at φ = 0, plus the three components of the probe readout
/// variance 4⟨S_y²(τ)⟩/(nχ)² ≈ (N + 1/ξ + N(Δg)²)/4. The shot part cancels
/// against the direct F_z readout, leaving `total`.
pub fn variance_unmatched(xi: f64, dg2: f64, n_atoms: usize) -> Result<(f64, NoiseBreakdown)> {
    check_inputs(xi, dg2, n_atoms)?;
    let n = n_atoms as f64;
    let total = (1.0 + n * xi * dg2) / (4.0 * xi);
    Ok((
        total,
        NoiseBreakdown {
            shot: n / 4.0,
            entanglement: 1.0 / (4.0 * xi),
            inhomogeneity: n * dg2 / 4.0,
        },
    ))
}

pub fn delta_phi_unmatched(xi: f64, dg2: f64, n_atoms: usize) -> Result<PhaseErrorResult> {
    let (variance, noise) = variance_unmatched(xi, dg2, n_atoms)?;
    let n = n_atoms as f64;
    let s = 1.0 + xi * dg2;
    let delta_phi = ((1.0 + n * xi * dg2) * s).sqrt() * (xi / (2.0 * s)).exp() / (n * xi.sqrt());
    Ok(PhaseErrorResult {
        protocol: Protocol::Unmatched,
        delta_phi,
        eta: n.sqrt() * delta_phi,
        signal_variance: variance,
        signal_slope: mean_signal_unmatched(1.0, xi, dg2, n_atoms).value,
        noise: Some(noise),
        regime: RegimeReport::asymptotic(xi, dg2),
        sign_corrected: false,
    })
}

/// Difference-signal readout with a second, identically coupled probe pulse.
pub fn delta_phi_matched(xi: f64, dg2: f64, n_atoms: usize) -> Result<PhaseErrorResult> {
    check_inputs(xi, dg2, n_atoms)?;
    let n = n_atoms as f64;
    let s = 1.0 + xi * dg2;
    let delta_phi = (2.0 / xi).sqrt() * s.powf(1.5) * (xi / (2.0 * s)).exp() / n;
    let variance = 1.0 / (2.0 * xi);
    Ok(PhaseErrorResult {
        protocol: Protocol::Matched,
        delta_phi,
        eta: n.sqrt() * delta_phi,
        signal_variance: variance,
        signal_slope: -(n / 2.0) * (-xi / (2.0 * s)).exp() / s.powf(1.5),
        noise: Some(NoiseBreakdown {
            shot: 0.0,
            entanglement: variance,
            inhomogeneity: 0.0,
        }),
        regime: RegimeReport::asymptotic(xi, dg2),
        sign_corrected: true,
    })
}

/// Stored-pulse readout: one probe, half the probe shot noise of the
/// matched scheme.
pub fn delta_phi_stored(xi: f64, dg2: f64, n_atoms: usize) -> Result<PhaseErrorResult> {
    let matched = delta_phi_matched(xi, dg2, n_atoms)?;
    let delta_phi = matched.delta_phi / std::f64::consts::SQRT_2;
    let variance = 1.0 / (4.0 * xi);
    Ok(PhaseErrorResult {
        protocol: Protocol::Stored,
        delta_phi,
        eta: (n_atoms as f64).sqrt() * delta_phi,
        signal_variance: variance,
        signal_slope: -matched.signal_slope,
        noise: Some(NoiseBreakdown {
            shot: 0.0,
            entanglement: variance,
            inhomogeneity: 0.0,
        }),
        ..matched
    })
}

pub fn delta_phi(protocol: Protocol, xi: f64, dg2: f64, n_atoms: usize) -> Result<PhaseErrorResult> {
    match protocol {
        Protocol::Unmatched => delta_phi_unmatched(xi, dg2, n_atoms),
        Protocol::Matched => delta_phi_matched(xi, dg2, n_atoms),
        Protocol::Stored => delta_phi_stored(xi, dg2, n_atoms),
    }
}

/// Minimises δφ(ξ) over ξ ∈ [10⁻³, `XI_MAX`]; returns `(ξ*, δφ(ξ*))`.
pub fn optimal_xi(dg2: f64, n_atoms: usize, protocol: Protocol) -> Result<(f64, f64)> {
    optimal_xi_bounded(dg2, n_atoms, protocol, XI_MAX)
}

pub fn optimal_xi_bounded(
    dg2: f64,
    n_atoms: usize,
    protocol: Protocol,
    xi_max: f64,
) -> Result<(f64, f64)> {
    check_inputs(1.0, dg2, n_atoms)?;
    if !(xi_max > XI_MIN) {
        return Err(Error::Parameter(format!("xi_max must exceed {XI_MIN}, got {xi_max}")));
    }
    let objective = |ln_xi: f64| {
        delta_phi(protocol, ln_xi.exp(), dg2, n_atoms)
            .map(|r| r.delta_phi.ln())
            .unwrap_or(f64::INFINITY)
    };
    let (lo, hi) = (XI_MIN.ln(), xi_max.ln());
    let (ln_xi, _) = golden_section(objective, lo, hi, LN_XI_TOL, 500)?;
    let xi_star = ln_xi.exp();
    let best = delta_phi(protocol, xi_star, dg2, n_atoms)?.delta_phi;
    // a minimum pinned to the bracket edge is not an interior stationary point
    if ln_xi - lo < 1e3 * LN_XI_TOL || hi - ln_xi < 1e3 * LN_XI_TOL {
        return Err(Error::NonConvergence {
            best_xi: xi_star,
            best_delta_phi: best,
        });
    }
    Ok((xi_star, best))
}
