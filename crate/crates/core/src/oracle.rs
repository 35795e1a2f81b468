//! Exact first and second moments of the protocol observables for a fixed
//! weight vector, without small-χ or disorder-averaging approximations.
//!
//! Conditioned on the Dicke index `m` of the first probe pulse every unitary
//! acts on the atoms as a product of single-atom 2×2 rotations, so the joint
//! state is `Σ_m c_m |m⟩ ⊗ ⨂_k |a_k(m)⟩`. Expectation values reduce to sums
//! over neighbouring Dicke indices of products of single-atom matrix elements,
//! accumulated in one pass over the atoms. The second probe pulse of the
//! matched protocol couples last and is eliminated analytically through its
//! coherent-state moments. Cost is O(N·W) with W the number of Dicke indices
//! carrying weight (W ≈ 12.5√n for large n).

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formulas::PhaseErrorResult;
use crate::model::{check_regime, EnsembleConfig, Protocol, ProtocolParams};
use crate::numeric::{css_char, dicke_m, raising, richardson_derivative, DickeAmplitudes};

/// Observables of the three protocols, all evaluated on the output state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Label {
    /// Symmetric atomic F_z.
    Fz,
    /// Weighted atomic F̃_z = Σ g_k f_z^k.
    FzTilde,
    /// S_y of the first probe pulse.
    Sy,
    /// S_y of the second probe pulse (matched protocol only).
    Jy,
    /// F_z − 2S_y/(nχ) (unmatched protocol, χ ≠ 0).
    FzPrime,
    /// J_y − S_y (matched protocol).
    A,
    /// Final S_y of the stored pulse (stored protocol).
    B,
}

impl Label {
    pub fn name(self) -> &'static str {
        match self {
            Label::Fz => "F_z",
            Label::FzTilde => "F~_z",
            Label::Sy => "S_y",
            Label::Jy => "J_y",
            Label::FzPrime => "F'_z",
            Label::A => "A",
            Label::B => "B",
        }
    }
}

/// Means and symmetrised covariances of the protocol observables at one φ.
///
/// Stored as a covariance matrix over the primitive observables
/// (F_z, F̃_z, S_y and, for two pulses, J_y); the composite signals are
/// linear combinations of those.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentSet {
    pub at_phi: f64,
    pub protocol: Protocol,
    base: Vec<Label>,
    means: Vec<f64>,
    cov: Vec<Vec<f64>>,
    /// Coefficient of S_y in F′_z, -2/(nχ); `None` when χ = 0.
    fz_prime_coeff: Option<f64>,
}

impl MomentSet {
    pub(crate) fn new(
        protocol: Protocol,
        at_phi: f64,
        n_photons: usize,
        chi: f64,
        means: Vec<f64>,
        cov: Vec<Vec<f64>>,
    ) -> Self {
        let mut base = vec![Label::Fz, Label::FzTilde, Label::Sy];
        if protocol == Protocol::Matched {
            base.push(Label::Jy);
        }
        debug_assert_eq!(means.len(), base.len());
        let fz_prime_coeff = (chi != 0.0).then(|| -2.0 / (n_photons as f64 * chi));
        Self {
            at_phi,
            protocol,
            base,
            means,
            cov,
            fz_prime_coeff,
        }
    }

    /// Every label with a defined value for this protocol.
    pub fn labels(&self) -> Vec<Label> {
        let mut out = self.base.clone();
        match self.protocol {
            Protocol::Unmatched if self.fz_prime_coeff.is_some() => out.push(Label::FzPrime),
            Protocol::Unmatched => {}
            Protocol::Matched => out.push(Label::A),
            Protocol::Stored => out.push(Label::B),
        }
        out
    }

    fn coefficients(&self, label: Label) -> Option<Vec<f64>> {
        let mut c = vec![0.0; self.base.len()];
        let idx = |l: Label| self.base.iter().position(|&b| b == l);
        match label {
            Label::FzPrime if self.protocol == Protocol::Unmatched => {
                c[idx(Label::Fz)?] = 1.0;
                c[idx(Label::Sy)?] = self.fz_prime_coeff?;
            }
            Label::A if self.protocol == Protocol::Matched => {
                c[idx(Label::Jy)?] = 1.0;
                c[idx(Label::Sy)?] = -1.0;
            }
            Label::B if self.protocol == Protocol::Stored => c[idx(Label::Sy)?] = 1.0,
            Label::FzPrime | Label::A | Label::B => return None,
            primitive => c[idx(primitive)?] = 1.0,
        }
        Some(c)
    }

    pub fn mean(&self, label: Label) -> Option<f64> {
        let c = self.coefficients(label)?;
        Some(c.iter().zip(&self.means).map(|(a, m)| a * m).sum())
    }

    pub fn covariance(&self, a: Label, b: Label) -> Option<f64> {
        let ca = self.coefficients(a)?;
        let cb = self.coefficients(b)?;
        let mut acc = 0.0;
        for (i, x) in ca.iter().enumerate() {
            for (j, y) in cb.iter().enumerate() {
                if *x != 0.0 && *y != 0.0 {
                    acc += x * y * self.cov[i][j];
                }
            }
        }
        Some(acc)
    }

    pub fn variance(&self, label: Label) -> Option<f64> {
        self.covariance(label, label)
    }

    /// Smallest eigenvalue of the covariance matrix over the primitive
    /// observables, scaled by its largest diagonal entry.
    pub fn min_relative_eigenvalue(&self) -> f64 {
        let n = self.base.len();
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| self.cov[i][j]);
        let scale = (0..n).map(|i| self.cov[i][i].abs()).fold(0.0f64, f64::max).max(1e-300);
        let eig = nalgebra::SymmetricEigen::new(m).eigenvalues;
        eig.iter().fold(f64::INFINITY, |a, &b| a.min(b)) / scale
    }

    /// The observable whose mean carries the phase for this protocol.
    pub fn signal_label(&self) -> Label {
        signal_label(self.protocol)
    }
}

pub fn signal_label(protocol: Protocol) -> Label {
    match protocol {
        Protocol::Unmatched => Label::FzPrime,
        Protocol::Matched => Label::A,
        Protocol::Stored => Label::B,
    }
}

/// Sums of single-atom matrix elements over the whole ensemble:
/// `t0 = ∏_k e_k`, `t1[i] = Σ_k x_ik ∏_{l≠k} e_l`, and `t2[i][j]` the
/// corresponding double insertion, for the two atomic observables F_z and F̃_z.
#[derive(Clone, Copy, Debug, Default)]
struct Kernel {
    t0: C64,
    t1: [C64; 2],
    t2: [[C64; 2]; 2],
}

type AtomState = [C64; 2];

/// Accumulates `⟨⨂ bra| P (X_i) (X_j) |⨂ ket⟩` where `P = e^{iθ F̃_z}` (or the
/// identity when `theta` is zero) and X ∈ {F_z, F̃_z}. Every operator involved
/// is diagonal in the atomic z basis.
fn kernel(bra: &[AtomState], ket: &[AtomState], weights: &[f64], theta: f64) -> Kernel {
    let one = C64::new(1.0, 0.0);
    let mut k = Kernel {
        t0: one,
        ..Kernel::default()
    };
    for ((b, a), &g) in bra.iter().zip(ket).zip(weights) {
        let (p_up, p_dn) = if theta == 0.0 {
            (one, one)
        } else {
            let h = 0.5 * theta * g;
            (C64::from_polar(1.0, h), C64::from_polar(1.0, -h))
        };
        let up = b[0].conj() * a[0] * p_up;
        let dn = b[1].conj() * a[1] * p_dn;
        let e0 = up + dn;
        let ez = 0.5 * (up - dn);
        let u = [1.0, g];
        let e1 = [ez * u[0], ez * u[1]];
        for i in 0..2 {
            for j in i..2 {
                let same = e0 * (0.25 * u[i] * u[j]);
                k.t2[i][j] = k.t2[i][j] * e0 + k.t1[i] * e1[j] + k.t1[j] * e1[i] + k.t0 * same;
            }
        }
        for i in 0..2 {
            k.t1[i] = k.t1[i] * e0 + k.t0 * e1[i];
        }
        k.t0 *= e0;
    }
    k.t2[1][0] = k.t2[0][1];
    k
}

/// Conditional single-atom states for first-pulse eigenvalue `m`.
fn atom_states(weights: &[f64], chi: f64, phi: f64, protocol: Protocol, m: f64, out: &mut Vec<AtomState>) {
    let (c, s) = ((phi / 2.0).cos(), (phi / 2.0).sin());
    let r = std::f64::consts::FRAC_1_SQRT_2;
    out.clear();
    out.extend(weights.iter().map(|&g| {
        // R_z(θ)|+x⟩ with θ = χ g m, then R_y(φ)
        let theta = chi * g * m;
        let up = C64::from_polar(r, -theta / 2.0);
        let dn = C64::from_polar(r, theta / 2.0);
        let (up, dn) = (up * c - dn * s, up * s + dn * c);
        if protocol == Protocol::Stored {
            // second coupling of the same pulse with reversed sign: R_z(-θ)
            [up * C64::from_polar(1.0, theta / 2.0), dn * C64::from_polar(1.0, -theta / 2.0)]
        } else {
            [up, dn]
        }
    }));
}

/// All first and second moments of the protocol observables.
pub fn exact_moments(cfg: &EnsembleConfig, params: &ProtocolParams) -> MomentSet {
    let g = cfg.weights();
    let n = cfg.n_photons();
    let nf = n as f64;
    let (chi, phi, protocol) = (params.chi, params.phi, params.protocol);
    let amps = DickeAmplitudes::truncated(n);
    let matched = protocol == Protocol::Matched;

    // rolling conditional states for Dicke indices j, j+1, j+2
    let mut states: [Vec<AtomState>; 3] = Default::default();
    let range = amps.indices();
    let state_at = |j: usize, buf: &mut Vec<AtomState>| {
        atom_states(g, chi, phi, protocol, dicke_m(n, j), buf);
    };
    state_at(range.start, &mut states[0]);
    if range.start + 1 < range.end {
        state_at(range.start + 1, &mut states[1]);
    }

    let mut atom1 = [0.0; 2];
    let mut atom2 = [[0.0; 2]; 2];
    let mut s_plus = C64::default();
    let mut s_plus_x = [C64::default(); 2];
    let mut s_plus2 = C64::default();
    let mut diag_ladder = 0.0;
    let mut e1 = C64::default();
    let mut e1_x = [C64::default(); 2];
    let mut e2 = C64::default();
    let mut e1_s_plus = C64::default();
    let mut e1_s_minus = C64::default();

    for j in range.clone() {
        if j + 2 < range.end {
            state_at(j + 2, &mut states[2]);
        }
        let cj = amps.get(j);
        let w = cj * cj;
        let lam = raising(n, j);
        let lam_prev = if j > 0 { raising(n, j - 1) } else { 0.0 };
        diag_ladder += w * (lam_prev * lam_prev + lam * lam);

        let d = kernel(&states[0], &states[0], g, 0.0);
        for i in 0..2 {
            atom1[i] += w * d.t1[i].re;
            for k in 0..2 {
                atom2[i][k] += w * d.t2[i][k].re;
            }
        }
        if j + 1 < range.end {
            let c = amps.get(j + 1) * cj * lam;
            let up = kernel(&states[1], &states[0], g, 0.0);
            s_plus += c * up.t0;
            for i in 0..2 {
                s_plus_x[i] += c * up.t1[i];
            }
            if matched {
                e1_s_plus += c * kernel(&states[1], &states[0], g, chi).t0;
                e1_s_minus += c * kernel(&states[0], &states[1], g, chi).t0;
            }
        }
        if j + 2 < range.end {
            let c = amps.get(j + 2) * cj * lam * raising(n, j + 1);
            s_plus2 += c * kernel(&states[2], &states[0], g, 0.0).t0;
        }
        if matched {
            let k1 = kernel(&states[0], &states[0], g, chi);
            e1 += w * k1.t0;
            for i in 0..2 {
                e1_x[i] += w * k1.t1[i];
            }
            e2 += w * kernel(&states[0], &states[0], g, 2.0 * chi).t0;
        }
        states.rotate_left(1);
    }

    let sy = s_plus.im;
    let sy2 = (diag_ladder - 2.0 * s_plus2.re) / 4.0;
    let sy_x = [s_plus_x[0].im, s_plus_x[1].im];

    let mut means = vec![atom1[0], atom1[1], sy];
    let mut second = vec![
        vec![atom2[0][0], atom2[0][1], sy_x[0]],
        vec![atom2[1][0], atom2[1][1], sy_x[1]],
        vec![sy_x[0], sy_x[1], sy2],
    ];
    if matched {
        // J_y^out = cos(χF̃_z) J_y + sin(χF̃_z) J_x on a fresh coherent state
        let jy = nf / 2.0 * e1.im;
        let sin2 = (1.0 - e2.re) / 2.0;
        let jy2 = nf / 4.0 + (nf * nf / 4.0 - nf / 4.0) * sin2;
        let jy_x = [nf / 2.0 * e1_x[0].im, nf / 2.0 * e1_x[1].im];
        let e_sy = (e1_s_plus - e1_s_minus) / C64::new(0.0, 2.0);
        let jy_sy = nf / 2.0 * e_sy.im;
        means.push(jy);
        second[0].push(jy_x[0]);
        second[1].push(jy_x[1]);
        second[2].push(jy_sy);
        second.push(vec![jy_x[0], jy_x[1], jy_sy, jy2]);
    }
    let dim = means.len();
    let cov = (0..dim)
        .map(|i| (0..dim).map(|k| second[i][k] - means[i] * means[k]).collect())
        .collect();
    MomentSet::new(protocol, phi, n, chi, means, cov)
}

/// δφ = √Var(signal) / |d⟨signal⟩/dφ| at φ = 0, slope by Richardson-extrapolated
/// central differences with step `h`.
pub fn exact_delta_phi(cfg: &EnsembleConfig, params: &ProtocolParams, h: f64) -> Result<PhaseErrorResult> {
    let protocol = params.protocol;
    if protocol == Protocol::Unmatched && params.chi == 0.0 {
        return Err(Error::DegenerateProtocol(
            "F'_z = F_z - 2S_y/(n chi) is undefined for chi = 0".into(),
        ));
    }
    let label = signal_label(protocol);
    let at_zero = exact_moments(cfg, &params.with_phi(0.0));
    let variance = at_zero.variance(label).expect("signal label present");
    let slope = richardson_derivative(
        |phi| Ok(exact_moments(cfg, &params.with_phi(phi)).mean(label).expect("signal label present")),
        h,
    )?;
    PhaseErrorResult::from_moments(protocol, cfg.n_atoms(), variance, slope.value, check_regime(cfg, params))
}

/// ⟨S_y(τ)⟩ and Var(S_y(τ)) right after one coupling of strength χ, from the
/// Heisenberg rotation of the probe spin about z by χF̃_z:
/// S_y(τ) = cos(χF̃_z) S_y + sin(χF̃_z) S_x on uncorrelated coherent inputs.
pub fn sy_after_coupling(weights: &[f64], n_photons: usize, chi: f64) -> (f64, f64) {
    let nf = n_photons as f64;
    // ⟨sin(χF̃_z)⟩ vanishes for x-polarised atoms; ⟨cos(2χF̃_z)⟩ = ∏ cos(χ g_k)
    let cos2 = product_in_log_space(weights.iter().map(|&g| css_char(2.0 * chi * g, 1)));
    let sin_sq = (1.0 - cos2) / 2.0;
    let var = nf / 4.0 * (1.0 - sin_sq) + nf * nf / 4.0 * sin_sq;
    (0.0, var)
}

/// Var(A) at φ = 0: (n/2)·(1 + ∏_k cos(χ g_k))/2.
pub fn matched_variance_identity(weights: &[f64], n_photons: usize, chi: f64) -> f64 {
    let prod = product_in_log_space(weights.iter().map(|&g| css_char(2.0 * chi * g, 1)));
    n_photons as f64 / 2.0 * (1.0 + prod) / 2.0
}

/// Product of many factors in [-1, 1] without premature underflow handling
/// surprises: magnitudes summed in log space, sign tracked separately.
fn product_in_log_space(factors: impl Iterator<Item = f64>) -> f64 {
    let mut log_mag = 0.0;
    let mut negative = false;
    for f in factors {
        if f == 0.0 {
            return 0.0;
        }
        log_mag += f.abs().ln();
        negative ^= f < 0.0;
    }
    let mag = log_mag.exp();
    if negative {
        -mag
    } else {
        mag
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(n: usize, g: &[f64]) -> EnsembleConfig {
        EnsembleConfig::new(n, g.to_vec()).unwrap()
    }

    #[test]
    fn uncoupled_moments() {
        for p in Protocol::ALL {
            let c = cfg(7, &[0.3, 1.1, 2.0]);
            let m = exact_moments(&c, &ProtocolParams::new(0.0, 0.0, p));
            for l in m.labels() {
                assert_abs_diff_eq!(m.mean(l).unwrap(), 0.0, epsilon = 1e-14);
            }
            assert_abs_diff_eq!(m.variance(Label::Fz).unwrap(), 0.75, epsilon = 1e-14);
            assert_abs_diff_eq!(m.variance(Label::Sy).unwrap(), 7.0 / 4.0, epsilon = 1e-13);
            assert!(!m.labels().contains(&Label::FzPrime));
        }
    }

    #[test]
    fn matched_variance_small_case() {
        let c = cfg(4, &[0.5, 1.5]);
        let m = exact_moments(&c, &ProtocolParams::new(0.2, 0.0, Protocol::Matched));
        let expected = 2.0 * (1.0 + 0.1f64.cos() * 0.3f64.cos()) / 2.0;
        assert_abs_diff_eq!(expected, 1.950_563_785_922_063_3, epsilon = 1e-15);
        assert_abs_diff_eq!(m.variance(Label::A).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(matched_variance_identity(c.weights(), 4, 0.2), expected, epsilon = 1e-15);
    }

    #[test]
    fn single_atom_covariance() {
        let c = cfg(1, &[1.0]);
        let m = exact_moments(&c, &ProtocolParams::new(0.3, 0.0, Protocol::Unmatched));
        assert_abs_diff_eq!(m.mean(Label::Sy).unwrap(), 0.0, epsilon = 1e-15);
        let cov = m.covariance(Label::Fz, Label::Sy).unwrap();
        assert_abs_diff_eq!(cov, 0.25 * 0.15f64.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(cov, 0.037_359_533_118_399_8, epsilon = 1e-15);
    }

    #[test]
    fn fz_conserved_at_zero_phase() {
        let c = cfg(9, &[0.2, 0.9, 1.7, 1.0]);
        for chi in [0.0, 0.1, 0.7, 2.0] {
            for p in Protocol::ALL {
                let m = exact_moments(&c, &ProtocolParams::new(chi, 0.0, p));
                assert_abs_diff_eq!(m.mean(Label::Fz).unwrap(), 0.0, epsilon = 1e-13);
                assert_abs_diff_eq!(m.variance(Label::Fz).unwrap(), 1.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn symmetric_weights_collapse_tilde() {
        let c = EnsembleConfig::uniform(3, 11).unwrap();
        for p in Protocol::ALL {
            let m = exact_moments(&c, &ProtocolParams::new(0.4, 0.3, p));
            assert_abs_diff_eq!(m.mean(Label::Fz).unwrap(), m.mean(Label::FzTilde).unwrap(), epsilon = 1e-13);
            assert_abs_diff_eq!(
                m.variance(Label::Fz).unwrap(),
                m.variance(Label::FzTilde).unwrap(),
                epsilon = 1e-13
            );
            assert_abs_diff_eq!(
                m.covariance(Label::Fz, Label::Sy).unwrap(),
                m.covariance(Label::FzTilde, Label::Sy).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn rotation_of_css_mean() {
        let c = EnsembleConfig::uniform(3, 2).unwrap();
        let m = exact_moments(&c, &ProtocolParams::new(0.0, 0.4, Protocol::Unmatched));
        assert_abs_diff_eq!(m.mean(Label::Fz).unwrap(), -1.5 * 0.4f64.sin(), epsilon = 1e-14);
    }

    #[test]
    fn sy_closed_form_agrees() {
        let c = cfg(40, &[0.6, 1.3, 0.95]);
        let m = exact_moments(&c, &ProtocolParams::new(0.25, 0.0, Protocol::Unmatched));
        let (mean, var) = sy_after_coupling(c.weights(), 40, 0.25);
        assert_abs_diff_eq!(m.mean(Label::Sy).unwrap(), mean, epsilon = 1e-12);
        assert_abs_diff_eq!(m.variance(Label::Sy).unwrap(), var, epsilon = 1e-10);
    }

    #[test]
    fn stored_halves_variance_at_weak_coupling() {
        let n = 20_000;
        let c = EnsembleConfig::uniform(5, n).unwrap();
        let p = ProtocolParams::from_xi(1.0, n, 0.0, Protocol::Matched).unwrap();
        let a = exact_moments(&c, &p).variance(Label::A).unwrap();
        let b = exact_moments(&c, &ProtocolParams { protocol: Protocol::Stored, ..p })
            .variance(Label::B)
            .unwrap();
        assert!((b / a - 0.5).abs() < 1e-3, "{}", b / a);
    }

    #[test]
    fn delta_phi_symmetric_anchors() {
        let c = EnsembleConfig::uniform(4, 4096).unwrap();
        let p = ProtocolParams::from_xi(1.0, 4096, 0.0, Protocol::Unmatched).unwrap();
        let u = exact_delta_phi(&c, &p, 1e-4).unwrap();
        let anchor = 1f64.exp().sqrt() / 4.0;
        assert!((u.delta_phi / anchor - 1.0).abs() < 0.05, "{}", u.delta_phi);
        let m = exact_delta_phi(&c, &ProtocolParams { protocol: Protocol::Matched, ..p }, 1e-4).unwrap();
        assert!((m.delta_phi / (2f64.sqrt() * anchor) - 1.0).abs() < 0.05, "{}", m.delta_phi);
        assert!(matches!(
            exact_delta_phi(&c, &ProtocolParams::new(0.0, 0.0, Protocol::Unmatched), 1e-4),
            Err(Error::DegenerateProtocol(_))
        ));
        assert!(matches!(
            exact_delta_phi(&c, &ProtocolParams::new(0.0, 0.0, Protocol::Matched), 1e-4),
            Err(Error::DegenerateProtocol(_))
        ));
    }

    #[test]
    fn log_space_product_underflow() {
        let w = vec![1.0; 2_000_000];
        // every factor cos(χ) with χ = 0.05: product ≈ e^{-2500}, below f64 range
        assert_eq!(matched_variance_identity(&w, 100, 0.05), 25.0);
        assert_eq!(product_in_log_space([-0.5, 0.5, -1.0].into_iter()), 0.25);
        assert_eq!(product_in_log_space([-0.5, 0.5].into_iter()), -0.25);
    }
}
