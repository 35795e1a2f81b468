use num_complex::Complex64 as C64;

use super::state::QuantumState;
use crate::error::{Error, Result};
use crate::numeric::{dicke_m, raising};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// A single-subsystem Hermitian operator.
#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    /// Σ_k w_k f_axis^k over the atoms.
    Atoms { axis: Axis, weights: Vec<f64> },
    /// Collective spin component of one probe pulse.
    Photon { pulse: usize, axis: Axis },
}

/// Real linear combination of [`Term`]s.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Observable {
    pub terms: Vec<(f64, Term)>,
}

impl Observable {
    pub fn term(coef: f64, term: Term) -> Self {
        Self {
            terms: vec![(coef, term)],
        }
    }

    pub fn atoms(axis: Axis, weights: Vec<f64>) -> Self {
        Self::term(1.0, Term::Atoms { axis, weights })
    }

    /// Symmetric collective spin component of `n_atoms` atoms.
    pub fn collective(axis: Axis, n_atoms: usize) -> Self {
        Self::atoms(axis, vec![1.0; n_atoms])
    }

    pub fn photon(pulse: usize, axis: Axis) -> Self {
        Self::term(1.0, Term::Photon { pulse, axis })
    }

    pub fn plus(mut self, coef: f64, other: Observable) -> Self {
        self.terms
            .extend(other.terms.into_iter().map(|(c, t)| (coef * c, t)));
        self
    }

    /// O|ψ⟩.
    pub fn apply(&self, state: &QuantumState) -> Result<Vec<C64>> {
        let mut out = vec![C64::default(); state.amplitudes.len()];
        for (coef, term) in &self.terms {
            apply_term(state, *coef, term, &mut out)?;
        }
        Ok(out)
    }
}

fn apply_term(state: &QuantumState, coef: f64, term: &Term, out: &mut [C64]) -> Result<()> {
    let dims = state.dims;
    let pd = dims.photon_dim();
    let psi = &state.amplitudes;
    match term {
        Term::Atoms { axis, weights } => {
            if weights.len() != dims.n_atoms {
                return Err(Error::Descriptor(format!(
                    "atomic term has {} weights for {} atoms",
                    weights.len(),
                    dims.n_atoms
                )));
            }
            for (k, &w) in weights.iter().enumerate() {
                let bit = 1usize << k;
                let h = 0.5 * coef * w;
                for idx in 0..dims.atom_dim() {
                    let down = idx & bit != 0;
                    let (target, factor) = match axis {
                        Axis::Z => (idx, C64::new(if down { -h } else { h }, 0.0)),
                        Axis::X => (idx ^ bit, C64::new(h, 0.0)),
                        // f_y|↑⟩ = (i/2)|↓⟩, f_y|↓⟩ = (-i/2)|↑⟩
                        Axis::Y => (idx ^ bit, C64::new(0.0, if down { -h } else { h })),
                    };
                    let src = &psi[idx * pd..(idx + 1) * pd];
                    let dst = &mut out[target * pd..(target + 1) * pd];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += factor * s;
                    }
                }
            }
        }
        Term::Photon { pulse, axis } => {
            if *pulse >= dims.pulses {
                return Err(Error::Descriptor(format!(
                    "observable references pulse {pulse}, state has {}",
                    dims.pulses
                )));
            }
            let (n, ladder, stride) = (dims.n_photons, dims.ladder(), dims.stride(*pulse));
            for (block_in, block_out) in psi.chunks_exact(pd).zip(out.chunks_exact_mut(pd)) {
                for p in 0..pd {
                    let j = (p / stride) % ladder;
                    let amp = coef * block_in[p];
                    match axis {
                        Axis::Z => block_out[p] += amp * dicke_m(n, j),
                        Axis::X | Axis::Y => {
                            // S_+|j⟩ = λ_j|j+1⟩, S_-|j⟩ = λ_{j-1}|j-1⟩
                            let (up_f, dn_f) = match axis {
                                Axis::X => (C64::new(0.5, 0.0), C64::new(0.5, 0.0)),
                                _ => (C64::new(0.0, -0.5), C64::new(0.0, 0.5)),
                            };
                            if j < n {
                                block_out[p + stride] += up_f * raising(n, j) * amp;
                            }
                            if j > 0 {
                                block_out[p - stride] += dn_f * raising(n, j - 1) * amp;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// ⟨ψ|O|ψ⟩ (real part; O is Hermitian).
pub fn expectation(state: &QuantumState, obs: &Observable) -> Result<f64> {
    Ok(state.inner(&obs.apply(state)?).re)
}

/// Symmetrised covariance ½⟨XY + YX⟩ − ⟨X⟩⟨Y⟩.
pub fn covariance(state: &QuantumState, a: &Observable, b: &Observable) -> Result<f64> {
    let av = a.apply(state)?;
    let bv = b.apply(state)?;
    Ok(covariance_of(state, &av, &bv))
}

/// Covariance from precomputed X|ψ⟩ and Y|ψ⟩.
pub(crate) fn covariance_of(state: &QuantumState, av: &[C64], bv: &[C64]) -> f64 {
    let second: C64 = av.iter().zip(bv).map(|(x, y)| x.conj() * y).sum();
    second.re - state.inner(av).re * state.inner(bv).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EnsembleConfig;
    use crate::sim::state::{apply_rotation, initial_state, Limits};
    use approx::assert_abs_diff_eq;

    #[test]
    fn css_moments() {
        let cfg = EnsembleConfig::uniform(3, 6).unwrap();
        let s = initial_state(&cfg, 2, &Limits::default()).unwrap();
        let fz = Observable::collective(Axis::Z, 3);
        assert_abs_diff_eq!(expectation(&s, &fz).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(covariance(&s, &fz, &fz).unwrap(), 0.75, epsilon = 1e-14);
        let fx = Observable::collective(Axis::X, 3);
        assert_abs_diff_eq!(expectation(&s, &fx).unwrap(), 1.5, epsilon = 1e-14);
        for pulse in 0..2 {
            let sy = Observable::photon(pulse, Axis::Y);
            assert_abs_diff_eq!(expectation(&s, &sy).unwrap(), 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(covariance(&s, &sy, &sy).unwrap(), 1.5, epsilon = 1e-13);
            let sx = Observable::photon(pulse, Axis::X);
            assert_abs_diff_eq!(expectation(&s, &sx).unwrap(), 3.0, epsilon = 1e-13);
        }
        let bad = Observable::photon(2, Axis::Y);
        assert!(matches!(expectation(&s, &bad), Err(Error::Descriptor(_))));
    }

    #[test]
    fn large_ladder_is_sx_eigenstate() {
        let cfg = EnsembleConfig::uniform(1, 50).unwrap();
        let s = initial_state(&cfg, 1, &Limits::default()).unwrap();
        let sx = Observable::photon(0, Axis::X);
        assert_abs_diff_eq!(expectation(&s, &sx).unwrap(), 25.0, epsilon = 1e-12);
        assert_abs_diff_eq!(covariance(&s, &sx, &sx).unwrap(), 0.0, epsilon = 1e-10);
    }

    /// ⟨F_z⟩ = -(N/2) sin φ, checked against a three-spin product-state sum.
    #[test]
    fn rotated_css_mean() {
        let cfg = EnsembleConfig::uniform(3, 1).unwrap();
        for phi in [0.1, 0.8, 2.5] {
            let mut s = initial_state(&cfg, 1, &Limits::default()).unwrap();
            apply_rotation(&mut s, phi);
            let fz = expectation(&s, &Observable::collective(Axis::Z, 3)).unwrap();
            // brute force: single-spin Bloch vector after R_y(φ) is (cos φ, 0, -sin φ)
            let up = ((phi / 2.0).cos() - (phi / 2.0).sin()) / 2f64.sqrt();
            let dn = ((phi / 2.0).sin() + (phi / 2.0).cos()) / 2f64.sqrt();
            let single = 0.5 * (up * up - dn * dn);
            assert_abs_diff_eq!(fz, 3.0 * single, epsilon = 1e-14);
            assert_abs_diff_eq!(fz, -1.5 * phi.sin(), epsilon = 1e-14);
        }
    }
}
