use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::observable::Axis;
use super::state::{Limits, QuantumState};
use crate::error::{Error, Result};

/// Mean-spin norms below this make the Wineland parameter undefined.
pub const MEAN_SPIN_FLOOR: f64 = 1e-9;

/// Density matrix of the atoms after tracing out every probe pulse.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomicReducedState {
    pub n_atoms: usize,
    pub rho: DMatrix<C64>,
    pub purity: f64,
}

impl AtomicReducedState {
    pub fn from_matrix(n_atoms: usize, rho: DMatrix<C64>) -> Result<Self> {
        let dim = 1usize << n_atoms;
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::Parameter(format!(
                "density matrix is {}x{}, expected {dim}x{dim}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let purity = rho.iter().map(|z| z.norm_sqr()).sum();
        Ok(Self { n_atoms, rho, purity })
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    /// Largest |ρ_ij − conj(ρ_ji)|.
    pub fn hermiticity_defect(&self) -> f64 {
        let d = &self.rho - self.rho.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.rho + self.rho.adjoint()).scale(0.5);
        nalgebra::SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }

    /// Tr(ρ F_a F_b) for collective atomic spin components.
    fn second_moment(&self, a: Axis, b: Axis) -> C64 {
        let dim = self.rho.nrows();
        let mut acc = C64::default();
        let mut basis = vec![C64::default(); dim];
        for j in 0..dim {
            basis[j] = C64::new(1.0, 0.0);
            let col = collective_apply(a, &collective_apply(b, &basis, self.n_atoms), self.n_atoms);
            basis[j] = C64::default();
            for (i, v) in col.iter().enumerate() {
                if *v != C64::default() {
                    acc += self.rho[(j, i)] * v;
                }
            }
        }
        acc
    }

    fn first_moment(&self, a: Axis) -> f64 {
        let dim = self.rho.nrows();
        let mut acc = C64::default();
        let mut basis = vec![C64::default(); dim];
        for j in 0..dim {
            basis[j] = C64::new(1.0, 0.0);
            let col = collective_apply(a, &basis, self.n_atoms);
            basis[j] = C64::default();
            for (i, v) in col.iter().enumerate() {
                if *v != C64::default() {
                    acc += self.rho[(j, i)] * v;
                }
            }
        }
        acc.re
    }
}

/// F_axis applied to an atomic state vector (bit k set = atom k down).
fn collective_apply(axis: Axis, v: &[C64], n_atoms: usize) -> Vec<C64> {
    let mut out = vec![C64::default(); v.len()];
    for k in 0..n_atoms {
        let bit = 1usize << k;
        for (idx, amp) in v.iter().enumerate() {
            if *amp == C64::default() {
                continue;
            }
            let down = idx & bit != 0;
            match axis {
                Axis::Z => out[idx] += amp * if down { -0.5 } else { 0.5 },
                Axis::X => out[idx ^ bit] += amp * 0.5,
                Axis::Y => out[idx ^ bit] += amp * C64::new(0.0, if down { -0.5 } else { 0.5 }),
            }
        }
    }
    out
}

/// Partial trace over all photon indices.
pub fn atomic_reduced(state: &QuantumState, limits: &Limits) -> Result<AtomicReducedState> {
    let dim = state.dims.atom_dim();
    let required = (dim as u128) * (dim as u128);
    if required > limits.max_amplitudes {
        return Err(Error::Capacity {
            dims: format!("{dim}x{dim} atomic density matrix"),
            required,
            cap: limits.max_amplitudes,
        });
    }
    let blocks: Vec<&[C64]> = state.blocks().collect();
    let mut rho = DMatrix::<C64>::zeros(dim, dim);
    for a in 0..dim {
        for b in a..dim {
            let v: C64 = blocks[a].iter().zip(blocks[b]).map(|(x, y)| x * y.conj()).sum();
            rho[(a, b)] = v;
            rho[(b, a)] = v.conj();
        }
    }
    AtomicReducedState::from_matrix(state.dims.n_atoms, rho)
}

/// Kitagawa–Ueda and Wineland parameters; values below one certify squeezing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezingParams {
    /// 4·min_⊥ Var(F_⊥)/N.
    pub kitagawa_ueda: f64,
    /// N·min_⊥ Var(F_⊥)/|⟨F⟩|².
    pub wineland: f64,
    pub min_transverse_variance: f64,
    pub mean_spin: [f64; 3],
}

pub fn squeezing_params(rho: &AtomicReducedState) -> Result<SqueezingParams> {
    let axes = [Axis::X, Axis::Y, Axis::Z];
    let mean = axes.map(|a| rho.first_moment(a));
    let norm = mean.iter().map(|m| m * m).sum::<f64>().sqrt();
    if norm < MEAN_SPIN_FLOOR {
        return Err(Error::MeanSpinDegenerate { norm });
    }
    let mut cov = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let c = rho.second_moment(axes[i], axes[j]).re - mean[i] * mean[j];
            cov[i][j] = c;
            cov[j][i] = c;
        }
    }
    let n_hat = mean.map(|m| m / norm);
    let reference = if n_hat[2].abs() < 0.9 { [0.0, 0.0, 1.0] } else { [1.0, 0.0, 0.0] };
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let proj = dot(reference, n_hat);
    let mut e1 = [0.0; 3];
    for i in 0..3 {
        e1[i] = reference[i] - proj * n_hat[i];
    }
    let e1_norm = dot(e1, e1).sqrt();
    e1 = e1.map(|x| x / e1_norm);
    let e2 = [
        n_hat[1] * e1[2] - n_hat[2] * e1[1],
        n_hat[2] * e1[0] - n_hat[0] * e1[2],
        n_hat[0] * e1[1] - n_hat[1] * e1[0],
    ];
    let quad = |u: [f64; 3], v: [f64; 3]| {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += u[i] * cov[i][j] * v[j];
            }
        }
        s
    };
    let (a, b, d) = (quad(e1, e1), quad(e1, e2), quad(e2, e2));
    let min_var = 0.5 * (a + d) - (0.25 * (a - d).powi(2) + b * b).sqrt();
    let n_atoms = rho.n_atoms as f64;
    Ok(SqueezingParams {
        kitagawa_ueda: 4.0 * min_var / n_atoms,
        wineland: n_atoms * min_var / (norm * norm),
        min_transverse_variance: min_var,
        mean_spin: mean,
    })
}
