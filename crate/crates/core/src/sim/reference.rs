//! Reference simulator in the full product basis, where every photon is an
//! individual spin-1/2. Exponential in n; meant only for cross-checking the
//! Dicke-ladder simulator and the moment oracle at tiny sizes.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::{EnsembleConfig, Protocol, ProtocolParams};
use crate::oracle::MomentSet;

/// Largest qubit count the reference accepts.
pub const MAX_QUBITS: usize = 24;

struct Register {
    psi: Vec<C64>,
}

#[derive(Clone, Copy)]
enum Pauli {
    X,
    Y,
    Z,
}

impl Register {
    /// Every qubit in (|0⟩ + |1⟩)/√2.
    fn plus_x(qubits: usize) -> Self {
        let dim = 1usize << qubits;
        let amp = (dim as f64).sqrt().recip();
        Self {
            psi: vec![C64::new(amp, 0.0); dim],
        }
    }

    fn apply_diagonal(&mut self, phase: impl Fn(usize) -> f64) {
        for (b, a) in self.psi.iter_mut().enumerate() {
            *a *= C64::from_polar(1.0, phase(b));
        }
    }

    fn apply_single(&mut self, q: usize, u: [[C64; 2]; 2]) {
        let bit = 1usize << q;
        for b in 0..self.psi.len() {
            if b & bit == 0 {
                let (x, y) = (self.psi[b], self.psi[b | bit]);
                self.psi[b] = u[0][0] * x + u[0][1] * y;
                self.psi[b | bit] = u[1][0] * x + u[1][1] * y;
            }
        }
    }

    /// Σ_q w_q σ_q/2 applied to the register.
    fn apply_sum(&self, terms: &[(usize, Pauli, f64)]) -> Vec<C64> {
        let mut out = vec![C64::default(); self.psi.len()];
        for &(q, p, w) in terms {
            let bit = 1usize << q;
            for (b, a) in self.psi.iter().enumerate() {
                let one = b & bit != 0;
                let h = 0.5 * w;
                match p {
                    Pauli::Z => out[b] += a * if one { -h } else { h },
                    Pauli::X => out[b ^ bit] += a * h,
                    Pauli::Y => out[b ^ bit] += a * C64::new(0.0, if one { -h } else { h }),
                }
            }
        }
        out
    }
}

fn spin_z(b: usize, qubits: std::ops::Range<usize>, weights: Option<&[f64]>) -> f64 {
    qubits
        .enumerate()
        .map(|(i, q)| {
            let w = weights.map_or(1.0, |w| w[i]);
            if b >> q & 1 == 0 {
                0.5 * w
            } else {
                -0.5 * w
            }
        })
        .sum()
}

/// Protocol moments computed in the 2^(N + n·pulses) product basis.
pub fn reference_moments(cfg: &EnsembleConfig, params: &ProtocolParams) -> Result<MomentSet> {
    let (n_atoms, n) = (cfg.n_atoms(), cfg.n_photons());
    let pulses = params.protocol.pulses();
    let qubits = n_atoms + n * pulses;
    if qubits > MAX_QUBITS {
        return Err(Error::Capacity {
            dims: format!("2^({n_atoms} + {n}x{pulses}) product basis"),
            required: 1u128 << qubits,
            cap: 1u128 << MAX_QUBITS,
        });
    }
    let g = cfg.weights();
    let atoms = 0..n_atoms;
    let pulse_qubits = |p: usize| n_atoms + p * n..n_atoms + (p + 1) * n;
    let mut reg = Register::plus_x(qubits);

    let couple = |reg: &mut Register, pulse: usize, chi: f64| {
        let probe = pulse_qubits(pulse);
        reg.apply_diagonal(|b| -chi * spin_z(b, probe.clone(), None) * spin_z(b, atoms.clone(), Some(g)));
    };
    couple(&mut reg, 0, params.chi);
    let (c, s) = ((params.phi / 2.0).cos(), (params.phi / 2.0).sin());
    let ry = [
        [C64::new(c, 0.0), C64::new(-s, 0.0)],
        [C64::new(s, 0.0), C64::new(c, 0.0)],
    ];
    for q in atoms.clone() {
        reg.apply_single(q, ry);
    }
    match params.protocol {
        Protocol::Unmatched => {}
        Protocol::Matched => couple(&mut reg, 1, params.chi),
        Protocol::Stored => couple(&mut reg, 0, -params.chi),
    }

    let mut ops: Vec<Vec<(usize, Pauli, f64)>> = vec![
        atoms.clone().map(|q| (q, Pauli::Z, 1.0)).collect(),
        atoms.clone().map(|q| (q, Pauli::Z, g[q])).collect(),
        pulse_qubits(0).map(|q| (q, Pauli::Y, 1.0)).collect(),
    ];
    if pulses == 2 {
        ops.push(pulse_qubits(1).map(|q| (q, Pauli::Y, 1.0)).collect());
    }
    let applied: Vec<Vec<C64>> = ops.iter().map(|t| reg.apply_sum(t)).collect();
    let inner = |a: &[C64], b: &[C64]| -> C64 { a.iter().zip(b).map(|(x, y)| x.conj() * y).sum() };
    let means: Vec<f64> = applied.iter().map(|v| inner(&reg.psi, v).re).collect();
    let cov = applied
        .iter()
        .enumerate()
        .map(|(i, a)| {
            applied
                .iter()
                .enumerate()
                .map(|(j, b)| inner(a, b).re - means[i] * means[j])
                .collect()
        })
        .collect();
    Ok(MomentSet::new(params.protocol, params.phi, n, params.chi, means, cov))
}

/// ⟨Σ σ_x/2⟩ over all qubits of a fresh register; used to sanity-check the
/// register conventions.
pub fn plus_x_polarisation(qubits: usize) -> f64 {
    let reg = Register::plus_x(qubits);
    let ops: Vec<_> = (0..qubits).map(|q| (q, Pauli::X, 1.0)).collect();
    let v = reg.apply_sum(&ops);
    reg.psi.iter().zip(&v).map(|(a, b)| (a.conj() * b).re).sum()
}
