use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::EnsembleConfig;
use crate::numeric::{dicke_m, DickeAmplitudes};

/// Default amplitude cap (2³⁰ complex doubles, 16 GiB).
pub const DEFAULT_CAP: u128 = 1 << 30;
/// Default atom-count cap; atoms always use the full 2^N product basis.
pub const DEFAULT_MAX_ATOMS: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_amplitudes: u128,
    pub max_atoms: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_amplitudes: DEFAULT_CAP,
            max_atoms: DEFAULT_MAX_ATOMS,
        }
    }
}

impl Limits {
    pub fn with_cap(max_amplitudes: u128) -> Self {
        Self {
            max_amplitudes,
            ..Self::default()
        }
    }
}

/// Layout of the amplitude array: atom z-product index (bit k set means atom
/// k is down) outermost, then the Dicke index of pulse 1, then of pulse 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub n_atoms: usize,
    pub n_photons: usize,
    pub pulses: usize,
}

impl Dims {
    pub fn atom_dim(&self) -> usize {
        1 << self.n_atoms
    }

    pub fn ladder(&self) -> usize {
        self.n_photons + 1
    }

    /// Photon block length per atomic basis state.
    pub fn photon_dim(&self) -> usize {
        self.ladder().pow(self.pulses as u32)
    }

    pub fn len(&self) -> usize {
        self.atom_dim() * self.photon_dim()
    }

    /// Stride of the Dicke index of `pulse` inside a photon block.
    pub fn stride(&self, pulse: usize) -> usize {
        if pulse + 1 == self.pulses {
            1
        } else {
            self.ladder()
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "2^{} atoms x {}^{} photon ladder",
            self.n_atoms,
            self.ladder(),
            self.pulses
        )
    }

    pub(crate) fn check(&self, limits: &Limits) -> Result<()> {
        if self.pulses == 0 || self.pulses > 2 {
            return Err(Error::Parameter(format!("pulses must be 1 or 2, got {}", self.pulses)));
        }
        let required = (1u128 << self.n_atoms.min(127)) * (self.ladder() as u128).pow(self.pulses as u32);
        if self.n_atoms > limits.max_atoms || required > limits.max_amplitudes {
            return Err(Error::Capacity {
                dims: format!("{} (atom cap {})", self.describe(), limits.max_atoms),
                required,
                cap: limits.max_amplitudes,
            });
        }
        Ok(())
    }
}

/// Joint pure state of the atoms and one or two probe pulses.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    pub dims: Dims,
    pub amplitudes: Vec<C64>,
}

impl QuantumState {
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &[C64]) -> C64 {
        self.amplitudes
            .iter()
            .zip(other)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Photon blocks, one per atomic basis state.
    pub(crate) fn blocks(&self) -> std::slice::ChunksExact<'_, C64> {
        self.amplitudes.chunks_exact(self.dims.photon_dim())
    }
}

/// Uncorrelated coherent spin states along +x for atoms and every pulse.
pub fn initial_state(cfg: &EnsembleConfig, pulses: usize, limits: &Limits) -> Result<QuantumState> {
    let dims = Dims {
        n_atoms: cfg.n_atoms(),
        n_photons: cfg.n_photons(),
        pulses,
    };
    dims.check(limits)?;
    let ladder = DickeAmplitudes::full(cfg.n_photons());
    let photon: Vec<f64> = if pulses == 1 {
        ladder.values.clone()
    } else {
        ladder
            .values
            .iter()
            .flat_map(|a| ladder.values.iter().map(move |b| a * b))
            .collect()
    };
    let atom_amp = 0.5f64.powf(dims.n_atoms as f64 / 2.0);
    let mut amplitudes = Vec::with_capacity(dims.len());
    for _ in 0..dims.atom_dim() {
        amplitudes.extend(photon.iter().map(|&p| C64::new(atom_amp * p, 0.0)));
    }
    Ok(QuantumState { dims, amplitudes })
}

/// F̃_z eigenvalue Σ_k g_k σ_k / 2 for every atomic basis index.
pub(crate) fn weighted_fz_diagonal(weights: &[f64]) -> Vec<f64> {
    (0..1usize << weights.len())
        .map(|idx| {
            weights
                .iter()
                .enumerate()
                .map(|(k, g)| if idx >> k & 1 == 0 { 0.5 * g } else { -0.5 * g })
                .sum()
        })
        .collect()
}

/// Diagonal coupling exp(-i·sign·χ·S_z(pulse)·F̃_z), applied in one pass.
pub fn apply_qnd(state: &mut QuantumState, chi: f64, weights: &[f64], pulse: usize, sign: f64) -> Result<()> {
    let dims = state.dims;
    if pulse >= dims.pulses {
        return Err(Error::Descriptor(format!("pulse {pulse} absent (state has {})", dims.pulses)));
    }
    if weights.len() != dims.n_atoms {
        return Err(Error::Parameter("weight vector length differs from atom count".into()));
    }
    let ftilde = weighted_fz_diagonal(weights);
    let (ladder, stride) = (dims.ladder(), dims.stride(pulse));
    let n = dims.n_photons;
    state
        .amplitudes
        .par_chunks_mut(dims.photon_dim())
        .enumerate()
        .for_each(|(atom_idx, block)| {
            let angle = -sign * chi * ftilde[atom_idx];
            let phases: Vec<C64> = (0..ladder)
                .map(|j| C64::from_polar(1.0, angle * dicke_m(n, j)))
                .collect();
            for (p, amp) in block.iter_mut().enumerate() {
                *amp *= phases[(p / stride) % ladder];
            }
        });
    Ok(())
}

/// exp(-iφF_y): an independent rotation of every atom about y.
pub fn apply_rotation(state: &mut QuantumState, phi: f64) {
    let dims = state.dims;
    let (c, s) = ((phi / 2.0).cos(), (phi / 2.0).sin());
    let pd = dims.photon_dim();
    for k in 0..dims.n_atoms {
        let bit = 1usize << k;
        // pair up blocks (idx, idx | bit) with bit k clear in idx
        for chunk in state.amplitudes.chunks_exact_mut(2 * bit * pd) {
            let (up, dn) = chunk.split_at_mut(bit * pd);
            up.par_iter_mut().zip(dn.par_iter_mut()).for_each(|(u, d)| {
                let (a, b) = (*u, *d);
                *u = a * c - b * s;
                *d = a * s + b * c;
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn single_atom_single_photon_start() {
        let cfg = EnsembleConfig::uniform(1, 1).unwrap();
        let s = initial_state(&cfg, 1, &Limits::default()).unwrap();
        assert_eq!(s.amplitudes.len(), 4);
        for a in &s.amplitudes {
            assert_abs_diff_eq!(a.re, 0.5, epsilon = 1e-15);
            assert_eq!(a.im, 0.0);
        }
    }

    #[test]
    fn two_photon_ladder_amplitudes() {
        let cfg = EnsembleConfig::uniform(2, 2).unwrap();
        let s = initial_state(&cfg, 1, &Limits::default()).unwrap();
        // atom amplitude 1/2 times photon (1/2, 1/√2, 1/2)
        assert_abs_diff_eq!(s.amplitudes[0].re, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes[1].re, 0.5 * 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes[2].re, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn capacity_error_names_dimensions() {
        let cfg = EnsembleConfig::uniform(3, 100).unwrap();
        let err = initial_state(&cfg, 2, &Limits::with_cap(1000)).unwrap_err();
        match err {
            Error::Capacity { dims, required, cap } => {
                assert!(dims.contains("2^3") && dims.contains("101^2"), "{dims}");
                assert_eq!(required, 8 * 101 * 101);
                assert_eq!(cap, 1000);
            }
            e => panic!("unexpected {e}"),
        }
        let cfg = EnsembleConfig::uniform(15, 1).unwrap();
        assert!(matches!(initial_state(&cfg, 1, &Limits::default()), Err(Error::Capacity { .. })));
    }

    #[test]
    fn qnd_phase_read_off_diagonal() {
        let cfg = EnsembleConfig::uniform(1, 1).unwrap();
        let mut s = initial_state(&cfg, 1, &Limits::default()).unwrap();
        let before = s.clone();
        apply_qnd(&mut s, 0.0, cfg.weights(), 0, 1.0).unwrap();
        assert_eq!(s, before);
        apply_qnd(&mut s, PI, cfg.weights(), 0, 1.0).unwrap();
        // atom up (index 0), photon m = +1/2 (Dicke index 1)
        let ratio = s.amplitudes[1] / before.amplitudes[1];
        assert_abs_diff_eq!(ratio.re, (PI / 4.0).cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(ratio.im, -(PI / 4.0).sin(), epsilon = 1e-15);
    }

    #[test]
    fn qnd_inverse_and_norm() {
        let cfg = EnsembleConfig::new(5, vec![0.4, 1.3, 0.8]).unwrap();
        let mut s = initial_state(&cfg, 2, &Limits::default()).unwrap();
        apply_rotation(&mut s, 0.3);
        let before = s.clone();
        apply_qnd(&mut s, 0.7, cfg.weights(), 1, 1.0).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        apply_qnd(&mut s, 0.7, cfg.weights(), 1, -1.0).unwrap();
        for (a, b) in s.amplitudes.iter().zip(&before.amplitudes) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(matches!(apply_qnd(&mut s, 0.7, cfg.weights(), 2, 1.0), Err(Error::Descriptor(_))));
    }

    #[test]
    fn rotation_by_pi_flips_spin() {
        let cfg = EnsembleConfig::uniform(1, 1).unwrap();
        let mut s = initial_state(&cfg, 1, &Limits::default()).unwrap();
        // prepare |↑⟩ ⊗ photon by hand
        s.amplitudes = vec![C64::new(0.5f64.sqrt(), 0.0), C64::new(0.5f64.sqrt(), 0.0), C64::default(), C64::default()];
        apply_rotation(&mut s, PI);
        assert!(s.amplitudes[0].norm() < 1e-15 && s.amplitudes[1].norm() < 1e-15);
        assert_abs_diff_eq!(s.amplitudes[2].norm(), 0.5f64.sqrt(), epsilon = 1e-15);
        let before = s.clone();
        apply_rotation(&mut s, 0.0);
        assert_eq!(s, before);
    }
}
