//! Small numerical kernels: coherent-spin characteristic function, Dicke
//! amplitudes of a coherent spin state, 1-D minimisation and Richardson
//! differentiation.

use crate::error::{Error, Result};

/// Above this exponent `cos^m` is evaluated as `exp(m·ln|cos|)` with the sign
/// tracked separately.
const LOG_SPACE_POWER: usize = 1000;

/// Amplitudes smaller than `exp(-DICKE_LOG_CUTOFF)` times the peak amplitude
/// are dropped; products of two such amplitudes are below double precision.
pub const DICKE_LOG_CUTOFF: f64 = 40.0;

/// ⟨e^{iθ Σ s_z}⟩ over a coherent spin state of `m` spin-1/2 particles polarised
/// along x, i.e. cos^m(θ/2).
pub fn css_char(theta: f64, m: usize) -> f64 {
    let c = (theta / 2.0).cos();
    if m == 0 {
        return 1.0;
    }
    if m <= LOG_SPACE_POWER {
        return c.powi(m as i32);
    }
    if c == 0.0 {
        return 0.0;
    }
    let sign = if c < 0.0 && m % 2 == 1 { -1.0 } else { 1.0 };
    sign * (m as f64 * c.abs().ln()).exp()
}

/// Dicke-ladder amplitudes of the spin-n/2 coherent state along +x, restricted
/// to the indices that carry non-negligible weight.
///
/// Index `j` corresponds to S_z eigenvalue `j - n/2`; the amplitude is
/// √C(n, j) / 2^{n/2}, all real and positive.
#[derive(Clone, Debug)]
pub struct DickeAmplitudes {
    pub n: usize,
    /// First Dicke index kept.
    pub offset: usize,
    pub values: Vec<f64>,
}

impl DickeAmplitudes {
    /// Full ladder, every index 0..=n kept (tiny tail values may underflow to 0).
    pub fn full(n: usize) -> Self {
        Self::build(n, f64::INFINITY)
    }

    /// Ladder truncated at [`DICKE_LOG_CUTOFF`].
    pub fn truncated(n: usize) -> Self {
        Self::build(n, DICKE_LOG_CUTOFF)
    }

    fn build(n: usize, cutoff: f64) -> Self {
        let peak = n / 2;
        let nf = n as f64;
        // log-amplitude ratios from the peak outwards:
        // ln a_{j+1} - ln a_j = ½ ln((n - j)/(j + 1))
        let mut upper = Vec::new();
        let mut la = 0.0;
        for j in peak..n {
            la += 0.5 * ((nf - j as f64) / (j as f64 + 1.0)).ln();
            if -la > cutoff {
                break;
            }
            upper.push(la);
        }
        let mut lower = Vec::new();
        la = 0.0;
        for j in (1..=peak).rev() {
            la -= 0.5 * ((nf - (j - 1) as f64) / j as f64).ln();
            if -la > cutoff {
                break;
            }
            lower.push(la);
        }
        let offset = peak - lower.len();
        let logs: Vec<f64> = lower
            .iter()
            .rev()
            .copied()
            .chain(std::iter::once(0.0))
            .chain(upper)
            .collect();
        let mut values: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        values.iter_mut().for_each(|v| *v /= norm);
        Self { n, offset, values }
    }

    /// Amplitude at Dicke index `j`, zero outside the kept window.
    pub fn get(&self, j: usize) -> f64 {
        j.checked_sub(self.offset)
            .and_then(|i| self.values.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn indices(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.values.len()
    }
}

/// S_z eigenvalue of Dicke index `j` for `n` spin-1/2 particles.
pub fn dicke_m(n: usize, j: usize) -> f64 {
    j as f64 - n as f64 / 2.0
}

/// ⟨m+1|S_+|m⟩ for spin s = n/2 at Dicke index `j` (m = j - n/2).
pub fn raising(n: usize, j: usize) -> f64 {
    // s(s+1) - m(m+1) = (n - j)(j + 1)
    ((n - j) as f64 * (j + 1) as f64).sqrt()
}

/// Golden-section minimisation of a unimodal `f` on `[lo, hi]`.
///
/// Returns `(argmin, min)`. Fails with [`Error::NonConvergence`] if the bracket
/// has not shrunk below `tol` after `max_iter` steps.
pub fn golden_section<F>(f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..max_iter {
        if (b - a).abs() < tol {
            let x = 0.5 * (a + b);
            let fx = f(x);
            return Ok(if fx <= fc.min(fd) {
                (x, fx)
            } else if fc <= fd {
                (c, fc)
            } else {
                (d, fd)
            });
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let (x, fx) = if fc <= fd { (c, fc) } else { (d, fd) };
    Err(Error::NonConvergence {
        best_xi: x,
        best_delta_phi: fx,
    })
}

/// Central-difference derivative at 0 with one Richardson level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivative {
    pub value: f64,
    /// Plain central difference with step h.
    pub coarse: f64,
    /// Plain central difference with step h/2.
    pub fine: f64,
}

pub fn richardson_derivative<F>(mut f: F, h: f64) -> Result<Derivative>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Parameter(format!("finite-difference step must be positive, got {h}")));
    }
    let coarse = (f(h)? - f(-h)?) / (2.0 * h);
    let fine = (f(h / 2.0)? - f(-h / 2.0)?) / h;
    Ok(Derivative {
        value: (4.0 * fine - coarse) / 3.0,
        coarse,
        fine,
    })
}
