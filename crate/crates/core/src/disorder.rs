//! Monte Carlo averages over random coupling weights.
//!
//! Each sample draws a fresh weight vector from its own ChaCha stream (the
//! stream number is the sample index), so results depend only on the seed and
//! the sample count, never on execution order. Phase errors are averaged
//! moments-first: the per-sample signal variances and slopes are averaged
//! separately and only then combined into δφ.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formulas;
use crate::model::{empirical_disorder, make_weights_stream, CouplingDistribution, CouplingKind, EnsembleConfig, Protocol, ProtocolParams};
use crate::oracle::exact_delta_phi;
use crate::sim::{run_protocol, Limits};

/// Scalar evaluated for every disorder sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    /// Atom average of e^{-ξg²/2}, the single-atom coherence factor of the
    /// mean signal.
    CoherenceFactor,
    /// Closed-form δφ at the sample's empirical coupling variance.
    Formula,
    /// δφ from the moment oracle at the sample's weights.
    Oracle,
    /// δφ from the state-vector simulator at the sample's weights.
    Simulation,
}

impl Quantity {
    pub fn is_phase_error(self) -> bool {
        self != Quantity::CoherenceFactor
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coherence" | "coherence-factor" => Ok(Self::CoherenceFactor),
            "formula" => Ok(Self::Formula),
            "oracle" => Ok(Self::Oracle),
            "sim" | "simulation" => Ok(Self::Simulation),
            other => Err(Error::Parameter(format!("unknown quantity '{other}'"))),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CoherenceFactor => "coherence-factor",
            Self::Formula => "formula",
            Self::Oracle => "oracle",
            Self::Simulation => "simulation",
        })
    }
}

/// A quantity plus the numerical settings its evaluator needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub quantity: Quantity,
    /// Finite-difference step for oracle and simulator slopes.
    pub h: f64,
    pub limits: Limits,
}

impl Evaluation {
    pub fn new(quantity: Quantity) -> Self {
        Self {
            quantity,
            h: 1e-4,
            limits: Limits::default(),
        }
    }
}

/// Disorder-averaged signal variance and slope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AveragedMoments {
    pub signal_variance: f64,
    pub signal_slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DisorderStats {
    /// Sample mean for scalar quantities; √⟨Var⟩/|⟨slope⟩| for phase errors.
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    /// Per-sample values (per-sample δφ for phase errors).
    pub per_sample: Option<Vec<f64>>,
    pub seed: u64,
    /// Present for phase-error quantities.
    pub moments: Option<AveragedMoments>,
    /// Mean and population variance of all drawn weights pooled together.
    pub pooled_disorder: (f64, f64),
}

enum SampleValue {
    Scalar(f64),
    Moments { variance: f64, slope: f64, delta_phi: f64 },
}

fn evaluate(eval: &Evaluation, cfg: &EnsembleConfig, params: &ProtocolParams) -> Result<SampleValue> {
    let xi = params.xi(cfg.n_photons());
    let from = |r: formulas::PhaseErrorResult| SampleValue::Moments {
        variance: r.signal_variance,
        slope: r.signal_slope,
        delta_phi: r.delta_phi,
    };
    Ok(match eval.quantity {
        Quantity::CoherenceFactor => {
            let g = cfg.weights();
            SampleValue::Scalar(g.iter().map(|w| (-xi * w * w / 2.0).exp()).sum::<f64>() / g.len() as f64)
        }
        Quantity::Formula => {
            let (_, dg2) = cfg.disorder();
            from(formulas::delta_phi(params.protocol, xi, dg2, cfg.n_atoms())?)
        }
        Quantity::Oracle => from(exact_delta_phi(cfg, params, eval.h)?),
        Quantity::Simulation => from(run_protocol(cfg, params, eval.h, &eval.limits)?),
    })
}

/// Mean computed relative to the first element, so identical inputs return
/// that element exactly.
fn shifted_mean(xs: &[f64]) -> f64 {
    let shift = xs[0];
    shift + xs.iter().map(|x| x - shift).sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean, sample standard deviation over √n.
fn std_error(xs: &[f64], mean: f64) -> f64 {
    let n = xs.len() as f64;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    (ss / (n - 1.0)).sqrt() / n.sqrt()
}

/// Averages `eval` over `n_samples` weight vectors drawn from `dist`. The
/// ensemble size and photon number come from `base`; its weights are ignored.
pub fn disorder_average(
    eval: &Evaluation,
    dist: &CouplingDistribution,
    n_samples: usize,
    base: &EnsembleConfig,
    params: &ProtocolParams,
) -> Result<DisorderStats> {
    if n_samples < 2 {
        return Err(Error::Parameter(format!("need at least 2 samples, got {n_samples}")));
    }
    let (n_atoms, n_photons) = (base.n_atoms(), base.n_photons());
    let outcomes: Vec<Result<(Vec<f64>, SampleValue)>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let weights = make_weights_stream(dist, n_atoms, i as u64)?;
            let cfg = EnsembleConfig::new(n_photons, weights.clone())?;
            Ok((weights, evaluate(eval, &cfg, params)?))
        })
        .collect();
    let mut weights = Vec::with_capacity(n_samples * n_atoms);
    let mut values = Vec::with_capacity(n_samples);
    for (offset, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((w, v)) => {
                weights.extend(w);
                values.push(v);
            }
            Err(source) => {
                return Err(Error::Sample {
                    offset,
                    source: Box::new(source),
                })
            }
        }
    }
    let pooled_disorder = empirical_disorder(&weights)?;
    let n = n_samples as f64;

    if !eval.quantity.is_phase_error() {
        let xs: Vec<f64> = values
            .iter()
            .map(|v| match v {
                SampleValue::Scalar(x) => *x,
                SampleValue::Moments { delta_phi, .. } => *delta_phi,
            })
            .collect();
        let mean = shifted_mean(&xs);
        return Ok(DisorderStats {
            mean,
            std_error: std_error(&xs, mean),
            n_samples,
            per_sample: Some(xs),
            seed: dist.seed,
            moments: None,
            pooled_disorder,
        });
    }

    let (mut var, mut slope, mut per) = (Vec::new(), Vec::new(), Vec::new());
    for v in &values {
        if let SampleValue::Moments { variance, slope: s, delta_phi } = v {
            var.push(*variance);
            slope.push(*s);
            per.push(*delta_phi);
        }
    }
    let (v_bar, s_bar) = (shifted_mean(&var), shifted_mean(&slope));
    if s_bar == 0.0 || !s_bar.is_finite() {
        return Err(Error::DegenerateProtocol("disorder-averaged slope vanishes".into()));
    }
    let mean = v_bar.max(0.0).sqrt() / s_bar.abs();
    // delta method: δφ = √V/|S| linearised around the averaged moments
    let lin: Vec<f64> = var
        .iter()
        .zip(&slope)
        .map(|(v, s)| (v - v_bar) / (2.0 * v_bar) - (s - s_bar) / s_bar)
        .collect();
    let ss: f64 = lin.iter().map(|l| l * l).sum();
    Ok(DisorderStats {
        mean,
        std_error: mean * (ss / (n - 1.0)).sqrt() / n.sqrt(),
        n_samples,
        per_sample: Some(per),
        seed: dist.seed,
        moments: Some(AveragedMoments {
            signal_variance: v_bar,
            signal_slope: s_bar,
        }),
        pooled_disorder,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub xi: f64,
    /// Variance of the Gaussian coupling distribution; ignored by the other
    /// kinds.
    pub dg2: f64,
    pub n_atoms: usize,
    pub n_photons: usize,
}

#[derive(Debug)]
pub struct SweepRow {
    pub point: GridPoint,
    pub seed: u64,
    pub result: Result<DisorderStats>,
}

/// Runs [`disorder_average`] at every grid point, in order. Point `i` uses seed
/// `dist.seed ^ i`. Failures are recorded in the row and the sweep continues.
pub fn sweep(
    grid: &[GridPoint],
    eval: &Evaluation,
    dist: &CouplingDistribution,
    n_samples: usize,
    protocol: Protocol,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::Parameter("empty parameter grid".into()));
    }
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &point)| {
            let mut d = *dist;
            d.seed = dist.seed ^ i as u64;
            if d.kind == CouplingKind::Gaussian {
                d.variance = point.dg2;
            }
            let result = EnsembleConfig::uniform(point.n_atoms, point.n_photons)
                .and_then(|base| {
                    let params = ProtocolParams::from_xi(point.xi, point.n_photons, 0.0, protocol)?;
                    disorder_average(eval, &d, n_samples, &base, &params)
                });
            SweepRow {
                point,
                seed: d.seed,
                result,
            }
        })
        .collect())
}
