use super::observable::{covariance_of, Axis, Observable};
use super::reduced::{atomic_reduced, squeezing_params, SqueezingParams};
use super::state::{apply_qnd, apply_rotation, initial_state, Limits, QuantumState};
use crate::error::{Error, Result};
use crate::formulas::PhaseErrorResult;
use crate::model::{check_regime, EnsembleConfig, Protocol, ProtocolParams};
use crate::numeric::richardson_derivative;
use crate::oracle::{signal_label, Label, MomentSet};

/// Runs the unitary sequence of `params.protocol` at `params.phi`:
///
/// * unmatched: couple pulse 1, rotate;
/// * matched: couple pulse 1, rotate, couple pulse 2;
/// * stored: couple pulse 1, rotate, couple pulse 1 again with -χ.
pub fn evolve(cfg: &EnsembleConfig, params: &ProtocolParams, limits: &Limits) -> Result<QuantumState> {
    let mut state = initial_state(cfg, params.protocol.pulses(), limits)?;
    let g = cfg.weights();
    apply_qnd(&mut state, params.chi, g, 0, 1.0)?;
    apply_rotation(&mut state, params.phi);
    match params.protocol {
        Protocol::Unmatched => {}
        Protocol::Matched => apply_qnd(&mut state, params.chi, g, 1, 1.0)?,
        Protocol::Stored => apply_qnd(&mut state, params.chi, g, 0, -1.0)?,
    }
    Ok(state)
}

/// Observable for a [`Label`] in a run with the given parameters.
pub fn label_observable(label: Label, cfg: &EnsembleConfig, params: &ProtocolParams) -> Result<Observable> {
    let n_atoms = cfg.n_atoms();
    let obs = match label {
        Label::Fz => Observable::collective(Axis::Z, n_atoms),
        Label::FzTilde => Observable::atoms(Axis::Z, cfg.weights().to_vec()),
        Label::Sy | Label::B => Observable::photon(0, Axis::Y),
        Label::Jy => Observable::photon(1, Axis::Y),
        Label::FzPrime => {
            if params.chi == 0.0 {
                return Err(Error::DegenerateProtocol(
                    "F'_z = F_z - 2S_y/(n chi) is undefined for chi = 0".into(),
                ));
            }
            Observable::collective(Axis::Z, n_atoms)
                .plus(-2.0 / (cfg.n_photons() as f64 * params.chi), Observable::photon(0, Axis::Y))
        }
        Label::A => Observable::photon(1, Axis::Y).plus(-1.0, Observable::photon(0, Axis::Y)),
    };
    Ok(obs)
}

/// The same moments the oracle reports, measured on the simulated output state.
pub fn simulate_moments(cfg: &EnsembleConfig, params: &ProtocolParams, limits: &Limits) -> Result<MomentSet> {
    let state = evolve(cfg, params, limits)?;
    let mut labels = vec![Label::Fz, Label::FzTilde, Label::Sy];
    if params.protocol == Protocol::Matched {
        labels.push(Label::Jy);
    }
    let applied = labels
        .iter()
        .map(|&l| label_observable(l, cfg, params)?.apply(&state))
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<f64> = applied.iter().map(|v| state.inner(v).re).collect();
    let cov = applied
        .iter()
        .map(|a| applied.iter().map(|b| covariance_of(&state, a, b)).collect())
        .collect();
    Ok(MomentSet::new(
        params.protocol,
        params.phi,
        cfg.n_photons(),
        params.chi,
        means,
        cov,
    ))
}

/// Phase error of the full protocol from the simulated state.
pub fn run_protocol(cfg: &EnsembleConfig, params: &ProtocolParams, h: f64, limits: &Limits) -> Result<PhaseErrorResult> {
    let label = signal_label(params.protocol);
    let signal = label_observable(label, cfg, params)?;
    let at_zero = evolve(cfg, &params.with_phi(0.0), limits)?;
    let applied = signal.apply(&at_zero)?;
    let variance = covariance_of(&at_zero, &applied, &applied);
    let mean_at = |phi: f64| -> Result<f64> {
        let s = evolve(cfg, &params.with_phi(phi), limits)?;
        Ok(s.inner(&signal.apply(&s)?).re)
    };
    let slope = richardson_derivative(mean_at, h)?;
    PhaseErrorResult::from_moments(params.protocol, cfg.n_atoms(), variance, slope.value, check_regime(cfg, params))
}

/// Squeezing parameters of the atoms at one point of the sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct StageSqueezing {
    pub label: String,
    pub squeezing: SqueezingParams,
    pub purity: f64,
}

/// Samples the atomic squeezing parameters of the stored-pulse sequence: before
/// anything, at `substeps` equally spaced times during each coupling, and after
/// the rotation.
pub fn stored_pulse_stages(
    cfg: &EnsembleConfig,
    params: &ProtocolParams,
    substeps: usize,
    limits: &Limits,
) -> Result<Vec<StageSqueezing>> {
    let substeps = substeps.max(1);
    let mut state = initial_state(cfg, 1, limits)?;
    let g = cfg.weights();
    let mut out = Vec::new();
    let mut record = |label: String, state: &QuantumState| -> Result<()> {
        let rho = atomic_reduced(state, limits)?;
        out.push(StageSqueezing {
            label,
            squeezing: squeezing_params(&rho)?,
            purity: rho.purity,
        });
        Ok(())
    };
    record("initial".into(), &state)?;
    let step = params.chi / substeps as f64;
    for i in 1..=substeps {
        apply_qnd(&mut state, step, g, 0, 1.0)?;
        record(format!("couple1[{i}/{substeps}]"), &state)?;
    }
    apply_rotation(&mut state, params.phi);
    record("rotate".into(), &state)?;
    for i in 1..=substeps {
        apply_qnd(&mut state, step, g, 0, -1.0)?;
        record(format!("couple2[{i}/{substeps}]"), &state)?;
    }
    Ok(out)
}
