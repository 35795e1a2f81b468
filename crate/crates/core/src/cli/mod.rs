//! The `qndmetro` command-line front end.

pub mod config;
pub mod table;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::disorder::{sweep, Evaluation, GridPoint, Quantity};
use crate::error::{Error, Result};
use crate::formulas::delta_phi;
use crate::model::{make_weights, CouplingDistribution, CouplingKind, EnsembleConfig, Protocol, ProtocolParams};
use crate::oracle::exact_delta_phi;
use crate::sim::{run_protocol, stored_pulse_stages, Limits};
pub use config::RunConfig;
use table::{col, col_unit, Cell, Table};

#[derive(Debug, Parser)]
#[command(name = "qndmetro", version, about = "Phase estimation with QND-entangled atomic ensembles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Closed-form phase errors over a (xi, dg2, n_atoms) grid.
    Formulas,
    /// Exact simulation, moment oracle and closed form side by side.
    Simulate,
    /// Atomic squeezing parameters along the stored-pulse sequence.
    Squeezing,
    /// Monte Carlo averages over random coupling weights.
    Disorder,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Formulas => "formulas",
            Self::Simulate => "simulate",
            Self::Squeezing => "squeezing",
            Self::Disorder => "disorder",
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct Options {
    /// Config file of `key = value` lines with dotted section prefixes.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Write output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Emit rows as a JSON array instead of CSV.
    #[arg(long, global = true)]
    pub json: bool,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Grid axis `name=start:stop:steps[,log]`; repeat for a Cartesian product.
    #[arg(long, global = true, value_name = "SPEC")]
    pub grid: Vec<String>,
    #[arg(long, global = true, value_parser = parse_from_str::<Protocol>)]
    pub protocol: Option<Protocol>,
    /// Simulator amplitude cap (default from QNDMETRO_CAP, else 2^30).
    #[arg(long, global = true, value_name = "AMPLITUDES")]
    pub cap: Option<u64>,
    #[arg(long, global = true)]
    pub n_atoms: Option<usize>,
    #[arg(long, global = true)]
    pub n_photons: Option<usize>,
    #[arg(long, global = true)]
    pub xi: Option<f64>,
    #[arg(long, global = true)]
    pub dg2: Option<f64>,
    /// Coupling distribution: uniform-unit, gaussian or standing-wave.
    #[arg(long, global = true, value_parser = parse_from_str::<CouplingKind>)]
    pub dist: Option<CouplingKind>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Disorder quantity: coherence-factor, formula, oracle or simulation.
    #[arg(long, global = true, value_parser = parse_from_str::<Quantity>)]
    pub quantity: Option<Quantity>,
    /// Finite-difference step for slopes.
    #[arg(long, global = true)]
    pub h: Option<f64>,
    #[arg(long, global = true)]
    pub substeps: Option<usize>,
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Options {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_toml(&std::fs::read_to_string(path)?)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.out {
            cfg.output.path = Some(p.display().to_string());
        }
        cfg.output.json |= self.json;
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if !self.grid.is_empty() {
            cfg.grid = self.grid.clone();
        }
        if let Some(v) = self.protocol {
            cfg.protocol.name = Some(v);
        }
        if let Some(v) = self.cap {
            cfg.cap = Some(v);
        }
        if let Some(v) = self.n_atoms {
            cfg.ensemble.n_atoms = v;
        }
        if let Some(v) = self.n_photons {
            cfg.ensemble.n_photons = v;
        }
        if let Some(v) = self.xi {
            cfg.protocol.xi = v;
        }
        if let Some(v) = self.dg2 {
            cfg.coupling.dg2 = v;
        }
        if let Some(v) = self.dist {
            cfg.coupling.kind = v;
        }
        if let Some(v) = self.samples {
            cfg.disorder.samples = v;
        }
        if let Some(v) = self.quantity {
            cfg.disorder.quantity = v;
        }
        if let Some(v) = self.h {
            cfg.protocol.h = v;
        }
        if let Some(v) = self.substeps {
            cfg.squeezing.substeps = v;
        }
        cfg.resolve_cap()?;
        Ok(cfg)
    }
}

/// Rendered output plus the error that should set the exit status, if any.
/// Sweeps keep going past failed rows, so both can be present.
#[derive(Debug)]
pub struct Outcome {
    pub output: String,
    pub error: Option<Error>,
}

/// Process exit status for an error: 2 usage, 3 capacity, 4 degenerate
/// protocol, 1 anything else.
pub fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Parameter(_) => 2,
        Error::Capacity { .. } => 3,
        Error::DegenerateProtocol(_) | Error::Divergence(_) | Error::MeanSpinDegenerate { .. } => 4,
        _ => 1,
    }
}

pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    let points = cfg.points()?;
    let (mut table, error) = match command {
        Command::Formulas => (cmd_formulas(cfg, &points)?, None),
        Command::Simulate => (cmd_simulate(cfg, &points)?, None),
        Command::Squeezing => (cmd_squeezing(cfg, &points)?, None),
        Command::Disorder => cmd_disorder(cfg, &points)?,
    };
    let output = if cfg.output.json {
        table.to_json()
    } else {
        let echo = serde_json::to_string(cfg).expect("config serialises");
        table.comments = vec![format!("qndmetro {}", command.name()), format!("config: {echo}")];
        table.to_csv()?
    };
    Ok(Outcome { output, error })
}

fn limits(cfg: &RunConfig) -> Limits {
    Limits::with_cap(cfg.cap.map_or(crate::sim::state::DEFAULT_CAP, u128::from))
}

/// Weights for grid point `index`: fixed per point, seeded by `seed ^ index`.
fn point_ensemble(cfg: &RunConfig, index: usize, p: &GridPoint) -> Result<(EnsembleConfig, u64)> {
    let seed = cfg.seed ^ index as u64;
    let dist = CouplingDistribution {
        kind: cfg.coupling.kind,
        variance: p.dg2,
        seed,
    };
    Ok((EnsembleConfig::new(p.n_photons, make_weights(&dist, p.n_atoms)?)?, seed))
}

fn rel_dev(a: f64, b: f64) -> f64 {
    (a - b) / b
}

fn cmd_formulas(cfg: &RunConfig, points: &[GridPoint]) -> Result<Table> {
    let mut t = Table::new(vec![
        col("xi"),
        col("dg2"),
        col("n_atoms"),
        col("protocol"),
        col_unit("delta_phi", "rad"),
        col("eta"),
        col("shot"),
        col("entanglement"),
        col("inhomogeneity"),
        col("xi_dg2"),
        col("small_disorder_xi"),
        col("sign_corrected"),
    ]);
    for p in points {
        for protocol in cfg.protocols() {
            let r = delta_phi(protocol, p.xi, p.dg2, p.n_atoms)?;
            let noise = r.noise.expect("closed forms report their noise split");
            t.push(vec![
                Cell::Float(p.xi),
                Cell::Float(p.dg2),
                Cell::Int(p.n_atoms as u64),
                Cell::text(protocol.to_string()),
                Cell::Float(r.delta_phi),
                Cell::Float(r.eta),
                Cell::Float(noise.shot),
                Cell::Float(noise.entanglement),
                Cell::Float(noise.inhomogeneity),
                Cell::Float(r.regime.small_disorder_xi.ratio),
                Cell::Bool(r.regime.small_disorder_xi.satisfied),
                Cell::Bool(r.sign_corrected),
            ]);
        }
    }
    Ok(t)
}

fn cmd_simulate(cfg: &RunConfig, points: &[GridPoint]) -> Result<Table> {
    let mut t = Table::new(vec![
        col("xi"),
        col("dg2"),
        col("n_atoms"),
        col("n_photons"),
        col("protocol"),
        col("seed"),
        col("empirical_dg2"),
        col_unit("sim_delta_phi", "rad"),
        col_unit("oracle_delta_phi", "rad"),
        col_unit("formula_delta_phi", "rad"),
        col("dev_sim_oracle"),
        col("dev_sim_formula"),
        col("dev_oracle_formula"),
        col("eta_sim"),
    ]);
    let limits = limits(cfg);
    for (i, p) in points.iter().enumerate() {
        let (ens, seed) = point_ensemble(cfg, i, p)?;
        let (_, emp) = ens.disorder();
        for protocol in cfg.protocols() {
            let params = ProtocolParams::from_xi(p.xi, p.n_photons, 0.0, protocol)?;
            let sim = run_protocol(&ens, &params, cfg.protocol.h, &limits)?;
            let oracle = exact_delta_phi(&ens, &params, cfg.protocol.h)?;
            let formula = delta_phi(protocol, p.xi, emp, p.n_atoms)?;
            t.push(vec![
                Cell::Float(p.xi),
                Cell::Float(p.dg2),
                Cell::Int(p.n_atoms as u64),
                Cell::Int(p.n_photons as u64),
                Cell::text(protocol.to_string()),
                Cell::Int(seed),
                Cell::Float(emp),
                Cell::Float(sim.delta_phi),
                Cell::Float(oracle.delta_phi),
                Cell::Float(formula.delta_phi),
                Cell::Float(rel_dev(sim.delta_phi, oracle.delta_phi)),
                Cell::Float(rel_dev(sim.delta_phi, formula.delta_phi)),
                Cell::Float(rel_dev(oracle.delta_phi, formula.delta_phi)),
                Cell::Float(sim.eta),
            ]);
        }
    }
    Ok(t)
}

fn cmd_squeezing(cfg: &RunConfig, points: &[GridPoint]) -> Result<Table> {
    if cfg.protocol.name.is_some_and(|p| p != Protocol::Stored) {
        return Err(Error::Parameter("squeezing runs the stored-pulse protocol only".into()));
    }
    let mut t = Table::new(vec![
        col("xi"),
        col("dg2"),
        col("n_atoms"),
        col("n_photons"),
        col("stage"),
        col("kitagawa_ueda"),
        col("wineland"),
        col("purity"),
        col_unit("delta_phi", "rad"),
        col("eta"),
    ]);
    let limits = limits(cfg);
    for (i, p) in points.iter().enumerate() {
        let (ens, _) = point_ensemble(cfg, i, p)?;
        let params = ProtocolParams::from_xi(p.xi, p.n_photons, 0.0, Protocol::Stored)?;
        let stages = stored_pulse_stages(&ens, &params, cfg.squeezing.substeps, &limits)?;
        // without interaction the readout carries no phase information
        let (dphi, eta) = match run_protocol(&ens, &params, cfg.protocol.h, &limits) {
            Ok(r) => (r.delta_phi, r.eta),
            Err(Error::DegenerateProtocol(_)) => (f64::INFINITY, f64::INFINITY),
            Err(e) => return Err(e),
        };
        for s in stages {
            t.push(vec![
                Cell::Float(p.xi),
                Cell::Float(p.dg2),
                Cell::Int(p.n_atoms as u64),
                Cell::Int(p.n_photons as u64),
                Cell::text(s.label),
                Cell::Float(s.squeezing.kitagawa_ueda),
                Cell::Float(s.squeezing.wineland),
                Cell::Float(s.purity),
                Cell::Float(dphi),
                Cell::Float(eta),
            ]);
        }
    }
    Ok(t)
}

fn cmd_disorder(cfg: &RunConfig, points: &[GridPoint]) -> Result<(Table, Option<Error>)> {
    let quantity = cfg.disorder.quantity;
    let unit = if quantity.is_phase_error() { "rad" } else { "1" };
    let mut t = Table::new(vec![
        col("xi"),
        col("dg2"),
        col("n_atoms"),
        col("n_photons"),
        col("protocol"),
        col("quantity"),
        col("seed"),
        col("n_samples"),
        col_unit("mean", unit),
        col_unit("std_error", unit),
        col("pooled_dg2"),
        col("status"),
    ]);
    let eval = Evaluation {
        quantity,
        h: cfg.protocol.h,
        limits: limits(cfg),
    };
    let dist = CouplingDistribution {
        kind: cfg.coupling.kind,
        variance: cfg.coupling.dg2,
        seed: cfg.seed,
    };
    let protocols = if quantity.is_phase_error() {
        cfg.protocols()
    } else {
        // the coherence factor does not depend on the readout
        vec![cfg.protocol.name.unwrap_or(Protocol::Unmatched)]
    };
    let mut first_error = None;
    for protocol in protocols {
        for row in sweep(points, &eval, &dist, cfg.disorder.samples, protocol)? {
            let p = row.point;
            let mut cells = vec![
                Cell::Float(p.xi),
                Cell::Float(p.dg2),
                Cell::Int(p.n_atoms as u64),
                Cell::Int(p.n_photons as u64),
                Cell::text(protocol.to_string()),
                Cell::text(quantity.to_string()),
                Cell::Int(row.seed),
                Cell::Int(cfg.disorder.samples as u64),
            ];
            match row.result {
                Ok(s) => cells.extend([
                    Cell::Float(s.mean),
                    Cell::Float(s.std_error),
                    Cell::Float(s.pooled_disorder.1),
                    Cell::text("ok"),
                ]),
                Err(e) => {
                    cells.extend([Cell::Empty, Cell::Empty, Cell::Empty, Cell::text(e.to_string())]);
                    first_error.get_or_insert(e);
                }
            }
            t.push(cells);
        }
    }
    Ok((t, first_error))
}

/// Parses nothing itself; runs a parsed command line and writes its output.
/// Returns the process exit status.
pub fn execute(cli: &Cli) -> u8 {
    let result = cli.opts.resolve().and_then(|cfg| {
        let outcome = run(cli.command, &cfg)?;
        match &cfg.output.path {
            Some(path) => std::fs::write(path, &outcome.output)?,
            None => print!("{}", outcome.output),
        }
        Ok(outcome.error)
    });
    match result {
        Ok(None) => 0,
        Ok(Some(e)) | Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
