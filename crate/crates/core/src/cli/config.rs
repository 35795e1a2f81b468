//! Run configuration: defaults, overlaid by a `key = value` file with dotted
//! section prefixes, overlaid by command-line flags.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::disorder::{GridPoint, Quantity};
use crate::error::{Error, Result};
use crate::model::{CouplingKind, Protocol};
use crate::sim::state::DEFAULT_CAP;

/// Environment variable consulted for the default amplitude cap.
pub const CAP_ENV: &str = "QNDMETRO_CAP";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub n_atoms: usize,
    pub n_photons: usize,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            n_atoms: 3,
            n_photons: 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    /// `None` runs every protocol.
    pub name: Option<Protocol>,
    pub xi: f64,
    /// Finite-difference step for slopes.
    pub h: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            name: None,
            xi: 1.0,
            h: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    pub kind: CouplingKind,
    /// Variance of the Gaussian kind, and the Δg² fed to the closed forms.
    pub dg2: f64,
}

impl Default for CouplingSection {
    fn default() -> Self {
        Self {
            kind: CouplingKind::UniformUnit,
            dg2: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisorderSection {
    pub samples: usize,
    pub quantity: Quantity,
}

impl Default for DisorderSection {
    fn default() -> Self {
        Self {
            samples: 100,
            quantity: Quantity::Oracle,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SqueezingSection {
    /// Sampling points within each coupling pulse.
    pub substeps: usize,
}

impl Default for SqueezingSection {
    fn default() -> Self {
        Self { substeps: 4 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<String>,
    pub json: bool,
}

/// Everything a run depends on. Rerunning from the same `RunConfig` gives
/// byte-identical output.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Amplitude cap of the simulator; `None` defers to the environment.
    pub cap: Option<u64>,
    pub grid: Vec<String>,
    pub ensemble: EnsembleSection,
    pub protocol: ProtocolSection,
    pub coupling: CouplingSection,
    pub disorder: DisorderSection,
    pub squeezing: SqueezingSection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parameter(format!("config: {}", e.message())))
    }

    /// Fills `cap` from the environment (or the built-in default) if unset.
    pub fn resolve_cap(&mut self) -> Result<()> {
        if self.cap.is_none() {
            self.cap = Some(match std::env::var(CAP_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parameter(format!("{CAP_ENV}={v:?} is not an unsigned integer")))?,
                Err(_) => DEFAULT_CAP as u64,
            });
        }
        Ok(())
    }

    pub fn protocols(&self) -> Vec<Protocol> {
        self.protocol.name.map_or_else(|| Protocol::ALL.to_vec(), |p| vec![p])
    }

    /// Cartesian product of all grid axes over the scalar settings; the first
    /// axis varies slowest.
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        let mut points = vec![GridPoint {
            xi: self.protocol.xi,
            dg2: self.coupling.dg2,
            n_atoms: self.ensemble.n_atoms,
            n_photons: self.ensemble.n_photons,
        }];
        for spec in &self.grid {
            let axis: GridAxis = spec.parse()?;
            let values = axis.values()?;
            points = points
                .iter()
                .flat_map(|p| values.iter().map(move |&v| axis.param.set(*p, v)))
                .collect();
        }
        Ok(points)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridParam {
    Xi,
    Dg2,
    NAtoms,
    NPhotons,
}

impl GridParam {
    fn set(self, mut p: GridPoint, v: f64) -> GridPoint {
        match self {
            Self::Xi => p.xi = v,
            Self::Dg2 => p.dg2 = v,
            Self::NAtoms => p.n_atoms = v as usize,
            Self::NPhotons => p.n_photons = v as usize,
        }
        p
    }

    fn integer(self) -> bool {
        matches!(self, Self::NAtoms | Self::NPhotons)
    }
}

impl FromStr for GridParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xi" => Ok(Self::Xi),
            "dg2" => Ok(Self::Dg2),
            "n_atoms" => Ok(Self::NAtoms),
            "n_photons" => Ok(Self::NPhotons),
            other => Err(Error::Parameter(format!(
                "unknown grid parameter '{other}' (expected xi, dg2, n_atoms or n_photons)"
            ))),
        }
    }
}

impl fmt::Display for GridParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Xi => "xi",
            Self::Dg2 => "dg2",
            Self::NAtoms => "n_atoms",
            Self::NPhotons => "n_photons",
        })
    }
}

/// One grid axis, written `name=start:stop:steps[,log]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridAxis {
    pub param: GridParam,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
    pub log: bool,
}

impl FromStr for GridAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("grid '{s}' is not of the form name=start:stop:steps[,log]"));
        let (name, range) = s.split_once('=').ok_or_else(bad)?;
        let (range, log) = match range.split_once(',') {
            Some((r, "log")) => (r, true),
            Some(_) => return Err(bad()),
            None => (range, false),
        };
        let parts: Vec<&str> = range.split(':').collect();
        let [start, stop, steps] = parts[..] else {
            return Err(bad());
        };
        Ok(Self {
            param: name.trim().parse()?,
            start: start.trim().parse().map_err(|_| bad())?,
            stop: stop.trim().parse().map_err(|_| bad())?,
            steps: steps.trim().parse().map_err(|_| bad())?,
            log,
        })
    }
}

impl GridAxis {
    pub fn values(&self) -> Result<Vec<f64>> {
        if self.steps == 0 {
            return Err(Error::Parameter(format!("grid over {} is empty (0 steps)", self.param)));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::Parameter(format!("grid over {} has non-finite bounds", self.param)));
        }
        if self.log && (self.start <= 0.0 || self.stop <= 0.0) {
            return Err(Error::Parameter(format!("log grid over {} needs positive bounds", self.param)));
        }
        let last = (self.steps - 1).max(1) as f64;
        let values: Vec<f64> = (0..self.steps)
            .map(|i| {
                let t = i as f64 / last;
                if self.log {
                    (self.start.ln() + t * (self.stop.ln() - self.start.ln())).exp()
                } else {
                    self.start + t * (self.stop - self.start)
                }
            })
            .map(|v| if self.param.integer() { v.round() } else { v })
            .collect();
        if self.param.integer() && values.iter().any(|&v| v < 1.0) {
            return Err(Error::Parameter(format!("grid over {} must stay at or above 1", self.param)));
        }
        Ok(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_axes() {
        let a: GridAxis = "xi=0.25:2:4,log".parse().unwrap();
        assert!(a.log && a.steps == 4 && a.param == GridParam::Xi);
        let v = a.values().unwrap();
        assert_eq!(v.len(), 4);
        assert!((v[0] - 0.25).abs() < 1e-15 && (v[3] - 2.0).abs() < 1e-14);
        assert!((v[1] - 0.5).abs() < 1e-14);

        let b: GridAxis = "n_atoms=10:1000:3,log".parse().unwrap();
        assert_eq!(b.values().unwrap(), vec![10.0, 100.0, 1000.0]);
        let c: GridAxis = "dg2=0:1:5".parse().unwrap();
        assert_eq!(c.values().unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let single: GridAxis = "xi=3:9:1".parse().unwrap();
        assert_eq!(single.values().unwrap(), vec![3.0]);

        for bad in ["xi", "xi=1:2", "xi=1:2:3,lin", "foo=1:2:3", "xi=a:2:3"] {
            assert!(matches!(bad.parse::<GridAxis>(), Err(Error::Parameter(_))), "{bad}");
        }
        assert!(matches!("xi=1:2:0".parse::<GridAxis>().unwrap().values(), Err(Error::Parameter(_))));
        assert!(matches!("xi=0:2:3,log".parse::<GridAxis>().unwrap().values(), Err(Error::Parameter(_))));
        assert!(matches!("n_atoms=0:2:3".parse::<GridAxis>().unwrap().values(), Err(Error::Parameter(_))));
    }

    #[test]
    fn cartesian_order() {
        let cfg = RunConfig {
            grid: vec!["xi=1:2:2".into(), "n_atoms=5:6:2".into()],
            ..RunConfig::default()
        };
        let pts = cfg.points().unwrap();
        let pairs: Vec<(f64, usize)> = pts.iter().map(|p| (p.xi, p.n_atoms)).collect();
        assert_eq!(pairs, vec![(1.0, 5), (1.0, 6), (2.0, 5), (2.0, 6)]);
        assert_eq!(pts[0].n_photons, 400);
    }

    #[test]
    fn dotted_keys() {
        let cfg = RunConfig::from_toml(
            "seed = 7\nensemble.n_atoms = 4\nprotocol.name = \"stored\"\ncoupling.kind = \"gaussian\"\ncoupling.dg2 = 0.25\ndisorder.quantity = \"formula\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.ensemble.n_atoms, 4);
        assert_eq!(cfg.ensemble.n_photons, 400);
        assert_eq!(cfg.protocol.name, Some(Protocol::Stored));
        assert_eq!(cfg.coupling.kind, CouplingKind::Gaussian);
        assert_eq!(cfg.disorder.quantity, Quantity::Formula);
        assert!(matches!(RunConfig::from_toml("ensemble.atoms = 4"), Err(Error::Parameter(_))));
        assert!(matches!(RunConfig::from_toml("protocol.name = \"other\""), Err(Error::Parameter(_))));
    }

    #[test]
    fn serialises_back() {
        let cfg = RunConfig::from_toml("grid = [\"xi=1:2:3\"]\ncap = 1000").unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }
}
