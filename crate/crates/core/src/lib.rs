//! Phase estimation with atomic ensembles entangled through an inhomogeneous
//! quantum non-demolition coupling to light.
//!
//! * [`formulas`]: closed-form phase errors and optimal interaction strength.
//! * [`oracle`]: exact low-order moments at polynomial cost.
//! * [`sim`]: state-vector simulation for small ensembles.
//! * [`disorder`]: Monte Carlo averages over random coupling weights.

pub mod cli;
pub mod disorder;
pub mod error;
pub mod formulas;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod sim;

pub use error::{Error, Result};
pub use model::{CouplingDistribution, CouplingKind, EnsembleConfig, Protocol, ProtocolParams};
