//! Exact state-vector simulation: atoms in the 2^N product basis, each probe
//! pulse on its symmetric Dicke ladder.

pub mod observable;
pub mod protocol;
pub mod reduced;
pub mod reference;
pub mod snapshot;
pub mod state;

pub use observable::{covariance, expectation, Axis, Observable, Term};
pub use protocol::{evolve, label_observable, run_protocol, simulate_moments, stored_pulse_stages, StageSqueezing};
pub use reduced::{atomic_reduced, squeezing_params, AtomicReducedState, SqueezingParams};
pub use reference::reference_moments;
pub use state::{apply_qnd, apply_rotation, initial_state, Dims, Limits, QuantumState};
