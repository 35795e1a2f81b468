use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its domain (negative variance, empty input, ...).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The interaction strength vanishes, so the phase error is infinite.
    #[error("phase error diverges: {0}")]
    Divergence(String),

    #[error("minimisation did not converge (best xi = {best_xi}, delta_phi = {best_delta_phi})")]
    NonConvergence { best_xi: f64, best_delta_phi: f64 },

    /// The Hilbert space requested exceeds the configured amplitude cap.
    #[error("capacity exceeded: {dims} needs {required} amplitudes, cap is {cap}")]
    Capacity {
        dims: String,
        required: u128,
        cap: u128,
    },

    /// The measured signal does not depend on the rotation angle, or the
    /// observable is undefined for the given parameters.
    #[error("degenerate protocol: {0}")]
    DegenerateProtocol(String),

    #[error("mean spin vanishes (|<F>| = {norm:e}); Wineland parameter undefined")]
    MeanSpinDegenerate { norm: f64 },

    /// An observable refers to a subsystem the state does not contain.
    #[error("bad observable descriptor: {0}")]
    Descriptor(String),

    #[error("sample {offset} failed: {source}")]
    Sample {
        offset: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Strips `Sample` wrappers to reach the underlying cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::Sample { source, .. } => source.root(),
            other => other,
        }
    }
}
