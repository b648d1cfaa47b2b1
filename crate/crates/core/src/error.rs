use alloc::string::String;

/// Failures raised by the guidance toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{quantity} = {value} outside valid range [{min}, {max}]")]
    Domain {
        quantity: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("singular engagement geometry: missile coincides with target")]
    SingularGeometry,
    #[error("vehicle stalled at t = {time} s (speed {speed} m/s)")]
    Stall { time: f64, speed: f64 },
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid aerodynamic table: {0}")]
    AeroTable(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("weight file: {0}")]
    Format(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
