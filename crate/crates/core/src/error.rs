use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is not a probability in [0, 1]")]
    NotAProbability { name: String, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("link success probability is zero: expected delay is unbounded")]
    InfiniteDelay,

    #[error("stale ratio undefined: total mining rate is zero")]
    ZeroMiningRate,

    #[error("capacity {capacity} exceeds total mining rate {total}")]
    CapacityExceedsMining { capacity: f64, total: f64 },

    #[error("truncated chain would have {states} states, above the cap of {cap}")]
    StateCapExceeded { states: usize, cap: usize },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("steady state has entry {value:e} below the clamping tolerance")]
    NegativeSteadyState { value: f64 },

    #[error("truncation did not converge before k = {k} (last change {delta:e})")]
    TruncationNotConverged { k: usize, delta: f64 },

    #[error("negative discriminant {0:e} in quadratic root")]
    NegativeDiscriminant(f64),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_probability(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::NotAProbability {
            name: name.to_string(),
            value,
        })
    }
}
