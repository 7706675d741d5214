use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in channel `{channel}` at t = {t:.4} s")]
    NonFinite { channel: String, t: f64 },

    #[error("delay line undersized: t = {t:.4} s needs a sample at {target:.4} s, oldest retained is {oldest:.4} s")]
    DelayUndersized { t: f64, target: f64, oldest: f64 },

    #[error("delay line samples must be pushed in time order (got {t:.6} s after {last:.6} s)")]
    DelayOrder { t: f64, last: f64 },

    #[error("bicycle model invalid at speed {speed:.3} m/s (requires V > 0.5 m/s)")]
    SpeedTooLow { speed: f64 },

    #[error("{side} hand target unreachable at wheel angle {wheel_angle:.4} rad (distance {distance:.4} m)")]
    Unreachable {
        side: &'static str,
        wheel_angle: f64,
        distance: f64,
    },

    #[error("mass matrix of the {side} arm is not positive definite at q = ({q_shoulder:.4}, {q_elbow:.4}) rad")]
    MassMatrix {
        side: &'static str,
        q_shoulder: f64,
        q_elbow: f64,
    },

    #[error("regression is rank deficient: {0}")]
    RankDeficient(String),

    #[error("missing log channel `{0}`")]
    MissingChannel(String),

    #[error("duplicate log channel `{0}`")]
    DuplicateChannel(String),

    #[error("row has {got} values, log has {expected} channels")]
    RowWidth { got: usize, expected: usize },

    #[error("{condition}/{mode} at t = {t:.3} s: {source}")]
    Scenario {
        condition: String,
        mode: String,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("reference trajectory: {0}")]
    Reference(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
