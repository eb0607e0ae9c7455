use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no feasible path: {0}")]
    InfeasiblePath(String),

    /// Posterior mode undefined because some alpha_lj + n_lj <= 1.
    #[error("posterior mode undefined for transition ({from}, {to}): alpha + n = {value}")]
    ModeInfeasible { from: usize, to: usize, value: f64 },

    /// Bayesian EM transition update requires every positive alpha_lj > 1.
    #[error("EM update undefined: alpha[{from}][{to}] = {alpha} is not > 1")]
    UpdateInfeasible { from: usize, to: usize, alpha: f64 },

    #[error("tempered distribution improper at beta = {beta}: {detail}")]
    InfeasibleTemperature { beta: f64, detail: String },

    #[error("instance too large for enumeration: {states}^{len} paths")]
    InstanceTooLarge { states: usize, len: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
