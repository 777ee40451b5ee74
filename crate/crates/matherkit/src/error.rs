use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lagrangian: {0}")]
    InvalidLagrangian(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The admissible edge set does not connect the position graph, so
    /// value iteration and min-plus closures cannot propagate.
    #[error("position graph disconnected: v_max*tau = {speed_window:.4} < grid spacing {hx:.4}")]
    DisconnectedGrid { speed_window: f64, hx: f64 },

    /// The alpha-corrected kernel has a negative cycle beyond tolerance,
    /// meaning the supplied critical value underestimates the true one.
    #[error("negative cycle: mean {mean_per_step:.3e} per step; alpha too low by {alpha_defect:.3e}")]
    NegativeCycle { mean_per_step: f64, alpha_defect: f64 },

    #[error("wrong table kind: expected {expected}, got {got}")]
    WrongTableKind {
        expected: &'static str,
        got: &'static str,
    },

    #[error("linear program infeasible: {0}")]
    Infeasible(String),

    #[error("linear program unbounded: {0}")]
    Unbounded(String),

    #[error("simplex iteration limit reached after {0} pivots")]
    IterationLimit(usize),

    #[error("empty point cloud: {0}")]
    EmptyCloud(&'static str),

    #[error("empty sample table")]
    EmptySamples,

    #[error("degenerate measure: total mass {0:.3e}")]
    DegenerateMeasure(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
