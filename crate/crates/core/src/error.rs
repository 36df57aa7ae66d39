use thiserror::Error;

pub type Result<T> = std::result::Result<T, RcmdpError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RcmdpError {
    /// Shape, stochasticity or range violation in an instance or policy.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("singular chain: {0}")]
    SingularChain(String),

    #[error("invalid uncertainty model: {0}")]
    InvalidModel(String),

    #[error("uncertainty set infeasible: {0}")]
    InfeasibleSet(String),

    #[error("critic diverged at iteration {iteration}: |V|_inf = {norm:e} exceeds bound {bound:e}")]
    Divergence {
        iteration: usize,
        norm: f64,
        bound: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("robust evaluation did not converge after {iterations} alternations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("policy grid has {count} candidates, budget is {budget}")]
    BudgetExceeded { count: u128, budget: u128 },

    #[error("invalid parameter: {0}")]
    Param(String),
}
