use thiserror::Error;

/// Violations of the tabular MDP model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MdpError {
    #[error("row (h={h},s={s},a={a}) sums to {sum}")]
    RowSum { h: usize, s: usize, a: usize, sum: f64 },
    #[error("row (h={h},s={s},a={a}) has probability {p} for next state {next}")]
    InvalidProbability { h: usize, s: usize, a: usize, next: usize, p: f64 },
    #[error("reward out of range at (h={h},s={s},a={a}): {r} not in [0, 1]")]
    RewardOutOfRange { h: usize, s: usize, a: usize, r: f64 },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Errors from risk parameters and the exact oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiskError {
    #[error("risk parameter beta must be finite and nonzero (got {0})")]
    InvalidBeta(f64),
    #[error("confidence level delta must lie in (0, 1] (got {0})")]
    InvalidDelta(f64),
    #[error(
        "overflow budget exceeded: |beta|*(H+1) = {product} > {budget} in direct-exponential mode"
    )]
    OverflowBudget { product: f64, budget: f64 },
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Errors raised while configuring or running a learner.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("|beta| = {0} is below 1e-6; use the risk-neutral baseline instead")]
    DegenerateBeta(f64),
    #[error("invalid bonus configuration: {0}")]
    InvalidBonus(String),
    #[error("invalid agent configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Errors from experiment configuration and execution.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),
}

impl HarnessError {
    /// True for numeric failures (overflow budget), as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            HarnessError::Risk(RiskError::OverflowBudget { .. })
                | HarnessError::Agent(AgentError::Risk(RiskError::OverflowBudget { .. }))
        )
    }
}
