//! Risk-sensitive reinforcement learning under the entropic risk measure on
//! small tabular episodic MDPs.
//!
//! * [`mdp`] and [`instances`]: the model and benchmark generators.
//! * [`oracle`]: exact entropic dynamic programming, used as ground truth.
//! * [`agents`]: optimistic learners working on `exp(beta * Q)`.
//! * [`harness`]: the episode loop, exact regret, multi-seed traces.

pub mod agents;
pub mod error;
pub mod harness;
pub mod instances;
pub mod math;
pub mod mdp;
pub mod oracle;

pub use agents::{AgentSpec, Algorithm, BonusConfig, BonusStyle, InitRule, Learner};
pub use error::{AgentError, HarnessError, MdpError, RiskError};
pub use harness::{run_experiment, ExperimentConfig, RegretTrace};
pub use instances::MdpSpec;
pub use mdp::{DeterministicPolicy, MdpShape, TabularMdp, Trajectory};
pub use oracle::{NumericMode, RiskParams, ValueTables};
