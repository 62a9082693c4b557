//! Online learners.
//!
//! [`Rsvi2Agent`] (value iteration over a replay of all past transitions) and
//! [`Rsq2Agent`] (Q-learning with an exponential moving average) both keep an
//! optimistic estimate `G_h(s, a)` of `exp(beta * Q_h(s, a))` and act greedily
//! on `(1/beta) log G`. [`RiskNeutralQ`] and [`OracleGreedy`] are baselines.
//!
//! Steps are zero-based: the bonus multiplier `exp(beta (H - h + 1)) - 1`
//! of a one-based step reads `exp(beta (H - h)) - 1` here.

mod baselines;
mod bonus;
mod learning_rate;
mod rsq2;
mod rsvi2;

pub use baselines::{OracleGreedy, RiskNeutralQ};
pub use bonus::{iota, BonusConfig, BonusStyle};
pub use learning_rate::{AlphaWeights, LearningRateTable};
pub use rsq2::Rsq2Agent;
pub use rsvi2::{ReplayMode, Rsvi2Agent, Transition};

use serde::{Deserialize, Serialize};

use crate::error::AgentError;
use crate::math::entropic_argmax;
use crate::mdp::{DeterministicPolicy, MdpShape, TabularMdp};
use crate::oracle::{check_budget, RiskParams};

/// Smallest `|beta|` the exponential-domain learners accept.
pub const MIN_ABS_BETA: f64 = 1e-6;

/// One observed transition at zero-based step `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub h: usize,
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// The interface the harness drives.
///
/// Per episode: `begin_episode`, then for each step `act` followed by
/// `observe`. `greedy_policy` and `value_estimate` read the state as of the
/// start of the current episode as long as they are called before the first
/// `observe` of that episode.
pub trait Learner: Send {
    fn begin_episode(&mut self, k: usize) -> Result<(), AgentError>;

    fn act(&self, h: usize, s: usize) -> usize;

    fn observe(&mut self, obs: Observation) -> Result<(), AgentError>;

    fn greedy_policy(&self) -> DeterministicPolicy;

    /// The learner's own estimate `V_h(s)`.
    fn value_estimate(&self, h: usize, s: usize) -> f64;

    /// Exponential-domain estimates `G` laid out `[h][s][a]`, if the learner
    /// keeps them.
    fn exp_estimates(&self) -> Option<&[f64]> {
        None
    }

    fn checkpoint(&self) -> AgentCheckpoint;
}

/// Starting values for unvisited pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitRule {
    /// `V_h = H - h + 1`: the most optimistic value for either sign of beta.
    #[default]
    Optimistic,
    /// `V_h = 0`.
    Zero,
    /// Optimistic for `beta > 0`, zero for `beta < 0`.
    ZeroWhenRiskAverse,
}

impl InitRule {
    fn is_optimistic(self, beta: f64) -> bool {
        match self {
            InitRule::Optimistic => true,
            InitRule::Zero => false,
            InitRule::ZeroWhenRiskAverse => beta > 0.0,
        }
    }
}

/// Arithmetic of the exponential domain for a fixed `beta` and horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpDomain {
    pub beta: f64,
    pub horizon: usize,
}

impl ExpDomain {
    /// `exp(beta * (H - h))`: the value of `exp(beta * V_h)` at `V_h = H - h`.
    #[inline]
    pub fn ceiling(&self, h: usize) -> f64 {
        (self.beta * (self.horizon - h) as f64).exp()
    }

    /// Admissible range of `G_h`: `[1, e^{beta(H-h)}]` for positive beta and
    /// `[e^{beta(H-h)}, 1]` for negative beta.
    pub fn range(&self, h: usize) -> (f64, f64) {
        let c = self.ceiling(h);
        if self.beta > 0.0 {
            (1.0, c)
        } else {
            (c, 1.0)
        }
    }

    /// Optimistic projection: add the bonus and cap at the ceiling for
    /// `beta > 0`; subtract and floor at the ceiling for `beta < 0`.
    #[inline]
    pub fn project(&self, w: f64, bonus: f64, h: usize) -> f64 {
        let c = self.ceiling(h);
        // The outer clamp only absorbs rounding: w already lies in range.
        if self.beta > 0.0 {
            (w + bonus).min(c).max(1.0)
        } else {
            (w - bonus).max(c).min(1.0)
        }
    }

    pub fn initial(&self, h: usize, init: InitRule) -> f64 {
        if init.is_optimistic(self.beta) {
            self.ceiling(h)
        } else {
            1.0
        }
    }

    /// `max_a (1/beta) log g[a]`.
    #[inline]
    pub fn value(&self, g_row: &[f64]) -> f64 {
        g_row[entropic_argmax(g_row, self.beta)].ln() / self.beta
    }
}

/// Shared validation for the exponential-domain learners.
fn check_risk(shape: MdpShape, risk: &RiskParams) -> Result<(), AgentError> {
    if !risk.beta.is_finite() || risk.beta.abs() < MIN_ABS_BETA {
        return Err(AgentError::DegenerateBeta(risk.beta.abs()));
    }
    check_budget(risk.beta, shape.horizon, risk.overflow_budget)?;
    Ok(())
}

/// Greedy action on one row of `G`; lowest index on ties.
pub fn act_on_row(g_row: &[f64], beta: f64) -> usize {
    entropic_argmax(g_row, beta)
}

fn greedy_from_exp(shape: MdpShape, g: &[f64], beta: f64) -> DeterministicPolicy {
    let a = shape.num_actions;
    let actions = (0..shape.horizon)
        .map(|h| {
            (0..shape.num_states)
                .map(|s| {
                    let start = shape.sa_index(h, s, 0);
                    act_on_row(&g[start..start + a], beta)
                })
                .collect()
        })
        .collect();
    DeterministicPolicy { actions }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Rsvi2,
    Rsq2,
    RiskNeutralQ,
    /// Plays the exact optimal policy; needs the true model.
    OracleGreedy,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Rsvi2 => "rsvi2",
            Algorithm::Rsq2 => "rsq2",
            Algorithm::RiskNeutralQ => "risk-neutral-q",
            Algorithm::OracleGreedy => "oracle-greedy",
        }
    }
}

/// Declarative learner description, as found in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    /// Label used in outputs; defaults to the algorithm name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub bonus: BonusConfig,
    #[serde(default)]
    pub init: InitRule,
    #[serde(default)]
    pub replay: ReplayMode,
}

impl AgentSpec {
    pub fn new(algorithm: Algorithm, bonus: BonusConfig) -> Self {
        Self { id: None, algorithm, bonus, init: InitRule::default(), replay: ReplayMode::default() }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn with_init(mut self, init: InitRule) -> Self {
        self.init = init;
        self
    }

    pub fn label(&self) -> String {
        self.id.clone().unwrap_or_else(|| self.algorithm.name().to_string())
    }

    /// Instantiates the learner for `episodes` episodes on `mdp`.
    ///
    /// Only `OracleGreedy` reads the model itself; the others use its shape.
    pub fn build(
        &self,
        mdp: &TabularMdp,
        risk: &RiskParams,
        episodes: usize,
    ) -> Result<Box<dyn Learner>, AgentError> {
        if episodes == 0 {
            return Err(AgentError::InvalidConfig("episodes must be positive".into()));
        }
        let shape = mdp.shape();
        Ok(match self.algorithm {
            Algorithm::Rsvi2 => {
                Box::new(Rsvi2Agent::new(shape, risk, self.bonus, self.init, self.replay, episodes)?)
            }
            Algorithm::Rsq2 => Box::new(Rsq2Agent::new(shape, risk, self.bonus, self.init, episodes)?),
            Algorithm::RiskNeutralQ => {
                Box::new(RiskNeutralQ::new(shape, risk.beta, self.bonus, self.init, episodes)?)
            }
            Algorithm::OracleGreedy => Box::new(OracleGreedy::new(mdp, risk)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    RiskNeutralQ,
    FixedBonusRsvi,
    FixedBonusRsq,
}

/// Comparison learners: the fixed-multiplier variants of both algorithms and
/// risk-neutral optimistic Q-learning with a bonus proportional to `H`.
pub fn make_baseline(kind: BaselineKind, c: f64, delta: f64) -> AgentSpec {
    let fixed = BonusConfig::new(c, delta, BonusStyle::FixedMultiplier);
    match kind {
        BaselineKind::RiskNeutralQ => {
            AgentSpec::new(Algorithm::RiskNeutralQ, fixed).with_id("risk-neutral-q")
        }
        BaselineKind::FixedBonusRsvi => AgentSpec::new(Algorithm::Rsvi2, fixed).with_id("fixed-bonus-rsvi"),
        BaselineKind::FixedBonusRsq => AgentSpec::new(Algorithm::Rsq2, fixed).with_id("fixed-bonus-rsq"),
    }
}

/// Serializable snapshot of any learner, for resumable runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", content = "state", rename_all = "kebab-case")]
pub enum AgentCheckpoint {
    Rsvi2(Rsvi2Agent),
    Rsq2(Rsq2Agent),
    RiskNeutralQ(RiskNeutralQ),
    OracleGreedy(OracleGreedy),
}

impl AgentCheckpoint {
    pub fn into_learner(self) -> Box<dyn Learner> {
        match self {
            AgentCheckpoint::Rsvi2(a) => Box::new(a),
            AgentCheckpoint::Rsq2(a) => Box::new(a),
            AgentCheckpoint::RiskNeutralQ(a) => Box::new(a),
            AgentCheckpoint::OracleGreedy(a) => Box::new(a),
        }
    }
}
