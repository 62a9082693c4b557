use serde::{Deserialize, Serialize};

use super::{AgentCheckpoint, BonusConfig, InitRule, LearningRateTable, Learner, Observation};
use crate::error::AgentError;
use crate::math::arg_extremum;
use crate::mdp::{DeterministicPolicy, MdpShape, TabularMdp};
use crate::oracle::{greedy_policy, optimal_values, RiskParams};

/// Optimistic Q-learning on the expected return: additive updates
/// `Q <- (1 - alpha_t) Q + alpha_t (r + V' + b_t)` with
/// `b_t = c * M_h * sqrt(H iota / t)`, where `M_h` is the `beta -> 0` limit
/// of the exponential multiplier (proportional to `H`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskNeutralQ {
    shape: MdpShape,
    bonus: BonusConfig,
    rates: LearningRateTable,
    iota: f64,
    counts: Vec<u64>,
    q: Vec<f64>,
    v: Vec<f64>,
}

impl RiskNeutralQ {
    /// `beta` only decides what [`InitRule::ZeroWhenRiskAverse`] means.
    pub fn new(
        shape: MdpShape,
        beta: f64,
        bonus: BonusConfig,
        init: InitRule,
        episodes: usize,
    ) -> Result<Self, AgentError> {
        bonus.validate()?;
        let n_s = shape.num_states;
        let n_a = shape.num_actions;
        let mut q = vec![0.0; shape.sa_len()];
        let mut v = vec![0.0; (shape.horizon + 1) * n_s];
        if init.is_optimistic(beta) {
            for h in 0..shape.horizon {
                let top = (shape.horizon - h) as f64;
                q[h * n_s * n_a..(h + 1) * n_s * n_a].fill(top);
                v[h * n_s..(h + 1) * n_s].fill(top);
            }
        }
        Ok(Self {
            shape,
            bonus,
            rates: LearningRateTable::new(shape.horizon),
            iota: super::iota(shape, episodes, bonus.delta),
            counts: vec![0; shape.sa_len()],
            q,
            v,
        })
    }

    pub fn q_value(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[self.shape.sa_index(h, s, a)]
    }
}

impl Learner for RiskNeutralQ {
    fn begin_episode(&mut self, _k: usize) -> Result<(), AgentError> {
        Ok(())
    }

    fn act(&self, h: usize, s: usize) -> usize {
        let start = self.shape.sa_index(h, s, 0);
        arg_extremum(&self.q[start..start + self.shape.num_actions], true)
    }

    fn observe(&mut self, obs: Observation) -> Result<(), AgentError> {
        let Observation { h, state, action, reward, next_state } = obs;
        let MdpShape { horizon, num_states: n_s, num_actions: n_a } = self.shape;
        if h >= horizon || state >= n_s || action >= n_a || next_state >= n_s {
            return Err(AgentError::InvalidConfig(format!("observation out of range: {obs:?}")));
        }
        let idx = self.shape.sa_index(h, state, action);
        self.counts[idx] += 1;
        let t = self.counts[idx];
        let alpha = self.rates.rate(t);
        let b = self.bonus.c
            * self.bonus.neutral_multiplier(horizon, h)
            * (horizon as f64 * self.iota / t as f64).sqrt();
        let target = reward + self.v[(h + 1) * n_s + next_state] + b;
        let top = (horizon - h) as f64;
        self.q[idx] = ((1.0 - alpha) * self.q[idx] + alpha * target).min(top);
        let start = self.shape.sa_index(h, state, 0);
        let row = &self.q[start..start + n_a];
        self.v[h * n_s + state] = row[arg_extremum(row, true)];
        Ok(())
    }

    fn greedy_policy(&self) -> DeterministicPolicy {
        let actions = (0..self.shape.horizon)
            .map(|h| (0..self.shape.num_states).map(|s| self.act(h, s)).collect())
            .collect();
        DeterministicPolicy { actions }
    }

    fn value_estimate(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.shape.num_states + s]
    }

    fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint::RiskNeutralQ(self.clone())
    }
}

/// Plays the exact optimal policy from the first episode. Reads the true
/// model, so it only serves as a zero-regret reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleGreedy {
    policy: DeterministicPolicy,
    v: Vec<Vec<f64>>,
}

impl OracleGreedy {
    pub fn new(mdp: &TabularMdp, risk: &RiskParams) -> Result<Self, AgentError> {
        let tables = optimal_values(mdp, risk)?;
        Ok(Self { policy: greedy_policy(&tables, risk), v: tables.v })
    }
}

impl Learner for OracleGreedy {
    fn begin_episode(&mut self, _k: usize) -> Result<(), AgentError> {
        Ok(())
    }

    fn act(&self, h: usize, s: usize) -> usize {
        self.policy.action(h, s)
    }

    fn observe(&mut self, _obs: Observation) -> Result<(), AgentError> {
        Ok(())
    }

    fn greedy_policy(&self) -> DeterministicPolicy {
        self.policy.clone()
    }

    fn value_estimate(&self, h: usize, s: usize) -> f64 {
        self.v[h][s]
    }

    fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint::OracleGreedy(self.clone())
    }
}
