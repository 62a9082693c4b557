//! Risk-sensitive Q-learning with a doubly decaying bonus.
//!
//! Each observation moves `G_h(s, a)` toward `exp(beta (r + V_{h+1}(s')))`
//! with step size `alpha_t = (H + 1)/(H + t)`, adds `alpha_t * b_{h,t}` and
//! projects back into the admissible range.

use serde::{Deserialize, Serialize};

use super::{
    check_risk, greedy_from_exp, AgentCheckpoint, BonusConfig, ExpDomain, InitRule, LearningRateTable,
    Learner, Observation,
};
use crate::error::AgentError;
use crate::mdp::{DeterministicPolicy, MdpShape};
use crate::oracle::RiskParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rsq2Agent {
    shape: MdpShape,
    domain: ExpDomain,
    bonus: BonusConfig,
    init: InitRule,
    rates: LearningRateTable,
    iota: f64,
    counts: Vec<u64>,
    g: Vec<f64>,
    // [h][s], H + 1 rows
    v: Vec<f64>,
}

impl Rsq2Agent {
    pub fn new(
        shape: MdpShape,
        risk: &RiskParams,
        bonus: BonusConfig,
        init: InitRule,
        episodes: usize,
    ) -> Result<Self, AgentError> {
        check_risk(shape, risk)?;
        bonus.validate()?;
        let domain = ExpDomain { beta: risk.beta, horizon: shape.horizon };
        let n_s = shape.num_states;
        let mut g = vec![0.0; shape.sa_len()];
        let mut v = vec![0.0; (shape.horizon + 1) * n_s];
        for h in 0..shape.horizon {
            let g0 = domain.initial(h, init);
            g[h * n_s * shape.num_actions..(h + 1) * n_s * shape.num_actions].fill(g0);
            v[h * n_s..(h + 1) * n_s].fill(g0.ln() / domain.beta);
        }
        Ok(Self {
            shape,
            domain,
            bonus,
            init,
            rates: LearningRateTable::new(shape.horizon),
            iota: super::iota(shape, episodes, bonus.delta),
            counts: vec![0; shape.sa_len()],
            g,
            v,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn estimate(&self, h: usize, s: usize, a: usize) -> f64 {
        self.g[self.shape.sa_index(h, s, a)]
    }

    /// `b_{h,t}` for the `t`-th visit.
    pub fn bonus_for(&self, h: usize, t: u64) -> f64 {
        let mult = self.bonus.multiplier(self.domain.beta, self.shape.horizon, h);
        self.bonus.c * mult * (self.shape.horizon as f64 * self.iota / t as f64).sqrt()
    }

    /// One update from an observed transition.
    pub fn step(&mut self, obs: Observation) -> Result<(), AgentError> {
        let Observation { h, state, action, reward, next_state } = obs;
        let MdpShape { horizon, num_states: n_s, num_actions: n_a } = self.shape;
        if h >= horizon || state >= n_s || action >= n_a || next_state >= n_s {
            return Err(AgentError::InvalidConfig(format!("observation out of range: {obs:?}")));
        }
        let idx = self.shape.sa_index(h, state, action);
        self.counts[idx] += 1;
        let t = self.counts[idx];
        let alpha = self.rates.rate(t);
        let target = (self.domain.beta * (reward + self.v[(h + 1) * n_s + next_state])).exp();
        let w = (1.0 - alpha) * self.g[idx] + alpha * target;
        self.g[idx] = self.domain.project(w, alpha * self.bonus_for(h, t), h);
        let start = self.shape.sa_index(h, state, 0);
        self.v[h * n_s + state] = self.domain.value(&self.g[start..start + n_a]);
        Ok(())
    }
}

impl Learner for Rsq2Agent {
    fn begin_episode(&mut self, _k: usize) -> Result<(), AgentError> {
        Ok(())
    }

    fn act(&self, h: usize, s: usize) -> usize {
        let start = self.shape.sa_index(h, s, 0);
        super::act_on_row(&self.g[start..start + self.shape.num_actions], self.domain.beta)
    }

    fn observe(&mut self, obs: Observation) -> Result<(), AgentError> {
        self.step(obs)
    }

    fn greedy_policy(&self) -> DeterministicPolicy {
        greedy_from_exp(self.shape, &self.g, self.domain.beta)
    }

    fn value_estimate(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.shape.num_states + s]
    }

    fn exp_estimates(&self) -> Option<&[f64]> {
        Some(&self.g)
    }

    fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint::Rsq2(self.clone())
    }
}
