//! Exploration bonuses.
//!
//! Both learners use `c * M_h * sqrt(X * iota / n)` where `n` is a visit
//! count, `X` is `S` (value iteration) or `H` (Q-learning) and the
//! multiplier `M_h` depends on the style:
//!
//! * doubly decaying: `|exp(beta (H - h + 1)) - 1|`, shrinking along the horizon;
//! * fixed multiplier: `|exp(beta H) - 1|` at every step;
//! * zero: no bonus (greedy learner).

use serde::{Deserialize, Serialize};

use crate::error::AgentError;
use crate::mdp::MdpShape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BonusStyle {
    #[default]
    DoublyDecaying,
    FixedMultiplier,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BonusConfig {
    /// Scale constant; must be positive.
    #[serde(default = "default_c")]
    pub c: f64,
    /// Confidence level in `(0, 1]`.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub style: BonusStyle,
}

fn default_c() -> f64 {
    1.0
}

fn default_delta() -> f64 {
    0.1
}

impl Default for BonusConfig {
    fn default() -> Self {
        Self { c: default_c(), delta: default_delta(), style: BonusStyle::default() }
    }
}

impl BonusConfig {
    pub fn new(c: f64, delta: f64, style: BonusStyle) -> Self {
        Self { c, delta, style }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(AgentError::InvalidBonus(format!("c must be positive (got {})", self.c)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(AgentError::InvalidBonus(format!(
                "delta must lie in (0, 1] (got {})",
                self.delta
            )));
        }
        Ok(())
    }

    /// Multiplier for zero-based step `h`.
    pub fn multiplier(&self, beta: f64, horizon: usize, h: usize) -> f64 {
        match self.style {
            BonusStyle::DoublyDecaying => (beta * (horizon - h) as f64).exp_m1().abs(),
            BonusStyle::FixedMultiplier => (beta * horizon as f64).exp_m1().abs(),
            BonusStyle::Zero => 0.0,
        }
    }

    /// The `beta -> 0` limit of `multiplier / |beta|`, used by the
    /// risk-neutral learner.
    pub fn neutral_multiplier(&self, horizon: usize, h: usize) -> f64 {
        match self.style {
            BonusStyle::DoublyDecaying => (horizon - h) as f64,
            BonusStyle::FixedMultiplier => horizon as f64,
            BonusStyle::Zero => 0.0,
        }
    }
}

/// Log factor `log(H S A K / delta)` shared by both learners.
pub fn iota(shape: MdpShape, episodes: usize, delta: f64) -> f64 {
    let n = shape.horizon as f64
        * shape.num_states as f64
        * shape.num_actions as f64
        * episodes as f64;
    (n / delta).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_vs_doubly_decaying_at_last_step() {
        let dd = BonusConfig::new(1.0, 0.1, BonusStyle::DoublyDecaying);
        let fixed = BonusConfig { style: BonusStyle::FixedMultiplier, ..dd };
        let ratio = fixed.multiplier(1.0, 5, 4) / dd.multiplier(1.0, 5, 4);
        let expected = (5f64.exp() - 1.0) / (1f64.exp() - 1.0);
        assert!((ratio - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn decay_along_horizon() {
        let dd = BonusConfig::default();
        let fixed = BonusConfig { style: BonusStyle::FixedMultiplier, ..dd };
        for beta in [-1.5, -0.2, 0.3, 2.0] {
            for h in 1..6 {
                assert!(dd.multiplier(beta, 6, h) < dd.multiplier(beta, 6, h - 1));
                assert_eq!(fixed.multiplier(beta, 6, h), fixed.multiplier(beta, 6, 0));
            }
            assert_eq!(dd.multiplier(beta, 6, 0), fixed.multiplier(beta, 6, 0));
        }
        let zero = BonusConfig { style: BonusStyle::Zero, ..dd };
        assert_eq!(zero.multiplier(1.0, 6, 0), 0.0);
    }

    #[test]
    fn validation() {
        assert!(BonusConfig::new(0.0, 0.1, BonusStyle::Zero).validate().is_err());
        assert!(BonusConfig::new(1.0, 1.5, BonusStyle::Zero).validate().is_err());
        assert!(BonusConfig::new(1.0, 1.0, BonusStyle::Zero).validate().is_ok());
    }

    #[test]
    fn iota_value() {
        let shape = MdpShape { horizon: 2, num_states: 3, num_actions: 4 };
        assert!((iota(shape, 10, 0.5) - 480f64.ln()).abs() < 1e-12);
    }
}
