//! Episodic tabular MDPs with deterministic rewards and a fixed start state.
//!
//! Steps are zero-based in the API: `h = 0` is the first step of an episode
//! and `h = horizon - 1` the last. Diagnostics print steps one-based so they
//! read the same way the episode protocol is usually written down.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::MdpError;

/// Sum-to-one tolerance for every transition row.
pub const ROW_TOLERANCE: f64 = 1e-12;

/// Dimensions of an MDP, without the model itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MdpShape {
    pub horizon: usize,
    pub num_states: usize,
    pub num_actions: usize,
}

impl MdpShape {
    #[inline]
    pub fn sa_index(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.num_states + s) * self.num_actions + a
    }

    /// Number of `[h][s][a]` entries.
    #[inline]
    pub fn sa_len(&self) -> usize {
        self.horizon * self.num_states * self.num_actions
    }
}

/// A finite-horizon tabular MDP.
///
/// Immutable once built. Construction goes through [`TabularMdp::new`] (or
/// deserialization), both of which run [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpDocument", into = "MdpDocument")]
pub struct TabularMdp {
    shape: MdpShape,
    initial_state: usize,
    // [h][s][a][s']
    transitions: Vec<f64>,
    // [h][s][a]
    rewards: Vec<f64>,
}

/// The JSON layout of an MDP: nested arrays in h-major, then s, then a order.
///
/// This is also the unchecked form handed to [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpDocument {
    #[serde(rename = "H")]
    pub horizon: usize,
    #[serde(rename = "S")]
    pub num_states: usize,
    #[serde(rename = "A")]
    pub num_actions: usize,
    pub initial_state: usize,
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    pub rewards: Vec<Vec<Vec<f64>>>,
}

/// Checks every model invariant and reports the first violation.
pub fn validate(doc: &MdpDocument) -> Result<(), MdpError> {
    if doc.horizon == 0 || doc.num_states == 0 || doc.num_actions == 0 {
        return Err(MdpError::InvalidParameter(format!(
            "H, S and A must be positive (got H={}, S={}, A={})",
            doc.horizon, doc.num_states, doc.num_actions
        )));
    }
    if doc.initial_state >= doc.num_states {
        return Err(MdpError::IndexOutOfRange(format!(
            "initial_state {} >= S={}",
            doc.initial_state, doc.num_states
        )));
    }
    check_len("transitions", doc.transitions.len(), doc.horizon)?;
    check_len("rewards", doc.rewards.len(), doc.horizon)?;
    for h in 0..doc.horizon {
        check_len(&format!("transitions[h={}]", h + 1), doc.transitions[h].len(), doc.num_states)?;
        check_len(&format!("rewards[h={}]", h + 1), doc.rewards[h].len(), doc.num_states)?;
        for s in 0..doc.num_states {
            check_len(
                &format!("transitions[h={}][s={s}]", h + 1),
                doc.transitions[h][s].len(),
                doc.num_actions,
            )?;
            check_len(
                &format!("rewards[h={}][s={s}]", h + 1),
                doc.rewards[h][s].len(),
                doc.num_actions,
            )?;
            for a in 0..doc.num_actions {
                let row = &doc.transitions[h][s][a];
                check_len(
                    &format!("transitions[h={}][s={s}][a={a}]", h + 1),
                    row.len(),
                    doc.num_states,
                )?;
                check_row(h, s, a, row)?;
                check_reward(h, s, a, doc.rewards[h][s][a])?;
            }
        }
    }
    Ok(())
}

fn check_len(what: &str, got: usize, want: usize) -> Result<(), MdpError> {
    if got != want {
        return Err(MdpError::Shape(format!("{what} has length {got}, expected {want}")));
    }
    Ok(())
}

fn check_row(h: usize, s: usize, a: usize, row: &[f64]) -> Result<(), MdpError> {
    for (next, &p) in row.iter().enumerate() {
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            return Err(MdpError::InvalidProbability { h: h + 1, s, a, next, p });
        }
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_TOLERANCE {
        return Err(MdpError::RowSum { h: h + 1, s, a, sum });
    }
    Ok(())
}

fn check_reward(h: usize, s: usize, a: usize, r: f64) -> Result<(), MdpError> {
    if !(r.is_finite() && (0.0..=1.0).contains(&r)) {
        return Err(MdpError::RewardOutOfRange { h: h + 1, s, a, r });
    }
    Ok(())
}

impl TryFrom<MdpDocument> for TabularMdp {
    type Error = MdpError;

    fn try_from(doc: MdpDocument) -> Result<Self, Self::Error> {
        validate(&doc)?;
        let shape = MdpShape {
            horizon: doc.horizon,
            num_states: doc.num_states,
            num_actions: doc.num_actions,
        };
        let transitions = doc.transitions.into_iter().flatten().flatten().flatten().collect();
        let rewards = doc.rewards.into_iter().flatten().flatten().collect();
        Ok(Self { shape, initial_state: doc.initial_state, transitions, rewards })
    }
}

impl From<TabularMdp> for MdpDocument {
    fn from(mdp: TabularMdp) -> Self {
        mdp.to_document()
    }
}

impl TabularMdp {
    /// Builds an MDP from flat `[h][s][a][s']` transitions and `[h][s][a]` rewards.
    pub fn new(
        shape: MdpShape,
        initial_state: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Result<Self, MdpError> {
        let sa = shape.sa_len();
        if transitions.len() != sa * shape.num_states {
            return Err(MdpError::Shape(format!(
                "transitions has length {}, expected {}",
                transitions.len(),
                sa * shape.num_states
            )));
        }
        if rewards.len() != sa {
            return Err(MdpError::Shape(format!(
                "rewards has length {}, expected {sa}",
                rewards.len()
            )));
        }
        let mdp = Self { shape, initial_state, transitions, rewards };
        validate(&mdp.to_document())?;
        Ok(mdp)
    }

    pub fn to_document(&self) -> MdpDocument {
        let MdpShape { horizon, num_states, num_actions } = self.shape;
        let transitions = (0..horizon)
            .map(|h| {
                (0..num_states)
                    .map(|s| (0..num_actions).map(|a| self.transition_row(h, s, a).to_vec()).collect())
                    .collect()
            })
            .collect();
        let rewards = (0..horizon)
            .map(|h| {
                (0..num_states)
                    .map(|s| (0..num_actions).map(|a| self.reward(h, s, a)).collect())
                    .collect()
            })
            .collect();
        MdpDocument {
            horizon,
            num_states,
            num_actions,
            initial_state: self.initial_state,
            transitions,
            rewards,
        }
    }

    /// Re-checks every invariant; generators are tested against this.
    pub fn validate(&self) -> Result<(), MdpError> {
        validate(&self.to_document())
    }

    #[inline]
    pub fn shape(&self) -> MdpShape {
        self.shape
    }

    #[inline]
    pub fn horizon(&self) -> usize {
        self.shape.horizon
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.shape.num_states
    }

    #[inline]
    pub fn num_actions(&self) -> usize {
        self.shape.num_actions
    }

    #[inline]
    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    #[inline]
    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rewards[self.shape.sa_index(h, s, a)]
    }

    /// Next-state distribution `P_h(. | s, a)`.
    #[inline]
    pub fn transition_row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let n = self.shape.num_states;
        let start = self.shape.sa_index(h, s, a) * n;
        &self.transitions[start..start + n]
    }

    fn check_indices(&self, h: usize, s: usize, a: usize) -> Result<(), MdpError> {
        let MdpShape { horizon, num_states, num_actions } = self.shape;
        if h >= horizon || s >= num_states || a >= num_actions {
            return Err(MdpError::IndexOutOfRange(format!(
                "(h={}, s={s}, a={a}) outside H={horizon}, S={num_states}, A={num_actions}",
                h + 1
            )));
        }
        Ok(())
    }

    /// Executes action `a` in state `s` at step `h`.
    ///
    /// Consumes exactly one uniform draw from `rng`, so a fixed seed and call
    /// sequence reproduce the same transitions.
    pub fn step<R: Rng + ?Sized>(
        &self,
        h: usize,
        s: usize,
        a: usize,
        rng: &mut R,
    ) -> Result<(f64, usize), MdpError> {
        self.check_indices(h, s, a)?;
        let next = sample_row(self.transition_row(h, s, a), rng.random::<f64>());
        Ok((self.reward(h, s, a), next))
    }

    /// True when every transition row is a point mass.
    pub fn is_deterministic(&self) -> bool {
        self.transitions.iter().all(|&p| p == 0.0 || p == 1.0)
    }
}

/// Inverse-CDF sampling of a probability row with a uniform draw in `[0, 1)`.
fn sample_row(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    // Rounding left the cumulative sum just below u.
    last_positive
}

/// A deterministic Markov policy `pi_h(s)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicPolicy {
    /// `actions[h][s]`
    pub actions: Vec<Vec<usize>>,
}

impl DeterministicPolicy {
    pub fn constant(shape: MdpShape, action: usize) -> Self {
        Self { actions: vec![vec![action; shape.num_states]; shape.horizon] }
    }

    #[inline]
    pub fn action(&self, h: usize, s: usize) -> usize {
        self.actions[h][s]
    }

    pub fn check(&self, shape: MdpShape) -> Result<(), MdpError> {
        if self.actions.len() != shape.horizon {
            return Err(MdpError::Shape(format!(
                "policy covers {} steps, expected {}",
                self.actions.len(),
                shape.horizon
            )));
        }
        for (h, row) in self.actions.iter().enumerate() {
            if row.len() != shape.num_states {
                return Err(MdpError::Shape(format!(
                    "policy step {} covers {} states, expected {}",
                    h + 1,
                    row.len(),
                    shape.num_states
                )));
            }
            if let Some((s, &a)) = row.iter().enumerate().find(|(_, &a)| a >= shape.num_actions) {
                return Err(MdpError::IndexOutOfRange(format!(
                    "policy picks action {a} at (h={}, s={s}) but A={}",
                    h + 1,
                    shape.num_actions
                )));
            }
        }
        Ok(())
    }
}

/// One episode of interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `H + 1` states, starting at the initial state.
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}
