//! The Q-learning step size `alpha_t = (H + 1) / (H + t)` and the weights it
//! induces on past observations.
//!
//! After `t` updates the estimate is `alpha_t^0 * init + sum_i alpha_t^i * x_i`
//! with
//!
//! ```text
//! alpha_t^0 = prod_{j=1..t} (1 - alpha_j)
//! alpha_t^i = alpha_i * prod_{j=i+1..t} (1 - alpha_j)
//! ```

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearningRateTable {
    pub horizon: usize,
}

/// `(alpha_t^0, [alpha_t^1, ..., alpha_t^t])`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaWeights {
    pub initial: f64,
    pub weights: Vec<f64>,
}

impl AlphaWeights {
    /// `alpha_t^i` for `i >= 1`.
    pub fn get(&self, i: usize) -> f64 {
        self.weights[i - 1]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

impl LearningRateTable {
    pub fn new(horizon: usize) -> Self {
        Self { horizon }
    }

    #[inline]
    pub fn rate(&self, t: u64) -> f64 {
        (self.horizon as f64 + 1.0) / (self.horizon as f64 + t as f64)
    }

    pub fn weights(&self, t: usize) -> AlphaWeights {
        let mut weights = vec![0.0; t];
        let mut tail = 1.0;
        for i in (1..=t).rev() {
            let a = self.rate(i as u64);
            weights[i - 1] = a * tail;
            tail *= 1.0 - a;
        }
        AlphaWeights { initial: tail, weights }
    }

    /// Partial sums `sum_{t=i..=t_max} alpha_t^i` for each requested `i`,
    /// computed with the recursion `alpha_{t+1}^i = alpha_t^i (1 - alpha_{t+1})`.
    pub fn column_sum(&self, i: usize, t_max: usize) -> f64 {
        if i == 0 || t_max < i {
            return 0.0;
        }
        let mut w = self.rate(i as u64);
        let mut total = w;
        for t in i + 1..=t_max {
            w *= 1.0 - self.rate(t as u64);
            total += w;
        }
        total
    }
}
