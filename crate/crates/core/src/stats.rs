//! Small Monte Carlo bookkeeping helpers shared by the simulator and the oracle.

use serde::{Deserialize, Serialize};

/// Empirical frequency of an event with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub hits: u64,
    pub trials: u64,
    pub frequency: f64,
    pub std_error: f64,
}

impl Frequency {
    pub fn new(hits: u64, trials: u64) -> Self {
        let frequency = if trials == 0 {
            0.0
        } else {
            hits as f64 / trials as f64
        };
        Self {
            hits,
            trials,
            frequency,
            std_error: binomial_std_error(frequency, trials),
        }
    }

    /// `frequency <= bound + k * std_error`.
    pub fn within(&self, bound: f64, k_sigma: f64) -> bool {
        self.frequency <= bound + k_sigma * self.std_error
    }
}

/// Standard error of a binomial proportion estimated from `trials` samples.
pub fn binomial_std_error(p: f64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / trials as f64).max(0.0).sqrt()
}
