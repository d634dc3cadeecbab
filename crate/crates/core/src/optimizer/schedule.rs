//! Step-size and sample/batch-size schedules.

use serde::{Deserialize, Serialize};

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant {
        eta: f64,
    },
    /// `η_t = 1/(m(t/2 + 1))`.
    Decreasing {
        #[serde(default = "one")]
        m: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BatchSchedule {
    Constant {
        n: usize,
    },
    /// `N_t = ⌈(t + 1)^γ⌉`.
    Poly {
        gamma: f64,
    },
    /// `N_t = max(N, ⌈(t + 1)^γ⌉)`.
    ClippedPoly {
        n: usize,
        gamma: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub step: StepSchedule,
    pub batch: BatchSchedule,
}

/// `⌈(t+1)^γ⌉`, ignoring floating-point noise just above an integer.
fn poly(t: usize, gamma: f64) -> usize {
    let x = ((t + 1) as f64).powf(gamma);
    ((x - 1e-9).ceil() as usize).max(1)
}

impl Schedule {
    pub fn constant(eta: f64, n: usize) -> Schedule {
        Schedule { step: StepSchedule::Constant { eta }, batch: BatchSchedule::Constant { n } }
    }

    pub fn eta(&self, t: usize) -> f64 {
        match self.step {
            StepSchedule::Constant { eta } => eta,
            StepSchedule::Decreasing { m } => 1.0 / (m * (t as f64 / 2.0 + 1.0)),
        }
    }

    pub fn batch(&self, t: usize) -> usize {
        match self.batch {
            BatchSchedule::Constant { n } => n,
            BatchSchedule::Poly { gamma } => poly(t, gamma),
            BatchSchedule::ClippedPoly { n, gamma } => n.max(poly(t, gamma)),
        }
    }

    /// Violations as `(field path, message)` pairs.
    pub fn validate(&self) -> Vec<(String, String)> {
        let mut errors = Vec::new();
        let mut push = |path: &str, msg: &str| errors.push((path.to_string(), msg.to_string()));
        match self.step {
            StepSchedule::Constant { eta } => {
                if !(eta > 0.0 && eta <= 1.0) {
                    push("step.eta", "step.eta must lie in (0,1]");
                }
            }
            StepSchedule::Decreasing { m } => {
                // η₀ = 1/m must itself be a valid step.
                if !(m.is_finite() && m >= 1.0) {
                    push("step.m", "step.m must be >= 1 so that every step lies in (0,1]");
                }
            }
        }
        match self.batch {
            BatchSchedule::Constant { n } => {
                if n == 0 {
                    push("batch.n", "batch.n must be at least 1");
                }
            }
            BatchSchedule::Poly { gamma } => {
                if !(gamma.is_finite() && gamma > 0.0) {
                    push("batch.gamma", "batch.gamma must be positive");
                }
            }
            BatchSchedule::ClippedPoly { n, gamma } => {
                if n == 0 {
                    push("batch.n", "batch.n must be at least 1");
                }
                if !(gamma.is_finite() && gamma > 0.0) {
                    push("batch.gamma", "batch.gamma must be positive");
                }
            }
        }
        errors
    }
}

/// `(η_t, N_t)`.
pub fn schedule_values(schedule: &Schedule, t: usize) -> (f64, usize) {
    (schedule.eta(t), schedule.batch(t))
}
