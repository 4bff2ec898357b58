use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExplorationSchedule {
    /// `ε(t) = t^(−1/denominator)` for `t ≥ 2`.
    Inhomogeneous { exponent_denominator: f64 },
    /// `ε(t) = ε` for all `t`.
    Homogeneous { epsilon_const: f64 },
}

impl ExplorationSchedule {
    /// Diminishing rate of the synchronous learner, denominator `N(D+1)`.
    pub fn synchronous(n_agents: usize, diameter: u32) -> Self {
        ExplorationSchedule::Inhomogeneous {
            exponent_denominator: n_agents as f64 * (f64::from(diameter) + 1.0),
        }
    }

    /// Diminishing rate of the asynchronous learner, denominator `(D+1)(K+1)m*`.
    pub fn asynchronous(diameter: u32, k: f64, m_star: f64) -> Self {
        ExplorationSchedule::Inhomogeneous {
            exponent_denominator: (f64::from(diameter) + 1.0) * (k + 1.0) * m_star,
        }
    }

    /// Constant rate in `[0, 1]`. Configuration files are further restricted
    /// to `(0, ½]` by the harness validator.
    pub fn constant(epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Domain(format!("constant epsilon {epsilon} outside [0, 1]")));
        }
        Ok(ExplorationSchedule::Homogeneous {
            epsilon_const: epsilon,
        })
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self, ExplorationSchedule::Homogeneous { .. })
    }

    pub fn epsilon_at(&self, t: u64) -> Result<f64> {
        match *self {
            ExplorationSchedule::Homogeneous { epsilon_const } => Ok(epsilon_const),
            ExplorationSchedule::Inhomogeneous {
                exponent_denominator,
            } => {
                if t < 2 {
                    return Err(Error::Domain(format!(
                        "diminishing schedule is defined for t >= 2, got t = {t}"
                    )));
                }
                if !(exponent_denominator > 0.0) {
                    return Err(Error::Domain(format!(
                        "exponent denominator must be > 0, got {exponent_denominator}"
                    )));
                }
                Ok((t as f64).powf(-1.0 / exponent_denominator))
            }
        }
    }
}
