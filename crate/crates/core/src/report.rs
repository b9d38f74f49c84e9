//! Uniform summary emitted by every check.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub cases: usize,
    pub max_residual: f64,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, cases: usize, max_residual: f64, threshold: f64) -> Self {
        CheckReport {
            name: name.into(),
            cases,
            max_residual,
            pass: max_residual.is_finite() && max_residual <= threshold,
        }
    }
}
