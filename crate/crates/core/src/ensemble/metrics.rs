//! Regression error metrics. MAPE is a fraction (0.223, not 22.3%).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mae,
    Mape,
}

impl Metric {
    pub fn compute(self, y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
        match self {
            Metric::Mae => mae(y_true, y_pred),
            Metric::Mape => mape(y_true, y_pred),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mae" => Ok(Metric::Mae),
            "mape" => Ok(Metric::Mape),
            _ => Err(Error::Config(format!("unknown metric {s:?} (expected mae or mape)"))),
        }
    }
}

fn check(y_true: &[f64], y_pred: &[f64]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidParameter(format!(
            "{} targets but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::InsufficientData("metrics need at least one pair".into()));
    }
    Ok(())
}

pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check(y_true, y_pred)?;
    let total: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum();
    Ok(total / y_true.len() as f64)
}

pub fn mape(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check(y_true, y_pred)?;
    if let Some(i) = y_true.iter().position(|&t| t == 0.0) {
        return Err(Error::InvalidParameter(format!("MAPE is undefined: target {i} is zero")));
    }
    let total: f64 = y_true.iter().zip(y_pred).map(|(t, p)| ((t - p) / t).abs()).sum();
    Ok(total / y_true.len() as f64)
}
