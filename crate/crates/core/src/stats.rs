//! Reductions over experiment outputs: ECDFs, quartiles and least-squares
//! fits with a median-absolute-deviation spread.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("sample is empty")]
    Empty,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("regression needs at least two distinct x values")]
    DegenerateX,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    #[default]
    Seconds,
    Milliseconds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub values: Vec<f64>,
    pub unit: Unit,
}

impl Sample {
    pub fn new(values: Vec<f64>, unit: Unit) -> Self {
        Self { values, unit }
    }

    pub fn seconds(values: Vec<f64>) -> Self {
        Self::new(values, Unit::Seconds)
    }

    pub fn to_millis(&self) -> Sample {
        match self.unit {
            Unit::Milliseconds => self.clone(),
            Unit::Seconds => Sample::new(self.values.iter().map(|v| v * 1e3).collect(), Unit::Milliseconds),
        }
    }

    fn sorted(&self) -> Result<Vec<f64>, StatsError> {
        if self.values.is_empty() {
            return Err(StatsError::Empty);
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }
}

/// Right-continuous empirical CDF as `(value, fraction <= value)` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ecdf {
    pub steps: Vec<(f64, f64)>,
}

impl Ecdf {
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.steps.partition_point(|&(v, _)| v <= x);
        if i == 0 {
            0.0
        } else {
            self.steps[i - 1].1
        }
    }
}

pub fn ecdf(sample: &Sample) -> Result<Ecdf, StatsError> {
    let v = sample.sorted()?;
    let n = v.len() as f64;
    let mut steps: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match steps.last_mut() {
            Some(last) if last.0 == x => last.1 = frac,
            _ => steps.push((x, frac)),
        }
    }
    if let Some(last) = steps.last_mut() {
        last.1 = 1.0;
    }
    Ok(Ecdf { steps })
}

/// Linear interpolation between order statistics at `(n-1)q`.
pub fn quantile(sample: &Sample, q: f64) -> Result<f64, StatsError> {
    let v = sample.sorted()?;
    Ok(quantile_sorted(&v, q))
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

pub fn quantiles(sample: &Sample) -> Result<Quartiles, StatsError> {
    let v = sample.sorted()?;
    Ok(Quartiles { q25: quantile_sorted(&v, 0.25), median: quantile_sorted(&v, 0.5), q75: quantile_sorted(&v, 0.75) })
}

pub fn median(values: &[f64]) -> Result<f64, StatsError> {
    quantile(&Sample::seconds(values.to_vec()), 0.5)
}

pub fn mean(values: &[f64]) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    /// Median of `|y - fitted|`.
    pub residual_mad: f64,
}

impl RegressionFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Unweighted least squares of `y` on `x`.
pub fn ols_fit(points: &[(f64, f64)]) -> Result<RegressionFit, StatsError> {
    if points.is_empty() {
        return Err(StatsError::Empty);
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if points.iter().all(|p| p.0 == points[0].0) || sxx == 0.0 {
        return Err(StatsError::DegenerateX);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let abs_res: Vec<f64> = points.iter().map(|p| (p.1 - (slope * p.0 + intercept)).abs()).collect();
    let residual_mad = median(&abs_res)?;
    Ok(RegressionFit { slope, intercept, residual_mad })
}
