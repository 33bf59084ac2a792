//! Small numeric helpers: compensated summation and Student-t intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("confidence level must lie in (0, 1), got {0}")]
    Level(f64),
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::default();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<CompensatedSum>().total()
}

pub fn mean(values: &[f64]) -> f64 {
    sum(values) / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_sd(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss = values.iter().map(|v| (v - m) * (v - m)).collect::<CompensatedSum>().total();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

/// Two-sided Student-t quantile `t_{(1+level)/2, dof}`.
pub fn t_critical(level: f64, dof: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, dof).expect("dof is positive");
    t.inverse_cdf(0.5 * (1.0 + level))
}

/// Closed interval `(low, high)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

/// `mean ± t_{(1+level)/2, n-1} * sd / sqrt(n)`.
pub fn confidence_interval(samples: &[f64], level: f64) -> Result<Interval, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::TooFewSamples(samples.len()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::Level(level));
    }
    let n = samples.len() as f64;
    let m = mean(samples);
    let sd = sample_sd(samples);
    if sd == 0.0 {
        return Ok(Interval { low: m, high: m });
    }
    let half = t_critical(level, n - 1.0) * sd / n.sqrt();
    Ok(Interval {
        low: m - half,
        high: m + half,
    })
}
