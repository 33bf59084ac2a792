//! Baseline error metrics: accuracy (MAE), bias and the overall performance
//! index, plus Student-t intervals over event days.
//!
//! Every metric is a plain average over the `(subject, day, slot)` cells of
//! an [`EvalWindow`]. Positive bias means the baseline overestimates actual
//! consumption.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{BaselineCurve, Subject};
use crate::meterdata::{LoadDataset, LoadSeries, SlotWindow};
use crate::stats::{self, CompensatedSum, Interval, StatsError};

/// Equal weight on accuracy and bias.
pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no {which} for {subject} on {day} covering slots {start}..{end}")]
    Coverage {
        which: &'static str,
        subject: String,
        day: NaiveDate,
        start: usize,
        end: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(transparent)]
    Stats(#[from] StatsError),
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// Anything that can hand out a full-day curve for a subject.
pub trait CurveSource {
    fn curve(&self, subject: &Subject, day: NaiveDate) -> Option<&[f64]>;
}

/// Baseline curves keyed by subject and day.
#[derive(Debug, Clone, Default)]
pub struct CurveTable(BTreeMap<(Subject, NaiveDate), Vec<f64>>);

impl CurveTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, curve: BaselineCurve) {
        self.0.insert((curve.subject, curve.event_day), curve.values);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<BaselineCurve> for CurveTable {
    fn from_iter<I: IntoIterator<Item = BaselineCurve>>(iter: I) -> Self {
        let mut t = Self::new();
        for c in iter {
            t.insert(c);
        }
        t
    }
}

impl CurveSource for CurveTable {
    fn curve(&self, subject: &Subject, day: NaiveDate) -> Option<&[f64]> {
        self.0.get(&(subject.clone(), day)).map(Vec::as_slice)
    }
}

impl CurveSource for LoadDataset {
    fn curve(&self, subject: &Subject, day: NaiveDate) -> Option<&[f64]> {
        match subject {
            Subject::Customer(id) => self.day_values(id, day).ok(),
            Subject::Aggregate => None,
        }
    }
}

impl CurveSource for LoadSeries {
    fn curve(&self, subject: &Subject, day: NaiveDate) -> Option<&[f64]> {
        match subject {
            Subject::Aggregate => self.view().day_of(day),
            Subject::Customer(_) => None,
        }
    }
}

/// The `(subjects × days × slots)` cells a metric averages over.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalWindow {
    pub subjects: Vec<Subject>,
    pub days: Vec<NaiveDate>,
    pub slots: SlotWindow,
}

impl EvalWindow {
    pub fn new(subjects: Vec<Subject>, days: Vec<NaiveDate>, slots: SlotWindow) -> Result<Self> {
        if subjects.is_empty() || days.is_empty() || slots.is_empty() {
            return Err(MetricsError::Argument("evaluation window has an empty dimension".into()));
        }
        Ok(Self { subjects, days, slots })
    }

    pub fn cell_count(&self) -> usize {
        self.subjects.len() * self.days.len() * self.slots.len()
    }

    fn single_day(&self, day: NaiveDate) -> Self {
        Self {
            subjects: self.subjects.clone(),
            days: vec![day],
            slots: self.slots,
        }
    }
}

fn window_slice<'a>(
    src: &'a impl CurveSource,
    which: &'static str,
    subject: &Subject,
    day: NaiveDate,
    slots: SlotWindow,
) -> Result<&'a [f64]> {
    src.curve(subject, day)
        .filter(|c| c.len() >= slots.end)
        .map(|c| &c[slots.range()])
        .ok_or_else(|| MetricsError::Coverage {
            which,
            subject: subject.to_string(),
            day,
            start: slots.start,
            end: slots.end,
        })
}

/// Sums `f(b - l)` over the window and divides by the cell count.
fn mean_deviation(
    baselines: &impl CurveSource,
    actuals: &impl CurveSource,
    w: &EvalWindow,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    let mut acc = CompensatedSum::default();
    for subject in &w.subjects {
        for &day in &w.days {
            let b = window_slice(baselines, "baseline", subject, day, w.slots)?;
            let l = window_slice(actuals, "actual load", subject, day, w.slots)?;
            for (bv, lv) in b.iter().zip(l) {
                acc.add(f(bv - lv));
            }
        }
    }
    Ok(acc.total() / w.cell_count() as f64)
}

/// Mean absolute error α.
pub fn mae(baselines: &impl CurveSource, actuals: &impl CurveSource, w: &EvalWindow) -> Result<f64> {
    mean_deviation(baselines, actuals, w, f64::abs)
}

/// Mean signed error β.
pub fn bias(baselines: &impl CurveSource, actuals: &impl CurveSource, w: &EvalWindow) -> Result<f64> {
    mean_deviation(baselines, actuals, w, |d| d)
}

/// `λ|α| + (1 − λ)|β|`.
pub fn opi(alpha: f64, beta: f64, lambda: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(MetricsError::Argument(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    Ok(lambda * alpha.abs() + (1.0 - lambda) * beta.abs())
}

/// Divides an aggregate-level metric by the number of customers behind it.
pub fn per_capita(value: f64, treatment_count: usize) -> Result<f64> {
    if treatment_count == 0 {
        return Err(MetricsError::Argument("treatment count must be at least 1".into()));
    }
    Ok(value / treatment_count as f64)
}

pub use stats::confidence_interval;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    pub day: NaiveDate,
    pub alpha: f64,
    pub beta: f64,
    pub opi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricIntervals {
    pub alpha: Interval,
    pub beta: Interval,
    pub opi: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub alpha: f64,
    pub beta: f64,
    pub opi: f64,
    pub lambda: f64,
    pub per_day: Vec<DayMetrics>,
    /// Absent when the window has a single day.
    pub ci95: Option<MetricIntervals>,
}

impl MetricsReport {
    /// Rescales every figure by `1 / treatment_count`.
    pub fn per_capita(&self, treatment_count: usize) -> Result<Self> {
        let s = |v: f64| per_capita(v, treatment_count);
        let si = |i: Interval| -> Result<Interval> {
            Ok(Interval {
                low: s(i.low)?,
                high: s(i.high)?,
            })
        };
        Ok(Self {
            alpha: s(self.alpha)?,
            beta: s(self.beta)?,
            opi: s(self.opi)?,
            lambda: self.lambda,
            per_day: self
                .per_day
                .iter()
                .map(|d| {
                    Ok(DayMetrics {
                        day: d.day,
                        alpha: s(d.alpha)?,
                        beta: s(d.beta)?,
                        opi: s(d.opi)?,
                    })
                })
                .collect::<Result<_>>()?,
            ci95: self
                .ci95
                .map(|c| {
                    Ok::<_, MetricsError>(MetricIntervals {
                        alpha: si(c.alpha)?,
                        beta: si(c.beta)?,
                        opi: si(c.opi)?,
                    })
                })
                .transpose()?,
        })
    }
}

/// α, β and OPI over the whole window, per day, and 95% intervals across days.
pub fn evaluate(
    baselines: &impl CurveSource,
    actuals: &impl CurveSource,
    w: &EvalWindow,
    lambda: f64,
) -> Result<MetricsReport> {
    let alpha = mae(baselines, actuals, w)?;
    let beta = bias(baselines, actuals, w)?;
    let overall = opi(alpha, beta, lambda)?;
    let mut per_day = Vec::with_capacity(w.days.len());
    for &day in &w.days {
        let dw = w.single_day(day);
        let a = mae(baselines, actuals, &dw)?;
        let b = bias(baselines, actuals, &dw)?;
        per_day.push(DayMetrics {
            day,
            alpha: a,
            beta: b,
            opi: opi(a, b, lambda)?,
        });
    }
    let ci95 = if per_day.len() >= 2 {
        let col = |f: fn(&DayMetrics) -> f64| per_day.iter().map(f).collect::<Vec<_>>();
        Some(MetricIntervals {
            alpha: confidence_interval(&col(|d| d.alpha), 0.95)?,
            beta: confidence_interval(&col(|d| d.beta), 0.95)?,
            opi: confidence_interval(&col(|d| d.opi), 0.95)?,
        })
    } else {
        None
    };
    Ok(MetricsReport {
        alpha,
        beta,
        opi: overall,
        lambda,
        per_day,
        ci95,
    })
}
