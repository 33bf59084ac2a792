use std::collections::HashSet;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BaselineCurve, BaselineError, Result, Subject};
use crate::meterdata::{CustomerId, LoadDataset, MeterDataError};

/// Random partition of a population into control and treatment groups.
///
/// Both groups keep the order of the population they were drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSplit {
    pub control: Vec<CustomerId>,
    pub treatment: Vec<CustomerId>,
    pub control_fraction: f64,
    pub seed: u64,
}

impl PopulationSplit {
    /// Dataset positions of the control and treatment customers.
    ///
    /// Fails unless the two groups exactly partition the dataset's customers.
    pub fn resolve(&self, d: &LoadDataset) -> Result<(Vec<usize>, Vec<usize>)> {
        if self.control.is_empty() {
            return Err(BaselineError::Argument("control group is empty".into()));
        }
        if self.treatment.is_empty() {
            return Err(BaselineError::Argument("treatment group is empty".into()));
        }
        let positions = d.customer_positions();
        let lookup = |ids: &[CustomerId]| -> Result<Vec<usize>> {
            ids.iter()
                .map(|id| {
                    positions
                        .get(id)
                        .copied()
                        .ok_or_else(|| MeterDataError::UnknownCustomer(id.to_string()).into())
                })
                .collect()
        };
        let control = lookup(&self.control)?;
        let treatment = lookup(&self.treatment)?;
        let mut seen = HashSet::with_capacity(d.customers().len());
        for &i in control.iter().chain(&treatment) {
            if !seen.insert(i) {
                return Err(BaselineError::Argument(format!(
                    "customer {} assigned twice",
                    d.customers()[i]
                )));
            }
        }
        if seen.len() != d.customers().len() {
            return Err(BaselineError::Argument(format!(
                "split covers {} of {} customers",
                seen.len(),
                d.customers().len()
            )));
        }
        Ok((control, treatment))
    }
}

/// Control group size for `n` customers: `round(fraction * n)`, at least one.
pub(crate) fn control_size(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).round() as usize).max(1)
}

/// Uniformly random control/treatment partition, reproducible from
/// `(customers order, control_fraction, seed)`.
pub fn rct_split(customers: &[CustomerId], control_fraction: f64, seed: u64) -> Result<PopulationSplit> {
    if !(control_fraction > 0.0 && control_fraction < 1.0) {
        return Err(BaselineError::Argument(format!(
            "control fraction must lie in (0, 1), got {control_fraction}"
        )));
    }
    let n = customers.len();
    let k = control_size(n, control_fraction);
    if k >= n {
        return Err(BaselineError::Argument(format!(
            "fraction {control_fraction} of {n} customers leaves no treatment group"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_control = vec![false; n];
    for &i in &order[..k] {
        in_control[i] = true;
    }
    let (control, treatment): (Vec<_>, Vec<_>) = customers
        .iter()
        .zip(&in_control)
        .partition(|(_, &c)| c);
    Ok(PopulationSplit {
        control: control.into_iter().map(|(id, _)| id.clone()).collect(),
        treatment: treatment.into_iter().map(|(id, _)| id.clone()).collect(),
        control_fraction,
        seed,
    })
}

fn control_day_sum(d: &LoadDataset, control: &[usize], event_day: NaiveDate) -> Result<Vec<f64>> {
    let day = d
        .calendar()
        .index_of(event_day)
        .ok_or(MeterDataError::DateOutOfRange(event_day))?;
    let mut sum = vec![0.0; d.slots_per_day()];
    for &c in control {
        for (acc, v) in sum.iter_mut().zip(d.day_slice(c, day)) {
            *acc += v;
        }
    }
    Ok(sum)
}

/// Granular RCT: every treatment customer gets the control group's mean
/// event-day load. Treatment readings are never read.
pub fn rct_baseline_granular(
    d: &LoadDataset,
    split: &PopulationSplit,
    event_day: NaiveDate,
) -> Result<Vec<BaselineCurve>> {
    let (control, _) = split.resolve(d)?;
    let n = control.len() as f64;
    let mean: Vec<f64> = control_day_sum(d, &control, event_day)?
        .into_iter()
        .map(|s| s / n)
        .collect();
    Ok(split
        .treatment
        .iter()
        .map(|id| BaselineCurve {
            subject: Subject::Customer(id.clone()),
            event_day,
            values: mean.clone(),
        })
        .collect())
}

/// Aggregated RCT: the control aggregate scaled by `|treatment| / |control|`.
pub fn rct_baseline_aggregated(
    d: &LoadDataset,
    split: &PopulationSplit,
    event_day: NaiveDate,
) -> Result<BaselineCurve> {
    let (control, treatment) = split.resolve(d)?;
    let ratio = treatment.len() as f64 / control.len() as f64;
    let values = control_day_sum(d, &control, event_day)?
        .into_iter()
        .map(|s| s * ratio)
        .collect();
    Ok(BaselineCurve {
        subject: Subject::Aggregate,
        event_day,
        values,
    })
}
