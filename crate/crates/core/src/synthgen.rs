//! Seeded synthetic residential load generator.
//!
//! Each reading is `scale_i * season(d) * profile(t) * noise(i, d, t)`, with
//! the whole population then rescaled so that the mean hourly consumption
//! per customer equals `target_per_capita`. `season(d)` is a two-hump annual
//! sinusoid times a day-level shock shared by every customer.
//!
//! Per-customer scales and hourly noise are mean-one log-normal draws. The
//! spread of customer scales is not something real population studies pin
//! down well; `customer_scale_dispersion` is a free parameter.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meterdata::{Calendar, CustomerId, EventSchedule, LoadDataset, SlotWindow};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Config(String),

    #[error("dataset covers {0} full calendar months; at least 12 are needed")]
    Coverage(usize),

    #[error(transparent)]
    Data(#[from] crate::meterdata::MeterDataError),
}

/// Hourly shape with a morning shoulder and an evening peak.
pub const DEFAULT_BASE_PROFILE: [f64; 24] = [
    0.55, 0.45, 0.40, 0.38, 0.38, 0.42, 0.60, 0.85, 0.90, 0.80, 0.72, 0.70, //
    0.72, 0.72, 0.75, 0.85, 1.05, 1.35, 1.60, 1.65, 1.50, 1.25, 0.95, 0.72,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_customers: usize,
    pub year: i32,
    pub base_profile: Vec<f64>,
    /// Relative swing of the two-hump seasonal factor.
    pub seasonal_amplitude: f64,
    /// Day of year (1-based) of the first seasonal peak; the second falls half a year later.
    pub seasonal_peak_day: u32,
    /// Coefficient of variation of the day-level shock shared by all customers.
    pub day_shock_cv: f64,
    /// Log-space standard deviation of per-customer scale factors.
    pub customer_scale_dispersion: f64,
    /// Coefficient of variation of the multiplicative hourly noise.
    pub noise_cv: f64,
    /// Population mean, kWh per customer per hour.
    pub target_per_capita: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_customers: 199,
            year: 2012,
            base_profile: DEFAULT_BASE_PROFILE.to_vec(),
            seasonal_amplitude: 0.2,
            seasonal_peak_day: 15,
            day_shock_cv: 0.08,
            customer_scale_dispersion: 0.5,
            noise_cv: 0.6,
            target_per_capita: 1.9,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(m.to_owned()));
        if self.n_customers < 2 {
            return bad("n_customers must be at least 2");
        }
        if !(self.noise_cv >= 0.0 && self.noise_cv.is_finite()) {
            return bad("noise_cv must be a finite value >= 0");
        }
        if !(self.day_shock_cv >= 0.0 && self.day_shock_cv.is_finite()) {
            return bad("day_shock_cv must be a finite value >= 0");
        }
        if !(self.customer_scale_dispersion >= 0.0 && self.customer_scale_dispersion.is_finite()) {
            return bad("customer_scale_dispersion must be a finite value >= 0");
        }
        if !(self.target_per_capita > 0.0 && self.target_per_capita.is_finite()) {
            return bad("target_per_capita must be positive");
        }
        if !(0.0..1.0).contains(&self.seasonal_amplitude) {
            return bad("seasonal_amplitude must lie in [0, 1)");
        }
        if self.base_profile.len() != 24 {
            return bad("base_profile must have 24 weights");
        }
        if self.base_profile.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return bad("base_profile weights must be finite and non-negative");
        }
        if self.base_profile.iter().sum::<f64>() <= 0.0 {
            return bad("base_profile weights must sum to a positive value");
        }
        if NaiveDate::from_ymd_opt(self.year, 1, 1).is_none() {
            return bad("year out of range");
        }
        Ok(())
    }
}

/// Mean-one multiplicative factor with the given coefficient of variation.
fn mean_one_lognormal(cv: f64) -> Option<LogNormal<f64>> {
    (cv > 0.0).then(|| {
        let sigma = (1.0 + cv * cv).ln().sqrt();
        LogNormal::new(-0.5 * sigma * sigma, sigma).expect("sigma is finite and positive")
    })
}

fn draw(dist: &Option<LogNormal<f64>>, rng: &mut ChaCha8Rng) -> f64 {
    dist.as_ref().map_or(1.0, |d| d.sample(rng))
}

/// Generates a full calendar year of hourly readings.
pub fn generate(cfg: &SynthConfig) -> Result<LoadDataset, SynthError> {
    cfg.validate()?;
    let start = NaiveDate::from_ymd_opt(cfg.year, 1, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(cfg.year, 12, 31).unwrap();
    let n_days = (end - start).num_days() as usize + 1;
    let slots = 24;
    let n = cfg.n_customers;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let profile_mean = cfg.base_profile.iter().sum::<f64>() / slots as f64;
    let profile: Vec<f64> = cfg.base_profile.iter().map(|w| w / profile_mean).collect();

    let scale_dist = (cfg.customer_scale_dispersion > 0.0).then(|| {
        let s = cfg.customer_scale_dispersion;
        LogNormal::new(-0.5 * s * s, s).expect("dispersion is finite and positive")
    });
    let scales: Vec<f64> = (0..n).map(|_| draw(&scale_dist, &mut rng)).collect();

    let shock_dist = mean_one_lognormal(cfg.day_shock_cv);
    let day_factor: Vec<f64> = (0..n_days)
        .map(|d| {
            let doy = d as f64 + 1.0;
            let phase = 4.0 * std::f64::consts::PI * (doy - cfg.seasonal_peak_day as f64) / n_days as f64;
            (1.0 + cfg.seasonal_amplitude * phase.cos()) * draw(&shock_dist, &mut rng)
        })
        .collect();

    let noise_dist = mean_one_lognormal(cfg.noise_cv);
    let mut readings = Vec::with_capacity(n * n_days * slots);
    for &scale in &scales {
        for &season in &day_factor {
            let base = scale * season;
            for &p in &profile {
                readings.push(base * p * draw(&noise_dist, &mut rng));
            }
        }
    }

    let mean = readings.iter().sum::<f64>() / readings.len() as f64;
    let factor = cfg.target_per_capita / mean;
    for v in &mut readings {
        *v *= factor;
    }

    let width = n.to_string().len().max(3);
    let customers = (1..=n).map(|i| CustomerId(format!("c{i:0width$}"))).collect();
    Ok(LoadDataset::new(customers, start, n_days, slots, readings)?)
}

/// Event days that leave this many prior days of history by default.
pub const DEFAULT_MIN_LEAD_DAYS: usize = 14;

/// One event day per full calendar month: the day with the highest total
/// consumption across all customers, earliest date on ties. Event window is
/// the default evening window.
pub fn default_event_schedule(d: &LoadDataset) -> Result<EventSchedule, SynthError> {
    monthly_peak_schedule(d, DEFAULT_MIN_LEAD_DAYS, SlotWindow::default())
}

/// Like [`default_event_schedule`], but candidate days must have at least
/// `min_lead_days` days of data before them.
pub fn monthly_peak_schedule(
    d: &LoadDataset,
    min_lead_days: usize,
    window: SlotWindow,
) -> Result<EventSchedule, SynthError> {
    let cal = d.calendar();
    let months = full_months(&cal);
    if months.len() < 12 {
        return Err(SynthError::Coverage(months.len()));
    }
    let totals = daily_totals(d);
    let mut picks = Vec::with_capacity(months.len());
    for (&(year, month), days) in &months {
        let best = days
            .iter()
            .copied()
            .filter(|&i| i >= min_lead_days)
            .fold(None::<usize>, |best, i| match best {
                Some(b) if totals[b] >= totals[i] => Some(b),
                _ => Some(i),
            })
            .ok_or_else(|| {
                SynthError::Config(format!(
                    "no day in {year}-{month:02} has {min_lead_days} days of history"
                ))
            })?;
        picks.push(cal.date(best));
    }
    Ok(EventSchedule::new(picks, window, [])?)
}

fn daily_totals(d: &LoadDataset) -> Vec<f64> {
    let cal = d.calendar();
    let mut totals = vec![0.0; cal.n_days];
    for c in 0..d.customers().len() {
        for (day, total) in totals.iter_mut().enumerate() {
            *total += d.day_slice(c, day).iter().sum::<f64>();
        }
    }
    totals
}

/// Calendar months fully contained in the calendar, with their day indices.
fn full_months(cal: &Calendar) -> BTreeMap<(i32, u32), Vec<usize>> {
    let mut months: BTreeMap<(i32, u32), Vec<usize>> = BTreeMap::new();
    for (i, date) in cal.dates().enumerate() {
        months.entry((date.year(), date.month())).or_default().push(i);
    }
    months.retain(|&(y, m), days| days.len() == days_in_month(y, m));
    months
}

fn days_in_month(year: i32, month: u32) -> usize {
    let first = NaiveDate::from_ymd_opt(year, month, 1).unwrap();
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1).unwrap()
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1).unwrap()
    };
    (next - first).num_days() as usize
}
