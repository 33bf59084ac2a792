//! Peak Time Rebate settlement.
//!
//! A PTR program pays the incentive rate for every kWh the customer's load
//! falls below its baseline during event hours and pays nothing when load is
//! above the baseline. On a dataset without any real response, everything the
//! program pays for is false load reduction.
//!
//! Money is carried as integer micro-dollars. Percentages are computed from
//! unrounded energy totals so that `rebate_pct / flr_pct` equals
//! `incentive_rate / retail_rate` to floating-point precision.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{BaselineCurve, Subject};
use crate::meterdata::{CustomerId, EventSchedule, LoadDataset, MeterDataError, SlotWindow};
use crate::metrics::CurveSource;
use crate::stats::{self, CompensatedSum, Interval};

#[derive(Debug, Error)]
pub enum SettlementError {
    #[error("negative {what} {value} for {subject} on {day}")]
    NegativeReading {
        what: &'static str,
        subject: String,
        day: NaiveDate,
        value: f64,
    },

    #[error("no {which} for {subject} on {day}")]
    Coverage {
        which: &'static str,
        subject: String,
        day: NaiveDate,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(transparent)]
    Data(#[from] MeterDataError),
}

pub type Result<T, E = SettlementError> = std::result::Result<T, E>;

/// Fixed-point amount in micro-dollars.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Money(pub i64);

impl Money {
    pub const MICROS_PER_DOLLAR: i64 = 1_000_000;

    /// Rounds to the nearest micro-dollar.
    pub fn from_dollars(dollars: f64) -> Self {
        Self((dollars * Self::MICROS_PER_DOLLAR as f64).round() as i64)
    }

    pub fn micros(self) -> i64 {
        self.0
    }

    pub fn dollars(self) -> f64 {
        self.0 as f64 / Self::MICROS_PER_DOLLAR as f64
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        Money(iter.map(|m| m.0).sum())
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let per = Self::MICROS_PER_DOLLAR as u64;
        write!(f, "{sign}{}.{:06}", abs / per, abs % per)
    }
}

/// PTR incentive and retail tariff, both in dollars per kWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TariffSchedule {
    pub incentive_rate: f64,
    pub retail_rate: f64,
}

impl Default for TariffSchedule {
    fn default() -> Self {
        Self {
            incentive_rate: 0.35,
            retail_rate: 0.097,
        }
    }
}

impl TariffSchedule {
    pub fn new(incentive_rate: f64, retail_rate: f64) -> Result<Self> {
        let t = Self {
            incentive_rate,
            retail_rate,
        };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.incentive_rate > 0.0 && self.incentive_rate.is_finite())
            || !(self.retail_rate > 0.0 && self.retail_rate.is_finite())
        {
            return Err(SettlementError::Argument(format!(
                "tariff rates must be positive, got incentive {} retail {}",
                self.incentive_rate, self.retail_rate
            )));
        }
        Ok(())
    }

    fn shares(&self, flr_kwh: f64, consumption_kwh: f64) -> (f64, f64) {
        if consumption_kwh > 0.0 {
            let flr_pct = 100.0 * flr_kwh / consumption_kwh;
            let rebate_pct = 100.0 * (self.incentive_rate * flr_kwh) / (self.retail_rate * consumption_kwh);
            (flr_pct, rebate_pct)
        } else {
            (0.0, 0.0)
        }
    }
}

/// Settlement of one subject on one event day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettlementRecord {
    pub subject: Subject,
    pub event_day: NaiveDate,
    /// Σ over event slots of max(0, baseline − load), kWh.
    pub flr_energy: f64,
    pub rebate: Money,
    /// Whole-day consumption, kWh.
    pub event_day_consumption: f64,
    pub revenue: Money,
    pub flr_pct: f64,
    pub rebate_pct_of_revenue: f64,
}

fn check_non_negative(values: &[f64], what: &'static str, subject: &Subject, day: NaiveDate) -> Result<()> {
    match values.iter().find(|v| v.is_nan() || **v < 0.0) {
        Some(&value) => Err(SettlementError::NegativeReading {
            what,
            subject: subject.to_string(),
            day,
            value,
        }),
        None => Ok(()),
    }
}

/// Settles one baseline against the actual load for the same day.
pub fn ptr_settle(
    baseline: &BaselineCurve,
    actual: &[f64],
    window: SlotWindow,
    tariff: &TariffSchedule,
) -> Result<SettlementRecord> {
    tariff.check()?;
    let subject = &baseline.subject;
    let day = baseline.event_day;
    if baseline.values.len() != actual.len() || !window.fits(actual.len()) {
        return Err(SettlementError::Coverage {
            which: "full-day curve matching the event window",
            subject: subject.to_string(),
            day,
        });
    }
    check_non_negative(actual, "reading", subject, day)?;
    check_non_negative(&baseline.values, "baseline", subject, day)?;

    let flr_energy = window
        .range()
        .map(|t| (baseline.values[t] - actual[t]).max(0.0))
        .collect::<CompensatedSum>()
        .total();
    let consumption = stats::sum(actual);
    let (flr_pct, rebate_pct) = tariff.shares(flr_energy, consumption);
    Ok(SettlementRecord {
        subject: subject.clone(),
        event_day: day,
        flr_energy,
        rebate: Money::from_dollars(tariff.incentive_rate * flr_energy),
        event_day_consumption: consumption,
        revenue: Money::from_dollars(tariff.retail_rate * consumption),
        flr_pct,
        rebate_pct_of_revenue: rebate_pct,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SettlementMode {
    Granular,
    Aggregated,
}

impl fmt::Display for SettlementMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SettlementMode::Granular => "granular",
            SettlementMode::Aggregated => "aggregated",
        })
    }
}

/// Population totals for one event day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySettlement {
    pub event_day: NaiveDate,
    pub flr_kwh: f64,
    pub consumption_kwh: f64,
    pub rebate: Money,
    pub revenue: Money,
    pub flr_pct: f64,
    pub rebate_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettlementReport {
    pub mode: SettlementMode,
    pub days: Vec<DaySettlement>,
    /// Every per-subject record, day-major.
    pub records: Vec<SettlementRecord>,
    pub mean_flr_pct: f64,
    pub mean_rebate_pct: f64,
    pub flr_pct_ci95: Option<Interval>,
    pub rebate_pct_ci95: Option<Interval>,
}

impl SettlementReport {
    pub fn total_rebate(&self) -> Money {
        self.days.iter().map(|d| d.rebate).sum()
    }
}

/// Settles every event day of `schedule` for `population`.
///
/// Granular mode settles each customer against `Subject::Customer` baselines
/// and sums the records. Aggregated mode settles the population's summed
/// load against the single `Subject::Aggregate` baseline.
pub fn settle_population(
    baselines: &impl CurveSource,
    dataset: &LoadDataset,
    population: &[CustomerId],
    schedule: &EventSchedule,
    tariff: &TariffSchedule,
    mode: SettlementMode,
) -> Result<SettlementReport> {
    tariff.check()?;
    if population.is_empty() {
        return Err(SettlementError::Argument("population is empty".into()));
    }
    let window = schedule.window();
    let aggregate = match mode {
        SettlementMode::Aggregated => Some(dataset.aggregate(population)?),
        SettlementMode::Granular => None,
    };

    let mut days = Vec::with_capacity(schedule.event_days().len());
    let mut records = Vec::new();
    for &day in schedule.event_days() {
        let day_records: Vec<SettlementRecord> = match &aggregate {
            Some(series) => {
                let actual = series.view().day_of(day).ok_or(MeterDataError::DateOutOfRange(day))?;
                vec![settle_subject(baselines, Subject::Aggregate, day, actual, window, tariff)?]
            }
            None => population
                .iter()
                .map(|id| {
                    let actual = dataset.day_values(id, day)?;
                    settle_subject(baselines, Subject::Customer(id.clone()), day, actual, window, tariff)
                })
                .collect::<Result<_>>()?,
        };
        let flr_kwh = day_records.iter().map(|r| r.flr_energy).collect::<CompensatedSum>().total();
        let consumption_kwh = day_records
            .iter()
            .map(|r| r.event_day_consumption)
            .collect::<CompensatedSum>()
            .total();
        let (flr_pct, rebate_pct) = tariff.shares(flr_kwh, consumption_kwh);
        days.push(DaySettlement {
            event_day: day,
            flr_kwh,
            consumption_kwh,
            rebate: day_records.iter().map(|r| r.rebate).sum(),
            revenue: day_records.iter().map(|r| r.revenue).sum(),
            flr_pct,
            rebate_pct,
        });
        records.extend(day_records);
    }

    let flr: Vec<f64> = days.iter().map(|d| d.flr_pct).collect();
    let rebate: Vec<f64> = days.iter().map(|d| d.rebate_pct).collect();
    let ci = |v: &[f64]| stats::confidence_interval(v, 0.95).ok();
    Ok(SettlementReport {
        mode,
        mean_flr_pct: stats::mean(&flr),
        mean_rebate_pct: stats::mean(&rebate),
        flr_pct_ci95: ci(&flr),
        rebate_pct_ci95: ci(&rebate),
        days,
        records,
    })
}

fn settle_subject(
    baselines: &impl CurveSource,
    subject: Subject,
    day: NaiveDate,
    actual: &[f64],
    window: SlotWindow,
    tariff: &TariffSchedule,
) -> Result<SettlementRecord> {
    let values = baselines
        .curve(&subject, day)
        .ok_or_else(|| SettlementError::Coverage {
            which: "baseline",
            subject: subject.to_string(),
            day,
        })?
        .to_vec();
    let curve = BaselineCurve {
        subject,
        event_day: day,
        values,
    };
    ptr_settle(&curve, actual, window, tariff)
}
