//! Load-data model, calendar and interval CSV ingestion.
//!
//! A [`LoadDataset`] stores hourly (or sub-hourly) energy readings in kWh for
//! a fixed, ordered set of customers over a contiguous range of days. Cells
//! that were never supplied are held as `NaN` and surface through
//! [`LoadDataset::validate`]; downstream computations require a dataset that
//! validates clean.

mod csv_io;
mod schedule;

use std::collections::HashMap;
use std::fmt;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{parse_interval_csv, write_interval_csv, IntervalLayout};
pub use schedule::{EventSchedule, SlotWindow};

/// Errors raised while building, ingesting or slicing load data.
#[derive(Debug, Error)]
pub enum MeterDataError {
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("row {row}: duplicate reading for customer {customer} on {date}")]
    Duplicate {
        row: usize,
        customer: String,
        date: NaiveDate,
    },

    #[error("csv header: {0}")]
    Header(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("unknown customer {0}")]
    UnknownCustomer(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("date {0} is outside the dataset range")]
    DateOutOfRange(NaiveDate),

    #[error("dataset failed validation: {0}")]
    Invalid(String),

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = MeterDataError> = std::result::Result<T, E>;

/// Identifier of a metered customer.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CustomerId(pub String);

impl CustomerId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CustomerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CustomerId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Saturday or Sunday on the civil calendar.
pub fn is_weekend(date: NaiveDate) -> bool {
    matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

/// A contiguous run of days with a fixed number of slots per day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Calendar {
    pub start: NaiveDate,
    pub n_days: usize,
    pub slots_per_day: usize,
}

impl Calendar {
    pub fn end(&self) -> NaiveDate {
        self.date(self.n_days.saturating_sub(1))
    }

    pub fn date(&self, index: usize) -> NaiveDate {
        self.start + Days::new(index as u64)
    }

    /// Position of `date` in the calendar, if covered.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start).num_days();
        (offset >= 0 && (offset as usize) < self.n_days).then_some(offset as usize)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.n_days).map(|i| self.date(i))
    }
}

/// Per-customer interval consumption, `l_i(d, t)` in kWh.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadDataset {
    customers: Vec<CustomerId>,
    index: HashMap<CustomerId, usize>,
    calendar: Calendar,
    /// Customer-major, then day, then slot. `NaN` marks a missing cell.
    readings: Vec<f64>,
}

/// Findings from [`LoadDataset::validate`]. Empty lists mean the dataset is clean.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub missing_cells: Vec<(CustomerId, NaiveDate, usize)>,
    pub negative_cells: Vec<(CustomerId, NaiveDate, usize)>,
    /// Days inside the range with no reading for any customer.
    pub gap_days: Vec<NaiveDate>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.missing_cells.is_empty() && self.negative_cells.is_empty() && self.gap_days.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} missing cells, {} negative cells, {} gap days",
            self.missing_cells.len(),
            self.negative_cells.len(),
            self.gap_days.len()
        )
    }
}

impl LoadDataset {
    /// Builds a dataset from a flat customer-major reading buffer.
    ///
    /// `NaN` entries are accepted and reported as missing by [`validate`](Self::validate);
    /// infinite values are rejected.
    pub fn new(
        customers: Vec<CustomerId>,
        start: NaiveDate,
        n_days: usize,
        slots_per_day: usize,
        readings: Vec<f64>,
    ) -> Result<Self> {
        if customers.is_empty() {
            return Err(MeterDataError::Shape("dataset has no customers".into()));
        }
        if n_days == 0 || slots_per_day == 0 {
            return Err(MeterDataError::Shape("dataset has no days or no slots".into()));
        }
        let expected = customers.len() * n_days * slots_per_day;
        if readings.len() != expected {
            return Err(MeterDataError::Shape(format!(
                "expected {expected} readings, got {}",
                readings.len()
            )));
        }
        if readings.iter().any(|v| v.is_infinite()) {
            return Err(MeterDataError::Shape("readings must be finite".into()));
        }
        let mut index = HashMap::with_capacity(customers.len());
        for (i, c) in customers.iter().enumerate() {
            if index.insert(c.clone(), i).is_some() {
                return Err(MeterDataError::Shape(format!("customer {c} listed twice")));
            }
        }
        Ok(Self {
            customers,
            index,
            calendar: Calendar {
                start,
                n_days,
                slots_per_day,
            },
            readings,
        })
    }

    pub fn customers(&self) -> &[CustomerId] {
        &self.customers
    }

    pub fn calendar(&self) -> Calendar {
        self.calendar
    }

    pub fn slots_per_day(&self) -> usize {
        self.calendar.slots_per_day
    }

    pub fn n_days(&self) -> usize {
        self.calendar.n_days
    }

    pub fn start(&self) -> NaiveDate {
        self.calendar.start
    }

    pub fn end(&self) -> NaiveDate {
        self.calendar.end()
    }

    pub fn readings(&self) -> &[f64] {
        &self.readings
    }

    pub fn customer_index(&self, id: &CustomerId) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Lookup table from customer id to position.
    pub fn customer_positions(&self) -> &HashMap<CustomerId, usize> {
        &self.index
    }

    fn offset(&self, customer: usize, day: usize) -> usize {
        (customer * self.calendar.n_days + day) * self.calendar.slots_per_day
    }

    /// One customer's readings for one day, by positional index.
    pub fn day_slice(&self, customer: usize, day: usize) -> &[f64] {
        let o = self.offset(customer, day);
        &self.readings[o..o + self.calendar.slots_per_day]
    }

    pub fn reading(&self, customer: usize, day: usize, slot: usize) -> f64 {
        self.readings[self.offset(customer, day) + slot]
    }

    /// One customer's readings for the given date.
    pub fn day_values(&self, customer: &CustomerId, date: NaiveDate) -> Result<&[f64]> {
        let c = self
            .customer_index(customer)
            .ok_or_else(|| MeterDataError::UnknownCustomer(customer.to_string()))?;
        let d = self
            .calendar
            .index_of(date)
            .ok_or(MeterDataError::DateOutOfRange(date))?;
        Ok(self.day_slice(c, d))
    }

    /// Borrowed single-customer view.
    pub fn series(&self, customer: usize) -> SeriesView<'_> {
        let len = self.calendar.n_days * self.calendar.slots_per_day;
        let o = customer * len;
        SeriesView {
            calendar: self.calendar,
            values: &self.readings[o..o + len],
        }
    }

    /// Returns a copy with every reading multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            customers: self.customers.clone(),
            index: self.index.clone(),
            calendar: self.calendar,
            readings: self.readings.iter().map(|v| v * factor).collect(),
        }
    }

    /// Returns a copy with one reading replaced.
    pub fn with_reading(&self, customer: usize, day: usize, slot: usize, value: f64) -> Self {
        let mut out = self.clone();
        let o = out.offset(customer, day) + slot;
        out.readings[o] = value;
        out
    }

    /// Lists every missing or negative cell and every day without data.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        let slots = self.calendar.slots_per_day;
        let mut day_has_data = vec![false; self.calendar.n_days];
        for (c, id) in self.customers.iter().enumerate() {
            for (d, has_data) in day_has_data.iter_mut().enumerate() {
                let date = self.calendar.date(d);
                for (t, &v) in self.day_slice(c, d).iter().enumerate() {
                    if v.is_nan() {
                        report.missing_cells.push((id.clone(), date, t));
                    } else {
                        *has_data = true;
                        if v < 0.0 {
                            report.negative_cells.push((id.clone(), date, t));
                        }
                    }
                }
            }
        }
        debug_assert!(slots > 0);
        report.gap_days = day_has_data
            .iter()
            .enumerate()
            .filter(|(_, has)| !**has)
            .map(|(d, _)| self.calendar.date(d))
            .collect();
        report
    }

    /// Errors unless [`validate`](Self::validate) comes back clean.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_clean() {
            Ok(())
        } else {
            Err(MeterDataError::Invalid(report.to_string()))
        }
    }

    /// Sums groups of `slots_per_day / 24` consecutive slots into hourly energy.
    pub fn resample_to_hourly(&self) -> Result<Self> {
        let slots = self.calendar.slots_per_day;
        if !slots.is_multiple_of(24) {
            return Err(MeterDataError::Shape(format!(
                "{slots} slots per day is not a multiple of 24"
            )));
        }
        let k = slots / 24;
        if k == 1 {
            return Ok(self.clone());
        }
        let readings = self.readings.chunks_exact(k).map(|c| c.iter().sum()).collect();
        Ok(Self {
            customers: self.customers.clone(),
            index: self.index.clone(),
            calendar: Calendar {
                slots_per_day: 24,
                ..self.calendar
            },
            readings,
        })
    }

    /// Slot-wise sum over the customers in `who`.
    pub fn aggregate(&self, who: &[CustomerId]) -> Result<LoadSeries> {
        if who.is_empty() {
            return Err(MeterDataError::Argument("cannot aggregate an empty customer set".into()));
        }
        let positions = self.customer_positions();
        let mut idx = Vec::with_capacity(who.len());
        for id in who {
            let &p = positions
                .get(id)
                .ok_or_else(|| MeterDataError::UnknownCustomer(id.to_string()))?;
            idx.push(p);
        }
        Ok(self.aggregate_indices(&idx))
    }

    /// Slot-wise sum over customers given by position. Positions must be in range.
    pub fn aggregate_indices(&self, idx: &[usize]) -> LoadSeries {
        let len = self.calendar.n_days * self.calendar.slots_per_day;
        let mut values = vec![0.0; len];
        for &c in idx {
            for (acc, v) in values.iter_mut().zip(self.series(c).values) {
                *acc += v;
            }
        }
        LoadSeries {
            calendar: self.calendar,
            values,
        }
    }
}

/// A single load series over the dataset calendar, e.g. a group aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSeries {
    pub calendar: Calendar,
    pub values: Vec<f64>,
}

impl LoadSeries {
    pub fn view(&self) -> SeriesView<'_> {
        SeriesView {
            calendar: self.calendar,
            values: &self.values,
        }
    }
}

/// Borrowed day-indexed series, shared by per-customer and aggregate callers.
#[derive(Debug, Clone, Copy)]
pub struct SeriesView<'a> {
    pub calendar: Calendar,
    pub values: &'a [f64],
}

impl<'a> SeriesView<'a> {
    pub fn day(&self, index: usize) -> &'a [f64] {
        let s = self.calendar.slots_per_day;
        &self.values[index * s..(index + 1) * s]
    }

    pub fn day_of(&self, date: NaiveDate) -> Option<&'a [f64]> {
        self.calendar.index_of(date).map(|i| self.day(i))
    }
}
