//! Customer baseline load (CBL) estimators.
//!
//! [`high_x_of_y`] averages the highest-consumption recent days of the
//! subject's own history. The RCT estimators in [`rct`] use a randomly drawn
//! control group's consumption on the event day itself.

mod highxofy;
mod rct;

use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::meterdata::{CustomerId, MeterDataError};

pub use highxofy::{eligible_days, high_x_of_y, high_x_of_y_from, select_high_days, HighXofYConfig};
pub use rct::{rct_baseline_aggregated, rct_baseline_granular, rct_split, PopulationSplit};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("only {found} of {needed} eligible days available before {event_day}")]
    InsufficientHistory {
        event_day: NaiveDate,
        needed: usize,
        found: usize,
    },

    #[error("{0} is not a scheduled event day")]
    NotEventDay(NaiveDate),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(transparent)]
    Data(#[from] MeterDataError),
}

pub type Result<T, E = BaselineError> = std::result::Result<T, E>;

/// Whose consumption a curve describes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subject {
    Customer(CustomerId),
    /// Summed consumption of a customer group.
    Aggregate,
}

impl Subject {
    pub const AGGREGATE_LABEL: &'static str = "<aggregate>";
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Customer(id) => f.write_str(id.as_str()),
            Subject::Aggregate => f.write_str(Self::AGGREGATE_LABEL),
        }
    }
}

/// Baseline `b(d, t)` for every slot of one event day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineCurve {
    pub subject: Subject,
    pub event_day: NaiveDate,
    pub values: Vec<f64>,
}

/// Writes curves as `subject,event_day,slot,cbl_kwh`.
pub fn write_baseline_csv<W: Write>(curves: &[BaselineCurve], sink: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["subject", "event_day", "slot", "cbl_kwh"])?;
    for curve in curves {
        let subject = curve.subject.to_string();
        let day = curve.event_day.format("%Y-%m-%d").to_string();
        for (slot, v) in curve.values.iter().enumerate() {
            w.write_record([subject.as_str(), day.as_str(), &slot.to_string(), &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
