use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::baseline::HighXofYConfig;
use crate::meterdata::{EventSchedule, SlotWindow};
use crate::metrics::DEFAULT_LAMBDA;
use crate::settlement::{SettlementMode, TariffSchedule};
use crate::synthgen::{SynthConfig, DEFAULT_MIN_LEAD_DAYS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[serde(alias = "high_x_of_y", alias = "nyiso")]
    HighXofY,
    Rct,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::HighXofY => "highxofy",
            Method::Rct => "rct",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Where the load data comes from.
///
/// For `synthetic`, the generator seed is derived from each run seed and the
/// `seed` field of the embedded config is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SynthConfig),
    Csv { path: PathBuf },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic(SynthConfig::default())
    }
}

/// Event schedule: monthly peak days picked from the data, or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleSource {
    Auto {
        #[serde(default = "default_lead")]
        min_lead_days: usize,
        #[serde(default)]
        window: SlotWindow,
        #[serde(default)]
        holidays: BTreeSet<NaiveDate>,
    },
    Explicit(EventSchedule),
}

fn default_lead() -> usize {
    DEFAULT_MIN_LEAD_DAYS
}

impl Default for ScheduleSource {
    fn default() -> Self {
        ScheduleSource::Auto {
            min_lead_days: DEFAULT_MIN_LEAD_DAYS,
            window: SlotWindow::default(),
            holidays: BTreeSet::new(),
        }
    }
}

/// Full experiment description, read from JSON.
///
/// Every field has a default, so `{}` is a valid config reproducing the
/// standard matrix: both methods, five control fractions, both modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub methods: Vec<Method>,
    pub highxofy: HighXofYConfig,
    pub control_fractions: Vec<f64>,
    pub modes: Vec<SettlementMode>,
    pub schedule: ScheduleSource,
    pub tariff: TariffSchedule,
    pub lambda: f64,
    pub seeds: Vec<u64>,
    pub formats: Vec<OutputFormat>,
    /// Not echoed into the manifest; bundles written to different
    /// directories stay byte-identical.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: DataSource::default(),
            methods: vec![Method::HighXofY, Method::Rct],
            highxofy: HighXofYConfig::default(),
            control_fractions: vec![0.05, 0.10, 0.15, 0.20, 0.25],
            modes: vec![SettlementMode::Granular, SettlementMode::Aggregated],
            schedule: ScheduleSource::default(),
            tariff: TariffSchedule::default(),
            lambda: DEFAULT_LAMBDA,
            seeds: vec![0],
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        if self.modes.is_empty() {
            return bad("modes must not be empty".into());
        }
        if self.control_fractions.is_empty() {
            return bad("control_fractions must not be empty".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.formats.is_empty() {
            return bad("formats must not be empty".into());
        }
        for &f in &self.control_fractions {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("control fraction {f} outside (0, 1)"));
            }
        }
        if has_duplicates(self.control_fractions.iter().map(|f| f.to_bits()))
            || has_duplicates(self.methods.iter())
            || has_duplicates(self.modes.iter())
            || has_duplicates(self.seeds.iter())
        {
            return bad("methods, modes, fractions and seeds must not repeat".into());
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0, 1]", self.lambda));
        }
        self.highxofy.check().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.tariff.check().map_err(|e| HarnessError::Config(e.to_string()))?;
        if let DataSource::Synthetic(s) = &self.data {
            s.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

fn has_duplicates<T: Ord>(items: impl Iterator<Item = T>) -> bool {
    let mut seen = BTreeSet::new();
    items.into_iter().any(|i| !seen.insert(i))
}
