//! Experiment matrix: methods × control fractions × modes × event days × seeds.
//!
//! For each seed the harness builds (or ingests) one dataset, draws one
//! population split per control fraction and evaluates every
//! `(method, fraction, mode)` group over all event days. The split defines
//! the evaluated treatment population for both methods; only RCT reads the
//! control group's load. Groups run in parallel and are collected in config
//! order, so results never depend on the worker count.

mod config;
mod report;

use std::fs::File;
use std::io::BufReader;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{DataSource, ExperimentConfig, Method, OutputFormat, ScheduleSource};
pub use report::{emit_report, read_manifest, RunManifest, MANIFEST_FILE, SCHEMA_VERSION};

use crate::baseline::{
    eligible_days, high_x_of_y_from, rct_baseline_aggregated, rct_baseline_granular, rct_split, BaselineCurve,
    PopulationSplit, Subject,
};
use crate::meterdata::{parse_interval_csv, EventSchedule, IntervalLayout, LoadDataset};
use crate::metrics::{evaluate, CurveTable, EvalWindow, MetricsReport};
use crate::settlement::{settle_population, DaySettlement, SettlementMode};
use crate::stats::Interval;
use crate::synthgen::{generate, monthly_peak_schedule, SynthConfig};

/// Environment variable capping the worker count.
pub const WORKERS_ENV: &str = "CBLBENCH_WORKERS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),

    #[error("seed {seed}: {message}")]
    Data { seed: u64, message: String },

    #[error("{method} fraction {fraction} {mode} event day {} seed {seed}: {message}",
        event_day.map_or_else(|| "-".to_string(), |d| d.to_string()))]
    Cell {
        method: Method,
        fraction: f64,
        mode: SettlementMode,
        event_day: Option<NaiveDate>,
        seed: u64,
        message: String,
    },

    #[error("emission failed: {0}")]
    Emit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Mixes a run seed with a stream tag (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const DATASET_STREAM: u64 = 0x6461_7461; // "data"

/// Seed of the synthetic dataset for a run seed.
pub fn dataset_seed(seed: u64) -> u64 {
    derive_seed(seed, DATASET_STREAM)
}

/// Seed of the population split for a run seed and control fraction.
pub fn split_seed(seed: u64, fraction: f64) -> u64 {
    derive_seed(seed, fraction.to_bits())
}

/// Settlement figures for one group, without per-customer records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettlementSummary {
    pub days: Vec<DaySettlement>,
    pub mean_flr_pct: f64,
    pub mean_rebate_pct: f64,
    pub flr_pct_ci95: Option<Interval>,
    pub rebate_pct_ci95: Option<Interval>,
}

/// One `(seed, method, fraction, mode)` row with its per-event-day cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    pub seed: u64,
    pub method: Method,
    pub mode: SettlementMode,
    pub control_fraction: f64,
    pub control_count: usize,
    pub treatment_count: usize,
    /// Aggregated-mode figures are per capita of the treatment group.
    pub metrics: MetricsReport,
    pub settlement: SettlementSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub event_days: Vec<NaiveDate>,
    pub groups: Vec<GroupResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub manifest: RunManifest,
    pub seeds: Vec<SeedResult>,
}

impl ReportBundle {
    pub fn groups(&self) -> impl Iterator<Item = &GroupResult> {
        self.seeds.iter().flat_map(|s| s.groups.iter())
    }

    /// Number of `(method, fraction, mode, event day)` cells per seed.
    pub fn cell_count(&self, seed: u64) -> usize {
        self.seeds
            .iter()
            .filter(|s| s.seed == seed)
            .flat_map(|s| &s.groups)
            .map(|g| g.metrics.per_day.len())
            .sum()
    }
}

/// Worker count from the environment, else the machine's parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Loads the dataset for one run seed.
pub fn load_dataset(cfg: &ExperimentConfig, seed: u64) -> Result<LoadDataset, HarnessError> {
    let data_err = |message: String| HarnessError::Data { seed, message };
    let dataset = match &cfg.data {
        DataSource::Synthetic(synth) => generate(&SynthConfig {
            seed: dataset_seed(seed),
            ..synth.clone()
        })
        .map_err(|e| data_err(e.to_string()))?,
        DataSource::Csv { path } => read_csv_dataset(path).map_err(|e| data_err(e.to_string()))?,
    };
    dataset.ensure_valid().map_err(|e| data_err(e.to_string()))?;
    Ok(dataset)
}

/// Reads a wide interval CSV, detecting the slot count and resampling to hourly.
pub fn read_csv_dataset(path: &std::path::Path) -> Result<LoadDataset, crate::meterdata::MeterDataError> {
    let mut reader = csv::Reader::from_path(path)?;
    let layout = IntervalLayout::detect(reader.headers()?)?;
    drop(reader);
    let d = parse_interval_csv(BufReader::new(File::open(path)?), &layout)?;
    d.resample_to_hourly()
}

/// Resolves the event schedule for a dataset.
pub fn resolve_schedule(cfg: &ExperimentConfig, d: &LoadDataset, seed: u64) -> Result<EventSchedule, HarnessError> {
    let data_err = |message: String| HarnessError::Data { seed, message };
    let schedule = match &cfg.schedule {
        ScheduleSource::Auto {
            min_lead_days,
            window,
            holidays,
        } => {
            let peaks = monthly_peak_schedule(d, *min_lead_days, *window).map_err(|e| data_err(e.to_string()))?;
            let days: Vec<NaiveDate> = peaks
                .event_days()
                .iter()
                .copied()
                .filter(|day| !holidays.contains(day))
                .collect();
            EventSchedule::new(days, *window, holidays.iter().copied()).map_err(|e| data_err(e.to_string()))?
        }
        ScheduleSource::Explicit(s) => s.clone(),
    };
    schedule
        .check_against(&d.calendar())
        .map_err(|e| data_err(e.to_string()))?;
    if schedule.event_days().is_empty() {
        return Err(data_err("schedule has no event days".into()));
    }
    Ok(schedule)
}

struct GroupSpec {
    method: Method,
    fraction: f64,
    mode: SettlementMode,
}

/// Runs the whole matrix on a pool of `workers` threads.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ReportBundle, HarnessError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    let seeds = pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| run_seed(cfg, seed))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(ReportBundle {
        manifest: RunManifest::new(cfg),
        seeds,
    })
}

/// All groups for one seed.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedResult, HarnessError> {
    let dataset = load_dataset(cfg, seed)?;
    let schedule = resolve_schedule(cfg, &dataset, seed)?;

    let splits = cfg
        .control_fractions
        .iter()
        .map(|&f| {
            rct_split(dataset.customers(), f, split_seed(seed, f)).map_err(|e| HarnessError::Cell {
                method: Method::Rct,
                fraction: f,
                mode: cfg.modes[0],
                event_day: None,
                seed,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut specs = Vec::new();
    for &method in &cfg.methods {
        for &fraction in &cfg.control_fractions {
            for &mode in &cfg.modes {
                specs.push(GroupSpec { method, fraction, mode });
            }
        }
    }
    let groups = specs
        .par_iter()
        .map(|spec| {
            let split = &splits[cfg
                .control_fractions
                .iter()
                .position(|f| f.to_bits() == spec.fraction.to_bits())
                .expect("fraction comes from config")];
            run_group(cfg, &dataset, &schedule, split, spec, seed)
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(SeedResult {
        seed,
        event_days: schedule.event_days().iter().copied().collect(),
        groups,
    })
}

fn run_group(
    cfg: &ExperimentConfig,
    dataset: &LoadDataset,
    schedule: &EventSchedule,
    split: &PopulationSplit,
    spec: &GroupSpec,
    seed: u64,
) -> Result<GroupResult, HarnessError> {
    let cell_err = |event_day: Option<NaiveDate>, message: String| HarnessError::Cell {
        method: spec.method,
        fraction: spec.fraction,
        mode: spec.mode,
        event_day,
        seed,
        message,
    };
    let (_, treatment_idx) = split.resolve(dataset).map_err(|e| cell_err(None, e.to_string()))?;
    let days: Vec<NaiveDate> = schedule.event_days().iter().copied().collect();
    let aggregate = dataset.aggregate_indices(&treatment_idx);

    let mut table = CurveTable::new();
    for &day in &days {
        let curves = baselines_for_day(cfg, dataset, schedule, split, &treatment_idx, &aggregate, spec, day)
            .map_err(|e| cell_err(Some(day), e.to_string()))?;
        for c in curves {
            table.insert(c);
        }
    }

    let subjects = match spec.mode {
        SettlementMode::Granular => split.treatment.iter().cloned().map(Subject::Customer).collect(),
        SettlementMode::Aggregated => vec![Subject::Aggregate],
    };
    let window = EvalWindow::new(subjects, days, schedule.window()).map_err(|e| cell_err(None, e.to_string()))?;
    let metrics = match spec.mode {
        SettlementMode::Granular => evaluate(&table, dataset, &window, cfg.lambda),
        SettlementMode::Aggregated => {
            evaluate(&table, &aggregate, &window, cfg.lambda).and_then(|r| r.per_capita(treatment_idx.len()))
        }
    }
    .map_err(|e| cell_err(None, e.to_string()))?;

    let settlement = settle_population(&table, dataset, &split.treatment, schedule, &cfg.tariff, spec.mode)
        .map_err(|e| cell_err(None, e.to_string()))?;

    Ok(GroupResult {
        seed,
        method: spec.method,
        mode: spec.mode,
        control_fraction: spec.fraction,
        control_count: split.control.len(),
        treatment_count: split.treatment.len(),
        metrics,
        settlement: SettlementSummary {
            days: settlement.days,
            mean_flr_pct: settlement.mean_flr_pct,
            mean_rebate_pct: settlement.mean_rebate_pct,
            flr_pct_ci95: settlement.flr_pct_ci95,
            rebate_pct_ci95: settlement.rebate_pct_ci95,
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn baselines_for_day(
    cfg: &ExperimentConfig,
    dataset: &LoadDataset,
    schedule: &EventSchedule,
    split: &PopulationSplit,
    treatment_idx: &[usize],
    aggregate: &crate::meterdata::LoadSeries,
    spec: &GroupSpec,
    day: NaiveDate,
) -> Result<Vec<BaselineCurve>, crate::baseline::BaselineError> {
    match (spec.method, spec.mode) {
        (Method::HighXofY, SettlementMode::Granular) => {
            let eligible = eligible_days(&dataset.calendar(), schedule, day, &cfg.highxofy)?;
            treatment_idx
                .iter()
                .zip(&split.treatment)
                .map(|(&c, id)| {
                    high_x_of_y_from(Subject::Customer(id.clone()), &dataset.series(c), &eligible, day, cfg.highxofy.x)
                })
                .collect()
        }
        (Method::HighXofY, SettlementMode::Aggregated) => {
            let eligible = eligible_days(&dataset.calendar(), schedule, day, &cfg.highxofy)?;
            Ok(vec![high_x_of_y_from(Subject::Aggregate, &aggregate.view(), &eligible, day, cfg.highxofy.x)?])
        }
        (Method::Rct, SettlementMode::Granular) => rct_baseline_granular(dataset, split, day),
        (Method::Rct, SettlementMode::Aggregated) => Ok(vec![rct_baseline_aggregated(dataset, split, day)?]),
    }
}
