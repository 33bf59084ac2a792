//! Report emission.
//!
//! Layout under the output directory:
//!
//! ```text
//! run.json                              manifest: schema version, tool version, config echo
//! csv/seed-<s>/metrics.csv              one row per method × fraction × mode
//! csv/seed-<s>/cells.csv                one row per method × fraction × mode × event day
//! csv/seed-<s>/settlement.csv           per event day settlement totals
//! csv/seed-<s>/settlement_summary.csv   mean over event days with 95% intervals
//! csv/seed-<s>/figures/<mode>_<metric>.csv   bar + whisker data, metric ∈
//!                                       accuracy, bias, opi, flr, rebate
//! json/bundle.json                      the whole bundle
//! ```
//!
//! Column orders are fixed. Every file is rendered in memory, written to a
//! staging directory and renamed into place.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, GroupResult, HarnessError, OutputFormat, ReportBundle};
use crate::settlement::SettlementMode;
use crate::stats::Interval;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "run.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config: config.clone(),
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, HarnessError> {
    let text = fs::read_to_string(path)?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(HarnessError::Config(format!(
            "manifest schema version {} is not supported (expected {SCHEMA_VERSION})",
            manifest.schema_version
        )));
    }
    Ok(manifest)
}

pub(crate) fn pct_label(fraction: f64) -> String {
    let p = (fraction * 100.0 * 1e6).round() / 1e6;
    format!("{p}")
}

fn num(v: f64) -> String {
    v.to_string()
}

fn ci_cols(ci: Option<Interval>) -> [String; 2] {
    match ci {
        Some(i) => [num(i.low), num(i.high)],
        None => [String::new(), String::new()],
    }
}

fn render_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, HarnessError> {
    let emit = |e: csv::Error| HarnessError::Emit(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(emit)?;
    for r in rows {
        w.write_record(&r).map_err(emit)?;
    }
    w.into_inner().map_err(|e| HarnessError::Emit(e.to_string()))
}

fn metrics_rows(groups: &[GroupResult]) -> Vec<Vec<String>> {
    groups
        .iter()
        .map(|g| {
            let m = &g.metrics;
            let mut row = vec![g.method.to_string(), g.mode.to_string(), pct_label(g.control_fraction)];
            row.extend([num(m.alpha), num(m.beta), num(m.opi)]);
            for ci in [m.ci95.map(|c| c.alpha), m.ci95.map(|c| c.beta), m.ci95.map(|c| c.opi)] {
                row.extend(ci_cols(ci));
            }
            row.push(g.treatment_count.to_string());
            row
        })
        .collect()
}

fn cell_rows(groups: &[GroupResult]) -> Vec<Vec<String>> {
    groups
        .iter()
        .flat_map(|g| {
            g.metrics.per_day.iter().map(move |d| {
                vec![
                    g.method.to_string(),
                    g.mode.to_string(),
                    pct_label(g.control_fraction),
                    d.day.to_string(),
                    num(d.alpha),
                    num(d.beta),
                    num(d.opi),
                ]
            })
        })
        .collect()
}

fn settlement_rows(groups: &[GroupResult]) -> Vec<Vec<String>> {
    groups
        .iter()
        .flat_map(|g| {
            g.settlement.days.iter().map(move |d| {
                vec![
                    g.method.to_string(),
                    g.mode.to_string(),
                    pct_label(g.control_fraction),
                    d.event_day.to_string(),
                    num(d.flr_kwh),
                    num(d.flr_pct),
                    d.rebate.to_string(),
                    d.revenue.to_string(),
                    num(d.rebate_pct),
                ]
            })
        })
        .collect()
}

fn settlement_summary_rows(groups: &[GroupResult]) -> Vec<Vec<String>> {
    groups
        .iter()
        .map(|g| {
            let s = &g.settlement;
            let mut row = vec![g.method.to_string(), g.mode.to_string(), pct_label(g.control_fraction)];
            row.push(num(s.mean_flr_pct));
            row.extend(ci_cols(s.flr_pct_ci95));
            row.push(num(s.mean_rebate_pct));
            row.extend(ci_cols(s.rebate_pct_ci95));
            row
        })
        .collect()
}

type FigureValue = fn(&GroupResult) -> (f64, Option<Interval>);

const FIGURES: [(&str, FigureValue); 5] = [
    ("accuracy", |g| (g.metrics.alpha, g.metrics.ci95.map(|c| c.alpha))),
    ("bias", |g| (g.metrics.beta, g.metrics.ci95.map(|c| c.beta))),
    ("opi", |g| (g.metrics.opi, g.metrics.ci95.map(|c| c.opi))),
    ("flr", |g| (g.settlement.mean_flr_pct, g.settlement.flr_pct_ci95)),
    ("rebate", |g| (g.settlement.mean_rebate_pct, g.settlement.rebate_pct_ci95)),
];

fn render_files(bundle: &ReportBundle, formats: &[OutputFormat]) -> Result<Vec<(PathBuf, Vec<u8>)>, HarnessError> {
    let mut files = Vec::new();
    let manifest =
        serde_json::to_vec_pretty(&bundle.manifest).map_err(|e| HarnessError::Emit(e.to_string()))?;
    files.push((PathBuf::from(MANIFEST_FILE), manifest));

    if formats.contains(&OutputFormat::Csv) {
        for seed in &bundle.seeds {
            let dir = PathBuf::from("csv").join(format!("seed-{}", seed.seed));
            let g = &seed.groups;
            files.push((
                dir.join("metrics.csv"),
                render_csv(
                    &[
                        "method", "mode", "control_pct", "alpha", "beta", "opi", "alpha_ci_lo", "alpha_ci_hi",
                        "beta_ci_lo", "beta_ci_hi", "opi_ci_lo", "opi_ci_hi", "treatment_n",
                    ],
                    metrics_rows(g),
                )?,
            ));
            files.push((
                dir.join("cells.csv"),
                render_csv(
                    &["method", "mode", "control_pct", "event_day", "alpha", "beta", "opi"],
                    cell_rows(g),
                )?,
            ));
            files.push((
                dir.join("settlement.csv"),
                render_csv(
                    &[
                        "method", "mode", "control_pct", "event_day", "flr_kwh", "flr_pct", "rebate_usd",
                        "revenue_usd", "rebate_pct",
                    ],
                    settlement_rows(g),
                )?,
            ));
            files.push((
                dir.join("settlement_summary.csv"),
                render_csv(
                    &[
                        "method", "mode", "control_pct", "flr_pct", "flr_pct_ci_lo", "flr_pct_ci_hi",
                        "rebate_pct", "rebate_pct_ci_lo", "rebate_pct_ci_hi",
                    ],
                    settlement_summary_rows(g),
                )?,
            ));
            for mode in [SettlementMode::Granular, SettlementMode::Aggregated] {
                let bars: Vec<&GroupResult> = g.iter().filter(|r| r.mode == mode).collect();
                if bars.is_empty() {
                    continue;
                }
                for (name, value) in FIGURES {
                    let rows = bars.iter().map(|r| {
                        let (v, ci) = value(r);
                        let [lo, hi] = ci_cols(ci);
                        vec![r.method.to_string(), pct_label(r.control_fraction), num(v), lo, hi]
                    });
                    files.push((
                        dir.join("figures").join(format!("{mode}_{name}.csv")),
                        render_csv(&["method", "control_pct", "value", "ci_lo", "ci_hi"], rows)?,
                    ));
                }
            }
        }
    }
    if formats.contains(&OutputFormat::Json) {
        let json = serde_json::to_vec_pretty(bundle).map_err(|e| HarnessError::Emit(e.to_string()))?;
        files.push((PathBuf::from("json").join("bundle.json"), json));
    }
    Ok(files)
}

/// Writes the bundle under `out_dir` and returns the written paths.
///
/// Files appear only through rename from a staging directory, so a failed
/// emission never leaves a truncated file behind.
pub fn emit_report(bundle: &ReportBundle, formats: &[OutputFormat], out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let files = render_files(bundle, formats)?;
    fs::create_dir_all(out_dir)?;
    let staging = tempfile::Builder::new().prefix(".staging-").tempdir_in(out_dir)?;
    for (rel, bytes) in &files {
        let path = staging.path().join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
    }
    let mut written = Vec::with_capacity(files.len());
    for (rel, _) in &files {
        let dest = out_dir.join(rel);
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::rename(staging.path().join(rel), &dest)?;
        written.push(dest);
    }
    staging.close()?;
    Ok(written)
}
