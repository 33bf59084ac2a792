//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use cblbench::baseline::{
    eligible_days, high_x_of_y, high_x_of_y_from, rct_baseline_aggregated, rct_baseline_granular, rct_split,
    select_high_days, BaselineCurve, HighXofYConfig, Subject,
};
use cblbench::harness::{emit_report, run_experiment, ExperimentConfig, Method, OutputFormat, ReportBundle};
use cblbench::meterdata::{EventSchedule, SlotWindow};
use cblbench::metrics::{bias, mae, opi, CurveTable, EvalWindow};
use cblbench::settlement::{settle_population, SettlementMode, TariffSchedule};
use cblbench::stats::{confidence_interval, mean, sample_sd};
use cblbench::synthgen::{default_event_schedule, generate, SynthConfig};
use chrono::Days;
use common::*;
use rand::seq::IndexedRandom;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const RATE_RATIO: f64 = 0.35 / 0.097;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed < limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:.2?}, limit {limit:?}"))
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn c1_metric_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = seeded(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=5);
        let days = rng.random_range(1..=3);
        let d = random_dataset(&mut rng, n, date("2012-07-01"), days, 6, 0.0, 4.0);
        let dates: Vec<_> = d.calendar().dates().collect();
        let mut table = CurveTable::new();
        let mut b3 = Vec::new();
        let mut l3 = Vec::new();
        for (c, id) in d.customers().iter().enumerate() {
            let (mut bd, mut ld) = (Vec::new(), Vec::new());
            for (k, &day) in dates.iter().enumerate() {
                let values: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..4.0)).collect();
                bd.push(values.clone());
                ld.push(d.day_slice(c, k).to_vec());
                table.insert(BaselineCurve {
                    subject: Subject::Customer(id.clone()),
                    event_day: day,
                    values,
                });
            }
            b3.push(bd);
            l3.push(ld);
        }
        let w = EvalWindow::new(
            d.customers().iter().cloned().map(Subject::Customer).collect(),
            dates,
            SlotWindow::full_day(6),
        )
        .map_err(|e| e.to_string())?;
        let (a, b) = naive_mae_bias(&b3, &l3);
        let got_a = mae(&table, &d, &w).map_err(|e| e.to_string())?;
        let got_b = bias(&table, &d, &w).map_err(|e| e.to_string())?;
        for (g, e) in [(got_a, a), (got_b, b)] {
            let rel = (g - e).abs() / e.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(rel);
        }
    }
    within(started.elapsed(), Duration::from_secs(1))?;
    check(
        worst <= 1e-12,
        format!("100 instances, worst relative error {worst:.1e}, {:.2?}", started.elapsed()),
    )
}

fn c2_opi_fixtures() -> Outcome {
    // (label, MAE, bias, printed OPI): granular rows then aggregated rows
    let rows: [(&str, f64, f64, f64); 20] = [
        ("granular highxofy 5%", 1.17, 0.11, 0.64),
        ("granular rct 5%", 1.58, 0.22, 0.90),
        ("granular highxofy 10%", 1.19, 0.12, 0.66),
        ("granular rct 10%", 1.42, -0.01, 0.71),
        ("granular highxofy 15%", 1.24, 0.13, 0.68),
        ("granular rct 15%", 1.29, -0.28, 0.78),
        ("granular highxofy 20%", 1.25, 0.14, 0.69),
        ("granular rct 20%", 1.22, -0.21, 0.71),
        ("granular highxofy 25%", 1.29, 0.15, 0.72),
        ("granular rct 25%", 1.14, -0.28, 0.71),
        ("aggregated highxofy 5%", 0.21, -0.12, 0.17),
        ("aggregated rct 5%", 0.41, 0.23, 0.32),
        ("aggregated highxofy 10%", 0.19, -0.11, 0.15),
        ("aggregated rct 10%", 0.30, -0.01, 0.15),
        ("aggregated highxofy 15%", 0.18, -0.10, 0.14),
        ("aggregated rct 15%", 0.39, -0.32, 0.36),
        ("aggregated highxofy 20%", 0.18, -0.09, 0.14),
        ("aggregated rct 20%", 0.32, -0.26, 0.29),
        ("aggregated highxofy 25%", 0.17, -0.08, 0.13),
        ("aggregated rct 25%", 0.40, -0.37, 0.38),
    ];
    // ±0.005 inclusive; the slack absorbs binary representation of decimal inputs
    let tol = 0.005 + 1e-12;
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for (label, a, b, printed) in rows {
        let o = opi(a, b, 0.5).map_err(|e| e.to_string())?;
        worst = worst.max((o - printed).abs());
        if (o - printed).abs() > tol {
            bad.push(format!("{label}: {o:.4} vs {printed}"));
        }
    }
    check(
        bad.is_empty(),
        if bad.is_empty() {
            format!("20 rows, max |Δ| {worst:.4}")
        } else {
            bad.join("; ")
        },
    )
}

fn c3_settlement_ratio() -> Outcome {
    let d = generate(&SynthConfig::default()).map_err(|e| e.to_string())?;
    let schedule = default_event_schedule(&d).map_err(|e| e.to_string())?;
    let tariff = TariffSchedule::default();
    let split = rct_split(d.customers(), 0.1, 42).map_err(|e| e.to_string())?;
    let (_, treatment_idx) = split.resolve(&d).map_err(|e| e.to_string())?;
    let aggregate = d.aggregate_indices(&treatment_idx);
    let cfg = HighXofYConfig::default();

    let mut records = 0usize;
    let mut worst = 0.0f64;
    let mut note = |pairs: Vec<(f64, f64)>| {
        for (flr, rebate) in pairs {
            if flr > 0.0 {
                records += 1;
                worst = worst.max(((rebate / flr) - RATE_RATIO).abs() / RATE_RATIO);
            }
        }
    };
    for mode in [SettlementMode::Granular, SettlementMode::Aggregated] {
        let mut hx = CurveTable::new();
        let mut rct = CurveTable::new();
        for &day in schedule.event_days() {
            match mode {
                SettlementMode::Granular => {
                    for (&c, id) in treatment_idx.iter().zip(&split.treatment) {
                        hx.insert(
                            high_x_of_y(Subject::Customer(id.clone()), &d.series(c), &schedule, day, &cfg)
                                .map_err(|e| e.to_string())?,
                        );
                    }
                    for curve in rct_baseline_granular(&d, &split, day).map_err(|e| e.to_string())? {
                        rct.insert(curve);
                    }
                }
                SettlementMode::Aggregated => {
                    hx.insert(
                        high_x_of_y(Subject::Aggregate, &aggregate.view(), &schedule, day, &cfg)
                            .map_err(|e| e.to_string())?,
                    );
                    rct.insert(rct_baseline_aggregated(&d, &split, day).map_err(|e| e.to_string())?);
                }
            }
        }
        for table in [&hx, &rct] {
            let report = settle_population(table, &d, &split.treatment, &schedule, &tariff, mode)
                .map_err(|e| e.to_string())?;
            note(report.records.iter().map(|r| (r.flr_pct, r.rebate_pct_of_revenue)).collect());
            note(report.days.iter().map(|r| (r.flr_pct, r.rebate_pct)).collect());
        }
    }
    let granular_table = 115.44 / 31.99;
    let aggregated_table = 18.53 / 5.13;
    let dev_g = (granular_table - RATE_RATIO).abs() / RATE_RATIO;
    let dev_a = (aggregated_table - RATE_RATIO).abs() / RATE_RATIO;
    let detail = format!(
        "{records} records, worst relative deviation {worst:.1e}; published ratios {granular_table:.4} ({:.3}%) and {aggregated_table:.4} ({:.3}%) vs {RATE_RATIO:.4}",
        dev_g * 100.0,
        dev_a * 100.0
    );
    check(records > 0 && worst <= 1e-9 && dev_g <= 0.005 && dev_a <= 0.005, detail)
}

fn seeds(n: u64) -> Vec<u64> {
    (0..n).collect()
}

fn by_cell(bundle: &ReportBundle) -> BTreeMap<(Method, SettlementMode, u64), Vec<(f64, f64)>> {
    let mut out: BTreeMap<_, Vec<_>> = BTreeMap::new();
    for g in bundle.groups() {
        let pct = (g.control_fraction * 100.0).round() as u64;
        out.entry((g.method, g.mode, pct)).or_default().push((g.metrics.alpha, g.metrics.beta));
    }
    out
}

fn c4_rct_granular_trend() -> Outcome {
    let started = Instant::now();
    let cfg = ExperimentConfig {
        methods: vec![Method::Rct],
        modes: vec![SettlementMode::Granular],
        seeds: seeds(30),
        ..ExperimentConfig::default()
    };
    let bundle = run_experiment(&cfg, workers()).map_err(|e| e.to_string())?;
    within(started.elapsed(), Duration::from_secs(120))?;
    let cells = by_cell(&bundle);
    let at5: Vec<f64> = cells[&(Method::Rct, SettlementMode::Granular, 5)].iter().map(|c| c.0).collect();
    let at25: Vec<f64> = cells[&(Method::Rct, SettlementMode::Granular, 25)].iter().map(|c| c.0).collect();
    let diffs: Vec<f64> = at5.iter().zip(&at25).map(|(a, b)| a - b).collect();
    let n = diffs.len() as f64;
    let t = mean(&diffs) / (sample_sd(&diffs) / n.sqrt());
    let p = 1.0 - StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| e.to_string())?.cdf(t);
    let drop = 1.0 - mean(&at25) / mean(&at5);
    check(
        drop >= 0.10 && p < 0.05,
        format!(
            "mean MAE {:.4} at 5% vs {:.4} at 25%: drop {:.1}% (need >= 10%), paired t = {t:.2}, one-sided p = {p:.2e}, {:.2?}",
            mean(&at5),
            mean(&at25),
            drop * 100.0,
            started.elapsed()
        ),
    )
}

fn c5_aggregation_benefit() -> Outcome {
    let started = Instant::now();
    let cfg = ExperimentConfig {
        seeds: seeds(30),
        ..ExperimentConfig::default()
    };
    let bundle = run_experiment(&cfg, workers()).map_err(|e| e.to_string())?;
    within(started.elapsed(), Duration::from_secs(120))?;
    let cells = by_cell(&bundle);
    let mut worst = (0.0f64, String::new());
    let mut bad = Vec::new();
    for method in [Method::HighXofY, Method::Rct] {
        for pct in [5, 10, 15, 20, 25] {
            let g = mean(&cells[&(method, SettlementMode::Granular, pct)].iter().map(|c| c.0).collect::<Vec<_>>());
            let a = mean(&cells[&(method, SettlementMode::Aggregated, pct)].iter().map(|c| c.0).collect::<Vec<_>>());
            let ratio = a / g;
            if ratio > worst.0 {
                worst = (ratio, format!("{method} {pct}%"));
            }
            if ratio > 0.5 {
                bad.push(format!("{method} {pct}%: {a:.3} vs {g:.3}"));
            }
        }
    }
    let detail = format!(
        "worst aggregated/granular ratio {:.3} ({}), {:.2?}",
        worst.0,
        worst.1,
        started.elapsed()
    );
    check(bad.is_empty(), if bad.is_empty() { detail } else { format!("{detail}; {}", bad.join("; ")) })
}

fn c6_rct_unbiased() -> Outcome {
    let cfg = ExperimentConfig {
        methods: vec![Method::Rct],
        modes: vec![SettlementMode::Aggregated],
        seeds: seeds(50),
        ..ExperimentConfig::default()
    };
    let bundle = run_experiment(&cfg, workers()).map_err(|e| e.to_string())?;
    // one aggregated RCT bias per seed: the mean over the run's control fractions
    let per_seed: Vec<f64> = bundle
        .seeds
        .iter()
        .map(|s| mean(&s.groups.iter().map(|g| g.metrics.beta).collect::<Vec<_>>()))
        .collect();
    let ci = confidence_interval(&per_seed, 0.95).map_err(|e| e.to_string())?;
    let cells = by_cell(&bundle);
    let mut parts = Vec::new();
    for pct in [5, 10, 15, 20, 25] {
        let betas: Vec<f64> = cells[&(Method::Rct, SettlementMode::Aggregated, pct)].iter().map(|c| c.1).collect();
        let f = confidence_interval(&betas, 0.95).map_err(|e| e.to_string())?;
        parts.push(format!("{pct}% [{:.3}, {:.3}]", f.low, f.high));
    }
    check(
        ci.low <= 0.0 && 0.0 <= ci.high,
        format!(
            "mean bias {:.4}, 95% CI [{:.4}, {:.4}] over 50 seeds; by fraction {}",
            mean(&per_seed),
            ci.low,
            ci.high,
            parts.join(", ")
        ),
    )
}

fn c7_counterfactual_independence() -> Outcome {
    let mut rng = seeded(107);
    let base = random_dataset(&mut rng, 24, date("2012-09-01"), 40, 24, 0.1, 4.0);
    let cfg = HighXofYConfig::default();
    let mut changed = 0usize;
    for trial in 0..1000 {
        let event_idx = rng.random_range(20..40);
        let event = base.start() + Days::new(event_idx as u64);
        let schedule = EventSchedule::new([event], SlotWindow::default(), []).map_err(|e| e.to_string())?;
        if trial % 2 == 0 {
            let c = rng.random_range(0..base.customers().len());
            let before = high_x_of_y(Subject::Aggregate, &base.series(c), &schedule, event, &cfg)
                .map_err(|e| e.to_string())?;
            let all: Vec<usize> = (0..base.customers().len()).collect();
            let agg_before = base.aggregate_indices(&all);
            let agg_b = high_x_of_y(Subject::Aggregate, &agg_before.view(), &schedule, event, &cfg)
                .map_err(|e| e.to_string())?;
            let mut perturbed = base.clone();
            for _ in 0..rng.random_range(1..=24) {
                let t = rng.random_range(0..24);
                let who = rng.random_range(0..base.customers().len());
                let v = perturbed.reading(who, event_idx, t) * rng.random_range(0.0..5.0);
                perturbed = perturbed.with_reading(who, event_idx, t, v);
            }
            let after = high_x_of_y(Subject::Aggregate, &perturbed.series(c), &schedule, event, &cfg)
                .map_err(|e| e.to_string())?;
            let agg_after = perturbed.aggregate_indices(&all);
            let agg_a = high_x_of_y(Subject::Aggregate, &agg_after.view(), &schedule, event, &cfg)
                .map_err(|e| e.to_string())?;
            if bits(&before.values) != bits(&after.values) || bits(&agg_b.values) != bits(&agg_a.values) {
                changed += 1;
            }
        } else {
            let split = rct_split(base.customers(), rng.random_range(0.05..0.5), rng.random())
                .map_err(|e| e.to_string())?;
            let (_, treatment) = split.resolve(&base).map_err(|e| e.to_string())?;
            let g_before = rct_baseline_granular(&base, &split, event).map_err(|e| e.to_string())?;
            let a_before = rct_baseline_aggregated(&base, &split, event).map_err(|e| e.to_string())?;
            let mut perturbed = base.clone();
            for _ in 0..rng.random_range(1..=48) {
                let who = *treatment.choose(&mut rng).unwrap();
                let t = rng.random_range(0..24);
                let v = rng.random_range(0.0..20.0);
                perturbed = perturbed.with_reading(who, event_idx, t, v);
            }
            let g_after = rct_baseline_granular(&perturbed, &split, event).map_err(|e| e.to_string())?;
            let a_after = rct_baseline_aggregated(&perturbed, &split, event).map_err(|e| e.to_string())?;
            let same = g_before.len() == g_after.len()
                && g_before.iter().zip(&g_after).all(|(x, y)| bits(&x.values) == bits(&y.values))
                && bits(&a_before.values) == bits(&a_after.values);
            if !same {
                changed += 1;
            }
        }
    }
    check(changed == 0, format!("1000 trials, {changed} baselines changed"))
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn c8_high_x_of_y_enumeration() -> Outcome {
    let mut rng = seeded(108);
    let mut mismatches = 0;
    for _ in 0..50 {
        let d = random_dataset(&mut rng, 1, date("2012-10-01"), 16, 24, 0.0, 3.0);
        let y = rng.random_range(1..=6);
        let x = rng.random_range(1..=y);
        let event = date("2012-10-15");
        let prior = date("2012-10-12");
        let schedule = EventSchedule::new([event, prior], SlotWindow::default(), []).map_err(|e| e.to_string())?;
        let cfg = HighXofYConfig {
            include_weekends: rng.random_bool(0.7),
            ..HighXofYConfig::new(x, y).map_err(|e| e.to_string())?
        };
        let series = d.series(0);
        let eligible = eligible_days(&d.calendar(), &schedule, event, &cfg).map_err(|e| e.to_string())?;
        let oracle_eligible = naive_eligible(&d, &schedule, event, y, cfg.include_weekends).ok_or("oracle ran out of history")?;
        let chosen = select_high_days(&series, &eligible, x).map_err(|e| e.to_string())?;
        let curve = high_x_of_y_from(Subject::Aggregate, &series, &eligible, event, x).map_err(|e| e.to_string())?;
        let (oracle_days, oracle_curve) =
            brute_force_high_x(|day| series.day_of(day).unwrap().to_vec(), &oracle_eligible, x);
        if eligible != oracle_eligible || chosen != oracle_days || bits(&curve.values) != bits(&oracle_curve) {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("50 instances, {mismatches} mismatches"))
}

fn c9_rct_consistency() -> Outcome {
    let mut rng = seeded(109);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(4..=60);
        let d = random_dataset(&mut rng, n, date("2012-11-01"), 2, 24, 0.0, 6.0);
        let split = rct_split(d.customers(), rng.random_range(0.05..0.6), rng.random()).map_err(|e| e.to_string())?;
        let day = date("2012-11-02");
        let granular = rct_baseline_granular(&d, &split, day).map_err(|e| e.to_string())?;
        let aggregated = rct_baseline_aggregated(&d, &split, day).map_err(|e| e.to_string())?;
        for t in 0..24 {
            let sum: f64 = granular.iter().map(|c| c.values[t]).sum();
            let a = aggregated.values[t];
            worst = worst.max((sum - a).abs() / a.abs().max(f64::MIN_POSITIVE));
        }
    }
    check(worst <= 1e-9, format!("50 splits, worst relative gap {worst:.1e}"))
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig {
        seeds: vec![7],
        ..ExperimentConfig::default()
    };
    let formats = [OutputFormat::Csv, OutputFormat::Json];
    let mut trees = Vec::new();
    for (k, w) in [1usize, 4].into_iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let bundle = run_experiment(&cfg, w).map_err(|e| e.to_string())?;
        emit_report(&bundle, &formats, &out).map_err(|e| e.to_string())?;
        trees.push(tree(&out));
    }
    let differing: Vec<&String> = trees[0]
        .iter()
        .filter(|(k, v)| trees[1].get(*k) != Some(v))
        .map(|(k, _)| k)
        .collect();
    check(
        trees[0].len() == trees[1].len() && differing.is_empty(),
        format!("{} files compared across 1 and 4 workers, {} differ", trees[0].len(), differing.len()),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("metric oracle equivalence", c1_metric_oracle),
        ("OPI fixture consistency", c2_opi_fixtures),
        ("settlement ratio identity", c3_settlement_ratio),
        ("RCT granular trend", c4_rct_granular_trend),
        ("aggregation benefit", c5_aggregation_benefit),
        ("RCT unbiasedness", c6_rct_unbiased),
        ("counterfactual independence", c7_counterfactual_independence),
        ("HighXofY brute-force equivalence", c8_high_x_of_y_enumeration),
        ("RCT granular/aggregated consistency", c9_rct_consistency),
        ("determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
