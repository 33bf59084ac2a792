#![allow(dead_code)]

//! Fixtures and brute-force reference implementations shared by the
//! integration tests. Nothing here calls into the code under test except
//! for data accessors.

use std::collections::BTreeMap;

use cblbench::meterdata::{is_weekend, CustomerId, EventSchedule, LoadDataset};
use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

pub fn ids(n: usize) -> Vec<CustomerId> {
    (0..n).map(|i| CustomerId::new(format!("m{i:03}"))).collect()
}

/// Uniform readings in `[lo, hi)` drawn customer by customer.
pub fn random_dataset(
    rng: &mut impl Rng,
    n_customers: usize,
    start: NaiveDate,
    n_days: usize,
    slots: usize,
    lo: f64,
    hi: f64,
) -> LoadDataset {
    let readings = (0..n_customers * n_days * slots).map(|_| rng.random_range(lo..hi)).collect();
    LoadDataset::new(ids(n_customers), start, n_days, slots, readings).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Triple loop over subjects, days and slots: (MAE, bias).
pub fn naive_mae_bias(baseline: &[Vec<Vec<f64>>], actual: &[Vec<Vec<f64>>]) -> (f64, f64) {
    let mut abs = 0.0;
    let mut signed = 0.0;
    let mut n = 0usize;
    for i in 0..baseline.len() {
        for d in 0..baseline[i].len() {
            for t in 0..baseline[i][d].len() {
                let e = baseline[i][d][t] - actual[i][d][t];
                abs += e.abs();
                signed += e;
                n += 1;
            }
        }
    }
    (abs / n as f64, signed / n as f64)
}

/// Walks back one calendar day at a time and keeps qualifying days until
/// `y` are found. Returns `None` when history runs out.
pub fn naive_eligible(
    d: &LoadDataset,
    schedule: &EventSchedule,
    event: NaiveDate,
    y: usize,
    include_weekends: bool,
) -> Option<Vec<NaiveDate>> {
    let mut out = Vec::new();
    let mut cur = event;
    while out.len() < y {
        cur = cur.checked_sub_days(Days::new(1))?;
        if cur < d.start() {
            return None;
        }
        let skip = schedule.event_days().contains(&cur)
            || schedule.holidays().contains(&cur)
            || (!include_weekends && is_weekend(cur));
        if !skip {
            out.push(cur);
        }
    }
    Some(out)
}

/// Tries every `x`-subset of `eligible` and keeps the one with the largest
/// total daily consumption. Returns the chosen days sorted and the per-slot
/// average over them.
pub fn brute_force_high_x(
    day_values: impl Fn(NaiveDate) -> Vec<f64>,
    eligible: &[NaiveDate],
    x: usize,
) -> (Vec<NaiveDate>, Vec<f64>) {
    let n = eligible.len();
    let totals: Vec<f64> = eligible.iter().map(|&d| day_values(d).iter().sum()).collect();
    let mut best: Option<(f64, u32)> = None;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != x {
            continue;
        }
        let score: f64 = (0..n).filter(|b| mask >> b & 1 == 1).map(|b| totals[b]).sum();
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, mask));
        }
    }
    let mask = best.unwrap().1;
    let mut chosen: Vec<NaiveDate> = (0..n).filter(|b| mask >> b & 1 == 1).map(|b| eligible[b]).collect();
    chosen.sort();
    let slots = day_values(chosen[0]).len();
    let mut avg = vec![0.0; slots];
    for &c in &chosen {
        for (a, v) in avg.iter_mut().zip(day_values(c)) {
            *a += v;
        }
    }
    for a in &mut avg {
        *a /= x as f64;
    }
    (chosen, avg)
}

/// Column sums over the listed customers, cell by cell.
pub fn naive_aggregate(d: &LoadDataset, who: &[usize]) -> Vec<f64> {
    let cells = d.n_days() * d.slots_per_day();
    let mut out = vec![0.0; cells];
    for &c in who {
        for day in 0..d.n_days() {
            for t in 0..d.slots_per_day() {
                out[day * d.slots_per_day() + t] += d.reading(c, day, t);
            }
        }
    }
    out
}

/// For every full month, the first day (by date) whose all-customer total is
/// maximal among days with at least `lead` days of data before them.
pub fn naive_monthly_peaks(d: &LoadDataset, lead: usize) -> Vec<NaiveDate> {
    let mut by_month: BTreeMap<(i32, u32), Vec<(usize, NaiveDate)>> = BTreeMap::new();
    for i in 0..d.n_days() {
        let dt = d.start() + Days::new(i as u64);
        by_month.entry((dt.year(), dt.month())).or_default().push((i, dt));
    }
    let mut out = Vec::new();
    for ((y, m), days) in by_month {
        let next = if m == 12 {
            NaiveDate::from_ymd_opt(y + 1, 1, 1)
        } else {
            NaiveDate::from_ymd_opt(y, m + 1, 1)
        }
        .unwrap();
        let len = (next - NaiveDate::from_ymd_opt(y, m, 1).unwrap()).num_days() as usize;
        if days.len() != len {
            continue;
        }
        let mut best: Option<(f64, NaiveDate)> = None;
        for (i, dt) in days {
            if i < lead {
                continue;
            }
            let mut total = 0.0;
            for c in 0..d.customers().len() {
                for t in 0..d.slots_per_day() {
                    total += d.reading(c, i, t);
                }
            }
            if best.is_none_or(|(b, _)| total > b) {
                best = Some((total, dt));
            }
        }
        out.push(best.unwrap().1);
    }
    out
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
