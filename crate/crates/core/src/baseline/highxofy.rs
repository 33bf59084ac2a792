use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{BaselineCurve, BaselineError, Result, Subject};
use crate::meterdata::{is_weekend, Calendar, EventSchedule, SeriesView};

/// Parameters of the HighXofY averaging baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HighXofYConfig {
    pub x: usize,
    pub y: usize,
    /// Residential loads do not drop on weekends, so weekends count as history.
    pub include_weekends: bool,
    pub exclude_holidays: bool,
    pub exclude_prior_event_days: bool,
}

impl Default for HighXofYConfig {
    /// High5of10 with weekends included.
    fn default() -> Self {
        Self {
            x: 5,
            y: 10,
            include_weekends: true,
            exclude_holidays: true,
            exclude_prior_event_days: true,
        }
    }
}

impl HighXofYConfig {
    pub fn new(x: usize, y: usize) -> Result<Self> {
        let cfg = Self {
            x,
            y,
            ..Self::default()
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.x == 0 || self.x > self.y {
            return Err(BaselineError::Argument(format!(
                "HighXofY needs 1 <= x <= y, got x={} y={}",
                self.x, self.y
            )));
        }
        Ok(())
    }
}

/// The `y` most recent qualifying days strictly before `event_day`,
/// most recent first.
pub fn eligible_days(
    calendar: &Calendar,
    schedule: &EventSchedule,
    event_day: NaiveDate,
    cfg: &HighXofYConfig,
) -> Result<Vec<NaiveDate>> {
    cfg.check()?;
    if !schedule.is_event_day(event_day) {
        return Err(BaselineError::NotEventDay(event_day));
    }
    let mut out = Vec::with_capacity(cfg.y);
    let mut day = event_day;
    while out.len() < cfg.y {
        match day.checked_sub_days(Days::new(1)) {
            Some(prev) if prev >= calendar.start => day = prev,
            _ => break,
        }
        if day > calendar.end() {
            continue;
        }
        if cfg.exclude_prior_event_days && schedule.is_event_day(day) {
            continue;
        }
        if cfg.exclude_holidays && schedule.is_holiday(day) {
            continue;
        }
        if !cfg.include_weekends && is_weekend(day) {
            continue;
        }
        out.push(day);
    }
    if out.len() < cfg.y {
        return Err(BaselineError::InsufficientHistory {
            event_day,
            needed: cfg.y,
            found: out.len(),
        });
    }
    Ok(out)
}

/// Picks the `x` days with the highest daily mean from `eligible`
/// (ordered most recent first; the more recent day wins a tie).
/// Returns the chosen days in chronological order.
pub fn select_high_days(series: &SeriesView<'_>, eligible: &[NaiveDate], x: usize) -> Result<Vec<NaiveDate>> {
    let slots = series.calendar.slots_per_day as f64;
    let mut ranked = Vec::with_capacity(eligible.len());
    for &date in eligible {
        let values = series
            .day_of(date)
            .ok_or(crate::meterdata::MeterDataError::DateOutOfRange(date))?;
        ranked.push((date, values.iter().sum::<f64>() / slots));
    }
    // stable: ties keep the most-recent-first input order
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut chosen: Vec<NaiveDate> = ranked.into_iter().take(x).map(|(d, _)| d).collect();
    chosen.sort_unstable();
    Ok(chosen)
}

/// HighXofY baseline for one series on one event day.
pub fn high_x_of_y(
    subject: Subject,
    series: &SeriesView<'_>,
    schedule: &EventSchedule,
    event_day: NaiveDate,
    cfg: &HighXofYConfig,
) -> Result<BaselineCurve> {
    let eligible = eligible_days(&series.calendar, schedule, event_day, cfg)?;
    high_x_of_y_from(subject, series, &eligible, event_day, cfg.x)
}

/// HighXofY baseline from a precomputed eligible-day list.
pub fn high_x_of_y_from(
    subject: Subject,
    series: &SeriesView<'_>,
    eligible: &[NaiveDate],
    event_day: NaiveDate,
    x: usize,
) -> Result<BaselineCurve> {
    if x == 0 || x > eligible.len() {
        return Err(BaselineError::Argument(format!(
            "cannot select {x} of {} eligible days",
            eligible.len()
        )));
    }
    let chosen = select_high_days(series, eligible, x)?;
    let mut values = vec![0.0; series.calendar.slots_per_day];
    for date in &chosen {
        // day_of cannot fail here; select_high_days already resolved every date
        for (acc, v) in values.iter_mut().zip(series.day_of(*date).unwrap_or_default()) {
            *acc += v;
        }
    }
    for v in &mut values {
        *v /= x as f64;
    }
    Ok(BaselineCurve {
        subject,
        event_day,
        values,
    })
}
