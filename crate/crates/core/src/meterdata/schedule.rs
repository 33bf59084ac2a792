use std::collections::BTreeSet;
use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{Calendar, MeterDataError, Result};

/// Half-open slot range `[start, end)` within a day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotWindow {
    pub start: usize,
    pub end: usize,
}

impl Default for SlotWindow {
    /// 3 p.m. to 9 p.m. on an hourly day.
    fn default() -> Self {
        Self { start: 15, end: 21 }
    }
}

impl SlotWindow {
    pub fn new(start: usize, end: usize) -> Result<Self> {
        if start >= end {
            return Err(MeterDataError::Schedule(format!(
                "empty slot window [{start}, {end})"
            )));
        }
        Ok(Self { start, end })
    }

    pub fn full_day(slots: usize) -> Self {
        Self { start: 0, end: slots }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn fits(&self, slots_per_day: usize) -> bool {
        self.start < self.end && self.end <= slots_per_day
    }
}

/// Event days, the event-hour window and the holiday calendar.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSchedule {
    event_days: BTreeSet<NaiveDate>,
    window: SlotWindow,
    #[serde(default)]
    holidays: BTreeSet<NaiveDate>,
}

impl EventSchedule {
    pub fn new(
        event_days: impl IntoIterator<Item = NaiveDate>,
        window: SlotWindow,
        holidays: impl IntoIterator<Item = NaiveDate>,
    ) -> Result<Self> {
        let schedule = Self {
            event_days: event_days.into_iter().collect(),
            window,
            holidays: holidays.into_iter().collect(),
        };
        schedule.check()?;
        Ok(schedule)
    }

    fn check(&self) -> Result<()> {
        if self.window.start >= self.window.end {
            return Err(MeterDataError::Schedule(format!(
                "empty slot window [{}, {})",
                self.window.start, self.window.end
            )));
        }
        if let Some(d) = self.event_days.intersection(&self.holidays).next() {
            return Err(MeterDataError::Schedule(format!("{d} is both an event day and a holiday")));
        }
        Ok(())
    }

    /// Checks that every event day lies in the calendar and the window fits the day.
    pub fn check_against(&self, calendar: &Calendar) -> Result<()> {
        self.check()?;
        if !self.window.fits(calendar.slots_per_day) {
            return Err(MeterDataError::Schedule(format!(
                "window [{}, {}) exceeds {} slots per day",
                self.window.start, self.window.end, calendar.slots_per_day
            )));
        }
        if let Some(d) = self.event_days.iter().find(|d| calendar.index_of(**d).is_none()) {
            return Err(MeterDataError::Schedule(format!(
                "event day {d} outside dataset range {}..={}",
                calendar.start,
                calendar.end()
            )));
        }
        Ok(())
    }

    pub fn event_days(&self) -> &BTreeSet<NaiveDate> {
        &self.event_days
    }

    pub fn window(&self) -> SlotWindow {
        self.window
    }

    pub fn holidays(&self) -> &BTreeSet<NaiveDate> {
        &self.holidays
    }

    pub fn is_event_day(&self, date: NaiveDate) -> bool {
        self.event_days.contains(&date)
    }

    pub fn is_holiday(&self, date: NaiveDate) -> bool {
        self.holidays.contains(&date)
    }
}
