use std::collections::BTreeSet;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::ClockTime;
use crate::{Error, Result};

fn default_weekend() -> Vec<Weekday> {
    vec![Weekday::Sat, Weekday::Sun]
}

fn default_grid() -> u16 {
    5
}

fn default_window_length() -> u16 {
    120
}

fn default_noon() -> ClockTime {
    ClockTime::hm(12, 0)
}

/// Calendar settings as stored in the clinic file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarConfig {
    pub span_start: NaiveDate,
    pub span_end: NaiveDate,
    #[serde(default = "default_weekend")]
    pub weekend_days: Vec<Weekday>,
    #[serde(default)]
    pub holidays: BTreeSet<NaiveDate>,
    /// Minutes per slot; every start time lies on this grid.
    #[serde(default = "default_grid")]
    pub time_grid: u16,
    #[serde(default = "default_window_length")]
    pub window_length: u16,
    #[serde(default = "default_noon")]
    pub noon_boundary: ClockTime,
}

impl CalendarConfig {
    pub fn new(span_start: NaiveDate, span_end: NaiveDate) -> Self {
        Self {
            span_start,
            span_end,
            weekend_days: default_weekend(),
            holidays: BTreeSet::new(),
            time_grid: default_grid(),
            window_length: default_window_length(),
            noon_boundary: default_noon(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.span_end < self.span_start {
            return Err(Error::config("calendar span ends before it starts"));
        }
        if self.time_grid == 0 || self.window_length == 0 {
            return Err(Error::config("time grid and window length must be positive"));
        }
        if !self.window_length.is_multiple_of(self.time_grid) {
            return Err(Error::config(format!(
                "window length {} is not a multiple of the {}-minute grid",
                self.window_length, self.time_grid
            )));
        }
        Ok(())
    }
}

/// Working-day index over the configured span.
///
/// Working days are numbered consecutively from the start of the span, so
/// "working days between two dates" is a plain index difference.
#[derive(Debug, Clone)]
pub struct Calendar {
    config: CalendarConfig,
    days: Vec<NaiveDate>,
    /// For every calendar day of the span: index of the first working day on
    /// or after it (`days.len()` when there is none).
    next_index: Vec<u32>,
    working: Vec<bool>,
}

impl Calendar {
    pub fn new(config: CalendarConfig) -> Result<Self> {
        config.validate()?;
        let span = (config.span_end - config.span_start).num_days() as usize + 1;
        let mut working = Vec::with_capacity(span);
        let mut days = Vec::new();
        for offset in 0..span {
            let d = config.span_start + Days::new(offset as u64);
            let w = !config.weekend_days.contains(&d.weekday()) && !config.holidays.contains(&d);
            if w {
                days.push(d);
            }
            working.push(w);
        }
        let mut next_index = vec![0u32; span];
        let mut next = days.len() as u32;
        for offset in (0..span).rev() {
            if working[offset] {
                next -= 1;
            }
            next_index[offset] = next;
        }
        Ok(Self {
            config,
            days,
            next_index,
            working,
        })
    }

    pub fn config(&self) -> &CalendarConfig {
        &self.config
    }

    pub fn span_start(&self) -> NaiveDate {
        self.config.span_start
    }

    pub fn span_end(&self) -> NaiveDate {
        self.config.span_end
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        d >= self.config.span_start && d <= self.config.span_end
    }

    fn offset(&self, d: NaiveDate) -> Option<usize> {
        self.contains(d)
            .then(|| (d - self.config.span_start).num_days() as usize)
    }

    pub fn is_working(&self, d: NaiveDate) -> bool {
        self.offset(d).is_some_and(|o| self.working[o])
    }

    pub fn num_working_days(&self) -> usize {
        self.days.len()
    }

    pub fn working_days(&self) -> &[NaiveDate] {
        &self.days
    }

    /// Index of `d` when it is a working day.
    pub fn working_index(&self, d: NaiveDate) -> Option<usize> {
        let o = self.offset(d)?;
        self.working[o].then(|| self.next_index[o] as usize)
    }

    /// Index of the first working day on or after `d`.
    pub fn index_on_or_after(&self, d: NaiveDate) -> Result<usize> {
        let o = if d < self.config.span_start && d.succ_opt() == Some(self.config.span_start) {
            0
        } else {
            self.offset(d).ok_or(Error::OutOfRange(d))?
        };
        let i = self.next_index[o] as usize;
        if i >= self.days.len() {
            return Err(Error::OutOfRange(d));
        }
        Ok(i)
    }

    pub fn date(&self, index: usize) -> NaiveDate {
        self.days[index]
    }

    pub fn try_date(&self, index: usize) -> Option<NaiveDate> {
        self.days.get(index).copied()
    }

    /// Smallest working date `>= d`.
    ///
    /// `d` may be the day before the span starts. Dates further out, or dates
    /// with no working day left in the span, are a range error.
    pub fn next_working_day(&self, d: NaiveDate) -> Result<NaiveDate> {
        self.index_on_or_after(d).map(|i| self.days[i])
    }

    /// Working date `n` working days after working date `d`.
    pub fn add_working_days(&self, d: NaiveDate, n: usize) -> Result<NaiveDate> {
        let i = self.index_on_or_after(d)?;
        self.try_date(i + n).ok_or(Error::OutOfRange(d))
    }

    /// Signed working-day distance between the working days on or after `from`
    /// and `to`.
    pub fn working_days_between(&self, from: NaiveDate, to: NaiveDate) -> Result<i64> {
        Ok(self.index_on_or_after(to)? as i64 - self.index_on_or_after(from)? as i64)
    }

    /// Number of working days in `[from, to]`.
    pub fn working_days_in(&self, from: NaiveDate, to: NaiveDate) -> usize {
        let mut d = from.max(self.config.span_start);
        let end = to.min(self.config.span_end);
        let mut n = 0;
        while d <= end {
            if self.is_working(d) {
                n += 1;
            }
            d = d.succ_opt().expect("date overflow");
        }
        n
    }

    /// Monday of the week containing `d`.
    pub fn week_start(d: NaiveDate) -> NaiveDate {
        d - Days::new(d.weekday().num_days_from_monday() as u64)
    }

    /// Working days in the Monday-to-Sunday week starting at `monday`.
    pub fn working_days_in_week(&self, monday: NaiveDate) -> usize {
        self.working_days_in(monday, monday + Days::new(6))
    }
}
