//! Run configuration shared by the simulator and the command line.

use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::CalendarConfig;
use crate::scheduler::ObjectiveWeights;
use crate::{Error, Result};

/// Parameters of plan enumeration and selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Plans kept per course.
    pub k: usize,
    /// Start days tried per course, counted in working days from the
    /// earliest possible start.
    pub start_offsets: usize,
    /// Planning horizon in calendar months from the batch day.
    pub horizon_months: u32,
    /// Wall-clock cap for one batch. Reaching it keeps the best selection
    /// found so far.
    pub budget_secs: f64,
    /// Local-search passes over the whole batch.
    pub ls_max_passes: usize,
    /// Cheaper candidates examined per course in an ejection move.
    pub ls_candidates: usize,
    /// Most items ejected to make room for one cheaper plan.
    pub ls_max_ejections: usize,
    /// Calendar days before a priority B or C course is communicated.
    pub notification_days: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            k: 200,
            start_offsets: 15,
            horizon_months: 3,
            budget_secs: 60.0,
            ls_max_passes: 4,
            ls_candidates: 12,
            ls_max_ejections: 16,
            notification_days: 7,
        }
    }
}

/// Shape and rate of placeholder patients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlaceholderConfig {
    pub enabled: bool,
    pub n_fractions: u32,
    pub duration: u16,
    /// Working days of arrival history averaged.
    pub trailing_days: usize,
    /// Daily priority-A rate assumed before any history exists.
    pub prior_rate: f64,
    /// Working days after the expected arrival a placeholder may start.
    pub start_slack: usize,
    /// Cost of leaving a placeholder unplaced, in priority-A waiting days.
    pub drop_penalty_days: f64,
}

impl Default for PlaceholderConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            n_fractions: 5,
            duration: 15,
            trailing_days: 14,
            prior_rate: 4.0,
            start_slack: 1,
            drop_penalty_days: 10.0,
        }
    }
}

/// Static-reservation baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Minutes at the end of each machine day kept for priority A until the
    /// day before.
    pub reserved_minutes: u16,
    pub k: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            reserved_minutes: 60,
            k: 8,
        }
    }
}

/// Input file locations. Absent entries fall back to the built-in fixture
/// (clinic, protocols) or to nothing (arrivals, calendar, input schedule).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InputPaths {
    pub clinic: Option<PathBuf>,
    pub protocols: Option<PathBuf>,
    pub arrivals: Option<PathBuf>,
    pub calendar: Option<PathBuf>,
    pub input_schedule: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub inputs: InputPaths,
    /// Effective calendar, filled in from the clinic file when written to
    /// output headers.
    pub calendar: Option<CalendarConfig>,
    pub sim_start: NaiveDate,
    pub sim_end: NaiveDate,
    pub weights: ObjectiveWeights,
    pub solver: SolverConfig,
    pub placeholders: PlaceholderConfig,
    pub baseline: BaselineConfig,
    /// Share of the largest values dropped per metric in trimmed aggregates.
    pub trim: f64,
    /// Courses created before this date are left out of reports.
    pub comparison_start: NaiveDate,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let d = |m, d| NaiveDate::from_ymd_opt(2020, m, d).expect("valid date");
        Self {
            inputs: InputPaths::default(),
            calendar: None,
            sim_start: d(1, 1),
            sim_end: d(12, 31),
            weights: ObjectiveWeights::default(),
            solver: SolverConfig::default(),
            placeholders: PlaceholderConfig::default(),
            baseline: BaselineConfig::default(),
            trim: 0.01,
            comparison_start: d(4, 1),
            seed: 2020,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.sim_end < self.sim_start {
            return Err(Error::config("sim_end precedes sim_start"));
        }
        if !(0.0..0.5).contains(&self.trim) {
            return Err(Error::config(format!("trim must lie in [0, 0.5), got {}", self.trim)));
        }
        let s = &self.solver;
        if s.k == 0 || s.start_offsets == 0 || s.horizon_months == 0 {
            return Err(Error::config("k, start_offsets and horizon_months must be positive"));
        }
        if s.budget_secs.is_nan() || s.budget_secs <= 0.0 {
            return Err(Error::config("budget_secs must be positive"));
        }
        let p = &self.placeholders;
        if p.n_fractions == 0 || p.duration == 0 || p.trailing_days == 0 {
            return Err(Error::config("placeholder shape must be positive"));
        }
        if p.prior_rate.is_nan() || p.prior_rate < 0.0 || p.drop_penalty_days.is_nan() || p.drop_penalty_days <= 0.0 {
            return Err(Error::config("placeholder rates must be non-negative"));
        }
        if self.baseline.k == 0 {
            return Err(Error::config("baseline k must be positive"));
        }
        Ok(())
    }

    /// One-line JSON used as the provenance header of every output.
    pub fn header(&self) -> String {
        format!(
            "run_config: {}",
            serde_json::to_string(self).expect("config serializes")
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let json = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
        let partial: RunConfig = serde_json::from_str(r#"{"trim": 0.0}"#).unwrap();
        assert_eq!(partial.solver, SolverConfig::default());
    }
}
