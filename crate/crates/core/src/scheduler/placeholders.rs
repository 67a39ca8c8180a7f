use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::config::PlaceholderConfig;
use crate::model::Calendar;

/// Expected priority-A demand on one future day. Lives only inside a batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaceholderPatient {
    pub expected_arrival: NaiveDate,
    /// Index among the placeholders of the same day.
    pub index: u32,
    pub n_fractions: u32,
    pub duration: u16,
}

/// Daily priority-A rate over the trailing window ending at `today`.
///
/// `a_arrivals` maps working days to priority-A arrival counts; days absent
/// from the map count as zero if they are on or after `history_start`.
/// Without any covered day the configured prior rate is returned.
pub fn trailing_rate(
    a_arrivals: &BTreeMap<NaiveDate, u32>,
    history_start: Option<NaiveDate>,
    today: NaiveDate,
    cal: &Calendar,
    cfg: &PlaceholderConfig,
) -> f64 {
    let Some(start) = history_start.filter(|s| *s <= today) else {
        return cfg.prior_rate;
    };
    let Ok(hi) = cal.index_on_or_after(today.succ_opt().expect("date overflow")) else {
        return cfg.prior_rate;
    };
    let Ok(lo) = cal.index_on_or_after(start) else {
        return cfg.prior_rate;
    };
    let lo = lo.max(hi.saturating_sub(cfg.trailing_days));
    if hi <= lo {
        return cfg.prior_rate;
    }
    let days = &cal.working_days()[lo..hi];
    let total: u32 = days.iter().map(|d| a_arrivals.get(d).copied().unwrap_or(0)).sum();
    total as f64 / days.len() as f64
}

/// Placeholders for every working day after `today` up to `horizon_end`,
/// `round(trailing rate)` per day.
pub fn reserve_placeholders(
    a_arrivals: &BTreeMap<NaiveDate, u32>,
    history_start: Option<NaiveDate>,
    today: NaiveDate,
    horizon_end: NaiveDate,
    cal: &Calendar,
    cfg: &PlaceholderConfig,
) -> Vec<PlaceholderPatient> {
    if !cfg.enabled {
        return Vec::new();
    }
    let per_day = trailing_rate(a_arrivals, history_start, today, cal, cfg).round() as u32;
    cal.working_days()
        .iter()
        .filter(|d| **d > today && **d <= horizon_end)
        .flat_map(|&d| {
            (0..per_day).map(move |index| PlaceholderPatient {
                expected_arrival: d,
                index,
                n_fractions: cfg.n_fractions,
                duration: cfg.duration,
            })
        })
        .collect()
}
