//! Quality objectives per course, machine occupancy and the per-priority
//! aggregate report.
//!
//! Course metrics read the schedule in chronological order, so a fraction
//! moved to the end of a course by a repair counts where it is delivered.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::{
    earliest_start, Appointment, BeamMatch, Clinic, CourseId, MachineId, MachineTier, Priority,
    ProtocolTable, Schedule, TimePreference, TreatmentCourse, TreatmentProtocol,
};
use crate::{Error, Result};

fn scheduled<'a>(course: &TreatmentCourse, schedule: &'a Schedule) -> Result<Vec<&'a Appointment>> {
    let appts = schedule.course(&course.course_id);
    if appts.is_empty() {
        return Err(Error::UndefinedMetric(format!(
            "course `{}` is not scheduled",
            course.course_id
        )));
    }
    Ok(appts)
}

fn earliest(
    course: &TreatmentCourse,
    protocol: &TreatmentProtocol,
    schedule: &Schedule,
    clinic: &Clinic,
) -> Result<NaiveDate> {
    let pred = course.follows_course.as_ref().and_then(|f| schedule.last_date(f));
    earliest_start(course, protocol, &clinic.calendar, pred)
}

/// Working days from the earliest allowed start to the first fraction.
pub fn waiting_time(
    course: &TreatmentCourse,
    protocol: &TreatmentProtocol,
    schedule: &Schedule,
    clinic: &Clinic,
) -> Result<u32> {
    let first = scheduled(course, schedule)?[0].date;
    let e = earliest(course, protocol, schedule, clinic)?;
    Ok(clinic.calendar.working_days_between(e, first)?.max(0) as u32)
}

/// Calendar days from the earliest allowed start to the first fraction.
pub fn waiting_calendar_days(
    course: &TreatmentCourse,
    protocol: &TreatmentProtocol,
    schedule: &Schedule,
    clinic: &Clinic,
) -> Result<u32> {
    let first = scheduled(course, schedule)?[0].date;
    let e = earliest(course, protocol, schedule, clinic)?;
    Ok((first - e).num_days().max(0) as u32)
}

/// Consecutive fractions whose time windows differ.
pub fn window_switches(course: &CourseId, schedule: &Schedule) -> u32 {
    schedule
        .course(course)
        .windows(2)
        .filter(|w| w[0].window_index != w[1].window_index)
        .count() as u32
}

/// Fractions outside the patient's preferred half of the day.
pub fn off_window(course: &TreatmentCourse, schedule: &Schedule, clinic: &Clinic) -> u32 {
    let Some(pref) = course.time_preference else {
        return 0;
    };
    schedule
        .course(&course.course_id)
        .iter()
        .filter(|a| {
            let w = a.window_index as usize;
            let morning = w < clinic.layout.len() && clinic.layout.is_morning(w);
            morning != (pref == TimePreference::Morning)
        })
        .count() as u32
}

/// Machine-related costs of one course.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachinePrefCost {
    pub non_preferred: u32,
    pub partial_switches: u32,
    pub off_site: u32,
}

pub fn machine_pref_cost(
    course: &TreatmentCourse,
    protocol: &TreatmentProtocol,
    schedule: &Schedule,
    clinic: &Clinic,
) -> Result<MachinePrefCost> {
    let appts = schedule.course(&course.course_id);
    let mut out = MachinePrefCost::default();
    for a in &appts {
        if protocol.machine_tier(&a.machine) != Some(MachineTier::Preferred) {
            out.non_preferred += 1;
        }
        if clinic.park.machine(&a.machine)?.site != course.site_preference {
            out.off_site += 1;
        }
    }
    for w in appts.windows(2) {
        if clinic.park.beam_match(&w[0].machine, &w[1].machine)? == BeamMatch::Partial {
            out.partial_switches += 1;
        }
    }
    Ok(out)
}

/// Working days from first to last fraction beyond the protocol's minimal
/// span. Doubled days can make the span shorter than minimal; that counts
/// as zero.
pub fn excess_days(
    course: &TreatmentCourse,
    protocol: &TreatmentProtocol,
    schedule: &Schedule,
    clinic: &Clinic,
) -> Result<u32> {
    let appts = scheduled(course, schedule)?;
    if appts.len() != course.n_fractions as usize {
        return Err(Error::UndefinedMetric(format!(
            "course `{}` has {} of {} fractions scheduled",
            course.course_id,
            appts.len(),
            course.n_fractions
        )));
    }
    let (first, last) = (appts[0].date, appts[appts.len() - 1].date);
    let span = clinic.calendar.working_days_between(first, last)? + 1;
    Ok((span - protocol.min_span(course.n_fractions) as i64).max(0) as u32)
}

/// Population standard deviation of start times in minutes. Auxiliary: not
/// part of the objective.
pub fn start_time_std(course: &CourseId, schedule: &Schedule) -> f64 {
    let starts: Vec<f64> = schedule
        .course(course)
        .iter()
        .map(|a| a.start.minutes() as f64)
        .collect();
    if starts.is_empty() {
        return 0.0;
    }
    let n = starts.len() as f64;
    let mean = starts.iter().sum::<f64>() / n;
    (starts.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Booked and available minutes of one machine over `[from, to]`, counting
/// only days with some availability.
pub fn machine_minutes(
    machine: &MachineId,
    from: NaiveDate,
    to: NaiveDate,
    schedule: &Schedule,
    clinic: &Clinic,
) -> (u64, u64) {
    let mut booked_by_day: BTreeMap<NaiveDate, u64> = BTreeMap::new();
    for a in schedule.iter().filter(|a| &a.machine == machine && a.date >= from && a.date <= to) {
        *booked_by_day.entry(a.date).or_default() += a.duration as u64;
    }
    let (mut booked, mut available) = (0, 0);
    let mut d = from;
    while d <= to {
        if clinic.calendar.is_working(d) {
            let avail = clinic.park.available_minutes(machine, d) as u64;
            if avail > 0 {
                available += avail;
                booked += booked_by_day.get(&d).copied().unwrap_or(0);
            }
        }
        d = d.succ_opt().expect("date overflow");
    }
    (booked, available)
}

/// Booked over available minutes on working days with availability.
pub fn occupancy(
    machine: &MachineId,
    from: NaiveDate,
    to: NaiveDate,
    schedule: &Schedule,
    clinic: &Clinic,
) -> Result<f64> {
    let (booked, available) = machine_minutes(machine, from, to, schedule, clinic);
    if available == 0 {
        return Err(Error::UndefinedMetric(format!(
            "{machine} has no available minutes in {from}..{to}"
        )));
    }
    Ok(booked as f64 / available as f64)
}

/// Raw metric values of one fully scheduled course.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CourseMetrics {
    pub course_id: CourseId,
    pub priority: Priority,
    pub waiting_days: u32,
    pub waiting_calendar_days: u32,
    pub window_switches: u32,
    pub off_window: u32,
    pub non_preferred: u32,
    pub partial_switches: u32,
    pub off_site: u32,
    pub excess_days: u32,
    pub start_time_std: f64,
}

pub const METRIC_NAMES: [&str; 8] = [
    "waiting_days",
    "waiting_calendar_days",
    "window_switches",
    "off_window",
    "non_preferred",
    "partial_switches",
    "off_site",
    "excess_days",
];

impl CourseMetrics {
    pub fn compute(
        course: &TreatmentCourse,
        protocol: &TreatmentProtocol,
        schedule: &Schedule,
        clinic: &Clinic,
    ) -> Result<Self> {
        let pref = machine_pref_cost(course, protocol, schedule, clinic)?;
        Ok(Self {
            course_id: course.course_id.clone(),
            priority: protocol.priority,
            waiting_days: waiting_time(course, protocol, schedule, clinic)?,
            waiting_calendar_days: waiting_calendar_days(course, protocol, schedule, clinic)?,
            window_switches: window_switches(&course.course_id, schedule),
            off_window: off_window(course, schedule, clinic),
            non_preferred: pref.non_preferred,
            partial_switches: pref.partial_switches,
            off_site: pref.off_site,
            excess_days: excess_days(course, protocol, schedule, clinic)?,
            start_time_std: start_time_std(&course.course_id, schedule),
        })
    }

    /// Values in the order of [`METRIC_NAMES`].
    pub fn values(&self) -> [u32; 8] {
        [
            self.waiting_days,
            self.waiting_calendar_days,
            self.window_switches,
            self.off_window,
            self.non_preferred,
            self.partial_switches,
            self.off_site,
            self.excess_days,
        ]
    }
}

/// Summary of one metric over one priority group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub max: f64,
    /// Values left after dropping the top trim quantile.
    pub n_trimmed: usize,
    pub trimmed_mean: f64,
    pub trimmed_max: f64,
}

/// Number of largest values dropped at trim fraction `trim`.
pub fn trimmed_count(n: usize, trim: f64) -> usize {
    ((trim * n as f64) + 1e-9).floor() as usize
}

/// Mean and max, plain and with the `trimmed_count` largest values removed.
/// Values are sorted first, so the result does not depend on input order.
/// `None` for an empty input.
pub fn summarize(values: &[f64], trim: f64) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let keep = v.len() - trimmed_count(v.len(), trim).min(v.len() - 1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Some(Summary {
        n: v.len(),
        mean: mean(&v),
        max: v[v.len() - 1],
        n_trimmed: keep,
        trimmed_mean: mean(&v[..keep]),
        trimmed_max: v[keep - 1],
    })
}

/// Report scope: courses created in `[comparison_start, period_end]` are
/// aggregated and occupancy covers the same days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportScope {
    pub comparison_start: NaiveDate,
    pub period_end: NaiveDate,
    pub trim: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub scope: ReportScope,
    /// Per priority, per metric name. Empty groups are absent.
    pub per_priority: BTreeMap<Priority, BTreeMap<String, Summary>>,
    pub occupancy: BTreeMap<MachineId, f64>,
    /// Booked over available minutes across the whole park.
    pub mean_occupancy: Option<f64>,
    pub courses_included: usize,
    /// In scope but not fully scheduled.
    pub courses_unscheduled: Vec<CourseId>,
}

impl QualityReport {
    pub fn mean(&self, p: Priority, metric: &str) -> Option<f64> {
        self.per_priority.get(&p)?.get(metric).map(|s| s.mean)
    }

    /// Mean of `metric` over all courses regardless of priority.
    pub fn overall_mean(&self, metric: &str) -> Option<f64> {
        let (sum, n) = self
            .per_priority
            .values()
            .filter_map(|m| m.get(metric))
            .fold((0.0, 0), |(s, n), x| (s + x.mean * x.n as f64, n + x.n));
        (n > 0).then(|| sum / n as f64)
    }
}

/// Metrics of every in-scope course. Excluded courses and courses created
/// outside `[comparison_start, period_end]` are skipped; courses that are
/// not fully scheduled are returned separately.
pub fn course_metrics(
    courses: &[TreatmentCourse],
    protocols: &ProtocolTable,
    schedule: &Schedule,
    clinic: &Clinic,
    scope: &ReportScope,
) -> Result<(Vec<CourseMetrics>, Vec<CourseId>)> {
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for c in courses {
        if c.excluded || c.creation_date < scope.comparison_start || c.creation_date > scope.period_end {
            continue;
        }
        let p = protocols.get(&c.protocol_id)?;
        if schedule.course(&c.course_id).len() != c.n_fractions as usize {
            missing.push(c.course_id.clone());
            continue;
        }
        rows.push(CourseMetrics::compute(c, p, schedule, clinic)?);
    }
    missing.sort();
    Ok((rows, missing))
}

pub fn aggregate_report(
    courses: &[TreatmentCourse],
    protocols: &ProtocolTable,
    schedule: &Schedule,
    clinic: &Clinic,
    scope: ReportScope,
) -> Result<QualityReport> {
    if !(0.0..0.5).contains(&scope.trim) {
        return Err(Error::config(format!("trim {} is outside [0, 0.5)", scope.trim)));
    }
    let (rows, courses_unscheduled) =
        course_metrics(courses, protocols, schedule, clinic, &scope)?;
    let mut per_priority = BTreeMap::new();
    for p in Priority::ALL {
        let group: Vec<&CourseMetrics> = rows.iter().filter(|r| r.priority == p).collect();
        let mut stats = BTreeMap::new();
        for (k, name) in METRIC_NAMES.iter().enumerate() {
            let values: Vec<f64> = group.iter().map(|r| r.values()[k] as f64).collect();
            if let Some(s) = summarize(&values, scope.trim) {
                stats.insert(name.to_string(), s);
            }
        }
        if !stats.is_empty() {
            per_priority.insert(p, stats);
        }
    }
    let mut occupancy = BTreeMap::new();
    let (mut booked, mut available) = (0, 0);
    for m in clinic.park.machines() {
        let (b, a) = machine_minutes(&m.id, scope.comparison_start, scope.period_end, schedule, clinic);
        booked += b;
        available += a;
        if a > 0 {
            occupancy.insert(m.id.clone(), b as f64 / a as f64);
        }
    }
    Ok(QualityReport {
        scope,
        per_priority,
        occupancy,
        mean_occupancy: (available > 0).then(|| booked as f64 / available as f64),
        courses_included: rows.len(),
        courses_unscheduled,
    })
}

/// Per-course CSV of raw metric values.
pub fn write_course_metrics<W: std::io::Write>(
    mut w: W,
    rows: &[CourseMetrics],
    header: Option<&str>,
) -> Result<()> {
    crate::ingest::write_comment(&mut w, header)?;
    let mut wtr = csv::Writer::from_writer(w);
    let mut head = vec!["course", "priority"];
    head.extend(METRIC_NAMES);
    head.push("start_time_std");
    wtr.write_record(&head)?;
    for r in rows {
        let mut rec = vec![r.course_id.to_string(), r.priority.to_string()];
        rec.extend(r.values().iter().map(|v| v.to_string()));
        rec.push(format!("{:.3}", r.start_time_std));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Long-format CSV of the report: one row per (panel, group, statistic).
pub fn write_report_long<W: std::io::Write>(
    mut w: W,
    report: &QualityReport,
    label: &str,
    header: Option<&str>,
) -> Result<()> {
    crate::ingest::write_comment(&mut w, header)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["scheduler", "metric", "group", "statistic", "value"])?;
    for (p, stats) in &report.per_priority {
        for (name, s) in stats {
            for (stat, v) in [
                ("n", s.n as f64),
                ("mean", s.mean),
                ("max", s.max),
                ("trimmed_mean", s.trimmed_mean),
                ("trimmed_max", s.trimmed_max),
            ] {
                wtr.write_record([label, name, &p.to_string(), stat, &format!("{v:.6}")])?;
            }
        }
    }
    for (m, v) in &report.occupancy {
        wtr.write_record([label, "occupancy", m.as_str(), "fraction", &format!("{v:.6}")])?;
    }
    if let Some(v) = report.mean_occupancy {
        wtr.write_record([label, "occupancy", "all", "fraction", &format!("{v:.6}")])?;
    }
    wtr.flush()?;
    Ok(())
}
