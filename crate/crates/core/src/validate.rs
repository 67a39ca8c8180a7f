//! Schedule audit: every patient and machine constraint, checked
//! independently of how the schedule was produced.
//!
//! Patient checks report at most one violation per check and course.
//! Three checks look at the first fraction and are attributed in order, so
//! that one defect yields one finding: a secondary course starting before
//! its primary ends is `consecutive_treatment`; otherwise a start inside the
//! pre-treatment period is `pre_treatment`; otherwise a start on a
//! non-working day is `allowed_start_day`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{Days, NaiveDate};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{
    earliest_start, weekly_shortfall, Appointment, BeamMatch, Clinic, CourseId, MachineId,
    ProtocolTable, Schedule, TreatmentCourse, TreatmentProtocol,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    FractionCount,
    AllowedStartDay,
    PreTreatment,
    MaxFractionsPerDay,
    MinFractionsPerWeek,
    MaxInterval,
    BeamMatch,
    AllowedMachine,
    FractionationScheme,
    FractionDuration,
    DoubledDayGap,
    TreatmentDay,
    ConsecutiveTreatment,
    DoubleBooking,
    MachineUnavailable,
    WindowCapacity,
    WindowAssignment,
    UnknownCourse,
}

impl CheckId {
    pub const ALL: [CheckId; 18] = [
        CheckId::FractionCount,
        CheckId::AllowedStartDay,
        CheckId::PreTreatment,
        CheckId::MaxFractionsPerDay,
        CheckId::MinFractionsPerWeek,
        CheckId::MaxInterval,
        CheckId::BeamMatch,
        CheckId::AllowedMachine,
        CheckId::FractionationScheme,
        CheckId::FractionDuration,
        CheckId::DoubledDayGap,
        CheckId::TreatmentDay,
        CheckId::ConsecutiveTreatment,
        CheckId::DoubleBooking,
        CheckId::MachineUnavailable,
        CheckId::WindowCapacity,
        CheckId::WindowAssignment,
        CheckId::UnknownCourse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckId::FractionCount => "fraction_count",
            CheckId::AllowedStartDay => "allowed_start_day",
            CheckId::PreTreatment => "pre_treatment",
            CheckId::MaxFractionsPerDay => "max_fractions_per_day",
            CheckId::MinFractionsPerWeek => "min_fractions_per_week",
            CheckId::MaxInterval => "max_interval",
            CheckId::BeamMatch => "beam_match",
            CheckId::AllowedMachine => "allowed_machine",
            CheckId::FractionationScheme => "fractionation_scheme",
            CheckId::FractionDuration => "fraction_duration",
            CheckId::DoubledDayGap => "doubled_day_gap",
            CheckId::TreatmentDay => "treatment_day",
            CheckId::ConsecutiveTreatment => "consecutive_treatment",
            CheckId::DoubleBooking => "double_booking",
            CheckId::MachineUnavailable => "machine_unavailable",
            CheckId::WindowCapacity => "window_capacity",
            CheckId::WindowAssignment => "window_assignment",
            CheckId::UnknownCourse => "unknown_course",
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub check: CheckId,
    pub severity: Severity,
    pub course: Option<CourseId>,
    pub machine: Option<MachineId>,
    pub date: Option<NaiveDate>,
    pub detail: String,
}

impl Violation {
    fn course(check: CheckId, course: &CourseId, date: Option<NaiveDate>, detail: String) -> Self {
        Self {
            check,
            severity: Severity::Error,
            course: Some(course.clone()),
            machine: None,
            date,
            detail,
        }
    }

    fn machine(check: CheckId, a: &Appointment, detail: String) -> Self {
        Self {
            check,
            severity: Severity::Error,
            course: Some(a.course_id.clone()),
            machine: Some(a.machine.clone()),
            date: Some(a.date),
            detail,
        }
    }
}

/// Minimum start-time distance between two fractions of one course on the
/// same day.
pub const DOUBLED_DAY_GAP_MINUTES: u16 = 360;

/// Audits one course. `schedule` supplies the course's appointments and,
/// for a secondary course, the predecessor's last fraction.
pub fn validate_patient(
    course: &TreatmentCourse,
    protocol: &TreatmentProtocol,
    schedule: &Schedule,
    clinic: &Clinic,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let id = &course.course_id;
    let mut appts: Vec<&Appointment> = schedule.course(id);
    if appts.is_empty() {
        return out;
    }
    appts.sort_by_key(|a| (a.date, a.start, a.fraction_index));
    let cal = &clinic.calendar;
    let park = &clinic.park;
    let mut push = |check, date, detail: String| {
        if !out.iter().any(|v: &Violation| v.check == check) {
            out.push(Violation::course(check, id, date, detail));
        }
    };

    let indices: BTreeSet<u32> = appts.iter().map(|a| a.fraction_index).collect();
    let expected: BTreeSet<u32> = (1..=course.n_fractions).collect();
    if indices != expected || appts.len() != course.n_fractions as usize {
        push(
            CheckId::FractionCount,
            None,
            format!("{} fractions scheduled, {} required", appts.len(), course.n_fractions),
        );
    }

    let first = appts[0].date;
    let pred_last = course.follows_course.as_ref().and_then(|f| schedule.last_date(f));
    let pre_end = course.creation_date + Days::new(protocol.pre_treatment_days as u64);
    if let Some(last) = pred_last.filter(|l| first <= *l) {
        push(
            CheckId::ConsecutiveTreatment,
            Some(first),
            format!("starts {first}, predecessor ends {last}"),
        );
    } else if first < pre_end {
        push(
            CheckId::PreTreatment,
            Some(first),
            format!("starts {first}, pre-treatment lasts until {pre_end}"),
        );
    } else {
        let e = earliest_start(course, protocol, cal, pred_last).ok();
        if !cal.is_working(first) || e.is_some_and(|e| first < e) {
            push(
                CheckId::AllowedStartDay,
                Some(first),
                format!("{first} is not an allowed start day"),
            );
        }
    }

    for a in &appts[1..] {
        if !cal.is_working(a.date) {
            push(
                CheckId::TreatmentDay,
                Some(a.date),
                format!("fraction {} on non-working day {}", a.fraction_index, a.date),
            );
        }
    }

    let mut per_day: BTreeMap<NaiveDate, Vec<&Appointment>> = BTreeMap::new();
    for a in &appts {
        per_day.entry(a.date).or_default().push(a);
    }
    let max_per_day = protocol.max_fractions_per_day as usize + usize::from(protocol.allow_repair_doubling);
    for (d, list) in &per_day {
        if list.len() > max_per_day {
            push(
                CheckId::MaxFractionsPerDay,
                Some(*d),
                format!("{} fractions on {d}", list.len()),
            );
        }
        for pair in list.windows(2) {
            let gap = pair[1].start.minutes() - pair[0].start.minutes();
            if gap < DOUBLED_DAY_GAP_MINUTES {
                push(
                    CheckId::DoubledDayGap,
                    Some(*d),
                    format!("fractions {} and {} only {gap} min apart", pair[0].fraction_index, pair[1].fraction_index),
                );
            }
        }
    }

    let dates: Vec<NaiveDate> = appts.iter().map(|a| a.date).collect();
    if let Some(monday) = weekly_shortfall(&dates, protocol.min_fractions_per_week, cal) {
        push(
            CheckId::MinFractionsPerWeek,
            Some(monday),
            format!("fewer than {} fractions in week of {monday}", protocol.min_fractions_per_week),
        );
    }

    // Non-working days are reported above; spacing is judged on the rest.
    let days: Vec<NaiveDate> = per_day.keys().copied().filter(|d| cal.is_working(*d)).collect();
    let dist = |a: NaiveDate, b: NaiveDate| cal.working_days_between(a, b).unwrap_or(i64::MAX);
    if let Some(max_gap) = protocol.max_gap_between_fractions {
        if let Some(w) = days.windows(2).find(|w| dist(w[0], w[1]) > max_gap as i64) {
            push(
                CheckId::MaxInterval,
                Some(w[1]),
                format!("{} working days between {} and {}", dist(w[0], w[1]), w[0], w[1]),
            );
        }
    }
    let fits_pattern = protocol
        .patterns
        .iter()
        .any(|p| days.windows(2).all(|w| dist(w[0], w[1]) >= p.step() as i64));
    if !fits_pattern {
        push(
            CheckId::FractionationScheme,
            Some(first),
            "day pattern matches no allowed fractionation scheme".into(),
        );
    }

    for a in &appts {
        if protocol.machine_tier(&a.machine).is_none() {
            push(
                CheckId::AllowedMachine,
                Some(a.date),
                format!("fraction {} on {} outside the protocol's machines", a.fraction_index, a.machine),
            );
        }
        if a.duration != course.duration_of(a.fraction_index) {
            push(
                CheckId::FractionDuration,
                Some(a.date),
                format!(
                    "fraction {} lasts {} min, expected {}",
                    a.fraction_index,
                    a.duration,
                    course.duration_of(a.fraction_index)
                ),
            );
        }
    }
    for pair in appts.windows(2) {
        let bm = park.beam_match(&pair[0].machine, &pair[1].machine);
        let bad = match bm {
            Ok(BeamMatch::Complete) => false,
            Ok(BeamMatch::Partial) => !protocol.allow_partial_switch,
            Ok(BeamMatch::None) | Err(_) => true,
        };
        if bad {
            push(
                CheckId::BeamMatch,
                Some(pair[1].date),
                format!("{} to {} is not an allowed switch", pair[0].machine, pair[1].machine),
            );
        }
    }
    out
}

/// Audits one machine over `[from, to]`. With `protocols` and `courses`,
/// bookings of courses whose protocol excludes the machine are reported.
pub fn validate_machine(
    machine: &MachineId,
    from: NaiveDate,
    to: NaiveDate,
    schedule: &Schedule,
    clinic: &Clinic,
    lookup: Option<(&ProtocolTable, &BTreeMap<CourseId, &TreatmentCourse>)>,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let op = clinic.park.operating_window();
    for ((m, d), appts) in schedule.by_machine_day() {
        if &m != machine || d < from || d > to {
            continue;
        }
        let blocked = clinic.park.blocked_intervals(&m, d);
        for (i, a) in appts.iter().enumerate() {
            let iv = a.interval();
            if let Some(b) = appts[i + 1..].iter().find(|b| b.interval().overlaps(&iv)) {
                out.push(Violation::machine(
                    CheckId::DoubleBooking,
                    a,
                    format!("{} overlaps course `{}` at {}", iv, b.course_id, b.start),
                ));
            }
            if !op.covers(&iv) || blocked.iter().any(|b| b.overlaps(&iv)) {
                out.push(Violation::machine(
                    CheckId::MachineUnavailable,
                    a,
                    format!("{iv} falls in unavailable time"),
                ));
            }
            let w = a.window_index as usize;
            if w >= clinic.layout.len() || !clinic.layout.window(w).contains(a.start) {
                out.push(Violation::machine(
                    CheckId::WindowAssignment,
                    a,
                    format!("start {} is outside window {w}", a.start),
                ));
            }
            if let Some((protocols, courses)) = lookup {
                if let Some(p) = courses.get(&a.course_id).and_then(|c| protocols.get(&c.protocol_id).ok()) {
                    if p.machine_tier(&m).is_none() {
                        out.push(Violation::machine(
                            CheckId::AllowedMachine,
                            a,
                            format!("protocol `{}` does not allow {m}", p.id),
                        ));
                    }
                }
            }
        }
        // Per window: booked minutes and the first booking running past its end.
        let mut load: BTreeMap<u8, (u32, Option<&Appointment>)> = BTreeMap::new();
        for a in &appts {
            let e = load.entry(a.window_index).or_default();
            e.0 += a.duration as u32;
            let w = a.window_index as usize;
            if e.1.is_none() && w < clinic.layout.len() && a.end() > clinic.layout.window(w).end {
                e.1 = Some(a);
            }
        }
        for (w, (minutes, overrun)) in load {
            if w as usize >= clinic.layout.len() {
                continue;
            }
            if minutes > clinic.layout.window(w as usize).len() as u32 {
                let a = appts.iter().find(|a| a.window_index == w).expect("window has bookings");
                out.push(Violation::machine(
                    CheckId::WindowCapacity,
                    a,
                    format!("{minutes} min booked in window {w} of {m}"),
                ));
            } else if let Some(a) = overrun {
                out.push(Violation::machine(
                    CheckId::WindowCapacity,
                    a,
                    format!("booking ends {} after window {w} of {m}", a.end()),
                ));
            }
        }
    }
    out
}

/// Violations plus counts per check.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub counts: BTreeMap<CheckId, usize>,
    pub errors: usize,
    pub warnings: usize,
}

impl ValidationReport {
    fn from_violations(mut violations: Vec<Violation>) -> Self {
        violations.sort();
        violations.dedup();
        let mut counts = BTreeMap::new();
        for v in &violations {
            *counts.entry(v.check).or_insert(0) += 1;
        }
        let errors = violations.iter().filter(|v| v.severity == Severity::Error).count();
        Self {
            warnings: violations.len() - errors,
            violations,
            counts,
            errors,
        }
    }

    pub fn is_clean(&self) -> bool {
        self.errors == 0
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W, header: Option<&str>) -> crate::Result<()> {
        crate::ingest::write_comment(&mut w, header)?;
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["check", "severity", "course", "machine", "date", "detail"])?;
        for v in &self.violations {
            wtr.write_record([
                v.check.name(),
                if v.severity == Severity::Error { "error" } else { "warning" },
                v.course.as_ref().map_or("", |c| c.as_str()),
                v.machine.as_ref().map_or("", |m| m.as_str()),
                &v.date.map_or(String::new(), |d| d.to_string()),
                &v.detail,
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Runs every patient and machine check. Appointments of courses missing
/// from `courses` produce one warning per course. A protocol-machine
/// mismatch found by both audits is reported once.
pub fn validate_all(
    schedule: &Schedule,
    clinic: &Clinic,
    protocols: &ProtocolTable,
    courses: &[TreatmentCourse],
) -> ValidationReport {
    let by_id: BTreeMap<CourseId, &TreatmentCourse> =
        courses.iter().map(|c| (c.course_id.clone(), c)).collect();
    let mut out = Vec::new();
    for id in schedule.course_ids() {
        match by_id.get(id) {
            Some(c) => match protocols.get(&c.protocol_id) {
                Ok(p) => out.extend(validate_patient(c, p, schedule, clinic)),
                Err(e) => out.push(Violation {
                    check: CheckId::AllowedMachine,
                    severity: Severity::Error,
                    course: Some(id.clone()),
                    machine: None,
                    date: None,
                    detail: e.to_string(),
                }),
            },
            None => out.push(Violation {
                check: CheckId::UnknownCourse,
                severity: Severity::Warning,
                course: Some(id.clone()),
                machine: None,
                date: None,
                detail: "appointments of a course not in the inputs".into(),
            }),
        }
    }
    let patient_mismatch: BTreeSet<CourseId> = out
        .iter()
        .filter(|v| v.check == CheckId::AllowedMachine)
        .filter_map(|v| v.course.clone())
        .collect();
    let (Some(from), Some(to)) = (
        schedule.iter().map(|a| a.date).min(),
        schedule.iter().map(|a| a.date).max(),
    ) else {
        return ValidationReport::from_violations(out);
    };
    for m in clinic.park.machines() {
        for v in validate_machine(&m.id, from, to, schedule, clinic, Some((protocols, &by_id))) {
            if v.check == CheckId::AllowedMachine && v.course.as_ref().is_some_and(|c| patient_mismatch.contains(c)) {
                continue;
            }
            out.push(v);
        }
    }
    ValidationReport::from_violations(out)
}

/// Spot check: `n` random courses plus one machine over a fortnight, the
/// shape of a manual audit.
pub fn validate_sample(
    schedule: &Schedule,
    clinic: &Clinic,
    protocols: &ProtocolTable,
    courses: &[TreatmentCourse],
    n: usize,
    seed: u64,
) -> ValidationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scheduled: Vec<&TreatmentCourse> = courses
        .iter()
        .filter(|c| schedule.contains_course(&c.course_id))
        .collect();
    let mut out = Vec::new();
    for c in scheduled.choose_multiple(&mut rng, n) {
        if let Ok(p) = protocols.get(&c.protocol_id) {
            out.extend(validate_patient(c, p, schedule, clinic));
        }
    }
    let dates: Vec<NaiveDate> = schedule.iter().map(|a| a.date).collect::<BTreeSet<_>>().into_iter().collect();
    if let (Some(m), Some(&start)) = (clinic.park.machines().choose(&mut rng), dates.choose(&mut rng)) {
        let by_id: BTreeMap<CourseId, &TreatmentCourse> =
            courses.iter().map(|c| (c.course_id.clone(), c)).collect();
        out.extend(validate_machine(
            &m.id,
            start,
            start + Days::new(13),
            schedule,
            clinic,
            Some((protocols, &by_id)),
        ));
    }
    ValidationReport::from_violations(out)
}
