//! Machine failures: block the failed time and repair the appointments it
//! hits.
//!
//! Affected appointments are handled in the order (priority, original
//! start, course id). Each goes to the first rule that finds a place:
//!
//! 1. the same day on a machine completely beam-matched to the failed one;
//! 2. the same day on a partially matched machine, if the protocol allows
//!    partial switches;
//! 3. a later day, either appended after the course's last fraction or as
//!    a second fraction on a day the course already uses (start times at
//!    least six hours apart). The option adding fewer excess days wins, with
//!    ties going to the append.
//!
//! Same-day repairs never start before the failure does. A candidate is
//! kept only if the course passes every patient check it passed before the
//! failure. A fraction keeps its index wherever it is moved.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::{
    free_segments, grid_align, Appointment, BeamMatch, Clinic, ClockTime, CourseId, Interval,
    MachineId, Priority, ProtocolTable, Schedule, TreatmentCourse, TreatmentProtocol,
    UnavailabilityKind,
};
use crate::validate::{validate_patient, CheckId, Severity, DOUBLED_DAY_GAP_MINUTES};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FailureEvent {
    pub machine: MachineId,
    pub date: NaiveDate,
    pub interval: Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairRule {
    SameDayComplete,
    SameDayPartial,
    Append,
    Double,
    Unrepaired,
}

impl fmt::Display for RepairRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepairRule::SameDayComplete => "same_day_complete",
            RepairRule::SameDayPartial => "same_day_partial",
            RepairRule::Append => "append",
            RepairRule::Double => "double",
            RepairRule::Unrepaired => "unrepaired",
        })
    }
}

/// Where a fraction was booked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Booking {
    pub machine: MachineId,
    pub date: NaiveDate,
    pub start: ClockTime,
}

impl Booking {
    fn of(a: &Appointment) -> Self {
        Self {
            machine: a.machine.clone(),
            date: a.date,
            start: a.start,
        }
    }
}

impl fmt::Display for Booking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.machine, self.date, self.start)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Displacement {
    pub course_id: CourseId,
    pub fraction_index: u32,
    pub from: Booking,
    pub to: Option<Booking>,
    pub rule: RepairRule,
}

pub fn write_displacements<W: std::io::Write>(
    mut w: W,
    log: &[Displacement],
    header: Option<&str>,
) -> Result<()> {
    crate::ingest::write_comment(&mut w, header)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["course", "fraction", "from", "to", "rule"])?;
    for d in log {
        wtr.write_record([
            d.course_id.as_str(),
            &d.fraction_index.to_string(),
            &d.from.to_string(),
            &d.to.as_ref().map_or("-".to_string(), Booking::to_string),
            &d.rule.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Courses and protocols needed to judge a repair, plus the last day a
/// postponed fraction may use.
pub struct RepairContext<'a> {
    pub protocols: &'a ProtocolTable,
    pub courses: &'a BTreeMap<CourseId, TreatmentCourse>,
    pub horizon_end: NaiveDate,
}

/// Earliest grid-aligned start on `(machine, date)` with `start` in
/// `[not_before, not_after]` and the rounded duration inside one window,
/// clear of blocks and other appointments. Windows are tried in the order
/// given by `prefer` first, then by time.
#[allow(clippy::too_many_arguments)]
fn free_slot(
    clinic: &Clinic,
    schedule: &Schedule,
    machine: &MachineId,
    date: NaiveDate,
    duration: u16,
    not_before: ClockTime,
    not_after: ClockTime,
    prefer: Option<u8>,
) -> Option<(ClockTime, u8)> {
    let mut taken = clinic.park.blocked_intervals(machine, date);
    taken.extend(
        schedule
            .iter()
            .filter(|a| &a.machine == machine && a.date == date)
            .map(Appointment::interval),
    );
    let need = clinic.layout.rounded(duration);
    let grid = clinic.layout.grid();
    let mut order: Vec<usize> = (0..clinic.layout.len()).collect();
    if let Some(p) = prefer.map(usize::from).filter(|p| *p < order.len()) {
        order.retain(|w| *w != p);
        order.insert(0, p);
    }
    for w in order {
        for g in free_segments(clinic.layout.window(w), &taken) {
            let Some(g) = grid_align(g, grid) else { continue };
            let s = g.start.minutes().max(not_before.minutes().div_ceil(grid) * grid);
            if s + need <= g.end.minutes() && s <= not_after.minutes() {
                return Some((ClockTime::from_minutes(s), w as u8));
            }
        }
    }
    None
}

fn error_checks(
    course: &TreatmentCourse,
    protocol: &TreatmentProtocol,
    schedule: &Schedule,
    clinic: &Clinic,
) -> BTreeSet<CheckId> {
    validate_patient(course, protocol, schedule, clinic)
        .into_iter()
        .filter(|v| v.severity == Severity::Error)
        .map(|v| v.check)
        .collect()
}

fn span(schedule: &Schedule, course: &CourseId, clinic: &Clinic) -> i64 {
    match (schedule.first_date(course), schedule.last_date(course)) {
        (Some(f), Some(l)) => clinic.calendar.working_days_between(f, l).unwrap_or(0) + 1,
        _ => 0,
    }
}

/// Checks failed by a course and the courses that follow it.
fn family_checks(
    family: &[(&TreatmentCourse, &TreatmentProtocol)],
    schedule: &Schedule,
    clinic: &Clinic,
) -> BTreeSet<CheckId> {
    family
        .iter()
        .flat_map(|(c, p)| error_checks(c, p, schedule, clinic))
        .collect()
}

struct Repairer<'a, 'c> {
    clinic: &'a Clinic,
    protocol: &'c TreatmentProtocol,
    /// The course first, then the courses that follow it.
    family: Vec<(&'c TreatmentCourse, &'c TreatmentProtocol)>,
    /// Checks failed before the failure; a repair may not add any.
    tolerated: BTreeSet<CheckId>,
}

impl Repairer<'_, '_> {
    /// Inserts `a` if the course and its successors stay within their
    /// tolerated checks.
    fn try_place(&self, schedule: &mut Schedule, a: Appointment) -> bool {
        schedule.insert(a.clone());
        let ok = family_checks(&self.family, schedule, self.clinic).is_subset(&self.tolerated);
        if !ok {
            schedule.remove(&a.course_id, a.fraction_index);
        }
        ok
    }

    fn machines(&self, failed: &MachineId, rel: &[BeamMatch]) -> Vec<MachineId> {
        let park = &self.clinic.park;
        let mut out: Vec<MachineId> = Vec::new();
        for want in rel {
            let mut ms: Vec<&MachineId> = park
                .machines()
                .iter()
                .map(|m| &m.id)
                .filter(|m| self.protocol.machine_tier(m).is_some())
                .filter(|m| park.beam_match(failed, m).ok() == Some(*want))
                .collect();
            ms.sort_by_key(|m| (*m != failed, park.index_of(m)));
            out.extend(ms.into_iter().cloned());
        }
        out
    }

    /// Earliest same-day slot starting no earlier than `not_before`.
    fn same_day(
        &self,
        schedule: &mut Schedule,
        orig: &Appointment,
        machines: &[MachineId],
        not_before: ClockTime,
    ) -> Option<Appointment> {
        let close = self.clinic.park.operating_window().end;
        let mut options: Vec<(ClockTime, usize, u8)> = machines
            .iter()
            .enumerate()
            .filter_map(|(i, m)| {
                free_slot(self.clinic, schedule, m, orig.date, orig.duration, not_before, close, None)
                    .map(|(s, w)| (s, i, w))
            })
            .collect();
        options.sort();
        for (start, i, w) in options {
            let a = Appointment {
                machine: machines[i].clone(),
                start,
                window_index: w,
                ..orig.clone()
            };
            if self.try_place(schedule, a.clone()) {
                return Some(a);
            }
        }
        None
    }

    fn append(
        &self,
        schedule: &mut Schedule,
        orig: &Appointment,
        machines: &[MachineId],
        horizon_end: NaiveDate,
    ) -> Option<Appointment> {
        let cal = &self.clinic.calendar;
        let last = schedule.last_date(&orig.course_id).unwrap_or(orig.date).max(orig.date);
        let step = self.protocol.densest_pattern().step() as usize;
        let start_idx = cal.working_index(last).map_or_else(|| cal.index_on_or_after(last).ok(), |i| Some(i + step))?;
        let (open, close) = {
            let op = self.clinic.park.operating_window();
            (op.start, op.end)
        };
        let mut idx = start_idx;
        while let Some(d) = cal.try_date(idx).filter(|d| *d <= horizon_end) {
            for m in machines {
                if let Some((start, w)) =
                    free_slot(self.clinic, schedule, m, d, orig.duration, open, close, Some(orig.window_index))
                {
                    let a = Appointment {
                        machine: m.clone(),
                        date: d,
                        start,
                        window_index: w,
                        ..orig.clone()
                    };
                    if self.try_place(schedule, a.clone()) {
                        return Some(a);
                    }
                }
            }
            idx += 1;
        }
        None
    }

    fn double(&self, schedule: &mut Schedule, orig: &Appointment, machines: &[MachineId]) -> Option<Appointment> {
        if !self.protocol.allow_repair_doubling {
            return None;
        }
        let op = self.clinic.park.operating_window();
        let days: Vec<(NaiveDate, ClockTime)> = schedule
            .course(&orig.course_id)
            .iter()
            .filter(|a| a.date > orig.date)
            .map(|a| (a.date, a.start))
            .collect();
        for (d, existing) in days {
            let gap = DOUBLED_DAY_GAP_MINUTES;
            let ranges = [
                (ClockTime::from_minutes(existing.minutes() + gap), op.end),
                (op.start, ClockTime::from_minutes(existing.minutes().saturating_sub(gap))),
            ];
            for m in machines {
                for (lo, hi) in ranges {
                    if lo > hi || hi < op.start {
                        continue;
                    }
                    if let Some((start, w)) = free_slot(self.clinic, schedule, m, d, orig.duration, lo, hi, None) {
                        let a = Appointment {
                            machine: m.clone(),
                            date: d,
                            start,
                            window_index: w,
                            ..orig.clone()
                        };
                        if self.try_place(schedule, a.clone()) {
                            return Some(a);
                        }
                    }
                }
            }
        }
        None
    }
}

/// Blocks the failed interval in `clinic` and repairs every appointment it
/// overlaps. Appointments the failure does not touch are left as they are.
pub fn apply_failure(
    schedule: &mut Schedule,
    event: &FailureEvent,
    clinic: &mut Clinic,
    ctx: &RepairContext<'_>,
) -> Result<Vec<Displacement>> {
    if !clinic.calendar.is_working(event.date) {
        return Err(Error::InputIntegrity(format!(
            "failure of {} on non-working day {}",
            event.machine, event.date
        )));
    }
    clinic
        .park
        .add_block(UnavailabilityKind::Failure, &event.machine, event.date, event.interval)?;
    let Some(interval) = event.interval.intersect(&clinic.park.operating_window()) else {
        return Ok(Vec::new());
    };
    let clinic: &Clinic = clinic;

    let mut hit: Vec<(Priority, Appointment)> = schedule
        .iter()
        .filter(|a| a.machine == event.machine && a.date == event.date && a.interval().overlaps(&interval))
        .map(|a| {
            let p = ctx
                .courses
                .get(&a.course_id)
                .and_then(|c| ctx.protocols.get(&c.protocol_id).ok())
                .map_or(Priority::C, |p| p.priority);
            (p, a.clone())
        })
        .collect();
    hit.sort_by(|(pa, a), (pb, b)| (pa, a.start, &a.course_id).cmp(&(pb, b.start, &b.course_id)));

    let mut families: BTreeMap<CourseId, Vec<(&TreatmentCourse, &TreatmentProtocol)>> = BTreeMap::new();
    for (_, a) in &hit {
        if families.contains_key(&a.course_id) {
            continue;
        }
        if let Some(c) = ctx.courses.get(&a.course_id) {
            let mut family = vec![(c, ctx.protocols.get(&c.protocol_id)?)];
            for s in ctx.courses.values().filter(|s| s.follows_course.as_ref() == Some(&c.course_id)) {
                family.push((s, ctx.protocols.get(&s.protocol_id)?));
            }
            families.insert(a.course_id.clone(), family);
        }
    }
    // Patient checks already failing before the failure stay tolerated.
    let tolerated: BTreeMap<CourseId, BTreeSet<CheckId>> = families
        .iter()
        .map(|(id, f)| (id.clone(), family_checks(f, schedule, clinic)))
        .collect();
    let spans: BTreeMap<CourseId, i64> = tolerated
        .keys()
        .map(|c| (c.clone(), span(schedule, c, clinic)))
        .collect();
    for (_, a) in &hit {
        schedule.remove(&a.course_id, a.fraction_index);
    }

    let mut log = Vec::with_capacity(hit.len());
    for (_, orig) in hit {
        let entry = |to: Option<&Appointment>, rule| Displacement {
            course_id: orig.course_id.clone(),
            fraction_index: orig.fraction_index,
            from: Booking::of(&orig),
            to: to.map(Booking::of),
            rule,
        };
        let Some(course) = ctx.courses.get(&orig.course_id) else {
            log.push(entry(None, RepairRule::Unrepaired));
            continue;
        };
        let protocol = ctx.protocols.get(&course.protocol_id)?;
        let r = Repairer {
            clinic,
            protocol,
            family: families[&orig.course_id].clone(),
            tolerated: tolerated[&orig.course_id].clone(),
        };
        let complete = r.machines(&event.machine, &[BeamMatch::Complete]);
        if let Some(a) = r.same_day(schedule, &orig, &complete, interval.start) {
            log.push(entry(Some(&a), RepairRule::SameDayComplete));
            continue;
        }
        if protocol.allow_partial_switch {
            let partial = r.machines(&event.machine, &[BeamMatch::Partial]);
            if let Some(a) = r.same_day(schedule, &orig, &partial, interval.start) {
                log.push(entry(Some(&a), RepairRule::SameDayPartial));
                continue;
            }
        }
        let rel: &[BeamMatch] = if protocol.allow_partial_switch {
            &[BeamMatch::Complete, BeamMatch::Partial]
        } else {
            &[BeamMatch::Complete]
        };
        let machines = r.machines(&event.machine, rel);
        let base = spans[&orig.course_id];
        let appended = r.append(schedule, &orig, &machines, ctx.horizon_end);
        let append_cost = appended.as_ref().map(|_| span(schedule, &orig.course_id, clinic) - base);
        if let Some(a) = &appended {
            schedule.remove(&a.course_id, a.fraction_index);
        }
        let doubled = r.double(schedule, &orig, &machines);
        let double_cost = doubled.as_ref().map(|_| span(schedule, &orig.course_id, clinic) - base);
        let use_double = match (append_cost, double_cost) {
            (Some(ac), Some(dc)) => dc < ac,
            (None, Some(_)) => true,
            _ => false,
        };
        if use_double {
            log.push(entry(doubled.as_ref(), RepairRule::Double));
            continue;
        }
        if let Some(d) = &doubled {
            schedule.remove(&d.course_id, d.fraction_index);
        }
        match appended {
            Some(a) => {
                schedule.insert(a.clone());
                log.push(entry(Some(&a), RepairRule::Append));
            }
            None => {
                log::warn!(
                    "fraction {} of `{}` displaced by the failure of {} on {} could not be repaired",
                    orig.fraction_index,
                    orig.course_id,
                    event.machine,
                    event.date
                );
                log.push(entry(None, RepairRule::Unrepaired));
            }
        }
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{self, appointments, course, working_days};
    use crate::metrics::excess_days;
    use crate::validate::validate_all;

    fn d(m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, m, day).unwrap()
    }

    struct Case {
        clinic: Clinic,
        protocols: ProtocolTable,
        courses: BTreeMap<CourseId, TreatmentCourse>,
        schedule: Schedule,
    }

    fn case(protocol: &str, n: u32, machine: &str, start: ClockTime) -> Case {
        let clinic = fixture::clinic();
        let c = course("C1", protocol, d(1, 2), n);
        let days = working_days(&clinic, d(1, 20), n as usize);
        let schedule = Schedule::from_appointments(appointments(&clinic, &c, machine, start, &days));
        Case {
            clinic,
            protocols: fixture::protocols(),
            courses: BTreeMap::from([(c.course_id.clone(), c)]),
            schedule,
        }
    }

    fn block(c: &mut Case, machines: &[&str], date: NaiveDate) {
        for m in machines {
            c.clinic
                .park
                .block_full_day(UnavailabilityKind::Planned, &(*m).into(), date)
                .unwrap();
        }
    }

    fn fail(c: &mut Case, machine: &str, date: NaiveDate, iv: &str, horizon_end: NaiveDate) -> Vec<Displacement> {
        let ctx = RepairContext {
            protocols: &c.protocols,
            courses: &c.courses,
            horizon_end,
        };
        let ev = FailureEvent {
            machine: machine.into(),
            date,
            interval: iv.parse().unwrap(),
        };
        apply_failure(&mut c.schedule, &ev, &mut c.clinic, &ctx).unwrap()
    }

    fn clean(c: &Case) -> bool {
        let courses: Vec<TreatmentCourse> = c.courses.values().cloned().collect();
        validate_all(&c.schedule, &c.clinic, &c.protocols, &courses).is_clean()
    }

    #[test]
    fn afternoon_failure_moves_to_matched_machine() {
        let mut c = case("Lung", 5, "M5", ClockTime::hm(14, 0));
        let log = fail(&mut c, "M5", d(1, 21), "13:00-17:30", d(4, 30));
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].rule, RepairRule::SameDayComplete);
        let to = log[0].to.as_ref().unwrap();
        assert_eq!((to.machine.as_str(), to.date), ("M7", d(1, 21)));
        assert!(to.start >= ClockTime::hm(13, 0));
        assert!(clean(&c));
    }

    #[test]
    fn lost_day_is_appended() {
        // Noon bookings cannot be doubled: six hours either side leaves the day.
        let mut c = case("Prostate", 10, "M1", ClockTime::hm(12, 0));
        let day4 = d(1, 23);
        block(&mut c, &["M2", "M5", "M7"], day4);
        let id: CourseId = "C1".into();
        let before = excess_days(&c.courses[&id], c.protocols.by_name("Prostate").unwrap(), &c.schedule, &c.clinic).unwrap();
        let log = fail(&mut c, "M1", day4, "08:00-17:30", d(4, 30));
        assert_eq!(log[0].rule, RepairRule::Append);
        let to = log[0].to.as_ref().unwrap();
        assert_eq!(to.date, d(2, 3));
        assert_eq!(to.start, ClockTime::hm(12, 0));
        let after = excess_days(&c.courses[&id], c.protocols.by_name("Prostate").unwrap(), &c.schedule, &c.clinic).unwrap();
        assert_eq!(after, before + 1);
        assert!(clean(&c));
    }

    #[test]
    fn doubling_beats_append_when_it_adds_no_excess() {
        let mut c = case("Breast", 5, "M1", ClockTime::hm(8, 0));
        block(&mut c, &["M2", "M5", "M7"], d(1, 21));
        let log = fail(&mut c, "M1", d(1, 21), "08:00-17:30", d(4, 30));
        assert_eq!(log[0].rule, RepairRule::Double);
        let to = log[0].to.as_ref().unwrap();
        assert_eq!(to.date, d(1, 22));
        assert!(to.start.minutes() >= 8 * 60 + DOUBLED_DAY_GAP_MINUTES);
        assert!(clean(&c));
    }

    #[test]
    fn failure_outside_bookings_changes_nothing() {
        let mut c = case("Lung", 5, "M5", ClockTime::hm(9, 0));
        let before = c.schedule.clone();
        let log = fail(&mut c, "M5", d(1, 21), "13:00-15:00", d(4, 30));
        assert!(log.is_empty());
        assert_eq!(c.schedule, before);
        assert_eq!(c.clinic.park.blocked_intervals(&"M5".into(), d(1, 21)).len(), 1);
    }

    #[test]
    fn unrepairable_fraction_is_logged_and_removed() {
        let mut c = case("Liver SBRT", 1, "M3", ClockTime::hm(9, 0));
        block(&mut c, &["M9"], d(1, 20));
        let log = fail(&mut c, "M3", d(1, 20), "08:00-17:30", d(1, 20));
        assert_eq!(log[0].rule, RepairRule::Unrepaired);
        assert!(log[0].to.is_none());
        assert!(c.schedule.is_empty());
    }

    #[test]
    fn unaffected_appointments_are_untouched() {
        let mut c = case("Lung", 5, "M5", ClockTime::hm(14, 0));
        let other = course("C2", "Lung", d(1, 2), 5);
        let days = working_days(&c.clinic, d(1, 20), 5);
        for a in appointments(&c.clinic, &other, "M7", ClockTime::hm(9, 0), &days) {
            c.schedule.insert(a);
        }
        c.courses.insert(other.course_id.clone(), other);
        let keep: Vec<Appointment> = c.schedule.iter().filter(|a| a.date != d(1, 21) || a.machine.as_str() != "M5").cloned().collect();
        fail(&mut c, "M5", d(1, 21), "13:00-17:30", d(4, 30));
        for a in keep {
            assert_eq!(c.schedule.get(&a.course_id, a.fraction_index), Some(&a));
        }
    }
}
