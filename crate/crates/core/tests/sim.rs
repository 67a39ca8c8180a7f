//! Day-by-day replay on the demonstration clinic.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Months, NaiveDate};
use rtsched::config::RunConfig;
use rtsched::fixture;
use rtsched::ingest::{apply_calendar, generate_calendar, generate_synthetic, resolve_courses, write_schedule};
use rtsched::model::{Clinic, ClockTime, CourseId, ProtocolTable, Schedule, TreatmentCourse, UnavailabilityKind};
use rtsched::sim::{run, write_day_trace, SimInputs, SimMode, SimRunner, SimState};
use rtsched::validate::validate_all;

fn d(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

struct World {
    clinic: Clinic,
    protocols: ProtocolTable,
    courses: Vec<TreatmentCourse>,
    empty: Schedule,
    config: RunConfig,
}

impl World {
    /// January and February 2020 with synthetic arrivals and failures,
    /// simulated through `end`.
    fn new(end: &str) -> Self {
        let protocols = fixture::protocols();
        let mut clinic = fixture::clinic();
        let mut syn = fixture::synthetic_config();
        syn.end = d("2020-02-29");
        apply_calendar(&generate_calendar(&syn, &clinic).unwrap(), &mut clinic.park).unwrap();
        let courses = resolve_courses(generate_synthetic(&syn, &protocols, &clinic).unwrap(), &protocols).unwrap();
        let config = RunConfig {
            sim_end: d(end),
            comparison_start: d("2020-01-01"),
            ..RunConfig::default()
        };
        Self {
            clinic,
            protocols,
            courses,
            empty: Schedule::new(),
            config,
        }
    }

    fn inputs(&self) -> SimInputs<'_> {
        SimInputs {
            clinic: &self.clinic,
            protocols: &self.protocols,
            courses: &self.courses,
            input_schedule: &self.empty,
        }
    }
}

/// Everything a run writes, wall-clock timings aside.
fn outputs(state: &SimState) -> (Vec<u8>, Vec<u8>) {
    let mut sched = Vec::new();
    write_schedule(&mut sched, &state.schedule, None).unwrap();
    let mut trace = Vec::new();
    write_day_trace(&mut trace, &state.trace, None).unwrap();
    (sched, trace)
}

#[test]
fn no_arrivals_gives_an_empty_schedule() {
    let mut w = World::new("2020-01-31");
    w.courses.clear();
    let out = run(&w.config, w.inputs()).unwrap();
    assert!(out.schedule().is_empty());
    assert_eq!(out.report.courses_included, 0);
    assert!(out.state.trace.iter().all(|t| t.scheduled == 0 && t.deferred == 0));
    assert_eq!(out.state.trace.len(), 22);
}

#[test]
fn a_month_with_failures_stays_clean_and_never_pulls_fractions_forward() {
    let mut w = World::new("2020-01-31");
    for day in ["2020-01-20", "2020-01-27"] {
        let morning = "08:00-12:00".parse().unwrap();
        w.clinic.park.add_block(UnavailabilityKind::Failure, &"M1".into(), d(day), morning).unwrap();
    }
    let mut r = SimRunner::new(&w.config, w.inputs(), SimMode::Dynamic).unwrap();
    let mut seen: BTreeMap<(CourseId, u32), NaiveDate> = BTreeMap::new();
    let horizon = w.config.solver.horizon_months;
    let mut before = BTreeSet::new();
    while let Some(today) = r.next_day() {
        r.step().unwrap();
        let sched = &r.state().schedule;
        for a in sched.iter() {
            if !before.contains(&(a.course_id.clone(), a.fraction_index, a.date, a.start)) {
                // Added or moved today: same-day repairs at the earliest.
                assert!(a.date >= today, "{} fraction {} put on {} at {today}", a.course_id, a.fraction_index, a.date);
                assert!(a.date <= today + Months::new(horizon));
            }
            if !a.is_communicated() {
                continue;
            }
            let key = (a.course_id.clone(), a.fraction_index);
            if let Some(&prev) = seen.get(&key) {
                assert!(a.date >= prev, "{key:?} moved to an earlier date on {today}");
            }
            seen.insert(key, a.date);
        }
        before = sched.iter().map(|a| (a.course_id.clone(), a.fraction_index, a.date, a.start)).collect();
    }
    let out = r.finish().unwrap();
    assert!(out.state.trace.iter().any(|t| t.displaced > 0), "the month has no displacements");
    let report = validate_all(out.schedule(), &out.clinic, &w.protocols, &w.courses);
    assert!(report.is_clean(), "{:?}", &report.violations[..report.violations.len().min(5)]);
    assert!(out.report.courses_unscheduled.len() <= 1);
}

#[test]
fn resuming_a_snapshot_matches_an_uninterrupted_run() {
    let w = World::new("2020-01-31");
    let straight = run(&w.config, w.inputs()).unwrap();

    let mut first = SimRunner::new(&w.config, w.inputs(), SimMode::Dynamic).unwrap();
    first.run_until(d("2020-01-15")).unwrap();
    let json = first.snapshot().to_json().unwrap();
    drop(first);
    let mut second = SimRunner::resume(SimState::from_json(&json).unwrap(), w.inputs()).unwrap();
    second.run_to_end().unwrap();
    let resumed = second.finish().unwrap();

    assert_eq!(outputs(&resumed.state), outputs(&straight.state));
    assert_eq!(resumed.state.displacements, straight.state.displacements);
    assert_eq!(resumed.report, straight.report);
}

#[test]
fn runs_are_reproducible() {
    let w = World::new("2020-01-20");
    for mode in [SimMode::Dynamic, SimMode::Baseline] {
        let go = || {
            let mut r = SimRunner::new(&w.config, w.inputs(), mode).unwrap();
            r.run_to_end().unwrap();
            r.finish().unwrap()
        };
        let (a, b) = (go(), go());
        assert_eq!(outputs(&a.state), outputs(&b.state), "{mode:?}");
    }
}

#[test]
fn baseline_communicates_everything_at_once() {
    let w = World::new("2020-01-31");
    let mut r = SimRunner::new(&w.config, w.inputs(), SimMode::Baseline).unwrap();
    r.run_to_end().unwrap();
    let out = r.finish().unwrap();
    assert!(out.schedule().iter().all(|a| a.is_communicated()));
    let report = validate_all(out.schedule(), &out.clinic, &w.protocols, &w.courses);
    assert!(report.is_clean(), "{:?}", &report.violations[..report.violations.len().min(5)]);
}

#[test]
fn a_dirty_input_schedule_is_rejected() {
    let mut w = World::new("2020-01-10");
    let c = w.courses[0].clone();
    let days = fixture::working_days(&w.clinic, d("2020-01-13"), 2);
    // Two fractions of one course on the same machine at the same time.
    let mut appts = fixture::appointments(&w.clinic, &c, "M1", ClockTime::hm(9, 0), &days);
    appts[1].date = appts[0].date;
    w.empty = Schedule::from_appointments(appts);
    assert!(SimRunner::new(&w.config, w.inputs(), SimMode::Dynamic).is_err());
}
