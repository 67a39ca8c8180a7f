//! Single-defect mutations of a clean hand-built schedule. Each mutation
//! must be reported by exactly its own check and nothing else.

use std::collections::BTreeSet;

use chrono::NaiveDate;
use rtsched::fixture::mutations::{world, MUTATIONS};
use rtsched::model::Schedule;
use rtsched::validate::{validate_all, validate_machine, CheckId};

fn d(m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, m, day).unwrap()
}

#[test]
fn base_schedule_is_clean() {
    assert_eq!(world().checks(), vec![]);
}

#[test]
fn each_mutation_is_caught_by_its_own_check_only() {
    for m in MUTATIONS {
        let mut w = world();
        (m.apply)(&mut w);
        assert_eq!(w.checks(), vec![m.expected], "{}", m.name);
    }
}

#[test]
fn every_error_check_has_a_mutation() {
    let covered: BTreeSet<CheckId> = MUTATIONS.iter().map(|m| m.expected).collect();
    let missing: Vec<CheckId> = CheckId::ALL
        .into_iter()
        .filter(|c| *c != CheckId::UnknownCourse && !covered.contains(c))
        .collect();
    assert!(missing.is_empty(), "{missing:?}");
}

#[test]
fn empty_schedule_gives_empty_report() {
    let w = world();
    let r = validate_all(&Schedule::new(), &w.clinic, &w.protocols, &w.courses);
    assert!(r.violations.is_empty());
    assert!(r.counts.is_empty());
}

#[test]
fn empty_machine_is_clean() {
    let w = world();
    assert!(validate_machine(&"M9".into(), d(1, 1), d(1, 31), &w.schedule, &w.clinic, None).is_empty());
}

#[test]
fn validation_is_read_only() {
    let w = world();
    let before = w.schedule.fingerprint();
    let _ = w.report();
    assert_eq!(w.schedule.fingerprint(), before);
}

#[test]
fn unknown_course_is_a_warning() {
    let mut w = world();
    w.courses.retain(|c| c.course_id.as_str() != "P2");
    let r = w.report();
    assert_eq!(r.errors, 0);
    assert_eq!(r.warnings, 1);
}
