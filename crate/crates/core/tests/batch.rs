//! Batch planning on the demonstration clinic and on random small instances.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use proptest::prelude::*;
use rtsched::config::{PlaceholderConfig, RunConfig};
use rtsched::fixture;
use rtsched::ingest::{generate_synthetic, resolve_courses};
use rtsched::model::{earliest_start, Clinic, CourseId, Priority, ProtocolTable, Schedule, TreatmentCourse};
use rtsched::scheduler::{
    assign_start_times, compare_with_oracle, planning_range, random_instance, reserve_placeholders, solve_batch,
    BatchContext, BatchOutcome, InstanceShape, ObjectiveWeights, SelectionMode,
};
use rtsched::validate::validate_all;

fn d(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

/// Synthetic arrivals created in the first `days` calendar days of 2020.
fn arrivals(protocols: &ProtocolTable, clinic: &Clinic, days: u64, seed: u64) -> Vec<TreatmentCourse> {
    let mut syn = fixture::synthetic_config();
    syn.end = syn.start + chrono::Days::new(days - 1);
    syn.seed = seed;
    resolve_courses(generate_synthetic(&syn, protocols, clinic).unwrap(), protocols).unwrap()
}

fn solve(
    clinic: &Clinic,
    protocols: &ProtocolTable,
    weights: &ObjectiveWeights,
    pending: &[TreatmentCourse],
    placeholders_per_day: f64,
    today: NaiveDate,
) -> BatchOutcome {
    let cfg = RunConfig::default();
    let ph_cfg = PlaceholderConfig {
        prior_rate: placeholders_per_day,
        ..cfg.placeholders.clone()
    };
    let horizon = today + chrono::Months::new(cfg.solver.horizon_months);
    let placeholders = reserve_placeholders(&BTreeMap::new(), None, today, horizon, &clinic.calendar, &ph_cfg);
    let ctx = BatchContext {
        clinic,
        protocols,
        weights,
        solver: &cfg.solver,
        placeholders: &ph_cfg,
        reservation: None,
    };
    solve_batch(&ctx, today, pending, &placeholders, &Schedule::new(), SelectionMode::Heuristic).unwrap()
}

#[test]
fn heuristic_stays_close_to_the_exact_selection() {
    let cfg = RunConfig::default();
    for seed in 0..40 {
        let c = compare_with_oracle(&random_instance(seed, InstanceShape::default()).unwrap(), &cfg).unwrap();
        assert!(c.ratio() <= 1.05, "seed {seed}: {c:?}");
        assert!(c.same_deferrals(), "seed {seed}: {c:?}");
    }
}

#[test]
fn batch_output_is_validator_clean() {
    let clinic = fixture::clinic();
    let protocols = fixture::protocols();
    let courses = arrivals(&protocols, &clinic, 10, 7);
    let out = solve(&clinic, &protocols, &ObjectiveWeights::default(), &courses, 4.0, d("2020-01-10"));
    assert!(out.deferred.is_empty());
    assert!(out.trace.placeholders_placed > 0);
    let appts = assign_start_times(&clinic, &Schedule::new(), &out.assignments).unwrap();
    let schedule = Schedule::from_appointments(appts);
    let report = validate_all(&schedule, &clinic, &protocols, &courses);
    assert!(report.is_clean(), "{:?}", report.violations);
}

#[test]
fn chained_course_starts_after_its_predecessor() {
    let clinic = fixture::clinic();
    let protocols = fixture::protocols();
    let primary = fixture::course("B1", "Breast", d("2020-01-06"), 15);
    let mut boost = fixture::course("BB", "Breast boost", d("2020-01-06"), 5);
    boost.follows_course = Some("B1".into());
    // The follower comes first in the input on purpose.
    let out = solve(&clinic, &protocols, &ObjectiveWeights::default(), &[boost, primary], 0.0, d("2020-01-06"));
    assert_eq!(out.trace.stages, 2);
    let last_primary = out.assignments.iter().filter(|a| a.course_id.as_str() == "B1").map(|a| a.date).max();
    let first_boost = out.assignments.iter().filter(|a| a.course_id.as_str() == "BB").map(|a| a.date).min();
    assert!(first_boost > last_primary);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn placeholders_never_leave_the_batch(seed in 0u64..1000, rate in 0.0f64..8.0) {
        let clinic = fixture::clinic();
        let protocols = fixture::protocols();
        let courses = arrivals(&protocols, &clinic, 3, seed);
        let out = solve(&clinic, &protocols, &ObjectiveWeights::default(), &courses, rate, d("2020-01-03"));
        let pending: BTreeSet<&CourseId> = courses.iter().map(|c| &c.course_id).collect();
        for a in &out.assignments {
            prop_assert!(pending.contains(&a.course_id));
        }
        prop_assert!(out.plans.keys().all(|c| pending.contains(c)));
        prop_assert!(out.deferred.iter().all(|c| pending.contains(c)));
        // Every pending course is either scheduled or deferred, never both.
        prop_assert_eq!(out.plans.len() + out.deferred.len(), courses.len());
        prop_assert!(out.deferred.iter().all(|c| !out.plans.contains_key(c)));
    }

    #[test]
    fn scaling_all_weights_keeps_the_selection(seed in 0u64..1000, scale in 1e-3f64..1e3) {
        let clinic = fixture::clinic();
        let protocols = fixture::protocols();
        let courses = arrivals(&protocols, &clinic, 3, seed);
        let w = ObjectiveWeights::default();
        let mut s = w.clone();
        s.waiting *= scale;
        s.excess *= scale;
        s.off_site *= scale;
        s.non_preferred *= scale;
        s.partial_switch *= scale;
        s.window_switch *= scale;
        s.off_window *= scale;
        let a = solve(&clinic, &protocols, &w, &courses, 2.0, d("2020-01-03"));
        let b = solve(&clinic, &protocols, &s, &courses, 2.0, d("2020-01-03"));
        prop_assert_eq!(a.assignments, b.assignments);
        prop_assert_eq!(a.cost, b.cost);
    }
}

#[test]
fn urgent_courses_start_as_soon_as_they_can() {
    let clinic = fixture::clinic();
    let protocols = fixture::protocols();
    let courses = arrivals(&protocols, &clinic, 10, 3);
    let today = d("2020-01-10");
    let out = solve(&clinic, &protocols, &ObjectiveWeights::default(), &courses, 4.0, today);
    let first_day = planning_range(&clinic, today, 3).unwrap().0;
    let mut urgent = 0;
    for c in &courses {
        let p = protocols.get(&c.protocol_id).unwrap();
        if p.priority != Priority::A {
            continue;
        }
        urgent += 1;
        let e = earliest_start(c, p, &clinic.calendar, None).unwrap();
        let start = out.assignments.iter().filter(|a| a.course_id == c.course_id).map(|a| a.date).min();
        assert_eq!(start, Some(e.max(first_day)), "{}", c.course_id);
    }
    assert!(urgent > 5);
}
