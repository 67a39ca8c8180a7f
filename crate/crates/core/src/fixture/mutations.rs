//! Single-defect schedules for exercising the validator.
//!
//! [`world`] is a clean hand-built January schedule of five courses. Each
//! entry of [`MUTATIONS`] breaks exactly one rule in it.
//!
//! ```
//! use rtsched::fixture::mutations::{world, MUTATIONS};
//!
//! let m = &MUTATIONS[0];
//! let mut w = world();
//! (m.apply)(&mut w);
//! assert_eq!(w.checks(), vec![m.expected]);
//! ```

use chrono::NaiveDate;

use super::{appointments, clinic, course, working_days, PROTOCOLS_JSON};
use crate::model::{
    Appointment, Clinic, ClockTime, CourseId, ProtocolTable, Schedule, TreatmentCourse,
    TreatmentProtocol, UnavailabilityKind,
};
use crate::validate::{validate_all, CheckId, ValidationReport};

fn d(m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, m, day).expect("valid date")
}

fn t(h: u16, m: u16) -> ClockTime {
    ClockTime::hm(h, m)
}

/// Inputs and schedule of the mutation fixture.
#[derive(Debug, Clone)]
pub struct World {
    pub clinic: Clinic,
    pub protocols: ProtocolTable,
    pub courses: Vec<TreatmentCourse>,
    pub schedule: Schedule,
}

impl World {
    pub fn report(&self) -> ValidationReport {
        validate_all(&self.schedule, &self.clinic, &self.protocols, &self.courses)
    }

    /// Checks reported, one entry per violation.
    pub fn checks(&self) -> Vec<CheckId> {
        self.report().violations.iter().map(|v| v.check).collect()
    }

    /// Edits one appointment. Panics if it does not exist.
    pub fn edit(&mut self, course: &str, fraction: u32, f: impl FnOnce(&mut Appointment)) {
        f(self
            .schedule
            .get_mut(&CourseId::from(course), fraction)
            .expect("fixture appointment"));
    }
}

/// The clean schedule. M1 is blocked on 27 January and Prostate allows at
/// most two working days between fractions.
///
/// * P1, P2: Prostate, 10 daily fractions on M1 from 13 January.
/// * L1: Liver SBRT, 5 fractions every other day on M6.
/// * B1: Breast, 5 fractions on M4 from 9 January, followed by its boost BB.
pub fn world() -> World {
    let mut clinic = clinic();
    clinic
        .park
        .block_full_day(UnavailabilityKind::Planned, &"M1".into(), d(1, 27))
        .expect("M1 exists");
    let mut list: Vec<TreatmentProtocol> =
        serde_json::from_str(PROTOCOLS_JSON).expect("embedded protocols are valid");
    for p in &mut list {
        if p.id.as_str() == "Prostate" {
            p.max_gap_between_fractions = Some(2);
        }
    }
    let protocols = ProtocolTable::new(list).expect("embedded protocols are valid");

    let p1 = course("P1", "Prostate", d(1, 2), 10);
    let p2 = course("P2", "Prostate", d(1, 2), 10);
    let l1 = course("L1", "Liver SBRT", d(1, 6), 5);
    let b1 = course("B1", "Breast", d(1, 2), 5);
    let mut bb = course("BB", "Breast boost", d(1, 2), 3);
    bb.follows_course = Some("B1".into());

    let daily = working_days(&clinic, d(1, 13), 10);
    let mut appts = appointments(&clinic, &p1, "M1", t(9, 0), &daily);
    appts.extend(appointments(&clinic, &p2, "M1", t(9, 30), &daily));
    appts.extend(appointments(
        &clinic,
        &l1,
        "M6",
        t(10, 0),
        &[d(1, 16), d(1, 20), d(1, 22), d(1, 24), d(1, 28)],
    ));
    appts.extend(appointments(
        &clinic,
        &b1,
        "M4",
        t(13, 0),
        &[d(1, 9), d(1, 10), d(1, 13), d(1, 14), d(1, 15)],
    ));
    appts.extend(appointments(&clinic, &bb, "M4", t(13, 0), &[d(1, 16), d(1, 17), d(1, 20)]));
    World {
        clinic,
        protocols,
        courses: vec![p1, p2, l1, b1, bb],
        schedule: Schedule::from_appointments(appts),
    }
}

/// One defect and the check expected to catch it.
pub struct Mutation {
    pub name: &'static str,
    pub expected: CheckId,
    pub apply: fn(&mut World),
}

pub const MUTATIONS: &[Mutation] = &[
    Mutation {
        name: "missing_fraction",
        expected: CheckId::FractionCount,
        apply: |w| drop(w.schedule.remove(&"P1".into(), 10)),
    },
    Mutation {
        // Earliest start is Monday 13 January; the Sunday before is past
        // the pre-treatment period but not a start day.
        name: "start_one_day_before_earliest_start",
        expected: CheckId::AllowedStartDay,
        apply: |w| w.edit("P1", 1, |a| a.date = d(1, 12)),
    },
    Mutation {
        name: "start_inside_pre_treatment",
        expected: CheckId::PreTreatment,
        apply: |w| w.edit("P1", 1, |a| a.date = d(1, 10)),
    },
    Mutation {
        name: "two_fractions_on_one_day_without_doubling",
        expected: CheckId::MaxFractionsPerDay,
        apply: |w| {
            w.edit("L1", 2, |a| {
                a.date = d(1, 22);
                a.start = t(16, 30);
                a.window_index = 4;
            })
        },
    },
    Mutation {
        name: "thin_week",
        expected: CheckId::MinFractionsPerWeek,
        apply: |w| {
            w.edit("L1", 2, |a| a.date = d(1, 30));
            w.edit("L1", 3, |a| a.date = d(2, 3));
        },
    },
    Mutation {
        name: "gap_beyond_cap",
        expected: CheckId::MaxInterval,
        apply: |w| {
            w.edit("P1", 4, |a| a.date = d(1, 28));
            w.edit("P1", 5, |a| a.date = d(1, 29));
        },
    },
    Mutation {
        name: "switch_to_unmatched_machine",
        expected: CheckId::BeamMatch,
        apply: |w| w.edit("P1", 3, |a| a.machine = "M4".into()),
    },
    Mutation {
        // M8 is completely matched to M6 but not in the liver protocol.
        name: "move_to_disallowed_machine",
        expected: CheckId::AllowedMachine,
        apply: |w| w.edit("L1", 3, |a| a.machine = "M8".into()),
    },
    Mutation {
        name: "consecutive_days_for_every_other_day_protocol",
        expected: CheckId::FractionationScheme,
        apply: |w| w.edit("L1", 3, |a| a.date = d(1, 21)),
    },
    Mutation {
        name: "wrong_duration",
        expected: CheckId::FractionDuration,
        apply: |w| w.edit("P1", 2, |a| a.duration = 20),
    },
    Mutation {
        name: "doubled_day_too_close",
        expected: CheckId::DoubledDayGap,
        apply: |w| {
            w.edit("B1", 2, |a| {
                a.date = d(1, 13);
                a.start = t(15, 0);
                a.window_index = 3;
            })
        },
    },
    Mutation {
        name: "fraction_on_saturday",
        expected: CheckId::TreatmentDay,
        apply: |w| w.edit("P1", 5, |a| a.date = d(1, 18)),
    },
    Mutation {
        name: "boost_overlaps_primary",
        expected: CheckId::ConsecutiveTreatment,
        apply: |w| {
            w.edit("BB", 1, |a| {
                a.date = d(1, 15);
                a.start = t(15, 0);
                a.window_index = 3;
            })
        },
    },
    Mutation {
        name: "overlapping_bookings",
        expected: CheckId::DoubleBooking,
        apply: |w| w.edit("P2", 2, |a| a.start = t(9, 0)),
    },
    Mutation {
        name: "booking_in_full_day_block",
        expected: CheckId::MachineUnavailable,
        apply: |w| w.edit("P1", 10, |a| a.date = d(1, 27)),
    },
    Mutation {
        name: "booking_runs_past_its_window",
        expected: CheckId::WindowCapacity,
        apply: |w| w.edit("P1", 2, |a| a.start = t(9, 50)),
    },
    Mutation {
        name: "start_outside_its_window",
        expected: CheckId::WindowAssignment,
        apply: |w| w.edit("P1", 2, |a| a.window_index = 1),
    },
];
