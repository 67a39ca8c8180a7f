use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::{
    free_segments, grid_align, Appointment, AppointmentStatus, Clinic, ClockTime, CourseId,
    Interval, MachineId, Priority, Schedule,
};
use crate::{Error, Result};

/// A fraction placed in a window but not yet given a start time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowAssignment {
    pub course_id: CourseId,
    pub fraction_index: u32,
    pub priority: Priority,
    pub machine: MachineId,
    pub date: NaiveDate,
    pub window_index: u8,
    pub duration: u16,
}

/// Gives each assignment a start time.
///
/// Within a `(machine, day, window)` the appointments already in `fixed`
/// keep their times. New ones are packed earliest-first on the time grid in
/// the order (priority, course id, fraction), each into the first free
/// stretch that holds its rounded duration. The result is tentative.
pub fn assign_start_times(
    clinic: &Clinic,
    fixed: &Schedule,
    assignments: &[WindowAssignment],
) -> Result<Vec<Appointment>> {
    let mut groups: BTreeMap<(MachineId, NaiveDate, u8), Vec<&WindowAssignment>> = BTreeMap::new();
    for a in assignments {
        groups
            .entry((a.machine.clone(), a.date, a.window_index))
            .or_default()
            .push(a);
    }
    let (lo, hi) = assignments
        .iter()
        .fold((NaiveDate::MAX, NaiveDate::MIN), |(lo, hi), a| (lo.min(a.date), hi.max(a.date)));
    let by_day = fixed.by_machine_day_in(lo, hi);
    let grid = clinic.layout.grid();
    let mut out = Vec::with_capacity(assignments.len());
    for ((m, d, w), mut items) in groups {
        if w as usize >= clinic.layout.len() {
            return Err(Error::Invariant(format!("window {w} does not exist")));
        }
        items.sort_by(|a, b| {
            (a.priority, &a.course_id, a.fraction_index).cmp(&(b.priority, &b.course_id, b.fraction_index))
        });
        let mut taken: Vec<Interval> = clinic.park.blocked_intervals(&m, d);
        if let Some(v) = by_day.get(&(m.clone(), d)) {
            taken.extend(v.iter().map(|a| a.interval()));
        }
        let win = clinic.layout.window(w as usize);
        let mut gaps: Vec<Interval> = free_segments(win, &taken)
            .into_iter()
            .filter_map(|g| grid_align(g, grid))
            .collect();
        for a in items {
            let need = clinic.layout.rounded(a.duration);
            let Some(g) = gaps.iter_mut().find(|g| g.len() >= need) else {
                return Err(Error::Invariant(format!(
                    "window {w} of {m} on {d} is over capacity"
                )));
            };
            let start = g.start;
            g.start = ClockTime::from_minutes(start.minutes() + need);
            out.push(Appointment {
                course_id: a.course_id.clone(),
                fraction_index: a.fraction_index,
                machine: m.clone(),
                date: d,
                window_index: w,
                start,
                duration: a.duration,
                status: AppointmentStatus::Tentative,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture;

    fn wa(course: &str, dur: u16, p: Priority) -> WindowAssignment {
        WindowAssignment {
            course_id: course.into(),
            fraction_index: 1,
            priority: p,
            machine: "M1".into(),
            date: "2020-01-06".parse().unwrap(),
            window_index: 0,
            duration: dur,
        }
    }

    #[test]
    fn packs_on_the_grid() {
        let clinic = fixture::clinic();
        let out = assign_start_times(
            &clinic,
            &Schedule::new(),
            &[wa("b", 12, Priority::C), wa("a", 24, Priority::C)],
        )
        .unwrap();
        let starts: Vec<String> = out.iter().map(|a| a.start.to_string()).collect();
        assert_eq!(starts, ["08:00", "08:25"]);
        assert_eq!(out[0].course_id.as_str(), "a");
    }

    #[test]
    fn empty_and_idempotent() {
        let clinic = fixture::clinic();
        assert!(assign_start_times(&clinic, &Schedule::new(), &[]).unwrap().is_empty());
        let items = [wa("x", 30, Priority::A), wa("y", 15, Priority::B)];
        let a = assign_start_times(&clinic, &Schedule::new(), &items).unwrap();
        let b = assign_start_times(&clinic, &Schedule::new(), &items).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn overfull_window_is_an_invariant_error() {
        let clinic = fixture::clinic();
        let items: Vec<_> = (0..5).map(|i| wa(&format!("c{i}"), 25, Priority::C)).collect();
        assert!(matches!(
            assign_start_times(&clinic, &Schedule::new(), &items),
            Err(Error::Invariant(_))
        ));
    }
}
