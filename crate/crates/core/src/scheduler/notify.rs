use chrono::{Days, NaiveDate};

use crate::model::{AppointmentStatus, CourseId, Priority, Schedule};

/// Marks courses as communicated at the end of `today`.
///
/// Priority A courses are communicated as soon as they are booked. Others
/// are communicated once `notification_days` calendar days have passed
/// since their batch day, or earlier when their first fraction falls within
/// that many days of today. Returns the courses that changed.
pub fn freeze_notifications(
    schedule: &mut Schedule,
    today: NaiveDate,
    notification_days: u32,
) -> Vec<CourseId> {
    let period = Days::new(notification_days as u64);
    let due: Vec<CourseId> = schedule
        .bookings()
        .filter(|(c, b)| {
            if schedule.is_communicated(c) || !schedule.contains_course(c) {
                return false;
            }
            b.priority == Priority::A
                || today >= b.batch_day + period
                || schedule.first_date(c).is_some_and(|f| f <= today + period)
        })
        .map(|(c, _)| c.clone())
        .collect();
    for c in &due {
        for f in schedule.course(c).iter().map(|a| a.fraction_index).collect::<Vec<_>>() {
            if let Some(a) = schedule.get_mut(c, f) {
                a.status = AppointmentStatus::Communicated;
            }
        }
    }
    due
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Appointment, CourseBooking};

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn booked(course: &str, p: Priority, batch: &str, first: &str) -> Schedule {
        let mut s = Schedule::new();
        s.insert(Appointment {
            course_id: course.into(),
            fraction_index: 1,
            machine: "M1".into(),
            date: d(first),
            window_index: 0,
            start: "08:00".parse().unwrap(),
            duration: 10,
            status: AppointmentStatus::Tentative,
        });
        s.set_booking(course.into(), CourseBooking { priority: p, batch_day: d(batch) });
        s
    }

    #[test]
    fn priority_a_is_communicated_the_same_day() {
        let mut s = booked("a", Priority::A, "2020-02-03", "2020-02-04");
        assert_eq!(freeze_notifications(&mut s, d("2020-02-03"), 7).len(), 1);
        assert!(s.is_communicated(&"a".into()));
    }

    #[test]
    fn priority_c_waits_for_the_period() {
        // Batch day 0 = 2020-02-03, first fraction on day 20.
        let mut s = booked("c", Priority::C, "2020-02-03", "2020-02-23");
        for day in ["2020-02-03", "2020-02-06", "2020-02-09"] {
            assert!(freeze_notifications(&mut s, d(day), 7).is_empty());
        }
        assert_eq!(freeze_notifications(&mut s, d("2020-02-10"), 7).len(), 1);
        assert!(s.is_communicated(&"c".into()));
        let before = s.clone();
        assert!(freeze_notifications(&mut s, d("2020-02-11"), 7).is_empty());
        assert_eq!(s, before);
    }

    #[test]
    fn near_start_is_communicated_early() {
        let mut s = booked("b", Priority::B, "2020-02-03", "2020-02-10");
        assert_eq!(freeze_notifications(&mut s, d("2020-02-03"), 7).len(), 1);
    }
}
