use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{ClockTime, CourseId, Interval, MachineId, Priority};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppointmentStatus {
    Tentative,
    Communicated,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Appointment {
    pub course_id: CourseId,
    /// 1-based.
    pub fraction_index: u32,
    pub machine: MachineId,
    pub date: NaiveDate,
    pub window_index: u8,
    pub start: ClockTime,
    pub duration: u16,
    pub status: AppointmentStatus,
}

impl Appointment {
    pub fn end(&self) -> ClockTime {
        self.start.plus(self.duration)
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.start, self.end())
    }

    pub fn is_communicated(&self) -> bool {
        self.status == AppointmentStatus::Communicated
    }
}

/// Booking bookkeeping kept per scheduled course.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourseBooking {
    pub priority: Priority,
    /// Day of the batch that first scheduled the course.
    pub batch_day: NaiveDate,
}

/// The evolving assignment of fractions to machine time.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    appointments: BTreeMap<CourseId, BTreeMap<u32, Appointment>>,
    #[serde(default)]
    bookings: BTreeMap<CourseId, CourseBooking>,
}

impl Schedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_appointments(appts: impl IntoIterator<Item = Appointment>) -> Self {
        let mut s = Self::new();
        for a in appts {
            s.insert(a);
        }
        s
    }

    /// Inserts or replaces the appointment for `(course, fraction)`.
    pub fn insert(&mut self, appt: Appointment) -> Option<Appointment> {
        self.appointments
            .entry(appt.course_id.clone())
            .or_default()
            .insert(appt.fraction_index, appt)
    }

    pub fn remove(&mut self, course: &CourseId, fraction: u32) -> Option<Appointment> {
        let fr = self.appointments.get_mut(course)?;
        let out = fr.remove(&fraction);
        if fr.is_empty() {
            self.appointments.remove(course);
        }
        out
    }

    /// Removes every appointment of `course`, keeping its booking record.
    pub fn remove_course(&mut self, course: &CourseId) -> Vec<Appointment> {
        self.appointments
            .remove(course)
            .map(|m| m.into_values().collect())
            .unwrap_or_default()
    }

    pub fn get(&self, course: &CourseId, fraction: u32) -> Option<&Appointment> {
        self.appointments.get(course)?.get(&fraction)
    }

    pub fn get_mut(&mut self, course: &CourseId, fraction: u32) -> Option<&mut Appointment> {
        self.appointments.get_mut(course)?.get_mut(&fraction)
    }

    pub fn contains_course(&self, course: &CourseId) -> bool {
        self.appointments.contains_key(course)
    }

    /// Appointments of one course in chronological order.
    pub fn course(&self, course: &CourseId) -> Vec<&Appointment> {
        let mut v: Vec<&Appointment> = self
            .appointments
            .get(course)
            .map(|m| m.values().collect())
            .unwrap_or_default();
        v.sort_by_key(|a| (a.date, a.start, a.fraction_index));
        v
    }

    pub fn course_ids(&self) -> impl Iterator<Item = &CourseId> {
        self.appointments.keys()
    }

    /// Last treatment date of a course, if it has any appointment.
    pub fn last_date(&self, course: &CourseId) -> Option<NaiveDate> {
        self.appointments.get(course)?.values().map(|a| a.date).max()
    }

    pub fn first_date(&self, course: &CourseId) -> Option<NaiveDate> {
        self.appointments.get(course)?.values().map(|a| a.date).min()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Appointment> {
        self.appointments.values().flat_map(|m| m.values())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Appointment> {
        self.appointments.values_mut().flat_map(|m| m.values_mut())
    }

    pub fn len(&self) -> usize {
        self.appointments.values().map(|m| m.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.appointments.is_empty()
    }

    /// Appointments grouped by `(machine, date)`, each group sorted by start.
    pub fn by_machine_day(&self) -> BTreeMap<(MachineId, NaiveDate), Vec<&Appointment>> {
        self.by_machine_day_in(NaiveDate::MIN, NaiveDate::MAX)
    }

    /// [`Schedule::by_machine_day`] restricted to dates in `[first, last]`.
    pub fn by_machine_day_in(
        &self,
        first: NaiveDate,
        last: NaiveDate,
    ) -> BTreeMap<(MachineId, NaiveDate), Vec<&Appointment>> {
        let mut out: BTreeMap<(MachineId, NaiveDate), Vec<&Appointment>> = BTreeMap::new();
        for a in self.iter().filter(|a| a.date >= first && a.date <= last) {
            out.entry((a.machine.clone(), a.date)).or_default().push(a);
        }
        for v in out.values_mut() {
            v.sort_by_key(|a| (a.start, a.end()));
        }
        out
    }

    pub fn booking(&self, course: &CourseId) -> Option<&CourseBooking> {
        self.bookings.get(course)
    }

    pub fn set_booking(&mut self, course: CourseId, booking: CourseBooking) {
        self.bookings.insert(course, booking);
    }

    pub fn bookings(&self) -> impl Iterator<Item = (&CourseId, &CourseBooking)> {
        self.bookings.iter()
    }

    /// Whether every appointment of the course has been communicated.
    pub fn is_communicated(&self, course: &CourseId) -> bool {
        self.appointments
            .get(course)
            .is_some_and(|m| m.values().all(Appointment::is_communicated))
    }

    /// Courses with at least one tentative appointment.
    pub fn tentative_courses(&self) -> Vec<CourseId> {
        self.appointments
            .iter()
            .filter(|(_, m)| m.values().any(|a| !a.is_communicated()))
            .map(|(c, _)| c.clone())
            .collect()
    }

    /// Order-independent content hash, used to show that audits are read-only.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{DefaultHasher, Hash, Hasher};
        let mut h = DefaultHasher::new();
        for a in self.iter() {
            a.hash(&mut h);
        }
        h.finish()
    }
}
