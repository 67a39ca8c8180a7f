//! The demonstration clinic shipped with the crate.
//!
//! Ten machines on four sites, the protocol table, and a synthetic-stream
//! configuration tuned for that park, plus single-defect schedules in
//! [`mutations`]. The JSON sources are embedded so that
//! examples and tests need no files on disk.

pub mod mutations;

use chrono::NaiveDate;

use crate::ingest::{parse_clinic, parse_protocols, SyntheticConfig};
use crate::model::{
    Appointment, AppointmentStatus, Clinic, ClockTime, PatientId, ProtocolTable, TreatmentCourse,
};

pub const CLINIC_JSON: &str = include_str!("../data/clinic.json");
pub const PROTOCOLS_JSON: &str = include_str!("../data/protocols.json");
pub const SYNTHETIC_JSON: &str = include_str!("../data/synthetic.json");

pub fn clinic() -> Clinic {
    parse_clinic(CLINIC_JSON).expect("embedded clinic is valid")
}

pub fn protocols() -> ProtocolTable {
    parse_protocols(PROTOCOLS_JSON).expect("embedded protocols are valid")
}

pub fn synthetic_config() -> SyntheticConfig {
    serde_json::from_str(SYNTHETIC_JSON).expect("embedded synthetic config is valid")
}

/// A course with the protocol's default durations and no preferences.
///
/// Panics on an unknown protocol name.
pub fn course(id: &str, protocol: &str, created: NaiveDate, n_fractions: u32) -> TreatmentCourse {
    let protocols = protocols();
    let p = protocols.by_name(protocol).expect("known protocol");
    TreatmentCourse {
        patient_id: PatientId::new(format!("P-{id}")),
        course_id: id.into(),
        creation_date: created,
        protocol_id: p.id.clone(),
        n_fractions,
        duration_first: p.first_fraction_duration,
        duration_rest: p.subsequent_fraction_duration,
        site_preference: "S1".into(),
        follows_course: None,
        time_preference: None,
        excluded: false,
    }
}

/// Communicated appointments for `course` on the given dates, one per date,
/// all on `machine` at `start`.
pub fn appointments(
    clinic: &Clinic,
    course: &TreatmentCourse,
    machine: &str,
    start: ClockTime,
    dates: &[NaiveDate],
) -> Vec<Appointment> {
    let window = clinic.layout.window_of(start).expect("start inside a window") as u8;
    dates
        .iter()
        .enumerate()
        .map(|(i, d)| Appointment {
            course_id: course.course_id.clone(),
            fraction_index: i as u32 + 1,
            machine: machine.into(),
            date: *d,
            window_index: window,
            start,
            duration: course.duration_of(i as u32 + 1),
            status: AppointmentStatus::Communicated,
        })
        .collect()
}

/// `n` consecutive working days starting at `first`.
pub fn working_days(clinic: &Clinic, first: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let i = clinic.calendar.index_on_or_after(first).expect("date in span");
    (i..i + n).map(|k| clinic.calendar.date(k)).collect()
}
