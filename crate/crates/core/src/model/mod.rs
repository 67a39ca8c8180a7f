//! Domain types shared by every stage of the pipeline.

mod calendar;
mod clinic;
mod course;
mod ids;
mod park;
mod protocol;
mod schedule;
mod time;

pub use calendar::{Calendar, CalendarConfig};
pub use clinic::{Clinic, ClinicFile, DayLayout};
pub use course::{earliest_start, weekly_shortfall, TimePreference, TreatmentCourse};
pub use ids::{CourseId, LinacType, MachineId, PatientId, ProtocolId, SiteId};
pub use park::{beam_match, BeamMatch, Machine, MachinePark, UnavailabilityKind};
pub(crate) use park::{free_segments, grid_align};
pub use protocol::{MachineTier, Pattern, Priority, ProtocolTable, TreatmentProtocol};
pub use schedule::{Appointment, AppointmentStatus, CourseBooking, Schedule};
pub use time::{ClockTime, Interval};
