//! Radiotherapy fraction scheduling.
//!
//! `rtsched` plans radiotherapy treatment courses onto linear accelerators.
//! Every working day a batch of newly arrived (and not yet communicated)
//! courses is optimized onto `(machine, day, time window)` triples while
//! capacity is held back for urgent patients that are expected to arrive
//! later. Start times inside each window are fixed in a post-processing
//! step, and schedules are frozen once they are communicated to patients.
//!
//! The crate is organised along the pipeline:
//!
//! * [`model`] holds the domain types: calendar, protocols, courses, the
//!   machine park and the schedule itself.
//! * [`ingest`] reads and writes the file formats and generates synthetic
//!   arrival streams.
//! * [`scheduler`] enumerates candidate plans per course and selects one per
//!   course under shared machine capacity. An exhaustive oracle checks the
//!   selection on small instances.
//! * [`disruption`] repairs appointments hit by a machine failure.
//! * [`validate`] audits patient and machine schedules.
//! * [`metrics`] computes the quality objectives and occupancy.
//! * [`sim`] replays a year day by day, with a static-reservation baseline
//!   for comparison.
//!
//! ```
//! use rtsched::fixture;
//!
//! let clinic = fixture::clinic();
//! assert_eq!(clinic.park.machines().len(), 10);
//! // 2020 with the fixture holidays has 254 working days.
//! let d2020 = clinic.calendar.working_days_in(
//!     chrono::NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
//!     chrono::NaiveDate::from_ymd_opt(2020, 12, 31).unwrap(),
//! );
//! assert_eq!(d2020, 254);
//! ```

pub mod config;
pub mod disruption;
pub mod error;
pub mod fixture;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod scheduler;
pub mod sim;
pub mod validate;

pub use error::{Error, Result};
