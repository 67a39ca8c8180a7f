//! End-of-day batch planning.
//!
//! Each pending course gets a short list of complete candidate plans
//! ([`enumerate_plans`]); one plan per course is then chosen under window
//! capacity ([`select_plans`]), with placeholder patients holding room for
//! expected urgent arrivals. [`assign_start_times`] turns window
//! assignments into timed appointments and [`freeze_notifications`] fixes
//! what has been communicated to patients.

mod availability;
mod batch;
mod enumerate;
mod notify;
mod oracle;
mod placeholders;
mod select;
mod start_times;
mod weights;

pub use availability::{Availability, Reservation};
pub use batch::{planning_range, solve_batch, BatchContext, BatchOutcome, BatchTrace, SelectionMode};
pub use enumerate::{enumerate_plans, CandidatePlan, EnumerationLimits, PlanRequest, Slot};
pub use notify::freeze_notifications;
pub use oracle::{
    brute_force_oracle, compare_with_oracle, random_instance, InstanceShape, OracleComparison, OracleInstance,
    MAX_COURSES,
    MAX_DAYS, MAX_MACHINES,
};
pub use placeholders::{reserve_placeholders, trailing_rate, PlaceholderPatient};
pub use select::{select_plans, Item, Selection, SelectionLimits};
pub use start_times::{assign_start_times, WindowAssignment};
pub use weights::{ObjectiveWeights, PlanMetrics, UnitWeights};
