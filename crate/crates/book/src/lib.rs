//! The `book/` guide, with every chapter compiled and run as doctests.

#[doc = include_str!("../../../book/src/overview.md")]
pub mod overview {}

#[doc = include_str!("../../../book/src/inputs.md")]
pub mod inputs {}

#[doc = include_str!("../../../book/src/batch.md")]
pub mod batch {}

#[doc = include_str!("../../../book/src/disruption.md")]
pub mod disruption {}

#[doc = include_str!("../../../book/src/validation.md")]
pub mod validation {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
