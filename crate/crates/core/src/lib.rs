//! Customer baseline load (CBL) evaluation for residential demand response.
//!
//! - [`meterdata`]: interval data model, CSV ingestion, validation, aggregation
//! - [`synthgen`]: seeded synthetic load populations and monthly-peak event schedules
//! - [`baseline`]: HighXofY and randomized-controlled-trial baselines
//! - [`metrics`]: MAE, bias, OPI and confidence intervals
//! - [`settlement`]: Peak Time Rebate settlement and false load reduction
//! - [`harness`]: the experiment matrix and report emission

pub mod baseline;
pub mod harness;
pub mod meterdata;
pub mod metrics;
pub mod settlement;
pub mod stats;
pub mod synthgen;
