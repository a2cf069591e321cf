//! Tracking drifting minimizers with SGD and momentum: drifting objectives,
//! update rules and schedules, closed-form bounds, minimax hard instances and
//! a reproducible experiment runner.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod drift;
pub mod error;
pub mod hardinstance;
pub mod optim;
pub mod problems;
pub mod record;
pub mod rng;
pub mod runner;
pub mod vector;

pub use error::{Error, Result};
pub use record::{read_records, write_records, RunRecord, StepRecord};
pub use rng::{derive_seed, gaussian_vec, SeededStream};
pub use vector::Vector;
