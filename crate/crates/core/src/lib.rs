//! Planning engine and benchmark harness for multi-robot collective
//! transport: task allocation with divisible demands, deadlines, payload and
//! range limits, a shared depot and range-limited communication.

pub mod assignment;
pub mod baselines;
pub mod bench;
mod error;
pub mod policy;
pub mod scenario;
pub mod simenv;
pub mod taskgraph;
pub mod topology;
pub mod training;

pub use error::{Error, Result};
