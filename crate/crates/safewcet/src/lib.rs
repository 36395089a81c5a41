//! Offline safe-WCET analysis for weakly hard real-time systems.
//!
//! Given an early-design task set with WCET ranges, the library searches for
//! worst-case scheduling test cases under an adaptive-partitioning
//! multi-core scheduler and infers a probabilistic safe WCET border,
//! reporting maximal safe WCET sub-ranges at a chosen confidence level.

pub mod baseline;
pub mod evalrun;
pub mod learn;
pub mod model;
pub mod pattern;
pub mod search;
pub mod seeds;
pub mod sim;
pub mod stats;
pub mod synth;
pub mod time;
