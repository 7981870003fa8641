//! Test harness: statistics with explicit confidence, the entropy budget,
//! adversary strategies, brute-force extraction and simulator fixtures.

pub mod adversary;
pub mod brute;
pub mod entropy;
pub mod sims;
pub mod stats;
