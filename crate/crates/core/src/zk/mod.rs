//! Commit-and-open zero-knowledge arguments for statement satisfiability.

pub mod compile;
pub mod engine;
pub mod protocol;
pub mod statement;

pub use statement::{Clause, Seg, Statement};
