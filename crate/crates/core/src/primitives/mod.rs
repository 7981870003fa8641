//! Deterministic building blocks: bitstrings, PRGs, Naor commitments,
//! Toeplitz hashing and the boolean-circuit IR.

pub mod bits;
pub mod circuit;
pub mod naor;
pub mod prg;
pub mod uhash;

pub use bits::BitString;
pub use circuit::{Bit, BooleanCircuit, CircuitBuilder, Gate};
pub use naor::{Naor, NaorCommitment};
pub use prg::{CfPrg, Prg, PrgVariant};
pub use uhash::UniversalHash;
