pub mod bbcs;
pub mod cds;
pub mod ecom;
pub mod error;
pub mod garble;
pub mod harness;
pub mod ideal;
pub mod primitives;
pub mod qsim;
pub mod session;
pub mod socom;
pub mod stack;
pub mod transport;
pub mod zk;

pub use error::{Error, Layer, Result};
