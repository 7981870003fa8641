//! Crate-wide error type.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Protocol layer that produced a frame, an abort or an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Layer {
    Transport,
    Zk,
    SoCom,
    Bbcs,
    Cds,
    Ecom,
    Stack,
    Ideal,
    Qsim,
}

impl Layer {
    pub const ALL: [Layer; 9] = [
        Layer::Transport,
        Layer::Zk,
        Layer::SoCom,
        Layer::Bbcs,
        Layer::Cds,
        Layer::Ecom,
        Layer::Stack,
        Layer::Ideal,
        Layer::Qsim,
    ];

    pub fn code(self) -> u8 {
        match self {
            Layer::Transport => 0,
            Layer::Zk => 1,
            Layer::SoCom => 2,
            Layer::Bbcs => 3,
            Layer::Cds => 4,
            Layer::Ecom => 5,
            Layer::Stack => 6,
            Layer::Ideal => 7,
            Layer::Qsim => 8,
        }
    }

    pub fn from_code(c: u8) -> Option<Layer> {
        Layer::ALL.get(c as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Layer::Transport => "transport",
            Layer::Zk => "zk",
            Layer::SoCom => "socom",
            Layer::Bbcs => "bbcs",
            Layer::Cds => "cds",
            Layer::Ecom => "ecom",
            Layer::Stack => "stack",
            Layer::Ideal => "ideal",
            Layer::Qsim => "qsim",
        }
    }

    pub fn from_name(s: &str) -> Option<Layer> {
        Layer::ALL.iter().copied().find(|l| l.name() == s)
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BrokerError {
    UnknownHandle,
    NotOwner,
    /// Handle already measured or transmitted away.
    Dead,
    Unsupported,
    /// A scripted coin source ran dry.
    CoinsExhausted,
}

impl fmt::Display for BrokerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BrokerError::UnknownHandle => "unknown handle",
            BrokerError::NotOwner => "not owner",
            BrokerError::Dead => "handle already measured or moved",
            BrokerError::Unsupported => "unsupported operation",
            BrokerError::CoinsExhausted => "scripted coins exhausted",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("length mismatch: {0}")]
    Length(String),
    #[error("decode error: {0}")]
    Decode(String),
    #[error("malformed circuit: {0}")]
    Circuit(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("garbled evaluation failed: {0}")]
    EvalFailure(String),
    #[error("broker: {0}")]
    Broker(BrokerError),
    #[error("{layer} abort: {reason}")]
    Abort { layer: Layer, reason: String },
    #[error("peer aborted in {layer}: {reason}")]
    PeerAbort { layer: Layer, reason: String },
    #[error("protocol error in {layer}: {msg}")]
    Protocol { layer: Layer, msg: String },
    #[error("deadlock: no party can make progress")]
    Deadlock,
    #[error("channel closed")]
    Closed,
    #[error("io: {0}")]
    Io(String),
    #[error("simulation failed: {0}")]
    SimulationFailure(String),
    #[error("adversary strategy crashed: {0}")]
    Strategy(String),
}

impl Error {
    pub fn abort(layer: Layer, reason: impl Into<String>) -> Error {
        Error::Abort { layer, reason: reason.into() }
    }

    pub fn protocol(layer: Layer, msg: impl Into<String>) -> Error {
        Error::Protocol { layer, msg: msg.into() }
    }

    /// Layer an abort or protocol error is attributed to, if any.
    pub fn layer(&self) -> Option<Layer> {
        match self {
            Error::Abort { layer, .. } | Error::PeerAbort { layer, .. } | Error::Protocol { layer, .. } => {
                Some(*layer)
            }
            _ => None,
        }
    }

    /// True for outcomes that count as a protocol abort (as opposed to a bug or I/O failure).
    pub fn is_abort(&self) -> bool {
        matches!(self, Error::Abort { .. } | Error::PeerAbort { .. } | Error::Protocol { .. })
    }
}

impl From<BrokerError> for Error {
    fn from(e: BrokerError) -> Self {
        Error::Broker(e)
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
