//! Wire frames and layer-tagged message payloads.
//!
//! Frame: session_id(8) ∥ seq u32 LE ∥ kind u8 ∥ payload_len u32 LE ∥ payload.
//! Payload of a message: layer u8 ∥ label_len u8 ∥ label ∥ body.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Layer, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameKind {
    Classical,
    QubitRef,
    Control,
}

impl FrameKind {
    pub fn code(self) -> u8 {
        match self {
            FrameKind::Classical => 0,
            FrameKind::QubitRef => 1,
            FrameKind::Control => 2,
        }
    }

    pub fn from_code(c: u8) -> Result<FrameKind> {
        match c {
            0 => Ok(FrameKind::Classical),
            1 => Ok(FrameKind::QubitRef),
            2 => Ok(FrameKind::Control),
            _ => Err(Error::Decode(format!("unknown frame kind {c}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FrameKind::Classical => "CLASSICAL",
            FrameKind::QubitRef => "QUBIT_REF",
            FrameKind::Control => "CONTROL",
        }
    }

    pub fn from_name(s: &str) -> Option<FrameKind> {
        [FrameKind::Classical, FrameKind::QubitRef, FrameKind::Control].into_iter().find(|k| k.name() == s)
    }
}

pub const HEADER_LEN: usize = 8 + 4 + 1 + 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub session_id: [u8; 8],
    pub seq: u32,
    pub kind: FrameKind,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.session_id);
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.push(self.kind.code());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses one frame from the front of `buf`; returns it and the bytes consumed.
    pub fn decode_prefix(buf: &[u8]) -> Result<(Frame, usize)> {
        if buf.len() < HEADER_LEN {
            return Err(Error::Decode("truncated frame header".into()));
        }
        let session_id: [u8; 8] = buf[..8].try_into().unwrap();
        let seq = u32::from_le_bytes(buf[8..12].try_into().unwrap());
        let kind = FrameKind::from_code(buf[12])?;
        let len = u32::from_le_bytes(buf[13..17].try_into().unwrap()) as usize;
        if buf.len() < HEADER_LEN + len {
            return Err(Error::Decode("truncated frame payload".into()));
        }
        let payload = buf[HEADER_LEN..HEADER_LEN + len].to_vec();
        Ok((Frame { session_id, seq, kind, payload }, HEADER_LEN + len))
    }

    pub fn decode(buf: &[u8]) -> Result<Frame> {
        let (f, used) = Frame::decode_prefix(buf)?;
        if used != buf.len() {
            return Err(Error::Decode("trailing bytes after frame".into()));
        }
        Ok(f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub layer: Layer,
    pub label: String,
    pub body: Vec<u8>,
}

impl Message {
    pub fn new(layer: Layer, label: &str, body: Vec<u8>) -> Message {
        Message { layer, label: label.to_string(), body }
    }

    pub fn encode(&self) -> Vec<u8> {
        assert!(self.label.len() < 256, "label too long");
        let mut out = Vec::with_capacity(2 + self.label.len() + self.body.len());
        out.push(self.layer.code());
        out.push(self.label.len() as u8);
        out.extend_from_slice(self.label.as_bytes());
        out.extend_from_slice(&self.body);
        out
    }

    pub fn decode(buf: &[u8]) -> Result<Message> {
        if buf.len() < 2 {
            return Err(Error::Decode("truncated message".into()));
        }
        let layer = Layer::from_code(buf[0]).ok_or_else(|| Error::Decode(format!("unknown layer {}", buf[0])))?;
        let n = buf[1] as usize;
        if buf.len() < 2 + n {
            return Err(Error::Decode("truncated message label".into()));
        }
        let label = std::str::from_utf8(&buf[2..2 + n])
            .map_err(|_| Error::Decode("label is not utf-8".into()))?
            .to_string();
        Ok(Message { layer, label, body: buf[2 + n..].to_vec() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_frame() -> impl Strategy<Value = Frame> {
        (any::<[u8; 8]>(), any::<u32>(), 0u8..3, proptest::collection::vec(any::<u8>(), 0..200)).prop_map(
            |(session_id, seq, k, payload)| Frame { session_id, seq, kind: FrameKind::from_code(k).unwrap(), payload },
        )
    }

    proptest! {
        #[test]
        fn frame_roundtrip(f in arb_frame()) {
            prop_assert_eq!(Frame::decode(&f.encode()).unwrap(), f);
        }

        /// Concatenated frames re-parse unambiguously however the stream is cut.
        #[test]
        fn self_delimiting(frames in proptest::collection::vec(arb_frame(), 1..8), cut in any::<prop::sample::Index>()) {
            let stream: Vec<u8> = frames.iter().flat_map(|f| f.encode()).collect();
            let cut = cut.index(stream.len() + 1);
            let mut pending = stream[..cut].to_vec();
            let mut rest = &stream[cut..];
            let mut out = Vec::new();
            loop {
                while let Ok((f, used)) = Frame::decode_prefix(&pending) {
                    out.push(f);
                    pending.drain(..used);
                }
                if rest.is_empty() { break; }
                let take = rest.len().min(7);
                pending.extend_from_slice(&rest[..take]);
                rest = &rest[take..];
            }
            prop_assert!(pending.is_empty());
            prop_assert_eq!(out, frames);
        }
    }

    #[test]
    fn message_roundtrip() {
        let m = Message::new(Layer::Cds, "GARBLED", vec![1, 2, 3]);
        assert_eq!(Message::decode(&m.encode()).unwrap(), m);
        assert!(Message::decode(&[99, 0]).is_err());
    }
}
