//! Per-party channel endpoint with sequence checking and a transcript log.

use std::cell::{Cell, RefCell};
use std::collections::VecDeque;
use std::future::poll_fn;
use std::io::{Read, Write};
use std::net::TcpStream;
use std::rc::Rc;
use std::task::Poll;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Layer, Result};
use crate::transport::frame::{Frame, FrameKind, Message};

pub const ABORT: &str = "ABORT";

/// In-process duplex link between party 0 and party 1.
#[derive(Debug)]
pub struct Link {
    queues: [RefCell<VecDeque<Frame>>; 2],
    progress: Rc<Cell<u64>>,
    pushed: Cell<u64>,
    drop_nth: Cell<Option<u64>>,
}

impl Link {
    pub fn new(progress: Rc<Cell<u64>>) -> Rc<Link> {
        Rc::new(Link {
            queues: [RefCell::new(VecDeque::new()), RefCell::new(VecDeque::new())],
            progress,
            pushed: Cell::new(0),
            drop_nth: Cell::new(None),
        })
    }

    /// Fault injection: silently discard the `n`-th frame pushed (0-based).
    pub fn drop_frame(&self, n: u64) {
        self.drop_nth.set(Some(n));
    }

    fn push(&self, to: usize, f: Frame) {
        let k = self.pushed.get();
        self.pushed.set(k + 1);
        self.progress.set(self.progress.get() + 1);
        if self.drop_nth.get() == Some(k) {
            return;
        }
        self.queues[to].borrow_mut().push_back(f);
    }

    fn pop(&self, me: usize) -> Option<Frame> {
        let f = self.queues[me].borrow_mut().pop_front();
        if f.is_some() {
            self.progress.set(self.progress.get() + 1);
        }
        f
    }
}

pub enum Endpoint {
    InProc { link: Rc<Link>, me: usize },
    Tcp(TcpStream),
    /// Replays recorded incoming frames; outgoing frames only go to the transcript.
    Replay(VecDeque<Frame>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Sent,
    Received,
    Oracle,
    Local,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub layer: Layer,
    pub direction: Direction,
    pub kind: FrameKind,
    pub seq: u32,
    /// Encoded message (layer ∥ label ∥ body).
    pub payload: Vec<u8>,
}

impl Entry {
    pub fn message(&self) -> Result<Message> {
        Message::decode(&self.payload)
    }

    pub fn label(&self) -> String {
        self.message().map(|m| m.label).unwrap_or_default()
    }
}

#[derive(Serialize, Deserialize)]
struct JsonEntry {
    layer: String,
    direction: Direction,
    kind: String,
    seq: u32,
    payload_hex: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    pub entries: Vec<Entry>,
}

impl Transcript {
    /// One JSON object per line: {layer, direction, kind, seq, payload_hex}.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let j = JsonEntry {
                layer: e.layer.name().to_string(),
                direction: e.direction,
                kind: e.kind.name().to_string(),
                seq: e.seq,
                payload_hex: hex::encode(&e.payload),
            };
            out.push_str(&serde_json::to_string(&j).expect("serializable"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(s: &str) -> Result<Transcript> {
        let mut entries = Vec::new();
        for line in s.lines().filter(|l| !l.trim().is_empty()) {
            let j: JsonEntry = serde_json::from_str(line).map_err(|e| Error::Decode(e.to_string()))?;
            entries.push(Entry {
                layer: Layer::from_name(&j.layer).ok_or_else(|| Error::Decode(format!("layer {}", j.layer)))?,
                direction: j.direction,
                kind: FrameKind::from_name(&j.kind).ok_or_else(|| Error::Decode(format!("kind {}", j.kind)))?,
                seq: j.seq,
                payload: hex::decode(&j.payload_hex).map_err(|e| Error::Decode(e.to_string()))?,
            });
        }
        Ok(Transcript { entries })
    }

    /// Bodies of all sent or received messages with the given layer and label.
    pub fn bodies(&self, layer: Layer, label: &str) -> Vec<Vec<u8>> {
        self.entries
            .iter()
            .filter(|e| matches!(e.direction, Direction::Sent | Direction::Received) && e.layer == layer)
            .filter_map(|e| e.message().ok())
            .filter(|m| m.label == label)
            .map(|m| m.body)
            .collect()
    }

    pub fn count(&self, layer: Layer, label: &str) -> usize {
        self.bodies(layer, label).len()
    }

    /// Subroutine serialization: BEGIN/END markers nest, and every frame
    /// belongs to the innermost open subroutine.
    pub fn check_serialization(&self) -> Result<()> {
        let mut stack: Vec<Layer> = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            let label = e.label();
            match e.direction {
                Direction::Local if label == "BEGIN" => stack.push(e.layer),
                Direction::Local if label == "END" => {
                    if stack.pop() != Some(e.layer) {
                        return Err(Error::protocol(e.layer, format!("entry {i}: END without matching BEGIN")));
                    }
                }
                Direction::Sent | Direction::Received | Direction::Oracle => {
                    if e.kind == FrameKind::Control {
                        continue;
                    }
                    if stack.last() != Some(&e.layer) {
                        return Err(Error::protocol(
                            e.layer,
                            format!("entry {i} ({label}) interleaves with open subroutine {:?}", stack.last()),
                        ));
                    }
                }
                Direction::Local => {}
            }
        }
        Ok(())
    }
}

pub struct Channel {
    ep: Endpoint,
    session: [u8; 8],
    next_seq: u32,
    last_recv: Option<u32>,
    pub transcript: Transcript,
    /// When false, only metadata is logged (payload bodies dropped) to bound memory.
    pub keep_payloads: bool,
}

impl Channel {
    pub fn new(ep: Endpoint, session: [u8; 8]) -> Channel {
        Channel { ep, session, next_seq: 0, last_recv: None, transcript: Transcript::default(), keep_payloads: true }
    }

    pub fn session(&self) -> [u8; 8] {
        self.session
    }

    fn log(&mut self, layer: Layer, direction: Direction, kind: FrameKind, seq: u32, payload: &[u8]) {
        let payload = if self.keep_payloads || payload.len() < 2 {
            payload.to_vec()
        } else {
            let n = 2 + payload[1] as usize;
            payload[..n.min(payload.len())].to_vec()
        };
        self.transcript.entries.push(Entry { layer, direction, kind, seq, payload });
    }

    pub fn send_kind(&mut self, kind: FrameKind, layer: Layer, label: &str, body: Vec<u8>) -> Result<()> {
        let payload = Message::new(layer, label, body).encode();
        let seq = self.next_seq;
        self.next_seq += 1;
        self.log(layer, Direction::Sent, kind, seq, &payload);
        let f = Frame { session_id: self.session, seq, kind, payload };
        match &mut self.ep {
            Endpoint::InProc { link, me } => {
                link.push(1 - *me, f);
                Ok(())
            }
            Endpoint::Tcp(s) => write_tcp_frame(s, &f),
            Endpoint::Replay(_) => Ok(()),
        }
    }

    pub fn send(&mut self, layer: Layer, label: &str, body: Vec<u8>) -> Result<()> {
        self.send_kind(FrameKind::Classical, layer, label, body)
    }

    pub fn send_abort(&mut self, layer: Layer, reason: &str) {
        // best effort: the peer may already be gone
        let _ = self.send_kind(FrameKind::Control, layer, ABORT, reason.as_bytes().to_vec());
    }

    async fn next_frame(&mut self) -> Result<Frame> {
        match &mut self.ep {
            Endpoint::InProc { link, me } => {
                let (link, me) = (link.clone(), *me);
                poll_fn(move |_| match link.pop(me) {
                    Some(f) => Poll::Ready(Ok(f)),
                    None => Poll::Pending,
                })
                .await
            }
            Endpoint::Tcp(s) => read_tcp_frame(s),
            Endpoint::Replay(q) => q.pop_front().ok_or(Error::Closed),
        }
    }

    /// Receives the next message, which must carry `layer` and `label`.
    pub async fn recv(&mut self, layer: Layer, label: &str) -> Result<Vec<u8>> {
        let (kind, m) = self.recv_any().await?;
        if m.layer != layer || m.label != label {
            return Err(Error::protocol(
                layer,
                format!("expected {layer}/{label}, got {}/{} ({})", m.layer, m.label, kind.name()),
            ));
        }
        Ok(m.body)
    }

    pub async fn recv_any(&mut self) -> Result<(FrameKind, Message)> {
        let f = self.next_frame().await?;
        if f.session_id != self.session {
            return Err(Error::protocol(Layer::Transport, "frame for another session"));
        }
        if let Some(last) = self.last_recv {
            if f.seq <= last {
                return Err(Error::protocol(Layer::Transport, format!("out-of-order seq {} after {last}", f.seq)));
            }
        }
        self.last_recv = Some(f.seq);
        let m = Message::decode(&f.payload)?;
        self.log(m.layer, Direction::Received, f.kind, f.seq, &f.payload);
        if f.kind == FrameKind::Control && m.label == ABORT {
            return Err(Error::PeerAbort { layer: m.layer, reason: String::from_utf8_lossy(&m.body).into_owned() });
        }
        Ok((f.kind, m))
    }

    pub fn begin(&mut self, layer: Layer) {
        let p = Message::new(layer, "BEGIN", Vec::new()).encode();
        self.log(layer, Direction::Local, FrameKind::Control, 0, &p);
    }

    /// Closes a subroutine. Nothing is logged after an ABORT record, so an
    /// aborted transcript always ends with it.
    pub fn end(&mut self, layer: Layer) {
        if self.transcript.entries.last().is_some_and(|e| e.kind == FrameKind::Control && e.message().is_ok_and(|m| m.label == ABORT)) {
            return;
        }
        let p = Message::new(layer, "END", Vec::new()).encode();
        self.log(layer, Direction::Local, FrameKind::Control, 0, &p);
    }

    pub fn log_oracle(&mut self, layer: Layer, label: &str, seq: u64, body: Vec<u8>) {
        let p = Message::new(layer, label, body).encode();
        self.log(layer, Direction::Oracle, FrameKind::Classical, seq as u32, &p);
    }
}

pub fn write_tcp_frame(s: &mut TcpStream, f: &Frame) -> Result<()> {
    let enc = f.encode();
    let mut buf = (enc.len() as u32).to_le_bytes().to_vec();
    buf.extend_from_slice(&enc);
    s.write_all(&buf)?;
    Ok(())
}

pub fn read_tcp_frame(s: &mut TcpStream) -> Result<Frame> {
    let mut len = [0u8; 4];
    s.read_exact(&mut len).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Closed
        } else {
            Error::from(e)
        }
    })?;
    let n = u32::from_le_bytes(len) as usize;
    let mut buf = vec![0u8; n];
    s.read_exact(&mut buf)?;
    Frame::decode(&buf)
}
