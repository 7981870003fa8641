//! Trusted physics broker for BB84 qubits and EPR pairs.
//!
//! Parties only ever hold opaque handles. Preparation data stays inside the
//! broker; the only way to learn anything about a qubit is to measure it,
//! which kills the handle.

use std::cell::RefCell;
use std::collections::{HashMap, VecDeque};
use std::net::{TcpListener, TcpStream};
use std::rc::Rc;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{BrokerError, Error, Layer, Result};
use crate::transport::channel::{read_tcp_frame, write_tcp_frame};
use crate::transport::frame::{Frame, FrameKind, Message};

pub type PartyId = u8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Basis {
    Plus,
    Times,
}

impl Basis {
    pub fn from_bit(b: bool) -> Basis {
        if b { Basis::Times } else { Basis::Plus }
    }

    pub fn bit(self) -> bool {
        self == Basis::Times
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitRef(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Prepared { x: bool, basis: Basis },
    EprHalf { pair: u64 },
}

#[derive(Debug)]
struct Slot {
    owner: PartyId,
    kind: Kind,
}

pub enum CoinSource {
    Rng(ChaCha20Rng),
    /// Fixed coin sequence, for exhaustive enumeration over broker randomness.
    Script(VecDeque<bool>),
}

pub struct Broker {
    next_id: u64,
    live: HashMap<u64, Slot>,
    /// Ids that existed and were measured or moved.
    dead: std::collections::HashSet<u64>,
    /// Collapse record of each EPR pair: (outcome, basis) of the first measured half.
    pairs: HashMap<u64, Option<(bool, Basis)>>,
    next_pair: u64,
    coins: CoinSource,
    coins_used: u64,
}

impl Broker {
    pub fn new(seed: u64) -> Broker {
        Broker::with_coins(CoinSource::Rng(ChaCha20Rng::seed_from_u64(seed)))
    }

    pub fn with_coins(coins: CoinSource) -> Broker {
        Broker {
            next_id: 1,
            live: HashMap::new(),
            dead: Default::default(),
            pairs: HashMap::new(),
            next_pair: 0,
            coins,
            coins_used: 0,
        }
    }

    pub fn scripted(coins: impl IntoIterator<Item = bool>) -> Broker {
        Broker::with_coins(CoinSource::Script(coins.into_iter().collect()))
    }

    pub fn coins_used(&self) -> u64 {
        self.coins_used
    }

    fn coin(&mut self) -> std::result::Result<bool, BrokerError> {
        self.coins_used += 1;
        match &mut self.coins {
            CoinSource::Rng(r) => Ok(r.gen()),
            CoinSource::Script(q) => q.pop_front().ok_or(BrokerError::CoinsExhausted),
        }
    }

    fn fresh(&mut self, owner: PartyId, kind: Kind) -> QubitRef {
        let id = self.next_id;
        self.next_id += 1;
        self.live.insert(id, Slot { owner, kind });
        QubitRef(id)
    }

    fn take(&mut self, caller: PartyId, q: QubitRef) -> std::result::Result<Slot, BrokerError> {
        match self.live.get(&q.0) {
            None if self.dead.contains(&q.0) => Err(BrokerError::Dead),
            None => Err(BrokerError::UnknownHandle),
            Some(s) if s.owner != caller => Err(BrokerError::NotOwner),
            Some(_) => {
                self.dead.insert(q.0);
                Ok(self.live.remove(&q.0).expect("checked"))
            }
        }
    }

    pub fn prepare(&mut self, owner: PartyId, x: bool, basis: Basis) -> QubitRef {
        self.fresh(owner, Kind::Prepared { x, basis })
    }

    pub fn epr_pair(&mut self, owner: PartyId) -> (QubitRef, QubitRef) {
        let pair = self.next_pair;
        self.next_pair += 1;
        self.pairs.insert(pair, None);
        let a = self.fresh(owner, Kind::EprHalf { pair });
        let b = self.fresh(owner, Kind::EprHalf { pair });
        (a, b)
    }

    /// Moves ownership to `to`; the old handle dies and a new one is returned.
    pub fn transmit(&mut self, caller: PartyId, q: QubitRef, to: PartyId) -> std::result::Result<QubitRef, BrokerError> {
        let s = self.take(caller, q)?;
        Ok(self.fresh(to, s.kind))
    }

    pub fn measure(&mut self, caller: PartyId, q: QubitRef, basis: Basis) -> std::result::Result<bool, BrokerError> {
        let s = self.take(caller, q)?;
        match s.kind {
            Kind::Prepared { x, basis: b } if b == basis => Ok(x),
            Kind::Prepared { .. } => self.coin(),
            Kind::EprHalf { pair } => {
                let rec = self.pairs.get_mut(&pair).expect("pair exists");
                match *rec {
                    Some((v, b)) if b == basis => Ok(v),
                    Some(_) => self.coin(),
                    None => {
                        let v = self.coin()?;
                        *self.pairs.get_mut(&pair).expect("pair exists") = Some((v, basis));
                        Ok(v)
                    }
                }
            }
        }
    }

    /// Attack-only measurement that returns the prepared bit with probability
    /// `p_correct[basis]` (indexed by the preparation basis). Only supported
    /// on prepared qubits and on EPR halves whose twin already collapsed.
    pub fn measure_biased(&mut self, caller: PartyId, q: QubitRef, p_correct: [f64; 2]) -> std::result::Result<bool, BrokerError> {
        let (x, b) = match self.live.get(&q.0).map(|s| s.kind) {
            Some(Kind::Prepared { x, basis }) => (x, basis),
            Some(Kind::EprHalf { pair }) => self.pairs[&pair].ok_or(BrokerError::Unsupported)?,
            None => {
                return Err(if self.dead.contains(&q.0) { BrokerError::Dead } else { BrokerError::UnknownHandle })
            }
        };
        self.take(caller, q)?;
        let p = p_correct[b.bit() as usize];
        self.coins_used += 1;
        let right = match &mut self.coins {
            CoinSource::Rng(r) => r.gen_bool(p.clamp(0.0, 1.0)),
            CoinSource::Script(_) => return Err(BrokerError::Unsupported),
        };
        Ok(if right { x } else { !x })
    }

    /// Test and simulator privilege: preparation data of a live prepared qubit.
    pub fn introspect(&self, q: QubitRef) -> Option<(bool, Basis)> {
        match self.live.get(&q.0)?.kind {
            Kind::Prepared { x, basis } => Some((x, basis)),
            Kind::EprHalf { .. } => None,
        }
    }

    pub fn live_count(&self) -> usize {
        self.live.len()
    }
}

/// A party's connection to the broker.
pub enum QuantumPort {
    None,
    Local { broker: Rc<RefCell<Broker>>, party: PartyId },
    Remote(RemoteBroker),
}

impl QuantumPort {
    pub fn local(broker: &Rc<RefCell<Broker>>, party: PartyId) -> QuantumPort {
        QuantumPort::Local { broker: broker.clone(), party }
    }

    pub fn party(&self) -> PartyId {
        match self {
            QuantumPort::None => 0,
            QuantumPort::Local { party, .. } => *party,
            QuantumPort::Remote(r) => r.party,
        }
    }

    pub fn prepare(&mut self, qs: &[(bool, Basis)]) -> Result<Vec<QubitRef>> {
        match self {
            QuantumPort::None => Err(BrokerError::Unsupported.into()),
            QuantumPort::Local { broker, party } => {
                let mut b = broker.borrow_mut();
                Ok(qs.iter().map(|&(x, th)| b.prepare(*party, x, th)).collect())
            }
            QuantumPort::Remote(r) => r.prepare(qs),
        }
    }

    pub fn epr(&mut self, n: usize) -> Result<Vec<(QubitRef, QubitRef)>> {
        match self {
            QuantumPort::None => Err(BrokerError::Unsupported.into()),
            QuantumPort::Local { broker, party } => {
                let mut b = broker.borrow_mut();
                Ok((0..n).map(|_| b.epr_pair(*party)).collect())
            }
            QuantumPort::Remote(r) => r.epr(n),
        }
    }

    pub fn transmit(&mut self, qs: &[QubitRef], to: PartyId) -> Result<Vec<QubitRef>> {
        match self {
            QuantumPort::None => Err(BrokerError::Unsupported.into()),
            QuantumPort::Local { broker, party } => {
                let mut b = broker.borrow_mut();
                qs.iter().map(|&q| b.transmit(*party, q, to).map_err(Error::from)).collect()
            }
            QuantumPort::Remote(r) => r.transmit(qs, to),
        }
    }

    pub fn measure(&mut self, qs: &[(QubitRef, Basis)]) -> Result<Vec<bool>> {
        match self {
            QuantumPort::None => Err(BrokerError::Unsupported.into()),
            QuantumPort::Local { broker, party } => {
                let mut b = broker.borrow_mut();
                qs.iter().map(|&(q, th)| b.measure(*party, q, th).map_err(Error::from)).collect()
            }
            QuantumPort::Remote(r) => r.measure(qs),
        }
    }

    pub fn measure_biased(&mut self, q: QubitRef, p_correct: [f64; 2]) -> Result<bool> {
        match self {
            QuantumPort::Local { broker, party } => Ok(broker.borrow_mut().measure_biased(*party, q, p_correct)?),
            _ => Err(BrokerError::Unsupported.into()),
        }
    }

    /// Broker handle for simulator privileges; only available in-process.
    pub fn broker(&self) -> Option<Rc<RefCell<Broker>>> {
        match self {
            QuantumPort::Local { broker, .. } => Some(broker.clone()),
            _ => None,
        }
    }
}

fn broker_err_code(e: BrokerError) -> u8 {
    match e {
        BrokerError::UnknownHandle => 0,
        BrokerError::NotOwner => 1,
        BrokerError::Dead => 2,
        BrokerError::Unsupported => 3,
        BrokerError::CoinsExhausted => 4,
    }
}

fn broker_err_from(c: u8) -> BrokerError {
    match c {
        0 => BrokerError::UnknownHandle,
        1 => BrokerError::NotOwner,
        2 => BrokerError::Dead,
        4 => BrokerError::CoinsExhausted,
        _ => BrokerError::Unsupported,
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Decode("truncated broker message".into()));
        }
        let (a, b) = self.buf.split_at(n);
        self.buf = b;
        Ok(a)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
}

/// Client side of the broker wire API.
pub struct RemoteBroker {
    stream: TcpStream,
    party: PartyId,
    session: [u8; 8],
    seq: u32,
}

impl RemoteBroker {
    pub fn connect(addr: &str, party: PartyId, session: [u8; 8]) -> Result<RemoteBroker> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(RemoteBroker { stream, party, session, seq: 0 })
    }

    fn call(&mut self, label: &str, body: Vec<u8>) -> Result<Vec<u8>> {
        let payload = Message::new(Layer::Qsim, label, body).encode();
        let f = Frame { session_id: self.session, seq: self.seq, kind: FrameKind::Classical, payload };
        self.seq += 1;
        write_tcp_frame(&mut self.stream, &f)?;
        let r = read_tcp_frame(&mut self.stream)?;
        let m = Message::decode(&r.payload)?;
        match m.label.as_str() {
            "OK" => Ok(m.body),
            "ERR" => Err(broker_err_from(m.body.first().copied().unwrap_or(3)).into()),
            other => Err(Error::protocol(Layer::Qsim, format!("unexpected broker reply {other}"))),
        }
    }

    fn read_refs(body: &[u8], n: usize) -> Result<Vec<QubitRef>> {
        let mut r = Reader { buf: body };
        (0..n).map(|_| r.u64().map(QubitRef)).collect()
    }

    pub fn prepare(&mut self, qs: &[(bool, Basis)]) -> Result<Vec<QubitRef>> {
        let mut b = vec![self.party];
        b.extend_from_slice(&(qs.len() as u32).to_le_bytes());
        b.extend(qs.iter().map(|&(x, th)| x as u8 | (th.bit() as u8) << 1));
        let resp = self.call("PREPARE", b)?;
        Self::read_refs(&resp, qs.len())
    }

    pub fn epr(&mut self, n: usize) -> Result<Vec<(QubitRef, QubitRef)>> {
        let mut b = vec![self.party];
        b.extend_from_slice(&(n as u32).to_le_bytes());
        let resp = self.call("EPR", b)?;
        let v = Self::read_refs(&resp, 2 * n)?;
        Ok(v.chunks(2).map(|p| (p[0], p[1])).collect())
    }

    pub fn transmit(&mut self, qs: &[QubitRef], to: PartyId) -> Result<Vec<QubitRef>> {
        let mut b = vec![self.party, to];
        b.extend_from_slice(&(qs.len() as u32).to_le_bytes());
        for q in qs {
            b.extend_from_slice(&q.0.to_le_bytes());
        }
        let resp = self.call("TRANSMIT", b)?;
        Self::read_refs(&resp, qs.len())
    }

    pub fn measure(&mut self, qs: &[(QubitRef, Basis)]) -> Result<Vec<bool>> {
        let mut b = vec![self.party];
        b.extend_from_slice(&(qs.len() as u32).to_le_bytes());
        for (q, th) in qs {
            b.extend_from_slice(&q.0.to_le_bytes());
            b.push(th.bit() as u8);
        }
        let resp = self.call("MEASURE", b)?;
        if resp.len() != qs.len() {
            return Err(Error::Decode("short MEASURE reply".into()));
        }
        Ok(resp.iter().map(|&v| v == 1).collect())
    }
}

/// Executes one request against the broker. Batches are all-or-nothing only
/// in the sense that the first failing element aborts the reply.
fn handle(b: &mut Broker, label: &str, body: &[u8]) -> Result<std::result::Result<Vec<u8>, BrokerError>> {
    let mut r = Reader { buf: body };
    let party = r.u8()?;
    let mut out = Vec::new();
    let res = match label {
        "PREPARE" => {
            let n = r.u32()?;
            for _ in 0..n {
                let v = r.u8()?;
                out.extend_from_slice(&b.prepare(party, v & 1 == 1, Basis::from_bit(v & 2 == 2)).0.to_le_bytes());
            }
            Ok(())
        }
        "EPR" => {
            let n = r.u32()?;
            for _ in 0..n {
                let (x, y) = b.epr_pair(party);
                out.extend_from_slice(&x.0.to_le_bytes());
                out.extend_from_slice(&y.0.to_le_bytes());
            }
            Ok(())
        }
        "TRANSMIT" => {
            let to = r.u8()?;
            let n = r.u32()?;
            let mut res = Ok(());
            for _ in 0..n {
                let q = QubitRef(r.u64()?);
                match b.transmit(party, q, to) {
                    Ok(nq) => out.extend_from_slice(&nq.0.to_le_bytes()),
                    Err(e) => {
                        res = Err(e);
                        break;
                    }
                }
            }
            res
        }
        "MEASURE" => {
            let n = r.u32()?;
            let mut res = Ok(());
            for _ in 0..n {
                let q = QubitRef(r.u64()?);
                let th = Basis::from_bit(r.u8()? == 1);
                match b.measure(party, q, th) {
                    Ok(v) => out.push(v as u8),
                    Err(e) => {
                        res = Err(e);
                        break;
                    }
                }
            }
            res
        }
        _ => Err(BrokerError::Unsupported),
    };
    Ok(res.map(|_| out))
}

fn serve_conn(mut s: TcpStream, broker: Arc<Mutex<Broker>>) -> Result<()> {
    loop {
        let f = match read_tcp_frame(&mut s) {
            Ok(f) => f,
            Err(Error::Closed) => return Ok(()),
            Err(Error::Io(e)) if e.contains("reset") => return Ok(()),
            Err(e) => return Err(e),
        };
        let m = Message::decode(&f.payload)?;
        let reply = {
            let mut b = broker.lock().expect("broker lock");
            handle(&mut b, &m.label, &m.body)?
        };
        let msg = match reply {
            Ok(body) => Message::new(Layer::Qsim, "OK", body),
            Err(e) => Message::new(Layer::Qsim, "ERR", vec![broker_err_code(e)]),
        };
        let out = Frame { session_id: f.session_id, seq: f.seq, kind: FrameKind::Classical, payload: msg.encode() };
        write_tcp_frame(&mut s, &out)?;
    }
}

/// Serves `conns` client connections (one thread each) and returns when all
/// of them have closed. Requests from all clients are serialized on one broker.
pub fn serve(listener: TcpListener, broker: Broker, conns: usize) -> Result<()> {
    let broker = Arc::new(Mutex::new(broker));
    let mut handles = Vec::new();
    for _ in 0..conns {
        let (s, _) = listener.accept()?;
        s.set_nodelay(true)?;
        let b = broker.clone();
        handles.push(std::thread::spawn(move || serve_conn(s, b)));
    }
    for h in handles {
        match h.join() {
            Ok(r) => r?,
            Err(_) => return Err(Error::Io("broker worker panicked".into())),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn same_basis_is_deterministic() {
        let mut b = Broker::new(1);
        for &(x, th) in &[(true, Basis::Plus), (false, Basis::Times), (true, Basis::Times), (false, Basis::Plus)] {
            let q = b.prepare(0, x, th);
            assert_eq!(b.measure(0, q, th).unwrap(), x);
        }
    }

    #[test]
    fn conjugate_basis_is_fair() {
        // Hoeffding at 99%: sqrt(ln(2/0.01) / (2 * 10^4)) ≈ 0.0163 < 0.02
        let mut b = Broker::new(2);
        let n = 10_000;
        let ones = (0..n)
            .filter(|_| {
                let q = b.prepare(0, true, Basis::Plus);
                b.measure(0, q, Basis::Times).unwrap()
            })
            .count();
        let p = ones as f64 / n as f64;
        assert!((p - 0.5).abs() <= 0.02, "p = {p}");
    }

    #[test]
    fn measure_once_and_ownership() {
        let mut b = Broker::new(3);
        let q = b.prepare(0, true, Basis::Plus);
        let q2 = b.transmit(0, q, 1).unwrap();
        assert_eq!(b.measure(0, q, Basis::Plus), Err(BrokerError::Dead));
        assert_eq!(b.transmit(0, q, 1), Err(BrokerError::Dead));
        assert_eq!(b.measure(0, q2, Basis::Plus), Err(BrokerError::NotOwner));
        assert!(b.measure(1, q2, Basis::Plus).unwrap());
        assert_eq!(b.measure(1, q2, Basis::Plus), Err(BrokerError::Dead));
        assert_eq!(b.measure(1, QubitRef(999_999), Basis::Plus), Err(BrokerError::UnknownHandle));
    }

    #[test]
    fn epr_same_basis_agrees() {
        let mut b = Broker::new(4);
        let mut ones = 0;
        let mut seen = std::collections::HashSet::new();
        for i in 0..10_000 {
            let (x, y) = b.epr_pair(0);
            assert!(seen.insert(x.0) && seen.insert(y.0));
            let th = Basis::from_bit(i % 2 == 0);
            let u = b.measure(0, x, th).unwrap();
            assert_eq!(b.measure(0, y, th).unwrap(), u);
            ones += u as usize;
        }
        assert!((ones as f64 / 10_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn epr_cross_basis_is_independent() {
        let mut b = Broker::new(5);
        let mut table = [[0f64; 2]; 2];
        let n = 10_000;
        for _ in 0..n {
            let (x, y) = b.epr_pair(0);
            let u = b.measure(0, x, Basis::Plus).unwrap();
            let v = b.measure(0, y, Basis::Times).unwrap();
            table[u as usize][v as usize] += 1.0;
        }
        let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
        let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
        let mut chi = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let e = rows[i] * cols[j] / n as f64;
                chi += (table[i][j] - e).powi(2) / e;
            }
        }
        let p = 1.0 - ChiSquared::new(1.0).unwrap().cdf(chi);
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn scripted_coins_run_dry() {
        let mut b = Broker::scripted([true]);
        let q = b.prepare(0, false, Basis::Plus);
        assert!(b.measure(0, q, Basis::Times).unwrap());
        let q = b.prepare(0, false, Basis::Plus);
        assert_eq!(b.measure(0, q, Basis::Times), Err(BrokerError::CoinsExhausted));
    }

    #[test]
    fn remote_roundtrip() {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = l.local_addr().unwrap().to_string();
        let srv = std::thread::spawn(move || serve(l, Broker::new(9), 2));
        let mut a = QuantumPort::Remote(RemoteBroker::connect(&addr, 0, [1; 8]).unwrap());
        let mut bob = QuantumPort::Remote(RemoteBroker::connect(&addr, 1, [1; 8]).unwrap());
        let qs = a.prepare(&[(true, Basis::Plus), (false, Basis::Times)]).unwrap();
        let moved = a.transmit(&qs, 1).unwrap();
        assert!(a.measure(&[(moved[0], Basis::Plus)]).is_err());
        let got = bob.measure(&[(moved[0], Basis::Plus), (moved[1], Basis::Times)]).unwrap();
        assert_eq!(got, vec![true, false]);
        let pairs = a.epr(3).unwrap();
        assert_eq!(pairs.len(), 3);
        drop(a);
        drop(bob);
        srv.join().unwrap().unwrap();
    }
}
