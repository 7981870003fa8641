//! Per-party execution context threaded through every protocol layer.

use std::any::Any;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Layer, Result};
use crate::ideal::IdealHub;
use crate::qsim::QuantumPort;
use crate::transport::Channel;

/// Adversary override for one named protocol step. It receives the value the
/// honest code is about to use and may rewrite it in place.
pub type HookFn = Box<dyn FnMut(&mut dyn Any, &mut ChaCha20Rng) -> std::result::Result<(), String>>;

#[derive(Default)]
pub struct Hooks {
    map: HashMap<&'static str, HookFn>,
}

impl Hooks {
    pub fn set(&mut self, name: &'static str, f: HookFn) {
        self.map.insert(name, f);
    }

    /// Convenience for hooks that only care about one concrete type.
    pub fn on<T: Any>(&mut self, name: &'static str, mut f: impl FnMut(&mut T, &mut ChaCha20Rng) + 'static) {
        self.set(
            name,
            Box::new(move |v, rng| match v.downcast_mut::<T>() {
                Some(t) => {
                    f(t, rng);
                    Ok(())
                }
                None => Err(format!("hook {name}: unexpected value type")),
            }),
        );
    }

    pub fn has(&self, name: &str) -> bool {
        self.map.contains_key(name)
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut v: Vec<_> = self.map.keys().copied().collect();
        v.sort();
        v
    }
}

/// How a ZK verifier picks its per-round challenge.
#[derive(Clone, Default)]
pub enum ChallengeSource {
    #[default]
    Random,
    /// challenge = H(key, round, commit message), so a rewinding simulator can
    /// query the same verifier again.
    Keyed([u8; 32]),
    Hook(ChallengeOracle),
}

impl fmt::Debug for ChallengeSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChallengeSource::Random => f.write_str("Random"),
            ChallengeSource::Keyed(_) => f.write_str("Keyed"),
            ChallengeSource::Hook(_) => f.write_str("Hook"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SoComBackend {
    Ideal,
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotBackend {
    Ideal,
    Real,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OuterBackend {
    Ideal,
    Plain,
    Ecom,
}

/// Which layers run as ideal functionalities. Anything ideal needs a hub.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Backends {
    pub zk_ideal: bool,
    /// so-com used by the inner (label-transfer) OTs.
    pub socom: SoComBackend,
    pub pot: PotBackend,
    pub cds_ideal: bool,
    /// so-com used by the outer OT.
    pub outer: OuterBackend,
}

impl Backends {
    pub fn real() -> Backends {
        Backends {
            zk_ideal: false,
            socom: SoComBackend::Plain,
            pot: PotBackend::Real,
            cds_ideal: false,
            outer: OuterBackend::Ecom,
        }
    }

    pub fn ideal() -> Backends {
        Backends {
            zk_ideal: true,
            socom: SoComBackend::Ideal,
            pot: PotBackend::Ideal,
            cds_ideal: true,
            outer: OuterBackend::Ideal,
        }
    }

    pub fn needs_hub(&self) -> bool {
        self.zk_ideal
            || self.socom == SoComBackend::Ideal
            || self.pot == PotBackend::Ideal
            || self.cds_ideal
            || self.outer == OuterBackend::Ideal
    }
}

impl Default for Backends {
    fn default() -> Self {
        Backends::real()
    }
}

/// Replayable verifier challenge: (round, commit message) to a trit.
pub type ChallengeOracle = Rc<dyn Fn(usize, &[u8]) -> u8>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Oracle {
    SoCom,
    Pot,
    Zk,
    Cds,
}

pub struct Ctx {
    /// 0 or 1; fixed for the whole tower regardless of role in sub-protocols.
    pub party: usize,
    pub ch: Channel,
    pub rng: ChaCha20Rng,
    pub q: QuantumPort,
    pub hub: Option<Rc<IdealHub>>,
    pub hooks: Hooks,
    pub backends: Backends,
    pub lambda: usize,
    pub zk_rounds: usize,
    pub challenge: ChallengeSource,
    /// Qubits per inner OT instance and the check fraction α shared by every BBCS layer.
    pub inner_n: usize,
    pub alpha: f64,
    pub qmode: crate::bbcs::QMode,
    oracle_idx: HashMap<Oracle, usize>,
    oracle_seq: u64,
}

impl Ctx {
    pub fn new(party: usize, ch: Channel, seed: u64, q: QuantumPort, lambda: usize, zk_rounds: usize) -> Ctx {
        let mut s = [0u8; 32];
        s[..8].copy_from_slice(&seed.to_le_bytes());
        s[8] = party as u8;
        s[9] = 0xC7;
        Ctx {
            party,
            ch,
            rng: ChaCha20Rng::from_seed(s),
            q,
            hub: None,
            hooks: Hooks::default(),
            backends: Backends::real(),
            lambda,
            zk_rounds,
            challenge: ChallengeSource::Random,
            inner_n: 8 * lambda,
            alpha: 0.375,
            qmode: crate::bbcs::QMode::Prepare,
            oracle_idx: HashMap::new(),
            oracle_seq: 0,
        }
    }

    pub fn with_hub(mut self, hub: Rc<IdealHub>) -> Ctx {
        self.hub = Some(hub);
        self
    }

    pub fn with_backends(mut self, b: Backends) -> Ctx {
        self.backends = b;
        self
    }

    /// Runs the hook registered for `name`, if any. A failing hook is a
    /// strategy crash, not a protocol outcome.
    pub fn hook<T: Any>(&mut self, name: &'static str, v: &mut T) -> Result<()> {
        if let Some(f) = self.hooks.map.get_mut(name) {
            f(v as &mut dyn Any, &mut self.rng).map_err(Error::Strategy)?;
        }
        Ok(())
    }

    pub fn hub(&self) -> Result<Rc<IdealHub>> {
        self.hub.clone().ok_or_else(|| Error::Precondition("ideal backend selected without a hub".into()))
    }

    /// Index the next call to `o` will get, without consuming it.
    pub fn next_oracle_index(&self, o: Oracle) -> usize {
        self.oracle_idx.get(&o).copied().unwrap_or(0)
    }

    /// Next invocation index of an ideal functionality, logged as an oracle entry.
    pub fn oracle_call(&mut self, o: Oracle, layer: Layer, label: &str) -> usize {
        let e = self.oracle_idx.entry(o).or_insert(0);
        let idx = *e;
        *e += 1;
        let seq = self.oracle_seq;
        self.oracle_seq += 1;
        self.ch.log_oracle(layer, label, seq, (idx as u32).to_le_bytes().to_vec());
        idx
    }

    pub fn send(&mut self, layer: Layer, label: &str, body: Vec<u8>) -> Result<()> {
        self.ch.send(layer, label, body)
    }

    pub async fn recv(&mut self, layer: Layer, label: &str) -> Result<Vec<u8>> {
        self.ch.recv(layer, label).await
    }

    /// Reports a local failure to the peer (channel ABORT and hub flag).
    /// Peer aborts and strategy crashes are not echoed back.
    pub fn report(&mut self, e: &Error) {
        if matches!(e, Error::PeerAbort { .. } | Error::Closed) {
            return;
        }
        let layer = e.layer().unwrap_or(Layer::Stack);
        let reason = e.to_string();
        self.ch.send_abort(layer, &reason);
        if let Some(h) = &self.hub {
            h.note_abort(self.party, layer, &reason);
        }
    }
}

/// Awaits a protocol step and reports any local error to the peer.
pub async fn guarded<T>(ctx: &mut Ctx, f: impl AsyncFnOnce(&mut Ctx) -> Result<T>) -> Result<T> {
    let r = f(ctx).await;
    if let Err(e) = &r {
        ctx.report(e);
    }
    r
}

/// Two in-process parties sharing a link, a broker and an ideal hub.
pub struct LocalPair {
    pub a: Ctx,
    pub b: Ctx,
    pub progress: Rc<std::cell::Cell<u64>>,
    pub link: Rc<crate::transport::Link>,
    pub broker: Rc<std::cell::RefCell<crate::qsim::Broker>>,
    pub hub: Rc<IdealHub>,
}

/// Session id both parties derive from the shared seed.
pub fn session_id(seed: u64) -> [u8; 8] {
    crate::primitives::prg::sha256(&[b"session", &seed.to_le_bytes()])[..8].try_into().expect("8 bytes")
}

/// Broker seed paired with a session seed.
pub fn broker_seed(seed: u64) -> u64 {
    seed ^ 0xB0B0_B0B0
}

pub fn local_pair(seed: u64, lambda: usize, zk_rounds: usize, backends: Backends) -> LocalPair {
    let session = session_id(seed);
    let (c0, c1, link, progress) = crate::transport::inproc_pair(session);
    let broker = Rc::new(std::cell::RefCell::new(crate::qsim::Broker::new(broker_seed(seed))));
    let hub = IdealHub::new(progress.clone());
    let mk = |party: usize, ch| {
        Ctx::new(party, ch, seed, QuantumPort::local(&broker, party as u8), lambda, zk_rounds)
            .with_hub(hub.clone())
            .with_backends(backends)
    };
    let a = mk(0, c0);
    let b = mk(1, c1);
    LocalPair { a, b, progress, link, broker, hub }
}
