//! Static-corruption strategies expressed as step hooks, and a seeded
//! Monte-Carlo driver that tallies what each trial ended in.

use std::collections::BTreeMap;
use std::rc::Rc;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::bbcs::{self, PotImpl, QMode, QotParams};
use crate::cds::{self, CdsErr, CdsStatement};
use crate::ecom;
use crate::error::{Error, Layer, Result};
use crate::primitives::bits::BitString;
use crate::primitives::circuit::CircuitBuilder;
use crate::primitives::naor::Naor;
use crate::session::{guarded, local_pair, Backends, ChallengeOracle, ChallengeSource, Ctx, Hooks};
use crate::socom::SoComKind;
use crate::transport::run_pair;
use crate::zk::engine::ViewTamper;
use crate::zk::protocol::{self, keyed_challenge, RoundHook};
use crate::zk::statement::{Seg, Statement};

/// Harness-level step: the witness the ZK trial's prover is about to use.
pub const ZK_WITNESS_HOOK: &str = "harness.zk-witness";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Corruption {
    Sender,
    Receiver,
    Committer,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Abort(String),
    /// Both parties finished but the honest party's output is wrong.
    Mismatch,
    StrategyCrash,
}

/// A protocol under attack, with its parameters. The corrupted party always
/// plays the first role named (sender, prover or committer) unless the
/// strategy says receiver.
#[derive(Clone, Debug)]
pub enum Protocol {
    /// One BBCS OT over the given so-com.
    Qot { params: QotParams, kind: SoComKind, lambda: usize, zk_rounds: usize, backends: Backends },
    /// CDS for L_com with a receiver holding a valid witness.
    Cds { lambda: usize, zk_rounds: usize, mu_len: usize, backends: Backends },
    /// ZK for "w_0 ∧ w_1 = 1"; the honest prover holds w = 11.
    Zk { lambda: usize, rounds: usize },
    /// ecom commit of `k` messages, then a random nonempty opening. With
    /// `extractor`, the receiver runs the extractor and compares.
    Ecom { lambda: usize, zk_rounds: usize, k: usize, msg_len: usize, backends: Backends, extractor: bool },
}

impl Protocol {
    pub fn layer(&self) -> Layer {
        match self {
            Protocol::Qot { .. } => Layer::Bbcs,
            Protocol::Cds { .. } => Layer::Cds,
            Protocol::Zk { .. } => Layer::Zk,
            Protocol::Ecom { .. } => Layer::Ecom,
        }
    }
}

#[derive(Clone)]
pub struct Strategy {
    pub name: String,
    /// `None` matches every protocol (the honest control).
    pub layer: Option<Layer>,
    pub corruption: Corruption,
    install: Rc<dyn Fn(&mut Hooks)>,
}

impl std::fmt::Debug for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Strategy").field("name", &self.name).field("layer", &self.layer).field("corruption", &self.corruption).finish()
    }
}

impl Strategy {
    pub fn new(name: &str, layer: Option<Layer>, corruption: Corruption, install: impl Fn(&mut Hooks) + 'static) -> Strategy {
        Strategy { name: name.into(), layer, corruption, install: Rc::new(install) }
    }

    pub fn honest() -> Strategy {
        Strategy::new("honest", None, Corruption::Sender, |_| {})
    }

    /// Receiver that skips measuring and commits random (basis, value) records.
    pub fn guess_committing_receiver() -> Strategy {
        Strategy::new("guess-committing-receiver", Some(Layer::Bbcs), Corruption::Receiver, |h| {
            h.on::<Vec<BitString>>("bbcs.commit-bases", |recs, rng| {
                for r in recs.iter_mut() {
                    *r = BitString::random(rng, r.len());
                }
            })
        })
    }

    /// CDS sender whose OT strings for slot 0 are wrong (both sides) in the
    /// first `count` instances.
    pub fn cds_bad_instances(lambda: usize, count: usize) -> Strategy {
        Strategy::new("cds-bad-instances", Some(Layer::Cds), Corruption::Sender, move |h| {
            h.on::<Vec<[BitString; 2]>>("cds.ot-inputs", move |v, _| {
                let m = v.len() / (2 * lambda);
                for i in 0..count {
                    v[i * m][0].flip(0);
                    v[i * m][1].flip(0);
                }
            })
        })
    }

    /// CDS sender that corrupts only the label for w_1 = 1 in instance 0.
    pub fn cds_single_bad_label() -> Strategy {
        Strategy::new("cds-single-bad-label", Some(Layer::Cds), Corruption::Sender, |h| {
            h.on::<Vec<[BitString; 2]>>("cds.ot-inputs", |v, _| v[0][1].flip(0))
        })
    }

    /// Prover without a witness that fakes one party's last AND output so the
    /// statement appears to hold; caught only when that party is opened.
    pub fn zk_cheater() -> Strategy {
        Strategy::new("zk-cheater", Some(Layer::Zk), Corruption::Sender, |h| {
            h.on::<BitString>(ZK_WITNESS_HOOK, |w, _| *w = BitString::zeros(w.len()));
            h.on::<RoundHook>("zk.views", |r, rng| {
                let party = rng.gen_range(0..3);
                r.tamper = ViewTamper { flip: Some((party, r.and_words - 1, 1)) };
            })
        })
    }

    /// Committer that reveals a different first message than it committed
    /// and proves with the honest algorithm.
    pub fn equivocating_committer() -> Strategy {
        Strategy::new("equivocating-committer", Some(Layer::Ecom), Corruption::Committer, |h| {
            h.on::<Vec<BitString>>("ecom.reveal", |v, _| {
                if let Some(m) = v.first_mut() {
                    m.flip(0);
                }
            })
        })
    }

    /// A hook expecting the wrong value type; every trial is a strategy crash.
    pub fn broken() -> Strategy {
        Strategy::new("broken", None, Corruption::Sender, |h| h.on::<u8>("bbcs.transfer", |_, _| {}))
    }

    /// Installs the hooks on the corrupted party of (sender, receiver).
    pub fn install(&self, a: &mut Ctx, b: &mut Ctx) {
        let target = match self.corruption {
            Corruption::Receiver => b,
            Corruption::Sender | Corruption::Committer => a,
        };
        (self.install)(&mut target.hooks);
    }
}

/// Tally of trial outcomes, plus aborts split by the first bit of the honest
/// receiver's input (choice bit or witness bit) for independence tests.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Histogram {
    pub strategy: String,
    pub trials: u64,
    pub success: u64,
    pub mismatch: u64,
    pub crash: u64,
    pub aborts: BTreeMap<String, u64>,
    /// `[input bit][aborted]`
    pub abort_by_input: [[u64; 2]; 2],
}

impl Histogram {
    pub fn aborted(&self) -> u64 {
        self.aborts.values().sum()
    }

    /// Trials that completed without any abort.
    pub fn completed(&self) -> u64 {
        self.success + self.mismatch
    }

    fn record(&mut self, o: &Outcome, input_bit: bool) {
        self.trials += 1;
        let aborted = matches!(o, Outcome::Abort(_));
        self.abort_by_input[input_bit as usize][aborted as usize] += 1;
        match o {
            Outcome::Success => self.success += 1,
            Outcome::Mismatch => self.mismatch += 1,
            Outcome::StrategyCrash => self.crash += 1,
            Outcome::Abort(k) => *self.aborts.entry(k.clone()).or_default() += 1,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

fn abort_key(e: &Error) -> String {
    match CdsErr::of(e) {
        Some(CdsErr::Err1) => "err1".into(),
        Some(CdsErr::Err2) => "err2".into(),
        None => e.layer().map_or_else(|| e.to_string(), |l| l.name().to_string()),
    }
}

/// Local aborts take precedence over the peer's echo; a crashed strategy
/// trumps both.
fn classify(errs: [Option<&Error>; 2]) -> Option<Outcome> {
    if errs.iter().flatten().any(|e| matches!(e, Error::Strategy(_))) {
        return Some(Outcome::StrategyCrash);
    }
    let e = errs.iter().flatten().find(|e| !matches!(e, Error::PeerAbort { .. })).or(errs.iter().flatten().next())?;
    Some(Outcome::Abort(abort_key(e)))
}

fn one_and_statement() -> Statement {
    let mut cb = CircuitBuilder::new(2);
    let (x, y) = (cb.input(0), cb.input(1));
    let o = cb.and(x, y);
    let c = Arc::new(cb.finish(&[o]));
    let mut st = Statement::new(2);
    st.push(&c, vec![Seg::wit(0, 2)]).expect("well-formed");
    st
}

/// One seeded trial. Returns the outcome and the honest receiver's first input bit.
pub fn trial(p: &Protocol, s: &Strategy, seed: u64) -> Result<(Outcome, bool)> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x7A1A_15EE_D000_0000);
    match p {
        Protocol::Qot { params, kind, lambda, zk_rounds, backends } => {
            let mut pr = local_pair(seed, *lambda, *zk_rounds, *backends);
            s.install(&mut pr.a, &mut pr.b);
            let (s0, s1) = (BitString::random(&mut rng, params.ell), BitString::random(&mut rng, params.ell));
            let c: bool = rng.gen();
            let want = if c { s1.clone() } else { s0.clone() };
            let (how, (a, b)) = (PotImpl::Real(*kind), (&mut pr.a, &mut pr.b));
            let fa = guarded(a, async |x: &mut Ctx| bbcs::qot_send(x, params, how, QMode::Prepare, s0, s1).await);
            let fb = guarded(b, async |x: &mut Ctx| bbcs::qot_receive(x, params, how, c).await);
            let (ra, rb) = run_pair(&pr.progress, fa, fb)?;
            let o = classify([ra.as_ref().err(), rb.as_ref().err()]).unwrap_or_else(|| {
                if rb.as_ref().ok() == Some(&want) { Outcome::Success } else { Outcome::Mismatch }
            });
            Ok((o, c))
        }
        Protocol::Cds { lambda, zk_rounds, mu_len, backends } => {
            let l = *lambda;
            let naor = Naor::circuit(l)?;
            let rho = BitString::random(&mut rng, 3 * l);
            let (w, b) = (BitString::random(&mut rng, l), rng.gen());
            let x = CdsStatement { c: naor.commit_bit(&rho, b, &w)?, rho, b };
            let mu = BitString::random(&mut rng, *mu_len);
            let mut pr = local_pair(seed, l, *zk_rounds, *backends);
            s.install(&mut pr.a, &mut pr.b);
            let (a, bb) = (&mut pr.a, &mut pr.b);
            let fa = guarded(a, async |c: &mut Ctx| cds::send(c, &x, &mu).await);
            let fb = guarded(bb, async |c: &mut Ctx| cds::receive(c, &w, *mu_len).await);
            let (ra, rb) = run_pair(&pr.progress, fa, fb)?;
            let o = classify([ra.as_ref().err(), rb.as_ref().err()]).unwrap_or_else(|| {
                if rb.as_ref().ok().and_then(|r| r.mu.as_ref()) == Some(&mu) { Outcome::Success } else { Outcome::Mismatch }
            });
            Ok((o, w.get(0)))
        }
        Protocol::Zk { lambda, rounds } => {
            let st = one_and_statement();
            let rho = BitString::random(&mut rng, 3 * lambda);
            let mut pr = local_pair(seed, *lambda, *rounds, Backends::real());
            s.install(&mut pr.a, &mut pr.b);
            let (a, b) = (&mut pr.a, &mut pr.b);
            let fa = guarded(a, async |c: &mut Ctx| {
                let mut w = BitString::ones(2);
                c.hook(ZK_WITNESS_HOOK, &mut w)?;
                protocol::prove(c, &st, &w, &rho).await
            });
            let fb = guarded(b, async |c: &mut Ctx| protocol::verify_or_abort(c, &st, &rho, "trial").await);
            let (ra, rb) = run_pair(&pr.progress, fa, fb)?;
            Ok((classify([ra.as_ref().err(), rb.as_ref().err()]).unwrap_or(Outcome::Success), false))
        }
        Protocol::Ecom { lambda, zk_rounds, k, msg_len, backends, extractor } => {
            let msgs: Vec<BitString> = (0..*k).map(|_| BitString::random(&mut rng, *msg_len)).collect();
            let mut subset: Vec<usize> = (0..*k).filter(|_| rng.gen()).collect();
            if subset.is_empty() {
                subset.push(rng.gen_range(0..*k));
            }
            let mut pr = local_pair(seed, *lambda, *zk_rounds, *backends);
            s.install(&mut pr.a, &mut pr.b);
            let key: [u8; 32] = rng.gen();
            let oracle: ChallengeOracle = Rc::new(move |r, c| keyed_challenge(&key, r, c));
            if *extractor {
                pr.a.challenge = ChallengeSource::Keyed(key);
            }
            let (a, b) = (&mut pr.a, &mut pr.b);
            let mc = msgs.clone();
            let fa = guarded(a, async |c: &mut Ctx| {
                let st = ecom::commit(c, mc).await?;
                ecom::open(c, &st, None).await
            });
            let (kk, ml, sub, ext) = (*k, *msg_len, subset.clone(), *extractor);
            let fb = guarded(b, async |c: &mut Ctx| {
                let st = if ext { ecom::extract(c, kk, ml, oracle).await? } else { ecom::receive(c, kk, ml).await? };
                let opened = ecom::receive_open(c, &st, &sub).await?;
                Ok((st.extracted(), opened))
            });
            let (ra, rb) = run_pair(&pr.progress, fa, fb)?;
            let o = classify([ra.as_ref().err(), rb.as_ref().err()]).unwrap_or_else(|| {
                let (extracted, opened) = rb.as_ref().expect("no error");
                let reference = if *extractor { extracted.clone().unwrap_or_default() } else { msgs.clone() };
                let agree = reference.len() == *k && subset.iter().zip(opened).all(|(&i, m)| reference[i] == *m);
                if agree { Outcome::Success } else { Outcome::Mismatch }
            });
            Ok((o, false))
        }
    }
}

/// Runs `n` independent seeded trials of `p` under strategy `s`.
pub fn run_adversarial(p: &Protocol, s: &Strategy, n: u64, seed: u64) -> Result<Histogram> {
    if s.layer.is_some_and(|l| l != p.layer()) {
        return Err(Error::Precondition(format!("strategy {} targets {}, protocol is {}", s.name, s.layer.unwrap(), p.layer())));
    }
    let mut h = Histogram { strategy: s.name.clone(), ..Histogram::default() };
    for i in 0..n {
        let (o, bit) = trial(p, s, seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i))?;
        h.record(&o, bit);
    }
    Ok(h)
}
