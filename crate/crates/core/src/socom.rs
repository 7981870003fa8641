//! Selective-opening commitments: commit to k messages, later open a subset
//! chosen by the receiver.
//!
//! Three interchangeable backends sit behind [`Committer`] and [`Receiver`]:
//! the ideal functionality on the hub, the plain Naor-and-ZK protocol, and the
//! extractable scheme from [`crate::ecom`].


use rand::RngCore;

use crate::ecom;
use crate::error::{Error, Layer, Result};
use crate::primitives::bits::BitString;
use crate::primitives::naor::Naor;
use crate::session::{ChallengeOracle, Ctx, Oracle};
use crate::transport::codec::{Dec, Enc};
use crate::zk::compile::SoComConsistency;
use crate::zk::protocol;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SoComKind {
    Ideal,
    Plain,
    Ecom,
}

/// Naor commitments to each message, one fresh seed per message.
pub fn commit_values(lambda: usize, rho: &BitString, msgs: &[BitString], rng: &mut dyn RngCore) -> Result<(Vec<BitString>, Vec<BitString>)> {
    let naor = Naor::circuit(lambda)?;
    let mut seeds = Vec::with_capacity(msgs.len());
    let mut commits = Vec::with_capacity(msgs.len());
    for m in msgs {
        let r = BitString::random(rng, lambda);
        commits.push(naor.commit(rho, m, &r)?);
        seeds.push(r);
    }
    Ok((seeds, commits))
}

pub fn encode_commits(msg_len: usize, commits: &[BitString]) -> Vec<u8> {
    let mut all = BitString::zeros(0);
    for c in commits {
        all.append(c);
    }
    Enc::new().u32(commits.len() as u32).u32(msg_len as u32).bits(&all).done()
}

pub fn decode_commits(lambda: usize, body: &[u8]) -> Result<(usize, Vec<BitString>)> {
    let mut d = Dec::new(body);
    let k = d.u32()? as usize;
    let msg_len = d.u32()? as usize;
    let each = 3 * lambda * msg_len;
    let all = d.bits_len(k.checked_mul(each).ok_or_else(|| Error::Decode("commitment size overflow".into()))?)?;
    d.finish()?;
    Ok((msg_len, (0..k).map(|i| all.slice(i * each, each)).collect()))
}

/// Opening subsets must be duplicate-free and in range.
pub fn check_subset(subset: &[usize], k: usize) -> Result<()> {
    let mut seen = vec![false; k];
    for &i in subset {
        if i >= k || seen[i] {
            return Err(Error::abort(Layer::SoCom, format!("bad opening index {i}")));
        }
        seen[i] = true;
    }
    Ok(())
}

pub fn encode_reveal(msgs: &[BitString]) -> Vec<u8> {
    Enc::new().bits_vec(msgs).done()
}

pub fn decode_reveal(body: &[u8], count: usize, msg_len: usize) -> Result<Vec<BitString>> {
    let mut d = Dec::new(body);
    let v = d.bits_vec()?;
    d.finish()?;
    if v.len() != count || v.iter().any(|m| m.len() != msg_len) {
        return Err(Error::abort(Layer::SoCom, "revealed messages have the wrong shape"));
    }
    Ok(v)
}

/// Plain committer state after the commit phase.
#[derive(Clone, Debug)]
pub struct PlainCommit {
    pub rho: BitString,
    pub msgs: Vec<BitString>,
    pub seeds: Vec<BitString>,
    pub commits: Vec<BitString>,
}

enum CState {
    Fresh,
    Ideal { idx: usize },
    Plain(PlainCommit),
    Ecom(Box<ecom::CommitterState>),
    Opened,
}

/// Messages the committer will claim at opening time, proved with the
/// rewinding simulator instead of a witness.
pub struct Equivocation {
    pub claimed: Vec<BitString>,
    pub oracle: ChallengeOracle,
}

pub struct Committer {
    kind: SoComKind,
    state: CState,
    pub equivocation: Option<Equivocation>,
}

impl Committer {
    pub fn new(kind: SoComKind) -> Committer {
        Committer { kind, state: CState::Fresh, equivocation: None }
    }

    pub fn plain_state(&self) -> Option<&PlainCommit> {
        match &self.state {
            CState::Plain(p) => Some(p),
            _ => None,
        }
    }

    pub fn ecom_state(&self) -> Option<&ecom::CommitterState> {
        match &self.state {
            CState::Ecom(e) => Some(e),
            _ => None,
        }
    }

    pub async fn commit(&mut self, ctx: &mut Ctx, msgs: Vec<BitString>) -> Result<()> {
        if !matches!(self.state, CState::Fresh) {
            return Err(Error::protocol(Layer::SoCom, "duplicate commit"));
        }
        self.state = match self.kind {
            SoComKind::Ideal => {
                ctx.ch.begin(Layer::SoCom);
                let idx = ctx.oracle_call(Oracle::SoCom, Layer::SoCom, "COMMIT");
                ctx.hub()?.socom_commit(idx, msgs)?;
                ctx.ch.end(Layer::SoCom);
                CState::Ideal { idx }
            }
            SoComKind::Plain => {
                ctx.ch.begin(Layer::SoCom);
                let body = ctx.recv(Layer::SoCom, "RHO").await?;
                let mut d = Dec::new(&body);
                let rho = d.bits_len(3 * ctx.lambda)?;
                d.finish()?;
                let msg_len = msgs.first().map_or(0, BitString::len);
                if msgs.iter().any(|m| m.len() != msg_len) {
                    return Err(Error::Precondition("messages must share one length".into()));
                }
                let (seeds, commits) = commit_values(ctx.lambda, &rho, &msgs, &mut ctx.rng)?;
                ctx.send(Layer::SoCom, "COMMITS", encode_commits(msg_len, &commits))?;
                ctx.ch.end(Layer::SoCom);
                CState::Plain(PlainCommit { rho, msgs, seeds, commits })
            }
            SoComKind::Ecom => CState::Ecom(Box::new(Box::pin(ecom::commit(ctx, msgs)).await?)),
        };
        Ok(())
    }

    /// Waits for the receiver's subset, reveals and proves. Returns the subset.
    pub async fn open(&mut self, ctx: &mut Ctx) -> Result<Vec<usize>> {
        match std::mem::replace(&mut self.state, CState::Opened) {
            CState::Fresh => Err(Error::protocol(Layer::SoCom, "open before commit")),
            CState::Opened => Err(Error::protocol(Layer::SoCom, "second opening")),
            CState::Ideal { idx, .. } => {
                ctx.ch.begin(Layer::SoCom);
                let hub = ctx.hub()?;
                ctx.oracle_call(Oracle::SoCom, Layer::SoCom, "CHOICE");
                let subset = hub.socom_choice(ctx.party, idx).await?;
                ctx.oracle_call(Oracle::SoCom, Layer::SoCom, "REVEAL");
                hub.socom_reveal(idx)?;
                ctx.ch.end(Layer::SoCom);
                Ok(subset)
            }
            CState::Plain(p) => {
                ctx.ch.begin(Layer::SoCom);
                let subset = self.open_plain(ctx, &p).await?;
                ctx.ch.end(Layer::SoCom);
                Ok(subset)
            }
            CState::Ecom(e) => Box::pin(ecom::open(ctx, &e, self.equivocation.as_ref())).await,
        }
    }

    async fn open_plain(&mut self, ctx: &mut Ctx, p: &PlainCommit) -> Result<Vec<usize>> {
        let body = ctx.recv(Layer::SoCom, "OPEN_REQUEST").await?;
        let mut d = Dec::new(&body);
        let subset = d.indices()?;
        d.finish()?;
        check_subset(&subset, p.msgs.len())?;
        let source = self.equivocation.as_ref().map_or(&p.msgs, |e| &e.claimed);
        let mut reveal: Vec<BitString> = subset.iter().map(|&i| source[i].clone()).collect();
        ctx.hook("socom.reveal", &mut reveal)?;
        ctx.send(Layer::SoCom, "OPEN_REVEAL", encode_reveal(&reveal))?;
        let opened: Vec<(usize, BitString)> = subset.iter().copied().zip(reveal).collect();
        let msg_len = p.msgs.first().map_or(0, BitString::len);
        let sc = SoComConsistency { lambda: ctx.lambda, rho: &p.rho, commits: &p.commits, msg_len, opened: &opened };
        let st = sc.statement()?;
        match &self.equivocation {
            Some(e) => protocol::prove_simulated(ctx, &st, &p.rho, &*e.oracle.clone()).await?,
            None => protocol::prove(ctx, &st, &sc.witness(&p.seeds, &p.msgs)?, &p.rho).await?,
        }
        Ok(subset)
    }
}

enum RState {
    Fresh,
    Ideal { idx: usize },
    Plain { rho: BitString, commits: Vec<BitString> },
    Ecom(Box<ecom::ReceiverState>),
    Opened,
}

pub struct Receiver {
    kind: SoComKind,
    state: RState,
    k: usize,
    msg_len: usize,
}

impl Receiver {
    pub fn new(kind: SoComKind) -> Receiver {
        Receiver { kind, state: RState::Fresh, k: 0, msg_len: 0 }
    }

    pub fn commits(&self) -> Option<(&BitString, &[BitString])> {
        match &self.state {
            RState::Plain { rho, commits } => Some((rho, commits)),
            _ => None,
        }
    }

    pub fn ecom_state(&self) -> Option<&ecom::ReceiverState> {
        match &self.state {
            RState::Ecom(e) => Some(e),
            _ => None,
        }
    }

    /// Commit phase on the receiving side; expects k messages of `msg_len` bits.
    pub async fn receive(&mut self, ctx: &mut Ctx, k: usize, msg_len: usize) -> Result<()> {
        if !matches!(self.state, RState::Fresh) {
            return Err(Error::protocol(Layer::SoCom, "duplicate commit"));
        }
        self.k = k;
        self.msg_len = msg_len;
        self.state = match self.kind {
            SoComKind::Ideal => {
                ctx.ch.begin(Layer::SoCom);
                let idx = ctx.oracle_call(Oracle::SoCom, Layer::SoCom, "RECEIPT");
                let lens = ctx.hub()?.socom_receipt(ctx.party, idx).await?;
                ctx.ch.end(Layer::SoCom);
                if lens.len() != k || lens.iter().any(|&l| l != msg_len) {
                    return Err(Error::abort(Layer::SoCom, "receipt does not match the expected shape"));
                }
                RState::Ideal { idx }
            }
            SoComKind::Plain => {
                ctx.ch.begin(Layer::SoCom);
                let rho = BitString::random(&mut ctx.rng, 3 * ctx.lambda);
                ctx.send(Layer::SoCom, "RHO", Enc::new().bits(&rho).done())?;
                let body = ctx.recv(Layer::SoCom, "COMMITS").await?;
                ctx.ch.end(Layer::SoCom);
                let (ml, commits) = decode_commits(ctx.lambda, &body)?;
                if commits.len() != k || ml != msg_len {
                    return Err(Error::abort(Layer::SoCom, "commitments do not match the expected shape"));
                }
                RState::Plain { rho, commits }
            }
            SoComKind::Ecom => RState::Ecom(Box::new(Box::pin(ecom::receive(ctx, k, msg_len)).await?)),
        };
        Ok(())
    }

    /// Requests `subset` and returns the messages in subset order.
    pub async fn open(&mut self, ctx: &mut Ctx, subset: &[usize]) -> Result<Vec<BitString>> {
        check_subset(subset, self.k).map_err(|_| Error::Precondition("opening index out of range".into()))?;
        match std::mem::replace(&mut self.state, RState::Opened) {
            RState::Fresh => Err(Error::protocol(Layer::SoCom, "open before commit")),
            RState::Opened => Err(Error::protocol(Layer::SoCom, "second opening")),
            RState::Ideal { idx } => {
                ctx.ch.begin(Layer::SoCom);
                let hub = ctx.hub()?;
                ctx.oracle_call(Oracle::SoCom, Layer::SoCom, "CHOOSE");
                hub.socom_choose(idx, subset.to_vec())?;
                ctx.oracle_call(Oracle::SoCom, Layer::SoCom, "OPEN");
                let m = hub.socom_open(ctx.party, idx).await?;
                ctx.ch.end(Layer::SoCom);
                Ok(m)
            }
            RState::Plain { rho, commits } => {
                ctx.ch.begin(Layer::SoCom);
                ctx.send(Layer::SoCom, "OPEN_REQUEST", Enc::new().indices(subset).done())?;
                let body = ctx.recv(Layer::SoCom, "OPEN_REVEAL").await?;
                let msgs = decode_reveal(&body, subset.len(), self.msg_len)?;
                let opened: Vec<(usize, BitString)> = subset.iter().copied().zip(msgs.iter().cloned()).collect();
                let sc = SoComConsistency { lambda: ctx.lambda, rho: &rho, commits: &commits, msg_len: self.msg_len, opened: &opened };
                protocol::verify_or_abort(ctx, &sc.statement()?, &rho, "selective opening").await?;
                ctx.ch.end(Layer::SoCom);
                Ok(msgs)
            }
            RState::Ecom(e) => Box::pin(ecom::receive_open(ctx, &e, subset)).await,
        }
    }
}

/// Per-index result of exhaustive seed search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Extracted {
    Unique(BitString),
    Ambiguous,
    NoOpening,
}

/// Finds every message a commitment can be opened to by trying all 2^λ seeds.
pub fn brute_force_open(naor: &Naor, rho: &BitString, c: &BitString, msg_len: usize) -> Result<Extracted> {
    let l = naor.lambda();
    if l > 16 {
        return Err(Error::Precondition("brute force needs lambda <= 16".into()));
    }
    let b = 3 * l;
    if c.len() != b * msg_len {
        return Err(Error::Length("commitment length".into()));
    }
    let mut found: Option<BitString> = None;
    for s in 0..(1u64 << l) {
        let g = naor.stream(&BitString::from_u64(s, l), msg_len)?;
        let mut m = BitString::zeros(msg_len);
        let mut ok = true;
        for k in 0..msg_len {
            let d = g.slice(b * k, b).xor(&c.slice(b * k, b));
            if d.is_zero() {
                continue;
            }
            if &d == rho {
                m.set(k, true);
            } else {
                ok = false;
                break;
            }
        }
        if ok {
            match &found {
                Some(f) if *f != m => return Ok(Extracted::Ambiguous),
                Some(_) => {}
                None => found = Some(m),
            }
        }
    }
    Ok(found.map_or(Extracted::NoOpening, Extracted::Unique))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{guarded, local_pair, Backends, SoComBackend};
    use crate::transport::run_pair;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn roundtrip(kind: SoComKind, seed: u64, msgs: Vec<BitString>, subset: Vec<usize>) -> (Result<Vec<usize>>, Result<Vec<BitString>>) {
        let mut b = Backends::real();
        if kind == SoComKind::Ideal {
            b.socom = SoComBackend::Ideal;
        }
        let mut p = local_pair(seed, 8, 4, b);
        let k = msgs.len();
        let ml = msgs[0].len();
        let (a, r) = (&mut p.a, &mut p.b);
        let fa = guarded(a, async |c: &mut Ctx| {
            let mut com = Committer::new(kind);
            com.commit(c, msgs).await?;
            com.open(c).await
        });
        let fb = guarded(r, async |c: &mut Ctx| {
            let mut rec = Receiver::new(kind);
            rec.receive(c, k, ml).await?;
            rec.open(c, &subset).await
        });
        let (x, y) = run_pair(&p.progress, fa, fb).unwrap();
        p.a.ch.transcript.check_serialization().unwrap();
        (x, y)
    }

    #[test]
    fn plain_and_ideal_open_chosen_subset() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for kind in [SoComKind::Plain, SoComKind::Ideal] {
            let msgs: Vec<_> = (0..4).map(|_| BitString::random(&mut rng, 3)).collect();
            let (i, m) = roundtrip(kind, 9, msgs.clone(), vec![1, 3]);
            assert_eq!(i.unwrap(), vec![1, 3]);
            assert_eq!(m.unwrap(), vec![msgs[1].clone(), msgs[3].clone()]);
            let (_, m) = roundtrip(kind, 10, msgs.clone(), vec![]);
            assert!(m.unwrap().is_empty());
        }
    }

    #[test]
    fn substituted_reveal_is_rejected() {
        let mut b = Backends::real();
        b.socom = SoComBackend::Plain;
        let mut p = local_pair(4, 8, 6, b);
        p.a.hooks.on::<Vec<BitString>>("socom.reveal", |v, _| v[0].flip(0));
        let msgs: Vec<_> = (0..3).map(|i| BitString::from_u64(i, 2)).collect();
        let (a, r) = (&mut p.a, &mut p.b);
        let fa = guarded(a, async |c: &mut Ctx| {
            let mut com = Committer::new(SoComKind::Plain);
            com.commit(c, msgs).await?;
            com.open(c).await
        });
        let fb = guarded(r, async |c: &mut Ctx| {
            let mut rec = Receiver::new(SoComKind::Plain);
            rec.receive(c, 3, 2).await?;
            rec.open(c, &[0]).await
        });
        let (x, y) = run_pair(&p.progress, fa, fb).unwrap();
        assert!(matches!(y, Err(Error::Abort { layer: Layer::Zk, .. })));
        assert!(matches!(x, Err(Error::PeerAbort { .. })));
    }

    #[test]
    fn double_commit_and_bad_subset() {
        let mut p = local_pair(5, 8, 2, Backends::ideal());
        let a = &mut p.a;
        let r = crate::transport::block_on(async {
            let mut com = Committer::new(SoComKind::Ideal);
            com.commit(a, vec![BitString::zeros(1)]).await?;
            com.commit(a, vec![BitString::zeros(1)]).await
        })
        .unwrap();
        assert!(r.is_err());
        assert!(check_subset(&[0, 0], 2).is_err());
        assert!(check_subset(&[2], 2).is_err());
        assert!(check_subset(&[1, 0], 2).is_ok());
    }

    #[test]
    fn brute_force_recovers_messages() {
        let naor = Naor::circuit(6).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let mut unique = 0;
        for _ in 0..30 {
            let rho = BitString::random(&mut rng, 18);
            let m = BitString::random(&mut rng, 2);
            let r = BitString::random(&mut rng, 6);
            let c = naor.commit(&rho, &m, &r).unwrap();
            match brute_force_open(&naor, &rho, &c, 2).unwrap() {
                Extracted::Unique(x) => {
                    assert_eq!(x, m);
                    unique += 1;
                }
                Extracted::Ambiguous => {}
                Extracted::NoOpening => panic!("honest commitment has an opening"),
            }
        }
        assert!(unique >= 25);
        // ρ = G(r) ⊕ G(r') makes com(0; r) also a commitment to 1
        let g = |s| naor.stream(&BitString::from_u64(s, 6), 1).unwrap();
        let rho = g(3).xor(&g(17));
        let c = naor.commit_bit(&rho, false, &BitString::from_u64(3, 6)).unwrap();
        assert_eq!(brute_force_open(&naor, &rho, &c, 1).unwrap(), Extracted::Ambiguous);
        let _ = rng.gen::<u8>();
    }
}
