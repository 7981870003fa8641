//! Extractable selective-opening commitment.
//!
//! The receiver commits to 0 under the committer's ρ and proves it; the
//! committer then sends μ⃗ through CDS conditioned on that commitment opening
//! to 1. An honest receiver learns ⊥, while an extractor that commits to 1
//! and simulates the proof learns μ⃗ with the real witness.


use crate::cds::{self, CdsStatement, CdsTranscript};
use crate::error::{Error, Layer, Result};
use crate::primitives::bits::BitString;
use crate::primitives::naor::Naor;
use crate::session::{ChallengeOracle, Ctx};
use crate::socom::{check_subset, commit_values, decode_commits, decode_reveal, encode_commits, encode_reveal, Equivocation};
use crate::transport::codec::{Dec, Enc};
use crate::zk::compile::{commit_opens_to, opened_messages, SameMessage};
use crate::zk::protocol;

/// Committer's state after the commit phase.
#[derive(Clone, Debug)]
pub struct CommitterState {
    pub rho: BitString,
    pub rho_star: BitString,
    pub trapdoor: BitString,
    pub msgs: Vec<BitString>,
    pub seeds: Vec<BitString>,
    pub commits: Vec<BitString>,
    /// CDS transcript and proof, absent when CDS is ideal.
    pub cds: Option<(CdsTranscript, cds::CdsProof)>,
}

/// Receiver's state after the commit phase.
#[derive(Clone, Debug)]
pub struct ReceiverState {
    pub rho: BitString,
    pub rho_star: BitString,
    pub trapdoor: BitString,
    pub k: usize,
    pub msg_len: usize,
    pub commits: Vec<BitString>,
    /// What CDS disclosed: ⊥ for an honest receiver, μ⃗ for the extractor.
    pub cds_output: Option<BitString>,
    pub tau: Option<CdsTranscript>,
}

impl ReceiverState {
    /// The extracted messages, if CDS disclosed them.
    pub fn extracted(&self) -> Option<Vec<BitString>> {
        let mu = self.cds_output.as_ref()?;
        Some((0..self.k).map(|i| mu.slice(i * self.msg_len, self.msg_len)).collect())
    }
}

fn concat(msgs: &[BitString]) -> BitString {
    let mut mu = BitString::zeros(0);
    for m in msgs {
        mu.append(m);
    }
    mu
}

fn read_rho(body: &[u8], lambda: usize) -> Result<BitString> {
    let mut d = Dec::new(body);
    let rho = d.bits_len(3 * lambda)?;
    d.finish()?;
    Ok(rho)
}

pub async fn commit(ctx: &mut Ctx, msgs: Vec<BitString>) -> Result<CommitterState> {
    let msg_len = msgs.first().map_or(0, BitString::len);
    if msgs.iter().any(|m| m.len() != msg_len) {
        return Err(Error::Precondition("messages must share one length".into()));
    }
    ctx.ch.begin(Layer::Ecom);
    let r = commit_inner(ctx, msgs, msg_len).await;
    ctx.ch.end(Layer::Ecom);
    r
}

async fn commit_inner(ctx: &mut Ctx, msgs: Vec<BitString>, msg_len: usize) -> Result<CommitterState> {
    let l = ctx.lambda;
    let rho = BitString::random(&mut ctx.rng, 3 * l);
    ctx.send(Layer::Ecom, "RHO", Enc::new().bits(&rho).done())?;
    let rho_star = read_rho(&ctx.recv(Layer::Ecom, "RHO_STAR").await?, l)?;

    let trapdoor = read_rho(&ctx.recv(Layer::Ecom, "TRAPDOOR_COMMIT").await?, l)?;
    let st = commit_opens_to(l, &rho, &trapdoor, &BitString::zeros(1))?;
    protocol::verify_or_abort(ctx, &st, &rho, "trapdoor commitment is not to 0").await?;

    let x = CdsStatement { rho: rho.clone(), c: trapdoor.clone(), b: true };
    let mu = concat(&msgs);
    let cds = cds::send(ctx, &x, &mu).await?;

    let (seeds, mut commits) = commit_values(l, &rho_star, &msgs, &mut ctx.rng)?;
    ctx.hook("ecom.cstar", &mut commits)?;
    ctx.send(Layer::Ecom, "CSTAR_COMMITS", encode_commits(msg_len, &commits))?;
    let sm = SameMessage {
        lambda: l,
        a: cds.as_ref().map(|(t, _)| (&t.rho, &t.c_star)),
        rho_b: &rho_star,
        c_b: &commits,
        msg_len,
    };
    let w = SameMessage::witness(&mu, cds.as_ref().map(|(_, p)| &p.r_star), &seeds);
    protocol::prove(ctx, &sm.statement()?, &w, &rho_star).await?;
    Ok(CommitterState { rho, rho_star, trapdoor, msgs, seeds, commits, cds })
}

/// How the receiver sets up the trapdoor.
#[derive(Clone)]
pub enum Trapdoor {
    /// c = com_ρ(0; r), proved honestly; CDS witness 0.
    Honest,
    /// c = com_ρ(1; r), proof simulated against the committer's challenge
    /// function; CDS witness r.
    Extract(ChallengeOracle),
}

pub async fn receive(ctx: &mut Ctx, k: usize, msg_len: usize) -> Result<ReceiverState> {
    receive_with(ctx, k, msg_len, Trapdoor::Honest).await
}

/// Commit phase run by the extractor; the result's `extracted()` is μ⃗.
pub async fn extract(ctx: &mut Ctx, k: usize, msg_len: usize, oracle: ChallengeOracle) -> Result<ReceiverState> {
    if ctx.backends.zk_ideal {
        return Err(Error::Precondition("extraction simulates a real ZK proof".into()));
    }
    receive_with(ctx, k, msg_len, Trapdoor::Extract(oracle)).await
}

pub async fn receive_with(ctx: &mut Ctx, k: usize, msg_len: usize, trapdoor: Trapdoor) -> Result<ReceiverState> {
    ctx.ch.begin(Layer::Ecom);
    let r = receive_inner(ctx, k, msg_len, trapdoor).await;
    ctx.ch.end(Layer::Ecom);
    r
}

async fn receive_inner(ctx: &mut Ctx, k: usize, msg_len: usize, trapdoor: Trapdoor) -> Result<ReceiverState> {
    let l = ctx.lambda;
    let naor = Naor::circuit(l)?;
    let rho = read_rho(&ctx.recv(Layer::Ecom, "RHO").await?, l)?;
    let rho_star = BitString::random(&mut ctx.rng, 3 * l);
    ctx.send(Layer::Ecom, "RHO_STAR", Enc::new().bits(&rho_star).done())?;

    let r = BitString::random(&mut ctx.rng, l);
    let bit = matches!(trapdoor, Trapdoor::Extract(_));
    let c = naor.commit_bit(&rho, bit, &r)?;
    ctx.send(Layer::Ecom, "TRAPDOOR_COMMIT", Enc::new().bits(&c).done())?;
    let st = commit_opens_to(l, &rho, &c, &BitString::zeros(1))?;
    let w = match &trapdoor {
        Trapdoor::Honest => {
            protocol::prove(ctx, &st, &r, &rho).await?;
            BitString::zeros(CdsStatement::witness_len(l))
        }
        Trapdoor::Extract(oracle) => {
            protocol::prove_simulated(ctx, &st, &rho, &**oracle).await?;
            r
        }
    };

    let got = cds::receive(ctx, &w, k * msg_len).await?;
    if got.x != (CdsStatement { rho: rho.clone(), c: c.clone(), b: true }) {
        return Err(Error::abort(Layer::Ecom, "CDS statement differs from (ρ, c, 1)"));
    }

    let (ml, commits) = decode_commits(l, &ctx.recv(Layer::Ecom, "CSTAR_COMMITS").await?)?;
    if commits.len() != k || (k > 0 && ml != msg_len) {
        return Err(Error::abort(Layer::Ecom, "commitments do not match the expected shape"));
    }
    let sm = SameMessage {
        lambda: l,
        a: got.tau.as_ref().map(|t| (&t.rho, &t.c_star)),
        rho_b: &rho_star,
        c_b: &commits,
        msg_len,
    };
    protocol::verify_or_abort(ctx, &sm.statement()?, &rho_star, "commitments differ from the CDS secret").await?;
    Ok(ReceiverState { rho, rho_star, trapdoor: c, k, msg_len, commits, cds_output: got.mu, tau: got.tau })
}

/// Committer's opening: waits for I, reveals μ⃗|_I and proves it.
pub async fn open(ctx: &mut Ctx, s: &CommitterState, eq: Option<&Equivocation>) -> Result<Vec<usize>> {
    ctx.ch.begin(Layer::Ecom);
    let body = ctx.recv(Layer::Ecom, "OPEN_REQUEST").await?;
    let mut d = Dec::new(&body);
    let subset = d.indices()?;
    d.finish()?;
    check_subset(&subset, s.msgs.len()).map_err(|e| Error::abort(Layer::Ecom, e.to_string()))?;
    let source = eq.map_or(&s.msgs, |e| &e.claimed);
    let mut reveal: Vec<BitString> = subset.iter().map(|&i| source[i].clone()).collect();
    ctx.hook("ecom.reveal", &mut reveal)?;
    ctx.send(Layer::Ecom, "OPEN_REVEAL", encode_reveal(&reveal))?;
    let pairs: Vec<(&BitString, &BitString)> = subset.iter().map(|&i| &s.commits[i]).zip(&reveal).collect();
    let st = opened_messages(ctx.lambda, &s.rho_star, &pairs)?;
    match eq {
        Some(e) => protocol::prove_simulated(ctx, &st, &s.rho_star, &*e.oracle).await?,
        None => {
            let mut w = BitString::zeros(0);
            for &i in &subset {
                w.append(&s.seeds[i]);
            }
            protocol::prove(ctx, &st, &w, &s.rho_star).await?
        }
    }
    ctx.ch.end(Layer::Ecom);
    Ok(subset)
}

/// Receiver's opening of `subset`; returns the messages in subset order.
pub async fn receive_open(ctx: &mut Ctx, s: &ReceiverState, subset: &[usize]) -> Result<Vec<BitString>> {
    ctx.ch.begin(Layer::Ecom);
    ctx.send(Layer::Ecom, "OPEN_REQUEST", Enc::new().indices(subset).done())?;
    let msgs = decode_reveal(&ctx.recv(Layer::Ecom, "OPEN_REVEAL").await?, subset.len(), s.msg_len)
        .map_err(|e| Error::abort(Layer::Ecom, e.to_string()))?;
    let pairs: Vec<(&BitString, &BitString)> = subset.iter().map(|&i| &s.commits[i]).zip(&msgs).collect();
    let st = opened_messages(ctx.lambda, &s.rho_star, &pairs)?;
    protocol::verify_or_abort(ctx, &st, &s.rho_star, "opening").await?;
    ctx.ch.end(Layer::Ecom);
    Ok(msgs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{guarded, local_pair, Backends, ChallengeSource, PotBackend, SoComBackend};
    use crate::transport::run_pair;
    use crate::zk::protocol::keyed_challenge;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn fast() -> Backends {
        Backends { socom: SoComBackend::Ideal, pot: PotBackend::Ideal, ..Backends::real() }
    }

    fn msgs(seed: u64, k: usize, len: usize) -> Vec<BitString> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..k).map(|_| BitString::random(&mut rng, len)).collect()
    }

    #[test]
    fn honest_commit_open_and_receiver_learns_nothing() {
        for backends in [fast(), Backends { cds_ideal: true, ..fast() }] {
            let m = msgs(1, 3, 2);
            let mut pr = local_pair(2, 8, 2, backends);
            let (a, b) = (&mut pr.a, &mut pr.b);
            let mc = m.clone();
            let fa = guarded(a, async |c: &mut Ctx| {
                let s = commit(c, mc).await?;
                open(c, &s, None).await
            });
            let fb = guarded(b, async |c: &mut Ctx| {
                let s = receive(c, 3, 2).await?;
                assert!(s.cds_output.is_none());
                receive_open(c, &s, &[2, 0]).await
            });
            let (x, y) = run_pair(&pr.progress, fa, fb).unwrap();
            assert_eq!(x.unwrap(), vec![2, 0]);
            assert_eq!(y.unwrap(), vec![m[2].clone(), m[0].clone()]);
            pr.a.ch.transcript.check_serialization().unwrap();
            pr.b.ch.transcript.check_serialization().unwrap();
        }
    }

    #[test]
    fn extractor_recovers_committed_messages() {
        let m = msgs(3, 4, 3);
        let mut pr = local_pair(4, 8, 3, fast());
        let key = [9u8; 32];
        pr.a.challenge = ChallengeSource::Keyed(key);
        let oracle: ChallengeOracle = std::rc::Rc::new(move |r, c| keyed_challenge(&key, r, c));
        let (a, b) = (&mut pr.a, &mut pr.b);
        let mc = m.clone();
        let fa = guarded(a, async |c: &mut Ctx| commit(c, mc).await.map(|_| ()));
        let fb = guarded(b, async |c: &mut Ctx| extract(c, 4, 3, oracle).await);
        let (x, y) = run_pair(&pr.progress, fa, fb).unwrap();
        x.unwrap();
        assert_eq!(y.unwrap().extracted(), Some(m));
    }

    #[test]
    fn trapdoor_to_one_without_simulation_is_rejected() {
        let mut pr = local_pair(5, 8, 3, fast());
        let (a, b) = (&mut pr.a, &mut pr.b);
        let m = msgs(6, 2, 2);
        let fa = guarded(a, async |c: &mut Ctx| commit(c, m).await.map(|_| ()));
        // a receiver that commits to 1 and then "proves" with its seed
        let fb = guarded(b, async |c: &mut Ctx| {
            let l = c.lambda;
            let rho = read_rho(&c.recv(Layer::Ecom, "RHO").await?, l)?;
            c.send(Layer::Ecom, "RHO_STAR", Enc::new().bits(&BitString::zeros(3 * l)).done())?;
            let r = BitString::random(&mut c.rng, l);
            let cc = Naor::circuit(l)?.commit_bit(&rho, true, &r)?;
            c.send(Layer::Ecom, "TRAPDOOR_COMMIT", Enc::new().bits(&cc).done())?;
            let st = commit_opens_to(l, &rho, &cc, &BitString::zeros(1))?;
            protocol::prove(c, &st, &r, &rho).await
        });
        let (x, _) = run_pair(&pr.progress, fa, fb).unwrap();
        assert!(matches!(x, Err(Error::Abort { layer: Layer::Zk, .. })));
    }
}
