//! Commit-challenge-open rounds of the three-view argument.
//!
//! Per round the prover splits the witness into three shares, runs the
//! three-party evaluation, and Naor-commits (under the verifier's ρ) to a
//! digest of each view. Output shares are sent as hashes. The verifier asks
//! for two adjacent views e, e+1, re-runs party e from its seed and party
//! e+1's received AND outputs, and checks every digest and output hash.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Layer, Result};
use crate::primitives::bits::BitString;
use crate::primitives::naor::Naor;
use crate::primitives::prg::{sha256, PrgVariant};
use crate::session::{ChallengeSource, Ctx, Oracle};
use crate::transport::codec::{Dec, Enc};
use crate::zk::engine::{BView, Compiled, ViewTamper};
use crate::zk::statement::Statement;

pub const SEED_BYTES: usize = 16;
/// Bound on rewinds per round for the simulator.
pub const MAX_REWINDS: usize = 64;

/// Value passed to the "zk.views" hook before each round's evaluation.
#[derive(Clone, Copy, Debug)]
pub struct RoundHook {
    pub round: usize,
    pub and_words: usize,
    pub tamper: ViewTamper,
}

fn tape(seed: &[u8]) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(sha256(&[b"zk/tape", seed]))
}

fn words_bytes(v: &[u64]) -> Vec<u8> {
    v.iter().flat_map(|w| w.to_le_bytes()).collect()
}

fn view_digest(seed: &[u8], w2: Option<&BitString>, view: &[u64]) -> BitString {
    let w2b = w2.map(BitString::encode).unwrap_or_default();
    let d = sha256(&[b"zk/view", seed, &w2b, &words_bytes(view)]);
    BitString::from_bytes(&d, 256).expect("32 bytes")
}

fn out_hash(out: &[u64]) -> [u8; 32] {
    sha256(&[b"zk/out", &words_bytes(out)])
}

fn naor(lambda: usize) -> Result<Naor> {
    Naor::new(lambda, PrgVariant::Fast)
}

/// Prover's secrets for one round, kept until the challenge arrives.
pub struct RoundState {
    seeds: [[u8; SEED_BYTES]; 3],
    r: [BitString; 3],
    w2: BitString,
    views: [Vec<u64>; 3],
}

/// Builds the COMMIT message of one round.
pub fn round_commit(
    comp: &Compiled,
    w: &BitString,
    rho: &BitString,
    lambda: usize,
    rng: &mut dyn RngCore,
    tamper: ViewTamper,
) -> Result<(Vec<u8>, RoundState)> {
    if w.len() != comp.witness_len() {
        return Err(Error::Precondition(format!("witness has {} bits, statement needs {}", w.len(), comp.witness_len())));
    }
    let nc = naor(lambda)?;
    let mut seeds = [[0u8; SEED_BYTES]; 3];
    for s in seeds.iter_mut() {
        rng.fill_bytes(s);
    }
    let mut t: [ChaCha20Rng; 3] = std::array::from_fn(|e| tape(&seeds[e]));
    let w0 = BitString::random(&mut t[0], w.len());
    let w1 = BitString::random(&mut t[1], w.len());
    let w2 = w.xor(&w0).xor(&w1);
    let [t0, t1, t2] = &mut t;
    let mut tapes: [&mut dyn RngCore; 3] = [t0, t1, t2];
    let run = comp.prove3([&w0, &w1, &w2], &mut tapes, tamper);
    let r: [BitString; 3] = std::array::from_fn(|_| BitString::random(rng, lambda));
    let mut enc = Enc::new();
    for e in 0..3 {
        let d = view_digest(&seeds[e], (e == 2).then_some(&w2), &run.views[e]);
        enc = enc.bits(&nc.commit(rho, &d, &r[e])?);
    }
    let mut buf = enc.done();
    for e in 0..3 {
        buf.extend_from_slice(&out_hash(&run.outs[e]));
    }
    Ok((buf, RoundState { seeds, r, w2, views: run.views }))
}

/// Builds the OPEN message for challenge `e`.
pub fn round_open(st: &RoundState, e: usize) -> Vec<u8> {
    let b = (e + 1) % 3;
    let w2 = if e == 2 || b == 2 { st.w2.clone() } else { BitString::zeros(0) };
    Enc::new()
        .bytes(&st.seeds[e])
        .bytes(&st.seeds[b])
        .bits(&st.r[e])
        .bits(&st.r[b])
        .bits(&w2)
        .u64s(&st.views[b])
        .done()
}

struct Commit {
    c: [BitString; 3],
    h: [[u8; 32]; 3],
}

fn parse_commit(buf: &[u8], lambda: usize) -> Result<Commit> {
    let mut d = Dec::new(buf);
    let len = 3 * lambda * 256;
    let c = [d.bits_len(len)?, d.bits_len(len)?, d.bits_len(len)?];
    let mut h = [[0u8; 32]; 3];
    for x in h.iter_mut() {
        x.copy_from_slice(d.fixed(32)?);
    }
    d.finish()?;
    Ok(Commit { c, h })
}

/// Verifier's check of one round. Malformed messages reject.
pub fn check_round(comp: &Compiled, rho: &BitString, lambda: usize, commit: &[u8], e: u8, open: &[u8]) -> bool {
    check_round_inner(comp, rho, lambda, commit, e as usize, open).unwrap_or(false)
}

fn check_round_inner(comp: &Compiled, rho: &BitString, lambda: usize, commit: &[u8], e: usize, open: &[u8]) -> Result<bool> {
    if e > 2 {
        return Ok(false);
    }
    let cm = parse_commit(commit, lambda)?;
    let b = (e + 1) % 3;
    let mut d = Dec::new(open);
    let sa = d.bytes()?;
    let sb = d.bytes()?;
    let ra = d.bits_len(lambda)?;
    let rb = d.bits_len(lambda)?;
    let w2 = d.bits()?;
    let vb = d.u64s()?;
    d.finish()?;
    if sa.len() != SEED_BYTES || sb.len() != SEED_BYTES {
        return Ok(false);
    }
    let wl = comp.witness_len();
    let needs_w2 = e == 2 || b == 2;
    if w2.len() != if needs_w2 { wl } else { 0 } {
        return Ok(false);
    }
    let mut ta = tape(&sa);
    let mut tb = tape(&sb);
    let share_a = if e == 2 { w2.clone() } else { BitString::random(&mut ta, wl) };
    let share_b = if b == 2 { w2.clone() } else { BitString::random(&mut tb, wl) };
    let run = comp.eval2(e, &share_a, &share_b, &mut ta, &mut tb, BView::Given(&vb))?;
    if !run.pub_ok {
        return Ok(false);
    }
    let nc = naor(lambda)?;
    let da = view_digest(&sa, (e == 2).then_some(&w2), &run.view_a);
    let db = view_digest(&sb, (b == 2).then_some(&w2), &run.view_b);
    if !nc.verify(rho, &cm.c[e], &da, &ra) || !nc.verify(rho, &cm.c[b], &db, &rb) {
        return Ok(false);
    }
    if out_hash(&run.out_a) != cm.h[e] || out_hash(&run.out_b) != cm.h[b] {
        return Ok(false);
    }
    let third: Vec<u64> =
        comp.out_masks().iter().zip(run.out_a.iter().zip(&run.out_b)).map(|(m, (x, y))| m ^ x ^ y).collect();
    Ok(out_hash(&third) == cm.h[(e + 2) % 3])
}

/// One simulated round: guess the challenge, fake the unopened view, and
/// rewind the verifier oracle until the guess is asked for.
pub fn simulate_round(
    comp: &Compiled,
    rho: &BitString,
    lambda: usize,
    rng: &mut dyn RngCore,
    oracle: &mut dyn FnMut(&[u8]) -> u8,
) -> Result<(Vec<u8>, u8, Vec<u8>, usize)> {
    let nc = naor(lambda)?;
    let wl = comp.witness_len();
    for attempt in 1..=MAX_REWINDS {
        let e = rng.gen_range(0..3usize);
        let b = (e + 1) % 3;
        let mut seeds = [[0u8; SEED_BYTES]; 3];
        for s in seeds.iter_mut() {
            rng.fill_bytes(s);
        }
        let w2 = BitString::random(rng, wl);
        let mut ta = tape(&seeds[e]);
        let mut tb = tape(&seeds[b]);
        let share_a = if e == 2 { w2.clone() } else { BitString::random(&mut ta, wl) };
        let share_b = if b == 2 { w2.clone() } else { BitString::random(&mut tb, wl) };
        let mut fake = ChaCha20Rng::from_seed(sha256(&[b"zk/sim-view", &seeds[b]]));
        let run = comp.eval2(e, &share_a, &share_b, &mut ta, &mut tb, BView::Random(&mut fake))?;
        if !run.pub_ok {
            return Err(Error::SimulationFailure("public part of the statement is false".into()));
        }
        let third: Vec<u64> =
            comp.out_masks().iter().zip(run.out_a.iter().zip(&run.out_b)).map(|(m, (x, y))| m ^ x ^ y).collect();
        let r: [BitString; 3] = std::array::from_fn(|_| BitString::random(rng, lambda));
        let mut digests: [BitString; 3] = std::array::from_fn(|_| BitString::random(rng, 256));
        let mut outs: [Vec<u64>; 3] = Default::default();
        digests[e] = view_digest(&seeds[e], (e == 2).then_some(&w2), &run.view_a);
        digests[b] = view_digest(&seeds[b], (b == 2).then_some(&w2), &run.view_b);
        outs[e] = run.out_a.clone();
        outs[b] = run.out_b.clone();
        outs[(e + 2) % 3] = third;
        let mut enc = Enc::new();
        for k in 0..3 {
            enc = enc.bits(&nc.commit(rho, &digests[k], &r[k])?);
        }
        let mut commit = enc.done();
        for o in &outs {
            commit.extend_from_slice(&out_hash(o));
        }
        let ch = oracle(&commit);
        if ch as usize == e {
            let mut views: [Vec<u64>; 3] = Default::default();
            views[b] = run.view_b;
            let st = RoundState { seeds, r, w2, views };
            return Ok((commit, ch, round_open(&st, e), attempt));
        }
    }
    Err(Error::SimulationFailure(format!("no matching challenge after {MAX_REWINDS} rewinds")))
}

/// A full transcript: (commit, challenge, open) per round.
pub type Transcript = Vec<(Vec<u8>, u8, Vec<u8>)>;

/// Offline simulation against a challenge oracle `(round, commit) -> trit`.
/// Also returns the number of oracle invocations per round.
pub fn simulate(
    st: &Statement,
    rho: &BitString,
    lambda: usize,
    rounds: usize,
    rng: &mut dyn RngCore,
    oracle: &dyn Fn(usize, &[u8]) -> u8,
) -> Result<(Transcript, Vec<usize>)> {
    let comp = Compiled::new(st)?;
    let mut out = Vec::with_capacity(rounds);
    let mut tries = Vec::with_capacity(rounds);
    for round in 0..rounds {
        let (c, e, o, n) = simulate_round(&comp, rho, lambda, rng, &mut |c| oracle(round, c))?;
        out.push((c, e, o));
        tries.push(n);
    }
    Ok((out, tries))
}

/// Honest verifier's decision on a complete transcript.
pub fn check_transcript(st: &Statement, rho: &BitString, lambda: usize, t: &Transcript) -> Result<bool> {
    let comp = Compiled::new(st)?;
    Ok(t.iter().all(|(c, e, o)| check_round(&comp, rho, lambda, c, *e, o)))
}

pub fn keyed_challenge(key: &[u8; 32], round: usize, commit: &[u8]) -> u8 {
    let mut ctr = 0u32;
    loop {
        let h = sha256(&[b"zk/challenge", key, &(round as u32).to_le_bytes(), &ctr.to_le_bytes(), commit]);
        for &byte in &h {
            if byte < 255 {
                return byte % 3;
            }
        }
        ctr += 1;
    }
}

fn draw_challenge(ctx: &mut Ctx, round: usize, commit: &[u8]) -> u8 {
    match &ctx.challenge {
        ChallengeSource::Random => ctx.rng.gen_range(0..3u8),
        ChallengeSource::Keyed(k) => keyed_challenge(k, round, commit),
        ChallengeSource::Hook(f) => f(round, commit) % 3,
    }
}

/// Prover side. Runs the real protocol, or hands the witness to F_zk when
/// the ZK layer is ideal.
pub async fn prove(ctx: &mut Ctx, st: &Statement, w: &BitString, rho: &BitString) -> Result<()> {
    if w.len() != st.witness_len {
        return Err(Error::Precondition(format!("witness has {} bits, statement needs {}", w.len(), st.witness_len)));
    }
    ctx.ch.begin(Layer::Zk);
    if ctx.backends.zk_ideal {
        let idx = ctx.oracle_call(Oracle::Zk, Layer::Zk, "ZK_PROVE");
        ctx.hub()?.zk_prove(idx, w.clone());
        ctx.ch.end(Layer::Zk);
        return Ok(());
    }
    let comp = Compiled::new(st)?;
    for round in 0..ctx.zk_rounds {
        let mut h = RoundHook { round, and_words: comp.and_words(), tamper: ViewTamper::default() };
        ctx.hook("zk.views", &mut h)?;
        let (commit, state) = round_commit(&comp, w, rho, ctx.lambda, &mut ctx.rng, h.tamper)?;
        ctx.send(Layer::Zk, "COMMIT", commit)?;
        let ch = ctx.recv(Layer::Zk, "CHALLENGE").await?;
        if ch.len() != 1 || ch[0] > 2 {
            return Err(Error::protocol(Layer::Zk, "malformed challenge"));
        }
        ctx.send(Layer::Zk, "OPEN", round_open(&state, ch[0] as usize))?;
    }
    ctx.ch.end(Layer::Zk);
    Ok(())
}

/// Prover side without a witness: rewinds `oracle` (which must reproduce the
/// verifier's challenge function) and plays the accepted simulated rounds.
pub async fn prove_simulated(
    ctx: &mut Ctx,
    st: &Statement,
    rho: &BitString,
    oracle: &dyn Fn(usize, &[u8]) -> u8,
) -> Result<()> {
    ctx.ch.begin(Layer::Zk);
    let comp = Compiled::new(st)?;
    for round in 0..ctx.zk_rounds {
        let (commit, e, open, _) = simulate_round(&comp, rho, ctx.lambda, &mut ctx.rng, &mut |c| oracle(round, c))?;
        ctx.send(Layer::Zk, "COMMIT", commit)?;
        let ch = ctx.recv(Layer::Zk, "CHALLENGE").await?;
        if ch != [e] {
            return Err(Error::SimulationFailure("verifier deviated from the rewinding oracle".into()));
        }
        ctx.send(Layer::Zk, "OPEN", open)?;
    }
    ctx.ch.end(Layer::Zk);
    Ok(())
}

/// Verifier side. Returns whether every round was accepted; the caller decides
/// how to abort. Stops at the first rejected round.
pub async fn verify(ctx: &mut Ctx, st: &Statement, rho: &BitString) -> Result<bool> {
    ctx.ch.begin(Layer::Zk);
    if ctx.backends.zk_ideal {
        let idx = ctx.oracle_call(Oracle::Zk, Layer::Zk, "ZK_VERIFY");
        let ok = ctx.hub()?.zk_verify(ctx.party, idx, st).await?;
        ctx.ch.end(Layer::Zk);
        return Ok(ok);
    }
    let comp = Compiled::new(st)?;
    for round in 0..ctx.zk_rounds {
        let commit = ctx.recv(Layer::Zk, "COMMIT").await?;
        let e = draw_challenge(ctx, round, &commit);
        ctx.send(Layer::Zk, "CHALLENGE", vec![e])?;
        let open = ctx.recv(Layer::Zk, "OPEN").await?;
        if !check_round(&comp, rho, ctx.lambda, &commit, e, &open) {
            ctx.ch.end(Layer::Zk);
            return Ok(false);
        }
    }
    ctx.ch.end(Layer::Zk);
    Ok(true)
}

/// Verifies and turns a rejection into an abort attributed to the ZK layer.
pub async fn verify_or_abort(ctx: &mut Ctx, st: &Statement, rho: &BitString, what: &str) -> Result<()> {
    if verify(ctx, st, rho).await? {
        Ok(())
    } else {
        Err(Error::abort(Layer::Zk, format!("proof rejected: {what}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::circuit::CircuitBuilder;
    use crate::session::{guarded, local_pair, Backends};
    use crate::transport::run_pair;
    use crate::zk::statement::Seg;
    use std::sync::Arc;

    /// Knowledge of a PRG preimage: expand(w) == y.
    fn prg_statement(lambda: usize, w: &BitString) -> Statement {
        let prg = crate::primitives::prg::CfPrg::new(lambda).unwrap();
        let y = prg.expand(w, 3 * lambda).unwrap();
        let mut cb = CircuitBuilder::new(6 * lambda);
        let seed = cb.inputs(0, lambda);
        let out = prg.counter_gadget_const(&mut cb, &seed, 0);
        let target = cb.inputs(3 * lambda, 3 * lambda);
        let eq = cb.eq_bits(&out, &target);
        let c = Arc::new(cb.finish(&eq));
        let mut st = Statement::new(lambda);
        st.push(&c, vec![Seg::wit(0, lambda), Seg::Pub(BitString::zeros(2 * lambda)), Seg::Pub(y)]).unwrap();
        st
    }

    fn unsat_statement() -> Statement {
        // x ∧ ¬x
        let mut cb = CircuitBuilder::new(1);
        let x = cb.input(0);
        let nx = cb.not(x);
        let o = cb.and(x, nx);
        let c = Arc::new(cb.finish(&[o]));
        let mut st = Statement::new(1);
        st.push(&c, vec![Seg::wit(0, 1)]).unwrap();
        st
    }

    fn run(st: &Statement, w: &BitString, seed: u64, rounds: usize, cheat: bool) -> (Result<()>, Result<bool>) {
        let lambda = 8;
        let mut p = local_pair(seed, lambda, rounds, Backends::real());
        if cheat {
            p.a.hooks.on::<RoundHook>("zk.views", |h, rng| {
                let party = rng.gen_range(0..3);
                h.tamper = ViewTamper { flip: Some((party, h.and_words - 1, 1)) };
            });
        }
        let rho = BitString::random(&mut ChaCha20Rng::seed_from_u64(seed), 3 * lambda);
        let (a, b) = (&mut p.a, &mut p.b);
        let pa = guarded(a, async |c: &mut Ctx| prove(c, st, w, &rho).await);
        let pb = guarded(b, async |c: &mut Ctx| verify_or_abort(c, st, &rho, "test").await);
        let (x, y) = run_pair(&p.progress, pa, pb).unwrap();
        (x, y.map(|_| true).or_else(|e| if e.layer() == Some(Layer::Zk) { Ok(false) } else { Err(e) }))
    }

    #[test]
    fn completeness() {
        let w = BitString::from_u64(0xA5, 8);
        let st = prg_statement(8, &w);
        for seed in 0..20 {
            let (p, v) = run(&st, &w, seed, 4, false);
            p.unwrap();
            assert!(v.unwrap());
        }
    }

    #[test]
    fn wrong_witness_rejected_and_wrong_length_is_precondition() {
        let w = BitString::from_u64(0xA5, 8);
        let st = prg_statement(8, &w);
        let bad = BitString::from_u64(0xA4, 8);
        let (_, v) = run(&st, &bad, 1, 4, false);
        assert!(!v.unwrap_or(false));
        let mut p = local_pair(1, 8, 4, Backends::real());
        let r = crate::transport::block_on(prove(&mut p.a, &st, &BitString::zeros(3), &BitString::zeros(24))).unwrap();
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn cheater_passes_single_round_about_two_thirds() {
        let st = unsat_statement();
        let w = BitString::zeros(1);
        let n = 600;
        let acc = (0..n).filter(|&s| matches!(run(&st, &w, s, 1, true).1, Ok(true))).count();
        let p = acc as f64 / n as f64;
        // Hoeffding 99%: sqrt(ln(200)/1200) ≈ 0.067
        assert!((p - 2.0 / 3.0).abs() < 0.067, "p = {p}");
    }

    #[test]
    fn simulator_is_accepted_and_rewinds_about_three_times() {
        let w = BitString::from_u64(0x3C, 8);
        let st = prg_statement(8, &w);
        let rho = BitString::random(&mut ChaCha20Rng::seed_from_u64(5), 24);
        let key = [7u8; 32];
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let (t, tries) = simulate(&st, &rho, 8, 200, &mut rng, &|r, c| keyed_challenge(&key, r, c)).unwrap();
        assert!(check_transcript(&st, &rho, 8, &t).unwrap());
        let mean = tries.iter().sum::<usize>() as f64 / tries.len() as f64;
        assert!(mean < 3.5, "mean rewinds {mean}");
        // same message-length profile as a real round
        let comp = Compiled::new(&st).unwrap();
        let (c, s) = round_commit(&comp, &w, &rho, 8, &mut rng, ViewTamper::default()).unwrap();
        assert_eq!(c.len(), t[0].0.len());
        assert_eq!(round_open(&s, t[0].1 as usize).len(), t[0].2.len());
    }

    #[test]
    fn ideal_backend_agrees() {
        let w = BitString::from_u64(0x11, 8);
        let st = prg_statement(8, &w);
        let mut b = Backends::real();
        b.zk_ideal = true;
        for (wit, expect) in [(w.clone(), true), (BitString::from_u64(0x12, 8), false)] {
            let mut p = local_pair(3, 8, 4, b);
            let rho = BitString::zeros(24);
            let (a, v) = (&mut p.a, &mut p.b);
            let (_, ok) = run_pair(&p.progress, prove(a, &st, &wit, &rho), verify(v, &st, &rho)).unwrap();
            assert_eq!(ok.unwrap(), expect);
        }
    }
}
