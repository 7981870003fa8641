//! Verifiable conditional disclosure of secrets for the Naor-commitment
//! language, over the parallel-OT hybrid.
//!
//! The sender garbles 2λ copies of G_{x,μ}; the receiver opens a random
//! subset Λ of the OT batches with random choice strings and evaluates the
//! first fully consistent copy outside Λ with its witness.

use rand::Rng;

use crate::bbcs::{self, PotImpl, QotParams};
use crate::error::{Error, Layer, Result};
use crate::garble::{garb, geval, GarbledCircuit, Layout};
use crate::primitives::bits::BitString;
use crate::primitives::circuit::{Bit, BooleanCircuit, CircuitBuilder};
use crate::primitives::naor::Naor;
use crate::primitives::prg::CfPrg;
use crate::session::{Ctx, Oracle};
use crate::transport::codec::{Dec, Enc};
use crate::zk::compile::{CdsPublic, CdsSecret};
use crate::zk::protocol;

/// x = (ρ, c, b); R((ρ, c, b), r) holds iff c = com_ρ(b; r).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CdsStatement {
    pub rho: BitString,
    pub c: BitString,
    pub b: bool,
}

impl CdsStatement {
    /// Witness length m.
    pub fn witness_len(lambda: usize) -> usize {
        lambda
    }

    pub fn check(&self, lambda: usize) -> Result<()> {
        if self.rho.len() != 3 * lambda || self.c.len() != 3 * lambda {
            return Err(Error::abort(Layer::Cds, "statement has the wrong shape"));
        }
        Ok(())
    }

    pub fn relation(&self, w: &BitString) -> bool {
        let l = w.len();
        self.check(l).is_ok() && Naor::circuit(l).is_ok_and(|n| n.verify_bit(&self.rho, &self.c, self.b, w))
    }

    pub fn encode(&self) -> Vec<u8> {
        Enc::new().bits(&self.rho).bits(&self.c).u8(self.b as u8).done()
    }

    pub fn decode(body: &[u8], lambda: usize) -> Result<CdsStatement> {
        let mut d = Dec::new(body);
        let rho = d.bits_len(3 * lambda)?;
        let c = d.bits_len(3 * lambda)?;
        let b = match d.u8()? {
            0 => false,
            1 => true,
            _ => return Err(Error::abort(Layer::Cds, "claimed bit is not a bit")),
        };
        d.finish()?;
        Ok(CdsStatement { rho, c, b })
    }
}

/// G_{x,μ}: outputs `[ok, μ_1∧ok, ..., μ_L∧ok]` with ok = R(x, w).
///
/// Each μ bit is a CONST gate, so the topology depends only on x and |μ|.
pub fn relation_circuit(x: &CdsStatement, mu: &BitString, lambda: usize) -> Result<BooleanCircuit> {
    let prg = CfPrg::new(lambda)?;
    x.check(lambda)?;
    let mut cb = CircuitBuilder::new(lambda);
    let w = cb.inputs(0, lambda);
    let g = prg.counter_gadget_const(&mut cb, &w, 0);
    let mut eq = Vec::with_capacity(g.len());
    for (k, &gk) in g.iter().enumerate() {
        let t = x.c.get(k) ^ (x.b & x.rho.get(k));
        eq.push(cb.xnor(gk, Bit::Const(t)));
    }
    let ok = cb.and_all(&eq);
    let mut outs = vec![ok];
    for k in 0..mu.len() {
        let m = cb.const_gate(mu.get(k));
        outs.push(cb.and(m, ok));
    }
    let circ = cb.finish(&outs);
    debug_assert_eq!(Layout::new(&circ).consts.len(), mu.len());
    Ok(circ)
}

/// Decodes the circuit output into μ or ⊥.
pub fn decode_output(out: &[bool]) -> Option<BitString> {
    let (ok, rest) = out.split_first()?;
    ok.then(|| BitString::from_bools(rest))
}

/// Everything the receiver saw that Ver needs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CdsTranscript {
    pub rho: BitString,
    pub x: CdsStatement,
    pub c_star: BitString,
    pub garbled: Vec<GarbledCircuit>,
    pub label_commits: Vec<Vec<[BitString; 2]>>,
}

/// π = (μ, r*).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CdsProof {
    pub mu: BitString,
    pub r_star: BitString,
}

/// Ver(τ, x, μ, π): c* in τ opens to μ under r*.
pub fn ver(tau: &CdsTranscript, x: &CdsStatement, mu: &BitString, pi: &CdsProof) -> bool {
    let l = tau.rho.len() / 3;
    tau.x == *x
        && pi.mu == *mu
        && Naor::circuit(l).is_ok_and(|n| n.verify(&tau.rho, &tau.c_star, mu, &pi.r_star))
}

/// The GARBLED message, also the value of the "cds.garbled" hook.
#[derive(Clone, Debug)]
pub struct GarbledMsg {
    pub garbled: Vec<GarbledCircuit>,
    pub c_star: BitString,
    pub label_commits: Vec<Vec<[BitString; 2]>>,
}

impl GarbledMsg {
    pub fn encode(&self) -> Vec<u8> {
        let mut e = Enc::new().u32(self.garbled.len() as u32);
        for g in &self.garbled {
            e = e.bytes(&g.to_bytes());
        }
        let mut all = BitString::zeros(0);
        for inst in &self.label_commits {
            for pair in inst {
                all.append(&pair[0]);
                all.append(&pair[1]);
            }
        }
        e.bits(&self.c_star).u32(self.label_commits.first().map_or(0, Vec::len) as u32).bits(&all).done()
    }

    pub fn decode(body: &[u8], lambda: usize, m: usize, mu_len: usize) -> Result<GarbledMsg> {
        let mut d = Dec::new(body);
        let n = d.u32()? as usize;
        if n != 2 * lambda {
            return Err(Error::abort(Layer::Cds, format!("expected {} garbled instances, got {n}", 2 * lambda)));
        }
        let mut garbled = Vec::with_capacity(n);
        for _ in 0..n {
            let b = d.bytes()?;
            let (g, used) = GarbledCircuit::from_bytes(&b)?;
            if used != b.len() {
                return Err(Error::Decode("trailing bytes after garbled circuit".into()));
            }
            garbled.push(g);
        }
        let c_star = d.bits_len(3 * lambda * mu_len)?;
        if d.u32()? as usize != m {
            return Err(Error::abort(Layer::Cds, "label commitment count"));
        }
        let each = 3 * lambda * lambda;
        let all = d.bits_len(n * m * 2 * each)?;
        d.finish()?;
        let mut label_commits = Vec::with_capacity(n);
        let mut pos = 0;
        for _ in 0..n {
            let mut inst = Vec::with_capacity(m);
            for _ in 0..m {
                inst.push([all.slice(pos, each), all.slice(pos + each, each)]);
                pos += 2 * each;
            }
            label_commits.push(inst);
        }
        Ok(GarbledMsg { garbled, c_star, label_commits })
    }
}

/// Parameters of the OT batch a CDS session consumes.
pub fn ot_params(ctx: &Ctx) -> Result<QotParams> {
    QotParams::new(ctx.inner_n, ctx.alpha, 2 * ctx.lambda)
}

fn word(b: &BitString) -> u64 {
    b.to_u64()
}

/// Sender. Returns (τ, π) as seen on the wire, or `None` when CDS is ideal.
pub async fn send(ctx: &mut Ctx, x: &CdsStatement, mu: &BitString) -> Result<Option<(CdsTranscript, CdsProof)>> {
    ctx.ch.begin(Layer::Cds);
    let r = if ctx.backends.cds_ideal {
        let idx = ctx.oracle_call(Oracle::Cds, Layer::Cds, "CDS_SEND");
        ctx.hub()?.cds_send(idx, x.encode(), mu.clone());
        Ok(None)
    } else {
        send_real(ctx, x, Secret::Known(mu)).await.map(Some)
    };
    ctx.ch.end(Layer::Cds);
    r
}

/// Where the sender's secret comes from.
pub enum Secret<'a> {
    Known(&'a BitString),
    /// Decided after the label transfer from the receiver's OT choice bits,
    /// which only a simulator playing the ideal OT can see. Needs ideal OT.
    FromChoices { len: usize, decide: &'a dyn Fn(&[bool]) -> BitString },
}

/// Real sender with a possibly deferred secret. Input labels do not depend
/// on μ (it only enters through constant gates), so they can be transferred
/// before μ is fixed.
pub async fn send_with(ctx: &mut Ctx, x: &CdsStatement, secret: Secret<'_>) -> Result<(CdsTranscript, CdsProof)> {
    ctx.ch.begin(Layer::Cds);
    let r = send_real(ctx, x, secret).await;
    ctx.ch.end(Layer::Cds);
    r
}

async fn send_real(ctx: &mut Ctx, x: &CdsStatement, secret: Secret<'_>) -> Result<(CdsTranscript, CdsProof)> {
    let l = ctx.lambda;
    let naor = Naor::circuit(l)?;
    let body = ctx.recv(Layer::Cds, "PREAMBLE").await?;
    let mut d = Dec::new(&body);
    let rho = d.bits_len(3 * l)?;
    d.finish()?;
    ctx.send(Layer::Cds, "STATEMENT", x.encode())?;

    let placeholder = match secret {
        Secret::Known(mu) => mu.clone(),
        Secret::FromChoices { len, .. } => BitString::zeros(len),
    };
    let mut circ = relation_circuit(x, &placeholder, l)?;
    let m = circ.n_inputs();
    let n_inst = 2 * l;
    let mut seeds = Vec::with_capacity(n_inst);
    let mut garbled = Vec::with_capacity(n_inst);
    let mut coins = Vec::with_capacity(n_inst);
    let mut label_commits = Vec::with_capacity(n_inst);
    let mut ot_inputs = Vec::with_capacity(n_inst * m);
    for _ in 0..n_inst {
        let seed = BitString::random(&mut ctx.rng, l);
        let (gc, enc) = garb(&circ, &seed, l)?;
        let mut ci = Vec::with_capacity(m);
        let mut cc = Vec::with_capacity(m);
        for lab in &enc.labels {
            let pair: [BitString; 2] = [BitString::random(&mut ctx.rng, l), BitString::random(&mut ctx.rng, l)];
            let mut ot = [BitString::from_u64(lab[0], l), BitString::from_u64(lab[1], l)];
            cc.push([naor.commit(&rho, &ot[0], &pair[0])?, naor.commit(&rho, &ot[1], &pair[1])?]);
            ot[0].append(&pair[0]);
            ot[1].append(&pair[1]);
            ot_inputs.push(ot);
            ci.push(pair);
        }
        seeds.push(seed);
        garbled.push(gc);
        coins.push(ci);
        label_commits.push(cc);
    }
    ctx.hook("cds.ot-inputs", &mut ot_inputs)?;
    let p = ot_params(ctx)?;
    let how = PotImpl::from_backends(&ctx.backends);
    let mode = ctx.qmode;
    let pot_idx = ctx.next_oracle_index(Oracle::Pot);
    bbcs::pot_send(ctx, &p, how, mode, ot_inputs).await?;
    let mu = match secret {
        Secret::Known(mu) => mu.clone(),
        Secret::FromChoices { len, decide } => {
            if how != PotImpl::Ideal {
                return Err(Error::Precondition("a deferred secret needs the ideal OT".into()));
            }
            let choices = ctx.hub()?.pot_choices_wait(ctx.party, pot_idx).await?;
            let mu = decide(&choices);
            if mu.len() != len {
                return Err(Error::Length("decided secret has the wrong length".into()));
            }
            circ = relation_circuit(x, &mu, l)?;
            for (i, seed) in seeds.iter().enumerate() {
                garbled[i] = garb(&circ, seed, l)?.0;
            }
            mu
        }
    };
    let mu = &mu;
    let r_star = BitString::random(&mut ctx.rng, l);
    let c_star = naor.commit(&rho, mu, &r_star)?;

    let mut msg = GarbledMsg { garbled, c_star, label_commits };
    ctx.hook("cds.garbled", &mut msg)?;
    ctx.send(Layer::Cds, "GARBLED", msg.encode())?;

    let public = CdsPublic {
        lambda: l,
        rho: &rho,
        circuit: &circ,
        garbled: &msg.garbled,
        c_star: &msg.c_star,
        label_commits: &msg.label_commits,
    };
    let secret = CdsSecret { mu, r_star: &r_star, seeds: &seeds, coins: &coins };
    let st = public.statement()?;
    protocol::prove(ctx, &st, &public.witness(&secret)?, &rho).await?;
    let tau = CdsTranscript { rho, x: x.clone(), c_star: msg.c_star, garbled: msg.garbled, label_commits: msg.label_commits };
    Ok((tau, CdsProof { mu: mu.clone(), r_star }))
}

/// Receiver's result: the statement, and μ or ⊥.
#[derive(Clone, Debug)]
pub struct Received {
    pub x: CdsStatement,
    pub mu: Option<BitString>,
    /// `None` when CDS is ideal.
    pub tau: Option<CdsTranscript>,
}

/// Which of the receiver's checks failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CdsErr {
    Err1,
    Err2,
}

impl CdsErr {
    fn tag(self) -> &'static str {
        match self {
            CdsErr::Err1 => "err1",
            CdsErr::Err2 => "err2",
        }
    }

    /// Recognizes a receiver abort produced by one of the checks.
    pub fn of(e: &Error) -> Option<CdsErr> {
        match e {
            Error::Abort { layer: Layer::Cds, reason } if reason.starts_with("err1") => Some(CdsErr::Err1),
            Error::Abort { layer: Layer::Cds, reason } if reason.starts_with("err2") => Some(CdsErr::Err2),
            _ => None,
        }
    }
}

/// The receiver's cut-and-choose choices: Λ and the per-instance choice strings.
#[derive(Clone, Debug)]
pub struct Choices {
    pub lambda_set: Vec<bool>,
    pub sigma: Vec<BitString>,
}

/// Receiver with witness `w`, expecting a secret of `mu_len` bits.
pub async fn receive(ctx: &mut Ctx, w: &BitString, mu_len: usize) -> Result<Received> {
    ctx.ch.begin(Layer::Cds);
    let r = if ctx.backends.cds_ideal {
        let idx = ctx.oracle_call(Oracle::Cds, Layer::Cds, "CDS_RECEIVE");
        let (xb, mu) = ctx.hub()?.cds_receive(ctx.party, idx, w.clone()).await?;
        CdsStatement::decode(&xb, ctx.lambda).and_then(|x| {
            if mu.len() != mu_len {
                return Err(Error::abort(Layer::Cds, "secret has the wrong length"));
            }
            let mu = x.relation(w).then_some(mu);
            Ok(Received { x, mu, tau: None })
        })
    } else {
        receive_real(ctx, w, mu_len).await
    };
    ctx.ch.end(Layer::Cds);
    r
}

async fn receive_real(ctx: &mut Ctx, w: &BitString, mu_len: usize) -> Result<Received> {
    let l = ctx.lambda;
    let m = CdsStatement::witness_len(l);
    if w.len() != m {
        return Err(Error::Precondition(format!("witness must have {m} bits")));
    }
    let naor = Naor::circuit(l)?;
    let rho = BitString::random(&mut ctx.rng, 3 * l);
    ctx.send(Layer::Cds, "PREAMBLE", Enc::new().bits(&rho).done())?;
    let x = CdsStatement::decode(&ctx.recv(Layer::Cds, "STATEMENT").await?, l)?;

    let n_inst = 2 * l;
    let mut ch = Choices { lambda_set: Vec::with_capacity(n_inst), sigma: Vec::with_capacity(n_inst) };
    for _ in 0..n_inst {
        let open: bool = ctx.rng.gen();
        ch.lambda_set.push(open);
        ch.sigma.push(if open { BitString::random(&mut ctx.rng, m) } else { w.clone() });
    }
    ctx.hook("cds.choices", &mut ch)?;
    let flat: Vec<bool> = ch.sigma.iter().flat_map(|s| s.iter()).collect();
    let p = ot_params(ctx)?;
    let how = PotImpl::from_backends(&ctx.backends);
    let got = bbcs::pot_receive(ctx, &p, how, &flat).await?;
    let msg = GarbledMsg::decode(&ctx.recv(Layer::Cds, "GARBLED").await?, l, m, mu_len)?;

    let circ = relation_circuit(&x, &BitString::zeros(mu_len), l)?;
    let public = CdsPublic {
        lambda: l,
        rho: &rho,
        circuit: &circ,
        garbled: &msg.garbled,
        c_star: &msg.c_star,
        label_commits: &msg.label_commits,
    };
    protocol::verify_or_abort(ctx, &public.statement()?, &rho, "garbling consistency").await?;

    let good: Vec<bool> = (0..n_inst)
        .map(|i| {
            (0..m).all(|j| {
                let s = &got[i * m + j];
                let c = &msg.label_commits[i][j][ch.sigma[i].get(j) as usize];
                naor.verify(&rho, c, &s.slice(0, l), &s.slice(l, l))
            })
        })
        .collect();
    if let Some(i) = (0..n_inst).find(|&i| ch.lambda_set[i] && !good[i]) {
        return Err(Error::abort(Layer::Cds, format!("{}: inconsistent opening in checked instance {i}", CdsErr::Err1.tag())));
    }
    let Some(i) = (0..n_inst).find(|&i| !ch.lambda_set[i] && good[i]) else {
        return Err(Error::abort(Layer::Cds, format!("{}: no consistent evaluation instance", CdsErr::Err2.tag())));
    };
    let labels: Vec<u64> = (0..m).map(|j| word(&got[i * m + j].slice(0, l))).collect();
    let out = geval(&circ, &msg.garbled[i], &labels).map_err(|e| Error::abort(Layer::Cds, format!("evaluation failed: {e}")))?;
    let tau = CdsTranscript { rho, x: x.clone(), c_star: msg.c_star, garbled: msg.garbled, label_commits: msg.label_commits };
    Ok(Received { x, mu: decode_output(&out), tau: Some(tau) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{guarded, local_pair, Backends, PotBackend, SoComBackend};
    use crate::transport::run_pair;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn statement(rng: &mut ChaCha20Rng, l: usize, b: bool) -> (CdsStatement, BitString) {
        let naor = Naor::circuit(l).unwrap();
        let rho = BitString::random(rng, 3 * l);
        let r = BitString::random(rng, l);
        let c = naor.commit_bit(&rho, b, &r).unwrap();
        (CdsStatement { rho, c, b }, r)
    }

    #[test]
    fn relation_circuit_matches_relation() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..10 {
            let b = rng.gen();
            let (x, r) = statement(&mut rng, 8, b);
            let mu = BitString::random(&mut rng, 5);
            let c = relation_circuit(&x, &mu, 8).unwrap();
            assert_eq!(decode_output(&c.eval_bits(&r).unwrap().to_bools()), Some(mu.clone()));
            let w = BitString::random(&mut rng, 8);
            let expect = x.relation(&w).then(|| mu.clone());
            assert_eq!(decode_output(&c.eval_bits(&w).unwrap().to_bools()), expect);
            let other = relation_circuit(&x, &BitString::zeros(5), 8).unwrap();
            assert_eq!(Layout::new(&c), Layout::new(&other));
        }
    }

    fn run(seed: u64, backends: Backends, x: CdsStatement, mu: BitString, w: BitString) -> (Result<Option<(CdsTranscript, CdsProof)>>, Result<Received>) {
        let mut pr = local_pair(seed, 8, 2, backends);
        let mu_len = mu.len();
        let (a, b) = (&mut pr.a, &mut pr.b);
        let fa = guarded(a, async |c: &mut Ctx| send(c, &x, &mu).await);
        let fb = guarded(b, async |c: &mut Ctx| receive(c, &w, mu_len).await);
        run_pair(&pr.progress, fa, fb).unwrap()
    }

    fn fast() -> Backends {
        Backends { socom: SoComBackend::Ideal, pot: PotBackend::Ideal, ..Backends::real() }
    }

    #[test]
    fn honest_valid_and_invalid_witness() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for (k, backends) in [fast(), Backends::ideal()].into_iter().enumerate() {
            let (x, r) = statement(&mut rng, 8, true);
            let mu = BitString::random(&mut rng, 6);
            let (s, rcv) = run(20 + k as u64, backends, x.clone(), mu.clone(), r);
            let rcv = rcv.unwrap();
            assert_eq!(rcv.x, x);
            assert_eq!(rcv.mu, Some(mu.clone()));
            if let Some((tau, pi)) = s.unwrap() {
                assert!(ver(&tau, &x, &mu, &pi));
                assert_eq!(rcv.tau.as_ref(), Some(&tau));
                let mut flipped = mu.clone();
                flipped.flip(0);
                assert!(!ver(&tau, &x, &flipped, &CdsProof { mu: flipped.clone(), ..pi }));
            }
            let (s, rcv) = run(30 + k as u64, backends, x, mu, BitString::zeros(8));
            s.unwrap();
            assert_eq!(rcv.unwrap().mu, None);
        }
    }

    #[test]
    fn corrupted_label_in_checked_instance_is_err1() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let (x, r) = statement(&mut rng, 8, true);
        let mu = BitString::random(&mut rng, 3);
        let mut pr = local_pair(9, 8, 2, fast());
        // corrupt every instance: whichever instance lands in Λ trips err1
        pr.a.hooks.on::<Vec<[BitString; 2]>>("cds.ot-inputs", |v, _| {
            for (i, p) in v.iter_mut().enumerate() {
                if i % 8 == 0 {
                    p[0].flip(0);
                    p[1].flip(0);
                }
            }
        });
        let (a, b) = (&mut pr.a, &mut pr.b);
        let fa = guarded(a, async |c: &mut Ctx| send(c, &x, &mu).await);
        let fb = guarded(b, async |c: &mut Ctx| receive(c, &r, 3).await);
        let (_, rcv) = run_pair(&pr.progress, fa, fb).unwrap();
        let e = rcv.unwrap_err();
        assert!(matches!(CdsErr::of(&e), Some(CdsErr::Err1) | Some(CdsErr::Err2)), "{e}");
    }

    #[test]
    fn garbled_tamper_fails_zk() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let (x, r) = statement(&mut rng, 8, true);
        let mu = BitString::random(&mut rng, 3);
        let mut pr = local_pair(11, 8, 4, fast());
        pr.a.hooks.on::<GarbledMsg>("cds.garbled", |g, _| g.garbled[3].const_labels[0] ^= 2);
        let (a, b) = (&mut pr.a, &mut pr.b);
        let fa = guarded(a, async |c: &mut Ctx| send(c, &x, &mu).await);
        let fb = guarded(b, async |c: &mut Ctx| receive(c, &r, 3).await);
        let (_, rcv) = run_pair(&pr.progress, fa, fb).unwrap();
        assert!(matches!(rcv, Err(Error::Abort { layer: Layer::Zk, .. })));
    }
}
