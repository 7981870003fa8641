//! BBCS quantum oblivious transfer over a selective-opening commitment, and
//! its k-fold parallel form with one merged commitment and one opening.
//!
//! Record i of the receiver's commitment is the two bits (θ^B_i, x^B_i).

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Layer, Result};
use crate::primitives::bits::BitString;
use crate::primitives::uhash::UniversalHash;
use crate::qsim::{Basis, QuantumPort, QubitRef};
use crate::session::{Ctx, Oracle};
use crate::socom::{self, SoComKind};
use crate::transport::codec::{Dec, Enc};
use crate::transport::frame::FrameKind;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QotParams {
    pub n: usize,
    pub alpha: f64,
    pub ell: usize,
}

impl QotParams {
    pub fn new(n: usize, alpha: f64, ell: usize) -> Result<QotParams> {
        let p = QotParams { n, alpha, ell };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.25 && self.alpha < 0.5) {
            return Err(Error::Precondition(format!("alpha {} outside (1/4, 1/2)", self.alpha)));
        }
        if self.ell == 0 || self.n < 2 * self.ell || self.n < 4 {
            return Err(Error::Precondition(format!("need n >= max(2*ell, 4), got n={} ell={}", self.n, self.ell)));
        }
        Ok(())
    }

    /// |T| = round(α·n).
    pub fn t_check(&self) -> usize {
        (self.alpha * self.n as f64).round() as usize
    }
}

/// How the sender produces its qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum QMode {
    #[default]
    Prepare,
    /// EPR pairs; the sender measures its halves only after the commitment.
    Epr,
}

/// Which parallel-OT implementation to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotImpl {
    Ideal,
    Real(SoComKind),
}

impl PotImpl {
    /// The implementation used by the inner OTs under `b`.
    pub fn from_backends(b: &crate::session::Backends) -> PotImpl {
        use crate::session::{PotBackend, SoComBackend};
        match (b.pot, b.socom) {
            (PotBackend::Ideal, _) => PotImpl::Ideal,
            (PotBackend::Real, SoComBackend::Ideal) => PotImpl::Real(SoComKind::Ideal),
            (PotBackend::Real, SoComBackend::Plain) => PotImpl::Real(SoComKind::Plain),
        }
    }
}

/// `x|_I` in increasing index order, zero-padded to n bits.
pub fn pad(x: &[bool], idx: &[usize], n: usize) -> BitString {
    let mut sorted = idx.to_vec();
    sorted.sort_unstable();
    let mut out = BitString::zeros(n);
    for (k, &i) in sorted.iter().enumerate() {
        out.set(k, x[i]);
    }
    out
}

pub fn record(theta: Basis, x: bool) -> BitString {
    BitString::from_bools(&[theta.bit(), x])
}

/// Honest partition: I_c gets the matching bases outside T.
pub fn partition(c: bool, rest: &[usize], theta_a: &[Basis], theta_b: &[Basis]) -> [Vec<usize>; 2] {
    let mut parts: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (k, &i) in rest.iter().enumerate() {
        let same = theta_a[k] == theta_b[i];
        parts[(c ^ !same) as usize].push(i);
    }
    parts
}

/// Complement of T in [n], increasing.
pub fn complement(t: &[usize], n: usize) -> Vec<usize> {
    let mut in_t = vec![false; n];
    for &i in t {
        in_t[i] = true;
    }
    (0..n).filter(|&i| !in_t[i]).collect()
}

/// Valid iff I_0 and I_1 partition `rest`.
pub fn check_partition(parts: &[Vec<usize>; 2], rest: &[usize], n: usize) -> bool {
    let mut mark = vec![0u8; n];
    for &i in rest {
        mark[i] = 1;
    }
    for p in parts {
        for &i in p {
            if i >= n || mark[i] != 1 {
                return false;
            }
            mark[i] = 2;
        }
    }
    mark.iter().all(|&m| m != 1)
}

pub fn encode_qubits(qs: &[QubitRef]) -> Vec<u8> {
    Enc::new().u64s(&qs.iter().map(|q| q.0).collect::<Vec<_>>()).done()
}

pub fn decode_qubits(body: &[u8], count: usize) -> Result<Vec<QubitRef>> {
    let mut d = Dec::new(body);
    let v = d.u64s()?;
    d.finish()?;
    if v.len() != count {
        return Err(Error::abort(Layer::Bbcs, format!("expected {count} qubits, got {}", v.len())));
    }
    Ok(v.into_iter().map(QubitRef).collect())
}

pub fn encode_partition(parts: &[[Vec<usize>; 2]]) -> Vec<u8> {
    let mut e = Enc::new().u32(parts.len() as u32);
    for p in parts {
        e = e.indices(&p[0]).indices(&p[1]);
    }
    e.done()
}

pub fn decode_partition(body: &[u8], k: usize) -> Result<Vec<[Vec<usize>; 2]>> {
    let mut d = Dec::new(body);
    if d.u32()? as usize != k {
        return Err(Error::abort(Layer::Bbcs, "partition count"));
    }
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        out.push([d.indices()?, d.indices()?]);
    }
    d.finish()?;
    Ok(out)
}

/// One TRANSFER entry: (f, m_0, m_1).
pub type Transfer = (UniversalHash, BitString, BitString);

pub fn encode_transfer(t: &[Transfer]) -> Vec<u8> {
    let mut e = Enc::new().u32(t.len() as u32);
    for (f, m0, m1) in t {
        e = e.bits(f.desc()).bits(m0).bits(m1);
    }
    e.done()
}

pub fn decode_transfer(body: &[u8], k: usize, p: &QotParams) -> Result<Vec<Transfer>> {
    let mut d = Dec::new(body);
    if d.u32()? as usize != k {
        return Err(Error::abort(Layer::Bbcs, "transfer count"));
    }
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let f = UniversalHash::from_desc(d.bits_len(p.n + p.ell - 1)?, p.n, p.ell)?;
        out.push((f, d.bits_len(p.ell)?, d.bits_len(p.ell)?));
    }
    d.finish()?;
    Ok(out)
}

/// Receiver's decoding: s = m_c ⊕ f(pad(x^B|_{I_c})).
pub fn decode_output(t: &Transfer, c: bool, xb: &[bool], ic: &[usize], n: usize) -> Result<BitString> {
    let m = if c { &t.2 } else { &t.1 };
    Ok(m.xor(&t.0.apply(&pad(xb, ic, n))?))
}

/// Sender's quantum preamble. Returns the handles now owned by the receiver
/// and, in EPR mode, the sender's own halves.
pub fn send_qubits(q: &mut QuantumPort, xa: &[bool], theta_a: &[Basis], mode: QMode, to: u8) -> Result<(Vec<QubitRef>, Vec<QubitRef>)> {
    match mode {
        QMode::Prepare => {
            let prep: Vec<_> = xa.iter().copied().zip(theta_a.iter().copied()).collect();
            let hs = q.prepare(&prep)?;
            Ok((q.transmit(&hs, to)?, Vec::new()))
        }
        QMode::Epr => {
            let pairs = q.epr(xa.len())?;
            let (own, other): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            Ok((q.transmit(&other, to)?, own))
        }
    }
}

/// Receiver's measurement record before it is committed.
pub struct Measured {
    pub theta_b: Vec<Basis>,
    pub xb: Vec<bool>,
}

/// Sender of k parallel OTs; `inputs[i]` is instance i's pair of ℓ-bit strings.
pub async fn pot_send(ctx: &mut Ctx, p: &QotParams, how: PotImpl, mode: QMode, inputs: Vec<[BitString; 2]>) -> Result<()> {
    p.validate()?;
    if inputs.iter().any(|s| s[0].len() != p.ell || s[1].len() != p.ell) {
        return Err(Error::Precondition(format!("OT strings must have {} bits", p.ell)));
    }
    ctx.ch.begin(Layer::Bbcs);
    let r = match how {
        PotImpl::Ideal => {
            let idx = ctx.oracle_call(Oracle::Pot, Layer::Bbcs, "POT_SEND");
            ctx.hub()?.pot_send(idx, inputs);
            Ok(())
        }
        PotImpl::Real(kind) => send_real(ctx, p, kind, mode, inputs).await,
    };
    ctx.ch.end(Layer::Bbcs);
    r
}

async fn send_real(ctx: &mut Ctx, p: &QotParams, kind: SoComKind, mode: QMode, inputs: Vec<[BitString; 2]>) -> Result<()> {
    let (k, n) = (inputs.len(), p.n);
    let total = k * n;
    let xa_pre: Vec<bool> = (0..total).map(|_| ctx.rng.gen()).collect();
    let theta_a: Vec<Basis> = (0..total).map(|_| Basis::from_bit(ctx.rng.gen())).collect();
    let to = 1 - ctx.party as u8;
    let (sent, own) = send_qubits(&mut ctx.q, &xa_pre, &theta_a, mode, to)?;
    ctx.ch.send_kind(FrameKind::QubitRef, Layer::Bbcs, "QUBITS", encode_qubits(&sent))?;

    let mut rec = socom::Receiver::new(kind);
    rec.receive(ctx, total, 2).await?;
    let xa = match mode {
        QMode::Prepare => xa_pre,
        QMode::Epr => {
            let m: Vec<_> = own.iter().copied().zip(theta_a.iter().copied()).collect();
            ctx.q.measure(&m)?
        }
    };

    let tsize = p.t_check();
    let mut tsets: Vec<Vec<usize>> = Vec::with_capacity(k);
    let mut subset = Vec::with_capacity(k * tsize);
    for inst in 0..k {
        let mut t = sample(&mut ctx.rng, n, tsize).into_vec();
        t.sort_unstable();
        subset.extend(t.iter().map(|&i| inst * n + i));
        tsets.push(t);
    }
    let opened = rec.open(ctx, &subset).await?;
    for (&g, rec) in subset.iter().zip(&opened) {
        let (tb, xb) = (Basis::from_bit(rec.get(0)), rec.get(1));
        if tb == theta_a[g] && xb != xa[g] {
            return Err(Error::abort(Layer::Bbcs, format!("check failed at instance {} index {}", g / n, g % n)));
        }
    }

    let rests: Vec<Vec<usize>> = tsets.iter().map(|t| complement(t, n)).collect();
    let mut reveal = BitString::zeros(0);
    for (inst, rest) in rests.iter().enumerate() {
        for &i in rest {
            reveal.push(theta_a[inst * n + i].bit());
        }
    }
    ctx.send(Layer::Bbcs, "BASES_REVEAL", Enc::new().bits(&reveal).done())?;

    let body = ctx.recv(Layer::Bbcs, "PARTITION").await?;
    let parts = decode_partition(&body, k)?;
    let mut transfer = Vec::with_capacity(k);
    for inst in 0..k {
        if !check_partition(&parts[inst], &rests[inst], n) {
            return Err(Error::abort(Layer::Bbcs, format!("malformed partition in instance {inst}")));
        }
        let xs = &xa[inst * n..(inst + 1) * n];
        let f = UniversalHash::sample(&mut ctx.rng, n, p.ell);
        let m0 = inputs[inst][0].xor(&f.apply(&pad(xs, &parts[inst][0], n))?);
        let m1 = inputs[inst][1].xor(&f.apply(&pad(xs, &parts[inst][1], n))?);
        transfer.push((f, m0, m1));
    }
    ctx.hook("bbcs.transfer", &mut transfer)?;
    ctx.send(Layer::Bbcs, "TRANSFER", encode_transfer(&transfer))?;
    Ok(())
}

/// Receiver of k parallel OTs with choice bits `choices`.
pub async fn pot_receive(ctx: &mut Ctx, p: &QotParams, how: PotImpl, choices: &[bool]) -> Result<Vec<BitString>> {
    p.validate()?;
    ctx.ch.begin(Layer::Bbcs);
    let r = match how {
        PotImpl::Ideal => {
            let idx = ctx.oracle_call(Oracle::Pot, Layer::Bbcs, "POT_RECEIVE");
            ctx.hub()?.pot_receive(ctx.party, idx, choices.to_vec()).await
        }
        PotImpl::Real(kind) => receive_real(ctx, p, kind, choices).await,
    };
    ctx.ch.end(Layer::Bbcs);
    r
}

async fn receive_real(ctx: &mut Ctx, p: &QotParams, kind: SoComKind, choices: &[bool]) -> Result<Vec<BitString>> {
    let (k, n) = (choices.len(), p.n);
    let total = k * n;
    let body = ctx.recv(Layer::Bbcs, "QUBITS").await?;
    let qs = decode_qubits(&body, total)?;
    let theta_b: Vec<Basis> = (0..total).map(|_| Basis::from_bit(ctx.rng.gen())).collect();
    let m: Vec<_> = qs.iter().copied().zip(theta_b.iter().copied()).collect();
    let xb = ctx.q.measure(&m)?;
    let mut meas = Measured { theta_b, xb };
    ctx.hook("bbcs.measured", &mut meas)?;
    let mut records: Vec<BitString> = meas.theta_b.iter().zip(&meas.xb).map(|(&t, &x)| record(t, x)).collect();
    ctx.hook("bbcs.commit-bases", &mut records)?;

    let mut com = socom::Committer::new(kind);
    com.commit(ctx, records).await?;
    let subset = com.open(ctx).await?;
    let mut tsets: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &g in &subset {
        tsets[g / n].push(g % n);
    }
    if tsets.iter().any(|t| t.len() != p.t_check()) {
        return Err(Error::abort(Layer::Bbcs, "checking set has the wrong size"));
    }

    let body = ctx.recv(Layer::Bbcs, "BASES_REVEAL").await?;
    let rests: Vec<Vec<usize>> = tsets.iter().map(|t| complement(t, n)).collect();
    let per = n - p.t_check();
    let mut d = Dec::new(&body);
    let reveal = d.bits_len(k * per)?;
    d.finish()?;
    let mut parts = Vec::with_capacity(k);
    for inst in 0..k {
        let ta: Vec<Basis> = (0..per).map(|j| Basis::from_bit(reveal.get(inst * per + j))).collect();
        let tb = &meas.theta_b[inst * n..(inst + 1) * n];
        parts.push(partition(choices[inst], &rests[inst], &ta, tb));
    }
    ctx.hook("bbcs.partition", &mut parts)?;
    ctx.send(Layer::Bbcs, "PARTITION", encode_partition(&parts))?;

    let body = ctx.recv(Layer::Bbcs, "TRANSFER").await?;
    let transfer = decode_transfer(&body, k, p)?;
    (0..k)
        .map(|inst| {
            let xs = &meas.xb[inst * n..(inst + 1) * n];
            decode_output(&transfer[inst], choices[inst], xs, &parts[inst][choices[inst] as usize], n)
        })
        .collect()
}

/// Single OT: the k = 1 case of the parallel protocol.
pub async fn qot_send(ctx: &mut Ctx, p: &QotParams, how: PotImpl, mode: QMode, s0: BitString, s1: BitString) -> Result<()> {
    pot_send(ctx, p, how, mode, vec![[s0, s1]]).await
}

pub async fn qot_receive(ctx: &mut Ctx, p: &QotParams, how: PotImpl, c: bool) -> Result<BitString> {
    Ok(pot_receive(ctx, p, how, &[c]).await?.remove(0))
}
