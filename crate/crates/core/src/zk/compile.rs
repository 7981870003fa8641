//! Statement compiler: builds the ZK statements used by the protocol stack
//! from a handful of shared clause circuits.
//!
//! Clause circuits are cached per λ so that all clauses of one kind share a
//! circuit and bitslice together in the engine.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::garble::{keys_from_stream, GarbledCircuit, Layout};
use crate::primitives::bits::BitString;
use crate::primitives::circuit::{Bit, BooleanCircuit, CircuitBuilder, Gate};
use crate::primitives::prg::CfPrg;
use crate::zk::statement::{Seg, Statement};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Kind {
    NaorChunk,
    RowAnd,
    RowXor,
    LabelSelect,
    Decode,
}

fn cached(kind: Kind, lambda: usize) -> Arc<BooleanCircuit> {
    static CACHE: OnceLock<Mutex<HashMap<(Kind, usize), Arc<BooleanCircuit>>>> = OnceLock::new();
    let mut m = CACHE.get_or_init(Default::default).lock().expect("circuit cache poisoned");
    m.entry((kind, lambda))
        .or_insert_with(|| {
            let prg = CfPrg::new(lambda).expect("lambda validated by caller");
            Arc::new(match kind {
                Kind::NaorChunk => naor_chunk_circuit(&prg),
                Kind::RowAnd => row_circuit(&prg, true),
                Kind::RowXor => row_circuit(&prg, false),
                Kind::LabelSelect => label_select_circuit(lambda),
                Kind::Decode => decode_circuit(lambda),
            })
        })
        .clone()
}

/// `[r:λ][m:1][ctr:2λ][ρ:3λ][c:3λ]`: block `ctr` of G(r), plus m·ρ, equals c.
fn naor_chunk_circuit(prg: &CfPrg) -> BooleanCircuit {
    let l = prg.lambda();
    let mut cb = CircuitBuilder::new(9 * l + 1);
    let r = cb.inputs(0, l);
    let m = cb.input(l);
    let lo = cb.inputs(l + 1, l);
    let hi = cb.inputs(2 * l + 1, l);
    let rho = cb.inputs(3 * l + 1, 3 * l);
    let c = cb.inputs(6 * l + 1, 3 * l);
    let g = prg.counter_gadget(&mut cb, &r, &lo, &hi);
    let mr: Vec<Bit> = rho.iter().map(|&x| cb.and(m, x)).collect();
    let v = cb.xor_words(&g, &mr);
    let eq = cb.eq_bits(&v, &c);
    cb.finish(&eq)
}

/// Label with select bit `s` from raw key words: LSB forced to `s`.
fn label_bits(cb: &mut CircuitBuilder, s: Bit, k0: &[Bit], k1: &[Bit]) -> Vec<Bit> {
    let mut out = vec![s];
    for i in 1..k0.len() {
        out.push(cb.mux(s, k0[i], k1[i]));
    }
    out
}

/// `[ka:2λ][kb:2λ][ko:2λ][sa][sb][fla][flb][tweak:λ][row:3λ]`: one row of a
/// garbled table equals the honest encryption under the raw wire keys.
fn row_circuit(prg: &CfPrg, is_and: bool) -> BooleanCircuit {
    let l = prg.lambda();
    let mut cb = CircuitBuilder::new(10 * l + 4);
    let key = |cb: &CircuitBuilder, i: usize| (cb.inputs(2 * l * i, l), cb.inputs(2 * l * i + l, l));
    let (a0, a1) = key(&cb, 0);
    let (b0, b1) = key(&cb, 1);
    let (o0, o1) = key(&cb, 2);
    let p = 6 * l;
    let (sa, sb, fla, flb) = (cb.input(p), cb.input(p + 1), cb.input(p + 2), cb.input(p + 3));
    let tw = cb.inputs(p + 4, l);
    let row = cb.inputs(p + 4 + l, 3 * l);
    let la = label_bits(&mut cb, sa, &a0, &a1);
    let lb = label_bits(&mut cb, sb, &b0, &b1);
    let va = {
        let t = cb.xor(sa, a0[0]);
        cb.xor(t, fla)
    };
    let vb = {
        let t = cb.xor(sb, b0[0]);
        cb.xor(t, flb)
    };
    let v = if is_and { cb.and(va, vb) } else { cb.xor(va, vb) };
    let sel = cb.xor(v, o0[0]);
    let lo = label_bits(&mut cb, sel, &o0, &o1);
    let pad = prg.row_pad_gadget(&mut cb, &la, &tw, &lb);
    let mut want = cb.xor_words(&pad[..l], &lo);
    want.extend_from_slice(&pad[l..]);
    let eq = cb.eq_bits(&want, &row);
    cb.finish(&eq)
}

/// `[k:2λ][v][label:λ]`: label = label_for(v, no flip).
fn label_select_circuit(l: usize) -> BooleanCircuit {
    let mut cb = CircuitBuilder::new(3 * l + 1);
    let k0 = cb.inputs(0, l);
    let k1 = cb.inputs(l, l);
    let v = cb.input(2 * l);
    let target = cb.inputs(2 * l + 1, l);
    let sel = cb.xor(v, k0[0]);
    let lab = label_bits(&mut cb, sel, &k0, &k1);
    let eq = cb.eq_bits(&lab, &target);
    cb.finish(&eq)
}

/// `[k:2λ][fl][d0:λ][d1:λ]`: the decode pair of an output wire.
fn decode_circuit(l: usize) -> BooleanCircuit {
    let mut cb = CircuitBuilder::new(4 * l + 1);
    let k0 = cb.inputs(0, l);
    let k1 = cb.inputs(l, l);
    let fl = cb.input(2 * l);
    let d0 = cb.inputs(2 * l + 1, l);
    let d1 = cb.inputs(3 * l + 1, l);
    let s0 = cb.xor(k0[0], fl);
    let s1 = cb.not(s0);
    let mut lab = label_bits(&mut cb, s0, &k0, &k1);
    lab.extend(label_bits(&mut cb, s1, &k0, &k1));
    let mut d = d0;
    d.extend(d1);
    let eq = cb.eq_bits(&lab, &d);
    cb.finish(&eq)
}

/// Where the bits of a committed message come from.
#[derive(Clone, Debug)]
pub enum MsgSrc {
    Pub(BitString),
    Wit { start: usize, len: usize },
}

impl MsgSrc {
    fn len(&self) -> usize {
        match self {
            MsgSrc::Pub(b) => b.len(),
            MsgSrc::Wit { len, .. } => *len,
        }
    }

    fn bit(&self, k: usize) -> Seg {
        match self {
            MsgSrc::Pub(b) => Seg::bit(b.get(k)),
            MsgSrc::Wit { start, .. } => Seg::wit(start + k, 1),
        }
    }
}

fn ctr_seg(k: usize, lambda: usize) -> Seg {
    Seg::Pub(BitString::from_u64(k as u64, 2 * lambda))
}

/// Adds clauses stating `c = com_ρ(m; r)` for a vector Naor commitment with
/// seed at witness offset `r_start`.
pub fn push_naor(st: &mut Statement, lambda: usize, rho: &BitString, c: &BitString, m: &MsgSrc, r_start: usize) -> Result<()> {
    let b = 3 * lambda;
    if rho.len() != b || c.len() != b * m.len() {
        return Err(Error::Length("commitment does not match message length".into()));
    }
    let circ = cached(Kind::NaorChunk, lambda);
    for k in 0..m.len() {
        st.push(
            &circ,
            vec![Seg::wit(r_start, lambda), m.bit(k), ctr_seg(k, lambda), Seg::Pub(rho.clone()), Seg::Pub(c.slice(b * k, b))],
        )?;
    }
    Ok(())
}

fn check_lambda(lambda: usize) -> Result<()> {
    CfPrg::new(lambda).map(|_| ())
}

/// ∃ r: c = com_ρ(m; r). Witness: r.
pub fn commit_opens_to(lambda: usize, rho: &BitString, c: &BitString, m: &BitString) -> Result<Statement> {
    check_lambda(lambda)?;
    let mut st = Statement::new(lambda);
    push_naor(&mut st, lambda, rho, c, &MsgSrc::Pub(m.clone()), 0)?;
    Ok(st)
}

/// Selective-opening consistency: every c_i is a commitment, and the opened
/// ones commit to the revealed messages.
///
/// Witness layout: seeds r_1..r_k, then the unopened messages in index order.
pub struct SoComConsistency<'a> {
    pub lambda: usize,
    pub rho: &'a BitString,
    pub commits: &'a [BitString],
    pub msg_len: usize,
    /// Opened indices with their messages; indices must be distinct.
    pub opened: &'a [(usize, BitString)],
}

impl SoComConsistency<'_> {
    fn open_map(&self) -> Result<Vec<Option<&BitString>>> {
        let mut m = vec![None; self.commits.len()];
        for (i, msg) in self.opened {
            if *i >= m.len() || m[*i].is_some() || msg.len() != self.msg_len {
                return Err(Error::Precondition("malformed opening set".into()));
            }
            m[*i] = Some(msg);
        }
        Ok(m)
    }

    pub fn statement(&self) -> Result<Statement> {
        check_lambda(self.lambda)?;
        let open = self.open_map()?;
        let k = self.commits.len();
        let hidden = k - self.opened.len();
        let mut st = Statement::new(k * self.lambda + hidden * self.msg_len);
        let mut next = k * self.lambda;
        for (i, c) in self.commits.iter().enumerate() {
            let src = match open[i] {
                Some(m) => MsgSrc::Pub(m.clone()),
                None => {
                    next += self.msg_len;
                    MsgSrc::Wit { start: next - self.msg_len, len: self.msg_len }
                }
            };
            push_naor(&mut st, self.lambda, self.rho, c, &src, i * self.lambda)?;
        }
        Ok(st)
    }

    pub fn witness(&self, seeds: &[BitString], msgs: &[BitString]) -> Result<BitString> {
        let open = self.open_map()?;
        let mut w = BitString::zeros(0);
        for r in seeds {
            w.append(r);
        }
        for (i, m) in msgs.iter().enumerate() {
            if open[i].is_none() {
                w.append(m);
            }
        }
        Ok(w)
    }
}

/// Public side of the CDS consistency proof.
pub struct CdsPublic<'a> {
    pub lambda: usize,
    pub rho: &'a BitString,
    /// The relation circuit G_{x,μ}; its CONST gates, in order, carry μ.
    pub circuit: &'a BooleanCircuit,
    pub garbled: &'a [GarbledCircuit],
    pub c_star: &'a BitString,
    /// `label_commits[i][j][b]` commits to label b of input j of instance i.
    pub label_commits: &'a [Vec<[BitString; 2]>],
}

/// Prover's side of the CDS consistency proof.
pub struct CdsSecret<'a> {
    pub mu: &'a BitString,
    pub r_star: &'a BitString,
    pub seeds: &'a [BitString],
    pub coins: &'a [Vec<[BitString; 2]>],
}

struct CdsLayout {
    mu_len: usize,
    m: usize,
    stream_blocks: usize,
    inst_len: usize,
}

impl CdsLayout {
    fn new(lambda: usize, c: &BooleanCircuit, layout: &Layout) -> CdsLayout {
        let mu_len = layout.consts.len();
        let m = c.n_inputs();
        let stream_blocks = layout.stream_len(lambda).div_ceil(3 * lambda);
        let inst_len = lambda + stream_blocks * 3 * lambda + 4 * m * lambda;
        CdsLayout { mu_len, m, stream_blocks, inst_len }
    }

    fn base(&self, lambda: usize) -> usize {
        self.mu_len + lambda
    }
}

impl CdsPublic<'_> {
    pub fn statement(&self) -> Result<Statement> {
        let l = self.lambda;
        check_lambda(l)?;
        let c = self.circuit;
        let layout = Layout::new(c);
        let lay = CdsLayout::new(l, c, &layout);
        let n = self.garbled.len();
        if self.label_commits.len() != n {
            return Err(Error::Length("instance count mismatch".into()));
        }
        let mut st = Statement::new(lay.base(l) + n * lay.inst_len);
        push_naor(&mut st, l, self.rho, self.c_star, &MsgSrc::Wit { start: 0, len: lay.mu_len }, lay.mu_len)?;
        let chunk = cached(Kind::NaorChunk, l);
        let sel = cached(Kind::LabelSelect, l);
        let dec = cached(Kind::Decode, l);
        let (row_and, row_xor) = (cached(Kind::RowAnd, l), cached(Kind::RowXor, l));
        let zeros_rho = BitString::zeros(3 * l);
        for (i, gc) in self.garbled.iter().enumerate() {
            if gc.lambda != l
                || gc.n_inputs != lay.m
                || gc.rows.len() != layout.tables.len()
                || gc.const_labels.len() != lay.mu_len
                || gc.decode.len() != c.outputs().len()
                || self.label_commits[i].len() != lay.m
            {
                return Err(Error::Length(format!("garbled instance {i} does not match the relation circuit")));
            }
            let seed = lay.base(l) + i * lay.inst_len;
            let stream = seed + l;
            let labels = stream + lay.stream_blocks * 3 * l;
            let coins = labels + 2 * lay.m * l;
            let key = |f: u32| Seg::wit(stream + 2 * l * f as usize, 2 * l);
            for k in 0..lay.stream_blocks {
                st.push(
                    &chunk,
                    vec![Seg::wit(seed, l), Seg::bit(false), ctr_seg(k, l), Seg::Pub(zeros_rho.clone()), Seg::wit(stream + 3 * l * k, 3 * l)],
                )?;
            }
            for (t, &g) in layout.tables.iter().enumerate() {
                let (a, b, circ) = match c.gates()[g] {
                    Gate::And(a, b) => (a, b, &row_and),
                    Gate::Xor(a, b) => (a, b, &row_xor),
                    _ => unreachable!(),
                };
                let (fa, fla) = layout.wire[a as usize];
                let (fb, flb) = layout.wire[b as usize];
                let (fo, _) = layout.wire[c.n_inputs() + g];
                for r in 0..4 {
                    let flags = BitString::from_bools(&[r >> 1 == 1, r & 1 == 1, fla, flb]);
                    let row = &gc.rows[t][r];
                    let mut rb = BitString::from_u64(row[0], l);
                    rb.append(&BitString::from_u64(row[1], l));
                    rb.append(&BitString::from_u64(row[2], l));
                    st.push(
                        circ,
                        vec![
                            key(fa),
                            key(fb),
                            key(fo),
                            Seg::Pub(flags),
                            Seg::word(crate::garble::tweak(g, r), l),
                            Seg::Pub(rb),
                        ],
                    )?;
                }
            }
            for (k, &g) in layout.consts.iter().enumerate() {
                let (f, _) = layout.wire[c.n_inputs() + g];
                st.push(&sel, vec![key(f), Seg::wit(k, 1), Seg::word(gc.const_labels[k], l)])?;
            }
            for (q, &o) in c.outputs().iter().enumerate() {
                let (f, fl) = layout.wire[o as usize];
                let d = gc.decode[q];
                st.push(&dec, vec![key(f), Seg::bit(fl), Seg::word(d[0], l), Seg::word(d[1], l)])?;
            }
            for j in 0..lay.m {
                for b in 0..2 {
                    let lab = labels + (2 * j + b) * l;
                    st.push(&sel, vec![key(j as u32), Seg::bit(b == 1), Seg::wit(lab, l)])?;
                    let src = MsgSrc::Wit { start: lab, len: l };
                    push_naor(&mut st, l, self.rho, &self.label_commits[i][j][b], &src, coins + (2 * j + b) * l)?;
                }
            }
        }
        Ok(st)
    }

    pub fn witness(&self, s: &CdsSecret) -> Result<BitString> {
        let l = self.lambda;
        let prg = CfPrg::new(l)?;
        let c = self.circuit;
        let layout = Layout::new(c);
        let lay = CdsLayout::new(l, c, &layout);
        if s.mu.len() != lay.mu_len || s.seeds.len() != self.garbled.len() || s.coins.len() != self.garbled.len() {
            return Err(Error::Length("CDS witness does not match the public inputs".into()));
        }
        let mut w = s.mu.clone();
        w.append(s.r_star);
        for (seed, coins) in s.seeds.iter().zip(s.coins) {
            w.append(seed);
            let stream = prg.expand(seed, lay.stream_blocks * 3 * l)?;
            let keys = keys_from_stream(&stream, l, layout.n_fresh);
            w.append(&stream);
            for key in keys.iter().take(lay.m) {
                for b in [false, true] {
                    w.append(&BitString::from_u64(key.label_for(b, false), l));
                }
            }
            for cj in coins {
                w.append(&cj[0]);
                w.append(&cj[1]);
            }
        }
        Ok(w)
    }
}

/// ∃ μ, r_a, (r_b,k)_k: c_a = com_{ρ_a}(μ; r_a) as one vector commitment and
/// c_b is a per-message commitment of the same μ split into `msg_len` pieces.
/// With `c_a` absent only the second conjunct is stated.
///
/// Witness layout: μ, r_a (if present), then one seed per message of c_b.
pub struct SameMessage<'a> {
    pub lambda: usize,
    pub a: Option<(&'a BitString, &'a BitString)>,
    pub rho_b: &'a BitString,
    pub c_b: &'a [BitString],
    pub msg_len: usize,
}

impl SameMessage<'_> {
    pub fn statement(&self) -> Result<Statement> {
        let l = self.lambda;
        check_lambda(l)?;
        let mu_len = self.c_b.len() * self.msg_len;
        let ra = if self.a.is_some() { l } else { 0 };
        let mut st = Statement::new(mu_len + ra + self.c_b.len() * l);
        if let Some((rho, c)) = self.a {
            push_naor(&mut st, l, rho, c, &MsgSrc::Wit { start: 0, len: mu_len }, mu_len)?;
        }
        for (i, c) in self.c_b.iter().enumerate() {
            let src = MsgSrc::Wit { start: i * self.msg_len, len: self.msg_len };
            push_naor(&mut st, l, self.rho_b, c, &src, mu_len + ra + i * l)?;
        }
        Ok(st)
    }

    pub fn witness(mu: &BitString, r_a: Option<&BitString>, seeds_b: &[BitString]) -> BitString {
        let mut w = mu.clone();
        if let Some(r) = r_a {
            w.append(r);
        }
        for r in seeds_b {
            w.append(r);
        }
        w
    }
}

/// The opened subset of per-message commitments commits to the revealed
/// messages. Witness: the seeds of the opened messages, in the order given.
pub fn opened_messages(lambda: usize, rho: &BitString, opened: &[(&BitString, &BitString)]) -> Result<Statement> {
    check_lambda(lambda)?;
    let mut st = Statement::new(opened.len() * lambda);
    for (i, (c, m)) in opened.iter().enumerate() {
        push_naor(&mut st, lambda, rho, c, &MsgSrc::Pub((*m).clone()), i * lambda)?;
    }
    Ok(st)
}
