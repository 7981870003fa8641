//! Bitsliced three-party evaluation of statements (MPC-in-the-head core).
//!
//! Clauses with the same circuit and the same segment shape form a group;
//! each group is evaluated 64 clauses per machine word. Wire publicness is
//! resolved at compile time, so XOR/NOT with public values touch only party
//! 0's share and AND with a public value is local. Secret ANDs use
//! z_i = x_i y_i ⊕ x_{i+1} y_i ⊕ x_i y_{i+1} ⊕ R_i ⊕ R_{i+1}.

use std::collections::HashMap;
use std::sync::Arc;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::primitives::bits::BitString;
use crate::primitives::circuit::{BooleanCircuit, Gate};
use crate::zk::statement::{Seg, Statement};

#[derive(Clone, Copy, Debug)]
enum Op {
    XorSS(u32, u32, u32),
    XorSP(u32, u32, u32),
    XorPP(u32, u32, u32),
    AndSS(u32, u32, u32),
    AndSP(u32, u32, u32),
    AndPP(u32, u32, u32),
    NotS(u32, u32),
    NotP(u32, u32),
    Const(u32, bool),
}

#[derive(Debug)]
struct Batch {
    lanes: usize,
    mask: u64,
    /// One word per public input wire.
    pub_in: Vec<u64>,
    /// Per witness segment, the start offset for each lane.
    wit_starts: Vec<Vec<u32>>,
}

#[derive(Debug)]
struct Group {
    ops: Vec<Op>,
    n_sec: usize,
    n_pub: usize,
    /// Length of each witness segment, in input order.
    wit_lens: Vec<usize>,
    n_and: usize,
    outputs: Vec<(bool, u32)>,
    /// Public input wires occupy the first public slots.
    pub_inputs: usize,
    batches: Vec<Batch>,
}

/// Output of a three-party (prover-side) evaluation.
#[derive(Debug)]
pub struct ThreeParty {
    pub views: [Vec<u64>; 3],
    pub outs: [Vec<u64>; 3],
    /// All public outputs equal 1.
    pub pub_ok: bool,
}

/// Output of a two-party (verifier or simulator) evaluation of parties e, e+1.
#[derive(Debug)]
pub struct TwoParty {
    pub view_a: Vec<u64>,
    pub view_b: Vec<u64>,
    pub out_a: Vec<u64>,
    pub out_b: Vec<u64>,
    pub pub_ok: bool,
}

/// Prover-side deviation used by cheating strategies: XOR `mask` into the
/// AND output number `and_index` of party `party`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ViewTamper {
    pub flip: Option<(usize, usize, u64)>,
}

/// Source of the second party's AND outputs in two-party evaluation.
pub enum BView<'a> {
    Given(&'a [u64]),
    Random(&'a mut dyn RngCore),
}

pub fn transpose64(a: &mut [u64; 64]) {
    let mut j = 32usize;
    let mut m: u64 = 0x0000_0000_FFFF_FFFF;
    while j != 0 {
        let mut k = 0usize;
        while k < 64 {
            let t = ((a[k] >> j) ^ a[k + j]) & m;
            a[k] ^= t << j;
            a[k + j] ^= t;
            k = (k + j + 1) & !j;
        }
        j >>= 1;
        m ^= m << j;
    }
}

#[derive(Debug)]
pub struct Compiled {
    groups: Vec<Group>,
    witness_len: usize,
    and_words: usize,
    out_masks: Vec<u64>,
}

impl Compiled {
    pub fn new(st: &Statement) -> Result<Compiled> {
        type Key = (usize, Vec<(bool, usize)>);
        let mut index: HashMap<Key, usize> = HashMap::new();
        let mut members: Vec<(Arc<BooleanCircuit>, Vec<(bool, usize)>, Vec<usize>)> = Vec::new();
        for (ci, c) in st.clauses.iter().enumerate() {
            let shape: Vec<(bool, usize)> =
                c.inputs.iter().map(|s| (matches!(s, Seg::Pub(_)), s.len())).collect();
            let key = (Arc::as_ptr(&c.circuit) as usize, shape.clone());
            let gi = *index.entry(key).or_insert_with(|| {
                members.push((c.circuit.clone(), shape, Vec::new()));
                members.len() - 1
            });
            members[gi].2.push(ci);
        }
        let mut groups = Vec::with_capacity(members.len());
        let mut and_words = 0;
        let mut out_masks = Vec::new();
        for (circ, shape, clauses) in members {
            let mut g = compile_group(&circ, &shape)?;
            for chunk in clauses.chunks(64) {
                let lanes = chunk.len();
                let mask = if lanes == 64 { u64::MAX } else { (1u64 << lanes) - 1 };
                let mut pub_in = vec![0u64; g.n_pub_inputs()];
                let mut wit_starts: Vec<Vec<u32>> = vec![Vec::with_capacity(lanes); g.wit_lens.len()];
                for (l, &ci) in chunk.iter().enumerate() {
                    let mut p = 0;
                    let mut wi = 0;
                    for s in &st.clauses[ci].inputs {
                        match s {
                            Seg::Pub(b) => {
                                for bit in b.iter() {
                                    pub_in[p] |= (bit as u64) << l;
                                    p += 1;
                                }
                            }
                            Seg::Wit { start, .. } => {
                                wit_starts[wi].push(*start as u32);
                                wi += 1;
                            }
                        }
                    }
                }
                and_words += g.n_and;
                for &(is_pub, _) in &g.outputs {
                    if !is_pub {
                        out_masks.push(mask);
                    }
                }
                g.batches.push(Batch { lanes, mask, pub_in, wit_starts });
            }
            groups.push(g);
        }
        Ok(Compiled { groups, witness_len: st.witness_len, and_words, out_masks })
    }

    pub fn witness_len(&self) -> usize {
        self.witness_len
    }

    /// Number of secret AND words in one party's view.
    pub fn and_words(&self) -> usize {
        self.and_words
    }

    /// Lane masks of the secret output words, in output order.
    pub fn out_masks(&self) -> &[u64] {
        &self.out_masks
    }

    /// Plain evaluation: does `w` satisfy every clause?
    pub fn holds(&self, w: &BitString) -> Result<bool> {
        if w.len() != self.witness_len {
            return Err(Error::Length(format!("witness has {} bits, expected {}", w.len(), self.witness_len)));
        }
        let mut ok = true;
        for g in &self.groups {
            let mut sec = vec![0u64; g.n_sec];
            let mut pubv = vec![0u64; g.n_pub];
            for b in &g.batches {
                g.load(b, w, &mut sec, &mut pubv);
                for op in &g.ops {
                    match *op {
                        Op::XorSS(o, a, c) => sec[o as usize] = sec[a as usize] ^ sec[c as usize],
                        Op::XorSP(o, a, c) => sec[o as usize] = sec[a as usize] ^ pubv[c as usize],
                        Op::AndSS(o, a, c) => sec[o as usize] = sec[a as usize] & sec[c as usize],
                        Op::AndSP(o, a, c) => sec[o as usize] = sec[a as usize] & pubv[c as usize],
                        Op::NotS(o, a) => sec[o as usize] = !sec[a as usize],
                        op => eval_pub(op, &mut pubv),
                    }
                }
                for &(is_pub, s) in &g.outputs {
                    let v = if is_pub { pubv[s as usize] } else { sec[s as usize] };
                    ok &= v & b.mask == b.mask;
                }
            }
        }
        Ok(ok)
    }

    pub fn prove3(&self, shares: [&BitString; 3], tapes: &mut [&mut dyn RngCore; 3], tamper: ViewTamper) -> ThreeParty {
        let mut views: [Vec<u64>; 3] = std::array::from_fn(|_| Vec::with_capacity(self.and_words));
        let mut outs: [Vec<u64>; 3] = std::array::from_fn(|_| Vec::with_capacity(self.out_masks.len()));
        let mut pub_ok = true;
        let mut and_index = 0usize;
        for g in &self.groups {
            let mut sec = vec![[0u64; 3]; g.n_sec];
            let mut tmp = vec![0u64; g.n_sec];
            let mut pubv = vec![0u64; g.n_pub];
            for b in &g.batches {
                for e in 0..3 {
                    g.load(b, shares[e], &mut tmp, &mut pubv);
                    for (s, t) in sec.iter_mut().zip(&tmp).take(g.n_wit_inputs()) {
                        s[e] = *t;
                    }
                }
                for op in &g.ops {
                    match *op {
                        Op::XorSS(o, a, c) => {
                            let (x, y) = (sec[a as usize], sec[c as usize]);
                            sec[o as usize] = [x[0] ^ y[0], x[1] ^ y[1], x[2] ^ y[2]];
                        }
                        Op::XorSP(o, a, c) => {
                            let mut x = sec[a as usize];
                            x[0] ^= pubv[c as usize];
                            sec[o as usize] = x;
                        }
                        Op::AndSP(o, a, c) => {
                            let (x, p) = (sec[a as usize], pubv[c as usize]);
                            sec[o as usize] = [x[0] & p, x[1] & p, x[2] & p];
                        }
                        Op::NotS(o, a) => {
                            let mut x = sec[a as usize];
                            x[0] = !x[0];
                            sec[o as usize] = x;
                        }
                        Op::AndSS(o, a, c) => {
                            let (x, y) = (sec[a as usize], sec[c as usize]);
                            let r = [tapes[0].next_u64(), tapes[1].next_u64(), tapes[2].next_u64()];
                            let mut z = [0u64; 3];
                            for i in 0..3 {
                                let j = (i + 1) % 3;
                                z[i] = (x[i] & y[i]) ^ (x[j] & y[i]) ^ (x[i] & y[j]) ^ r[i] ^ r[j];
                            }
                            if let Some((party, idx, m)) = tamper.flip {
                                if idx == and_index {
                                    z[party] ^= m;
                                }
                            }
                            and_index += 1;
                            for i in 0..3 {
                                views[i].push(z[i]);
                            }
                            sec[o as usize] = z;
                        }
                        op => eval_pub(op, &mut pubv),
                    }
                }
                for &(is_pub, s) in &g.outputs {
                    if is_pub {
                        pub_ok &= pubv[s as usize] & b.mask == b.mask;
                    } else {
                        for i in 0..3 {
                            outs[i].push(sec[s as usize][i] & b.mask);
                        }
                    }
                }
            }
        }
        ThreeParty { views, outs, pub_ok }
    }

    /// Evaluates parties a = e and b = e + 1 (mod 3). Party a's AND outputs
    /// are recomputed; party b's come from `bview`.
    pub fn eval2(
        &self,
        e: usize,
        share_a: &BitString,
        share_b: &BitString,
        tape_a: &mut dyn RngCore,
        tape_b: &mut dyn RngCore,
        mut bview: BView<'_>,
    ) -> Result<TwoParty> {
        if let BView::Given(v) = &bview {
            if v.len() != self.and_words {
                return Err(Error::Decode(format!("view has {} words, expected {}", v.len(), self.and_words)));
            }
        }
        let a0 = e == 0;
        let b0 = e == 2;
        let mut view_a = Vec::with_capacity(self.and_words);
        let mut view_b = Vec::with_capacity(self.and_words);
        let mut out_a = Vec::with_capacity(self.out_masks.len());
        let mut out_b = Vec::with_capacity(self.out_masks.len());
        let mut pub_ok = true;
        let mut k = 0usize;
        for g in &self.groups {
            let mut sa = vec![0u64; g.n_sec];
            let mut sb = vec![0u64; g.n_sec];
            let mut pubv = vec![0u64; g.n_pub];
            for b in &g.batches {
                g.load(b, share_a, &mut sa, &mut pubv);
                g.load(b, share_b, &mut sb, &mut pubv);
                for op in &g.ops {
                    match *op {
                        Op::XorSS(o, x, y) => {
                            sa[o as usize] = sa[x as usize] ^ sa[y as usize];
                            sb[o as usize] = sb[x as usize] ^ sb[y as usize];
                        }
                        Op::XorSP(o, x, p) => {
                            let pv = pubv[p as usize];
                            sa[o as usize] = sa[x as usize] ^ if a0 { pv } else { 0 };
                            sb[o as usize] = sb[x as usize] ^ if b0 { pv } else { 0 };
                        }
                        Op::AndSP(o, x, p) => {
                            let pv = pubv[p as usize];
                            sa[o as usize] = sa[x as usize] & pv;
                            sb[o as usize] = sb[x as usize] & pv;
                        }
                        Op::NotS(o, x) => {
                            sa[o as usize] = if a0 { !sa[x as usize] } else { sa[x as usize] };
                            sb[o as usize] = if b0 { !sb[x as usize] } else { sb[x as usize] };
                        }
                        Op::AndSS(o, x, y) => {
                            let (xa, ya, xb, yb) = (sa[x as usize], sa[y as usize], sb[x as usize], sb[y as usize]);
                            let ra = tape_a.next_u64();
                            let rb = tape_b.next_u64();
                            let za = (xa & ya) ^ (xb & ya) ^ (xa & yb) ^ ra ^ rb;
                            let zb = match &mut bview {
                                BView::Given(v) => v[k],
                                BView::Random(r) => r.next_u64(),
                            };
                            k += 1;
                            view_a.push(za);
                            view_b.push(zb);
                            sa[o as usize] = za;
                            sb[o as usize] = zb;
                        }
                        op => eval_pub(op, &mut pubv),
                    }
                }
                for &(is_pub, s) in &g.outputs {
                    if is_pub {
                        pub_ok &= pubv[s as usize] & b.mask == b.mask;
                    } else {
                        out_a.push(sa[s as usize] & b.mask);
                        out_b.push(sb[s as usize] & b.mask);
                    }
                }
            }
        }
        Ok(TwoParty { view_a, view_b, out_a, out_b, pub_ok })
    }
}

fn eval_pub(op: Op, pubv: &mut [u64]) {
    match op {
        Op::XorPP(o, a, b) => pubv[o as usize] = pubv[a as usize] ^ pubv[b as usize],
        Op::AndPP(o, a, b) => pubv[o as usize] = pubv[a as usize] & pubv[b as usize],
        Op::NotP(o, a) => pubv[o as usize] = !pubv[a as usize],
        Op::Const(o, v) => pubv[o as usize] = if v { u64::MAX } else { 0 },
        _ => unreachable!("secret op in public evaluator"),
    }
}

impl Group {
    fn n_wit_inputs(&self) -> usize {
        self.wit_lens.iter().sum()
    }

    fn n_pub_inputs(&self) -> usize {
        self.pub_inputs
    }

    /// Fills witness input words for one party and the public input words.
    fn load(&self, b: &Batch, share: &BitString, sec: &mut [u64], pubv: &mut [u64]) {
        pubv[..b.pub_in.len()].copy_from_slice(&b.pub_in);
        let mut slot = 0usize;
        let mut rows = [0u64; 64];
        for (si, &len) in self.wit_lens.iter().enumerate() {
            let starts = &b.wit_starts[si];
            let mut off = 0usize;
            while off < len {
                let take = (len - off).min(64);
                for (l, row) in rows.iter_mut().enumerate() {
                    *row = if l < b.lanes { share.get_bits(starts[l] as usize + off, take) } else { 0 };
                }
                transpose64(&mut rows);
                sec[slot..slot + take].copy_from_slice(&rows[..take]);
                slot += take;
                off += take;
            }
        }
    }
}

fn compile_group(c: &BooleanCircuit, shape: &[(bool, usize)]) -> Result<Group> {
    // slot of each wire: (is_pub, index)
    let mut slot: Vec<(bool, u32)> = Vec::with_capacity(c.n_wires());
    let mut n_sec = 0u32;
    let mut n_pub = 0u32;
    let mut wit_lens = Vec::new();
    for &(is_pub, len) in shape {
        if !is_pub {
            wit_lens.push(len);
        }
        for _ in 0..len {
            if is_pub {
                slot.push((true, n_pub));
                n_pub += 1;
            } else {
                slot.push((false, n_sec));
                n_sec += 1;
            }
        }
    }
    let pub_inputs = n_pub as usize;
    let mut ops = Vec::with_capacity(c.gates().len());
    let mut n_and = 0usize;
    for g in c.gates() {
        let (is_pub, op) = match *g {
            Gate::Xor(a, b) | Gate::And(a, b) => {
                let (pa, sa) = slot[a as usize];
                let (pb, sb) = slot[b as usize];
                let is_and = matches!(g, Gate::And(..));
                match (pa, pb) {
                    (true, true) => {
                        let o = n_pub;
                        (true, if is_and { Op::AndPP(o, sa, sb) } else { Op::XorPP(o, sa, sb) })
                    }
                    (false, false) => {
                        let o = n_sec;
                        if is_and {
                            n_and += 1;
                            (false, Op::AndSS(o, sa, sb))
                        } else {
                            (false, Op::XorSS(o, sa, sb))
                        }
                    }
                    (false, true) | (true, false) => {
                        let (s, p) = if pa { (sb, sa) } else { (sa, sb) };
                        let o = n_sec;
                        (false, if is_and { Op::AndSP(o, s, p) } else { Op::XorSP(o, s, p) })
                    }
                }
            }
            Gate::Not(a) => {
                let (pa, sa) = slot[a as usize];
                if pa {
                    (true, Op::NotP(n_pub, sa))
                } else {
                    (false, Op::NotS(n_sec, sa))
                }
            }
            Gate::Const(v) => (true, Op::Const(n_pub, v)),
        };
        if is_pub {
            slot.push((true, n_pub));
            n_pub += 1;
        } else {
            slot.push((false, n_sec));
            n_sec += 1;
        }
        ops.push(op);
    }
    let outputs = c.outputs().iter().map(|&o| slot[o as usize]).collect();
    Ok(Group {
        ops,
        n_sec: n_sec as usize,
        n_pub: n_pub as usize,
        wit_lens,
        n_and,
        outputs,
        batches: Vec::new(),
        pub_inputs,
    })
}
