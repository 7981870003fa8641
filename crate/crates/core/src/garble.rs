//! Seed-derandomized Yao garbling with point-and-permute.
//!
//! Every "fresh" wire (inputs and outputs of XOR, AND and CONST gates) gets
//! 2λ bits of the circuit-friendly PRG stream: the first λ bits are label 0
//! (LSB forced to 0, and its original LSB is the permute bit p), the next λ
//! bits are label 1 (LSB forced to 1). NOT gates are free: their output reuses
//! the input labels with the semantic flip bit toggled. A label's LSB is its
//! select bit s, and the semantic value is s ⊕ p ⊕ flip.
//!
//! Row (s_a, s_b) of a table gate is
//! `row_pad(L_a^{s_a}, tweak, L_b^{s_b}) ⊕ (L_out^{s_out} ∥ 0^{2λ})`.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::primitives::bits::BitString;
use crate::primitives::circuit::{BooleanCircuit, Gate};
use crate::primitives::prg::CfPrg;

/// Where each wire's labels come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    /// `(fresh index, flip)` for every wire.
    pub wire: Vec<(u32, bool)>,
    pub n_fresh: usize,
    /// Indices (into the gate list) of XOR/AND gates, in order.
    pub tables: Vec<usize>,
    /// Indices of CONST gates, in order.
    pub consts: Vec<usize>,
}

impl Layout {
    pub fn new(c: &BooleanCircuit) -> Layout {
        let n = c.n_inputs();
        let mut wire: Vec<(u32, bool)> = (0..n as u32).map(|i| (i, false)).collect();
        let mut n_fresh = n;
        let mut tables = Vec::new();
        let mut consts = Vec::new();
        for (g, gate) in c.gates().iter().enumerate() {
            match *gate {
                Gate::Not(a) => {
                    let (f, fl) = wire[a as usize];
                    wire.push((f, !fl));
                }
                Gate::Xor(..) | Gate::And(..) => {
                    tables.push(g);
                    wire.push((n_fresh as u32, false));
                    n_fresh += 1;
                }
                Gate::Const(_) => {
                    consts.push(g);
                    wire.push((n_fresh as u32, false));
                    n_fresh += 1;
                }
            }
        }
        Layout { wire, n_fresh, tables, consts }
    }

    /// Length of the PRG stream consumed by garbling.
    pub fn stream_len(&self, lambda: usize) -> usize {
        2 * lambda * self.n_fresh
    }
}

/// Both labels and the permute bit of one fresh wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WireKeys {
    pub l: [u64; 2],
    pub p: bool,
}

impl WireKeys {
    pub fn from_raw(raw0: u64, raw1: u64) -> WireKeys {
        WireKeys { l: [raw0 & !1, raw1 | 1], p: raw0 & 1 == 1 }
    }

    /// Label carrying semantic value `v` on a wire with the given flip.
    pub fn label_for(&self, v: bool, flip: bool) -> u64 {
        self.l[(v ^ self.p ^ flip) as usize]
    }
}

pub fn keys_from_stream(stream: &BitString, lambda: usize, n_fresh: usize) -> Vec<WireKeys> {
    (0..n_fresh)
        .map(|f| {
            let base = 2 * lambda * f;
            WireKeys::from_raw(stream.get_bits(base, lambda), stream.get_bits(base + lambda, lambda))
        })
        .collect()
}

pub fn tweak(gate: usize, row: usize) -> u64 {
    (4 * gate + row) as u64
}

/// Encoding information e: `(label for 0, label for 1)` per input wire.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoding {
    pub labels: Vec<[u64; 2]>,
}

impl Encoding {
    pub fn enc(&self, x: &[bool]) -> Result<Vec<u64>> {
        if x.len() != self.labels.len() {
            return Err(Error::Length(format!("enc expects {} bits, got {}", self.labels.len(), x.len())));
        }
        Ok(x.iter().zip(&self.labels).map(|(&b, l)| l[b as usize]).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GarbledCircuit {
    pub lambda: usize,
    pub n_inputs: usize,
    /// Four rows of three λ-bit words per table gate, indexed 2·s_a + s_b.
    pub rows: Vec<[[u64; 3]; 4]>,
    /// Active label of every CONST gate.
    pub const_labels: Vec<u64>,
    /// `(label meaning 0, label meaning 1)` per output wire.
    pub decode: Vec<[u64; 2]>,
}

pub fn garb(c: &BooleanCircuit, seed: &BitString, lambda: usize) -> Result<(GarbledCircuit, Encoding)> {
    let prg = CfPrg::new(lambda)?;
    let layout = Layout::new(c);
    let limit = if 2 * lambda >= 64 { u64::MAX } else { (3 * lambda as u64) << (2 * lambda) };
    if layout.stream_len(lambda) as u64 > limit {
        return Err(Error::Precondition("circuit too large for the label stream at this lambda".into()));
    }
    let stream = prg.expand(seed, layout.stream_len(lambda))?;
    let keys = keys_from_stream(&stream, lambda, layout.n_fresh);
    Ok(garb_with_keys(c, &layout, &keys, &prg))
}

pub fn garb_with_keys(c: &BooleanCircuit, layout: &Layout, keys: &[WireKeys], prg: &CfPrg) -> (GarbledCircuit, Encoding) {
    let lambda = prg.lambda();
    let label = |w: u32, v: bool| {
        let (f, fl) = layout.wire[w as usize];
        keys[f as usize].label_for(v, fl)
    };
    let mut rows = Vec::with_capacity(layout.tables.len());
    for &g in &layout.tables {
        let (a, b, is_and) = match c.gates()[g] {
            Gate::Xor(a, b) => (a, b, false),
            Gate::And(a, b) => (a, b, true),
            _ => unreachable!(),
        };
        let out = (c.n_inputs() + g) as u32;
        let (fa, fla) = layout.wire[a as usize];
        let (fb, flb) = layout.wire[b as usize];
        let (fo, _) = layout.wire[out as usize];
        let (ka, kb, ko) = (keys[fa as usize], keys[fb as usize], keys[fo as usize]);
        let mut table = [[0u64; 3]; 4];
        for sa in 0..2usize {
            for sb in 0..2usize {
                let va = (sa == 1) ^ ka.p ^ fla;
                let vb = (sb == 1) ^ kb.p ^ flb;
                let v = if is_and { va & vb } else { va ^ vb };
                let lo = ko.label_for(v, false);
                let r = 2 * sa + sb;
                let (p0, p1, p2) = prg.row_pad(ka.l[sa], tweak(g, r), kb.l[sb]);
                table[r] = [p0 ^ lo, p1, p2];
            }
        }
        rows.push(table);
    }
    let const_labels = layout
        .consts
        .iter()
        .map(|&g| {
            let v = matches!(c.gates()[g], Gate::Const(true));
            label((c.n_inputs() + g) as u32, v)
        })
        .collect();
    let decode = c.outputs().iter().map(|&o| [label(o, false), label(o, true)]).collect();
    let labels = (0..c.n_inputs() as u32).map(|i| [label(i, false), label(i, true)]).collect();
    (
        GarbledCircuit { lambda, n_inputs: c.n_inputs(), rows, const_labels, decode },
        Encoding { labels },
    )
}

/// Evaluates with active input labels; fails on a bad row tag or an unknown output label.
pub fn geval(c: &BooleanCircuit, gc: &GarbledCircuit, xhat: &[u64]) -> Result<Vec<bool>> {
    let prg = CfPrg::new(gc.lambda)?;
    if xhat.len() != c.n_inputs() || gc.n_inputs != c.n_inputs() {
        return Err(Error::Length("garbled input count".into()));
    }
    let layout = Layout::new(c);
    if gc.rows.len() != layout.tables.len()
        || gc.const_labels.len() != layout.consts.len()
        || gc.decode.len() != c.outputs().len()
    {
        return Err(Error::EvalFailure("garbled circuit does not match topology".into()));
    }
    let mask = (1u64 << gc.lambda) - 1;
    let mut x: Vec<u64> = Vec::with_capacity(c.n_wires());
    for &l in xhat {
        if l & !mask != 0 {
            return Err(Error::EvalFailure("label wider than lambda".into()));
        }
        x.push(l);
    }
    let (mut t, mut k) = (0usize, 0usize);
    for (g, gate) in c.gates().iter().enumerate() {
        let v = match *gate {
            Gate::Not(a) => x[a as usize],
            Gate::Const(_) => {
                k += 1;
                gc.const_labels[k - 1]
            }
            Gate::Xor(a, b) | Gate::And(a, b) => {
                let (xa, xb) = (x[a as usize], x[b as usize]);
                let r = (2 * (xa & 1) + (xb & 1)) as usize;
                let row = gc.rows[t][r];
                t += 1;
                let (p0, p1, p2) = prg.row_pad(xa, tweak(g, r), xb);
                if row[1] ^ p1 != 0 || row[2] ^ p2 != 0 {
                    return Err(Error::EvalFailure(format!("tag check failed at gate {g}")));
                }
                row[0] ^ p0
            }
        };
        x.push(v);
    }
    c.outputs()
        .iter()
        .zip(&gc.decode)
        .map(|(&o, d)| {
            let l = x[o as usize];
            if l == d[0] {
                Ok(false)
            } else if l == d[1] {
                Ok(true)
            } else {
                Err(Error::EvalFailure("output label not in decode map".into()))
            }
        })
        .collect()
}

/// Simulated garbled circuit and input labels that evaluate to `y`.
pub fn garbsim<R: RngCore + ?Sized>(rng: &mut R, c: &BooleanCircuit, y: &[bool], lambda: usize) -> Result<(GarbledCircuit, Vec<u64>)> {
    let prg = CfPrg::new(lambda)?;
    if y.len() != c.outputs().len() {
        return Err(Error::Length("simulated output length".into()));
    }
    let mask = (1u64 << lambda) - 1;
    let rand_word = |rng: &mut R| rng.next_u64() & mask;
    let layout = Layout::new(c);
    let active: Vec<u64> = (0..layout.n_fresh).map(|_| rand_word(rng)).collect();
    let lab = |w: u32| active[layout.wire[w as usize].0 as usize];
    let mut rows = Vec::with_capacity(layout.tables.len());
    for &g in &layout.tables {
        let (a, b) = match c.gates()[g] {
            Gate::Xor(a, b) | Gate::And(a, b) => (a, b),
            _ => unreachable!(),
        };
        let (xa, xb) = (lab(a), lab(b));
        let xo = lab((c.n_inputs() + g) as u32);
        let mut table = [[0u64; 3]; 4];
        for (r, row) in table.iter_mut().enumerate() {
            *row = [rand_word(rng), rand_word(rng), rand_word(rng)];
            if r == (2 * (xa & 1) + (xb & 1)) as usize {
                let (p0, p1, p2) = prg.row_pad(xa, tweak(g, r), xb);
                *row = [p0 ^ xo, p1, p2];
            }
        }
        rows.push(table);
    }
    let const_labels = layout.consts.iter().map(|&g| lab((c.n_inputs() + g) as u32)).collect();
    let decode = c
        .outputs()
        .iter()
        .zip(y)
        .map(|(&o, &v)| {
            let xo = lab(o);
            let other = (rand_word(rng) & !1) | ((xo & 1) ^ 1);
            if v {
                [other, xo]
            } else {
                [xo, other]
            }
        })
        .collect();
    let xhat = (0..c.n_inputs() as u32).map(lab).collect();
    Ok((GarbledCircuit { lambda, n_inputs: c.n_inputs(), rows, const_labels, decode }, xhat))
}

fn word_bytes(lambda: usize) -> usize {
    lambda.div_ceil(8)
}

impl GarbledCircuit {
    /// Canonical bytes: header, rows, const labels, decode map; words little-endian in ⌈λ/8⌉ bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let wb = word_bytes(self.lambda);
        let mut out = Vec::new();
        out.push(self.lambda as u8);
        for n in [self.n_inputs, self.rows.len(), self.const_labels.len(), self.decode.len()] {
            out.extend_from_slice(&(n as u32).to_le_bytes());
        }
        let put = |w: u64, out: &mut Vec<u8>| out.extend_from_slice(&w.to_le_bytes()[..wb]);
        for t in &self.rows {
            for row in t {
                for &w in row {
                    put(w, &mut out);
                }
            }
        }
        for &w in &self.const_labels {
            put(w, &mut out);
        }
        for d in &self.decode {
            put(d[0], &mut out);
            put(d[1], &mut out);
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<(GarbledCircuit, usize)> {
        let err = || Error::Decode("truncated garbled circuit".into());
        let lambda = *buf.first().ok_or_else(err)? as usize;
        if !(crate::primitives::prg::MIN_LAMBDA..=crate::primitives::prg::MAX_LAMBDA).contains(&lambda) {
            return Err(Error::Decode("garbled circuit lambda out of range".into()));
        }
        let wb = word_bytes(lambda);
        let mut pos = 1;
        let mut hdr = [0usize; 4];
        for h in hdr.iter_mut() {
            let b = buf.get(pos..pos + 4).ok_or_else(err)?;
            *h = u32::from_le_bytes(b.try_into().unwrap()) as usize;
            pos += 4;
        }
        let [n_inputs, n_rows, n_consts, n_dec] = hdr;
        let need = (n_rows * 12 + n_consts + 2 * n_dec) * wb;
        if buf.len() < pos + need {
            return Err(err());
        }
        let mask = (1u64 << lambda) - 1;
        let get = |pos: &mut usize| -> Result<u64> {
            let mut b = [0u8; 8];
            b[..wb].copy_from_slice(&buf[*pos..*pos + wb]);
            *pos += wb;
            let w = u64::from_le_bytes(b);
            if w & !mask != 0 {
                return Err(Error::Decode("garbled word wider than lambda".into()));
            }
            Ok(w)
        };
        let mut rows = Vec::with_capacity(n_rows);
        for _ in 0..n_rows {
            let mut t = [[0u64; 3]; 4];
            for row in t.iter_mut() {
                for w in row.iter_mut() {
                    *w = get(&mut pos)?;
                }
            }
            rows.push(t);
        }
        let mut const_labels = Vec::with_capacity(n_consts);
        for _ in 0..n_consts {
            const_labels.push(get(&mut pos)?);
        }
        let mut decode = Vec::with_capacity(n_dec);
        for _ in 0..n_dec {
            decode.push([get(&mut pos)?, get(&mut pos)?]);
        }
        Ok((GarbledCircuit { lambda, n_inputs, rows, const_labels, decode }, pos))
    }
}

/// Label-reuse statistic for the weak distinguisher: how many table words
/// equal some decode-map label.
pub fn label_reuse_count(gc: &GarbledCircuit) -> usize {
    let labels: std::collections::HashSet<u64> = gc.decode.iter().flat_map(|d| d.iter().copied()).collect();
    gc.rows.iter().flat_map(|t| t.iter()).filter(|row| labels.contains(&row[0])).count()
}

/// Random λ-bit label with the given select bit, for tests and simulators.
pub fn random_label<R: Rng + ?Sized>(rng: &mut R, lambda: usize, select: bool) -> u64 {
    (rng.gen::<u64>() & ((1u64 << lambda) - 1) & !1) | select as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::circuit::random_circuit;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn inputs(v: u32, n: usize) -> Vec<bool> {
        (0..n).map(|i| (v >> i) & 1 == 1).collect()
    }

    #[test]
    fn and_gate() {
        let c = BooleanCircuit::new(2, vec![Gate::And(0, 1)], vec![2]).unwrap();
        let (gc, e) = garb(&c, &BitString::from_u64(77, 16), 16).unwrap();
        assert_eq!(geval(&c, &gc, &e.enc(&[true, true]).unwrap()).unwrap(), vec![true]);
        assert_eq!(geval(&c, &gc, &e.enc(&[true, false]).unwrap()).unwrap(), vec![false]);
    }

    #[test]
    fn deterministic_bytes() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let c = random_circuit(&mut rng, 5, 30, 3);
        let s = BitString::random(&mut rng, 12);
        assert_eq!(garb(&c, &s, 12).unwrap().0.to_bytes(), garb(&c, &s, 12).unwrap().0.to_bytes());
    }

    #[test]
    fn serialization_roundtrip() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let c = random_circuit(&mut rng, 5, 30, 3);
        let (gc, _) = garb(&c, &BitString::random(&mut rng, 11), 11).unwrap();
        let bytes = gc.to_bytes();
        let (back, used) = GarbledCircuit::from_bytes(&bytes).unwrap();
        assert_eq!(used, bytes.len());
        assert_eq!(back, gc);
    }

    #[test]
    fn exhaustive_correctness_random_circuits() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for _ in 0..30 {
            let n = rng.gen_range(1..=8);
            let c = random_circuit(&mut rng, n, 32, 3);
            let (gc, e) = garb(&c, &BitString::random(&mut rng, 8), 8).unwrap();
            for v in 0..(1u32 << n) {
                let x = inputs(v, n);
                assert_eq!(geval(&c, &gc, &e.enc(&x).unwrap()).unwrap(), c.eval(&x).unwrap());
            }
        }
    }

    #[test]
    fn enc_wrong_length() {
        let c = BooleanCircuit::new(2, vec![Gate::And(0, 1)], vec![2]).unwrap();
        let (_, e) = garb(&c, &BitString::zeros(8), 8).unwrap();
        assert!(e.enc(&[true]).is_err());
    }

    #[test]
    fn corrupted_label_is_detected() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let c = random_circuit(&mut rng, 4, 24, 2);
        let c = {
            // make sure every input feeds a table gate
            let mut g = c.gates().to_vec();
            g.push(Gate::And(0, 1));
            g.push(Gate::And(2, 3));
            let n = c.n_wires() as u32;
            BooleanCircuit::new(4, g, vec![n, n + 1]).unwrap()
        };
        let (gc, e) = garb(&c, &BitString::random(&mut rng, 16), 16).unwrap();
        let mut xhat = e.enc(&[true, false, true, true]).unwrap();
        xhat[1] ^= 1 << 5;
        assert!(matches!(geval(&c, &gc, &xhat), Err(Error::EvalFailure(_))));
    }

    #[test]
    fn garbsim_evaluates_to_y() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let c = random_circuit(&mut rng, 6, 30, 4);
        let y = vec![true, false, false, true];
        let (gc, xhat) = garbsim(&mut rng, &c, &y, 16).unwrap();
        assert_eq!(geval(&c, &gc, &xhat).unwrap(), y);
        let (real, _) = garb(&c, &BitString::random(&mut rng, 16), 16).unwrap();
        assert_eq!(real.to_bytes().len(), gc.to_bytes().len());
    }
}
