//! Pseudorandom generators.
//!
//! `Fast` is SHA-256 in counter mode. `CircuitFriendly` is a toy 3-word
//! AND-rotate-XOR Feistel permutation with feed-forward, run in counter mode;
//! it exists because the ZK statements and the garbling checks must evaluate
//! G inside a circuit. Neither is meant to be a production PRG.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::primitives::bits::BitString;
use crate::primitives::circuit::{const_word, rotl_word, Bit, BooleanCircuit, CircuitBuilder};

pub const CF_ROUNDS: usize = 8;
pub const MIN_LAMBDA: usize = 4;
pub const MAX_LAMBDA: usize = 32;

pub fn sha256(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The circuit-friendly generator at a fixed word size λ.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CfPrg {
    lambda: usize,
    mask: u64,
    round_keys: [u64; CF_ROUNDS],
    ctr_lo_key: u64,
    ctr_hi_key: u64,
    tweak_key: u64,
}

impl CfPrg {
    pub fn new(lambda: usize) -> Result<CfPrg> {
        if !(MIN_LAMBDA..=MAX_LAMBDA).contains(&lambda) {
            return Err(Error::Precondition(format!(
                "lambda must be in {MIN_LAMBDA}..={MAX_LAMBDA}, got {lambda}"
            )));
        }
        let mask = (1u64 << lambda) - 1;
        let mut st = 0x243F_6A88_85A3_08D3u64;
        let mut round_keys = [0u64; CF_ROUNDS];
        for k in round_keys.iter_mut() {
            *k = splitmix(&mut st) & mask;
        }
        Ok(CfPrg {
            lambda,
            mask,
            round_keys,
            ctr_lo_key: splitmix(&mut st) & mask,
            ctr_hi_key: splitmix(&mut st) & mask,
            tweak_key: splitmix(&mut st) & mask,
        })
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    /// Bits produced by one block.
    pub fn block_bits(&self) -> usize {
        3 * self.lambda
    }

    fn rot(&self) -> (usize, usize, usize) {
        (1, 2, self.lambda / 2 + 1)
    }

    fn rotl(&self, x: u64, r: usize) -> u64 {
        let l = self.lambda;
        let r = r % l;
        ((x << r) | (x >> (l - r))) & self.mask
    }

    fn f(&self, b: u64) -> u64 {
        let (r1, r2, r3) = self.rot();
        (self.rotl(b, r1) & self.rotl(b, r3)) ^ self.rotl(b, r2)
    }

    /// The keyed permutation with feed-forward on three λ-bit words.
    pub fn block(&self, a0: u64, b0: u64, c0: u64) -> (u64, u64, u64) {
        let (mut a, mut b, mut c) = (a0 & self.mask, b0 & self.mask, c0 & self.mask);
        for r in 0..CF_ROUNDS {
            let n = a ^ self.f(b) ^ c ^ self.round_keys[r];
            a = b;
            b = c;
            c = n;
        }
        (a ^ a0 & self.mask, b ^ b0 & self.mask, c ^ c0 & self.mask)
    }

    fn counter_words(&self, ctr: u64) -> Result<(u64, u64)> {
        if 2 * self.lambda < 64 && ctr >> (2 * self.lambda) != 0 {
            return Err(Error::Precondition(format!("counter {ctr} exceeds 2^(2*lambda)")));
        }
        Ok(((ctr & self.mask) ^ self.ctr_lo_key, ((ctr >> self.lambda) & self.mask) ^ self.ctr_hi_key))
    }

    /// Block `ctr` of the counter-mode stream keyed by `seed`.
    pub fn counter_block(&self, seed: u64, ctr: u64) -> Result<(u64, u64, u64)> {
        let (lo, hi) = self.counter_words(ctr)?;
        Ok(self.block(seed, lo, hi))
    }

    pub fn block_to_bits(&self, w: (u64, u64, u64)) -> BitString {
        let l = self.lambda;
        let mut s = BitString::from_u64(w.0, l);
        s.append(&BitString::from_u64(w.1, l));
        s.append(&BitString::from_u64(w.2, l));
        s
    }

    pub fn counter_block_bits(&self, seed: u64, ctr: u64) -> Result<BitString> {
        Ok(self.block_to_bits(self.counter_block(seed, ctr)?))
    }

    pub fn expand(&self, seed: &BitString, out_len: usize) -> Result<BitString> {
        if seed.len() != self.lambda {
            return Err(Error::Length(format!("seed has {} bits, expected {}", seed.len(), self.lambda)));
        }
        let s = seed.to_u64();
        let nblocks = out_len.div_ceil(self.block_bits());
        let mut out = BitString::zeros(0);
        for k in 0..nblocks {
            out.append(&self.counter_block_bits(s, k as u64)?);
        }
        Ok(out.slice(0, out_len))
    }

    /// Pad for one garbled-table row: labels in the outer words, tweak in the middle.
    pub fn row_pad(&self, la: u64, tweak: u64, lb: u64) -> (u64, u64, u64) {
        self.block(la, (tweak & self.mask) ^ self.tweak_key, lb)
    }

    pub fn row_pad_bits(&self, la: u64, tweak: u64, lb: u64) -> BitString {
        self.block_to_bits(self.row_pad(la, tweak, lb))
    }

    pub fn block_gadget(&self, cb: &mut CircuitBuilder, a0: &[Bit], b0: &[Bit], c0: &[Bit]) -> Vec<Bit> {
        let l = self.lambda;
        assert!(a0.len() == l && b0.len() == l && c0.len() == l);
        let (r1, r2, r3) = self.rot();
        let (mut a, mut b, mut c) = (a0.to_vec(), b0.to_vec(), c0.to_vec());
        for r in 0..CF_ROUNDS {
            let x1 = rotl_word(&b, r1);
            let x3 = rotl_word(&b, r3);
            let x2 = rotl_word(&b, r2);
            let t = cb.and_words(&x1, &x3);
            let f = cb.xor_words(&t, &x2);
            let n1 = cb.xor_words(&a, &f);
            let n2 = cb.xor_words(&n1, &c);
            let n = cb.xor_words(&n2, &const_word(self.round_keys[r], l));
            a = b;
            b = c;
            c = n;
        }
        let mut out = cb.xor_words(&a, a0);
        out.extend(cb.xor_words(&b, b0));
        out.extend(cb.xor_words(&c, c0));
        out
    }

    /// Counter-mode block with the counter given as two λ-bit words (may be constants).
    pub fn counter_gadget(&self, cb: &mut CircuitBuilder, seed: &[Bit], ctr_lo: &[Bit], ctr_hi: &[Bit]) -> Vec<Bit> {
        let l = self.lambda;
        let lo = cb.xor_words(ctr_lo, &const_word(self.ctr_lo_key, l));
        let hi = cb.xor_words(ctr_hi, &const_word(self.ctr_hi_key, l));
        self.block_gadget(cb, seed, &lo, &hi)
    }

    pub fn counter_gadget_const(&self, cb: &mut CircuitBuilder, seed: &[Bit], ctr: u64) -> Vec<Bit> {
        let l = self.lambda;
        let lo = const_word(ctr & self.mask, l);
        let hi = const_word((ctr >> l) & self.mask, l);
        self.counter_gadget(cb, seed, &lo, &hi)
    }

    pub fn row_pad_gadget(&self, cb: &mut CircuitBuilder, la: &[Bit], tweak: &[Bit], lb: &[Bit]) -> Vec<Bit> {
        let t = cb.xor_words(tweak, &const_word(self.tweak_key, self.lambda));
        self.block_gadget(cb, la, &t, lb)
    }

    /// Circuit computing `expand(seed, out_len)` from the λ seed bits.
    pub fn expand_circuit(&self, out_len: usize) -> BooleanCircuit {
        let mut cb = CircuitBuilder::new(self.lambda);
        let seed = cb.inputs(0, self.lambda);
        let mut out = Vec::new();
        let mut k = 0u64;
        while out.len() < out_len {
            out.extend(self.counter_gadget_const(&mut cb, &seed, k));
            k += 1;
        }
        out.truncate(out_len);
        cb.finish(&out)
    }

    /// Circuit for the bare block function on 3λ input bits.
    pub fn block_circuit(&self) -> BooleanCircuit {
        let l = self.lambda;
        let mut cb = CircuitBuilder::new(3 * l);
        let a = cb.inputs(0, l);
        let b = cb.inputs(l, l);
        let c = cb.inputs(2 * l, l);
        let out = self.block_gadget(&mut cb, &a, &b, &c);
        cb.finish(&out)
    }
}

/// SHA-256 in counter mode over the length-prefixed seed.
pub fn fast_expand(seed: &BitString, out_len: usize) -> BitString {
    let enc = seed.encode();
    let mut bytes = Vec::with_capacity(out_len.div_ceil(8) + 32);
    let mut ctr = 0u32;
    while bytes.len() * 8 < out_len {
        bytes.extend_from_slice(&sha256(&[b"qot/fast-prg", &enc, &ctr.to_le_bytes()]));
        ctr += 1;
    }
    bytes.truncate(out_len.div_ceil(8));
    let mut s = BitString::from_bytes(&bytes, bytes.len() * 8).expect("sized");
    s = s.slice(0, out_len);
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrgVariant {
    Fast,
    CircuitFriendly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Prg {
    pub variant: PrgVariant,
    pub seed_len: usize,
    pub out_len: usize,
}

impl Prg {
    pub fn new(variant: PrgVariant, seed_len: usize, out_len: usize) -> Result<Prg> {
        if variant == PrgVariant::CircuitFriendly {
            CfPrg::new(seed_len)?;
        }
        Ok(Prg { variant, seed_len, out_len })
    }

    /// The length-tripling generator G used by Naor commitments.
    pub fn naor(variant: PrgVariant, lambda: usize) -> Result<Prg> {
        Prg::new(variant, lambda, 3 * lambda)
    }

    pub fn expand(&self, seed: &BitString) -> Result<BitString> {
        if seed.len() != self.seed_len {
            return Err(Error::Length(format!("seed has {} bits, expected {}", seed.len(), self.seed_len)));
        }
        match self.variant {
            PrgVariant::Fast => Ok(fast_expand(seed, self.out_len)),
            PrgVariant::CircuitFriendly => CfPrg::new(self.seed_len)?.expand(seed, self.out_len),
        }
    }

    pub fn circuit(&self) -> Result<BooleanCircuit> {
        match self.variant {
            PrgVariant::Fast => Err(Error::Precondition("the fast PRG has no circuit form".into())),
            PrgVariant::CircuitFriendly => Ok(CfPrg::new(self.seed_len)?.expand_circuit(self.out_len)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn deterministic_and_sized() {
        for variant in [PrgVariant::Fast, PrgVariant::CircuitFriendly] {
            let prg = Prg::naor(variant, 16).unwrap();
            let s = BitString::from_u64(0xBEEF, 16);
            let a = prg.expand(&s).unwrap();
            assert_eq!(a, prg.expand(&s).unwrap());
            assert_eq!(a.len(), 48);
        }
    }

    #[test]
    fn wrong_seed_length() {
        let prg = Prg::naor(PrgVariant::CircuitFriendly, 16).unwrap();
        assert!(matches!(prg.expand(&BitString::zeros(15)), Err(Error::Length(_))));
    }

    #[test]
    fn lambda_range() {
        assert!(CfPrg::new(3).is_err());
        assert!(CfPrg::new(33).is_err());
        assert!(CfPrg::new(4).is_ok());
    }

    #[test]
    fn circuit_matches_expand_random_seeds() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for lambda in [8, 16, 32] {
            let prg = Prg::new(PrgVariant::CircuitFriendly, lambda, 7 * lambda + 3).unwrap();
            let circ = prg.circuit().unwrap();
            for _ in 0..100 {
                let s = BitString::random(&mut rng, lambda);
                assert_eq!(circ.eval_bits(&s).unwrap(), prg.expand(&s).unwrap());
            }
        }
    }

    #[test]
    fn circuit_matches_expand_exhaustive_small_lambda() {
        for lambda in 4..=10 {
            let cf = CfPrg::new(lambda).unwrap();
            let circ = cf.expand_circuit(3 * lambda);
            let mut lanes = vec![0u64; lambda];
            let total = 1u64 << lambda;
            let mut base = 0u64;
            while base < total {
                let n = (total - base).min(64);
                for (i, w) in lanes.iter_mut().enumerate() {
                    *w = (0..n).fold(0, |acc, l| acc | ((((base + l) >> i) & 1) << l));
                }
                let out = circ.eval_lanes(&lanes).unwrap();
                for l in 0..n {
                    let want = cf.expand(&BitString::from_u64(base + l, lambda), 3 * lambda).unwrap();
                    for (k, w) in out.iter().enumerate() {
                        assert_eq!((w >> l) & 1 == 1, want.get(k));
                    }
                }
                base += n;
            }
        }
    }

    #[test]
    fn block_circuit_matches_native() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let cf = CfPrg::new(12).unwrap();
        let circ = cf.block_circuit();
        for _ in 0..50 {
            let (a, b, c) = (rng.gen::<u64>() & 0xfff, rng.gen::<u64>() & 0xfff, rng.gen::<u64>() & 0xfff);
            let mut x = BitString::from_u64(a, 12);
            x.append(&BitString::from_u64(b, 12));
            x.append(&BitString::from_u64(c, 12));
            assert_eq!(circ.eval_bits(&x).unwrap(), cf.block_to_bits(cf.block(a, b, c)));
        }
    }

    #[test]
    fn public_counter_rounds_are_free() {
        let cf = CfPrg::new(16).unwrap();
        assert_eq!(cf.expand_circuit(48).and_count(), 6 * 16);
    }

    #[test]
    fn row_pad_gadget_matches_native() {
        let cf = CfPrg::new(10).unwrap();
        let mut cb = CircuitBuilder::new(30);
        let a = cb.inputs(0, 10);
        let t = cb.inputs(10, 10);
        let b = cb.inputs(20, 10);
        let out = cf.row_pad_gadget(&mut cb, &a, &t, &b);
        let circ = cb.finish(&out);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (x, y, z) = (rng.gen::<u64>() & 1023, rng.gen::<u64>() & 1023, rng.gen::<u64>() & 1023);
            let inp = BitString::concat(&[
                &BitString::from_u64(x, 10),
                &BitString::from_u64(y, 10),
                &BitString::from_u64(z, 10),
            ]);
            assert_eq!(circ.eval_bits(&inp).unwrap(), cf.row_pad_bits(x, y, z));
        }
    }

    #[test]
    fn counter_limit() {
        let cf = CfPrg::new(4).unwrap();
        assert!(cf.counter_block(1, 255).is_ok());
        assert!(cf.counter_block(1, 256).is_err());
    }
}
