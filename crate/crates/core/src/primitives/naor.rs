//! Naor bit commitments, c = G(r) ⊕ m·ρ.
//!
//! A string message `m` of length L is committed with a single λ-bit seed:
//! block `k` of the counter-mode stream G(r) masks bit `k`, so the commitment
//! is 3λ·L bits and L = 1 is exactly the textbook scheme.

use crate::error::{Error, Result};
use crate::primitives::bits::BitString;
use crate::primitives::prg::{fast_expand, CfPrg, PrgVariant};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Naor {
    lambda: usize,
    variant: PrgVariant,
}

impl Naor {
    pub fn new(lambda: usize, variant: PrgVariant) -> Result<Naor> {
        CfPrg::new(lambda)?;
        Ok(Naor { lambda, variant })
    }

    /// Commitments that must be re-checkable inside ZK circuits.
    pub fn circuit(lambda: usize) -> Result<Naor> {
        Naor::new(lambda, PrgVariant::CircuitFriendly)
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn rho_len(&self) -> usize {
        3 * self.lambda
    }

    pub fn commit_len(&self, msg_len: usize) -> usize {
        3 * self.lambda * msg_len
    }

    /// The first `3λ·blocks` bits of G(r).
    pub fn stream(&self, r: &BitString, blocks: usize) -> Result<BitString> {
        if r.len() != self.lambda {
            return Err(Error::Length(format!("seed has {} bits, expected {}", r.len(), self.lambda)));
        }
        let n = 3 * self.lambda * blocks;
        match self.variant {
            PrgVariant::Fast => Ok(fast_expand(r, n)),
            PrgVariant::CircuitFriendly => CfPrg::new(self.lambda)?.expand(r, n),
        }
    }

    fn check_rho(&self, rho: &BitString) -> Result<()> {
        if rho.len() != self.rho_len() {
            return Err(Error::Length(format!("rho has {} bits, expected {}", rho.len(), self.rho_len())));
        }
        Ok(())
    }

    pub fn commit(&self, rho: &BitString, m: &BitString, r: &BitString) -> Result<BitString> {
        self.check_rho(rho)?;
        let mut c = self.stream(r, m.len())?;
        let b = self.rho_len();
        for k in 0..m.len() {
            if m.get(k) {
                for j in 0..b {
                    if rho.get(j) {
                        c.flip(k * b + j);
                    }
                }
            }
        }
        Ok(c)
    }

    pub fn verify(&self, rho: &BitString, c: &BitString, m: &BitString, r: &BitString) -> bool {
        if c.len() != self.commit_len(m.len()) {
            return false;
        }
        match self.commit(rho, m, r) {
            Ok(c2) => &c2 == c,
            Err(_) => false,
        }
    }

    pub fn commit_bit(&self, rho: &BitString, m: bool, r: &BitString) -> Result<BitString> {
        self.commit(rho, &BitString::from_bools(&[m]), r)
    }

    pub fn verify_bit(&self, rho: &BitString, c: &BitString, m: bool, r: &BitString) -> bool {
        self.verify(rho, c, &BitString::from_bools(&[m]), r)
    }
}

/// A single-bit commitment together with its opening.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NaorCommitment {
    pub rho: BitString,
    pub c: BitString,
    pub m: bool,
    pub r: BitString,
}

impl NaorCommitment {
    pub fn create(scheme: &Naor, rho: BitString, m: bool, r: BitString) -> Result<Self> {
        let c = scheme.commit_bit(&rho, m, &r)?;
        Ok(NaorCommitment { rho, c, m, r })
    }

    pub fn verify(&self, scheme: &Naor) -> bool {
        scheme.verify_bit(&self.rho, &self.c, self.m, &self.r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn zero_and_one_follow_the_equation() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let naor = Naor::circuit(16).unwrap();
        let rho = BitString::random(&mut rng, 48);
        let r = BitString::random(&mut rng, 16);
        let g = CfPrg::new(16).unwrap().expand(&r, 48).unwrap();
        assert_eq!(naor.commit_bit(&rho, false, &r).unwrap(), g);
        assert_eq!(naor.commit_bit(&rho, true, &r).unwrap(), g.xor(&rho));
    }

    #[test]
    fn roundtrip_and_tamper() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        for variant in [PrgVariant::Fast, PrgVariant::CircuitFriendly] {
            let naor = Naor::new(12, variant).unwrap();
            let rho = BitString::random(&mut rng, 36);
            let m = BitString::random(&mut rng, 5);
            let r = BitString::random(&mut rng, 12);
            let mut c = naor.commit(&rho, &m, &r).unwrap();
            assert!(naor.verify(&rho, &c, &m, &r));
            c.flip(40);
            assert!(!naor.verify(&rho, &c, &m, &r));
        }
    }

    #[test]
    fn length_errors() {
        let naor = Naor::circuit(8).unwrap();
        let r = BitString::zeros(8);
        assert!(naor.commit_bit(&BitString::zeros(23), true, &r).is_err());
        assert!(naor.commit_bit(&BitString::zeros(24), true, &BitString::zeros(7)).is_err());
        assert!(!naor.verify_bit(&BitString::zeros(24), &BitString::zeros(23), true, &r));
    }

    #[test]
    fn vector_chunks_are_independent_bit_commitments() {
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let naor = Naor::circuit(8).unwrap();
        let cf = CfPrg::new(8).unwrap();
        let rho = BitString::random(&mut rng, 24);
        let m = BitString::from_bit_str("1011").unwrap();
        let r = BitString::random(&mut rng, 8);
        let c = naor.commit(&rho, &m, &r).unwrap();
        for k in 0..4 {
            let mut want = cf.counter_block_bits(r.to_u64(), k as u64).unwrap();
            if m.get(k) {
                want.xor_assign(&rho);
            }
            assert_eq!(c.slice(24 * k, 24), want);
        }
    }

    /// Exhaustive binding count at λ = 6: a ρ is ambiguous iff ρ = G(r) ⊕ G(r')
    /// for some seeds. Each ρ admits at most 2^12 such differences out of 2^18.
    #[test]
    fn binding_fraction_lambda_6() {
        let naor = Naor::circuit(6).unwrap();
        let g: Vec<u64> = (0..64u64)
            .map(|r| naor.stream(&BitString::from_u64(r, 6), 1).unwrap().to_u64())
            .collect();
        let mut bad = std::collections::HashSet::new();
        for a in &g {
            for b in &g {
                bad.insert(a ^ b);
            }
        }
        bad.remove(&0);
        let frac = bad.len() as f64 / (1u64 << 18) as f64;
        assert!(frac <= 1.0 / 64.0, "ambiguous fraction {frac}");
    }
}
