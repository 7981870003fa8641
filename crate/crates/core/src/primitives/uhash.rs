//! Toeplitz-matrix universal hashing over GF(2).
//!
//! The descriptor has n + ℓ − 1 bits and T[i][j] = desc[i − j + n − 1].

use rand::RngCore;

use crate::error::{Error, Result};
use crate::primitives::bits::BitString;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniversalHash {
    desc: BitString,
    in_len: usize,
    out_len: usize,
}

impl UniversalHash {
    pub fn from_desc(desc: BitString, in_len: usize, out_len: usize) -> Result<Self> {
        if in_len == 0 || out_len == 0 || desc.len() != in_len + out_len - 1 {
            return Err(Error::Length(format!(
                "Toeplitz descriptor for {in_len}->{out_len} needs {} bits, got {}",
                (in_len + out_len).saturating_sub(1),
                desc.len()
            )));
        }
        Ok(UniversalHash { desc, in_len, out_len })
    }

    pub fn sample<R: RngCore + ?Sized>(rng: &mut R, in_len: usize, out_len: usize) -> Self {
        let desc = BitString::random(rng, in_len + out_len - 1);
        UniversalHash { desc, in_len, out_len }
    }

    pub fn desc(&self) -> &BitString {
        &self.desc
    }

    pub fn in_len(&self) -> usize {
        self.in_len
    }

    pub fn out_len(&self) -> usize {
        self.out_len
    }

    pub fn apply(&self, x: &BitString) -> Result<BitString> {
        if x.len() != self.in_len {
            return Err(Error::Length(format!("hash input has {} bits, expected {}", x.len(), self.in_len)));
        }
        let n = self.in_len;
        let l = self.out_len;
        let m = n + l - 1;
        let rev: BitString = (0..m).map(|k| self.desc.get(m - 1 - k)).collect();
        let mut out = BitString::zeros(l);
        for i in 0..l {
            let row = rev.slice(l - 1 - i, n);
            out.set(i, row.and(x).weight() % 2 == 1);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn naive(f: &UniversalHash, x: &BitString) -> BitString {
        let n = f.in_len();
        (0..f.out_len())
            .map(|i| (0..n).fold(false, |acc, j| acc ^ (f.desc().get(i + n - 1 - j) & x.get(j))))
            .collect()
    }

    #[test]
    fn zero_maps_to_zero() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let f = UniversalHash::sample(&mut rng, 40, 9);
        assert!(f.apply(&BitString::zeros(40)).unwrap().is_zero());
        assert!(f.apply(&BitString::zeros(39)).is_err());
        assert!(UniversalHash::from_desc(BitString::zeros(47), 40, 9).is_err());
    }

    /// Every pair x ≠ y collides under exactly 2^(n+ℓ-1-ℓ) of the 2^(n+ℓ-1) descriptors.
    #[test]
    fn exact_two_universality_n8_l4() {
        let (n, l) = (8usize, 4usize);
        let fs: Vec<UniversalHash> = (0..(1u64 << (n + l - 1)))
            .map(|d| UniversalHash::from_desc(BitString::from_u64(d, n + l - 1), n, l).unwrap())
            .collect();
        let table: Vec<Vec<u64>> = fs
            .iter()
            .map(|f| (0..256u64).map(|x| f.apply(&BitString::from_u64(x, n)).unwrap().to_u64()).collect())
            .collect();
        for x in 0..256usize {
            for y in (x + 1)..256usize {
                let coll = table.iter().filter(|t| t[x] == t[y]).count();
                assert_eq!(coll, 1 << (n - 1), "pair ({x},{y})");
            }
        }
    }

    proptest! {
        #[test]
        fn linear(seed in any::<u64>(), n in 1usize..100, l in 1usize..40) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let f = UniversalHash::sample(&mut rng, n, l);
            let x = BitString::random(&mut rng, n);
            let y = BitString::random(&mut rng, n);
            let lhs = f.apply(&x.xor(&y)).unwrap();
            let rhs = f.apply(&x).unwrap().xor(&f.apply(&y).unwrap());
            prop_assert_eq!(lhs, rhs);
            prop_assert_eq!(f.apply(&x).unwrap(), naive(&f, &x));
        }
    }
}
