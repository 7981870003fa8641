//! Exhaustive seed search over Naor commitments at toy security parameters.

use std::collections::HashSet;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::primitives::bits::BitString;
use crate::primitives::naor::Naor;

pub const MAX_LAMBDA: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Opening {
    /// Exactly one message opens the commitment; `seed` is one seed that does.
    Unique { msg: BitString, seed: BitString },
    Ambiguous { a: BitString, b: BitString },
    None,
}

fn check_lambda(lambda: usize) -> Result<()> {
    if lambda > MAX_LAMBDA {
        return Err(Error::Precondition(format!("brute force needs lambda <= {MAX_LAMBDA}")));
    }
    Ok(())
}

/// Tries all 2^λ seeds against one commitment to a `msg_len`-bit message.
pub fn open_one(naor: &Naor, rho: &BitString, c: &BitString, msg_len: usize) -> Result<Opening> {
    check_lambda(naor.lambda())?;
    let l = naor.lambda();
    let b = 3 * l;
    if c.len() != b * msg_len {
        return Err(Error::Length("commitment length".into()));
    }
    let mut found: Option<(BitString, BitString)> = None;
    'seeds: for s in 0..(1u64 << l) {
        let seed = BitString::from_u64(s, l);
        let g = naor.stream(&seed, msg_len)?;
        let mut m = BitString::zeros(msg_len);
        for k in 0..msg_len {
            let d = g.slice(b * k, b).xor(&c.slice(b * k, b));
            if &d == rho {
                m.set(k, true);
            } else if !d.is_zero() {
                continue 'seeds;
            }
        }
        debug_assert!(naor.verify(rho, c, &m, &seed));
        match &found {
            Some((f, _)) if *f != m => return Ok(Opening::Ambiguous { a: f.clone(), b: m }),
            Some(_) => {}
            None => found = Some((m, seed)),
        }
    }
    Ok(found.map_or(Opening::None, |(msg, seed)| Opening::Unique { msg, seed }))
}

/// Per-commitment openings; every reported opening is re-checked with the
/// commitment's own verifier.
pub fn brute_force_extract(naor: &Naor, rho: &BitString, commits: &[BitString], msg_len: usize) -> Result<Vec<Opening>> {
    commits
        .iter()
        .map(|c| {
            let o = open_one(naor, rho, c, msg_len)?;
            if let Opening::Unique { msg, seed } = &o {
                if !naor.verify(rho, c, msg, seed) {
                    return Err(Error::SimulationFailure("brute-force opening failed verification".into()));
                }
            }
            Ok(o)
        })
        .collect()
}

/// The set of ρ for which some single-bit commitment opens both ways:
/// {G(r) ⊕ G(r') : r ≠ r'}, as 3λ-bit integers.
pub fn ambiguous_rhos(naor: &Naor) -> Result<HashSet<u64>> {
    check_lambda(naor.lambda())?;
    let l = naor.lambda();
    let g: Vec<u64> = (0..1u64 << l).map(|s| naor.stream(&BitString::from_u64(s, l), 1).map(|b| b.to_u64())).collect::<Result<_>>()?;
    let mut set = HashSet::new();
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            set.insert(g[i] ^ g[j]);
        }
    }
    Ok(set)
}

/// Samples `samples` uniform ρ and counts those in the ambiguous set.
pub fn ambiguous_fraction(naor: &Naor, samples: u64, rng: &mut dyn RngCore) -> Result<(u64, u64)> {
    let set = ambiguous_rhos(naor)?;
    let bits = naor.rho_len();
    let mask = (1u64 << bits) - 1;
    let hits = (0..samples).filter(|_| set.contains(&(rng.next_u64() & mask))).count() as u64;
    Ok((hits, samples))
}

/// ρ = G(r) ⊕ G(r'), for which com_ρ(0; r) = com_ρ(1; r').
pub fn crafted_rho(naor: &Naor, r: &BitString, r2: &BitString) -> Result<BitString> {
    Ok(naor.stream(r, 1)?.xor(&naor.stream(r2, 1)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn honest_commitments_open_uniquely() {
        let naor = Naor::circuit(6).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let set = ambiguous_rhos(&naor).unwrap();
        let rho = loop {
            let r = BitString::random(&mut rng, 18);
            if !set.contains(&r.to_u64()) {
                break r;
            }
        };
        let msgs: Vec<BitString> = (0..5).map(|_| BitString::random(&mut rng, 3)).collect();
        let (_, commits) = crate::socom::commit_values(6, &rho, &msgs, &mut rng).unwrap();
        let got = brute_force_extract(&naor, &rho, &commits, 3).unwrap();
        for (o, m) in got.iter().zip(&msgs) {
            assert!(matches!(o, Opening::Unique { msg, .. } if msg == m));
        }
    }

    #[test]
    fn crafted_rho_is_ambiguous() {
        let naor = Naor::circuit(6).unwrap();
        let (r, r2) = (BitString::from_u64(5, 6), BitString::from_u64(40, 6));
        let rho = crafted_rho(&naor, &r, &r2).unwrap();
        let c = naor.commit_bit(&rho, false, &r).unwrap();
        assert!(naor.verify_bit(&rho, &c, true, &r2));
        assert!(matches!(open_one(&naor, &rho, &c, 1).unwrap(), Opening::Ambiguous { .. }));
        assert!(ambiguous_rhos(&naor).unwrap().contains(&rho.to_u64()));
    }

    #[test]
    fn string_outside_range_has_no_opening() {
        let naor = Naor::circuit(6).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let rho = BitString::random(&mut rng, 18);
        let range: HashSet<u64> = (0..64u64).map(|s| naor.stream(&BitString::from_u64(s, 6), 1).unwrap().to_u64()).collect();
        let c = loop {
            let c = BitString::random(&mut rng, 18);
            if !range.contains(&c.to_u64()) && !range.contains(&c.xor(&rho).to_u64()) {
                break c;
            }
        };
        assert_eq!(open_one(&naor, &rho, &c, 1).unwrap(), Opening::None);
    }

    #[test]
    fn lambda_limit() {
        let naor = Naor::circuit(13).unwrap();
        assert!(open_one(&naor, &BitString::zeros(39), &BitString::zeros(39), 1).is_err());
    }
}
