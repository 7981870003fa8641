//! Packed bitstrings. Bit `i` lives in word `i / 64` at position `i % 64`;
//! bits past `len` are always zero.

use std::fmt;

use rand::RngCore;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString { words: vec![0; words_for(len)], len }
    }

    pub fn ones(len: usize) -> Self {
        let mut s = BitString { words: vec![u64::MAX; words_for(len)], len };
        s.trim();
        s
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R, len: usize) -> Self {
        let mut words = vec![0u64; words_for(len)];
        for w in words.iter_mut() {
            *w = rng.next_u64();
        }
        let mut s = BitString { words, len };
        s.trim();
        s
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                s.words[i / 64] |= 1 << (i % 64);
            }
        }
        s
    }

    /// Low `len` bits of `v`, least significant first.
    pub fn from_u64(v: u64, len: usize) -> Self {
        assert!(len <= 64);
        let mut s = BitString { words: vec![v; words_for(len)], len };
        s.trim();
        s
    }

    pub fn from_words(words: Vec<u64>, len: usize) -> Self {
        assert!(words.len() >= words_for(len));
        let mut s = BitString { words, len };
        s.words.truncate(words_for(len));
        s.trim();
        s
    }

    /// Parses a string of '0'/'1' characters, first character is bit 0.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for ch in s.chars() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return Err(Error::Decode(format!("bad bit character {ch:?}"))),
            }
        }
        Ok(Self::from_bools(&bits))
    }

    fn trim(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, b: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let m = 1u64 << (i % 64);
        if b {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len);
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    pub fn push(&mut self, b: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, b);
    }

    pub fn append(&mut self, other: &BitString) {
        if self.len.is_multiple_of(64) {
            self.words.extend_from_slice(&other.words);
            self.len += other.len;
            return;
        }
        for i in 0..other.len {
            self.push(other.get(i));
        }
    }

    pub fn concat(parts: &[&BitString]) -> BitString {
        let mut out = BitString::zeros(0);
        for p in parts {
            out.append(p);
        }
        out
    }

    /// Up to 64 bits starting at `start`, packed LSB-first.
    pub fn get_bits(&self, start: usize, len: usize) -> u64 {
        assert!(len <= 64 && start + len <= self.len);
        if len == 0 {
            return 0;
        }
        let w = start / 64;
        let off = start % 64;
        let mut v = self.words[w] >> off;
        if off != 0 && off + len > 64 {
            v |= self.words[w + 1] << (64 - off);
        }
        if len < 64 {
            v &= (1u64 << len) - 1;
        }
        v
    }

    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64);
        self.get_bits(0, self.len)
    }

    pub fn slice(&self, start: usize, len: usize) -> BitString {
        assert!(start + len <= self.len);
        let mut words = Vec::with_capacity(words_for(len));
        let mut pos = start;
        let end = start + len;
        while pos < end {
            let take = (end - pos).min(64);
            words.push(self.get_bits(pos, take));
            pos += take;
        }
        BitString { words, len }
    }

    pub fn xor(&self, other: &BitString) -> BitString {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    pub fn xor_assign(&mut self, other: &BitString) {
        assert_eq!(self.len, other.len, "xor of unequal lengths");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn and(&self, other: &BitString) -> BitString {
        assert_eq!(self.len, other.len);
        let words = self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect();
        BitString { words, len: self.len }
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Packed bytes without a length prefix: bit `i` in byte `i / 8`, position `i % 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(nbytes);
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(nbytes);
        out
    }

    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<BitString> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Decode(format!(
                "expected {} bytes for {len} bits, got {}",
                len.div_ceil(8),
                bytes.len()
            )));
        }
        let mut words = vec![0u64; words_for(len)];
        for (i, &b) in bytes.iter().enumerate() {
            words[i / 8] |= (b as u64) << (8 * (i % 8));
        }
        let s = BitString { words, len };
        let mut t = s.clone();
        t.trim();
        if t != s {
            return Err(Error::Decode("nonzero padding bits".into()));
        }
        Ok(s)
    }

    /// 4-byte little-endian bit length, then packed bytes.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = (self.len as u32).to_le_bytes().to_vec();
        out.extend(self.to_bytes());
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.len as u32).to_le_bytes());
        out.extend(self.to_bytes());
    }

    /// Decodes one length-prefixed bitstring from the front of `buf`,
    /// returning it together with the number of bytes consumed.
    pub fn decode_prefix(buf: &[u8]) -> Result<(BitString, usize)> {
        if buf.len() < 4 {
            return Err(Error::Decode("truncated bitstring length".into()));
        }
        let len = u32::from_le_bytes(buf[..4].try_into().unwrap()) as usize;
        let nbytes = len.div_ceil(8);
        if buf.len() < 4 + nbytes {
            return Err(Error::Decode("truncated bitstring body".into()));
        }
        let s = BitString::from_bytes(&buf[4..4 + nbytes], len)?;
        Ok((s, 4 + nbytes))
    }

    pub fn decode(buf: &[u8]) -> Result<BitString> {
        let (s, used) = Self::decode_prefix(buf)?;
        if used != buf.len() {
            return Err(Error::Decode("trailing bytes after bitstring".into()));
        }
        Ok(s)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(s: &str, len: usize) -> Result<BitString> {
        let bytes = hex::decode(s).map_err(|e| Error::Decode(e.to_string()))?;
        BitString::from_bytes(&bytes, len)
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({}:", self.len)?;
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        f.write_str(")")
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        let mut s = BitString::zeros(0);
        for b in iter {
            s.push(b);
        }
        s
    }
}
