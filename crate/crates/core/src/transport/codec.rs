//! Little helpers for message bodies: explicit lengths everywhere.

use crate::error::{Error, Result};
use crate::primitives::bits::BitString;

#[derive(Default)]
pub struct Enc {
    pub buf: Vec<u8>,
}

impl Enc {
    pub fn new() -> Enc {
        Enc::default()
    }

    pub fn u8(mut self, v: u8) -> Enc {
        self.buf.push(v);
        self
    }

    pub fn u32(mut self, v: u32) -> Enc {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(mut self, v: u64) -> Enc {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn bytes(mut self, b: &[u8]) -> Enc {
        self.buf.extend_from_slice(&(b.len() as u32).to_le_bytes());
        self.buf.extend_from_slice(b);
        self
    }

    pub fn bits(mut self, b: &BitString) -> Enc {
        b.encode_into(&mut self.buf);
        self
    }

    pub fn bits_vec(mut self, v: &[BitString]) -> Enc {
        self.buf.extend_from_slice(&(v.len() as u32).to_le_bytes());
        for b in v {
            b.encode_into(&mut self.buf);
        }
        self
    }

    pub fn u64s(mut self, v: &[u64]) -> Enc {
        self.buf.extend_from_slice(&(v.len() as u32).to_le_bytes());
        for x in v {
            self.buf.extend_from_slice(&x.to_le_bytes());
        }
        self
    }

    pub fn indices(mut self, v: &[usize]) -> Enc {
        self.buf.extend_from_slice(&(v.len() as u32).to_le_bytes());
        for &x in v {
            self.buf.extend_from_slice(&(x as u32).to_le_bytes());
        }
        self
    }

    pub fn done(self) -> Vec<u8> {
        self.buf
    }
}

pub struct Dec<'a> {
    buf: &'a [u8],
}

impl<'a> Dec<'a> {
    pub fn new(buf: &'a [u8]) -> Dec<'a> {
        Dec { buf }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Decode("truncated message body".into()));
        }
        let (a, b) = self.buf.split_at(n);
        self.buf = b;
        Ok(a)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A count that must fit in what is left of the buffer at `min_each` bytes per item.
    fn count(&mut self, min_each: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_each) > self.buf.len() {
            return Err(Error::Decode("element count exceeds message size".into()));
        }
        Ok(n)
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>> {
        let n = self.count(1)?;
        Ok(self.take(n)?.to_vec())
    }

    pub fn fixed(&mut self, n: usize) -> Result<&'a [u8]> {
        self.take(n)
    }

    pub fn bits(&mut self) -> Result<BitString> {
        let (b, used) = BitString::decode_prefix(self.buf)?;
        self.buf = &self.buf[used..];
        Ok(b)
    }

    /// Bit string that must have exactly `len` bits.
    pub fn bits_len(&mut self, len: usize) -> Result<BitString> {
        let b = self.bits()?;
        if b.len() != len {
            return Err(Error::Decode(format!("expected {len} bits, got {}", b.len())));
        }
        Ok(b)
    }

    pub fn bits_vec(&mut self) -> Result<Vec<BitString>> {
        let n = self.count(4)?;
        (0..n).map(|_| self.bits()).collect()
    }

    pub fn u64s(&mut self) -> Result<Vec<u64>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.u64()).collect()
    }

    pub fn indices(&mut self) -> Result<Vec<usize>> {
        let n = self.count(4)?;
        (0..n).map(|_| self.u32().map(|v| v as usize)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn finish(self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(Error::Decode(format!("{} trailing bytes in message body", self.buf.len())))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let b = BitString::from_u64(0b1011, 4);
        let buf = Enc::new().u8(3).u32(7).bits(&b).u64s(&[1, 2]).indices(&[4, 9]).bytes(b"xy").done();
        let mut d = Dec::new(&buf);
        assert_eq!(d.u8().unwrap(), 3);
        assert_eq!(d.u32().unwrap(), 7);
        assert_eq!(d.bits_len(4).unwrap(), b);
        assert_eq!(d.u64s().unwrap(), vec![1, 2]);
        assert_eq!(d.indices().unwrap(), vec![4, 9]);
        assert_eq!(d.bytes().unwrap(), b"xy");
        d.finish().unwrap();
        assert!(Dec::new(&[255, 255, 255, 255]).u64s().is_err());
    }
}
