//! MSB-first bit I/O with order-0 exponential-Golomb codes.

use crate::error::{Error, Result};

#[derive(Debug, Default, Clone)]
pub struct BitWriter {
    bytes: Vec<u8>,
    acc: u8,
    used: u8,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn put_bit(&mut self, bit: bool) {
        self.acc = (self.acc << 1) | u8::from(bit);
        self.used += 1;
        if self.used == 8 {
            self.bytes.push(self.acc);
            self.acc = 0;
            self.used = 0;
        }
    }

    /// Writes the low `n` bits of `v`, most significant first.
    pub fn put_bits(&mut self, v: u64, n: u32) {
        for i in (0..n).rev() {
            self.put_bit(v >> i & 1 == 1);
        }
    }

    /// Unsigned exp-Golomb: `v + 1` in binary, preceded by one zero per bit
    /// after the leading one.
    pub fn put_ue(&mut self, v: u64) {
        let x = v + 1;
        let len = 64 - x.leading_zeros();
        self.put_bits(0, len - 1);
        self.put_bits(x, len);
    }

    /// Signed exp-Golomb: 0, 1, -1, 2, -2, ... map to 0, 1, 2, 3, 4, ...
    pub fn put_se(&mut self, v: i64) {
        let u = if v > 0 { 2 * v as u64 - 1 } else { 2 * v.unsigned_abs() };
        self.put_ue(u);
    }

    /// Pads with zero bits to the next byte boundary.
    pub fn align(&mut self) {
        while self.used != 0 {
            self.put_bit(false);
        }
    }

    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8 + usize::from(self.used)
    }

    pub fn into_bytes(mut self) -> Vec<u8> {
        self.align();
        self.bytes
    }
}

#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

const MAX_GOLOMB_PREFIX: u32 = 40;

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    #[inline]
    pub fn bit(&mut self) -> Result<bool> {
        let byte = self
            .bytes
            .get(self.pos / 8)
            .ok_or_else(|| Error::corrupt("bitstream ended early"))?;
        let b = byte >> (7 - self.pos % 8) & 1 == 1;
        self.pos += 1;
        Ok(b)
    }

    pub fn bits(&mut self, n: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..n {
            v = (v << 1) | u64::from(self.bit()?);
        }
        Ok(v)
    }

    pub fn ue(&mut self) -> Result<u64> {
        let mut zeros = 0;
        while !self.bit()? {
            zeros += 1;
            if zeros > MAX_GOLOMB_PREFIX {
                return Err(Error::corrupt("exp-Golomb prefix too long"));
            }
        }
        Ok(((1u64 << zeros) | self.bits(zeros)?) - 1)
    }

    pub fn se(&mut self) -> Result<i64> {
        let u = self.ue()?;
        Ok(if u % 2 == 1 { (u / 2 + 1) as i64 } else { -((u / 2) as i64) })
    }

    pub fn align(&mut self) {
        self.pos = self.pos.div_ceil(8) * 8;
    }

    /// Bytes consumed so far, counting a partial byte as whole.
    pub fn byte_pos(&self) -> usize {
        self.pos.div_ceil(8)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_codewords() {
        let mut w = BitWriter::new();
        w.put_ue(0);
        w.put_ue(1);
        w.put_ue(2);
        w.put_ue(3);
        // 1 010 011 00100 -> 1010 0110 0100 (padded)
        assert_eq!(w.bit_len(), 12);
        assert_eq!(w.into_bytes(), vec![0b1010_0110, 0b0100_0000]);
    }

    #[test]
    fn truncated_input_is_an_error() {
        let mut r = BitReader::new(&[0x00]);
        assert!(r.ue().is_err());
        let mut r = BitReader::new(&[]);
        assert!(r.bit().is_err());
    }

    proptest! {
        #[test]
        fn golomb_round_trip(vals in proptest::collection::vec(-100_000i64..100_000, 0..64)) {
            let mut w = BitWriter::new();
            for &v in &vals {
                w.put_se(v);
                w.put_ue(v.unsigned_abs());
            }
            let bytes = w.into_bytes();
            let mut r = BitReader::new(&bytes);
            for &v in &vals {
                prop_assert_eq!(r.se().unwrap(), v);
                prop_assert_eq!(r.ue().unwrap(), v.unsigned_abs());
            }
        }
    }
}
