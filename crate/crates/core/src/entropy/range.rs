//! Carry-handling byte-oriented range coder with a 64-bit active window.
//!
//! The wide window keeps the coding loss per symbol below 2^-40 bits, so a
//! stream's physical length tracks the ideal code length of its model to
//! within termination overhead (a handful of bytes). That tightness is what
//! makes the per-block bit ledgers trustworthy.

use super::CodingError;

/// Renormalization threshold; the range stays in `[TOP, 2^56)` between
/// symbols and frequency totals stay below 2^16, so `range / total` never
/// loses more than 2^-40 of the interval.
const TOP: u64 = 1 << 48;

/// Upper bound (inclusive) for model frequency totals.
pub const MAX_TOTAL: u32 = 1 << 16;

#[derive(Debug)]
pub struct RangeEncoder {
    low: u128,
    range: u64,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        RangeEncoder {
            low: 0,
            range: u64::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
        }
    }

    /// Narrows the interval to the `[cum, cum + freq)` slice of `total`.
    pub fn encode(&mut self, cum: u32, freq: u32, total: u32) {
        debug_assert!(freq > 0);
        debug_assert!(cum as u64 + freq as u64 <= total as u64);
        debug_assert!(total <= MAX_TOTAL);
        let r = self.range / total as u64;
        self.low += r as u128 * cum as u128;
        self.range = r * freq as u64;
        while self.range < TOP {
            self.shift_low();
            self.range <<= 8;
        }
    }

    fn shift_low(&mut self) {
        let low64 = self.low as u64;
        let carry = (self.low >> 64) as u8;
        if low64 < 0xFF00_0000_0000_0000 || carry == 1 {
            let mut byte = self.cache;
            loop {
                self.out.push(byte.wrapping_add(carry));
                byte = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = (low64 >> 56) as u8;
        }
        self.cache_size += 1;
        self.low = (low64 << 8) as u128;
    }

    /// Flushes the coder, picking the value in the final interval with the
    /// longest zero tail so termination stays within a couple of bytes. The
    /// decoder regenerates the trimmed zero bytes.
    pub fn finish(mut self) -> Vec<u8> {
        let rem = (self.low as u64) % TOP;
        if rem != 0 {
            // range >= TOP after renormalization, so the round-up stays
            // inside the interval.
            self.low += (TOP - rem) as u128;
        }
        let floor = self.out.len();
        for _ in 0..9 {
            self.shift_low();
        }
        while self.out.len() > floor && self.out.last() == Some(&0) {
            self.out.pop();
        }
        self.out
    }

    pub fn bytes_written(&self) -> usize {
        self.out.len()
    }
}

/// Maximum zero bytes a decoder may synthesize past the end of a stream;
/// matches the most an encoder's `finish` can trim.
const MAX_VIRTUAL_ZEROS: u32 = 9;

#[derive(Debug)]
pub struct RangeDecoder<'a> {
    buf: &'a [u8],
    pos: usize,
    code: u64,
    range: u64,
    r: u64,
    virtual_zeros: u32,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(buf: &'a [u8]) -> Result<Self, CodingError> {
        let mut d = RangeDecoder {
            buf,
            pos: 0,
            code: 0,
            range: u64::MAX,
            r: 0,
            virtual_zeros: 0,
        };
        // One leading dummy byte plus the 64-bit window.
        for _ in 0..9 {
            d.code = (d.code << 8) | d.next_byte()? as u64;
        }
        Ok(d)
    }

    fn next_byte(&mut self) -> Result<u8, CodingError> {
        if self.pos < self.buf.len() {
            let b = self.buf[self.pos];
            self.pos += 1;
            Ok(b)
        } else if self.virtual_zeros < MAX_VIRTUAL_ZEROS {
            self.virtual_zeros += 1;
            Ok(0)
        } else {
            Err(CodingError::TruncatedStream)
        }
    }

    /// Returns the cumulative-frequency slot of the next symbol; the caller
    /// maps it to a symbol and confirms with [`RangeDecoder::consume`].
    pub fn decode_freq(&mut self, total: u32) -> u32 {
        debug_assert!(total <= MAX_TOTAL);
        self.r = self.range / total as u64;
        (self.code / self.r).min(total as u64 - 1) as u32
    }

    pub fn consume(&mut self, cum: u32, freq: u32) -> Result<(), CodingError> {
        debug_assert!(freq > 0);
        self.code -= self.r * cum as u64;
        self.range = self.r * freq as u64;
        while self.range < TOP {
            self.code = (self.code << 8) | self.next_byte()? as u64;
            self.range <<= 8;
        }
        Ok(())
    }
}
