//! Bit-level I/O.
//!
//! Bits are packed least-significant-bit first within each byte and bytes
//! are appended in order. A [`BitCursor`] reads either forward (FIFO, the
//! order the bits were written) or in reverse (LIFO), which is what a tANS
//! decoder needs since it consumes the encoder's output backwards.
//!
//! A multi-bit value written by one [`BitSink::write_bits`] call comes back
//! unchanged from one read of the same width in either direction.

use crate::{Error, Result};

/// Widest value accepted by a single write: any value plus 7 bits of
/// partial-byte state still fits a 64-bit accumulator.
pub const MAX_WRITE_BITS: u32 = 57;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitSink {
    buffer: Vec<u8>,
    bit_count: u64,
}

impl BitSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bytes: usize) -> Self {
        Self {
            buffer: Vec::with_capacity(bytes),
            bit_count: 0,
        }
    }

    /// Appends the `n` low bits of `value`, least significant first.
    pub fn write_bits(&mut self, value: u64, n: u32) -> Result<()> {
        if n > MAX_WRITE_BITS {
            return Err(Error::WidthTooLarge(n));
        }
        if n == 0 {
            return if value == 0 {
                Ok(())
            } else {
                Err(Error::ValueTooWide { value, width: 0 })
            };
        }
        if value >> n != 0 {
            return Err(Error::ValueTooWide { value, width: n });
        }
        let mut value = value;
        let mut remaining = n;
        while remaining > 0 {
            let offset = (self.bit_count % 8) as u32;
            if offset == 0 {
                self.buffer.push(0);
            }
            let take = (8 - offset).min(remaining);
            let chunk = (value & ((1u64 << take) - 1)) as u8;
            *self.buffer.last_mut().expect("byte pushed above") |= chunk << offset;
            value >>= take;
            remaining -= take;
            self.bit_count += take as u64;
        }
        Ok(())
    }

    #[inline]
    pub fn write_bit(&mut self, bit: bool) {
        self.write_bits(bit as u64, 1).expect("single bit always fits");
    }

    pub fn bit_count(&self) -> u64 {
        self.bit_count
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buffer
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buffer
    }

    /// Appends every bit of `other` after the bits already written.
    pub fn append(&mut self, other: &BitSink) {
        let mut cursor = BitCursor::forward(other.as_bytes(), other.bit_count())
            .expect("sink length is consistent");
        let mut left = other.bit_count();
        while left > 0 {
            let take = left.min(MAX_WRITE_BITS as u64) as u32;
            let v = cursor.read_bits(take).expect("bits available");
            self.write_bits(v, take).expect("width checked");
            left -= take as u64;
        }
    }

    /// Renders the written bits as '0'/'1' characters in write order.
    pub fn to_bit_string(&self) -> String {
        (0..self.bit_count)
            .map(|i| {
                if (self.buffer[(i / 8) as usize] >> (i % 8)) & 1 == 1 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

/// Read position over a byte buffer holding exactly `bit_len` meaningful bits.
#[derive(Debug, Clone)]
pub struct BitCursor<'a> {
    buffer: &'a [u8],
    bit_len: u64,
    position: u64,
    direction: Direction,
}

impl<'a> BitCursor<'a> {
    /// Cursor at bit 0 reading towards the end.
    pub fn forward(buffer: &'a [u8], bit_len: u64) -> Result<Self> {
        Self::new(buffer, bit_len, Direction::Forward)
    }

    /// Cursor at `bit_len` reading towards bit 0.
    pub fn reverse(buffer: &'a [u8], bit_len: u64) -> Result<Self> {
        Self::new(buffer, bit_len, Direction::Reverse)
    }

    pub fn new(buffer: &'a [u8], bit_len: u64, direction: Direction) -> Result<Self> {
        if bit_len > buffer.len() as u64 * 8 {
            return Err(Error::Corrupt(format!(
                "bit length {bit_len} exceeds buffer of {} bytes",
                buffer.len()
            )));
        }
        let position = match direction {
            Direction::Forward => 0,
            Direction::Reverse => bit_len,
        };
        Ok(Self {
            buffer,
            bit_len,
            position,
            direction,
        })
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    /// Bits left in the reading direction.
    pub fn remaining(&self) -> u64 {
        match self.direction {
            Direction::Forward => self.bit_len - self.position,
            Direction::Reverse => self.position,
        }
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining() == 0
    }

    pub fn read_bits(&mut self, n: u32) -> Result<u64> {
        if n > 64 {
            return Err(Error::WidthTooLarge(n));
        }
        if n == 0 {
            return Ok(0);
        }
        let remaining = self.remaining();
        if (n as u64) > remaining {
            return Err(Error::StreamExhausted {
                requested: n,
                remaining,
            });
        }
        let start = match self.direction {
            Direction::Forward => {
                let s = self.position;
                self.position += n as u64;
                s
            }
            Direction::Reverse => {
                self.position -= n as u64;
                self.position
            }
        };
        Ok(self.peek_at(start, n))
    }

    #[inline]
    pub fn read_bit(&mut self) -> Result<bool> {
        Ok(self.read_bits(1)? == 1)
    }

    fn peek_at(&self, start: u64, n: u32) -> u64 {
        let mut value = 0u64;
        let mut got = 0u32;
        let mut pos = start;
        while got < n {
            let byte = self.buffer[(pos / 8) as usize];
            let offset = (pos % 8) as u32;
            let take = (8 - offset).min(n - got);
            let chunk = ((byte >> offset) as u64) & ((1u64 << take) - 1);
            value |= chunk << got;
            got += take;
            pos += take as u64;
        }
        value
    }
}
