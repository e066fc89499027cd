//! Order-0 Exp-Golomb code: `floor(log2(x+1))` zeros, then `x+1` in binary,
//! most significant bit first.

use crate::bitstream::{BitCursor, BitSink, MAX_WRITE_BITS};
use crate::{Error, Result};

/// Codeword length in bits for `x`.
pub fn exp_golomb_len(x: u64) -> u32 {
    let v = x as u128 + 1;
    let nbits = 128 - v.leading_zeros();
    2 * nbits - 1
}

fn codeword(x: u64) -> Result<(u64, u32)> {
    let v = x
        .checked_add(1)
        .ok_or(Error::ValueOutOfRange {
            value: x,
            range: u64::MAX,
        })?;
    Ok((v, 64 - v.leading_zeros()))
}

fn write_zeros(sink: &mut BitSink, mut n: u32) {
    while n > 0 {
        let take = n.min(MAX_WRITE_BITS);
        sink.write_bits(0, take).expect("zero fits");
        n -= take;
    }
}

/// Writes the `nbits`-bit `value` so that the first wire bit is its MSB.
fn write_msb_first(sink: &mut BitSink, value: u64, nbits: u32) {
    let mut reversed = value.reverse_bits() >> (64 - nbits);
    let mut left = nbits;
    while left > 0 {
        let take = left.min(MAX_WRITE_BITS);
        sink.write_bits(reversed & ((1u64 << take) - 1), take)
            .expect("masked");
        reversed >>= take;
        left -= take;
    }
}

pub fn exp_golomb_encode(x: u64, sink: &mut BitSink) -> Result<()> {
    let (v, nbits) = codeword(x)?;
    write_zeros(sink, nbits - 1);
    write_msb_first(sink, v, nbits);
    Ok(())
}

/// Writes the codeword last bit first, for a decoder that reads this stream
/// with a reverse cursor: single-bit reverse reads then see it in natural order.
pub fn exp_golomb_encode_reversed(x: u64, sink: &mut BitSink) -> Result<()> {
    let (v, nbits) = codeword(x)?;
    // LSB-first write of v puts v's LSB first; the reverse reader meets the
    // MSB first, then the zeros.
    let mut left = nbits;
    let mut rest = v;
    while left > 0 {
        let take = left.min(MAX_WRITE_BITS);
        sink.write_bits(rest & ((1u64 << take) - 1), take).expect("masked");
        rest >>= take;
        left -= take;
    }
    write_zeros(sink, nbits - 1);
    Ok(())
}

/// Decodes one codeword, reading single bits in the cursor's direction.
pub fn exp_golomb_decode(cursor: &mut BitCursor<'_>) -> Result<u64> {
    let mut zeros = 0u32;
    while !cursor.read_bit()? {
        zeros += 1;
        if zeros > 63 {
            return Err(Error::Corrupt("Exp-Golomb prefix longer than 63 bits".into()));
        }
    }
    let mut v = 1u64;
    for _ in 0..zeros {
        v = (v << 1) | cursor.read_bit()? as u64;
    }
    Ok(v - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits_of(x: u64) -> String {
        let mut s = BitSink::new();
        exp_golomb_encode(x, &mut s).unwrap();
        s.to_bit_string()
    }

    #[test]
    fn reference_codewords() {
        assert_eq!(bits_of(0), "1");
        assert_eq!(bits_of(1), "010");
        assert_eq!(bits_of(2), "011");
        assert_eq!(bits_of(3), "00100");
        assert_eq!(bits_of(4), "00101");
        assert_eq!(bits_of(7), "0001000");
    }

    #[test]
    fn decode_reference() {
        // "1" -> 0 and "010" -> 1
        let mut s = BitSink::new();
        s.write_bit(true);
        s.write_bit(false);
        s.write_bit(true);
        s.write_bit(false);
        let mut c = BitCursor::forward(s.as_bytes(), s.bit_count()).unwrap();
        assert_eq!(exp_golomb_decode(&mut c).unwrap(), 0);
        assert_eq!(exp_golomb_decode(&mut c).unwrap(), 1);
    }

    #[test]
    fn lengths_match_formula() {
        for x in 0..5000u64 {
            let expected = 2 * (63 - (x + 1).leading_zeros()) + 1;
            assert_eq!(exp_golomb_len(x), expected);
            assert_eq!(bits_of(x).len() as u32, expected);
        }
        assert_eq!(exp_golomb_len(u64::MAX - 1), 127);
    }

    #[test]
    fn exhaustive_round_trip() {
        let mut s = BitSink::new();
        for x in 0..=10_000u64 {
            exp_golomb_encode(x, &mut s).unwrap();
        }
        let mut c = BitCursor::forward(s.as_bytes(), s.bit_count()).unwrap();
        for x in 0..=10_000u64 {
            assert_eq!(exp_golomb_decode(&mut c).unwrap(), x);
        }
        assert!(c.is_exhausted());
    }

    #[test]
    fn large_values_round_trip() {
        let values = [u64::MAX - 1, 1 << 60, (1 << 57) - 1, 123_456_789_012];
        let mut s = BitSink::new();
        for &v in &values {
            exp_golomb_encode(v, &mut s).unwrap();
        }
        let mut c = BitCursor::forward(s.as_bytes(), s.bit_count()).unwrap();
        for &v in &values {
            assert_eq!(exp_golomb_decode(&mut c).unwrap(), v);
        }
        assert!(exp_golomb_encode(u64::MAX, &mut s).is_err());
    }

    #[test]
    fn reversed_codewords_read_backwards() {
        let values = [0u64, 1, 2, 9, 1000, 1 << 40];
        let mut s = BitSink::new();
        for &v in &values {
            exp_golomb_encode_reversed(v, &mut s).unwrap();
        }
        let mut c = BitCursor::reverse(s.as_bytes(), s.bit_count()).unwrap();
        for &v in values.iter().rev() {
            assert_eq!(exp_golomb_decode(&mut c).unwrap(), v);
        }
        assert!(c.is_exhausted());
    }

    #[test]
    fn truncation_is_an_error() {
        let mut s = BitSink::new();
        exp_golomb_encode(1000, &mut s).unwrap();
        let mut c = BitCursor::forward(s.as_bytes(), s.bit_count() - 1).unwrap();
        assert!(matches!(
            exp_golomb_decode(&mut c),
            Err(Error::StreamExhausted { .. })
        ));
    }
}
