//! Splitting large values into an entropy-coded bin choice plus raw low bits.
//!
//! A [`BinningTable`] partitions `0..total_range` into contiguous bins; bin
//! `i` starts at `starts[i]` and holds `2^widths[i]` values, so a value is
//! stored as its bin symbol followed by `widths[i]` bits of `value - start`.

use crate::bitstream::{BitCursor, BitSink};
use crate::entropy::Distribution;
use crate::stats::shannon_entropy;
use crate::{Error, Result};

/// Widest bin and widest raw value handled.
pub const MAX_VALUE_BITS: u8 = 57;

const DIGIT_BITS: u32 = 8;
const FANOUT: usize = 1 << DIGIT_BITS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Bin(u32),
    Table(u32),
    Outside,
}

/// Radix lookup over 8-bit digits of the value, most significant first.
/// A slot resolves to a bin when every value under its prefix shares one,
/// otherwise it points at a finer table for the next digit.
#[derive(Debug, Clone, PartialEq, Eq)]
struct RadixLookup {
    top_shift: u32,
    slots: Vec<Slot>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinningTable {
    starts: Vec<u64>,
    widths: Vec<u8>,
    total_range: u64,
    lookup: RadixLookup,
}

impl BinningTable {
    /// Builds a table from bin widths; the first bin starts at 0.
    pub fn from_widths(widths: Vec<u8>) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::EmptyInput("binning table without bins"));
        }
        if widths.len() > u16::MAX as usize {
            return Err(Error::InvalidConfig(format!("{} bins exceed 65535", widths.len())));
        }
        if let Some(&w) = widths.iter().find(|&&w| w > MAX_VALUE_BITS) {
            return Err(Error::InvalidConfig(format!("bin width {w} above {MAX_VALUE_BITS}")));
        }
        let mut starts = Vec::with_capacity(widths.len());
        let mut next = 0u64;
        for &w in &widths {
            starts.push(next);
            next = next
                .checked_add(1u64 << w)
                .filter(|&n| n <= 1u64 << 62)
                .ok_or_else(|| Error::InvalidConfig("binning range overflows".into()))?;
        }
        let lookup = RadixLookup::build(&starts, next);
        Ok(Self {
            starts,
            widths,
            total_range: next,
            lookup,
        })
    }

    pub fn bin_count(&self) -> usize {
        self.widths.len()
    }

    pub fn starts(&self) -> &[u64] {
        &self.starts
    }

    pub fn widths(&self) -> &[u8] {
        &self.widths
    }

    /// Exclusive upper bound of representable values.
    pub fn total_range(&self) -> u64 {
        self.total_range
    }

    pub fn start(&self, bin: usize) -> u64 {
        self.starts[bin]
    }

    pub fn width(&self, bin: usize) -> u8 {
        self.widths[bin]
    }

    /// Keeps only the bins up to the one containing `max_value`.
    pub fn truncated(&self, max_value: u64) -> Result<Self> {
        let bin = self.bin_lookup(max_value)?;
        Self::from_widths(self.widths[..=bin].to_vec())
    }

    /// Index of the bin holding `value`.
    pub fn bin_lookup(&self, value: u64) -> Result<usize> {
        if value >= self.total_range {
            return Err(Error::ValueOutOfRange {
                value,
                range: self.total_range,
            });
        }
        Ok(self.lookup.find(value))
    }

    /// Reference lookup by binary search over bin starts.
    pub fn bin_search(&self, value: u64) -> Result<usize> {
        if value >= self.total_range {
            return Err(Error::ValueOutOfRange {
                value,
                range: self.total_range,
            });
        }
        Ok(self.starts.partition_point(|&s| s <= value) - 1)
    }

    /// `binCount` as 16 bits, then each width as 6 bits, LSB-first.
    pub fn serialize(&self) -> Vec<u8> {
        let mut sink = BitSink::new();
        sink.write_bits(self.widths.len() as u64, 16).expect("bin count fits 16 bits");
        for &w in &self.widths {
            sink.write_bits(w as u64, 6).expect("width fits 6 bits");
        }
        sink.into_bytes()
    }

    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        let mut cursor = BitCursor::forward(bytes, bytes.len() as u64 * 8)?;
        let count = cursor.read_bits(16)? as usize;
        let widths = (0..count)
            .map(|_| cursor.read_bits(6).map(|w| w as u8))
            .collect::<Result<Vec<_>>>()?;
        if cursor.remaining() >= 8 {
            return Err(Error::Corrupt("trailing bytes after binning table".into()));
        }
        Self::from_widths(widths)
    }

    pub fn serialized_len(bin_count: usize) -> usize {
        (16 + 6 * bin_count).div_ceil(8)
    }
}

impl RadixLookup {
    fn build(starts: &[u64], total_range: u64) -> Self {
        let max = total_range - 1;
        let bits = 64 - max.leading_zeros();
        let digits = bits.div_ceil(DIGIT_BITS).max(1);
        let top_shift = (digits - 1) * DIGIT_BITS;
        let mut lookup = Self {
            top_shift,
            slots: Vec::new(),
        };
        lookup.build_table(starts, total_range, 0, top_shift);
        lookup
    }

    fn build_table(&mut self, starts: &[u64], total_range: u64, base: u64, shift: u32) -> u32 {
        let table = (self.slots.len() / FANOUT) as u32;
        let offset = self.slots.len();
        self.slots.resize(offset + FANOUT, Slot::Outside);
        let bin_of = |v: u64| starts.partition_point(|&s| s <= v) - 1;
        for digit in 0..FANOUT as u64 {
            let lo = base + (digit << shift);
            if lo >= total_range {
                break;
            }
            let hi = (lo + (1u64 << shift)).min(total_range) - 1;
            let (a, b) = (bin_of(lo), bin_of(hi));
            self.slots[offset + digit as usize] = if a == b {
                Slot::Bin(a as u32)
            } else {
                Slot::Table(self.build_table(starts, total_range, lo, shift - DIGIT_BITS))
            };
        }
        table
    }

    fn find(&self, value: u64) -> usize {
        let mut table = 0usize;
        let mut shift = self.top_shift;
        loop {
            let digit = ((value >> shift) as usize) & (FANOUT - 1);
            match self.slots[table * FANOUT + digit] {
                Slot::Bin(b) => return b as usize,
                Slot::Table(t) => {
                    table = t as usize;
                    shift -= DIGIT_BITS;
                }
                Slot::Outside => unreachable!("value checked against total range"),
            }
        }
    }
}

/// `2^(total_bits - low_bits)` equal bins of `low_bits` raw bits each.
pub fn simple_binning(total_bits: u8, low_bits: u8) -> Result<BinningTable> {
    if low_bits > total_bits || total_bits > MAX_VALUE_BITS {
        return Err(Error::InvalidConfig(format!(
            "simple binning needs low_bits <= total_bits <= {MAX_VALUE_BITS}, got {low_bits}/{total_bits}"
        )));
    }
    let top = total_bits - low_bits;
    if top > 16 {
        return Err(Error::InvalidConfig(format!(
            "{top} entropy-coded bits would need more than 65535 bins"
        )));
    }
    BinningTable::from_widths(vec![low_bits; 1 << top])
}

/// Greedy variable-width bins over ascending `sorted_values`.
///
/// From each boundary the bin width starts at 0 and grows until the bin holds
/// more than `min_val` of the remaining values or reaches past `max_value`.
/// Once values run out the last bin grows to cover `max_value`.
pub fn adaptive_binning(sorted_values: &[u64], min_val: u64, max_value: u64) -> Result<BinningTable> {
    if sorted_values.is_empty() {
        return Err(Error::EmptyInput("adaptive binning of no values"));
    }
    if min_val == 0 {
        return Err(Error::InvalidConfig("minVal must be at least 1".into()));
    }
    if sorted_values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig("values must be sorted ascending".into()));
    }
    let last = *sorted_values.last().expect("non-empty");
    if last > max_value {
        return Err(Error::ValueOutOfRange {
            value: last,
            range: max_value + 1,
        });
    }
    if max_value >> MAX_VALUE_BITS != 0 {
        return Err(Error::ValueOutOfRange {
            value: max_value,
            range: 1 << MAX_VALUE_BITS,
        });
    }
    let mut widths = Vec::new();
    let mut start = 0u64;
    let mut consumed = 0usize;
    while start <= max_value {
        let mut width = 0u8;
        loop {
            let end = start + (1u64 << width);
            let inside = sorted_values[consumed..].partition_point(|&v| v < end);
            if inside as u64 > min_val || end > max_value {
                widths.push(width);
                consumed += inside;
                start = end;
                break;
            }
            width += 1;
        }
    }
    BinningTable::from_widths(widths)
}

/// Entropy coder used for the bin symbol.
pub trait SymbolEncoder {
    fn encode_symbol(&mut self, symbol: usize) -> Result<()>;
}

pub trait SymbolDecoder {
    fn decode_symbol(&mut self) -> Result<usize>;
}

/// Writes the bin symbol through `coder` and the offset inside the bin to `raw`.
pub fn bin_encode(
    value: u64,
    table: &BinningTable,
    coder: &mut dyn SymbolEncoder,
    raw: &mut BitSink,
) -> Result<()> {
    let bin = table.bin_lookup(value)?;
    coder.encode_symbol(bin)?;
    raw.write_bits(value - table.start(bin), table.width(bin) as u32)
}

/// `binStart + readBits(binWidth)`.
pub fn bin_decode(
    coder: &mut dyn SymbolDecoder,
    table: &BinningTable,
    raw: &mut BitCursor<'_>,
) -> Result<u64> {
    let bin = coder.decode_symbol()?;
    if bin >= table.bin_count() {
        return Err(Error::Corrupt(format!("bin {bin} outside table")));
    }
    Ok(table.start(bin) + raw.read_bits(table.width(bin) as u32)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinningCost {
    /// Entropy of the empirical bin choice.
    pub bin_entropy_bits: f64,
    /// Mean raw low bits per value.
    pub avg_low_bits: f64,
    pub total_avg_bits: f64,
}

pub fn bin_frequencies(table: &BinningTable, values: &[u64]) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; table.bin_count()];
    for &v in values {
        counts[table.bin_lookup(v)?] += 1;
    }
    Ok(counts)
}

pub fn binning_cost(table: &BinningTable, values: &[u64]) -> Result<BinningCost> {
    if values.is_empty() {
        return Err(Error::EmptyInput("binning cost of no values"));
    }
    let counts = bin_frequencies(table, values)?;
    let n = values.len() as f64;
    let bin_entropy_bits = shannon_entropy(&Distribution::from_counts(&counts)?);
    let avg_low_bits = counts
        .iter()
        .zip(table.widths())
        .map(|(&c, &w)| c as f64 * w as f64)
        .sum::<f64>()
        / n;
    Ok(BinningCost {
        bin_entropy_bits,
        avg_low_bits,
        total_avg_bits: bin_entropy_bits + avg_low_bits,
    })
}
