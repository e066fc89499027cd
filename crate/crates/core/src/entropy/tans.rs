//! Tabled asymmetric numeral systems.
//!
//! An automaton has `L = 2^R` states `x` in `L..2L`. Encoding symbol `s`
//! first emits the `nbBits = (x + nb[s]) >> (R+1)` low bits of `x`, then
//! jumps to `encodingTable[offset[s] + (x >> nbBits)]`. Decoding from `x`
//! looks up `decodingTable[x - L]`, yields its symbol and rebuilds the
//! previous state from `newX` plus `nbBits` bits read backwards.

use crate::bitstream::{BitCursor, BitSink};
use crate::entropy::Distribution;
use crate::{Error, Result};

pub const MAX_TABLE_LOG: u8 = 16;

fn check_table_size(table_size: u32) -> Result<u8> {
    if table_size == 0 || !table_size.is_power_of_two() || table_size > 1 << MAX_TABLE_LOG {
        return Err(Error::InvalidConfig(format!(
            "table size {table_size} is not a power of two in 1..=2^{MAX_TABLE_LOG}"
        )));
    }
    Ok(table_size.trailing_zeros() as u8)
}

/// Integer counts `L_s` approximating `L * p_s`.
///
/// Symbols whose share would round below 1 are pinned to 1 first (repeated
/// until stable, since pinning shrinks everyone else's share). The remaining
/// states are apportioned by largest remainder, ties to the lower symbol.
pub fn quantize_probabilities(dist: &Distribution, table_size: u32) -> Result<Vec<u32>> {
    check_table_size(table_size)?;
    let probs = dist.probs();
    let support: Vec<usize> = (0..probs.len()).filter(|&s| probs[s] > 0.0).collect();
    if support.len() > table_size as usize {
        return Err(Error::TableTooSmall {
            table_size,
            symbols: support.len(),
        });
    }
    let mut counts = vec![0u32; probs.len()];
    let mut free = support;
    let mut budget = table_size as u64;
    loop {
        let mass: f64 = free.iter().map(|&s| probs[s]).sum();
        let (pinned, rest): (Vec<usize>, Vec<usize>) = free
            .iter()
            .partition(|&&s| probs[s] / mass * (budget as f64) < 1.0);
        if pinned.is_empty() {
            break;
        }
        for &s in &pinned {
            counts[s] = 1;
        }
        budget -= pinned.len() as u64;
        free = rest;
    }
    if free.is_empty() {
        return Ok(counts);
    }
    let mass: f64 = free.iter().map(|&s| probs[s]).sum();
    let mut remainders = Vec::with_capacity(free.len());
    let mut assigned = 0u64;
    for &s in &free {
        let exact = probs[s] / mass * budget as f64;
        let base = exact.floor();
        counts[s] = base as u32;
        assigned += base as u64;
        remainders.push((exact - base, s));
    }
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    // float rounding can leave the floors a few states off either way
    let mut i = 0;
    while assigned < budget {
        counts[remainders[i % remainders.len()].1] += 1;
        assigned += 1;
        i += 1;
    }
    while assigned > budget {
        let largest = free
            .iter()
            .copied()
            .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a)))
            .expect("non-empty");
        counts[largest] -= 1;
        assigned -= 1;
    }
    Ok(counts)
}

/// Step of the pseudorandom spread: `5L/8 + 3`, bumped by 3 when even so it
/// stays coprime with the power-of-two table size (only L = 2 and L = 8 need it).
pub fn spread_step(table_size: u32) -> u32 {
    let step = (5 * table_size as u64 / 8) as u32 + 3;
    if step.is_multiple_of(2) {
        step + 3
    } else {
        step
    }
}

/// Assigns symbol `s` to `counts[s]` slots, walking the table with a fixed step.
pub fn spread_symbols(counts: &[u32], table_size: u32) -> Result<Vec<u16>> {
    check_table_size(table_size)?;
    let sum: u64 = counts.iter().map(|&c| c as u64).sum();
    if sum != table_size as u64 {
        return Err(Error::InvalidDistribution(format!(
            "counts sum to {sum}, table size is {table_size}"
        )));
    }
    if counts.len() > u16::MAX as usize + 1 {
        return Err(Error::InvalidConfig("alphabet too large".into()));
    }
    let mask = table_size - 1;
    let step = spread_step(table_size);
    let mut spread = vec![0u16; table_size as usize];
    let mut x = 0u32;
    for (s, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            spread[x as usize] = s as u16;
            x = (x + step) & mask;
        }
    }
    Ok(spread)
}

fn counts_of(spread: &[u16], alphabet: usize) -> Result<Vec<u32>> {
    let mut counts = vec![0u32; alphabet];
    for &s in spread {
        *counts
            .get_mut(s as usize)
            .ok_or(Error::UnknownSymbol(s as usize))? += 1;
    }
    Ok(counts)
}

fn floor_log2(x: u32) -> u32 {
    31 - x.leading_zeros()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeEntry {
    pub symbol: u16,
    pub nb_bits: u8,
    /// Base of the previous state, in `0..L` (add `L` for the x-space value).
    pub new_x: u32,
}

pub fn build_decoding_table(spread: &[u16], table_size: u32) -> Result<Vec<DecodeEntry>> {
    let table_log = check_table_size(table_size)? as u32;
    if spread.len() != table_size as usize {
        return Err(Error::SizeMismatch {
            expected: table_size as usize,
            actual: spread.len(),
        });
    }
    let alphabet = spread.iter().map(|&s| s as usize + 1).max().unwrap_or(0);
    let mut next = counts_of(spread, alphabet)?;
    Ok(spread
        .iter()
        .map(|&symbol| {
            let x = next[symbol as usize];
            next[symbol as usize] += 1;
            let nb_bits = table_log - floor_log2(x);
            DecodeEntry {
                symbol,
                nb_bits: nb_bits as u8,
                new_x: (x << nb_bits) - table_size,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingTables {
    /// Next states, a permutation of `L..2L`.
    pub table: Vec<u32>,
    pub nb: Vec<i64>,
    /// `-L_s + sum of L_t for t < s`; may be negative.
    pub offset: Vec<i64>,
    /// `R - floor(log2 L_s)`: a step emits `k - 1` or `k` bits.
    pub k: Vec<u32>,
}

pub fn build_encoding_table(
    spread: &[u16],
    alphabet: usize,
    table_size: u32,
) -> Result<EncodingTables> {
    let table_log = check_table_size(table_size)? as u32;
    if spread.len() != table_size as usize {
        return Err(Error::SizeMismatch {
            expected: table_size as usize,
            actual: spread.len(),
        });
    }
    let counts = counts_of(spread, alphabet)?;
    let r = table_log + 1;
    let mut k = vec![0u32; alphabet];
    let mut nb = vec![0i64; alphabet];
    let mut offset = vec![0i64; alphabet];
    let mut cumulative = 0i64;
    for s in 0..alphabet {
        let ls = counts[s];
        if ls > 0 {
            k[s] = table_log - floor_log2(ls);
            nb[s] = ((k[s] as i64) << r) - ((ls as i64) << k[s]);
        }
        offset[s] = cumulative - ls as i64;
        cumulative += ls as i64;
    }
    let mut next: Vec<i64> = counts.iter().map(|&c| c as i64).collect();
    let mut table = vec![0u32; table_size as usize];
    for x in table_size..2 * table_size {
        let s = spread[(x - table_size) as usize] as usize;
        table[(offset[s] + next[s]) as usize] = x;
        next[s] += 1;
    }
    Ok(EncodingTables {
        table,
        nb,
        offset,
        k,
    })
}

/// Encoder or decoder state `x`, kept in `L..2L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoderState(u32);

impl CoderState {
    /// Initial encoder state `x = L`.
    pub fn initial(automaton: &TansAutomaton) -> Self {
        Self(automaton.table_size())
    }

    pub fn new(x: u32, automaton: &TansAutomaton) -> Result<Self> {
        let l = automaton.table_size();
        if x < l || x >= 2 * l {
            return Err(Error::Corrupt(format!("state {x} outside {l}..{}", 2 * l)));
        }
        Ok(Self(x))
    }

    pub fn value(self) -> u32 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TansAutomaton {
    table_log: u8,
    counts: Vec<u32>,
    spread: Vec<u16>,
    decoding: Vec<DecodeEntry>,
    encoding: EncodingTables,
}

impl TansAutomaton {
    /// Quantizes `dist` to `2^table_log` states and spreads it.
    pub fn new(dist: &Distribution, table_log: u8) -> Result<Self> {
        let table_size = Self::size_for(table_log)?;
        let counts = quantize_probabilities(dist, table_size)?;
        Self::from_counts(&counts, table_log)
    }

    pub fn from_counts(counts: &[u32], table_log: u8) -> Result<Self> {
        let table_size = Self::size_for(table_log)?;
        let spread = spread_symbols(counts, table_size)?;
        Self::with_spread(spread, counts.len(), table_log)
    }

    /// Builds the tables from an explicit symbol spread.
    pub fn with_spread(spread: Vec<u16>, alphabet: usize, table_log: u8) -> Result<Self> {
        let table_size = Self::size_for(table_log)?;
        let counts = counts_of(&spread, alphabet)?;
        let decoding = build_decoding_table(&spread, table_size)?;
        let encoding = build_encoding_table(&spread, alphabet, table_size)?;
        Ok(Self {
            table_log,
            counts,
            spread,
            decoding,
            encoding,
        })
    }

    fn size_for(table_log: u8) -> Result<u32> {
        if table_log > MAX_TABLE_LOG {
            return Err(Error::InvalidConfig(format!(
                "table log {table_log} above {MAX_TABLE_LOG}"
            )));
        }
        Ok(1u32 << table_log)
    }

    pub fn table_log(&self) -> u8 {
        self.table_log
    }

    pub fn table_size(&self) -> u32 {
        1 << self.table_log
    }

    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn spread(&self) -> &[u16] {
        &self.spread
    }

    /// True when the spread is the one [`spread_symbols`] derives from the counts.
    pub fn has_default_spread(&self) -> bool {
        spread_symbols(&self.counts, self.table_size()).is_ok_and(|s| s == self.spread)
    }

    pub fn decoding_table(&self) -> &[DecodeEntry] {
        &self.decoding
    }

    pub fn encoding(&self) -> &EncodingTables {
        &self.encoding
    }

    pub fn can_encode(&self, symbol: usize) -> bool {
        self.counts.get(symbol).is_some_and(|&c| c > 0)
    }

    /// One encode transition from `x`: (bits emitted, next state).
    #[inline]
    pub fn transition(&self, x: u32, symbol: usize) -> (u32, u32) {
        let r = self.table_log as u32 + 1;
        let nb_bits = ((x as i64 + self.encoding.nb[symbol]) >> r) as u32;
        let idx = self.encoding.offset[symbol] + (x >> nb_bits) as i64;
        (nb_bits, self.encoding.table[idx as usize])
    }

    /// Emits the low bits of the state and moves to the next state.
    /// Returns the number of bits written.
    pub fn encode_symbol(
        &self,
        state: &mut CoderState,
        symbol: usize,
        sink: &mut BitSink,
    ) -> Result<u32> {
        if !self.can_encode(symbol) {
            return Err(Error::UnknownSymbol(symbol));
        }
        let x = state.0;
        debug_assert!(x >= self.table_size() && x < 2 * self.table_size());
        let (nb_bits, next) = self.transition(x, symbol);
        sink.write_bits(x as u64 & ((1u64 << nb_bits) - 1), nb_bits)?;
        state.0 = next;
        Ok(nb_bits)
    }

    /// Symbol the next [`Self::decode_symbol`] will return, without reading bits.
    pub fn peek_symbol(&self, state: CoderState) -> usize {
        self.decoding[(state.0 - self.table_size()) as usize].symbol as usize
    }

    /// Inverse of [`Self::encode_symbol`]; `cursor` must read in reverse.
    pub fn decode_symbol(&self, state: &mut CoderState, cursor: &mut BitCursor<'_>) -> Result<usize> {
        let l = self.table_size();
        let entry = self.decoding[(state.0 - l) as usize];
        let bits = cursor.read_bits(entry.nb_bits as u32)? as u32;
        state.0 = l + entry.new_x + bits;
        Ok(entry.symbol as usize)
    }

    #[doc(hidden)]
    /// Overwrites one decoding entry; used by the self-test negative control.
    pub fn tamper_decoding_entry(&mut self, index: usize, entry: DecodeEntry) {
        self.decoding[index] = entry;
    }
}
