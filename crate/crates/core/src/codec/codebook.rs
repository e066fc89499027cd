use crate::binning::{adaptive_binning, bin_frequencies, binning_cost, simple_binning, BinningTable};
use crate::entropy::{huffman_build, Distribution, PrefixCode, TansAutomaton, MAX_TABLE_LOG};
use crate::event_model::{bit_length, RelativeEvent, ValueType, MAX_CHANNELS};
use crate::{Error, Result};

use super::config::{BinningMode, ChannelMode, CodecConfig, CoderKind, StreamConfig};
use super::wire::{check_crc, ByteReader, ByteWriter};

/// Pulse counts coded without escape: 0..=8.
pub const PULSES_SYMBOLS: usize = 9;
/// Raw width of an escaped binned value.
pub const ESCAPE_RAW_BITS: u32 = 57;

const CODEBOOK_MAGIC: &[u8; 4] = b"TDCB";
pub const CODEBOOK_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolCoder {
    Tans(TansAutomaton),
    Prefix(PrefixCode),
    ExpGolomb,
    Fixed { bits: u8 },
}

impl SymbolCoder {
    pub fn kind(&self) -> CoderKind {
        match self {
            Self::Tans(_) => CoderKind::Tans,
            Self::Prefix(_) => CoderKind::Huffman,
            Self::ExpGolomb => CoderKind::ExpGolomb,
            Self::Fixed { .. } => CoderKind::Fixed,
        }
    }

    pub(crate) fn can_encode(&self, symbol: usize) -> bool {
        match self {
            Self::Tans(t) => t.can_encode(symbol),
            Self::Prefix(p) => p.can_encode(symbol),
            Self::ExpGolomb | Self::Fixed { .. } => true,
        }
    }
}

/// Tables for one value type and one channel class.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    /// Present for tANS and Huffman; pulses use 9 width-0 bins.
    pub binning: Option<BinningTable>,
    /// Symbol `binCount` is the escape; for fixed-width coding the all-ones
    /// code is.
    pub escape: bool,
    /// Training symbol counts the coder was built from, escape
    /// pseudo-count included.
    pub counts: Option<Vec<u64>>,
    pub coder: SymbolCoder,
}

impl ValueTable {
    pub fn escape_symbol(&self) -> Option<usize> {
        match (&self.binning, self.escape) {
            (Some(b), true) => Some(b.bin_count()),
            _ => None,
        }
    }

    /// All-ones code word that escapes a fixed-width value.
    pub fn fixed_escape_code(&self) -> Option<u64> {
        match self.coder {
            SymbolCoder::Fixed { bits } if self.escape => Some((1u64 << bits) - 1),
            _ => None,
        }
    }

    pub fn distribution(&self) -> Option<Distribution> {
        self.counts.as_ref().and_then(|c| Distribution::from_counts(c).ok())
    }

    pub fn symbol_count(&self) -> usize {
        self.binning.as_ref().map_or(0, |b| b.bin_count()) + self.escape as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeBook {
    config: CodecConfig,
    channel_count: usize,
    class_of: Vec<u16>,
    /// `tables[value type][class]`.
    tables: [Vec<ValueTable>; 4],
}

impl CodeBook {
    /// Assembles a codebook from explicit tables, checking that tANS tables of
    /// one value type share a table size.
    pub fn from_parts(
        config: CodecConfig,
        channel_count: usize,
        class_of: Vec<u16>,
        tables: [Vec<ValueTable>; 4],
    ) -> Result<Self> {
        config.validate()?;
        if channel_count == 0 || channel_count > MAX_CHANNELS {
            return Err(Error::InvalidConfig(format!("channel count {channel_count}")));
        }
        if class_of.len() != channel_count {
            return Err(Error::SizeMismatch {
                expected: channel_count,
                actual: class_of.len(),
            });
        }
        let classes = class_of.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        for (kind, per_class) in ValueType::ALL.iter().zip(&tables) {
            if per_class.len() != classes {
                return Err(Error::InvalidConfig(format!(
                    "{}: {} class tables for {classes} classes",
                    kind.name(),
                    per_class.len()
                )));
            }
            let mut logs = per_class.iter().filter_map(|t| match &t.coder {
                SymbolCoder::Tans(a) => Some(a.table_log()),
                _ => None,
            });
            if let Some(first) = logs.next() {
                if logs.any(|r| r != first) {
                    return Err(Error::InvalidConfig(format!(
                        "{}: tANS tables must share one table size",
                        kind.name()
                    )));
                }
            }
            for t in per_class {
                if t.coder.kind() != config.stream(*kind).coder {
                    return Err(Error::InvalidConfig(format!("{}: coder differs from config", kind.name())));
                }
                if t.coder.kind().is_binned() != t.binning.is_some() {
                    return Err(Error::InvalidConfig(format!("{}: binning/coder mismatch", kind.name())));
                }
                if let SymbolCoder::Fixed { bits } = t.coder {
                    if bits as u32 > ESCAPE_RAW_BITS || (t.escape && bits == 0) {
                        return Err(Error::InvalidConfig(format!("{}: fixed width {bits}", kind.name())));
                    }
                } else if t.escape && t.binning.is_none() {
                    return Err(Error::InvalidConfig(format!("{}: escape without bins", kind.name())));
                }
                if t.counts.as_ref().is_some_and(|c| c.len() != t.symbol_count()) {
                    return Err(Error::InvalidConfig(format!("{}: counts do not match the bins", kind.name())));
                }
                let alphabet = match &t.coder {
                    SymbolCoder::Tans(a) => a.alphabet_size(),
                    SymbolCoder::Prefix(p) => p.alphabet_size(),
                    _ => continue,
                };
                if alphabet != t.symbol_count() {
                    return Err(Error::InvalidConfig(format!(
                        "{}: coder alphabet {alphabet}, table has {} symbols",
                        kind.name(),
                        t.symbol_count()
                    )));
                }
            }
        }
        Ok(Self {
            config,
            channel_count,
            class_of,
            tables,
        })
    }

    pub fn config(&self) -> &CodecConfig {
        &self.config
    }

    pub fn channel_count(&self) -> usize {
        self.channel_count
    }

    pub fn class_count(&self) -> usize {
        self.tables[0].len()
    }

    pub fn class_of(&self, channel: usize) -> usize {
        self.class_of[channel] as usize
    }

    pub fn class_map(&self) -> &[u16] {
        &self.class_of
    }

    pub fn table(&self, kind: ValueType, class: usize) -> &ValueTable {
        &self.tables[kind.index()][class]
    }

    pub fn tables(&self, kind: ValueType) -> &[ValueTable] {
        &self.tables[kind.index()]
    }

    /// Shared tANS table log of a value type, if it is tANS coded.
    pub fn tans_table_log(&self, kind: ValueType) -> Option<u8> {
        self.tables[kind.index()].iter().find_map(|t| match &t.coder {
            SymbolCoder::Tans(a) => Some(a.table_log()),
            _ => None,
        })
    }
}

/// Channel classes from per-channel mean width; channels without widths
/// count as mean 0. `k` classes by rank quantile.
pub fn classify_channels(corpus: &[RelativeEvent], channel_count: usize, mode: ChannelMode) -> Vec<u16> {
    let k = match mode {
        ChannelMode::Shared => return vec![0; channel_count],
        ChannelMode::PerChannel => return (0..channel_count as u16).collect(),
        ChannelMode::Classed(k) => (k as usize).clamp(1, channel_count),
    };
    let mut sums = vec![(0f64, 0u64); channel_count];
    for e in corpus {
        for (c, rec) in e.channels.iter().enumerate() {
            sums[c].0 += rec.widths.iter().map(|&w| w as f64).sum::<f64>();
            sums[c].1 += rec.widths.len() as u64;
        }
    }
    let means: Vec<f64> = sums
        .iter()
        .map(|&(s, n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect();
    let mut order: Vec<usize> = (0..channel_count).collect();
    order.sort_by(|&a, &b| means[a].total_cmp(&means[b]).then(a.cmp(&b)));
    let mut class_of = vec![0u16; channel_count];
    for (rank, &c) in order.iter().enumerate() {
        class_of[c] = (rank * k / channel_count) as u16;
    }
    class_of
}

/// Smallest table log used when none is configured; smaller tables lose
/// several hundredths of a bit on skewed alphabets.
pub const MIN_AUTO_TABLE_LOG: u8 = 11;

/// `ceil(log2(8 m))`, at least [`MIN_AUTO_TABLE_LOG`].
fn auto_table_log(symbols: usize) -> u8 {
    let target = (8 * symbols.max(1)) as u64;
    (64 - (target - 1).leading_zeros()).clamp(MIN_AUTO_TABLE_LOG as u32, MAX_TABLE_LOG as u32) as u8
}

fn binning_for(stream: &StreamConfig, sorted: &[u64]) -> Result<Option<BinningTable>> {
    if !stream.coder.is_binned() {
        return Ok(None);
    }
    let max = sorted.last().copied().unwrap_or(0);
    let table = match stream.binning {
        // validated configs only pair direct binning with pulses here
        BinningMode::Direct => BinningTable::from_widths(vec![0; PULSES_SYMBOLS])?,
        BinningMode::Simple { low_bits } => {
            let total = (bit_length(max) as u8).max(low_bits);
            simple_binning(total, low_bits)?.truncated(max)?
        }
        BinningMode::SimpleTop { top_bits } => {
            let total = bit_length(max) as u8;
            simple_binning(total, total.saturating_sub(top_bits))?.truncated(max)?
        }
        BinningMode::Adaptive { min_val } if sorted.is_empty() => {
            let _ = min_val;
            BinningTable::from_widths(vec![0])?
        }
        BinningMode::Adaptive { min_val } => adaptive_binning(sorted, min_val, max)?,
    };
    Ok(Some(table))
}

/// A class keeps its own bins unless the bins trained on every class code
/// its values in fewer bits; small classes otherwise get a few coarse bins.
fn cheaper_binning(own: Option<BinningTable>, pooled: Option<&BinningTable>, values: &[u64]) -> Option<BinningTable> {
    let (Some(own), Some(pooled)) = (own.as_ref(), pooled) else {
        return own;
    };
    let cost = |t: &BinningTable| binning_cost(t, values).map_or(f64::INFINITY, |c| c.total_avg_bits);
    if cost(pooled) < cost(own) {
        Some(pooled.clone())
    } else {
        Some(own.clone())
    }
}

/// Symbol counts with escape pseudo-count; never all zero.
fn symbol_counts(kind: ValueType, table: &BinningTable, values: &[u64], escape: bool) -> Vec<u64> {
    let mut counts = vec![0u64; table.bin_count() + escape as usize];
    for &v in values {
        match table.bin_lookup(v) {
            Ok(b) => counts[b] += 1,
            Err(_) if escape => counts[table.bin_count()] += 1,
            Err(_) => {}
        }
    }
    if escape {
        counts[table.bin_count()] += 1;
        // small pulse counts never take the escape path
        if kind == ValueType::Pulses {
            for c in &mut counts[..PULSES_SYMBOLS] {
                *c = (*c).max(1);
            }
        }
    }
    if counts.iter().all(|&c| c == 0) {
        counts[0] = 1;
    }
    counts
}

/// Gathers per-type, per-class values from `corpus` and builds every table.
pub fn build_codebook(corpus: &[RelativeEvent], config: &CodecConfig) -> Result<CodeBook> {
    config.validate()?;
    let first = corpus.first().ok_or(Error::EmptyInput("codebook from an empty corpus"))?;
    let channel_count = first.channels.len();
    if let Some(e) = corpus.iter().find(|e| e.channels.len() != channel_count) {
        return Err(Error::SizeMismatch {
            expected: channel_count,
            actual: e.channels.len(),
        });
    }
    let class_of = classify_channels(corpus, channel_count, config.channel_mode);
    let classes = class_of.iter().map(|&c| c as usize + 1).max().unwrap_or(1);

    let mut values = vec![vec![Vec::<u64>::new(); classes]; 4];
    for e in corpus {
        for (c, rec) in e.channels.iter().enumerate() {
            let class = class_of[c] as usize;
            for kind in ValueType::ALL {
                values[kind.index()][class].extend(rec.values(kind));
            }
        }
    }

    let mut tables: [Vec<ValueTable>; 4] = Default::default();
    for kind in ValueType::ALL {
        let stream = config.stream(kind);
        let escape = config.escape && stream.coder != CoderKind::ExpGolomb;
        let mut staged = Vec::with_capacity(classes);
        let pooled_binning = if classes > 1 {
            let mut pooled = values[kind.index()].concat();
            pooled.sort_unstable();
            binning_for(stream, &pooled)?
        } else {
            None
        };
        for class_values in &mut values[kind.index()] {
            class_values.sort_unstable();
            let binning = cheaper_binning(binning_for(stream, class_values)?, pooled_binning.as_ref(), class_values);
            let counts = binning
                .as_ref()
                .map(|b| symbol_counts(kind, b, class_values, escape));
            staged.push((binning, counts, class_values.last().copied().unwrap_or(0)));
        }
        let table_log = match stream.table_log {
            Some(r) => r,
            None => auto_table_log(
                staged
                    .iter()
                    .filter_map(|s| s.1.as_ref().map(|c| c.len()))
                    .max()
                    .unwrap_or(1),
            ),
        };
        for (binning, counts, max) in staged {
            let distribution = counts.as_deref().map(Distribution::from_counts).transpose()?;
            let coder = match stream.coder {
                CoderKind::Tans => SymbolCoder::Tans(TansAutomaton::new(
                    distribution.as_ref().expect("binned"),
                    table_log,
                )?),
                CoderKind::Huffman => SymbolCoder::Prefix(huffman_build(distribution.as_ref().expect("binned"))?),
                CoderKind::ExpGolomb => SymbolCoder::ExpGolomb,
                // the escape code sits above the training maximum
                CoderKind::Fixed if escape => SymbolCoder::Fixed {
                    bits: bit_length(max.saturating_add(1)).min(ESCAPE_RAW_BITS) as u8,
                },
                CoderKind::Fixed => SymbolCoder::Fixed {
                    bits: bit_length(max) as u8,
                },
            };
            tables[kind.index()].push(ValueTable {
                binning,
                escape,
                counts,
                coder,
            });
        }
    }
    CodeBook::from_parts(*config, channel_count, class_of, tables)
}

/// Empirical bin frequencies of a class's training values, for reports.
pub fn training_bin_counts(table: &ValueTable, values: &[u64]) -> Result<Vec<u64>> {
    match &table.binning {
        Some(b) => bin_frequencies(b, values),
        None => Ok(Vec::new()),
    }
}

/// `earlier` holds the preceding class tables of the same value type; bins
/// equal to one of theirs are written as a reference.
fn write_table(w: &mut ByteWriter, t: &ValueTable, earlier: &[ValueTable]) -> Result<()> {
    w.u8(t.coder.kind().to_tag());
    w.u8(t.escape as u8);
    match &t.binning {
        Some(b) => match earlier.iter().position(|e| e.binning.as_ref() == Some(b)) {
            Some(class) => {
                w.u8(2);
                w.u16(class as u16);
            }
            None => {
                w.u8(1);
                w.blob(&b.serialize())?;
            }
        },
        None => w.u8(0),
    }
    match &t.counts {
        Some(counts) => {
            w.u8(1);
            w.varint(counts.len() as u64);
            for &c in counts {
                w.varint(c);
            }
        }
        None => w.u8(0),
    }
    match &t.coder {
        SymbolCoder::Tans(a) => {
            w.u8(a.table_log());
            w.u32(a.alphabet_size() as u32);
            if a.has_default_spread() {
                w.u8(0);
                for &c in a.counts() {
                    w.varint(c as u64);
                }
            } else {
                w.u8(1);
                for &s in a.spread() {
                    w.u16(s);
                }
            }
        }
        SymbolCoder::Prefix(p) => {
            w.u32(p.alphabet_size() as u32);
            w.bytes(p.lengths());
        }
        SymbolCoder::ExpGolomb => {}
        SymbolCoder::Fixed { bits } => w.u8(*bits),
    }
    Ok(())
}

fn read_table(r: &mut ByteReader<'_>, earlier: &[ValueTable]) -> Result<ValueTable> {
    let kind = CoderKind::from_tag(r.u8()?)?;
    let escape = r.u8()? != 0;
    let binning = match r.u8()? {
        0 => None,
        1 => Some(BinningTable::deserialize(r.blob()?)?),
        2 => {
            let class = r.u16()? as usize;
            let shared = earlier.get(class).and_then(|t| t.binning.clone());
            Some(shared.ok_or_else(|| Error::Corrupt(format!("binning reference to class {class}")))?)
        }
        f => return Err(Error::Corrupt(format!("binning flag {f}"))),
    };
    let counts = match r.u8()? {
        0 => None,
        1 => {
            let m = r.varint()? as usize;
            if m > r.remaining() {
                return Err(Error::Corrupt("symbol counts longer than codebook".into()));
            }
            Some((0..m).map(|_| r.varint()).collect::<Result<Vec<_>>>()?)
        }
        f => return Err(Error::Corrupt(format!("counts flag {f}"))),
    };
    let coder = match kind {
        CoderKind::Tans => {
            let table_log = r.u8()?;
            if table_log > MAX_TABLE_LOG {
                return Err(Error::Corrupt(format!("table log {table_log}")));
            }
            let alphabet = r.u32()? as usize;
            if alphabet > r.remaining() {
                return Err(Error::Corrupt("tANS alphabet longer than codebook".into()));
            }
            let automaton = match r.u8()? {
                0 => {
                    let counts = (0..alphabet)
                        .map(|_| {
                            let c = r.varint()?;
                            u32::try_from(c).map_err(|_| Error::Corrupt(format!("tANS count {c}")))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    TansAutomaton::from_counts(&counts, table_log)?
                }
                1 => {
                    let spread = (0..1usize << table_log).map(|_| r.u16()).collect::<Result<Vec<_>>>()?;
                    TansAutomaton::with_spread(spread, alphabet, table_log)?
                }
                f => return Err(Error::Corrupt(format!("spread flag {f}"))),
            };
            SymbolCoder::Tans(automaton)
        }
        CoderKind::Huffman => {
            let alphabet = r.u32()? as usize;
            SymbolCoder::Prefix(PrefixCode::from_lengths(r.take(alphabet)?.to_vec())?)
        }
        CoderKind::ExpGolomb => SymbolCoder::ExpGolomb,
        CoderKind::Fixed => SymbolCoder::Fixed { bits: r.u8()? },
    };
    Ok(ValueTable {
        binning,
        escape,
        counts,
        coder,
    })
}

/// Versioned, checksummed codebook bytes; the codec config travels inside.
pub fn serialize_codebook(codebook: &CodeBook) -> Result<Vec<u8>> {
    let mut w = ByteWriter::default();
    w.bytes(CODEBOOK_MAGIC);
    w.u8(CODEBOOK_VERSION);
    w.blob(&serde_json::to_vec(&codebook.config)?)?;
    w.u16(codebook.channel_count as u16);
    w.u16(codebook.class_count() as u16);
    for &c in &codebook.class_of {
        w.u16(c);
    }
    for per_class in &codebook.tables {
        for (i, t) in per_class.iter().enumerate() {
            write_table(&mut w, t, &per_class[..i])?;
        }
    }
    w.crc();
    Ok(w.buf)
}

pub fn deserialize_codebook(bytes: &[u8]) -> Result<CodeBook> {
    if bytes.len() < 5 || &bytes[..4] != CODEBOOK_MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes[4] != CODEBOOK_VERSION {
        return Err(Error::VersionMismatch {
            found: bytes[4],
            expected: CODEBOOK_VERSION,
        });
    }
    let body = check_crc(bytes, "codebook")?;
    let mut r = ByteReader::new(&body[5..], "codebook");
    let config: CodecConfig = serde_json::from_slice(r.blob()?)
        .map_err(|e| Error::Corrupt(format!("codebook config: {e}")))?;
    let channel_count = r.u16()? as usize;
    let classes = r.u16()? as usize;
    let class_of = (0..channel_count).map(|_| r.u16()).collect::<Result<Vec<_>>>()?;
    if class_of.iter().any(|&c| c as usize >= classes) {
        return Err(Error::Corrupt("class index out of range".into()));
    }
    let mut tables: [Vec<ValueTable>; 4] = Default::default();
    for per_class in &mut tables {
        for _ in 0..classes {
            let t = read_table(&mut r, per_class)?;
            per_class.push(t);
        }
    }
    r.finish()?;
    CodeBook::from_parts(config, channel_count, class_of, tables)
        .map_err(|e| Error::Corrupt(format!("inconsistent codebook: {e}")))
}
