//! One frame: six bit streams behind a fixed header, closed by a CRC-32.
//!
//! Layout: event count (u32), six stream bit lengths (u64), the final state
//! of every tANS-coded value type as `x - L` in `ceil(R/8)` bytes, the six
//! payloads each padded to a byte, then the CRC of everything before it.

use crate::bitstream::{BitCursor, BitSink};
use crate::entropy::{exp_golomb_decode, exp_golomb_encode, exp_golomb_encode_reversed, CoderState};
use crate::event_model::{bit_length, ChannelRecord, RelativeEvent, ValueType};
use crate::{Error, Result};

use super::codebook::{CodeBook, SymbolCoder, ValueTable, ESCAPE_RAW_BITS, PULSES_SYMBOLS};
use super::wire::{check_crc, ByteReader, ByteWriter};

pub const STREAM_COUNT: usize = 6;
pub const STREAM_NAMES: [&str; STREAM_COUNT] = ["pulses", "start", "width", "distance", "raw", "ref"];
const RAW: usize = 4;
const REF: usize = 5;

/// Per-frame pulse budget; bounds decoder allocation on corrupt input.
pub const MAX_FRAME_PULSES: usize = 1 << 24;
pub const MAX_FRAME_EVENTS: usize = 1 << 24;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameStats {
    pub events: usize,
    pub stream_bits: [u64; STREAM_COUNT],
    /// Share of the raw stream by value type.
    pub raw_bits_by_type: [u64; 4],
    /// Everything except the payload bits: header, states, padding, CRC.
    pub overhead_bytes: usize,
    pub total_bytes: usize,
}

impl FrameStats {
    /// Symbol-stream bits plus the type's raw share.
    pub fn type_bits(&self, kind: ValueType) -> u64 {
        self.stream_bits[kind.index()] + self.raw_bits_by_type[kind.index()]
    }

    pub fn accumulate(&mut self, other: &FrameStats) {
        self.events += other.events;
        for (a, b) in self.stream_bits.iter_mut().zip(other.stream_bits) {
            *a += b;
        }
        for (a, b) in self.raw_bits_by_type.iter_mut().zip(other.raw_bits_by_type) {
            *a += b;
        }
        self.overhead_bytes += other.overhead_bytes;
        self.total_bytes += other.total_bytes;
    }
}

fn state_bytes(table_log: u8) -> usize {
    (table_log as usize).div_ceil(8)
}

fn zigzag(v: i64) -> u64 {
    ((v << 1) ^ (v >> 63)) as u64
}

fn unzigzag(v: u64) -> i64 {
    (v >> 1) as i64 ^ -((v & 1) as i64)
}

struct Encoder<'a> {
    cb: &'a CodeBook,
    sinks: [BitSink; STREAM_COUNT],
    states: [Option<CoderState>; 4],
    raw_by_type: [u64; 4],
}

impl<'a> Encoder<'a> {
    fn new(cb: &'a CodeBook) -> Self {
        let states = ValueType::ALL.map(|kind| match &cb.table(kind, 0).coder {
            SymbolCoder::Tans(a) => Some(CoderState::initial(a)),
            _ => None,
        });
        Self {
            cb,
            sinks: Default::default(),
            states,
            raw_by_type: [0; 4],
        }
    }

    fn raw(&mut self, kind: ValueType, v: u64, n: u32) -> Result<()> {
        self.sinks[RAW].write_bits(v, n)?;
        self.raw_by_type[kind.index()] += n as u64;
        Ok(())
    }

    fn symbol(&mut self, kind: ValueType, table: &ValueTable, symbol: usize) -> Result<()> {
        let i = kind.index();
        match &table.coder {
            SymbolCoder::Tans(a) => {
                let state = self.states[i].as_mut().expect("tans state");
                a.encode_symbol(state, symbol, &mut self.sinks[i])?;
            }
            SymbolCoder::Prefix(p) => p.encode_symbol(symbol, &mut self.sinks[i])?,
            _ => unreachable!("only binned coders emit symbols"),
        }
        Ok(())
    }

    fn value(&mut self, kind: ValueType, class: usize, v: u64) -> Result<()> {
        let i = kind.index();
        let cb = self.cb;
        let table = cb.table(kind, class);
        match &table.coder {
            SymbolCoder::ExpGolomb => return exp_golomb_encode(v, &mut self.sinks[i]),
            SymbolCoder::Fixed { bits } => {
                if let Some(code) = table.fixed_escape_code() {
                    if v >= code {
                        self.sinks[i].write_bits(code, *bits as u32)?;
                        return if kind == ValueType::Pulses {
                            exp_golomb_encode(v - code, &mut self.sinks[i])
                        } else {
                            self.raw(kind, v, ESCAPE_RAW_BITS)
                        };
                    }
                } else if bit_length(v) > *bits as u32 {
                    return Err(Error::ValueTooWide {
                        value: v,
                        width: *bits as u32,
                    });
                }
                return self.sinks[i].write_bits(v, *bits as u32);
            }
            SymbolCoder::Tans(_) | SymbolCoder::Prefix(_) => {}
        }
        let binning = table.binning.as_ref().expect("binned coder has a table");
        if let Ok(bin) = binning.bin_lookup(v) {
            if table.coder.can_encode(bin) {
                self.symbol(kind, table, bin)?;
                return if kind == ValueType::Pulses {
                    Ok(())
                } else {
                    self.raw(kind, v - binning.start(bin), binning.width(bin) as u32)
                };
            }
        }
        let Some(escape) = table.escape_symbol() else {
            return Err(Error::ValueOutOfRange {
                value: v,
                range: binning.total_range(),
            });
        };
        self.symbol(kind, table, escape)?;
        if kind == ValueType::Pulses {
            // pulses escapes only ever carry counts the bins cannot hold
            let extra = v.checked_sub(PULSES_SYMBOLS as u64).ok_or(Error::UnknownSymbol(v as usize))?;
            match table.coder {
                SymbolCoder::Tans(_) => exp_golomb_encode_reversed(extra, &mut self.sinks[i]),
                _ => exp_golomb_encode(extra, &mut self.sinks[i]),
            }
        } else {
            self.raw(kind, v, ESCAPE_RAW_BITS)
        }
    }
}

fn check_event(event: &RelativeEvent, cb: &CodeBook) -> Result<()> {
    if event.channels.len() != cb.channel_count() {
        return Err(Error::SizeMismatch {
            expected: cb.channel_count(),
            actual: event.channels.len(),
        });
    }
    event.validate()
}

/// Encodes `events` with `cb`; the same events and codebook always give the
/// same bytes.
pub fn compress_frame(events: &[RelativeEvent], cb: &CodeBook) -> Result<(Vec<u8>, FrameStats)> {
    if events.len() > MAX_FRAME_EVENTS {
        return Err(Error::InvalidConfig(format!("{} events in one frame", events.len())));
    }
    let mut pulses_total = 0usize;
    for e in events {
        check_event(e, cb)?;
        pulses_total += e.pulse_count();
    }
    if pulses_total > MAX_FRAME_PULSES {
        return Err(Error::InvalidConfig(format!("{pulses_total} pulses in one frame")));
    }
    let store_ref = cb.config().store_ref;
    let mut enc = Encoder::new(cb);
    let mut prev_ref = 0u64;
    for e in events {
        if store_ref {
            let delta = e.ref_time as i64 - prev_ref as i64;
            exp_golomb_encode(zigzag(delta), &mut enc.sinks[REF])?;
            prev_ref = e.ref_time;
        }
        for (c, rec) in e.channels.iter().enumerate() {
            let class = cb.class_of(c);
            enc.value(ValueType::Pulses, class, rec.pulses as u64)?;
            if rec.pulses == 0 {
                continue;
            }
            enc.value(ValueType::Start, class, rec.start)?;
            for (k, &w) in rec.widths.iter().enumerate() {
                enc.value(ValueType::Width, class, w)?;
                if let Some(&d) = rec.distances.get(k) {
                    enc.value(ValueType::Distance, class, d)?;
                }
            }
        }
    }

    let mut w = ByteWriter::default();
    w.u32(events.len() as u32);
    for s in &enc.sinks {
        w.u64(s.bit_count());
    }
    for kind in ValueType::ALL {
        if let (Some(state), Some(log)) = (enc.states[kind.index()], cb.tans_table_log(kind)) {
            let x = state.value() - (1u32 << log);
            w.bytes(&x.to_le_bytes()[..state_bytes(log)]);
        }
    }
    for s in &enc.sinks {
        w.bytes(s.as_bytes());
    }
    w.crc();

    let stream_bits = enc.sinks.each_ref().map(|s| s.bit_count());
    let payload_bits: u64 = stream_bits.iter().sum();
    let stats = FrameStats {
        events: events.len(),
        stream_bits,
        raw_bits_by_type: enc.raw_by_type,
        overhead_bytes: w.buf.len() - (payload_bits / 8) as usize,
        total_bytes: w.buf.len(),
    };
    Ok((w.buf, stats))
}

/// Event count of a frame, read from its header without decoding.
pub fn frame_event_count(bytes: &[u8]) -> Result<usize> {
    Ok(ByteReader::new(bytes, "frame").u32()? as usize)
}

fn corrupt(e: Error) -> Error {
    match e {
        Error::Corrupt(_) | Error::ChecksumMismatch { .. } => e,
        other => Error::Corrupt(format!("frame: {other}")),
    }
}

/// Exact inverse of [`compress_frame`].
pub fn decompress_frame(bytes: &[u8], cb: &CodeBook) -> Result<Vec<RelativeEvent>> {
    let body = check_crc(bytes, "frame")?;
    decode_body(body, cb).map_err(corrupt)
}

struct Decoder<'a> {
    cb: &'a CodeBook,
    states: [Option<CoderState>; 4],
}

impl Decoder<'_> {
    /// Decodes `schedule.len()` symbols of a binned type from its reverse
    /// tANS stream; returns them in encode order.
    fn tans_symbols(
        &mut self,
        kind: ValueType,
        schedule: &[usize],
        cursor: &mut BitCursor<'_>,
    ) -> Result<Vec<usize>> {
        let mut state = self.states[kind.index()].expect("tans state");
        let mut out = Vec::with_capacity(schedule.len());
        for &class in schedule.iter().rev() {
            let SymbolCoder::Tans(a) = &self.cb.table(kind, class).coder else {
                unreachable!("one coder per type")
            };
            out.push(a.decode_symbol(&mut state, cursor)?);
        }
        self.states[kind.index()] = Some(state);
        out.reverse();
        Ok(out)
    }
}

fn decode_body(body: &[u8], cb: &CodeBook) -> Result<Vec<RelativeEvent>> {
    let mut r = ByteReader::new(body, "frame");
    let event_count = r.u32()? as usize;
    if event_count > MAX_FRAME_EVENTS {
        return Err(Error::Corrupt(format!("{event_count} events in one frame")));
    }
    let mut bits = [0u64; STREAM_COUNT];
    for b in &mut bits {
        *b = r.u64()?;
    }
    let mut dec = Decoder { cb, states: [None; 4] };
    for kind in ValueType::ALL {
        if let Some(log) = cb.tans_table_log(kind) {
            let mut le = [0u8; 4];
            le[..state_bytes(log)].copy_from_slice(r.take(state_bytes(log))?);
            let x = u32::from_le_bytes(le);
            if x >> log != 0 {
                return Err(Error::Corrupt(format!("{} state {x} above L", kind.name())));
            }
            let SymbolCoder::Tans(a) = &cb.table(kind, 0).coder else {
                unreachable!("tans log implies tans coder")
            };
            dec.states[kind.index()] = Some(CoderState::new(x + (1 << log), a)?);
        }
    }
    let mut payloads: [&[u8]; STREAM_COUNT] = [&[]; STREAM_COUNT];
    for (p, &b) in payloads.iter_mut().zip(&bits) {
        let len = usize::try_from(b.div_ceil(8)).map_err(|_| Error::Corrupt("stream length".into()))?;
        *p = r.take(len)?;
    }
    r.finish()?;
    let cursor = |i: usize| -> Result<BitCursor<'_>> {
        let reverse = i < 4 && dec_is_tans(cb, i);
        if reverse {
            BitCursor::reverse(payloads[i], bits[i])
        } else {
            BitCursor::forward(payloads[i], bits[i])
        }
    };

    let channels = cb.channel_count();
    let slots = event_count * channels;

    // pulses: counts gate every other stream
    let mut pulses = vec![0u64; slots];
    let mut pc = cursor(0)?;
    let mut total = 0usize;
    let slot_order: Box<dyn Iterator<Item = usize>> = if dec_is_tans(cb, 0) {
        Box::new((0..slots).rev())
    } else {
        Box::new(0..slots)
    };
    for slot in slot_order {
        let table = cb.table(ValueType::Pulses, cb.class_of(slot % channels));
        let v = decode_pulses(&mut dec, table, &mut pc)?;
        if v > MAX_FRAME_PULSES as u64 {
            return Err(Error::Corrupt(format!("{v} pulses on one channel")));
        }
        total += v as usize;
        if total > MAX_FRAME_PULSES {
            return Err(Error::Corrupt("pulse budget exceeded".into()));
        }
        pulses[slot] = v;
    }
    if !pc.is_exhausted() {
        return Err(Error::Corrupt("pulses stream not fully consumed".into()));
    }

    // class of every coded value, in encode order
    let mut schedules: [Vec<usize>; 4] = Default::default();
    for (slot, &p) in pulses.iter().enumerate() {
        let class = cb.class_of(slot % channels);
        if p > 0 {
            schedules[1].push(class);
            schedules[2].extend(std::iter::repeat_n(class, p as usize));
            schedules[3].extend(std::iter::repeat_n(class, p as usize - 1));
        }
    }

    // bin symbols or plain values per type, in encode order
    let mut coded: [Vec<u64>; 4] = Default::default();
    for kind in [ValueType::Start, ValueType::Width, ValueType::Distance] {
        let i = kind.index();
        let mut sc = cursor(i)?;
        coded[i] = match &cb.table(kind, 0).coder {
            SymbolCoder::Tans(_) => dec
                .tans_symbols(kind, &schedules[i], &mut sc)?
                .into_iter()
                .map(|s| s as u64)
                .collect(),
            _ => schedules[i]
                .iter()
                .map(|&class| match &cb.table(kind, class).coder {
                    SymbolCoder::Prefix(p) => p.decode_symbol(&mut sc).map(|s| s as u64),
                    SymbolCoder::ExpGolomb => exp_golomb_decode(&mut sc),
                    SymbolCoder::Fixed { bits } => sc.read_bits(*bits as u32),
                    SymbolCoder::Tans(_) => unreachable!("one coder per type"),
                })
                .collect::<Result<Vec<_>>>()?,
        };
        if !sc.is_exhausted() {
            return Err(Error::Corrupt(format!("{} stream not fully consumed", kind.name())));
        }
    }
    for kind in ValueType::ALL {
        if let (Some(state), Some(log)) = (dec.states[kind.index()], cb.tans_table_log(kind)) {
            if state.value() != 1 << log {
                return Err(Error::Corrupt(format!("{} did not return to the initial state", kind.name())));
            }
        }
    }

    let mut raw = cursor(RAW)?;
    let mut next = [0usize; 4];
    let mut take = |kind: ValueType, class: usize, raw: &mut BitCursor<'_>| -> Result<u64> {
        let i = kind.index();
        let c = coded[i][next[i]];
        next[i] += 1;
        let table = cb.table(kind, class);
        let Some(binning) = &table.binning else {
            return if Some(c) == table.fixed_escape_code() {
                raw.read_bits(ESCAPE_RAW_BITS)
            } else {
                Ok(c)
            };
        };
        let bin = c as usize;
        if Some(bin) == table.escape_symbol() {
            return raw.read_bits(ESCAPE_RAW_BITS);
        }
        if bin >= binning.bin_count() {
            return Err(Error::Corrupt(format!("{} bin {bin} outside table", kind.name())));
        }
        Ok(binning.start(bin) + raw.read_bits(binning.width(bin) as u32)?)
    };
    let mut ref_cursor = cursor(REF)?;
    let mut prev_ref = 0u64;
    let mut events = Vec::with_capacity(event_count);
    for e in 0..event_count {
        let mut event = RelativeEvent::empty(channels);
        if cb.config().store_ref {
            let delta = unzigzag(exp_golomb_decode(&mut ref_cursor)?);
            prev_ref = prev_ref
                .checked_add_signed(delta)
                .ok_or_else(|| Error::Corrupt("reference time underflow".into()))?;
            event.ref_time = prev_ref;
        }
        for (c, rec) in event.channels.iter_mut().enumerate() {
            let p = pulses[e * channels + c];
            if p == 0 {
                continue;
            }
            let class = cb.class_of(c);
            *rec = ChannelRecord {
                pulses: p as u32,
                start: take(ValueType::Start, class, &mut raw)?,
                widths: Vec::with_capacity(p as usize),
                distances: Vec::with_capacity(p as usize - 1),
            };
            for k in 0..p {
                rec.widths.push(take(ValueType::Width, class, &mut raw)?);
                if k + 1 < p {
                    rec.distances.push(take(ValueType::Distance, class, &mut raw)?);
                }
            }
        }
        event.validate()?;
        events.push(event);
    }
    if !raw.is_exhausted() || !ref_cursor.is_exhausted() {
        return Err(Error::Corrupt("raw or ref stream not fully consumed".into()));
    }
    Ok(events)
}

fn dec_is_tans(cb: &CodeBook, stream: usize) -> bool {
    cb.tans_table_log(ValueType::ALL[stream]).is_some()
}

fn decode_pulses(dec: &mut Decoder<'_>, table: &ValueTable, cursor: &mut BitCursor<'_>) -> Result<u64> {
    let escape = table.escape_symbol();
    match &table.coder {
        SymbolCoder::Tans(a) => {
            let state = dec.states[0].as_mut().expect("tans state");
            let mut extra = 0;
            if Some(a.peek_symbol(*state)) == escape {
                extra = exp_golomb_decode(cursor)?;
            }
            let s = a.decode_symbol(state, cursor)?;
            Ok(if Some(s) == escape { (PULSES_SYMBOLS as u64).saturating_add(extra) } else { s as u64 })
        }
        SymbolCoder::Prefix(p) => {
            let s = p.decode_symbol(cursor)?;
            if Some(s) == escape {
                Ok((PULSES_SYMBOLS as u64).saturating_add(exp_golomb_decode(cursor)?))
            } else {
                Ok(s as u64)
            }
        }
        SymbolCoder::ExpGolomb => exp_golomb_decode(cursor),
        SymbolCoder::Fixed { bits } => {
            let v = cursor.read_bits(*bits as u32)?;
            match table.fixed_escape_code() {
                Some(code) if v == code => Ok(code.saturating_add(exp_golomb_decode(cursor)?)),
                _ => Ok(v),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{build_codebook, BinningMode, ChannelMode, CodecConfig, CoderKind, PRESETS};
    use crate::datagen::{generate_events, GenParams};

    fn corpus(n: usize, seed: u64) -> Vec<RelativeEvent> {
        let params = GenParams {
            channel_count: 7,
            ..GenParams::with_seed(seed)
        };
        generate_events(&params, n).unwrap()
    }

    fn record(widths: &[u64], distances: &[u64], start: u64) -> ChannelRecord {
        ChannelRecord {
            pulses: widths.len() as u32,
            start,
            widths: widths.to_vec(),
            distances: distances.to_vec(),
        }
    }

    fn configs() -> Vec<CodecConfig> {
        let mut out: Vec<CodecConfig> = PRESETS.iter().map(|p| CodecConfig::preset(p).unwrap()).collect();
        let classed = CodecConfig {
            channel_mode: ChannelMode::Classed(3),
            ..CodecConfig::default()
        };
        out.push(classed);
        let mut simple = CodecConfig::preset("huffman-simple").unwrap();
        simple.width.binning = BinningMode::Simple { low_bits: 12 };
        simple.pulses.coder = CoderKind::Tans;
        simple.channel_mode = ChannelMode::PerChannel;
        out.push(simple);
        let mut mixed = CodecConfig {
            start: crate::codec::StreamConfig::new(CoderKind::ExpGolomb, BinningMode::Direct),
            ..CodecConfig::default()
        };
        mixed.distance.coder = CoderKind::Huffman;
        mixed.pulses.coder = CoderKind::Huffman;
        mixed.width.table_log = Some(11);
        out.push(mixed);
        out
    }

    #[test]
    fn round_trip_across_configs() {
        let train = corpus(400, 3);
        for config in configs() {
            let cb = build_codebook(&train, &config).unwrap();
            let (bytes, _) = compress_frame(&train[..150], &cb).unwrap();
            assert_eq!(decompress_frame(&bytes, &cb).unwrap(), train[..150], "{config:?}");
        }
    }

    #[test]
    fn unseen_events_round_trip_with_escape() {
        let train = corpus(300, 8);
        let test = corpus(300, 9);
        for name in ["huffman-simple", "tans-adaptive", "tans-adaptive-per-channel"] {
            let cb = build_codebook(&train, &CodecConfig::preset(name).unwrap()).unwrap();
            let (bytes, _) = compress_frame(&test, &cb).unwrap();
            assert_eq!(decompress_frame(&bytes, &cb).unwrap(), test, "{name}");
        }
    }

    #[test]
    fn empty_frame_is_header_only() {
        let cb = build_codebook(&corpus(50, 1), &CodecConfig::default()).unwrap();
        let (bytes, stats) = compress_frame(&[], &cb).unwrap();
        assert_eq!(stats.stream_bits, [0; STREAM_COUNT]);
        assert_eq!(stats.overhead_bytes, bytes.len());
        assert!(decompress_frame(&bytes, &cb).unwrap().is_empty());
    }

    #[test]
    fn single_pulse_event() {
        let mut e = RelativeEvent::empty(7);
        e.ref_time = 123_456;
        e.channels[4] = record(&[90_000], &[], 0);
        for config in configs() {
            let cb = build_codebook(&corpus(100, 2), &config).unwrap();
            let (bytes, _) = compress_frame(std::slice::from_ref(&e), &cb).unwrap();
            assert_eq!(decompress_frame(&bytes, &cb).unwrap(), vec![e.clone()]);
        }
    }

    #[test]
    fn escapes_for_large_pulse_counts_and_values() {
        let mut e = RelativeEvent::empty(7);
        let widths: Vec<u64> = (1..=40).map(|w| w * 1000).collect();
        e.channels[0] = record(&widths, &vec![7; 39], 0);
        e.channels[1] = record(&[1 << 50], &[], 1 << 56);
        e.channels[2] = record(&[crate::event_model::MAX_DELTA], &[], 0);
        let mut fixed = CodecConfig::preset("fixed").unwrap();
        fixed.escape = true;
        let mut configs: Vec<CodecConfig> = ["huffman-simple", "tans-adaptive", "tans-adaptive-per-channel"]
            .iter()
            .map(|n| CodecConfig::preset(n).unwrap())
            .collect();
        configs.push(fixed);
        for config in configs {
            let name = format!("{config:?}");
            let cb = build_codebook(&corpus(200, 4), &config).unwrap();
            let (bytes, stats) = compress_frame(std::slice::from_ref(&e), &cb).unwrap();
            assert!(stats.raw_bits_by_type[ValueType::Width.index()] >= ESCAPE_RAW_BITS as u64);
            assert_eq!(decompress_frame(&bytes, &cb).unwrap(), vec![e.clone()], "{name}");
        }
        let config = CodecConfig {
            escape: false,
            ..CodecConfig::default()
        };
        let cb = build_codebook(&corpus(200, 4), &config).unwrap();
        assert!(compress_frame(&[e], &cb).is_err());
    }

    #[test]
    fn store_ref_off_drops_reference() {
        let events = corpus(40, 6);
        let config = CodecConfig {
            store_ref: false,
            ..CodecConfig::default()
        };
        let cb = build_codebook(&events, &config).unwrap();
        let (bytes, stats) = compress_frame(&events, &cb).unwrap();
        assert_eq!(stats.stream_bits[REF], 0);
        let back = decompress_frame(&bytes, &cb).unwrap();
        for (a, b) in back.iter().zip(&events) {
            assert_eq!(a.ref_time, 0);
            assert_eq!(a.channels, b.channels);
        }
    }

    #[test]
    fn bookkeeping_matches_payload() {
        let events = corpus(1000, 11);
        let cb = build_codebook(&events, &CodecConfig::default()).unwrap();
        let (bytes, stats) = compress_frame(&events, &cb).unwrap();
        let states: usize = ValueType::ALL
            .iter()
            .filter_map(|&k| cb.tans_table_log(k))
            .map(state_bytes)
            .sum();
        let header = 4 + 8 * STREAM_COUNT + states + 4;
        let padded: usize = stats.stream_bits.iter().map(|&b| b.div_ceil(8) as usize).sum();
        assert_eq!(bytes.len(), header + padded);
        // padding is the only slack: under one byte per stream
        let payload_bits: u64 = stats.stream_bits.iter().sum();
        assert!((padded * 8) as u64 - payload_bits < 8 * STREAM_COUNT as u64);
        let by_type: u64 = ValueType::ALL.iter().map(|&k| stats.type_bits(k)).sum();
        assert_eq!(by_type + stats.stream_bits[REF], payload_bits);
    }

    #[test]
    fn every_bit_flip_detected() {
        let events = corpus(20, 12);
        let cb = build_codebook(&events, &CodecConfig::default()).unwrap();
        let (bytes, _) = compress_frame(&events, &cb).unwrap();
        for bit in 0..bytes.len() * 8 {
            let mut b = bytes.clone();
            b[bit / 8] ^= 1 << (bit % 8);
            assert!(decompress_frame(&b, &cb).is_err(), "bit {bit}");
        }
        assert!(decompress_frame(&bytes[..bytes.len() - 3], &cb).is_err());
    }

    #[test]
    fn decoder_rejects_garbage_with_valid_crc() {
        let events = corpus(20, 13);
        let cb = build_codebook(&events, &CodecConfig::default()).unwrap();
        let (mut bytes, _) = compress_frame(&events, &cb).unwrap();
        let body = bytes.len() - 4;
        // damage the width payload, then re-seal the frame
        bytes[body - 10] ^= 0xff;
        let crc = crc32fast::hash(&bytes[..body]);
        bytes[body..].copy_from_slice(&crc.to_le_bytes());
        match decompress_frame(&bytes, &cb) {
            Err(Error::Corrupt(_)) => {}
            Ok(back) => assert_ne!(back, events),
            Err(other) => panic!("unexpected error kind {other}"),
        }
    }

    #[test]
    fn zigzag_inverse() {
        for v in [0i64, 1, -1, 5, -77, i64::MAX, i64::MIN] {
            assert_eq!(unzigzag(zigzag(v)), v);
        }
    }

    #[test]
    fn wrong_channel_count_rejected() {
        let cb = build_codebook(&corpus(20, 1), &CodecConfig::default()).unwrap();
        let mut e = RelativeEvent::empty(3);
        e.channels[0] = record(&[5], &[], 0);
        assert!(matches!(compress_frame(&[e], &cb), Err(Error::SizeMismatch { .. })));
    }
}
