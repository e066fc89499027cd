//! Legacy word format, pulse pairing and the relative event representation.
//!
//! Absolute hit time in 10 ps ticks is `fine + 500 * (coarse + 2048 * epoch)`.
//! A relative event stores, per channel, the pulse count, the first rising
//! time minus the event reference, then alternating widths and distances.
//!
//! Word layout (little-endian `u32`, tag in bits 31..30):
//!
//! | tag | word   | payload                                                     |
//! |-----|--------|-------------------------------------------------------------|
//! | 00  | main   | `[28]` edge, `[27:21]` channel, `[20:10]` coarse, `[9:0]` fine |
//! | 01  | epoch  | `[27:0]` epoch                                              |
//! | 10  | header | `[29:0]` event sequence number                              |
//!
//! Unused bits must be zero.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const FINE_PER_COARSE: u64 = 500;
pub const COARSE_PER_EPOCH: u64 = 2048;
/// Ticks per epoch (10.24 us).
pub const EPOCH_TICKS: u64 = FINE_PER_COARSE * COARSE_PER_EPOCH;
pub const EPOCH_BITS: u32 = 28;
pub const MAX_CHANNELS: usize = 128;
/// First time that no longer fits the 28-bit epoch counter.
pub const TIME_LIMIT: u64 = EPOCH_TICKS << EPOCH_BITS;
/// Largest delta the codec stores.
pub const MAX_DELTA: u64 = (1 << 57) - 1;
pub const DEFAULT_MAX_WIDTH: u64 = 1 << 20;

const TAG_MAIN: u32 = 0b00;
const TAG_EPOCH: u32 = 0b01;
const TAG_HEADER: u32 = 0b10;
const SEQ_MASK: u32 = (1 << 30) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Edge {
    Rising,
    Falling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hit {
    pub channel: u8,
    pub edge: Edge,
    pub time: u64,
}

impl Hit {
    pub fn new(channel: u8, edge: Edge, time: u64) -> Self {
        Self { channel, edge, time }
    }

    fn sort_key(&self) -> (u64, u8, Edge) {
        (self.time, self.channel, self.edge)
    }
}

/// `(epoch, coarse, fine)` for an absolute time.
pub fn split_time(time: u64) -> Result<(u32, u32, u32)> {
    if time >= TIME_LIMIT {
        return Err(Error::EpochOverflow(time));
    }
    let epoch = time / EPOCH_TICKS;
    let within = time % EPOCH_TICKS;
    Ok((
        epoch as u32,
        (within / FINE_PER_COARSE) as u32,
        (within % FINE_PER_COARSE) as u32,
    ))
}

pub fn join_time(epoch: u32, coarse: u32, fine: u32) -> u64 {
    fine as u64 + FINE_PER_COARSE * (coarse as u64 + COARSE_PER_EPOCH * epoch as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LegacyRecord {
    EventHeader { seq: u32 },
    Hit(Hit),
}

/// Decodes a word stream, tracking the current epoch across events.
pub fn parse_legacy(bytes: &[u8]) -> Result<Vec<LegacyRecord>> {
    if !bytes.len().is_multiple_of(4) {
        return Err(Error::MalformedWord {
            offset: bytes.len() / 4,
            reason: format!("{} trailing bytes", bytes.len() % 4),
        });
    }
    let mut parser = LegacyParser::default();
    let mut out = Vec::with_capacity(bytes.len() / 4);
    for (offset, chunk) in bytes.chunks_exact(4).enumerate() {
        let word = u32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        if let Some(record) = parser.push(word, offset)? {
            out.push(record);
        }
    }
    Ok(out)
}

/// Incremental word decoder; the epoch starts at 0.
#[derive(Debug, Clone, Default)]
pub struct LegacyParser {
    epoch: u32,
}

impl LegacyParser {
    pub fn push(&mut self, word: u32, offset: usize) -> Result<Option<LegacyRecord>> {
        let malformed = |reason: String| Error::MalformedWord { offset, reason };
        match word >> 30 {
            TAG_MAIN => {
                if word & (1 << 29) != 0 {
                    return Err(malformed("reserved bit 29 set in main word".into()));
                }
                let fine = word & 0x3ff;
                let coarse = (word >> 10) & 0x7ff;
                let channel = ((word >> 21) & 0x7f) as u8;
                let edge = if word & (1 << 28) != 0 {
                    Edge::Falling
                } else {
                    Edge::Rising
                };
                if fine as u64 >= FINE_PER_COARSE {
                    return Err(malformed(format!("fine time {fine} >= {FINE_PER_COARSE}")));
                }
                Ok(Some(LegacyRecord::Hit(Hit {
                    channel,
                    edge,
                    time: join_time(self.epoch, coarse, fine),
                })))
            }
            TAG_EPOCH => {
                if word & (0b11 << 28) != 0 {
                    return Err(malformed("reserved bits 29..28 set in epoch word".into()));
                }
                self.epoch = word & ((1 << EPOCH_BITS) - 1);
                Ok(None)
            }
            TAG_HEADER => Ok(Some(LegacyRecord::EventHeader { seq: word & SEQ_MASK })),
            tag => Err(malformed(format!("unknown word type tag {tag:#04b}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegacyEvent {
    pub seq: u32,
    pub hits: Vec<Hit>,
}

/// Splits records at header words. Hits before the first header are an error.
pub fn group_events(records: &[LegacyRecord]) -> Result<Vec<LegacyEvent>> {
    let mut events: Vec<LegacyEvent> = Vec::new();
    for (i, record) in records.iter().enumerate() {
        match *record {
            LegacyRecord::EventHeader { seq } => events.push(LegacyEvent { seq, hits: Vec::new() }),
            LegacyRecord::Hit(hit) => events
                .last_mut()
                .ok_or_else(|| Error::InvalidEvent(format!("record {i}: hit before the first event header")))?
                .hits
                .push(hit),
        }
    }
    Ok(events)
}

/// Word encoder that emits an epoch word before the first hit and whenever
/// the epoch changes afterwards.
#[derive(Debug, Clone, Default)]
pub struct LegacyWriter {
    epoch: Option<u32>,
}

impl LegacyWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_event<W: Write>(&mut self, event: &LegacyEvent, out: &mut W) -> Result<()> {
        if event.seq > SEQ_MASK {
            return Err(Error::InvalidEvent(format!("sequence number {} exceeds 30 bits", event.seq)));
        }
        let mut words = Vec::with_capacity(event.hits.len() + 2);
        words.push((TAG_HEADER << 30) | event.seq);
        for hit in &event.hits {
            if hit.channel as usize >= MAX_CHANNELS {
                return Err(Error::InvalidEvent(format!("channel {} above 127", hit.channel)));
            }
            let (epoch, coarse, fine) = split_time(hit.time)?;
            if self.epoch != Some(epoch) {
                words.push((TAG_EPOCH << 30) | epoch);
                self.epoch = Some(epoch);
            }
            let edge = matches!(hit.edge, Edge::Falling) as u32;
            words.push((edge << 28) | ((hit.channel as u32) << 21) | (coarse << 10) | fine);
        }
        for w in words {
            out.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }
}

pub fn write_legacy(events: &[LegacyEvent]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut writer = LegacyWriter::new();
    for event in events {
        writer.write_event(event, &mut out)?;
    }
    Ok(out)
}

/// A rising edge paired with its falling edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pulse {
    pub rise: u64,
    pub fall: u64,
}

impl Pulse {
    pub fn width(&self) -> u64 {
        self.fall - self.rise
    }
}

/// Pulses of one event keyed by channel, each list in time order.
pub type EventPulses = BTreeMap<u8, Vec<Pulse>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    /// Superseded by a later rising edge before any falling edge.
    DoubleRising,
    /// Falling edge with no pending rising edge.
    OrphanFalling,
    /// Rising edge still open at the end of the event.
    OpenRising,
    TooWide,
    ZeroWidth,
    /// Rise not strictly after the previous accepted fall.
    NoGap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub hit: Hit,
    pub reason: RejectReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterConfig {
    pub max_width: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            max_width: DEFAULT_MAX_WIDTH,
        }
    }
}

/// Greedy rising/falling pairing per channel. Every hit ends up either in a
/// pulse or in the reject list.
pub fn pair_and_filter(hits: &[Hit], config: &FilterConfig) -> (EventPulses, Vec<Reject>) {
    let mut by_channel: BTreeMap<u8, Vec<Hit>> = BTreeMap::new();
    for &hit in hits {
        by_channel.entry(hit.channel).or_default().push(hit);
    }
    let mut pulses = EventPulses::new();
    let mut rejects = Vec::new();
    let mut reject = |hit: Hit, reason| rejects.push(Reject { hit, reason });
    for (channel, mut list) in by_channel {
        list.sort_by_key(|h| h.time);
        let mut accepted: Vec<Pulse> = Vec::new();
        let mut pending: Option<Hit> = None;
        for hit in list {
            match hit.edge {
                Edge::Rising => {
                    if let Some(prev) = pending.replace(hit) {
                        reject(prev, RejectReason::DoubleRising);
                    }
                }
                Edge::Falling => {
                    let Some(rise) = pending.take() else {
                        reject(hit, RejectReason::OrphanFalling);
                        continue;
                    };
                    let width = hit.time - rise.time;
                    let reason = if width == 0 {
                        Some(RejectReason::ZeroWidth)
                    } else if width > config.max_width {
                        Some(RejectReason::TooWide)
                    } else if accepted.last().is_some_and(|p| rise.time <= p.fall) {
                        Some(RejectReason::NoGap)
                    } else {
                        None
                    };
                    match reason {
                        Some(reason) => {
                            reject(rise, reason);
                            reject(hit, reason);
                        }
                        None => accepted.push(Pulse {
                            rise: rise.time,
                            fall: hit.time,
                        }),
                    }
                }
            }
        }
        if let Some(open) = pending {
            reject(open, RejectReason::OpenRising);
        }
        if !accepted.is_empty() {
            pulses.insert(channel, accepted);
        }
    }
    (pulses, rejects)
}

/// Hits of the pulses ordered by (time, channel, edge).
pub fn pulses_to_hits(pulses: &EventPulses) -> Vec<Hit> {
    let mut hits: Vec<Hit> = pulses
        .iter()
        .flat_map(|(&channel, list)| {
            list.iter().flat_map(move |p| {
                [
                    Hit::new(channel, Edge::Rising, p.rise),
                    Hit::new(channel, Edge::Falling, p.fall),
                ]
            })
        })
        .collect();
    hits.sort_by_key(Hit::sort_key);
    hits
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValueType {
    Pulses,
    Start,
    Width,
    Distance,
}

impl ValueType {
    pub const ALL: [ValueType; 4] = [Self::Pulses, Self::Start, Self::Width, Self::Distance];

    pub fn name(self) -> &'static str {
        match self {
            Self::Pulses => "pulses",
            Self::Start => "start",
            Self::Width => "width",
            Self::Distance => "distance",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelRecord {
    pub pulses: u32,
    /// First rise minus the event reference; 0 when `pulses == 0`.
    pub start: u64,
    pub widths: Vec<u64>,
    pub distances: Vec<u64>,
}

impl ChannelRecord {
    fn validate(&self, channel: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidEvent(format!("channel {channel}: {msg}")));
        let p = self.pulses as usize;
        if self.widths.len() != p || self.distances.len() != p.saturating_sub(1) {
            return bad(format!(
                "{} pulses with {} widths and {} distances",
                p,
                self.widths.len(),
                self.distances.len()
            ));
        }
        if p == 0 && self.start != 0 {
            return bad("start without pulses".into());
        }
        if self.widths.iter().chain(&self.distances).any(|&d| d == 0) {
            return bad("zero width or distance".into());
        }
        if std::iter::once(&self.start)
            .chain(&self.widths)
            .chain(&self.distances)
            .any(|&d| d > MAX_DELTA)
        {
            return bad("delta wider than 57 bits".into());
        }
        Ok(())
    }

    pub fn values(&self, kind: ValueType) -> Vec<u64> {
        match kind {
            ValueType::Pulses => vec![self.pulses as u64],
            ValueType::Start if self.pulses > 0 => vec![self.start],
            ValueType::Start => Vec::new(),
            ValueType::Width => self.widths.clone(),
            ValueType::Distance => self.distances.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelativeEvent {
    pub ref_time: u64,
    /// One record per channel, indexed by channel number.
    pub channels: Vec<ChannelRecord>,
}

impl RelativeEvent {
    /// Event with every channel silent (not itself valid).
    pub fn empty(channel_count: usize) -> Self {
        Self {
            ref_time: 0,
            channels: vec![ChannelRecord::default(); channel_count],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() > MAX_CHANNELS {
            return Err(Error::InvalidEvent(format!("{} channels", self.channels.len())));
        }
        for (i, ch) in self.channels.iter().enumerate() {
            ch.validate(i)?;
        }
        if !self.channels.iter().any(|c| c.pulses > 0) {
            return Err(Error::EmptyEvent);
        }
        if !self.channels.iter().any(|c| c.pulses > 0 && c.start == 0) {
            return Err(Error::InvalidEvent("no channel has start 0".into()));
        }
        Ok(())
    }

    pub fn pulse_count(&self) -> usize {
        self.channels.iter().map(|c| c.pulses as usize).sum()
    }

    pub fn values(&self, kind: ValueType) -> impl Iterator<Item = u64> + '_ {
        self.channels.iter().flat_map(move |c| c.values(kind))
    }
}

/// Re-references pulses to the earliest rising edge.
pub fn to_relative(pulses: &EventPulses, channel_count: usize) -> Result<RelativeEvent> {
    let ref_time = pulses
        .values()
        .filter_map(|list| list.first())
        .map(|p| p.rise)
        .min()
        .ok_or(Error::EmptyEvent)?;
    let mut event = RelativeEvent::empty(channel_count);
    event.ref_time = ref_time;
    for (&channel, list) in pulses {
        let record = event
            .channels
            .get_mut(channel as usize)
            .ok_or_else(|| Error::InvalidEvent(format!("channel {channel} >= {channel_count}")))?;
        if list.is_empty() {
            continue;
        }
        record.pulses = list.len() as u32;
        record.start = list[0].rise - ref_time;
        for (i, p) in list.iter().enumerate() {
            if p.fall < p.rise || (i > 0 && p.rise < list[i - 1].fall) {
                return Err(Error::InvalidEvent(format!("channel {channel}: pulses out of order")));
            }
            record.widths.push(p.width());
            if i > 0 {
                record.distances.push(p.rise - list[i - 1].fall);
            }
        }
    }
    event.validate()?;
    Ok(event)
}

pub fn from_relative(event: &RelativeEvent) -> Result<EventPulses> {
    event.validate()?;
    let mut pulses = EventPulses::new();
    for (channel, record) in event.channels.iter().enumerate() {
        if record.pulses == 0 {
            continue;
        }
        let overflow = || Error::EpochOverflow(u64::MAX);
        let mut rise = event.ref_time.checked_add(record.start).ok_or_else(overflow)?;
        let mut list = Vec::with_capacity(record.pulses as usize);
        for (i, &w) in record.widths.iter().enumerate() {
            if i > 0 {
                rise = list.last().map(|p: &Pulse| p.fall).expect("previous pulse")
                    + record.distances[i - 1];
            }
            let fall = rise.checked_add(w).ok_or_else(overflow)?;
            list.push(Pulse { rise, fall });
        }
        pulses.insert(channel as u8, list);
    }
    Ok(pulses)
}

/// Legacy event for a relative event, hits in canonical order.
pub fn to_legacy_event(event: &RelativeEvent, seq: u32) -> Result<LegacyEvent> {
    Ok(LegacyEvent {
        seq,
        hits: pulses_to_hits(&from_relative(event)?),
    })
}

/// A reject together with the sequence number of its event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventReject {
    pub seq: u32,
    #[serde(flatten)]
    pub reject: Reject,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    pub events: Vec<RelativeEvent>,
    pub rejects: Vec<EventReject>,
    /// Sequence numbers of events left without pulses after filtering.
    pub empty_events: Vec<u32>,
}

/// Parses a legacy stream, pairs and filters every event and re-references
/// it. Events with no surviving pulse are listed, not returned.
pub fn ingest_legacy(bytes: &[u8], channel_count: usize, filter: &FilterConfig) -> Result<Ingested> {
    let mut out = Ingested::default();
    for event in group_events(&parse_legacy(bytes)?)? {
        let (pulses, rejects) = pair_and_filter(&event.hits, filter);
        out.rejects
            .extend(rejects.into_iter().map(|reject| EventReject { seq: event.seq, reject }));
        if pulses.is_empty() {
            out.empty_events.push(event.seq);
            continue;
        }
        out.events.push(to_relative(&pulses, channel_count)?);
    }
    Ok(out)
}

/// Legacy bytes of relative events, numbered from 0. This is the normalized
/// form a compress/decompress round trip reproduces.
pub fn relative_to_legacy(events: &[RelativeEvent]) -> Result<Vec<u8>> {
    let legacy = events
        .par_iter()
        .enumerate()
        .map(|(i, e)| to_legacy_event(e, i as u32))
        .collect::<Result<Vec<_>>>()?;
    write_legacy(&legacy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedCost {
    pub kind: ValueType,
    pub max: u64,
    /// `floor(log2(max)) + 1`, 0 when `max == 0`.
    pub bits: u32,
    pub values_per_event: f64,
    pub bits_per_event: f64,
}

pub fn bit_length(v: u64) -> u32 {
    64 - v.leading_zeros()
}

/// Fixed-length cost per value type, in `ValueType::ALL` order.
pub fn fixed_cost(events: &[RelativeEvent]) -> Vec<FixedCost> {
    let n = events.len().max(1) as f64;
    ValueType::ALL
        .iter()
        .map(|&kind| {
            let (count, max) = events
                .iter()
                .flat_map(|e| e.values(kind))
                .fold((0u64, 0u64), |(c, m), v| (c + 1, m.max(v)));
            let bits = bit_length(max);
            let values_per_event = count as f64 / n;
            FixedCost {
                kind,
                max,
                bits,
                values_per_event,
                bits_per_event: bits as f64 * values_per_event,
            }
        })
        .collect()
}

/// One JSON object per line.
pub fn write_jsonl<W: Write>(events: &[RelativeEvent], mut out: W) -> Result<()> {
    for event in events {
        serde_json::to_writer(&mut out, event)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<RelativeEvent>> {
    let mut events = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line)?);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn main_word(fine: u32, coarse: u32, channel: u32, falling: bool) -> u32 {
        ((falling as u32) << 28) | (channel << 21) | (coarse << 10) | fine
    }

    fn words(ws: &[u32]) -> Vec<u8> {
        ws.iter().flat_map(|w| w.to_le_bytes()).collect()
    }

    fn hit_times(bytes: &[u8]) -> Vec<u64> {
        parse_legacy(bytes)
            .unwrap()
            .into_iter()
            .filter_map(|r| match r {
                LegacyRecord::Hit(h) => Some(h.time),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn parse_time_formula() {
        let epoch = |e: u32| (1 << 30) | e;
        assert_eq!(hit_times(&words(&[epoch(0), main_word(0, 0, 0, false)])), vec![0]);
        assert_eq!(
            hit_times(&words(&[epoch(0), main_word(499, 2047, 5, true)])),
            vec![1_023_999]
        );
        assert_eq!(
            hit_times(&words(&[epoch(1), main_word(0, 0, 0, false)])),
            vec![1_024_000]
        );
        // epoch persists until changed
        assert_eq!(
            hit_times(&words(&[epoch(3), main_word(1, 0, 0, false), main_word(2, 0, 0, true)])),
            vec![3 * EPOCH_TICKS + 1, 3 * EPOCH_TICKS + 2]
        );
    }

    #[test]
    fn parse_errors_carry_offset() {
        let bad_fine = words(&[1 << 30, main_word(500, 0, 0, false)]);
        assert!(matches!(parse_legacy(&bad_fine), Err(Error::MalformedWord { offset: 1, .. })));
        let bad_tag = words(&[0, 0, 0b11 << 30]);
        assert!(matches!(parse_legacy(&bad_tag), Err(Error::MalformedWord { offset: 2, .. })));
        assert!(parse_legacy(&[0, 0, 0]).is_err());
        let reserved = words(&[1 << 29]);
        assert!(parse_legacy(&reserved).is_err());
    }

    #[test]
    fn writer_emits_epoch_only_on_change() {
        let events = vec![
            LegacyEvent {
                seq: 0,
                hits: vec![Hit::new(1, Edge::Rising, 10), Hit::new(1, Edge::Falling, 20)],
            },
            LegacyEvent {
                seq: 1,
                hits: vec![Hit::new(2, Edge::Rising, EPOCH_TICKS + 5)],
            },
        ];
        let bytes = write_legacy(&events).unwrap();
        // header, epoch, hit, hit, header, epoch, hit
        assert_eq!(bytes.len(), 7 * 4);
        let grouped = group_events(&parse_legacy(&bytes).unwrap()).unwrap();
        assert_eq!(grouped, events);
        assert!(matches!(
            write_legacy(&[LegacyEvent {
                seq: 0,
                hits: vec![Hit::new(0, Edge::Rising, TIME_LIMIT)]
            }]),
            Err(Error::EpochOverflow(_))
        ));
    }

    #[test]
    fn hits_before_header_rejected() {
        let recs = parse_legacy(&words(&[1 << 30, main_word(1, 1, 1, false)])).unwrap();
        assert!(group_events(&recs).is_err());
    }

    fn rise(ch: u8, t: u64) -> Hit {
        Hit::new(ch, Edge::Rising, t)
    }

    fn fall(ch: u8, t: u64) -> Hit {
        Hit::new(ch, Edge::Falling, t)
    }

    #[test]
    fn pairing_rules() {
        let cfg = FilterConfig::default();
        let (p, r) = pair_and_filter(&[rise(3, 10), fall(3, 25)], &cfg);
        assert_eq!(p[&3], vec![Pulse { rise: 10, fall: 25 }]);
        assert!(r.is_empty());

        let (p, r) = pair_and_filter(&[rise(3, 10), rise(3, 20), fall(3, 25)], &cfg);
        assert_eq!(p[&3], vec![Pulse { rise: 20, fall: 25 }]);
        assert_eq!(r, vec![Reject { hit: rise(3, 10), reason: RejectReason::DoubleRising }]);

        let (p, r) = pair_and_filter(&[fall(3, 5)], &cfg);
        assert!(p.is_empty());
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].reason, RejectReason::OrphanFalling);

        let narrow = FilterConfig { max_width: 10 };
        let (p, r) = pair_and_filter(&[rise(0, 0), fall(0, 11), rise(0, 20), fall(0, 30)], &narrow);
        assert_eq!(p[&0], vec![Pulse { rise: 20, fall: 30 }]);
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|x| x.reason == RejectReason::TooWide));

        let (_, r) = pair_and_filter(&[rise(0, 0), fall(0, 0), rise(0, 7)], &cfg);
        assert_eq!(r.len(), 3);
    }

    fn pulse(rise: u64, fall: u64) -> Pulse {
        Pulse { rise, fall }
    }

    #[test]
    fn relative_single_pulse() {
        let pulses = EventPulses::from([(0, vec![pulse(100, 140)])]);
        let e = to_relative(&pulses, 1).unwrap();
        assert_eq!(e.ref_time, 100);
        assert_eq!(
            e.channels[0],
            ChannelRecord { pulses: 1, start: 0, widths: vec![40], distances: vec![] }
        );
    }

    #[test]
    fn relative_two_channels() {
        let pulses = EventPulses::from([
            (0, vec![pulse(100, 140), pulse(200, 260)]),
            (1, vec![pulse(150, 170)]),
        ]);
        let e = to_relative(&pulses, 2).unwrap();
        assert_eq!(e.ref_time, 100);
        assert_eq!(
            e.channels[0],
            ChannelRecord { pulses: 2, start: 0, widths: vec![40, 60], distances: vec![60] }
        );
        assert_eq!(
            e.channels[1],
            ChannelRecord { pulses: 1, start: 50, widths: vec![20], distances: vec![] }
        );
        assert_eq!(from_relative(&e).unwrap(), pulses);
    }

    #[test]
    fn relative_errors() {
        assert!(matches!(to_relative(&EventPulses::new(), 4), Err(Error::EmptyEvent)));
        let mut e = RelativeEvent::empty(2);
        e.channels[1] = ChannelRecord { pulses: 1, start: 5, widths: vec![3], distances: vec![] };
        assert!(from_relative(&e).is_err());
        e.channels[1].start = 0;
        e.channels[1].widths[0] = 0;
        assert!(from_relative(&e).is_err());
        assert!(to_relative(&EventPulses::from([(9, vec![pulse(1, 2)])]), 4).is_err());
    }

    #[test]
    fn fixed_cost_widths() {
        let mut e = RelativeEvent::empty(3);
        e.channels[0] = ChannelRecord {
            pulses: 8,
            start: 0,
            widths: vec![1 << 26, 1, 1, 1, 1, 1, 1, 1],
            distances: vec![(1 << 28) - 1, 1, 1, 1, 1, 1, 1],
        };
        e.channels[1] = ChannelRecord { pulses: 1, start: 1 << 27, widths: vec![2], distances: vec![] };
        let cost = fixed_cost(&[e]);
        let bits: Vec<u32> = cost.iter().map(|c| c.bits).collect();
        assert_eq!(bits, vec![4, 28, 27, 28]);
        assert_eq!(cost[0].values_per_event, 3.0);
        assert_eq!(cost[1].values_per_event, 2.0);
        assert_eq!(cost[2].values_per_event, 9.0);
        assert_eq!(cost[3].values_per_event, 7.0);
        assert_eq!(cost[1].bits_per_event, 56.0);

        let mut one = RelativeEvent::empty(1);
        one.channels[0] = ChannelRecord { pulses: 1, start: 0, widths: vec![1], distances: vec![] };
        let bits: Vec<u32> = fixed_cost(&[one]).iter().map(|c| c.bits).collect();
        assert_eq!(bits, vec![1, 0, 1, 0]);
    }

    #[test]
    fn jsonl_round_trip() {
        let pulses = EventPulses::from([(1, vec![pulse(7, 9)])]);
        let events = vec![to_relative(&pulses, 2).unwrap(); 3];
        let mut buf = Vec::new();
        write_jsonl(&events, &mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 3);
        assert_eq!(read_jsonl(&buf[..]).unwrap(), events);
    }

    fn arb_pulses() -> impl Strategy<Value = EventPulses> {
        prop::collection::btree_map(
            0u8..16,
            prop::collection::vec((1u64..5000, 1u64..5000), 1..6),
            1..8,
        )
        .prop_flat_map(|chans| {
            (Just(chans), 0u64..TIME_LIMIT / 2)
        })
        .prop_map(|(chans, base)| {
            chans
                .into_iter()
                .enumerate()
                .map(|(i, (ch, gaps))| {
                    let mut t = base + i as u64 * 10_000;
                    let list = gaps
                        .into_iter()
                        .map(|(gap, width)| {
                            t += gap;
                            let p = pulse(t, t + width);
                            t += width;
                            p
                        })
                        .collect();
                    (ch, list)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn relative_round_trip(pulses in arb_pulses()) {
            let e = to_relative(&pulses, 16).unwrap();
            prop_assert_eq!(e.channels.iter().filter(|c| c.pulses > 0 && c.start == 0).count(), 1);
            prop_assert_eq!(from_relative(&e).unwrap(), pulses.clone());

            let hits = pulses_to_hits(&pulses);
            let (paired, rejects) = pair_and_filter(&hits, &FilterConfig { max_width: u64::MAX });
            prop_assert!(rejects.is_empty());
            prop_assert_eq!(paired, pulses);
        }

        #[test]
        fn legacy_round_trip(pulses in arb_pulses(), seq in 0u32..(1 << 30)) {
            let event = LegacyEvent { seq, hits: pulses_to_hits(&pulses) };
            let bytes = write_legacy(std::slice::from_ref(&event)).unwrap();
            let back = group_events(&parse_legacy(&bytes).unwrap()).unwrap();
            prop_assert_eq!(back, vec![event]);
        }

        #[test]
        fn time_split_is_monotone_bijection(a in 0u64..TIME_LIMIT, b in 0u64..TIME_LIMIT) {
            let sa = split_time(a).unwrap();
            let sb = split_time(b).unwrap();
            prop_assert_eq!(join_time(sa.0, sa.1, sa.2), a);
            prop_assert_eq!(a.cmp(&b), sa.cmp(&sb));
        }
    }

    #[test]
    fn ingest_reports_rejects_and_empty_events() {
        let events = vec![
            LegacyEvent {
                seq: 4,
                hits: vec![
                    Hit::new(1, Edge::Rising, 10),
                    Hit::new(1, Edge::Falling, 25),
                    Hit::new(2, Edge::Falling, 30),
                ],
            },
            LegacyEvent {
                seq: 5,
                hits: vec![Hit::new(0, Edge::Rising, 40)],
            },
            LegacyEvent {
                seq: 6,
                hits: vec![Hit::new(0, Edge::Rising, 50), Hit::new(0, Edge::Falling, 60)],
            },
        ];
        let got = ingest_legacy(&write_legacy(&events).unwrap(), 3, &FilterConfig::default()).unwrap();
        assert_eq!(got.events.len(), 2);
        assert_eq!(got.events[0].ref_time, 10);
        assert_eq!(got.events[0].channels[1].widths, vec![15]);
        assert_eq!(got.empty_events, vec![5]);
        let reasons: Vec<(u32, RejectReason)> = got.rejects.iter().map(|r| (r.seq, r.reject.reason)).collect();
        assert_eq!(reasons, vec![(4, RejectReason::OrphanFalling), (5, RejectReason::OpenRising)]);
        let json = serde_json::to_string(&got.rejects[0]).unwrap();
        assert!(json.contains("\"seq\":4") && json.contains("OrphanFalling"), "{json}");

        let normalized = relative_to_legacy(&got.events).unwrap();
        let again = ingest_legacy(&normalized, 3, &FilterConfig::default()).unwrap();
        assert_eq!(again.events, got.events);
        assert!(again.rejects.is_empty());
    }
}
