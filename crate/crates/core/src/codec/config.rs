use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::entropy::MAX_TABLE_LOG;
use crate::event_model::ValueType;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoderKind {
    Tans,
    Huffman,
    ExpGolomb,
    /// `floor(log2(max)) + 1` bits per value, max taken from the training corpus.
    Fixed,
}

impl CoderKind {
    /// Coders that entropy-code a bin symbol and need a binning table.
    pub fn is_binned(self) -> bool {
        matches!(self, Self::Tans | Self::Huffman)
    }

    pub(crate) fn from_tag(tag: u8) -> Result<Self> {
        [Self::Tans, Self::Huffman, Self::ExpGolomb, Self::Fixed]
            .get(tag as usize)
            .copied()
            .ok_or_else(|| Error::Corrupt(format!("unknown coder tag {tag}")))
    }

    pub(crate) fn to_tag(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for CoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Tans => "tans",
            Self::Huffman => "huffman",
            Self::ExpGolomb => "exp-golomb",
            Self::Fixed => "fixed",
        })
    }
}

impl FromStr for CoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tans" => Ok(Self::Tans),
            "huffman" => Ok(Self::Huffman),
            "exp-golomb" | "expgolomb" => Ok(Self::ExpGolomb),
            "fixed" => Ok(Self::Fixed),
            _ => Err(Error::InvalidConfig(format!("unknown coder '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum BinningMode {
    /// No binning: the coder sees the value itself.
    Direct,
    /// Equal bins of `low_bits` raw bits each.
    Simple { low_bits: u8 },
    /// Equal bins selected by the `top_bits` most significant bits of the
    /// training maximum's width.
    SimpleTop { top_bits: u8 },
    Adaptive { min_val: u64 },
}

impl fmt::Display for BinningMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Direct => f.write_str("direct"),
            Self::Simple { low_bits } => write!(f, "simple:{low_bits}"),
            Self::SimpleTop { top_bits } => write!(f, "top:{top_bits}"),
            Self::Adaptive { min_val } => write!(f, "adaptive:{min_val}"),
        }
    }
}

fn parse_arg<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::InvalidConfig(format!("bad {what} '{s}'")))
}

impl FromStr for BinningMode {
    type Err = Error;

    /// `direct`, `simple:<low bits>`, `top:<top bits>` or `adaptive:<minVal>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "direct" if arg.is_empty() => Ok(Self::Direct),
            "simple" => Ok(Self::Simple { low_bits: parse_arg(arg, "low bits")? }),
            "top" => Ok(Self::SimpleTop { top_bits: parse_arg(arg, "top bits")? }),
            "adaptive" => Ok(Self::Adaptive { min_val: parse_arg(arg, "minVal")? }),
            _ => Err(Error::InvalidConfig(format!("unknown binning '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub coder: CoderKind,
    pub binning: BinningMode,
    /// tANS table log; `None` picks `ceil(log2(8 m))`, at least 11.
    pub table_log: Option<u8>,
}

impl StreamConfig {
    pub fn new(coder: CoderKind, binning: BinningMode) -> Self {
        Self {
            coder,
            binning,
            table_log: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelMode {
    Shared,
    PerChannel,
    /// Channels grouped into this many classes by mean width.
    Classed(u16),
}

impl fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Shared => f.write_str("shared"),
            Self::PerChannel => f.write_str("per-channel"),
            Self::Classed(k) => write!(f, "classed:{k}"),
        }
    }
}

impl FromStr for ChannelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "shared" => Ok(Self::Shared),
            None if s == "per-channel" => Ok(Self::PerChannel),
            Some(("classed", k)) => Ok(Self::Classed(parse_arg(k, "class count")?)),
            _ => Err(Error::InvalidConfig(format!("unknown channel mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub pulses: StreamConfig,
    pub start: StreamConfig,
    pub width: StreamConfig,
    pub distance: StreamConfig,
    pub channel_mode: ChannelMode,
    /// Events per frame.
    pub frame_size: u32,
    pub store_ref: bool,
    /// Reserve an escape symbol for values the tables cannot code.
    pub escape: bool,
}

pub const DEFAULT_FRAME_SIZE: u32 = 1000;
pub const DEFAULT_MIN_VAL: u64 = 100;

/// Names accepted by [`CodecConfig::preset`].
pub const PRESETS: [&str; 5] = [
    "fixed",
    "huffman-simple",
    "tans-adaptive",
    "tans-adaptive-per-channel",
    "expgolomb-direct",
];

impl Default for CodecConfig {
    fn default() -> Self {
        Self::preset("tans-adaptive").expect("built-in preset")
    }
}

impl CodecConfig {
    fn uniform(pulses: StreamConfig, values: StreamConfig) -> Self {
        Self {
            pulses,
            start: values,
            width: values,
            distance: values,
            channel_mode: ChannelMode::Shared,
            frame_size: DEFAULT_FRAME_SIZE,
            store_ref: true,
            escape: true,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        use BinningMode::*;
        use CoderKind::*;
        let config = match name {
            "fixed" => Self {
                escape: false,
                ..Self::uniform(StreamConfig::new(Fixed, Direct), StreamConfig::new(Fixed, Direct))
            },
            "huffman-simple" => Self::uniform(
                StreamConfig::new(Huffman, Direct),
                StreamConfig::new(Huffman, SimpleTop { top_bits: 4 }),
            ),
            "tans-adaptive" => Self::uniform(
                StreamConfig::new(Tans, Direct),
                StreamConfig::new(Tans, Adaptive { min_val: DEFAULT_MIN_VAL }),
            ),
            "tans-adaptive-per-channel" => Self {
                channel_mode: ChannelMode::PerChannel,
                ..Self::preset("tans-adaptive")?
            },
            "expgolomb-direct" => Self {
                escape: false,
                ..Self::uniform(
                    StreamConfig::new(ExpGolomb, Direct),
                    StreamConfig::new(ExpGolomb, Direct),
                )
            },
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown preset '{name}' (known: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(config)
    }

    pub fn stream(&self, kind: ValueType) -> &StreamConfig {
        match kind {
            ValueType::Pulses => &self.pulses,
            ValueType::Start => &self.start,
            ValueType::Width => &self.width,
            ValueType::Distance => &self.distance,
        }
    }

    pub fn stream_mut(&mut self, kind: ValueType) -> &mut StreamConfig {
        match kind {
            ValueType::Pulses => &mut self.pulses,
            ValueType::Start => &mut self.start,
            ValueType::Width => &mut self.width,
            ValueType::Distance => &mut self.distance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        for kind in ValueType::ALL {
            let s = self.stream(kind);
            let name = kind.name();
            if kind == ValueType::Pulses && s.binning != BinningMode::Direct {
                return bad("pulses are coded directly; binning must be 'direct'".into());
            }
            if kind != ValueType::Pulses && s.coder.is_binned() == (s.binning == BinningMode::Direct) {
                return bad(format!(
                    "{name}: {} needs {} binning",
                    s.coder,
                    if s.coder.is_binned() { "non-direct" } else { "direct" }
                ));
            }
            if let Some(r) = s.table_log {
                if r > MAX_TABLE_LOG {
                    return bad(format!("{name}: table log {r} above {MAX_TABLE_LOG}"));
                }
                if s.coder != CoderKind::Tans {
                    return bad(format!("{name}: table log only applies to tans"));
                }
            }
            match s.binning {
                BinningMode::Adaptive { min_val: 0 } => {
                    return bad(format!("{name}: minVal must be at least 1"))
                }
                BinningMode::Simple { low_bits } if low_bits > 57 => {
                    return bad(format!("{name}: low bits above 57"))
                }
                BinningMode::SimpleTop { top_bits } if top_bits > 16 => {
                    return bad(format!("{name}: top bits above 16"))
                }
                _ => {}
            }
        }
        if self.frame_size == 0 {
            return bad("frame size must be at least 1".into());
        }
        if self.channel_mode == ChannelMode::Classed(0) {
            return bad("class count must be at least 1".into());
        }
        Ok(())
    }
}
