use std::io::Write;

use serde::Serialize;

use crate::event_model::{RelativeEvent, ValueType};
use crate::{Error, Result};

use super::codebook::{build_codebook, SymbolCoder};
use super::config::CodecConfig;
use super::container::compress_corpus;
use super::frame::FrameStats;

/// Known saving this codec leaves on the table.
pub const GAPS_NOTE: &str = "start=0 channel pointer not implemented: the reference channel's zero start is still coded";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub config: String,
    pub events: usize,
    /// Bits/event by value type in `ValueType::ALL` order, raw low bits included.
    pub per_type: [f64; 4],
    /// Sum of `per_type`: the cost of the four relative value types.
    pub total: f64,
    pub ref_bits: f64,
    /// Frame headers, final states, padding and CRCs.
    pub frame_overhead_bits: f64,
    /// Whole container including the codebook, per event.
    pub container_bits: f64,
    /// Per-type code width when the type is fixed-length coded.
    pub fixed_bits: [Option<u8>; 4],
    pub gaps: &'static str,
}

impl CostReport {
    pub fn type_bits(&self, kind: ValueType) -> f64 {
        self.per_type[kind.index()]
    }
}

/// Trains each config on `corpus`, compresses the corpus with it and reports
/// where the bits went.
pub fn report_cost(corpus: &[RelativeEvent], configs: &[(String, CodecConfig)]) -> Result<Vec<CostReport>> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("cost report on an empty corpus"));
    }
    configs
        .iter()
        .map(|(name, config)| {
            let cb = build_codebook(corpus, config)?;
            let (bytes, frames) = compress_corpus(corpus, &cb)?;
            let mut sum = FrameStats::default();
            for f in &frames {
                sum.accumulate(f);
            }
            let n = sum.events as f64;
            let per_type = ValueType::ALL.map(|k| sum.type_bits(k) as f64 / n);
            let fixed_bits = ValueType::ALL.map(|k| {
                cb.tables(k)
                    .iter()
                    .map(|t| match t.coder {
                        SymbolCoder::Fixed { bits } => Some(bits),
                        _ => None,
                    })
                    .max()
                    .flatten()
            });
            Ok(CostReport {
                config: name.clone(),
                events: sum.events,
                per_type,
                total: per_type.iter().sum(),
                ref_bits: sum.stream_bits[5] as f64 / n,
                frame_overhead_bits: sum.overhead_bytes as f64 * 8.0 / n,
                container_bits: bytes.len() as f64 * 8.0 / n,
                fixed_bits,
                gaps: GAPS_NOTE,
            })
        })
        .collect()
}

/// One `config,type,bits_per_event` row per value type and per extra column.
pub fn write_report_csv<W: Write>(reports: &[CostReport], mut w: W) -> Result<()> {
    writeln!(w, "config,type,bits_per_event")?;
    for r in reports {
        for kind in ValueType::ALL {
            writeln!(w, "{},{},{:.4}", r.config, kind.name(), r.type_bits(kind))?;
        }
        writeln!(w, "{},total,{:.4}", r.config, r.total)?;
        writeln!(w, "{},ref,{:.4}", r.config, r.ref_bits)?;
        writeln!(w, "{},frame_overhead,{:.4}", r.config, r.frame_overhead_bits)?;
        writeln!(w, "{},container,{:.4}", r.config, r.container_bits)?;
    }
    Ok(())
}

pub fn write_report_json<W: Write>(reports: &[CostReport], w: W) -> Result<()> {
    serde_json::to_writer_pretty(w, reports)?;
    Ok(())
}

/// Names and configs of the comparison ladder, cheapest last.
pub fn default_ladder() -> Vec<(String, CodecConfig)> {
    ["fixed", "huffman-simple", "tans-adaptive", "tans-adaptive-per-channel"]
        .iter()
        .map(|&n| (n.to_string(), CodecConfig::preset(n).expect("built-in preset")))
        .collect()
}
