//! Lossless compression of time-to-digital-converter (TDC) event streams.
//!
//! The pipeline turns absolute hit times from the legacy 32-bit word format
//! into per-channel relative values (`pulses`, `start`, `width`,
//! `distance`), splits large values into entropy-coded bins plus raw low
//! bits, and codes the symbols with Exp-Golomb, Huffman or tabled ANS.
//!
//! - [`bitstream`]: LSB-first bit sink and forward/reverse cursors.
//! - [`entropy`]: Exp-Golomb, Huffman, tANS and automaton analysis.
//! - [`binning`]: simple and adaptive binning tables.
//! - [`event_model`]: legacy words, pulse pairing, relative events.
//! - [`codec`]: codebooks, frames and the container format.
//! - [`stats`]: entropy, histograms and empirical CDFs.
//! - [`datagen`]: deterministic synthetic corpora.
//! - [`selftest`]: reference checks of the worked numeric examples.

pub mod binning;
pub mod bitstream;
pub mod codec;
pub mod datagen;
pub mod entropy;
mod error;
pub mod event_model;
pub mod selftest;
pub mod stats;

pub use error::{Error, Result};
