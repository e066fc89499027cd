//! Entropy coders: Exp-Golomb, Huffman and tabled ANS, plus the tools used
//! to quantize distributions and evaluate an automaton's coding loss.

mod analysis;
mod distribution;
mod exp_golomb;
mod huffman;
mod tans;

pub use analysis::{stationary_distribution, tans_expected_bits, TansCost};
pub use distribution::{expected_code_length, Distribution};
pub use exp_golomb::{
    exp_golomb_decode, exp_golomb_encode, exp_golomb_encode_reversed, exp_golomb_len,
};
pub use huffman::{huffman_build, PrefixCode, MAX_CODE_LENGTH};
pub use tans::{
    build_decoding_table, build_encoding_table, quantize_probabilities, spread_step,
    spread_symbols, CoderState, DecodeEntry, EncodingTables, TansAutomaton, MAX_TABLE_LOG,
};
