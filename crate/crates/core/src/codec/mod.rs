//! Codebook training, frame coding and the container format.
//!
//! A frame holds six streams: one symbol stream per value type (pulses,
//! start, width, distance), the raw low bits of binned values, and the
//! per-event reference times. tANS symbol streams are written forward and
//! read backward; all other streams are read forward.

mod codebook;
mod config;
mod container;
mod frame;
mod report;
mod wire;

pub use codebook::{
    build_codebook, classify_channels, deserialize_codebook, serialize_codebook, training_bin_counts,
    CodeBook, SymbolCoder, ValueTable, CODEBOOK_VERSION, ESCAPE_RAW_BITS, PULSES_SYMBOLS,
};
pub use config::{
    BinningMode, ChannelMode, CodecConfig, CoderKind, StreamConfig, DEFAULT_FRAME_SIZE, DEFAULT_MIN_VAL,
    PRESETS,
};
pub use container::{
    compress_corpus, decode_frame_checked, decode_frames, decompress_corpus, ContainerReader, ContainerWriter, FrameEntry,
    CONTAINER_VERSION,
};
pub use frame::{
    compress_frame, decompress_frame, frame_event_count, FrameStats, MAX_FRAME_EVENTS, MAX_FRAME_PULSES,
    STREAM_COUNT, STREAM_NAMES,
};
pub use report::{default_ladder, report_cost, write_report_csv, write_report_json, CostReport, GAPS_NOTE};
