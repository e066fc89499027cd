use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} does not fit in {width} bits")]
    ValueTooWide { value: u64, width: u32 },
    #[error("bit width {0} exceeds the 57-bit limit of a single call")]
    WidthTooLarge(u32),
    #[error("bit stream exhausted: requested {requested} bits, {remaining} remain")]
    StreamExhausted { requested: u32, remaining: u64 },
    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("table of {table_size} states cannot hold {symbols} symbols")]
    TableTooSmall { table_size: u32, symbols: usize },
    #[error("symbol {0} is not encodable with this table")]
    UnknownSymbol(usize),
    #[error("value {value} outside range 0..{range}")]
    ValueOutOfRange { value: u64, range: u64 },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("malformed word at byte offset {offset}: {reason}")]
    MalformedWord { offset: usize, reason: String },
    #[error("time {0} exceeds the 28-bit epoch capacity")]
    EpochOverflow(u64),
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("event has no pulses")]
    EmptyEvent,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("corrupt data: {0}")]
    Corrupt(String),
    #[error("checksum mismatch in frame {frame}: stored {stored:08x}, computed {computed:08x}")]
    ChecksumMismatch { frame: usize, stored: u32, computed: u32 },
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u8, expected: u8 },
    #[error("bad magic bytes")]
    BadMagic,
    #[error("stationary distribution did not converge after {0} iterations")]
    NoConvergence(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
