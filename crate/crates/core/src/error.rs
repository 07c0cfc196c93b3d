use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bit sequence length {len} is not a multiple of {width}")]
    BitLength { len: usize, width: usize },

    #[error("unsupported constellation order {0} (expected 4 or 16)")]
    AlphabetOrder(usize),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("layout bound violated: {0}")]
    LayoutBound(String),

    #[error("invalid layout request: {0}")]
    Layout(String),

    #[error("expected {expected} data symbols, got {got}")]
    DataLength { expected: usize, got: usize },

    #[error("frame dimensions {got_n}x{got_m} do not match layout {want_n}x{want_m}")]
    DimMismatch {
        got_n: usize,
        got_m: usize,
        want_n: usize,
        want_m: usize,
    },

    #[error("invalid channel: {0}")]
    Channel(String),

    #[error("channel profile parse error on line {line}: {msg}")]
    ProfileParse { line: usize, msg: String },

    #[error("fractional Doppler taps passed to the integer relation; use apply_ideal_fractional")]
    FractionalTaps,

    #[error("pilot amplitude must be nonzero")]
    ZeroPilot,

    #[error("channel mode {channel} does not match layout scheme {scheme}")]
    ModeMismatch { channel: String, scheme: String },

    #[error("exhaustive search over {vars} variables exceeds the limit of {limit}")]
    TooLarge { vars: usize, limit: usize },

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("tap list parse error on line {line}: {msg}")]
    TapParse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
