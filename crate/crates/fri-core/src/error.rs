use thiserror::Error;

/// Errors produced by data loading, graph construction, and the indicators.
#[derive(Debug, Error)]
pub enum FriError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("duplicate row for ticker {ticker} on {date}")]
    DuplicateRow { ticker: String, date: String },

    #[error("no tickers with complete price history")]
    EmptyUniverse,

    #[error("non-positive price for ticker {ticker} on {date}: {price}")]
    NonPositivePrice {
        ticker: String,
        date: String,
        price: f64,
    },

    #[error("unknown ticker {0}")]
    UnknownTicker(String),

    #[error("invalid parameter {name}: {msg}")]
    InvalidParameter { name: &'static str, msg: String },

    #[error("day index {t} out of range [{min}, {max}]")]
    DayOutOfRange { t: usize, min: usize, max: usize },

    #[error("calendar mismatch: {0}")]
    CalendarMismatch(String),

    #[error("edge factor undefined: {0}")]
    FactorUndefined(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no evaluable days: {0}")]
    NoEvaluableDays(String),

    #[error("not enough eligible pairs: {0}")]
    NoEligiblePairs(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
