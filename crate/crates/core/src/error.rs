use thiserror::Error;

use crate::book::OrderId;
use crate::grid::Price;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BookError {
    #[error("unknown or dead order id `{0}`")]
    UnknownOrderId(OrderId),
    #[error("order id `{0}` is already live")]
    DuplicateOrderId(OrderId),
    #[error("price {0} is not on the tick grid")]
    OffGridPrice(Price),
    #[error("quantity must be at least one share")]
    NonPositiveQuantity,
    #[error("priced order type submitted without a price")]
    MissingPrice,
    #[error("market order carries a price ({0})")]
    UnexpectedPrice(Price),
    #[error("tick size must be positive, got {0}")]
    InvalidTickSize(Price),
    #[error("no non-empty ticks on the requested side")]
    EmptySide,
    #[error("auction volume must be positive")]
    ZeroAuctionVolume,
    #[error("event {index} is earlier than its predecessor")]
    UnsortedEvents { index: usize },
    #[error("density profiles use different bin widths ({0} vs {1})")]
    MismatchedBinning(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ClearingError {
    #[error("supply and demand do not cross")]
    NoCross,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImpactError {
    #[error("auction volume is zero")]
    DegenerateAuction,
    #[error("scaled volume {0} lies beyond the truncated impact curve")]
    BeyondTruncation(f64),
    #[error("liquidity and first price must be positive")]
    ZeroLiquidity,
    #[error("quadratic impact equation has no positive root")]
    NoPositiveRoot,
    #[error("invalid impact parameters: {0}")]
    InvalidParameters(&'static str),
    #[error("cannot withdraw {requested} market shares, only {available} live")]
    InsufficientMarketVolume { requested: u64, available: u64 },
    #[error(transparent)]
    Clearing(#[from] ClearingError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegimeError {
    #[error("need at least {required} points, got {actual}")]
    TooFewPoints { required: usize, actual: usize },
    #[error("density sample at x={0} is not positive")]
    NonPositiveDensity(f64),
    #[error(transparent)]
    Impact(#[from] ImpactError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("samples have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("sample is constant")]
    DegenerateSample,
    #[error("sample is empty")]
    EmptySample,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("need at least {required} values, got {actual}")]
    TooFewPoints { required: usize, actual: usize },
    #[error("threshold must be positive")]
    InvalidThreshold,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("infeasible flow configuration: {0}")]
    InfeasibleConfig(String),
}

/// CSV / JSON ingestion failure, tagged with the 1-based input line.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("bad header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
