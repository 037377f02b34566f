//! Call-auction order book analytics.
//!
//! Replays order logs into discrete-price auction books, clears them under
//! volume / imbalance / reference-price rules, derives exact step impact
//! curves, fits the constant-liquidity window around the auction price, and
//! estimates response functions from the accumulation-period flow. A seeded
//! synthetic flow generator provides test corpora.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod book;
pub mod clearing;
pub mod density;
pub mod error;
pub mod flowgen;
pub mod grid;
pub mod impact;
pub mod io;
pub mod regime;
pub mod response;
pub mod stats;

pub use book::{AccountType, Action, AuctionBook, Ladder, LatencyFlag, Level, OrderEvent, OrderId, OrderType, Side};
pub use clearing::{clear, uncross, uncross_book, ClearingResult, IndicativePoint, Uncross};
pub use error::{BookError, ClearingError, FlowError, ImpactError, ParseError, RegimeError, StatsError};
pub use grid::{Price, PriceGrid};

/// Any failure raised by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Book(#[from] BookError),
    #[error(transparent)]
    Clearing(#[from] ClearingError),
    #[error(transparent)]
    Impact(#[from] ImpactError),
    #[error(transparent)]
    Regime(#[from] RegimeError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}
