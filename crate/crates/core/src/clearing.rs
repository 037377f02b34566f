//! Auction uncrossing: price and volume selection with the exchange tie-break
//! chain, matched / remaining split at the clearing price, and the
//! indicative-price time series during accumulation.
//!
//! Candidate prices are the non-empty ticks of the book. Among them the
//! clearing price maximises executable volume `min(S, D)`, then minimises
//! `|S - D|`, then minimises the distance to the reference price, and finally
//! takes the lower price.

use serde::Serialize;

use crate::book::{AuctionBook, Ladder, Level, OrderEvent, OrderId, Side};
use crate::error::{BookError, ClearingError};
use crate::grid::{Price, PriceGrid};

/// Price / volume outcome of an uncross, without allocation detail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Uncross {
    pub tick: i64,
    pub price: Price,
    pub volume: u64,
    /// `S(p_a)`.
    pub supply: u64,
    /// `D(p_a)`.
    pub demand: u64,
}

impl Uncross {
    /// Signed imbalance `S(p_a) - D(p_a)`.
    pub fn imbalance(&self) -> i64 {
        self.supply as i64 - self.demand as i64
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    tick: i64,
    volume: u64,
    abs_imbalance: u64,
    distance: u64,
    supply: u64,
    demand: u64,
}

impl Candidate {
    fn beats(&self, other: &Candidate) -> bool {
        (std::cmp::Reverse(self.volume), self.abs_imbalance, self.distance, self.tick)
            < (std::cmp::Reverse(other.volume), other.abs_imbalance, other.distance, other.tick)
    }
}

/// Single ascending sweep over sorted non-empty levels.
fn sweep<I>(
    levels: I,
    buy_market: u64,
    sell_market: u64,
    buy_limit_total: u64,
    reference_tick: i64,
    mut visit: impl FnMut(i64, u64, u64),
) -> Option<Candidate>
where
    I: IntoIterator<Item = (i64, Level)>,
{
    let mut best: Option<Candidate> = None;
    let mut supply = sell_market;
    let mut buy_below = 0u64;
    for (tick, level) in levels {
        if level.is_empty() {
            continue;
        }
        supply += level.sell;
        let demand = buy_market + (buy_limit_total - buy_below);
        buy_below += level.buy;
        visit(tick, supply, demand);
        let cand = Candidate {
            tick,
            volume: supply.min(demand),
            abs_imbalance: supply.abs_diff(demand),
            distance: tick.abs_diff(reference_tick),
            supply,
            demand,
        };
        if best.as_ref().is_none_or(|b| cand.beats(b)) {
            best = Some(cand);
        }
    }
    best
}

fn finish(grid: &PriceGrid, best: Option<Candidate>, buy_market: u64, sell_market: u64) -> Result<Uncross, ClearingError> {
    match best {
        Some(c) if c.volume > 0 => Ok(Uncross {
            tick: c.tick,
            price: grid.price_of(c.tick),
            volume: c.volume,
            supply: c.supply,
            demand: c.demand,
        }),
        Some(_) => Err(ClearingError::NoCross),
        // Only market orders: they cross at the reference price.
        None if buy_market > 0 && sell_market > 0 => Ok(Uncross {
            tick: grid.reference_tick(),
            price: grid.reference_price(),
            volume: buy_market.min(sell_market),
            supply: sell_market,
            demand: buy_market,
        }),
        None => Err(ClearingError::NoCross),
    }
}

/// Uncrosses an aggregated ladder.
pub fn uncross(ladder: &Ladder) -> Result<Uncross, ClearingError> {
    let total_buy = ladder.total_limit(Side::Buy);
    let best = sweep(
        ladder.levels.iter().copied(),
        ladder.buy_market,
        ladder.sell_market,
        total_buy,
        ladder.grid.reference_tick(),
        |_, _, _| {},
    );
    finish(&ladder.grid, best, ladder.buy_market, ladder.sell_market)
}

/// Uncrosses a live book without copying its levels.
pub fn uncross_book(book: &AuctionBook) -> Result<Uncross, ClearingError> {
    let best = sweep(
        book.levels(),
        book.market_total(Side::Buy),
        book.market_total(Side::Sell),
        book.limit_total(Side::Buy),
        book.grid().reference_tick(),
        |_, _, _| {},
    );
    finish(
        book.grid(),
        best,
        book.market_total(Side::Buy),
        book.market_total(Side::Sell),
    )
}

/// Supply / demand at one candidate price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Executable {
    pub price: Price,
    pub supply: u64,
    pub demand: u64,
}

impl Executable {
    pub fn volume(&self) -> u64 {
        self.supply.min(self.demand)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fill {
    pub order_id: OrderId,
    pub side: Side,
    pub quantity: u64,
}

/// Full clearing outcome at the auction price.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClearingResult {
    pub price: Price,
    pub tick: i64,
    pub volume: u64,
    /// `S(p_a) - D(p_a)`.
    pub imbalance: i64,
    pub supply: u64,
    pub demand: u64,
    pub buy_matched: u64,
    pub buy_remaining: u64,
    pub sell_matched: u64,
    pub sell_remaining: u64,
    /// Market or better-priced volume left unexecuted. Non-zero only when
    /// unpriced orders exceed everything the other side can offer.
    pub buy_better_unfilled: u64,
    pub sell_better_unfilled: u64,
    pub executable: Vec<Executable>,
    /// Per-order fills of limit orders resting exactly at `p_a`.
    pub fills: Vec<Fill>,
}

/// Flat JSON record of a clearing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClearingRecord {
    pub p_a: f64,
    pub q_a: u64,
    pub imbalance: i64,
    pub vbm: u64,
    pub vbr: u64,
    pub vsm: u64,
    pub vsr: u64,
}

impl ClearingResult {
    /// Splits the volume at the clearing price into matched and remaining
    /// parts and checks the accounting identities.
    pub fn from_uncross(u: &Uncross, at_price: Level) -> Self {
        let (buy_matched, buy_remaining, buy_better_unfilled) = split(u.volume, u.demand, at_price.buy);
        let (sell_matched, sell_remaining, sell_better_unfilled) =
            split(u.volume, u.supply, at_price.sell);
        let r = ClearingResult {
            price: u.price,
            tick: u.tick,
            volume: u.volume,
            imbalance: u.imbalance(),
            supply: u.supply,
            demand: u.demand,
            buy_matched,
            buy_remaining,
            sell_matched,
            sell_remaining,
            buy_better_unfilled,
            sell_better_unfilled,
            executable: Vec::new(),
            fills: Vec::new(),
        };
        r.check_identities();
        r
    }

    fn check_identities(&self) {
        assert_eq!(
            self.volume,
            self.supply - self.sell_remaining - self.sell_better_unfilled,
            "Q_a = S(p_a) - V_S^R(p_a)"
        );
        assert_eq!(
            self.volume,
            self.demand - self.buy_remaining - self.buy_better_unfilled,
            "Q_a = D(p_a) - V_B^R(p_a)"
        );
        assert!(
            (self.sell_remaining + self.sell_better_unfilled) == 0
                || (self.buy_remaining + self.buy_better_unfilled) == 0,
            "V_S^R(p_a) * V_B^R(p_a) = 0"
        );
    }

    pub fn matched(&self, side: Side) -> u64 {
        match side {
            Side::Buy => self.buy_matched,
            Side::Sell => self.sell_matched,
        }
    }

    pub fn remaining(&self, side: Side) -> u64 {
        match side {
            Side::Buy => self.buy_remaining,
            Side::Sell => self.sell_remaining,
        }
    }

    pub fn record(&self) -> ClearingRecord {
        ClearingRecord {
            p_a: self.price.as_f64(),
            q_a: self.volume,
            imbalance: self.imbalance,
            vbm: self.buy_matched,
            vbr: self.buy_remaining,
            vsm: self.sell_matched,
            vsr: self.sell_remaining,
        }
    }
}

/// (matched at p_a, remaining at p_a, better-priced unfilled) for one side,
/// where `cumulative` is S(p_a) or D(p_a) and `at_price` the limit volume at p_a.
fn split(volume: u64, cumulative: u64, at_price: u64) -> (u64, u64, u64) {
    let better = cumulative - at_price;
    if volume >= better {
        let matched = volume - better;
        (matched, at_price - matched, 0)
    } else {
        (0, at_price, better - volume)
    }
}

/// Clears `book` using its grid's reference price.
pub fn clear(book: &AuctionBook) -> Result<ClearingResult, ClearingError> {
    clear_impl(book, book.grid())
}

/// Clears `book` against an explicit on-grid reference price.
pub fn clear_with_reference(book: &AuctionBook, reference_price: Price) -> Result<ClearingResult, crate::Error> {
    let grid = book.grid().with_reference(reference_price)?;
    Ok(clear_impl(book, &grid)?)
}

fn clear_impl(book: &AuctionBook, grid: &PriceGrid) -> Result<ClearingResult, ClearingError> {
    let mut executable = Vec::with_capacity(book.level_count());
    let best = sweep(
        book.levels(),
        book.market_total(Side::Buy),
        book.market_total(Side::Sell),
        book.limit_total(Side::Buy),
        grid.reference_tick(),
        |tick, supply, demand| {
            executable.push(Executable {
                price: grid.price_of(tick),
                supply,
                demand,
            })
        },
    );
    let u = finish(
        grid,
        best,
        book.market_total(Side::Buy),
        book.market_total(Side::Sell),
    )?;
    let mut result = ClearingResult::from_uncross(&u, book.level(u.tick));
    result.executable = executable;
    result.fills = allocate(book, &result);
    Ok(result)
}

/// Time-priority allocation of the matched volume at the clearing price.
fn allocate(book: &AuctionBook, result: &ClearingResult) -> Vec<Fill> {
    let mut fills = Vec::new();
    for side in [Side::Buy, Side::Sell] {
        let mut left = result.matched(side);
        if left == 0 {
            continue;
        }
        let mut at_price: Vec<_> = book
            .orders()
            .filter(|o| o.side == side && o.tick() == Some(result.tick))
            .collect();
        at_price.sort_by(|a, b| (a.priority_ts, &a.id).cmp(&(b.priority_ts, &b.id)));
        for o in at_price {
            if left == 0 {
                break;
            }
            let q = o.quantity.min(left);
            left -= q;
            fills.push(Fill {
                order_id: o.id.clone(),
                side,
                quantity: q,
            });
        }
    }
    fills
}

/// Indicative price and volume at one instant; `None` when the book does not
/// cross at that instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndicativePoint {
    pub t_us: i64,
    pub indicative: Option<(Price, u64)>,
}

impl IndicativePoint {
    pub fn price(&self) -> Option<Price> {
        self.indicative.map(|(p, _)| p)
    }

    pub fn volume(&self) -> Option<u64> {
        self.indicative.map(|(_, q)| q)
    }
}

/// Sampling instants `start + k * interval` (k >= 1) strictly before `end`,
/// followed by `end` itself.
pub fn sample_times(start_us: i64, end_us: i64, interval_us: i64) -> Vec<i64> {
    assert!(interval_us > 0, "interval must be positive");
    let mut times = Vec::new();
    let mut t = start_us + interval_us;
    while t < end_us {
        times.push(t);
        t += interval_us;
    }
    times.push(end_us.max(start_us));
    times
}

/// Replays a time-sorted log and calls `at_sample` with the book state at
/// every sampling instant. The state at `t` includes all events stamped `<= t`.
/// `end_us` defaults to the last event timestamp (the clearing time).
pub fn replay_sampled<F>(
    grid: PriceGrid,
    events: &[OrderEvent],
    interval_us: i64,
    end_us: Option<i64>,
    mut at_sample: F,
) -> Result<(), BookError>
where
    F: FnMut(i64, &AuctionBook),
{
    check_sorted(events)?;
    let Some(first) = events.first() else {
        return Ok(());
    };
    let end = end_us.unwrap_or_else(|| events.last().map_or(first.timestamp_us, |e| e.timestamp_us));
    let mut book = AuctionBook::new(grid);
    let mut next = 0;
    for t in sample_times(first.timestamp_us, end, interval_us) {
        while next < events.len() && events[next].timestamp_us <= t {
            book.apply(&events[next])?;
            next += 1;
        }
        at_sample(t, &book);
    }
    Ok(())
}

/// Indicative price / volume sampled every `interval_us` during accumulation.
pub fn indicative_series(
    grid: PriceGrid,
    events: &[OrderEvent],
    interval_us: i64,
    end_us: Option<i64>,
) -> Result<Vec<IndicativePoint>, BookError> {
    let mut points = Vec::new();
    replay_sampled(grid, events, interval_us, end_us, |t, book| {
        points.push(IndicativePoint {
            t_us: t,
            indicative: uncross_book(book).ok().map(|u| (u.price, u.volume)),
        });
    })?;
    Ok(points)
}

pub(crate) fn check_sorted(events: &[OrderEvent]) -> Result<(), BookError> {
    match events
        .windows(2)
        .position(|w| w[1].timestamp_us < w[0].timestamp_us)
    {
        Some(i) => Err(BookError::UnsortedEvents { index: i + 1 }),
        None => Ok(()),
    }
}
