//! Brute-force reference implementations and random book builders shared by
//! the integration tests.

#![allow(dead_code)]

use std::collections::BTreeMap;

use auction_core::book::{AuctionBook, OrderEvent, Side};
use auction_core::grid::{Price, PriceGrid};
use rand::{Rng, RngCore};

/// Per-tick volumes and market totals kept as plain maps.
#[derive(Debug, Clone, Default)]
pub struct NaiveBook {
    /// tick -> (buy, sell)
    pub levels: BTreeMap<i64, (u64, u64)>,
    pub buy_market: u64,
    pub sell_market: u64,
    pub reference_tick: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NaiveClear {
    pub tick: i64,
    pub volume: u64,
    /// Largest `min(S, D)` over every grid tick in range, candidates or not.
    pub max_volume_any_tick: u64,
}

impl NaiveBook {
    pub fn supply(&self, tick: i64) -> u64 {
        self.sell_market + self.levels.range(..=tick).map(|(_, v)| v.1).sum::<u64>()
    }

    pub fn demand(&self, tick: i64) -> u64 {
        self.buy_market + self.levels.range(tick..).map(|(_, v)| v.0).sum::<u64>()
    }

    pub fn from_book(book: &AuctionBook) -> Self {
        let mut levels = BTreeMap::new();
        for o in book.orders() {
            if let Some(t) = o.tick() {
                let e = levels.entry(t).or_insert((0, 0));
                match o.side {
                    Side::Buy => e.0 += o.quantity,
                    Side::Sell => e.1 += o.quantity,
                }
            }
        }
        let mut buy_market = 0;
        let mut sell_market = 0;
        for o in book.orders() {
            if o.placement == auction_core::book::Placement::Market {
                match o.side {
                    Side::Buy => buy_market += o.quantity,
                    Side::Sell => sell_market += o.quantity,
                }
            }
        }
        levels.retain(|_, v: &mut (u64, u64)| v.0 + v.1 > 0);
        NaiveBook {
            levels,
            buy_market,
            sell_market,
            reference_tick: book.grid().reference_tick(),
        }
    }

    /// Exhaustive scan: maximise `min(S, D)`, then minimise `|S - D|`, then
    /// the distance to the reference tick, then take the lower tick. Prices
    /// with resting volume are the candidates.
    pub fn clear(&self) -> Option<NaiveClear> {
        self.clear_with(Side::Buy, 0)
    }

    /// `clear` after adding `q` market shares on `side`, without copying.
    pub fn clear_with(&self, side: Side, q: u64) -> Option<NaiveClear> {
        let (bm, sm) = match side {
            Side::Buy => (self.buy_market + q, self.sell_market),
            Side::Sell => (self.buy_market, self.sell_market + q),
        };
        let (Some(&lo), Some(&hi)) = (self.levels.keys().next(), self.levels.keys().next_back()) else {
            if bm > 0 && sm > 0 {
                let v = bm.min(sm);
                return Some(NaiveClear {
                    tick: self.reference_tick,
                    volume: v,
                    max_volume_any_tick: v,
                });
            }
            return None;
        };
        let mut max_any = 0;
        let mut best: Option<(u64, u64, u64, i64)> = None;
        let mut s = sm;
        let mut d = bm + self.levels.values().map(|v| v.0).sum::<u64>();
        for t in lo - 2..=hi + 2 {
            let (vb, vs) = self.levels.get(&t).copied().unwrap_or((0, 0));
            s += vs;
            let v = s.min(d);
            max_any = max_any.max(v);
            let present = self.levels.contains_key(&t);
            let imb = s.abs_diff(d);
            d -= vb;
            if !present {
                continue;
            }
            let dist = t.abs_diff(self.reference_tick);
            let better = match best {
                None => true,
                Some((bv, bi, bd, bt)) => {
                    v > bv || (v == bv && (imb < bi || (imb == bi && (dist < bd || (dist == bd && t < bt)))))
                }
            };
            if better {
                best = Some((v, imb, dist, t));
            }
        }
        let (v, _, _, t) = best?;
        (v > 0).then_some(NaiveClear {
            tick: t,
            volume: v,
            max_volume_any_tick: max_any,
        })
    }

    pub fn with_market(&self, side: Side, q: u64) -> NaiveBook {
        let mut b = self.clone();
        match side {
            Side::Buy => b.buy_market += q,
            Side::Sell => b.sell_market += q,
        }
        b
    }
}

/// Random small book on a 0.01 grid around 10.00: up to `max_ticks` ticks,
/// per-tick side volumes up to `max_volume`, random market totals. Volumes are
/// split over several orders with random arrival times.
pub fn random_book<R: RngCore>(rng: &mut R, max_ticks: i64, max_volume: u64) -> AuctionBook {
    let tick = Price::from_f64(0.01);
    let span = rng.random_range(1..=max_ticks);
    let base = 1000 - rng.random_range(0..span);
    let reference = base + rng.random_range(0..span);
    let grid = PriceGrid::with_tick(tick, Price::from_raw(reference * tick.raw())).unwrap();
    let sparse = rng.random_bool(0.5);
    let mut events = Vec::new();
    let mut id = 0;
    let mut next = |side: Side, price: Option<Price>, q: u64, rng: &mut R| {
        id += 1;
        let t = rng.random_range(0..1_000_000);
        let ev = match price {
            Some(p) => OrderEvent::limit(t, &format!("o{id}"), side, p, q),
            None => OrderEvent::market(t, &format!("o{id}"), side, q),
        };
        events.push(ev);
    };
    for k in 0..span {
        let price = grid.price_of(base + k);
        for side in [Side::Buy, Side::Sell] {
            if sparse && rng.random_bool(0.4) {
                continue;
            }
            let mut left = rng.random_range(0..=max_volume);
            while left > 0 {
                let q = rng.random_range(1..=left);
                next(side, Some(price), q, rng);
                left -= q;
            }
        }
    }
    for side in [Side::Buy, Side::Sell] {
        if rng.random_bool(0.5) {
            let q = rng.random_range(1..=max_volume);
            next(side, None, q, rng);
        }
    }
    events.sort_by_key(|e| e.timestamp_us);
    AuctionBook::replay(grid, &events).unwrap()
}
