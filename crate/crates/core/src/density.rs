//! Buy / sell order-book densities around the auction price, per tick and
//! binned in log-price for averaging across days.

use std::collections::BTreeMap;
use std::fmt;

use crate::book::{AccountType, AuctionBook, LatencyFlag, Placement, Side};
use crate::error::BookError;
use crate::grid::Price;

/// One basis point in log-price units.
pub const BASIS_POINT: f64 = 1e-4;

/// Scaled density at one non-empty tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPoint {
    pub price: Price,
    /// `log(p / p_a)`.
    pub x: f64,
    /// Distance to the neighbouring non-empty tick used as `δp`.
    pub gap: Price,
    /// `V(p) / (δp * Q_a)`, per currency unit.
    pub rho: f64,
}

/// Scaled per-tick density of one side.
///
/// For buys `δp` is the distance up to the next non-empty buy tick, for sells
/// the distance down to the previous non-empty sell tick. The outermost tick
/// of a side has no neighbour and uses one tick size.
pub fn density(
    book: &AuctionBook,
    side: Side,
    auction_price: Price,
    auction_volume: u64,
) -> Result<Vec<DensityPoint>, BookError> {
    if auction_volume == 0 {
        return Err(BookError::ZeroAuctionVolume);
    }
    book.grid().tick_of(auction_price)?;
    let ticks: Vec<(i64, u64)> = book
        .levels()
        .filter_map(|(t, l)| (l.get(side) > 0).then_some((t, l.get(side))))
        .collect();
    if ticks.is_empty() {
        return Err(BookError::EmptySide);
    }
    let grid = book.grid();
    let theta = grid.tick_size();
    let p_a = auction_price.as_f64();
    let q_a = auction_volume as f64;
    let points = ticks
        .iter()
        .enumerate()
        .map(|(i, &(tick, volume))| {
            let neighbour = match side {
                Side::Buy => ticks.get(i + 1).map(|n| n.0 - tick),
                Side::Sell => i.checked_sub(1).map(|j| tick - ticks[j].0),
            };
            let gap = neighbour.map_or(theta, |n| Price::from_raw(n * theta.raw()));
            let price = grid.price_of(tick);
            DensityPoint {
                price,
                x: (price.as_f64() / p_a).ln(),
                gap,
                rho: volume as f64 / (gap.as_f64() * q_a),
            }
        })
        .collect();
    Ok(points)
}

/// Combined `ρ̃_S + ρ̃_B` sample at `|x|` from the auction price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiquiditySample {
    pub price: Price,
    /// `|log(p / p_a)|`, strictly positive.
    pub x: f64,
    pub rho: f64,
}

/// Combined buy + sell scaled density at the non-empty ticks strictly beyond
/// the auction price on `side` (above for buys, below for sells), out to
/// `|x| <= max_x`.
///
/// `δp` is the distance from each tick to the next non-empty tick further
/// from the auction price, so that `ρ * δp * Q_a` recovers the shares that
/// separate consecutive impact breakpoints.
pub fn liquidity_samples(
    book: &AuctionBook,
    side: Side,
    auction_price: Price,
    auction_volume: u64,
    max_x: f64,
) -> Result<Vec<LiquiditySample>, BookError> {
    if auction_volume == 0 {
        return Err(BookError::ZeroAuctionVolume);
    }
    let grid = *book.grid();
    let a_tick = grid.tick_of(auction_price)?;
    let theta = grid.tick_size().as_f64();
    let p_a = auction_price.as_f64();
    let q_a = auction_volume as f64;
    let beyond: Vec<(i64, u64)> = match side {
        Side::Buy => book.levels_above(a_tick).map(|(t, l)| (t, l.total())).collect(),
        Side::Sell => book.levels_below(a_tick).map(|(t, l)| (t, l.total())).collect(),
    };
    let limit = max_x * (1.0 + 1e-12);
    let mut out = Vec::new();
    for (i, &(tick, volume)) in beyond.iter().enumerate() {
        let price = grid.price_of(tick);
        let x = (price.as_f64() / p_a).ln().abs();
        if x > limit {
            break;
        }
        let gap_ticks = beyond.get(i + 1).map_or(1, |n| n.0.abs_diff(tick));
        out.push(LiquiditySample {
            price,
            x,
            rho: volume as f64 / (gap_ticks as f64 * theta * q_a),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Grouping {
    Latency,
    Account,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupKey {
    Latency(LatencyFlag),
    Account(AccountType),
}

impl GroupKey {
    pub fn all(grouping: Grouping) -> Vec<GroupKey> {
        match grouping {
            Grouping::Latency => LatencyFlag::ALL.iter().map(|f| GroupKey::Latency(*f)).collect(),
            Grouping::Account => AccountType::ALL.iter().map(|a| GroupKey::Account(*a)).collect(),
        }
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKey::Latency(l) => l.fmt(f),
            GroupKey::Account(a) => a.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DensityBin {
    pub buy: f64,
    pub sell: f64,
    /// Days with non-zero volume in this bin.
    pub n_days: usize,
}

/// Scaled densities on centred log-price bins `[k - 1/2, k + 1/2) * dx`.
///
/// A single-day profile holds `V / (Q_a * dx)`; an averaged profile holds the
/// per-bin mean over `days`, counting days without volume in a bin as zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub dx: f64,
    pub group: Option<GroupKey>,
    pub days: usize,
    pub bins: BTreeMap<i64, DensityBin>,
}

impl DensityProfile {
    fn empty(dx: f64, group: Option<GroupKey>) -> Self {
        DensityProfile {
            dx,
            group,
            days: 1,
            bins: BTreeMap::new(),
        }
    }

    pub fn bin_of(&self, x: f64) -> i64 {
        (x / self.dx).round() as i64
    }

    /// Bin centre in basis points.
    pub fn x_bp(&self, bin: i64) -> f64 {
        bin as f64 * self.dx / BASIS_POINT
    }

    /// `Σ ρ * dx` for one side.
    pub fn mass(&self, side: Side) -> f64 {
        self.bins
            .values()
            .map(|b| match side {
                Side::Buy => b.buy,
                Side::Sell => b.sell,
            })
            .sum::<f64>()
            * self.dx
    }
}

/// Binned scaled density of one auction. With a grouping, one profile per
/// category (every category, in declaration order) is returned.
pub fn day_profile(
    book: &AuctionBook,
    auction_price: Price,
    auction_volume: u64,
    dx: f64,
    grouping: Option<Grouping>,
) -> Result<Vec<DensityProfile>, BookError> {
    if auction_volume == 0 {
        return Err(BookError::ZeroAuctionVolume);
    }
    assert!(dx > 0.0, "bin width must be positive");
    book.grid().tick_of(auction_price)?;
    let grid = *book.grid();
    let p_a = auction_price.as_f64();
    let scale = 1.0 / (auction_volume as f64 * dx);
    let keys: Vec<Option<GroupKey>> = match grouping {
        None => vec![None],
        Some(g) => GroupKey::all(g).into_iter().map(Some).collect(),
    };
    let mut profiles: Vec<DensityProfile> = keys.iter().map(|k| DensityProfile::empty(dx, *k)).collect();
    let add = |profile: &mut DensityProfile, tick: i64, side: Side, volume: u64| {
        let x = (grid.price_of(tick).as_f64() / p_a).ln();
        let bin = profile.bins.entry(profile.bin_of(x)).or_default();
        match side {
            Side::Buy => bin.buy += volume as f64 * scale,
            Side::Sell => bin.sell += volume as f64 * scale,
        }
        bin.n_days = 1;
    };
    match grouping {
        None => {
            for (tick, level) in book.levels() {
                for side in [Side::Buy, Side::Sell] {
                    if level.get(side) > 0 {
                        add(&mut profiles[0], tick, side, level.get(side));
                    }
                }
            }
        }
        Some(_) => {
            // Sorted so floating-point sums do not depend on hash order.
            for order in book.orders_by_priority() {
                let Placement::Limit(tick) = order.placement else {
                    continue;
                };
                let key = match grouping {
                    Some(Grouping::Latency) => GroupKey::Latency(order.latency),
                    _ => GroupKey::Account(order.account),
                };
                let idx = keys.iter().position(|k| *k == Some(key)).expect("all keys present");
                add(&mut profiles[idx], tick, order.side, order.quantity);
            }
        }
    }
    Ok(profiles)
}

/// Per-bin arithmetic mean across days.
pub fn average_density(profiles: &[DensityProfile]) -> Result<DensityProfile, BookError> {
    let first = profiles.first().ok_or(BookError::EmptySide)?;
    let mut out = DensityProfile {
        dx: first.dx,
        group: first.group,
        days: 0,
        bins: BTreeMap::new(),
    };
    for p in profiles {
        if p.dx != first.dx {
            return Err(BookError::MismatchedBinning(first.dx, p.dx));
        }
        out.days += p.days;
        for (k, b) in &p.bins {
            let acc = out.bins.entry(*k).or_default();
            // Stored values are means; weight them back to sums.
            acc.buy += b.buy * p.days as f64;
            acc.sell += b.sell * p.days as f64;
            acc.n_days += b.n_days;
        }
    }
    let days = out.days as f64;
    for b in out.bins.values_mut() {
        b.buy /= days;
        b.sell /= days;
    }
    Ok(out)
}

/// Averages grouped day profiles (as returned by [`day_profile`]) group by group.
pub fn average_grouped(days: &[Vec<DensityProfile>]) -> Result<Vec<DensityProfile>, BookError> {
    let Some(first) = days.first() else {
        return Ok(Vec::new());
    };
    (0..first.len())
        .map(|g| {
            let column: Vec<DensityProfile> = days.iter().map(|d| d[g].clone()).collect();
            average_density(&column)
        })
        .collect()
}

/// CSV rendering: `x_bp,rho_buy,rho_sell,n_days[,group]`.
pub fn profiles_to_csv(profiles: &[DensityProfile]) -> String {
    let grouped = profiles.iter().any(|p| p.group.is_some());
    let mut out = String::from(if grouped {
        "x_bp,rho_buy,rho_sell,n_days,group\n"
    } else {
        "x_bp,rho_buy,rho_sell,n_days\n"
    });
    for p in profiles {
        for (k, b) in &p.bins {
            out.push_str(&format!("{},{},{},{}", p.x_bp(*k), b.buy, b.sell, b.n_days));
            if let Some(g) = p.group {
                out.push_str(&format!(",{g}"));
            }
            out.push('\n');
        }
    }
    out
}
