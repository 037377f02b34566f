//! Exact step price-impact curves of a cleared auction, the what-if re-clearing
//! used to check them, and closed-form impact helpers.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::book::{AuctionBook, Ladder, Level, Side};
use crate::clearing::{uncross, ClearingResult};
use crate::error::{ClearingError, ImpactError};
use crate::grid::Price;

/// Default log-price truncation of the impact scan (2%).
pub const DEFAULT_MAX_X: f64 = 0.02;

/// A scaled volume `num / den` kept as an exact ratio of shares.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScaledVolume {
    pub num: u64,
    pub den: u64,
}

impl ScaledVolume {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "scaled volume denominator must be positive");
        ScaledVolume { num, den }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Smallest integer share count `q` with `q / den >= self`.
    pub fn shares_ceil(self, den: u64) -> u64 {
        let n = self.num as u128 * den as u128;
        n.div_ceil(self.den as u128) as u64
    }
}

impl PartialEq for ScaledVolume {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ScaledVolume {}

impl PartialOrd for ScaledVolume {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ScaledVolume {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl fmt::Display for ScaledVolume {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Discontinuity `ω^(i)` of the impact function: from `omega` on, the price
/// sits at `price` (the `(i+1)`-th non-empty tick beyond `p_a`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Breakpoint {
    pub omega: ScaledVolume,
    pub tick: i64,
    pub price: Price,
    /// `|log(price / p_a)|`.
    pub impact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactCurve {
    pub side: Side,
    pub p_a: Price,
    pub q_a: u64,
    pub max_x: f64,
    /// `ω^(0)`.
    pub omega0: ScaledVolume,
    pub breakpoints: Vec<Breakpoint>,
    /// Exclusive upper end of the range on which the curve is exact: the next
    /// discontinuity after the last retained breakpoint.
    pub omega_end: ScaledVolume,
}

/// Builds the impact curve of market orders on `side` (buys push the price
/// up, sells down) from a book and its clearing.
///
/// Breakpoints are kept while `|log(p^(i+1)/p_a)| <= max_x`.
pub fn impact_curve(
    book: &AuctionBook,
    clearing: &ClearingResult,
    side: Side,
    max_x: f64,
) -> Result<ImpactCurve, ImpactError> {
    if clearing.volume == 0 {
        return Err(ImpactError::DegenerateAuction);
    }
    if !(max_x > 0.0) {
        return Err(ImpactError::InvalidParameters("max_x must be positive"));
    }
    let q_a = clearing.volume;
    // S(p_a) - D(p^(1)) for buys, D(p_a) - S(p^(1)) for sells; negative only
    // when p^(1) ties with p_a.
    let first = match side {
        Side::Buy => {
            (clearing.sell_remaining + clearing.sell_better_unfilled + clearing.buy_matched) as i64
                - clearing.buy_better_unfilled as i64
        }
        Side::Sell => {
            (clearing.sell_matched + clearing.buy_remaining + clearing.buy_better_unfilled) as i64
                - clearing.sell_better_unfilled as i64
        }
    };
    let beyond: Vec<(i64, Level)> = match side {
        Side::Buy => book.levels_above(clearing.tick).collect(),
        Side::Sell => book.levels_below(clearing.tick).collect(),
    };
    let at_auction = book.level(clearing.tick);
    Ok(build_curve(side, clearing.price, q_a, first, at_auction, &beyond, book, max_x))
}

/// Ticks whose step leaves both `S` and `D` unchanged (nothing leaves the
/// crossing on the near tick, nothing joins on the far one) tie exactly under
/// re-clearing and form a single step, priced by the reference rule.
#[allow(clippy::too_many_arguments)]
fn build_curve(
    side: Side,
    p_a: Price,
    q_a: u64,
    first: i64,
    at_auction: Level,
    beyond: &[(i64, Level)],
    book: &AuctionBook,
    max_x: f64,
) -> ImpactCurve {
    let grid = book.grid();
    let pa = p_a.as_f64();
    let limit = max_x * (1.0 + 1e-12);
    let reference = grid.reference_tick();
    let impact_of = |tick: i64| (grid.price_of(tick).as_f64() / pa).ln().abs();
    let leaving = |l: Level| match side {
        Side::Buy => l.buy,
        Side::Sell => l.sell,
    };
    let joining = |l: Level| match side {
        Side::Buy => l.sell,
        Side::Sell => l.buy,
    };
    // Step entry volume and its member ticks; `None` while still on the p_a step.
    let mut group: Option<(i64, Vec<i64>)> = None;
    let mut breakpoints = Vec::new();
    let mut close = |entry: i64, members: &[i64]| -> bool {
        let tick = *members
            .iter()
            .min_by_key(|&&t| (t.abs_diff(reference), t))
            .expect("step has a member");
        let impact = impact_of(tick);
        if impact > limit {
            return false;
        }
        breakpoints.push(Breakpoint {
            omega: ScaledVolume::new(entry.max(0) as u64, q_a),
            tick,
            price: grid.price_of(tick),
            impact,
        });
        true
    };
    let mut num = first;
    let mut prev = at_auction;
    let mut end = None;
    for &(tick, level) in beyond {
        if leaving(prev) == 0 && joining(level) == 0 {
            if let Some((_, members)) = group.as_mut() {
                members.push(tick);
            }
        } else {
            if let Some((entry, members)) = group.take() {
                if !close(entry, &members) {
                    end = Some(entry);
                    break;
                }
            }
            if impact_of(tick) > limit {
                end = Some(num);
                break;
            }
            group = Some((num, vec![tick]));
        }
        num += level.total() as i64;
        prev = level;
    }
    if end.is_none() {
        if let Some((entry, members)) = group.take() {
            if !close(entry, &members) {
                end = Some(entry);
            }
        }
    }
    let omega_end = ScaledVolume::new(end.unwrap_or(num).max(0) as u64, q_a);
    let omega0 = breakpoints.first().map_or(omega_end, |b| b.omega);
    ImpactCurve {
        side,
        p_a,
        q_a,
        max_x,
        omega0,
        breakpoints,
        omega_end,
    }
}

impl ImpactCurve {
    /// Index of the step containing `omega`: `None` for the zero-impact range.
    fn step(&self, omega: ScaledVolume) -> Result<Option<usize>, ImpactError> {
        if omega >= self.omega_end {
            return Err(ImpactError::BeyondTruncation(omega.value()));
        }
        Ok(self.breakpoints.partition_point(|b| b.omega <= omega).checked_sub(1))
    }

    /// Auction price after a market order of scaled size `omega`.
    pub fn price_at(&self, omega: ScaledVolume) -> Result<Price, ImpactError> {
        Ok(self.step(omega)?.map_or(self.p_a, |i| self.breakpoints[i].price))
    }

    /// `I(ω)`: right-continuous step function, shifting exactly at each `ω^(i)`.
    pub fn impact_at(&self, omega: ScaledVolume) -> Result<f64, ImpactError> {
        Ok(self.step(omega)?.map_or(0.0, |i| self.breakpoints[i].impact))
    }

    /// `impact_at` for a floating-point scaled volume.
    pub fn impact_at_value(&self, omega: f64) -> Result<f64, ImpactError> {
        if omega.is_nan() || omega < 0.0 {
            return Err(ImpactError::InvalidParameters("omega must be non-negative"));
        }
        if omega >= self.omega_end.value() {
            return Err(ImpactError::BeyondTruncation(omega));
        }
        let i = self.breakpoints.partition_point(|b| b.omega.value() <= omega);
        Ok(i.checked_sub(1).map_or(0.0, |i| self.breakpoints[i].impact))
    }

    /// `δω^(i)` in shares, with `δω^(0) = ω^(0)`.
    pub fn increments(&self) -> Vec<ScaledVolume> {
        let mut out = Vec::with_capacity(self.breakpoints.len());
        let mut prev = 0;
        for b in &self.breakpoints {
            out.push(ScaledVolume::new(b.omega.num - prev, self.q_a));
            prev = b.omega.num;
        }
        out
    }

    /// First non-empty tick beyond the auction price, if within the scan.
    pub fn first_price(&self) -> Option<Price> {
        self.breakpoints.first().map(|b| b.price)
    }

    /// CSV rows `side,i,omega_num,omega_den,price,impact_log`.
    pub fn to_csv(&self, with_header: bool) -> String {
        let mut out = String::new();
        if with_header {
            out.push_str("side,i,omega_num,omega_den,price,impact_log\n");
        }
        for (i, b) in self.breakpoints.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.side, i, b.omega.num, b.omega.den, b.price, b.impact
            ));
        }
        out
    }

    /// Signed step points `(ε ω, ε I)` tracing the curve, two per breakpoint
    /// (the value just before and at the jump), plus the origin.
    pub fn signed_points(&self) -> Vec<(f64, f64)> {
        let sign = self.side.sign() as f64;
        let mut out = vec![(0.0, 0.0)];
        let mut level = 0.0;
        for b in &self.breakpoints {
            let w = b.omega.value();
            out.push((sign * w, sign * level));
            out.push((sign * w, sign * b.impact));
            level = b.impact;
        }
        out.push((sign * self.omega_end.value(), sign * level));
        out
    }
}

/// Renders buy and sell curves as signed plot data `side,omega_signed,impact_signed`.
pub fn signed_curves_csv(curves: &[ImpactCurve]) -> String {
    let mut out = String::from("side,omega_signed,impact_signed\n");
    for c in curves {
        for (w, i) in c.signed_points() {
            out.push_str(&format!("{},{},{}\n", c.side, w, i));
        }
    }
    out
}

/// Clearing price after adding `q` unpriced shares on `side`.
pub fn inject_and_reclear(ladder: &Ladder, side: Side, q: u64) -> Result<Price, ClearingError> {
    let mut what_if = ladder.clone();
    *what_if.market_total_mut(side) += q;
    Ok(uncross(&what_if)?.price)
}

/// Clearing price after cancelling `q` live market shares on `side`.
pub fn withdraw_and_reclear(ladder: &Ladder, side: Side, q: u64) -> Result<Price, ImpactError> {
    let mut what_if = ladder.clone();
    let available = what_if.market_total(side);
    if q > available {
        return Err(ImpactError::InsufficientMarketVolume { requested: q, available });
    }
    *what_if.market_total_mut(side) -= q;
    Ok(uncross(&what_if)?.price)
}

/// `1 / (p^(1) L̃)`, the slope of the linear impact regime.
pub fn theoretical_slope(first_price: Price, l_tilde: f64) -> Result<f64, ImpactError> {
    let p1 = first_price.as_f64();
    if !(p1 > 0.0) || !(l_tilde > 0.0) || !l_tilde.is_finite() {
        return Err(ImpactError::ZeroLiquidity);
    }
    Ok(1.0 / (p1 * l_tilde))
}

/// Positive root of `b1/2 x^2 + a1 x - q = 0`.
pub fn post_clearing_impact(a1: f64, b1: f64, q: f64) -> Result<f64, ImpactError> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(ImpactError::InvalidParameters("q must be positive"));
    }
    if !(a1 >= 0.0) || !a1.is_finite() || !b1.is_finite() {
        return Err(ImpactError::InvalidParameters("a1 must be non-negative and finite"));
    }
    if a1 == 0.0 && b1 <= 0.0 {
        return Err(ImpactError::InvalidParameters("a1 and b1 cannot both vanish"));
    }
    if b1 == 0.0 {
        return Ok(q / a1);
    }
    let disc = a1.mul_add(a1, 2.0 * b1 * q);
    if disc < 0.0 {
        return Err(ImpactError::NoPositiveRoot);
    }
    // Cancellation-free form of (-a1 + sqrt(disc)) / b1.
    Ok(2.0 * q / (a1 + disc.sqrt()))
}

/// Currency value `ω Q_a p_a` of a scaled order.
pub fn cash_volume(omega: f64, auction_volume: u64, auction_price: f64) -> f64 {
    omega * auction_volume as f64 * auction_price
}
