//! Seeded synthetic auction order flow with prescribed per-tick resting
//! volume at the clearing instant.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Geometric;
use serde::{Deserialize, Serialize};

use crate::book::{AccountType, AuctionBook, LatencyFlag, OrderEvent, OrderType, Side};
use crate::clearing::uncross_book;
use crate::density::BASIS_POINT;
use crate::error::FlowError;
use crate::grid::{Price, PriceGrid};

/// Target profile of the total (buy + sell) resting volume per tick, as a
/// function of the log-distance from the fundamental price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Flat out to the edge of the window.
    Constant,
    /// Flat on `|x| <= delta_star_bp`, then `exp(-decay_per_bp * (|x| - Δ*))`.
    Piecewise { delta_star_bp: f64, decay_per_bp: f64 },
    /// Gaussian bump with different widths below and above the fundamental.
    SkewedBell { width_below_bp: f64, width_above_bp: f64 },
}

impl Shape {
    fn weight(&self, x: f64) -> f64 {
        let bp = x.abs() / BASIS_POINT;
        match *self {
            Shape::Constant => 1.0,
            Shape::Piecewise {
                delta_star_bp,
                decay_per_bp,
            } => {
                if bp <= delta_star_bp {
                    1.0
                } else {
                    (-decay_per_bp * (bp - delta_star_bp)).exp()
                }
            }
            Shape::SkewedBell {
                width_below_bp,
                width_above_bp,
            } => {
                let w = if x < 0.0 { width_below_bp } else { width_above_bp };
                (-0.5 * (bp / w).powi(2)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub seed: u64,
    pub tick_size: Price,
    pub fundamental_price: Price,
    pub start_us: i64,
    pub earliest_clear_us: i64,
    pub latest_clear_us: i64,
    pub shape: Shape,
    /// Half-width of the populated window, in basis points.
    #[serde(default = "default_window_bp")]
    pub window_bp: f64,
    /// Resting volume per tick at the flat part of the shape (buy + sell).
    pub tick_volume: u64,
    /// Extra volume at the fundamental price, as a fraction of all resting limit volume.
    #[serde(default)]
    pub peak_mass: f64,
    /// Scale, in ticks, of the logistic buy share `1 / (1 + exp(k / scale))`.
    #[serde(default = "default_side_scale")]
    pub side_scale_ticks: f64,
    /// Unpriced shares per side, as a fraction of that side's limit volume.
    #[serde(default)]
    pub market_fraction: f64,
    /// Expected number of transient (later cancelled) orders per resting order.
    #[serde(default)]
    pub cancel_rate: f64,
    #[serde(default = "default_order_size")]
    pub mean_order_size: f64,
    /// Weights over HFT, MIX, NON.
    #[serde(default = "default_latency_mix")]
    pub latency_mix: [f64; 3],
    /// Weights over OWN, CLIENT, MARKET_MAKER, PARENT, RMO, RLP.
    #[serde(default = "default_account_mix")]
    pub account_mix: [f64; 6],
}

fn default_window_bp() -> f64 {
    200.0
}
fn default_side_scale() -> f64 {
    2.0
}
fn default_order_size() -> f64 {
    50.0
}
fn default_latency_mix() -> [f64; 3] {
    [0.3, 0.2, 0.5]
}
fn default_account_mix() -> [f64; 6] {
    [0.2, 0.5, 0.2, 0.05, 0.03, 0.02]
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            seed: 1,
            tick_size: Price::from_raw(1_000_000),
            fundamental_price: Price::from_raw(4_800_000_000),
            start_us: 0,
            earliest_clear_us: 300_000_000,
            latest_clear_us: 330_000_000,
            shape: Shape::Piecewise {
                delta_star_bp: 50.0,
                decay_per_bp: 0.02,
            },
            window_bp: default_window_bp(),
            tick_volume: 400,
            peak_mass: 0.1,
            side_scale_ticks: default_side_scale(),
            market_fraction: 0.02,
            cancel_rate: 0.2,
            mean_order_size: default_order_size(),
            latency_mix: default_latency_mix(),
            account_mix: default_account_mix(),
        }
    }
}

/// Parameters the flow was built from, for validating downstream estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub delta_star_bp: Option<f64>,
    /// `V_c / (Q_a θ)` of the flat part, using the replayed auction volume.
    pub l_star: Option<f64>,
    pub peak_mass: f64,
    pub clear_time_us: i64,
}

/// Resting volume per tick at the clearing instant, before any cancellation noise.
#[derive(Debug, Clone, PartialEq)]
pub struct TickPlan {
    /// Tick offset from the fundamental price.
    pub offset: i64,
    pub buy: u64,
    pub sell: u64,
}

fn infeasible(msg: &str) -> FlowError {
    FlowError::InfeasibleConfig(msg.to_string())
}

impl FlowConfig {
    pub fn validate(&self) -> Result<PriceGrid, FlowError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.earliest_clear_us > self.latest_clear_us {
            return Err(infeasible("earliest clear time is after the latest"));
        }
        if self.start_us >= self.earliest_clear_us {
            return Err(infeasible("accumulation must start before the earliest clear time"));
        }
        if !unit(self.peak_mass) || !unit(self.market_fraction) {
            return Err(infeasible("fractions must lie in [0, 1]"));
        }
        if !(self.cancel_rate >= 0.0) || !(self.mean_order_size >= 1.0) || !(self.side_scale_ticks > 0.0) {
            return Err(infeasible("rates must be non-negative and order sizes at least one share"));
        }
        if self.tick_volume == 0 {
            return Err(infeasible("tick volume must be positive"));
        }
        if self.peak_mass >= 1.0 {
            return Err(infeasible("peak mass must leave room for the resting profile"));
        }
        let mixes = self.latency_mix.iter().chain(&self.account_mix);
        if mixes.clone().any(|w| !(*w >= 0.0)) {
            return Err(infeasible("flag weights must be non-negative"));
        }
        if self.latency_mix.iter().sum::<f64>() <= 0.0 || self.account_mix.iter().sum::<f64>() <= 0.0 {
            return Err(infeasible("flag weights must not all be zero"));
        }
        let grid = PriceGrid::with_tick(self.tick_size, self.fundamental_price)
            .map_err(|e| FlowError::InfeasibleConfig(e.to_string()))?;
        if self.fundamental_price.raw() <= 0 {
            return Err(infeasible("fundamental price must be positive"));
        }
        if !(self.window_bp > 0.0) {
            return Err(infeasible("window must be positive"));
        }
        Ok(grid)
    }

    /// Exact per-tick buy / sell volumes the flow leaves in the book.
    pub fn tick_plan(&self) -> Result<Vec<TickPlan>, FlowError> {
        let grid = self.validate()?;
        let f = self.fundamental_price.as_f64();
        let theta = self.tick_size.as_f64();
        let max_x = self.window_bp * BASIS_POINT;
        let mut plan = Vec::new();
        let mut k_lo = 0i64;
        while ((f + (k_lo - 1) as f64 * theta) / f).ln().abs() <= max_x * (1.0 + 1e-12) && f + (k_lo - 1) as f64 * theta > 0.0 {
            k_lo -= 1;
        }
        let mut k_hi = 0i64;
        while ((f + (k_hi + 1) as f64 * theta) / f).ln() <= max_x * (1.0 + 1e-12) {
            k_hi += 1;
        }
        for k in k_lo..=k_hi {
            let price = grid.price_of(grid.reference_tick() + k).as_f64();
            let x = (price / f).ln();
            let total = (self.tick_volume as f64 * self.shape.weight(x)).round() as u64;
            let buy_share = 1.0 / (1.0 + (k as f64 / self.side_scale_ticks).exp());
            let buy = (total as f64 * buy_share).round() as u64;
            plan.push(TickPlan {
                offset: k,
                buy,
                sell: total - buy,
            });
        }
        let resting: u64 = plan.iter().map(|t| t.buy + t.sell).sum();
        let peak = (resting as f64 * self.peak_mass / (1.0 - self.peak_mass)).round() as u64;
        if let Some(t) = plan.iter_mut().find(|t| t.offset == 0) {
            t.buy += peak / 2;
            t.sell += peak - peak / 2;
        }
        if plan.iter().all(|t| t.buy == 0) || plan.iter().all(|t| t.sell == 0) {
            return Err(infeasible("one side of the book would be empty"));
        }
        Ok(plan)
    }
}

struct Planned {
    t_us: i64,
    seq: u64,
    event: OrderEvent,
}

fn split_sizes(rng: &mut ChaCha8Rng, total: u64, mean: f64) -> Vec<u64> {
    let geo = Geometric::new((1.0 / mean).min(1.0)).expect("valid probability");
    let mut out = Vec::new();
    let mut left = total;
    while left > 0 {
        let q = (1 + geo.sample(rng)).min(left);
        out.push(q);
        left -= q;
    }
    out
}

/// Generates one auction: a time-sorted event log ending at the clearing
/// time, and the ground truth it was built from.
pub fn generate(config: &FlowConfig) -> Result<(Vec<OrderEvent>, GroundTruth), FlowError> {
    let grid = config.validate()?;
    let plan = config.tick_plan()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let clear_time = rng.random_range(config.earliest_clear_us..=config.latest_clear_us);
    let latency = WeightedIndex::new(config.latency_mix).map_err(|e| FlowError::InfeasibleConfig(e.to_string()))?;
    let account = WeightedIndex::new(config.account_mix).map_err(|e| FlowError::InfeasibleConfig(e.to_string()))?;
    let mut planned: Vec<Planned> = Vec::new();
    let mut next_id = 0u64;
    let mut seq = 0u64;
    let span = clear_time - config.start_us;
    let mut push = |planned: &mut Vec<Planned>, t_us: i64, event: OrderEvent| {
        planned.push(Planned { t_us, seq, event });
        seq += 1;
    };
    let mut submit = |rng: &mut ChaCha8Rng, side: Side, price: Option<Price>, qty: u64, transient: bool| {
        let id = format!("o{next_id}");
        next_id += 1;
        let t0 = config.start_us + rng.random_range(0..span);
        let order_type = if price.is_some() { OrderType::Limit } else { OrderType::Market };
        let mut ev = OrderEvent::submit(t0, &id, side, order_type, price, qty);
        ev.latency = LatencyFlag::ALL[latency.sample(rng)];
        ev.account = AccountType::ALL[account.sample(rng)];
        let cancel = transient.then(|| {
            let t1 = rng.random_range(t0..clear_time);
            let mut c = OrderEvent::cancel(t1, &id, side);
            c.latency = ev.latency;
            c.account = ev.account;
            (t1, c)
        });
        (t0, ev, cancel)
    };
    for tick in &plan {
        let price = grid.price_of(grid.reference_tick() + tick.offset);
        for (side, volume) in [(Side::Buy, tick.buy), (Side::Sell, tick.sell)] {
            for q in split_sizes(&mut rng, volume, config.mean_order_size) {
                let (t0, ev, _) = submit(&mut rng, side, Some(price), q, false);
                push(&mut planned, t0, ev);
                let transients = sample_count(&mut rng, config.cancel_rate);
                for _ in 0..transients {
                    let size = split_sizes(&mut rng, q, config.mean_order_size)[0];
                    let (t0, ev, cancel) = submit(&mut rng, side, Some(price), size, true);
                    push(&mut planned, t0, ev);
                    if let Some((t1, c)) = cancel {
                        push(&mut planned, t1, c);
                    }
                }
            }
        }
    }
    for side in [Side::Buy, Side::Sell] {
        let limit: u64 = plan.iter().map(|t| if side == Side::Buy { t.buy } else { t.sell }).sum();
        let market = (limit as f64 * config.market_fraction).round() as u64;
        for q in split_sizes(&mut rng, market, config.mean_order_size) {
            let (t0, ev, _) = submit(&mut rng, side, None, q, false);
            push(&mut planned, t0, ev);
        }
    }
    planned.sort_by_key(|p| (p.t_us, p.seq));
    let events: Vec<OrderEvent> = planned.into_iter().map(|p| p.event).collect();

    let book = AuctionBook::replay(grid, &events).map_err(|e| FlowError::InfeasibleConfig(e.to_string()))?;
    let cleared = uncross_book(&book).map_err(|_| infeasible("generated book does not cross"))?;
    let (delta_star_bp, flat) = match config.shape {
        Shape::Constant => (Some(config.window_bp), true),
        Shape::Piecewise { delta_star_bp, .. } => (Some(delta_star_bp), true),
        Shape::SkewedBell { .. } => (None, false),
    };
    let l_star = flat.then(|| config.tick_volume as f64 / (cleared.volume as f64 * config.tick_size.as_f64()));
    Ok((
        events,
        GroundTruth {
            delta_star_bp,
            l_star,
            peak_mass: config.peak_mass,
            clear_time_us: clear_time,
        },
    ))
}

/// Integer part of `rate` plus a Bernoulli draw for the fraction.
fn sample_count(rng: &mut ChaCha8Rng, rate: f64) -> u64 {
    let whole = rate.floor();
    whole as u64 + u64::from(rng.random::<f64>() < rate - whole)
}

/// Copy of `config` for day `day` of a corpus: seed offset by the day index.
pub fn day_config(config: &FlowConfig, day: u64) -> FlowConfig {
    FlowConfig {
        seed: config.seed.wrapping_add(day),
        ..config.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clearing::clear;

    fn constant() -> FlowConfig {
        FlowConfig {
            shape: Shape::Constant,
            window_bp: 100.0,
            cancel_rate: 0.0,
            ..FlowConfig::default()
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let a = generate(&FlowConfig::default()).unwrap();
        let b = generate(&FlowConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = generate(&day_config(&FlowConfig::default(), 1)).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn constant_shape_gives_flat_totals() {
        let cfg = constant();
        let (events, truth) = generate(&cfg).unwrap();
        let grid = cfg.validate().unwrap();
        let book = AuctionBook::replay(grid, &events).unwrap();
        let f = grid.reference_tick();
        for (tick, level) in book.levels() {
            if tick != f {
                assert_eq!(level.total(), cfg.tick_volume, "tick {tick}");
            }
        }
        assert!(events.iter().all(|e| e.timestamp_us <= truth.clear_time_us));
        assert!((cfg.earliest_clear_us..=cfg.latest_clear_us).contains(&truth.clear_time_us));
        let c = clear(&book).unwrap();
        let expected = cfg.tick_volume as f64 / (c.volume as f64 * 0.01);
        assert!((truth.l_star.unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn cancellations_leave_the_plan_intact() {
        let cfg = FlowConfig {
            cancel_rate: 1.5,
            ..constant()
        };
        let (events, _) = generate(&cfg).unwrap();
        let grid = cfg.validate().unwrap();
        let book = AuctionBook::replay(grid, &events).unwrap();
        for t in cfg.tick_plan().unwrap() {
            let tick = grid.reference_tick() + t.offset;
            assert_eq!(book.volume_at_tick(Side::Buy, tick), t.buy);
            assert_eq!(book.volume_at_tick(Side::Sell, tick), t.sell);
        }
    }

    #[test]
    fn infeasible_configs() {
        let bad = [
            FlowConfig {
                earliest_clear_us: 10,
                latest_clear_us: 5,
                ..FlowConfig::default()
            },
            FlowConfig {
                peak_mass: 1.5,
                ..FlowConfig::default()
            },
            FlowConfig {
                tick_volume: 0,
                ..FlowConfig::default()
            },
            FlowConfig {
                fundamental_price: Price::from_raw(4_800_500_000),
                ..FlowConfig::default()
            },
        ];
        for cfg in bad {
            assert!(matches!(generate(&cfg), Err(FlowError::InfeasibleConfig(_))), "{cfg:?}");
        }
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = FlowConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"kind\":\"piecewise\""));
        let back: FlowConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}
