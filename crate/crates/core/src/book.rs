//! Auction order book reconstructed by replaying submit / modify / cancel
//! events on a discrete price grid.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::BookError;
use crate::grid::{Price, PriceGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "B")]
    Buy,
    #[serde(rename = "S")]
    Sell,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    /// +1 for buy, -1 for sell.
    pub fn sign(self) -> i64 {
        match self {
            Side::Buy => 1,
            Side::Sell => -1,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            Side::Buy => "B",
            Side::Sell => "S",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    Submit,
    Modify,
    Cancel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OrderType {
    Limit,
    Market,
    ValidForAuction,
    ValidForClosing,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LatencyFlag {
    Hft,
    Mix,
    Non,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AccountType {
    Own,
    Client,
    MarketMaker,
    Parent,
    Rmo,
    Rlp,
}

macro_rules! csv_enum {
    ($ty:ty, $what:literal, [$(($variant:path, $code:literal)),+ $(,)?]) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($variant),+];

            pub fn code(self) -> &'static str {
                match self {
                    $($variant => $code),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.code())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($code => Ok($variant),)+
                    other => Err(format!(
                        "unknown {} `{}` (expected one of: {})",
                        $what,
                        other,
                        [$($code),+].join(", ")
                    )),
                }
            }
        }
    };
}

csv_enum!(Action, "action", [(Action::Submit, "SUBMIT"), (Action::Modify, "MODIFY"), (Action::Cancel, "CANCEL")]);
csv_enum!(
    OrderType,
    "order type",
    [
        (OrderType::Limit, "LIMIT"),
        (OrderType::Market, "MARKET"),
        (OrderType::ValidForAuction, "VALID_FOR_AUCTION"),
        (OrderType::ValidForClosing, "VALID_FOR_CLOSING"),
        (OrderType::Stop, "STOP"),
    ]
);
csv_enum!(LatencyFlag, "latency flag", [(LatencyFlag::Hft, "HFT"), (LatencyFlag::Mix, "MIX"), (LatencyFlag::Non, "NON")]);
csv_enum!(
    AccountType,
    "account type",
    [
        (AccountType::Own, "OWN"),
        (AccountType::Client, "CLIENT"),
        (AccountType::MarketMaker, "MARKET_MAKER"),
        (AccountType::Parent, "PARENT"),
        (AccountType::Rmo, "RMO"),
        (AccountType::Rlp, "RLP"),
    ]
);

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "B" => Ok(Side::Buy),
            "S" => Ok(Side::Sell),
            other => Err(format!("unknown side `{other}` (expected one of: B, S)")),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrderId(pub String);

impl fmt::Display for OrderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for OrderId {
    fn from(s: &str) -> Self {
        OrderId(s.to_string())
    }
}

/// One row of the order log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderEvent {
    pub timestamp_us: i64,
    pub order_id: OrderId,
    pub action: Action,
    pub side: Side,
    pub order_type: OrderType,
    pub price: Option<Price>,
    pub quantity: u64,
    pub latency: LatencyFlag,
    pub account: AccountType,
}

impl OrderEvent {
    /// Convenience constructor for a submission; flags default to NON / CLIENT.
    pub fn submit(
        timestamp_us: i64,
        order_id: &str,
        side: Side,
        order_type: OrderType,
        price: Option<Price>,
        quantity: u64,
    ) -> Self {
        OrderEvent {
            timestamp_us,
            order_id: order_id.into(),
            action: Action::Submit,
            side,
            order_type,
            price,
            quantity,
            latency: LatencyFlag::Non,
            account: AccountType::Client,
        }
    }

    pub fn limit(timestamp_us: i64, order_id: &str, side: Side, price: Price, quantity: u64) -> Self {
        Self::submit(timestamp_us, order_id, side, OrderType::Limit, Some(price), quantity)
    }

    pub fn market(timestamp_us: i64, order_id: &str, side: Side, quantity: u64) -> Self {
        Self::submit(timestamp_us, order_id, side, OrderType::Market, None, quantity)
    }

    pub fn cancel(timestamp_us: i64, order_id: &str, side: Side) -> Self {
        OrderEvent {
            action: Action::Cancel,
            quantity: 0,
            ..Self::submit(timestamp_us, order_id, side, OrderType::Limit, None, 0)
        }
    }

    pub fn modify(
        timestamp_us: i64,
        order_id: &str,
        side: Side,
        order_type: OrderType,
        price: Option<Price>,
        quantity: u64,
    ) -> Self {
        OrderEvent {
            action: Action::Modify,
            ..Self::submit(timestamp_us, order_id, side, order_type, price, quantity)
        }
    }
}

/// Where a live order's volume sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placement {
    /// Priced order resting at a tick.
    Limit(i64),
    /// Unpriced order, counted at every price.
    Market,
    /// Stop order awaiting activation; contributes no volume.
    Inert(Option<i64>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestingOrder {
    pub id: OrderId,
    pub side: Side,
    pub order_type: OrderType,
    pub placement: Placement,
    pub quantity: u64,
    /// Timestamp of the event that last set time priority.
    pub priority_ts: i64,
    /// Arrival sequence number; breaks exact timestamp ties.
    pub seq: u64,
    pub latency: LatencyFlag,
    pub account: AccountType,
}

impl RestingOrder {
    pub fn tick(&self) -> Option<i64> {
        match self.placement {
            Placement::Limit(t) => Some(t),
            _ => None,
        }
    }

    /// Time-priority key: earlier first, then arrival sequence.
    pub fn priority(&self) -> (i64, u64) {
        (self.priority_ts, self.seq)
    }
}

/// Aggregated resting limit volume at one tick.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Level {
    pub buy: u64,
    pub sell: u64,
}

impl Level {
    pub fn get(&self, side: Side) -> u64 {
        match side {
            Side::Buy => self.buy,
            Side::Sell => self.sell,
        }
    }

    fn get_mut(&mut self, side: Side) -> &mut u64 {
        match side {
            Side::Buy => &mut self.buy,
            Side::Sell => &mut self.sell,
        }
    }

    pub fn total(&self) -> u64 {
        self.buy + self.sell
    }

    pub fn is_empty(&self) -> bool {
        self.buy == 0 && self.sell == 0
    }
}

/// Per-tick buy/sell volumes plus unpriced market totals.
#[derive(Debug, Clone)]
pub struct AuctionBook {
    grid: PriceGrid,
    levels: BTreeMap<i64, Level>,
    buy_market: u64,
    sell_market: u64,
    buy_limit_total: u64,
    sell_limit_total: u64,
    orders: HashMap<OrderId, RestingOrder>,
    next_seq: u64,
}

impl AuctionBook {
    pub fn new(grid: PriceGrid) -> Self {
        AuctionBook {
            grid,
            levels: BTreeMap::new(),
            buy_market: 0,
            sell_market: 0,
            buy_limit_total: 0,
            sell_limit_total: 0,
            orders: HashMap::new(),
            next_seq: 0,
        }
    }

    /// Replays `events` in order into a fresh book.
    pub fn replay<'a, I>(grid: PriceGrid, events: I) -> Result<Self, BookError>
    where
        I: IntoIterator<Item = &'a OrderEvent>,
    {
        let mut book = AuctionBook::new(grid);
        for ev in events {
            book.apply(ev)?;
        }
        Ok(book)
    }

    pub fn grid(&self) -> &PriceGrid {
        &self.grid
    }

    /// Applies one event. On error the book is left unchanged.
    pub fn apply(&mut self, ev: &OrderEvent) -> Result<(), BookError> {
        match ev.action {
            Action::Submit => {
                if self.orders.contains_key(&ev.order_id) {
                    return Err(BookError::DuplicateOrderId(ev.order_id.clone()));
                }
                let placement = self.placement_for(ev.order_type, ev.price)?;
                if ev.quantity == 0 {
                    return Err(BookError::NonPositiveQuantity);
                }
                let seq = self.bump_seq();
                let order = RestingOrder {
                    id: ev.order_id.clone(),
                    side: ev.side,
                    order_type: ev.order_type,
                    placement,
                    quantity: ev.quantity,
                    priority_ts: ev.timestamp_us,
                    seq,
                    latency: ev.latency,
                    account: ev.account,
                };
                self.add_volume(order.side, order.placement, order.quantity);
                self.orders.insert(order.id.clone(), order);
            }
            Action::Cancel => {
                let order = self
                    .orders
                    .remove(&ev.order_id)
                    .ok_or_else(|| BookError::UnknownOrderId(ev.order_id.clone()))?;
                self.remove_volume(order.side, order.placement, order.quantity);
            }
            Action::Modify => {
                let old = self
                    .orders
                    .get(&ev.order_id)
                    .ok_or_else(|| BookError::UnknownOrderId(ev.order_id.clone()))?
                    .clone();
                let placement = self.placement_for(ev.order_type, ev.price)?;
                if ev.quantity == 0 {
                    return Err(BookError::NonPositiveQuantity);
                }
                let keeps_priority = placement == old.placement
                    && ev.order_type == old.order_type
                    && ev.quantity <= old.quantity;
                let (priority_ts, seq) = if keeps_priority {
                    old.priority()
                } else {
                    (ev.timestamp_us, self.bump_seq())
                };
                self.remove_volume(old.side, old.placement, old.quantity);
                self.add_volume(old.side, placement, ev.quantity);
                let order = self.orders.get_mut(&ev.order_id).expect("checked above");
                order.order_type = ev.order_type;
                order.placement = placement;
                order.quantity = ev.quantity;
                order.priority_ts = priority_ts;
                order.seq = seq;
            }
        }
        Ok(())
    }

    fn bump_seq(&mut self) -> u64 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    /// Where an order of this type and price would rest.
    pub fn placement_for(&self, order_type: OrderType, price: Option<Price>) -> Result<Placement, BookError> {
        let tick = price.map(|p| self.grid.tick_of(p)).transpose()?;
        match order_type {
            OrderType::Market => match price {
                Some(p) => Err(BookError::UnexpectedPrice(p)),
                None => Ok(Placement::Market),
            },
            OrderType::Limit => tick.map(Placement::Limit).ok_or(BookError::MissingPrice),
            // Auction-only orders may be priced or unpriced.
            OrderType::ValidForAuction | OrderType::ValidForClosing => {
                Ok(tick.map_or(Placement::Market, Placement::Limit))
            }
            OrderType::Stop => Ok(Placement::Inert(tick)),
        }
    }

    fn add_volume(&mut self, side: Side, placement: Placement, qty: u64) {
        match placement {
            Placement::Limit(tick) => {
                *self.levels.entry(tick).or_default().get_mut(side) += qty;
                *self.limit_total_mut(side) += qty;
            }
            Placement::Market => *self.market_mut(side) += qty,
            Placement::Inert(_) => {}
        }
    }

    fn remove_volume(&mut self, side: Side, placement: Placement, qty: u64) {
        match placement {
            Placement::Limit(tick) => {
                let level = self.levels.get_mut(&tick).expect("registry and levels agree");
                *level.get_mut(side) -= qty;
                if level.is_empty() {
                    self.levels.remove(&tick);
                }
                *self.limit_total_mut(side) -= qty;
            }
            Placement::Market => *self.market_mut(side) -= qty,
            Placement::Inert(_) => {}
        }
    }

    fn market_mut(&mut self, side: Side) -> &mut u64 {
        match side {
            Side::Buy => &mut self.buy_market,
            Side::Sell => &mut self.sell_market,
        }
    }

    fn limit_total_mut(&mut self, side: Side) -> &mut u64 {
        match side {
            Side::Buy => &mut self.buy_limit_total,
            Side::Sell => &mut self.sell_limit_total,
        }
    }

    pub fn market_total(&self, side: Side) -> u64 {
        match side {
            Side::Buy => self.buy_market,
            Side::Sell => self.sell_market,
        }
    }

    pub fn limit_total(&self, side: Side) -> u64 {
        match side {
            Side::Buy => self.buy_limit_total,
            Side::Sell => self.sell_limit_total,
        }
    }

    /// Resting limit volume on `side` at `tick`.
    pub fn volume_at_tick(&self, side: Side, tick: i64) -> u64 {
        self.levels.get(&tick).map_or(0, |l| l.get(side))
    }

    pub fn volume_at(&self, side: Side, price: Price) -> Result<u64, BookError> {
        Ok(self.volume_at_tick(side, self.grid.tick_of(price)?))
    }

    pub fn level(&self, tick: i64) -> Level {
        self.levels.get(&tick).copied().unwrap_or_default()
    }

    /// Non-empty ticks (buy + sell > 0) in ascending price order.
    pub fn levels(&self) -> impl DoubleEndedIterator<Item = (i64, Level)> + '_ {
        self.levels.iter().map(|(t, l)| (*t, *l))
    }

    pub fn levels_above(&self, tick: i64) -> impl Iterator<Item = (i64, Level)> + '_ {
        self.levels
            .range(tick + 1..)
            .map(|(t, l)| (*t, *l))
    }

    pub fn levels_below(&self, tick: i64) -> impl Iterator<Item = (i64, Level)> + '_ {
        self.levels.range(..tick).rev().map(|(t, l)| (*t, *l))
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// `S(p)`: sell market total plus sell limit volume at or below `p`.
    pub fn supply(&self, price: Price) -> Result<u64, BookError> {
        let tick = self.grid.tick_of(price)?;
        Ok(self.supply_at_tick(tick))
    }

    /// `D(p)`: buy market total plus buy limit volume at or above `p`.
    pub fn demand(&self, price: Price) -> Result<u64, BookError> {
        let tick = self.grid.tick_of(price)?;
        Ok(self.demand_at_tick(tick))
    }

    pub fn supply_at_tick(&self, tick: i64) -> u64 {
        self.sell_market + self.levels.range(..=tick).map(|(_, l)| l.sell).sum::<u64>()
    }

    pub fn demand_at_tick(&self, tick: i64) -> u64 {
        self.buy_market + self.levels.range(tick..).map(|(_, l)| l.buy).sum::<u64>()
    }

    pub fn order(&self, id: &OrderId) -> Option<&RestingOrder> {
        self.orders.get(id)
    }

    pub fn orders(&self) -> impl Iterator<Item = &RestingOrder> {
        self.orders.values()
    }

    pub fn live_order_count(&self) -> usize {
        self.orders.len()
    }

    /// Live orders sorted by time priority.
    pub fn orders_by_priority(&self) -> Vec<&RestingOrder> {
        let mut v: Vec<_> = self.orders.values().collect();
        v.sort_by_key(|o| o.priority());
        v
    }

    /// Aggregated snapshot used by the clearing and impact code.
    pub fn ladder(&self) -> Ladder {
        Ladder {
            grid: self.grid,
            levels: self.levels.iter().map(|(t, l)| (*t, *l)).collect(),
            buy_market: self.buy_market,
            sell_market: self.sell_market,
        }
    }
}

/// Immutable aggregated view of a book: sorted non-empty levels plus market
/// totals. Cheap to clone and perturb for what-if clearing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ladder {
    pub grid: PriceGrid,
    /// Ascending by tick; entries may be empty only when built by hand.
    pub levels: Vec<(i64, Level)>,
    pub buy_market: u64,
    pub sell_market: u64,
}

impl Ladder {
    pub fn market_total(&self, side: Side) -> u64 {
        match side {
            Side::Buy => self.buy_market,
            Side::Sell => self.sell_market,
        }
    }

    pub fn market_total_mut(&mut self, side: Side) -> &mut u64 {
        match side {
            Side::Buy => &mut self.buy_market,
            Side::Sell => &mut self.sell_market,
        }
    }

    pub fn level(&self, tick: i64) -> Level {
        self.levels
            .binary_search_by_key(&tick, |(t, _)| *t)
            .map(|i| self.levels[i].1)
            .unwrap_or_default()
    }

    /// Adds a priced order of `qty` shares at `tick`.
    pub fn add_limit(&mut self, side: Side, tick: i64, qty: u64) {
        match self.levels.binary_search_by_key(&tick, |(t, _)| *t) {
            Ok(i) => *self.levels[i].1.get_mut(side) += qty,
            Err(i) => {
                let mut level = Level::default();
                *level.get_mut(side) = qty;
                self.levels.insert(i, (tick, level));
            }
        }
    }

    /// Removes up to `qty` shares of `side` at `tick`, dropping emptied levels.
    pub fn remove_limit(&mut self, side: Side, tick: i64, qty: u64) {
        if let Ok(i) = self.levels.binary_search_by_key(&tick, |(t, _)| *t) {
            let v = self.levels[i].1.get_mut(side);
            *v = v.saturating_sub(qty);
            if self.levels[i].1.is_empty() {
                self.levels.remove(i);
            }
        }
    }

    pub fn total_limit(&self, side: Side) -> u64 {
        self.levels.iter().map(|(_, l)| l.get(side)).sum()
    }
}
