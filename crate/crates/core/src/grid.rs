//! Fixed-point prices and the discrete tick grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::BookError;

/// Number of fixed-point units per currency unit.
pub const PRICE_SCALE: i64 = 100_000_000;
const PRICE_DECIMALS: usize = 8;

/// A currency amount stored as an integer count of 1e-8 units.
///
/// Book arithmetic never touches floating point; `as_f64` is only used when
/// taking logarithms for presentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Price(i64);

impl Price {
    pub const ZERO: Price = Price(0);

    pub const fn from_raw(units: i64) -> Self {
        Price(units)
    }

    pub const fn raw(self) -> i64 {
        self.0
    }

    /// Nearest fixed-point value to `value`. Intended for tests and configs.
    pub fn from_f64(value: f64) -> Self {
        Price((value * PRICE_SCALE as f64).round() as i64)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / PRICE_SCALE as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid price literal `{0}`")]
pub struct ParsePriceError(pub String);

impl FromStr for Price {
    type Err = ParsePriceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParsePriceError(s.to_string());
        let t = s.trim();
        let (negative, digits) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = match digits.split_once('.') {
            Some((i, f)) => (i, f),
            None => (digits, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        // Extra precision is accepted only when it is all zeros.
        let (kept, dropped) = frac_part.split_at(frac_part.len().min(PRICE_DECIMALS));
        if dropped.bytes().any(|b| b != b'0') {
            return Err(bad());
        }
        let whole: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| bad())?
        };
        let mut frac: i64 = if kept.is_empty() {
            0
        } else {
            kept.parse().map_err(|_| bad())?
        };
        for _ in kept.len()..PRICE_DECIMALS {
            frac *= 10;
        }
        let units = whole
            .checked_mul(PRICE_SCALE)
            .and_then(|w| w.checked_add(frac))
            .ok_or_else(bad)?;
        Ok(Price(if negative { -units } else { units }))
    }
}

impl fmt::Display for Price {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / PRICE_SCALE as u64;
        let frac = abs % PRICE_SCALE as u64;
        if frac == 0 {
            return write!(f, "{sign}{whole}");
        }
        let digits = format!("{frac:0width$}", width = PRICE_DECIMALS);
        write!(f, "{sign}{whole}.{}", digits.trim_end_matches('0'))
    }
}

impl Serialize for Price {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Price {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Number(serde_json::Number),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Number(n) => n.to_string().parse().map_err(serde::de::Error::custom),
        }
    }
}

/// The discrete price grid `anchor + k * tick_size` an auction book lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceGrid {
    tick_size: Price,
    anchor: Price,
    reference_price: Price,
}

impl PriceGrid {
    pub fn new(tick_size: Price, anchor: Price, reference_price: Price) -> Result<Self, BookError> {
        if tick_size.raw() <= 0 {
            return Err(BookError::InvalidTickSize(tick_size));
        }
        let grid = PriceGrid {
            tick_size,
            anchor,
            reference_price,
        };
        grid.tick_of(reference_price)?;
        Ok(grid)
    }

    /// Grid anchored at zero.
    pub fn with_tick(tick_size: Price, reference_price: Price) -> Result<Self, BookError> {
        Self::new(tick_size, Price::ZERO, reference_price)
    }

    pub fn tick_size(&self) -> Price {
        self.tick_size
    }

    pub fn anchor(&self) -> Price {
        self.anchor
    }

    pub fn reference_price(&self) -> Price {
        self.reference_price
    }

    pub fn reference_tick(&self) -> i64 {
        (self.reference_price.raw() - self.anchor.raw()) / self.tick_size.raw()
    }

    pub fn with_reference(mut self, reference_price: Price) -> Result<Self, BookError> {
        self.tick_of(reference_price)?;
        self.reference_price = reference_price;
        Ok(self)
    }

    /// Integer tick index of an on-grid price.
    pub fn tick_of(&self, price: Price) -> Result<i64, BookError> {
        let offset = price.raw() - self.anchor.raw();
        if offset % self.tick_size.raw() != 0 {
            return Err(BookError::OffGridPrice(price));
        }
        Ok(offset / self.tick_size.raw())
    }

    pub fn price_of(&self, tick: i64) -> Price {
        Price::from_raw(self.anchor.raw() + tick * self.tick_size.raw())
    }

    pub fn is_on_grid(&self, price: Price) -> bool {
        self.tick_of(price).is_ok()
    }
}
