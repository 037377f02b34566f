//! One-lag and mechanical response of the indicative price to marketable
//! submissions and cancellations during the accumulation period.

use serde::Serialize;

use crate::book::{Action, AuctionBook, OrderEvent, Placement, Side};
use crate::clearing::{check_sorted, uncross_book};
use crate::error::BookError;
use crate::grid::{Price, PriceGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EventKind {
    Submit,
    Cancel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarketableEvent {
    /// Position of the event in the input log.
    pub event_index: usize,
    pub t_us: i64,
    pub kind: EventKind,
    pub side: Side,
    /// +1 pushes the price up (buy submit, sell cancel), -1 down.
    pub epsilon: i8,
    pub size: u64,
    pub q_ind: u64,
    /// `size / Q_ind` at arrival.
    pub omega: f64,
    pub p_before: Price,
    /// Indicative price right after the event.
    pub p_after: Price,
    /// Indicative price just before the next marketable event, or the final
    /// clearing price for the last one.
    pub p_next: Option<Price>,
}

impl MarketableEvent {
    pub fn mechanical(&self) -> f64 {
        self.epsilon as f64 * (self.p_after.as_f64() - self.p_before.as_f64())
    }

    pub fn one_lag(&self) -> Option<f64> {
        self.p_next
            .map(|p| self.epsilon as f64 * (p.as_f64() - self.p_before.as_f64()))
    }
}

fn crosses(side: Side, tick: i64, indicative_tick: i64) -> bool {
    match side {
        Side::Buy => tick >= indicative_tick,
        Side::Sell => tick <= indicative_tick,
    }
}

/// Whether `ev` is a marketable order (or a cancellation of one) relative to
/// the indicative price of `book`, the state just before the event. Returns
/// the sign `ε` and the size.
pub fn classify_marketable(ev: &OrderEvent, book: &AuctionBook, indicative: Price) -> Option<(EventKind, i8, u64)> {
    let ind_tick = book.grid().tick_of(indicative).ok()?;
    match ev.action {
        Action::Submit => {
            let marketable = match book.placement_for(ev.order_type, ev.price).ok()? {
                Placement::Market => true,
                Placement::Limit(t) => crosses(ev.side, t, ind_tick),
                Placement::Inert(_) => false,
            };
            marketable.then_some((EventKind::Submit, ev.side.sign() as i8, ev.quantity))
        }
        Action::Cancel => {
            let order = book.order(&ev.order_id)?;
            let marketable = match order.placement {
                Placement::Market => true,
                Placement::Limit(t) => crosses(order.side, t, ind_tick),
                Placement::Inert(_) => false,
            };
            marketable.then_some((EventKind::Cancel, -(order.side.sign() as i8), order.quantity))
        }
        Action::Modify => None,
    }
}

/// Log-spaced `ω` bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogBins {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Default for LogBins {
    fn default() -> Self {
        LogBins {
            lo: 1e-5,
            hi: 1.0,
            count: 30,
        }
    }
}

impl LogBins {
    pub fn edges(&self) -> Vec<f64> {
        let ratio = (self.hi / self.lo).ln();
        (0..=self.count)
            .map(|j| {
                if j == self.count {
                    self.hi
                } else {
                    self.lo * (ratio * j as f64 / self.count as f64).exp()
                }
            })
            .collect()
    }

    /// Bin of `omega`: half-open `[e_j, e_j+1)`, the last bin closed.
    pub fn index(&self, edges: &[f64], omega: f64) -> Option<usize> {
        if !(omega >= self.lo && omega <= self.hi) {
            return None;
        }
        Some(edges.partition_point(|e| *e <= omega).saturating_sub(1).min(self.count - 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseParams {
    pub warmup_us: i64,
    /// Start of the accumulation period; defaults to the first event.
    pub start_us: Option<i64>,
    pub bins: LogBins,
    pub with_cancels: bool,
}

impl Default for ResponseParams {
    fn default() -> Self {
        ResponseParams {
            warmup_us: 30_000_000,
            start_us: None,
            bins: LogBins::default(),
            with_cancels: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Diagnostics {
    pub events: usize,
    pub marketable: usize,
    pub in_warmup: usize,
    /// Marketable events arriving while the book did not cross.
    pub no_cross: usize,
    pub out_of_range: usize,
    pub no_next_price: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponseBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub r1: Option<f64>,
    pub rm: Option<f64>,
    pub r1_se: Option<f64>,
    pub rm_se: Option<f64>,
    /// Standard error of the paired difference `R1 - RM`.
    pub diff_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponseCurve {
    pub bins: Vec<ResponseBin>,
    pub diagnostics: Diagnostics,
}

/// Mean and standard error of the mean; the error needs two values.
pub fn mean_se(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

/// Replays the log and records every marketable event after the warm-up.
pub fn marketable_events(
    grid: PriceGrid,
    events: &[OrderEvent],
    params: &ResponseParams,
) -> Result<(Vec<MarketableEvent>, Diagnostics), BookError> {
    check_sorted(events)?;
    let mut diag = Diagnostics {
        events: events.len(),
        ..Diagnostics::default()
    };
    let Some(first) = events.first() else {
        return Ok((Vec::new(), diag));
    };
    let warm_end = params.start_us.unwrap_or(first.timestamp_us) + params.warmup_us;
    let mut book = AuctionBook::new(grid);
    let mut indicative = uncross_book(&book).ok();
    let mut out: Vec<MarketableEvent> = Vec::new();
    // Index in `out` of the previous marketable event, if recorded.
    let mut pending: Option<usize> = None;
    for (i, ev) in events.iter().enumerate() {
        let class = indicative.and_then(|u| {
            if ev.action == Action::Cancel && !params.with_cancels {
                return None;
            }
            classify_marketable(ev, &book, u.price).map(|c| (c, u))
        });
        let unpriced_marketable = indicative.is_none()
            && ev.action == Action::Submit
            && matches!(book.placement_for(ev.order_type, ev.price), Ok(Placement::Market));
        if unpriced_marketable {
            diag.no_cross += 1;
        }
        book.apply(ev)?;
        let after = uncross_book(&book).ok();
        if let Some(((kind, epsilon, size), before)) = class {
            diag.marketable += 1;
            if let Some(j) = pending.take() {
                out[j].p_next = Some(before.price);
            }
            if ev.timestamp_us < warm_end {
                diag.in_warmup += 1;
            } else if let Some(after) = after {
                out.push(MarketableEvent {
                    event_index: i,
                    t_us: ev.timestamp_us,
                    kind,
                    side: ev.side,
                    epsilon,
                    size,
                    q_ind: before.volume,
                    omega: size as f64 / before.volume as f64,
                    p_before: before.price,
                    p_after: after.price,
                    p_next: None,
                });
                pending = Some(out.len() - 1);
            } else {
                diag.no_cross += 1;
            }
        }
        indicative = after;
    }
    if let Some(j) = pending {
        out[j].p_next = indicative.map(|u| u.price);
    }
    diag.no_next_price = out.iter().filter(|e| e.p_next.is_none()).count();
    Ok((out, diag))
}

/// Bins marketable events by `ω` and averages both responses per bin.
pub fn aggregate(events: &[MarketableEvent], bins: &LogBins, mut diag: Diagnostics) -> ResponseCurve {
    let edges = bins.edges();
    let mut r1: Vec<Vec<f64>> = vec![Vec::new(); bins.count];
    let mut rm: Vec<Vec<f64>> = vec![Vec::new(); bins.count];
    let mut diff: Vec<Vec<f64>> = vec![Vec::new(); bins.count];
    for e in events {
        let Some(one_lag) = e.one_lag() else {
            continue;
        };
        let Some(b) = bins.index(&edges, e.omega) else {
            diag.out_of_range += 1;
            continue;
        };
        r1[b].push(one_lag);
        rm[b].push(e.mechanical());
        diff[b].push(one_lag - e.mechanical());
    }
    let bins = (0..bins.count)
        .map(|b| {
            let (r1_mean, r1_se) = mean_se(&r1[b]);
            let (rm_mean, rm_se) = mean_se(&rm[b]);
            ResponseBin {
                lo: edges[b],
                hi: edges[b + 1],
                count: r1[b].len(),
                r1: r1_mean,
                rm: rm_mean,
                r1_se,
                rm_se,
                diff_se: mean_se(&diff[b]).1,
            }
        })
        .collect();
    ResponseCurve { bins, diagnostics: diag }
}

/// `R1(ω)` and `RM(ω)` from one auction log.
pub fn response_curves(
    grid: PriceGrid,
    events: &[OrderEvent],
    params: &ResponseParams,
) -> Result<ResponseCurve, BookError> {
    let (marketable, diag) = marketable_events(grid, events, params)?;
    Ok(aggregate(&marketable, &params.bins, diag))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ResponseCurve {
    /// CSV `bin_lo,bin_hi,r1,rm,count,r1_se,rm_se`; empty bins leave the
    /// response columns blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,r1,rm,count,r1_se,rm_se\n");
        for b in &self.bins {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                b.lo,
                b.hi,
                opt(b.r1),
                opt(b.rm),
                b.count,
                opt(b.r1_se),
                opt(b.rm_se)
            ));
        }
        out
    }
}
