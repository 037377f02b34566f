use auction_core::book::{Action, Placement, Side};
use auction_core::clearing::{clear, uncross_book};
use auction_core::flowgen::{generate, FlowConfig, Shape};
use auction_core::impact::{impact_curve, ScaledVolume};
use auction_core::response::{marketable_events, EventKind, ResponseParams};
use auction_core::{AuctionBook, OrderEvent, PriceGrid};
use proptest::prelude::*;

fn flow(seed: u64) -> (PriceGrid, Vec<OrderEvent>) {
    let config = FlowConfig {
        seed,
        shape: Shape::Piecewise {
            delta_star_bp: 30.0,
            decay_per_bp: 0.05,
        },
        window_bp: 80.0,
        tick_volume: 120,
        market_fraction: 0.05,
        cancel_rate: 0.4,
        mean_order_size: 15.0,
        ..FlowConfig::default()
    };
    let grid = config.validate().unwrap();
    (grid, generate(&config).unwrap().0)
}

fn params() -> ResponseParams {
    ResponseParams {
        warmup_us: 0,
        with_cancels: true,
        ..ResponseParams::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Every recorded event agrees with an independent replay: prices on both
    /// sides of the event, size, `ω` and the sign convention.
    #[test]
    fn events_match_incremental_replay(seed in 0u64..10_000) {
        let (grid, events) = flow(seed);
        let (recorded, diag) = marketable_events(grid, &events, &params()).unwrap();
        prop_assert!(!recorded.is_empty());
        prop_assert_eq!(diag.marketable, recorded.len() + diag.in_warmup + diag.no_cross - unpriced_no_cross(grid, &events));
        let mut book = AuctionBook::new(grid);
        let mut next = 0;
        for ev in &recorded {
            while next < ev.event_index {
                book.apply(&events[next]).unwrap();
                next += 1;
            }
            let before = uncross_book(&book).unwrap();
            let raw = &events[ev.event_index];
            let (side, size) = match raw.action {
                Action::Cancel => {
                    let o = book.order(&raw.order_id).unwrap();
                    (o.side, o.quantity)
                }
                _ => (raw.side, raw.quantity),
            };
            let expected_eps = match (ev.kind, side) {
                (EventKind::Submit, Side::Buy) | (EventKind::Cancel, Side::Sell) => 1,
                _ => -1,
            };
            prop_assert_eq!(ev.epsilon, expected_eps);
            prop_assert_eq!(ev.kind == EventKind::Cancel, raw.action == Action::Cancel);
            prop_assert_eq!(ev.size, size);
            prop_assert_eq!(ev.p_before, before.price);
            prop_assert_eq!(ev.q_ind, before.volume);
            prop_assert_eq!(ev.omega, size as f64 / before.volume as f64);
            book.apply(raw).unwrap();
            next += 1;
            prop_assert_eq!(ev.p_after, uncross_book(&book).unwrap().price);
        }
    }

    /// Unpriced submissions move the indicative price exactly as the
    /// pre-event impact curve says: not at all below `ω^(0)`, and to the
    /// step price strictly inside later steps.
    #[test]
    fn unpriced_submissions_follow_the_impact_curve(seed in 0u64..10_000) {
        let (grid, events) = flow(seed);
        let (recorded, _) = marketable_events(grid, &events, &params()).unwrap();
        let mut book = AuctionBook::new(grid);
        let mut next = 0;
        let mut checked = 0;
        for ev in &recorded {
            while next < ev.event_index {
                book.apply(&events[next]).unwrap();
                next += 1;
            }
            let raw = &events[ev.event_index];
            let unpriced = raw.action == Action::Submit
                && book.placement_for(raw.order_type, raw.price).unwrap() == Placement::Market;
            if unpriced {
                let c = clear(&book).unwrap();
                let curve = impact_curve(&book, &c, raw.side, 1.0).unwrap();
                let w = ScaledVolume::new(raw.quantity, c.volume);
                let on_boundary = curve.breakpoints.iter().any(|b| b.omega.num == raw.quantity);
                if raw.quantity < curve.omega0.num {
                    prop_assert_eq!(ev.p_after, ev.p_before);
                    prop_assert_eq!(ev.mechanical(), 0.0);
                } else if !on_boundary && raw.quantity < curve.omega_end.num {
                    prop_assert_eq!(ev.p_after, curve.price_at(w).unwrap());
                }
                prop_assert!(ev.mechanical() >= 0.0);
                checked += 1;
            }
            book.apply(raw).unwrap();
            next += 1;
        }
        prop_assert!(checked > 0);
    }
}

/// Unpriced submissions that arrive while the book does not cross are counted
/// under `no_cross` without being marketable events.
fn unpriced_no_cross(grid: PriceGrid, events: &[OrderEvent]) -> usize {
    let mut book = AuctionBook::new(grid);
    let mut n = 0;
    for ev in events {
        if uncross_book(&book).is_err()
            && ev.action == Action::Submit
            && book.placement_for(ev.order_type, ev.price).unwrap() == Placement::Market
        {
            n += 1;
        }
        book.apply(ev).unwrap();
    }
    n
}

#[test]
fn cancelling_a_resting_buy_is_a_down_move() {
    let grid = PriceGrid::with_tick(auction_core::Price::from_f64(0.01), auction_core::Price::from_f64(10.0)).unwrap();
    let p = auction_core::Price::from_f64;
    let events = [
        OrderEvent::limit(1, "s1", Side::Sell, p(10.00), 10),
        OrderEvent::limit(2, "s2", Side::Sell, p(10.01), 10),
        OrderEvent::limit(3, "b1", Side::Buy, p(10.01), 10),
        OrderEvent::market(4, "b2", Side::Buy, 5),
        OrderEvent::cancel(5, "b2", Side::Buy),
    ];
    let (recorded, _) = marketable_events(grid, &events, &params()).unwrap();
    let cancel = recorded.iter().find(|e| e.kind == EventKind::Cancel).unwrap();
    assert_eq!(cancel.epsilon, -1);
    assert_eq!(cancel.size, 5);
    assert_eq!(cancel.p_before, p(10.01));
    assert_eq!(cancel.p_after, p(10.00));
    assert!((cancel.mechanical() - 0.01).abs() < 1e-12);
}
