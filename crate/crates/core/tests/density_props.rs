mod common;

use auction_core::book::Side;
use auction_core::clearing::clear;
use auction_core::density::{average_density, day_profile, density, liquidity_samples, Grouping};
use auction_core::flowgen::{generate, FlowConfig};
use auction_core::AuctionBook;
use common::random_book;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn per_tick_density_recovers_volume(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let book = random_book(&mut rng, 20, 200);
        let Ok(c) = clear(&book) else { return Ok(()) };
        for side in [Side::Buy, Side::Sell] {
            let Ok(points) = density(&book, side, c.price, c.volume) else { continue };
            let total: f64 = points.iter().map(|p| p.rho * p.gap.as_f64() * c.volume as f64).sum();
            prop_assert!((total - book.limit_total(side) as f64).abs() < 1e-6 * total.max(1.0));
            prop_assert!(points.iter().all(|p| p.rho > 0.0));
        }
    }

    #[test]
    fn binned_profile_integrates_to_side_volume(seed in any::<u64>(), dx_bp in 1.0f64..30.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let book = random_book(&mut rng, 20, 200);
        let Ok(c) = clear(&book) else { return Ok(()) };
        let profile = &day_profile(&book, c.price, c.volume, dx_bp * 1e-4, None).unwrap()[0];
        for side in [Side::Buy, Side::Sell] {
            let want = book.limit_total(side) as f64 / c.volume as f64;
            prop_assert!((profile.mass(side) - want).abs() < 1e-9 * want.max(1.0));
        }
    }

    #[test]
    fn liquidity_samples_rebuild_breakpoint_increments(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let book = random_book(&mut rng, 20, 200);
        let Ok(c) = clear(&book) else { return Ok(()) };
        let theta = book.grid().tick_size().as_f64();
        for side in [Side::Buy, Side::Sell] {
            let samples = liquidity_samples(&book, side, c.price, c.volume, 0.02).unwrap();
            let levels: Vec<u64> = match side {
                Side::Buy => book.levels_above(c.tick).map(|(_, l)| l.total()).collect(),
                Side::Sell => book.levels_below(c.tick).map(|(_, l)| l.total()).collect(),
            };
            for (s, v) in samples.iter().zip(&levels) {
                let next = samples.iter().find(|n| n.x > s.x).map(|n| (n.price.as_f64() - s.price.as_f64()).abs());
                let gap = next.unwrap_or(theta);
                let rebuilt = s.rho * gap * c.volume as f64;
                if next.is_some() {
                    prop_assert!((rebuilt - *v as f64).abs() < 1e-6 * (*v as f64));
                }
            }
        }
    }
}

fn flow_book(seed: u64) -> AuctionBook {
    let config = FlowConfig { seed, ..FlowConfig::default() };
    let grid = config.validate().unwrap();
    let (events, _) = generate(&config).unwrap();
    AuctionBook::replay(grid, &events).unwrap()
}

#[test]
fn grouped_profiles_sum_to_the_ungrouped_one() {
    for seed in 0..5 {
        let book = flow_book(seed);
        let c = clear(&book).unwrap();
        let all = &day_profile(&book, c.price, c.volume, 5e-4, None).unwrap()[0];
        for grouping in [Grouping::Latency, Grouping::Account] {
            let groups = day_profile(&book, c.price, c.volume, 5e-4, Some(grouping)).unwrap();
            for (k, bin) in &all.bins {
                let (b, s) = groups.iter().filter_map(|g| g.bins.get(k)).fold((0.0, 0.0), |a, g| (a.0 + g.buy, a.1 + g.sell));
                assert!((b - bin.buy).abs() < 1e-9 && (s - bin.sell).abs() < 1e-9, "bin {k}");
            }
            let extra = groups.iter().flat_map(|g| g.bins.keys()).filter(|k| !all.bins.contains_key(k)).count();
            assert_eq!(extra, 0);
        }
    }
}

#[test]
fn averaging_is_per_bin_mean_over_days() {
    let days: Vec<_> = (0..4)
        .map(|seed| {
            let book = flow_book(seed);
            let c = clear(&book).unwrap();
            day_profile(&book, c.price, c.volume, 5e-4, None).unwrap().remove(0)
        })
        .collect();
    let avg = average_density(&days).unwrap();
    assert_eq!(avg.days, 4);
    for (k, bin) in &avg.bins {
        let want = days.iter().filter_map(|d| d.bins.get(k)).map(|b| b.buy).sum::<f64>() / 4.0;
        assert!((bin.buy - want).abs() < 1e-12);
    }
    // Averaging two halves and then the halves gives the same result.
    let left = average_density(&days[..2]).unwrap();
    let right = average_density(&days[2..]).unwrap();
    let both = average_density(&[left, right]).unwrap();
    for (k, bin) in &avg.bins {
        assert!((both.bins[k].sell - bin.sell).abs() < 1e-12);
    }
}
