//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use auction_core::book::{Action, Placement, Side};
use auction_core::clearing::{clear, uncross, uncross_book};
use auction_core::flowgen::{day_config, generate, FlowConfig, Shape};
use auction_core::impact::{
    cash_volume, impact_curve, inject_and_reclear, post_clearing_impact, withdraw_and_reclear, ScaledVolume,
    DEFAULT_MAX_X,
};
use auction_core::regime::{changepoint, fit_regime, RegimeParams};
use auction_core::response::{aggregate, classify_marketable, marketable_events, ResponseParams};
use auction_core::stats::{ks_two_sample, rcdf, rcdf_at, spearman, Alternative};
use auction_core::AuctionBook;
use common::{random_book, NaiveBook};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn c1_clearing_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut agree, mut crossed, mut identities) = (0, 0, 0);
    let n = 10_000;
    for _ in 0..n {
        let book = random_book(&mut rng, 20, 200);
        let naive = NaiveBook::from_book(&book).clear();
        match (clear(&book), naive) {
            (Ok(c), Some(o)) => {
                crossed += 1;
                if c.tick == o.tick && c.volume == o.volume && c.volume == o.max_volume_any_tick {
                    agree += 1;
                }
                let ok = c.volume == c.supply - c.sell_remaining - c.sell_better_unfilled
                    && c.volume == c.demand - c.buy_remaining - c.buy_better_unfilled
                    && c.sell_remaining * c.buy_remaining == 0;
                identities += ok as usize;
            }
            (Err(_), None) => agree += 1,
            _ => {}
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        agree == n && identities == crossed && secs < 10.0,
        format!("{agree}/{n} books agree, identities {identities}/{crossed}, {secs:.2} s"),
    )
}

fn c2_breakpoints() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut books, mut checked, mut interior, mut boundary) = (0, 0u64, 0u64, Vec::new());
    while books < 1000 {
        let book = random_book(&mut rng, 20, 200);
        let Ok(c) = clear(&book) else { continue };
        books += 1;
        let naive = NaiveBook::from_book(&book);
        for side in [Side::Buy, Side::Sell] {
            let curve = impact_curve(&book, &c, side, DEFAULT_MAX_X).unwrap();
            for q in 1..curve.omega_end.num {
                let oracle = book.grid().price_of(naive.clear_with(side, q).unwrap().tick);
                let want = (oracle.as_f64() / c.price.as_f64()).ln().abs();
                let got = curve.impact_at(ScaledVolume::new(q, c.volume)).unwrap();
                checked += 1;
                if got != want {
                    if curve.breakpoints.iter().any(|b| b.omega.num == q) {
                        boundary.push(format!("book {books} side {side} q {q}: curve {got:.6}, re-clearing {want:.6}"));
                    } else {
                        interior += 1;
                    }
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    for line in boundary.iter().take(5) {
        println!("    boundary: {line}");
    }
    outcome(
        interior == 0 && secs < 60.0,
        format!(
            "{checked} volumes on {books} books, {interior} interior mismatches, {} boundary cases logged, {secs:.2} s",
            boundary.len()
        ),
    )
}

fn c3_cash_volume() -> Outcome {
    let a = cash_volume(0.2745, 2_246_617, 48.00);
    let b = cash_volume(0.0961, 2_246_617, 48.00);
    outcome(
        (a - 29.6e6).abs() <= 0.05e6 && (b - 10.3e6).abs() <= 0.05e6,
        format!("{:.3} M and {:.3} M", a / 1e6, b / 1e6),
    )
}

fn c4_linear_slope() -> Outcome {
    let config = FlowConfig {
        shape: Shape::Constant,
        peak_mass: 0.0,
        cancel_rate: 0.0,
        ..FlowConfig::default()
    };
    let grid = config.validate().unwrap();
    let (events, truth) = generate(&config).unwrap();
    let book = AuctionBook::replay(grid, &events).unwrap();
    let c = clear(&book).unwrap();
    let theta = grid.tick_size().as_f64();
    let mut worst: f64 = 0.0;
    let mut identity: f64 = 0.0;
    let mut notes = Vec::new();
    for side in [Side::Buy, Side::Sell] {
        let fit = fit_regime(&book, &c, side, RegimeParams::default(), "constant").unwrap();
        let l_expected = config.tick_volume as f64 / (c.volume as f64 * theta);
        let beta = fit.beta_emp.expect("window holds breakpoints");
        let rel = (beta / fit.beta_theo - 1.0).abs();
        worst = worst.max(rel);
        // Price-unit form: ω^(i) - ω^(0) = L̃ (p^(i+1) - p^(1)).
        let curve = impact_curve(&book, &c, side, DEFAULT_MAX_X).unwrap();
        let (w0, p1) = (curve.breakpoints[0].omega.value(), curve.breakpoints[0].price.as_f64());
        for b in &curve.breakpoints {
            let lhs = b.omega.value() - w0;
            let rhs = fit.l_tilde * (b.price.as_f64() - p1).abs();
            identity = identity.max((lhs - rhs).abs() / lhs.max(1e-12));
        }
        notes.push(format!(
            "{side}: beta_emp {beta:.6e} vs 1/(p1 L) {:.6e}, L {:.6e} (V_c/(Q_a θ) {l_expected:.6e}, truth {:.6e})",
            fit.beta_theo,
            fit.l_tilde,
            truth.l_star.unwrap_or(f64::NAN)
        ));
    }
    for n in &notes {
        println!("    {n}");
    }
    println!("    price-unit identity max relative error {identity:.2e}");
    outcome(worst < 1e-6, format!("max relative slope error {worst:.3e} (tolerance 1e-6)"))
}

fn c5_changepoint() -> Outcome {
    // One spacing past the cut-off the log density has fallen by ten noise
    // standard deviations.
    let (delta_star, l_star, decay) = (50e-4, 2.5e4, 1000.0);
    let spacing = 1e-4;
    let noise = Normal::new(0.0, 0.01).unwrap();
    let (mut delta_ok, mut l_ok) = (0, 0);
    let seeds = 1000;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<(f64, f64)> = (1..=200)
            .map(|i| {
                let x = i as f64 * spacing;
                let clean = if x <= delta_star + 1e-12 { l_star } else { l_star * (-decay * (x - delta_star)).exp() };
                (x, clean * (1.0 + noise.sample(&mut rng)))
            })
            .collect();
        let fit = changepoint(&samples, 20).unwrap();
        delta_ok += ((fit.delta - delta_star).abs() <= spacing * (1.0 + 1e-9)) as usize;
        l_ok += ((fit.l_tilde / l_star - 1.0).abs() < 0.02) as usize;
    }
    let rate = delta_ok as f64 / seeds as f64;
    outcome(
        rate >= 0.95 && l_ok == seeds as usize,
        format!("delta within one spacing in {:.1}% of seeds, L within 2% in {l_ok}/{seeds}", rate * 100.0),
    )
}

fn c6_asymptotics() -> Outcome {
    let (a1, b1) = (2.0, 50.0);
    let mut worst_small: f64 = 0.0;
    let mut worst_large: f64 = 0.0;
    for k in 0..=60 {
        let small = 1e-9 * 10f64.powf(k as f64 / 10.0);
        let x = post_clearing_impact(a1, b1, small).unwrap();
        worst_small = worst_small.max((x / (small / a1) - 1.0).abs());
        let large = 1e3 * 10f64.powf(k as f64 / 10.0);
        let x = post_clearing_impact(a1, b1, large).unwrap();
        worst_large = worst_large.max((x / (2.0 * large / b1).sqrt() - 1.0).abs());
    }
    outcome(
        worst_small < 0.01 && worst_large < 0.01,
        format!("q in [1e-9, 1e-3]: max |ratio - 1| {worst_small:.2e}; q in [1e3, 1e9]: {worst_large:.2e}"),
    )
}

fn c7_response() -> Outcome {
    let params = ResponseParams {
        with_cancels: true,
        ..ResponseParams::default()
    };
    let mut all = Vec::new();
    let mut oracle: Vec<(f64, f64)> = Vec::new();
    // (ω, mechanical, virtual) for unpriced orders only.
    let mut unpriced: Vec<(f64, f64, f64)> = Vec::new();
    let mut mechanical_ok = true;
    let mut diag_total = 0;
    for day in 0..40 {
        let config = day_config(&FlowConfig::default(), day);
        let grid = config.validate().unwrap();
        let (events, _) = generate(&config).unwrap();
        let (marketable, diag) = marketable_events(grid, &events, &params).unwrap();
        diag_total += diag.marketable;
        let mut book = AuctionBook::new(grid);
        let mut next = marketable.iter().peekable();
        for (i, ev) in events.iter().enumerate() {
            if let Some(m) = next.next_if(|m| m.event_index == i) {
                let before = uncross_book(&book).unwrap();
                assert_eq!(before.price, m.p_before);
                let (_, eps, size) = classify_marketable(ev, &book, before.price).unwrap();
                // Submissions push on their own side; cancelling is injecting on the other.
                let push_side = if eps > 0 { Side::Buy } else { Side::Sell };
                let virtual_price = inject_and_reclear(&book.ladder(), push_side, size).unwrap();
                let virtual_impact = eps as f64 * (virtual_price.as_f64() - before.price.as_f64());
                oracle.push((m.omega, virtual_impact));
                let placement = match ev.action {
                    Action::Cancel => book.order(&ev.order_id).map(|o| o.placement),
                    _ => book.placement_for(ev.order_type, ev.price).ok(),
                };
                if placement == Some(Placement::Market) {
                    unpriced.push((m.omega, m.mechanical(), virtual_impact));
                }
                if ev.action == Action::Submit && m.mechanical() < 0.0 {
                    mechanical_ok = false;
                }
            }
            book.apply(ev).unwrap();
        }
        all.extend(marketable);
    }
    let curve = aggregate(&all, &params.bins, Default::default());
    let edges = params.bins.edges();
    let mut consistent = 0;
    let mut matches = 0;
    let mut tested = 0;
    for (b, bin) in curve.bins.iter().enumerate() {
        let (Some(r1), Some(rm), Some(diff_se), Some(rm_se)) = (bin.r1, bin.rm, bin.diff_se, bin.rm_se) else {
            continue;
        };
        if bin.count < 10 {
            continue;
        }
        tested += 1;
        let gap = (r1 - rm).abs();
        consistent += (gap == 0.0 || gap < 3.0 * diff_se) as usize;
        let vals: Vec<f64> = oracle
            .iter()
            .filter(|(w, _)| params.bins.index(&edges, *w) == Some(b))
            .map(|(_, v)| *v)
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let ok = (mean - rm).abs() <= rm_se || (mean - rm).abs() < 1e-12;
        matches += ok as usize;
        println!(
            "    bin [{:.2e}, {:.2e}) n={:5} R1 {r1:+.5} RM {rm:+.5} (diff se {diff_se:.5}) virtual {mean:+.5} (se {rm_se:.5})",
            bin.lo, bin.hi, bin.count
        );
    }
    let unpriced_exact = unpriced.iter().filter(|u| (u.1 - u.2).abs() < 1e-12).count();
    println!(
        "    unpriced orders alone: mechanical equals virtual impact on {unpriced_exact}/{} events",
        unpriced.len()
    );
    // Cancel-buy equals inject-sell on random books, exactly.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut duality = true;
    let (mut pairs, mut uncrossed) = (0, 0);
    for _ in 0..2000 {
        let book = random_book(&mut rng, 20, 200);
        let ladder = book.ladder();
        for side in [Side::Buy, Side::Sell] {
            for q in 1..=ladder.market_total(side).min(50) {
                let inject = inject_and_reclear(&ladder, side.opposite(), q).ok();
                match withdraw_and_reclear(&ladder, side, q) {
                    Ok(cancel) => duality &= Some(cancel) == inject,
                    Err(_) => {
                        // Nothing left to trade: the injected order only meets itself.
                        let mut what_if = ladder.clone();
                        *what_if.market_total_mut(side.opposite()) += q;
                        duality &= uncross(&what_if).map(|u| u.volume) == Ok(q);
                        uncrossed += 1;
                    }
                }
                pairs += 1;
            }
        }
    }
    outcome(
        tested > 0 && consistent == tested && matches == tested && mechanical_ok && duality,
        format!(
            "{} marketable events, {consistent}/{tested} bins |R1-RM| < 3 SE, {matches}/{tested} bins RM within 1 SE of virtual impact, duality on {pairs} pairs ({uncrossed} without a post-cancel cross) {}",
            diag_total,
            if duality { "exact" } else { "BROKEN" }
        ),
    )
}

fn c8_stats() -> Outcome {
    let rho = spearman(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap().rho;
    let ks = ks_two_sample(&[1.0, 2.0, 3.0], &[1.5, 2.5, 3.5], Alternative::TwoSided).unwrap().statistic;
    let ks_same = ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], Alternative::TwoSided).unwrap().statistic;
    let ks_disjoint = ks_two_sample(&[1.0, 2.0], &[3.0, 4.0], Alternative::TwoSided).unwrap().statistic;
    let table = rcdf(&[1.0, 2.0, 3.0]).unwrap();
    let pass = (rho - 0.6).abs() < 1e-15
        && (ks - 1.0 / 3.0).abs() < 1e-15
        && ks_same == 0.0
        && ks_disjoint == 1.0
        && table == vec![(1.0, 1.0), (2.0, 2.0 / 3.0), (3.0, 1.0 / 3.0)]
        && rcdf_at(&[1.0, 2.0, 3.0], 2.0) == 2.0 / 3.0
        && rcdf_at(&[1.0, 2.0, 3.0], -5.0) == 1.0;
    outcome(pass, format!("spearman {rho}, KS {ks:.6}, KS(identical) {ks_same}, KS(disjoint) {ks_disjoint}"))
}

/// Runs the binary; `out_env` sets the output directory through the
/// environment instead of `--out`.
fn auction(args: &[&str], out_env: Option<&Path>) -> Result<(), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_auction"));
    cmd.args(args);
    match out_env {
        Some(dir) => cmd.env("AUCTION_OUT_DIR", dir),
        None => cmd.env_remove("AUCTION_OUT_DIR"),
    };
    let o = cmd.output().map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr).trim()))
    }
}

/// Byte comparison of two output directories; manifests are compared with
/// `output_dir` removed.
fn same_outputs(a: &Path, b: &Path) -> Result<usize, String> {
    let names = |d: &Path| -> Result<Vec<String>, String> {
        let mut v: Vec<String> = fs::read_dir(d)
            .map_err(|e| e.to_string())?
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        v.sort();
        Ok(v)
    };
    let (na, nb) = (names(a)?, names(b)?);
    if na != nb {
        return Err(format!("file sets differ: {na:?} vs {nb:?}"));
    }
    for n in &na {
        let (fa, fb) = (fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap());
        let equal = if n == "manifest.json" {
            let strip = |bytes: &[u8]| {
                let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
                v.as_object_mut().unwrap().remove("output_dir");
                v
            };
            strip(&fa) == strip(&fb)
        } else {
            fa == fb
        };
        if !equal {
            return Err(format!("{} differs", a.join(n).display()));
        }
    }
    Ok(na.len())
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let cfg = root.join("cfg.json");
    let config = FlowConfig {
        seed: 5,
        ..FlowConfig::default()
    };
    fs::write(&cfg, serde_json::to_string(&config).unwrap()).unwrap();
    let p = |x: &Path| x.to_str().unwrap().to_string();
    let gen = root.join("gen");
    let days: Vec<String> = (0..4).map(|d| p(&gen.join(format!("day_{d:03}.csv")))).collect();
    let metrics = p(&root.join("regime").join("metrics.csv"));
    let mut runs: Vec<(&str, Vec<String>)> = vec![
        ("gen", vec!["gen".into(), p(&cfg), "--days".into(), "4".into()]),
        ("replay", vec!["replay".into(), days[0].clone()]),
        ("impact", vec!["impact".into(), days[1].clone(), "--max-x".into(), "150".into()]),
        ("density", [vec!["density".into()], days.clone(), vec!["--group".into(), "latency".into()]].concat()),
        ("regime", [vec!["regime".into()], days.clone()].concat()),
        ("response", [vec!["response".into(), "--with-cancels".into()], days.clone()].concat()),
        ("series", vec!["series".into(), days[2].clone(), "--interval".into(), "10".into()]),
        ("stats", vec!["stats".into(), metrics]),
    ];
    let mut checked = Vec::new();
    for (name, args) in runs.iter_mut() {
        let out = root.join(*name);
        args.extend(["--threads".into(), "2".into()]);
        let via_env = *name == "replay";
        if !via_env {
            args.extend(["--out".into(), p(&out)]);
        }
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        if let Err(e) = auction(&argv, via_env.then_some(out.as_path())) {
            return outcome(false, e);
        }
        let again: PathBuf = root.join(format!("{name}_rerun"));
        let manifest = p(&out.join("manifest.json"));
        if let Err(e) = auction(&["rerun", &manifest, "--threads", "4", "--out", &p(&again)], None) {
            return outcome(false, e);
        }
        match same_outputs(&out, &again) {
            Ok(n) => checked.push(format!("{name} {n}")),
            Err(e) => return outcome(false, e),
        }
    }
    outcome(true, format!("byte-identical reruns (files per command): {}", checked.join(", ")))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("1 clearing-oracle equivalence", c1_clearing_oracle),
        ("2 impact-breakpoint exactness", c2_breakpoints),
        ("3 cash-volume arithmetic", c3_cash_volume),
        ("4 linear-regime slope", c4_linear_slope),
        ("5 change-point recovery", c5_changepoint),
        ("6 post-clearing asymptotics", c6_asymptotics),
        ("7 response consistency", c7_response),
        ("8 statistics sanity", c8_stats),
        ("9 rerun determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
