use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use auction_core::clearing::ClearingRecord;
use auction_core::density::{average_grouped, day_profile, profiles_to_csv, Grouping, BASIS_POINT};
use auction_core::flowgen::{day_config, generate, FlowConfig, GroundTruth};
use auction_core::impact::{impact_curve, signed_curves_csv, ImpactCurve};
use auction_core::io::{read_events, write_events};
use auction_core::regime::{daily_slopes, fit_regime, RegimeFit, RegimeParams, REGIME_CSV_HEADER};
use auction_core::response::{aggregate, marketable_events, Diagnostics, LogBins, ResponseParams};
use auction_core::stats::{
    cash_liquidity, distribution_report, increment_ks_table, read_metrics, write_metrics, zero_impact_report,
    DayMetrics, ReportKind,
};
use auction_core::{clear, uncross_book, AuctionBook, OrderEvent, Price, PriceGrid, Side};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{input_ctx, CliError, Context};
use crate::manifest::{strip_out, OutputDir, RunManifest, MANIFEST_FILE};
use crate::{Cli, Command, GridArgs, GroupArg, SideArg};

const DEFAULT_OUT: &str = "auction-out";

pub fn run(cli: Cli, raw_args: &[String]) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("--threads: {e}")))?;
    }
    if let Command::Rerun(args) = &cli.command {
        let manifest = RunManifest::read(&args.manifest)?;
        let out = cli.out.clone().unwrap_or_else(|| manifest.output_dir.clone());
        let argv = std::iter::once("auction".to_string()).chain(manifest.args.iter().cloned());
        let inner = <Cli as clap::Parser>::try_parse_from(argv)
            .map_err(|e| CliError::Invalid(format!("{}: stored arguments: {e}", args.manifest.display())))?;
        if matches!(inner.command, Command::Rerun(_)) {
            return Err(CliError::Invalid(format!(
                "{}: manifest refers to another rerun",
                args.manifest.display()
            )));
        }
        return execute(inner, manifest.args, out);
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    execute(cli, strip_out(raw_args), out)
}

struct Run {
    name: &'static str,
    inputs: Vec<PathBuf>,
    parameters: serde_json::Value,
    seed: Option<u64>,
}

fn execute(cli: Cli, args: Vec<String>, out_dir: PathBuf) -> Result<(), CliError> {
    let mut out = OutputDir::create(&out_dir)?;
    let g = &cli.grid;
    let params = |v: &dyn erased::Json| v.to_json(g);
    let run = match &cli.command {
        Command::Replay(a) => {
            replay(&a.log, g, &mut out)?;
            Run { name: "replay", inputs: vec![a.log.clone()], parameters: params(a), seed: None }
        }
        Command::Impact(a) => {
            impact(&a.log, a.side, a.max_x * BASIS_POINT, g, &mut out)?;
            Run { name: "impact", inputs: vec![a.log.clone()], parameters: params(a), seed: None }
        }
        Command::Density(a) => {
            let grouping = a.group.map(|g| match g {
                GroupArg::Latency => Grouping::Latency,
                GroupArg::Account => Grouping::Account,
            });
            density(&a.logs, a.dx * BASIS_POINT, grouping, g, &mut out)?;
            Run { name: "density", inputs: a.logs.clone(), parameters: params(a), seed: None }
        }
        Command::Regime(a) => {
            let p = RegimeParams {
                max_x: a.max_x * BASIS_POINT,
                min_points: a.min_points,
            };
            regime(&a.logs, p, g, &mut out)?;
            Run { name: "regime", inputs: a.logs.clone(), parameters: params(a), seed: None }
        }
        Command::Response(a) => {
            let p = ResponseParams {
                warmup_us: seconds_to_us(a.warmup, "--warmup")?,
                start_us: None,
                bins: LogBins {
                    lo: a.bin_lo,
                    hi: a.bin_hi,
                    count: a.bins,
                },
                with_cancels: a.with_cancels,
            };
            if !(a.bins > 0 && a.bin_lo > 0.0 && a.bin_hi > a.bin_lo) {
                return Err(CliError::Invalid(
                    "bins need --bins >= 1 and 0 < --bin-lo < --bin-hi".to_string(),
                ));
            }
            response(&a.logs, &p, g, &mut out)?;
            Run { name: "response", inputs: a.logs.clone(), parameters: params(a), seed: None }
        }
        Command::Series(a) => {
            let interval = seconds_to_us(a.interval, "--interval")?;
            if interval <= 0 {
                return Err(CliError::Invalid("--interval must be positive".to_string()));
            }
            let p = RegimeParams {
                max_x: a.max_x * BASIS_POINT,
                min_points: a.min_points,
            };
            series(&a.log, interval, p, g, &mut out)?;
            Run { name: "series", inputs: vec![a.log.clone()], parameters: params(a), seed: None }
        }
        Command::Stats(a) => {
            stats(&a.metrics, a.threshold, a.max_index, &mut out)?;
            Run { name: "stats", inputs: vec![a.metrics.clone()], parameters: params(a), seed: None }
        }
        Command::Gen(a) => {
            let seed = gen(&a.config, a.days, &mut out)?;
            Run { name: "gen", inputs: vec![a.config.clone()], parameters: params(a), seed: Some(seed) }
        }
        Command::Rerun(_) => unreachable!("handled by run"),
    };
    let manifest = RunManifest {
        tool: "auction".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: run.name.to_string(),
        args,
        inputs: run.inputs,
        parameters: run.parameters,
        seed: run.seed,
        output_dir: out_dir,
        outputs: Vec::new(),
    };
    eprintln!("wrote {}", out.path().join(MANIFEST_FILE).display());
    out.finish(manifest)
}

mod erased {
    use serde::Serialize;

    use crate::GridArgs;

    pub trait Json {
        fn to_json(&self, grid: &GridArgs) -> serde_json::Value;
    }

    impl<T: Serialize> Json for T {
        fn to_json(&self, grid: &GridArgs) -> serde_json::Value {
            let mut v = serde_json::to_value(self).expect("serializable arguments");
            if let (serde_json::Value::Object(m), Ok(serde_json::Value::Object(g))) =
                (&mut v, serde_json::to_value(grid))
            {
                m.extend(g);
            }
            v
        }
    }
}

fn seconds_to_us(s: f64, flag: &str) -> Result<i64, CliError> {
    if !s.is_finite() || s < 0.0 {
        return Err(CliError::Invalid(format!("{flag} must be a non-negative number of seconds")));
    }
    Ok((s * 1e6).round() as i64)
}

fn load(path: &Path) -> Result<Vec<OrderEvent>, CliError> {
    let file = input_ctx(File::open(path), path)?;
    read_events(BufReader::new(file)).ctx(path.display())
}

fn grid_for(events: &[OrderEvent], g: &GridArgs, path: &Path) -> Result<PriceGrid, CliError> {
    let reference = g
        .reference_price
        .or_else(|| events.iter().rev().find_map(|e| e.price))
        .ok_or_else(|| {
            CliError::Invalid(format!(
                "{}: no priced events to take a reference price from; pass --reference-price",
                path.display()
            ))
        })?;
    PriceGrid::with_tick(g.tick_size, reference).ctx(path.display())
}

fn load_book(path: &Path, g: &GridArgs) -> Result<(Vec<OrderEvent>, AuctionBook), CliError> {
    let events = load(path)?;
    let grid = grid_for(&events, g, path)?;
    let book = AuctionBook::replay(grid, &events).ctx(path.display())?;
    Ok((events, book))
}

fn date_of(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn sides(side: Option<SideArg>) -> Vec<Side> {
    match side {
        Some(SideArg::B) => vec![Side::Buy],
        Some(SideArg::S) => vec![Side::Sell],
        None => vec![Side::Buy, Side::Sell],
    }
}

/// Runs `f` over every input in parallel; failures are reported and skipped
/// unless every input fails, in which case the first error is returned.
fn batch<T: Send>(
    paths: &[PathBuf],
    f: impl Fn(&Path) -> Result<T, CliError> + Sync,
) -> Result<Vec<(PathBuf, T)>, CliError> {
    let results: Vec<Result<T, CliError>> = paths.par_iter().map(|p| f(p)).collect();
    let mut ok = Vec::new();
    let mut first_err = None;
    for (p, r) in paths.iter().zip(results) {
        match r {
            Ok(v) => ok.push((p.clone(), v)),
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", p.display());
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) if ok.is_empty() => Err(e),
        _ => Ok(ok),
    }
}

#[derive(Serialize)]
struct BookLevel {
    price: Price,
    buy: u64,
    sell: u64,
}

#[derive(Serialize)]
struct BookSnapshot {
    tick_size: Price,
    reference_price: Price,
    live_orders: usize,
    buy_market: u64,
    sell_market: u64,
    buy_limit: u64,
    sell_limit: u64,
    levels: Vec<BookLevel>,
}

#[derive(Serialize)]
struct ClearingOutput<'a> {
    #[serde(flatten)]
    record: ClearingRecord,
    supply: u64,
    demand: u64,
    buy_better_unfilled: u64,
    sell_better_unfilled: u64,
    fills: &'a [auction_core::clearing::Fill],
}

fn snapshot(book: &AuctionBook) -> BookSnapshot {
    let grid = book.grid();
    BookSnapshot {
        tick_size: grid.tick_size(),
        reference_price: grid.price_of(grid.reference_tick()),
        live_orders: book.live_order_count(),
        buy_market: book.market_total(Side::Buy),
        sell_market: book.market_total(Side::Sell),
        buy_limit: book.limit_total(Side::Buy),
        sell_limit: book.limit_total(Side::Sell),
        levels: book
            .levels()
            .map(|(t, l)| BookLevel {
                price: grid.price_of(t),
                buy: l.buy,
                sell: l.sell,
            })
            .collect(),
    }
}

fn replay(log: &Path, g: &GridArgs, out: &mut OutputDir) -> Result<(), CliError> {
    let (_, book) = load_book(log, g)?;
    out.write_json("book.json", &snapshot(&book))?;
    let c = clear(&book).ctx(log.display())?;
    out.write_json(
        "clearing.json",
        &ClearingOutput {
            record: c.record(),
            supply: c.supply,
            demand: c.demand,
            buy_better_unfilled: c.buy_better_unfilled,
            sell_better_unfilled: c.sell_better_unfilled,
            fills: &c.fills,
        },
    )
}

#[derive(Serialize)]
struct CurveSummary {
    side: Side,
    p_a: f64,
    q_a: u64,
    omega0: f64,
    omega_end: f64,
    breakpoints: usize,
}

fn impact(log: &Path, side: Option<SideArg>, max_x: f64, g: &GridArgs, out: &mut OutputDir) -> Result<(), CliError> {
    let (_, book) = load_book(log, g)?;
    let c = clear(&book).ctx(log.display())?;
    let curves: Vec<ImpactCurve> = sides(side)
        .into_iter()
        .map(|s| impact_curve(&book, &c, s, max_x).ctx(log.display()))
        .collect::<Result<_, _>>()?;
    let mut csv = String::new();
    for (i, curve) in curves.iter().enumerate() {
        csv.push_str(&curve.to_csv(i == 0));
    }
    out.write("impact_curve.csv", csv)?;
    out.write("impact_signed.csv", signed_curves_csv(&curves))?;
    let summary: Vec<CurveSummary> = curves
        .iter()
        .map(|cv| CurveSummary {
            side: cv.side,
            p_a: cv.p_a.as_f64(),
            q_a: cv.q_a,
            omega0: cv.omega0.value(),
            omega_end: cv.omega_end.value(),
            breakpoints: cv.breakpoints.len(),
        })
        .collect();
    out.write_json("impact_summary.json", &summary)
}

fn density(
    logs: &[PathBuf],
    dx: f64,
    grouping: Option<Grouping>,
    g: &GridArgs,
    out: &mut OutputDir,
) -> Result<(), CliError> {
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(CliError::Invalid("--dx must be positive".to_string()));
    }
    let days = batch(logs, |p| {
        let (_, book) = load_book(p, g)?;
        let c = clear(&book).ctx(p.display())?;
        day_profile(&book, c.price, c.volume, dx, grouping).ctx(p.display())
    })?;
    let profiles: Vec<_> = days.into_iter().map(|(_, d)| d).collect();
    let avg = average_grouped(&profiles).ctx("averaging")?;
    out.write("density.csv", profiles_to_csv(&avg))
}

struct DayRegime {
    metrics: DayMetrics,
    fits: Vec<RegimeFit>,
    fit_errors: Vec<CliError>,
}

fn regime_day(path: &Path, params: RegimeParams, g: &GridArgs) -> Result<DayRegime, CliError> {
    let (_, book) = load_book(path, g)?;
    let c = clear(&book).ctx(path.display())?;
    let date = date_of(path);
    let mut fits = Vec::new();
    let mut fit_errors = Vec::new();
    let mut omega0 = [0.0; 2];
    let mut domega: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    let mut per_side: [Option<RegimeFit>; 2] = [None, None];
    for (k, side) in [Side::Buy, Side::Sell].into_iter().enumerate() {
        let curve = impact_curve(&book, &c, side, params.max_x).ctx(path.display())?;
        omega0[k] = curve.omega0.value();
        domega[k] = curve.increments().iter().map(|w| w.value()).collect();
        match fit_regime(&book, &c, side, params, &date) {
            Ok(f) => {
                per_side[k] = Some(f.clone());
                fits.push(f);
            }
            Err(e) => {
                let e = Err::<(), _>(e).ctx(format!("{} side {side}", path.display())).unwrap_err();
                eprintln!("warning: no regime fit: {e}");
                fit_errors.push(e);
            }
        }
    }
    let p_a = c.price.as_f64();
    let field = |k: usize, f: fn(&RegimeFit) -> Option<f64>| per_side[k].as_ref().and_then(f);
    let [domega_b, domega_s] = domega;
    let metrics = DayMetrics {
        date,
        p_a,
        q_a: c.volume,
        omega0_b: omega0[0],
        omega0_s: omega0[1],
        delta_b: field(0, |f| Some(f.delta)),
        delta_s: field(1, |f| Some(f.delta)),
        l_tilde_b: field(0, |f| Some(f.l_tilde)),
        l_tilde_s: field(1, |f| Some(f.l_tilde)),
        slope_b: field(0, |f| f.beta_emp),
        slope_s: field(1, |f| f.beta_emp),
        omega_max_b: field(0, |f| Some(f.omega_max.value())),
        omega_max_s: field(1, |f| Some(f.omega_max.value())),
        cash_liquidity_b: per_side[0].as_ref().map(|f| cash_liquidity(p_a, c.volume, f.l_tilde)),
        cash_liquidity_s: per_side[1].as_ref().map(|f| cash_liquidity(p_a, c.volume, f.l_tilde)),
        domega_b,
        domega_s,
    };
    Ok(DayRegime {
        metrics,
        fits,
        fit_errors,
    })
}

fn regime(logs: &[PathBuf], params: RegimeParams, g: &GridArgs, out: &mut OutputDir) -> Result<(), CliError> {
    let days = batch(logs, |p| regime_day(p, params, g))?;
    let mut fits = Vec::new();
    let mut metrics = Vec::new();
    let mut first_fit_error = None;
    for (_, d) in days {
        fits.extend(d.fits);
        metrics.push(d.metrics);
        if first_fit_error.is_none() {
            first_fit_error = d.fit_errors.into_iter().next();
        }
    }
    if fits.is_empty() {
        if let Some(e) = first_fit_error {
            return Err(e);
        }
    }
    let mut csv = format!("{REGIME_CSV_HEADER}\n");
    for f in &fits {
        csv.push_str(&f.csv_row());
        csv.push('\n');
    }
    out.write("regime.csv", csv)?;
    let mut slopes = String::from("date,side,slope\n");
    for (date, side, s) in daily_slopes(&fits) {
        slopes.push_str(&format!("{date},{side},{s}\n"));
    }
    out.write("daily_slopes.csv", slopes)?;
    let mut buf = Vec::new();
    write_metrics(&mut buf, &metrics).ctx("metrics.csv")?;
    out.write("metrics.csv", buf)
}

#[derive(Serialize)]
struct FileDiagnostics {
    log: PathBuf,
    #[serde(flatten)]
    diagnostics: Diagnostics,
}

#[derive(Serialize)]
struct ResponseDiagnostics {
    total: Diagnostics,
    files: Vec<FileDiagnostics>,
}

fn response(logs: &[PathBuf], params: &ResponseParams, g: &GridArgs, out: &mut OutputDir) -> Result<(), CliError> {
    let days = batch(logs, |p| {
        let events = load(p)?;
        let grid = grid_for(&events, g, p)?;
        marketable_events(grid, &events, params).ctx(p.display())
    })?;
    let mut all = Vec::new();
    let mut total = Diagnostics::default();
    let mut files = Vec::new();
    for (path, (events, d)) in days {
        all.extend(events);
        total.events += d.events;
        total.marketable += d.marketable;
        total.in_warmup += d.in_warmup;
        total.no_cross += d.no_cross;
        total.out_of_range += d.out_of_range;
        total.no_next_price += d.no_next_price;
        files.push(FileDiagnostics {
            log: path,
            diagnostics: d,
        });
    }
    let curve = aggregate(&all, &params.bins, total);
    out.write("response.csv", curve.to_csv())?;
    out.write_json(
        "response_diagnostics.json",
        &ResponseDiagnostics {
            total: curve.diagnostics,
            files,
        },
    )
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn series(log: &Path, interval_us: i64, params: RegimeParams, g: &GridArgs, out: &mut OutputDir) -> Result<(), CliError> {
    let events = load(log)?;
    let grid = grid_for(&events, g, log)?;
    let mut csv = String::from(
        "t_us,p_ind,q_ind,l_tilde_b,l_tilde_s,liquidity_b,liquidity_s,q_max_b,q_max_s\n",
    );
    auction_core::clearing::replay_sampled(grid, &events, interval_us, None, |t, book| {
        let row = match uncross_book(book).ok().and_then(|_| clear(book).ok()) {
            None => format!("{t},,,,,,,,\n"),
            Some(c) => {
                let fits: Vec<Option<RegimeFit>> = [Side::Buy, Side::Sell]
                    .into_iter()
                    .map(|s| fit_regime(book, &c, s, params, "").ok())
                    .collect();
                let q = c.volume as f64;
                let l = |k: usize| fits[k].as_ref().map(|f| f.l_tilde);
                let abs = |k: usize| l(k).map(|v| v * q);
                let qmax = |k: usize| fits[k].as_ref().map(|f| f.omega_max.value() * q);
                format!(
                    "{t},{},{},{},{},{},{},{},{}\n",
                    c.price,
                    c.volume,
                    opt(l(0)),
                    opt(l(1)),
                    opt(abs(0)),
                    opt(abs(1)),
                    opt(qmax(0)),
                    opt(qmax(1))
                )
            }
        };
        csv.push_str(&row);
    })
    .ctx(log.display())?;
    out.write("series.csv", csv)
}

fn table(rows: &[(f64, f64)], header: &str) -> String {
    let mut s = format!("{header}\n");
    for (a, b) in rows {
        s.push_str(&format!("{a},{b}\n"));
    }
    s
}

fn stats(metrics: &Path, threshold: f64, max_index: usize, out: &mut OutputDir) -> Result<(), CliError> {
    let file = input_ctx(File::open(metrics), metrics)?;
    let days = read_metrics(BufReader::new(file)).ctx(metrics.display())?;
    let report = zero_impact_report(&days, threshold).ctx(metrics.display())?;
    out.write_json("zero_impact.json", &report)?;
    let mut ks = String::from("i,j,statistic,p_value\n");
    for (i, j, r) in increment_ks_table(&days, max_index) {
        ks.push_str(&format!("{i},{j},{},{}\n", r.statistic, r.p_value));
    }
    out.write("domega_ks.csv", ks)?;
    let omega0: Vec<f64> = days.iter().flat_map(|d| [d.omega0_b, d.omega0_s]).collect();
    if let Ok(r) = distribution_report(&omega0, ReportKind::Rcdf) {
        out.write("omega0_rcdf.csv", table(&r, "omega0,rcdf"))?;
    }
    if let Ok(r) = distribution_report(&omega0, ReportKind::Smoothed) {
        out.write("omega0_density.csv", table(&r, "omega0,density"))?;
    }
    let omega_max: Vec<f64> = days
        .iter()
        .flat_map(|d| [d.omega_max_b, d.omega_max_s])
        .flatten()
        .collect();
    if let Ok(r) = distribution_report(&omega_max, ReportKind::Rcdf) {
        out.write("omega_max_rcdf.csv", table(&r, "omega_max,rcdf"))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DayTruth {
    day: u64,
    file: String,
    seed: u64,
    #[serde(flatten)]
    truth: GroundTruth,
}

fn gen(config: &Path, days: u64, out: &mut OutputDir) -> Result<u64, CliError> {
    let text = input_ctx(std::fs::read_to_string(config), config)?;
    let cfg: FlowConfig = serde_json::from_str(&text)
        .map_err(auction_core::ParseError::Json)
        .ctx(config.display())?;
    cfg.validate().ctx(config.display())?;
    let generated: Vec<_> = (0..days)
        .into_par_iter()
        .map(|d| {
            let c = day_config(&cfg, d);
            generate(&c).map(|(events, truth)| (d, c.seed, events, truth))
        })
        .collect::<Result<_, _>>()
        .ctx(config.display())?;
    let mut truths = Vec::new();
    for (d, seed, events, truth) in generated {
        let file = format!("day_{d:03}.csv");
        let mut buf = Vec::new();
        write_events(&mut buf, &events).expect("in-memory write");
        out.write(&file, buf)?;
        truths.push(DayTruth { day: d, file, seed, truth });
    }
    out.write_json("ground_truth.json", &truths)?;
    Ok(cfg.seed)
}
