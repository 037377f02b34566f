//! Constant-liquidity window detection around the auction price and the
//! linear-impact slope fits built on it.

use serde::Serialize;

use crate::book::{AuctionBook, Side};
use crate::clearing::ClearingResult;
use crate::density::{liquidity_samples, LiquiditySample, BASIS_POINT};
use crate::error::{ImpactError, RegimeError};
use crate::grid::Price;
use crate::impact::{impact_curve, theoretical_slope, ImpactCurve, ScaledVolume};

/// Minimum number of density samples for an accepted fit.
pub const DEFAULT_MIN_POINTS: usize = 20;

/// Result of the constant-then-linear change-point search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Changepoint {
    /// Width of the constant window, equal to one of the sample abscissae.
    pub delta: f64,
    /// Mean raw density on `(0, delta]`.
    pub l_tilde: f64,
    /// Number of samples inside the window.
    pub n_constant: usize,
    pub cost: f64,
}

fn sse_about_mean(ys: &[f64]) -> f64 {
    if ys.is_empty() {
        return 0.0;
    }
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    ys.iter().map(|y| (y - mean) * (y - mean)).sum()
}

fn sse_about_line(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let beta = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let alpha = my - beta * mx;
    xs.iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - beta * x - alpha;
            r * r
        })
        .sum()
}

/// `f(y)` with the first `k` samples in the constant part. Tails shorter than
/// two points cannot carry a line and fall back to the all-constant cost.
pub fn changepoint_cost(xs: &[f64], log_rho: &[f64], k: usize) -> f64 {
    let n = xs.len();
    if n - k < 2 {
        return sse_about_mean(log_rho);
    }
    sse_about_mean(&log_rho[..k]) + sse_about_line(&xs[k..], &log_rho[k..])
}

/// Exhaustive minimisation of the change-point cost over sample abscissae.
///
/// `samples` must be sorted by increasing `x > 0`. Ties go to the widest window.
pub fn changepoint(samples: &[(f64, f64)], min_points: usize) -> Result<Changepoint, RegimeError> {
    let required = min_points.max(2);
    if samples.len() < required {
        return Err(RegimeError::TooFewPoints {
            required,
            actual: samples.len(),
        });
    }
    if let Some(&(x, _)) = samples.iter().find(|(_, r)| !(*r > 0.0) || !r.is_finite()) {
        return Err(RegimeError::NonPositiveDensity(x));
    }
    debug_assert!(samples.windows(2).all(|w| w[0].0 < w[1].0));
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let logs: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let tol = 1e-12 * sse_about_mean(&logs).max(1.0);
    let mut best_k = 1;
    let mut best_cost = f64::INFINITY;
    for k in 1..=samples.len() {
        let cost = changepoint_cost(&xs, &logs, k);
        if cost <= best_cost + tol {
            best_cost = best_cost.min(cost);
            best_k = k;
        }
    }
    let l_tilde = samples[..best_k].iter().map(|s| s.1).sum::<f64>() / best_k as f64;
    Ok(Changepoint {
        delta: xs[best_k - 1],
        l_tilde,
        n_constant: best_k,
        cost: best_cost,
    })
}

/// `ω^(max) = ω^(0) + Σ_{0<|x|<=Δ} (V_B + V_S) / Q_a`, exact.
pub fn omega_max(curve: &ImpactCurve, delta: f64) -> ScaledVolume {
    let limit = delta * (1.0 + 1e-12);
    let k = curve.breakpoints.iter().take_while(|b| b.impact <= limit).count();
    curve
        .breakpoints
        .get(k)
        .map_or(curve.omega_end, |b| b.omega)
}

/// Least-squares slope of `I^(i)` on `ω^(i)` over breakpoints with
/// `ω^(0) < ω^(i) <= upper`. Returns the slope and the number of points.
pub fn empirical_slope(curve: &ImpactCurve, upper: ScaledVolume) -> Result<(f64, usize), RegimeError> {
    let pts: Vec<(f64, f64)> = curve
        .breakpoints
        .iter()
        .filter(|b| b.omega > curve.omega0 && b.omega <= upper)
        .map(|b| (b.omega.value(), b.impact))
        .collect();
    Ok((ols_slope(&pts)?, pts.len()))
}

/// Ordinary least-squares slope through `(x, y)` pairs.
pub fn ols_slope(pts: &[(f64, f64)]) -> Result<f64, RegimeError> {
    if pts.len() < 2 {
        return Err(RegimeError::TooFewPoints {
            required: 2,
            actual: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(RegimeError::TooFewPoints {
            required: 2,
            actual: 1,
        });
    }
    Ok(sxy / sxx)
}

/// Linear-regime fit for one auction side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeFit {
    pub date: String,
    pub side: Side,
    pub delta: f64,
    pub l_tilde: f64,
    pub omega0: ScaledVolume,
    pub omega_max: ScaledVolume,
    /// `None` when fewer than two breakpoints fall inside the window.
    pub beta_emp: Option<f64>,
    pub beta_theo: f64,
    /// Density samples used by the change-point search.
    pub n_points: usize,
    /// `p^(1)`.
    pub first_price: Price,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeParams {
    pub max_x: f64,
    pub min_points: usize,
}

impl Default for RegimeParams {
    fn default() -> Self {
        RegimeParams {
            max_x: crate::impact::DEFAULT_MAX_X,
            min_points: DEFAULT_MIN_POINTS,
        }
    }
}

/// Runs the change-point search, `ω^(max)` and both slopes for one side.
pub fn fit_regime(
    book: &AuctionBook,
    clearing: &ClearingResult,
    side: Side,
    params: RegimeParams,
    date: &str,
) -> Result<RegimeFit, RegimeError> {
    let samples: Vec<LiquiditySample> =
        liquidity_samples(book, side, clearing.price, clearing.volume, params.max_x)
            .map_err(|_| ImpactError::DegenerateAuction)?;
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.x, s.rho)).collect();
    let cp = changepoint(&pairs, params.min_points)?;
    let curve = impact_curve(book, clearing, side, params.max_x)?;
    let first_price = curve.first_price().ok_or(ImpactError::ZeroLiquidity)?;
    let upper = omega_max(&curve, cp.delta);
    let beta_emp = empirical_slope(&curve, upper).ok().map(|(b, _)| b);
    Ok(RegimeFit {
        date: date.to_string(),
        side,
        delta: cp.delta,
        l_tilde: cp.l_tilde,
        omega0: curve.omega0,
        omega_max: upper,
        beta_emp,
        beta_theo: theoretical_slope(first_price, cp.l_tilde)?,
        n_points: pairs.len(),
        first_price,
    })
}

pub const REGIME_CSV_HEADER: &str = "date,side,delta_bp,l_tilde,omega_max,beta_emp,beta_theo,n_points";

impl RegimeFit {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.date,
            self.side,
            self.delta / BASIS_POINT,
            self.l_tilde,
            self.omega_max.value(),
            self.beta_emp.map(|b| b.to_string()).unwrap_or_default(),
            self.beta_theo,
            self.n_points
        )
    }
}

/// Daily slope `S̃_d = (p^(1) L̃)^-1` per fit, in input order.
pub fn daily_slopes(fits: &[RegimeFit]) -> Vec<(String, Side, f64)> {
    fits.iter().map(|f| (f.date.clone(), f.side, f.beta_theo)).collect()
}
