//! Batch statistics over per-auction outputs.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{ParseError, StatsError};

/// Mid-ranks (1-based), averaging over ties.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateSample);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub rho: f64,
    pub n: usize,
    /// Two-sided p-value from the t approximation with `n - 2` degrees of freedom.
    pub p_value: f64,
}

impl Correlation {
    /// `***`, `**`, `*` at 0.1%, 1% and 5%; empty otherwise.
    pub fn stars(&self) -> &'static str {
        significance_stars(self.p_value)
    }
}

pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

/// Spearman rank correlation with mid-ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewPoints {
            required: 3,
            actual: x.len(),
        });
    }
    let rho = pearson(&mid_ranks(x), &mid_ranks(y))?;
    let n = x.len();
    let df = (n - 2) as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok(Correlation { rho, n, p_value })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Alternative {
    TwoSided,
    /// `F_x` lies above `F_y` somewhere (x tends to be smaller): statistic `sup(F_x - F_y)`.
    Greater,
    /// Statistic `sup(F_y - F_x)`.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov survival function `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test with asymptotic p-values.
pub fn ks_two_sample(x: &[f64], y: &[f64], alternative: Alternative) -> Result<KsResult, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let (mut d_plus, mut d_minus) = (0.0f64, 0.0f64);
    while i < n || j < m {
        let v = match (xs.get(i), ys.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < n && xs[i] == v {
            i += 1;
        }
        while j < m && ys[j] == v {
            j += 1;
        }
        let (fx, fy) = (i as f64 / n as f64, j as f64 / m as f64);
        d_plus = d_plus.max(fx - fy);
        d_minus = d_minus.max(fy - fx);
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let (statistic, p_value) = match alternative {
        Alternative::TwoSided => {
            let d = d_plus.max(d_minus);
            (d, kolmogorov_sf(ne.sqrt() * d))
        }
        Alternative::Greater => (d_plus, (-2.0 * ne * d_plus * d_plus).exp()),
        Alternative::Less => (d_minus, (-2.0 * ne * d_minus * d_minus).exp()),
    };
    Ok(KsResult { statistic, p_value })
}

/// Fraction of zero-impact volumes `ω^(0)` strictly above `threshold`: the
/// share of (day, side) pairs on which an order of scaled size `threshold`
/// leaves the price unchanged. An order of exactly `ω^(0)` moves the price.
pub fn zero_impact_probability(omega0: &[f64], threshold: f64) -> Result<f64, StatsError> {
    if omega0.is_empty() {
        return Err(StatsError::EmptyBatch);
    }
    if !(threshold > 0.0) {
        return Err(StatsError::InvalidThreshold);
    }
    let hits = omega0.iter().filter(|w| **w > threshold).count();
    Ok(hits as f64 / omega0.len() as f64)
}

/// Exact reverse CDF `(v, #{x >= v} / n)` at each distinct value.
pub fn rcdf(values: &[f64]) -> Result<Vec<(f64, f64)>, StatsError> {
    if values.len() < 2 {
        return Err(StatsError::TooFewPoints {
            required: 2,
            actual: values.len(),
        });
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < v.len() {
        out.push((v[i], (v.len() - i) as f64 / n));
        let x = v[i];
        while i < v.len() && v[i] == x {
            i += 1;
        }
    }
    Ok(out)
}

/// Reverse CDF evaluated at an arbitrary point.
pub fn rcdf_at(values: &[f64], at: f64) -> f64 {
    values.iter().filter(|v| **v >= at).count() as f64 / values.len() as f64
}

/// Silverman's rule-of-thumb bandwidth.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64, StatsError> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = p * (n - 1.0);
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !(spread > 0.0) {
        return Err(StatsError::DegenerateSample);
    }
    Ok(0.9 * spread * n.powf(-0.2))
}

/// Gaussian kernel density on `points` equally spaced abscissae covering
/// `[min - 4h, max + 4h]`.
pub fn kernel_density(values: &[f64], points: usize, bandwidth: Option<f64>) -> Result<Vec<(f64, f64)>, StatsError> {
    if values.len() < 2 {
        return Err(StatsError::TooFewPoints {
            required: 2,
            actual: values.len(),
        });
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 => h,
        Some(_) => return Err(StatsError::InvalidThreshold),
        None => silverman_bandwidth(values)?,
    };
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * h;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * h;
    let points = points.max(2);
    let step = (hi - lo) / (points - 1) as f64;
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    Ok((0..points)
        .map(|k| {
            let x = lo + k as f64 * step;
            let d: f64 = values.iter().map(|v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum();
            (x, d * norm)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportKind {
    Smoothed,
    Rcdf,
}

/// Plot-ready distribution table.
pub fn distribution_report(values: &[f64], kind: ReportKind) -> Result<Vec<(f64, f64)>, StatsError> {
    match kind {
        ReportKind::Smoothed => kernel_density(values, 512, None),
        ReportKind::Rcdf => rcdf(values),
    }
}

/// Per-auction summary consumed by the batch statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    pub date: String,
    pub p_a: f64,
    pub q_a: u64,
    pub omega0_b: f64,
    pub omega0_s: f64,
    pub delta_b: Option<f64>,
    pub delta_s: Option<f64>,
    pub l_tilde_b: Option<f64>,
    pub l_tilde_s: Option<f64>,
    pub slope_b: Option<f64>,
    pub slope_s: Option<f64>,
    pub omega_max_b: Option<f64>,
    pub omega_max_s: Option<f64>,
    /// `p_a Q_a L̃` per side.
    pub cash_liquidity_b: Option<f64>,
    pub cash_liquidity_s: Option<f64>,
    /// `δω^(i)` for i >= 0, `;`-separated.
    #[serde(with = "semicolon_list")]
    pub domega_b: Vec<f64>,
    #[serde(with = "semicolon_list")]
    pub domega_s: Vec<f64>,
}

/// `L^$ = p_a Q_a L̃`.
pub fn cash_liquidity(p_a: f64, q_a: u64, l_tilde: f64) -> f64 {
    p_a * q_a as f64 * l_tilde
}

mod semicolon_list {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let joined: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        s.serialize_str(&joined.join(";"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let s = String::deserialize(d)?;
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.split(';')
            .map(|t| t.trim().parse::<f64>().map_err(serde::de::Error::custom))
            .collect()
    }
}

pub fn write_metrics<W: Write>(out: W, days: &[DayMetrics]) -> Result<(), ParseError> {
    let mut w = csv::Writer::from_writer(out);
    for d in days {
        w.serialize(d)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<DayMetrics>, ParseError> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (i, row) in r.deserialize().enumerate() {
        out.push(row.map_err(|e| ParseError::Row {
            line: i as u64 + 2,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Pairwise KS statistics between the cross-day distributions of `δω^(i)`
/// and `δω^(j)`, `0 <= i < j <= max_index`, pooling both sides.
pub fn increment_ks_table(days: &[DayMetrics], max_index: usize) -> Vec<(usize, usize, KsResult)> {
    let column = |i: usize| -> Vec<f64> {
        days.iter()
            .flat_map(|d| [d.domega_b.get(i), d.domega_s.get(i)])
            .flatten()
            .copied()
            .collect()
    };
    let cols: Vec<Vec<f64>> = (0..=max_index).map(column).collect();
    let mut out = Vec::new();
    for i in 0..=max_index {
        for j in i + 1..=max_index {
            if let Ok(r) = ks_two_sample(&cols[i], &cols[j], Alternative::TwoSided) {
                out.push((i, j, r));
            }
        }
    }
    out
}

/// Zero-impact summary of a batch: correlation and KS between buy and sell
/// zero-impact volumes, and the probability of no impact at a threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroImpactReport {
    pub observations: usize,
    pub spearman: Option<Correlation>,
    pub ks: Option<KsResult>,
    pub threshold: f64,
    pub p_zero_impact: f64,
    /// Fraction of (day, side) fits with `ω^(max)` above 0.5.
    pub p_omega_max_above_half: Option<f64>,
}

pub fn zero_impact_report(days: &[DayMetrics], threshold: f64) -> Result<ZeroImpactReport, StatsError> {
    let b: Vec<f64> = days.iter().map(|d| d.omega0_b).collect();
    let s: Vec<f64> = days.iter().map(|d| d.omega0_s).collect();
    let both: Vec<f64> = b.iter().chain(&s).copied().collect();
    let omax: Vec<f64> = days
        .iter()
        .flat_map(|d| [d.omega_max_b, d.omega_max_s])
        .flatten()
        .collect();
    Ok(ZeroImpactReport {
        observations: days.len(),
        spearman: spearman(&b, &s).ok(),
        ks: ks_two_sample(&b, &s, Alternative::TwoSided).ok(),
        threshold,
        p_zero_impact: zero_impact_probability(&both, threshold)?,
        p_omega_max_above_half: (!omax.is_empty())
            .then(|| omax.iter().filter(|w| **w > 0.5).count() as f64 / omax.len() as f64),
    })
}
