//! Short-horizon forecasts of an index series: Holt's linear trend method
//! and least-squares AR models on differenced data.

use serde::{Deserialize, Serialize};

use crate::domain::ExternalSeries;
use crate::numeric::normal_quantile;
use crate::predictor::least_squares;
use crate::{HciError, Result};

pub const DEFAULT_LEVEL: f64 = 0.80;
const MIN_HOLT_LEN: usize = 10;
const GRID_STEP: f64 = 0.05;
const SEARCH_TOL: f64 = 1e-4;
const PARAM_FLOOR: f64 = 1e-4;
pub const MAX_AR_ORDER: usize = 5;
pub const MAX_DIFF_ORDER: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoltModel {
    pub alpha: f64,
    pub beta: f64,
    pub level: f64,
    pub trend: f64,
    /// Mean squared one-step residual.
    pub residual_variance: f64,
    pub sse: f64,
    pub n: usize,
}

struct HoltRun {
    level: f64,
    trend: f64,
    sse: f64,
}

fn holt_run(x: &[f64], alpha: f64, beta: f64) -> HoltRun {
    let mut level = x[0];
    let mut trend = x[1] - x[0];
    let mut sse = 0.0;
    for (t, &xt) in x.iter().enumerate().skip(1) {
        let forecast = level + trend;
        if t >= 2 {
            sse += (xt - forecast).powi(2);
        }
        let new_level = alpha * xt + (1.0 - alpha) * forecast;
        trend = beta * (new_level - level) + (1.0 - beta) * trend;
        level = new_level;
    }
    HoltRun { level, trend, sse }
}

/// Fits Holt's method with `l_1 = x_1`, `b_1 = x_2 - x_1`. Without fixed
/// parameters, `(α, β)` minimize the one-step SSE over a 0.05 grid followed
/// by a shrinking pattern search down to a step of 1e-4.
pub fn fit_holt(series: &[f64], fixed: Option<(f64, f64)>) -> Result<HoltModel> {
    if series.len() < MIN_HOLT_LEN {
        return Err(HciError::InsufficientData(format!(
            "Holt fit needs at least {MIN_HOLT_LEN} points, got {}",
            series.len()
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(HciError::Invalid("series contains non-finite values".into()));
    }
    let (alpha, beta) = match fixed {
        Some((a, b)) => {
            if !(a > 0.0 && a <= 1.0 && b > 0.0 && b <= 1.0) {
                return Err(HciError::Config("Holt parameters must lie in (0, 1]".into()));
            }
            (a, b)
        }
        None => search_holt(series),
    };
    let run = holt_run(series, alpha, beta);
    let m = series.len() - 2;
    Ok(HoltModel {
        alpha,
        beta,
        level: run.level,
        trend: run.trend,
        residual_variance: run.sse / m as f64,
        sse: run.sse,
        n: series.len(),
    })
}

fn search_holt(x: &[f64]) -> (f64, f64) {
    let steps = (1.0 / GRID_STEP).round() as usize;
    let mut best = (GRID_STEP, GRID_STEP);
    let mut best_sse = f64::INFINITY;
    for i in 1..=steps {
        for j in 1..=steps {
            let (a, b) = (i as f64 * GRID_STEP, j as f64 * GRID_STEP);
            let sse = holt_run(x, a, b).sse;
            if sse < best_sse {
                best_sse = sse;
                best = (a, b);
            }
        }
    }
    let clamp = |v: f64| v.clamp(PARAM_FLOOR, 1.0);
    let mut step = GRID_STEP / 2.0;
    while step >= SEARCH_TOL {
        let mut improved = false;
        for (da, db) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let cand = (clamp(best.0 + da), clamp(best.1 + db));
            if cand == best {
                continue;
            }
            let sse = holt_run(x, cand.0, cand.1).sse;
            if sse < best_sse {
                best_sse = sse;
                best = cand;
                improved = true;
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMethod {
    Holt,
    Ar,
}

impl ForecastMethod {
    pub fn name(self) -> &'static str {
        match self {
            ForecastMethod::Holt => "holt",
            ForecastMethod::Ar => "ar",
        }
    }
}

impl std::str::FromStr for ForecastMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "holt" => Ok(ForecastMethod::Holt),
            "ar" | "arima" => Ok(ForecastMethod::Ar),
            other => Err(format!("unknown forecast method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub method: ForecastMethod,
    pub level: f64,
    pub points: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub sd: Vec<f64>,
}

impl ForecastResult {
    pub fn horizon(&self) -> usize {
        self.points.len()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }
}

fn check_forecast_args(h: usize, level: f64) -> Result<f64> {
    if h == 0 {
        return Err(HciError::Config("forecast horizon must be at least 1".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(HciError::Config(format!("forecast level must lie in (0, 1), got {level}")));
    }
    Ok(normal_quantile(0.5 * (1.0 + level)))
}

fn assemble(method: ForecastMethod, level: f64, z: f64, points: Vec<f64>, sd: Vec<f64>) -> ForecastResult {
    ForecastResult {
        method,
        level,
        lower: points.iter().zip(&sd).map(|(p, s)| p - z * s).collect(),
        upper: points.iter().zip(&sd).map(|(p, s)| p + z * s).collect(),
        points,
        sd,
    }
}

/// `l + h b` with half-width `z sqrt(σ² v_h)`, `v_h = 1 + Σ_{j<h} (α + jαβ)²`.
pub fn forecast_holt(model: &HoltModel, h: usize, level: f64) -> Result<ForecastResult> {
    let z = check_forecast_args(h, level)?;
    let mut v = 1.0;
    let mut points = Vec::with_capacity(h);
    let mut sd = Vec::with_capacity(h);
    for k in 1..=h {
        if k > 1 {
            let j = (k - 1) as f64;
            v += (model.alpha + j * model.alpha * model.beta).powi(2);
        }
        points.push(model.level + k as f64 * model.trend);
        sd.push((model.residual_variance * v).sqrt());
    }
    Ok(assemble(ForecastMethod::Holt, level, z, points, sd))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub p: usize,
    pub d: usize,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub innovation_variance: f64,
    /// Last `d + 1` values of each differencing level, needed to integrate
    /// forecasts: `tails[k]` ends with the latest value of `Δ^k x`.
    pub tails: Vec<Vec<f64>>,
    pub n: usize,
    pub aicc: f64,
}

fn difference(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

fn levels(x: &[f64], d: usize) -> Vec<Vec<f64>> {
    let mut out = vec![x.to_vec()];
    for _ in 0..d {
        let next = difference(out.last().unwrap());
        out.push(next);
    }
    out
}

/// Conditional LS of AR(p) with intercept on `w[start..]`.
fn ar_ls(w: &[f64], p: usize, start: usize) -> (f64, Vec<f64>, f64, usize) {
    let rows: Vec<usize> = (start.max(p)..w.len()).collect();
    let m = rows.len();
    let mut cols = vec![vec![1.0; m]];
    for i in 1..=p {
        cols.push(rows.iter().map(|&t| w[t - i]).collect());
    }
    let y: Vec<f64> = rows.iter().map(|&t| w[t]).collect();
    let (beta, _) = least_squares(cols, y.clone());
    let ssr: f64 = rows
        .iter()
        .enumerate()
        .map(|(r, &t)| {
            let fit = beta[0] + (1..=p).map(|i| beta[i] * w[t - i]).sum::<f64>();
            (y[r] - fit).powi(2)
        })
        .sum();
    (beta[0], beta[1..].to_vec(), ssr, m)
}

fn aicc(ssr: f64, m: usize, p: usize) -> f64 {
    let k = (p + 2) as f64;
    let m = m as f64;
    if m - k - 1.0 <= 0.0 {
        return f64::INFINITY;
    }
    m * (ssr.max(f64::MIN_POSITIVE) / m).ln() + 2.0 * k + 2.0 * k * (k + 1.0) / (m - k - 1.0)
}

fn build_ar(series: &[f64], p: usize, d: usize, start: usize) -> Result<ArModel> {
    if d > MAX_DIFF_ORDER || p > MAX_AR_ORDER {
        return Err(HciError::Config(format!(
            "AR order must satisfy p <= {MAX_AR_ORDER}, d <= {MAX_DIFF_ORDER}"
        )));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(HciError::Invalid("series contains non-finite values".into()));
    }
    let lv = levels(series, d);
    let w = &lv[d];
    let needed = (10 * p).max(p + 3);
    if w.len() < needed {
        return Err(HciError::InsufficientData(format!(
            "AR({p}) on {d}-times differenced data needs {needed} points after differencing, got {}",
            w.len()
        )));
    }
    let (intercept, coefficients, ssr, m) = ar_ls(w, p, start);
    let innovation_variance = ssr / (m - p - 1) as f64;
    Ok(ArModel {
        p,
        d,
        intercept,
        coefficients,
        innovation_variance,
        tails: lv.iter().map(|l| l[l.len().saturating_sub(MAX_AR_ORDER + 1)..].to_vec()).collect(),
        n: series.len(),
        aicc: aicc(ssr, m, p),
    })
}

/// Least-squares AR(p) with intercept on the `d`-times differenced series.
pub fn fit_ar_diff(series: &[f64], p: usize, d: usize) -> Result<ArModel> {
    build_ar(series, p, d, 0)
}

/// Minimum-AICc `(p, d)` over `p <= 5`, `d <= 2`, each candidate scored on
/// the same original-time observations.
pub fn select_ar(series: &[f64]) -> Result<ArModel> {
    // Differencing d times loses d points. Aligning every candidate on
    // original time t >= MAX_AR_ORDER + MAX_DIFF_ORDER gives a common set.
    let common = MAX_AR_ORDER + MAX_DIFF_ORDER;
    let mut best: Option<ArModel> = None;
    for d in 0..=MAX_DIFF_ORDER {
        for p in 0..=MAX_AR_ORDER {
            let Ok(m) = build_ar(series, p, d, common - d) else {
                continue;
            };
            if best.as_ref().is_none_or(|b| m.aicc < b.aicc) {
                best = Some(m);
            }
        }
    }
    let chosen = best.ok_or_else(|| HciError::InsufficientData("series too short for any AR candidate".into()))?;
    // Refit the chosen order on all available observations.
    fit_ar_diff(series, chosen.p, chosen.d)
}

/// ψ-weights of `1 / (φ(B) (1 - B)^d)`.
fn psi_weights(model: &ArModel, h: usize) -> Vec<f64> {
    // a(B) = φ(B)(1-B)^d = 1 - Σ a_i B^i
    let mut poly = vec![1.0];
    poly.extend(model.coefficients.iter().map(|c| -c));
    for _ in 0..model.d {
        let mut next = vec![0.0; poly.len() + 1];
        for (i, &c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c;
        }
        poly = next;
    }
    let a: Vec<f64> = poly[1..].iter().map(|c| -c).collect();
    let mut psi = vec![1.0];
    for j in 1..h {
        let s = (1..=j.min(a.len())).map(|i| a[i - 1] * psi[j - i]).sum();
        psi.push(s);
    }
    psi
}

/// Iterates the AR recursion on the differenced scale, integrates `d` times
/// and accumulates variance through the ψ-weights.
pub fn forecast_ar(model: &ArModel, h: usize, level: f64) -> Result<ForecastResult> {
    let z = check_forecast_args(h, level)?;
    let d = model.d;
    let mut w: Vec<f64> = model.tails[d].clone();
    let base = w.len();
    for _ in 0..h {
        let t = w.len();
        let next = model.intercept
            + model
                .coefficients
                .iter()
                .enumerate()
                .map(|(i, c)| c * w[t - 1 - i])
                .sum::<f64>();
        w.push(next);
    }
    let mut path: Vec<f64> = w[base..].to_vec();
    for k in (0..d).rev() {
        let mut last = *model.tails[k].last().unwrap();
        path = path
            .iter()
            .map(|dx| {
                last += dx;
                last
            })
            .collect();
    }
    let psi = psi_weights(model, h);
    let mut acc = 0.0;
    let sd: Vec<f64> = psi
        .iter()
        .map(|p| {
            acc += p * p;
            (model.innovation_variance * acc).sqrt()
        })
        .collect();
    Ok(assemble(ForecastMethod::Ar, level, z, path, sd))
}

/// Forecasting with aligned external regressors is not supported.
pub fn forecast_with_regressors(_series: &[f64], _regressors: &[ExternalSeries], _h: usize) -> Result<ForecastResult> {
    Err(HciError::Config("forecasting with external regressors is not supported".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_series_extrapolates_exactly() {
        let x: Vec<f64> = (0..40).map(|t| 1000.0 + 2.5 * t as f64).collect();
        let m = fit_holt(&x, None).unwrap();
        let f = forecast_holt(&m, 4, 0.8).unwrap();
        for (k, p) in f.points.iter().enumerate() {
            assert!((p - (1000.0 + 2.5 * (40 + k) as f64)).abs() < 1e-9);
        }
        assert!(f.widths().iter().all(|w| w.abs() < 1e-9));
    }

    #[test]
    fn constant_series_has_zero_trend() {
        let m = fit_holt(&[1000.0; 20], Some((0.3, 0.1))).unwrap();
        assert_eq!(m.level, 1000.0);
        assert_eq!(m.trend, 0.0);
    }

    #[test]
    fn one_step_width_and_monotonicity() {
        let x: Vec<f64> = (0..30).map(|t| 1000.0 + t as f64 + ((t * 7) % 5) as f64).collect();
        let m = fit_holt(&x, None).unwrap();
        let f = forecast_holt(&m, 6, 0.8).unwrap();
        let w = f.widths();
        assert!((w[0] - 2.0 * 1.2815515655446004 * m.residual_variance.sqrt()).abs() < 1e-9);
        assert!(w.windows(2).all(|p| p[1] > p[0]));
        assert!(fit_holt(&x[..9], None).is_err());
    }

    #[test]
    fn random_walk_ar_closed_form() {
        let m = ArModel {
            p: 0,
            d: 1,
            intercept: 0.0,
            coefficients: vec![],
            innovation_variance: 4.0,
            tails: vec![vec![10.0, 12.0], vec![2.0]],
            n: 2,
            aicc: 0.0,
        };
        let f = forecast_ar(&m, 5, 0.8).unwrap();
        assert!(f.points.iter().all(|&p| p == 12.0));
        for (h, s) in f.sd.iter().enumerate() {
            assert!((s - 2.0 * ((h + 1) as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn ar_one_step_matches_recursion() {
        let x: Vec<f64> = (0..60).map(|t| ((t * 13) % 7) as f64 + 0.1 * t as f64).collect();
        let m = fit_ar_diff(&x, 2, 0).unwrap();
        let f = forecast_ar(&m, 1, 0.8).unwrap();
        let n = x.len();
        let expect = m.intercept + m.coefficients[0] * x[n - 1] + m.coefficients[1] * x[n - 2];
        assert!((f.points[0] - expect).abs() < 1e-12);
        assert!((f.sd[0] - m.innovation_variance.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn second_differences_integrate_twice() {
        // A quadratic has constant second differences.
        let x: Vec<f64> = (0..30).map(|t| (t * t) as f64).collect();
        let m = fit_ar_diff(&x, 0, 2).unwrap();
        let f = forecast_ar(&m, 3, 0.8).unwrap();
        for (k, p) in f.points.iter().enumerate() {
            let t = (30 + k) as f64;
            assert!((p - t * t).abs() < 1e-6, "{p} vs {}", t * t);
        }
    }

    #[test]
    fn ar_length_precondition() {
        assert!(fit_ar_diff(&[1.0; 15], 2, 1).is_err());
        assert!(fit_ar_diff(&[1.0; 15], 6, 0).is_err());
    }
}
