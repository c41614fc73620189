//! Error measurement on the unit cube and log-log rate fitting.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::function::Function;
use crate::quadrature::pairwise_sum;
use crate::spectral::SpectralMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "mc")]
    MonteCarlo,
    #[serde(rename = "grid")]
    Grid,
    #[serde(rename = "grid+lipschitz")]
    GridLipschitz,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::MonteCarlo => "mc",
            Method::Grid => "grid",
            Method::GridLipschitz => "grid+lipschitz",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorEstimate {
    /// `f64::INFINITY` for the sup norm
    pub p: f64,
    pub value: f64,
    pub std_error: f64,
    pub method: Method,
    pub evaluations: usize,
}

fn check_dims(f: &impl Function, g: &impl Function) -> Result<usize> {
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: g.dim() });
    }
    Ok(f.dim())
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("norm exponent must be >= 1, got {p}")))
    }
}

/// Uniform points in `[0,1]^d`, drawn sequentially from `rng`.
pub fn uniform_points<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect()
}

/// `|f − g|` at each point, evaluated in parallel, in input order.
pub fn abs_differences<F: Function, G: Function>(f: &F, g: &G, points: &[Vec<f64>]) -> Vec<f64> {
    points.par_iter().map(|x| (f.value(x) - g.value(x)).abs()).collect()
}

/// `(mean |e|^p)^{1/p}` (or `max |e|` for `p = ∞`) with a delta-method standard error.
pub fn lp_from_samples(errors: &[f64], p: f64) -> (f64, f64) {
    if p.is_infinite() {
        return (errors.iter().copied().fold(0.0, f64::max), 0.0);
    }
    let n = errors.len() as f64;
    let powers: Vec<f64> = errors.iter().map(|e| e.powf(p)).collect();
    let mean = pairwise_sum(&powers) / n;
    let value = mean.powf(1.0 / p);
    if mean == 0.0 || errors.len() < 2 {
        return (value, 0.0);
    }
    let centered: Vec<f64> = powers.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&centered) / (n - 1.0);
    let se_mean = (var / n).sqrt();
    (value, value / (p * mean) * se_mean)
}

/// Monte Carlo `L^p(Ω)` distance from `n` uniform points.
pub fn lp_error_mc<F: Function, G: Function, R: Rng + ?Sized>(
    f: &F,
    g: &G,
    p: f64,
    n: usize,
    rng: &mut R,
) -> Result<ErrorEstimate> {
    check_p(p)?;
    if p.is_infinite() {
        return Err(invalid("Monte Carlo estimation needs a finite p"));
    }
    if n < 2 {
        return Err(invalid("Monte Carlo estimation needs at least 2 points"));
    }
    let d = check_dims(f, g)?;
    let pts = uniform_points(d, n, rng);
    let errs = abs_differences(f, g, &pts);
    let (value, std_error) = lp_from_samples(&errs, p);
    Ok(ErrorEstimate { p, value, std_error, method: Method::MonteCarlo, evaluations: n })
}

/// Midpoints of the tensor grid with `res` cells per axis.
pub fn grid_points(d: usize, res: usize) -> Vec<Vec<f64>> {
    let total = res.pow(d as u32);
    let h = 1.0 / res as f64;
    (0..total)
        .map(|mut idx| {
            let mut x = vec![0.0; d];
            for xi in x.iter_mut() {
                *xi = ((idx % res) as f64 + 0.5) * h;
                idx /= res;
            }
            x
        })
        .collect()
}

pub const MAX_GRID_DIM: usize = 3;
pub const MIN_GRID_RES: usize = 16;

/// Tensor midpoint rule on `[0,1]^d`, `d ≤ 3`.
pub fn lp_error_grid<F: Function, G: Function>(f: &F, g: &G, p: f64, resolution: usize) -> Result<ErrorEstimate> {
    check_p(p)?;
    let d = check_dims(f, g)?;
    if d > MAX_GRID_DIM {
        return Err(Error::UnsupportedTarget(format!(
            "grid quadrature supports d <= {MAX_GRID_DIM}, got {d}; use Monte Carlo"
        )));
    }
    if resolution < MIN_GRID_RES {
        return Err(invalid(format!("grid resolution must be >= {MIN_GRID_RES}, got {resolution}")));
    }
    let pts = grid_points(d, resolution);
    let errs = abs_differences(f, g, &pts);
    let (value, _) = lp_from_samples(&errs, p);
    Ok(ErrorEstimate { p, value, std_error: 0.0, method: Method::Grid, evaluations: pts.len() })
}

/// `max_grid |f − net| + (Lip_f + Lip_net)·h/2`, an upper bound on the sup
/// error over `Ω` (midpoints are within `h/2` of every point in `ℓ∞`).
pub fn linf_error_certified<N: Function>(
    target: &SpectralMeasure,
    net: &N,
    net_lipschitz: f64,
    resolution: usize,
) -> Result<ErrorEstimate> {
    let d = check_dims(target, net)?;
    if d > MAX_GRID_DIM {
        return Err(Error::UnsupportedTarget(format!("certified sup norm supports d <= {MAX_GRID_DIM}")));
    }
    if resolution == 0 {
        return Err(invalid("grid resolution must be positive"));
    }
    let lip = target.lipschitz_bound()? + net_lipschitz;
    let pts = grid_points(d, resolution);
    let errs = abs_differences(target, net, &pts);
    let max = errs.iter().copied().fold(0.0, f64::max);
    let h = 1.0 / resolution as f64;
    Ok(ErrorEstimate {
        p: f64::INFINITY,
        value: max + lip * h / 2.0,
        std_error: 0.0,
        method: Method::GridLipschitz,
        evaluations: pts.len(),
    })
}

/// Same certificate on a locally refined grid: cells whose bound
/// `|e(center)| + Lip·h/2` exceeds `(1 + slack)·max|e|` are split in half
/// along every axis, up to `max_levels` times.
pub fn linf_error_certified_refined<N: Function>(
    target: &SpectralMeasure,
    net: &N,
    net_lipschitz: f64,
    resolution: usize,
    slack: f64,
    max_levels: usize,
) -> Result<ErrorEstimate> {
    let d = check_dims(target, net)?;
    if d > MAX_GRID_DIM {
        return Err(Error::UnsupportedTarget(format!("certified sup norm supports d <= {MAX_GRID_DIM}")));
    }
    if resolution == 0 || !(slack >= 0.0) {
        return Err(invalid("resolution must be positive and slack nonnegative"));
    }
    let lip = target.lipschitz_bound()? + net_lipschitz;
    let mut centers = grid_points(d, resolution);
    let mut half = 0.5 / resolution as f64;
    let mut evaluations = 0;
    let mut max_err: f64 = 0.0;
    let mut frozen: f64 = 0.0;
    for level in 0..=max_levels {
        let errs = abs_differences(target, net, &centers);
        evaluations += errs.len();
        max_err = errs.iter().copied().fold(max_err, f64::max);
        let threshold = (1.0 + slack) * max_err;
        let mut next = Vec::new();
        for (c, e) in centers.iter().zip(&errs) {
            let bound = e + lip * half;
            if bound <= threshold || level == max_levels {
                frozen = frozen.max(bound);
            } else {
                for mask in 0..(1usize << d) {
                    let child = c
                        .iter()
                        .enumerate()
                        .map(|(k, v)| if mask >> k & 1 == 1 { v + half / 2.0 } else { v - half / 2.0 })
                        .collect();
                    next.push(child);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        centers = next;
        half /= 2.0;
    }
    Ok(ErrorEstimate {
        p: f64::INFINITY,
        value: frozen.max(max_err),
        std_error: 0.0,
        method: Method::GridLipschitz,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub ns: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// root-mean-square residual in log space
    pub residual: f64,
}

/// Least squares of `ln error` on `ln N`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(invalid(format!("rate fit needs at least 3 points, got {}", points.len())));
    }
    if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(invalid("N values must be strictly increasing"));
    }
    if let Some((n, e)) = points.iter().find(|(n, e)| !(*e > 0.0) || !(*n > 0.0)) {
        return Err(invalid(format!("rate fit needs positive N and errors, got ({n}, {e})")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual =
        (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RateFit {
        ns: points.iter().map(|p| p.0).collect(),
        errors: points.iter().map(|p| p.1).collect(),
        slope,
        intercept,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitStatus {
    Ok,
    Saturated,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFit {
    pub status: FitStatus,
    pub fit: Option<RateFit>,
    /// N values left out of the fit
    pub excluded: Vec<f64>,
}

/// Errors at or below this are treated as exact reproduction.
pub const EXACT_TOL: f64 = 1e-12;

/// Rate fit that leaves out leading points stuck at the trivial bound and
/// points that are already exact; `Saturated` when fewer than 3 remain.
pub fn fit_rate_flagged(points: &[(f64, f64)], trivial_bound: f64) -> Result<SweepFit> {
    let mut excluded = Vec::new();
    let mut kept = Vec::new();
    let mut leading = true;
    for &(n, e) in points {
        if e <= EXACT_TOL || (leading && e >= trivial_bound) {
            excluded.push(n);
            continue;
        }
        leading = false;
        kept.push((n, e));
    }
    if kept.len() < 3 {
        return Ok(SweepFit { status: FitStatus::Saturated, fit: None, excluded });
    }
    Ok(SweepFit { status: FitStatus::Ok, fit: Some(fit_rate(&kept)?), excluded })
}
