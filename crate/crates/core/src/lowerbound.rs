//! Oscillatory witness `f(x) = n^{−s} cos(2πn x₁) e^{−π|x|²/R}` and the
//! sign-stability certificate for lower-bounding `‖f − g‖_{L¹}` over networks.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::function::Function;
use crate::metrics::grid_points;
use crate::netcore::ReluNetwork;
use crate::pwl::PiecewiseLinear;
use crate::quadrature::GaussLegendre;
use crate::spectral::{SpectralAtom, SpectralMeasure};

/// Values within this of zero count as either sign.
pub const SIGN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub n: usize,
    pub s: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub d: usize,
    pub eps: f64,
    pub depth: usize,
    pub width: usize,
}

/// `n = 2^{L+2} N^L` and the smallest `R` meeting both
/// `n^{−s}(n + d/(π√R))^s ≤ 1+ε` and `e^{−πd/R} ≥ 1−ε`.
pub fn make_witness(depth: usize, width: usize, s: f64, eps: f64, d: usize) -> Result<Witness> {
    if depth == 0 || width == 0 || d == 0 {
        return Err(invalid("L, N and d must be positive"));
    }
    let sl = s * depth as f64;
    if !(sl > 0.0 && sl <= 0.5) {
        return Err(invalid(format!("witness needs 0 < sL <= 1/2, got {sl}")));
    }
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(invalid(format!("eps must lie in (0, 1/2], got {eps}")));
    }
    let n_f = 2f64.powi(depth as i32 + 2) * (width as f64).powi(depth as i32);
    if n_f > 1e12 {
        return Err(invalid(format!("witness frequency {n_f} too large")));
    }
    let n = n_f as usize;
    let df = d as f64;
    let growth = (1.0 + eps).powf(1.0 / s) - 1.0;
    let seminorm_r = (df / (PI * n_f * growth)).powi(2);
    let envelope_r = PI * df / (1.0 / (1.0 - eps)).ln();
    let r = seminorm_r.max(envelope_r);
    if !r.is_finite() {
        return Err(invalid("no feasible envelope radius"));
    }
    Ok(Witness { n, s, r, d, eps, depth, width })
}

impl Witness {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let n = self.n as f64;
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        n.powf(-self.s) * (2.0 * PI * n * x[0]).cos() * (-PI * norm2 / self.r).exp()
    }

    /// `n^{−s}(n + d/(π√R))^s`, the seminorm bound for the witness.
    pub fn seminorm_bound(&self) -> f64 {
        let n = self.n as f64;
        n.powf(-self.s) * (n + self.d as f64 / (PI * self.r.sqrt())).powf(self.s)
    }

    /// Telgarsky count: intervals guaranteed sign-stable for any (L,N)-network.
    pub fn stable_guarantee(&self) -> i64 {
        self.n as i64 - (1i64 << (self.depth + 1)) * (self.width as i64).pow(self.depth as u32)
    }

    /// Lower bound on `∫_{j/n}^{(j+1)/n} |f − g| dx₁` for `g` of constant sign.
    pub fn per_interval_lower(&self) -> f64 {
        let n = self.n as f64;
        (1.0 - self.eps) / (PI * n.powf(self.s + 1.0))
    }

    /// `(1−ε)/(4√2 π N^{sL})`.
    pub fn theorem_bound(&self) -> f64 {
        (1.0 - self.eps) / (4.0 * 2f64.sqrt() * PI * (self.width as f64).powf(self.s * self.depth as f64))
    }

    /// Atomic surrogate of the spectrum: the Gaussian bump `R^{d/2}e^{−πR|ξ−n e₁|²}`
    /// sampled on a tensor midpoint grid of `k` points per axis over
    /// `±cutoff` standard deviations; the neglected mass is below
    /// `d·erfc(cutoff/√2)`.
    pub fn spectral_surrogate(&self, k: usize, cutoff: f64) -> Result<SpectralMeasure> {
        if k == 0 || self.d > 4 {
            return Err(invalid("surrogate needs k > 0 and d <= 4"));
        }
        let sigma = 1.0 / (2.0 * PI * self.r).sqrt();
        let h = 2.0 * cutoff * sigma / k as f64;
        let n = self.n as f64;
        let amp0 = n.powf(-self.s);
        let mut atoms = Vec::new();
        for p in grid_points(self.d, k) {
            let offs: Vec<f64> = p.iter().map(|u| (u - 0.5) * 2.0 * cutoff * sigma).collect();
            let q: f64 = offs.iter().map(|v| v * v).sum();
            let density = self.r.powf(self.d as f64 / 2.0) * (-PI * self.r * q).exp();
            let mut xi = offs;
            xi[0] += n;
            atoms.push(SpectralAtom::new(xi, amp0 * density * h.powi(self.d as i32), 0.0)?);
        }
        SpectralMeasure::atomic(self.d, atoms)
    }
}

impl Function for Witness {
    fn dim(&self) -> usize {
        self.d
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
}

/// Intervals `[j/n, (j+1)/n)`, `j < n`, on which `line` keeps one sign.
pub fn sign_stable_count(line: &PiecewiseLinear, n: usize) -> usize {
    let xs = line.xs();
    let mut count = 0;
    let mut k = 0;
    for j in 0..n {
        let a = j as f64 / n as f64;
        let b = (j + 1) as f64 / n as f64;
        let mut lo = line.eval(a).min(line.eval(b));
        let mut hi = line.eval(a).max(line.eval(b));
        while k < xs.len() && xs[k] <= a {
            k += 1;
        }
        let mut i = k;
        while i < xs.len() && xs[i] < b {
            let v = line.ys()[i];
            lo = lo.min(v);
            hi = hi.max(v);
            i += 1;
        }
        if lo >= -SIGN_TOL || hi <= SIGN_TOL {
            count += 1;
        }
    }
    count
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundReport {
    pub n: usize,
    pub s: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub stable_count_min: usize,
    pub certified_lower: f64,
    pub measured_l1: f64,
    pub lines: usize,
}

/// Restricts `net` to the `x₁`-lines through a midpoint grid of
/// `[0,1]^{d−1}` (`res` points per axis), credits each sign-stable interval
/// with the per-interval bound and averages over lines. `measured_l1` is
/// the same line average of `∫|f − net| dx₁`.
pub fn interval_l1_lower(w: &Witness, net: &ReluNetwork, res: usize) -> Result<LowerBoundReport> {
    if net.dim() != w.d {
        return Err(crate::error::Error::DimensionMismatch { expected: w.d, got: net.dim() });
    }
    if res == 0 {
        return Err(invalid("line grid resolution must be positive"));
    }
    let bases: Vec<Vec<f64>> = if w.d == 1 {
        vec![vec![0.0]]
    } else {
        grid_points(w.d - 1, res)
            .into_iter()
            .map(|p| std::iter::once(0.0).chain(p).collect())
            .collect()
    };
    let mut dir = vec![0.0; w.d];
    dir[0] = 1.0;
    let gl = GaussLegendre::new(8);
    let per_interval = w.per_interval_lower();
    let results: Vec<Result<(usize, f64)>> = bases
        .par_iter()
        .map(|base| {
            let line = net.restrict_to_line(base, &dir, (0.0, 1.0))?;
            let stable = sign_stable_count(&line, w.n);
            // panel edges: half-waves of the witness plus the network's kinks
            let mut edges: Vec<f64> = (0..=4 * w.n).map(|k| k as f64 / (4 * w.n) as f64).collect();
            edges.extend(line.xs().iter().copied());
            edges.sort_by(f64::total_cmp);
            edges.dedup();
            let mut x = base.clone();
            let l1 = gl.integrate_panels(&edges, |t| {
                x[0] = t;
                (w.eval(&x) - line.eval(t)).abs()
            });
            Ok((stable, l1))
        })
        .collect();
    let mut stable_min = usize::MAX;
    let mut lower = 0.0;
    let mut measured = 0.0;
    for r in results {
        let (stable, l1) = r?;
        stable_min = stable_min.min(stable);
        lower += stable as f64 * per_interval;
        measured += l1;
    }
    let lines = bases.len();
    Ok(LowerBoundReport {
        n: w.n,
        s: w.s,
        r: w.r,
        stable_count_min: stable_min,
        certified_lower: lower / lines as f64,
        measured_l1: measured / lines as f64,
        lines,
    })
}
