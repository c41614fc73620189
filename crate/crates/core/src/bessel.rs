//! The Bessel potential `f = F^{-1}[(1+4π²|ξ|²)^{-(α+d)/2}]`.
//!
//! `f` is radial; with `ρ = |x|` and `P = Γ((α+1)/2) / (2^d π^{(d+1)/2} Γ((α+d)/2))`,
//!
//! ```text
//! f(ρ) = P ∫_ℝ (1+u²)^{-(α+1)/2} cos(ρu) du.
//! ```
//!
//! Substituting `v = ρu` gives `f(ρ) = 2Pρ^α J(ρ)` and
//! `f(0) − f(ρ) = 2Pρ^α I(ρ)` with weight `w(v) = (ρ²+v²)^{-(1+α)/2}` and
//! `J = ∫₀^∞ w cos v`, `I = ∫₀^∞ w (1 − cos v)`. Small radii use `I` so the
//! drop near the origin never suffers cancellation.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{euler_limit, GaussLegendre};
use crate::special::log_gamma;
use crate::spectral::BarronNorm;

const GL_NODES: usize = 24;
const TAIL_PANELS: usize = 40;
/// Upper limit of the numerically integrated part of norm integrals.
pub const NORM_CUTOFF: f64 = 1e4;

#[derive(Debug, Clone, PartialEq)]
pub struct BesselTarget {
    alpha: f64,
    dim: usize,
    prefactor: f64,
    value_at_zero: f64,
}

impl BesselTarget {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid(format!("Bessel potential needs 0 < alpha <= 1, got {alpha}")));
        }
        if !(1..=3).contains(&dim) {
            return Err(invalid(format!("Bessel potential supports d in 1..=3, got {dim}")));
        }
        let d = dim as f64;
        let ln_p = log_gamma(0.5 * (alpha + 1.0))?
            - d * 2f64.ln()
            - 0.5 * (d + 1.0) * PI.ln()
            - log_gamma(0.5 * (alpha + d))?;
        let prefactor = ln_p.exp();
        // ∫_ℝ (1+u²)^{-(α+1)/2} du = √π Γ(α/2) / Γ((α+1)/2)
        let mass = (0.5 * PI.ln() + log_gamma(0.5 * alpha)? - log_gamma(0.5 * (alpha + 1.0))?).exp();
        Ok(Self { alpha, dim, prefactor, value_at_zero: prefactor * mass })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    /// `f(ρ)` for `ρ ≥ 0`.
    pub fn eval_radial(&self, rho: f64) -> f64 {
        if rho <= 1.0 {
            self.value_at_zero - self.drop(rho)
        } else {
            2.0 * self.prefactor * rho.powf(self.alpha) * oscillatory_cos(rho, self.alpha)
        }
    }

    /// `f(0) − f(ρ)`, computed without cancellation for `ρ ≤ 1`.
    pub fn drop(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        if rho > 1.0 {
            return self.value_at_zero - self.eval_radial(rho);
        }
        2.0 * self.prefactor * rho.powf(self.alpha) * one_minus_cos_integral(rho, self.alpha)
    }

    /// `f(0)` in closed form.
    pub fn value_at_zero(&self) -> f64 {
        self.value_at_zero
    }

    /// `2^{-d} π^{(1-d)/2} Γ((d+1)/2)^{-1} e^{-ρ}`, valid only for `α = 1`.
    pub fn closed_form_alpha_one(dim: usize, rho: f64) -> f64 {
        let d = dim as f64;
        let ln_c = -d * 2f64.ln() + 0.5 * (1.0 - d) * PI.ln()
            - log_gamma(0.5 * (d + 1.0)).expect("positive argument");
        (ln_c - rho).exp()
    }

    /// Least-squares slope of `ln(f(0) − f(ρ))` against `ln ρ`.
    pub fn holder_exponent(&self, radii: &[f64]) -> Result<f64> {
        if radii.len() < 4 {
            return Err(invalid("Hölder fit needs at least 4 radii"));
        }
        if radii.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(invalid("radii must be strictly decreasing"));
        }
        if radii.iter().any(|r| !(*r > 0.0 && *r <= 0.5)) {
            return Err(invalid("radii must lie in (0, 1/2]"));
        }
        let mut pts = Vec::with_capacity(radii.len());
        for &r in radii {
            let dv = self.drop(r);
            if !(dv > 0.0) {
                return Err(Error::Quadrature(format!("nonpositive difference f(0) - f({r}) = {dv}")));
            }
            pts.push((r.ln(), dv.ln()));
        }
        Ok(least_squares_slope(&pts))
    }

    /// `∫_{|ξ| ≤ cutoff} (1+|ξ|₁)^s (1+4π²|ξ|²)^{-(α+d)/2} dξ`, radially reduced.
    pub fn barron_integral(&self, s: f64, cutoff: f64) -> Result<f64> {
        if !(cutoff > 1.0) {
            return Err(invalid(format!("cutoff must exceed 1, got {cutoff}")));
        }
        if !(s >= 0.0) {
            return Err(invalid(format!("smoothness index must be >= 0, got {s}")));
        }
        Ok(self.radial_integral(s, 1.0, cutoff))
    }

    /// Growth diagnostic of the cutoff integral at cutoffs `10², 10³, 10⁴`.
    pub fn barron_dichotomy(&self, s: f64) -> Result<Dichotomy> {
        let cutoffs = [1e2, 1e3, 1e4];
        let mut values = [0.0; 3];
        for (v, c) in values.iter_mut().zip(cutoffs) {
            *v = self.barron_integral(s, c)?;
        }
        let ratio = (values[2] - values[1]) / (values[1] - values[0]);
        let relative_change = (values[2] - values[1]) / values[1];
        let verdict = if ratio < DICHOTOMY_RATIO { Verdict::Convergent } else { Verdict::Divergent };
        Ok(Dichotomy { s, alpha: self.alpha, cutoffs, values, ratio, relative_change, verdict })
    }

    /// Seminorm and full norm; finite exactly for `s < α`.
    pub fn barron_norm(&self, s: f64) -> Result<BarronNorm> {
        if s >= self.alpha {
            return Err(Error::DivergentNorm { s, limit: self.alpha });
        }
        let tail = self.asymptotic_tail(s, NORM_CUTOFF);
        Ok(BarronNorm {
            seminorm: self.radial_integral(s, 0.0, NORM_CUTOFF) + tail,
            full_norm: self.radial_integral(s, 1.0, NORM_CUTOFF) + tail,
        })
    }

    /// `∫_{|ξ|>C}` using `(1+4π²ρ²)^{-(α+d)/2} ≈ (2πρ)^{-(α+d)}` and `|ξ|₁^s` weight.
    fn asymptotic_tail(&self, s: f64, cutoff: f64) -> f64 {
        let b = angular_average(self.dim, s, 0.0, 1.0);
        b * (2.0 * PI).powf(-(self.alpha + self.dim as f64)) * cutoff.powf(s - self.alpha)
            / (self.alpha - s)
    }

    /// `∫_0^C ρ^{d-1} (1+4π²ρ²)^{-(α+d)/2} ∫_{S^{d-1}} (offset + ρ|ω|₁)^s dω dρ`.
    fn radial_integral(&self, s: f64, offset: f64, cutoff: f64) -> f64 {
        let gl = GaussLegendre::new(GL_NODES);
        let d = self.dim as f64;
        let expo = -(self.alpha + d) / 2.0;
        let mut edges = vec![0.0, 1e-3];
        let per_decade = 12;
        let mut k = 1;
        loop {
            let e = 1e-3 * 10f64.powf(k as f64 / per_decade as f64);
            if e >= cutoff {
                break;
            }
            edges.push(e);
            k += 1;
        }
        edges.push(cutoff);
        gl.integrate_panels(&edges, |rho| {
            rho.powf(d - 1.0)
                * (1.0 + 4.0 * PI * PI * rho * rho).powf(expo)
                * angular_average(self.dim, s, offset, rho)
        })
    }
}

/// Increment ratio below which the cutoff integral is declared convergent.
pub const DICHOTOMY_RATIO: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Convergent,
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dichotomy {
    pub s: f64,
    pub alpha: f64,
    pub cutoffs: [f64; 3],
    pub values: [f64; 3],
    /// `(V(10⁴) − V(10³)) / (V(10³) − V(10²))`
    pub ratio: f64,
    /// `(V(10⁴) − V(10³)) / V(10³)`
    pub relative_change: f64,
    pub verdict: Verdict,
}

/// `∫_{S^{d-1}} (offset + ρ|ω|₁)^s dω`; with `offset = 0, ρ = 1` this is `∫ |ω|₁^s`.
fn angular_average(dim: usize, s: f64, offset: f64, rho: f64) -> f64 {
    let weight = |l1: f64| (offset + rho * l1).powf(s);
    match dim {
        1 => 2.0 * weight(1.0),
        2 => {
            let gl = GaussLegendre::new(32);
            4.0 * gl.integrate(0.0, PI / 2.0, |t| weight(t.cos() + t.sin()))
        }
        _ => {
            let gl = GaussLegendre::new(24);
            8.0 * gl.integrate(0.0, PI / 2.0, |th| {
                let (st, ct) = th.sin_cos();
                st * gl.integrate(0.0, PI / 2.0, |ph| weight(st * (ph.cos() + ph.sin()) + ct))
            })
        }
    }
}

fn weight(rho: f64, alpha: f64, v: f64) -> f64 {
    (rho * rho + v * v).powf(-0.5 * (1.0 + alpha))
}

/// `∫₀^∞ w(v)(1 − cos v) dv`.
fn one_minus_cos_integral(rho: f64, alpha: f64) -> f64 {
    let gl = GaussLegendre::new(GL_NODES);
    // graded panels resolve the scale ρ of the weight near the origin
    let mut edges = vec![0.0];
    let mut e = rho / 64.0;
    while e < PI / 2.0 {
        edges.push(e);
        e *= 2.0;
    }
    let k_max = 10usize.max((10.0 * rho / PI).ceil() as usize);
    for k in 0..=k_max {
        edges.push((k as f64 + 0.5) * PI);
    }
    let upper = *edges.last().unwrap();
    let head = gl.integrate_panels(&edges, |v| weight(rho, alpha, v) * 2.0 * (0.5 * v).sin().powi(2));
    head + power_tail(rho, alpha, upper) - cos_tail(rho, alpha, upper, &gl)
}

/// `∫₀^∞ w(v) cos v dv` for `ρ > 1`.
fn oscillatory_cos(rho: f64, alpha: f64) -> f64 {
    let gl = GaussLegendre::new(GL_NODES);
    let k_max = 10usize.max((10.0 * rho / PI).ceil() as usize);
    let mut edges = vec![0.0];
    for k in 0..=k_max {
        edges.push((k as f64 + 0.5) * PI);
    }
    let upper = *edges.last().unwrap();
    gl.integrate_panels(&edges, |v| weight(rho, alpha, v) * v.cos()) + cos_tail(rho, alpha, upper, &gl)
}

/// `∫_U^∞ w(v) dv` by the binomial series in `ρ²/v²`.
fn power_tail(rho: f64, alpha: f64, upper: f64) -> f64 {
    let beta = 0.5 * (1.0 + alpha);
    let x = (rho / upper).powi(2);
    let mut coef = 1.0;
    let mut xk = 1.0;
    let mut acc = 0.0;
    for k in 0..60 {
        let term = coef * xk / (alpha + 2.0 * k as f64);
        acc += term;
        if term.abs() < 1e-18 * acc.abs() {
            break;
        }
        let kf = k as f64;
        coef *= -(beta + kf) / (kf + 1.0);
        xk *= x;
    }
    acc * upper.powf(-alpha)
}

/// `∫_U^∞ w(v) cos v dv` for `U = (K+½)π`, by alternating half-period panels.
fn cos_tail(rho: f64, alpha: f64, upper: f64, gl: &GaussLegendre) -> f64 {
    let mut partial = Vec::with_capacity(TAIL_PANELS);
    let mut acc = 0.0;
    let mut a = upper;
    for _ in 0..TAIL_PANELS {
        let b = a + PI;
        acc += gl.integrate(a, b, |v| weight(rho, alpha, v) * v.cos());
        partial.push(acc);
        a = b;
    }
    euler_limit(&partial)
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Radii `2^{-4}, …, 2^{-9}`.
pub fn default_holder_radii() -> Vec<f64> {
    (4..=9).map(|k| 2f64.powi(-k)).collect()
}
