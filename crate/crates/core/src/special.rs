//! Log-gamma and the optimal Khintchine constant.

use std::f64::consts::PI;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    if x == 1.0 || x == 2.0 {
        return Ok(0.0);
    }
    Ok(ln_gamma_pos(x))
}

fn ln_gamma_pos(x: f64) -> f64 {
    if x < 0.5 {
        // Γ(x)Γ(1-x) = π / sin(πx)
        return (PI / (PI * x).sin()).ln() - ln_gamma_pos(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Upper bound `ln(√(2π) x^{x-1/2} e^{-x+1/(12x)})` on `ln Γ(x)`.
pub fn stirling_upper(x: f64) -> f64 {
    0.5 * (2.0 * PI).ln() + (x - 0.5) * x.ln() - x + 1.0 / (12.0 * x)
}

/// `C_p = √(2 π^{-1/p}) Γ((p+1)/2)^{1/p}`, the optimal constant for `p ≥ 2`.
pub fn khintchine_constant(p: f64) -> Result<f64> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::Domain(format!("Khintchine constant needs p >= 2, got {p}")));
    }
    if p == 2.0 {
        return Ok(1.0);
    }
    let lg = log_gamma(0.5 * (p + 1.0))?;
    Ok((0.5 * (2f64.ln() - PI.ln() / p) + lg / p).exp())
}

/// `h((p+1)/2) = ln(C_p / √p)`.
pub fn khintchine_log_ratio(p: f64) -> Result<f64> {
    Ok(khintchine_constant(p)?.ln() - 0.5 * p.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KhintchineCheck {
    pub p: f64,
    pub c_p: f64,
    pub bound: f64,
    /// `√(p/2) − C_p`
    pub margin: f64,
}

pub fn khintchine_check(p: f64) -> Result<KhintchineCheck> {
    let c_p = khintchine_constant(p)?;
    let bound = (0.5 * p).sqrt();
    Ok(KhintchineCheck { p, c_p, bound, margin: bound - c_p })
}

/// Largest coefficient count accepted by exact enumeration.
pub const MAX_EXACT_TERMS: usize = 20;

/// `(E|Σ c_i τ_i|^p)^{1/p}` over all `2^n` sign patterns.
pub fn khintchine_exact(c: &[f64], p: f64) -> Result<f64> {
    if c.len() > MAX_EXACT_TERMS {
        return Err(Error::InvalidArgument(format!(
            "exact enumeration supports at most {MAX_EXACT_TERMS} terms, got {}",
            c.len()
        )));
    }
    check_p(p)?;
    if c.is_empty() {
        return Ok(0.0);
    }
    // τ ↦ −τ leaves |Σ c τ| unchanged, so fix the first sign.
    let rest = &c[1..];
    let count = 1usize << rest.len();
    let mut acc = 0.0;
    for mask in 0..count {
        let mut s = c[0];
        for (i, ci) in rest.iter().enumerate() {
            if mask >> i & 1 == 1 {
                s -= ci;
            } else {
                s += ci;
            }
        }
        acc += s.abs().powf(p);
    }
    Ok((acc / count as f64).powf(1.0 / p))
}

/// Monte Carlo version of [`khintchine_exact`] for long coefficient lists.
pub fn khintchine_mc<R: Rng + ?Sized>(c: &[f64], p: f64, samples: usize, rng: &mut R) -> Result<f64> {
    check_p(p)?;
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let mut acc = 0.0;
    for _ in 0..samples {
        let s: f64 = c.iter().map(|ci| if rng.gen::<bool>() { *ci } else { -ci }).sum();
        acc += s.abs().powf(p);
    }
    Ok((acc / samples as f64).powf(1.0 / p))
}

/// Exact enumeration when `exact`, otherwise `10^5` sampled sign vectors.
pub fn khintchine_bruteforce<R: Rng + ?Sized>(c: &[f64], p: f64, exact: bool, rng: &mut R) -> Result<f64> {
    if exact {
        khintchine_exact(c, p)
    } else {
        khintchine_mc(c, p, 100_000, rng)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("moment order must be finite and >= 1, got {p}")))
    }
}
