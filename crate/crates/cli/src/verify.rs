//! Identity verification suites with JSON reports.

use std::f64::consts::PI;

use barron_core::bessel::{default_holder_radii, BesselTarget, Verdict};
use barron_core::multiscale::{coeff, MultiscaleExpansion};
use barron_core::pwl::{compose, gamma_value, make_beta, make_gamma, max_deviation, periodize};
use barron_core::quadrature::GaussLegendre;
use barron_core::rng::stream;
use barron_core::special::{khintchine_check, khintchine_constant, khintchine_exact};
use rand::Rng;
use serde::Serialize;

use crate::error::{CliError, Result};

pub const SUITES: [&str; 5] = ["multiscale", "composition", "integral", "khintchine", "bessel"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// worst observed deviation (or violation) for this check
    pub max_deviation: f64,
    pub tolerance: f64,
}

impl Check {
    /// Passes when `deviation ≤ tolerance`.
    fn bounded(name: impl Into<String>, deviation: f64, tolerance: f64) -> Self {
        Check { name: name.into(), pass: deviation <= tolerance, max_deviation: deviation, tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: &str, checks: Vec<Check>) -> Self {
        SuiteReport { suite: suite.into(), pass: checks.iter().all(|c| c.pass), checks }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn run_suite(name: &str) -> Result<SuiteReport> {
    match name {
        "multiscale" => multiscale(),
        "composition" => composition(),
        "integral" => integral(),
        "khintchine" => khintchine(),
        "bessel" => bessel(),
        other => Err(CliError::usage(format!("unknown suite `{other}`; expected one of {}", SUITES.join(", ")))),
    }
}

/// `g_{,n2} ∘ β_{,n1} = g_{,2 n1 n2}` exactly, for `n1, n2 ≤ 8`.
pub fn composition() -> Result<SuiteReport> {
    let beta = make_beta();
    let mut profiles = vec![("beta".to_string(), make_beta())];
    for r in [0.1, 0.3, 0.5] {
        profiles.push((format!("gamma(r={r})"), make_gamma(r)?));
    }
    let mut checks = Vec::new();
    for (name, g) in &profiles {
        let mut worst: f64 = 0.0;
        for n1 in 1..=8 {
            let inner = periodize(&beta, n1)?;
            for n2 in 1..=8 {
                let lhs = compose(&periodize(g, n2)?, &inner)?;
                worst = worst.max(max_deviation(&lhs, &periodize(g, 2 * n1 * n2)?)?);
            }
        }
        checks.push(Check::bounded(format!("{name}, n1,n2 <= 8"), worst, 1e-12));
    }
    Ok(SuiteReport::new("composition", checks))
}

/// `π² ∫₀¹ sin(πr) γ_{,n}(t,r) dr` against `cos(2πnt)`.
pub fn integral_value(n: usize, t: f64, panels: usize) -> f64 {
    let u = {
        let v = n as f64 * t;
        let f = v - v.floor();
        if t == 1.0 {
            1.0
        } else {
            f
        }
    };
    // r-values where a breakpoint of γ(·, r) crosses u
    let mut edges: Vec<f64> = (0..=panels).map(|k| k as f64 / panels as f64).collect();
    for r in [
        0.5,
        0.5 - 2.0 * u,
        2.0 * u - 0.5,
        1.5 - 2.0 * u,
        2.0 * u - 1.5,
        2.0 * u + 0.5,
        2.5 - 2.0 * u,
    ] {
        if r > 0.0 && r < 1.0 {
            edges.push(r);
        }
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let gl = GaussLegendre::new(6);
    PI * PI * gl.integrate_panels(&edges, |r| (PI * r).sin() * gamma_value(u, r))
}

pub const INTEGRAL_PAIRS: [(usize, f64); 12] = [
    (1, 0.0),
    (1, 0.1),
    (1, 1.0 / 3.0),
    (1, 0.77),
    (2, 0.0),
    (2, 0.1),
    (2, 1.0 / 3.0),
    (2, 0.77),
    (8, 0.0),
    (8, 0.1),
    (8, 1.0 / 3.0),
    (8, 0.77),
];

pub fn integral() -> Result<SuiteReport> {
    let checks = INTEGRAL_PAIRS
        .iter()
        .map(|&(n, t)| {
            let dev = (integral_value(n, t, 10_000) - (2.0 * PI * n as f64 * t).cos()).abs();
            Check::bounded(format!("n={n}, t={t}"), dev, 1e-8)
        })
        .collect();
    Ok(SuiteReport::new("integral", checks))
}

pub const PHASES: [f64; 5] = [0.0, 0.7, 1.9, 3.1, 5.3];

/// Sup error `≤ 2^{−m}‖g′‖_∞` and `|α_{l,j}| ≤ 2^{1−l}π` for `g = cos(2π· + φ)`.
pub fn multiscale() -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let samples = 1 << 14;
    for phi in PHASES {
        let g = move |t: f64| (2.0 * PI * t + phi).cos();
        let mut sup_ratio: f64 = 0.0;
        let mut coeff_ratio: f64 = 0.0;
        for m in 0..=10u32 {
            let e = MultiscaleExpansion::truncated(g, m, (0.0, 1.0))?;
            let bound = (-(m as f64)).exp2() * 2.0 * PI;
            for i in 0..=samples {
                let t = i as f64 / samples as f64;
                sup_ratio = sup_ratio.max((g(t) - e.eval(t)?).abs() / bound);
            }
        }
        for l in 0..=10u32 {
            for j in 0..(1i64 << l) {
                let c = coeff(g, l, j);
                coeff_ratio = coeff_ratio.max(c.abs() / ((1.0 - l as f64).exp2() * PI));
            }
        }
        checks.push(Check::bounded(format!("sup error / bound, phi={phi}"), sup_ratio, 1.0));
        checks.push(Check::bounded(format!("coefficient / bound, phi={phi}"), coeff_ratio, 1.0));
    }
    Ok(SuiteReport::new("multiscale", checks))
}

pub fn khintchine() -> Result<SuiteReport> {
    let mut worst_margin = f64::INFINITY;
    for k in 0..=19_800 {
        let p = 2.0 + k as f64 * 0.01;
        worst_margin = worst_margin.min(khintchine_check(p)?.margin);
    }
    let c2 = (khintchine_constant(2.0)? - 1.0).abs();

    let mut rng = stream(2024, 0);
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..500 {
        let n = rng.gen_range(1..=12);
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p = rng.gen_range(2.0..40.0);
        let l2 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if l2 == 0.0 {
            continue;
        }
        let lhs = khintchine_exact(&c, p)?;
        worst_ratio = worst_ratio.max(lhs / (khintchine_constant(p)? * l2));
    }
    Ok(SuiteReport::new(
        "khintchine",
        vec![
            Check::bounded("margin violation, p in [2,200] step 0.01", (-worst_margin).max(0.0), 1e-12),
            Check::bounded("|C_2 - 1|", c2, 1e-12),
            Check::bounded("excess of exact moment over C_p|c|_2, 500 vectors", (worst_ratio - 1.0).max(0.0), 1e-12),
        ],
    ))
}

pub fn bessel() -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let mut worst: f64 = 0.0;
    for d in 1..=3 {
        let t = BesselTarget::new(1.0, d)?;
        for k in 0..=40 {
            let rho = k as f64 * 0.1;
            worst = worst.max((t.eval_radial(rho) - BesselTarget::closed_form_alpha_one(d, rho)).abs());
        }
    }
    checks.push(Check::bounded("alpha=1 closed form, d=1..3, rho in [0,4]", worst, 1e-6));
    let radii = default_holder_radii();
    for alpha in [0.05, 0.5, 1.0] {
        let fit = BesselTarget::new(alpha, 2)?.holder_exponent(&radii)?;
        checks.push(Check::bounded(format!("Holder exponent, alpha={alpha}, d=2"), (fit - alpha).abs(), 0.05));
    }
    let t = BesselTarget::new(0.5, 2)?;
    for (s, expected) in [(0.4, Verdict::Convergent), (0.6, Verdict::Divergent)] {
        let dich = t.barron_dichotomy(s)?;
        checks.push(Check {
            name: format!("cutoff diagnostic alpha=0.5, s={s}: {:?}", dich.verdict).to_lowercase(),
            pass: dich.verdict == expected,
            max_deviation: dich.ratio,
            tolerance: barron_core::bessel::DICHOTOMY_RATIO,
        });
    }
    Ok(SuiteReport::new("bessel", checks))
}
