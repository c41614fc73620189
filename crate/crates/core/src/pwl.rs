//! Continuous piecewise-linear functions of one variable, stored by breakpoints.
//!
//! A function is defined on `[lo, hi]` by linear interpolation and extended
//! by its end values outside the domain.

use crate::error::{invalid, Error, Result};

/// Breakpoints closer than this are merged.
pub const MERGE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(invalid("breakpoints and values differ in length"));
        }
        if xs.len() < 2 {
            return Err(invalid("need at least two breakpoints"));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(invalid("breakpoints and values must be finite"));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("breakpoints must be strictly increasing"));
        }
        Ok(Self { xs, ys })
    }

    pub fn constant(lo: f64, hi: f64, c: f64) -> Result<Self> {
        Self::new(vec![lo, hi], vec![c, c])
    }

    pub fn identity(lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo, hi], vec![lo, hi])
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn breakpoint_count(&self) -> usize {
        self.xs.len()
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (lo, hi) = self.domain();
        if t <= lo {
            return self.ys[0];
        }
        if t >= hi {
            return *self.ys.last().unwrap();
        }
        let i = self.xs.partition_point(|x| *x <= t);
        let (x0, x1) = (self.xs[i - 1], self.xs[i]);
        let (y0, y1) = (self.ys[i - 1], self.ys[i]);
        y0 + (y1 - y0) * (t - x0) / (x1 - x0)
    }

    /// `(min, max)` of the values.
    pub fn range(&self) -> (f64, f64) {
        self.ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(*y), b.max(*y)))
    }

    /// Number of linear pieces.
    pub fn piece_count(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { xs: self.xs.clone(), ys: self.ys.iter().map(|y| c * y).collect() }
    }

    /// `self + other` on a shared domain.
    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_domain(self, other)?;
        let xs = merge_sorted(&self.xs, &other.xs);
        let ys = xs.iter().map(|t| self.eval(*t) + other.eval(*t)).collect();
        Ok(Self { xs, ys })
    }

    /// Drops interior breakpoints whose value lies within `tol` of the chord
    /// between the neighbouring kept points.
    pub fn simplify(&self, tol: f64) -> Self {
        let n = self.xs.len();
        let mut xs = vec![self.xs[0]];
        let mut ys = vec![self.ys[0]];
        for i in 1..n - 1 {
            let (x0, y0) = (*xs.last().unwrap(), *ys.last().unwrap());
            let (x2, y2) = (self.xs[i + 1], self.ys[i + 1]);
            let chord = y0 + (y2 - y0) * (self.xs[i] - x0) / (x2 - x0);
            if (self.ys[i] - chord).abs() > tol {
                xs.push(self.xs[i]);
                ys.push(self.ys[i]);
            }
        }
        xs.push(self.xs[n - 1]);
        ys.push(self.ys[n - 1]);
        Self { xs, ys }
    }
}

fn check_same_domain(f: &PiecewiseLinear, g: &PiecewiseLinear) -> Result<()> {
    let (a, b) = f.domain();
    let (c, d) = g.domain();
    if (a - c).abs() > MERGE_TOL || (b - d).abs() > MERGE_TOL {
        return Err(Error::DomainMismatch(a, b, c, d));
    }
    Ok(())
}

/// Sorted union with near-duplicates merged.
fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(|x, y| x.total_cmp(y));
    dedup_close(&mut all);
    all
}

fn dedup_close(v: &mut Vec<f64>) {
    v.dedup_by(|next, kept| *next - *kept <= MERGE_TOL);
}

/// `β(t) = ReLU(2t) − 2ReLU(2t−1) + ReLU(2t−2)`: the unit hat on `[0,1]`.
pub fn make_beta() -> PiecewiseLinear {
    PiecewiseLinear { xs: vec![0.0, 0.5, 1.0], ys: vec![0.0, 1.0, 0.0] }
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("r must lie in (0, 1), got {r}")))
    }
}

/// `α(t,r) = ReLU(t) − ReLU(t−r/2) − ReLU(t−(1−r)/2) + ReLU(t−1/2)` on `[0, 1/2]`.
pub fn make_alpha(r: f64) -> Result<PiecewiseLinear> {
    check_r(r)?;
    let a = 0.5 * r.min(1.0 - r);
    let b = 0.5 * r.max(1.0 - r);
    if a == b {
        return PiecewiseLinear::new(vec![0.0, a, 0.5], vec![0.0, a, 0.0]);
    }
    PiecewiseLinear::new(vec![0.0, a, b, 0.5], vec![0.0, a, a, 0.0])
}

/// `γ(t,r) = α(t+1/4,r) − α(t−1/4,r) + α(t−3/4,r)` on `[0,1]`.
pub fn make_gamma(r: f64) -> Result<PiecewiseLinear> {
    let alpha = make_alpha(r)?;
    let shifts = [-0.25, 0.25, 0.75];
    let mut xs = vec![0.0, 1.0];
    for s in shifts {
        for k in alpha.xs() {
            let t = s + k;
            if t > 0.0 && t < 1.0 {
                xs.push(t);
            }
        }
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    dedup_close(&mut xs);
    let ys = xs
        .iter()
        .map(|t| {
            let y = alpha.eval(t + 0.25) - alpha.eval(t - 0.25) + alpha.eval(t - 0.75);
            // breakpoint values lie in {−h, 0, h}; snap away rounding so flat pieces stay flat
            let h = 0.5 * r.min(1.0 - r);
            [-h, 0.0, h].into_iter().find(|v| (y - v).abs() < 1e-12).unwrap_or(y)
        })
        .collect();
    Ok(PiecewiseLinear { xs, ys }.simplify(0.0))
}

/// Pointwise `γ(t, r)` for `t ∈ [0,1]` straight from the ReLU formula of `α`,
/// which vanishes outside `[0, 1/2]`.
pub fn gamma_value(t: f64, r: f64) -> f64 {
    let relu = |x: f64| x.max(0.0);
    let alpha = |u: f64| relu(u) - relu(u - 0.5 * r) - relu(u - 0.5 * (1.0 - r)) + relu(u - 0.5);
    alpha(t + 0.25) - alpha(t - 0.25) + alpha(t - 0.75)
}

/// `g_{,n}(t) = g(nt − ⌊nt⌋)` on `[0,1]`, with value `g(1)` at `t = 1`.
pub fn periodize(g: &PiecewiseLinear, n: usize) -> Result<PiecewiseLinear> {
    if n == 0 {
        return Err(invalid("periodization count must be positive"));
    }
    let (lo, hi) = g.domain();
    if lo != 0.0 || hi != 1.0 {
        return Err(invalid(format!("periodize needs a function on [0,1], got [{lo}, {hi}]")));
    }
    let jump = (g.ys[0] - *g.ys.last().unwrap()).abs();
    if jump > 1e-12 {
        return Err(invalid(format!(
            "periodization of g with g(0) != g(1) is discontinuous (jump {jump})"
        )));
    }
    let nf = n as f64;
    let mut xs = Vec::with_capacity(n * (g.xs.len() - 1) + 1);
    let mut ys = Vec::with_capacity(xs.capacity());
    xs.push(0.0);
    ys.push(g.ys[0]);
    for j in 0..n {
        for i in 1..g.xs.len() {
            let t = if i == g.xs.len() - 1 { (j + 1) as f64 / nf } else { (j as f64 + g.xs[i]) / nf };
            xs.push(t);
            ys.push(g.ys[i]);
        }
    }
    PiecewiseLinear::new(xs, ys)
}

/// Exact breakpoint representation of `outer ∘ inner`.
pub fn compose(outer: &PiecewiseLinear, inner: &PiecewiseLinear) -> Result<PiecewiseLinear> {
    let (dlo, dhi) = outer.domain();
    let (lo, hi) = inner.range();
    let slack = 1e-12 * (1.0 + dlo.abs().max(dhi.abs()));
    if lo < dlo - slack || hi > dhi + slack {
        return Err(Error::RangeViolation { lo, hi, domain_lo: dlo, domain_hi: dhi });
    }
    let knots = &outer.xs;
    let mut xs = Vec::with_capacity(inner.xs.len() * 2);
    let mut ys = Vec::with_capacity(inner.xs.len() * 2);
    let push = |xs: &mut Vec<f64>, ys: &mut Vec<f64>, x: f64, y: f64| {
        if let Some(last) = xs.last() {
            if x - *last <= MERGE_TOL {
                return;
            }
        }
        xs.push(x);
        ys.push(y);
    };
    for i in 0..inner.xs.len() {
        let (x0, u0) = (inner.xs[i], inner.ys[i]);
        push(&mut xs, &mut ys, x0, outer.eval(u0));
        if i + 1 == inner.xs.len() {
            break;
        }
        let (x1, u1) = (inner.xs[i + 1], inner.ys[i + 1]);
        if u0 == u1 {
            continue;
        }
        let (a, b) = if u0 < u1 { (u0, u1) } else { (u1, u0) };
        let start = knots.partition_point(|k| *k <= a);
        let end = knots.partition_point(|k| *k < b);
        if start >= end {
            continue;
        }
        let idx: Box<dyn Iterator<Item = usize>> =
            if u0 < u1 { Box::new(start..end) } else { Box::new((start..end).rev()) };
        for k in idx {
            let x = x0 + (x1 - x0) * (knots[k] - u0) / (u1 - u0);
            if x > x0 && x < x1 {
                push(&mut xs, &mut ys, x, outer.ys[k]);
            }
        }
    }
    PiecewiseLinear::new(xs, ys)
}

/// `c · ReLU(a·t − b)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReluUnit {
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReluUnitList {
    pub units: Vec<ReluUnit>,
    pub constant: f64,
}

impl ReluUnitList {
    pub fn eval(&self, t: f64) -> f64 {
        self.constant + self.units.iter().map(|u| u.c * (u.a * t - u.b).max(0.0)).sum::<f64>()
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }
}

/// Unit-list form of `f` that agrees with `f` and its constant extension on
/// all of ℝ: one unit for a nonzero initial slope, one per interior slope
/// change, and one closing unit at `hi` for a nonzero final slope.
pub fn to_relu_units(f: &PiecewiseLinear) -> ReluUnitList {
    let f = f.simplify(1e-14);
    let slopes: Vec<f64> = f
        .xs
        .windows(2)
        .zip(f.ys.windows(2))
        .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
        .collect();
    let mut units = Vec::new();
    let (_, hi) = f.domain();
    let mut prev = 0.0;
    for (i, s) in slopes.iter().enumerate() {
        let change = s - prev;
        if change != 0.0 {
            units.push(ReluUnit { c: change, a: 1.0, b: f.xs[i] });
        }
        prev = *s;
    }
    if prev != 0.0 {
        units.push(ReluUnit { c: -prev, a: 1.0, b: hi });
    }
    ReluUnitList { units, constant: f.ys[0] }
}

/// Agreement of `f` and `g` at every breakpoint of either, within `tol`.
pub fn pwl_equal(f: &PiecewiseLinear, g: &PiecewiseLinear, tol: f64) -> Result<bool> {
    check_same_domain(f, g)?;
    let xs = merge_sorted(&f.xs, &g.xs);
    Ok(xs.iter().all(|t| (f.eval(*t) - g.eval(*t)).abs() <= tol))
}

/// Largest pointwise deviation over the merged breakpoints.
pub fn max_deviation(f: &PiecewiseLinear, g: &PiecewiseLinear) -> Result<f64> {
    check_same_domain(f, g)?;
    let xs = merge_sorted(&f.xs, &g.xs);
    Ok(xs.iter().map(|t| (f.eval(*t) - g.eval(*t)).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-15
    }

    #[test]
    fn beta_values() {
        let b = make_beta();
        assert!(close(b.eval(0.25), 0.5));
        assert!(close(b.eval(0.5), 1.0));
        assert!(close(b.eval(0.75), 0.5));
        assert_eq!(b.eval(-1.0), 0.0);
        assert_eq!(b.eval(2.0), 0.0);
    }

    #[test]
    fn beta_units_match_three_relu_formula() {
        let u = to_relu_units(&make_beta());
        assert_eq!(u.len(), 3);
        for i in -20..=40 {
            let t = i as f64 / 20.0;
            let r = |v: f64| v.max(0.0);
            let formula = r(2.0 * t) - 2.0 * r(2.0 * t - 1.0) + r(2.0 * t - 2.0);
            assert!((u.eval(t) - formula).abs() < 1e-14, "t={t}");
        }
    }

    #[test]
    fn periodize_examples() {
        let b = make_beta();
        assert!(close(periodize(&b, 2).unwrap().eval(0.25), 1.0));
        assert!(pwl_equal(&periodize(&b, 1).unwrap(), &b, 0.0).unwrap());
        let b3 = periodize(&b, 3).unwrap();
        for k in [1.0, 3.0, 5.0] {
            assert!((b3.eval(k / 6.0) - 1.0).abs() < 1e-15);
        }
        assert_eq!(b3.eval(1.0 / 3.0), 0.0);
        assert!(periodize(&b, 0).is_err());
        let ramp = PiecewiseLinear::identity(0.0, 1.0).unwrap();
        assert!(periodize(&ramp, 2).is_err());
    }

    #[test]
    fn periodize_breakpoints_grow_linearly() {
        let g = make_gamma(0.3).unwrap();
        for n in 1..10 {
            let p = periodize(&g, n).unwrap();
            assert!(p.breakpoint_count() <= n * g.breakpoint_count());
        }
    }

    #[test]
    fn alpha_examples() {
        let a = make_alpha(0.5).unwrap();
        assert!(close(a.eval(0.1), 0.1));
        assert!(close(a.eval(0.25), 0.25));
        assert_eq!(a.breakpoint_count(), 3);
        for r in [0.1, 0.3, 0.5, 0.9] {
            assert_eq!(make_alpha(r).unwrap().eval(0.6), 0.0);
            let a = make_alpha(r).unwrap();
            let plateau = 0.5 * r.min(1.0 - r);
            assert!(close(a.eval(0.25), plateau));
            for i in 0..=50 {
                let t = 0.5 * i as f64 / 50.0;
                assert!((a.eval(t) - a.eval(0.5 - t)).abs() < 1e-15);
            }
        }
        assert!(make_alpha(0.0).is_err());
        assert!(make_alpha(1.0).is_err());
    }

    #[test]
    fn alpha_matches_relu_formula() {
        for r in [0.1, 0.3, 0.5, 0.8] {
            let a = make_alpha(r).unwrap();
            let relu = |v: f64| v.max(0.0);
            for i in -10..=70 {
                let t = i as f64 / 100.0;
                let f = relu(t) - relu(t - r / 2.0) - relu(t - (1.0 - r) / 2.0) + relu(t - 0.5);
                assert!((a.eval(t) - f).abs() < 1e-15, "r={r} t={t}");
            }
        }
    }

    #[test]
    fn gamma_examples() {
        let g = make_gamma(0.3).unwrap();
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            assert!((g.eval(t) - g.eval(1.0 - t)).abs() < 1e-15);
        }
        assert!(close(make_gamma(0.5).unwrap().eval(0.0), 0.25));
        assert!(close(g.eval(0.5), -0.15));
        assert!(close(g.eval(0.0), 0.15));
    }

    #[test]
    fn gamma_value_matches_breakpoint_form() {
        for r in [0.05, 0.3, 0.5, 0.71] {
            let g = make_gamma(r).unwrap();
            for i in 0..=1000 {
                let t = i as f64 / 1000.0;
                assert!((g.eval(t) - gamma_value(t, r)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gamma_unit_counts() {
        for r in [0.3, 0.1702360552701033, 0.01, 0.77] {
            for n in 1..=8 {
                let u = to_relu_units(&periodize(&make_gamma(r).unwrap(), n).unwrap());
                assert!(u.len() <= 4 * n, "r={r} n={n}: {}", u.len());
            }
        }
        for n in 1..=8 {
            let u = to_relu_units(&periodize(&make_gamma(0.5).unwrap(), n).unwrap());
            assert!(u.len() <= 4 * n);
        }
    }

    #[test]
    fn constant_has_no_units() {
        let c = PiecewiseLinear::constant(0.0, 1.0, 2.5).unwrap();
        let u = to_relu_units(&c);
        assert!(u.is_empty());
        assert_eq!(u.constant, 2.5);
    }

    #[test]
    fn composition_identity() {
        let mut gs = vec![make_beta()];
        for r in [0.1, 0.3, 0.5] {
            gs.push(make_gamma(r).unwrap());
        }
        let b = make_beta();
        for g in &gs {
            for n1 in 1..=8 {
                for n2 in 1..=8 {
                    let lhs = compose(&periodize(g, n2).unwrap(), &periodize(&b, n1).unwrap()).unwrap();
                    let rhs = periodize(g, 2 * n1 * n2).unwrap();
                    assert!(pwl_equal(&lhs, &rhs, 1e-12).unwrap(), "n1={n1} n2={n2}");
                }
            }
        }
    }

    #[test]
    fn compose_with_identity() {
        let f = periodize(&make_gamma(0.3).unwrap(), 3).unwrap();
        let (lo, hi) = f.range();
        let id = PiecewiseLinear::identity(lo, hi).unwrap();
        assert!(pwl_equal(&compose(&id, &f).unwrap(), &f, 1e-15).unwrap());
    }

    #[test]
    fn compose_range_violation() {
        let f = PiecewiseLinear::identity(0.0, 2.0).unwrap();
        assert!(matches!(compose(&make_beta(), &f), Err(Error::RangeViolation { .. })));
    }

    #[test]
    fn cosine_frequency_doubling() {
        let (n1, n2) = (2, 2);
        let b = periodize(&make_beta(), n1).unwrap();
        for i in 0..=1000 {
            let t = i as f64 / 1000.0;
            let lhs = (2.0 * PI * n2 as f64 * b.eval(t)).cos();
            let rhs = (4.0 * PI * (n1 * n2) as f64 * t).cos();
            assert!((lhs - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn equality_examples() {
        let b = make_beta();
        assert!(pwl_equal(&b, &b, 0.0).unwrap());
        let shifted = PiecewiseLinear::new(vec![0.0, 0.5 + 1e-6, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert!(!pwl_equal(&b, &shifted, 1e-9).unwrap());
        let other = PiecewiseLinear::identity(0.0, 2.0).unwrap();
        assert!(matches!(pwl_equal(&b, &other, 1.0), Err(Error::DomainMismatch(..))));
    }

    #[test]
    fn unit_round_trip_on_random_points() {
        let f = periodize(&make_gamma(0.1).unwrap(), 5).unwrap();
        let u = to_relu_units(&f);
        let mut rng = stream(5, 0);
        for _ in 0..1000 {
            let t: f64 = rng.gen();
            assert!((u.eval(t) - f.eval(t)).abs() <= 1e-12);
        }
    }

    #[test]
    fn validation() {
        assert!(PiecewiseLinear::new(vec![0.0], vec![1.0]).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, f64::NAN], vec![1.0, 1.0]).is_err());
    }

    fn arb_pwl() -> impl Strategy<Value = PiecewiseLinear> {
        prop::collection::vec((0.001f64..1.0, -3.0f64..3.0), 1..12).prop_map(|steps| {
            let mut xs = vec![0.0];
            let mut ys = vec![0.0];
            for (dx, y) in steps {
                xs.push(xs.last().unwrap() + dx);
                ys.push(y);
            }
            PiecewiseLinear::new(xs, ys).unwrap()
        })
    }

    proptest! {
        #[test]
        fn relu_units_reproduce_function(f in arb_pwl(), u in prop::collection::vec(0.0f64..1.0, 20)) {
            let units = to_relu_units(&f);
            let (lo, hi) = f.domain();
            for v in u {
                let t = lo + (hi - lo) * v;
                prop_assert!((units.eval(t) - f.eval(t)).abs() <= 1e-12);
            }
            prop_assert!(units.len() <= f.piece_count() + 1);
        }

        #[test]
        fn compose_matches_pointwise(f in arb_pwl(), u in prop::collection::vec(0.0f64..1.0, 20)) {
            let (lo, hi) = f.domain();
            let inner = PiecewiseLinear::new(vec![0.0, 0.3, 1.0], vec![lo, hi, lo + 0.5 * (hi - lo)]).unwrap();
            let h = compose(&f, &inner).unwrap();
            for v in u {
                prop_assert!((h.eval(v) - f.eval(inner.eval(v))).abs() <= 1e-12);
            }
            prop_assert!(h.breakpoint_count() <= inner.breakpoint_count() + 2 * f.breakpoint_count());
        }
    }
}
