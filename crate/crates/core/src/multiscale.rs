//! Dyadic indicator expansion `g_m(t) = Σ_{l≤m} Σ_j α_{l,j} χ_{[0,1)}(2^l t − j)`.

use crate::error::{invalid, Result};

/// `α_{0,j} = g(j)`, `α_{l,j} = g(2^{-l} j) − g(2^{1-l} ⌊j/2⌋)`.
pub fn coeff(g: impl Fn(f64) -> f64, l: u32, j: i64) -> f64 {
    if l == 0 {
        return g(j as f64);
    }
    if j.rem_euclid(2) == 0 {
        return 0.0;
    }
    let h = (-(l as f64)).exp2();
    g(h * j as f64) - g(2.0 * h * j.div_euclid(2) as f64)
}

/// Indices `j` with `2^l(ξ·x + θ) − j ∈ [0,1)` for some `x ∈ [0,1]^d`, as an
/// inclusive range.
pub fn active_indices(xi: &[f64], l: u32, theta: f64) -> (i64, i64) {
    let neg: f64 = xi.iter().filter(|v| **v < 0.0).sum();
    let pos: f64 = xi.iter().filter(|v| **v > 0.0).sum();
    let scale = (l as f64).exp2();
    let lo = (scale * (theta + neg)).floor() as i64;
    let hi = (scale * (theta + pos)).floor() as i64;
    (lo, hi)
}

/// Number of indices in an inclusive range.
pub fn index_count(range: (i64, i64)) -> usize {
    (range.1 - range.0 + 1).max(0) as usize
}

#[derive(Debug, Clone)]
pub struct MultiscaleExpansion {
    m: u32,
    window: (f64, f64),
    /// per level: first index and the coefficients from there on
    levels: Vec<(i64, Vec<f64>)>,
}

impl MultiscaleExpansion {
    /// Expansion through level `m`, materialized for `t ∈ [lo, hi]`.
    pub fn truncated(g: impl Fn(f64) -> f64, m: u32, window: (f64, f64)) -> Result<Self> {
        let (lo, hi) = window;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(invalid(format!("invalid expansion window [{lo}, {hi}]")));
        }
        if m > 40 {
            return Err(invalid(format!("expansion level {m} too deep")));
        }
        let levels = (0..=m)
            .map(|l| {
                let s = (l as f64).exp2();
                let j0 = (s * lo).floor() as i64;
                let j1 = (s * hi).floor() as i64;
                (j0, (j0..=j1).map(|j| coeff(&g, l, j)).collect())
            })
            .collect();
        Ok(Self { m, window, levels })
    }

    pub fn level(&self) -> u32 {
        self.m
    }

    pub fn window(&self) -> (f64, f64) {
        self.window
    }

    /// Stored coefficients as `(l, j, α_{l,j})`.
    pub fn coefficients(&self) -> impl Iterator<Item = (u32, i64, f64)> + '_ {
        self.levels.iter().enumerate().flat_map(|(l, (j0, c))| {
            c.iter().enumerate().map(move |(k, v)| (l as u32, j0 + k as i64, *v))
        })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.window;
        if !(t >= lo && t <= hi) {
            return Err(invalid(format!("t = {t} outside expansion window [{lo}, {hi}]")));
        }
        let mut acc = 0.0;
        for (l, (j0, c)) in self.levels.iter().enumerate() {
            // exactly one j has 2^l t − j ∈ [0,1)
            let j = ((l as f64).exp2() * t).floor() as i64;
            if let Some(v) = usize::try_from(j - j0).ok().and_then(|k| c.get(k)) {
                acc += v;
            }
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn cos2pi(t: f64) -> f64 {
        (2.0 * PI * t).cos()
    }

    #[test]
    fn coefficient_examples() {
        for j in -3..5 {
            assert!((coeff(cos2pi, 0, j) - 1.0).abs() < 1e-15);
        }
        assert!((coeff(cos2pi, 1, 1) + 2.0).abs() < 1e-15);
        assert_eq!(coeff(|t| t.sin() + 3.0, 2, 2), 0.0);
    }

    #[test]
    fn collapse_identity() {
        let g = |t: f64| (2.0 * PI * t + 0.7).cos();
        let m = 6;
        let e = MultiscaleExpansion::truncated(g, m, (-2.0, 3.0)).unwrap();
        let mut rng = stream(2, 0);
        for _ in 0..1000 {
            let t = -2.0 + 5.0 * rng.gen::<f64>();
            let h = (-(m as f64)).exp2();
            let collapsed = g(h * (t / h).floor());
            assert!((e.eval(t).unwrap() - collapsed).abs() < 1e-12);
        }
    }

    #[test]
    fn level_zero_of_constant() {
        let e = MultiscaleExpansion::truncated(|_| 2.5, 0, (0.0, 4.0)).unwrap();
        for i in 0..40 {
            assert_eq!(e.eval(i as f64 / 10.0).unwrap(), 2.5);
        }
    }

    #[test]
    fn sup_error_bound() {
        for m in [2, 4, 6] {
            let e = MultiscaleExpansion::truncated(cos2pi, m, (0.0, 1.0)).unwrap();
            let bound = (-(m as f64)).exp2() * 2.0 * PI;
            for i in 0..=10_000 {
                let t = i as f64 / 10_000.0;
                assert!((cos2pi(t) - e.eval(t).unwrap()).abs() <= bound);
            }
        }
    }

    #[test]
    fn coefficient_bound_and_sparsity() {
        for phi in [0.0, 1.0, 2.5] {
            let g = move |t: f64| (2.0 * PI * t + phi).cos();
            let e = MultiscaleExpansion::truncated(g, 10, (-1.0, 2.0)).unwrap();
            for (l, j, a) in e.coefficients() {
                assert!(a.abs() <= (1.0 - l as f64).exp2() * PI + 1e-12);
                if l >= 1 && j % 2 == 0 {
                    assert_eq!(a, 0.0);
                }
            }
        }
    }

    #[test]
    fn eval_outside_window_is_an_error() {
        let e = MultiscaleExpansion::truncated(cos2pi, 3, (0.0, 1.0)).unwrap();
        assert!(e.eval(1.5).is_err());
        assert!(MultiscaleExpansion::truncated(cos2pi, 3, (1.0, 0.0)).is_err());
    }

    #[test]
    fn active_index_examples() {
        for l in 0..5 {
            assert_eq!(active_indices(&[0.0, 0.0], l, 0.0), (0, 0));
        }
        let r = active_indices(&[1.0, 2.0], 1, 0.0);
        assert_eq!(r, (0, 6));
        assert_eq!(index_count(r), 7);
    }

    proptest! {
        #[test]
        fn active_index_cardinality(xi in prop::collection::vec(-5.0f64..5.0, 1..4), l in 0u32..8, theta in -3.0f64..3.0) {
            let l1: f64 = xi.iter().map(|v| v.abs()).sum();
            let n = index_count(active_indices(&xi, l, theta)) as f64;
            let scale = (l as f64).exp2();
            // closed ranges can pick up one extra index at each end
            prop_assert!(n <= scale * l1 + 2.0 + 1e-9);
            if l >= 1 {
                prop_assert!(n <= scale * (1.0 + l1) + 1e-9);
            }
        }

        #[test]
        fn active_indices_cover_cube(xi in prop::collection::vec(-5.0f64..5.0, 1..4), l in 0u32..6, theta in -3.0f64..3.0,
                                     x in prop::collection::vec(0.0f64..=1.0, 4)) {
            let (lo, hi) = active_indices(&xi, l, theta);
            let u: f64 = (l as f64).exp2() * (xi.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + theta);
            let j = u.floor() as i64;
            prop_assert!(j >= lo && j <= hi);
        }
    }
}
