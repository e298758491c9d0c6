//! Uniform B-spline grids and Cox-de Boor basis evaluation.
//!
//! A grid with `G` intervals over `[domain_min, domain_max]` and spline order
//! `k` (polynomial degree) has `G + 2k + 1` knots: the `G + 1` interior knots
//! plus `k` uniformly spaced extension knots on each side. That yields
//! `G + k` basis functions which sum to one everywhere on the domain.
//!
//! Queries outside the domain are clamped to the nearest boundary for values;
//! derivatives there are zero.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest spline order accepted by [`SplineGrid::new`].
pub const MAX_ORDER: usize = 15;

/// The serializable description of a grid; knots are derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub domain_min: f64,
    pub domain_max: f64,
    pub intervals: usize,
    pub order: usize,
}

impl GridConfig {
    /// `G` intervals of order `k` on the default `[-1, 1]` domain.
    pub fn new(intervals: usize, order: usize) -> Self {
        GridConfig {
            domain_min: -1.0,
            domain_max: 1.0,
            intervals,
            order,
        }
    }

    pub fn basis_count(&self) -> usize {
        self.intervals + self.order
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig::new(3, 3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridConfig", into = "GridConfig")]
pub struct SplineGrid {
    config: GridConfig,
    spacing: f64,
    knots: Vec<f64>,
}

impl TryFrom<GridConfig> for SplineGrid {
    type Error = Error;

    fn try_from(c: GridConfig) -> Result<Self> {
        SplineGrid::new(c.domain_min, c.domain_max, c.intervals, c.order)
    }
}

impl From<SplineGrid> for GridConfig {
    fn from(g: SplineGrid) -> Self {
        g.config
    }
}

impl SplineGrid {
    pub fn new(domain_min: f64, domain_max: f64, intervals: usize, order: usize) -> Result<Self> {
        if intervals == 0 {
            return Err(Error::Config("spline grid needs at least one interval".into()));
        }
        if order == 0 || order > MAX_ORDER {
            return Err(Error::Config(format!(
                "spline order must be in 1..={MAX_ORDER}, got {order}"
            )));
        }
        if !(domain_min.is_finite() && domain_max.is_finite() && domain_min < domain_max) {
            return Err(Error::Config(format!(
                "spline domain must satisfy min < max, got [{domain_min}, {domain_max}]"
            )));
        }
        let spacing = (domain_max - domain_min) / intervals as f64;
        let k = order as f64;
        let knots = (0..intervals + 2 * order + 1)
            .map(|j| domain_min + (j as f64 - k) * spacing)
            .collect();
        Ok(SplineGrid {
            config: GridConfig {
                domain_min,
                domain_max,
                intervals,
                order,
            },
            spacing,
            knots,
        })
    }

    pub fn from_config(config: GridConfig) -> Result<Self> {
        SplineGrid::try_from(config)
    }

    pub fn config(&self) -> GridConfig {
        self.config
    }

    pub fn domain_min(&self) -> f64 {
        self.config.domain_min
    }

    pub fn domain_max(&self) -> f64 {
        self.config.domain_max
    }

    pub fn intervals(&self) -> usize {
        self.config.intervals
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of basis functions, `G + k`.
    pub fn basis_count(&self) -> usize {
        self.config.intervals + self.config.order
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.config.domain_min, self.config.domain_max)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.config.domain_min && x <= self.config.domain_max
    }

    /// Knot-span index `mu` with `t[mu] <= x < t[mu + 1]` for a clamped `x`;
    /// the right boundary belongs to the last interval.
    fn span(&self, x: f64) -> usize {
        let g = self.config.intervals;
        let rel = (x - self.config.domain_min) / self.spacing;
        let mut s = libm::floor(rel) as isize;
        s = s.clamp(0, g as isize - 1);
        let mut mu = s as usize + self.config.order;
        // floor() can land one interval off when x sits on a knot within rounding
        while mu > self.config.order && x < self.knots[mu] {
            mu -= 1;
        }
        while mu + 1 < self.config.order + g && x >= self.knots[mu + 1] {
            mu += 1;
        }
        mu
    }

    /// The `degree + 1` basis functions of the given degree that are
    /// non-zero on span `mu`, indices `mu - degree ..= mu` (triangular
    /// Cox-de Boor scheme).
    fn nonzero_basis(&self, degree: usize, mu: usize, x: f64, out: &mut [f64]) {
        let t = &self.knots;
        let mut left = [0.0; MAX_ORDER + 1];
        let mut right = [0.0; MAX_ORDER + 1];
        out[0] = 1.0;
        for j in 1..=degree {
            left[j] = x - t[mu + 1 - j];
            right[j] = t[mu + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = out[r] / (right[r + 1] + left[j - r]);
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
    }

    /// Writes all `G + k` basis values at the clamped `x` into `out`.
    pub fn basis_into(&self, x: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.basis_count());
        let k = self.config.order;
        let x = self.clamp(x);
        let mu = self.span(x);
        let mut local = [0.0; MAX_ORDER + 1];
        self.nonzero_basis(k, mu, x, &mut local);
        out.fill(0.0);
        out[mu - k..=mu].copy_from_slice(&local[..=k]);
    }

    /// Writes basis values and their x-derivatives. Derivatives are zero
    /// when `x` lies outside the domain.
    pub fn basis_and_derivative_into(&self, x: f64, values: &mut [f64], derivs: &mut [f64]) {
        self.basis_into(x, values);
        derivs.fill(0.0);
        if !self.contains(x) {
            return;
        }
        let k = self.config.order;
        let t = &self.knots;
        let mu = self.span(x);
        // degree k-1 functions non-zero on this span: indices mu-k+1 ..= mu
        let mut lower = [0.0; MAX_ORDER + 1];
        self.nonzero_basis(k - 1, mu, x, &mut lower);
        let lower_at = |i: usize| -> f64 {
            if i + k > mu && i <= mu {
                lower[i + k - 1 - mu]
            } else {
                0.0
            }
        };
        let kf = k as f64;
        for i in mu - k..=mu {
            let a = lower_at(i) / (t[i + k] - t[i]);
            let b = lower_at(i + 1) / (t[i + k + 1] - t[i + 1]);
            derivs[i] = kf * (a - b);
        }
    }

    pub fn basis(&self, x: f64) -> BasisVector {
        let mut v = vec![0.0; self.basis_count()];
        self.basis_into(x, &mut v);
        BasisVector(v)
    }

    pub fn basis_derivative(&self, x: f64) -> BasisVector {
        let mut v = vec![0.0; self.basis_count()];
        let mut d = vec![0.0; self.basis_count()];
        self.basis_and_derivative_into(x, &mut v, &mut d);
        BasisVector(d)
    }

    /// `sum_i coeffs[i] * B_i(x)`.
    pub fn spline(&self, coeffs: &[f64], x: f64) -> Result<f64> {
        self.check_coeffs(coeffs)?;
        let k = self.config.order;
        let x = self.clamp(x);
        let mu = self.span(x);
        let mut local = [0.0; MAX_ORDER + 1];
        self.nonzero_basis(k, mu, x, &mut local);
        Ok(local[..=k].iter().zip(&coeffs[mu - k..=mu]).map(|(b, c)| b * c).sum())
    }

    pub(crate) fn check_coeffs(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.basis_count() {
            return Err(Error::shape(
                "spline coefficients",
                format!("{} basis functions", self.basis_count()),
                format!("{} coefficients", coeffs.len()),
            ));
        }
        Ok(())
    }
}

/// Values (or derivatives) of all basis functions at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisVector(pub Vec<f64>);

impl BasisVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl core::ops::Deref for BasisVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn make_grid(domain_min: f64, domain_max: f64, intervals: usize, order: usize) -> Result<SplineGrid> {
    SplineGrid::new(domain_min, domain_max, intervals, order)
}

pub fn basis_eval(grid: &SplineGrid, x: f64) -> BasisVector {
    grid.basis(x)
}

pub fn basis_eval_derivative(grid: &SplineGrid, x: f64) -> BasisVector {
    grid.basis_derivative(x)
}

pub fn spline_eval(grid: &SplineGrid, coeffs: &[f64], x: f64) -> Result<f64> {
    grid.spline(coeffs, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Textbook recursive definition, half-open intervals, with the right
    /// domain boundary folded into the last interval.
    fn cox_de_boor(t: &[f64], i: usize, k: usize, x: f64, last_span: usize) -> f64 {
        if k == 0 {
            if x == t[last_span + 1] {
                return if i == last_span { 1.0 } else { 0.0 };
            }
            return if t[i] <= x && x < t[i + 1] { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = t[i + k] - t[i];
        if d1 != 0.0 {
            v += (x - t[i]) / d1 * cox_de_boor(t, i, k - 1, x, last_span);
        }
        let d2 = t[i + k + 1] - t[i + 1];
        if d2 != 0.0 {
            v += (t[i + k + 1] - x) / d2 * cox_de_boor(t, i + 1, k - 1, x, last_span);
        }
        v
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn default_grid_knots() {
        let g = make_grid(-1.0, 1.0, 3, 3).unwrap();
        let expected = [
            -3.0,
            -7.0 / 3.0,
            -5.0 / 3.0,
            -1.0,
            -1.0 / 3.0,
            1.0 / 3.0,
            1.0,
            5.0 / 3.0,
            7.0 / 3.0,
            3.0,
        ];
        assert!(close(g.knots(), &expected, 1e-12), "{:?}", g.knots());
        assert_eq!(g.basis_count(), 6);
    }

    #[test]
    fn small_grids() {
        let g = make_grid(0.0, 2.0, 2, 1).unwrap();
        assert_eq!(g.knots(), &[-1.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(g.basis_count(), 3);
        assert_eq!(make_grid(0.0, 1.0, 1, 1).unwrap().basis_count(), 2);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(matches!(make_grid(0.0, 1.0, 0, 3), Err(Error::Config(_))));
        assert!(matches!(make_grid(0.0, 1.0, 3, 0), Err(Error::Config(_))));
        assert!(matches!(make_grid(1.0, 1.0, 3, 3), Err(Error::Config(_))));
        assert!(matches!(make_grid(2.0, 1.0, 3, 3), Err(Error::Config(_))));
        assert!(matches!(make_grid(0.0, f64::NAN, 3, 3), Err(Error::Config(_))));
    }

    #[test]
    fn hat_at_middle_knot() {
        let g = make_grid(0.0, 2.0, 2, 1).unwrap();
        assert!(close(&basis_eval(&g, 1.0), &[0.0, 1.0, 0.0], 1e-15));
    }

    #[test]
    fn clamping() {
        let g = make_grid(-1.0, 1.0, 3, 3).unwrap();
        assert_eq!(basis_eval(&g, 5.0), basis_eval(&g, 1.0));
        assert_eq!(basis_eval(&g, -7.0), basis_eval(&g, -1.0));
        assert!(basis_eval_derivative(&g, 1.5).iter().all(|&d| d == 0.0));
        assert!(basis_eval_derivative(&g, -1.01).iter().all(|&d| d == 0.0));
    }

    #[test]
    fn matches_recursive_definition() {
        for intervals in 1..=5 {
            for order in 1..=5 {
                let g = make_grid(-1.0, 1.0, intervals, order).unwrap();
                let last_span = order + intervals - 1;
                for s in 0..=200 {
                    let x = -1.0 + 2.0 * s as f64 / 200.0;
                    let fast = basis_eval(&g, x);
                    let slow: Vec<f64> = (0..g.basis_count())
                        .map(|i| cox_de_boor(g.knots(), i, order, x, last_span))
                        .collect();
                    assert!(close(&fast, &slow, 1e-12), "G={intervals} k={order} x={x}");
                }
            }
        }
    }

    #[test]
    fn spline_against_term_by_term_sum() {
        let g = make_grid(-1.0, 1.0, 4, 3).unwrap();
        let coeffs: Vec<f64> = (0..g.basis_count()).map(|i| i as f64).collect();
        for s in 0..50 {
            let x = -1.0 + 2.0 * s as f64 / 49.0;
            let direct: f64 = (0..g.basis_count())
                .map(|i| coeffs[i] * cox_de_boor(g.knots(), i, 3, x, 3 + 4 - 1))
                .sum();
            assert!((spline_eval(&g, &coeffs, x).unwrap() - direct).abs() < 1e-12);
        }
        let ones = alloc::vec![2.5; g.basis_count()];
        assert!((spline_eval(&g, &ones, 0.37).unwrap() - 2.5).abs() < 1e-12);
        let zeros = alloc::vec![0.0; g.basis_count()];
        assert_eq!(spline_eval(&g, &zeros, 0.37).unwrap(), 0.0);
        assert!(matches!(spline_eval(&g, &[1.0; 3], 0.0), Err(Error::Shape { .. })));
    }

    #[test]
    fn order_one_is_hat_functions() {
        let g = make_grid(-1.0, 1.0, 4, 1).unwrap();
        let h = g.spacing();
        for s in 0..=100 {
            let x = -1.0 + 2.0 * s as f64 / 100.0;
            let b = basis_eval(&g, x);
            for (i, &v) in b.iter().enumerate() {
                // hat i peaks at knot i+1
                let peak = g.knots()[i + 1];
                let hat = (1.0 - (x - peak).abs() / h).max(0.0);
                assert!((v - hat).abs() < 1e-12, "x={x} i={i}");
            }
        }
    }

    #[test]
    fn derivative_against_finite_differences() {
        let g = make_grid(-1.0, 1.0, 3, 3).unwrap();
        let h = 1e-6;
        let d = basis_eval_derivative(&g, 0.3);
        let plus = basis_eval(&g, 0.3 + h);
        let minus = basis_eval(&g, 0.3 - h);
        for i in 0..g.basis_count() {
            let fd = (plus[i] - minus[i]) / (2.0 * h);
            let scale = d[i].abs().max(1e-3);
            assert!((fd - d[i]).abs() / scale < 1e-5, "i={i}: {} vs {fd}", d[i]);
        }
        assert!(d.sum().abs() < 1e-12);
    }

    #[test]
    fn serde_rebuilds_knots() {
        let g = make_grid(-2.0, 1.0, 4, 2).unwrap();
        let c: GridConfig = g.clone().into();
        assert_eq!(SplineGrid::try_from(c).unwrap(), g);
    }
}
