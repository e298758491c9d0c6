//! Scalar activations and their analytic gradients.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::bspline::SplineGrid;
use crate::error::{Error, Result};

/// Logistic function, branching on sign so `exp` never overflows.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `z / (1 + exp(-beta * z))`.
#[inline]
pub fn silu(z: f64, beta: f64) -> f64 {
    z * sigmoid(beta * z)
}

/// Partial derivatives `(d/dz, d/dbeta)` of [`silu`].
#[inline]
pub fn silu_grad(z: f64, beta: f64) -> (f64, f64) {
    let s = sigmoid(beta * z);
    let ds = s * (1.0 - s);
    (s + beta * z * ds, z * z * ds)
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    if z.is_empty() {
        return Err(Error::shape("softmax", "at least one logit", "0 logits"));
    }
    let mut out = vec![0.0; z.len()];
    softmax_into(z, &mut out);
    Ok(out)
}

pub(crate) fn softmax_into(z: &[f64], out: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = libm::exp(v - max);
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// One KAN edge: `base_weight * SiLU(x) + spline_weight * sum_i coeffs[i] B_i(x)`.
///
/// The SiLU here is the fixed `beta = 1` variant; only MLP neurons learn a slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanEdge {
    pub base_weight: f64,
    pub spline_weight: f64,
    pub coeffs: Vec<f64>,
}

impl KanEdge {
    pub fn new(base_weight: f64, spline_weight: f64, coeffs: Vec<f64>) -> Self {
        KanEdge {
            base_weight,
            spline_weight,
            coeffs,
        }
    }

    pub fn zero(basis_count: usize) -> Self {
        KanEdge::new(0.0, 0.0, vec![0.0; basis_count])
    }

    /// `2 + G + k`.
    pub fn param_count(&self) -> usize {
        2 + self.coeffs.len()
    }

    pub fn eval(&self, grid: &SplineGrid, x: f64) -> Result<f64> {
        let spline = grid.spline(&self.coeffs, x)?;
        Ok(self.base_weight * silu(x, 1.0) + self.spline_weight * spline)
    }

    /// Value plus gradients with respect to every edge parameter and the input.
    pub fn eval_with_grad(&self, grid: &SplineGrid, x: f64) -> Result<(f64, EdgeGrad)> {
        grid.check_coeffs(&self.coeffs)?;
        let n = grid.basis_count();
        let mut basis = vec![0.0; n];
        let mut dbasis = vec![0.0; n];
        grid.basis_and_derivative_into(x, &mut basis, &mut dbasis);
        let spline: f64 = dot(&self.coeffs, &basis);
        let dspline: f64 = dot(&self.coeffs, &dbasis);
        let act = silu(x, 1.0);
        let (dact, _) = silu_grad(x, 1.0);
        let value = self.base_weight * act + self.spline_weight * spline;
        let grad = EdgeGrad {
            base_weight: act,
            spline_weight: spline,
            coeffs: basis.iter().map(|b| self.spline_weight * b).collect(),
            input: self.base_weight * dact + self.spline_weight * dspline,
        };
        Ok((value, grad))
    }

    /// The edge written as a weight row times a nonlinear feature column:
    /// weights `(w_b, w_s c_1, ..., w_s c_n)`, features `(SiLU(x), B_1(x), ..., B_n(x))`.
    pub fn feature_form(&self, grid: &SplineGrid, x: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        grid.check_coeffs(&self.coeffs)?;
        let mut weights = Vec::with_capacity(1 + self.coeffs.len());
        weights.push(self.base_weight);
        weights.extend(self.coeffs.iter().map(|c| self.spline_weight * c));
        let mut features = vec![0.0; 1 + self.coeffs.len()];
        features[0] = silu(x, 1.0);
        grid.basis_into(x, &mut features[1..]);
        Ok((weights, features))
    }
}

/// Gradient of one edge's output with respect to its parameters and input.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGrad {
    pub base_weight: f64,
    pub spline_weight: f64,
    pub coeffs: Vec<f64>,
    pub input: f64,
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn kan_edge_eval(edge: &KanEdge, grid: &SplineGrid, x: f64) -> Result<f64> {
    edge.eval(grid, x)
}

pub fn kan_edge_feature_form(edge: &KanEdge, grid: &SplineGrid, x: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    edge.feature_form(grid, x)
}
