//! Gauss-Hermite quadrature: nodes, weights, and weighted integration.
//!
//! A rule of order `n` approximates integrals against the weight `e^{-z^2}`
//! over the whole real line,
//!
//! ```text
//!   integral f(z) e^{-z^2} dz  ~=  sum_i w_i f(x_i),
//! ```
//!
//! and is exact for polynomials of degree <= 2n-1. Nodes are the roots of the
//! physicists' Hermite polynomial `H_n`. Nodes and weights are computed by the
//! Golub-Welsch construction: eigenvalues of the symmetric tridiagonal Jacobi
//! matrix with zero diagonal and off-diagonals `sqrt(i/2)` give the nodes, and
//! the squared first components of the normalized eigenvectors, scaled by
//! `sqrt(pi)`, give the weights. This is stable for every supported order and
//! avoids evaluating `H_n` at large arguments.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest supported rule order.
pub const MAX_ORDER: usize = 200;

/// Nodes and weights of one Gauss-Hermite rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes sorted ascending, symmetric about 0.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Positive weights; they sum to sqrt(pi).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Builds the Gauss-Hermite rule of order `n`.
pub fn hermite_rule(n: usize) -> Result<QuadratureRule> {
    if n == 0 || n > MAX_ORDER {
        return Err(Error::QuadratureOrder(n));
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64 / 2.0).sqrt();
        jacobi[(i - 1, i)] = b;
        jacobi[(i, i - 1)] = b;
    }
    let eigen = jacobi.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));

    let total = std::f64::consts::PI.sqrt();
    let mut nodes: Vec<f64> = order.iter().map(|&j| eigen.eigenvalues[j]).collect();
    let mut weights: Vec<f64> = order
        .iter()
        .map(|&j| {
            let first = eigen.eigenvectors[(0, j)];
            total * first * first
        })
        .collect();

    // The rule is symmetric by construction; enforce the pairing exactly so
    // odd moments vanish to the last bit.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    Ok(QuadratureRule { nodes, weights })
}

/// Evaluates `sum_i w_i f(x_i)`.
///
/// A non-finite `f(x_i)` is reported as an error naming the offending node.
pub fn gh_integrate(f: impl Fn(f64) -> f64, rule: &QuadratureRule) -> Result<f64> {
    let mut acc = 0.0;
    for (i, (&x, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
        let value = f(x);
        if !value.is_finite() {
            return Err(Error::NonFiniteIntegrand { index: i, node: x, value });
        }
        acc += w * value;
    }
    Ok(acc)
}
