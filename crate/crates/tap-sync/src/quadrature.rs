//! Gauss–Hermite quadrature re-weighted for expectations against the
//! standard normal law.
//!
//! Nodes and weights come from the Golub–Welsch construction: the nodes are
//! eigenvalues of the symmetric tridiagonal companion (Jacobi) matrix of the
//! Hermite recurrence, with off-diagonal entries sqrt(k/2), and each weight
//! is the squared first component of the corresponding normalized
//! eigenvector. After the change of variables x -> sqrt(2) x the rule
//! integrates against the N(0,1) density with weights that sum to 1 exactly
//! (they are squared components of one row of an orthogonal matrix).
//!
//! The integrands in this crate (tanh powers, log-cosh) are entire and grow
//! at most polynomially, so a 201-node rule is far inside its comfort zone;
//! `GaussQuadrature::doubled` exists to verify that claim numerically.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};

/// Quadrature rule for E[f(G)], G ~ N(0,1).
#[derive(Debug, Clone)]
pub struct GaussQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Node count used throughout the crate unless a caller overrides it.
pub const DEFAULT_NODES: usize = 201;

impl GaussQuadrature {
    /// Build an n-node rule.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(
                "quadrature needs at least 2 nodes".into(),
            ));
        }
        let mut jacobi = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let b = (k as f64 / 2.0).sqrt();
            jacobi[(k, k - 1)] = b;
            jacobi[(k - 1, k)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let node = std::f64::consts::SQRT_2 * eig.eigenvalues[i];
                let w = eig.eigenvectors[(0, i)].powi(2);
                (node, w)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    /// The 201-node rule used as the crate-wide default.
    pub fn standard() -> Self {
        // construction only fails for n < 2
        Self::new(DEFAULT_NODES).expect("default quadrature")
    }

    /// Same rule with twice the nodes, for convergence self-checks.
    pub fn doubled(&self) -> Result<Self> {
        Self::new(2 * self.nodes.len())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// E[f(G)] with a finiteness check at every node.
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("integrand at node {x:.6}")));
            }
            acc += w * v;
        }
        Ok(acc)
    }
}

impl Default for GaussQuadrature {
    fn default() -> Self {
        Self::standard()
    }
}

/// Free-function form of [`GaussQuadrature::expect`].
pub fn gauss_expectation(f: impl FnMut(f64) -> f64, quad: &GaussQuadrature) -> Result<f64> {
    quad.expect(f)
}
