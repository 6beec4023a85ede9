//! TAP and naive mean-field free energies, their gradients, the rescaled
//! Hessian, the Bethe-Hessian family, and the iteration Jacobian.
//!
//! Conventions: for an instance with observation Y and signal strength
//! lambda, the TAP free energy of m in (-1,1)^n is
//!
//! ```text
//! F_TAP(m) = -(lambda/2n) <m, Ym> - (1/n) sum_i h(m_i)
//!            - (lambda^2/4) (1 - Q(m))^2,      Q(m) = |m|^2 / n,
//! ```
//!
//! with h the binary entropy in nats. The naive (variational Bayes) free
//! energy F_VB drops the final correction term. Gradients are rescaled,
//! g = n grad F, so that their coordinates stay O(1) as n grows.
//!
//! Points with a coordinate exactly at +-1 are rejected: the entropy is
//! finite there but the gradient is not. Iterative code avoids the issue by
//! carrying the pre-image h with m = tanh(h); externally supplied m vectors
//! are clamped to |m_i| <= 1 - 1e-12 with the number of clamped coordinates
//! reported.

use crate::error::{Error, Result};
use crate::math::{arctanh, xlnx};
use crate::model::ModelInstance;
use nalgebra::{DMatrix, DVector};

/// Largest magnitude allowed for a magnetization coordinate.
pub const M_CLAMP: f64 = 1.0 - 1e-12;

/// Iteration state carrying both the pre-image h and m = tanh(h).
///
/// Keeping h as primary state makes arctanh(m) exact even where tanh has
/// saturated, which is what the gradient needs.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnetizationState {
    pub h: DVector<f64>,
    pub m: DVector<f64>,
}

impl MagnetizationState {
    /// Build the state from pre-image coordinates; m = tanh(h) clamped
    /// away from +-1 so downstream evaluations stay in the open cube.
    pub fn from_h(h: DVector<f64>) -> Result<Self> {
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("pre-image coordinates".into()));
        }
        let m = h.map(|v| v.tanh().clamp(-M_CLAMP, M_CLAMP));
        Ok(Self { h, m })
    }

    /// Build the state from magnetization coordinates, clamping any that
    /// sit within 1e-12 of +-1. Returns the number of clamped coordinates.
    pub fn from_m_clamped(m: DVector<f64>) -> Result<(Self, usize)> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("magnetization coordinates".into()));
        }
        if m.iter().any(|v| v.abs() > 1.0) {
            return Err(Error::Domain(
                "magnetization coordinate outside [-1, 1]".into(),
            ));
        }
        let clamped = m.iter().filter(|v| v.abs() > M_CLAMP).count();
        let m = m.map(|v| v.clamp(-M_CLAMP, M_CLAMP));
        let h = m.map(arctanh);
        Ok((Self { h, m }, clamped))
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// Empirical summaries of a magnetization vector.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SummaryStats {
    /// Mean square Q(m) = |m|^2 / n.
    pub q: f64,
    /// Mean coordinate M(m) = <m, 1> / n.
    pub m_mean: f64,
    /// Mean binary entropy.
    pub entropy_mean: f64,
    /// Mean of m_i * arctanh(m_i).
    pub arctanh_mean: f64,
}

fn check_interior(m: &DVector<f64>) -> Result<()> {
    for &v in m.iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite("magnetization coordinate".into()));
        }
        if v.abs() >= 1.0 {
            return Err(Error::Domain(format!(
                "magnetization coordinate {v} is not strictly inside (-1, 1)"
            )));
        }
    }
    Ok(())
}

fn check_len(instance: &ModelInstance, m: &DVector<f64>) -> Result<()> {
    if m.len() != instance.n {
        return Err(Error::DimensionMismatch(format!(
            "vector has length {} but instance dimension is {}",
            m.len(),
            instance.n
        )));
    }
    Ok(())
}

/// Binary entropy h(m) = -((1+m)/2) log((1+m)/2) - ((1-m)/2) log((1-m)/2),
/// in nats, with the limit value 0 at the endpoints.
pub fn binary_entropy(m: f64) -> Result<f64> {
    if !(m.abs() <= 1.0) {
        return Err(Error::Domain(format!(
            "binary entropy needs |m| <= 1, got {m}"
        )));
    }
    Ok(-xlnx((1.0 + m) / 2.0) - xlnx((1.0 - m) / 2.0))
}

fn mean_entropy(m: &DVector<f64>) -> f64 {
    m.iter()
        .map(|&v| -xlnx((1.0 + v) / 2.0) - xlnx((1.0 - v) / 2.0))
        .sum::<f64>()
        / m.len() as f64
}

fn q_of(m: &DVector<f64>) -> f64 {
    m.norm_squared() / m.len() as f64
}

/// Naive mean-field free energy F_VB(m).
pub fn f_vb(instance: &ModelInstance, m: &DVector<f64>) -> Result<f64> {
    check_len(instance, m)?;
    check_interior(m)?;
    let n = instance.n as f64;
    let quad = m.dot(&(&instance.y * m));
    Ok(-instance.lambda / (2.0 * n) * quad - mean_entropy(m))
}

/// TAP free energy F_TAP(m) = F_VB(m) - (lambda^2/4)(1 - Q(m))^2.
pub fn f_tap(instance: &ModelInstance, m: &DVector<f64>) -> Result<f64> {
    let one_minus_q = 1.0 - q_of(m);
    Ok(f_vb(instance, m)?
        - instance.lambda * instance.lambda / 4.0 * one_minus_q * one_minus_q)
}

/// Rescaled VB gradient n grad F_VB = -lambda Y m + arctanh(m).
pub fn grad_vb(instance: &ModelInstance, m: &DVector<f64>) -> Result<DVector<f64>> {
    check_len(instance, m)?;
    check_interior(m)?;
    let mut g = &instance.y * m;
    g *= -instance.lambda;
    g.zip_apply(m, |gi, mi| *gi += arctanh(mi));
    Ok(g)
}

/// Rescaled TAP gradient
/// g(m) = -lambda Y m + arctanh(m) + lambda^2 (1 - Q(m)) m.
pub fn grad_tap(instance: &ModelInstance, m: &DVector<f64>) -> Result<DVector<f64>> {
    let mut g = grad_vb(instance, m)?;
    let coeff = instance.lambda * instance.lambda * (1.0 - q_of(m));
    g.axpy(coeff, m, 1.0);
    Ok(g)
}

/// TAP gradient evaluated from an iteration state, using the stored h in
/// place of arctanh(m) so saturated coordinates keep an exact pre-image.
pub fn grad_tap_state(instance: &ModelInstance, state: &MagnetizationState) -> Result<DVector<f64>> {
    check_len(instance, &state.m)?;
    let mut g = &instance.y * &state.m;
    g *= -instance.lambda;
    g += &state.h;
    let coeff = instance.lambda * instance.lambda * (1.0 - q_of(&state.m));
    g.axpy(coeff, &state.m, 1.0);
    Ok(g)
}

/// VB gradient from an iteration state (h in place of arctanh(m)).
pub fn grad_vb_state(instance: &ModelInstance, state: &MagnetizationState) -> Result<DVector<f64>> {
    check_len(instance, &state.m)?;
    let mut g = &instance.y * &state.m;
    g *= -instance.lambda;
    g += &state.h;
    Ok(g)
}

/// Apply the rescaled TAP Hessian
/// H(m) = -lambda Y + diag(1/(1-m^2)) + lambda^2 (1-Q(m)) I - (2 lambda^2/n) m m^T
/// to a vector.
pub fn hess_matvec(
    instance: &ModelInstance,
    m: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len(instance, m)?;
    check_len(instance, v)?;
    check_interior(m)?;
    let lambda = instance.lambda;
    let n = instance.n as f64;
    let shift = lambda * lambda * (1.0 - q_of(m));
    let mut out = &instance.y * v;
    out *= -lambda;
    for i in 0..instance.n {
        out[i] += v[i] / (1.0 - m[i] * m[i]) + shift * v[i];
    }
    out.axpy(-2.0 * lambda * lambda / n * m.dot(v), m, 1.0);
    Ok(out)
}

/// Sign selector for the Bethe-Hessian family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Dense Bethe Hessian
/// +-r (-lambda Y - (2 lambda^2/n) m m^T) + lambda^2 (1-Q(m)) I + r^2 diag(1/(1-m^2)).
///
/// At r = 1 with the plus sign this is exactly the TAP Hessian H(m).
pub fn bethe_hessian(
    instance: &ModelInstance,
    m: &DVector<f64>,
    r: f64,
    sign: Sign,
) -> Result<DMatrix<f64>> {
    check_len(instance, m)?;
    check_interior(m)?;
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Bethe Hessian parameter r must be positive, got {r}"
        )));
    }
    let lambda = instance.lambda;
    let n = instance.n;
    let shift = lambda * lambda * (1.0 - q_of(m));
    let s = sign.factor() * r;
    let rate = 2.0 * lambda * lambda / n as f64;
    let mut b = DMatrix::from_fn(n, n, |i, j| {
        s * (-lambda * instance.y[(i, j)] - rate * m[i] * m[j])
    });
    for i in 0..n {
        b[(i, i)] += shift + r * r / (1.0 - m[i] * m[i]);
    }
    Ok(b)
}

/// Dense rescaled TAP Hessian H(m); identical entry-by-entry to
/// [`bethe_hessian`] at r = 1 with the plus sign.
pub fn hess_dense(instance: &ModelInstance, m: &DVector<f64>) -> Result<DMatrix<f64>> {
    bethe_hessian(instance, m, 1.0, Sign::Plus)
}

/// Jacobian of the two-step iteration map at (m, m_minus), a 2n x 2n block
/// matrix
///
/// ```text
/// [ diag(1-m_+^2) (lambda Y + (2 lambda^2/n) m_minus m^T)   -diag(1-m_+^2) lambda^2 (1-Q(m)) ]
/// [ I                                                        0                               ]
/// ```
///
/// where m_+ = tanh(lambda Y m - lambda^2 (1-Q(m)) m_minus) is the next
/// iterate. At a critical point with m = m_minus = m* this is the stability
/// matrix B(m*).
pub fn amp_jacobian(
    instance: &ModelInstance,
    m: &DVector<f64>,
    m_minus: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    check_len(instance, m)?;
    check_len(instance, m_minus)?;
    check_interior(m)?;
    if m_minus.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("previous iterate".into()));
    }
    let lambda = instance.lambda;
    let n = instance.n;
    let one_minus_q = 1.0 - q_of(m);
    let h_plus = {
        let mut h = &instance.y * m;
        h *= lambda;
        h.axpy(-lambda * lambda * one_minus_q, m_minus, 1.0);
        h
    };
    let d: DVector<f64> = h_plus.map(|v| {
        let t = v.tanh();
        1.0 - t * t
    });
    let rate = 2.0 * lambda * lambda / n as f64;
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for k in 0..n {
            j[(i, k)] = d[i] * (lambda * instance.y[(i, k)] + rate * m_minus[i] * m[k]);
        }
        j[(i, n + i)] = -d[i] * lambda * lambda * one_minus_q;
        j[(n + i, i)] = 1.0;
    }
    Ok(j)
}

/// Empirical summaries (Q, M, mean entropy, mean m arctanh m).
pub fn summary_stats(m: &DVector<f64>) -> Result<SummaryStats> {
    if m.is_empty() {
        return Err(Error::InvalidDimension("empty magnetization vector".into()));
    }
    check_interior(m)?;
    let n = m.len() as f64;
    Ok(SummaryStats {
        q: q_of(m),
        m_mean: m.sum() / n,
        entropy_mean: mean_entropy(m),
        arctanh_mean: m.iter().map(|&v| v * arctanh(v)).sum::<f64>() / n,
    })
}
