//! Spectral and distributional health checks at candidate minimizers:
//! smallest Hessian eigenvalue, the full spectrum and spectral radius of the
//! linearized message-passing update, Bethe-Hessian stability certificates,
//! Wasserstein-2 distance of the coordinate law to its predicted limit, and
//! membership in the moment box and distributional neighborhood used to
//! classify candidate points.
//!
//! Dense eigensolvers are used throughout (desk scale, n up to about 2000);
//! a power-iteration radius estimator is provided as an independent
//! cross-check of the dense spectral radius.

use crate::energy::{
    amp_jacobian, bethe_hessian, f_tap, grad_tap_state, summary_stats, MagnetizationState, Sign,
};
use crate::error::{Error, Result};
use crate::math::{arctanh, normal_quantile};
use crate::model::ModelInstance;
use crate::scalars::ScalarConstants;
use faer::Side;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Matrices must be symmetric to this absolute tolerance.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenpair residual accepted from the dense symmetric solver, relative to
/// the spectral norm of the matrix (backward-error criterion).
const EIG_RESIDUAL_TOL: f64 = 1e-8;
/// Default moment-box half-width.
pub const DEFAULT_DELTA: f64 = 0.05;
/// Default Wasserstein neighborhood radius.
pub const DEFAULT_ETA: f64 = 0.3;

/// Everything worth knowing about one candidate point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    /// Smallest eigenvalue of the scaled TAP Hessian n grad^2 F at m.
    pub lambda_min_hessian: f64,
    /// All 2n eigenvalues of the linearized update at (m, m), as (re, im).
    pub jacobian_spectrum: Vec<(f64, f64)>,
    /// Largest modulus over the Jacobian spectrum.
    pub spectral_radius: f64,
    /// Bethe-Hessian positivity at r = 1, plus and minus signs.
    pub bethe_pass_plus: bool,
    pub bethe_pass_minus: bool,
    /// W2 distance of the signal-aligned arctanh coordinate law to its
    /// Gaussian limit.
    pub w2_to_mu_star: f64,
    #[serde(rename = "in_B_delta")]
    pub in_b_delta: bool,
    #[serde(rename = "in_D_eta")]
    pub in_d_eta: bool,
    pub f_tap_value: f64,
    /// |g(m)|^2 / n.
    pub grad_sq_norm: f64,
}

/// Bethe-Hessian positivity at a given radius, for both signs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BetheCheck {
    pub lambda_min_plus: f64,
    pub lambda_min_minus: f64,
    pub pass_plus: bool,
    pub pass_minus: bool,
}

fn to_faer(a: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Smallest eigenpair of a symmetric matrix by dense eigendecomposition.
/// The input must be symmetric to 1e-10 entrywise and the returned unit
/// eigenvector is validated to relative residual
/// |Av - theta v| / max(1, |A|_2) <= 1e-8.
pub fn min_eig_symmetric(a: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::InvalidDimension(format!(
            "square nonempty matrix required, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix entries".into()));
    }
    let mut max_abs = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            max_abs = max_abs.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if max_abs > SYMMETRY_TOL {
        return Err(Error::Asymmetric { max_abs });
    }
    let evd = to_faer(a)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Convergence {
            what: format!("dense symmetric eigendecomposition ({e:?})"),
            residual: f64::NAN,
            iters: 0,
        })?;
    // eigenvalues come back in nondecreasing order
    let s = evd.S().column_vector();
    let theta = s[0];
    let u = evd.U();
    let v = DVector::from_fn(n, |i, _| u[(i, 0)]);
    let scale = s[n - 1].abs().max(theta.abs()).max(1.0);
    let residual = (a * &v - &v * theta).norm() / (v.norm() * scale);
    if !(residual <= EIG_RESIDUAL_TOL) {
        return Err(Error::Convergence {
            what: "smallest-eigenpair residual validation".into(),
            residual,
            iters: 0,
        });
    }
    Ok((theta, v))
}

/// All 2n eigenvalues of the linearized update at the pair (m, m), via real
/// Schur decomposition, together with the spectral radius (max modulus).
pub fn jacobian_spectrum(
    instance: &ModelInstance,
    m: &DVector<f64>,
) -> Result<(Vec<(f64, f64)>, f64)> {
    let b = amp_jacobian(instance, m, m)?;
    let eigs = to_faer(&b).eigenvalues().map_err(|e| Error::Convergence {
        what: format!("Schur decomposition of the linearized update ({e:?})"),
        residual: f64::NAN,
        iters: 0,
    })?;
    let spectrum: Vec<(f64, f64)> = eigs.into_iter().map(|z| (z.re, z.im)).collect();
    let radius = spectrum
        .iter()
        .map(|&(re, im)| re.hypot(im))
        .fold(0.0, f64::max);
    Ok((spectrum, radius))
}

/// Spectral-radius estimate of the linearized update by plain power
/// iteration with a windowed geometric mean of growth factors. Cross-check
/// for [`jacobian_spectrum`]; the dense route is authoritative.
pub fn jacobian_radius_power(
    instance: &ModelInstance,
    m: &DVector<f64>,
    tol: f64,
    max_iters: usize,
) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let b = amp_jacobian(instance, m, m)?;
    let dim = b.nrows();
    let mut rng = instance.init_rng();
    let mut v = DVector::from_fn(dim, |_, _| {
        rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal)
    });
    v /= v.norm();
    const WINDOW: usize = 100;
    let mut log_growth = std::collections::VecDeque::with_capacity(WINDOW);
    let mut previous = f64::NAN;
    for k in 1..=max_iters {
        let w = &b * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        if !norm.is_finite() {
            return Err(Error::NonFinite("power iterate".into()));
        }
        log_growth.push_back(norm.ln());
        if log_growth.len() > WINDOW {
            log_growth.pop_front();
        }
        v = w / norm;
        if k % WINDOW == 0 && log_growth.len() == WINDOW {
            let estimate = (log_growth.iter().sum::<f64>() / WINDOW as f64).exp();
            if (estimate - previous).abs() <= tol * estimate.max(f64::MIN_POSITIVE) {
                return Ok(estimate);
            }
            previous = estimate;
        }
    }
    Err(Error::Convergence {
        what: "power-iteration spectral radius estimate".into(),
        residual: previous,
        iters: max_iters,
    })
}

/// Smallest Bethe-Hessian eigenvalues at radius r for both signs;
/// positivity of the plus sign at r = 1 certifies local strong convexity,
/// and both together certify that the linearization is a contraction.
pub fn bethe_stability_check(instance: &ModelInstance, m: &DVector<f64>, r: f64) -> Result<BetheCheck> {
    let (lambda_min_plus, _) = min_eig_symmetric(&bethe_hessian(instance, m, r, Sign::Plus)?)?;
    let (lambda_min_minus, _) = min_eig_symmetric(&bethe_hessian(instance, m, r, Sign::Minus)?)?;
    Ok(BetheCheck {
        lambda_min_plus,
        lambda_min_minus,
        pass_plus: lambda_min_plus > 0.0,
        pass_minus: lambda_min_minus > 0.0,
    })
}

/// Empirical W2 distance between `values` and a target law given by its
/// quantile function, using the optimal one-dimensional coupling: sorted
/// values paired with target quantiles at midpoints (i - 1/2)/n.
pub fn w2_quantile_coupling<F: Fn(f64) -> f64>(values: &[f64], quantile: F) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidDimension("empty sample".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sample values".into()));
    }
    let mut xs = values.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut acc = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let t = quantile((i as f64 + 0.5) / n);
        if !t.is_finite() {
            return Err(Error::NonFinite("target quantile".into()));
        }
        acc += (x - t) * (x - t);
    }
    Ok((acc / n).sqrt())
}

/// Empirical W2 distance between two equal-size samples (sorted pairing).
pub fn w2_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::DimensionMismatch(
            "two-sample W2 needs equal nonzero lengths".into(),
        ));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sample values".into()));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let acc: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok((acc / a.len() as f64).sqrt())
}

/// W2 distance between the empirical law of arctanh(m_i) and the Gaussian
/// limit law N(lambda^2 q*, lambda^2 q*) of the arctanh'd coordinates.
/// `m` is expected in the gauge where the planted signal is all-ones
/// (see [`signal_aligned`]).
pub fn w2_arctanh(m: &DVector<f64>, constants: &ScalarConstants) -> Result<f64> {
    if m.iter().any(|v| !(v.abs() < 1.0)) {
        return Err(Error::Domain(
            "coordinates must lie strictly inside (-1, 1)".into(),
        ));
    }
    let values: Vec<f64> = m.iter().map(|&v| arctanh(v)).collect();
    let mean = constants.arctanh_mean();
    let sd = constants.arctanh_var().sqrt();
    if sd == 0.0 {
        return w2_quantile_coupling(&values, |_| mean);
    }
    w2_quantile_coupling(&values, |u| mean + sd * normal_quantile(u))
}

/// Moment-box and Wasserstein-neighborhood membership:
/// the first holds when Q, the coordinate mean, and the mean binary entropy
/// are all within delta of their limits (q*, q*, h*); the second when the
/// arctanh W2 distance is below eta. `m` is expected signal-aligned.
pub fn set_membership(
    m: &DVector<f64>,
    delta: f64,
    eta: f64,
    constants: &ScalarConstants,
) -> Result<(bool, bool)> {
    if !(delta > 0.0) || !(eta > 0.0) {
        return Err(Error::InvalidParameter(
            "membership radii must be positive".into(),
        ));
    }
    let s = summary_stats(m)?;
    let worst = (s.q - constants.q_star)
        .abs()
        .max((s.m_mean - constants.q_star).abs())
        .max((s.entropy_mean - constants.h_star).abs());
    let in_b = worst < delta;
    let in_d = w2_arctanh(m, constants)? < eta;
    Ok((in_b, in_d))
}

/// Express m in the gauge where the planted signal is all-ones, with the
/// global sign chosen to align with the signal: coordinates are multiplied
/// by x_i and the whole vector by the sign of <m, x>.
pub fn signal_aligned(instance: &ModelInstance, m: &DVector<f64>) -> DVector<f64> {
    let s = if m.dot(&instance.x) >= 0.0 { 1.0 } else { -1.0 };
    DVector::from_fn(m.len(), |i, _| s * instance.x[i] * m[i])
}

/// Run every diagnostic at one candidate state.
pub fn diagnose(
    instance: &ModelInstance,
    state: &MagnetizationState,
    constants: &ScalarConstants,
    delta: f64,
    eta: f64,
) -> Result<DiagnosticsReport> {
    if (constants.lambda - instance.lambda).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "scalar constants were computed at lambda {} but the instance has {}",
            constants.lambda, instance.lambda
        )));
    }
    let hess = bethe_hessian(instance, &state.m, 1.0, Sign::Plus)?;
    let (lambda_min_hessian, _) = min_eig_symmetric(&hess)?;
    let (spectrum, radius) = jacobian_spectrum(instance, &state.m)?;
    let bethe = bethe_stability_check(instance, &state.m, 1.0)?;
    let aligned = signal_aligned(instance, &state.m);
    let w2 = w2_arctanh(&aligned, constants)?;
    let (in_b, in_d) = set_membership(&aligned, delta, eta, constants)?;
    let f_tap_value = f_tap(instance, &state.m)?;
    let g = grad_tap_state(instance, state)?;
    Ok(DiagnosticsReport {
        lambda_min_hessian,
        jacobian_spectrum: spectrum,
        spectral_radius: radius,
        bethe_pass_plus: bethe.pass_plus,
        bethe_pass_minus: bethe.pass_minus,
        w2_to_mu_star: w2,
        in_b_delta: in_b,
        in_d_eta: in_d,
        f_tap_value,
        grad_sq_norm: g.norm_squared() / instance.n as f64,
    })
}

/// CSV rendering of a complex spectrum, one "re,im" row per eigenvalue.
pub fn spectrum_to_csv(spectrum: &[(f64, f64)]) -> String {
    let mut out = String::from("re,im\n");
    for (re, im) in spectrum {
        out.push_str(&format!("{re},{im}\n"));
    }
    out
}
