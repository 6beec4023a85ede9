//! Small scalar helpers used across modules.

use statrs::distribution::{ContinuousCDF, Normal};

/// log(2 cosh(x)), stable for large |x|.
///
/// Uses log(2cosh x) = |x| + log(1 + exp(-2|x|)) so that entropy values
/// computed from pre-images h stay finite all the way to |h| ~ 700+.
pub fn log_2cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// x*ln(x) with the continuous extension 0 at x = 0.
pub fn xlnx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Odd-symmetric arctanh: the standard library's `atanh` evaluates a log1p
/// formula whose rounding differs between positive and negative arguments,
/// which breaks exact sign symmetries downstream. Evaluating on |x| and
/// transferring the sign restores arctanh(-x) = -arctanh(x) bitwise.
pub fn arctanh(x: f64) -> f64 {
    x.abs().atanh().copysign(x)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    // unwrap is fine: parameters are constants
    Normal::new(0.0, 1.0).unwrap().cdf(x)
}

/// Standard normal quantile, polished with one Newton step on the CDF so the
/// result is accurate to ~1e-15 rather than the ~1e-9 of the underlying
/// rational approximation.
pub fn normal_quantile(u: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0);
    let n = Normal::new(0.0, 1.0).unwrap();
    let x = n.inverse_cdf(u);
    // one Newton step: x <- x - (Phi(x) - u)/phi(x)
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if pdf > 1e-300 {
        x - (n.cdf(x) - u) / pdf
    } else {
        x
    }
}

/// Mean and scaled standard error (sample std / sqrt(len)) of a slice.
/// Returns (0, 0) on empty input and stderr 0 for singletons.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, var.sqrt() / (n as f64).sqrt())
}
