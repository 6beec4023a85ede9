//! Iterative minimizers of the TAP free energy: the two-step message
//! passing iteration (AMP), damped natural gradient descent (NGD) on either
//! the TAP or the naive mean-field objective, plus spectral initialization,
//! sign alignment, and trace recording.
//!
//! All solvers carry the pre-image h as primary state with m = tanh(h), so
//! arctanh(m) never overflows; coordinates whose tanh saturates are clamped
//! to |m_i| <= 1 - 1e-12 and the worst-case clamp count is reported on the
//! trace.
//!
//! The iterations, per step k:
//!
//! ```text
//! AMP:    h_{k+1} = lambda Y m_k - lambda^2 (1 - Q(m_k)) m_{k-1}
//! NGD:    h_{k+1} = (1-eta) h_k + eta (lambda Y m_k - lambda^2 (1 - Q(m_k)) m_k)
//! NGD-VB: h_{k+1} = (1-eta) h_k + eta lambda Y m_k
//! ```
//!
//! with m_k = tanh(h_k) throughout. NGD coincides with mirror descent on
//! the free energy under the binary-entropy mirror map, which is what makes
//! its fixed points exactly the TAP critical points.

use crate::energy::{MagnetizationState, M_CLAMP};
use crate::error::{Error, Result};
use crate::math::log_2cosh;
use crate::model::ModelInstance;
use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Gradient tolerance used by [`find_m_star`].
pub const M_STAR_GRAD_TOL: f64 = 1e-13;
/// Iteration budget for the AMP stage of [`find_m_star`].
pub const M_STAR_AMP_ITERS: usize = 20_000;
/// Step size and budget for the NGD fallback stage of [`find_m_star`].
pub const M_STAR_FALLBACK_ETA: f64 = 0.05;
pub const M_STAR_FALLBACK_ITERS: usize = 200_000;

/// Oscillation detector: period-2 residual below this ...
const OSC_PERIOD2_TOL: f64 = 1e-10;
/// ... while the one-step residual stays above this ...
const OSC_STEP_TOL: f64 = 1e-4;
/// ... for this many consecutive iterations.
const OSC_RUN: usize = 50;

/// Trace recording: every iteration up to this k, then every tenth.
const TRACE_DENSE_LIMIT: usize = 1000;
const TRACE_STRIDE: usize = 10;

/// Power iteration settings for the spectral initialization.
const POWER_RESIDUAL_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 100_000;

/// Which update rule to iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Amp,
    Ngd,
    NgdVb,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Amp => write!(f, "amp"),
            Method::Ngd => write!(f, "ngd"),
            Method::NgdVb => write!(f, "ngd-vb"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "amp" => Ok(Method::Amp),
            "ngd" => Ok(Method::Ngd),
            "ngd-vb" | "ngd_vb" => Ok(Method::NgdVb),
            other => Err(Error::InvalidParameter(format!(
                "unknown method {other:?}; expected amp, ngd, or ngd-vb"
            ))),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Solver parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    /// Step size in (0, 1]; ignored by AMP.
    pub eta: f64,
    pub max_iters: usize,
    /// Stop when |g(m)|^2 / n falls below this.
    pub grad_tol: f64,
    /// Stop when min over signs of |m -+ ref|^2 / n falls below this
    /// (only when a reference vector is supplied).
    pub residual_tol: f64,
}

impl SolverConfig {
    pub fn amp(max_iters: usize, grad_tol: f64) -> Self {
        Self {
            method: Method::Amp,
            eta: 1.0,
            max_iters,
            grad_tol,
            residual_tol: f64::MIN_POSITIVE,
        }
    }

    pub fn ngd(eta: f64, max_iters: usize, grad_tol: f64) -> Self {
        Self {
            method: Method::Ngd,
            eta,
            max_iters,
            grad_tol,
            residual_tol: f64::MIN_POSITIVE,
        }
    }

    pub fn with_residual_tol(mut self, tol: f64) -> Self {
        self.residual_tol = tol;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.grad_tol > 0.0) || !(self.residual_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerances must be positive, got grad_tol={} residual_tol={}",
                self.grad_tol, self.residual_tol
            )));
        }
        if self.method != Method::Amp && !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "step size must lie in (0, 1], got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// Terminal condition of a solver run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIters,
    Oscillating,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Converged => write!(f, "converged"),
            Status::MaxIters => write!(f, "max_iters"),
            Status::Oscillating => write!(f, "oscillating"),
        }
    }
}

impl Serialize for Status {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// One recorded iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: usize,
    pub f_tap: f64,
    /// |g(m)|^2 / n for the active objective (TAP, or VB for ngd-vb runs).
    pub grad_sq: f64,
    pub q: f64,
    pub m_mean: f64,
    /// <x, m> / n against the planted signal.
    pub overlap: f64,
    /// min over signs of |m -+ ref|^2 / n, when a reference was supplied.
    pub residual: Option<f64>,
}

/// Downsampled iteration history plus the terminal status.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub records: Vec<TraceRecord>,
    pub status: Status,
    /// Index of the last iterate (number of steps taken).
    pub iters: usize,
    /// Worst simultaneous count of tanh-saturated (clamped) coordinates.
    pub max_clamped: usize,
}

impl SolverTrace {
    /// CSV rendering with columns k,f_tap,grad_sq,Q,M,overlap,residual.
    /// The residual column is NaN when no reference vector was supplied.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,f_tap,grad_sq,Q,M,overlap,residual\n");
        for r in &self.records {
            let residual = r
                .residual
                .map_or_else(|| "NaN".to_string(), |v| v.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.k, r.f_tap, r.grad_sq, r.q, r.m_mean, r.overlap, residual
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn final_record(&self) -> &TraceRecord {
        self.records.last().expect("trace always has records")
    }
}

/// How to start a run.
#[derive(Debug, Clone)]
pub enum Init {
    /// Spectral initialization from the top eigenvector of Y (needs lambda > 1).
    Spectral,
    /// Start from the given pre-image h^0 (with m^{-1} = tanh(h^0)).
    Given(DVector<f64>),
}

/// Result of a solver run.
#[derive(Debug, Clone)]
pub struct SolverRun {
    pub state: MagnetizationState,
    pub trace: SolverTrace,
}

/// Spectral starting point: h^0 along the top eigenvector of Y with
/// |h^0|^2 = n lambda^2 (lambda^2 - 1), and the linear-term seed
/// m^{-1} = lambda h^0 (used raw; its entries may exceed 1).
#[derive(Debug, Clone)]
pub struct SpectralInit {
    pub h0: DVector<f64>,
    pub m_minus: DVector<f64>,
    /// Rayleigh quotient of the computed eigenvector (top eigenvalue of Y).
    pub rayleigh: f64,
    pub iters: usize,
}

/// Compute the spectral initialization by power iteration on the shifted
/// matrix Y + (lambda + 4) I, started from the instance's dedicated
/// initialization stream. The shift keeps the top eigenvalue dominant in
/// absolute value, since the noise operator norm concentrates below 3.
pub fn spectral_init(instance: &ModelInstance) -> Result<SpectralInit> {
    if instance.lambda <= 1.0 {
        return Err(Error::Domain(format!(
            "spectral initialization needs lambda > 1 (norm scale is \
             sqrt(lambda^2 (lambda^2 - 1))), got {}",
            instance.lambda
        )));
    }
    let n = instance.n;
    let mut rng = instance.init_rng();
    let mut v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    v /= v.norm();
    let shift = instance.lambda + 4.0;
    let mut rayleigh = 0.0;
    let mut iters = 0;
    let mut converged = false;
    for k in 1..=POWER_MAX_ITERS {
        let yv = &instance.y * &v;
        rayleigh = v.dot(&yv);
        let residual = (&yv - &v * rayleigh).norm();
        if residual <= POWER_RESIDUAL_TOL {
            iters = k;
            converged = true;
            break;
        }
        // one matvec per iteration: (Y + shift I) v = yv + shift v
        let mut next = yv;
        next.axpy(shift, &v, 1.0);
        next /= next.norm();
        v = next;
        iters = k;
    }
    if !converged {
        let yv = &instance.y * &v;
        return Err(Error::Convergence {
            what: "power iteration for the top eigenvector of Y".into(),
            residual: (&yv - &v * rayleigh).norm(),
            iters,
        });
    }
    // deterministic sign: the largest-magnitude coordinate points up
    let mut idx = 0;
    for i in 1..n {
        if v[i].abs() > v[idx].abs() {
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        v.neg_mut();
    }
    let l2 = instance.lambda * instance.lambda;
    let h0 = &v * (n as f64 * l2 * (l2 - 1.0)).sqrt();
    let m_minus = &h0 * instance.lambda;
    Ok(SpectralInit {
        h0,
        m_minus,
        rayleigh,
        iters,
    })
}

fn check_finite(name: &str, v: &DVector<f64>) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(name.into()));
    }
    Ok(())
}

/// One AMP step: returns (m_plus, m) with
/// m_plus = tanh(lambda Y m - lambda^2 (1 - Q(m)) m_minus).
///
/// `m` must lie strictly inside the cube; `m_minus` only needs to be finite
/// (the spectral seed m^{-1} = lambda h^0 enters here linearly).
pub fn amp_step(
    instance: &ModelInstance,
    m: &DVector<f64>,
    m_minus: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if m.len() != instance.n || m_minus.len() != instance.n {
        return Err(Error::DimensionMismatch("iterate length vs instance".into()));
    }
    check_finite("current iterate", m)?;
    check_finite("previous iterate", m_minus)?;
    if m.iter().any(|v| v.abs() >= 1.0) {
        return Err(Error::Domain("current iterate must lie in (-1,1)^n".into()));
    }
    let lambda = instance.lambda;
    let q = m.norm_squared() / instance.n as f64;
    let mut h = &instance.y * m;
    h *= lambda;
    h.axpy(-lambda * lambda * (1.0 - q), m_minus, 1.0);
    Ok((h.map(f64::tanh), m.clone()))
}

/// One NGD step on the TAP objective:
/// h_next = (1-eta) h + eta (lambda Y m - lambda^2 (1 - Q(m)) m), m = tanh(h).
pub fn ngd_step(instance: &ModelInstance, h: &DVector<f64>, eta: f64) -> Result<DVector<f64>> {
    if h.len() != instance.n {
        return Err(Error::DimensionMismatch("iterate length vs instance".into()));
    }
    check_finite("pre-image iterate", h)?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must lie in (0, 1], got {eta}"
        )));
    }
    let m = h.map(f64::tanh);
    let lambda = instance.lambda;
    let q = m.norm_squared() / instance.n as f64;
    let mut target = &instance.y * &m;
    target *= lambda;
    target.axpy(-lambda * lambda * (1.0 - q), &m, 1.0);
    Ok(h * (1.0 - eta) + target * eta)
}

/// One NGD step on the naive mean-field objective:
/// h_next = (1-eta) h + eta lambda Y m, m = tanh(h).
pub fn ngd_vb_step(instance: &ModelInstance, h: &DVector<f64>, eta: f64) -> Result<DVector<f64>> {
    if h.len() != instance.n {
        return Err(Error::DimensionMismatch("iterate length vs instance".into()));
    }
    check_finite("pre-image iterate", h)?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must lie in (0, 1], got {eta}"
        )));
    }
    let m = h.map(f64::tanh);
    let target = &instance.y * &m * instance.lambda;
    Ok(h * (1.0 - eta) + target * eta)
}

/// Best sign match of `m` against `reference`: the sign s in {+1, -1}
/// minimizing |m - s ref|^2, and the minimized value divided by n.
pub fn align_sign(m: &DVector<f64>, reference: &DVector<f64>) -> Result<(f64, f64)> {
    if m.len() != reference.len() || m.is_empty() {
        return Err(Error::DimensionMismatch(
            "sign alignment needs equal nonzero lengths".into(),
        ));
    }
    let sign = if m.dot(reference) >= 0.0 { 1.0 } else { -1.0 };
    let residual = m
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| (a - sign * b) * (a - sign * b))
        .sum::<f64>()
        / m.len() as f64;
    Ok((sign, residual))
}

fn record_due(k: usize) -> bool {
    k <= TRACE_DENSE_LIMIT || k.is_multiple_of(TRACE_STRIDE)
}

/// Run a solver to termination, recording a downsampled trace.
///
/// The run stops as soon as the active-objective gradient satisfies
/// |g|^2/n <= grad_tol, the residual to `reference` (if given) drops below
/// residual_tol, a period-2 oscillation is detected, or max_iters steps
/// were taken. Every iteration is recorded up to k = 1000, then every
/// tenth, and the terminal iterate always.
pub fn run_solver(
    instance: &ModelInstance,
    config: &SolverConfig,
    init: Init,
    reference: Option<&DVector<f64>>,
) -> Result<SolverRun> {
    config.validate()?;
    if let Some(r) = reference {
        if r.len() != instance.n {
            return Err(Error::DimensionMismatch("reference length vs instance".into()));
        }
    }
    let lambda = instance.lambda;
    let n = instance.n;
    let nf = n as f64;

    let (mut state, mut m_prev) = match init {
        Init::Spectral => {
            let si = spectral_init(instance)?;
            (MagnetizationState::from_h(si.h0)?, si.m_minus)
        }
        Init::Given(h) => {
            let st = MagnetizationState::from_h(h)?;
            let m = st.m.clone();
            (st, m)
        }
    };

    let mut records: Vec<TraceRecord> = Vec::new();
    let mut status = Status::MaxIters;
    let mut iters = 0;
    let mut max_clamped = 0usize;
    let mut osc_count = 0usize;
    let mut m_prev2: Option<DVector<f64>> = None;
    let mut last_recorded = usize::MAX;

    for k in 0..=config.max_iters {
        iters = k;
        let m = &state.m;
        let h = &state.h;
        let q = m.norm_squared() / nf;
        let ym = &instance.y * m;

        // gradient of the active objective, with h standing in for arctanh(m)
        let mut g = &ym * (-lambda);
        g += h;
        if config.method != Method::NgdVb {
            g.axpy(lambda * lambda * (1.0 - q), m, 1.0);
        }
        let grad_sq = g.norm_squared() / nf;

        let entropy_mean = h
            .iter()
            .zip(m.iter())
            .map(|(&hi, &mi)| log_2cosh(hi) - mi * hi)
            .sum::<f64>()
            / nf;
        let f_tap = -lambda / (2.0 * nf) * m.dot(&ym)
            - entropy_mean
            - lambda * lambda / 4.0 * (1.0 - q) * (1.0 - q);
        let residual = match reference {
            Some(r) => Some(align_sign(m, r)?.1),
            None => None,
        };

        let clamped_now = m.iter().filter(|v| v.abs() >= M_CLAMP).count();
        max_clamped = max_clamped.max(clamped_now);

        // oscillation bookkeeping needs two past iterates
        if let Some(p2) = &m_prev2 {
            let period2 = (m - p2).norm_squared() / nf;
            let step = (m - &m_prev).norm_squared() / nf;
            if period2 < OSC_PERIOD2_TOL && step > OSC_STEP_TOL {
                osc_count += 1;
            } else {
                osc_count = 0;
            }
        }

        let mut terminal = k == config.max_iters;
        if grad_sq <= config.grad_tol || residual.is_some_and(|r| r <= config.residual_tol) {
            status = Status::Converged;
            terminal = true;
        } else if osc_count >= OSC_RUN {
            status = Status::Oscillating;
            terminal = true;
        }

        if (record_due(k) || terminal) && last_recorded != k {
            records.push(TraceRecord {
                k,
                f_tap,
                grad_sq,
                q,
                m_mean: m.sum() / nf,
                overlap: instance.x.dot(m) / nf,
                residual,
            });
            last_recorded = k;
        }
        if terminal {
            break;
        }

        // advance one step, reusing the matvec already computed
        let h_next = match config.method {
            Method::Amp => {
                let mut hn = &ym * lambda;
                hn.axpy(-lambda * lambda * (1.0 - q), &m_prev, 1.0);
                hn
            }
            Method::Ngd => {
                let mut target = &ym * lambda;
                target.axpy(-lambda * lambda * (1.0 - q), m, 1.0);
                h * (1.0 - config.eta) + target * config.eta
            }
            Method::NgdVb => {
                let target = &ym * lambda;
                h * (1.0 - config.eta) + target * config.eta
            }
        };
        if h_next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "iterate diverged at step {k} (method {}, eta {})",
                config.method, config.eta
            )));
        }
        m_prev2 = Some(std::mem::replace(&mut m_prev, state.m.clone()));
        state = MagnetizationState::from_h(h_next)?;
    }

    Ok(SolverRun {
        state,
        trace: SolverTrace {
            records,
            status,
            iters,
            max_clamped,
        },
    })
}

/// A high-accuracy critical point and how it was obtained.
#[derive(Debug, Clone)]
pub struct MStar {
    pub state: MagnetizationState,
    /// |g(m*)|^2 / n actually achieved.
    pub grad_sq: f64,
    /// Terminal status of the AMP stage.
    pub amp_status: Status,
    /// Whether the NGD fallback produced the returned point.
    pub used_fallback: bool,
    pub total_iters: usize,
}

/// Locate the relevant TAP minimizer to high accuracy: AMP from spectral
/// initialization with gradient tolerance 1e-13, falling back to NGD with
/// eta = 0.05 from the last AMP iterate when AMP fails to converge (for
/// example by oscillating between two points).
pub fn find_m_star(instance: &ModelInstance) -> Result<MStar> {
    let amp_cfg = SolverConfig::amp(M_STAR_AMP_ITERS, M_STAR_GRAD_TOL);
    let amp_run = run_solver(instance, &amp_cfg, Init::Spectral, None)?;
    let amp_status = amp_run.trace.status;
    let amp_iters = amp_run.trace.iters;
    if amp_status == Status::Converged {
        return Ok(MStar {
            grad_sq: amp_run.trace.final_record().grad_sq,
            state: amp_run.state,
            amp_status,
            used_fallback: false,
            total_iters: amp_iters,
        });
    }
    let ngd_cfg = SolverConfig::ngd(M_STAR_FALLBACK_ETA, M_STAR_FALLBACK_ITERS, M_STAR_GRAD_TOL);
    let ngd_run = run_solver(instance, &ngd_cfg, Init::Given(amp_run.state.h.clone()), None)?;
    if ngd_run.trace.status != Status::Converged {
        return Err(Error::Convergence {
            what: format!(
                "critical point search: AMP ended {amp_status}, NGD fallback ended {}",
                ngd_run.trace.status
            ),
            residual: ngd_run.trace.final_record().grad_sq,
            iters: amp_iters + ngd_run.trace.iters,
        });
    }
    Ok(MStar {
        grad_sq: ngd_run.trace.final_record().grad_sq,
        state: ngd_run.state,
        amp_status,
        used_fallback: true,
        total_iters: amp_iters + ngd_run.trace.iters,
    })
}
