//! Instance sampling for the rank-one synchronization model
//! Y = (lambda/n) x x^T + W with sign signal x and symmetric noise W.
//!
//! Five noise ensembles are supported. All of them are normalized so that
//! off-diagonal entries have variance 1/n. Sampling is deterministic given
//! (seed, ensemble, n): the signal, the noise, and any solver initialization
//! draw from independent sub-streams derived from the master seed, so
//! changing one consumer never shifts another's draws.
//!
//! Symmetry of W and Y is bitwise by construction (entries are either
//! produced by a commutative symmetrization or mirrored from the upper
//! triangle), and Y - (lambda/n) x x^T = W holds bitwise because W is
//! defined as that difference after Y is assembled.

use crate::error::{Error, Result};
use crate::rng::{self, purpose, RNG_ALGORITHM};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Noise matrix law, normalized to entry variance 1/n off the diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseEnsemble {
    /// (Z + Z^T)/sqrt(2n) with Z i.i.d. standard normal.
    Goe,
    /// Upper triangle (diagonal included) i.i.d. uniform on {-1/sqrt(n), +1/sqrt(n)}, mirrored.
    Rademacher,
    /// (G + G^T)/sqrt(2n) with G i.i.d. unit-variance Laplace, density (1/sqrt(2)) exp(-sqrt(2)|x|).
    Laplace,
    /// (G + G^T)/sqrt(2n) with G i.i.d. Student t(nu) scaled by sqrt((nu-2)/nu); needs nu > 2.
    StudentT { nu: f64 },
    /// U diag(d) U^T with U Haar orthogonal and d_i i.i.d. uniform on [-sqrt(3), sqrt(3)].
    RotInvUniform,
}

impl NoiseEnsemble {
    fn validate(&self) -> Result<()> {
        if let NoiseEnsemble::StudentT { nu } = self {
            if !(*nu > 2.0) {
                return Err(Error::InvalidParameter(format!(
                    "student_t needs nu > 2 for unit-variance normalization, got {nu}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for NoiseEnsemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseEnsemble::Goe => write!(f, "goe"),
            NoiseEnsemble::Rademacher => write!(f, "rademacher"),
            NoiseEnsemble::Laplace => write!(f, "laplace"),
            NoiseEnsemble::StudentT { nu } => write!(f, "student_t({nu})"),
            NoiseEnsemble::RotInvUniform => write!(f, "rot_inv_uniform"),
        }
    }
}

impl FromStr for NoiseEnsemble {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "goe" => Ok(NoiseEnsemble::Goe),
            "rademacher" => Ok(NoiseEnsemble::Rademacher),
            "laplace" => Ok(NoiseEnsemble::Laplace),
            "rot_inv_uniform" => Ok(NoiseEnsemble::RotInvUniform),
            _ => {
                if let Some(inner) = s
                    .strip_prefix("student_t(")
                    .and_then(|r| r.strip_suffix(')'))
                {
                    let nu: f64 = inner.trim().parse().map_err(|_| {
                        Error::InvalidParameter(format!("bad student_t parameter {inner:?}"))
                    })?;
                    let e = NoiseEnsemble::StudentT { nu };
                    e.validate()?;
                    Ok(e)
                } else {
                    Err(Error::InvalidParameter(format!(
                        "unknown ensemble {s:?}; expected goe, rademacher, laplace, \
                         student_t(nu), or rot_inv_uniform"
                    )))
                }
            }
        }
    }
}

impl Serialize for NoiseEnsemble {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NoiseEnsemble {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A fully sampled observation with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInstance {
    pub n: usize,
    pub lambda: f64,
    /// Planted sign vector, entries in {-1, +1}.
    pub x: DVector<f64>,
    /// Symmetric noise matrix.
    pub w: DMatrix<f64>,
    /// Observation Y = (lambda/n) x x^T + W.
    pub y: DMatrix<f64>,
    pub ensemble: NoiseEnsemble,
    pub seed: u64,
    pub rng_algorithm: String,
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidDimension("dimension must be at least 1".into()));
    }
    Ok(())
}

/// Draw a uniform sign vector from the given stream.
pub fn sample_signal(n: usize, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
    check_dim(n)?;
    Ok(DVector::from_fn(n, |_, _| {
        if rng.gen::<bool>() {
            1.0
        } else {
            -1.0
        }
    }))
}

/// Mirror the strict upper triangle and diagonal of `a` onto the lower
/// triangle, making the matrix bitwise symmetric.
fn mirror_upper(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            a[(j, i)] = a[(i, j)];
        }
    }
}

/// Draw a symmetric noise matrix from the given stream.
pub fn sample_noise(n: usize, ensemble: NoiseEnsemble, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    check_dim(n)?;
    ensemble.validate()?;
    let scale = 1.0 / (2.0 * n as f64).sqrt();
    let symmetrized = |rng: &mut ChaCha8Rng, mut draw: Box<dyn FnMut(&mut ChaCha8Rng) -> f64>| {
        let z = DMatrix::from_fn(n, n, |_, _| draw(rng));
        // z_ij + z_ji is exactly commutative, so this is bitwise symmetric
        DMatrix::from_fn(n, n, |i, j| (z[(i, j)] + z[(j, i)]) * scale)
    };
    let w = match ensemble {
        NoiseEnsemble::Goe => symmetrized(
            rng,
            Box::new(|r| r.sample::<f64, _>(rand_distr::StandardNormal)),
        ),
        NoiseEnsemble::Laplace => symmetrized(
            rng,
            // difference of unit exponentials is Laplace with variance 2
            Box::new(|r| {
                let e1: f64 = r.sample(rand_distr::Exp1);
                let e2: f64 = r.sample(rand_distr::Exp1);
                (e1 - e2) / std::f64::consts::SQRT_2
            }),
        ),
        NoiseEnsemble::StudentT { nu } => {
            let t = rand_distr::StudentT::new(nu)
                .map_err(|e| Error::InvalidParameter(format!("student_t({nu}): {e}")))?;
            let norm = (nu / (nu - 2.0)).sqrt();
            symmetrized(rng, Box::new(move |r| r.sample::<f64, _>(t) / norm))
        }
        NoiseEnsemble::Rademacher => {
            let a = 1.0 / (n as f64).sqrt();
            let mut w = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    w[(i, j)] = if rng.gen::<bool>() { a } else { -a };
                }
            }
            mirror_upper(&mut w);
            w
        }
        NoiseEnsemble::RotInvUniform => {
            let z = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
            let qr = z.qr();
            let r_diag: Vec<f64> = (0..n).map(|j| qr.r()[(j, j)]).collect();
            let mut u = qr.q();
            // fix the gauge so R has positive diagonal, making U exactly Haar
            for (j, &rjj) in r_diag.iter().enumerate() {
                if rjj < 0.0 {
                    u.column_mut(j).neg_mut();
                }
            }
            let sqrt3 = 3.0f64.sqrt();
            let d = DVector::from_fn(n, |_, _| rng.gen_range(-sqrt3..sqrt3));
            let mut w = &u * DMatrix::from_diagonal(&d) * u.transpose();
            mirror_upper(&mut w);
            w
        }
    };
    Ok(w)
}

/// Assemble Y = (lambda/n) x x^T + W and package the instance.
///
/// The stored noise is redefined as W := Y - (lambda/n) x x^T so that this
/// identity holds bitwise; that shifts each noise entry by at most one
/// rounding of the assembly sum.
pub fn assemble_observation(
    x: DVector<f64>,
    w_raw: DMatrix<f64>,
    lambda: f64,
    ensemble: NoiseEnsemble,
    seed: u64,
) -> Result<ModelInstance> {
    let n = x.len();
    check_dim(n)?;
    if w_raw.nrows() != n || w_raw.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "signal has length {n} but noise is {}x{}",
            w_raw.nrows(),
            w_raw.ncols()
        )));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and nonnegative, got {lambda}"
        )));
    }
    let rate = lambda / n as f64;
    let signal = |i: usize, j: usize| rate * x[i] * x[j];
    let y = DMatrix::from_fn(n, n, |i, j| signal(i, j) + w_raw[(i, j)]);
    let w = DMatrix::from_fn(n, n, |i, j| y[(i, j)] - signal(i, j));
    Ok(ModelInstance {
        n,
        lambda,
        x,
        w,
        y,
        ensemble,
        seed,
        rng_algorithm: RNG_ALGORITHM.to_string(),
    })
}

/// Sample a complete instance from a master seed.
pub fn sample_instance(
    n: usize,
    lambda: f64,
    ensemble: NoiseEnsemble,
    seed: u64,
) -> Result<ModelInstance> {
    let x = sample_signal(n, &mut rng::stream(seed, &[purpose::SIGNAL]))?;
    let w = sample_noise(n, ensemble, &mut rng::stream(seed, &[purpose::NOISE]))?;
    assemble_observation(x, w, lambda, ensemble, seed)
}

/// Sidecar metadata stored next to the matrix dump.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceMeta {
    n: usize,
    lambda: f64,
    ensemble: NoiseEnsemble,
    seed: u64,
    rng_algorithm: String,
    x: Vec<i8>,
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut p = stem.to_path_buf();
    p.set_extension(ext);
    p
}

impl ModelInstance {
    /// Sub-stream reserved for solver initialization on this instance.
    pub fn init_rng(&self) -> ChaCha8Rng {
        rng::stream(self.seed, &[purpose::INIT])
    }

    /// Normalized overlap m^T x / n with the planted signal.
    pub fn overlap(&self, m: &DVector<f64>) -> f64 {
        self.x.dot(m) / self.n as f64
    }

    /// Write the observation to `<stem>.csv` (row-major upper triangle,
    /// shortest-roundtrip decimal) and metadata to `<stem>.json`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let mut csv = String::new();
        for i in 0..self.n {
            let row: Vec<String> = (i..self.n).map(|j| self.y[(i, j)].to_string()).collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        std::fs::write(with_ext(stem, "csv"), csv)?;
        let meta = InstanceMeta {
            n: self.n,
            lambda: self.lambda,
            ensemble: self.ensemble,
            seed: self.seed,
            rng_algorithm: self.rng_algorithm.clone(),
            x: self.x.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect(),
        };
        let json = serde_json::to_string_pretty(&meta)?;
        std::fs::write(with_ext(stem, "json"), json)?;
        Ok(())
    }

    /// Load an instance saved by [`ModelInstance::save`]. The noise matrix
    /// is reconstructed as Y - (lambda/n) x x^T, which reproduces the
    /// original bitwise.
    pub fn load(stem: &Path) -> Result<Self> {
        let meta: InstanceMeta =
            serde_json::from_str(&std::fs::read_to_string(with_ext(stem, "json"))?)?;
        let n = meta.n;
        check_dim(n)?;
        if meta.x.len() != n {
            return Err(Error::Config(format!(
                "metadata claims n={n} but stores {} signal entries",
                meta.x.len()
            )));
        }
        if meta.x.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::Config("signal entries must be +1 or -1".into()));
        }
        let csv = std::fs::read_to_string(with_ext(stem, "csv"))?;
        let mut y = DMatrix::zeros(n, n);
        let mut rows = 0usize;
        for (i, line) in csv.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            if i >= n {
                return Err(Error::Config(format!("more than {n} rows in matrix dump")));
            }
            let vals: Vec<&str> = line.split(',').collect();
            if vals.len() != n - i {
                return Err(Error::Config(format!(
                    "row {i} has {} entries, expected {}",
                    vals.len(),
                    n - i
                )));
            }
            for (k, v) in vals.iter().enumerate() {
                let parsed: f64 = v.trim().parse().map_err(|_| {
                    Error::Config(format!("bad matrix entry {v:?} in row {i}"))
                })?;
                y[(i, i + k)] = parsed;
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::Config(format!("matrix dump has {rows} rows, expected {n}")));
        }
        mirror_upper(&mut y);
        let x = DVector::from_iterator(n, meta.x.iter().map(|&v| v as f64));
        let rate = meta.lambda / n as f64;
        let w = DMatrix::from_fn(n, n, |i, j| y[(i, j)] - rate * x[i] * x[j]);
        Ok(ModelInstance {
            n,
            lambda: meta.lambda,
            x,
            w,
            y,
            ensemble: meta.ensemble,
            seed: meta.seed,
            rng_algorithm: meta.rng_algorithm,
        })
    }
}
