//! Experiment drivers: deterministic replicate seeding, a work pool per
//! experiment, mean/stderr aggregation, tidy CSV artifacts, and a JSON
//! manifest tying every output row back to its seed.
//!
//! Each driver runs replicates in parallel (results are collected in job
//! order, so thread count never changes the output), aggregates with the
//! band convention std/sqrt(replicates), and excludes failed replicates
//! from means while publishing the exclusion count.

use crate::diagnostics;
use crate::error::{Error, Result};
use crate::landscape;
use crate::model::{sample_instance, NoiseEnsemble};
use crate::quadrature::GaussQuadrature;
use crate::rng;
use crate::solvers::{find_m_star, run_solver, Init, Method, SolverConfig, SolverRun, Status};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

/// Residual threshold defining a successful NGD run in the step-size sweep.
pub const SUCCESS_RESIDUAL: f64 = 1e-4;
/// Gradient tolerance used when minimizing either objective for MSE
/// comparisons.
pub const MINIMIZER_GRAD_TOL: f64 = 1e-10;
/// Signal-to-noise ratio of the per-ensemble residual curves.
const CURVE_LAMBDA: f64 = 1.5;

// seed-derivation tags, one namespace per experiment stage
const TAG_CONVERGENCE: u64 = 10;
const TAG_HEATMAP: u64 = 11;
const TAG_UNIVERSALITY_MSE: u64 = 12;
const TAG_UNIVERSALITY_CURVE: u64 = 13;
const TAG_TAP_VS_VB: u64 = 14;
const TAG_JACOBIAN: u64 = 15;

/// Which experiment a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Convergence,
    SuccessHeatmap,
    Universality,
    TapVsVb,
    JacobianScatter,
    Landscape,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::SuccessHeatmap => "success_heatmap",
            ExperimentKind::Universality => "universality",
            ExperimentKind::TapVsVb => "tap_vs_vb",
            ExperimentKind::JacobianScatter => "jacobian_scatter",
            ExperimentKind::Landscape => "landscape",
        };
        write!(f, "{s}")
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "convergence" => Ok(ExperimentKind::Convergence),
            "success_heatmap" => Ok(ExperimentKind::SuccessHeatmap),
            "universality" => Ok(ExperimentKind::Universality),
            "tap_vs_vb" => Ok(ExperimentKind::TapVsVb),
            "jacobian_scatter" => Ok(ExperimentKind::JacobianScatter),
            "landscape" => Ok(ExperimentKind::Landscape),
            other => Err(Error::Config(format!(
                "unknown experiment {other:?}; expected convergence, success_heatmap, \
                 universality, tap_vs_vb, jacobian_scatter, or landscape"
            ))),
        }
    }
}

impl Serialize for ExperimentKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ExperimentKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn default_n() -> usize {
    500
}
fn default_replicates() -> usize {
    10
}
fn default_master_seed() -> u64 {
    1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_amp_iters() -> usize {
    500
}
fn default_ngd_iters() -> usize {
    12_000
}
fn default_minimizer_iters() -> usize {
    8_000
}
fn default_grid_points() -> usize {
    landscape::DEFAULT_GRID
}

/// Flat TOML experiment configuration. Empty lists mean "use this
/// experiment's defaults"; `effective()` resolves them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub etas: Vec<f64>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub ensembles: Vec<NoiseEnsemble>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Iteration budget for AMP curve runs.
    #[serde(default = "default_amp_iters")]
    pub amp_iters: usize,
    /// Iteration budget for NGD curve and success runs.
    #[serde(default = "default_ngd_iters")]
    pub ngd_iters: usize,
    /// Iteration budget when minimizing an objective for MSE comparison.
    #[serde(default = "default_minimizer_iters")]
    pub minimizer_iters: usize,
    /// Per-axis resolution of landscape grids.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            n: default_n(),
            lambdas: Vec::new(),
            etas: Vec::new(),
            replicates: default_replicates(),
            master_seed: default_master_seed(),
            ensembles: Vec::new(),
            output_dir: default_output_dir(),
            amp_iters: default_amp_iters(),
            ngd_iters: default_ngd_iters(),
            minimizer_iters: default_minimizer_iters(),
            grid_points: default_grid_points(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(format!("bad experiment config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Resolve empty lists to this experiment's default grids and normalize
    /// fields the experiment does not sweep.
    pub fn effective(&self) -> Self {
        let mut cfg = self.clone();
        if cfg.lambdas.is_empty() {
            cfg.lambdas = match cfg.experiment {
                ExperimentKind::Convergence | ExperimentKind::JacobianScatter => vec![1.5],
                ExperimentKind::SuccessHeatmap => {
                    (1..=20).map(|i| (100 + 5 * i) as f64 / 100.0).collect()
                }
                ExperimentKind::Universality => {
                    vec![1.05, 1.1, 1.2, 1.35, 1.5, 1.75, 2.0, 2.5, 3.0]
                }
                ExperimentKind::TapVsVb => (11..=20).map(|i| i as f64 / 10.0).collect(),
                ExperimentKind::Landscape => vec![1.1, 1.2, 1.5],
            };
        }
        if cfg.etas.is_empty() {
            cfg.etas = match cfg.experiment {
                ExperimentKind::Convergence => vec![0.1, 0.5],
                ExperimentKind::SuccessHeatmap => (1..=20).map(|i| 5 * i).map(|p| p as f64 / 100.0).collect(),
                _ => vec![0.1],
            };
        }
        if cfg.ensembles.is_empty() {
            cfg.ensembles = match cfg.experiment {
                ExperimentKind::Universality => vec![
                    NoiseEnsemble::Goe,
                    NoiseEnsemble::Rademacher,
                    NoiseEnsemble::Laplace,
                    NoiseEnsemble::StudentT { nu: 4.0 },
                ],
                // well-specified model first, misspecified second
                ExperimentKind::TapVsVb => {
                    vec![NoiseEnsemble::Goe, NoiseEnsemble::RotInvUniform]
                }
                _ => vec![NoiseEnsemble::Goe],
            };
        }
        if matches!(
            cfg.experiment,
            ExperimentKind::JacobianScatter | ExperimentKind::Landscape
        ) {
            cfg.replicates = 1;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be >= 1".into()));
        }
        for &l in &self.lambdas {
            if !(l > 1.0) || !l.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "lambda grid must lie above the recovery threshold 1, got {l}"
                )));
            }
        }
        for &e in &self.etas {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "eta grid must lie in (0, 1], got {e}"
                )));
            }
        }
        if self.experiment == ExperimentKind::TapVsVb && self.ensembles.len() != 2 {
            return Err(Error::InvalidParameter(
                "tap_vs_vb needs exactly two ensembles (well-specified, misspecified)".into(),
            ));
        }
        if self.amp_iters == 0 || self.ngd_iters == 0 || self.minimizer_iters == 0 {
            return Err(Error::InvalidParameter(
                "iteration budgets must be >= 1".into(),
            ));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid_points must be at least 2, got {}",
                self.grid_points
            )));
        }
        Ok(())
    }
}

/// One aggregated cell: group keys, mean, band, and the raw values behind
/// them.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateResult {
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    pub ensemble: Option<String>,
    pub method: Option<String>,
    pub mean: f64,
    pub stderr_scaled: f64,
    pub raw: Vec<f64>,
}

/// Mean and std/sqrt(len) of a raw value column.
pub fn aggregate(raw: &[f64]) -> Result<(f64, f64)> {
    if raw.is_empty() {
        return Err(Error::Convergence {
            what: "aggregation (every replicate failed)".into(),
            residual: f64::NAN,
            iters: 0,
        });
    }
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let band = if raw.len() < 2 {
        0.0
    } else {
        let var = raw.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    Ok((mean, band))
}

/// Per-replicate entry in the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: Option<u64>,
    pub status: String,
    /// Headline scalar of this replicate (residual, MSE, success flag, ...).
    pub value: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupRecord {
    pub group: String,
    pub replicates: Vec<ReplicateRecord>,
    /// Replicates excluded from the aggregates.
    pub excluded: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

/// JSON sidecar written next to the CSVs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub version: String,
    pub rng_algorithm: String,
    pub config: ExperimentConfig,
    pub groups: Vec<GroupRecord>,
    pub outputs: Vec<OutputRecord>,
    pub excluded_total: usize,
    pub wall_time_s: f64,
}

pub struct ExperimentOutput {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
    pub output_paths: Vec<PathBuf>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("{:x}", hasher.finalize())
}

/// (name, content) pairs produced by one driver.
type NamedCsv = (String, String);

struct DriverResult {
    groups: Vec<GroupRecord>,
    files: Vec<NamedCsv>,
}

/// Run the configured experiment, writing CSVs and a manifest into
/// `output_dir`. Returns the manifest and the written paths.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let cfg = config.effective();
    cfg.validate()?;
    let started = Instant::now();
    let result = match cfg.experiment {
        ExperimentKind::Convergence => exp_convergence(&cfg)?,
        ExperimentKind::SuccessHeatmap => exp_success_heatmap(&cfg)?,
        ExperimentKind::Universality => exp_universality(&cfg)?,
        ExperimentKind::TapVsVb => exp_tap_vs_vb(&cfg)?,
        ExperimentKind::JacobianScatter => exp_jacobian_scatter(&cfg)?,
        ExperimentKind::Landscape => exp_landscape(&cfg)?,
    };
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut outputs = Vec::new();
    let mut output_paths = Vec::new();
    for (name, content) in &result.files {
        let path = cfg.output_dir.join(name);
        std::fs::write(&path, content)?;
        outputs.push(OutputRecord {
            path: name.clone(),
            sha256: sha256_hex(content.as_bytes()),
        });
        output_paths.push(path);
    }
    let excluded_total = result.groups.iter().map(|g| g.excluded).sum();
    let manifest = RunManifest {
        experiment: cfg.experiment.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        rng_algorithm: rng::RNG_ALGORITHM.to_string(),
        config: cfg.clone(),
        groups: result.groups,
        outputs,
        excluded_total,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let manifest_path = cfg.output_dir.join("manifest.json");
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(ExperimentOutput {
        manifest,
        manifest_path,
        output_paths,
    })
}

/// Solver config for a fixed-budget curve run: no gradient or residual
/// stopping, every iterate recorded (up to the trace stride).
fn curve_config(method: Method, eta: f64, budget: usize) -> SolverConfig {
    match method {
        Method::Amp => SolverConfig::amp(budget, f64::MIN_POSITIVE),
        _ => SolverConfig::ngd(eta, budget, f64::MIN_POSITIVE),
    }
}

fn residual_curve(run: &SolverRun) -> Vec<(usize, f64)> {
    run.trace
        .records
        .iter()
        .filter_map(|r| r.residual.map(|res| (r.k, res)))
        .collect()
}

/// Aggregate per-k curves over replicates, keeping only iterations present
/// in every surviving replicate.
fn aggregate_curves(curves: &[Vec<(usize, f64)>]) -> Result<Vec<(usize, f64, f64)>> {
    if curves.is_empty() {
        return Err(Error::Convergence {
            what: "curve aggregation (every replicate failed)".into(),
            residual: f64::NAN,
            iters: 0,
        });
    }
    let mut by_k: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for curve in curves {
        for &(k, v) in curve {
            by_k.entry(k).or_default().push(v);
        }
    }
    let mut rows = Vec::new();
    for (k, vals) in by_k {
        if vals.len() == curves.len() {
            let (mean, band) = aggregate(&vals)?;
            rows.push((k, mean, band));
        }
    }
    Ok(rows)
}

fn method_label(method: Method, eta: f64) -> String {
    match method {
        Method::Amp => "amp".to_string(),
        Method::Ngd => format!("ngd-{eta}"),
        Method::NgdVb => format!("ngd-vb-{eta}"),
    }
}

struct MethodCurve {
    curve: Vec<(usize, f64)>,
    status: String,
    final_residual: Option<f64>,
}

type ReplicateRuns = std::result::Result<Vec<MethodCurve>, String>;

/// Fixed point, then fixed-budget reruns of AMP and NGD from the shared
/// spectral initialization, with the residual to the fixed point per
/// iteration.
fn exp_convergence(cfg: &ExperimentConfig) -> Result<DriverResult> {
    let ensemble = cfg.ensembles[0];
    let mut groups = Vec::new();
    let mut files = Vec::new();
    for (il, &lambda) in cfg.lambdas.iter().enumerate() {
        let jobs: Vec<(usize, u64)> = (0..cfg.replicates)
            .map(|r| {
                (
                    r,
                    rng::derive_seed(cfg.master_seed, &[TAG_CONVERGENCE, il as u64, r as u64]),
                )
            })
            .collect();
        let outs: Vec<(usize, u64, f64, ReplicateRuns)> = jobs
            .par_iter()
            .map(|&(rep, seed)| {
                let t0 = Instant::now();
                let runs = (|| -> Result<Vec<MethodCurve>> {
                    let inst = sample_instance(cfg.n, lambda, ensemble, seed)?;
                    let star = find_m_star(&inst)?;
                    let mut out = Vec::new();
                    let mut one = |method: Method, eta: f64, budget: usize| -> Result<()> {
                        let run = run_solver(
                            &inst,
                            &curve_config(method, eta, budget),
                            Init::Spectral,
                            Some(&star.state.m),
                        )?;
                        out.push(MethodCurve {
                            curve: residual_curve(&run),
                            status: run.trace.status.to_string(),
                            final_residual: run.trace.final_record().residual,
                        });
                        Ok(())
                    };
                    one(Method::Amp, 0.0, cfg.amp_iters)?;
                    for &eta in &cfg.etas {
                        one(Method::Ngd, eta, cfg.ngd_iters)?;
                    }
                    Ok(out)
                })()
                .map_err(|e| e.to_string());
                (rep, seed, t0.elapsed().as_secs_f64(), runs)
            })
            .collect();

        let labels: Vec<String> = std::iter::once(method_label(Method::Amp, 0.0))
            .chain(cfg.etas.iter().map(|&e| method_label(Method::Ngd, e)))
            .collect();
        let mut csv = String::from("method,k,mean_residual,band\n");
        let mut raw = String::from("method,k,replicate,residual\n");
        for (mi, label) in labels.iter().enumerate() {
            let mut curves = Vec::new();
            let mut records = Vec::new();
            let mut excluded = 0;
            for (rep, seed, wall, runs) in &outs {
                match runs {
                    Ok(methods) => {
                        let mc = &methods[mi];
                        curves.push((*rep, mc.curve.clone()));
                        records.push(ReplicateRecord {
                            replicate: *rep,
                            seed: Some(*seed),
                            status: mc.status.clone(),
                            value: mc.final_residual,
                            wall_time_s: *wall,
                        });
                    }
                    Err(msg) => {
                        excluded += 1;
                        records.push(ReplicateRecord {
                            replicate: *rep,
                            seed: Some(*seed),
                            status: format!("error: {msg}"),
                            value: None,
                            wall_time_s: *wall,
                        });
                    }
                }
            }
            let rows = aggregate_curves(
                &curves.iter().map(|(_, c)| c.clone()).collect::<Vec<_>>(),
            )?;
            for (k, mean, band) in &rows {
                csv.push_str(&format!("{label},{k},{mean},{band}\n"));
            }
            for (rep, curve) in &curves {
                for (k, v) in curve {
                    raw.push_str(&format!("{label},{k},{rep},{v}\n"));
                }
            }
            groups.push(GroupRecord {
                group: format!("lambda={lambda} method={label}"),
                replicates: records,
                excluded,
            });
        }
        let (name, raw_name) = if cfg.lambdas.len() == 1 {
            ("convergence.csv".to_string(), "convergence_raw.csv".to_string())
        } else {
            (
                format!("convergence_lambda_{lambda}.csv"),
                format!("convergence_lambda_{lambda}_raw.csv"),
            )
        };
        files.push((name, csv));
        files.push((raw_name, raw));
    }
    Ok(DriverResult { groups, files })
}

/// Success probability of NGD over a (lambda, eta) grid: residual 1e-4 to
/// the fixed point within the iteration budget.
fn exp_success_heatmap(cfg: &ExperimentConfig) -> Result<DriverResult> {
    let ensemble = cfg.ensembles[0];
    // per (lambda, replicate): one instance and fixed point, swept over eta
    type CellRow = std::result::Result<Vec<(Status, f64)>, String>;
    let mut jobs: Vec<(usize, usize, u64)> = Vec::new();
    for il in 0..cfg.lambdas.len() {
        for r in 0..cfg.replicates {
            jobs.push((
                il,
                r,
                rng::derive_seed(cfg.master_seed, &[TAG_HEATMAP, il as u64, r as u64]),
            ));
        }
    }
    let outs: Vec<(usize, usize, u64, f64, CellRow)> = jobs
        .par_iter()
        .map(|&(il, rep, seed)| {
            let lambda = cfg.lambdas[il];
            let t0 = Instant::now();
            let row = (|| -> Result<Vec<(Status, f64)>> {
                let inst = sample_instance(cfg.n, lambda, ensemble, seed)?;
                let star = find_m_star(&inst)?;
                let mut cells = Vec::new();
                for &eta in &cfg.etas {
                    let config = SolverConfig::ngd(eta, cfg.ngd_iters, f64::MIN_POSITIVE)
                        .with_residual_tol(SUCCESS_RESIDUAL);
                    let run = run_solver(&inst, &config, Init::Spectral, Some(&star.state.m))?;
                    let success = if run.trace.status == Status::Converged {
                        1.0
                    } else {
                        0.0
                    };
                    cells.push((run.trace.status, success));
                }
                Ok(cells)
            })()
            .map_err(|e| e.to_string());
            (il, rep, seed, t0.elapsed().as_secs_f64(), row)
        })
        .collect();

    let mut csv = String::from("lambda,eta,success_fraction\n");
    let mut raw = String::from("lambda,eta,replicate,success\n");
    let mut groups = Vec::new();
    for (il, &lambda) in cfg.lambdas.iter().enumerate() {
        for (ie, &eta) in cfg.etas.iter().enumerate() {
            let mut vals = Vec::new();
            let mut records = Vec::new();
            let mut excluded = 0;
            for (jl, rep, seed, wall, row) in &outs {
                if jl != &il {
                    continue;
                }
                match row {
                    Ok(cells) => {
                        let (status, success) = &cells[ie];
                        vals.push(*success);
                        raw.push_str(&format!("{lambda},{eta},{rep},{success}\n"));
                        records.push(ReplicateRecord {
                            replicate: *rep,
                            seed: Some(*seed),
                            status: status.to_string(),
                            value: Some(*success),
                            wall_time_s: *wall,
                        });
                    }
                    Err(msg) => {
                        excluded += 1;
                        records.push(ReplicateRecord {
                            replicate: *rep,
                            seed: Some(*seed),
                            status: format!("error: {msg}"),
                            value: None,
                            wall_time_s: *wall,
                        });
                    }
                }
            }
            let (fraction, _) = aggregate(&vals)?;
            csv.push_str(&format!("{lambda},{eta},{fraction}\n"));
            groups.push(GroupRecord {
                group: format!("lambda={lambda} eta={eta}"),
                replicates: records,
                excluded,
            });
        }
    }
    Ok(DriverResult {
        groups,
        files: vec![
            ("success_heatmap.csv".to_string(), csv),
            ("success_heatmap_raw.csv".to_string(), raw),
        ],
    })
}

/// Estimation MSE versus lambda per noise ensemble, plus per-ensemble
/// residual curves at lambda = 1.5.
fn exp_universality(cfg: &ExperimentConfig) -> Result<DriverResult> {
    let mut groups = Vec::new();

    // left panel: MSE of the fixed point against the signal
    type MseOut = std::result::Result<(String, f64), String>;
    let mut jobs: Vec<(usize, usize, usize, u64)> = Vec::new();
    for ie in 0..cfg.ensembles.len() {
        for il in 0..cfg.lambdas.len() {
            for r in 0..cfg.replicates {
                jobs.push((
                    ie,
                    il,
                    r,
                    rng::derive_seed(
                        cfg.master_seed,
                        &[TAG_UNIVERSALITY_MSE, ie as u64, il as u64, r as u64],
                    ),
                ));
            }
        }
    }
    let outs: Vec<(usize, usize, usize, u64, f64, MseOut)> = jobs
        .par_iter()
        .map(|&(ie, il, rep, seed)| {
            let ensemble = cfg.ensembles[ie];
            let lambda = cfg.lambdas[il];
            let t0 = Instant::now();
            let out = (|| -> Result<(String, f64)> {
                let inst = sample_instance(cfg.n, lambda, ensemble, seed)?;
                let star = find_m_star(&inst)?;
                let (_, mse) = crate::solvers::align_sign(&star.state.m, &inst.x)?;
                Ok((star.amp_status.to_string(), mse))
            })()
            .map_err(|e| e.to_string());
            (ie, il, rep, seed, t0.elapsed().as_secs_f64(), out)
        })
        .collect();

    let mut mse_csv = String::from("ensemble,lambda,mean_mse,band\n");
    let mut mse_raw = String::from("ensemble,lambda,replicate,mse\n");
    for (ie, ensemble) in cfg.ensembles.iter().enumerate() {
        for (il, &lambda) in cfg.lambdas.iter().enumerate() {
            let mut vals = Vec::new();
            let mut records = Vec::new();
            let mut excluded = 0;
            for (je, jl, rep, seed, wall, out) in &outs {
                if (je, jl) != (&ie, &il) {
                    continue;
                }
                match out {
                    Ok((status, mse)) => {
                        vals.push(*mse);
                        mse_raw.push_str(&format!("{ensemble},{lambda},{rep},{mse}\n"));
                        records.push(ReplicateRecord {
                            replicate: *rep,
                            seed: Some(*seed),
                            status: status.clone(),
                            value: Some(*mse),
                            wall_time_s: *wall,
                        });
                    }
                    Err(msg) => {
                        excluded += 1;
                        records.push(ReplicateRecord {
                            replicate: *rep,
                            seed: Some(*seed),
                            status: format!("error: {msg}"),
                            value: None,
                            wall_time_s: *wall,
                        });
                    }
                }
            }
            let (mean, band) = aggregate(&vals)?;
            mse_csv.push_str(&format!("{ensemble},{lambda},{mean},{band}\n"));
            groups.push(GroupRecord {
                group: format!("mse ensemble={ensemble} lambda={lambda}"),
                replicates: records,
                excluded,
            });
        }
    }

    // right panel: AMP residual curves at a fixed lambda
    let mut curve_jobs: Vec<(usize, usize, u64)> = Vec::new();
    for ie in 0..cfg.ensembles.len() {
        for r in 0..cfg.replicates {
            curve_jobs.push((
                ie,
                r,
                rng::derive_seed(cfg.master_seed, &[TAG_UNIVERSALITY_CURVE, ie as u64, r as u64]),
            ));
        }
    }
    type CurveOut = std::result::Result<(String, Vec<(usize, f64)>, Option<f64>), String>;
    let curve_outs: Vec<(usize, usize, u64, f64, CurveOut)> = curve_jobs
        .par_iter()
        .map(|&(ie, rep, seed)| {
            let ensemble = cfg.ensembles[ie];
            let t0 = Instant::now();
            let out = (|| -> Result<(String, Vec<(usize, f64)>, Option<f64>)> {
                let inst = sample_instance(cfg.n, CURVE_LAMBDA, ensemble, seed)?;
                let star = find_m_star(&inst)?;
                let run = run_solver(
                    &inst,
                    &curve_config(Method::Amp, 0.0, cfg.amp_iters),
                    Init::Spectral,
                    Some(&star.state.m),
                )?;
                Ok((
                    run.trace.status.to_string(),
                    residual_curve(&run),
                    run.trace.final_record().residual,
                ))
            })()
            .map_err(|e| e.to_string());
            (ie, rep, seed, t0.elapsed().as_secs_f64(), out)
        })
        .collect();

    let mut res_csv = String::from("ensemble,k,mean_residual,band\n");
    let mut res_raw = String::from("ensemble,k,replicate,residual\n");
    for (ie, ensemble) in cfg.ensembles.iter().enumerate() {
        let mut curves = Vec::new();
        let mut records = Vec::new();
        let mut excluded = 0;
        for (je, rep, seed, wall, out) in &curve_outs {
            if je != &ie {
                continue;
            }
            match out {
                Ok((status, curve, final_residual)) => {
                    for (k, v) in curve {
                        res_raw.push_str(&format!("{ensemble},{k},{rep},{v}\n"));
                    }
                    curves.push(curve.clone());
                    records.push(ReplicateRecord {
                        replicate: *rep,
                        seed: Some(*seed),
                        status: status.clone(),
                        value: *final_residual,
                        wall_time_s: *wall,
                    });
                }
                Err(msg) => {
                    excluded += 1;
                    records.push(ReplicateRecord {
                        replicate: *rep,
                        seed: Some(*seed),
                        status: format!("error: {msg}"),
                        value: None,
                        wall_time_s: *wall,
                    });
                }
            }
        }
        for (k, mean, band) in aggregate_curves(&curves)? {
            res_csv.push_str(&format!("{ensemble},{k},{mean},{band}\n"));
        }
        groups.push(GroupRecord {
            group: format!("residual ensemble={ensemble} lambda={CURVE_LAMBDA}"),
            replicates: records,
            excluded,
        });
    }

    Ok(DriverResult {
        groups,
        files: vec![
            ("universality_mse.csv".to_string(), mse_csv),
            ("universality_mse_raw.csv".to_string(), mse_raw),
            ("universality_residual.csv".to_string(), res_csv),
            ("universality_residual_raw.csv".to_string(), res_raw),
        ],
    })
}

/// MSE of the minimizers of both objectives under the well-specified model
/// and a rotationally invariant misspecified model.
fn exp_tap_vs_vb(cfg: &ExperimentConfig) -> Result<DriverResult> {
    let eta = cfg.etas[0];
    let model_names = ["wellspec", "misspec"];
    type VbOut = std::result::Result<Vec<(String, String, f64)>, String>;
    let jobs: Vec<(usize, usize, usize, u64)> = cfg
        .lambdas
        .iter()
        .enumerate()
        .flat_map(|(il, _)| {
            (0..2usize).flat_map(move |im| {
                (0..cfg.replicates).map(move |r| (il, im, r))
            })
        })
        .map(|(il, im, r)| {
            (
                il,
                im,
                r,
                rng::derive_seed(
                    cfg.master_seed,
                    &[TAG_TAP_VS_VB, il as u64, im as u64, r as u64],
                ),
            )
        })
        .collect();
    let outs: Vec<(usize, usize, usize, u64, f64, VbOut)> = jobs
        .par_iter()
        .map(|&(il, im, rep, seed)| {
            let lambda = cfg.lambdas[il];
            let ensemble = cfg.ensembles[im];
            let t0 = Instant::now();
            let out = (|| -> Result<Vec<(String, String, f64)>> {
                let inst = sample_instance(cfg.n, lambda, ensemble, seed)?;
                let mut rows = Vec::new();
                for (method, name) in [(Method::Ngd, "tap"), (Method::NgdVb, "vb")] {
                    let config = SolverConfig::ngd(eta, cfg.minimizer_iters, MINIMIZER_GRAD_TOL)
                        .with_method(method);
                    let run = run_solver(&inst, &config, Init::Spectral, None)?;
                    let (_, mse) = crate::solvers::align_sign(&run.state.m, &inst.x)?;
                    let status = match run.trace.status {
                        Status::Converged => "converged".to_string(),
                        other => format!(
                            "{other} grad_sq={:.3e}",
                            run.trace.final_record().grad_sq
                        ),
                    };
                    rows.push((name.to_string(), status, mse));
                }
                Ok(rows)
            })()
            .map_err(|e| e.to_string());
            (il, im, rep, seed, t0.elapsed().as_secs_f64(), out)
        })
        .collect();

    let mut csv = String::from("lambda,model,method,mean_mse,band\n");
    let mut raw = String::from("lambda,model,method,replicate,mse\n");
    let mut groups = Vec::new();
    for (il, &lambda) in cfg.lambdas.iter().enumerate() {
        for (im, model) in model_names.iter().enumerate() {
            for method in ["tap", "vb"] {
                let mut vals = Vec::new();
                let mut records = Vec::new();
                let mut excluded = 0;
                for (jl, jm, rep, seed, wall, out) in &outs {
                    if (jl, jm) != (&il, &im) {
                        continue;
                    }
                    match out {
                        Ok(rows) => {
                            let (_, status, mse) =
                                rows.iter().find(|(name, _, _)| name == method).unwrap();
                            vals.push(*mse);
                            raw.push_str(&format!("{lambda},{model},{method},{rep},{mse}\n"));
                            records.push(ReplicateRecord {
                                replicate: *rep,
                                seed: Some(*seed),
                                status: status.clone(),
                                value: Some(*mse),
                                wall_time_s: *wall,
                            });
                        }
                        Err(msg) => {
                            excluded += 1;
                            records.push(ReplicateRecord {
                                replicate: *rep,
                                seed: Some(*seed),
                                status: format!("error: {msg}"),
                                value: None,
                                wall_time_s: *wall,
                            });
                        }
                    }
                }
                let (mean, band) = aggregate(&vals)?;
                csv.push_str(&format!("{lambda},{model},{method},{mean},{band}\n"));
                groups.push(GroupRecord {
                    group: format!("lambda={lambda} model={model} method={method}"),
                    replicates: records,
                    excluded,
                });
            }
        }
    }
    Ok(DriverResult {
        groups,
        files: vec![
            ("tap_vs_vb.csv".to_string(), csv),
            ("tap_vs_vb_raw.csv".to_string(), raw),
        ],
    })
}

/// Eigenvalues of the iteration Jacobian at the fixed point of a single
/// instance, as a scatter-ready (re, im) CSV plus a radius summary.
fn exp_jacobian_scatter(cfg: &ExperimentConfig) -> Result<DriverResult> {
    let lambda = cfg.lambdas[0];
    let ensemble = cfg.ensembles[0];
    let seed = rng::derive_seed(cfg.master_seed, &[TAG_JACOBIAN, 0, 0]);
    let t0 = Instant::now();
    let inst = sample_instance(cfg.n, lambda, ensemble, seed)?;
    let star = find_m_star(&inst)?;
    let (spectrum, radius) = diagnostics::jacobian_spectrum(&inst, &star.state.m)?;
    let csv = diagnostics::spectrum_to_csv(&spectrum);
    let summary = serde_json::json!({
        "n": cfg.n,
        "lambda": lambda,
        "ensemble": ensemble.to_string(),
        "seed": seed,
        "eigenvalue_count": spectrum.len(),
        "spectral_radius": radius,
    });
    let groups = vec![GroupRecord {
        group: format!("lambda={lambda}"),
        replicates: vec![ReplicateRecord {
            replicate: 0,
            seed: Some(seed),
            status: star.amp_status.to_string(),
            value: Some(radius),
            wall_time_s: t0.elapsed().as_secs_f64(),
        }],
        excluded: 0,
    }];
    Ok(DriverResult {
        groups,
        files: vec![
            ("jacobian_spectrum.csv".to_string(), csv),
            (
                "jacobian_summary.json".to_string(),
                serde_json::to_string_pretty(&summary)? + "\n",
            ),
        ],
    })
}

/// Lower-bound surface grids, one CSV per lambda.
fn exp_landscape(cfg: &ExperimentConfig) -> Result<DriverResult> {
    let quad = GaussQuadrature::standard();
    let mut groups = Vec::new();
    let mut files = Vec::new();
    for &lambda in &cfg.lambdas {
        let t0 = Instant::now();
        let grid = landscape::landscape_grid(lambda, cfg.grid_points, cfg.grid_points, &quad)?;
        files.push((format!("landscape_lambda_{lambda}.csv"), grid.to_csv()));
        groups.push(GroupRecord {
            group: format!("lambda={lambda}"),
            replicates: vec![ReplicateRecord {
                replicate: 0,
                seed: None,
                status: format!(
                    "argmin_q={} argmin_phi={} boundary_hits={}",
                    grid.argmin.0, grid.argmin.1, grid.boundary_hits
                ),
                value: Some(grid.argmin_value),
                wall_time_s: t0.elapsed().as_secs_f64(),
            }],
            excluded: 0,
        });
    }
    Ok(DriverResult { groups, files })
}
