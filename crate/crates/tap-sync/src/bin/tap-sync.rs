//! Thin command-line front end over the library: scalar constants, solver
//! traces, stability diagnostics, landscape grids, and experiment runs.
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

use clap::{Parser, Subcommand};
use nalgebra::DVector;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tap_sync::diagnostics::{self, DEFAULT_DELTA, DEFAULT_ETA};
use tap_sync::energy::MagnetizationState;
use tap_sync::error::{Error, Result};
use tap_sync::experiments::{run_experiment, ExperimentConfig, ExperimentKind};
use tap_sync::landscape::landscape_grid;
use tap_sync::model::{sample_instance, ModelInstance, NoiseEnsemble};
use tap_sync::quadrature::GaussQuadrature;
use tap_sync::scalars::{scalar_constants, state_evolution};
use tap_sync::solvers::{find_m_star, run_solver, Init, Method, SolverConfig};

#[derive(Parser)]
#[command(
    name = "tap-sync",
    version,
    about = "TAP inference for Z2 synchronization: solvers, diagnostics, landscape, experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print limiting scalar constants and the state-evolution overlaps as JSON
    FixedPoint {
        /// signal-to-noise ratio
        #[arg(long)]
        lambda: f64,
        /// number of state-evolution iterations to include
        #[arg(long, default_value_t = 20)]
        kmax: usize,
    },
    /// Run a solver on an instance and write its iteration trace as CSV
    Solve {
        /// path stem of a saved instance (expects <stem>.csv and <stem>.json);
        /// a fresh instance is sampled when omitted
        #[arg(long)]
        instance: Option<PathBuf>,
        /// dimension of the sampled instance
        #[arg(long, default_value_t = 500)]
        n: usize,
        /// signal-to-noise ratio of the sampled instance
        #[arg(long)]
        lambda: Option<f64>,
        /// noise law: goe, rademacher, laplace, student_t(nu), rot_inv_uniform
        #[arg(long, default_value = "goe")]
        ensemble: String,
        /// master seed of the sampled instance
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// amp, ngd, or ngd-vb
        #[arg(long, default_value = "amp")]
        method: String,
        /// step size for the gradient methods
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        /// iteration budget (default: 500 for amp, 12000 otherwise)
        #[arg(long)]
        max_iters: Option<usize>,
        /// stop when |grad|^2/n falls below this
        #[arg(long, default_value_t = 1e-10)]
        grad_tol: f64,
        /// trace output path
        #[arg(long, default_value = "trace.csv")]
        out: PathBuf,
        /// also write the final magnetization as a one-column CSV
        #[arg(long)]
        m_out: Option<PathBuf>,
        /// also save the instance under this path stem
        #[arg(long)]
        save_instance: Option<PathBuf>,
    },
    /// Stability and distributional diagnostics at a magnetization point
    Diagnostics {
        /// path stem of a saved instance
        #[arg(long)]
        instance: PathBuf,
        /// magnetization CSV (header "m", one value per line); the fixed
        /// point is computed when omitted
        #[arg(long)]
        at: Option<PathBuf>,
        /// report output path
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        /// also dump the iteration-Jacobian spectrum as a re,im CSV
        #[arg(long)]
        spectrum_out: Option<PathBuf>,
        /// moment-box radius
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        /// Wasserstein-2 radius
        #[arg(long, default_value_t = DEFAULT_ETA)]
        eta: f64,
    },
    /// Evaluate the variational surface on a grid and write a q,phi,value CSV
    Landscape {
        /// signal-to-noise ratio
        #[arg(long)]
        lambda: f64,
        /// grid points along q
        #[arg(long, default_value_t = 101)]
        nq: usize,
        /// grid points along phi
        #[arg(long, default_value_t = 101)]
        nphi: usize,
        /// grid output path
        #[arg(long, default_value = "grid.csv")]
        out: PathBuf,
    },
    /// Run a full experiment from a TOML config and/or a named default
    Experiment {
        /// experiment name: convergence, success_heatmap, universality,
        /// tap_vs_vb, jacobian_scatter, landscape
        #[arg(long)]
        name: Option<String>,
        /// TOML config path; defaults are used when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// output directory (overrides the config)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a matplotlib script template for the emitted CSVs
    PlotTemplate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn write_m_csv(path: &Path, m: &DVector<f64>) -> Result<()> {
    let mut s = String::from("m\n");
    for v in m.iter() {
        s.push_str(&format!("{v}\n"));
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn read_m_csv(path: &Path, n: usize) -> Result<DVector<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut vals = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || (i == 0 && line == "m") {
            continue;
        }
        vals.push(line.parse::<f64>().map_err(|_| {
            Error::Config(format!("bad magnetization value {line:?} at line {}", i + 1))
        })?);
    }
    if vals.len() != n {
        return Err(Error::Config(format!(
            "magnetization file has {} entries but the instance needs {n}",
            vals.len()
        )));
    }
    Ok(DVector::from_vec(vals))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::FixedPoint { lambda, kmax } => {
            let quad = GaussQuadrature::standard();
            let constants = scalar_constants(lambda, &quad)?;
            let se = state_evolution(lambda, kmax, &quad)?;
            println!(
                "{}",
                serde_json::json!({
                    "lambda": constants.lambda,
                    "q_star": constants.q_star,
                    "h_star": constants.h_star,
                    "e_star": constants.e_star,
                    "b_star": constants.b_star,
                    "gammas": se.gammas,
                })
            );
            Ok(())
        }
        Command::Solve {
            instance,
            n,
            lambda,
            ensemble,
            seed,
            method,
            eta,
            max_iters,
            grad_tol,
            out,
            m_out,
            save_instance,
        } => {
            let inst = match &instance {
                Some(stem) => ModelInstance::load(stem)?,
                None => {
                    let lambda = lambda.ok_or_else(|| {
                        Error::Config("either --instance or --lambda is required".into())
                    })?;
                    let ens: NoiseEnsemble = ensemble.parse()?;
                    sample_instance(n, lambda, ens, seed)?
                }
            };
            if let Some(stem) = &save_instance {
                inst.save(stem)?;
            }
            let method: Method = method.parse()?;
            let budget = max_iters.unwrap_or(match method {
                Method::Amp => 500,
                _ => 12_000,
            });
            let config = match method {
                Method::Amp => SolverConfig::amp(budget, grad_tol),
                other => SolverConfig::ngd(eta, budget, grad_tol).with_method(other),
            };
            let run = run_solver(&inst, &config, Init::Spectral, None)?;
            run.trace.write_csv(&out)?;
            if let Some(p) = &m_out {
                write_m_csv(p, &run.state.m)?;
            }
            let fin = run.trace.final_record();
            println!(
                "{}",
                serde_json::json!({
                    "status": run.trace.status.to_string(),
                    "iters": run.trace.iters,
                    "grad_sq": fin.grad_sq,
                    "f_tap": fin.f_tap,
                    "q": fin.q,
                    "overlap": fin.overlap,
                    "trace": out.display().to_string(),
                })
            );
            Ok(())
        }
        Command::Diagnostics {
            instance,
            at,
            out,
            spectrum_out,
            delta,
            eta,
        } => {
            let inst = ModelInstance::load(&instance)?;
            let state = match &at {
                Some(p) => MagnetizationState::from_m_clamped(read_m_csv(p, inst.n)?)?.0,
                None => find_m_star(&inst)?.state,
            };
            let quad = GaussQuadrature::standard();
            let constants = scalar_constants(inst.lambda, &quad)?;
            let report = diagnostics::diagnose(&inst, &state, &constants, delta, eta)?;
            std::fs::write(&out, serde_json::to_string_pretty(&report)? + "\n")?;
            if let Some(p) = &spectrum_out {
                std::fs::write(p, diagnostics::spectrum_to_csv(&report.jacobian_spectrum))?;
            }
            println!(
                "{}",
                serde_json::json!({
                    "lambda_min_hessian": report.lambda_min_hessian,
                    "spectral_radius": report.spectral_radius,
                    "bethe_pass_plus": report.bethe_pass_plus,
                    "bethe_pass_minus": report.bethe_pass_minus,
                    "w2_to_mu_star": report.w2_to_mu_star,
                    "in_B_delta": report.in_b_delta,
                    "in_D_eta": report.in_d_eta,
                    "report": out.display().to_string(),
                })
            );
            Ok(())
        }
        Command::Landscape {
            lambda,
            nq,
            nphi,
            out,
        } => {
            let quad = GaussQuadrature::standard();
            let grid = landscape_grid(lambda, nq, nphi, &quad)?;
            grid.write_csv(&out)?;
            println!(
                "{}",
                serde_json::json!({
                    "lambda": lambda,
                    "argmin_q": grid.argmin.0,
                    "argmin_phi": grid.argmin.1,
                    "argmin_value": grid.argmin_value,
                    "boundary_hits": grid.boundary_hits,
                    "grid": out.display().to_string(),
                })
            );
            Ok(())
        }
        Command::Experiment { name, config, out } => {
            if name.is_none() && config.is_none() {
                return Err(Error::Config(
                    "either --name or --config is required".into(),
                ));
            }
            let mut cfg = match &config {
                Some(p) => ExperimentConfig::load(p)?,
                None => ExperimentConfig::new(name.as_deref().unwrap().parse()?),
            };
            if let Some(n) = &name {
                cfg.experiment = n.parse::<ExperimentKind>()?;
            }
            if let Some(dir) = out {
                cfg.output_dir = dir;
            }
            let result = run_experiment(&cfg)?;
            println!(
                "{}",
                serde_json::json!({
                    "experiment": result.manifest.experiment,
                    "manifest": result.manifest_path.display().to_string(),
                    "outputs": result.manifest.outputs.iter().map(|o| o.path.clone()).collect::<Vec<_>>(),
                    "excluded": result.manifest.excluded_total,
                    "wall_time_s": result.manifest.wall_time_s,
                })
            );
            Ok(())
        }
        Command::PlotTemplate => {
            print!("{PLOT_TEMPLATE}");
            Ok(())
        }
    }
}

const PLOT_TEMPLATE: &str = r#"#!/usr/bin/env python3
"""Render figures from a tap-sync experiment directory.

Usage: python plot.py <experiment-dir>

Reads manifest.json to discover which experiment produced the directory,
then writes one PNG per panel next to the CSVs.
"""
import json
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd


def band_plot(ax, df, x, y, band, group):
    for key, g in df.groupby(group):
        ax.plot(g[x], g[y], label=str(key))
        ax.fill_between(g[x], g[y] - g[band], g[y] + g[band], alpha=0.2)
    ax.legend()


def plot_convergence(d):
    df = pd.read_csv(d / "convergence.csv")
    fig, ax = plt.subplots()
    band_plot(ax, df, "k", "mean_residual", "band", "method")
    ax.set(xlabel="iteration k", ylabel="residual", yscale="log")
    fig.savefig(d / "convergence.png", dpi=150)


def plot_success_heatmap(d):
    df = pd.read_csv(d / "success_heatmap.csv")
    grid = df.pivot(index="eta", columns="lambda", values="success_fraction")
    fig, ax = plt.subplots()
    im = ax.pcolormesh(grid.columns, grid.index, grid.values, vmin=0, vmax=1)
    fig.colorbar(im, ax=ax, label="success fraction")
    ax.set(xlabel="lambda", ylabel="eta")
    fig.savefig(d / "success_heatmap.png", dpi=150)


def plot_universality(d):
    mse = pd.read_csv(d / "universality_mse.csv")
    fig, ax = plt.subplots()
    for ens, g in mse.groupby("ensemble"):
        ax.errorbar(g["lambda"], g["mean_mse"], yerr=g["band"], label=ens, capsize=2)
    ax.set(xlabel="lambda", ylabel="MSE")
    ax.legend()
    fig.savefig(d / "universality_mse.png", dpi=150)

    res = pd.read_csv(d / "universality_residual.csv")
    fig, ax = plt.subplots()
    band_plot(ax, res, "k", "mean_residual", "band", "ensemble")
    ax.set(xlabel="iteration k", ylabel="residual", yscale="log")
    fig.savefig(d / "universality_residual.png", dpi=150)


def plot_tap_vs_vb(d):
    df = pd.read_csv(d / "tap_vs_vb.csv")
    fig, ax = plt.subplots()
    for (model, method), g in df.groupby(["model", "method"]):
        ax.errorbar(g["lambda"], g["mean_mse"], yerr=g["band"],
                    label=f"{method} ({model})", capsize=2)
    ax.set(xlabel="lambda", ylabel="MSE")
    ax.legend()
    fig.savefig(d / "tap_vs_vb.png", dpi=150)


def plot_jacobian_scatter(d):
    df = pd.read_csv(d / "jacobian_spectrum.csv")
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(df["re"], df["im"], s=4)
    circle = plt.Circle((0, 0), 1.0, fill=False, linestyle="--", color="gray")
    ax.add_patch(circle)
    ax.set(xlabel="Re", ylabel="Im", aspect="equal")
    fig.savefig(d / "jacobian_spectrum.png", dpi=150)


def plot_landscape(d):
    for csv in sorted(d.glob("landscape_lambda_*.csv")):
        df = pd.read_csv(csv)
        fig, ax = plt.subplots()
        t = ax.tricontourf(df["q"], df["phi"], df["value"], levels=30)
        fig.colorbar(t, ax=ax)
        i = df["value"].idxmin()
        ax.plot(df.loc[i, "q"], df.loc[i, "phi"], "r*", markersize=12)
        ax.set(xlabel="q", ylabel="phi", title=csv.stem)
        fig.savefig(csv.with_suffix(".png"), dpi=150)


PLOTTERS = {
    "convergence": plot_convergence,
    "success_heatmap": plot_success_heatmap,
    "universality": plot_universality,
    "tap_vs_vb": plot_tap_vs_vb,
    "jacobian_scatter": plot_jacobian_scatter,
    "landscape": plot_landscape,
}


def main():
    d = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(".")
    manifest = json.loads((d / "manifest.json").read_text())
    PLOTTERS[manifest["experiment"]](d)
    print(f"figures written to {d}")


if __name__ == "__main__":
    main()
"#;
