//! AMP against natural gradient descent on one instance: residual to the
//! free-energy minimizer per iteration, from the shared spectral start.

use tap_sync::model::{sample_instance, NoiseEnsemble};
use tap_sync::solvers::{find_m_star, run_solver, Init, SolverConfig};

fn main() -> tap_sync::Result<()> {
    let inst = sample_instance(400, 1.5, NoiseEnsemble::Goe, 11)?;
    let star = find_m_star(&inst)?;
    println!(
        "fixed point: |grad|^2/n = {:.3e}, overlap with signal = {:.4}",
        star.grad_sq,
        inst.overlap(&star.state.m).abs()
    );

    let runs = [
        ("amp", SolverConfig::amp(300, f64::MIN_POSITIVE)),
        ("ngd eta=0.1", SolverConfig::ngd(0.1, 3000, f64::MIN_POSITIVE)),
        ("ngd eta=0.5", SolverConfig::ngd(0.5, 3000, f64::MIN_POSITIVE)),
    ];
    let mut curves = Vec::new();
    for (label, config) in runs {
        let run = run_solver(&inst, &config, Init::Spectral, Some(&star.state.m))?;
        curves.push((label, run));
    }

    println!("\n{:>6} {:>14} {:>14} {:>14}", "k", "amp", "ngd 0.1", "ngd 0.5");
    for k in [0, 1, 2, 5, 10, 20, 50, 100, 200, 300, 1000, 3000] {
        let mut row = format!("{k:>6}");
        for (_, run) in &curves {
            let r = run
                .trace
                .records
                .iter()
                .find(|rec| rec.k == k)
                .and_then(|rec| rec.residual);
            match r {
                Some(v) => row.push_str(&format!(" {v:>14.6e}")),
                None => row.push_str(&format!(" {:>14}", "-")),
            }
        }
        println!("{row}");
    }
    for (label, run) in &curves {
        println!(
            "{label}: stopped after {} iterations with status {}",
            run.trace.iters, run.trace.status
        );
    }
    Ok(())
}
