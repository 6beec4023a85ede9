//! Minimize both free energies (with and without the reaction correction)
//! and compare the estimation error of their minimizers, under the assumed
//! noise model and under a rotationally invariant misspecification.

use tap_sync::experiments::{run_experiment, ExperimentConfig, ExperimentKind};

fn main() -> tap_sync::Result<()> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::TapVsVb);
    cfg.n = 250;
    cfg.replicates = 5;
    cfg.lambdas = vec![1.2, 1.5];
    cfg.minimizer_iters = 4000;
    cfg.output_dir = "target/example-out/tap_vs_vb".into();
    run_experiment(&cfg)?;

    let csv = std::fs::read_to_string(cfg.output_dir.join("tap_vs_vb.csv"))?;
    println!("{:>8} {:>10} {:>8} {:>10} {:>10}", "lambda", "model", "method", "mean_mse", "band");
    let mut rows: Vec<Vec<String>> = Vec::new();
    for line in csv.lines().skip(1) {
        let f: Vec<String> = line.split(',').map(str::to_string).collect();
        println!(
            "{:>8} {:>10} {:>8} {:>10.4} {:>10.4}",
            f[0],
            f[1],
            f[2],
            f[3].parse::<f64>().unwrap(),
            f[4].parse::<f64>().unwrap()
        );
        rows.push(f);
    }

    println!();
    for pair in rows.chunks(2) {
        let (tap, vb) = (&pair[0], &pair[1]);
        let tap_mse: f64 = tap[3].parse().unwrap();
        let vb_mse: f64 = vb[3].parse().unwrap();
        println!(
            "lambda {} {}: corrected objective {} (mse {:.4} vs {:.4})",
            tap[0],
            tap[1],
            if tap_mse < vb_mse { "wins" } else { "does not win" },
            tap_mse,
            vb_mse
        );
    }
    Ok(())
}
