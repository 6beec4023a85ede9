//! Estimation error of the free-energy minimizer across noise laws: the
//! Gaussian theory predicts the same curve for all of them.

use tap_sync::experiments::{run_experiment, ExperimentConfig, ExperimentKind};
use tap_sync::quadrature::GaussQuadrature;
use tap_sync::scalars::limiting_risks;

fn main() -> tap_sync::Result<()> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::Universality);
    cfg.n = 250;
    cfg.replicates = 5;
    cfg.lambdas = vec![1.1, 1.5, 2.0, 2.5];
    cfg.amp_iters = 200;
    cfg.output_dir = "target/example-out/universality".into();
    let out = run_experiment(&cfg)?;

    let csv = std::fs::read_to_string(cfg.output_dir.join("universality_mse.csv"))?;
    let quad = GaussQuadrature::standard();
    println!(
        "{:>16} {:>8} {:>10} {:>10} {:>10}",
        "ensemble", "lambda", "mean_mse", "band", "limit"
    );
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let lambda: f64 = f[1].parse().unwrap();
        let limit = limiting_risks(lambda, &quad)?.vector_mse;
        println!(
            "{:>16} {:>8} {:>10.4} {:>10.4} {:>10.4}",
            f[0],
            f[1],
            f[2].parse::<f64>().unwrap(),
            f[3].parse::<f64>().unwrap(),
            limit
        );
    }
    println!(
        "\n{} replicates per cell, {} excluded; artifacts in {}",
        cfg.replicates,
        out.manifest.excluded_total,
        cfg.output_dir.display()
    );
    Ok(())
}
