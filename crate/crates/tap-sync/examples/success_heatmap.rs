//! Success probability of natural gradient descent over a coarse
//! (signal strength, step size) grid, printed as a text heatmap.

use tap_sync::experiments::{run_experiment, ExperimentConfig, ExperimentKind};

fn main() -> tap_sync::Result<()> {
    let mut cfg = ExperimentConfig::new(ExperimentKind::SuccessHeatmap);
    cfg.n = 200;
    cfg.replicates = 4;
    cfg.lambdas = (1..=6).map(|i| (100 + 15 * i) as f64 / 100.0).collect();
    cfg.etas = vec![0.1, 0.3, 0.5, 0.7, 0.9];
    cfg.ngd_iters = 3000;
    cfg.output_dir = "target/example-out/success_heatmap".into();
    run_experiment(&cfg)?;

    let csv = std::fs::read_to_string(cfg.output_dir.join("success_heatmap.csv"))?;
    let mut cells = std::collections::BTreeMap::new();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        cells.insert(
            (f[0].to_string(), f[1].to_string()),
            f[2].parse::<f64>().unwrap(),
        );
    }

    print!("{:>8}", "eta\\lam");
    for l in &cfg.lambdas {
        print!(" {l:>6}");
    }
    println!();
    for e in cfg.etas.iter().rev() {
        print!("{e:>8}");
        for l in &cfg.lambdas {
            let frac = cells[&(l.to_string(), e.to_string())];
            print!(" {frac:>6.2}");
        }
        println!();
    }
    println!(
        "\nsuccess = residual below 1e-4 within {} iterations ({} replicates per cell)",
        cfg.ngd_iters, cfg.replicates
    );
    Ok(())
}
