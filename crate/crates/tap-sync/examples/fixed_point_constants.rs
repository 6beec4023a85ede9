//! Limiting scalar constants across signal strengths, plus the overlap
//! sequence the iterative solver tracks in the large-n limit.

use tap_sync::quadrature::GaussQuadrature;
use tap_sync::scalars::{limiting_risks, scalar_constants, state_evolution};

fn main() -> tap_sync::Result<()> {
    let quad = GaussQuadrature::standard();

    println!(
        "{:>6} {:>10} {:>10} {:>10} {:>10} {:>11} {:>11}",
        "lambda", "q*", "h*", "e*", "b*", "matrix_mse", "vector_mse"
    );
    for lambda in [1.05, 1.1, 1.2, 1.5, 2.0, 2.5] {
        let c = scalar_constants(lambda, &quad)?;
        let r = limiting_risks(lambda, &quad)?;
        println!(
            "{lambda:>6} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>11.6} {:>11.6}",
            c.q_star, c.h_star, c.e_star, c.b_star, r.matrix_mse, r.vector_mse
        );
    }

    let se = state_evolution(1.5, 12, &quad)?;
    println!("\noverlap sequence q_k at lambda = 1.5 (spectral-scale start):");
    for (k, q) in se.q_values().iter().enumerate() {
        println!("  k = {k:>2}   q_k = {q:.12}");
    }
    Ok(())
}
