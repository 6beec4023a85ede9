//! Variational surface over the overlap pair (q, phi): evaluate a contour
//! grid and compare its argmin with the predicted location (q*, q*).

use tap_sync::landscape::{bar_e, landscape_grid};
use tap_sync::quadrature::GaussQuadrature;
use tap_sync::scalars::scalar_constants;

fn main() -> tap_sync::Result<()> {
    let quad = GaussQuadrature::standard();
    let lambda = 1.2;
    let c = scalar_constants(lambda, &quad)?;

    let grid = landscape_grid(lambda, 41, 41, &quad)?;
    println!("lambda = {lambda}: 41 x 41 grid over q in [0.01, 0.99], phi in [0, 0.99]");
    println!(
        "  argmin at (q, phi) = ({:.4}, {:.4}), value {:.6}",
        grid.argmin.0, grid.argmin.1, grid.argmin_value
    );
    println!("  predicted minimum  ({:.4}, {:.4}), value {:.6}", c.q_star, c.q_star, c.e_star);
    println!("  gamma-boundary hits: {}", grid.boundary_hits);

    let at_star = bar_e(lambda, c.q_star, c.q_star, &quad)?;
    println!(
        "  surface evaluated exactly at (q*, q*): {:.8} (e* = {:.8})",
        at_star.value, c.e_star
    );

    let dir = std::path::Path::new("target/example-out");
    std::fs::create_dir_all(dir)?;
    let path = dir.join("landscape_1.2.csv");
    grid.write_csv(&path)?;
    println!("grid written to {}", path.display());
    Ok(())
}
