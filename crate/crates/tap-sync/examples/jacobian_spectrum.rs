//! Eigenvalues of the iteration map linearized at the minimizer: all of
//! them must sit strictly inside the unit circle for local convergence.

use tap_sync::diagnostics::{jacobian_spectrum, spectrum_to_csv};
use tap_sync::model::{sample_instance, NoiseEnsemble};
use tap_sync::solvers::find_m_star;

fn main() -> tap_sync::Result<()> {
    let inst = sample_instance(400, 1.5, NoiseEnsemble::Goe, 5)?;
    let star = find_m_star(&inst)?;
    let (spectrum, radius) = jacobian_spectrum(&inst, &star.state.m)?;

    let mut moduli: Vec<f64> = spectrum.iter().map(|(re, im)| re.hypot(*im)).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    println!("{} eigenvalues, spectral radius {:.6}", spectrum.len(), radius);
    println!("largest moduli: {:?}", &moduli[..5.min(moduli.len())]);
    let complex_count = spectrum.iter().filter(|(_, im)| im.abs() > 1e-12).count();
    println!("strictly complex pairs: {}", complex_count / 2);

    let dir = std::path::Path::new("target/example-out");
    std::fs::create_dir_all(dir)?;
    let path = dir.join("jacobian_spectrum.csv");
    std::fs::write(&path, spectrum_to_csv(&spectrum))?;
    println!("scatter data written to {}", path.display());
    Ok(())
}
