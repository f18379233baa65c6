//! Melnikov coefficients along the amplitude window, the κ ratio, and a
//! transversality scan of the zero surface M = 0.

use al_lab::darboux::{Ear, OrbitParams};
use al_lab::lattice::amplitude_window;
use al_lab::melnikov::{kappa, melnikov_coefficients, transversality_scan};

fn main() -> al_lab::Result<()> {
    let n = 6;
    let omega = 1.3;
    let w = amplitude_window(n);
    let a_grid: Vec<f64> = (0..5).map(|k| w.lower + (9.0 - w.lower) * (k as f64 + 0.5) / 5.0).collect();

    for &a in &a_grid {
        let c = melnikov_coefficients(&OrbitParams::new(a, omega, 0.8, 0.0, Ear::Plus, n)?, 1e-11)?;
        println!("a = {a:.4}  f1 = {:+.6e}  f2 = {:+.6e}  κ = {:+.6e}", c.f1, c.f2, kappa(&c)?);
    }

    let gammas: Vec<f64> = (0..6).map(|j| std::f64::consts::PI * (2 * j + 1) as f64 / 6.0).collect();
    let scan = transversality_scan(&a_grid, &gammas, (0.2, 1.0), omega, n, Ear::Plus)?;
    println!("transversal cells: {} of {}", scan.transversal_cells, scan.cells.len());
    for c in scan.cells.iter().filter_map(|c| c.root.as_ref()).take(5) {
        println!(
            "  a0 = {:.4}  γ0 = {:.6}  M = {:.2e}  ∂M/∂γ = {:+.4e}",
            c.a0, c.gamma0, c.residual_m, c.dm_dgamma0
        );
    }
    println!("transversal a0 range: {:?}", scan.transversal_a0_range);
    Ok(())
}
