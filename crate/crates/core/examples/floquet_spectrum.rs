//! Closed-form spectral points of a uniform state, checked against the
//! numerically evaluated discriminant, plus a critical-point search.

use al_lab::floquet::{default_seeds, discriminant, find_critical_points, uniform_spectral_points, ClassifyTolerances};
use al_lab::lattice::{amplitude_window, LatticeSize, LatticeState};
use al_lab::C64;

fn main() -> al_lab::Result<()> {
    let n = 6;
    let window = amplitude_window(n);
    let a = window.midpoint(12.0);
    println!("N = {n}, window ({:.6}, {:.6}), a = {a:.6}", window.lower, window.upper);

    let q = LatticeState::uniform(LatticeSize::new(n)?, C64::new(a, 0.0));
    for entry in uniform_spectral_points(a, n)? {
        let p = &entry.point;
        let d = discriminant(p.z, &q)?;
        println!(
            "{:>6} m={:?} z = {:+.6}{:+.6}i  kind {:?}  |Δ|/2D = {:.12}",
            entry.family,
            entry.m,
            p.z.re,
            p.z.im,
            p.kind,
            d.delta.norm() / (2.0 * d.d)
        );
    }

    let search = find_critical_points(&q, &default_seeds(&q), &ClassifyTolerances::default())?;
    println!("{} critical points, {} failed seeds", search.points.len(), search.failures.len());
    for p in search.points.iter().take(6) {
        println!("  z = {:+.8}{:+.8}i  {:?}", p.z.re, p.z.im, p.kind);
    }
    Ok(())
}
