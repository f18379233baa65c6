//! Even heteroclinic orbit from the Darboux transformation: distance to the
//! invariant circle, decay rate and asymptotic phase shift.

use al_lab::darboux::{asymptotic_phase_shift, sample_orbit, Ear, OrbitParams};
use al_lab::evolve::fit_decay_rate;
use al_lab::lattice::amplitude_window;

fn main() -> al_lab::Result<()> {
    let n = 6;
    let a = amplitude_window(n).midpoint(12.0);
    let p = OrbitParams::new(a, a, 0.3, 0.0, Ear::Plus, n)?;
    println!("a = {a:.6}, μ = {:.6}, z = {:.6}, ϑ = {:.6}", p.mu, p.z, p.vtheta());

    let times: Vec<f64> = (-8..=8).map(|k| k as f64 / (2.0 * p.mu)).collect();
    for s in sample_orbit(&p, &times)? {
        println!("t = {:+.5}  |Q - q_c| = {:.3e}  Q_0 = {:.5}", s.t, s.distance_to_circle, s.q[0]);
    }

    let tail: Vec<(f64, f64)> = sample_orbit(&p, &(0..30).map(|k| (2.0 + 0.1 * k as f64) / p.mu).collect::<Vec<_>>())?
        .into_iter()
        .map(|s| (s.t, s.distance_to_circle))
        .collect();
    let fit = fit_decay_rate(&tail)?;
    println!("fitted decay {:.6} vs 2μ = {:.6} (r² = {:.12})", fit.rate, 2.0 * p.mu, fit.r2);
    let (plus, minus) = asymptotic_phase_shift(&p);
    println!("θ+ = {plus:.6}, θ- = {minus:.6}");
    Ok(())
}
