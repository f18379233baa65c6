//! Fixed points of the resonant annulus at η = 0 and after continuation,
//! and the separatrix levels through each saddle.

use al_lab::resonance::{
    leading_fixed_points, refine_fixed_points, separatrix_levels, AnnulusParams, ContourGrid, DEFAULT_DELTA0,
};

fn main() -> al_lab::Result<()> {
    for alpha in [(1.0, 1.0), (8.0, 1.0)] {
        let p = AnnulusParams::new(0.05, alpha, 1.0, 3)?;
        println!("α = {alpha:?}, η = {}", p.eta);
        let leading = leading_fixed_points(&p.with_eta(0.0), DEFAULT_DELTA0)?;
        let refined = refine_fixed_points(&p, 8, DEFAULT_DELTA0)?;
        for (l, r) in leading.iter().zip(&refined) {
            println!(
                "  j = {}  {:?}  y: {:+.6} -> {:+.6}  ξ = {:.6}  residual {:.1e}",
                r.j, r.kind, l.y, r.y, r.xi, r.residual
            );
        }
        match separatrix_levels(&p, ContourGrid::default()) {
            Ok(contours) => {
                for c in contours {
                    let points: usize = c.polylines.iter().map(Vec::len).sum();
                    println!(
                        "  separatrix through j = {}: level {:+.6}, {} polylines, {points} points, gap {:.1e}",
                        c.saddle.j,
                        c.level,
                        c.polylines.len(),
                        c.closure_gap
                    );
                }
            }
            Err(e) => println!("  no separatrix: {e}"),
        }
    }
    Ok(())
}
