//! Round trip between even lattice states and block coordinates.

use al_lab::lattice::{from_block_coords, to_block_coords, vtheta_angle, BlockCoords, LatticeSize};
use al_lab::C64;

fn main() -> al_lab::Result<()> {
    let n = 8;
    let size = LatticeSize::new(n)?;
    let a = 6.0;
    let bc = BlockCoords {
        a,
        gamma: 0.4,
        b1: 0.02,
        b2: -0.01,
        c: (0..size.m() - 1).map(|k| C64::new(1e-3 * (k + 1) as f64, -5e-4)).collect(),
        vtheta: vtheta_angle(a, n)?,
    };
    let q = from_block_coords(&bc, size)?;
    for (k, x) in q.iter().enumerate() {
        println!("q[{k}] = {:+.8}{:+.8}i", x.re, x.im);
    }
    let back = to_block_coords(&q, a)?;
    println!(
        "a {:.3e}  γ {:.3e}  b1 {:.3e}  b2 {:.3e}",
        (back.a - bc.a).abs(),
        (back.gamma - bc.gamma).abs(),
        (back.b1 - bc.b1).abs(),
        (back.b2 - bc.b2).abs()
    );
    Ok(())
}
