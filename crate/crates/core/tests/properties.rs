//! Cross-module invariants checked on random parameters.

use al_lab::darboux::{sample_orbit, Ear, OrbitParams};
use al_lab::floquet::discriminant;
use al_lab::lattice::{amplitude_window, from_block_coords, to_block_coords, vtheta_angle, BlockCoords, LatticeSize};
use al_lab::resonance::{refine_fixed_points, AnnulusParams, FixedPointKind, DEFAULT_DELTA0};
use al_lab::C64;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn block_coordinates_round_trip(
        n in 4usize..10,
        t in 0.05f64..0.95,
        gamma in 0.0f64..6.28,
        b1 in -0.05f64..0.05,
        b2 in -0.05f64..0.05,
    ) {
        let w = amplitude_window(n);
        let a = w.lower + t * (w.upper.min(12.0) - w.lower);
        let size = LatticeSize::new(n).unwrap();
        let bc = BlockCoords {
            a, gamma, b1, b2,
            c: vec![C64::new(0.0, 0.0); size.m() - 1],
            vtheta: vtheta_angle(a, n).unwrap(),
        };
        let back = to_block_coords(&from_block_coords(&bc, size).unwrap(), a).unwrap();
        prop_assert!((back.b1 - b1).abs() < 1e-12 && (back.b2 - b2).abs() < 1e-12);
    }

    #[test]
    fn orbit_is_isospectral_to_its_circle(
        n in 4usize..9,
        t in 0.1f64..0.9,
        gamma in 0.0f64..6.28,
        time in -1.0f64..1.0,
        zre in 0.3f64..2.0,
        zim in -1.0f64..1.0,
    ) {
        let w = amplitude_window(n);
        let a = w.lower + t * (w.upper.min(12.0) - w.lower);
        let p = OrbitParams::new(a, a, gamma, 0.0, Ear::Plus, n).unwrap();
        let s = &sample_orbit(&p, &[time / p.mu]).unwrap()[0];
        let z = C64::new(zre, zim);
        let d_orbit = discriminant(z, &s.q).unwrap().delta_tilde;
        let d_circle = discriminant(z, &vec![p.q_c(time / p.mu); n]).unwrap().delta_tilde;
        prop_assert!((d_orbit - d_circle).norm() <= 1e-8 * (1.0 + d_circle.norm()));
    }

    #[test]
    fn annulus_fixed_point_count_follows_ratio(
        alpha1 in -10.0f64..10.0,
        alpha2 in 0.2f64..2.0,
        omega in 0.5f64..2.0,
    ) {
        let ratio = alpha1 / (4.0 * alpha2 * omega);
        prop_assume!((ratio.abs() - 1.0).abs() > 0.1);
        let p = AnnulusParams::new(0.01, (alpha1, alpha2), omega, 3).unwrap();
        let pts = refine_fixed_points(&p, 8, DEFAULT_DELTA0).unwrap();
        prop_assert_eq!(pts.len(), if ratio.abs() < 1.0 { 4 } else { 2 });
        let saddles = pts.iter().filter(|q| q.kind == FixedPointKind::Saddle).count();
        prop_assert!(saddles >= 1 && saddles * 2 <= pts.len().max(2));
    }
}
