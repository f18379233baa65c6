//! Spectral points: classification, the uniform catalog and the Newton
//! search for critical points of Δ.

use super::uniform::UniformSpectrum;
use super::{discriminant_with_derivatives, fundamental_matrix, normalization};
use crate::error::{Error, Result};
use crate::lattice::{LatticeSize, LatticeState};
use crate::linalg::{Mat2, C64};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralKind {
    Periodic,
    Antiperiodic,
    Critical,
    Double,
    Multiple,
    /// None of the spectral conditions hold within tolerance.
    Regular,
}

impl SpectralKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpectralKind::Periodic => "periodic",
            SpectralKind::Antiperiodic => "antiperiodic",
            SpectralKind::Critical => "critical",
            SpectralKind::Double => "double",
            SpectralKind::Multiple => "multiple",
            SpectralKind::Regular => "regular",
        }
    }
}

/// Thresholds used to turn residuals into a classification.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ClassifyTolerances {
    /// τ_s = rel_s · 2D.
    pub rel_s: f64,
    /// τ_c = rel_c · max(1, |Δ''|).
    pub rel_c: f64,
    /// Relative rank tolerance for the geometric multiplicity.
    pub rank: f64,
}

impl Default for ClassifyTolerances {
    fn default() -> Self {
        ClassifyTolerances {
            rel_s: 1e-8,
            rel_c: 1e-8,
            rank: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SpectralPoint {
    pub z: C64,
    pub kind: SpectralKind,
    /// Order of the zero of Δ ∓ 2D (periodic family), of Δ' (critical),
    /// or 0 for regular points.
    pub algebraic_multiplicity: u32,
    /// Dimension of the (anti)periodic eigenspace, when applicable.
    pub geometric_multiplicity: Option<u32>,
    pub rank_tol: f64,
    pub delta: C64,
    pub d: f64,
    /// |Δ − 2D| and |Δ + 2D|.
    pub residual_periodic: f64,
    pub residual_antiperiodic: f64,
    pub abs_d1: f64,
    pub abs_d2: f64,
}

impl SpectralPoint {
    /// +1 if Δ is closer to 2D than to −2D, else −1.
    pub fn parity(&self) -> i32 {
        if self.residual_periodic <= self.residual_antiperiodic {
            1
        } else {
            -1
        }
    }
}

fn geometric_multiplicity(m: &Mat2, eig: f64, rank_tol: f64) -> u32 {
    let shifted = *m - Mat2::diag(C64::new(eig, 0.0), C64::new(eig, 0.0));
    if shifted.norm() <= rank_tol * m.norm().max(1.0) {
        2
    } else {
        1
    }
}

pub fn classify_spectral_point(
    z: C64,
    q: &[C64],
    tol: &ClassifyTolerances,
) -> Result<SpectralPoint> {
    let (delta, d1, d2) = discriminant_with_derivatives(z, q)?;
    let d = normalization(q);
    let rp = (delta - 2.0 * d).norm();
    let ra = (delta + 2.0 * d).norm();
    let tau_s = tol.rel_s * 2.0 * d;
    let tau_c = tol.rel_c * d2.norm().max(1.0);
    let on_family = rp.min(ra) <= tau_s;
    let crit = d1.norm() <= tau_c;
    let flat = d2.norm() <= tau_c;
    let (kind, mult) = match (on_family, crit, flat) {
        (true, true, false) => (SpectralKind::Double, 2),
        (true, true, true) => (SpectralKind::Multiple, 4),
        (true, false, _) if rp <= ra => (SpectralKind::Periodic, 1),
        (true, false, _) => (SpectralKind::Antiperiodic, 1),
        (false, true, false) => (SpectralKind::Critical, 1),
        (false, true, true) => (SpectralKind::Critical, 2),
        (false, false, _) => (SpectralKind::Regular, 0),
    };
    let geometric = if on_family {
        let eig = if rp <= ra { d } else { -d };
        Some(geometric_multiplicity(&fundamental_matrix(z, q)?, eig, tol.rank))
    } else {
        None
    };
    Ok(SpectralPoint {
        z,
        kind,
        algebraic_multiplicity: mult,
        geometric_multiplicity: geometric,
        rank_tol: tol.rank,
        delta,
        d,
        residual_periodic: rp,
        residual_antiperiodic: ra,
        abs_d1: d1.norm(),
        abs_d2: d2.norm(),
    })
}

/// One entry of the closed-form catalog for a uniform state.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CatalogEntry {
    /// Label: "s" for z^{(s)}_m, "s_inv" for its reciprocal partner,
    /// "c_unit" for the tangency critical points z = ±1.
    pub family: &'static str,
    pub m: Option<usize>,
    pub beta: Option<f64>,
    pub point: SpectralPoint,
}

/// Closed-form spectral points of the uniform solution with amplitude `a`.
///
/// Contains z^{(s)}_m for m = 0…N and the reciprocal partners 1/z^{(s)}_m
/// off the unit circle, together with z = ±1 where cos²β = 1/ρ. Each entry
/// is classified numerically on the state q_n ≡ a.
pub fn uniform_spectral_points(a: f64, n: usize) -> Result<Vec<CatalogEntry>> {
    let size = LatticeSize::new(n)?;
    let st = LatticeState::uniform(size, C64::new(a, 0.0));
    let u = UniformSpectrum::new(a, n);
    let tol = ClassifyTolerances::default();
    let mut out = Vec::new();
    for m in 0..=n {
        let beta = m as f64 * PI / n as f64;
        let z = u.z_s(m);
        out.push(CatalogEntry {
            family: "s",
            m: Some(m),
            beta: Some(beta),
            point: classify_spectral_point(z, &st, &tol)?,
        });
        if (z.norm() - 1.0).abs() > 1e-12 {
            out.push(CatalogEntry {
                family: "s_inv",
                m: Some(m),
                beta: Some(beta),
                point: classify_spectral_point(z.inv(), &st, &tol)?,
            });
        }
    }
    for z in [C64::new(1.0, 0.0), C64::new(-1.0, 0.0)] {
        out.push(CatalogEntry {
            family: "c_unit",
            m: None,
            beta: None,
            point: classify_spectral_point(z, &st, &tol)?,
        });
    }
    Ok(out)
}

/// Result of a multi-seed critical point search.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalSearch {
    pub points: Vec<SpectralPoint>,
    /// Seeds that failed, with the reason.
    pub failures: Vec<(C64, Error)>,
}

const NEWTON_MAX_ITER: usize = 50;
const HESSIAN_FLOOR: f64 = 1e-14;
const DEDUP_DIST: f64 = 1e-6;

/// Newton iteration on dΔ/dz = 0 from one seed.
pub(crate) fn newton_critical(q: &[C64], seed: C64) -> Result<C64> {
    if seed == C64::new(0.0, 0.0) {
        return Err(Error::ZeroSpectralParameter);
    }
    let mut z = seed;
    let mut prev: Option<(C64, C64)> = None;
    for _ in 0..NEWTON_MAX_ITER {
        let (_, d1, d2) = discriminant_with_derivatives(z, q)?;
        if d1 == C64::new(0.0, 0.0) {
            return Ok(z);
        }
        let step = if d2.norm() >= HESSIAN_FLOOR {
            d1 / d2
        } else {
            // Secant fallback on dΔ/dz.
            let (zp, d1p) = match prev {
                Some(p) => p,
                None => {
                    let zp = z * (1.0 + 1e-6);
                    (zp, discriminant_with_derivatives(zp, q)?.1)
                }
            };
            let slope = (d1 - d1p) / (z - zp);
            if slope.norm() < HESSIAN_FLOOR {
                return Err(Error::DegenerateHessian(z));
            }
            d1 / slope
        };
        prev = Some((z, d1));
        z -= step;
        if z == C64::new(0.0, 0.0) || !z.re.is_finite() || !z.im.is_finite() {
            break;
        }
        if step.norm() <= 1e-14 * z.norm().max(1.0) {
            return Ok(z);
        }
    }
    Err(Error::NoConvergence {
        seed,
        iterations: NEWTON_MAX_ITER,
    })
}

pub fn find_critical_points(
    q: &[C64],
    seeds: &[C64],
    tol: &ClassifyTolerances,
) -> Result<CriticalSearch> {
    let mut roots: Vec<C64> = Vec::new();
    let mut failures = Vec::new();
    for &s in seeds {
        match newton_critical(q, s) {
            Ok(z) => {
                if roots.iter().all(|r| (r - z).norm() > DEDUP_DIST) {
                    roots.push(z);
                }
            }
            Err(e) => failures.push((s, e)),
        }
    }
    let points = roots
        .into_iter()
        .map(|z| classify_spectral_point(z, q, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(CriticalSearch { points, failures })
}

/// Seeds from the uniform catalog at the mean amplitude |q|_avg: the
/// points z(β) for β = mπ/N, m = 1…N−1, their reciprocals, and ±1.
pub fn default_seeds(q: &[C64]) -> Vec<C64> {
    let n = q.len();
    let a = q.iter().map(|x| x.norm()).sum::<f64>() / n as f64;
    let u = UniformSpectrum::new(a, n);
    let mut seeds = Vec::new();
    for m in 1..n {
        let z = u.z_s(m);
        seeds.push(z);
        if (z.norm() - 1.0).abs() > 1e-12 {
            seeds.push(z.inv());
        }
    }
    seeds.push(C64::new(1.0, 0.0));
    seeds.push(C64::new(-1.0, 0.0));
    seeds
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::amplitude_window;

    fn uniform(a: f64, n: usize) -> LatticeState {
        LatticeState::uniform(LatticeSize::new(n).unwrap(), C64::new(a, 0.0))
    }

    #[test]
    fn catalog_signs_and_double_point() {
        for (n, a) in [(3usize, 6.0), (4, 6.0), (6, 5.0), (8, 5.0)] {
            let cat = uniform_spectral_points(a, n).unwrap();
            for e in cat.iter().filter(|e| e.family != "c_unit") {
                let m = e.m.unwrap();
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let p = &e.point;
                assert!((p.delta - sign * 2.0 * p.d).norm() <= 1e-9 * 2.0 * p.d);
            }
            let dbl = cat.iter().find(|e| e.family == "s" && e.m == Some(1)).unwrap();
            assert_eq!(dbl.point.kind, SpectralKind::Double, "n={n}");
            assert_eq!(dbl.point.algebraic_multiplicity, 2);
            assert_eq!(dbl.point.geometric_multiplicity, Some(2));
            assert!(dbl.point.z.re > 1.0 && dbl.point.z.im == 0.0);
            let m0 = cat.iter().find(|e| e.family == "s" && e.m == Some(0)).unwrap();
            assert_eq!(m0.point.kind, SpectralKind::Periodic);
            let rho = 1.0 + a * a / (n * n) as f64;
            assert!((m0.point.z.re - (rho.sqrt() + (rho - 1.0).sqrt())).abs() < 1e-14);
        }
    }

    #[test]
    fn n3_double_point_derivative() {
        let u = UniformSpectrum::new(6.0, 3);
        let z = u.z_s(1);
        let (_, d1, _) = discriminant_with_derivatives(z, &uniform(6.0, 3)).unwrap();
        assert!(d1.norm() <= 1e-9);
    }

    #[test]
    fn multiplicity_four_at_window_edge() {
        for n in [3usize, 6, 8] {
            let a = amplitude_window(n).lower;
            let p = classify_spectral_point(C64::new(1.0, 0.0), &uniform(a, n), &Default::default())
                .unwrap();
            assert_eq!(p.kind, SpectralKind::Multiple, "n={n}: {p:?}");
            assert_eq!(p.algebraic_multiplicity, 4);
        }
    }

    #[test]
    fn classification_is_idempotent() {
        let st = uniform(5.0, 6);
        for e in uniform_spectral_points(5.0, 6).unwrap() {
            let again = classify_spectral_point(e.point.z, &st, &Default::default()).unwrap();
            assert_eq!(again.kind, e.point.kind);
        }
    }

    #[test]
    fn newton_finds_double_point() {
        let (a, n) = (5.0, 6);
        let u = UniformSpectrum::new(a, n);
        let zd = u.z_s(1);
        let res = find_critical_points(&uniform(a, n), &[zd * 1.01], &Default::default()).unwrap();
        assert_eq!(res.points.len(), 1);
        assert!((res.points[0].z - zd).norm() < 1e-10);
        assert_eq!(res.points[0].kind, SpectralKind::Double);
    }

    #[test]
    fn zero_state_critical_points_are_roots_of_unity() {
        let st = LatticeState::zeros(LatticeSize::new(5).unwrap());
        let seeds: Vec<C64> = (0..10)
            .map(|k| C64::from_polar(1.0, (k as f64 + 0.3) * PI / 5.0))
            .collect();
        let res = find_critical_points(&st, &seeds, &Default::default()).unwrap();
        assert!(!res.points.is_empty());
        for p in &res.points {
            assert!((p.z.powu(10) - 1.0).norm() < 1e-10);
        }
        // Deduplicated.
        for (i, p) in res.points.iter().enumerate() {
            for r in &res.points[i + 1..] {
                assert!((p.z - r.z).norm() > 1e-6);
            }
        }
    }

    #[test]
    fn critical_points_move_continuously() {
        let (a, n) = (5.0, 6);
        let size = LatticeSize::new(n).unwrap();
        let zd = UniformSpectrum::new(a, n).z_s(1);
        let mut prev = 0.0;
        for b1 in [1e-4, 1e-3, 1e-2] {
            let vt = crate::lattice::vtheta_angle(a, n).unwrap();
            let bc = crate::lattice::BlockCoords {
                a,
                gamma: 0.0,
                b1,
                b2: 0.0,
                c: vec![C64::new(0.0, 0.0); size.m() - 1],
                vtheta: vt,
            };
            let st = crate::lattice::from_block_coords(&bc, size).unwrap();
            let z = newton_critical(&st, zd).unwrap();
            let dist = (z - zd).norm();
            assert!(dist < 50.0 * b1, "b1={b1} dist={dist}");
            assert!(dist > prev);
            prev = dist;
        }
    }

    #[test]
    fn default_seeds_include_double_point() {
        let st = uniform(5.0, 6);
        let zd = UniformSpectrum::new(5.0, 6).z_s(1);
        assert!(default_seeds(&st).iter().any(|s| (s - zd).norm() < 1e-12));
    }
}
