//! Melnikov function of the invariant F̃₁ along the even heteroclinic orbits,
//! its coefficients (f₁, f₂), the ratio κ, the zero surface in γ₀ and
//! transversality scans.
//!
//! With ∂F̃₁/∂r_n taken as the negated r-component of the even Melnikov
//! vector, integrand_k(t) = Σ_n Im{∂F̃₁/∂r_n · g⁽ᵏ⁾_n(Q(t))},
//! f_k = ∫ integrand_k dt and M = 2(α₁f₁ + α₂f₂).

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::darboux::{even_heteroclinic_orbit, even_melnikov_vector, Ear, OrbitParams};
use crate::error::{Error, Result};
use crate::lattice::perturbation_terms_raw;
use crate::quadrature::{integrate, QuadratureSpec};

/// (integrand₁, integrand₂) at time t on the orbit selected by `params`.
pub fn melnikov_integrand(t: f64, params: &OrbitParams) -> Result<[f64; 2]> {
    let q = even_heteroclinic_orbit(params, t)?;
    let v = even_melnikov_vector(params, t);
    let (g1, g2) = perturbation_terms_raw(&q);
    let mut out = [0.0; 2];
    for (k, vr) in v.dr.iter().enumerate() {
        let d = -vr;
        out[0] += (d * g1[k]).im;
        out[1] += (d * g2[k]).im;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MelnikovCoefficients {
    pub f1: f64,
    pub f2: f64,
    pub a: f64,
    pub gamma: f64,
    pub omega: f64,
    pub n: usize,
    pub p: f64,
    pub ear: Ear,
    /// Half-width of the integration window around t = -p/μ.
    pub truncation_t: f64,
    /// Quadrature error estimate plus the analytic tail bound.
    pub quad_error: f64,
    /// Requested absolute tolerance.
    pub tol: f64,
}

impl MelnikovCoefficients {
    /// M = 2(α₁f₁ + α₂f₂).
    pub fn m(&self, alpha1: f64, alpha2: f64) -> f64 {
        2.0 * (alpha1 * self.f1 + alpha2 * self.f2)
    }
}

/// Envelope constant C with |integrand_k(t)| ≤ C sech(2μt + 2p), estimated
/// from samples and padded by a factor of 2.
fn envelope(params: &OrbitParams) -> Result<f64> {
    let tc = -params.p / params.mu;
    let mut c: f64 = 0.0;
    for k in -8..=8 {
        let t = tc + k as f64 * 0.5 / params.mu;
        let v = melnikov_integrand(t, params)?;
        c = c.max(v[0].abs().max(v[1].abs()) * params.tau(t).cosh());
    }
    Ok(2.0 * c)
}

/// Window half-width so that the two tails together stay below `tail`.
fn truncation(params: &OrbitParams, c: f64, tail: f64) -> f64 {
    // ∫_T^∞ C sech(2μs) ds ≤ (C/μ) e^{-2μT} per side.
    let mu = params.mu;
    let t = if c > 0.0 {
        (2.0 * c / (mu * tail)).ln() / (2.0 * mu)
    } else {
        0.0
    };
    t.max(1.0 / mu)
}

/// Coefficients with a user-supplied quadrature spec; `spec.tol` is the
/// requested absolute tolerance on each f_k.
pub fn melnikov_coefficients_with(params: &OrbitParams, spec: &QuadratureSpec) -> Result<MelnikovCoefficients> {
    let c = envelope(params)?;
    let tail = spec.tol / 10.0;
    let half = truncation(params, c, tail);
    let tc = -params.p / params.mu;
    let inner = QuadratureSpec {
        tol: spec.tol - tail,
        ..*spec
    };
    let r = integrate(
        |t| melnikov_integrand(t, params).unwrap_or([f64::NAN; 2]),
        tc - half,
        tc + half,
        &inner,
    )?;
    if !r.value.iter().all(|v| v.is_finite()) {
        return Err(Error::ToleranceNotMet("non-finite Melnikov integrand".into()));
    }
    Ok(MelnikovCoefficients {
        f1: r.value[0],
        f2: r.value[1],
        a: params.a,
        gamma: params.gamma,
        omega: params.omega,
        n: params.n,
        p: params.p,
        ear: params.ear,
        truncation_t: half,
        quad_error: r.error + tail,
        tol: spec.tol,
    })
}

pub fn melnikov_coefficients(params: &OrbitParams, tol: f64) -> Result<MelnikovCoefficients> {
    melnikov_coefficients_with(
        params,
        &QuadratureSpec {
            tol,
            ..Default::default()
        },
    )
}

/// κ = −f₂/(4ω f₁), so that M = 0 reads α₁ − 4ωκα₂ = 0.
pub fn kappa(coeffs: &MelnikovCoefficients) -> Result<f64> {
    let threshold = (1e-12 * (coeffs.f1.abs() + coeffs.f2.abs())).max(10.0 * coeffs.tol);
    if coeffs.f1.abs() <= threshold {
        return Err(Error::DegenerateF1 { f1: coeffs.f1 });
    }
    Ok(-coeffs.f2 / (4.0 * coeffs.omega * coeffs.f1))
}

/// M(a₀, γ₀) at fixed (α, ω, N, ear) with p = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MelnikovSurface {
    pub a0: f64,
    pub omega: f64,
    pub n: usize,
    pub ear: Ear,
    pub alpha: (f64, f64),
    /// Absolute quadrature tolerance for each f_k.
    pub tol: f64,
    /// 2(|α₁| max|f₁| + |α₂| max|f₂|) over the γ samples.
    pub scale: f64,
    /// (γ_k, M(γ_k)) on 16 equispaced samples of [0, 2π).
    pub samples: Vec<(f64, f64)>,
}

const SURFACE_SAMPLES: usize = 16;

impl MelnikovSurface {
    pub fn new(a0: f64, alpha: (f64, f64), omega: f64, n: usize, ear: Ear) -> Result<Self> {
        let base = OrbitParams::new(a0, omega, 0.0, 0.0, ear, n)?;
        // Absolute tolerance relative to the integrand envelope.
        let c = envelope(&base)?;
        let tol = (1e-13 * c * PI / (2.0 * base.mu)).max(1e-300);
        let mut surf = MelnikovSurface {
            a0,
            omega,
            n,
            ear,
            alpha,
            tol,
            scale: 0.0,
            samples: Vec::new(),
        };
        let mut max_f = (0.0f64, 0.0f64);
        let mut samples = Vec::with_capacity(SURFACE_SAMPLES);
        for k in 0..SURFACE_SAMPLES {
            let g = 2.0 * PI * k as f64 / SURFACE_SAMPLES as f64;
            let f = surf.coefficients(g)?;
            max_f = (max_f.0.max(f.f1.abs()), max_f.1.max(f.f2.abs()));
            samples.push((g, f.m(alpha.0, alpha.1)));
        }
        surf.scale = 2.0 * (alpha.0.abs() * max_f.0 + alpha.1.abs() * max_f.1);
        surf.samples = samples;
        Ok(surf)
    }

    pub fn orbit(&self, gamma: f64) -> Result<OrbitParams> {
        OrbitParams::new(self.a0, self.omega, gamma, 0.0, self.ear, self.n)
    }

    pub fn coefficients(&self, gamma: f64) -> Result<MelnikovCoefficients> {
        melnikov_coefficients(&self.orbit(gamma)?, self.tol)
    }

    pub fn m(&self, gamma: f64) -> Result<f64> {
        Ok(self.coefficients(gamma)?.m(self.alpha.0, self.alpha.1))
    }
}

/// Central difference estimate with its Richardson error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DerivativeEstimate {
    pub value: f64,
    pub richardson_error: f64,
}

fn fourth_order(surface: &MelnikovSurface, g: f64, h: f64) -> Result<f64> {
    let m = |x: f64| surface.m(x);
    Ok((-m(g + 2.0 * h)? + 8.0 * m(g + h)? - 8.0 * m(g - h)? + m(g - 2.0 * h)?) / (12.0 * h))
}

pub const DERIVATIVE_STEP: f64 = 1e-4;

/// ∂M/∂γ₀ by the fourth-order central difference with step 10⁻⁴, checked
/// against the halved step.
pub fn dm_dgamma(surface: &MelnikovSurface, gamma0: f64) -> Result<DerivativeEstimate> {
    let d1 = fourth_order(surface, gamma0, DERIVATIVE_STEP)?;
    let d2 = fourth_order(surface, gamma0, 0.5 * DERIVATIVE_STEP)?;
    Ok(DerivativeEstimate {
        value: d2 + (d2 - d1) / 15.0,
        richardson_error: (d2 - d1).abs() / 15.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ZeroSurfaceSample {
    pub a0: f64,
    pub gamma0: f64,
    pub residual_m: f64,
    pub dm_dgamma0: f64,
    pub scale: f64,
    pub iterations: usize,
}

pub const ROOT_TOL: f64 = 1e-10;
pub const DEGENERACY_TOL: f64 = 1e-8;

fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

enum Candidate {
    Exact(f64),
    Bracket(f64, f64, f64),
}

/// Root γ₀ ∈ [0, 2π) of M(a₀, ·) nearest the seed.
pub fn solve_zero_surface(surface: &MelnikovSurface, gamma_seed: f64) -> Result<ZeroSurfaceSample> {
    let tol = ROOT_TOL * surface.scale;
    let s = &surface.samples;
    let k = s.len();
    let mut cands = Vec::new();
    for i in 0..k {
        let (g0, m0) = s[i];
        let (g1, m1) = s[(i + 1) % k];
        let g1 = if i + 1 == k { g1 + 2.0 * PI } else { g1 };
        if m0.abs() <= tol {
            cands.push((circ_dist(g0, gamma_seed), Candidate::Exact(g0)));
        } else if m1.abs() > tol && m0 * m1 < 0.0 {
            let mid = 0.5 * (g0 + g1);
            cands.push((circ_dist(mid, gamma_seed), Candidate::Bracket(g0, m0, g1)));
        }
    }
    let best = cands
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or(Error::NoRoot)?
        .1;
    let (gamma0, residual, iterations) = match best {
        Candidate::Exact(g) => (g, surface.m(g)?, 0),
        Candidate::Bracket(mut lo, mut mlo, mut hi) => {
            let seed = {
                let shifted = lo + (gamma_seed - lo).rem_euclid(2.0 * PI);
                if shifted > lo && shifted < hi {
                    shifted
                } else {
                    0.5 * (lo + hi)
                }
            };
            let mut x = seed;
            let mut mx = surface.m(x)?;
            let mut it = 0;
            while mx.abs() > tol && it < 100 {
                it += 1;
                if mx * mlo < 0.0 {
                    hi = x;
                } else {
                    lo = x;
                    mlo = mx;
                }
                let d = dm_dgamma(surface, x)?.value;
                let newton = x - mx / d;
                x = if d != 0.0 && newton > lo && newton < hi {
                    newton
                } else {
                    0.5 * (lo + hi)
                };
                mx = surface.m(x)?;
                if hi - lo < 1e-15 {
                    break;
                }
            }
            (x.rem_euclid(2.0 * PI), mx, it)
        }
    };
    let d = dm_dgamma(surface, gamma0)?.value;
    if d.abs() < DEGENERACY_TOL * surface.scale {
        return Err(Error::DegenerateRoot {
            gamma0,
            derivative: d.abs(),
        });
    }
    Ok(ZeroSurfaceSample {
        a0: surface.a0,
        gamma0,
        residual_m: residual,
        dm_dgamma0: d,
        scale: surface.scale,
        iterations,
    })
}

/// One cell of a transversality scan.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ScanCell {
    pub a0: f64,
    pub gamma: f64,
    pub m: f64,
    pub dm_dgamma: f64,
    pub root: Option<ZeroSurfaceSample>,
    /// A nondegenerate root was found from this seed.
    pub transversal: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TransversalityScan {
    pub alpha: (f64, f64),
    pub omega: f64,
    pub n: usize,
    pub ear: Ear,
    pub cells: Vec<ScanCell>,
    pub transversal_cells: usize,
    /// Range of a₀ over which every seed produced a transversal root.
    pub transversal_a0_range: Option<(f64, f64)>,
}

/// M, ∂M/∂γ₀ and the nearest root for every (a₀, γ) grid point.
pub fn transversality_scan(
    a_grid: &[f64],
    gamma_grid: &[f64],
    alpha: (f64, f64),
    omega: f64,
    n: usize,
    ear: Ear,
) -> Result<TransversalityScan> {
    if a_grid.is_empty() || gamma_grid.is_empty() {
        return Err(Error::InvalidParameter("scan grids must be nonempty".into()));
    }
    let surfaces: Vec<Result<MelnikovSurface>> = a_grid
        .par_iter()
        .map(|&a| MelnikovSurface::new(a, alpha, omega, n, ear))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..a_grid.len())
        .flat_map(|i| (0..gamma_grid.len()).map(move |j| (i, j)))
        .collect();
    let cells: Vec<ScanCell> = jobs
        .par_iter()
        .map(|&(i, j)| {
            let (a0, gamma) = (a_grid[i], gamma_grid[j]);
            let fail = |e: Error| ScanCell {
                a0,
                gamma,
                m: f64::NAN,
                dm_dgamma: f64::NAN,
                root: None,
                transversal: false,
                error: Some(e.to_string()),
            };
            let surf = match &surfaces[i] {
                Ok(s) => s,
                Err(e) => return fail(e.clone()),
            };
            let m = match surf.m(gamma) {
                Ok(v) => v,
                Err(e) => return fail(e),
            };
            let d = match dm_dgamma(surf, gamma) {
                Ok(v) => v.value,
                Err(e) => return fail(e),
            };
            let (root, error) = match solve_zero_surface(surf, gamma) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let transversal = root.is_some_and(|r| r.dm_dgamma0.abs() >= DEGENERACY_TOL * r.scale);
            ScanCell {
                a0,
                gamma,
                m,
                dm_dgamma: d,
                root,
                transversal,
                error,
            }
        })
        .collect();
    let transversal_cells = cells.iter().filter(|c| c.transversal).count();
    let mut good: Vec<f64> = a_grid
        .iter()
        .enumerate()
        .filter(|(i, _)| {
            cells[i * gamma_grid.len()..(i + 1) * gamma_grid.len()]
                .iter()
                .all(|c| c.transversal)
        })
        .map(|(_, &a)| a)
        .collect();
    good.sort_by(f64::total_cmp);
    Ok(TransversalityScan {
        alpha,
        omega,
        n,
        ear,
        cells,
        transversal_cells,
        transversal_a0_range: good.first().map(|&lo| (lo, *good.last().unwrap())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::darboux::even_heteroclinic_orbit;
    use crate::floquet::discriminant;
    use crate::lattice::{perturbed_rhs_into, PerturbationParams};
    use crate::linalg::C64;

    fn orbit(gamma: f64, p: f64, ear: Ear) -> OrbitParams {
        OrbitParams::new(5.0, 1.3, gamma, p, ear, 6).unwrap()
    }

    #[test]
    fn integrand_is_rate_of_invariant() {
        // dF̃₁/dt along the perturbation part of the field equals 2(α₁I₁ + α₂I₂).
        let (a1, a2) = (0.7, -0.3);
        for ear in [Ear::Plus, Ear::Minus] {
            let p = orbit(0.4, 0.0, ear);
            for t in [-0.03, 0.0, 0.02] {
                let q = even_heteroclinic_orbit(&p, t).unwrap();
                let pert = PerturbationParams {
                    epsilon: 1.0,
                    alpha1: a1,
                    alpha2: a2,
                };
                let mut full = vec![C64::new(0.0, 0.0); 6];
                let mut free = vec![C64::new(0.0, 0.0); 6];
                perturbed_rhs_into(&q, p.omega, &pert, &mut full);
                perturbed_rhs_into(&q, p.omega, &PerturbationParams::default(), &mut free);
                let dir: Vec<C64> = full.iter().zip(&free).map(|(x, y)| x - y).collect();
                let e = 1e-7;
                let f = |s: f64| {
                    let moved: Vec<C64> = q.iter().zip(&dir).map(|(x, d)| x + s * d).collect();
                    discriminant(C64::new(p.z, 0.0), &moved).unwrap().delta_tilde
                };
                let rate = (f(e) - f(-e)) / (2.0 * e);
                let v = melnikov_integrand(t, &p).unwrap();
                let expect = 2.0 * (a1 * v[0] + a2 * v[1]);
                assert!(rate.im.abs() < 1e-6 * rate.re.abs().max(1.0));
                assert!((rate.re - expect).abs() < 1e-6 * expect.abs().max(1.0), "{rate} vs {expect}");
            }
        }
    }

    #[test]
    fn integrand_decays_with_sech_envelope() {
        let p = orbit(0.9, 0.0, Ear::Plus);
        let c = envelope(&p).unwrap();
        for k in 0..40 {
            let t = -10.0 / p.mu + 0.5 * k as f64 / p.mu;
            let v = melnikov_integrand(t, &p).unwrap();
            let bound = c / p.tau(t).cosh();
            assert!(v[0].abs() <= bound && v[1].abs() <= bound, "t={t}");
        }
    }

    #[test]
    fn gamma_structure() {
        // f₁ ∝ sin γ and f₂ ∝ sin 2γ.
        let tol = 1e-10;
        let base1 = melnikov_coefficients(&orbit(PI / 2.0, 0.0, Ear::Plus), tol).unwrap();
        let base2 = melnikov_coefficients(&orbit(PI / 4.0, 0.0, Ear::Plus), tol).unwrap();
        for g in [0.3, 1.1, 2.5, 4.0] {
            let c = melnikov_coefficients(&orbit(g, 0.0, Ear::Plus), tol).unwrap();
            assert!((c.f1 - base1.f1 * g.sin()).abs() < 1e-8 * base1.f1.abs());
            assert!((c.f2 - base2.f2 * (2.0 * g).sin()).abs() < 1e-8 * base2.f2.abs());
        }
        let z = melnikov_coefficients(&orbit(0.0, 0.0, Ear::Plus), tol).unwrap();
        assert!(matches!(kappa(&z), Err(Error::DegenerateF1 { .. })));
    }

    #[test]
    fn truncation_and_panel_doubling() {
        let p = orbit(1.1, 0.0, Ear::Minus);
        let tol = 1e-10;
        let c = melnikov_coefficients(&p, tol).unwrap();
        let more = melnikov_coefficients_with(
            &p,
            &QuadratureSpec {
                tol,
                initial_panels: 16,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((c.f1 - more.f1).abs() < tol && (c.f2 - more.f2).abs() < tol);
        let tc = -p.p / p.mu;
        let t = 2.0 * c.truncation_t;
        let wide = integrate(
            |s| melnikov_integrand(s, &p).unwrap(),
            tc - t,
            tc + t,
            &QuadratureSpec {
                tol: tol / 10.0,
                initial_panels: 16,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((c.f1 - wide.value[0]).abs() < tol && (c.f2 - wide.value[1]).abs() < tol);
        assert!(c.quad_error < tol);
    }

    #[test]
    fn p_shift_is_gamma_shift() {
        let tol = 1e-10;
        let (a, om) = (5.0, 1.3);
        for delta in [0.3, -0.7] {
            let base = OrbitParams::new(a, om, 0.8, 0.0, Ear::Plus, 6).unwrap();
            let shifted = base.with_p(delta);
            let dg = 2.0 * (a * a - om * om) * delta / base.mu;
            let rotated = base.with_gamma(0.8 + dg);
            let c1 = melnikov_coefficients(&shifted, tol).unwrap();
            let c2 = melnikov_coefficients(&rotated, tol).unwrap();
            assert!((c1.f1 - c2.f1).abs() < 10.0 * tol, "{} {}", c1.f1, c2.f1);
            assert!((c1.f2 - c2.f2).abs() < 10.0 * tol);
        }
        // At a = ω the orbit has no carrier rotation and p drops out.
        let base = OrbitParams::new(5.0, 5.0, 0.8, 0.0, Ear::Plus, 6).unwrap();
        let c0 = melnikov_coefficients(&base, tol).unwrap();
        let c1 = melnikov_coefficients(&base.with_p(0.9), tol).unwrap();
        assert!((c0.f1 - c1.f1).abs() < 10.0 * tol && (c0.f2 - c1.f2).abs() < 10.0 * tol);
    }

    #[test]
    fn kappa_balances_alpha() {
        let c = melnikov_coefficients(&orbit(1.0, 0.0, Ear::Plus), 1e-11).unwrap();
        let k = kappa(&c).unwrap();
        for a2 in [1.0, -0.3, 2.5] {
            let a1 = 4.0 * c.omega * k * a2;
            assert!(c.m(a1, a2).abs() <= 1e-8 * (c.f1.abs() + c.f2.abs()));
        }
    }

    #[test]
    fn zero_surface_roots() {
        let surf = MelnikovSurface::new(5.0, (0.2, 1.0), 1.3, 6, Ear::Plus).unwrap();
        for seed in [0.2, 1.5, 2.0, 3.0, 4.5, 5.8] {
            let r = solve_zero_surface(&surf, seed).unwrap();
            assert!(r.residual_m.abs() <= ROOT_TOL * surf.scale);
            assert!(r.dm_dgamma0.abs() > DEGENERACY_TOL * surf.scale);
            let c = surf.coefficients(r.gamma0).unwrap();
            if let Ok(k) = kappa(&c) {
                let lhs = surf.alpha.0 - 4.0 * surf.omega * k * surf.alpha.1;
                assert!(lhs.abs() <= 1e-8 * (surf.alpha.0.abs() + surf.alpha.1.abs()));
            }
        }
        let d = dm_dgamma(&surf, 1.0).unwrap();
        assert!(d.richardson_error <= 1e-6 * surf.scale);
    }

    #[test]
    fn derivative_integrates_to_zero_over_period() {
        let surf = MelnikovSurface::new(5.0, (0.2, 1.0), 1.3, 6, Ear::Minus).unwrap();
        let n = 24;
        let s: f64 = (0..n)
            .map(|k| dm_dgamma(&surf, 2.0 * PI * k as f64 / n as f64).unwrap().value)
            .sum::<f64>()
            * 2.0
            * PI
            / n as f64;
        assert!(s.abs() < 1e-8 * surf.scale);
    }

    #[test]
    fn no_root_when_m_has_fixed_sign() {
        let mut surf = MelnikovSurface::new(5.0, (1.0, 0.0), 1.3, 6, Ear::Plus).unwrap();
        for s in surf.samples.iter_mut() {
            s.1 = 1.0 + s.1.abs();
        }
        assert!(matches!(solve_zero_surface(&surf, 1.0), Err(Error::NoRoot)));
    }

    #[test]
    fn scan_is_deterministic() {
        let a = [4.5, 5.0];
        let g = [0.5, 2.0, 4.0];
        let s1 = transversality_scan(&a, &g, (0.2, 1.0), 1.3, 6, Ear::Plus).unwrap();
        let s2 = transversality_scan(&a, &g, (0.2, 1.0), 1.3, 6, Ear::Plus).unwrap();
        assert_eq!(s1, s2);
        for c in &s1.cells {
            if c.transversal {
                let r = c.root.unwrap();
                assert!(r.dm_dgamma0.abs() >= DEGENERACY_TOL * r.scale);
            }
        }
    }
}
