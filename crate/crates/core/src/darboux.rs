//! Bäcklund-Darboux transformation of the uniform solution, the resulting
//! heteroclinic orbits and the Melnikov vectors carried along them.
//!
//! Orbits are based at q_c(t) = a e^{-i[2(a²-ω²)t - γ]} and built from the
//! first double point z_d (β = π/N). The free phase ϑ selects the ear;
//! ϑ = -β and ϑ = -β + π give even orbits.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::floquet::{transfer_matrix, uniform_bloch_functions, Gradient};
use crate::lattice::{amplitude_window, uniform_orbit, LatticeState};
use crate::linalg::C64;

const I: C64 = C64::new(0.0, 1.0);

/// Which ear of the figure eight an even orbit traverses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Ear {
    Plus,
    Minus,
}

impl Ear {
    pub fn sign(self) -> f64 {
        match self {
            Ear::Plus => 1.0,
            Ear::Minus => -1.0,
        }
    }

    pub fn from_sign(s: i32) -> Result<Ear> {
        match s {
            1 => Ok(Ear::Plus),
            -1 => Ok(Ear::Minus),
            _ => Err(Error::InvalidParameter(format!("ear must be +1 or -1, got {s}"))),
        }
    }
}

/// Parameters of the orbit family homoclinic to the circle of radius a.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OrbitParams {
    pub a: f64,
    pub omega: f64,
    pub gamma: f64,
    pub p: f64,
    pub ear: Ear,
    pub n: usize,
    pub h: f64,
    pub beta: f64,
    pub rho: f64,
    /// √(ρcos²β − 1).
    pub s: f64,
    /// Double point z_d.
    pub z: f64,
    pub mu: f64,
    pub phi: f64,
}

impl OrbitParams {
    pub fn new(a: f64, omega: f64, gamma: f64, p: f64, ear: Ear, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::LatticeTooSmall(n));
        }
        let w = amplitude_window(n);
        if !w.contains(a) {
            return Err(Error::InvalidParameter(format!(
                "a = {a} lies outside the amplitude window ({}, {}) for N = {n}",
                w.lower, w.upper
            )));
        }
        let nf = n as f64;
        let h = 1.0 / nf;
        let beta = PI / nf;
        let rho = 1.0 + h * h * a * a;
        let s2 = rho * beta.cos().powi(2) - 1.0;
        if s2 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rho cos^2(beta) - 1 = {s2} is not positive"
            )));
        }
        let s = s2.sqrt();
        let z = rho.sqrt() * beta.cos() + s;
        let mu = 2.0 / (h * h) * rho.sqrt() * beta.sin() * s;
        let phi = (rho.sqrt() * beta.sin() / (h * a)).asin();
        Ok(OrbitParams {
            a,
            omega,
            gamma,
            p,
            ear,
            n,
            h,
            beta,
            rho,
            s,
            z,
            mu,
            phi,
        })
    }

    /// ϑ = -β for the plus ear, -β + π for the minus ear.
    pub fn vtheta(&self) -> f64 {
        match self.ear {
            Ear::Plus => -self.beta,
            Ear::Minus => -self.beta + PI,
        }
    }

    /// 2μt + 2p.
    pub fn tau(&self, t: f64) -> f64 {
        2.0 * self.mu * t + 2.0 * self.p
    }

    pub fn q_c(&self, t: f64) -> C64 {
        uniform_orbit(self.a, self.omega, self.gamma, t)
    }

    /// θ = (a² − ω²)t − γ/2, so that q_c = a e^{-2iθ}.
    fn theta(&self, t: f64) -> f64 {
        (self.a * self.a - self.omega * self.omega) * t - 0.5 * self.gamma
    }

    pub fn with_p(&self, p: f64) -> Self {
        OrbitParams { p, ..*self }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        OrbitParams { gamma, ..*self }
    }
}

/// Spectral data of a single Darboux step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarbouxParams {
    pub zd: C64,
    /// c₊/c₋ = i e^{2p} e^{iϑ}.
    pub cplus_over_cminus: C64,
}

impl DarbouxParams {
    pub fn new(zd: C64, p: f64, vtheta: f64) -> Result<Self> {
        if ((zd.norm() - 1.0).abs()) <= 1e-14 {
            return Err(Error::InvalidParameter(format!(
                "double point {zd} lies on the unit circle"
            )));
        }
        Ok(DarbouxParams {
            zd,
            cplus_over_cminus: I * (2.0 * p).exp() * C64::from_polar(1.0, vtheta),
        })
    }
}

/// Entries (a_n, b_n, c_n, d_n) of the dressing matrix and its scalar Δ_n.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarbouxCoefficients {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
    pub delta: C64,
}

fn coefficients_at(phi: [C64; 2], zd: C64, site: usize) -> Result<DarbouxCoefficients> {
    let (p1, p2) = (phi[0], phi[1]);
    let (n1, n2) = (p1.norm_sqr(), p2.norm_sqr());
    if n1 + n2 == 0.0 {
        return Err(Error::ZeroEigenfunction(site));
    }
    let zb = zd.conj();
    let az2 = zd.norm_sqr();
    let delta = -(n1 + az2 * n2) / zb;
    let bracket = n2 + az2 * n1;
    let k = az2 * az2 - 1.0;
    Ok(DarbouxCoefficients {
        a: zd / (zb * zb * delta) * bracket,
        b: k / (zb * zb * delta) * p1 * p2.conj(),
        c: k / (zd * zb * delta) * p1.conj() * p2,
        d: -bracket / (zd * delta),
        delta,
    })
}

pub fn darboux_coefficients(phi: [C64; 2], zd: C64) -> Result<DarbouxCoefficients> {
    coefficients_at(phi, zd, 0)
}

/// Largest relative residual of φ_{n+1} = L_n(z) φ_n.
pub fn eigenfunction_residual(q: &[C64], z: C64, phi: &[[C64; 2]]) -> Result<f64> {
    let n = q.len();
    if phi.len() != n + 1 {
        return Err(Error::LengthMismatch {
            expected: n + 1,
            got: phi.len(),
        });
    }
    let h = 1.0 / n as f64;
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let next = transfer_matrix(z, q[k], h)?.apply(phi[k]);
        let num = ((next[0] - phi[k + 1][0]).norm_sqr() + (next[1] - phi[k + 1][1]).norm_sqr()).sqrt();
        let den = (phi[k + 1][0].norm_sqr() + phi[k + 1][1].norm_sqr()).sqrt();
        worst = worst.max(num / den.max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

pub const EIGENFUNCTION_RESIDUAL_LIMIT: f64 = 1e-8;

/// Q_n = (i/h) b_{n+1} − a_{n+1} q_n for an eigenfunction φ_0…φ_N at z_d.
pub fn darboux_transform(q: &[C64], zd: C64, phi: &[[C64; 2]]) -> Result<Vec<C64>> {
    let residual = eigenfunction_residual(q, zd, phi)?;
    if residual > EIGENFUNCTION_RESIDUAL_LIMIT {
        return Err(Error::EigenfunctionResidualTooLarge {
            residual,
            limit: EIGENFUNCTION_RESIDUAL_LIMIT,
        });
    }
    let h = 1.0 / q.len() as f64;
    q.iter()
        .enumerate()
        .map(|(k, &qk)| {
            let c = coefficients_at(phi[k + 1], zd, k + 1)?;
            Ok(I / h * c.b - c.a * qk)
        })
        .collect()
}

/// c₊ψ⁺ + c₋ψ⁻ at z_d on the uniform solution, with c₊ = i e^{2p} e^{iϑ}.
pub fn uniform_eigenfunction(
    params: &OrbitParams,
    vtheta: f64,
    t: f64,
    cminus: C64,
) -> Result<Vec<[C64; 2]>> {
    let z = C64::new(params.z, 0.0);
    let pair = uniform_bloch_functions(z, params.a, params.omega, params.gamma, t, params.n)?;
    let cp = I * (2.0 * params.p).exp() * C64::from_polar(1.0, vtheta);
    Ok(pair
        .psi_plus
        .iter()
        .zip(&pair.psi_minus)
        .map(|(u, v)| [cp * u[0] + cminus * v[0], cp * u[1] + cminus * v[1]])
        .collect())
}

/// Closed-form heteroclinic orbit for arbitrary ϑ.
pub fn heteroclinic_orbit(params: &OrbitParams, vtheta: f64, t: f64) -> Vec<C64> {
    let tau = params.tau(t);
    let (se, ta) = (1.0 / tau.cosh(), tau.tanh());
    let (b, s, phi) = (params.beta, params.s, params.phi);
    let ha = params.h * params.a;
    let qc = params.q_c(t);
    (0..params.n)
        .map(|k| {
            let nf = k as f64;
            let e = ha * b.cos() + s * se * ((2.0 * nf + 1.0) * b + vtheta).cos();
            let a = ha * b.cos() + s * se * ((2.0 * nf + 3.0) * b + vtheta).cos();
            let bb = C64::new(phi.cos() + se * (2.0 * (nf + 1.0) * b + vtheta).cos(), phi.sin() * ta);
            qc / e * (a - 2.0 * b.cos() * s * bb)
        })
        .collect()
}

/// Λ_n = 1 ± (cosφ/cosβ) sech(τ) cos(2nβ).
fn lambda_n(params: &OrbitParams, se: f64, k: usize) -> f64 {
    1.0 + params.ear.sign() * params.phi.cos() / params.beta.cos()
        * se
        * (2.0 * k as f64 * params.beta).cos()
}

/// Even heteroclinic orbit Q_n = q_c(Γ/Λ_n − 1).
pub fn even_heteroclinic_orbit(params: &OrbitParams, t: f64) -> Result<LatticeState> {
    let tau = params.tau(t);
    let (se, ta) = (1.0 / tau.cosh(), tau.tanh());
    let phi = params.phi;
    let g = C64::new(1.0 - (2.0 * phi).cos(), -(2.0 * phi).sin() * ta);
    let qc = params.q_c(t);
    let q = (0..params.n)
        .map(|k| {
            let l = lambda_n(params, se, k);
            if l.abs() <= 1e-300 {
                return Err(Error::PoleInLambda(k));
            }
            Ok(qc * (g / l - 1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    LatticeState::symmetrized(&q)
}

/// (K̂, K̂⁽ᵉ⁾): prefactors of the general and even Melnikov vectors.
pub fn melnikov_prefactors(params: &OrbitParams) -> (f64, f64) {
    let nf = params.n as f64;
    let z = params.z;
    let common = -2.0 * nf * (1.0 - z.powi(4)) / (8.0 * params.rho.powf(1.5) * z * z) * params.s;
    (common * params.h * params.h * params.a, common / params.a)
}

/// Melnikov vector (δF̃/δQ_n, δF̃/δR_n) up to the overall sign convention,
/// on the orbit with free ϑ.
pub fn melnikov_vector(params: &OrbitParams, vtheta: f64, t: f64) -> Gradient {
    let tau = params.tau(t);
    let (se, ta) = (1.0 / tau.cosh(), tau.tanh());
    let (b, s, phi) = (params.beta, params.s, params.phi);
    let ha = params.h * params.a;
    let (k, _) = melnikov_prefactors(params);
    let e2 = C64::from_polar(1.0, 2.0 * params.theta(t));
    let mut dq = Vec::with_capacity(params.n);
    let mut dr = Vec::with_capacity(params.n);
    for j in 0..params.n {
        let nf = j as f64;
        let e = ha * b.cos() + s * se * ((2.0 * nf - 1.0) * b + vtheta).cos();
        let a = ha * b.cos() + s * se * ((2.0 * nf + 3.0) * b + vtheta).cos();
        let arg = (2.0 * nf + 1.0) * b + vtheta;
        let x1 = C64::new(b.cos() * se + (arg + phi).cos(), -ta * (arg + phi).sin()) * e2;
        let x2 = C64::new(b.cos() * se + (arg - phi).cos(), -ta * (arg - phi).sin()) * e2.conj();
        let f = k / (e * a) * se;
        dq.push(f * x1);
        dr.push(-f * x2);
    }
    Gradient { dq, dr }
}

/// Even Melnikov vector on the orbit selected by `params.ear`.
pub fn even_melnikov_vector(params: &OrbitParams, t: f64) -> Gradient {
    let tau = params.tau(t);
    let (se, ta) = (1.0 / tau.cosh(), tau.tanh());
    let (b, phi) = (params.beta, params.phi);
    let ear = params.ear.sign();
    let (_, ke) = melnikov_prefactors(params);
    let e2 = C64::from_polar(1.0, 2.0 * params.theta(t));
    let mut dq = Vec::with_capacity(params.n);
    let mut dr = Vec::with_capacity(params.n);
    for j in 0..params.n {
        let nf = j as f64;
        let pi_n = (b.cos() + ear * phi.cos() * se * (2.0 * (nf - 1.0) * b).cos())
            * (b.cos() + ear * phi.cos() * se * (2.0 * (nf + 1.0) * b).cos());
        let c2n = (2.0 * nf * b).cos();
        let x1 = C64::new(b.cos() * se + ear * phi.cos() * c2n, -ear * phi.sin() * ta * c2n) * e2;
        let x2 = C64::new(b.cos() * se + ear * phi.cos() * c2n, ear * phi.sin() * ta * c2n) * e2.conj();
        let f = ke * se / pi_n;
        dq.push(f * x1);
        dr.push(-f * x2);
    }
    Gradient { dq, dr }
}

/// Phases θ± with Q_n → e^{iθ±} q_c as t → ±∞, reduced to [0, 2π).
pub fn asymptotic_phase_shift(params: &OrbitParams) -> (f64, f64) {
    let tp = (PI + 2.0 * params.phi).rem_euclid(2.0 * PI);
    let tm = (PI - 2.0 * params.phi).rem_euclid(2.0 * PI);
    (tp, tm)
}

/// Phase of Σ_n Q_n q̄_c, i.e. the best-fitting rotation of q_c onto Q.
pub fn fitted_phase(q: &[C64], qc: C64) -> f64 {
    q.iter().map(|x| x * qc.conj()).sum::<C64>().arg()
}

/// min over θ of ‖Q − e^{iθ} q_c‖, attained at θ* = arg Σ_n Q_n q̄_c.
pub fn distance_to_circle(q: &[C64], qc: C64) -> f64 {
    let rot = C64::from_polar(1.0, fitted_phase(q, qc)) * qc;
    q.iter().map(|x| (x - rot).norm_sqr()).sum::<f64>().sqrt()
}

/// One time slice of an even orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitSample {
    pub t: f64,
    pub q: LatticeState,
    pub distance_to_circle: f64,
}

/// Even orbit evaluated on a time grid, in parallel.
pub fn sample_orbit(params: &OrbitParams, times: &[f64]) -> Result<Vec<OrbitSample>> {
    times
        .par_iter()
        .map(|&t| {
            let q = even_heteroclinic_orbit(params, t)?;
            let d = distance_to_circle(&q, params.q_c(t));
            Ok(OrbitSample {
                t,
                q,
                distance_to_circle: d,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{discriminant, normalized_gradient};
    use crate::lattice::{al_rhs_into, even_part, evenness_residual, linearized_growth_rates};
    use proptest::prelude::*;

    fn params(n: usize, a: f64, ear: Ear) -> OrbitParams {
        OrbitParams::new(a, 1.3, 0.4, 0.2, ear, n).unwrap()
    }

    fn rel(a: &[C64], b: &[C64]) -> f64 {
        let num = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        let den = b.iter().map(|x| x.norm()).fold(0.0, f64::max);
        num / den
    }

    #[test]
    fn derived_parameters() {
        for (n, a) in [(3usize, 6.0), (4, 6.0), (6, 5.0), (8, 5.0)] {
            let p = params(n, a, Ear::Plus);
            let lhs = C64::new(p.s, p.rho.sqrt() * p.beta.sin());
            let rhs = C64::from_polar(p.h * a, p.phi);
            assert!((lhs - rhs).norm() < 1e-13);
            assert!(p.phi > 0.0 && p.phi < PI / 2.0);
            assert!(p.mu > 0.0);
            let g = linearized_growth_rates(a, n).omega[1].0;
            assert!((g.re - 2.0 * p.mu).abs() < 1e-10 * g.re);
        }
        assert!(OrbitParams::new(2.0, 1.0, 0.0, 0.0, Ear::Plus, 6).is_err());
        assert!(OrbitParams::new(5.0, 1.0, 0.0, 0.0, Ear::Plus, 2).is_err());
    }

    #[test]
    fn coefficient_conjugation() {
        let zd = C64::new(1.5, 0.2);
        for phi in [
            [C64::new(0.3, -1.2), C64::new(2.0, 0.7)],
            [C64::new(-1.1, 0.4), C64::new(0.05, 0.9)],
        ] {
            let c = darboux_coefficients(phi, zd).unwrap();
            assert!((c.a.conj() + c.d).norm() < 1e-13 * c.a.norm());
            assert!((c.b.conj() - c.c).norm() < 1e-13 * c.b.norm());
        }
        let c = darboux_coefficients([C64::new(1.0, 0.0), C64::new(0.0, 0.0)], C64::new(1.5, 0.0)).unwrap();
        // φ = (1, 0), z = 1.5: Δ = -2/3, a = -2.25, d = 2.25, b = c = 0.
        assert!((c.delta - C64::new(-2.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((c.a - C64::new(-2.25, 0.0)).norm() < 1e-14);
        assert!((c.d - C64::new(2.25, 0.0)).norm() < 1e-14);
        assert_eq!(c.b, C64::new(0.0, 0.0));
        assert_eq!(
            darboux_coefficients([C64::new(0.0, 0.0); 2], zd),
            Err(Error::ZeroEigenfunction(0))
        );
        assert!(DarbouxParams::new(C64::from_polar(1.0, 0.3), 0.0, 0.0).is_err());
        assert!(DarbouxParams::new(C64::new(1.2, 0.0), 0.0, 0.0).is_ok());
    }

    #[test]
    fn transform_matches_closed_form_and_is_isospectral() {
        for (n, a) in [(6usize, 5.0), (3, 6.0), (4, 6.0), (8, 5.0)] {
            let p = params(n, a, Ear::Plus);
            for t in [-0.05, 0.0, 0.03] {
                for vt in [-p.beta, -p.beta + PI, 0.7] {
                    let q = vec![p.q_c(t); n];
                    let phi = uniform_eigenfunction(&p, vt, t, C64::new(1.0, 0.0)).unwrap();
                    let big_q = darboux_transform(&q, C64::new(p.z, 0.0), &phi).unwrap();
                    assert!(rel(&big_q, &heteroclinic_orbit(&p, vt, t)) < 1e-10);
                    for z in [C64::new(1.3, 0.2), C64::new(0.7, -0.5), C64::new(2.0, 0.0)] {
                        let d0 = discriminant(z, &q).unwrap().delta_tilde;
                        let d1 = discriminant(z, &big_q).unwrap().delta_tilde;
                        assert!((d0 - d1).norm() <= 1e-8 * d0.norm());
                    }
                }
            }
        }
    }

    #[test]
    fn pure_bloch_limit_keeps_modulus() {
        let p = params(6, 5.0, Ear::Plus);
        let t = 0.02;
        let q = vec![p.q_c(t); 6];
        let phi = uniform_eigenfunction(&p, 0.3, t, C64::new(0.0, 0.0)).unwrap();
        let big_q = darboux_transform(&q, C64::new(p.z, 0.0), &phi).unwrap();
        for x in &big_q {
            assert!((x.norm() - p.a).abs() < 1e-10 * p.a);
        }
    }

    #[test]
    fn residual_gate() {
        let p = params(6, 5.0, Ear::Plus);
        let q = vec![p.q_c(0.0); 6];
        let mut phi = uniform_eigenfunction(&p, 0.3, 0.0, C64::new(1.0, 0.0)).unwrap();
        phi[3][0] *= 1.01;
        assert!(matches!(
            darboux_transform(&q, C64::new(p.z, 0.0), &phi),
            Err(Error::EigenfunctionResidualTooLarge { .. })
        ));
    }

    #[test]
    fn even_orbit_matches_general_orbit_at_ear_phases() {
        for (n, a) in [(6usize, 5.0), (3, 6.0), (4, 6.0), (8, 5.0)] {
            for ear in [Ear::Plus, Ear::Minus] {
                let p = params(n, a, ear);
                for t in [-0.05, 0.0, 0.03] {
                    let e = even_heteroclinic_orbit(&p, t).unwrap();
                    let g = heteroclinic_orbit(&p, p.vtheta(), t);
                    assert!(rel(&e, &g) < 1e-12);
                    assert!(evenness_residual(&g) < 1e-12 * p.a);
                }
            }
        }
    }

    #[test]
    fn even_orbit_limits_and_phase_shifts() {
        let p = params(6, 5.0, Ear::Plus);
        let (tp, tm) = asymptotic_phase_shift(&p);
        let t = 8.0 / p.mu;
        for (time, theta) in [(t, tp), (-t, tm)] {
            let q = even_heteroclinic_orbit(&p, time).unwrap();
            let qc = p.q_c(time);
            for x in q.iter() {
                assert!((x.norm() - p.a).abs() < 1e-5 * p.a);
            }
            let fit = fitted_phase(&q, qc).rem_euclid(2.0 * PI);
            let d = (fit - theta + PI).rem_euclid(2.0 * PI) - PI;
            assert!(d.abs() < 1e-6, "{fit} vs {theta}");
        }
        let diff = (tp - tm).rem_euclid(2.0 * PI);
        assert!((diff - (4.0 * p.phi).rem_euclid(2.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn general_orbit_modulus_limits() {
        let p = params(6, 5.0, Ear::Plus);
        for t in [-20.0 / p.mu, 20.0 / p.mu] {
            for x in heteroclinic_orbit(&p, 0.9, t) {
                assert!((x.norm() - p.a).abs() < 1e-10 * p.a);
            }
        }
    }

    #[test]
    fn decay_rate_is_two_mu() {
        let p = params(6, 5.0, Ear::Minus);
        let ts: Vec<f64> = (0..=20).map(|k| (2.0 + 3.0 * k as f64 / 20.0) / p.mu).collect();
        let samples = sample_orbit(&p, &ts).unwrap();
        let xs: Vec<f64> = samples.iter().map(|s| s.t).collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.distance_to_circle.ln()).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope + 2.0 * p.mu).abs() < 0.01 * 2.0 * p.mu, "slope {slope}, 2mu {}", 2.0 * p.mu);
    }

    fn dnls_residual(p: &OrbitParams, vt: f64, t: f64) -> f64 {
        let dt = 2e-4;
        let w = [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
        let n = p.n;
        let mut qdot = vec![C64::new(0.0, 0.0); n];
        for (k, wk) in w.iter().enumerate() {
            let q = heteroclinic_orbit(p, vt, t + (k as f64 - 3.0) * dt);
            for (d, x) in qdot.iter_mut().zip(q) {
                *d += wk / dt * x;
            }
        }
        let q = heteroclinic_orbit(p, vt, t);
        let mut rhs = vec![C64::new(0.0, 0.0); n];
        al_rhs_into(&q, p.omega, &mut rhs);
        rel(&qdot, &rhs)
    }

    #[test]
    fn orbit_solves_lattice_equation() {
        for (n, a) in [(6usize, 5.0), (4, 6.0)] {
            let p = params(n, a, Ear::Plus);
            for vt in [p.vtheta(), 0.7] {
                for k in 0..=8 {
                    let t = -2.0 + 0.5 * k as f64;
                    let r = dnls_residual(&p, vt, t);
                    assert!(r < 1e-6, "n={n} t={t} r={r}");
                }
            }
        }
    }

    #[test]
    fn melnikov_vector_is_gradient_of_invariant() {
        for (n, a) in [(6usize, 5.0), (3, 6.0), (4, 6.0)] {
            let p = params(n, a, Ear::Plus);
            for vt in [-p.beta, 0.7] {
                for t in [-0.02, 0.0, 0.01] {
                    let q = heteroclinic_orbit(&p, vt, t);
                    let g = normalized_gradient(C64::new(p.z, 0.0), &q).unwrap();
                    let m = melnikov_vector(&p, vt, t);
                    assert!(g.max_abs_diff(&m.scaled(C64::new(-1.0, 0.0))) <= 1e-6 * g.max_abs());
                }
            }
        }
    }

    #[test]
    fn even_projection_and_prefactors() {
        for (n, a) in [(6usize, 5.0), (3, 6.0), (8, 5.0)] {
            for ear in [Ear::Plus, Ear::Minus] {
                let p = params(n, a, ear);
                let (k, ke) = melnikov_prefactors(&p);
                assert!((k / ke - p.h * p.h * p.a * p.a).abs() < 1e-13 * k.abs() / ke.abs());
                for t in [-0.3, 0.01, 0.2] {
                    let m = melnikov_vector(&p, p.vtheta(), t);
                    let e = even_melnikov_vector(&p, t);
                    assert!(rel(&even_part(&m.dq), &e.dq) < 1e-9);
                    assert!(rel(&even_part(&m.dr), &e.dr) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn melnikov_vector_decays() {
        let p = params(6, 5.0, Ear::Plus);
        let n0 = even_melnikov_vector(&p, -p.p / p.mu).norm();
        for k in 1..10 {
            let t = k as f64 / p.mu;
            for s in [t, -t] {
                let v = even_melnikov_vector(&p, s).norm();
                let bound = 2.0 * n0 / (p.tau(s)).cosh();
                assert!(v <= bound * 1.5, "t={s}");
            }
        }
    }

    #[test]
    fn figure_eight_unstable_direction() {
        use crate::lattice::to_block_coords;
        for ear in [Ear::Plus, Ear::Minus] {
            let p = params(6, 5.0, ear);
            let mut ratios = Vec::new();
            for k in [3.0, 5.0, 7.0] {
                let t = -k / p.mu;
                let q = even_heteroclinic_orbit(&p, t).unwrap();
                let bc = to_block_coords(&q, p.a).unwrap();
                ratios.push((bc.b2 / bc.b1).abs());
            }
            assert!(ratios[1] < ratios[0] && ratios[2] < ratios[1], "{ratios:?}");
            assert!(ratios[2] < 1e-2, "{ratios:?}");
        }
    }

    proptest! {
        #[test]
        fn conjugation_relations(re1 in -3.0f64..3.0, im1 in -3.0f64..3.0, re2 in -3.0f64..3.0,
                                 im2 in -3.0f64..3.0, zr in 0.2f64..3.0, zi in -1.0f64..1.0) {
            let zd = C64::new(zr, zi);
            prop_assume!((zd.norm() - 1.0).abs() > 1e-3);
            prop_assume!(re1.abs() + im1.abs() + re2.abs() + im2.abs() > 1e-3);
            let c = darboux_coefficients([C64::new(re1, im1), C64::new(re2, im2)], zd).unwrap();
            let scale = c.a.norm().max(c.b.norm()).max(1e-300);
            prop_assert!((c.a.conj() + c.d).norm() <= 1e-13 * scale);
            prop_assert!((c.b.conj() - c.c).norm() <= 1e-13 * scale);
        }

        #[test]
        fn even_orbits_are_even(t in -3.0f64..3.0, p in -2.0f64..2.0, gamma in 0.0f64..6.28) {
            let par = OrbitParams::new(5.0, 1.1, gamma, p, Ear::Minus, 6).unwrap();
            let q = heteroclinic_orbit(&par, par.vtheta(), t);
            prop_assert!(evenness_residual(&q) <= 1e-12 * par.a);
        }
    }
}
