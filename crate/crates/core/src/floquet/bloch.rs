//! Bloch eigenfunctions of the spatial Lax problem.

use super::{normalization, partial_products, transfer_matrix};
use crate::error::{Error, Result};
use crate::linalg::{csqrt, Mat2, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Quasi-periodic pair ψ^± over n = 0…N with multipliers D ζ^{±1}.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochPair {
    pub psi_plus: Vec<[C64; 2]>,
    pub psi_minus: Vec<[C64; 2]>,
    /// (D ζ, D ζ⁻¹).
    pub multipliers: (C64, C64),
}

fn wronskian(a: [C64; 2], b: [C64; 2]) -> C64 {
    a[0] * b[1] - a[1] * b[0]
}

fn vnorm(v: [C64; 2]) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

impl BlochPair {
    /// W_n = det(ψ^+_n, ψ^-_n) for n = 0…N.
    pub fn wronskians(&self) -> Vec<C64> {
        self.psi_plus
            .iter()
            .zip(&self.psi_minus)
            .map(|(&p, &m)| wronskian(p, m))
            .collect()
    }

    /// max_n ‖ψ_{n+1} − L_n ψ_n‖ / ‖ψ_{n+1}‖ over both functions.
    pub fn lax1_residual(&self, z: C64, q: &[C64]) -> Result<f64> {
        let h = 1.0 / q.len() as f64;
        let mut worst: f64 = 0.0;
        for (n, &qn) in q.iter().enumerate() {
            let l = transfer_matrix(z, qn, h)?;
            for psi in [&self.psi_plus, &self.psi_minus] {
                let lhs = l.apply(psi[n]);
                let r = [lhs[0] - psi[n + 1][0], lhs[1] - psi[n + 1][1]];
                worst = worst.max(vnorm(r) / vnorm(psi[n + 1]).max(f64::MIN_POSITIVE));
            }
        }
        Ok(worst)
    }

    /// ζ from the ψ^+ multiplier and the normalization D.
    pub fn zeta(&self, d: f64) -> C64 {
        self.multipliers.0 / d
    }
}

/// Closed-form Bloch pair of the uniform solution q_c(t) at spectral
/// parameter z.
pub fn uniform_bloch_functions(
    z: C64,
    a: f64,
    omega: f64,
    gamma: f64,
    t: f64,
    n: usize,
) -> Result<BlochPair> {
    if z == C64::new(0.0, 0.0) {
        return Err(Error::ZeroSpectralParameter);
    }
    let h = 1.0 / n as f64;
    let rho = 1.0 + h * h * a * a;
    let s = 0.5 * (z - z.inv());
    if s.norm() <= 1e-14 * z.norm().max(1.0) {
        return Err(Error::BranchAmbiguity(z));
    }
    let beta = ((z + z.inv()) / (2.0 * rho.sqrt())).acos();
    let ep = rho.sqrt() * (I * beta).exp();
    let em = rho.sqrt() * (-I * beta).exp();
    let th = (a * a - omega * omega) * t - 0.5 * gamma;
    let lam = -I * z.ln() / h;
    let om_p = I / (h * h) * ((z.inv() - z) * ep + 2.0 * I * lam * h);
    let om_m = I / (h * h) * ((z.inv() - z) * em + 2.0 * I * lam * h);
    let e_th = C64::from_polar(1.0, th);
    let tp = (om_p * t).exp();
    let tm = (om_m * t).exp();
    let base_p = [(z.inv() - ep) * e_th.conj() * tp, -I * h * a * e_th * tp];
    let base_m = [-I * h * a * e_th.conj() * tm, (z - em) * e_th * tm];
    let mut psi_plus = Vec::with_capacity(n + 1);
    let mut psi_minus = Vec::with_capacity(n + 1);
    let (mut fp, mut fm) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0));
    for _ in 0..=n {
        psi_plus.push([base_p[0] * fp, base_p[1] * fp]);
        psi_minus.push([base_m[0] * fm, base_m[1] * fm]);
        fp *= ep;
        fm *= em;
    }
    Ok(BlochPair {
        psi_plus,
        psi_minus,
        multipliers: (ep.powu(n as u32), em.powu(n as u32)),
    })
}

fn eigenvector(m: &Mat2, lam: C64) -> [C64; 2] {
    let v1 = [m.m[0][1], lam - m.m[0][0]];
    let v2 = [lam - m.m[1][1], m.m[1][0]];
    if vnorm(v1) >= vnorm(v2) {
        v1
    } else {
        v2
    }
}

/// Bloch pair of a general periodic potential from the eigenvectors of
/// the monodromy matrix.
pub fn bloch_pair_from_monodromy(z: C64, q: &[C64]) -> Result<BlochPair> {
    let ms = partial_products(z, q)?;
    let mn = *ms.last().expect("nonempty");
    let d = normalization(q);
    let tr = mn.trace();
    let disc = csqrt(tr * tr - 4.0 * d * d);
    let lp = 0.5 * (tr + disc);
    let lm = 0.5 * (tr - disc);
    if (lp - lm).norm() <= 1e-10 * d {
        return Err(Error::BranchAmbiguity(z));
    }
    let vp = eigenvector(&mn, lp);
    let vm = eigenvector(&mn, lm);
    if vnorm(vp) == 0.0 || vnorm(vm) == 0.0 {
        return Err(Error::BranchAmbiguity(z));
    }
    Ok(BlochPair {
        psi_plus: ms.iter().map(|m| m.apply(vp)).collect(),
        psi_minus: ms.iter().map(|m| m.apply(vm)).collect(),
        multipliers: (lp, lm),
    })
}

/// Time-part matrix B_n of the Lax pair, with λ = −i ln(z)/h.
pub fn lax2_matrix(z: C64, q_n: C64, q_prev: C64, omega: f64, h: f64) -> Mat2 {
    let lam = -I * z.ln() / h;
    let h2 = h * h;
    let w2 = omega * omega * h2;
    let zi = z.inv();
    let b11 = 1.0 - z * z + 2.0 * I * lam * h - h2 * q_n * q_prev.conj() + w2;
    let b12 = -I * z * h * q_n + I * zi * h * q_prev;
    let b21 = -I * z * h * q_prev.conj() + I * zi * h * q_n.conj();
    let b22 = zi * zi - 1.0 + 2.0 * I * lam * h + h2 * q_n.conj() * q_prev - w2;
    Mat2::new(b11, b12, b21, b22).scale(I / h2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::uniform::UniformSpectrum;
    use crate::lattice::uniform_orbit;

    #[test]
    fn uniform_pair_solves_lax1_and_wronskian() {
        let (a, om, gamma, n) = (5.0, 1.3, 0.4, 6);
        let zd = UniformSpectrum::new(a, n).z_s(1);
        for z in [zd, C64::new(1.3, 0.4), C64::new(0.6, -0.2)] {
            for t in [0.0, 0.01, -0.02] {
                let pair = uniform_bloch_functions(z, a, om, gamma, t, n).unwrap();
                let q = vec![uniform_orbit(a, om, gamma, t); n];
                assert!(pair.lax1_residual(z, &q).unwrap() <= 1e-10);
                let w = pair.wronskians();
                let d = normalization(&q);
                assert!((w[n] - d * d * w[0]).norm() <= 1e-10 * (d * d * w[0]).norm());
            }
        }
    }

    #[test]
    fn uniform_pair_solves_lax2() {
        let (a, om, gamma, n) = (5.0, 1.3, 0.4, 6);
        let h = 1.0 / n as f64;
        let zd = UniformSpectrum::new(a, n).z_s(1);
        let dt = 1e-6;
        for z in [zd, C64::new(1.3, 0.4), C64::new(0.6, -0.2)] {
            let t = 0.01;
            let p0 = uniform_bloch_functions(z, a, om, gamma, t, n).unwrap();
            let pa = uniform_bloch_functions(z, a, om, gamma, t + dt, n).unwrap();
            let pb = uniform_bloch_functions(z, a, om, gamma, t - dt, n).unwrap();
            let q = uniform_orbit(a, om, gamma, t);
            let b = lax2_matrix(z, q, q, om, h);
            for k in [0, 2, 5] {
                let d = [
                    (pa.psi_plus[k][0] - pb.psi_plus[k][0]) / (2.0 * dt),
                    (pa.psi_plus[k][1] - pb.psi_plus[k][1]) / (2.0 * dt),
                ];
                let bp = b.apply(p0.psi_plus[k]);
                let r = [d[0] - bp[0], d[1] - bp[1]];
                assert!(vnorm(r) <= 1e-8 * vnorm(d), "z={z} k={k}");
            }
        }
    }

    #[test]
    fn tangency_is_rejected() {
        assert!(matches!(
            uniform_bloch_functions(C64::new(1.0, 0.0), 5.0, 1.0, 0.0, 0.0, 6),
            Err(Error::BranchAmbiguity(_))
        ));
    }

    #[test]
    fn monodromy_pair_is_quasiperiodic() {
        let q: Vec<C64> = [0.3, 1.1, -0.5, 0.7, -0.5, 1.1]
            .iter()
            .zip([-0.2, 0.4, 0.9, -0.6, 0.9, 0.4])
            .map(|(&r, i)| C64::new(r, i))
            .collect();
        let z = C64::new(1.2, 0.3);
        let pair = bloch_pair_from_monodromy(z, &q).unwrap();
        assert!(pair.lax1_residual(z, &q).unwrap() < 1e-13);
        let n = q.len();
        for (psi, mu) in [(&pair.psi_plus, pair.multipliers.0), (&pair.psi_minus, pair.multipliers.1)] {
            for c in 0..2 {
                assert!((psi[n][c] - mu * psi[0][c]).norm() < 1e-10 * psi[n][c].norm().max(1.0));
            }
        }
        let d = normalization(&q);
        assert!((pair.multipliers.0 * pair.multipliers.1 - d * d).norm() < 1e-12 * d * d);
    }
}
