//! Gradients of Δ and Δ̃ with respect to (q_n, r_n), r_n = −q̄_n, and the
//! invariants F̃_j = Δ̃(z^{(c)}_j).
//!
//! Derivatives are Wirtinger derivatives: δ/δq = ∂/∂q and δ/δr = −∂/∂q̄.

use super::bloch::{bloch_pair_from_monodromy, uniform_bloch_functions, BlochPair};
use super::spectral::{classify_spectral_point, newton_critical, ClassifyTolerances, SpectralPoint};
use super::{discriminant, normalization, partial_products};
use crate::error::{Error, Result};
use crate::linalg::{Mat2, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Pair of sequences (δ/δq_n, δ/δr_n).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Gradient {
    pub dq: Vec<C64>,
    pub dr: Vec<C64>,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.dq
            .iter()
            .chain(&self.dr)
            .map(|x| x.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// max over entries of |self − other|.
    pub fn max_abs_diff(&self, other: &Gradient) -> f64 {
        self.dq
            .iter()
            .zip(&other.dq)
            .chain(self.dr.iter().zip(&other.dr))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.dq
            .iter()
            .chain(&self.dr)
            .map(|x| x.norm())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: C64) -> Gradient {
        Gradient {
            dq: self.dq.iter().map(|x| x * s).collect(),
            dr: self.dr.iter().map(|x| x * s).collect(),
        }
    }
}

/// δΔ/δq_n = ih tr{M_{n+1}⁻¹ E₁₂ M_n M_N}, δΔ/δr_n = −ih tr{M_{n+1}⁻¹ E₂₁ M_n M_N}.
pub fn discriminant_gradient(z: C64, q: &[C64]) -> Result<Gradient> {
    let n = q.len();
    let h = 1.0 / n as f64;
    let ms = partial_products(z, q)?;
    let mn = ms[n];
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let e12 = Mat2::new(zero, one, zero, zero);
    let e21 = Mat2::new(zero, zero, one, zero);
    let mut det = 1.0;
    let mut dq = Vec::with_capacity(n);
    let mut dr = Vec::with_capacity(n);
    for k in 0..n {
        det *= 1.0 + h * h * q[k].norm_sqr();
        let inv = ms[k + 1].inverse_with_det(C64::new(det, 0.0));
        let tail = ms[k] * mn;
        dq.push(I * h * (inv * e12 * tail).trace());
        dr.push(-I * h * (inv * e21 * tail).trace());
    }
    Ok(Gradient { dq, dr })
}

/// Gradient of Δ̃ = Δ/D from the transfer-matrix formula.
pub fn normalized_gradient(z: C64, q: &[C64]) -> Result<Gradient> {
    let g = discriminant_gradient(z, q)?;
    let dv = discriminant(z, q)?;
    let h2 = 1.0 / (q.len() * q.len()) as f64;
    let dt = dv.delta_tilde;
    let dq = g
        .dq
        .iter()
        .zip(q)
        .map(|(&gq, &x)| gq / dv.d - dt * h2 * x.conj() / (2.0 * (1.0 + h2 * x.norm_sqr())))
        .collect();
    let dr = g
        .dr
        .iter()
        .zip(q)
        .map(|(&gr, &x)| gr / dv.d + dt * h2 * x / (2.0 * (1.0 + h2 * x.norm_sqr())))
        .collect();
    Ok(Gradient { dq, dr })
}

fn bloch_form(pair: &BlochPair, zeta: C64, h: f64) -> Gradient {
    let n = pair.psi_plus.len() - 1;
    let pp = &pair.psi_plus;
    let pm = &pair.psi_minus;
    let pref = I * h * (zeta - zeta.inv()) / 2.0;
    let mut dq = Vec::with_capacity(n);
    let mut dr = Vec::with_capacity(n);
    for k in 0..n {
        let w = pp[k + 1][0] * pm[k + 1][1] - pp[k + 1][1] * pm[k + 1][0];
        let f = pref / w;
        dq.push(f * (pp[k + 1][1] * pm[k][1] + pp[k][1] * pm[k + 1][1]));
        dr.push(f * (pp[k + 1][0] * pm[k][0] + pp[k][0] * pm[k + 1][0]));
    }
    Gradient { dq, dr }
}

/// Gradient of Δ̃ from the Bloch form ih(ζ − ζ⁻¹)/(2W_{n+1})(…), using
/// eigenvectors of the monodromy.
pub fn bloch_gradient(z: C64, q: &[C64]) -> Result<Gradient> {
    let pair = bloch_pair_from_monodromy(z, q)?;
    let d = normalization(q);
    Ok(bloch_form(&pair, pair.zeta(d), 1.0 / q.len() as f64))
}

/// Bloch-form gradient of Δ̃ on the uniform solution using the
/// closed-form Bloch functions.
pub fn uniform_bloch_gradient(
    z: C64,
    a: f64,
    omega: f64,
    gamma: f64,
    t: f64,
    n: usize,
) -> Result<Gradient> {
    let pair = uniform_bloch_functions(z, a, omega, gamma, t, n)?;
    let h = 1.0 / n as f64;
    let d = (1.0 + h * h * a * a).powf(n as f64 / 2.0);
    Ok(bloch_form(&pair, pair.zeta(d), h))
}

/// Which formula to use for δF̃/δq.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientPath {
    Transfer,
    Bloch,
}

fn check_simple(z: C64, q: &[C64]) -> Result<SpectralPoint> {
    let tol = ClassifyTolerances::default();
    let p = classify_spectral_point(z, q, &tol)?;
    if p.abs_d2 <= tol.rel_c * p.abs_d2.max(1.0) {
        return Err(Error::NotSimpleCritical(z));
    }
    Ok(p)
}

/// δF̃/δ(q, r) = δΔ̃/δ(q, r) at a simple critical point z_c.
pub fn grad_invariant_f(q: &[C64], zc: C64, path: GradientPath) -> Result<Gradient> {
    check_simple(zc, q)?;
    match path {
        GradientPath::Transfer => normalized_gradient(zc, q),
        GradientPath::Bloch => bloch_gradient(zc, q),
    }
}

/// F̃_j = Δ̃(z_c) together with the located critical point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct InvariantValue {
    pub zc: C64,
    pub value: C64,
    pub point: SpectralPoint,
}

pub fn invariant_f(q: &[C64], seed: C64) -> Result<InvariantValue> {
    let zc = newton_critical(q, seed)?;
    let point = check_simple(zc, q)?;
    Ok(InvariantValue {
        zc,
        value: point.delta / point.d,
        point,
    })
}
