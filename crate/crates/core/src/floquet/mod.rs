//! Transfer matrices, the Floquet discriminant and its z-derivatives.
//!
//! The spatial Lax operator is L_n(z) = [[z, i h q_n], [i h q̄_n, 1/z]] and
//! the monodromy is M_N = L_{N-1}···L_0. Functions here accept any periodic
//! sequence; evenness is only needed by callers that rely on it.

mod bloch;
mod gradient;
mod spectral;
pub mod uniform;

pub use bloch::{bloch_pair_from_monodromy, lax2_matrix, uniform_bloch_functions, BlochPair};
pub use gradient::{
    bloch_gradient, discriminant_gradient, grad_invariant_f, invariant_f, normalized_gradient,
    uniform_bloch_gradient, Gradient, GradientPath, InvariantValue,
};
pub use spectral::{
    classify_spectral_point, default_seeds, find_critical_points, uniform_spectral_points,
    CatalogEntry, ClassifyTolerances, CriticalSearch, SpectralKind, SpectralPoint,
};

use crate::error::{Error, Result};
use crate::linalg::{Mat2, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Lax transfer matrix at one site.
pub fn transfer_matrix(z: C64, q_n: C64, h: f64) -> Result<Mat2> {
    if z == C64::new(0.0, 0.0) {
        return Err(Error::ZeroSpectralParameter);
    }
    Ok(Mat2::new(z, I * h * q_n, I * h * q_n.conj(), z.inv()))
}

/// Partial products M_0 = I, M_{n+1} = L_n M_n for n = 0…N-1.
pub fn partial_products(z: C64, q: &[C64]) -> Result<Vec<Mat2>> {
    let h = 1.0 / q.len() as f64;
    let mut out = Vec::with_capacity(q.len() + 1);
    let mut m = Mat2::IDENTITY;
    out.push(m);
    for &qn in q {
        m = transfer_matrix(z, qn, h)? * m;
        out.push(m);
    }
    Ok(out)
}

/// Monodromy M(N; z; q) = L_{N-1}···L_0.
pub fn fundamental_matrix(z: C64, q: &[C64]) -> Result<Mat2> {
    Ok(*partial_products(z, q)?.last().expect("N >= 1"))
}

/// D = +sqrt(Π ρ_n), ρ_n = 1 + h²|q_n|².
pub fn normalization(q: &[C64]) -> f64 {
    let h = 1.0 / q.len() as f64;
    let log_d2: f64 = q.iter().map(|x| (h * h * x.norm_sqr()).ln_1p()).sum();
    (0.5 * log_d2).exp()
}

/// Δ together with D and Δ̃ = Δ/D.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DiscriminantValue {
    pub z: C64,
    pub delta: C64,
    pub d: f64,
    pub delta_tilde: C64,
}

pub fn discriminant(z: C64, q: &[C64]) -> Result<DiscriminantValue> {
    let delta = fundamental_matrix(z, q)?.trace();
    let d = normalization(q);
    Ok(DiscriminantValue {
        z,
        delta,
        d,
        delta_tilde: delta / d,
    })
}

/// Δ, dΔ/dz and d²Δ/dz² by forward propagation of the product rule
/// through the transfer-matrix chain.
pub fn discriminant_with_derivatives(z: C64, q: &[C64]) -> Result<(C64, C64, C64)> {
    if z == C64::new(0.0, 0.0) {
        return Err(Error::ZeroSpectralParameter);
    }
    let h = 1.0 / q.len() as f64;
    let zi = z.inv();
    let zero = C64::new(0.0, 0.0);
    let dl = Mat2::diag(C64::new(1.0, 0.0), -zi * zi);
    let ddl = Mat2::diag(zero, 2.0 * zi * zi * zi);
    let mut m = Mat2::IDENTITY;
    let mut m1 = Mat2::ZERO;
    let mut m2 = Mat2::ZERO;
    for &qn in q {
        let l = transfer_matrix(z, qn, h)?;
        let next2 = ddl * m + (dl * m1).scale(C64::new(2.0, 0.0)) + l * m2;
        let next1 = dl * m + l * m1;
        m = l * m;
        m1 = next1;
        m2 = next2;
    }
    Ok((m.trace(), m1.trace(), m2.trace()))
}

/// dΔ/dz (order 1) or d²Δ/dz² (order 2).
pub fn discriminant_z_derivatives(z: C64, q: &[C64], order: u8) -> Result<C64> {
    let (_, d1, d2) = discriminant_with_derivatives(z, q)?;
    match order {
        1 => Ok(d1),
        2 => Ok(d2),
        _ => Err(Error::InvalidParameter(format!(
            "derivative order must be 1 or 2, got {order}"
        ))),
    }
}
