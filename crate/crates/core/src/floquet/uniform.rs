//! Closed-form spectral data of the uniform solution q_n = a e^{iγ}.

use crate::linalg::{csqrt, C64};

/// Spectral parametrization z(β) of the uniform solution with amplitude a.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformSpectrum {
    pub a: f64,
    pub n: usize,
    pub h: f64,
    pub rho: f64,
    /// D = ρ^{N/2}.
    pub d: f64,
}

impl UniformSpectrum {
    pub fn new(a: f64, n: usize) -> Self {
        let h = 1.0 / n as f64;
        let rho = 1.0 + h * h * a * a;
        UniformSpectrum {
            a,
            n,
            h,
            rho,
            d: rho.powf(n as f64 / 2.0),
        }
    }

    /// √(ρcos²β − 1) on the principal branch.
    pub fn root(&self, beta: C64) -> C64 {
        csqrt(self.rho * beta.cos() * beta.cos() - 1.0)
    }

    /// z(β) = √ρ cos β + √(ρcos²β − 1).
    pub fn z_of_beta(&self, beta: C64) -> C64 {
        self.rho.sqrt() * beta.cos() + self.root(beta)
    }

    /// β with cos β = (z + 1/z)/(2√ρ), principal arccos.
    pub fn beta_of_z(&self, z: C64) -> C64 {
        ((z + z.inv()) / (2.0 * self.rho.sqrt())).acos()
    }

    /// Δ = 2D cos(Nβ).
    pub fn delta(&self, beta: C64) -> C64 {
        2.0 * self.d * (self.n as f64 * beta).cos()
    }

    /// dΔ/dz = 2ND sin(Nβ) √(ρcos²β − 1) / (z √ρ sin β), using
    /// √(ρcos²β − 1) = (z − 1/z)/2 so that the branch matches z.
    pub fn ddelta(&self, z: C64) -> C64 {
        let beta = self.beta_of_z(z);
        let nf = self.n as f64;
        let s = 0.5 * (z - z.inv());
        2.0 * nf * self.d * (nf * beta).sin() * s / (z * self.rho.sqrt() * beta.sin())
    }

    /// The printed closed form of d²Δ/dz².
    pub fn d2delta(&self, z: C64) -> C64 {
        let beta = self.beta_of_z(z);
        let nf = self.n as f64;
        let sq = self.rho.sqrt();
        let s = 0.5 * (z - z.inv());
        let (sb, cb) = (beta.sin(), beta.cos());
        let (snb, cnb) = ((nf * beta).sin(), (nf * beta).cos());
        let bracket = nf * cnb * sb * s * s + (1.0 - self.rho) * cb * snb + sq * snb * sb * sb * s;
        -2.0 * nf * self.d * bracket / (self.rho * z * z * sb * sb * sb)
    }

    /// Periodic/antiperiodic point z^{(s)}_m at β = mπ/N.
    pub fn z_s(&self, m: usize) -> C64 {
        self.z_of_beta(C64::new(m as f64 * std::f64::consts::PI / self.n as f64, 0.0))
    }
}
