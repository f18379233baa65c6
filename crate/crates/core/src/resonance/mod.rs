//! Dynamics on the invariant plane of uniform states and inside the
//! resonant annulus |q| = ω + ηy, η = √ε, τ = ηt.

mod contour;

pub use contour::{hausdorff_distance, phase_portrait, separatrix_levels, ContourGrid, PortraitSample, SeparatrixContour};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::PerturbationParams;
use crate::linalg::C64;

const I: C64 = C64::new(0.0, 1.0);

/// Parameters of the annulus system; h = 1/N.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AnnulusParams {
    pub eta: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub omega: f64,
    pub n: usize,
}

impl AnnulusParams {
    pub fn new(eta: f64, alpha: (f64, f64), omega: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::LatticeTooSmall(n));
        }
        if !(omega > 0.0) {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        Ok(AnnulusParams {
            eta,
            alpha1: alpha.0,
            alpha2: alpha.1,
            omega,
            n,
        })
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// ρ₀ = 1 + h²ω².
    pub fn rho0(&self) -> f64 {
        let h = self.h();
        1.0 + h * h * self.omega * self.omega
    }

    /// Ω = h⁻²ρ₀ ln ρ₀.
    pub fn big_omega(&self) -> f64 {
        let h = self.h();
        self.rho0() * self.rho0().ln() / (h * h)
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        AnnulusParams { eta, ..*self }
    }

    fn modulus(&self, y: f64) -> Result<f64> {
        let i = self.omega + self.eta * y;
        if i <= 0.0 {
            return Err(Error::NegativeModulus(i));
        }
        Ok(i)
    }
}

/// (ρ/h²) ln ρ and its I-derivative 2I(ln ρ + 1), ρ = 1 + h²I².
fn log_term(i: f64, h: f64) -> (f64, f64) {
    let x = h * h * i * i;
    let lr = x.ln_1p();
    ((1.0 + x) * lr / (h * h), 2.0 * i * (lr + 1.0))
}

/// dq/dt on the plane q_n = q; h = 1/N.
pub fn plane_rhs(q: C64, omega: f64, n: usize, pert: &PerturbationParams) -> C64 {
    let h = 1.0 / n as f64;
    let (l, _) = log_term(q.norm(), h);
    let qb = q.conj();
    let core = 2.0 * (q.norm_sqr() - omega * omega) * q;
    let p = (pert.alpha1 * (q + qb) + pert.alpha2 * (q * q + qb * qb)) * q
        + (pert.alpha1 + 2.0 * pert.alpha2 * qb) * l;
    -I * (core + pert.epsilon * p)
}

/// (dI/dt, dξ/dt) for q = I e^{iξ}.
pub fn polar_rhs(modulus: f64, xi: f64, omega: f64, n: usize, pert: &PerturbationParams) -> Result<(f64, f64)> {
    if !(modulus > 0.0) {
        return Err(Error::ZeroModulus(modulus));
    }
    let (a1, a2, eps) = (pert.alpha1, pert.alpha2, pert.epsilon);
    let i = modulus;
    let (l, _) = log_term(i, 1.0 / n as f64);
    let (s, c) = xi.sin_cos();
    let c2 = (2.0 * xi).cos();
    let di = -eps * s * (a1 + 4.0 * a2 * i * c) * l;
    let dxi = -2.0 * (i * i - omega * omega)
        - eps * (2.0 * a1 * i * c + 2.0 * a2 * i * i * c2 + (a1 * c / i + 2.0 * a2 * c2) * l);
    Ok((di, dxi))
}

/// (dy/dτ, dξ/dτ) of the annulus system.
pub fn annulus_rhs(y: f64, xi: f64, p: &AnnulusParams) -> Result<(f64, f64)> {
    let i = p.modulus(y)?;
    let (a1, a2, eta) = (p.alpha1, p.alpha2, p.eta);
    let (l, _) = log_term(i, p.h());
    let (s, c) = xi.sin_cos();
    let c2 = (2.0 * xi).cos();
    let f1 = -s * (a1 + 4.0 * a2 * i * c) * l;
    let f2 = -4.0 * p.omega * y
        - eta * (2.0 * y * y + 2.0 * a1 * i * c + 2.0 * a2 * i * i * c2 + (a1 * c / i + 2.0 * a2 * c2) * l);
    Ok((f1, f2))
}

/// Jacobian [[∂f₁/∂y, ∂f₁/∂ξ], [∂f₂/∂y, ∂f₂/∂ξ]] of [`annulus_rhs`].
pub fn annulus_jacobian(y: f64, xi: f64, p: &AnnulusParams) -> Result<[[f64; 2]; 2]> {
    let i = p.modulus(y)?;
    let (a1, a2, eta) = (p.alpha1, p.alpha2, p.eta);
    let (l, dl) = log_term(i, p.h());
    let (s, c) = xi.sin_cos();
    let (s2, c2) = (2.0 * xi).sin_cos();
    let a = a1 + 4.0 * a2 * i * c;
    let b = a1 * c / i + 2.0 * a2 * c2;
    let f1y = -s * (4.0 * a2 * eta * c * l + a * dl * eta);
    let f1x = -l * (c * a - 4.0 * a2 * i * s * s);
    let f2y = -4.0 * p.omega
        - eta
            * (4.0 * y + 2.0 * a1 * eta * c + 4.0 * a2 * i * eta * c2 - a1 * eta * c * l / (i * i)
                + b * dl * eta);
    let f2x = -eta * (-2.0 * a1 * i * s - 4.0 * a2 * i * i * s2 + (-a1 * s / i - 4.0 * a2 * s2) * l);
    Ok([[f1y, f1x], [f2y, f2x]])
}

/// η = 0 field: dy/dτ = −Ω sinξ[α₁ + 4α₂ω cosξ], dξ/dτ = −4ωy.
pub fn leading_rhs(y: f64, xi: f64, p: &AnnulusParams) -> (f64, f64) {
    let om = p.big_omega();
    (
        -om * xi.sin() * (p.alpha1 + 4.0 * p.alpha2 * p.omega * xi.cos()),
        -4.0 * p.omega * y,
    )
}

/// H̃ = 2ωy² + Ω(α₁cosξ + α₂ω cos2ξ).
pub fn leading_hamiltonian(y: f64, xi: f64, p: &AnnulusParams) -> f64 {
    2.0 * p.omega * y * y + p.big_omega() * (p.alpha1 * xi.cos() + p.alpha2 * p.omega * (2.0 * xi).cos())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedPointKind {
    Saddle,
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AnnulusFixedPoint {
    /// Branch label j = 1…4: ξ = 0, π, +arccos, −arccos at η = 0.
    pub j: u8,
    pub y: f64,
    pub xi: f64,
    pub kind: FixedPointKind,
    pub trace: f64,
    pub det: f64,
    pub eta: f64,
    /// ‖(f₁, f₂)‖ at the point.
    pub residual: f64,
}

pub const DEFAULT_DELTA0: f64 = 0.05;
pub const DEFAULT_ETA0: f64 = 0.1;

/// Trace, determinant and kind of the linearization at (y, ξ).
pub fn classify_fixed_point(j: u8, y: f64, xi: f64, p: &AnnulusParams) -> Result<AnnulusFixedPoint> {
    let l = annulus_jacobian(y, xi, p)?;
    let trace = l[0][0] + l[1][1];
    let det = l[0][0] * l[1][1] - l[0][1] * l[1][0];
    let scale = l.iter().flatten().map(|v| v * v).sum::<f64>();
    if det.abs() < 1e-10 * scale {
        return Err(Error::IndeterminateKind { det });
    }
    let (f1, f2) = annulus_rhs(y, xi, p)?;
    Ok(AnnulusFixedPoint {
        j,
        y,
        xi,
        kind: if det < 0.0 {
            FixedPointKind::Saddle
        } else {
            FixedPointKind::Center
        },
        trace,
        det,
        eta: p.eta,
        residual: f1.hypot(f2),
    })
}

/// Closed-form fixed points of the η = 0 system.
pub fn leading_fixed_points(p: &AnnulusParams, delta0: f64) -> Result<Vec<AnnulusFixedPoint>> {
    let p0 = p.with_eta(0.0);
    let mut out = vec![
        classify_fixed_point(1, 0.0, 0.0, &p0)?,
        classify_fixed_point(2, 0.0, PI, &p0)?,
    ];
    if p.alpha2 != 0.0 {
        let ratio = p.alpha1 / (4.0 * p.alpha2 * p.omega);
        if (ratio.abs() - 1.0).abs() <= delta0 {
            return Err(Error::BoundaryCase { ratio: ratio.abs() });
        }
        if ratio.abs() < 1.0 {
            let xi = (-ratio).acos();
            out.push(classify_fixed_point(3, 0.0, xi, &p0)?);
            out.push(classify_fixed_point(4, 0.0, -xi, &p0)?);
        }
    }
    Ok(out)
}

/// First-order coefficients y₁ with y = ηy₁ + O(η²), indexed by branch.
pub fn first_order_coefficient(j: u8, p: &AnnulusParams) -> f64 {
    let (a1, a2, om) = (p.alpha1, p.alpha2, p.omega);
    let h = p.h();
    let l0 = p.rho0() * p.rho0().ln() / (h * h);
    match j {
        1 => -(2.0 * om * (a2 * om + a1) + (2.0 * a2 + a1 / om) * l0) / (4.0 * om),
        2 => -(2.0 * om * (a2 * om - a1) + (2.0 * a2 - a1 / om) * l0) / (4.0 * om),
        _ => (8.0 * a2 * a2 * om * om + a1 * a1) / (16.0 * a2 * om) + a2 / (2.0 * om) * l0,
    }
}

pub const FIXED_POINT_TOL: f64 = 1e-12;

/// Newton solve at fixed η; ξ stays pinned for branches 1 and 2.
fn newton_fixed_point(j: u8, y0: f64, xi0: f64, p: &AnnulusParams) -> Option<(f64, f64)> {
    let (mut y, mut xi) = (y0, xi0);
    for _ in 0..60 {
        let (f1, f2) = annulus_rhs(y, xi, p).ok()?;
        if f1.hypot(f2) <= FIXED_POINT_TOL {
            return Some((y, xi));
        }
        let l = annulus_jacobian(y, xi, p).ok()?;
        if j <= 2 {
            if l[1][0] == 0.0 {
                return None;
            }
            y -= f2 / l[1][0];
        } else {
            let det = l[0][0] * l[1][1] - l[0][1] * l[1][0];
            if det == 0.0 {
                return None;
            }
            y -= (l[1][1] * f1 - l[0][1] * f2) / det;
            xi -= (-l[1][0] * f1 + l[0][0] * f2) / det;
        }
        if !y.is_finite() || !xi.is_finite() {
            return None;
        }
    }
    let (f1, f2) = annulus_rhs(y, xi, p).ok()?;
    (f1.hypot(f2) <= FIXED_POINT_TOL).then_some((y, xi))
}

/// Fixed points at η by Newton continuation from the η = 0 closed forms.
pub fn refine_fixed_points(p: &AnnulusParams, continuation_steps: usize, delta0: f64) -> Result<Vec<AnnulusFixedPoint>> {
    let lead = leading_fixed_points(p, delta0)?;
    let steps = continuation_steps.max(1);
    lead.iter()
        .map(|fp| {
            let (mut y, mut xi) = (fp.y, fp.xi);
            let mut eta = 0.0;
            let target = p.eta;
            let mut step = target / steps as f64;
            let mut halvings = 0;
            while (target - eta).abs() > 0.0 {
                let next = if (target - eta).abs() <= step.abs() { target } else { eta + step };
                // Predictor: first-order coefficient, then secant through the origin.
                let guess_y = if eta == 0.0 {
                    next * first_order_coefficient(fp.j, p)
                } else {
                    y * next / eta
                };
                match newton_fixed_point(fp.j, guess_y, xi, &p.with_eta(next)) {
                    Some((ny, nxi)) => {
                        y = ny;
                        xi = nxi;
                        eta = next;
                    }
                    None => {
                        halvings += 1;
                        if halvings > 30 {
                            return Err(Error::ContinuationFailure { eta: next });
                        }
                        step *= 0.5;
                    }
                }
            }
            if fp.j == 1 {
                xi = 0.0;
            } else if fp.j == 2 {
                xi = PI;
            }
            classify_fixed_point(fp.j, y, xi, p)
        })
        .collect()
}

/// x − ln(1 + x) without cancellation for small x.
fn x_minus_log1p(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let mut term = x;
        let mut sum = 0.0;
        for k in 2..40 {
            term *= -x;
            sum -= term / k as f64;
        }
        // term_k = (-1)^{k+1} x^k, so x − ln(1+x) = Σ_{k≥2} (-1)^k x^k / k.
        sum
    } else {
        x - x.ln_1p()
    }
}

/// Rescaled Hamiltonian Ĥ of the annulus system; reduces to H̃ at η = 0.
pub fn rescaled_hamiltonian(y: f64, xi: f64, p: &AnnulusParams) -> Result<f64> {
    let i = p.modulus(y)?;
    if p.eta == 0.0 {
        return Ok(leading_hamiltonian(y, xi, p));
    }
    let h2 = p.h() * p.h();
    let r0 = p.rho0();
    let om = p.omega;
    // x = h²(I² − ω²)/ρ₀ with I² − ω² = ηy(2ω + ηy).
    let x = h2 * p.eta * y * (2.0 * om + p.eta * y) / r0;
    let kinetic = r0 * r0 / (om * p.eta * p.eta * h2 * h2) * x_minus_log1p(x);
    let rho = 1.0 + h2 * i * i;
    let potential = r0 / (om * h2) * (p.alpha1 * i * xi.cos() + p.alpha2 * i * i * (2.0 * xi).cos()) * rho.ln();
    Ok(kinetic + potential)
}
