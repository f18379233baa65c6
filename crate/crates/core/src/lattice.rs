//! Lattice states, the integrable and perturbed vector fields, basic
//! invariants, the linearization at the uniform solution and the block
//! mode coordinates.

use crate::error::{Error, Result};
use crate::io::{self, CsvWriter, Meta};
use crate::linalg::{csqrt, C64};
use std::f64::consts::PI;
use std::ops::Deref;

const I: C64 = C64::new(0.0, 1.0);

/// Number of sites together with the derived spacing h = 1/N and the
/// mode count M.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct LatticeSize {
    n: usize,
}

impl LatticeSize {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::LatticeTooSmall(n));
        }
        Ok(LatticeSize { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Highest cosine mode index: N/2 for even N, (N-1)/2 for odd N.
    pub fn m(&self) -> usize {
        self.n / 2
    }

    /// Wavenumber k_j = 2πj/N.
    pub fn k(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n as f64
    }
}

/// Largest evenness violation max_n |q_n - q_{N-n}|.
pub fn evenness_residual(q: &[C64]) -> f64 {
    let n = q.len();
    (1..n)
        .map(|i| (q[i] - q[n - i]).norm())
        .fold(0.0, f64::max)
}

/// Even part (q_n + q_{N-n})/2 of a periodic sequence.
pub fn even_part(q: &[C64]) -> Vec<C64> {
    let n = q.len();
    (0..n).map(|i| 0.5 * (q[i] + q[(n - i) % n])).collect()
}

fn sup_norm(q: &[C64]) -> f64 {
    q.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// A periodic, even lattice configuration q_0 … q_{N-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    q: Vec<C64>,
    size: LatticeSize,
}

impl LatticeState {
    /// Relative evenness tolerance accepted by [`LatticeState::new`].
    pub const EVEN_TOL: f64 = 1e-12;

    pub fn new(q: Vec<C64>) -> Result<Self> {
        let size = LatticeSize::new(q.len())?;
        let res = evenness_residual(&q);
        if res > Self::EVEN_TOL * sup_norm(&q).max(1.0) {
            return Err(Error::NotEven { residual: res });
        }
        Ok(LatticeState { q, size })
    }

    /// Project an arbitrary periodic sequence onto its even part.
    pub fn symmetrized(q: &[C64]) -> Result<Self> {
        let size = LatticeSize::new(q.len())?;
        Ok(LatticeState {
            q: even_part(q),
            size,
        })
    }

    pub fn uniform(size: LatticeSize, value: C64) -> Self {
        LatticeState {
            q: vec![value; size.n()],
            size,
        }
    }

    pub fn zeros(size: LatticeSize) -> Self {
        Self::uniform(size, C64::new(0.0, 0.0))
    }

    pub fn size(&self) -> LatticeSize {
        self.size
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.q
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.q
    }

    pub fn to_json(&self, omega: f64) -> String {
        let doc = StateDoc {
            n: self.size.n(),
            omega,
            q: self.q.iter().map(|c| [c.re, c.im]).collect(),
        };
        serde_json::to_string(&doc).expect("state serializes")
    }

    /// Parse the JSON form; returns the state and the stored ω.
    pub fn from_json(text: &str) -> Result<(Self, f64)> {
        let doc: StateDoc =
            serde_json::from_str(text).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        if doc.q.len() != doc.n {
            return Err(Error::LengthMismatch {
                expected: doc.n,
                got: doc.q.len(),
            });
        }
        let q = doc.q.iter().map(|p| C64::new(p[0], p[1])).collect();
        Ok((LatticeState::new(q)?, doc.omega))
    }

    pub fn to_csv(&self, meta: Option<&Meta>) -> String {
        let mut w = CsvWriter::new(Vec::new(), meta, &["n", "re", "im"]).expect("in-memory write");
        for (n, c) in self.q.iter().enumerate() {
            w.row(&[n.to_string(), io::float(c.re), io::float(c.im)])
                .expect("in-memory write");
        }
        String::from_utf8(w.finish().expect("in-memory write")).expect("utf8")
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = io::csv_rows(text);
        let mut q = vec![C64::new(0.0, 0.0); rows.len()];
        for r in rows {
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::InvalidParameter(format!("csv value {s:?}: {e}")))
            };
            if r.len() != 3 {
                return Err(Error::InvalidParameter("state csv needs 3 columns".into()));
            }
            let n: usize = r[0]
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad site index {:?}", r[0])))?;
            if n >= q.len() {
                return Err(Error::InvalidParameter(format!("site index {n} out of range")));
            }
            q[n] = C64::new(parse(r[1])?, parse(r[2])?);
        }
        LatticeState::new(q)
    }
}

impl Deref for LatticeState {
    type Target = [C64];
    fn deref(&self) -> &[C64] {
        &self.q
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct StateDoc {
    n: usize,
    omega: f64,
    q: Vec<[f64; 2]>,
}

/// Parameters of the integrable lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ALParams {
    pub omega: f64,
    pub size: LatticeSize,
}

/// Coefficients of the Hamiltonian perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct PerturbationParams {
    pub epsilon: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

/// (ρ/h²) ln ρ with ρ = 1 + h²|q|², evaluated without cancellation.
pub(crate) fn log_rho_term(q: C64, h: f64) -> f64 {
    let x = h * h * q.norm_sqr();
    (1.0 + x) * x.ln_1p() / (h * h)
}

/// Integrable field written into `out`; works on any periodic sequence.
pub fn al_rhs_into(q: &[C64], omega: f64, out: &mut [C64]) {
    let n = q.len();
    let h = 1.0 / n as f64;
    let inv_h2 = 1.0 / (h * h);
    let w2 = 2.0 * omega * omega;
    for i in 0..n {
        let qp = q[(i + 1) % n];
        let qm = q[(i + n - 1) % n];
        let lap = (qp - 2.0 * q[i] + qm) * inv_h2;
        let val = lap + q[i].norm_sqr() * (qp + qm) - w2 * q[i];
        out[i] = -I * val;
    }
}

/// dq/dt of the integrable lattice.
pub fn al_rhs(state: &LatticeState, params: &ALParams) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); state.len()];
    al_rhs_into(state, params.omega, &mut out);
    out
}

/// The two gradient-type terms (g⁽¹⁾, g⁽²⁾) entering the Melnikov integrand.
pub fn perturbation_terms_raw(q: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let h = 1.0 / q.len() as f64;
    q.iter()
        .map(|&x| {
            let l = log_rho_term(x, h);
            let xb = x.conj();
            let g1 = l + (x + xb) * xb;
            let g2 = 2.0 * x * l + (x * x + xb * xb) * xb;
            (g1, g2)
        })
        .unzip()
}

pub fn perturbation_terms(state: &LatticeState) -> (Vec<C64>, Vec<C64>) {
    perturbation_terms_raw(state)
}

/// Perturbed field written into `out`.
pub fn perturbed_rhs_into(q: &[C64], omega: f64, pert: &PerturbationParams, out: &mut [C64]) {
    al_rhs_into(q, omega, out);
    if pert.epsilon == 0.0 {
        return;
    }
    let h = 1.0 / q.len() as f64;
    for (o, &x) in out.iter_mut().zip(q) {
        let l = log_rho_term(x, h);
        let xb = x.conj();
        let p = pert.alpha1 * (l + (x + xb) * x) + pert.alpha2 * (2.0 * xb * l + (x * x + xb * xb) * x);
        *o += -I * pert.epsilon * p;
    }
}

pub fn perturbed_rhs(state: &LatticeState, params: &ALParams, pert: &PerturbationParams) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); state.len()];
    perturbed_rhs_into(state, params.omega, pert, &mut out);
    out
}

/// I₂ = Σ q̄_n (q_{n+1} + q_{n-1}).
pub fn i2_invariant(q: &[C64]) -> C64 {
    let n = q.len();
    (0..n)
        .map(|i| q[i].conj() * (q[(i + 1) % n] + q[(i + n - 1) % n]))
        .sum()
}

/// q_c(t) = a exp(-i[2(a² - ω²)t - γ]).
pub fn uniform_orbit(a: f64, omega: f64, gamma: f64, t: f64) -> C64 {
    C64::from_polar(a, -(2.0 * (a * a - omega * omega) * t - gamma))
}

/// Open amplitude interval in which exactly one linear mode is unstable.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct AmplitudeWindow {
    pub lower: f64,
    pub upper: f64,
}

impl AmplitudeWindow {
    pub fn contains(&self, a: f64) -> bool {
        a > self.lower && a < self.upper
    }

    /// Midpoint, using `cap` in place of an infinite upper bound.
    pub fn midpoint(&self, cap: f64) -> f64 {
        let up = if self.upper.is_finite() { self.upper } else { cap };
        0.5 * (self.lower + up)
    }
}

pub fn amplitude_window(n: usize) -> AmplitudeWindow {
    let nf = n as f64;
    let lower = nf * (PI / nf).tan();
    let upper = if n <= 4 {
        f64::INFINITY
    } else {
        nf * (2.0 * PI / nf).tan()
    };
    AmplitudeWindow { lower, upper }
}

/// Linear growth rates Ω_j^(±) at the uniform solution, j = 0…M.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrowthRates {
    pub omega: Vec<(C64, C64)>,
}

pub fn linearized_growth_rates(a: f64, n: usize) -> LinearGrowthRates {
    let nf = n as f64;
    let omega = (0..=n / 2)
        .map(|j| {
            let k = 2.0 * PI * j as f64 / nf;
            let t = (k / 2.0).tan();
            let r = 2.0
                * k.sin()
                * (a * a + nf * nf).sqrt()
                * csqrt(C64::new(a * a - nf * nf * t * t, 0.0));
            let r = if j == 0 { C64::new(0.0, 0.0) } else { r };
            (r, -r)
        })
        .collect();
    LinearGrowthRates { omega }
}

/// Angle ϑ of the unstable direction in the first cosine mode.
pub fn vtheta_angle(a: f64, n: usize) -> Result<f64> {
    let nf = n as f64;
    let c2 = (2.0 * PI / nf).cos();
    let s2 = (2.0 * PI / nf).sin();
    let t1 = (PI / nf).tan();
    let radicand = (a * a + nf * nf) * s2 * s2 * (a * a - nf * nf * t1 * t1);
    let num = radicand.max(0.0).sqrt();
    let den = nf * nf - (nf * nf + a * a) * c2;
    if num == 0.0 && den == 0.0 {
        return Err(Error::DegenerateDenominator { a, n });
    }
    Ok(-0.5 * num.atan2(den))
}

/// Coordinates of the block around the circle of uniform states.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BlockCoords {
    pub a: f64,
    pub gamma: f64,
    pub b1: f64,
    pub b2: f64,
    /// c_2 … c_M.
    pub c: Vec<C64>,
    pub vtheta: f64,
}

/// Cosine amplitudes A_j with q_n = Σ_j A_j cos(k_j n).
fn cosine_modes(q: &[C64]) -> Vec<C64> {
    let n = q.len();
    let nf = n as f64;
    (0..=n / 2)
        .map(|j| {
            let k = 2.0 * PI * j as f64 / nf;
            let w = if j == 0 || 2 * j == n { 1.0 / nf } else { 2.0 / nf };
            q.iter()
                .enumerate()
                .map(|(i, &x)| x * (k * i as f64).cos())
                .sum::<C64>()
                * w
        })
        .collect()
}

/// Decompose an even state into block coordinates, with ϑ evaluated at
/// the reference amplitude `a_ref`.
pub fn to_block_coords(state: &LatticeState, a_ref: f64) -> Result<BlockCoords> {
    let modes = cosine_modes(state);
    let a0 = modes[0];
    if a0.norm() == 0.0 {
        return Err(Error::ZeroCarrier);
    }
    let gamma = a0.arg().rem_euclid(2.0 * PI);
    let a = a0.norm();
    let vtheta = vtheta_angle(a_ref, state.size().n())?;
    let rot = C64::from_polar(1.0, -gamma);
    let w = modes[1] * rot;
    let (s, c) = vtheta.sin_cos();
    if s.abs() < 1e-14 || c.abs() < 1e-14 {
        return Err(Error::SingularModeSystem);
    }
    // Re: (b1 + b2) cos ϑ, Im: (b1 - b2) sin ϑ.
    let sum = w.re / c;
    let diff = w.im / s;
    Ok(BlockCoords {
        a,
        gamma,
        b1: 0.5 * (sum + diff),
        b2: 0.5 * (sum - diff),
        c: modes[2..].iter().map(|&m| m * rot).collect(),
        vtheta,
    })
}

pub fn from_block_coords(bc: &BlockCoords, size: LatticeSize) -> Result<LatticeState> {
    let m = size.m();
    if bc.c.len() + 1 != m {
        return Err(Error::LengthMismatch {
            expected: m - 1,
            got: bc.c.len(),
        });
    }
    let a1 = bc.b1 * C64::from_polar(1.0, bc.vtheta) + bc.b2 * C64::from_polar(1.0, -bc.vtheta);
    let phase = C64::from_polar(1.0, bc.gamma);
    let q = (0..size.n())
        .map(|i| {
            let nf = i as f64;
            let mut v = C64::new(bc.a, 0.0) + a1 * (size.k(1) * nf).cos();
            for (idx, &cj) in bc.c.iter().enumerate() {
                v += cj * (size.k(idx + 2) * nf).cos();
            }
            phase * v
        })
        .collect();
    Ok(LatticeState { q, size })
}
