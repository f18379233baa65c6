//! Time integration of the lattice, plane and annulus flows with an embedded
//! Dormand-Prince 5(4) pair, invariant-drift monitoring and decay-rate fits.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::floquet::{discriminant, invariant_f};
use crate::lattice::{al_rhs_into, i2_invariant, perturbed_rhs_into, LatticeState, PerturbationParams};
use crate::linalg::C64;
use crate::resonance::{annulus_rhs, plane_rhs, AnnulusParams};

/// Step-size control settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct IntegratorSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Constant step without error control; used for order studies.
    pub fixed_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        IntegratorSpec {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            fixed_step: None,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorSpec {
    pub fn with_tol(rel_tol: f64) -> Self {
        IntegratorSpec {
            rel_tol,
            abs_tol: 1e-2 * rel_tol,
            ..Default::default()
        }
    }

    pub fn fixed(step: f64) -> Self {
        IntegratorSpec {
            fixed_step: Some(step),
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0) {
            return Err(Error::InvalidParameter("tolerances and max_step must be positive".into()));
        }
        if let Some(h) = self.fixed_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidParameter("fixed_step must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Vector field to integrate. Lattice fields act on interleaved (Re q, Im q),
/// the plane field on one complex amplitude and the annulus field on (y, ξ).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum Field {
    Integrable { omega: f64 },
    Perturbed { omega: f64, pert: PerturbationParams },
    Plane { omega: f64, n: usize, pert: PerturbationParams },
    Annulus(AnnulusParams),
}

impl Field {
    pub fn is_lattice(&self) -> bool {
        matches!(self, Field::Integrable { .. } | Field::Perturbed { .. })
    }

    fn eval(&self, y: &[f64], dy: &mut [f64], scratch: &mut Vec<C64>, out: &mut Vec<C64>) -> Result<()> {
        match self {
            Field::Integrable { .. } | Field::Perturbed { .. } => {
                let n = y.len() / 2;
                scratch.clear();
                scratch.extend(y.chunks_exact(2).map(|c| C64::new(c[0], c[1])));
                out.resize(n, C64::new(0.0, 0.0));
                match self {
                    Field::Integrable { omega } => al_rhs_into(scratch, *omega, out),
                    Field::Perturbed { omega, pert } => perturbed_rhs_into(scratch, *omega, pert, out),
                    _ => unreachable!(),
                }
                for (d, v) in dy.chunks_exact_mut(2).zip(out.iter()) {
                    d[0] = v.re;
                    d[1] = v.im;
                }
            }
            Field::Plane { omega, n, pert } => {
                let v = plane_rhs(C64::new(y[0], y[1]), *omega, *n, pert);
                dy[0] = v.re;
                dy[1] = v.im;
            }
            Field::Annulus(p) => {
                let (a, b) = annulus_rhs(y[0], y[1], p)?;
                dy[0] = a;
                dy[1] = b;
            }
        }
        Ok(())
    }

    fn validate(&self, y: &[f64]) -> Result<()> {
        let expected = match self {
            Field::Plane { .. } | Field::Annulus(_) => 2,
            _ => {
                if y.len() % 2 != 0 || y.len() < 6 {
                    return Err(Error::InvalidParameter("lattice state needs N >= 3 complex entries".into()));
                }
                let q = unpack(y);
                LatticeState::new(q)?;
                y.len()
            }
        };
        if y.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                got: y.len(),
            });
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("initial state is not finite".into()));
        }
        Ok(())
    }

    /// Replace q_n by (q_n + q_{N-n})/2 and return the largest |q_n - q_{N-n}| before.
    fn project(&self, y: &mut [f64]) -> f64 {
        if !self.is_lattice() {
            return 0.0;
        }
        let n = y.len() / 2;
        let mut res: f64 = 0.0;
        for i in 1..=(n - 1) / 2 {
            let j = n - i;
            let (ar, ai, br, bi) = (y[2 * i], y[2 * i + 1], y[2 * j], y[2 * j + 1]);
            res = res.max((ar - br).hypot(ai - bi));
            let (mr, mi) = (0.5 * (ar + br), 0.5 * (ai + bi));
            y[2 * i] = mr;
            y[2 * i + 1] = mi;
            y[2 * j] = mr;
            y[2 * j + 1] = mi;
        }
        res
    }
}

pub fn pack(q: &[C64]) -> Vec<f64> {
    q.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn unpack(y: &[f64]) -> Vec<C64> {
    y.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect()
}

// Dormand-Prince 5(4) tableau; the fields are autonomous so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Continuous extension over one accepted step.
#[derive(Debug, Clone, PartialEq)]
struct DenseStep {
    t0: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl DenseStep {
    fn eval(&self, t: f64) -> Vec<f64> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        (0..self.r[0].len())
            .map(|i| {
                let r = |k: usize| self.r[k][i];
                r(0) + th * (r(1) + th1 * (r(2) + th * (r(3) + th1 * r(4))))
            })
            .collect()
    }
}

/// Accepted steps of one integration, with dense output between them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub field: Field,
    /// Monotone in the direction of integration.
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest evenness defect removed by projection (lattice fields).
    pub max_projection_residual: f64,
    dense: Vec<DenseStep>,
}

impl Trajectory {
    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// Interpolated state at t inside the integrated interval.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let (lo, hi) = if self.t_start() <= self.t_end() {
            (self.t_start(), self.t_end())
        } else {
            (self.t_end(), self.t_start())
        };
        if !(t >= lo && t <= hi) {
            return Err(Error::InvalidParameter(format!("t = {t} outside [{lo}, {hi}]")));
        }
        if self.dense.is_empty() {
            return Ok(self.states[0].clone());
        }
        let fwd = self.t_end() >= self.t_start();
        let k = self.times[1..].partition_point(|&s| if fwd { s < t } else { s > t });
        Ok(self.dense[k.min(self.dense.len() - 1)].eval(t))
    }

    /// Dense output at the requested times.
    pub fn sample(&self, times: &[f64]) -> Result<Vec<Vec<f64>>> {
        times.iter().map(|&t| self.eval(t)).collect()
    }

    /// Accepted lattice states; fails for non-lattice fields.
    pub fn lattice_states(&self) -> Result<Vec<LatticeState>> {
        if !self.field.is_lattice() {
            return Err(Error::InvalidParameter("trajectory is not a lattice trajectory".into()));
        }
        self.states.iter().map(|y| LatticeState::new(unpack(y))).collect()
    }
}

fn weighted_rms(err: &[f64], y0: &[f64], y1: &[f64], spec: &IntegratorSpec) -> f64 {
    let s: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = spec.abs_tol + spec.rel_tol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / err.len() as f64).sqrt()
}

struct Stepper<'a> {
    field: &'a Field,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    scratch: Vec<C64>,
    out: Vec<C64>,
    evaluations: usize,
}

impl<'a> Stepper<'a> {
    fn new(field: &'a Field, dim: usize) -> Self {
        Stepper {
            field,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
            scratch: Vec::new(),
            out: Vec::new(),
            evaluations: 0,
        }
    }

    fn f(&mut self, y: &[f64], slot: usize) -> Result<()> {
        self.evaluations += 1;
        let mut dy = std::mem::take(&mut self.k[slot]);
        let r = self.field.eval(y, &mut dy, &mut self.scratch, &mut self.out);
        self.k[slot] = dy;
        r
    }

    /// One step from (y, k[0] = f(y)); leaves y1 in `y1` and f(y1) in k[6].
    /// Returns the error vector (scaled by h) in `err`.
    fn step(&mut self, y: &[f64], h: f64, y1: &mut [f64], err: &mut [f64]) -> Result<()> {
        for s in 1..7 {
            for i in 0..y.len() {
                let mut acc = 0.0;
                for (j, a) in A[s].iter().enumerate().take(s) {
                    acc += a * self.k[j][i];
                }
                self.tmp[i] = y[i] + h * acc;
            }
            let tmp = std::mem::take(&mut self.tmp);
            let r = self.f(&tmp, s);
            self.tmp = tmp;
            r?;
        }
        // Stage 7 was evaluated at the fifth-order solution.
        y1.copy_from_slice(&self.tmp);
        for i in 0..y.len() {
            err[i] = h * (0..7).map(|j| E[j] * self.k[j][i]).sum::<f64>();
        }
        Ok(())
    }

    fn dense(&self, t0: f64, h: f64, y0: &[f64], y1: &[f64]) -> DenseStep {
        let n = y0.len();
        let mut r: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
        for i in 0..n {
            let dy = y1[i] - y0[i];
            let bspl = h * self.k[0][i] - dy;
            r[0][i] = y0[i];
            r[1][i] = dy;
            r[2][i] = bspl;
            r[3][i] = dy - h * self.k[6][i] - bspl;
            r[4][i] = h * (0..7).map(|j| D[j] * self.k[j][i]).sum::<f64>();
        }
        DenseStep { t0, h, r }
    }
}

fn initial_step(st: &mut Stepper, y0: &[f64], dir: f64, spec: &IntegratorSpec, span: f64) -> Result<f64> {
    let sc: Vec<f64> = y0.iter().map(|v| spec.abs_tol + spec.rel_tol * v.abs()).collect();
    let norm = |v: &[f64]| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    let d0 = norm(y0);
    let d1 = norm(&st.k[0]);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(spec.max_step).min(span);
    let y1: Vec<f64> = y0.iter().zip(&st.k[0]).map(|(y, k)| y + dir * h0 * k).collect();
    st.f(&y1, 1)?;
    let d2 = norm(&st.k[1].iter().zip(&st.k[0]).map(|(a, b)| a - b).collect::<Vec<_>>()) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(spec.max_step).min(span))
}

/// Integrate `field` from `init` over t_span = (t0, t1); t1 < t0 runs backwards.
pub fn integrate(field: &Field, init: &[f64], t_span: (f64, f64), spec: &IntegratorSpec) -> Result<Trajectory> {
    spec.validate()?;
    field.validate(init)?;
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(Error::InvalidParameter("t_span must be finite".into()));
    }
    let dim = init.len();
    let mut y = init.to_vec();
    let mut max_res = field.project(&mut y);
    let mut traj = Trajectory {
        field: *field,
        times: vec![t0],
        states: vec![y.clone()],
        accepted: 0,
        rejected: 0,
        evaluations: 0,
        max_projection_residual: max_res,
        dense: Vec::new(),
    };
    if t0 == t1 {
        return Ok(traj);
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut st = Stepper::new(field, dim);
    st.f(&y, 0)?;
    let mut y1 = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    let mut t = t0;
    let mut h = match spec.fixed_step {
        Some(hf) => hf.min(span),
        None => initial_step(&mut st, &y, dir, spec, span)?,
    };
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;
    loop {
        if traj.accepted + traj.rejected >= spec.max_steps {
            return Err(Error::ToleranceNotMet(format!("step budget {} exhausted at t = {t}", spec.max_steps)));
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining * (1.0 - 1e-12);
        if last {
            h = remaining;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t });
        }
        let hs = dir * h;
        st.step(&y, hs, &mut y1, &mut err)?;
        let (accept, e) = match spec.fixed_step {
            Some(_) => (true, 0.0),
            None => {
                let e = weighted_rms(&err, &y, &y1, spec);
                (e <= 1.0 && e.is_finite(), e)
            }
        };
        if accept {
            let t_new = if last { t1 } else { t + hs };
            let dense = st.dense(t, hs, &y, &y1);
            let res = field.project(&mut y1);
            max_res = max_res.max(res);
            std::mem::swap(&mut y, &mut y1);
            st.k.swap(0, 6);
            traj.dense.push(dense);
            traj.times.push(t_new);
            traj.states.push(y.clone());
            traj.accepted += 1;
            t = t_new;
            if last {
                break;
            }
            if let Some(hf) = spec.fixed_step {
                h = hf;
            } else {
                let fac11 = e.powf(0.2 - BETA * 0.75);
                let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut h_new = h / fac;
                if last_rejected {
                    h_new = h_new.min(h);
                }
                fac_old = e.max(1e-4);
                h = h_new.min(spec.max_step);
                last_rejected = false;
            }
        } else {
            traj.rejected += 1;
            last_rejected = true;
            let fac11 = if e.is_finite() { e.powf(0.2 - BETA * 0.75) } else { 1.0 / FAC_MIN };
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
        }
    }
    traj.evaluations = st.evaluations;
    traj.max_projection_residual = max_res;
    Ok(traj)
}

/// Lattice-state convenience wrapper around [`integrate`].
pub fn integrate_lattice(
    field: &Field,
    init: &LatticeState,
    t_span: (f64, f64),
    spec: &IntegratorSpec,
) -> Result<Trajectory> {
    if !field.is_lattice() {
        return Err(Error::InvalidParameter("field does not act on lattice states".into()));
    }
    integrate(field, &pack(init), t_span, spec)
}

/// Independent integrations in parallel.
pub fn integrate_batch(
    field: &Field,
    inits: &[Vec<f64>],
    t_span: (f64, f64),
    spec: &IntegratorSpec,
) -> Vec<Result<Trajectory>> {
    inits.par_iter().map(|y| integrate(field, y, t_span, spec)).collect()
}

/// Drift of one monitored quantity along a trajectory.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct InvariantDrift {
    pub name: String,
    pub reference: C64,
    pub max_drift: f64,
    /// max_drift / |reference|, or max_drift when the reference vanishes.
    pub relative_drift: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct InvariantDriftReport {
    pub epsilon: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub invariants: Vec<InvariantDrift>,
}

impl InvariantDriftReport {
    pub fn get(&self, name: &str) -> Option<&InvariantDrift> {
        self.invariants.iter().find(|d| d.name == name)
    }
}

fn drift(name: String, values: &[C64]) -> InvariantDrift {
    let reference = values[0];
    let max_drift = values.iter().map(|v| (v - reference).norm()).fold(0.0, f64::max);
    let scale = reference.norm();
    InvariantDrift {
        name,
        reference,
        max_drift,
        relative_drift: if scale > 0.0 { max_drift / scale } else { max_drift },
    }
}

/// Δ̃(z_k) at each z sample, F̃₁ at the critical point tracked from `f1_seed`
/// (re-rooted at every state), and I₂, over the accepted states.
pub fn monitor_invariants(
    traj: &Trajectory,
    z_samples: &[C64],
    f1_seed: Option<C64>,
    epsilon: f64,
) -> Result<InvariantDriftReport> {
    let states = traj.lattice_states()?;
    let mut invariants = Vec::new();
    let per_z: Vec<Result<Vec<C64>>> = z_samples
        .par_iter()
        .map(|&z| {
            states
                .iter()
                .map(|s| discriminant(z, s).map(|d| d.delta / d.d))
                .collect()
        })
        .collect();
    for (z, vals) in z_samples.iter().zip(per_z) {
        invariants.push(drift(format!("delta_tilde({:.6}{:+.6}i)", z.re, z.im), &vals?));
    }
    if let Some(seed) = f1_seed {
        let mut zc = seed;
        let mut vals = Vec::with_capacity(states.len());
        for s in &states {
            let v = invariant_f(s, zc)?;
            zc = v.zc;
            vals.push(v.value);
        }
        invariants.push(drift("F1".into(), &vals));
    }
    let i2: Vec<C64> = states.iter().map(|s| i2_invariant(s)).collect();
    invariants.push(drift("I2".into(), &i2));
    Ok(InvariantDriftReport {
        epsilon,
        t_start: traj.t_start(),
        t_end: traj.t_end(),
        samples: states.len(),
        invariants,
    })
}

/// Least-squares line through (t, ln distance).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_decay_rate(samples: &[(f64, f64)]) -> Result<DecayFit> {
    if samples.len() < 8 {
        return Err(Error::InvalidParameter(format!("decay fit needs >= 8 samples, got {}", samples.len())));
    }
    if samples.iter().any(|&(t, d)| !(d > 1e-14) || !t.is_finite()) {
        return Err(Error::InvalidParameter("decay fit needs finite t and distances > 1e-14".into()));
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &(_, d)| (lo.min(d), hi.max(d)));
    let decades = (hi / lo).log10();
    if decades < 2.0 {
        return Err(Error::InsufficientDecade { decades });
    }
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(DecayFit {
        rate: -slope,
        intercept,
        r2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::darboux::{even_heteroclinic_orbit, Ear, OrbitParams};
    use crate::lattice::{uniform_orbit, LatticeSize};
    use crate::resonance::rescaled_hamiltonian;
    use rand::{Rng, SeedableRng};

    fn uniform_init(a: f64, n: usize) -> LatticeState {
        LatticeState::uniform(LatticeSize::new(n).unwrap(), C64::new(a, 0.0))
    }

    fn uniform_error(traj: &Trajectory, a: f64, omega: f64) -> f64 {
        traj.times
            .iter()
            .zip(&traj.states)
            .map(|(&t, y)| {
                let exact = uniform_orbit(a, omega, 0.0, t);
                unpack(y).iter().map(|q| (q - exact).norm()).fold(0.0, f64::max) / a
            })
            .fold(0.0, f64::max)
    }

    fn random_even(n: usize, seed: u64, amp: f64) -> LatticeState {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let half: Vec<C64> = (0..=n / 2)
            .map(|_| C64::new(rng.gen_range(-amp..amp), rng.gen_range(-amp..amp)))
            .collect();
        LatticeState::new((0..n).map(|i| half[i.min(n - i)]).collect()).unwrap()
    }

    #[test]
    fn uniform_orbit_within_ten_tol() {
        let (a, omega) = (2.0, 1.5);
        let field = Field::Integrable { omega };
        let spec = IntegratorSpec::with_tol(1e-10);
        let traj = integrate_lattice(&field, &uniform_init(a, 6), (0.0, 1.0), &spec).unwrap();
        let err = uniform_error(&traj, a, omega);
        assert!(err <= 10.0 * spec.rel_tol, "{err:e}");
        assert!(traj.max_projection_residual <= 10.0 * spec.rel_tol);
        let mid = unpack(&traj.eval(0.37).unwrap());
        assert!((mid[2] - uniform_orbit(a, omega, 0.0, 0.37)).norm() / a <= 10.0 * spec.rel_tol);
    }

    #[test]
    fn tolerance_halving_does_not_increase_error() {
        let (a, omega) = (2.0, 1.5);
        let field = Field::Integrable { omega };
        let errs: Vec<f64> = [1e-7, 5e-8, 2.5e-8]
            .iter()
            .map(|&tol| {
                let t = integrate_lattice(&field, &uniform_init(a, 6), (0.0, 1.0), &IntegratorSpec::with_tol(tol)).unwrap();
                uniform_error(&t, a, omega)
            })
            .collect();
        // Per-step control gives global error ~ tol^(4/5), a ratio of about 0.57 per halving.
        assert!(errs[1] <= 0.6 * errs[0] && errs[2] <= 0.6 * errs[1], "{errs:?}");
    }

    #[test]
    fn fixed_step_order_is_five() {
        let (a, omega) = (2.0, 1.5);
        let field = Field::Integrable { omega };
        let errs: Vec<f64> = [0.01, 0.005, 0.0025]
            .iter()
            .map(|&h| {
                let t = integrate_lattice(&field, &uniform_init(a, 6), (0.0, 1.0), &IntegratorSpec::fixed(h)).unwrap();
                uniform_error(&t, a, omega)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((4.5..=5.5).contains(&order), "{errs:?}");
        }
    }

    #[test]
    fn heteroclinic_shadowing() {
        let params = OrbitParams::new(3.48, 3.48, 0.3, 0.0, Ear::Plus, 6).unwrap();
        let field = Field::Integrable { omega: params.omega };
        let init = even_heteroclinic_orbit(&params, -1.0).unwrap();
        let spec = IntegratorSpec::with_tol(1e-12);
        let traj = integrate_lattice(&field, &init, (-1.0, 1.0), &spec).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..=20 {
            let t = -1.0 + 0.1 * k as f64;
            let got = unpack(&traj.eval(t).unwrap());
            let exact = even_heteroclinic_orbit(&params, t).unwrap();
            for (g, e) in got.iter().zip(exact.iter()) {
                worst = worst.max((g - e).norm());
            }
        }
        assert!(worst < 1e-6, "{worst:e}");
    }

    #[test]
    fn forward_backward_returns() {
        let field = Field::Integrable { omega: 1.0 };
        let init = random_even(6, 3, 1.0);
        let spec = IntegratorSpec::with_tol(1e-10);
        let f = integrate_lattice(&field, &init, (0.0, 1.0), &spec).unwrap();
        let b = integrate(&field, f.final_state(), (1.0, 0.0), &spec).unwrap();
        let back = unpack(b.final_state());
        let scale = init.iter().map(|q| q.norm()).fold(0.0, f64::max);
        let err = back.iter().zip(init.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err <= 100.0 * spec.rel_tol * scale, "{err:e}");
        assert!(b.eval(0.5).is_ok() && b.eval(1.5).is_err());
    }

    #[test]
    fn integrable_flow_conserves_invariants() {
        let field = Field::Integrable { omega: 1.0 };
        let init = random_even(6, 11, 1.0);
        let traj = integrate_lattice(&field, &init, (0.0, 1.0), &IntegratorSpec::with_tol(1e-10)).unwrap();
        let zs = [C64::new(1.3, 0.0), C64::new(0.8, 0.4), C64::from_polar(1.0, 0.7)];
        let rep = monitor_invariants(&traj, &zs, None, 0.0).unwrap();
        for d in &rep.invariants {
            assert!(d.relative_drift <= 1e-8, "{} {:e}", d.name, d.relative_drift);
        }
        assert_eq!(rep.invariants.len(), 4);
    }

    #[test]
    fn i2_drift_scales_linearly_with_epsilon() {
        let init = random_even(6, 5, 1.0);
        let drifts: Vec<f64> = [1e-3, 1e-2, 1e-1]
            .iter()
            .map(|&epsilon| {
                let field = Field::Perturbed {
                    omega: 1.0,
                    pert: PerturbationParams {
                        epsilon,
                        alpha1: 1.0,
                        alpha2: 0.5,
                    },
                };
                let t = integrate_lattice(&field, &init, (0.0, 1.0), &IntegratorSpec::with_tol(1e-10)).unwrap();
                monitor_invariants(&t, &[], None, epsilon).unwrap().get("I2").unwrap().max_drift
            })
            .collect();
        let c: Vec<f64> = drifts.iter().zip([1e-3, 1e-2, 1e-1]).map(|(d, e)| d / e).collect();
        assert!(c[0] > 0.0 && (c[1] / c[0] - 1.0).abs() < 0.1 && (c[2] / c[0] - 1.0).abs() < 0.5, "{c:?}");
    }

    #[test]
    fn plane_flow_matches_uniform_lattice() {
        let pert = PerturbationParams {
            epsilon: 0.1,
            alpha1: 1.0,
            alpha2: -0.5,
        };
        let n = 5;
        let spec = IntegratorSpec::with_tol(1e-11);
        let q0 = C64::new(1.1, 0.4);
        let plane = integrate(&Field::Plane { omega: 1.0, n, pert }, &[q0.re, q0.im], (0.0, 1.0), &spec).unwrap();
        let lat = integrate_lattice(
            &Field::Perturbed { omega: 1.0, pert },
            &LatticeState::uniform(LatticeSize::new(n).unwrap(), q0),
            (0.0, 1.0),
            &spec,
        )
        .unwrap();
        let p = plane.final_state();
        let l = unpack(lat.final_state());
        assert!((C64::new(p[0], p[1]) - l[3]).norm() < 1e-9);
    }

    #[test]
    fn annulus_flow_conserves_rescaled_hamiltonian() {
        let p = AnnulusParams::new(0.05, (1.0, 1.0), 1.0, 3).unwrap();
        let traj = integrate(&Field::Annulus(p), &[0.3, 1.0], (0.0, 10.0), &IntegratorSpec::with_tol(1e-11)).unwrap();
        let h: Vec<f64> = traj
            .states
            .iter()
            .map(|s| rescaled_hamiltonian(s[0], s[1], &p).unwrap())
            .collect();
        let drift = h.iter().map(|v| (v - h[0]).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-8 * h[0].abs().max(1.0), "{drift:e}");
    }

    #[test]
    fn decay_fit_cases() {
        let exact: Vec<(f64, f64)> = (0..20).map(|k| (0.5 * k as f64, 3.0 * (-1.7 * 0.5 * k as f64).exp())).collect();
        let f = fit_decay_rate(&exact).unwrap();
        assert!((f.rate - 1.7).abs() < 1e-10 && (f.r2 - 1.0).abs() < 1e-12);
        let flat: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 0.5)).collect();
        assert!(matches!(fit_decay_rate(&flat), Err(Error::InsufficientDecade { .. })));
        assert!(fit_decay_rate(&exact[..5]).is_err());
    }

    #[test]
    fn bad_input_rejected() {
        let field = Field::Integrable { omega: 1.0 };
        let odd = pack(&[C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(3.0, 0.0), C64::new(4.0, 0.0)]);
        assert!(matches!(integrate(&field, &odd, (0.0, 1.0), &IntegratorSpec::default()), Err(Error::NotEven { .. })));
        let spec = IntegratorSpec {
            rel_tol: -1.0,
            ..Default::default()
        };
        assert!(integrate(&field, &pack(&uniform_init(1.0, 4)), (0.0, 1.0), &spec).is_err());
        assert!(integrate(&Field::Annulus(AnnulusParams::new(0.1, (1.0, 1.0), 1.0, 3).unwrap()), &[0.0], (0.0, 1.0), &spec).is_err());
    }
}
