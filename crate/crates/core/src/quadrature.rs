//! Adaptive composite Gauss-Legendre quadrature with 16-point panels.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Nodes and weights of the 16-point rule on [-1, 1].
pub fn gauss_legendre_16() -> &'static ([f64; 16], [f64; 16]) {
    static RULE: OnceLock<([f64; 16], [f64; 16])> = OnceLock::new();
    RULE.get_or_init(|| {
        const N: usize = 16;
        let mut x = [0.0; N];
        let mut w = [0.0; N];
        for i in 0..N {
            let mut r = (PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, r);
                for k in 2..=N {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * r * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = N as f64 * (r * p1 - p0) / (r * r - 1.0);
                let step = p1 / dp;
                r -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            x[i] = r;
            w[i] = 2.0 / ((1.0 - r * r) * dp * dp);
        }
        (x, w)
    })
}

/// Controls for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct QuadratureSpec {
    /// Absolute tolerance on every component.
    pub tol: f64,
    pub initial_panels: usize,
    pub max_depth: u32,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            tol: 1e-12,
            initial_panels: 8,
            max_depth: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<const K: usize> {
    pub value: [f64; K],
    /// Sum of accepted panel error estimates (max over components). Panels
    /// whose estimate sits at the roundoff floor are accepted and counted.
    pub error: f64,
    pub evaluations: usize,
}

/// Panel integral and the integral of |f| over the panel.
fn panel<const K: usize, F: Fn(f64) -> [f64; K]>(f: &F, a: f64, b: f64) -> ([f64; K], f64) {
    let (x, w) = gauss_legendre_16();
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut out = [0.0; K];
    let mut abs = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        let v = f(c + r * xi);
        for k in 0..K {
            out[k] += wi * v[k];
            abs += wi * v[k].abs();
        }
    }
    for o in out.iter_mut() {
        *o *= r;
    }
    (out, abs * r.abs())
}

/// Error estimates below this multiple of ε∫|f| are treated as roundoff.
const ROUNDOFF_FACTOR: f64 = 50.0;

struct State<const K: usize> {
    value: [f64; K],
    error: f64,
    evaluations: usize,
}

fn refine<const K: usize, F: Fn(f64) -> [f64; K]>(
    f: &F,
    a: f64,
    b: f64,
    whole: [f64; K],
    tol: f64,
    depth: u32,
    st: &mut State<K>,
) -> Result<()> {
    let m = 0.5 * (a + b);
    let (left, abs_l) = panel(f, a, m);
    let (right, abs_r) = panel(f, m, b);
    st.evaluations += 32;
    let mut err: f64 = 0.0;
    for k in 0..K {
        err = err.max((left[k] + right[k] - whole[k]).abs());
    }
    let noise = ROUNDOFF_FACTOR * f64::EPSILON * (abs_l + abs_r);
    if err <= tol.max(noise) {
        for k in 0..K {
            st.value[k] += left[k] + right[k];
        }
        st.error += err;
        return Ok(());
    }
    if depth == 0 || m <= a || m >= b {
        return Err(Error::ToleranceNotMet(format!(
            "quadrature refinement stalled on [{a}, {b}] with error {err:e} > {tol:e}"
        )));
    }
    refine(f, a, m, left, 0.5 * tol, depth - 1, st)?;
    refine(f, m, b, right, 0.5 * tol, depth - 1, st)
}

/// ∫_a^b f(t) dt for a vector-valued integrand.
pub fn integrate<const K: usize, F: Fn(f64) -> [f64; K]>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult<K>> {
    if !(spec.tol > 0.0) || spec.initial_panels == 0 {
        return Err(Error::InvalidParameter(
            "quadrature needs tol > 0 and at least one panel".into(),
        ));
    }
    let n = spec.initial_panels;
    let width = (b - a) / n as f64;
    let mut st = State {
        value: [0.0; K],
        error: 0.0,
        evaluations: 0,
    };
    for i in 0..n {
        let lo = a + width * i as f64;
        let hi = if i + 1 == n { b } else { lo + width };
        let (whole, _) = panel(&f, lo, hi);
        st.evaluations += 16;
        refine(&f, lo, hi, whole, spec.tol / n as f64, spec.max_depth, &mut st)?;
    }
    Ok(QuadResult {
        value: st.value,
        error: st.error,
        evaluations: st.evaluations,
    })
}
