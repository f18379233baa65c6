//! Small dense 2×2 complex matrices used by the transfer-matrix code.

use num_complex::Complex64;
use std::ops::{Add, Mul, Sub};

pub type C64 = Complex64;

/// Row-major 2×2 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub m: [[C64; 2]; 2],
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2 {
        m: [[C64::new(0.0, 0.0); 2]; 2],
    };

    pub const IDENTITY: Mat2 = Mat2 {
        m: [
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        ],
    };

    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2 { m: [[a, b], [c, d]] }
    }

    pub fn diag(a: C64, d: C64) -> Self {
        Mat2::new(a, C64::new(0.0, 0.0), C64::new(0.0, 0.0), d)
    }

    pub fn trace(&self) -> C64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn det(&self) -> C64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn adjugate(&self) -> Mat2 {
        Mat2::new(self.m[1][1], -self.m[0][1], -self.m[1][0], self.m[0][0])
    }

    /// Inverse via adjugate over a supplied determinant.
    pub fn inverse_with_det(&self, det: C64) -> Mat2 {
        self.adjugate().scale(det.inv())
    }

    pub fn scale(&self, s: C64) -> Mat2 {
        Mat2::new(
            self.m[0][0] * s,
            self.m[0][1] * s,
            self.m[1][0] * s,
            self.m[1][1] * s,
        )
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.m
            .iter()
            .flatten()
            .map(|x| x.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let a = &self.m;
        let b = &o.m;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + o.scale(C64::new(-1.0, 0.0))
    }
}

/// Principal square root with nonnegative real part.
pub fn csqrt(z: C64) -> C64 {
    z.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjugate_inverse() {
        let m = Mat2::new(
            C64::new(1.0, 2.0),
            C64::new(0.5, -1.0),
            C64::new(-0.3, 0.2),
            C64::new(2.0, 0.1),
        );
        let inv = m.inverse_with_det(m.det());
        let id = m * inv;
        assert!((id - Mat2::IDENTITY).norm() < 1e-14);
    }

    #[test]
    fn principal_root_has_nonnegative_real_part() {
        for z in [C64::new(-4.0, 0.0), C64::new(-1.0, -1e-300), C64::new(3.0, -2.0)] {
            assert!(csqrt(z).re >= 0.0);
        }
    }
}
