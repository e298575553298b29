//! Small dense square matrices (n ≤ 3), real and complex.
//!
//! Complex matrices are a pair of real matrices `(re, im)`; every complex
//! operation below is written on that pair.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

/// Real n×n matrix, n ∈ {1, 2, 3}, stored row-major in a fixed buffer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat {
    n: usize,
    a: [f64; 9],
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=3).contains(&n), "matrix size {n} unsupported");
        Mat { n, a: [0.0; 9] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from a row-major slice of length n².
    pub fn from_row_major(n: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), n * n, "expected {} entries", n * n);
        let mut m = Mat::zeros(n);
        m.a[..n * n].copy_from_slice(data);
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Mat::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.a[..self.n * self.n]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Mat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        m.a.iter_mut().for_each(|v| *v *= s);
        m
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.as_slice().iter().map(|v| v * v).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn det(&self) -> f64 {
        let g = |i, j| self.get(i, j);
        match self.n {
            1 => g(0, 0),
            2 => g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0),
            _ => {
                g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1))
                    - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
                    + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0))
            }
        }
    }

    /// Inverse via the adjugate; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let g = |i, j| self.get(i, j);
        let mut inv = Mat::zeros(self.n);
        match self.n {
            1 => inv.set(0, 0, 1.0 / d),
            2 => {
                inv.set(0, 0, g(1, 1) / d);
                inv.set(0, 1, -g(0, 1) / d);
                inv.set(1, 0, -g(1, 0) / d);
                inv.set(1, 1, g(0, 0) / d);
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        // cofactor of (j, i)
                        let (r0, r1) = match j {
                            0 => (1, 2),
                            1 => (0, 2),
                            _ => (0, 1),
                        };
                        let (c0, c1) = match i {
                            0 => (1, 2),
                            1 => (0, 2),
                            _ => (0, 1),
                        };
                        let minor = g(r0, c0) * g(r1, c1) - g(r0, c1) * g(r1, c0);
                        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                        inv.set(i, j, sign * minor / d);
                    }
                }
            }
        }
        Some(inv)
    }

    /// Matrix-vector product on a point stored as a slice of length n.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            out[i] = (0..self.n).map(|j| self.get(i, j) * v[j]).sum();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }
}

impl Add for Mat {
    type Output = Mat;
    fn add(mut self, rhs: Mat) -> Mat {
        debug_assert_eq!(self.n, rhs.n);
        for (a, b) in self.a.iter_mut().zip(rhs.a.iter()) {
            *a += b;
        }
        self
    }
}

impl Sub for Mat {
    type Output = Mat;
    fn sub(mut self, rhs: Mat) -> Mat {
        debug_assert_eq!(self.n, rhs.n);
        for (a, b) in self.a.iter_mut().zip(rhs.a.iter()) {
            *a -= b;
        }
        self
    }
}

impl Neg for Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        self.scale(-1.0)
    }
}

impl Mul for Mat {
    type Output = Mat;
    fn mul(self, rhs: Mat) -> Mat {
        debug_assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.get(i, k) * rhs.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }
}

/// Complex n×n matrix as a `(re, im)` pair of real matrices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMat {
    pub re: Mat,
    pub im: Mat,
}

impl CMat {
    pub fn new(re: Mat, im: Mat) -> Self {
        assert_eq!(re.n(), im.n());
        CMat { re, im }
    }

    pub fn real(re: Mat) -> Self {
        CMat {
            re,
            im: Mat::zeros(re.n()),
        }
    }

    pub fn zeros(n: usize) -> Self {
        CMat::real(Mat::zeros(n))
    }

    pub fn identity(n: usize) -> Self {
        CMat::real(Mat::identity(n))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.re.n()
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        Complex64::new(self.re.get(i, j), self.im.get(i, j))
    }

    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        self.re.set(i, j, z.re);
        self.im.set(i, j, z.im);
    }

    pub fn scale(&self, s: f64) -> Self {
        CMat::new(self.re.scale(s), self.im.scale(s))
    }

    pub fn scale_complex(&self, z: Complex64) -> Self {
        CMat::new(
            self.re.scale(z.re) - self.im.scale(z.im),
            self.re.scale(z.im) + self.im.scale(z.re),
        )
    }

    pub fn trace(&self) -> Complex64 {
        Complex64::new(self.re.trace(), self.im.trace())
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.re.frobenius_sq() + self.im.frobenius_sq()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn is_real(&self) -> bool {
        self.im.as_slice().iter().all(|&v| v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn det(&self) -> Complex64 {
        let g = |i, j| self.get(i, j);
        match self.n() {
            1 => g(0, 0),
            2 => g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0),
            _ => {
                g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1))
                    - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
                    + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0))
            }
        }
    }

    /// Inverse through the real 2n×2n block form [[re, −im], [im, re]].
    ///
    /// For n ≤ 2 an adjugate formula is used directly.
    pub fn inverse(&self) -> Option<Self> {
        if self.is_real() {
            return self.re.inverse().map(CMat::real);
        }
        let n = self.n();
        let d = self.det();
        if d.norm() == 0.0 || !d.is_finite() {
            return None;
        }
        let g = |i, j| self.get(i, j);
        let mut inv = CMat::zeros(n);
        match n {
            1 => inv.set(0, 0, 1.0 / d),
            2 => {
                inv.set(0, 0, g(1, 1) / d);
                inv.set(0, 1, -g(0, 1) / d);
                inv.set(1, 0, -g(1, 0) / d);
                inv.set(1, 1, g(0, 0) / d);
            }
            _ => {
                for i in 0..3 {
                    for j in 0..3 {
                        let rows: Vec<usize> = (0..3).filter(|&r| r != j).collect();
                        let cols: Vec<usize> = (0..3).filter(|&c| c != i).collect();
                        let minor = g(rows[0], cols[0]) * g(rows[1], cols[1])
                            - g(rows[0], cols[1]) * g(rows[1], cols[0]);
                        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                        inv.set(i, j, minor * sign / d);
                    }
                }
            }
        }
        Some(inv)
    }

    /// Entries interleaved as `re, im` in row-major order.
    pub fn interleaved(&self) -> Vec<f64> {
        self.re
            .as_slice()
            .iter()
            .zip(self.im.as_slice())
            .flat_map(|(&r, &i)| [r, i])
            .collect()
    }

    pub fn from_interleaved(n: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), 2 * n * n);
        let re: Vec<f64> = data.iter().step_by(2).copied().collect();
        let im: Vec<f64> = data.iter().skip(1).step_by(2).copied().collect();
        CMat::new(Mat::from_row_major(n, &re), Mat::from_row_major(n, &im))
    }

    /// Eigenvalues of a 2×2 complex matrix.
    pub fn eigenvalues_2x2(&self) -> [Complex64; 2] {
        assert_eq!(self.n(), 2);
        let tr = self.trace();
        let det = self.det();
        let half = tr / 2.0;
        let disc = (half * half - det).sqrt();
        [half + disc, half - disc]
    }
}

impl Add for CMat {
    type Output = CMat;
    fn add(self, rhs: CMat) -> CMat {
        CMat::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for CMat {
    type Output = CMat;
    fn sub(self, rhs: CMat) -> CMat {
        CMat::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Neg for CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        CMat::new(-self.re, -self.im)
    }
}

impl Mul for CMat {
    type Output = CMat;
    fn mul(self, rhs: CMat) -> CMat {
        CMat::new(
            self.re * rhs.re - self.im * rhs.im,
            self.re * rhs.im + self.im * rhs.re,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_3x3_roundtrip() {
        let m = Mat::from_row_major(3, &[2.0, 1.0, 0.5, -1.0, 3.0, 0.2, 0.3, 0.1, 1.5]);
        let inv = m.inverse().unwrap();
        assert!((m * inv - Mat::identity(3)).frobenius() < 1e-14);
    }

    #[test]
    fn complex_inverse_roundtrip() {
        let re = Mat::from_row_major(2, &[1.0, 2.0, -0.5, 0.3]);
        let im = Mat::from_row_major(2, &[0.2, -1.0, 0.7, 1.1]);
        let m = CMat::new(re, im);
        let inv = m.inverse().unwrap();
        assert!((m * inv - CMat::identity(2)).frobenius() < 1e-14);
    }

    #[test]
    fn singular_has_no_inverse() {
        let m = Mat::from_row_major(2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(m.inverse().is_none());
    }

    #[test]
    fn interleaved_layout() {
        let m = CMat::new(
            Mat::from_row_major(2, &[1.0, 2.0, 3.0, 4.0]),
            Mat::from_row_major(2, &[5.0, 6.0, 7.0, 8.0]),
        );
        assert_eq!(m.interleaved(), vec![1.0, 5.0, 2.0, 6.0, 3.0, 7.0, 4.0, 8.0]);
        assert_eq!(CMat::from_interleaved(2, &m.interleaved()), m);
    }
}
