use crate::error::{Error, Result};
use crate::liegroup::{CMat, GroupElement};

/// An ordered list of `dim`-dimensional points, stored point-major.
///
/// Clouds acted on by GL(2,ℂ) become complex; the imaginary parts are kept
/// alongside and are `None` for real clouds.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    dim: usize,
    re: Vec<f64>,
    im: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::contract(format!("point dimension {dim} unsupported")));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::contract("coordinate count is not a multiple of the dimension"));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("point cloud has non-finite coordinates"));
        }
        Ok(PointCloud {
            dim,
            re: coords,
            im: None,
        })
    }

    pub fn from_points<const D: usize>(points: &[[f64; D]]) -> Self {
        PointCloud {
            dim: D,
            re: points.iter().flatten().copied().collect(),
            im: None,
        }
    }

    pub fn new_complex(dim: usize, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != im.len() {
            return Err(Error::contract("real and imaginary parts differ in length"));
        }
        let mut c = PointCloud::new(dim, re)?;
        c.im = Some(im);
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.re.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn is_complex(&self) -> bool {
        self.im.is_some()
    }

    pub fn coords(&self) -> &[f64] {
        &self.re
    }

    pub fn imag(&self) -> Option<&[f64]> {
        self.im.as_deref()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.re[i * self.dim..(i + 1) * self.dim]
    }

    /// Applies `g` pointwise: (g·x)ᵢ = g · xᵢ.
    pub fn transform(&self, g: &GroupElement) -> PointCloud {
        self.transform_matrix(g.matrix())
    }

    pub fn transform_matrix(&self, m: &CMat) -> PointCloud {
        assert_eq!(m.n(), self.dim, "matrix size does not match point dimension");
        let d = self.dim;
        let complex = !m.is_real() || self.im.is_some();
        let mut re = vec![0.0; self.re.len()];
        let mut im = if complex { vec![0.0; self.re.len()] } else { Vec::new() };
        let zeros = vec![0.0; d];
        for p in 0..self.len() {
            let xr = &self.re[p * d..(p + 1) * d];
            let xi = self.im.as_ref().map_or(&zeros[..], |v| &v[p * d..(p + 1) * d]);
            for i in 0..d {
                let (mut sr, mut si) = (0.0, 0.0);
                for j in 0..d {
                    let (ar, ai) = (m.re.get(i, j), m.im.get(i, j));
                    sr += ar * xr[j] - ai * xi[j];
                    si += ar * xi[j] + ai * xr[j];
                }
                re[p * d + i] = sr;
                if complex {
                    im[p * d + i] = si;
                }
            }
        }
        PointCloud {
            dim: d,
            re,
            im: complex.then_some(im),
        }
    }

    /// Mean point (real part).
    pub fn centroid(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        let mut c = vec![0.0; self.dim];
        for p in 0..self.len() {
            for (ci, v) in c.iter_mut().zip(self.point(p)) {
                *ci += v / n;
            }
        }
        c
    }

    /// Euclidean distance between clouds as flat vectors (complex parts
    /// included).
    pub fn distance(&self, other: &PointCloud) -> f64 {
        let mut s: f64 = self
            .re
            .iter()
            .zip(&other.re)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let zero = |c: &PointCloud| c.im.clone().unwrap_or_else(|| vec![0.0; c.re.len()]);
        if self.im.is_some() || other.im.is_some() {
            s += zero(self)
                .iter()
                .zip(zero(other).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        s.sqrt()
    }

    /// Network input layout: point-major coordinates; complex networks
    /// interleave `re, im` per coordinate.
    pub fn flatten_into(&self, complex: bool, out: &mut [f64]) {
        if complex {
            let zeros;
            let im = match &self.im {
                Some(v) => v,
                None => {
                    zeros = vec![0.0; self.re.len()];
                    &zeros
                }
            };
            for (k, (r, i)) in self.re.iter().zip(im.iter()).enumerate() {
                out[2 * k] = *r;
                out[2 * k + 1] = *i;
            }
        } else {
            out[..self.re.len()].copy_from_slice(&self.re);
        }
    }

    pub fn flat_len(&self, complex: bool) -> usize {
        if complex {
            2 * self.re.len()
        } else {
            self.re.len()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.re.iter().all(|v| v.is_finite())
            && self.im.as_ref().is_none_or(|v| v.iter().all(|x| x.is_finite()))
    }
}
