use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::matrix::{CMat, Mat};
use crate::error::{Error, Result};

/// The supported hypothesis groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupKind {
    #[serde(rename = "SO2")]
    SO2,
    #[serde(rename = "SO3")]
    SO3,
    #[serde(rename = "GL2R+")]
    GL2RPlus,
    #[serde(rename = "GL2C")]
    GL2C,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Field {
    Real,
    Complex,
}

impl GroupKind {
    pub const ALL: [GroupKind; 4] = [
        GroupKind::SO2,
        GroupKind::SO3,
        GroupKind::GL2RPlus,
        GroupKind::GL2C,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GroupKind::SO2 => "SO2",
            GroupKind::SO3 => "SO3",
            GroupKind::GL2RPlus => "GL2R+",
            GroupKind::GL2C => "GL2C",
        }
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GroupKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SO2" => Ok(GroupKind::SO2),
            "SO3" => Ok(GroupKind::SO3),
            "GL2R+" | "GL2RPlus" => Ok(GroupKind::GL2RPlus),
            "GL2C" => Ok(GroupKind::GL2C),
            other => Err(Error::parse("group kind", format!("unknown group {other:?}"))),
        }
    }
}

/// A hypothesis group together with its matrix size, field and algebra
/// dimension (number of real generator coefficients).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GroupSpec {
    pub kind: GroupKind,
    pub matrix_dim: usize,
    pub field: Field,
    pub algebra_dim: usize,
}

impl GroupSpec {
    pub const fn new(kind: GroupKind) -> Self {
        let (matrix_dim, algebra_dim, field) = match kind {
            GroupKind::SO2 => (2, 1, Field::Real),
            GroupKind::SO3 => (3, 3, Field::Real),
            GroupKind::GL2RPlus => (2, 4, Field::Real),
            GroupKind::GL2C => (2, 8, Field::Complex),
        };
        GroupSpec {
            kind,
            matrix_dim,
            field,
            algebra_dim,
        }
    }

    pub const SO2: GroupSpec = GroupSpec::new(GroupKind::SO2);
    pub const SO3: GroupSpec = GroupSpec::new(GroupKind::SO3);
    pub const GL2R_PLUS: GroupSpec = GroupSpec::new(GroupKind::GL2RPlus);
    pub const GL2C: GroupSpec = GroupSpec::new(GroupKind::GL2C);

    pub fn is_complex(&self) -> bool {
        self.field == Field::Complex
    }

    pub fn is_rotation_group(&self) -> bool {
        matches!(self.kind, GroupKind::SO2 | GroupKind::SO3)
    }

    /// Number of reals in the flattened (interleaved for complex) matrix.
    pub fn flat_len(&self) -> usize {
        let n2 = self.matrix_dim * self.matrix_dim;
        if self.is_complex() {
            2 * n2
        } else {
            n2
        }
    }

    /// Fixed generator basis {Lᵢ}.
    ///
    /// SO2: J = [[0,−1],[1,0]]. SO3: rotations about x, y, z. GL2R+: the
    /// matrix units E₁₁, E₁₂, E₂₁, E₂₂. GL2C: the same units, each with a
    /// real and an imaginary coefficient, interleaved (re E₁₁, im E₁₁, …).
    pub fn basis(&self) -> Vec<CMat> {
        match self.kind {
            GroupKind::SO2 => vec![CMat::real(Mat::from_row_major(2, &[0.0, -1.0, 1.0, 0.0]))],
            GroupKind::SO3 => vec![
                CMat::real(so3_hat([1.0, 0.0, 0.0])),
                CMat::real(so3_hat([0.0, 1.0, 0.0])),
                CMat::real(so3_hat([0.0, 0.0, 1.0])),
            ],
            GroupKind::GL2RPlus => (0..4)
                .map(|k| {
                    let mut m = Mat::zeros(2);
                    m.set(k / 2, k % 2, 1.0);
                    CMat::real(m)
                })
                .collect(),
            GroupKind::GL2C => (0..8)
                .map(|k| {
                    let unit = k / 2;
                    let mut m = Mat::zeros(2);
                    m.set(unit / 2, unit % 2, 1.0);
                    if k % 2 == 0 {
                        CMat::real(m)
                    } else {
                        CMat::new(Mat::zeros(2), m)
                    }
                })
                .collect(),
        }
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)
    }
}

/// Skew-symmetric matrix of ω: the SO3 algebra element ω₁L₁ + ω₂L₂ + ω₃L₃.
pub fn so3_hat(w: [f64; 3]) -> Mat {
    Mat::from_row_major(3, &[0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0])
}

/// Inverse of [`so3_hat`] on the skew part of `m`.
pub fn so3_vee(m: &Mat) -> [f64; 3] {
    [
        0.5 * (m.get(2, 1) - m.get(1, 2)),
        0.5 * (m.get(0, 2) - m.get(2, 0)),
        0.5 * (m.get(1, 0) - m.get(0, 1)),
    ]
}

pub fn rotation_2d(theta: f64) -> Mat {
    let (s, c) = theta.sin_cos();
    Mat::from_row_major(2, &[c, -s, s, c])
}

/// A group element: a matrix tagged with the group it belongs to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroupElement {
    spec: GroupSpec,
    mat: CMat,
}

const ORTHO_TOL: f64 = 1e-8;

impl GroupElement {
    /// Validates the group invariants before wrapping the matrix.
    pub fn new(spec: GroupSpec, mat: CMat) -> Result<Self> {
        if mat.n() != spec.matrix_dim {
            return Err(Error::contract(format!(
                "{spec} element needs a {0}×{0} matrix, got {1}×{1}",
                spec.matrix_dim,
                mat.n()
            )));
        }
        if !mat.is_finite() {
            return Err(Error::contract("group element has non-finite entries"));
        }
        match spec.kind {
            GroupKind::SO2 | GroupKind::SO3 => {
                if !mat.is_real() {
                    return Err(Error::contract("rotation must be real"));
                }
                let n = spec.matrix_dim;
                let r = mat.re;
                let ortho = (r.transpose() * r - Mat::identity(n)).frobenius();
                let det = r.det();
                if ortho > ORTHO_TOL || (det - 1.0).abs() > ORTHO_TOL {
                    return Err(Error::contract(format!(
                        "not a rotation: ‖RᵀR − I‖ = {ortho:.2e}, det = {det}"
                    )));
                }
            }
            GroupKind::GL2RPlus => {
                if !mat.is_real() {
                    return Err(Error::contract("GL2R+ element must be real"));
                }
                if mat.re.det() <= 0.0 {
                    return Err(Error::contract("GL2R+ element needs a positive determinant"));
                }
            }
            GroupKind::GL2C => {
                if mat.det().norm() < 1e-12 {
                    return Err(Error::contract("GL2C element is singular"));
                }
            }
        }
        Ok(GroupElement { spec, mat })
    }

    pub fn from_real(spec: GroupSpec, m: Mat) -> Result<Self> {
        GroupElement::new(spec, CMat::real(m))
    }

    /// Wraps without validation; callers guarantee the invariants.
    pub(crate) fn new_unchecked(spec: GroupSpec, mat: CMat) -> Self {
        GroupElement { spec, mat }
    }

    pub fn identity(spec: GroupSpec) -> Self {
        GroupElement {
            spec,
            mat: CMat::identity(spec.matrix_dim),
        }
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    /// Real part; for real groups this is the whole matrix.
    pub fn real(&self) -> &Mat {
        &self.mat.re
    }

    pub fn compose(&self, rhs: &GroupElement) -> GroupElement {
        debug_assert_eq!(self.spec, rhs.spec, "composing elements of different groups");
        GroupElement::new_unchecked(self.spec, self.mat * rhs.mat)
    }

    pub fn inverse(&self) -> GroupElement {
        let inv = if self.spec.is_rotation_group() {
            CMat::real(self.mat.re.transpose())
        } else {
            self.mat.inverse().expect("group elements are invertible")
        };
        GroupElement::new_unchecked(self.spec, inv)
    }

    /// Re-tags the element as a member of a larger group.
    pub fn embed(&self, target: GroupSpec) -> Result<GroupElement> {
        GroupElement::new(target, self.mat)
    }

    /// Row-major entries; complex groups interleave `re, im`.
    pub fn flatten(&self) -> Vec<f64> {
        if self.spec.is_complex() {
            self.mat.interleaved()
        } else {
            self.mat.re.as_slice().to_vec()
        }
    }

    pub fn from_flat(spec: GroupSpec, data: &[f64]) -> Result<Self> {
        if data.len() != spec.flat_len() {
            return Err(Error::contract(format!(
                "{spec} element needs {} entries, got {}",
                spec.flat_len(),
                data.len()
            )));
        }
        let n = spec.matrix_dim;
        let mat = if spec.is_complex() {
            CMat::from_interleaved(n, data)
        } else {
            CMat::real(Mat::from_row_major(n, data))
        };
        GroupElement::new(spec, mat)
    }

    pub fn distance(&self, other: &GroupElement) -> f64 {
        (self.mat - other.mat).frobenius()
    }
}

/// A Lie algebra element with its generator coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    spec: GroupSpec,
    mat: CMat,
    coeffs: Vec<f64>,
}

impl AlgebraElement {
    pub fn from_coeffs(spec: GroupSpec, coeffs: &[f64]) -> Result<Self> {
        if coeffs.len() != spec.algebra_dim {
            return Err(Error::contract(format!(
                "{spec} algebra needs {} coefficients, got {}",
                spec.algebra_dim,
                coeffs.len()
            )));
        }
        let mat = coeffs_to_matrix(spec, coeffs);
        Ok(AlgebraElement {
            spec,
            mat,
            coeffs: coeffs.to_vec(),
        })
    }

    pub fn zero(spec: GroupSpec) -> Self {
        AlgebraElement {
            spec,
            mat: CMat::zeros(spec.matrix_dim),
            coeffs: vec![0.0; spec.algebra_dim],
        }
    }

    /// Projects a matrix onto the generator basis. The stored matrix is the
    /// reconstruction from coefficients, so it lies in the algebra exactly.
    pub fn from_matrix(spec: GroupSpec, m: &CMat) -> Result<Self> {
        if m.n() != spec.matrix_dim {
            return Err(Error::contract("algebra matrix has the wrong size"));
        }
        let coeffs: Vec<f64> = match spec.kind {
            GroupKind::SO2 => vec![0.5 * (m.re.get(1, 0) - m.re.get(0, 1))],
            GroupKind::SO3 => so3_vee(&m.re).to_vec(),
            GroupKind::GL2RPlus => m.re.as_slice().to_vec(),
            GroupKind::GL2C => m.interleaved(),
        };
        AlgebraElement::from_coeffs(spec, &coeffs)
    }

    pub fn spec(&self) -> GroupSpec {
        self.spec
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn scale(&self, s: f64) -> AlgebraElement {
        let coeffs: Vec<f64> = self.coeffs.iter().map(|c| c * s).collect();
        AlgebraElement {
            spec: self.spec,
            mat: coeffs_to_matrix(self.spec, &coeffs),
            coeffs,
        }
    }

    pub fn norm(&self) -> f64 {
        self.mat.frobenius()
    }
}

fn coeffs_to_matrix(spec: GroupSpec, c: &[f64]) -> CMat {
    match spec.kind {
        GroupKind::SO2 => CMat::real(Mat::from_row_major(2, &[0.0, -c[0], c[0], 0.0])),
        GroupKind::SO3 => CMat::real(so3_hat([c[0], c[1], c[2]])),
        GroupKind::GL2RPlus => CMat::real(Mat::from_row_major(2, c)),
        GroupKind::GL2C => CMat::from_interleaved(2, c),
    }
}
