//! Element tables for the finite target subgroups.
//!
//! Embeddings: C4 and D4 act on the plane about the origin (D4 adds the
//! mirror across the x-axis composed with C4); Tet is the rotation group of
//! the tetrahedron with vertices (1,1,1), (1,−1,−1), (−1,1,−1), (−1,−1,1);
//! Oct is the 24 signed permutation matrices with determinant +1; Ico is the
//! rotation group of the icosahedron with vertices at the cyclic
//! permutations of (0, ±1, ±φ).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::group::{GroupElement, GroupSpec};
use super::matrix::{CMat, Mat};
use crate::error::{Error, Result};

pub const CLOSURE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubgroupName {
    C4,
    D4,
    Tet,
    Oct,
    Ico,
    #[serde(rename = "SO2aroundZ")]
    SO2AroundZ,
}

impl SubgroupName {
    pub fn name(self) -> &'static str {
        match self {
            SubgroupName::C4 => "C4",
            SubgroupName::D4 => "D4",
            SubgroupName::Tet => "Tet",
            SubgroupName::Oct => "Oct",
            SubgroupName::Ico => "Ico",
            SubgroupName::SO2AroundZ => "SO2aroundZ",
        }
    }

    /// Smallest supported group containing every element of the table.
    pub fn natural_spec(self) -> GroupSpec {
        match self {
            SubgroupName::C4 => GroupSpec::SO2,
            SubgroupName::D4 => GroupSpec::GL2C,
            _ => GroupSpec::SO3,
        }
    }

    pub fn point_dim(self) -> usize {
        match self {
            SubgroupName::C4 | SubgroupName::D4 => 2,
            _ => 3,
        }
    }
}

impl fmt::Display for SubgroupName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SubgroupName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "C4" => SubgroupName::C4,
            "D4" => SubgroupName::D4,
            "Tet" => SubgroupName::Tet,
            "Oct" => SubgroupName::Oct,
            "Ico" => SubgroupName::Ico,
            "SO2aroundZ" => SubgroupName::SO2AroundZ,
            other => return Err(Error::parse("subgroup name", format!("unknown subgroup {other:?}"))),
        })
    }
}

/// The elements of a target subgroup, or the rotation axis for the
/// continuous SO(2)-about-z case.
#[derive(Clone, Debug)]
pub struct DiscreteGroupTable {
    pub name: SubgroupName,
    pub elements: Vec<GroupElement>,
    pub order: usize,
    pub axis: Option<[f64; 3]>,
}

impl DiscreteGroupTable {
    pub fn is_finite(&self) -> bool {
        self.axis.is_none()
    }

    /// Re-tags every element as a member of `spec`.
    pub fn embedded_in(&self, spec: GroupSpec) -> Result<DiscreteGroupTable> {
        let elements = self
            .elements
            .iter()
            .map(|e| e.embed(spec))
            .collect::<Result<Vec<_>>>()?;
        Ok(DiscreteGroupTable {
            elements,
            ..self.clone()
        })
    }

    /// Index of the element within `tol` (Frobenius) of `g`.
    pub fn find(&self, g: &CMat, tol: f64) -> Option<usize> {
        self.elements
            .iter()
            .position(|e| (*e.matrix() - *g).frobenius() <= tol)
    }

    /// Index and distance of the table element closest to `g`.
    pub fn nearest(&self, g: &CMat) -> Option<(usize, f64)> {
        self.elements
            .iter()
            .enumerate()
            .map(|(i, e)| (i, (*e.matrix() - *g).frobenius()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Checks identity, inverses and closure within [`CLOSURE_TOL`].
    pub fn verify(&self) -> Result<()> {
        if !self.is_finite() {
            return Ok(());
        }
        let n = self.elements.first().map(|e| e.spec().matrix_dim).unwrap_or(0);
        if self.find(&CMat::identity(n), CLOSURE_TOL).is_none() {
            return Err(Error::contract(format!("{} table lacks the identity", self.name)));
        }
        for a in &self.elements {
            if self.find(a.inverse().matrix(), CLOSURE_TOL).is_none() {
                return Err(Error::contract(format!("{} table lacks an inverse", self.name)));
            }
            for b in &self.elements {
                if self.find(a.compose(b).matrix(), CLOSURE_TOL).is_none() {
                    return Err(Error::contract(format!("{} table is not closed", self.name)));
                }
            }
        }
        Ok(())
    }
}

pub fn discrete_group(name: SubgroupName) -> DiscreteGroupTable {
    let mats: Vec<Mat> = match name {
        SubgroupName::C4 => c4(),
        SubgroupName::D4 => {
            let mirror = Mat::diag(&[1.0, -1.0]);
            let mut all = c4();
            all.extend(c4().into_iter().map(|r| r * mirror));
            all
        }
        SubgroupName::Oct => signed_permutations(),
        SubgroupName::Tet => {
            let verts = [
                [1.0, 1.0, 1.0],
                [1.0, -1.0, -1.0],
                [-1.0, 1.0, -1.0],
                [-1.0, -1.0, 1.0],
            ];
            signed_permutations()
                .into_iter()
                .filter(|r| preserves(r, &verts))
                .collect()
        }
        SubgroupName::Ico => icosahedral(),
        SubgroupName::SO2AroundZ => {
            return DiscreteGroupTable {
                name,
                elements: Vec::new(),
                order: 0,
                axis: Some([0.0, 0.0, 1.0]),
            }
        }
    };
    let spec = name.natural_spec();
    let elements: Vec<GroupElement> = mats
        .into_iter()
        .map(|m| GroupElement::new_unchecked(spec, CMat::real(m)))
        .collect();
    DiscreteGroupTable {
        name,
        order: elements.len(),
        elements,
        axis: None,
    }
}

fn c4() -> Vec<Mat> {
    // exact entries rather than cos/sin round-off
    [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]
        .into_iter()
        .map(|(c, s)| Mat::from_row_major(2, &[c, -s, s, c]))
        .collect()
}

fn signed_permutations() -> Vec<Mat> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for perm in PERMS {
        for signs in 0..8 {
            let mut m = Mat::zeros(3);
            for (row, &col) in perm.iter().enumerate() {
                let s = if signs >> row & 1 == 1 { -1.0 } else { 1.0 };
                m.set(row, col, s);
            }
            if m.det() > 0.0 {
                out.push(m);
            }
        }
    }
    out
}

fn preserves(r: &Mat, verts: &[[f64; 3]]) -> bool {
    verts.iter().all(|v| {
        let mut w = [0.0; 3];
        r.apply(v, &mut w);
        verts
            .iter()
            .any(|u| (0..3).all(|k| (u[k] - w[k]).abs() < 1e-9))
    })
}

#[cfg(test)]
fn icosahedron_vertices() -> Vec<[f64; 3]> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v = Vec::with_capacity(12);
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            v.push([0.0, s1, s2 * phi]);
            v.push([s1, s2 * phi, 0.0]);
            v.push([s2 * phi, 0.0, s1]);
        }
    }
    v
}

fn icosahedral() -> Vec<Mat> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    // Order-5 rotation about the vertex (0, 1, φ) plus the order-3 cyclic
    // coordinate permutation; together they generate all 60 rotations.
    let len = (1.0 + phi * phi).sqrt();
    let axis = [0.0, 1.0 / len, phi / len];
    let angle = 2.0 * std::f64::consts::PI / 5.0;
    let five = super::expmap::rodrigues(axis.map(|a| a * angle));
    let cyclic = Mat::from_row_major(3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    let mut elems = vec![Mat::identity(3)];
    let mut frontier = vec![Mat::identity(3)];
    while let Some(g) = frontier.pop() {
        for gen in [five, cyclic] {
            let h = gen * g;
            if !elems.iter().any(|e| (*e - h).frobenius() < 1e-9) {
                elems.push(h);
                frontier.push(h);
            }
        }
    }
    // snap round-off so closure holds far below tolerance
    elems
        .into_iter()
        .map(|m| {
            let mut s = m;
            for i in 0..3 {
                for j in 0..3 {
                    let v = s.get(i, j);
                    if v.abs() < 1e-14 {
                        s.set(i, j, 0.0);
                    }
                }
            }
            s
        })
        .collect()
}
