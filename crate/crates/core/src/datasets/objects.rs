//! Canonical objects. Coordinates are fixed constants; none of the shapes has
//! a nontrivial rotational stabilizer in the groups used as targets, and the
//! 3D shapes sit off the origin so their centroids move under rotation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::cloud::PointCloud;
use crate::error::{Error, Result};

/// Number of points every multi-object cloud is padded to.
pub const MULTI_OBJECT_POINTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectKind {
    Arrow2D,
    HalfArrow2D,
    IrregularTetrahedron3D,
    MultiObject3D,
}

impl ObjectKind {
    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::Arrow2D => "Arrow2D",
            ObjectKind::HalfArrow2D => "HalfArrow2D",
            ObjectKind::IrregularTetrahedron3D => "IrregularTetrahedron3D",
            ObjectKind::MultiObject3D => "MultiObject3D",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ObjectKind::Arrow2D | ObjectKind::HalfArrow2D => 2,
            _ => 3,
        }
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "Arrow2D" => ObjectKind::Arrow2D,
            "HalfArrow2D" => ObjectKind::HalfArrow2D,
            "IrregularTetrahedron3D" => ObjectKind::IrregularTetrahedron3D,
            "MultiObject3D" => ObjectKind::MultiObject3D,
            other => return Err(Error::parse("object kind", format!("unknown object {other:?}"))),
        })
    }
}

const ARROW: [[f64; 2]; 7] = [
    [1.0, 0.0],
    [0.3, 0.45],
    [0.3, 0.15],
    [-1.0, 0.15],
    [-1.0, -0.15],
    [0.3, -0.15],
    [0.3, -0.45],
];

// Arrow with the lower barb and the lower half of the shaft removed.
const HALF_ARROW: [[f64; 2]; 5] = [[1.0, 0.0], [0.3, 0.45], [0.3, 0.15], [-1.0, 0.15], [-1.0, 0.0]];

const TETRAHEDRON: [[f64; 3]; 4] = [
    [0.82, 0.37, 0.16],
    [-0.22, 1.08, 0.27],
    [-0.27, -0.70, 0.98],
    [0.13, -0.11, -0.42],
];

const PRISM: [[f64; 3]; 6] = [
    [1.253, 0.014, -0.607],
    [-0.210, 1.115, -0.657],
    [-0.426, -0.862, -0.592],
    [1.101, 0.127, 0.685],
    [-0.418, 0.986, 0.501],
    [-0.310, -0.623, 0.740],
];

const CUBE: [[f64; 3]; 8] = [
    [-0.371, -0.552, -0.638],
    [-0.417, -0.567, 0.762],
    [-0.486, 0.632, -0.458],
    [-0.469, 0.630, 0.521],
    [0.790, -0.571, -0.433],
    [0.736, -0.418, 0.646],
    [0.790, 0.839, -0.431],
    [0.674, 0.624, 0.555],
];

const OCTAHEDRON: [[f64; 3]; 6] = [
    [1.222, 0.116, 0.011],
    [-0.600, 0.055, 0.104],
    [0.119, 0.857, 0.109],
    [0.151, -0.847, -0.017],
    [0.125, 0.121, 0.900],
    [0.178, 0.011, -0.848],
];

fn centered(points: &[[f64; 2]]) -> PointCloud {
    let n = points.len() as f64;
    let (cx, cy) = points
        .iter()
        .fold((0.0, 0.0), |(x, y), p| (x + p[0] / n, y + p[1] / n));
    let shifted: Vec<[f64; 2]> = points.iter().map(|p| [p[0] - cx, p[1] - cy]).collect();
    PointCloud::from_points(&shifted)
}

fn padded(points: &[[f64; 3]]) -> PointCloud {
    let mut v: Vec<[f64; 3]> = points.to_vec();
    v.resize(MULTI_OBJECT_POINTS, [0.0; 3]);
    PointCloud::from_points(&v)
}

/// The canonical object for `kind`. For [`ObjectKind::MultiObject3D`] this is
/// the first of [`canonical_objects`].
pub fn canonical_object(kind: ObjectKind) -> PointCloud {
    canonical_objects(kind).swap_remove(0)
}

/// All canonical objects for `kind`, indexed by the object ids stored in a
/// dataset. Multi-object shapes (tetrahedron, triangular prism, cube,
/// octahedron, all perturbed) are padded with origin points to a common size.
pub fn canonical_objects(kind: ObjectKind) -> Vec<PointCloud> {
    match kind {
        ObjectKind::Arrow2D => vec![centered(&ARROW)],
        ObjectKind::HalfArrow2D => vec![centered(&HALF_ARROW)],
        ObjectKind::IrregularTetrahedron3D => vec![PointCloud::from_points(&TETRAHEDRON)],
        ObjectKind::MultiObject3D => vec![
            padded(&TETRAHEDRON),
            padded(&PRISM),
            padded(&CUBE),
            padded(&OCTAHEDRON),
        ],
    }
}
