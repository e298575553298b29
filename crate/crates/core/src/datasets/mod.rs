//! Synthetic point-cloud datasets: canonical objects transformed by elements
//! of a known symmetry group.

mod cloud;
mod io;
mod objects;

use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use cloud::PointCloud;
pub use io::{export_csv, load_dataset, load_dataset_with_warnings, save_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use objects::{canonical_object, canonical_objects, ObjectKind, MULTI_OBJECT_POINTS};

use crate::error::{Error, Result};
use crate::liegroup::{discrete_group, rotation_2d, GroupElement, GroupSpec, Mat, SubgroupName};
use crate::rng::substream;

/// Distribution the transforms are drawn from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Target {
    /// Uniform over a subgroup table, or uniform angle about z.
    Group(SubgroupName),
    /// Rotation about z by an angle drawn from N(0, σ²).
    GaussianSO2,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Group(g) => g.name(),
            Target::GaussianSO2 => "GaussianSO2",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "GaussianSO2" {
            Ok(Target::GaussianSO2)
        } else {
            s.parse().map(Target::Group)
        }
    }
}

impl TryFrom<String> for Target {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Target> for String {
    fn from(t: Target) -> String {
        t.name().to_string()
    }
}

pub const DEFAULT_ANGLE_SIGMA: f64 = FRAC_PI_4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub object: ObjectKind,
    pub target: Target,
    pub sample_count: usize,
    pub seed: u64,
    #[serde(default = "default_sigma")]
    pub angle_sigma: f64,
}

fn default_sigma() -> f64 {
    DEFAULT_ANGLE_SIGMA
}

impl DatasetSpec {
    pub fn new(object: ObjectKind, target: Target, sample_count: usize, seed: u64) -> Self {
        DatasetSpec {
            object,
            target,
            sample_count,
            seed,
            angle_sigma: DEFAULT_ANGLE_SIGMA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.object.dim();
        let target_dim = match self.target {
            Target::Group(g) => g.point_dim(),
            Target::GaussianSO2 => 3,
        };
        if dim != target_dim {
            return Err(Error::Config(format!(
                "{} is {dim}D but target {} acts in {target_dim}D",
                self.object, self.target
            )));
        }
        if self.target == Target::GaussianSO2 && !(self.angle_sigma > 0.0 && self.angle_sigma.is_finite()) {
            return Err(Error::Config(format!("angle_sigma must be positive, got {}", self.angle_sigma)));
        }
        Ok(())
    }

    /// Group the ground-truth transforms are stored in.
    pub fn transform_spec(&self) -> GroupSpec {
        match self.target {
            Target::Group(g) => g.natural_spec(),
            Target::GaussianSO2 => GroupSpec::SO3,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub samples: Vec<PointCloud>,
    pub ground_truth: Vec<GroupElement>,
    /// Index into [`canonical_objects`] for each sample.
    pub object_ids: Vec<u32>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn canonical(&self, i: usize) -> PointCloud {
        canonical_objects(self.spec.object).swap_remove(self.object_ids[i] as usize)
    }

    /// Deterministic 90/10 train/test split by hashing `(seed, index)`.
    pub fn split(&self) -> (Vec<usize>, Vec<usize>) {
        split_indices(self.spec.seed, self.len())
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            spec: DatasetSpec {
                sample_count: indices.len(),
                ..self.spec
            },
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            ground_truth: indices.iter().map(|&i| self.ground_truth[i]).collect(),
            object_ids: indices.iter().map(|&i| self.object_ids[i]).collect(),
        }
    }
}

pub fn split_indices(seed: u64, n: usize) -> (Vec<usize>, Vec<usize>) {
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for i in 0..n {
        let h = crate::rng::derive_seed(seed, &format!("split/{i}"));
        if h.is_multiple_of(10) {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    (train, test)
}

fn rotation_about_z(theta: f64) -> Mat {
    let r = rotation_2d(theta);
    Mat::from_row_major(
        3,
        &[r.get(0, 0), r.get(0, 1), 0.0, r.get(1, 0), r.get(1, 1), 0.0, 0.0, 0.0, 1.0],
    )
}

/// Generates the dataset; sample `i` uses its own stream of `spec.seed`.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let objects = canonical_objects(spec.object);
    let gspec = spec.transform_spec();
    let table = match spec.target {
        Target::Group(g) => Some(discrete_group(g)),
        Target::GaussianSO2 => None,
    };
    let normal = Normal::new(0.0, spec.angle_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let mut samples = Vec::with_capacity(spec.sample_count);
    let mut ground_truth = Vec::with_capacity(spec.sample_count);
    let mut object_ids = Vec::with_capacity(spec.sample_count);
    for i in 0..spec.sample_count {
        let mut rng = substream(spec.seed, i as u64);
        let id = rng.gen_range(0..objects.len());
        let g = match &table {
            Some(t) if t.is_finite() => t.elements[rng.gen_range(0..t.order)],
            Some(_) => GroupElement::from_real(gspec, rotation_about_z(rng.gen_range(-PI..PI)))?,
            None => GroupElement::from_real(gspec, rotation_about_z(normal.sample(&mut rng)))?,
        };
        samples.push(objects[id].transform(&g));
        ground_truth.push(g);
        object_ids.push(id as u32);
    }
    Ok(Dataset {
        spec: *spec,
        samples,
        ground_truth,
        object_ids,
    })
}
