//! Velocity networks: a small reverse-mode autodiff engine, the GELU MLP,
//! time embeddings, the flow-matching loss, Adam, and checkpoints.

mod adam;
mod checkpoint;
mod mlp;
pub mod tape;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use mlp::{param_count, Mlp};

use crate::datasets::PointCloud;
use crate::error::{Error, Result};
use crate::liegroup::{AlgebraElement, GroupKind, GroupSpec};
use tape::Tape;

/// x·Φ(x) with the exact normal CDF.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmbeddingMode {
    Concat,
    Sinusoidal,
}

impl fmt::Display for EmbeddingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingMode::Concat => "Concat",
            EmbeddingMode::Sinusoidal => "Sinusoidal",
        })
    }
}

impl FromStr for EmbeddingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Concat" => Ok(EmbeddingMode::Concat),
            "Sinusoidal" => Ok(EmbeddingMode::Sinusoidal),
            other => Err(Error::parse("embedding mode", format!("unknown mode {other:?}"))),
        }
    }
}

/// How the time t enters the network.
///
/// `Sinusoidal` uses `dim / 2` angular frequencies spaced geometrically from
/// 1 to `max_frequency` and emits `sin(ωt)` then `cos(ωt)`. The lowest
/// frequency is 1 rad per unit time, so the map is injective on [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeEmbedding {
    pub mode: EmbeddingMode,
    pub dim: usize,
    pub max_frequency: f64,
}

impl TimeEmbedding {
    pub const CONCAT: TimeEmbedding = TimeEmbedding {
        mode: EmbeddingMode::Concat,
        dim: 1,
        max_frequency: 0.0,
    };

    pub fn sinusoidal(dim: usize, max_frequency: f64) -> Self {
        TimeEmbedding {
            mode: EmbeddingMode::Sinusoidal,
            dim,
            max_frequency,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            EmbeddingMode::Concat if self.dim != 1 => {
                Err(Error::Config("concat time embedding has dim 1".into()))
            }
            EmbeddingMode::Sinusoidal if self.dim < 2 || !self.dim.is_multiple_of(2) => {
                Err(Error::Config(format!("sinusoidal embedding dim must be even and ≥ 2, got {}", self.dim)))
            }
            EmbeddingMode::Sinusoidal if !(self.max_frequency >= 1.0) => {
                Err(Error::Config("sinusoidal max_frequency must be ≥ 1".into()))
            }
            _ => Ok(()),
        }
    }

    fn frequencies(&self) -> Vec<f64> {
        let half = self.dim / 2;
        if half == 1 {
            return vec![1.0];
        }
        (0..half)
            .map(|k| self.max_frequency.powf(k as f64 / (half - 1) as f64))
            .collect()
    }

    /// Writes the embedding of `t` into `out` (length `dim`).
    pub fn embed_into(&self, t: f64, out: &mut [f64]) {
        match self.mode {
            EmbeddingMode::Concat => out[0] = t,
            EmbeddingMode::Sinusoidal => {
                let half = self.dim / 2;
                for (k, w) in self.frequencies().into_iter().enumerate() {
                    let (s, c) = (w * t).sin_cos();
                    out[k] = s;
                    out[half + k] = c;
                }
            }
        }
    }

    pub fn embed(&self, t: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        self.embed_into(t, &mut v);
        v
    }
}

/// Shape of a velocity network: which group it outputs, what clouds it reads,
/// hidden widths, and the time embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct NetArch {
    pub group: GroupKind,
    pub point_dim: usize,
    pub n_points: usize,
    pub hidden: Vec<usize>,
    pub embedding: TimeEmbedding,
}

impl NetArch {
    pub fn spec(&self) -> GroupSpec {
        GroupSpec::new(self.group)
    }

    /// Flattened cloud length; complex groups read interleaved (re, im).
    pub fn cloud_len(&self) -> usize {
        let n = self.point_dim * self.n_points;
        if self.spec().is_complex() {
            2 * n
        } else {
            n
        }
    }

    pub fn input_dim(&self) -> usize {
        self.cloud_len() + self.embedding.dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec().algebra_dim
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(&self.hidden);
        s.push(self.output_dim());
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.embedding.validate()?;
        if self.point_dim != self.spec().matrix_dim {
            return Err(Error::Config(format!(
                "{} acts on {}D points, cloud is {}D",
                self.group,
                self.spec().matrix_dim,
                self.point_dim
            )));
        }
        if self.n_points == 0 || self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("network needs points and nonzero hidden widths".into()));
        }
        Ok(())
    }
}

/// The flow's vector field: (cloud, t) ↦ Lie algebra coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityNetwork {
    arch: NetArch,
    mlp: Mlp,
}

/// One mini-batch of flow-matching regression data. Rows of `inputs` are
/// flattened clouds; rows of `targets` are algebra coefficients.
#[derive(Clone, Debug)]
pub struct Batch {
    pub inputs: Array2<f64>,
    pub times: Vec<f64>,
    pub targets: Array2<f64>,
    pub index: usize,
}

impl VelocityNetwork {
    pub fn new(arch: NetArch, rng: &mut crate::rng::Rng) -> Result<Self> {
        arch.validate()?;
        let mlp = Mlp::new(&arch.layer_sizes(), rng);
        Ok(VelocityNetwork { arch, mlp })
    }

    pub fn from_parts(arch: NetArch, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let sizes = arch.layer_sizes();
        let mlp = Mlp::from_params(&sizes, params).ok_or_else(|| {
            Error::Incompatible(format!("parameter count does not match {} layout", arch.group))
        })?;
        Ok(VelocityNetwork { arch, mlp })
    }

    pub fn arch(&self) -> &NetArch {
        &self.arch
    }

    pub fn spec(&self) -> GroupSpec {
        self.arch.spec()
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn params(&self) -> &[f64] {
        self.mlp.params()
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        self.mlp.params_mut()
    }

    fn check_cloud(&self, cloud: &PointCloud) -> Result<()> {
        if cloud.dim() != self.arch.point_dim || cloud.len() != self.arch.n_points {
            return Err(Error::contract(format!(
                "network expects {} points in {}D, got {} in {}D",
                self.arch.n_points,
                self.arch.point_dim,
                cloud.len(),
                cloud.dim()
            )));
        }
        Ok(())
    }

    /// Flattens a cloud into the network's input layout (without time).
    pub fn cloud_features(&self, cloud: &PointCloud, out: &mut [f64]) -> Result<()> {
        self.check_cloud(cloud)?;
        cloud.flatten_into(self.spec().is_complex(), out);
        Ok(())
    }

    /// Full input matrix: cloud features followed by the time embedding.
    fn assemble(&self, clouds: ArrayView2<'_, f64>, times: &[f64]) -> Array2<f64> {
        let c = self.arch.cloud_len();
        assert_eq!(clouds.ncols(), c, "cloud feature width");
        assert_eq!(clouds.nrows(), times.len(), "one time per row");
        let mut x = Array2::zeros((times.len(), self.arch.input_dim()));
        for (r, &t) in times.iter().enumerate() {
            let mut row = x.row_mut(r);
            let row = row.as_slice_mut().unwrap();
            for (dst, src) in row[..c].iter_mut().zip(clouds.row(r).iter()) {
                *dst = *src;
            }
            self.arch.embedding.embed_into(t, &mut row[c..]);
        }
        x
    }

    /// Batched evaluation: one row of coefficients per input row.
    pub fn forward_batch(&self, clouds: ArrayView2<'_, f64>, times: &[f64]) -> Array2<f64> {
        self.mlp.infer(self.assemble(clouds, times).view())
    }

    pub fn forward(&self, cloud: &PointCloud, t: f64) -> Result<AlgebraElement> {
        let mut feats = vec![0.0; self.arch.cloud_len()];
        self.cloud_features(cloud, &mut feats)?;
        let x = ArrayView2::from_shape((1, feats.len()), &feats).unwrap();
        let out = self.forward_batch(x, &[t]);
        AlgebraElement::from_coeffs(self.spec(), out.as_slice().unwrap())
    }

    /// Gradient of output coefficient `k` with respect to the cloud features.
    pub fn input_gradient(&self, cloud: &PointCloud, t: f64, k: usize) -> Result<Vec<f64>> {
        let mut feats = vec![0.0; self.arch.cloud_len()];
        self.cloud_features(cloud, &mut feats)?;
        let x = ArrayView2::from_shape((1, feats.len()), &feats).unwrap();
        let mut tape = Tape::new();
        let input = tape.leaf(self.assemble(x, &[t]));
        let (out, _) = self.mlp.forward_tape(&mut tape, input);
        let mut pick = Array2::zeros((self.arch.output_dim(), 1));
        pick[(k, 0)] = 1.0;
        let pick = tape.leaf(pick);
        let y = tape.matmul(out, pick);
        let grads = tape.backward(y);
        let g = grads.get(input).expect("input reaches output");
        Ok(g.iter().take(self.arch.cloud_len()).copied().collect())
    }
}

/// Mean over the batch of the squared Euclidean norm of
/// (prediction − target) in generator coefficients, and its parameter
/// gradient.
pub fn loss_and_grad(net: &VelocityNetwork, batch: &Batch) -> Result<(f64, Vec<f64>)> {
    let b = batch.times.len();
    if b == 0 {
        return Err(Error::contract("empty batch"));
    }
    if batch.targets.dim() != (b, net.arch.output_dim()) {
        return Err(Error::contract("target shape does not match the batch"));
    }
    let mut tape = Tape::new();
    let x = tape.leaf(net.assemble(batch.inputs.view(), &batch.times));
    let (pred, vars) = net.mlp.forward_tape(&mut tape, x);
    let target = tape.leaf(batch.targets.clone());
    let diff = tape.sub(pred, target);
    let ss = tape.sum_squares(diff);
    let loss = tape.scale(ss, 1.0 / b as f64);
    let value = tape.value(loss)[(0, 0)];
    if !value.is_finite() {
        return Err(Error::Divergence {
            epoch: 0,
            batch: batch.index,
        });
    }
    let grads = tape.backward(loss);
    Ok((value, net.mlp.collect_grad(&vars, &grads)))
}

/// Default hidden widths per configuration.
pub fn default_hidden(spec: GroupSpec) -> Vec<usize> {
    let w = match (spec.matrix_dim, spec.is_complex()) {
        (2, false) => 128,
        _ => 256,
    };
    vec![w; 3]
}
