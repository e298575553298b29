//! Evaluation: canonicalization, Wasserstein-1 distances, histograms, the
//! scalar circle-flow diagnostic and plot data.

pub mod lap;
pub mod plots;
pub mod scalar;
mod w1;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use w1::{assignment_w1, euclidean, w1_1d, w1_circle, wasserstein1, wasserstein1_points, W1Estimate, LAP_MAX};

use crate::error::{Error, Result};
use crate::kv::KvText;
use crate::liegroup::{polar_rotation, rotation_to_angles, so3_angle, Angles, DiscreteGroupTable, GroupElement, GroupSpec, Mat};

/// How a generated transform h is brought into the ground-truth frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CanonicalizationMode {
    /// h·g_true⁻¹.
    RightInverse,
    /// h·g_true: the data cloud is g_true·c, and h maps it onto another data
    /// cloud h′·c, so h·g_true = h′ is the discovered transform of the
    /// canonical object.
    CarryCanonical,
}

impl fmt::Display for CanonicalizationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CanonicalizationMode::RightInverse => "right-inverse",
            CanonicalizationMode::CarryCanonical => "carry-canonical",
        })
    }
}

impl FromStr for CanonicalizationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "right-inverse" => Ok(CanonicalizationMode::RightInverse),
            "carry-canonical" => Ok(CanonicalizationMode::CarryCanonical),
            other => Err(Error::parse("canonicalization mode", format!("unknown mode {other:?}"))),
        }
    }
}

/// h·g_true⁻¹. If h = c·g_true this returns c.
pub fn canonicalize(h: &GroupElement, g_true: &GroupElement) -> GroupElement {
    h.compose(&g_true.inverse())
}

pub fn canonicalize_with(mode: CanonicalizationMode, h: &GroupElement, g_true: &GroupElement) -> GroupElement {
    match mode {
        CanonicalizationMode::RightInverse => canonicalize(h, g_true),
        CanonicalizationMode::CarryCanonical => h.compose(g_true),
    }
}

/// Rotation angle in (−π, π] of the nearest rotation to a real 2×2 element.
pub fn planar_angle(g: &GroupElement) -> Result<f64> {
    if g.spec().matrix_dim != 2 {
        return Err(Error::contract("planar angle needs a 2×2 element"));
    }
    let r = if g.spec() == GroupSpec::SO2 { *g } else { polar_rotation(g)? };
    match rotation_to_angles(&r)? {
        Angles::Planar(theta) => Ok(theta),
        Angles::Euler { .. } => unreachable!("2×2 rotation"),
    }
}

/// Fraction of `angles` within `tol` of an integer multiple of `step`.
pub fn fraction_near_multiples(angles: &[f64], step: f64, tol: f64) -> f64 {
    if angles.is_empty() {
        return 0.0;
    }
    let hits = angles
        .iter()
        .filter(|&&a| (a - step * (a / step).round()).abs() <= tol)
        .count();
    hits as f64 / angles.len() as f64
}

/// Counts over `bins` equal bins of (−π, π].
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn of_angles(angles: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::Config("histogram needs at least one bin".into()));
        }
        let w = 2.0 * PI / bins as f64;
        let edges = (0..=bins).map(|i| -PI + w * i as f64).collect();
        let mut counts = vec![0u64; bins];
        for &a in angles {
            // bins are (left, right]; −π belongs with π
            let a = if a <= -PI { PI } else { a };
            let i = ((a + PI) / w).ceil() as usize;
            counts[i.clamp(1, bins) - 1] += 1;
        }
        Ok(Histogram { edges, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Pearson χ² statistic against equal expected counts.
    pub fn chi_square_uniform(&self) -> f64 {
        let e = self.total() as f64 / self.counts.len() as f64;
        self.counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("left,right,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{:?},{:?},{c}\n", self.edges[i], self.edges[i + 1]));
        }
        s
    }
}

/// Histogram of the planar angles of 2×2 elements.
pub fn angle_histogram(elements: &[GroupElement], bins: usize) -> Result<Histogram> {
    let angles = elements.iter().map(planar_angle).collect::<Result<Vec<_>>>()?;
    Histogram::of_angles(&angles, bins)
}

/// Unit rotation axis of a 3×3 rotation, or `None` below `min_angle`.
pub fn rotation_axis(r: &Mat, min_angle: f64) -> Option<[f64; 3]> {
    let angle = so3_angle(r);
    if angle < min_angle {
        return None;
    }
    let w = [r.get(2, 1) - r.get(1, 2), r.get(0, 2) - r.get(2, 0), r.get(1, 0) - r.get(0, 1)];
    let n = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    if n > 1e-6 {
        return Some([w[0] / n, w[1] / n, w[2] / n]);
    }
    // angle near π: the axis spans the column space of R + I
    let mut best = [0.0; 3];
    let mut best_n = 0.0;
    for j in 0..3 {
        let c = [
            r.get(0, j) + if j == 0 { 1.0 } else { 0.0 },
            r.get(1, j) + if j == 1 { 1.0 } else { 0.0 },
            r.get(2, j) + if j == 2 { 1.0 } else { 0.0 },
        ];
        let cn = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
        if cn > best_n {
            best_n = cn;
            best = [c[0] / cn, c[1] / cn, c[2] / cn];
        }
    }
    Some(best)
}

/// Angle between the rotation axis and the z-axis line (sign ignored);
/// 0 for rotations smaller than `min_angle`, which belong to every
/// one-parameter subgroup.
pub fn axis_angle_to_z(r: &Mat, min_angle: f64) -> f64 {
    match rotation_axis(r, min_angle) {
        None => 0.0,
        Some(a) => a[2].abs().clamp(0.0, 1.0).acos(),
    }
}

/// Angle of the in-plane part of a rotation about z, atan2(R₁₀, R₀₀).
pub fn z_angle(r: &Mat) -> f64 {
    r.get(1, 0).atan2(r.get(0, 0))
}

/// A group of elements within the clustering radius of a center.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub center: usize,
    pub size: usize,
}

/// Greedy radius clustering: repeatedly takes the unassigned element with
/// the most unassigned neighbours within `radius` (Frobenius) and claims
/// those neighbours. Clusters come out in decreasing size.
pub fn radius_clusters(elements: &[GroupElement], radius: f64) -> Vec<Cluster> {
    use rayon::prelude::*;
    let n = elements.len();
    let flat: Vec<Vec<f64>> = elements.iter().map(GroupElement::flatten).collect();
    let neighbours: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).filter(|&j| euclidean(&flat[i], &flat[j]) <= radius).collect())
        .collect();
    let mut free = vec![true; n];
    let mut out = Vec::new();
    loop {
        let best = (0..n)
            .filter(|&i| free[i])
            .map(|i| (i, neighbours[i].iter().filter(|&&j| free[j]).count()))
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)));
        let Some((center, size)) = best else { break };
        for &j in &neighbours[center] {
            free[j] = false;
        }
        out.push(Cluster { center, size });
    }
    out
}

/// Number of clusters holding at least `min_share` of the elements, and the
/// share of elements they cover.
pub fn mode_count(clusters: &[Cluster], n: usize, min_share: f64) -> (usize, f64) {
    let big: Vec<&Cluster> = clusters.iter().filter(|c| c.size as f64 >= min_share * n as f64).collect();
    let covered: usize = big.iter().map(|c| c.size).sum();
    (big.len(), if n > 0 { covered as f64 / n as f64 } else { 0.0 })
}

/// Counts of elements by nearest table element.
pub fn mode_histogram(elements: &[GroupElement], table: &DiscreteGroupTable) -> Vec<u64> {
    let mut counts = vec![0u64; table.elements.len()];
    for e in elements {
        if let Some((i, _)) = table.nearest(e.matrix()) {
            counts[i] += 1;
        }
    }
    counts
}

/// Outcome of evaluating one run.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub experiment: String,
    pub w1: f64,
    pub w1_block_size: usize,
    pub w1_blocks: Vec<f64>,
    pub w1_block_variance: f64,
    pub sample_count: usize,
    /// Generated elements per nearest target-table element (empty for
    /// continuous targets).
    pub mode_histogram: Vec<u64>,
    pub canonicalization: CanonicalizationMode,
    /// Further named diagnostics, in insertion order.
    pub metrics: Vec<(String, f64)>,
}

impl EvalReport {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn to_text(&self) -> String {
        let join = |xs: Vec<String>| xs.join(",");
        let mut kv = KvText::new();
        kv.push("experiment", &self.experiment)
            .push_f64("w1", self.w1)
            .push("w1_block_size", self.w1_block_size)
            .push("w1_blocks", join(self.w1_blocks.iter().map(|x| format!("{x:?}")).collect()))
            .push_f64("w1_block_variance", self.w1_block_variance)
            .push("sample_count", self.sample_count)
            .push("mode_histogram", join(self.mode_histogram.iter().map(u64::to_string).collect()))
            .push("canonicalization", self.canonicalization);
        for (k, v) in &self.metrics {
            kv.push_f64(&format!("metric.{k}"), *v);
        }
        kv.render()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let what = "eval report";
        let kv = KvText::parse(what, text)?;
        let list = |key: &str| -> Vec<String> {
            kv.get(key)
                .filter(|s| !s.is_empty())
                .map(|s| s.split(',').map(str::to_string).collect())
                .unwrap_or_default()
        };
        let floats = |key: &str| -> Result<Vec<f64>> {
            list(key)
                .iter()
                .map(|s| s.parse().map_err(|_| Error::parse(what, format!("bad number in {key}"))))
                .collect()
        };
        let mode_histogram = list("mode_histogram")
            .iter()
            .map(|s| s.parse().map_err(|_| Error::parse(what, "bad mode_histogram")))
            .collect::<Result<Vec<u64>>>()?;
        let metrics = kv
            .keys()
            .filter_map(|k| k.strip_prefix("metric.").map(|name| (k.to_string(), name.to_string())))
            .map(|(k, name)| Ok((name, kv.parse_value(what, &k)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(EvalReport {
            experiment: kv.require(what, "experiment")?.to_string(),
            w1: kv.parse_value(what, "w1")?,
            w1_block_size: kv.parse_value(what, "w1_block_size")?,
            w1_blocks: floats("w1_blocks")?,
            w1_block_variance: kv.parse_value(what, "w1_block_variance")?,
            sample_count: kv.parse_value(what, "sample_count")?,
            mode_histogram,
            canonicalization: kv.parse_value(what, "canonicalization")?,
            metrics,
        })
    }
}
