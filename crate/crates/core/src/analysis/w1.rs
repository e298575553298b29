//! Wasserstein-1 distances between empirical distributions.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::lap;
use crate::error::{Error, Result};
use crate::liegroup::GroupElement;
use crate::rng::substream;

/// Largest problem solved by one exact assignment.
pub const LAP_MAX: usize = 2048;

/// A W1 value with its block decomposition. A single block means the value
/// is the exact assignment optimum.
#[derive(Clone, Debug, PartialEq)]
pub struct W1Estimate {
    pub value: f64,
    pub block_size: usize,
    pub blocks: Vec<f64>,
    /// Sample variance over blocks (0 for a single block).
    pub block_variance: f64,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exact W1 between equal-size point sets under `metric`.
pub fn assignment_w1(a: &[Vec<f64>], b: &[Vec<f64>], metric: impl Fn(&[f64], &[f64]) -> f64 + Sync) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let cost: Vec<f64> = a
        .par_iter()
        .flat_map_iter(|x| b.iter().map(|y| metric(x, y)).collect::<Vec<_>>())
        .collect();
    let assign = lap::solve(n, &cost);
    assign.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>() / n as f64
}

/// W1 between point sets: exact when both have the same size ≤
/// [`LAP_MAX`], otherwise the mean over disjoint blocks of size
/// min(|a|, |b|, LAP_MAX) after a seeded shuffle of each set.
pub fn wasserstein1_points(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    metric: impl Fn(&[f64], &[f64]) -> f64 + Sync,
    seed: u64,
) -> Result<W1Estimate> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::contract("W1 needs two nonempty samples"));
    }
    if a.iter().chain(b).any(|p| p.len() != a[0].len()) {
        return Err(Error::contract("W1 samples have different dimensions"));
    }
    if a.len() == b.len() && a.len() <= LAP_MAX {
        let v = assignment_w1(a, b, &metric);
        return Ok(W1Estimate {
            value: v,
            block_size: a.len(),
            blocks: vec![v],
            block_variance: 0.0,
        });
    }
    let size = a.len().min(b.len()).min(LAP_MAX);
    let n_blocks = a.len().min(b.len()) / size;
    let mut pa: Vec<usize> = (0..a.len()).collect();
    let mut pb: Vec<usize> = (0..b.len()).collect();
    pa.shuffle(&mut substream(seed, 0));
    pb.shuffle(&mut substream(seed, 1));
    let blocks: Vec<f64> = (0..n_blocks)
        .map(|i| {
            let r = i * size..(i + 1) * size;
            let xa: Vec<Vec<f64>> = pa[r.clone()].iter().map(|&k| a[k].clone()).collect();
            let xb: Vec<Vec<f64>> = pb[r].iter().map(|&k| b[k].clone()).collect();
            assignment_w1(&xa, &xb, &metric)
        })
        .collect();
    let mean = blocks.iter().sum::<f64>() / n_blocks as f64;
    let var = if n_blocks > 1 {
        blocks.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_blocks - 1) as f64
    } else {
        0.0
    };
    Ok(W1Estimate {
        value: mean,
        block_size: size,
        blocks,
        block_variance: var,
    })
}

/// W1 between group elements under the Frobenius distance of their
/// matrices (complex entries as interleaved real pairs).
pub fn wasserstein1(generated: &[GroupElement], truth: &[GroupElement], seed: u64) -> Result<W1Estimate> {
    if let (Some(g), Some(t)) = (generated.first(), truth.first()) {
        if let Some(bad) = generated.iter().chain(truth).find(|e| e.spec() != g.spec()) {
            return Err(Error::contract(format!(
                "W1 needs one group, got {} and {}",
                g.spec(),
                bad.spec()
            )));
        }
        if t.spec() != g.spec() {
            return Err(Error::contract(format!("W1 needs one group, got {} and {}", g.spec(), t.spec())));
        }
    }
    let a: Vec<Vec<f64>> = generated.iter().map(GroupElement::flatten).collect();
    let b: Vec<Vec<f64>> = truth.iter().map(GroupElement::flatten).collect();
    wasserstein1_points(&a, &b, euclidean, seed)
}

/// W1 on the real line by the quantile formula: the integral of
/// |F_a − F_b|. For equal sizes this is the mean of |a₍ᵢ₎ − b₍ᵢ₎| over the
/// sorted samples.
pub fn w1_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::contract("W1 needs two nonempty samples"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    if a.len() == b.len() {
        return Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut prev = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        total += (next - prev) * (i as f64 / na - j as f64 / nb).abs();
        prev = next;
        while i < a.len() && a[i] <= next {
            i += 1;
        }
        while j < b.len() && b[j] <= next {
            j += 1;
        }
    }
    Ok(total)
}

/// W1 on the circle [−π, π) with arc-length cost: the integral of
/// |F_a − F_b − c| minimized over the constant c, which is attained at a
/// length-weighted median of F_a − F_b.
pub fn w1_circle(a: &[f64], b: &[f64]) -> Result<f64> {
    use std::f64::consts::PI;
    if a.is_empty() || b.is_empty() {
        return Err(Error::contract("W1 needs two nonempty samples"));
    }
    let wrap = |x: f64| (x + PI).rem_euclid(2.0 * PI) - PI;
    let mut pts: Vec<(f64, f64)> = a
        .iter()
        .map(|&x| (wrap(x), 1.0 / a.len() as f64))
        .chain(b.iter().map(|&x| (wrap(x), -1.0 / b.len() as f64)))
        .collect();
    pts.sort_by(|x, y| x.0.total_cmp(&y.0));
    // (F_a − F_b) on each arc between consecutive points, the last arc
    // wrapping through π.
    let mut d = 0.0;
    let mut arcs = Vec::with_capacity(pts.len());
    for (i, &(x, w)) in pts.iter().enumerate() {
        d += w;
        let next = if i + 1 < pts.len() { pts[i + 1].0 } else { pts[0].0 + 2.0 * PI };
        arcs.push((d, next - x));
    }
    let mut by_value = arcs.clone();
    by_value.sort_by(|x, y| x.0.total_cmp(&y.0));
    let half = PI;
    let mut acc = 0.0;
    let mut c = by_value[0].0;
    for &(v, len) in &by_value {
        acc += len;
        c = v;
        if acc >= half {
            break;
        }
    }
    Ok(arcs.iter().map(|(v, len)| (v - c).abs() * len).sum())
}
