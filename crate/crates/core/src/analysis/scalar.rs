//! Flow matching directly on SO(2) angles towards a finite set of modes, and
//! the posterior over modes along the learned flow.
//!
//! Angles live on the circle [−π, π). Interpolation follows the shortest
//! arc, x_t = wrap(x₀ + t·wrap(x₁ − x₀)), so the target velocity is the
//! constant signed arc length wrap(x₁ − x₀). The network reads
//! (cos x, sin x, t).

use std::f64::consts::{PI, TAU};
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{sample_time, TimeSchedule};
use crate::kv::KvText;
use crate::net::tape::Tape;
use crate::net::{Adam, Mlp};
use crate::rng::{derive_seed, substream};

/// Step of the central difference used for the divergence.
pub const DIVERGENCE_STEP: f64 = 1e-4;
pub const DEFAULT_SIGMA: f64 = 0.1;
pub const SCALAR_MAGIC: &[u8; 8] = b"LIEFLOWS";

/// Maps an angle to [−π, π).
pub fn wrap_angle(x: f64) -> f64 {
    x - TAU * ((x + PI) / TAU).floor()
}

/// The four C4 angles.
pub fn c4_modes() -> Vec<f64> {
    vec![-PI, -PI / 2.0, 0.0, PI / 2.0]
}

/// Index of the mode at the smallest arc distance from `x`.
pub fn nearest_mode(modes: &[f64], x: f64) -> usize {
    modes
        .iter()
        .enumerate()
        .min_by(|a, b| wrap_angle(*a.1 - x).abs().total_cmp(&wrap_angle(*b.1 - x).abs()))
        .map(|(k, _)| k)
        .expect("modes nonempty")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalarFlowConfig {
    pub hidden: Vec<usize>,
    /// Angular frequencies fed to the network.
    pub harmonics: usize,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub schedule: TimeSchedule,
    pub seed: u64,
}

impl Default for ScalarFlowConfig {
    fn default() -> Self {
        ScalarFlowConfig {
            hidden: vec![128; 3],
            harmonics: 1,
            epochs: 200,
            batches_per_epoch: 100,
            batch_size: 256,
            learning_rate: Adam::DEFAULT_LR,
            schedule: TimeSchedule::Uniform,
            seed: 0,
        }
    }
}

impl ScalarFlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be nonempty and positive".into()));
        }
        if self.harmonics == 0 {
            return Err(Error::Config("harmonics must be positive".into()));
        }
        if self.batch_size == 0 || self.batches_per_epoch == 0 {
            return Err(Error::Config("batch sizes must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        self.schedule.validate()
    }
}

/// Learned velocity field v(x, t) on the circle.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarFlowModel {
    mlp: Mlp,
    modes: Vec<f64>,
}

/// Inputs (cos kx, sin kx) for k = 1..=harmonics, then t.
fn features(xs: &[f64], ts: &[f64], harmonics: usize) -> Array2<f64> {
    let mut a = Array2::zeros((xs.len(), 2 * harmonics + 1));
    for (r, (&x, &t)) in xs.iter().zip(ts).enumerate() {
        for k in 0..harmonics {
            let (s, c) = ((k + 1) as f64 * x).sin_cos();
            a[(r, 2 * k)] = c;
            a[(r, 2 * k + 1)] = s;
        }
        a[(r, 2 * harmonics)] = t;
    }
    a
}

impl ScalarFlowModel {
    pub fn new(hidden: &[usize], harmonics: usize, modes: Vec<f64>, rng: &mut crate::rng::Rng) -> Self {
        let mut sizes = vec![2 * harmonics + 1];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        ScalarFlowModel {
            mlp: Mlp::new(&sizes, rng),
            modes,
        }
    }

    pub fn modes(&self) -> &[f64] {
        &self.modes
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn harmonics(&self) -> usize {
        (self.mlp.sizes()[0] - 1) / 2
    }

    pub fn velocity(&self, x: f64, t: f64) -> f64 {
        self.velocities(&[x], &[t])[0]
    }

    pub fn velocities(&self, xs: &[f64], ts: &[f64]) -> Vec<f64> {
        if xs.is_empty() {
            return Vec::new();
        }
        self.mlp.infer(features(xs, ts, self.harmonics()).view()).into_raw_vec_and_offset().0
    }

    /// Velocities and central-difference divergences ∂v/∂x.
    pub fn velocities_and_divergences(&self, xs: &[f64], ts: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = xs.len();
        let h = DIVERGENCE_STEP;
        let mut all_x = Vec::with_capacity(3 * n);
        all_x.extend_from_slice(xs);
        all_x.extend(xs.iter().map(|x| x + h));
        all_x.extend(xs.iter().map(|x| x - h));
        let all_t: Vec<f64> = ts.iter().chain(ts).chain(ts).copied().collect();
        let v = self.velocities(&all_x, &all_t);
        let div = (0..n).map(|i| (v[n + i] - v[2 * n + i]) / (2.0 * h)).collect();
        (v[..n].to_vec(), div)
    }

    /// Forward Euler from `x0` on the grid k/steps; row k holds x at k/steps.
    pub fn trajectories(&self, x0: &[f64], steps: usize) -> Vec<Vec<f64>> {
        let dt = 1.0 / steps as f64;
        let mut out = vec![x0.to_vec()];
        let mut x = x0.to_vec();
        for k in 0..steps {
            let ts = vec![k as f64 * dt; x.len()];
            let v = self.velocities(&x, &ts);
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi = wrap_angle(*xi + dt * vi);
            }
            out.push(x.clone());
        }
        out
    }
}

/// Trains the circle flow on an even mixture of `modes` from the uniform
/// prior. Every batch is drawn fresh from its own stream. Returns the model
/// and the mean loss of each epoch.
pub fn scalar_flow_train(modes: &[f64], cfg: &ScalarFlowConfig) -> Result<(ScalarFlowModel, Vec<f64>)> {
    cfg.validate()?;
    if modes.is_empty() {
        return Err(Error::Config("scalar flow needs at least one mode".into()));
    }
    if let Some(m) = modes.iter().find(|m| !(-PI..PI).contains(*m)) {
        return Err(Error::Config(format!("mode {m} outside [−π, π)")));
    }
    let mut model = ScalarFlowModel::new(&cfg.hidden, cfg.harmonics, modes.to_vec(), &mut substream(derive_seed(cfg.seed, "scalar/init"), 0));
    let mut opt = Adam::new(model.mlp.params().len(), cfg.learning_rate);
    let batch_seed = derive_seed(cfg.seed, "scalar/batch");
    let b = cfg.batch_size;
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for bi in 0..cfg.batches_per_epoch {
            let step = (epoch * cfg.batches_per_epoch + bi) as u64;
            let mut rng = substream(batch_seed, step);
            let (mut xs, mut ts, mut target) = (Vec::with_capacity(b), Vec::with_capacity(b), Array2::zeros((b, 1)));
            for r in 0..b {
                let x1 = modes[rng.gen_range(0..modes.len())];
                let x0 = rng.gen_range(-PI..PI);
                let t = sample_time(cfg.schedule, &mut rng);
                let u = wrap_angle(x1 - x0);
                xs.push(wrap_angle(x0 + t * u));
                ts.push(t);
                target[(r, 0)] = u;
            }
            let mut tape = Tape::new();
            let input = tape.leaf(features(&xs, &ts, cfg.harmonics));
            let (pred, vars) = model.mlp.forward_tape(&mut tape, input);
            let target = tape.leaf(target);
            let diff = tape.sub(pred, target);
            let ss = tape.sum_squares(diff);
            let loss = tape.scale(ss, 1.0 / b as f64);
            let value = tape.value(loss)[(0, 0)];
            if !value.is_finite() {
                return Err(Error::Divergence { epoch, batch: bi });
            }
            let grads = tape.backward(loss);
            let g = model.mlp.collect_grad(&vars, &grads);
            opt.update(model.mlp.params_mut(), &g);
            total += value;
        }
        let mean = total / cfg.batches_per_epoch as f64;
        log::debug!("scalar epoch {} loss {mean:.6}", epoch + 1);
        losses.push(mean);
    }
    Ok((model, losses))
}

pub fn save_scalar_model(model: &ScalarFlowModel, path: &Path) -> Result<()> {
    let mut kv = KvText::new();
    kv.push(
        "sizes",
        model.mlp.sizes().iter().map(usize::to_string).collect::<Vec<_>>().join(","),
    )
    .push(
        "modes",
        model.modes.iter().map(|m| format!("{m:?}")).collect::<Vec<_>>().join(","),
    );
    let text = kv.render();
    let mut buf = Vec::new();
    buf.extend_from_slice(SCALAR_MAGIC);
    buf.extend_from_slice(&(text.len() as u32).to_le_bytes());
    buf.extend_from_slice(text.as_bytes());
    for p in model.mlp.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_scalar_model(path: &Path) -> Result<ScalarFlowModel> {
    let what = "scalar model";
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..8] != SCALAR_MAGIC {
        return Err(Error::parse(what, "bad magic"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let head = bytes.get(12..12 + hlen).ok_or_else(|| Error::parse(what, "header truncated"))?;
    let kv = KvText::parse(what, std::str::from_utf8(head).map_err(|_| Error::parse(what, "header is not UTF-8"))?)?;
    let list = |key: &str| -> Result<Vec<String>> {
        Ok(kv.require(what, key)?.split(',').map(|s| s.trim().to_string()).collect())
    };
    let sizes = list("sizes")?
        .iter()
        .map(|s| s.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::parse(what, format!("bad sizes: {e}")))?;
    let modes = list("modes")?
        .iter()
        .map(|s| s.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::parse(what, format!("bad modes: {e}")))?;
    let params: Vec<f64> = bytes[12 + hlen..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if !(bytes.len() - 12 - hlen).is_multiple_of(8) || sizes.first().is_none_or(|&n| n < 3 || n % 2 == 0) || sizes.last() != Some(&1) {
        return Err(Error::parse(what, "parameter block does not match the layer sizes"));
    }
    let mlp = Mlp::from_params(&sizes, params).ok_or_else(|| Error::parse(what, "parameter count mismatch"))?;
    Ok(ScalarFlowModel { mlp, modes })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PosteriorConfig {
    /// Time steps T; posteriors are reported at k/T.
    pub steps: usize,
    pub sigma: f64,
    /// Number of prior samples N.
    pub samples: usize,
    /// Starting points of the tabulated flow used for the per-mode
    /// likelihood paths.
    pub table_size: usize,
    pub seed: u64,
}

impl Default for PosteriorConfig {
    fn default() -> Self {
        PosteriorConfig {
            steps: 100,
            sigma: DEFAULT_SIGMA,
            samples: 1000,
            table_size: 4096,
            seed: 0,
        }
    }
}

/// Posterior over the modes along sampled trajectories.
#[derive(Clone, Debug)]
pub struct PosteriorGrid {
    pub times: Vec<f64>,
    pub modes: Vec<f64>,
    pub sigma: f64,
    /// Initial points x₀ of the N sample trajectories.
    pub x0: Vec<f64>,
    /// `trajectories[k][i]`: sample i at time k/T.
    pub trajectories: Vec<Vec<f64>>,
    /// `log_density[k][i]`: log p_t of sample i by the continuity equation.
    pub log_density: Vec<Vec<f64>>,
    /// `posterior[k][i * K + m]`; rows of flagged samples are NaN.
    pub posterior: Vec<Vec<f64>>,
    /// Mean entropy over the unflagged samples at each time.
    pub entropy: Vec<f64>,
    /// Number of samples whose log-likelihood was non-finite, per time.
    pub flagged: Vec<usize>,
}

impl PosteriorGrid {
    pub fn k(&self) -> usize {
        self.modes.len()
    }

    pub fn row(&self, step: usize, sample: usize) -> &[f64] {
        let k = self.k();
        &self.posterior[step][sample * k..(sample + 1) * k]
    }

    /// Fraction of samples whose final-posterior argmax is the mode nearest
    /// to their x₀.
    pub fn nearest_mode_agreement(&self) -> f64 {
        let last = self.times.len() - 1;
        let hits = (0..self.x0.len())
            .filter(|&i| {
                let row = self.row(last, i);
                let arg = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b]));
                arg == Some(nearest_mode(&self.modes, self.x0[i]))
            })
            .count();
        hits as f64 / self.x0.len() as f64
    }

    /// `table[class][step][mode]`: mean posterior over samples whose x₀ is
    /// nearest to mode `class`.
    pub fn class_means(&self) -> Vec<Vec<Vec<f64>>> {
        let k = self.k();
        let classes: Vec<usize> = self.x0.iter().map(|&x| nearest_mode(&self.modes, x)).collect();
        (0..k)
            .map(|c| {
                (0..self.times.len())
                    .map(|s| {
                        let mut acc = vec![0.0; k];
                        let mut n = 0usize;
                        for (i, _) in classes.iter().enumerate().filter(|(_, &ci)| ci == c) {
                            let row = self.row(s, i);
                            if row.iter().all(|p| p.is_finite()) {
                                acc.iter_mut().zip(row).for_each(|(a, p)| *a += p);
                                n += 1;
                            }
                        }
                        acc.iter().map(|a| if n > 0 { a / n as f64 } else { f64::NAN }).collect()
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&q| q > 0.0).map(|q| q * q.ln()).sum::<f64>()
}

/// Normalises log-weights into probabilities (log-sum-exp).
fn softmax(logits: &[f64]) -> Option<Vec<f64>> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    Some(w.iter().map(|x| x / s).collect())
}

/// The learned flow from a uniform grid of starting points: positions and
/// log-densities at every time step, used to evaluate the likelihood path
/// of an arbitrary inverted x₀ by periodic linear interpolation.
struct FlowTable {
    size: usize,
    log_density: Vec<Vec<f64>>,
}

impl FlowTable {
    fn build(model: &ScalarFlowModel, size: usize, steps: usize) -> Self {
        let starts: Vec<f64> = (0..size).map(|g| -PI + TAU * g as f64 / size as f64).collect();
        let (_, log_density) = integrate(model, &starts, steps);
        FlowTable { size, log_density }
    }

    fn log_density_at(&self, step: usize, x0: f64) -> f64 {
        let u = (wrap_angle(x0) + PI) / TAU * self.size as f64;
        let i = (u.floor() as usize).min(self.size - 1);
        let f = u - i as f64;
        let row = &self.log_density[step];
        (1.0 - f) * row[i] + f * row[(i + 1) % self.size]
    }
}

/// Forward Euler for positions and the continuity equation
/// d/dt log p = −∂v/∂x on the grid k/steps, from the uniform prior.
fn integrate(model: &ScalarFlowModel, x0: &[f64], steps: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    const CHUNK: usize = 256;
    let dt = 1.0 / steps as f64;
    let log_p0 = -(TAU.ln());
    let chunks: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> = x0
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut x = chunk.to_vec();
            let mut lp = vec![log_p0; x.len()];
            let (mut xs, mut lps) = (vec![x.clone()], vec![lp.clone()]);
            for k in 0..steps {
                let ts = vec![k as f64 * dt; x.len()];
                let (v, div) = model.velocities_and_divergences(&x, &ts);
                for i in 0..x.len() {
                    x[i] = wrap_angle(x[i] + dt * v[i]);
                    lp[i] -= dt * div[i];
                }
                xs.push(x.clone());
                lps.push(lp.clone());
            }
            (xs, lps)
        })
        .collect();
    let mut xs = vec![Vec::with_capacity(x0.len()); steps + 1];
    let mut lps = vec![Vec::with_capacity(x0.len()); steps + 1];
    for (cx, cl) in chunks {
        for k in 0..=steps {
            xs[k].extend_from_slice(&cx[k]);
            lps[k].extend_from_slice(&cl[k]);
        }
    }
    (xs, lps)
}

/// Posterior p(x₁ = μ_k | x_t) along N sampled trajectories, for t on the
/// grid k/T.
///
/// At t = 0 it is the prior over modes. For t > 1 − 1/T the likelihood is
/// the Gaussian −d(x_t, μ_k)²/(2σ²) with d the arc distance. Otherwise the
/// interpolation is inverted per mode, x₀ = μ_k + wrap(x_t − μ_k)/(1 − t),
/// and the likelihood is the continuity-equation log-density accumulated
/// along the learned flow from that x₀ to t, read from a table of the flow
/// over `table_size` uniformly spaced starting points. The prior over modes
/// is uniform.
pub fn compute_posterior(model: &ScalarFlowModel, cfg: &PosteriorConfig) -> Result<PosteriorGrid> {
    let steps = cfg.steps;
    if steps < 2 {
        return Err(Error::Config("posterior needs T ≥ 2".into()));
    }
    if !(cfg.sigma > 0.0) || cfg.samples == 0 || cfg.table_size < 2 {
        return Err(Error::Config("posterior needs σ > 0, N ≥ 1 and a table of ≥ 2 points".into()));
    }
    let modes = model.modes().to_vec();
    let k = modes.len();
    if k == 0 {
        return Err(Error::Config("posterior needs at least one mode".into()));
    }
    let mut rng = substream(derive_seed(cfg.seed, "posterior/x0"), 0);
    let x0: Vec<f64> = (0..cfg.samples).map(|_| rng.gen_range(-PI..PI)).collect();
    let (trajectories, log_density) = integrate(model, &x0, steps);
    let table = FlowTable::build(model, cfg.table_size, steps);
    let log_prior = -(k as f64).ln();
    let threshold = 1.0 - 1.0 / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|s| s as f64 / steps as f64).collect();

    let mut posterior = Vec::with_capacity(steps + 1);
    let mut entropies = Vec::with_capacity(steps + 1);
    let mut flagged = Vec::with_capacity(steps + 1);
    for (s, &t) in times.iter().enumerate() {
        let mut rows = vec![f64::NAN; cfg.samples * k];
        let (mut h_sum, mut n_ok, mut n_bad) = (0.0, 0usize, 0usize);
        for (i, &xt) in trajectories[s].iter().enumerate() {
            let loglik: Vec<f64> = if s == 0 {
                Vec::new()
            } else if t > threshold {
                modes
                    .iter()
                    .map(|&m| -wrap_angle(xt - m).powi(2) / (2.0 * cfg.sigma * cfg.sigma))
                    .collect()
            } else {
                modes
                    .iter()
                    .map(|&m| table.log_density_at(s, m + wrap_angle(xt - m) / (1.0 - t)))
                    .collect()
            };
            if s == 0 {
                // independent of x₀: the prior itself, with its exact entropy
                rows[i * k..(i + 1) * k].fill(1.0 / k as f64);
                continue;
            }
            let logits: Vec<f64> = loglik.iter().map(|l| l + log_prior).collect();
            match softmax(&logits).filter(|_| logits.iter().all(|l| !l.is_nan())) {
                Some(p) => {
                    h_sum += entropy(&p);
                    n_ok += 1;
                    rows[i * k..(i + 1) * k].copy_from_slice(&p);
                }
                None => n_bad += 1,
            }
        }
        posterior.push(rows);
        entropies.push(if s == 0 {
            (k as f64).ln()
        } else if n_ok > 0 {
            h_sum / n_ok as f64
        } else {
            f64::NAN
        });
        flagged.push(n_bad);
    }
    Ok(PosteriorGrid {
        times,
        modes,
        sigma: cfg.sigma,
        x0,
        trajectories,
        log_density,
        posterior,
        entropy: entropies,
        flagged,
    })
}

/// Field values on a uniform (x, t) grid: `nx` angles over [−π, π) and the
/// given times. Rows are `(t, x, v)`.
pub fn velocity_grid(model: &ScalarFlowModel, nx: usize, times: &[f64]) -> Vec<(f64, f64, f64)> {
    let xs: Vec<f64> = (0..nx).map(|i| -PI + TAU * (i as f64 + 0.5) / nx as f64).collect();
    let mut out = Vec::with_capacity(nx * times.len());
    for &t in times {
        let v = model.velocities(&xs, &vec![t; nx]);
        out.extend(xs.iter().zip(v).map(|(&x, v)| (t, x, v)));
    }
    out
}
