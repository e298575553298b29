use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{make_training_pair, training_pair_from, TimeSchedule, TrainingPair};
use crate::datasets::PointCloud;
use crate::error::{Error, Result};
use crate::liegroup::{GroupElement, GroupSpec};
use crate::net::{loss_and_grad, Adam, Batch, Checkpoint, NetArch, VelocityNetwork};
use crate::rng::{derive_seed, substream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub schedule: TimeSchedule,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 256,
            learning_rate: Adam::DEFAULT_LR,
            schedule: TimeSchedule::Uniform,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        self.schedule.validate()
    }
}

/// Source of the initial transforms g.
#[derive(Clone, Debug)]
pub enum Prior {
    /// The hypothesis group's prior.
    Standard,
    /// Every draw returns this element (for degenerate regression checks).
    Fixed(GroupElement),
}

pub struct TrainData {
    pub clouds: Vec<PointCloud>,
    pub spec: GroupSpec,
    pub prior: Prior,
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Mean training loss of every epoch run in this call.
    pub losses: Vec<f64>,
}

fn pair(data: &TrainData, idx: usize, schedule: TimeSchedule, rng: &mut crate::rng::Rng) -> Result<TrainingPair> {
    let x1 = &data.clouds[idx];
    match &data.prior {
        Prior::Standard => make_training_pair(x1, data.spec, schedule, rng),
        Prior::Fixed(g) => training_pair_from(x1, g, super::sample_time(schedule, rng)),
    }
}

/// Mini-batch flow-matching training.
///
/// Epoch `e` shuffles with its own stream derived from the seed, and batch
/// position `p` of that epoch draws its pair from its own stream, so resuming
/// from a checkpoint after epoch `e` reproduces an uninterrupted run.
/// `on_epoch` sees every completed epoch with its mean loss; it can persist
/// checkpoints so a later divergence leaves the last good state on disk.
pub fn train(
    data: &TrainData,
    arch: NetArch,
    cfg: &TrainConfig,
    resume: Option<Checkpoint>,
    mut on_epoch: impl FnMut(usize, f64, &Checkpoint) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.clouds.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if arch.spec() != data.spec {
        return Err(Error::Config(format!(
            "network outputs {} but the data uses {}",
            arch.group, data.spec.kind
        )));
    }
    let mut ck = match resume {
        Some(ck) => {
            ck.ensure_compatible(data.spec, arch.point_dim, arch.n_points)?;
            ck
        }
        None => {
            let mut rng = substream(derive_seed(cfg.seed, "init"), 0);
            let net = VelocityNetwork::new(arch, &mut rng)?;
            let n = net.params().len();
            Checkpoint {
                net,
                epoch: 0,
                optimizer: Some(Adam::new(n, cfg.learning_rate)),
            }
        }
    };
    let mut opt = ck
        .optimizer
        .take()
        .unwrap_or_else(|| Adam::new(ck.net.params().len(), cfg.learning_rate));
    let feat = ck.net.arch().cloud_len();
    let out_dim = ck.net.arch().output_dim();
    let mut losses = Vec::new();

    for epoch in ck.epoch..cfg.epochs {
        let epoch_seed = derive_seed(cfg.seed, &format!("epoch/{epoch}"));
        let mut order: Vec<usize> = (0..data.clouds.len()).collect();
        order.shuffle(&mut substream(epoch_seed, 0));
        let (mut total, mut count) = (0.0, 0usize);
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let start = bi * cfg.batch_size;
            let pairs = chunk
                .par_iter()
                .enumerate()
                .map(|(k, &idx)| {
                    let mut rng = substream(epoch_seed, 1 + (start + k) as u64);
                    pair(data, idx, cfg.schedule, &mut rng)
                })
                .collect::<Result<Vec<_>>>()?;
            let b = pairs.len();
            let mut inputs = Array2::zeros((b, feat));
            let mut targets = Array2::zeros((b, out_dim));
            let mut times = Vec::with_capacity(b);
            for (r, p) in pairs.iter().enumerate() {
                ck.net
                    .cloud_features(&p.x_t, inputs.row_mut(r).as_slice_mut().unwrap())?;
                targets
                    .row_mut(r)
                    .as_slice_mut()
                    .unwrap()
                    .copy_from_slice(p.target.coeffs());
                times.push(p.t);
            }
            let batch = Batch {
                inputs,
                times,
                targets,
                index: bi,
            };
            let (loss, grad) = loss_and_grad(&ck.net, &batch).map_err(|e| match e {
                Error::Divergence { batch, .. } => Error::Divergence { epoch, batch },
                other => other,
            })?;
            opt.update(ck.net.params_mut(), &grad);
            if ck.net.params().iter().any(|p| !p.is_finite()) {
                return Err(Error::Divergence { epoch, batch: bi });
            }
            total += loss * b as f64;
            count += b;
        }
        let mean = total / count as f64;
        ck.epoch = epoch + 1;
        losses.push(mean);
        log::info!("epoch {} loss {mean:.6}", epoch + 1);
        ck.optimizer = Some(opt);
        on_epoch(epoch + 1, mean, &ck)?;
        opt = ck.optimizer.take().unwrap();
    }
    ck.optimizer = Some(opt);
    Ok(TrainOutcome {
        checkpoint: ck,
        losses,
    })
}
