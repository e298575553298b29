//! Flow matching on the group: training pairs along exponential curves,
//! time schedules, the training loop, and Euler sampling on the group.

mod sample;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use sample::{
    generate_elements, generate_from, sample_data, sample_group_element, sample_trajectories, Generated, SamplerConfig,
    Trajectory,
};
pub use train::{train, Prior, TrainConfig, TrainData, TrainOutcome};

use crate::datasets::PointCloud;
use crate::error::{Error, Result};
use crate::liegroup::{mat_exp, mat_log, sample_prior, AlgebraElement, GroupElement, GroupSpec};

/// Prior draws whose logarithm is undefined are redrawn at most this often.
pub const PRIOR_RETRIES: usize = 16;

pub const DEFAULT_POWER: f64 = 5.0;

/// Distribution of training times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum TimeSchedule {
    Uniform,
    /// Density n·t^{n−1} on [0, 1].
    Power { n: f64 },
}

impl TimeSchedule {
    pub fn power(n: f64) -> Self {
        TimeSchedule::Power { n }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TimeSchedule::Power { n } if !(n >= 1.0 && n.is_finite()) => {
                Err(Error::Config(format!("power schedule needs n ≥ 1, got {n}")))
            }
            _ => Ok(()),
        }
    }

    /// CDF of the schedule at `t ∈ [0, 1]`.
    pub fn cdf(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match *self {
            TimeSchedule::Uniform => t,
            TimeSchedule::Power { n } => t.powf(n),
        }
    }
}

impl fmt::Display for TimeSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeSchedule::Uniform => f.write_str("uniform"),
            TimeSchedule::Power { n } => write!(f, "power:{n:?}"),
        }
    }
}

impl FromStr for TimeSchedule {
    type Err = Error;
    /// Accepts `uniform`, `power` (n = 5) and `power:<n>`.
    fn from_str(s: &str) -> Result<Self> {
        let sched = match s.split_once(':') {
            None if s == "uniform" => TimeSchedule::Uniform,
            None if s == "power" => TimeSchedule::power(DEFAULT_POWER),
            Some(("power", n)) => TimeSchedule::power(
                n.parse()
                    .map_err(|_| Error::parse("schedule", format!("bad exponent {n:?}")))?,
            ),
            _ => return Err(Error::parse("schedule", format!("unknown schedule {s:?}"))),
        };
        sched.validate()?;
        Ok(sched)
    }
}

/// Draws a training time in [0, 1). The power schedule uses the inverse CDF
/// t = u^{1/n}.
pub fn sample_time<R: rand::Rng + ?Sized>(schedule: TimeSchedule, rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    match schedule {
        TimeSchedule::Uniform => u,
        TimeSchedule::Power { n } => u.powf(1.0 / n),
    }
}

/// One supervised example: the cloud at time t on the exponential curve from
/// x₀ = g·x₁ to x₁, and the constant target A = log(g⁻¹).
#[derive(Clone, Debug)]
pub struct TrainingPair {
    pub x_t: PointCloud,
    pub t: f64,
    pub target: AlgebraElement,
    pub x0: PointCloud,
    pub g: GroupElement,
}

/// Builds the pair for a given prior element and time.
pub fn training_pair_from(x1: &PointCloud, g: &GroupElement, t: f64) -> Result<TrainingPair> {
    let target = mat_log(&g.inverse())?;
    let x0 = x1.transform(g);
    let x_t = x0.transform(&mat_exp(&target.scale(t))?);
    Ok(TrainingPair {
        x_t,
        t,
        target,
        x0,
        g: *g,
    })
}

/// Draws g from the prior (redrawing at the cut locus) and t from the
/// schedule, then builds the pair.
pub fn make_training_pair<R: rand::Rng + ?Sized>(
    x1: &PointCloud,
    spec: GroupSpec,
    schedule: TimeSchedule,
    rng: &mut R,
) -> Result<TrainingPair> {
    for _ in 0..PRIOR_RETRIES {
        let g = sample_prior(spec, rng);
        let t = sample_time(schedule, rng);
        match training_pair_from(x1, &g, t) {
            Err(Error::CutLocus { .. } | Error::LogDomain { .. }) => continue,
            other => return other,
        }
    }
    Err(Error::RetriesExhausted {
        attempts: PRIOR_RETRIES,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::{rotation_2d, GroupKind};
    use crate::rng::substream;

    fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max((i as f64 + 1.0) / n - f)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn power_one_is_uniform() {
        let mut rng = substream(1, 0);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_time(TimeSchedule::power(1.0), &mut rng)).collect();
        assert!(ks_statistic(xs, |x| x) < 0.01);
    }

    #[test]
    fn power_five_matches_its_cdf_and_mean() {
        let mut rng = substream(2, 0);
        let s = TimeSchedule::power(5.0);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_time(s, &mut rng)).collect();
        assert!(xs.iter().all(|&x| (0.0..1.0).contains(&x)));
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 5.0 / 6.0).abs() < 0.01, "mean {mean}");
        let mut deciles = [0usize; 10];
        for &x in &xs {
            deciles[((x * 10.0) as usize).min(9)] += 1;
        }
        assert!(deciles.windows(2).all(|w| w[0] < w[1]), "{deciles:?}");
        assert!(ks_statistic(xs, |x| s.cdf(x)) < 0.01);
    }

    #[test]
    fn schedule_parsing() {
        assert_eq!("uniform".parse::<TimeSchedule>().unwrap(), TimeSchedule::Uniform);
        assert_eq!("power".parse::<TimeSchedule>().unwrap(), TimeSchedule::power(5.0));
        assert_eq!("power:3".parse::<TimeSchedule>().unwrap(), TimeSchedule::power(3.0));
        assert!("power:0.5".parse::<TimeSchedule>().is_err());
        assert!("cosine".parse::<TimeSchedule>().is_err());
    }

    #[test]
    fn endpoints_of_the_exponential_curve() {
        let x1 = PointCloud::from_points(&[[1.0, 0.2], [-0.3, 0.5]]);
        let g = GroupElement::from_real(GroupSpec::SO2, rotation_2d(-std::f64::consts::FRAC_PI_3)).unwrap();
        let p0 = training_pair_from(&x1, &g, 0.0).unwrap();
        assert!(p0.x_t.distance(&x1.transform(&g)) < 1e-15);
        let p1 = training_pair_from(&x1, &g, 1.0).unwrap();
        assert!(p1.x_t.distance(&x1) < 1e-8);
        assert!((p1.target.coeffs()[0] - std::f64::consts::FRAC_PI_3).abs() < 1e-15);
    }

    #[test]
    fn target_is_constant_and_reaches_data() {
        let mut rng = substream(3, 0);
        for kind in GroupKind::ALL {
            let spec = GroupSpec::new(kind);
            let d = spec.matrix_dim;
            let x1 = PointCloud::new(d, (0..4 * d).map(|k| (k as f64 * 0.37).sin()).collect()).unwrap();
            for _ in 0..200 {
                let p = make_training_pair(&x1, spec, TimeSchedule::Uniform, &mut rng).unwrap();
                let again = training_pair_from(&x1, &p.g, 0.5).unwrap();
                assert_eq!(again.target, p.target);
                let end = p.x0.transform(&mat_exp(&p.target).unwrap());
                assert!(end.distance(&x1) < 1e-8, "{kind}");
            }
        }
    }
}
