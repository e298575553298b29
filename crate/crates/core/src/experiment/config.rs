use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::scalar::{PosteriorConfig, ScalarFlowConfig};
use crate::analysis::CanonicalizationMode;
use crate::datasets::{ObjectKind, Target};
use crate::error::{Error, Result};
use crate::flow::{SamplerConfig, TimeSchedule, TrainConfig, DEFAULT_POWER};
use crate::liegroup::{GroupKind, GroupSpec, SubgroupName};
use crate::net::{default_hidden, EmbeddingMode, NetArch, TimeEmbedding};

/// The runs the pipeline knows how to set up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "so2-c4")]
    So2C4,
    #[serde(rename = "gl2r-c4")]
    Gl2rC4,
    #[serde(rename = "gl2c-d4")]
    Gl2cD4,
    #[serde(rename = "so3-tet")]
    So3Tet,
    #[serde(rename = "so3-oct")]
    So3Oct,
    #[serde(rename = "so3-so2")]
    So3So2,
    #[serde(rename = "so3-ico")]
    So3Ico,
    #[serde(rename = "multi-object")]
    MultiObject,
    #[serde(rename = "gaussian-so2")]
    GaussianSo2,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::So2C4,
        Experiment::Gl2rC4,
        Experiment::Gl2cD4,
        Experiment::So3Tet,
        Experiment::So3Oct,
        Experiment::So3So2,
        Experiment::So3Ico,
        Experiment::MultiObject,
        Experiment::GaussianSo2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::So2C4 => "so2-c4",
            Experiment::Gl2rC4 => "gl2r-c4",
            Experiment::Gl2cD4 => "gl2c-d4",
            Experiment::So3Tet => "so3-tet",
            Experiment::So3Oct => "so3-oct",
            Experiment::So3So2 => "so3-so2",
            Experiment::So3Ico => "so3-ico",
            Experiment::MultiObject => "multi-object",
            Experiment::GaussianSo2 => "gaussian-so2",
        }
    }

    pub fn object(self) -> ObjectKind {
        match self {
            Experiment::So2C4 | Experiment::Gl2rC4 => ObjectKind::Arrow2D,
            Experiment::Gl2cD4 => ObjectKind::HalfArrow2D,
            Experiment::MultiObject => ObjectKind::MultiObject3D,
            _ => ObjectKind::IrregularTetrahedron3D,
        }
    }

    pub fn target(self) -> Target {
        match self {
            Experiment::So2C4 | Experiment::Gl2rC4 => Target::Group(SubgroupName::C4),
            Experiment::Gl2cD4 => Target::Group(SubgroupName::D4),
            Experiment::So3Tet | Experiment::MultiObject => Target::Group(SubgroupName::Tet),
            Experiment::So3Oct => Target::Group(SubgroupName::Oct),
            Experiment::So3So2 => Target::Group(SubgroupName::SO2AroundZ),
            Experiment::So3Ico => Target::Group(SubgroupName::Ico),
            Experiment::GaussianSo2 => Target::GaussianSO2,
        }
    }

    /// The hypothesis group G.
    pub fn hypothesis(self) -> GroupSpec {
        match self {
            Experiment::So2C4 => GroupSpec::SO2,
            Experiment::Gl2rC4 => GroupSpec::GL2R_PLUS,
            Experiment::Gl2cD4 => GroupSpec::GL2C,
            _ => GroupSpec::SO3,
        }
    }

    pub fn point_dim(self) -> usize {
        self.object().dim()
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

mod schedule_text {
    use super::TimeSchedule;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: &TimeSchedule, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<TimeSchedule, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

mod mode_text {
    use super::CanonicalizationMode;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &CanonicalizationMode, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(m)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<CanonicalizationMode, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    /// Training clouds.
    pub train_size: usize,
    /// Held-out clouds, generated from a separate seed; one generated
    /// element per test cloud.
    pub test_size: usize,
    /// Standard deviation of the z-angle for the Gaussian target.
    pub angle_sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSection {
    pub hidden: Vec<usize>,
    pub embedding: EmbeddingMode,
    /// Used by the sinusoidal embedding only.
    pub embedding_dim: usize,
    pub max_frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// `uniform`, `power` or `power:<n>`.
    #[serde(with = "schedule_text")]
    pub schedule: TimeSchedule,
    /// Save a checkpoint every this many epochs (the final epoch is always
    /// saved).
    pub checkpoint_every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    /// Euler steps T.
    pub steps: usize,
    /// Generated elements; the first `count` test clouds are used.
    pub count: usize,
    /// How many full trajectories to dump.
    pub trajectories: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(with = "mode_text")]
    pub canonicalization: CanonicalizationMode,
    pub histogram_bins: usize,
    /// Half-width of the display jitter on Mollweide coordinates.
    pub jitter: f64,
    /// Clustering radius (Frobenius) for mode counting.
    pub cluster_radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarSection {
    pub hidden: Vec<usize>,
    pub harmonics: usize,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(with = "schedule_text")]
    pub schedule: TimeSchedule,
    /// Time steps T of the posterior grid.
    pub steps: usize,
    pub sigma: f64,
    pub samples: usize,
    pub table_size: usize,
    /// Angles per row of the velocity grid.
    pub grid_points: usize,
}

/// Everything a run depends on. The snapshot written into the run directory
/// lists every field, so it replays the run on its own.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    /// Run directory; relative paths resolve against the output root.
    pub output_dir: PathBuf,
    pub dataset: DatasetSection,
    pub net: NetSection,
    pub train: TrainSection,
    pub sample: SampleSection,
    pub eval: EvalSection,
    pub scalar: ScalarSection,
}

impl RunConfig {
    /// Defaults for `experiment`.
    pub fn preset(experiment: Experiment) -> Self {
        let spec = experiment.hypothesis();
        let three_d = experiment.point_dim() == 3;
        let schedule = match experiment {
            Experiment::So3Oct | Experiment::So3Ico | Experiment::MultiObject | Experiment::GaussianSo2 => {
                TimeSchedule::power(DEFAULT_POWER)
            }
            _ => TimeSchedule::Uniform,
        };
        let scalar_defaults = ScalarFlowConfig::default();
        let posterior = PosteriorConfig::default();
        RunConfig {
            experiment,
            seed: 0,
            output_dir: PathBuf::from(experiment.name()),
            dataset: DatasetSection {
                train_size: 20_000,
                test_size: 5_000,
                angle_sigma: FRAC_PI_4,
            },
            net: NetSection {
                hidden: default_hidden(spec),
                embedding: if three_d { EmbeddingMode::Sinusoidal } else { EmbeddingMode::Concat },
                embedding_dim: 16,
                max_frequency: 100.0,
            },
            train: TrainSection {
                epochs: 200,
                batch_size: 256,
                learning_rate: crate::net::Adam::DEFAULT_LR,
                schedule,
                checkpoint_every: 10,
            },
            sample: SampleSection {
                steps: SamplerConfig::default_for(spec).steps,
                count: 5_000,
                trajectories: 100,
            },
            eval: EvalSection {
                canonicalization: CanonicalizationMode::CarryCanonical,
                histogram_bins: 72,
                jitter: crate::analysis::plots::MOLLWEIDE_JITTER,
                cluster_radius: 0.3,
            },
            scalar: ScalarSection {
                hidden: scalar_defaults.hidden,
                harmonics: scalar_defaults.harmonics,
                epochs: scalar_defaults.epochs,
                batches_per_epoch: scalar_defaults.batches_per_epoch,
                batch_size: scalar_defaults.batch_size,
                learning_rate: scalar_defaults.learning_rate,
                schedule: scalar_defaults.schedule,
                steps: posterior.steps,
                sigma: posterior.sigma,
                samples: posterior.samples,
                table_size: posterior.table_size,
                grid_points: 64,
            },
        }
    }

    /// Parses TOML. Missing fields take the preset of the named experiment
    /// (default `so2-c4`); unknown fields are errors.
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_for(text, None)
    }

    /// Like [`RunConfig::from_toml`], but `experiment` (if given) replaces
    /// the one named in the text before presets are applied.
    pub fn from_toml_for(text: &str, experiment: Option<Experiment>) -> Result<Self> {
        let mut user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if let Some(e) = experiment {
            user.insert("experiment".into(), toml::Value::String(e.name().into()));
        }
        let experiment = match user.get("experiment") {
            None => Experiment::So2C4,
            Some(toml::Value::String(s)) => s.parse()?,
            Some(other) => return Err(Error::Config(format!("experiment must be a string, got {other}"))),
        };
        let base = toml::Table::try_from(RunConfig::preset(experiment)).expect("config serializes");
        let merged = merge(base, user);
        let cfg: RunConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.train_size == 0 {
            return Err(Error::Config("dataset.train_size must be positive".into()));
        }
        if self.sample.count > self.dataset.test_size {
            return Err(Error::Config(format!(
                "sample.count {} exceeds dataset.test_size {}",
                self.sample.count, self.dataset.test_size
            )));
        }
        if self.train.checkpoint_every == 0 {
            return Err(Error::Config("train.checkpoint_every must be positive".into()));
        }
        if !(self.eval.jitter >= 0.0) || !(self.eval.cluster_radius > 0.0) || self.eval.histogram_bins == 0 {
            return Err(Error::Config("eval needs jitter ≥ 0, cluster_radius > 0 and at least one bin".into()));
        }
        self.arch(1).validate()?;
        self.train_config().validate()?;
        self.sampler().validate()?;
        self.scalar_flow().validate()?;
        self.dataset_spec(0, 0).validate()
    }

    pub fn arch(&self, n_points: usize) -> NetArch {
        let spec = self.experiment.hypothesis();
        NetArch {
            group: spec.kind,
            point_dim: self.experiment.point_dim(),
            n_points,
            hidden: self.net.hidden.clone(),
            embedding: match self.net.embedding {
                EmbeddingMode::Concat => TimeEmbedding::CONCAT,
                EmbeddingMode::Sinusoidal => TimeEmbedding::sinusoidal(self.net.embedding_dim, self.net.max_frequency),
            },
        }
    }

    pub fn group_kind(&self) -> GroupKind {
        self.experiment.hypothesis().kind
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            schedule: self.train.schedule,
            seed: crate::rng::derive_seed(self.seed, "train"),
        }
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            steps: self.sample.steps,
        }
    }

    pub fn dataset_spec(&self, sample_count: usize, seed: u64) -> crate::datasets::DatasetSpec {
        crate::datasets::DatasetSpec {
            object: self.experiment.object(),
            target: self.experiment.target(),
            sample_count,
            seed,
            angle_sigma: self.dataset.angle_sigma,
        }
    }

    pub fn scalar_flow(&self) -> ScalarFlowConfig {
        let s = &self.scalar;
        ScalarFlowConfig {
            hidden: s.hidden.clone(),
            harmonics: s.harmonics,
            epochs: s.epochs,
            batches_per_epoch: s.batches_per_epoch,
            batch_size: s.batch_size,
            learning_rate: s.learning_rate,
            schedule: s.schedule,
            seed: crate::rng::derive_seed(self.seed, "scalar"),
        }
    }

    pub fn posterior(&self) -> PosteriorConfig {
        PosteriorConfig {
            steps: self.scalar.steps,
            sigma: self.scalar.sigma,
            samples: self.scalar.samples,
            table_size: self.scalar.table_size,
            seed: crate::rng::derive_seed(self.seed, "posterior"),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::preset(Experiment::So2C4)
    }
}

/// Overlays `top` onto `base`, recursing into tables.
fn merge(mut base: toml::Table, top: toml::Table) -> toml::Table {
    for (k, v) in top {
        match (base.remove(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => {
                base.insert(k, toml::Value::Table(merge(b, t)));
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
    base
}
