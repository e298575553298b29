//! Reproducible runs: a run directory holds the config snapshot and every
//! artifact of the gen → train → sample → eval → analyze pipeline.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng as _;
use rand_distr::{Distribution, Normal};

pub use config::{
    DatasetSection, EvalSection, Experiment, NetSection, RunConfig, SampleSection, ScalarSection, TrainSection,
};

use crate::analysis::plots::{
    centroid_table, entropy_csv, euler_mollweide_table, histogram_svg, line_svg, posterior_heat_csv,
    scalar_trajectory_csv, scatter_svg, velocity_grid_csv,
};
use crate::analysis::scalar::{
    c4_modes, compute_posterior, load_scalar_model, save_scalar_model, scalar_flow_train, velocity_grid,
};
use crate::analysis::{
    axis_angle_to_z, canonicalize_with, fraction_near_multiples, mode_count, mode_histogram, planar_angle,
    radius_clusters, w1_1d, w1_circle, wasserstein1, z_angle, EvalReport, Histogram,
};
use crate::datasets::{generate_dataset, load_dataset, save_dataset, Dataset, PointCloud, Target};
use crate::error::{Error, Result};
use crate::flow::{generate_elements, sample_trajectories, train, Prior, TrainData};
use crate::kv::KvText;
use crate::liegroup::{discrete_group, GroupElement, GroupSpec};
use crate::net::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::rng::derive_seed;

/// Tolerance for "near a multiple of π/2" and "axis near z".
pub const ANGLE_TOL: f64 = 0.1;
/// Clusters smaller than this share of the samples are not counted as modes.
pub const MODE_MIN_SHARE: f64 = 0.02;

pub const CONFIG_FILE: &str = "config.toml";
pub const TRAIN_DATA: &str = "train.dataset";
pub const TEST_DATA: &str = "test.dataset";
pub const MANIFEST: &str = "manifest.txt";
pub const LOSS_CSV: &str = "loss.csv";
pub const CHECKPOINT: &str = "model.ckpt";
pub const GENERATED_CSV: &str = "generated.csv";
pub const TRAJECTORIES_CSV: &str = "trajectories.csv";
pub const EVAL_REPORT: &str = "eval_report.txt";
pub const SCALAR_MODEL: &str = "scalar.model";
pub const SCALAR_LOSS_CSV: &str = "scalar_loss.csv";
pub const PLOTS_DIR: &str = "plots";

/// Where a run lives. Relative `output_dir`s resolve against `root`.
pub fn run_dir(cfg: &RunConfig, root: &Path) -> PathBuf {
    if cfg.output_dir.is_absolute() {
        cfg.output_dir.clone()
    } else {
        root.join(&cfg.output_dir)
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn require(dir: &Path, names: &[&str]) -> Result<()> {
    let missing: Vec<PathBuf> = names.iter().map(|n| dir.join(n)).filter(|p| !p.exists()).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingInputs(missing))
    }
}

/// Writes the full config snapshot.
pub fn write_snapshot(cfg: &RunConfig, dir: &Path) -> Result<()> {
    write(&dir.join(CONFIG_FILE), cfg.to_toml())
}

/// Train and test datasets plus a manifest; regenerating with the same
/// config gives byte-identical files.
pub fn cmd_gen(cfg: &RunConfig, dir: &Path) -> Result<()> {
    write_snapshot(cfg, dir)?;
    let train = generate_dataset(&cfg.dataset_spec(cfg.dataset.train_size, derive_seed(cfg.seed, "train-data")))?;
    let test = generate_dataset(&cfg.dataset_spec(cfg.dataset.test_size, derive_seed(cfg.seed, "test-data")))?;
    save_dataset(&train, &dir.join(TRAIN_DATA))?;
    save_dataset(&test, &dir.join(TEST_DATA))?;

    let mut kv = KvText::new();
    kv.push("experiment", cfg.experiment)
        .push("object", cfg.experiment.object().name())
        .push("target", cfg.experiment.target())
        .push("hypothesis", cfg.experiment.hypothesis())
        .push("train_size", train.len())
        .push("test_size", test.len())
        .push("train_seed", train.spec.seed)
        .push("test_seed", test.spec.seed);
    if let Target::Group(name) = cfg.experiment.target() {
        let table = discrete_group(name);
        kv.push("table_size", table.elements.len());
        for (i, e) in table.elements.iter().enumerate() {
            let flat: Vec<String> = e.flatten().iter().map(|x| format!("{x:?}")).collect();
            kv.push(&format!("table.{i}"), flat.join(","));
        }
    }
    write(&dir.join(MANIFEST), kv.render())
}

fn loss_csv(losses: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in losses.iter().enumerate() {
        let _ = writeln!(s, "{},{l:?}", i + 1);
    }
    s
}

/// Reads `loss.csv` back.
pub fn read_losses(path: &Path) -> Result<Vec<f64>> {
    let text = read(path)?;
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .nth(1)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse("loss csv", format!("bad row {l:?}")))
        })
        .collect()
}

/// Trains on the whole training set. With `resume`, continues from the
/// checkpoint on disk; the epoch streams make the continuation identical to
/// an uninterrupted run. A divergence returns the error and leaves the last
/// saved checkpoint and its losses in place.
pub fn cmd_train(cfg: &RunConfig, dir: &Path, resume: bool) -> Result<Vec<f64>> {
    require(dir, &[TRAIN_DATA])?;
    write_snapshot(cfg, dir)?;
    let ds = load_dataset(&dir.join(TRAIN_DATA))?;
    if ds.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let spec = cfg.experiment.hypothesis();
    let arch = cfg.arch(ds.samples[0].len());
    let ck_path = dir.join(CHECKPOINT);
    let loss_path = dir.join(LOSS_CSV);
    let (start, mut losses) = if resume {
        require(dir, &[CHECKPOINT, LOSS_CSV])?;
        let ck = load_checkpoint(&ck_path)?;
        let mut losses = read_losses(&loss_path)?;
        losses.truncate(ck.epoch);
        (Some(ck), losses)
    } else {
        (None, Vec::new())
    };
    let data = TrainData {
        clouds: ds.samples,
        spec,
        prior: Prior::Standard,
    };
    let tc = cfg.train_config();
    let every = cfg.train.checkpoint_every;
    train(&data, arch, &tc, start, |epoch, loss, ck: &Checkpoint| {
        losses.push(loss);
        if epoch % every == 0 || epoch == tc.epochs {
            save_checkpoint(ck, &ck_path)?;
            write(&loss_path, loss_csv(&losses))?;
        }
        Ok(())
    })?;
    Ok(losses)
}

fn flat_header(prefix: &str, n: usize) -> String {
    (0..n).map(|i| format!(",{prefix}{i}")).collect()
}

fn flat_row(xs: &[f64]) -> String {
    xs.iter().map(|x| format!(",{x:?}")).collect()
}

/// Samples one element per test cloud (the first `sample.count` of them)
/// and dumps the first `sample.trajectories` full trajectories.
pub fn cmd_sample(cfg: &RunConfig, dir: &Path) -> Result<()> {
    require(dir, &[CHECKPOINT, TEST_DATA])?;
    write_snapshot(cfg, dir)?;
    let ck = load_checkpoint(&dir.join(CHECKPOINT))?;
    let test = load_dataset(&dir.join(TEST_DATA))?;
    let n = cfg.sample.count.min(test.len());
    let x1s = &test.samples[..n];
    if let Some(x) = x1s.first() {
        ck.ensure_compatible(cfg.experiment.hypothesis(), x.dim(), x.len())?;
    }
    let seed = derive_seed(cfg.seed, "sample");
    let generated = generate_elements(&ck.net, x1s, cfg.sampler(), seed)?;
    let width = cfg.experiment.hypothesis().flat_len();
    let mut csv = format!(
        "index{}{}{}\n",
        flat_header("g", width),
        flat_header("m", width),
        flat_header("h", width)
    );
    for (i, g) in generated.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{i}{}{}{}",
            flat_row(&g.g.flatten()),
            flat_row(&g.m.flatten()),
            flat_row(&g.h.flatten())
        );
    }
    write(&dir.join(GENERATED_CSV), csv)?;

    let k = cfg.sample.trajectories.min(n);
    let trajs = sample_trajectories(&ck.net, &x1s[..k], cfg.sampler(), seed)?;
    let (dim, points) = x1s.first().map(|x| (x.dim(), x.len())).unwrap_or((cfg.experiment.point_dim(), 0));
    let mut csv = format!(
        "trajectory,step,t,dim,points{}{}\n",
        flat_header("re", dim * points),
        flat_header("im", dim * points)
    );
    for (i, tr) in trajs.iter().enumerate() {
        for (s, (t, x)) in tr.times.iter().zip(&tr.clouds).enumerate() {
            let zeros = vec![0.0; x.coords().len()];
            let im = x.imag().unwrap_or(&zeros);
            let _ = writeln!(csv, "{i},{s},{t:?},{dim},{points}{}{}", flat_row(x.coords()), flat_row(im));
        }
    }
    write(&dir.join(TRAJECTORIES_CSV), csv)
}

fn parse_row(line: &str) -> Result<Vec<f64>> {
    line.split(',')
        .map(|v| v.parse::<f64>().map_err(|_| Error::parse("csv", format!("bad number {v:?}"))))
        .collect()
}

/// Reads `generated.csv`: the prior draws g and the generated h = M·g.
pub fn read_generated(path: &Path, spec: GroupSpec) -> Result<Vec<(GroupElement, GroupElement)>> {
    let text = read(path)?;
    let w = spec.flat_len();
    let mut out = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let row = parse_row(line)?;
        if row.len() != 1 + 3 * w {
            return Err(Error::parse("generated csv", format!("expected {} columns", 1 + 3 * w)));
        }
        let g = GroupElement::from_flat(spec, &row[1..1 + w])?;
        let h = GroupElement::from_flat(spec, &row[1 + 2 * w..])?;
        out.push((g, h));
    }
    Ok(out)
}

/// Reads `trajectories.csv` back into (times, clouds per trajectory).
pub fn read_trajectories(path: &Path, complex: bool) -> Result<(Vec<f64>, Vec<Vec<PointCloud>>)> {
    let text = read(path)?;
    let mut times = Vec::new();
    let mut trajs: Vec<Vec<PointCloud>> = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let row = parse_row(line)?;
        let (i, s, t, dim, points) = (row[0] as usize, row[1] as usize, row[2], row[3] as usize, row[4] as usize);
        let n = dim * points;
        if row.len() != 5 + 2 * n {
            return Err(Error::parse("trajectory csv", "row length does not match its shape"));
        }
        let re = row[5..5 + n].to_vec();
        let cloud = if complex {
            PointCloud::new_complex(dim, re, row[5 + n..].to_vec())?
        } else {
            PointCloud::new(dim, re)?
        };
        if i == 0 {
            times.push(t);
        }
        if trajs.len() == i {
            trajs.push(Vec::new());
        }
        if trajs.len() != i + 1 || trajs[i].len() != s {
            return Err(Error::parse("trajectory csv", "rows out of order"));
        }
        trajs[i].push(cloud);
    }
    Ok((times, trajs))
}

/// Canonicalized generated elements of a run, in the hypothesis group,
/// with the test set they were generated from.
pub fn canonical_elements(cfg: &RunConfig, dir: &Path) -> Result<(Vec<GroupElement>, Dataset)> {
    require(dir, &[GENERATED_CSV, TEST_DATA])?;
    let spec = cfg.experiment.hypothesis();
    let generated = read_generated(&dir.join(GENERATED_CSV), spec)?;
    let test = load_dataset(&dir.join(TEST_DATA))?;
    if generated.len() > test.len() {
        return Err(Error::contract("more generated elements than test clouds"));
    }
    let canon = generated
        .iter()
        .zip(&test.ground_truth)
        .map(|((_, h), gt)| Ok(canonicalize_with(cfg.eval.canonicalization, h, &gt.embed(spec)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((canon, test))
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Canonicalizes the generated elements, compares them with the test
/// ground truth (embedded in the hypothesis group) and writes the report
/// and an angle histogram.
pub fn cmd_eval(cfg: &RunConfig, dir: &Path) -> Result<EvalReport> {
    let (canon, test) = canonical_elements(cfg, dir)?;
    let spec = cfg.experiment.hypothesis();
    let n = canon.len();
    if n == 0 {
        return Err(Error::contract("nothing to evaluate: the run generated no elements"));
    }
    let truth = test.ground_truth[..n]
        .iter()
        .map(|g| g.embed(spec))
        .collect::<Result<Vec<_>>>()?;
    let w = wasserstein1(&canon, &truth, derive_seed(cfg.seed, "eval/w1"))?;

    let mut metrics = Vec::new();
    let identity = GroupElement::identity(spec);
    metrics.push((
        "median_identity_distance".to_string(),
        median(canon.iter().map(|c| c.distance(&identity)).collect()),
    ));

    let hist = if spec.is_complex() {
        None
    } else if spec.matrix_dim == 2 {
        let angles = canon.iter().map(planar_angle).collect::<Result<Vec<_>>>()?;
        let truth_angles = truth.iter().map(planar_angle).collect::<Result<Vec<_>>>()?;
        metrics.push((
            "quarter_turn_fraction".into(),
            fraction_near_multiples(&angles, std::f64::consts::FRAC_PI_2, ANGLE_TOL),
        ));
        metrics.push(("angle_w1".into(), w1_circle(&angles, &truth_angles)?));
        Some(Histogram::of_angles(&angles, cfg.eval.histogram_bins)?)
    } else {
        let reals: Vec<_> = canon.iter().map(|c| *c.real()).collect();
        let aligned = reals.iter().filter(|r| axis_angle_to_z(r, ANGLE_TOL) <= ANGLE_TOL).count();
        metrics.push(("axis_z_fraction".into(), aligned as f64 / n as f64));
        let zs: Vec<f64> = reals.iter().map(z_angle).collect();
        if cfg.experiment.target() == Target::GaussianSO2 {
            let normal = Normal::new(0.0, cfg.dataset.angle_sigma).map_err(|e| Error::Config(e.to_string()))?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "eval/gaussian"));
            let reference: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            metrics.push(("z_angle_w1".into(), w1_1d(&zs, &reference)?));
        }
        Some(Histogram::of_angles(&zs, cfg.eval.histogram_bins)?)
    };

    let clusters = radius_clusters(&canon, cfg.eval.cluster_radius);
    let (modes, coverage) = mode_count(&clusters, n, MODE_MIN_SHARE);
    metrics.push(("modes".into(), modes as f64));
    metrics.push(("mode_coverage".into(), coverage));

    let mode_hist = match cfg.experiment.target() {
        Target::Group(name) => {
            let table = discrete_group(name);
            if table.elements.is_empty() {
                Vec::new()
            } else {
                mode_histogram(&canon, &table.embedded_in(spec)?)
            }
        }
        Target::GaussianSO2 => Vec::new(),
    };

    let report = EvalReport {
        experiment: cfg.experiment.to_string(),
        w1: w.value,
        w1_block_size: w.block_size,
        w1_blocks: w.blocks,
        w1_block_variance: w.block_variance,
        sample_count: n,
        mode_histogram: mode_hist,
        canonicalization: cfg.eval.canonicalization,
        metrics,
    };
    write(&dir.join(EVAL_REPORT), report.to_text())?;
    if let Some(h) = hist {
        write(&dir.join(PLOTS_DIR).join("angle_histogram.csv"), h.to_csv())?;
    }
    Ok(report)
}

/// What [`emit_plot_data`] wrote, relative to the run directory.
pub type Emitted = Vec<PathBuf>;

/// Writes plot tables for whatever the run holds: the scalar diagnostic if
/// a scalar model is present, otherwise the sampled trajectories and
/// generated elements. `svg` adds a rendering of each table.
pub fn emit_plot_data(cfg: &RunConfig, dir: &Path, svg: bool) -> Result<Emitted> {
    if dir.join(SCALAR_MODEL).exists() {
        return emit_scalar(cfg, dir, svg);
    }
    require(dir, &[GENERATED_CSV, TRAJECTORIES_CSV, TEST_DATA])?;
    let spec = cfg.experiment.hypothesis();
    let plots = dir.join(PLOTS_DIR);
    let mut out = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        write(&plots.join(name), body)?;
        out.push(PathBuf::from(PLOTS_DIR).join(name));
        Ok(())
    };

    let (times, trajs) = read_trajectories(&dir.join(TRAJECTORIES_CSV), spec.is_complex())?;
    if !trajs.is_empty() {
        let table = centroid_table(&times, &trajs)?;
        if svg {
            put("centroid_pca.svg", centroid_svg(&table))?;
        }
        put("centroid_pca.csv", table)?;
    }

    let (canon, _) = canonical_elements(cfg, dir)?;
    if spec.matrix_dim == 3 {
        let table = euler_mollweide_table(&canon, cfg.eval.jitter, derive_seed(cfg.seed, "plots/jitter"))?;
        if svg {
            put("euler_mollweide.svg", mollweide_svg(&table))?;
        }
        put("euler_mollweide.csv", table)?;
        let zs: Vec<f64> = canon.iter().map(|c| z_angle(c.real())).collect();
        let h = Histogram::of_angles(&zs, cfg.eval.histogram_bins)?;
        if svg {
            put("angle_histogram.svg", histogram_svg("z-angle", &h))?;
        }
        put("angle_histogram.csv", h.to_csv())?;
    } else if !spec.is_complex() {
        let angles = canon.iter().map(planar_angle).collect::<Result<Vec<_>>>()?;
        let h = Histogram::of_angles(&angles, cfg.eval.histogram_bins)?;
        if svg {
            put("angle_histogram.svg", histogram_svg("rotation angle", &h))?;
        }
        put("angle_histogram.csv", h.to_csv())?;
    }
    Ok(out)
}

fn csv_columns(table: &str, cols: &[&str]) -> Vec<Vec<f64>> {
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let idx: Vec<usize> = cols
        .iter()
        .map(|c| header.iter().position(|h| h == c).expect("known column"))
        .collect();
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            idx.iter().map(|&i| f[i].parse().unwrap_or(f64::NAN)).collect()
        })
        .collect()
}

fn centroid_svg(table: &str) -> String {
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in csv_columns(table, &["trajectory", "pc1", "pc2"]) {
        let i = r[0] as usize;
        if series.len() == i {
            series.push((format!("{i}"), Vec::new()));
        }
        series[i].1.push((r[1], r[2]));
    }
    line_svg("centroid trajectories (PCA)", &series)
}

fn mollweide_svg(table: &str) -> String {
    let pts: Vec<(f64, f64, usize)> = csv_columns(table, &["jitter_x", "jitter_y"])
        .into_iter()
        .map(|r| (r[0], r[1], 0))
        .collect();
    scatter_svg("Mollweide (yaw, pitch)", &pts)
}

fn emit_scalar(cfg: &RunConfig, dir: &Path, svg: bool) -> Result<Emitted> {
    let model = load_scalar_model(&dir.join(SCALAR_MODEL))?;
    let grid = compute_posterior(&model, &cfg.posterior())?;
    let plots = dir.join(PLOTS_DIR);
    let mut out = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        write(&plots.join(name), body)?;
        out.push(PathBuf::from(PLOTS_DIR).join(name));
        Ok(())
    };
    let entropy = entropy_csv(&grid);
    let heat = posterior_heat_csv(&grid);
    let vgrid = velocity_grid_csv(&velocity_grid(&model, cfg.scalar.grid_points, &grid.times));
    let trajs = scalar_trajectory_csv(&grid, cfg.sample.trajectories);
    if svg {
        let series = vec![(
            "entropy / ln K".to_string(),
            csv_columns(&entropy, &["t", "entropy_over_ln_k"]).into_iter().map(|r| (r[0], r[1])).collect(),
        )];
        put("entropy.svg", line_svg("posterior entropy", &series))?;
        let pts: Vec<(f64, f64, usize)> = csv_columns(&vgrid, &["t", "x", "v"])
            .into_iter()
            .map(|r| (r[0], r[1], usize::from(r[2] > 0.0)))
            .collect();
        put("velocity_grid.svg", scatter_svg("velocity sign over (t, x)", &pts))?;
    }
    put("entropy.csv", entropy)?;
    put("posterior_heat.csv", heat)?;
    put("velocity_grid.csv", vgrid)?;
    put("scalar_trajectories.csv", trajs)?;
    let mut kv = KvText::new();
    kv.push_f64("nearest_mode_agreement", grid.nearest_mode_agreement())
        .push("flagged_rows", grid.flagged.iter().sum::<usize>());
    put("posterior_summary.txt", kv.render())?;
    Ok(out)
}

/// Trains the scalar circle flow onto the C4 angles, saves it, and emits
/// its posterior tables.
pub fn cmd_scalar_demo(cfg: &RunConfig, dir: &Path, svg: bool) -> Result<Emitted> {
    write_snapshot(cfg, dir)?;
    let (model, losses) = scalar_flow_train(&c4_modes(), &cfg.scalar_flow())?;
    save_scalar_model(&model, &dir.join(SCALAR_MODEL))?;
    write(&dir.join(SCALAR_LOSS_CSV), loss_csv(&losses))?;
    emit_plot_data(cfg, dir, svg)
}
