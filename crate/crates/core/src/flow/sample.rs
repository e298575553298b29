use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::PointCloud;
use crate::error::{Error, Result};
use crate::liegroup::{mat_exp, sample_prior, AlgebraElement, GroupElement, GroupSpec};
use crate::net::VelocityNetwork;
use crate::rng::substream;

/// Trajectories are integrated in lockstep groups of this size; the grouping
/// is fixed so results do not depend on the thread count.
const LOCKSTEP_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Euler steps T on the grid t = k/T.
    pub steps: usize,
}

impl SamplerConfig {
    /// 20 steps for planar groups, 100 for SO(3).
    pub fn default_for(spec: GroupSpec) -> Self {
        SamplerConfig {
            steps: if spec.matrix_dim == 3 { 100 } else { 20 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("sampler needs at least one step".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.steps as f64
    }
}

/// A full sampling run for one cloud.
#[derive(Clone, Debug)]
pub struct Trajectory {
    /// k/T for k = 0..=T.
    pub times: Vec<f64>,
    /// x_{k/T}; the first is x₀ = g·x₁, the last is the generated x₁′.
    pub clouds: Vec<PointCloud>,
    /// Network output at each of the T steps.
    pub algebra_outputs: Vec<AlgebraElement>,
    /// Accumulated transform after each step (identity first).
    pub products: Vec<GroupElement>,
    /// M, the product of all step exponentials.
    pub accumulated: GroupElement,
    /// g, the prior draw.
    pub initial_transform: GroupElement,
}

impl Trajectory {
    /// h = M·g.
    pub fn group_element(&self) -> GroupElement {
        self.accumulated.compose(&self.initial_transform)
    }

    pub fn final_cloud(&self) -> &PointCloud {
        self.clouds.last().expect("trajectory has x₀")
    }
}

/// Endpoint of a sampling run without the intermediate states.
#[derive(Clone, Debug)]
pub struct Generated {
    pub g: GroupElement,
    pub m: GroupElement,
    /// h = M·g.
    pub h: GroupElement,
    pub final_cloud: PointCloud,
}

struct State {
    x: PointCloud,
    m: GroupElement,
    record: Option<Trajectory>,
}

fn integrate_chunk(
    net: &VelocityNetwork,
    x1s: &[PointCloud],
    gs: &[GroupElement],
    cfg: SamplerConfig,
    first_index: usize,
    record: bool,
) -> Result<Vec<State>> {
    let spec = net.spec();
    let dt = cfg.dt();
    let mut states: Vec<State> = x1s
        .iter()
        .zip(gs)
        .map(|(x1, g)| {
            let x0 = x1.transform(g);
            let m = GroupElement::identity(spec);
            State {
                record: record.then(|| Trajectory {
                    times: vec![0.0],
                    clouds: vec![x0.clone()],
                    algebra_outputs: Vec::with_capacity(cfg.steps),
                    products: vec![m],
                    accumulated: m,
                    initial_transform: *g,
                }),
                x: x0,
                m,
            }
        })
        .collect();
    let feat = net.arch().cloud_len();
    let mut inputs = Array2::zeros((states.len(), feat));
    for k in 0..cfg.steps {
        let t = k as f64 * dt;
        for (r, s) in states.iter().enumerate() {
            net.cloud_features(&s.x, inputs.row_mut(r).as_slice_mut().unwrap())?;
        }
        let times = vec![t; states.len()];
        let out = net.forward_batch(inputs.view(), &times);
        for (r, s) in states.iter_mut().enumerate() {
            let coeffs = out.row(r);
            let fail = Error::Generation {
                trajectory: first_index + r,
                step: k,
            };
            if coeffs.iter().any(|c| !c.is_finite()) {
                return Err(fail);
            }
            let a = AlgebraElement::from_coeffs(spec, coeffs.as_slice().unwrap())?;
            let e = mat_exp(&a.scale(dt)).map_err(|_| fail)?;
            s.x = s.x.transform(&e);
            s.m = e.compose(&s.m);
            if let Some(tr) = &mut s.record {
                tr.times.push((k + 1) as f64 * dt);
                tr.clouds.push(s.x.clone());
                tr.algebra_outputs.push(a);
                tr.products.push(s.m);
            }
        }
    }
    Ok(states)
}

fn integrate(
    net: &VelocityNetwork,
    x1s: &[PointCloud],
    gs: &[GroupElement],
    cfg: SamplerConfig,
    record: bool,
) -> Result<Vec<State>> {
    cfg.validate()?;
    let chunks: Vec<Result<Vec<State>>> = x1s
        .par_chunks(LOCKSTEP_CHUNK)
        .zip(gs.par_chunks(LOCKSTEP_CHUNK))
        .enumerate()
        .map(|(c, (xs, g))| integrate_chunk(net, xs, g, cfg, c * LOCKSTEP_CHUNK, record))
        .collect();
    let mut out = Vec::with_capacity(x1s.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

fn prior_draws(spec: GroupSpec, n: usize, seed: u64) -> Vec<GroupElement> {
    (0..n)
        .map(|i| sample_prior(spec, &mut substream(seed, i as u64)))
        .collect()
}

/// Runs one trajectory per input cloud; trajectory `i` draws its prior
/// element from stream `i` of `seed`.
pub fn sample_trajectories(
    net: &VelocityNetwork,
    x1s: &[PointCloud],
    cfg: SamplerConfig,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    let gs = prior_draws(net.spec(), x1s.len(), seed);
    Ok(integrate(net, x1s, &gs, cfg, true)?
        .into_iter()
        .map(|s| {
            let mut tr = s.record.unwrap();
            tr.accumulated = s.m;
            tr
        })
        .collect())
}

/// Like [`sample_trajectories`] but keeps only the endpoints.
pub fn generate_elements(
    net: &VelocityNetwork,
    x1s: &[PointCloud],
    cfg: SamplerConfig,
    seed: u64,
) -> Result<Vec<Generated>> {
    let gs = prior_draws(net.spec(), x1s.len(), seed);
    generate_from(net, x1s, &gs, cfg)
}

/// Endpoints for caller-supplied initial transforms.
pub fn generate_from(
    net: &VelocityNetwork,
    x1s: &[PointCloud],
    gs: &[GroupElement],
    cfg: SamplerConfig,
) -> Result<Vec<Generated>> {
    if x1s.len() != gs.len() {
        return Err(Error::contract("one initial transform per cloud"));
    }
    Ok(integrate(net, x1s, gs, cfg, false)?
        .into_iter()
        .zip(gs)
        .map(|(s, g)| Generated {
            h: s.m.compose(g),
            g: *g,
            m: s.m,
            final_cloud: s.x,
        })
        .collect())
}

/// One trajectory with g drawn from `rng`.
pub fn sample_data<R: rand::Rng + ?Sized>(
    net: &VelocityNetwork,
    x1: &PointCloud,
    cfg: SamplerConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    let g = sample_prior(net.spec(), rng);
    let s = integrate(net, std::slice::from_ref(x1), &[g], cfg, true)?.pop().unwrap();
    let mut tr = s.record.unwrap();
    tr.accumulated = s.m;
    Ok(tr)
}

/// h = M·g from one sampling run.
pub fn sample_group_element<R: rand::Rng + ?Sized>(
    net: &VelocityNetwork,
    x1: &PointCloud,
    cfg: SamplerConfig,
    rng: &mut R,
) -> Result<GroupElement> {
    Ok(sample_data(net, x1, cfg, rng)?.group_element())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegroup::GroupKind;
    use crate::net::{Mlp, NetArch, TimeEmbedding};
    use rand::Rng as _;

    fn arch(group: GroupKind, n: usize) -> NetArch {
        let spec = GroupSpec::new(group);
        NetArch {
            group,
            point_dim: spec.matrix_dim,
            n_points: n,
            hidden: vec![8, 8, 8],
            embedding: TimeEmbedding::CONCAT,
        }
    }

    /// Network whose output ignores the input: only the final bias is set.
    fn constant_net(group: GroupKind, coeffs: &[f64]) -> VelocityNetwork {
        let a = arch(group, 3);
        let sizes = a.layer_sizes();
        let mut rng = substream(0, 0);
        let mut params = Mlp::new(&sizes, &mut rng).params().to_vec();
        let n = params.len();
        params[n - coeffs.len()..].copy_from_slice(coeffs);
        VelocityNetwork::from_parts(a, params).unwrap()
    }

    fn random_net(group: GroupKind, seed: u64) -> VelocityNetwork {
        let mut rng = substream(seed, 0);
        let mut net = VelocityNetwork::new(arch(group, 3), &mut rng).unwrap();
        for p in net.params_mut() {
            *p += rng.gen_range(-0.3..0.3);
        }
        net
    }

    fn cloud(dim: usize) -> PointCloud {
        PointCloud::new(dim, (0..3 * dim).map(|k| (k as f64 * 0.9).cos()).collect()).unwrap()
    }

    #[test]
    fn zero_field_is_stationary() {
        let net = constant_net(GroupKind::SO3, &[0.0; 3]);
        let mut rng = substream(1, 0);
        let x1 = cloud(3);
        let tr = sample_data(&net, &x1, SamplerConfig { steps: 10 }, &mut rng).unwrap();
        assert_eq!(tr.final_cloud(), &tr.clouds[0]);
        assert_eq!(tr.accumulated, GroupElement::identity(GroupSpec::SO3));
        assert_eq!(tr.group_element(), tr.initial_transform);
    }

    #[test]
    fn constant_field_is_step_invariant() {
        let net = constant_net(GroupKind::GL2RPlus, &[0.3, -0.2, 0.5, 0.1]);
        let x1 = cloud(2);
        let g = sample_prior(GroupSpec::GL2R_PLUS, &mut substream(2, 0));
        let one = generate_from(&net, std::slice::from_ref(&x1), &[g], SamplerConfig { steps: 1 }).unwrap();
        let two = generate_from(&net, &[x1], &[g], SamplerConfig { steps: 2 }).unwrap();
        assert!(one[0].final_cloud.distance(&two[0].final_cloud) < 1e-12);
    }

    #[test]
    fn trajectory_invariants_hold_for_arbitrary_networks() {
        for group in GroupKind::ALL {
            let net = random_net(group, 3);
            let spec = GroupSpec::new(group);
            let x1s = vec![cloud(spec.matrix_dim); 5];
            let cfg = SamplerConfig { steps: 25 };
            for tr in sample_trajectories(&net, &x1s, cfg, 4).unwrap() {
                assert_eq!(tr.clouds.len(), 26);
                for k in 0..cfg.steps {
                    let e = mat_exp(&tr.algebra_outputs[k].scale(cfg.dt())).unwrap();
                    assert!(tr.clouds[k].transform(&e).distance(&tr.clouds[k + 1]) < 1e-10);
                }
                let end = tr.clouds[0].transform(&tr.accumulated);
                assert!(end.distance(tr.final_cloud()) < 1e-8, "{group}");
                if spec.is_rotation_group() {
                    for m in &tr.products {
                        let r = m.real();
                        let drift = (r.transpose() * *r - crate::liegroup::Mat::identity(spec.matrix_dim)).frobenius();
                        assert!(drift <= 1e-8 * cfg.steps as f64);
                    }
                }
            }
        }
    }

    #[test]
    fn batched_and_single_runs_agree() {
        let net = random_net(GroupKind::SO2, 5);
        let x1s: Vec<PointCloud> = (0..300).map(|_| cloud(2)).collect();
        let cfg = SamplerConfig { steps: 20 };
        let batch = generate_elements(&net, &x1s, cfg, 6).unwrap();
        let single = sample_group_element(&net, &x1s[299], cfg, &mut substream(6, 299)).unwrap();
        assert!(batch[299].h.distance(&single) < 1e-12);
        let again = generate_elements(&net, &x1s, cfg, 6).unwrap();
        assert!(batch.iter().zip(&again).all(|(a, b)| a.h == b.h));
    }

    #[test]
    fn non_finite_output_names_the_step() {
        let net = constant_net(GroupKind::SO2, &[f64::NAN]);
        let err = generate_elements(&net, &[cloud(2), cloud(2)], SamplerConfig { steps: 3 }, 0).unwrap_err();
        assert!(matches!(err, Error::Generation { trajectory: 0, step: 0 }));
    }
}
