use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use lieflow::analysis::{assignment_w1, euclidean};
use lieflow::liegroup::{mat_exp, mat_log, sample_prior};
use lieflow::net::{loss_and_grad, default_hidden, Batch, NetArch, TimeEmbedding, VelocityNetwork};
use lieflow::rng::substream;
use lieflow::{GroupKind, GroupSpec};
use ndarray::Array2;
use rand::Rng;

fn exp_log(c: &mut Criterion) {
    for kind in GroupKind::ALL {
        let spec = GroupSpec::new(kind);
        let mut rng = substream(1, 0);
        let gs: Vec<_> = (0..64).map(|_| sample_prior(spec, &mut rng)).collect();
        let logs: Vec<_> = gs.iter().filter_map(|g| mat_log(g).ok()).collect();
        c.bench_function(&format!("log/{kind}"), |b| {
            b.iter(|| gs.iter().filter(|g| mat_log(black_box(g)).is_ok()).count())
        });
        c.bench_function(&format!("exp/{kind}"), |b| {
            b.iter(|| logs.iter().filter(|a| mat_exp(black_box(a)).is_ok()).count())
        });
    }
}

fn network(c: &mut Criterion) {
    let spec = GroupSpec::SO3;
    let arch = NetArch {
        group: spec.kind,
        point_dim: 3,
        n_points: 4,
        hidden: default_hidden(spec),
        embedding: TimeEmbedding::sinusoidal(16, 100.0),
    };
    let net = VelocityNetwork::new(arch.clone(), &mut substream(2, 0)).unwrap();
    let mut rng = substream(3, 0);
    let b = 256;
    let inputs = Array2::from_shape_fn((b, arch.cloud_len()), |_| rng.gen_range(-1.0..1.0));
    let times: Vec<f64> = (0..b).map(|_| rng.gen_range(0.0..1.0)).collect();
    let targets = Array2::from_shape_fn((b, arch.output_dim()), |_| rng.gen_range(-1.0..1.0));
    c.bench_function("net/forward_256", |bch| {
        bch.iter(|| net.forward_batch(black_box(inputs.view()), black_box(&times)))
    });
    c.bench_function("net/loss_and_grad_256", |bch| {
        bch.iter_batched(
            || Batch {
                inputs: inputs.clone(),
                times: times.clone(),
                targets: targets.clone(),
                index: 0,
            },
            |batch| loss_and_grad(&net, &batch).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn assignment(c: &mut Criterion) {
    let mut rng = substream(4, 0);
    let n = 2048;
    let a: Vec<Vec<f64>> = (0..n).map(|_| (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let b: Vec<Vec<f64>> = (0..n).map(|_| (0..9).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut group = c.benchmark_group("w1");
    group.sample_size(10);
    group.bench_function("lap_2048", |bch| bch.iter(|| assignment_w1(black_box(&a), black_box(&b), euclidean)));
    group.finish();
}

criterion_group!(benches, exp_log, network, assignment);
criterion_main!(benches);
