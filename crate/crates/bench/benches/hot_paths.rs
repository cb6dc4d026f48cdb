use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use emfplan_core::baselines::brute_force;
use emfplan_core::dqn::{QNetwork, QNetworkSpec};
use emfplan_core::env::DeploymentState;
use emfplan_core::gan::{GeneratorSpec, ModelKind, TrainedSurrogate};
use emfplan_core::oracle::compute_maps;
use emfplan_core::{
    OraclePredictor, Predictor, PropagationParams, SceneGenerator, SurrogatePredictor, Thresholds,
    TxDescriptor,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn oracle(c: &mut Criterion) {
    let scene = SceneGenerator::for_grid(64).generate(1).unwrap();
    let tx = scene
        .outdoor_mask()
        .indexed()
        .filter(|(_, &o)| o)
        .nth(900)
        .unwrap()
        .0;
    let with = scene.with_txs(vec![TxDescriptor::at(tx)]).unwrap();
    let params = PropagationParams::for_scene(&scene);
    c.bench_function("oracle_maps_64_1tx", |b| {
        b.iter(|| compute_maps(black_box(&with), &params))
    });
}

fn surrogate(c: &mut Criterion) {
    let mut g = c.benchmark_group("surrogate_predict");
    g.sample_size(10);
    for n in [64, 128] {
        let scene = SceneGenerator::for_grid(n).generate(1).unwrap();
        let model =
            TrainedSurrogate::untrained(ModelKind::NpeGan, n, &GeneratorSpec::for_grid(n, 256), 0)
                .unwrap();
        let pred = SurrogatePredictor::new(&scene, Arc::new(model)).unwrap();
        let tx = scene
            .outdoor_mask()
            .indexed()
            .filter(|(_, &o)| o)
            .nth(500)
            .unwrap()
            .0;
        g.bench_function(format!("{n}x{n}"), |b| {
            b.iter(|| pred.predict(black_box(&[tx])).unwrap())
        });
    }
    g.finish();
}

fn placement(c: &mut Criterion) {
    let scene = SceneGenerator::for_grid(64).generate(2).unwrap();
    let pred = OraclePredictor::new(&scene);
    let t = Thresholds::default();
    let mut g = c.benchmark_group("placement");
    g.sample_size(10);
    g.bench_function("brute_force_1bs_stride4", |b| {
        b.iter(|| brute_force(&pred, &[], 1, 4, 3000, &t).unwrap())
    });
    let net = QNetwork::new(
        QNetworkSpec::new(64, 256),
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap();
    let state = DeploymentState {
        coverage: emfplan_core::Grid::filled(64, false),
        outdoor: scene.outdoor_mask(),
        deployed: Vec::new(),
        budget_remaining: 1,
    }
    .to_tensor();
    g.bench_function("qnet_forward_64", |b| {
        b.iter(|| net.forward(black_box(&state)))
    });
    g.finish();
}

criterion_group!(benches, oracle, surrogate, placement);
criterion_main!(benches);
