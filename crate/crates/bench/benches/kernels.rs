use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use relpre::minisim::{stability_check, DEFAULT_MOVE_THRESHOLD};
use relpre::pipeline::{scene_grid, RunConfig};
use relpre::relnet::{mine_triplets, ContrastiveConfig, EffectSummary, RelationModel};
use relpre_bench::{interaction_batch, stacks};

fn encoder(c: &mut Criterion) {
    let cfg = RunConfig::desk();
    let model = RelationModel::new(cfg.relation.clone(), 0).unwrap();
    let view = interaction_batch(1, 0).remove(0).pair_view;
    c.bench_function("encoder_forward_32", |b| b.iter(|| model.encode(black_box(&view)).unwrap()));
    let (y, cache) = model.encode(&view).unwrap();
    let upstream = vec![1.0; y.len()];
    let mut grads = vec![0.0; model.params.len()];
    c.bench_function("encoder_backward_32", |b| {
        b.iter(|| model.encoder().backward(&model.params, &cache, black_box(&upstream), &mut grads, false).unwrap())
    });
}

fn mining(c: &mut Criterion) {
    let batch: Vec<EffectSummary> = interaction_batch(64, 1).iter().map(|r| EffectSummary::from_record(r).unwrap()).collect();
    let cfg = ContrastiveConfig::default();
    c.bench_function("mine_triplets_64", |b| b.iter(|| mine_triplets(black_box(&batch), &cfg)));
}

fn scenes(c: &mut Criterion) {
    let scenes = stacks(7, 16, 2);
    c.bench_function("stability_7_blocks", |b| {
        b.iter(|| scenes.iter().map(|s| stability_check(black_box(s), DEFAULT_MOVE_THRESHOLD).unwrap().stable as usize).sum::<usize>())
    });
    let grid = scene_grid(&RunConfig::desk());
    c.bench_function("voxelize_7_blocks", |b| b.iter(|| relpre::geom::voxelize(black_box(&scenes[0]), &grid).unwrap()));
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10);
    targets = encoder, mining, scenes
}
criterion_main!(kernels);
