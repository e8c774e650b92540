//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! with its measured values; run with `--nocapture` to see them.
//!
//! Tests take a shared lock so the timing budgets are measured without
//! other checks competing for the CPU.

use std::collections::BTreeSet;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relpre::geom::{pairwise_view, GridSpec, ObjectInstance, Vec3};
use relpre::minisim::{
    action_directions, apply_perturbation, stability_check, ActionKind, InteractionRecord, PerturbationAction, TaskKind,
    DEFAULT_MOVE_THRESHOLD,
};
use relpre::nn::loss::triplet;
use relpre::nn::{Adam, AdamConfig};
use relpre::pipeline::{
    build_graphs, generate_interactions, generate_task_scenes, gradcheck_suite, interactions_from_bytes, interactions_to_bytes,
    pair_grid, precond_config, real2sim_counts, relation_config, relation_train_config, run_unstack_benchmark, scene_grid,
    tasks_from_bytes, tasks_to_bytes, FeatureSource, RunConfig, TaskGenOptions,
};
use relpre::precond::{f1_score, EdgeMode, EdgeSource, ModelKind, PrecondModel};
use relpre::relnet::{dp_ratio, mine_triplets, train_relation_model, Channel, ContrastiveConfig, EffectSummary, RelationModel, Triplet};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, title: &str, passed: bool, detail: &str) {
    println!("[{}] criterion {id} {title}: {detail}", if passed { "PASS" } else { "FAIL" });
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

#[test]
fn criterion_1_gradient_correctness() {
    let _g = serial();
    let start = Instant::now();
    let rows = gradcheck_suite(0).unwrap();
    let elapsed = start.elapsed();
    for r in &rows {
        println!("  {:<20} max rel error {:.2e} over {} entries ({} kinks)", r.name, r.max_error, r.checked, r.kinks);
    }
    let worst = rows.iter().map(|r| r.max_error).fold(0.0, f64::max);
    let within = rows.iter().all(|r| r.passed && r.max_error <= 1e-4);
    let passed = within && elapsed < Duration::from_secs(120);
    report(1, "gradient correctness", passed, &format!("{} checks, worst {worst:.2e}, {:.1} s", rows.len(), secs(elapsed)));
    assert!(passed);
}

/// Reference mining: tests every ordered triple directly from the per-action
/// values, with no shared pair-relation table.
fn brute_force_triplets(batch: &[EffectSummary], cfg: &ContrastiveConfig) -> BTreeSet<(usize, usize, usize, u8)> {
    let comparable = |a: &EffectSummary, i: usize, b: &EffectSummary, j: usize| {
        a.direction[i] == b.direction[j]
            && a.kind[i] == b.kind[j]
            && (a.kind[i] == ActionKind::Adaptive || (a.magnitude[i] - b.magnitude[j]).abs() < cfg.fixed_action_compare_threshold)
    };
    let diffs = |a: &EffectSummary, b: &EffectSummary, ch: u8| -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..a.len() {
            for j in 0..b.len() {
                if comparable(a, i, b, j) {
                    out.push(if ch == 0 { (a.dp_ratio[i] - b.dp_ratio[j]).abs() } else { (a.dtheta[i] - b.dtheta[j]).abs() });
                }
            }
        }
        out
    };
    let mut out = BTreeSet::new();
    for ch in 0..2u8 {
        let (sim, dis) = if ch == 0 { (cfg.dp_ratio_sim, cfg.dp_ratio_diff) } else { (cfg.dtheta_sim, cfg.dtheta_diff) };
        for a in 0..batch.len() {
            for p in 0..batch.len() {
                for n in 0..batch.len() {
                    if p == a || n == a || n == p {
                        continue;
                    }
                    let dp = diffs(&batch[a], &batch[p], ch);
                    let dn = diffs(&batch[a], &batch[n], ch);
                    let similar = !dp.is_empty() && dp.iter().all(|&d| d < sim);
                    let dissimilar = dn.iter().any(|&d| d > dis);
                    if similar && dissimilar {
                        out.insert((a, p, n, ch));
                    }
                }
            }
        }
    }
    out
}

fn random_summary(rng: &mut ChaCha8Rng, cluster: usize) -> EffectSummary {
    let dirs = action_directions().len() as u8;
    let mut s = EffectSummary { direction: vec![], kind: vec![], magnitude: vec![], dp_ratio: vec![], dtheta: vec![] };
    for kind in [ActionKind::Fixed, ActionKind::Adaptive] {
        for d in 0..dirs {
            s.direction.push(d);
            s.kind.push(kind);
            s.magnitude.push(0.05 + 0.01 * rng.random_range(0..16) as f64);
            // a few coarse levels so that every relation occurs
            let base = [0.0, 0.1, 0.5, 1.0][(cluster + d as usize % 2) % 4];
            s.dp_ratio.push(base + 0.05 * rng.random_range(0..5) as f64);
            s.dtheta.push(0.002 * rng.random_range(0..6) as f64);
        }
    }
    s
}

#[test]
fn criterion_2_mining_matches_brute_force() {
    let _g = serial();
    let start = Instant::now();
    let cfg = ContrastiveConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut mismatches, mut total) = (0, 0);
    for _ in 0..100 {
        let b = rng.random_range(2..=12);
        let batch: Vec<EffectSummary> = (0..b).map(|_| {
            let c = rng.random_range(0..3);
            random_summary(&mut rng, c)
        }).collect();
        let mined: Vec<Triplet> = mine_triplets(&batch, &cfg);
        let got: BTreeSet<_> = mined
            .iter()
            .map(|t| (t.anchor, t.positive, t.negative, if t.channel == Channel::Position { 0 } else { 1 }))
            .collect();
        assert_eq!(got.len(), mined.len(), "duplicate triplets");
        let want = brute_force_triplets(&batch, &cfg);
        total += want.len();
        if got != want {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    let passed = mismatches == 0 && total > 0 && elapsed < Duration::from_secs(60);
    report(2, "mining oracle equivalence", passed, &format!("100 batches, {total} triplets, {mismatches} mismatching batches, {:.1} s", secs(elapsed)));
    assert!(passed);
}

#[test]
fn criterion_3_formula_exactness() {
    let _g = serial();
    let t1 = triplet(4.0, 1.0, 2.0).unwrap().0;
    let t2 = triplet(1.0, 4.0, 2.0).unwrap().0;

    let grid = GridSpec::centered([16; 3], 0.02);
    let anchor = ObjectInstance::cuboid([0.04; 3], Vec3::zeros(), 0.0);
    let referrant = ObjectInstance::cuboid([0.04; 3], Vec3::new(0.12, 0.0, 0.0), 0.0);
    let view = pairwise_view(&[anchor, referrant], 0, 1, &grid).unwrap();
    let action = PerturbationAction { direction: Vec3::new(0.0, 1.0, 0.0), magnitude: 0.1, kind: ActionKind::Fixed };
    let effect = apply_perturbation(&anchor, &referrant, &action).unwrap();
    let ratio = dp_ratio(&effect, &action, &view).unwrap();

    let f1 = f1_score(2, 1, 1);

    let lr = 3e-4;
    let mut adam = Adam::new(AdamConfig { learning_rate: lr, ..AdamConfig::default() }, 1);
    let mut p = [0.0];
    adam.step(&mut p, &[1.0]).unwrap();

    let checks = [
        ("triplet(4,1,2) = 5", t1 == 5.0),
        ("triplet(1,4,2) = 0", t2 == 0.0),
        ("fixed-action ratio equals observed displacement", ratio == effect.delta_p && effect.delta_p > 0.0),
        ("F1(2,1,1) = 2/3", (f1 - 2.0 / 3.0).abs() < 1e-15),
        ("Adam first step = lr", (p[0] + lr).abs() < 1e-9),
    ];
    for (name, ok) in &checks {
        println!("  {name}: {}", if *ok { "ok" } else { "wrong" });
    }
    let passed = checks.iter().all(|c| c.1);
    report(3, "formula exactness", passed, &format!("{} exact assertions", checks.len()));
    assert!(passed);
}

/// Independent stability reference for one axis-aligned block resting on
/// another: the top stands iff its centre of mass lies over the lower
/// block's top face.
fn two_block_oracle(bottom: &ObjectInstance, top: &ObjectInstance) -> bool {
    let hx = bottom.dims[0] / 2.0;
    let hy = bottom.dims[1] / 2.0;
    let dx = top.position.x - bottom.position.x;
    let dy = top.position.y - bottom.position.y;
    // top footprint must touch the bottom face for any support at all
    let touch = dx.abs() < hx + top.dims[0] / 2.0 && dy.abs() < hy + top.dims[1] / 2.0;
    touch && dx.abs() <= hx && dy.abs() <= hy
}

fn random_tower_field(rng: &mut ChaCha8Rng) -> Vec<ObjectInstance> {
    let mut out = Vec::new();
    let columns = rng.random_range(1..=3);
    for c in 0..columns {
        let (cx, cy) = (0.3 * c as f64, 0.0);
        let mut z = 0.0;
        let (mut x, mut y) = (cx, cy);
        for _ in 0..rng.random_range(1..=4) {
            let side = rng.random_range(0.04..0.07);
            x += rng.random_range(-0.03..0.03);
            y += rng.random_range(-0.03..0.03);
            out.push(ObjectInstance::cuboid([side, side, 0.04], Vec3::new(x, y, z + 0.02), rng.random_range(-0.2..0.2)));
            z += 0.04;
        }
    }
    out
}

#[test]
fn criterion_4_stability_oracle() {
    let _g = serial();
    let start = Instant::now();
    let sides = [0.045, 0.065, 0.085];
    let tops = [0.04, 0.06, 0.1];
    let (mut cases, mut disagreements, mut standing) = (0, 0, 0);
    for &bx in &sides {
        for &by in &sides {
            for &ts in &tops {
                for i in -10..=10 {
                    for j in -10..=10 {
                        let bottom = ObjectInstance::cuboid([bx, by, 0.04], Vec3::new(0.0, 0.0, 0.02), 0.0);
                        let top = ObjectInstance::cuboid([ts, ts, 0.04], Vec3::new(0.01 * i as f64, 0.01 * j as f64, 0.06), 0.0);
                        let want = two_block_oracle(&bottom, &top);
                        let got = stability_check(&[bottom, top], DEFAULT_MOVE_THRESHOLD).unwrap();
                        cases += 1;
                        standing += want as usize;
                        let fallen_ok = if want { got.fallen.is_empty() } else { got.fallen == BTreeSet::from([1]) };
                        if got.stable != want || !fallen_ok {
                            disagreements += 1;
                        }
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut perm_failures = 0;
    let mut unstable_stacks = 0;
    for _ in 0..1000 {
        let blocks = random_tower_field(&mut rng);
        let base = stability_check(&blocks, DEFAULT_MOVE_THRESHOLD).unwrap();
        unstable_stacks += !base.stable as usize;
        let mut perm: Vec<usize> = (0..blocks.len()).collect();
        perm.shuffle(&mut rng);
        let shuffled: Vec<ObjectInstance> = perm.iter().map(|&i| blocks[i]).collect();
        let r = stability_check(&shuffled, DEFAULT_MOVE_THRESHOLD).unwrap();
        let mapped: BTreeSet<usize> = r.fallen.iter().map(|&k| perm[k]).collect();
        if r.stable != base.stable || mapped != base.fallen {
            perm_failures += 1;
        }
    }
    let elapsed = start.elapsed();
    let passed = disagreements == 0 && perm_failures == 0 && elapsed < Duration::from_secs(180);
    report(
        4,
        "stability oracle",
        passed,
        &format!(
            "{cases} two-block cases ({standing} standing), {disagreements} disagreements; 1000 stacks ({unstable_stacks} unstable), {perm_failures} permutation failures; {:.1} s",
            secs(elapsed)
        ),
    );
    assert!(passed);
}

#[test]
fn criterion_5_permutation_invariance() {
    let _g = serial();
    let cfg = RunConfig::desk();
    let scenes = generate_task_scenes(&TaskGenOptions {
        task: TaskKind::Unstack,
        blocks: vec![3, 4, 5, 6],
        count: 25,
        seed: 5,
        marginal_fraction: 0.0,
        first_scene_id: 0,
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut failures = 0;
    let mut evaluated = 0;
    for (kind, mode, source) in [
        (ModelKind::Rn, EdgeMode::Dense, FeatureSource::BBox),
        (ModelKind::Gnn, EdgeMode::Sparse, FeatureSource::Discrete),
    ] {
        let graphs = build_graphs(&scenes, source, mode, &cfg).unwrap();
        let g0 = &graphs[0].graph;
        let model = PrecondModel::new(precond_config(&cfg, kind, g0.node_dim, g0.edge_dim), 5).unwrap();
        for lg in &graphs {
            let base = model.logit(&lg.graph).unwrap();
            let mut perm: Vec<usize> = (0..lg.graph.n_nodes()).collect();
            for _ in 0..50 {
                perm.shuffle(&mut rng);
                let logit = model.logit(&lg.graph.permuted(&perm)).unwrap();
                evaluated += 1;
                if logit.to_bits() != base.to_bits() {
                    failures += 1;
                }
            }
        }
    }
    let passed = failures == 0 && scenes.len() == 100;
    report(5, "permutation invariance", passed, &format!("{} scenes x 50 permutations x 2 models, {evaluated} logits, {failures} differ", scenes.len()));
    assert!(passed);
}

/// One pair scene of the two-cluster dataset. Cluster 0 rests the referrant
/// on top of the anchor, so downward pushes are blocked; cluster 1 places it
/// well clear of the anchor at the same height, so fixed pushes move freely.
fn cluster_record(rng: &mut ChaCha8Rng, cluster: usize, scene_id: u64, grid: &GridSpec) -> InteractionRecord {
    let ah = rng.random_range(0.04..0.08);
    let anchor = ObjectInstance::cuboid([rng.random_range(0.08..0.12), rng.random_range(0.08..0.12), ah], Vec3::zeros(), 0.0);
    let side = rng.random_range(0.04..0.06);
    let position = if cluster == 0 {
        Vec3::new(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01), ah / 2.0 + side / 2.0)
    } else {
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let r = rng.random_range(0.2..0.26);
        Vec3::new(r * angle.cos(), r * angle.sin(), 0.0)
    };
    let referrant = ObjectInstance::cuboid([side; 3], position, 0.0);
    let distance = position.norm();
    let mut actions = Vec::new();
    for kind in [ActionKind::Fixed, ActionKind::Adaptive] {
        for d in action_directions() {
            let magnitude = if kind == ActionKind::Fixed { rng.random_range(0.05..0.2) } else { distance };
            actions.push(PerturbationAction { direction: d, magnitude, kind });
        }
    }
    let effects = actions.iter().map(|a| apply_perturbation(&anchor, &referrant, a).unwrap()).collect();
    let pair_view = pairwise_view(&[anchor, referrant], 0, 1, grid).unwrap();
    InteractionRecord { scene_id, anchor, referrant, pair_view, actions, effects }
}

fn mean_distance(a: &[Vec<f64>], b: &[Vec<f64>], same: bool) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            if same && j <= i {
                continue;
            }
            sum += x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            n += 1;
        }
    }
    sum / n as f64
}

#[test]
fn criterion_6_embedding_separation() {
    let _g = serial();
    let start = Instant::now();
    let mut cfg = RunConfig::desk();
    cfg.relnet_epochs = 30;
    cfg.relnet_batch_size = 32;
    let grid = pair_grid(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let records: Vec<InteractionRecord> = (0..192).map(|i| cluster_record(&mut rng, (i % 2) as usize, i, &grid)).collect();
    let model = RelationModel::new(relation_config(&cfg), 6).unwrap();
    let (model, _) = train_relation_model(model, &records, &relation_train_config(&cfg)).unwrap();
    let held_out: Vec<InteractionRecord> = (0..64).map(|i| cluster_record(&mut rng, (i % 2) as usize, 1000 + i, &grid)).collect();
    let mut clusters = [Vec::new(), Vec::new()];
    for r in &held_out {
        clusters[(r.scene_id % 2) as usize].push(model.embed(&r.pair_view).unwrap());
    }
    let intra = 0.5 * (mean_distance(&clusters[0], &clusters[0], true) + mean_distance(&clusters[1], &clusters[1], true));
    let inter = mean_distance(&clusters[0], &clusters[1], false);
    let ratio = inter / intra;
    let elapsed = start.elapsed();
    let passed = ratio >= 3.0 && elapsed < Duration::from_secs(300);
    report(6, "embedding separation", passed, &format!("inter {inter:.3} / intra {intra:.3} = {ratio:.2} on held-out scenes, {:.1} s", secs(elapsed)));
    assert!(passed);
}

/// Relation-model settings for the benchmark run: 3000 interaction scenes,
/// 16 epochs of batch 32 at learning rate 1e-3.
fn benchmark_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::desk();
    cfg.seed = seed;
    cfg.interactions = 3000;
    cfg.relnet_epochs = 16;
    cfg.relnet_batch_size = 32;
    cfg.relnet_adam.learning_rate = 1e-3;
    cfg.unstack.train.count = 100;
    cfg.unstack.test.count = 150;
    cfg
}

#[test]
fn criterion_7_unstacking_trend() {
    let _g = serial();
    let start = Instant::now();
    let (mut learned, mut discrete) = (Vec::new(), Vec::new());
    for seed in 1..=3 {
        let cfg = benchmark_config(seed);
        let records = generate_interactions(cfg.interactions, seed, &pair_grid(&cfg)).unwrap();
        let model = RelationModel::new(relation_config(&cfg), seed).unwrap();
        let (model, _) = train_relation_model(model, &records, &relation_train_config(&cfg)).unwrap();
        let rows = run_unstack_benchmark(&cfg, Some(&model), &[EdgeSource::Learned, EdgeSource::Discrete26], seed).unwrap();
        for row in &rows {
            println!("  {}", row.to_json_line());
        }
        learned.push(rows[0].weighted_f1);
        discrete.push(rows[1].weighted_f1);
    }
    let elapsed = start.elapsed();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (l, d) = (mean(&learned), mean(&discrete));
    let passed = l >= 0.75 && l >= d + 0.05 && elapsed < Duration::from_secs(1200);
    report(
        7,
        "unstacking generalisation trend",
        passed,
        &format!("mean weighted F1 learned {l:.3} vs discrete {d:.3} (gap {:.3}) over 3 seeds, {:.0} s", l - d, secs(elapsed)),
    );
    assert!(passed);
}

#[test]
fn criterion_8_real2sim_sanity() {
    let _g = serial();
    let cfg = RunConfig::desk();
    let records = generate_task_scenes(&TaskGenOptions {
        task: TaskKind::Unstack,
        blocks: vec![3, 4, 5],
        count: 40,
        seed: 8,
        marginal_fraction: 0.3,
        first_scene_id: 0,
    })
    .unwrap();
    let marginal = records.iter().filter(|r| r.marginal).count() as f64 / records.len() as f64;
    let exact = real2sim_counts(&records, None).unwrap().f1();
    let voxel = real2sim_counts(&records, Some(&scene_grid(&cfg))).unwrap().f1();
    let passed = marginal >= 0.2 && exact == 1.0 && voxel < exact;
    report(
        8,
        "real2sim sanity",
        passed,
        &format!("{} scenes, {:.0}% marginal; F1 exact {exact:.3}, voxel {voxel:.3}", records.len(), 100.0 * marginal),
    );
    assert!(passed);
}

#[test]
fn criterion_9_determinism() {
    let _g = serial();
    let cfg = RunConfig::desk();
    let grid = pair_grid(&cfg);
    let digest = cfg.digest();
    let inter = || interactions_to_bytes(&generate_interactions(24, 9, &grid).unwrap(), &grid, 9, digest).unwrap();
    let opts = TaskGenOptions { task: TaskKind::Unstack, blocks: vec![3, 4], count: 10, seed: 9, marginal_fraction: 0.2, first_scene_id: 0 };
    let tasks = || tasks_to_bytes(TaskKind::Unstack, &generate_task_scenes(&opts).unwrap(), &scene_grid(&cfg), 9, digest).unwrap();

    let (i1, i2) = (inter(), inter());
    let (t1, t2) = (tasks(), tasks());
    let (_, ir) = interactions_from_bytes(&i1).unwrap();
    let i_round = interactions_to_bytes(&ir, &grid, 9, digest).unwrap();
    let (_, tr) = tasks_from_bytes(&t1).unwrap();
    let t_round = tasks_to_bytes(TaskKind::Unstack, &tr, &scene_grid(&cfg), 9, digest).unwrap();

    let checks = [
        ("interactions identical across runs", i1 == i2),
        ("task scenes identical across runs", t1 == t2),
        ("interaction round trip", i1 == i_round),
        ("task round trip", t1 == t_round),
    ];
    for (name, ok) in &checks {
        println!("  {name}: {}", if *ok { "ok" } else { "differs" });
    }
    let passed = checks.iter().all(|c| c.1);
    report(9, "determinism", passed, &format!("{} interaction bytes, {} task bytes", i1.len(), t1.len()));
    assert!(passed);
}
