use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::RunConfig;
use super::dataset::TaskRecord;
use super::taskgen::{generate_task_scenes, TaskGenOptions};
use super::PipelineError;
use crate::geom::{voxelize, GridSpec};
use crate::minisim::{generate_interaction, real2sim_predict, reconstruct_boxes, settle, InteractionRecord, TaskArgs, TaskKind};
use crate::precond::{
    bbox_features, build_graph, discrete_features, evaluate, learned_features, meanpos_features, train_precondition, ClassCounts,
    EdgeMode, EdgeSource, EvalReport, LabeledGraph, ModelKind, NodeLabels, PrecondConfig, PrecondModel, PrecondTrainConfig,
    Prediction,
};
use crate::relnet::{embed_scene, EmbeddingKey, EmbeddingTable, RelationConfig, RelationModel, TrainConfig};

const PLACEMENT_ATTEMPTS: usize = 8;

pub fn relation_config(cfg: &RunConfig) -> RelationConfig {
    cfg.relation.clone()
}

pub fn relation_train_config(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        epochs: cfg.relnet_epochs,
        batch_size: cfg.relnet_batch_size,
        adam: cfg.relnet_adam,
        seed: cfg.seed,
        contrastive: cfg.contrastive,
        weights: cfg.weights,
    }
}

/// Anchor-centred grid of the pair views.
pub fn pair_grid(cfg: &RunConfig) -> GridSpec {
    GridSpec::centered(cfg.relation.resolution, cfg.relation.voxel_size)
}

/// World grid for whole task scenes: centred in x and y, floor at z = 0.
pub fn scene_grid(cfg: &RunConfig) -> GridSpec {
    let mut g = GridSpec::centered(cfg.relation.resolution, cfg.relation.voxel_size);
    g.origin.z = 0.0;
    g
}

/// `count` interaction scenes with ids `0..count`. Scene `i` draws its seed
/// from random stream `i` of `seed`, so the result does not depend on how
/// the work is split across threads.
pub fn generate_interactions(count: usize, seed: u64, grid: &GridSpec) -> Result<Vec<InteractionRecord>, PipelineError> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let mut last = None;
            for _ in 0..PLACEMENT_ATTEMPTS {
                match generate_interaction(i, rng.next_u64(), grid) {
                    Ok(r) => return Ok(r),
                    Err(e) => last = Some(e),
                }
            }
            Err(last.expect("at least one attempt").into())
        })
        .collect()
}

/// Frozen embeddings of every ordered object pair of every scene. `seed`
/// is the relation model's training seed and is stored with the table.
pub fn embed_task_scenes(model: &RelationModel, records: &[TaskRecord], config_digest: u32, seed: u64) -> Result<EmbeddingTable, PipelineError> {
    let per_scene = records
        .par_iter()
        .map(|r| embed_scene(model, &r.objects).map(|e| (r.scene_id, e)))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = &model.config;
    let mut table = EmbeddingTable::new(cfg.embedding_dim, cfg.resolution, cfg.voxel_size, config_digest, seed);
    for (scene_id, pairs) in per_scene {
        for ((a, r), e) in pairs {
            table.insert(EmbeddingKey { scene_id, anchor: a as u32, referrant: r as u32 }, e)?;
        }
    }
    Ok(table)
}

/// Where graph features come from.
#[derive(Debug, Clone, Copy)]
pub enum FeatureSource<'a> {
    Learned(&'a EmbeddingTable),
    Discrete,
    MeanPos,
    BBox,
}

impl FeatureSource<'_> {
    pub fn edge_source(&self) -> EdgeSource {
        match self {
            FeatureSource::Learned(_) => EdgeSource::Learned,
            FeatureSource::Discrete => EdgeSource::Discrete26,
            FeatureSource::MeanPos => EdgeSource::MeanPos,
            FeatureSource::BBox => EdgeSource::BBox,
        }
    }
}

pub fn build_graphs(records: &[TaskRecord], source: FeatureSource<'_>, mode: EdgeMode, cfg: &RunConfig) -> Result<Vec<LabeledGraph>, PipelineError> {
    if let FeatureSource::Learned(t) = source {
        if t.resolution != cfg.relation.resolution || t.voxel_size != cfg.relation.voxel_size {
            return Err(PipelineError::GridMismatch(format!(
                "embeddings were computed on {:?} at {} m, config expects {:?} at {} m",
                t.resolution, t.voxel_size, cfg.relation.resolution, cfg.relation.voxel_size
            )));
        }
    }
    let pair = pair_grid(cfg);
    let world = scene_grid(cfg);
    records
        .par_iter()
        .map(|r| {
            let features = match source {
                FeatureSource::Learned(t) => learned_features(t, r.scene_id, r.objects.len()),
                FeatureSource::Discrete => discrete_features(&r.objects, &pair, r.scene_id)?,
                FeatureSource::MeanPos => meanpos_features(&r.objects, &world)?,
                FeatureSource::BBox => bbox_features(&r.objects, &world)?,
            };
            let labels = match (r.task, r.removal_target) {
                (TaskKind::Unstack, Some(t)) => NodeLabels::RemovalTarget(t),
                _ => NodeLabels::None,
            };
            let graph = build_graph(&r.objects, &features, mode, labels)?;
            Ok(LabeledGraph { graph, label: r.label })
        })
        .collect()
}

pub fn precond_config(cfg: &RunConfig, kind: ModelKind, node_dim: usize, edge_dim: usize) -> PrecondConfig {
    PrecondConfig { gnn_width: cfg.gnn_width, readout_hidden: cfg.readout_hidden, ..PrecondConfig::full(kind, node_dim, edge_dim) }
}

pub fn precond_train_config(cfg: &RunConfig, seed: u64) -> PrecondTrainConfig {
    PrecondTrainConfig { epochs: cfg.precond_epochs, batch_size: cfg.precond_batch_size, adam: cfg.precond_adam, seed }
}

/// Trains a classifier of `kind` on `train` and counts its predictions on
/// `test` at threshold 0.5.
pub fn train_and_evaluate(
    train: &[LabeledGraph],
    test: &[LabeledGraph],
    kind: ModelKind,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(PrecondModel, ClassCounts), PipelineError> {
    let first = train.first().ok_or_else(|| PipelineError::Data("empty training split".into()))?;
    let pc = precond_config(cfg, kind, first.graph.node_dim, first.graph.edge_dim);
    let model = PrecondModel::new(pc, seed)?;
    let (model, _) = train_precondition(model, train, &precond_train_config(cfg, seed))?;
    let counts = evaluate(&model, test, 0.5)?;
    Ok((model, counts))
}

/// Real2Sim predictions: the oracle on exact geometry (`grid = None`) or on
/// boxes fitted to a voxelisation of the scene over `grid` and settled.
/// Reconstructions the stability check rejects count as negative.
pub fn real2sim_counts(records: &[TaskRecord], grid: Option<&GridSpec>) -> Result<ClassCounts, PipelineError> {
    let preds = records
        .par_iter()
        .map(|r| {
            let scene = match grid {
                None => r.objects.clone(),
                Some(g) => {
                    let vox = voxelize(&r.objects, g)?;
                    settle(&reconstruct_boxes(&vox.grid)?, g.voxel_size)
                }
            };
            let args = TaskArgs { removal_target: r.removal_target, ..TaskArgs::default() };
            let positive = match real2sim_predict(r.task, &scene, &args) {
                Ok(p) => p,
                Err(e) if grid.is_some() => {
                    log::debug!("scene {}: reconstruction rejected ({e})", r.scene_id);
                    false
                }
                Err(e) => return Err(e.into()),
            };
            Ok(Prediction { probability: if positive { 1.0 } else { 0.0 }, label: r.label })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    Ok(ClassCounts::from_predictions(&preds, 0.5))
}

/// One benchmark result before it is turned into a report row.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub model: String,
    pub edge_source: String,
    pub counts: ClassCounts,
}

impl BenchmarkRow {
    pub fn report(&self, cfg: &RunConfig, train_split: &str, test_split: &str, seed: u64) -> EvalReport {
        EvalReport::new(&self.model, &self.edge_source, train_split, test_split, self.counts, seed, cfg.digest())
    }
}

/// Unstacking generalisation: generates the train and test splits for
/// `seed`, embeds them with the frozen `relation` model (if given), trains
/// one classifier per feature source and evaluates it on the test split.
pub fn run_unstack_benchmark(
    cfg: &RunConfig,
    relation: Option<&RelationModel>,
    sources: &[EdgeSource],
    seed: u64,
) -> Result<Vec<EvalReport>, PipelineError> {
    let split = &cfg.unstack;
    let train = generate_task_scenes(&TaskGenOptions {
        task: TaskKind::Unstack,
        blocks: split.train.blocks.clone(),
        count: split.train.count,
        seed,
        marginal_fraction: split.marginal_fraction,
        first_scene_id: 0,
    })?;
    let test = generate_task_scenes(&TaskGenOptions {
        task: TaskKind::Unstack,
        blocks: split.test.blocks.clone(),
        count: split.test.count,
        seed: seed ^ 0x7e57,
        marginal_fraction: split.marginal_fraction,
        first_scene_id: train.len() as u64,
    })?;
    let table = match (relation, sources.contains(&EdgeSource::Learned)) {
        (Some(m), true) => {
            let mut all = train.clone();
            all.extend(test.iter().cloned());
            Some(embed_task_scenes(m, &all, cfg.digest(), cfg.seed)?)
        }
        (None, true) => return Err(PipelineError::Config("learned features need a relation model".into())),
        _ => None,
    };
    let (train_label, test_label) = (split.train.label(), split.test.label());
    let model_name = format!("{}-{}", cfg.precond_model.name(), cfg.precond_edges.name());
    let mut rows = Vec::new();
    for &source in sources {
        let fs = match source {
            EdgeSource::Learned => FeatureSource::Learned(table.as_ref().expect("embedded above")),
            EdgeSource::Discrete26 => FeatureSource::Discrete,
            EdgeSource::MeanPos => FeatureSource::MeanPos,
            EdgeSource::BBox => FeatureSource::BBox,
        };
        let tr = build_graphs(&train, fs, cfg.precond_edges, cfg)?;
        let te = build_graphs(&test, fs, cfg.precond_edges, cfg)?;
        let (_, counts) = train_and_evaluate(&tr, &te, cfg.precond_model, cfg, seed)?;
        let row = BenchmarkRow { model: model_name.clone(), edge_source: source.name().into(), counts };
        log::info!("seed {seed} {} {}: weighted F1 {:.3}", row.model, row.edge_source, counts.weighted_f1());
        rows.push(row.report(cfg, &train_label, &test_label, seed));
    }
    Ok(rows)
}

