use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use relpre::geom::GridSpec;
use relpre::minisim::TaskKind;
use relpre::nn::checkpoint::Checkpoint;
use relpre::pipeline::{
    build_graphs, embed_task_scenes, generate_interactions, generate_task_scenes, gradcheck_suite, pair_grid, precond_config,
    precond_train_config, read_interactions, read_tasks, real2sim_counts, relation_config, relation_train_config, scene_grid,
    train_and_evaluate, write_interactions, write_tasks, FeatureSource, PipelineError, RunConfig, TaskGenOptions, TaskRecord,
};
use relpre::precond::{evaluate, train_precondition, EdgeMode, EdgeSource, EvalReport, PrecondModel};
use relpre::relnet::{train_relation_model, EmbeddingTable, RelationModel};
use serde_json::json;

use crate::{BaselineKind, Geometry, SourceArg, TaskArg};

type Result<T> = std::result::Result<T, PipelineError>;

fn ensure_fresh(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(PipelineError::Exists(path.display().to_string()));
    }
    Ok(())
}

fn report_sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit(out: &mut dyn Write, line: &str) -> Result<()> {
    writeln!(out, "{line}")?;
    Ok(())
}

fn hex(digest: u32) -> String {
    format!("{digest:08x}")
}

fn check_digest(what: &Path, found: u32, cfg: &RunConfig) -> Result<()> {
    let expected = cfg.digest();
    if found != expected {
        return Err(PipelineError::DigestMismatch { what: what.display().to_string(), expected, found });
    }
    Ok(())
}

fn check_grid(what: &Path, found: &GridSpec, expected: &GridSpec) -> Result<()> {
    if found != expected {
        return Err(PipelineError::GridMismatch(format!("{} uses {found:?}, config expects {expected:?}", what.display())));
    }
    Ok(())
}

fn meta<'a>(ck: &'a Checkpoint, key: &str) -> Option<&'a str> {
    ck.config.lines().find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

fn checkpoint_digest(path: &Path, ck: &Checkpoint, cfg: &RunConfig) -> Result<()> {
    let found = meta(ck, "config_digest")
        .and_then(|v| u32::from_str_radix(v, 16).ok())
        .ok_or_else(|| PipelineError::Data(format!("{}: checkpoint has no config digest", path.display())))?;
    check_digest(path, found, cfg)
}

fn checkpoint_seed(ck: &Checkpoint) -> u64 {
    meta(ck, "seed").and_then(|v| v.parse().ok()).unwrap_or(0)
}

fn load_tasks(path: &Path, cfg: &RunConfig) -> Result<Vec<TaskRecord>> {
    let (header, records) = read_tasks(path)?;
    check_grid(path, &header.grid, &scene_grid(cfg))?;
    check_digest(path, header.config_digest, cfg)?;
    Ok(records)
}

fn load_embeddings(path: Option<&Path>, cfg: &RunConfig) -> Result<Option<EmbeddingTable>> {
    let Some(path) = path else { return Ok(None) };
    let table = EmbeddingTable::load(path)?;
    check_digest(path, table.config_digest, cfg)?;
    Ok(Some(table))
}

fn feature_source<'a>(source: EdgeSource, table: Option<&'a EmbeddingTable>) -> Result<FeatureSource<'a>> {
    Ok(match source {
        EdgeSource::Learned => FeatureSource::Learned(
            table.ok_or_else(|| PipelineError::Config("learned features need --embeddings".into()))?,
        ),
        EdgeSource::Discrete26 => FeatureSource::Discrete,
        EdgeSource::MeanPos => FeatureSource::MeanPos,
        EdgeSource::BBox => FeatureSource::BBox,
    })
}

/// Object counts present in `records`, e.g. "3,4,5".
fn split_label(records: &[TaskRecord]) -> String {
    let counts: BTreeSet<usize> = records.iter().map(|r| r.objects.len()).collect();
    counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

/// Parses "3..5", "3-5", "3,4,5" or "7".
pub fn parse_blocks(spec: &str) -> Result<Vec<usize>> {
    let bad = || PipelineError::Config(format!("bad block range {spec:?}"));
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    let range = spec.split_once("..").or_else(|| spec.split_once('-'));
    let blocks: Vec<usize> = match range {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
            if a > b {
                return Err(bad());
            }
            (a..=b).collect()
        }
        None => spec.split(',').map(num).collect::<Result<_>>()?,
    };
    if blocks.is_empty() {
        return Err(bad());
    }
    Ok(blocks)
}

pub fn gen_interactions(cfg: &RunConfig, count: Option<usize>, seed: Option<u64>, out: &Path, force: bool) -> Result<()> {
    ensure_fresh(out, force)?;
    let count = count.unwrap_or(cfg.interactions);
    let seed = seed.unwrap_or(cfg.seed);
    let grid = pair_grid(cfg);
    let records = generate_interactions(count, seed, &grid)?;
    write_interactions(out, &records, &grid, seed, cfg.digest())?;
    let line = json!({
        "command": "gen-interactions",
        "out": out.display().to_string(),
        "count": count,
        "seed": seed,
        "config_digest": hex(cfg.digest()),
    });
    emit(&mut io::stdout().lock(), &line.to_string())
}

#[allow(clippy::too_many_arguments)]
pub fn gen_task(
    cfg: &RunConfig,
    task: TaskArg,
    blocks: &str,
    count: usize,
    seed: Option<u64>,
    marginal_fraction: Option<f64>,
    first_id: u64,
    out: &Path,
    force: bool,
) -> Result<()> {
    ensure_fresh(out, force)?;
    let (task, splits) = match task {
        TaskArg::Sweep => (TaskKind::Sweep, &cfg.sweep),
        TaskArg::Unstack => (TaskKind::Unstack, &cfg.unstack),
    };
    let marginal_fraction = marginal_fraction.unwrap_or(splits.marginal_fraction);
    if !(0.0..=1.0).contains(&marginal_fraction) {
        return Err(PipelineError::Config(format!("marginal fraction {marginal_fraction} outside [0, 1]")));
    }
    let seed = seed.unwrap_or(cfg.seed);
    let opts = TaskGenOptions { task, blocks: parse_blocks(blocks)?, count, seed, marginal_fraction, first_scene_id: first_id };
    let records = generate_task_scenes(&opts)?;
    write_tasks(out, task, &records, &scene_grid(cfg), seed, cfg.digest())?;
    let line = json!({
        "command": "gen-task",
        "out": out.display().to_string(),
        "task": task.name(),
        "blocks": split_label(&records),
        "count": records.len(),
        "positives": records.iter().filter(|r| r.label).count(),
        "marginal": records.iter().filter(|r| r.marginal).count(),
        "seed": seed,
        "config_digest": hex(cfg.digest()),
    });
    emit(&mut io::stdout().lock(), &line.to_string())
}

pub fn train_relnet(cfg: &RunConfig, data: &Path, seed: Option<u64>, out: &Path, report: Option<&Path>, force: bool) -> Result<()> {
    ensure_fresh(out, force)?;
    let (header, records) = read_interactions(data)?;
    check_grid(data, &header.grid, &pair_grid(cfg))?;
    check_digest(data, header.config_digest, cfg)?;
    let seed = seed.unwrap_or(cfg.seed);
    let model = RelationModel::new(relation_config(cfg), seed)?;
    let train_cfg = relnet_train_config(cfg, seed);
    let (model, log) = train_relation_model(model, &records, &train_cfg)?;
    model.to_checkpoint(&format!("config_digest={}\nseed={seed}\n", hex(cfg.digest()))).save(out)?;
    let mut sink = report_sink(report)?;
    for e in &log.epochs {
        let l = &e.loss;
        let line = json!({
            "command": "train-relnet",
            "epoch": e.epoch,
            "learning_rate": e.learning_rate,
            "total": l.total,
            "pos_cont": l.pos_cont,
            "orient_cont": l.orient_cont,
            "pos": l.pos,
            "orient": l.orient,
            "contact": l.contact,
            "pos_triplets": l.pos_triplets,
            "orient_triplets": l.orient_triplets,
        });
        emit(&mut *sink, &line.to_string())?;
    }
    let line = json!({
        "command": "train-relnet",
        "out": out.display().to_string(),
        "best_epoch": log.best_epoch,
        "seed": seed,
        "config_digest": hex(cfg.digest()),
    });
    emit(&mut *sink, &line.to_string())?;
    sink.flush()?;
    Ok(())
}

fn relnet_train_config(cfg: &RunConfig, seed: u64) -> relpre::relnet::TrainConfig {
    relpre::relnet::TrainConfig { seed, ..relation_train_config(cfg) }
}

pub fn embed(cfg: &RunConfig, model_path: &Path, scenes: &Path, out: &Path, force: bool) -> Result<()> {
    ensure_fresh(out, force)?;
    let ck = Checkpoint::load(model_path)?;
    checkpoint_digest(model_path, &ck, cfg)?;
    let model = RelationModel::from_checkpoint(&ck)?;
    let expected = relation_config(cfg);
    if model.config.resolution != expected.resolution || model.config.voxel_size != expected.voxel_size {
        return Err(PipelineError::GridMismatch(format!(
            "{} was trained on {:?} at {} m, config expects {:?} at {} m",
            model_path.display(),
            model.config.resolution,
            model.config.voxel_size,
            expected.resolution,
            expected.voxel_size
        )));
    }
    let records = load_tasks(scenes, cfg)?;
    let seed = checkpoint_seed(&ck);
    let table = embed_task_scenes(&model, &records, cfg.digest(), seed)?;
    table.save(out)?;
    let line = json!({
        "command": "embed",
        "out": out.display().to_string(),
        "scenes": records.len(),
        "pairs": table.entries.len(),
        "seed": seed,
        "config_digest": hex(cfg.digest()),
    });
    emit(&mut io::stdout().lock(), &line.to_string())
}

fn edge_source(arg: SourceArg) -> EdgeSource {
    match arg {
        SourceArg::Learned => EdgeSource::Learned,
        SourceArg::Discrete26 => EdgeSource::Discrete26,
        SourceArg::Meanpos => EdgeSource::MeanPos,
        SourceArg::Bbox => EdgeSource::BBox,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn train_precond(
    cfg: &RunConfig,
    train: &Path,
    source: SourceArg,
    embeddings: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
    report: Option<&Path>,
    force: bool,
) -> Result<()> {
    ensure_fresh(out, force)?;
    let records = load_tasks(train, cfg)?;
    let table = load_embeddings(embeddings, cfg)?;
    let source = edge_source(source);
    let graphs = build_graphs(&records, feature_source(source, table.as_ref())?, cfg.precond_edges, cfg)?;
    let first = graphs.first().ok_or_else(|| PipelineError::Data(format!("{} has no scenes", train.display())))?;
    let seed = seed.unwrap_or(cfg.seed);
    let config = precond_config(cfg, cfg.precond_model, first.graph.node_dim, first.graph.edge_dim);
    let model = PrecondModel::new(config, seed)?;
    let (model, log) = train_precondition(model, &graphs, &precond_train_config(cfg, seed))?;
    let train_split = split_label(&records);
    let extra = format!(
        "edge_source={}\nedge_mode={}\ntrain_split={train_split}\nconfig_digest={}\nseed={seed}\n",
        source.name(),
        cfg.precond_edges.name(),
        hex(cfg.digest())
    );
    model.to_checkpoint(&extra).save(out)?;
    let counts = evaluate(&model, &graphs, 0.5)?;
    let mut sink = report_sink(report)?;
    for (epoch, loss) in log.epoch_losses.iter().enumerate() {
        emit(&mut *sink, &json!({ "command": "train-precond", "epoch": epoch, "loss": loss }).to_string())?;
    }
    let line = json!({
        "command": "train-precond",
        "out": out.display().to_string(),
        "train_f1": counts.f1(),
        "train_weighted_f1": counts.weighted_f1(),
        "seed": seed,
        "config_digest": hex(cfg.digest()),
    });
    emit(&mut *sink, &line.to_string())?;
    sink.flush()?;
    Ok(())
}

pub fn eval(cfg: &RunConfig, model_path: &Path, test: &Path, embeddings: Option<&Path>, report: Option<&Path>) -> Result<()> {
    let ck = Checkpoint::load(model_path)?;
    checkpoint_digest(model_path, &ck, cfg)?;
    let model = PrecondModel::from_checkpoint(&ck)?;
    let missing = |k: &str| PipelineError::Data(format!("{}: checkpoint has no {k}", model_path.display()));
    let source = meta(&ck, "edge_source").and_then(EdgeSource::from_name).ok_or_else(|| missing("edge source"))?;
    let mode = meta(&ck, "edge_mode").and_then(EdgeMode::from_name).ok_or_else(|| missing("edge mode"))?;
    let train_split = meta(&ck, "train_split").unwrap_or("unknown").to_string();
    let records = load_tasks(test, cfg)?;
    let table = load_embeddings(embeddings, cfg)?;
    let graphs = build_graphs(&records, feature_source(source, table.as_ref())?, mode, cfg)?;
    let counts = evaluate(&model, &graphs, 0.5)?;
    let name = format!("{}-{}", model.config.kind.name(), mode.name());
    let row = EvalReport::new(&name, source.name(), &train_split, &split_label(&records), counts, checkpoint_seed(&ck), cfg.digest());
    let mut sink = report_sink(report)?;
    emit(&mut *sink, &row.to_json_line())?;
    sink.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn baseline(
    cfg: &RunConfig,
    kind: BaselineKind,
    train: Option<&Path>,
    test: &Path,
    geometry: Geometry,
    seed: Option<u64>,
    dump_edges: bool,
    report: Option<&Path>,
) -> Result<()> {
    let seed = seed.unwrap_or(cfg.seed);
    let test_records = load_tasks(test, cfg)?;
    let mut sink = report_sink(report)?;
    let source = match kind {
        BaselineKind::Real2sim => {
            let (grid, name) = match geometry {
                Geometry::Exact => (None, "real2sim-exact"),
                Geometry::Voxel => (Some(scene_grid(cfg)), "real2sim-voxel"),
            };
            let counts = real2sim_counts(&test_records, grid.as_ref())?;
            let row = EvalReport::new(name, "none", "none", &split_label(&test_records), counts, seed, cfg.digest());
            emit(&mut *sink, &row.to_json_line())?;
            sink.flush()?;
            return Ok(());
        }
        BaselineKind::Discrete => EdgeSource::Discrete26,
        BaselineKind::Meanpos => EdgeSource::MeanPos,
        BaselineKind::Bbox => EdgeSource::BBox,
    };
    let features = feature_source(source, None)?;
    let test_graphs = build_graphs(&test_records, features, cfg.precond_edges, cfg)?;
    if dump_edges {
        for (record, g) in test_records.iter().zip(&test_graphs) {
            for e in &g.graph.edges {
                let line = json!({ "scene_id": record.scene_id, "from": e.from, "to": e.to, "feature": e.feature });
                emit(&mut *sink, &line.to_string())?;
            }
        }
        sink.flush()?;
        return Ok(());
    }
    let train = train.ok_or_else(|| PipelineError::Config(format!("baseline {} needs --train", source.name())))?;
    let train_records = load_tasks(train, cfg)?;
    let train_graphs = build_graphs(&train_records, features, cfg.precond_edges, cfg)?;
    let (_, counts) = train_and_evaluate(&train_graphs, &test_graphs, cfg.precond_model, cfg, seed)?;
    let name = format!("{}-{}", cfg.precond_model.name(), cfg.precond_edges.name());
    let row = EvalReport::new(&name, source.name(), &split_label(&train_records), &split_label(&test_records), counts, seed, cfg.digest());
    emit(&mut *sink, &row.to_json_line())?;
    sink.flush()?;
    Ok(())
}

pub fn gradcheck(seed: u64, report: Option<&Path>) -> Result<()> {
    let rows = gradcheck_suite(seed)?;
    let mut sink = report_sink(report)?;
    for row in &rows {
        emit(&mut *sink, &serde_json::to_string(row).expect("row serialises"))?;
    }
    sink.flush()?;
    let failed: Vec<&str> = rows.iter().filter(|r| !r.passed).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(PipelineError::Numeric(format!("gradient check failed for {}", failed.join(", "))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_ranges() {
        assert_eq!(parse_blocks("3..5").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_blocks("3..=5").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_blocks("3-7").unwrap(), vec![3, 4, 5, 6, 7]);
        assert_eq!(parse_blocks("3,4,5").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_blocks("7").unwrap(), vec![7]);
        assert!(parse_blocks("5..3").is_err());
        assert!(parse_blocks("x").is_err());
    }
}
