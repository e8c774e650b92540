use std::collections::BTreeSet;

use super::PipelineError;
use crate::minisim::{ACTIONS_PER_SCENE, DIRECTION_COUNT};
use crate::nn::AdamConfig;
use crate::precond::{EdgeMode, ModelKind};
use crate::relnet::{ContrastiveConfig, LossWeights, RelationConfig};

/// Block counts of a split and the number of scenes per block count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSpec {
    pub blocks: Vec<usize>,
    pub count: usize,
}

impl SplitSpec {
    /// Label used in reports, e.g. `3,4,5`.
    pub fn label(&self) -> String {
        join(&self.blocks)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSplits {
    pub train: SplitSpec,
    pub test: SplitSpec,
    /// Share of scenes whose label hinges on a near-zero support margin.
    pub marginal_fraction: f64,
}

/// Everything a run depends on, as line-based `key=value` text.
///
/// The digest covers the canonical text without `stage` and `seed`, so
/// stages of one experiment and reruns with other seeds share it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    pub stage: String,
    pub seed: u64,
    pub relation: RelationConfig,
    pub interactions: usize,
    pub relnet_epochs: usize,
    pub relnet_batch_size: usize,
    pub relnet_adam: AdamConfig,
    pub contrastive: ContrastiveConfig,
    pub weights: LossWeights,
    pub precond_model: ModelKind,
    pub precond_edges: EdgeMode,
    pub precond_epochs: usize,
    pub precond_batch_size: usize,
    pub precond_adam: AdamConfig,
    pub gnn_width: usize,
    pub readout_hidden: usize,
    pub unstack: TaskSplits,
    pub sweep: TaskSplits,
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn desk() -> Self {
        let splits = |count_train, count_test| TaskSplits {
            train: SplitSpec { blocks: vec![3, 4, 5], count: count_train },
            test: SplitSpec { blocks: vec![7], count: count_test },
            marginal_fraction: 0.0,
        };
        Self {
            preset: "desk".into(),
            stage: "all".into(),
            seed: 0,
            relation: RelationConfig::desk(),
            interactions: 5000,
            relnet_epochs: 20,
            relnet_batch_size: 64,
            relnet_adam: AdamConfig { learning_rate: 1e-3, ..AdamConfig::default() },
            contrastive: ContrastiveConfig::default(),
            weights: LossWeights::default(),
            precond_model: ModelKind::Gnn,
            precond_edges: EdgeMode::Sparse,
            precond_epochs: 50,
            precond_batch_size: 8,
            precond_adam: AdamConfig { learning_rate: 1e-3, ..AdamConfig::default() },
            gnn_width: 64,
            readout_hidden: 32,
            unstack: splits(100, 150),
            sweep: splits(40, 40),
        }
    }

    pub fn full() -> Self {
        Self {
            preset: "full".into(),
            relation: RelationConfig::full(),
            interactions: 100_000,
            relnet_batch_size: 256,
            relnet_adam: AdamConfig::default(),
            gnn_width: 128,
            readout_hidden: 64,
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self, PipelineError> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            other => Err(PipelineError::Config(format!("unknown preset {other}"))),
        }
    }

    /// Canonical text with every key in a fixed order.
    pub fn to_text(&self) -> String {
        let r = &self.relation;
        let c = &self.contrastive;
        let w = &self.weights;
        let mut lines = vec![
            format!("preset={}", self.preset),
            format!("stage={}", self.stage),
            format!("seed={}", self.seed),
            format!("grid.resolution={}", join(&r.resolution)),
            format!("grid.voxel_size={}", r.voxel_size),
            format!("actions.directions={DIRECTION_COUNT}"),
            format!("actions.per_scene={ACTIONS_PER_SCENE}"),
            format!("interactions.count={}", self.interactions),
            format!("relnet.embedding_dim={}", r.embedding_dim),
            format!("relnet.conv_channels={}", join(&r.conv_channels)),
            format!("relnet.head_hidden={}", join(&r.head_hidden)),
            format!("relnet.epochs={}", self.relnet_epochs),
            format!("relnet.batch_size={}", self.relnet_batch_size),
            format!("relnet.lr={}", self.relnet_adam.learning_rate),
            format!("relnet.lr_decay={}", self.relnet_adam.lr_decay),
            format!("contrastive.dp_ratio_sim={}", c.dp_ratio_sim),
            format!("contrastive.dp_ratio_diff={}", c.dp_ratio_diff),
            format!("contrastive.dtheta_sim={}", c.dtheta_sim),
            format!("contrastive.dtheta_diff={}", c.dtheta_diff),
            format!("contrastive.gamma={}", c.gamma),
            format!("contrastive.fixed_action_compare_threshold={}", c.fixed_action_compare_threshold),
            format!("loss.pos_cont={}", w.pos_cont),
            format!("loss.orient_cont={}", w.orient_cont),
            format!("loss.pos={}", w.pos),
            format!("loss.orient={}", w.orient),
            format!("loss.contact={}", w.contact),
            format!("precond.model={}", self.precond_model.name()),
            format!("precond.edges={}", self.precond_edges.name()),
            format!("precond.epochs={}", self.precond_epochs),
            format!("precond.batch_size={}", self.precond_batch_size),
            format!("precond.lr={}", self.precond_adam.learning_rate),
            format!("precond.lr_decay={}", self.precond_adam.lr_decay),
            format!("precond.gnn_width={}", self.gnn_width),
            format!("precond.readout_hidden={}", self.readout_hidden),
        ];
        for (name, s) in [("unstack", &self.unstack), ("sweep", &self.sweep)] {
            lines.push(format!("{name}.train_blocks={}", join(&s.train.blocks)));
            lines.push(format!("{name}.train_count={}", s.train.count));
            lines.push(format!("{name}.test_blocks={}", join(&s.test.blocks)));
            lines.push(format!("{name}.test_count={}", s.test.count));
            lines.push(format!("{name}.marginal_fraction={}", s.marginal_fraction));
        }
        lines.join("\n") + "\n"
    }

    /// CRC32 of the canonical text without the `stage` and `seed` lines.
    pub fn digest(&self) -> u32 {
        let text: String = self
            .to_text()
            .lines()
            .filter(|l| !l.starts_with("stage=") && !l.starts_with("seed="))
            .map(|l| format!("{l}\n"))
            .collect();
        crc32fast::hash(text.as_bytes())
    }

    /// Parses `key=value` lines on top of the preset named by `preset`
    /// (default `desk`). Blank lines and `#` comments are skipped; unknown
    /// and repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut pairs = Vec::new();
        let mut seen = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| PipelineError::Config(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !seen.insert(k.clone()) {
                return Err(PipelineError::Config(format!("key {k} given twice")));
            }
            pairs.push((k, v));
        }
        let preset = pairs.iter().find(|(k, _)| k == "preset").map_or("desk", |(_, v)| v.as_str());
        let mut cfg = Self::preset(preset)?;
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let bad = || PipelineError::Config(format!("bad value for {key}: {value:?}"));
        let num = || value.parse::<usize>().map_err(|_| bad());
        let real = || value.parse::<f64>().map_err(|_| bad()).and_then(|x| if x.is_finite() { Ok(x) } else { Err(bad()) });
        let list = || -> Result<Vec<usize>, PipelineError> {
            value.split(',').map(|s| s.trim().parse::<usize>().map_err(|_| bad())).collect()
        };
        let fixed = |want: usize| if num()? == want { Ok(()) } else { Err(PipelineError::Config(format!("{key} must be {want}"))) };
        match key {
            "preset" => {
                Self::preset(value)?;
                self.preset = value.into();
            }
            "stage" => self.stage = value.into(),
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "grid.resolution" => self.relation.resolution = list()?.try_into().map_err(|_| bad())?,
            "grid.voxel_size" => self.relation.voxel_size = real()?,
            "actions.directions" => fixed(DIRECTION_COUNT)?,
            "actions.per_scene" => fixed(ACTIONS_PER_SCENE)?,
            "interactions.count" => self.interactions = num()?,
            "relnet.embedding_dim" => self.relation.embedding_dim = num()?,
            "relnet.conv_channels" => self.relation.conv_channels = list()?,
            "relnet.head_hidden" => self.relation.head_hidden = list()?,
            "relnet.epochs" => self.relnet_epochs = num()?,
            "relnet.batch_size" => self.relnet_batch_size = num()?,
            "relnet.lr" => self.relnet_adam.learning_rate = real()?,
            "relnet.lr_decay" => self.relnet_adam.lr_decay = real()?,
            "contrastive.dp_ratio_sim" => self.contrastive.dp_ratio_sim = real()?,
            "contrastive.dp_ratio_diff" => self.contrastive.dp_ratio_diff = real()?,
            "contrastive.dtheta_sim" => self.contrastive.dtheta_sim = real()?,
            "contrastive.dtheta_diff" => self.contrastive.dtheta_diff = real()?,
            "contrastive.gamma" => self.contrastive.gamma = real()?,
            "contrastive.fixed_action_compare_threshold" => self.contrastive.fixed_action_compare_threshold = real()?,
            "loss.pos_cont" => self.weights.pos_cont = real()?,
            "loss.orient_cont" => self.weights.orient_cont = real()?,
            "loss.pos" => self.weights.pos = real()?,
            "loss.orient" => self.weights.orient = real()?,
            "loss.contact" => self.weights.contact = real()?,
            "precond.model" => self.precond_model = ModelKind::from_name(value).ok_or_else(bad)?,
            "precond.edges" => self.precond_edges = EdgeMode::from_name(value).ok_or_else(bad)?,
            "precond.epochs" => self.precond_epochs = num()?,
            "precond.batch_size" => self.precond_batch_size = num()?,
            "precond.lr" => self.precond_adam.learning_rate = real()?,
            "precond.lr_decay" => self.precond_adam.lr_decay = real()?,
            "precond.gnn_width" => self.gnn_width = num()?,
            "precond.readout_hidden" => self.readout_hidden = num()?,
            _ => {
                let (task, field) = key.split_once('.').ok_or_else(|| PipelineError::Config(format!("unknown key {key}")))?;
                let splits = match task {
                    "unstack" => &mut self.unstack,
                    "sweep" => &mut self.sweep,
                    _ => return Err(PipelineError::Config(format!("unknown key {key}"))),
                };
                match field {
                    "train_blocks" => splits.train.blocks = list()?,
                    "train_count" => splits.train.count = num()?,
                    "test_blocks" => splits.test.blocks = list()?,
                    "test_count" => splits.test.count = num()?,
                    "marginal_fraction" => splits.marginal_fraction = real()?,
                    _ => return Err(PipelineError::Config(format!("unknown key {key}"))),
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.relation.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.contrastive.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        self.weights.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        for (name, s) in [("unstack", &self.unstack), ("sweep", &self.sweep)] {
            for split in [&s.train, &s.test] {
                if split.blocks.is_empty() || split.blocks.iter().any(|&b| !(2..=12).contains(&b)) {
                    return Err(PipelineError::Config(format!("{name} block counts must lie in 2..=12")));
                }
            }
            if !(0.0..=1.0).contains(&s.marginal_fraction) {
                return Err(PipelineError::Config(format!("{name}.marginal_fraction outside [0, 1]")));
            }
        }
        if self.precond_batch_size == 0 || self.relnet_batch_size < 2 {
            return Err(PipelineError::Config("batch sizes too small".into()));
        }
        for lr in [self.relnet_adam.learning_rate, self.precond_adam.learning_rate] {
            if !(lr > 0.0) {
                return Err(PipelineError::Config(format!("learning rate {lr} must be positive")));
            }
        }
        Ok(())
    }
}
