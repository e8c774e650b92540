use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ContrastiveConfig, LossWeights};
use super::effects::PreparedRecord;
use super::loss::{combined_loss, LossComponents};
use super::model::RelationModel;
use super::RelnetError;
use crate::geom::VoxelPairInput;
use crate::minisim::InteractionRecord;
use crate::nn::{Adam, AdamConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub contrastive: ContrastiveConfig,
    pub weights: LossWeights,
}

impl TrainConfig {
    pub fn desk() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            adam: AdamConfig::default(),
            seed: 0,
            contrastive: ContrastiveConfig::default(),
            weights: LossWeights::default(),
        }
    }

    pub fn full() -> Self {
        Self { batch_size: 256, ..Self::desk() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    /// Batch-averaged loss components.
    pub loss: LossComponents,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
}

/// Trains `model` on `records` with seeded shuffling and Adam, returning the
/// parameters of the epoch with the lowest mean loss. Incomplete trailing
/// batches are dropped.
pub fn train_relation_model(
    mut model: RelationModel,
    records: &[InteractionRecord],
    cfg: &TrainConfig,
) -> Result<(RelationModel, TrainReport), RelnetError> {
    cfg.contrastive.validate()?;
    cfg.weights.validate()?;
    if cfg.batch_size < 2 {
        return Err(RelnetError::Config("batch size must be at least 2".into()));
    }
    if records.len() < 2 * cfg.batch_size {
        return Err(RelnetError::Data(format!(
            "{} records is fewer than two batches of {}",
            records.len(),
            cfg.batch_size
        )));
    }
    let mut report = TrainReport::default();
    if cfg.epochs == 0 {
        return Ok((model, report));
    }
    let prepared = records.iter().map(PreparedRecord::new).collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.adam, model.params.len());
    let mut order: Vec<usize> = (0..records.len()).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut mean = LossComponents::default();
        let batches: Vec<&[usize]> = order.chunks_exact(cfg.batch_size).collect();
        let scale = 1.0 / batches.len() as f64;
        for batch in batches {
            let views: Vec<&VoxelPairInput> = batch.iter().map(|&i| &records[i].pair_view).collect();
            let recs: Vec<&PreparedRecord> = batch.iter().map(|&i| &prepared[i]).collect();
            let (comps, grads) = combined_loss(&model, &views, &recs, &cfg.contrastive, &cfg.weights).map_err(|e| match e {
                RelnetError::NonFiniteLoss(component) => RelnetError::Diverged { epoch, component },
                other => other,
            })?;
            adam.step(model.params.values_mut(), &grads).map_err(|_| RelnetError::Diverged {
                epoch,
                component: "gradient".into(),
            })?;
            mean.add_scaled(&comps, scale);
        }
        log::info!(
            "relnet epoch {epoch}: total {:.4} (pos_cont {:.4}, orient_cont {:.4}, pos {:.4}, orient {:.4}, contact {:.4}; triplets {}/{})",
            mean.total,
            mean.pos_cont,
            mean.orient_cont,
            mean.pos,
            mean.orient,
            mean.contact,
            mean.pos_triplets,
            mean.orient_triplets
        );
        report.epochs.push(EpochLog { epoch, learning_rate: adam.learning_rate(), loss: mean });
        if best.as_ref().is_none_or(|(l, _)| mean.total < *l) {
            best = Some((mean.total, model.params.values().to_vec()));
            report.best_epoch = Some(epoch);
        }
        adam.end_epoch();
    }
    if let Some((_, values)) = best {
        model.params.values_mut().copy_from_slice(&values);
    }
    Ok((model, report))
}
