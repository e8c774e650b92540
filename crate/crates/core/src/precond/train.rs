use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::graph::SceneGraph;
use super::model::PrecondModel;
use super::PrecondError;
use crate::nn::loss::bce_with_logits;
use crate::nn::{Adam, AdamConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    pub graph: SceneGraph,
    pub label: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecondTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for PrecondTrainConfig {
    fn default() -> Self {
        Self { epochs: 50, batch_size: 8, adam: AdamConfig { learning_rate: 1e-3, ..AdamConfig::default() }, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrecondTrainReport {
    /// Mean binary cross-entropy per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Binary cross-entropy training with seeded shuffling and Adam. The last
/// batch of an epoch may be smaller than `batch_size`. Graph features are
/// inputs only, so relation embeddings stay untouched.
pub fn train_precondition(
    mut model: PrecondModel,
    data: &[LabeledGraph],
    cfg: &PrecondTrainConfig,
) -> Result<(PrecondModel, PrecondTrainReport), PrecondError> {
    if data.is_empty() {
        return Err(PrecondError::Empty);
    }
    if let Some(first) = data.first().map(|d| d.label) {
        if data.iter().all(|d| d.label == first) {
            return Err(PrecondError::SingleClass(first));
        }
    }
    if cfg.batch_size == 0 {
        return Err(PrecondError::Config("batch size must be positive".into()));
    }
    let mut report = PrecondTrainReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.adam, model.params.len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let parts = batch
                .par_iter()
                .map(|&i| {
                    let mut grads = model.params.zeros_like();
                    let label = if data[i].label { 1.0 } else { 0.0 };
                    let (_, loss) = model.backprop(
                        &data[i].graph,
                        |z| {
                            let (l, d) = bce_with_logits(z, label);
                            (l, d * scale)
                        },
                        &mut grads,
                    )?;
                    Ok((loss, grads))
                })
                .collect::<Result<Vec<_>, PrecondError>>()?;
            let mut grads = model.params.zeros_like();
            for (loss, g) in parts {
                total += loss;
                for (a, b) in grads.iter_mut().zip(&g) {
                    *a += b;
                }
            }
            if !total.is_finite() {
                return Err(PrecondError::Diverged(epoch));
            }
            adam.step(model.params.values_mut(), &grads).map_err(|_| PrecondError::Diverged(epoch))?;
        }
        let mean = total / data.len() as f64;
        log::debug!("precond epoch {epoch}: bce {mean:.4}");
        report.epoch_losses.push(mean);
        adam.end_epoch();
    }
    Ok((model, report))
}
