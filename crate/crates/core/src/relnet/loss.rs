use rayon::prelude::*;

use super::config::{ContrastiveConfig, LossWeights};
use super::effects::{EffectSummary, PreparedRecord};
use super::mining::{mine_triplets, Channel};
use super::model::RelationModel;
use super::RelnetError;
use crate::geom::VoxelPairInput;
use crate::nn::loss::{l1, mse, triplet};

/// Scenes per gradient accumulation chunk. Fixed so that the reduction
/// order does not depend on the thread count.
const GRAD_CHUNK: usize = 16;

/// Unweighted loss components of one batch and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossComponents {
    pub pos_cont: f64,
    pub orient_cont: f64,
    pub pos: f64,
    pub orient: f64,
    pub contact: f64,
    pub total: f64,
    pub pos_triplets: usize,
    pub orient_triplets: usize,
}

impl LossComponents {
    fn check(&self) -> Result<(), RelnetError> {
        let parts = [
            ("position contrastive", self.pos_cont),
            ("orientation contrastive", self.orient_cont),
            ("position", self.pos),
            ("orientation", self.orient),
            ("contact", self.contact),
        ];
        for (name, v) in parts {
            if !v.is_finite() {
                return Err(RelnetError::NonFiniteLoss(name.into()));
            }
        }
        Ok(())
    }

    pub(crate) fn add_scaled(&mut self, other: &Self, s: f64) {
        self.pos_cont += s * other.pos_cont;
        self.orient_cont += s * other.orient_cont;
        self.pos += s * other.pos;
        self.orient += s * other.orient;
        self.contact += s * other.contact;
        self.total += s * other.total;
        self.pos_triplets += other.pos_triplets;
        self.orient_triplets += other.orient_triplets;
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Weighted sum of the two triplet losses (squared Euclidean embedding
/// distances, averaged over mined triplets) and the predictive losses
/// (MSE on voxel displacement, L1 on orientation change, MSE on the contact
/// mean where a contact exists). Returns the components and the gradient
/// with respect to all model parameters.
pub fn combined_loss(
    model: &RelationModel,
    views: &[&VoxelPairInput],
    records: &[&PreparedRecord],
    cfg: &ContrastiveConfig,
    weights: &LossWeights,
) -> Result<(LossComponents, Vec<f64>), RelnetError> {
    if views.is_empty() || views.len() != records.len() {
        return Err(RelnetError::Data(format!("batch of {} views and {} records", views.len(), records.len())));
    }
    let n = views.len();
    let k = model.embedding_dim();
    let encoded = views.par_iter().map(|v| model.encode(v)).collect::<Result<Vec<_>, _>>()?;

    let summaries: Vec<EffectSummary> = records.iter().map(|r| r.summary.clone()).collect();
    let triplets = mine_triplets(&summaries, cfg);
    let mut comps = LossComponents::default();
    comps.pos_triplets = triplets.iter().filter(|t| t.channel == Channel::Position).count();
    comps.orient_triplets = triplets.len() - comps.pos_triplets;
    let mut emb_grad = vec![vec![0.0; k]; n];
    for t in &triplets {
        let (count, w) = match t.channel {
            Channel::Position => (comps.pos_triplets, weights.pos_cont),
            Channel::Orientation => (comps.orient_triplets, weights.orient_cont),
        };
        let (ea, ep, en) = (&encoded[t.anchor].0, &encoded[t.positive].0, &encoded[t.negative].0);
        let (l, g_ap, g_an) = triplet(sq_dist(ea, ep), sq_dist(ea, en), cfg.gamma)?;
        let l = l / count as f64;
        match t.channel {
            Channel::Position => comps.pos_cont += l,
            Channel::Orientation => comps.orient_cont += l,
        }
        if g_ap == 0.0 && g_an == 0.0 {
            continue;
        }
        let s = w / count as f64;
        for d in 0..k {
            let dap = 2.0 * (ea[d] - ep[d]) * g_ap * s;
            let dan = 2.0 * (ea[d] - en[d]) * g_an * s;
            emb_grad[t.anchor][d] += dap + dan;
            emb_grad[t.positive][d] -= dap;
            emb_grad[t.negative][d] -= dan;
        }
    }

    let n_pairs: usize = records.iter().map(|r| r.actions.len()).sum();
    let n_contact: usize = records.iter().map(|r| r.contact_present.iter().filter(|&&b| b).count()).sum();
    let inv_pairs = 1.0 / n_pairs.max(1) as f64;
    let inv_contact = 1.0 / n_contact.max(1) as f64;

    let chunks: Vec<(LossComponents, Vec<f64>)> = (0..n)
        .collect::<Vec<_>>()
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| -> Result<(LossComponents, Vec<f64>), RelnetError> {
            let mut grads = model.params.zeros_like();
            let mut part = LossComponents::default();
            for &i in chunk {
                let rec = records[i];
                let emb = &encoded[i].0;
                let mut ge = emb_grad[i].clone();
                for (j, action) in rec.actions.iter().enumerate() {
                    let x = RelationModel::head_input(emb, action);
                    let (pred, cache) = model.head().forward(&model.params, &x)?;
                    let t = &rec.targets[j];
                    let (vp, gp) = mse(&pred[0..3], &t[0..3]);
                    let (vo, go) = l1(&pred[3..6], &t[3..6]);
                    part.pos += vp * inv_pairs;
                    part.orient += vo * inv_pairs;
                    let mut up = [0.0; 9];
                    for d in 0..3 {
                        up[d] = gp[d] * weights.pos * inv_pairs;
                        up[3 + d] = go[d] * weights.orient * inv_pairs;
                    }
                    if rec.contact_present[j] {
                        let (vc, gc) = mse(&pred[6..9], &t[6..9]);
                        part.contact += vc * inv_contact;
                        for d in 0..3 {
                            up[6 + d] = gc[d] * weights.contact * inv_contact;
                        }
                    }
                    let dx = model.head().backward(&model.params, &cache, &up, &mut grads, true)?.expect("input grad");
                    for d in 0..k {
                        ge[d] += dx[d];
                    }
                }
                model.encoder().backward(&model.params, &encoded[i].1, &ge, &mut grads, false)?;
            }
            Ok((part, grads))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut grads = model.params.zeros_like();
    for (part, g) in chunks {
        comps.pos += part.pos;
        comps.orient += part.orient;
        comps.contact += part.contact;
        for (a, b) in grads.iter_mut().zip(&g) {
            *a += b;
        }
    }
    comps.total = weights.pos_cont * comps.pos_cont
        + weights.orient_cont * comps.orient_cont
        + weights.pos * comps.pos
        + weights.orient * comps.orient
        + weights.contact * comps.contact;
    comps.check()?;
    Ok((comps, grads))
}
