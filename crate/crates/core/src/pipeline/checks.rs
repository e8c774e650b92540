use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::experiment::generate_interactions;
use super::PipelineError;
use crate::geom::{GridSpec, VoxelPairInput};
use crate::nn::{gradcheck, gradcheck_sequential, Conv3dSpec, GradcheckConfig, GradcheckReport, LayerSpec, ParamSet, Sequential};
use crate::precond::{Edge, EdgeSource, ModelKind, Node, PrecondConfig, PrecondModel, SceneGraph};
use crate::relnet::{combined_loss, ContrastiveConfig, LossWeights, PreparedRecord, RelationConfig, RelationModel};

/// One line of the gradient-check table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckRow {
    pub name: String,
    pub max_error: f64,
    pub checked: usize,
    pub kinks: usize,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradcheckRow {
    fn new(name: &str, report: &GradcheckReport, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            max_error: report.max_error,
            checked: report.checked,
            kinks: report.kinks,
            tolerance,
            passed: report.passed,
        }
    }
}

/// Entries sampled per parameter block in the larger models.
const SAMPLED_PER_BLOCK: usize = 40;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn check_stack(name: &str, input_len: usize, specs: &[LayerSpec], input: Option<Vec<f64>>, seed: u64) -> Result<GradcheckRow, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::new();
    let net = Sequential::new(&mut params, name, input_len, specs, &mut rng)?;
    let x = input.unwrap_or_else(|| random_vec(&mut rng, input_len));
    let cfg = GradcheckConfig { seed, ..GradcheckConfig::default() };
    Ok(GradcheckRow::new(name, &gradcheck_sequential(&net, &mut params, &x, &cfg)?, cfg.tolerance))
}

fn conv(in_channels: usize, out_channels: usize, in_dims: [usize; 3]) -> Conv3dSpec {
    Conv3dSpec { in_channels, out_channels, kernel: 3, stride: 2, padding: 1, in_dims }
}

fn relation_row(seed: u64) -> Result<GradcheckRow, PipelineError> {
    let config = RelationConfig { resolution: [8; 3], voxel_size: 0.04, embedding_dim: 16, ..RelationConfig::desk() };
    let model = RelationModel::new(config, seed)?;
    let grid = GridSpec::centered([8; 3], 0.04);
    let records = generate_interactions(6, seed, &grid)?;
    let prepared = records.iter().map(PreparedRecord::new).collect::<Result<Vec<_>, _>>()?;
    let views: Vec<&VoxelPairInput> = records.iter().map(|r| &r.pair_view).collect();
    let recs: Vec<&PreparedRecord> = prepared.iter().collect();
    let contrastive = ContrastiveConfig::default();
    let weights = LossWeights::default();
    let cfg = GradcheckConfig { seed, max_per_block: Some(SAMPLED_PER_BLOCK), ..GradcheckConfig::default() };
    let mut params = model.params.clone();
    let report = gradcheck(
        &mut params,
        |p| {
            let mut m = model.clone();
            m.params = p.clone();
            let (comps, grads) = combined_loss(&m, &views, &recs, &contrastive, &weights)
                .map_err(|e| crate::nn::NnError::Config(e.to_string()))?;
            Ok((comps.total, grads))
        },
        &cfg,
    )?;
    Ok(GradcheckRow::new("relation-model-8", &report, cfg.tolerance))
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> SceneGraph {
    let nodes = (0..n).map(|i| Node { object_id: i, feature: random_vec(rng, dim) }).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                edges.push(Edge { from: i, to: j, feature: random_vec(rng, dim) });
            }
        }
    }
    SceneGraph { nodes, edges, edge_source: EdgeSource::Learned, node_dim: dim, edge_dim: dim }
}

fn precond_row(kind: ModelKind, seed: u64) -> Result<GradcheckRow, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = PrecondConfig { gnn_width: 8, readout_hidden: 6, rn_hidden: 8, rn_out: 5, rn_g_hidden: 4, ..PrecondConfig::full(kind, 4, 4) };
    let model = PrecondModel::new(config, seed)?;
    let graph = random_graph(&mut rng, 4, 4);
    let cfg = GradcheckConfig { seed, ..GradcheckConfig::default() };
    let mut params = model.params.clone();
    let report = gradcheck(
        &mut params,
        |p| {
            let mut m = model.clone();
            m.params = p.clone();
            let mut grads = p.zeros_like();
            let (_, loss) = m
                .backprop(&graph, |z| crate::nn::loss::bce_with_logits(z, 1.0), &mut grads)
                .map_err(|e| crate::nn::NnError::Config(e.to_string()))?;
            Ok((loss, grads))
        },
        &cfg,
    )?;
    Ok(GradcheckRow::new(&format!("precond-{}", kind.name()), &report, cfg.tolerance))
}

/// Finite-difference checks of every layer kind, the relation model on an
/// 8^3 grid and both precondition networks.
pub fn gradcheck_suite(seed: u64) -> Result<Vec<GradcheckRow>, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sparse: Vec<f64> = (0..3 * 512).map(|i| if i % 97 == 5 { rng.random_range(0.5..1.0) } else { 0.0 }).collect();
    let c1 = conv(2, 3, [5, 4, 6]);
    let c2 = conv(3, 4, [8; 3]);
    let c3 = conv(2, 3, [4; 3]);
    Ok(vec![
        check_stack("fc", 5, &[LayerSpec::Fc { inputs: 5, outputs: 4 }], None, seed)?,
        check_stack(
            "mlp-relu",
            5,
            &[
                LayerSpec::Fc { inputs: 5, outputs: 6 },
                LayerSpec::Relu,
                LayerSpec::Fc { inputs: 6, outputs: 4 },
                LayerSpec::Relu,
                LayerSpec::Fc { inputs: 4, outputs: 3 },
            ],
            None,
            seed,
        )?,
        check_stack("conv3d", c1.in_len(), &[LayerSpec::Conv3d(c1)], None, seed)?,
        check_stack("conv3d-sparse", c2.in_len(), &[LayerSpec::Conv3d(c2)], Some(sparse), seed)?,
        check_stack(
            "conv3d-flatten-fc",
            c3.in_len(),
            &[LayerSpec::Conv3d(c3), LayerSpec::Relu, LayerSpec::Flatten, LayerSpec::Fc { inputs: c3.out_len(), outputs: 2 }],
            None,
            seed,
        )?,
        relation_row(seed)?,
        precond_row(ModelKind::Rn, seed)?,
        precond_row(ModelKind::Gnn, seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_gradient_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = ParamSet::new();
        let net = Sequential::new(&mut params, "fc", 3, &[LayerSpec::Fc { inputs: 3, outputs: 2 }], &mut rng).unwrap();
        let x = [0.5, -1.0, 2.0];
        let report = gradcheck(
            &mut params,
            |p| {
                let (y, cache) = net.forward(p, &x)?;
                let mut g = p.zeros_like();
                net.backward(p, &cache, &[1.0, 1.0], &mut g, false)?;
                g[0] += 0.1;
                Ok((y.iter().sum(), g))
            },
            &GradcheckConfig::default(),
        )
        .unwrap();
        assert!(!report.passed);
    }
}
