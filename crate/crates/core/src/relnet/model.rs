use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::RelationConfig;
use super::effects::{ACTION_INPUT_LEN, TARGET_LEN};
use super::RelnetError;
use crate::geom::VoxelPairInput;
use crate::nn::checkpoint::Checkpoint;
use crate::nn::{Cache, Conv3dSpec, LayerSpec, ParamSet, Sequential};

/// Voxel encoder producing a K-dim pair embedding, followed by a head that
/// maps embedding and action to the 9 effect predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationModel {
    pub config: RelationConfig,
    pub params: ParamSet,
    encoder: Sequential,
    head: Sequential,
}

fn encoder_specs(cfg: &RelationConfig) -> (usize, Vec<LayerSpec>) {
    let mut specs = Vec::new();
    let mut dims = cfg.resolution;
    let mut channels = 3;
    for &out in &cfg.conv_channels {
        let c = Conv3dSpec { in_channels: channels, out_channels: out, kernel: 3, stride: 2, padding: 1, in_dims: dims };
        dims = c.out_dims();
        channels = out;
        specs.push(LayerSpec::Conv3d(c));
        specs.push(LayerSpec::Relu);
    }
    specs.push(LayerSpec::Flatten);
    let flat = channels * dims.iter().product::<usize>();
    specs.push(LayerSpec::Fc { inputs: flat, outputs: cfg.embedding_dim });
    (3 * cfg.resolution.iter().product::<usize>(), specs)
}

fn head_specs(cfg: &RelationConfig) -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    let mut width = cfg.embedding_dim + ACTION_INPUT_LEN;
    for &h in &cfg.head_hidden {
        specs.push(LayerSpec::Fc { inputs: width, outputs: h });
        specs.push(LayerSpec::Relu);
        width = h;
    }
    specs.push(LayerSpec::Fc { inputs: width, outputs: TARGET_LEN });
    specs
}

impl RelationModel {
    pub fn new(config: RelationConfig, seed: u64) -> Result<Self, RelnetError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let (input_len, enc) = encoder_specs(&config);
        let encoder = Sequential::new(&mut params, "encoder", input_len, &enc, &mut rng)?;
        let head = Sequential::new(&mut params, "head", config.embedding_dim + ACTION_INPUT_LEN, &head_specs(&config), &mut rng)?;
        Ok(Self { config, params, encoder, head })
    }

    pub fn embedding_dim(&self) -> usize {
        self.config.embedding_dim
    }

    pub fn encoder(&self) -> &Sequential {
        &self.encoder
    }

    pub fn head(&self) -> &Sequential {
        &self.head
    }

    /// Dense encoder input for a pair view, after checking its grid.
    pub fn encoder_input(&self, view: &VoxelPairInput) -> Result<Vec<f64>, RelnetError> {
        let spec = &view.grid.spec;
        if spec.resolution != self.config.resolution || (spec.voxel_size - self.config.voxel_size).abs() > 1e-12 {
            return Err(RelnetError::GridMismatch {
                expected: format!("{:?} @ {}", self.config.resolution, self.config.voxel_size),
                got: format!("{:?} @ {}", spec.resolution, spec.voxel_size),
            });
        }
        Ok(view.to_dense())
    }

    pub fn encode(&self, view: &VoxelPairInput) -> Result<(Vec<f64>, Cache), RelnetError> {
        let x = self.encoder_input(view)?;
        Ok(self.encoder.forward(&self.params, &x)?)
    }

    pub fn embed(&self, view: &VoxelPairInput) -> Result<Vec<f64>, RelnetError> {
        Ok(self.encode(view)?.0)
    }

    pub fn head_input(embedding: &[f64], action: &[f64; ACTION_INPUT_LEN]) -> Vec<f64> {
        let mut x = embedding.to_vec();
        x.extend_from_slice(action);
        x
    }

    pub fn predict(&self, embedding: &[f64], action: &[f64; ACTION_INPUT_LEN]) -> Result<Vec<f64>, RelnetError> {
        Ok(self.head.forward(&self.params, &Self::head_input(embedding, action))?.0)
    }

    /// Embedding and effect predictions for one pair view and action.
    pub fn forward(&self, view: &VoxelPairInput, action: &[f64; ACTION_INPUT_LEN]) -> Result<(Vec<f64>, Vec<f64>), RelnetError> {
        let e = self.embed(view)?;
        let p = self.predict(&e, action)?;
        Ok((e, p))
    }

    pub fn zero_head(&mut self) {
        let ids: Vec<_> = self.params.ids().filter(|&id| self.params.name(id).starts_with("head.")).collect();
        for id in ids {
            self.params.block_mut(id).fill(0.0);
        }
    }

    /// Checkpoint whose config text records the architecture plus `extra`.
    pub fn to_checkpoint(&self, extra: &str) -> Checkpoint {
        Checkpoint::from_params(&self.params, &format!("{}{}", self.config.to_text(), extra))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, RelnetError> {
        let config = RelationConfig::from_text(&ck.config)?;
        let mut model = Self::new(config, 0)?;
        ck.apply_to(&mut model.params)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{pairwise_view, GridSpec, ObjectInstance, Vec3};
    use crate::minisim::{ActionKind, PerturbationAction};
    use crate::relnet::action_input;

    fn small() -> RelationConfig {
        RelationConfig { resolution: [8; 3], voxel_size: 0.04, embedding_dim: 6, conv_channels: vec![2, 3], head_hidden: vec![7] }
    }

    fn view(cfg: &RelationConfig) -> VoxelPairInput {
        let scene = [
            ObjectInstance::cuboid([0.08; 3], Vec3::zeros(), 0.0),
            ObjectInstance::sphere(0.04, Vec3::new(0.1, 0.0, 0.04)),
        ];
        pairwise_view(&scene, 0, 1, &GridSpec::centered(cfg.resolution, cfg.voxel_size)).unwrap()
    }

    #[test]
    fn embedding_is_action_independent() {
        let m = RelationModel::new(small(), 1).unwrap();
        let v = view(&m.config);
        let a1 = action_input(&PerturbationAction { direction: Vec3::x(), magnitude: 0.1, kind: ActionKind::Fixed });
        let a2 = action_input(&PerturbationAction { direction: -Vec3::z(), magnitude: 0.2, kind: ActionKind::Adaptive });
        let (e1, p1) = m.forward(&v, &a1).unwrap();
        let (e2, p2) = m.forward(&v, &a2).unwrap();
        assert_eq!(e1, e2);
        assert_ne!(p1, p2);
        assert_eq!(e1.len(), 6);
        assert_eq!(p1.len(), TARGET_LEN);
    }

    #[test]
    fn zero_head_predicts_zero() {
        let mut m = RelationModel::new(small(), 1).unwrap();
        m.zero_head();
        let v = view(&m.config);
        let (_, p) = m.forward(&v, &[0.1, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(p.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn grid_mismatch_rejected() {
        let m = RelationModel::new(small(), 1).unwrap();
        let other = RelationConfig { resolution: [10; 3], ..small() };
        assert!(matches!(m.embed(&view(&other)), Err(RelnetError::GridMismatch { .. })));
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = RelationModel::new(small(), 5).unwrap();
        let ck = m.to_checkpoint("digest=1\n");
        let back = RelationModel::from_checkpoint(&crate::nn::checkpoint::Checkpoint::from_bytes(&ck.to_bytes()).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
