use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelKind, PrecondConfig};
use super::gnn::GraphNetwork;
use super::graph::SceneGraph;
use super::rn::RelationNetwork;
use super::PrecondError;
use crate::nn::checkpoint::Checkpoint;
use crate::nn::ParamSet;

#[derive(Debug, Clone, PartialEq)]
enum Net {
    Rn(RelationNetwork),
    Gnn(GraphNetwork),
}

/// A precondition classifier with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecondModel {
    pub config: PrecondConfig,
    pub params: ParamSet,
    net: Net,
}

impl PrecondModel {
    pub fn new(config: PrecondConfig, seed: u64) -> Result<Self, PrecondError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let net = match config.kind {
            ModelKind::Rn => Net::Rn(RelationNetwork::new(&mut params, &config, &mut rng)?),
            ModelKind::Gnn => Net::Gnn(GraphNetwork::new(&mut params, &config, &mut rng)?),
        };
        Ok(Self { config, params, net })
    }

    pub fn logit(&self, graph: &SceneGraph) -> Result<f64, PrecondError> {
        match &self.net {
            Net::Rn(n) => n.logit(&self.params, graph),
            Net::Gnn(n) => n.logit(&self.params, graph),
        }
    }

    /// Returns `(logit, loss)` and adds d loss / d params into `grads`.
    pub fn backprop(
        &self,
        graph: &SceneGraph,
        loss: impl FnOnce(f64) -> (f64, f64),
        grads: &mut [f64],
    ) -> Result<(f64, f64), PrecondError> {
        match &self.net {
            Net::Rn(n) => n.backprop(&self.params, graph, loss, grads),
            Net::Gnn(n) => n.backprop(&self.params, graph, loss, grads),
        }
    }

    pub fn to_checkpoint(&self, extra: &str) -> Checkpoint {
        Checkpoint::from_params(&self.params, &format!("{}{}", self.config.to_text(), extra))
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, PrecondError> {
        let mut model = Self::new(PrecondConfig::from_text(&ck.config)?, 0)?;
        ck.apply_to(&mut model.params)?;
        Ok(model)
    }
}
