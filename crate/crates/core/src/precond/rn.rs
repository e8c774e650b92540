use rand::Rng;

use super::config::PrecondConfig;
use super::graph::SceneGraph;
use super::PrecondError;
use crate::nn::ops::lex;
use crate::nn::{sum_rows_canonical, LayerSpec, ParamSet, Sequential};

/// Relation network: a pair model applied to both directions of every
/// connected object pair, summed, then a scalar head.
///
/// The pair input is `(v_i ⊕ e_ij) ⊕ (v_j ⊕ e_ji)` with the two halves in
/// lexicographic order, so each unordered pair contributes exactly once and
/// the result does not depend on node numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationNetwork {
    pair_model: Sequential,
    head: Sequential,
    half: usize,
    pair_out: usize,
}

impl RelationNetwork {
    pub fn new<R: Rng>(params: &mut ParamSet, cfg: &PrecondConfig, rng: &mut R) -> Result<Self, PrecondError> {
        let half = cfg.node_dim + cfg.edge_dim;
        let pair_model = Sequential::new(
            params,
            "rn.pair",
            2 * half,
            &[
                LayerSpec::Fc { inputs: 2 * half, outputs: cfg.rn_hidden },
                LayerSpec::Relu,
                LayerSpec::Fc { inputs: cfg.rn_hidden, outputs: cfg.rn_out },
            ],
            rng,
        )?;
        let head = Sequential::new(
            params,
            "rn.head",
            cfg.rn_out,
            &[
                LayerSpec::Fc { inputs: cfg.rn_out, outputs: cfg.rn_g_hidden },
                LayerSpec::Relu,
                LayerSpec::Fc { inputs: cfg.rn_g_hidden, outputs: 1 },
            ],
            rng,
        )?;
        Ok(Self { pair_model, head, half, pair_out: cfg.rn_out })
    }

    fn pair_inputs(&self, graph: &SceneGraph) -> Result<Vec<Vec<f64>>, PrecondError> {
        graph.validate()?;
        if graph.node_dim + graph.edge_dim != self.half {
            return Err(PrecondError::Dimension {
                what: "relation network input".into(),
                expected: self.half,
                got: graph.node_dim + graph.edge_dim,
            });
        }
        let mut out = Vec::new();
        for e in &graph.edges {
            let reverse = graph.edge_feature(e.to, e.from).ok_or(PrecondError::MissingReverse(e.from, e.to))?;
            if e.from > e.to {
                continue;
            }
            let mut a = graph.nodes[e.from].feature.clone();
            a.extend_from_slice(&e.feature);
            let mut b = graph.nodes[e.to].feature.clone();
            b.extend_from_slice(reverse);
            if lex(&a, &b).is_gt() {
                std::mem::swap(&mut a, &mut b);
            }
            a.extend_from_slice(&b);
            out.push(a);
        }
        Ok(out)
    }

    pub fn logit(&self, params: &ParamSet, graph: &SceneGraph) -> Result<f64, PrecondError> {
        let mut rows = Vec::new();
        for x in self.pair_inputs(graph)? {
            rows.push(self.pair_model.forward(params, &x)?.0);
        }
        let pooled = sum_rows_canonical(&rows, self.pair_out);
        Ok(self.head.forward(params, &pooled)?.0[0])
    }

    /// Forward pass, then accumulates the gradient of `loss(logit)` into
    /// `grads`. `loss` returns the value and its derivative in the logit.
    pub fn backprop(
        &self,
        params: &ParamSet,
        graph: &SceneGraph,
        loss: impl FnOnce(f64) -> (f64, f64),
        grads: &mut [f64],
    ) -> Result<(f64, f64), PrecondError> {
        let mut rows = Vec::new();
        let mut caches = Vec::new();
        for x in self.pair_inputs(graph)? {
            let (y, c) = self.pair_model.forward(params, &x)?;
            rows.push(y);
            caches.push(c);
        }
        let pooled = sum_rows_canonical(&rows, self.pair_out);
        let (out, head_cache) = self.head.forward(params, &pooled)?;
        let (value, dlogit) = loss(out[0]);
        let dpooled = self.head.backward(params, &head_cache, &[dlogit], grads, true)?.expect("input grad");
        for c in &caches {
            self.pair_model.backward(params, c, &dpooled, grads, false)?;
        }
        Ok((out[0], value))
    }
}
