use rand::Rng;

use super::config::PrecondConfig;
use super::graph::SceneGraph;
use super::PrecondError;
use crate::nn::{sum_rows_canonical, Cache, LayerSpec, ParamSet, Sequential};

const LAYERS: usize = 2;

/// Two stacked graph layers followed by a readout over the summed node and
/// edge embeddings.
///
/// Each layer computes an embedding for every directed edge from
/// `v_i ⊕ v_j ⊕ e_ij`, then updates node `i` from `v_i ⊕ Σ_j edge_ij` over
/// its outgoing edges. The second layer consumes the first layer's node and
/// edge embeddings. All sums are permutation-canonical.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphNetwork {
    edge_models: Vec<Sequential>,
    node_models: Vec<Sequential>,
    readout: Sequential,
    node_dim: usize,
    edge_dim: usize,
    width: usize,
}

fn mlp<R: Rng>(params: &mut ParamSet, prefix: &str, inputs: usize, hidden: usize, outputs: usize, rng: &mut R) -> Result<Sequential, PrecondError> {
    Ok(Sequential::new(
        params,
        prefix,
        inputs,
        &[LayerSpec::Fc { inputs, outputs: hidden }, LayerSpec::Relu, LayerSpec::Fc { inputs: hidden, outputs }],
        rng,
    )?)
}

struct LayerTrace {
    edge_cache: Vec<Cache>,
    node_cache: Vec<Cache>,
}

struct Trace {
    layers: Vec<LayerTrace>,
    readout_cache: Cache,
    logit: f64,
}

impl GraphNetwork {
    pub fn new<R: Rng>(params: &mut ParamSet, cfg: &PrecondConfig, rng: &mut R) -> Result<Self, PrecondError> {
        let w = cfg.gnn_width;
        let mut edge_models = Vec::new();
        let mut node_models = Vec::new();
        let (mut nd, mut ed) = (cfg.node_dim, cfg.edge_dim);
        for l in 0..LAYERS {
            edge_models.push(mlp(params, &format!("gnn.edge{l}"), 2 * nd + ed, w, w, rng)?);
            node_models.push(mlp(params, &format!("gnn.node{l}"), nd + w, w, w, rng)?);
            (nd, ed) = (w, w);
        }
        let readout = mlp(params, "gnn.readout", 2 * w, cfg.readout_hidden, 1, rng)?;
        Ok(Self { edge_models, node_models, readout, node_dim: cfg.node_dim, edge_dim: cfg.edge_dim, width: w })
    }

    fn check(&self, graph: &SceneGraph) -> Result<(), PrecondError> {
        graph.validate()?;
        if graph.node_dim != self.node_dim {
            return Err(PrecondError::Dimension { what: "node feature".into(), expected: self.node_dim, got: graph.node_dim });
        }
        if graph.edge_dim != self.edge_dim {
            return Err(PrecondError::Dimension { what: "edge feature".into(), expected: self.edge_dim, got: graph.edge_dim });
        }
        Ok(())
    }

    fn outgoing(graph: &SceneGraph) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); graph.n_nodes()];
        for (k, e) in graph.edges.iter().enumerate() {
            out[e.from].push(k);
        }
        out
    }

    fn run(&self, params: &ParamSet, graph: &SceneGraph) -> Result<Trace, PrecondError> {
        self.check(graph)?;
        let outgoing = Self::outgoing(graph);
        let mut nodes: Vec<Vec<f64>> = graph.nodes.iter().map(|n| n.feature.clone()).collect();
        let mut edges: Vec<Vec<f64>> = graph.edges.iter().map(|e| e.feature.clone()).collect();
        let mut layers = Vec::with_capacity(LAYERS);
        for l in 0..LAYERS {
            let mut edge_out = Vec::with_capacity(edges.len());
            let mut edge_cache = Vec::with_capacity(edges.len());
            for (k, e) in graph.edges.iter().enumerate() {
                let mut x = nodes[e.from].clone();
                x.extend_from_slice(&nodes[e.to]);
                x.extend_from_slice(&edges[k]);
                let (y, c) = self.edge_models[l].forward(params, &x)?;
                edge_out.push(y);
                edge_cache.push(c);
            }
            let mut node_out = Vec::with_capacity(nodes.len());
            let mut node_cache = Vec::with_capacity(nodes.len());
            for (i, v) in nodes.iter().enumerate() {
                let incident: Vec<Vec<f64>> = outgoing[i].iter().map(|&k| edge_out[k].clone()).collect();
                let mut x = v.clone();
                x.extend(sum_rows_canonical(&incident, self.width));
                let (y, c) = self.node_models[l].forward(params, &x)?;
                node_out.push(y);
                node_cache.push(c);
            }
            nodes = node_out;
            edges = edge_out;
            layers.push(LayerTrace { edge_cache, node_cache });
        }
        let mut pooled = sum_rows_canonical(&nodes, self.width);
        pooled.extend(sum_rows_canonical(&edges, self.width));
        let (out, readout_cache) = self.readout.forward(params, &pooled)?;
        Ok(Trace { layers, readout_cache, logit: out[0] })
    }

    pub fn logit(&self, params: &ParamSet, graph: &SceneGraph) -> Result<f64, PrecondError> {
        Ok(self.run(params, graph)?.logit)
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
        let trace = self.run(params, graph)?;
        let (value, dlogit) = loss(trace.logit);
        let w = self.width;
        let n = graph.n_nodes();
        let m = graph.edges.len();
        let dpooled = self.readout.backward(params, &trace.readout_cache, &[dlogit], grads, true)?.expect("input grad");
        // gradients with respect to the current layer's node and edge outputs
        let mut dnodes = vec![dpooled[..w].to_vec(); n];
        let mut dedges = vec![dpooled[w..].to_vec(); m];
        for l in (0..LAYERS).rev() {
            let t = &trace.layers[l];
            let (in_node, in_edge) = if l == 0 { (self.node_dim, self.edge_dim) } else { (w, w) };
            let mut dprev_nodes = vec![vec![0.0; in_node]; n];
            let mut dprev_edges = vec![vec![0.0; in_edge]; m];
            let mut dedge_out = dedges;
            for i in 0..n {
                let dx = self.node_models[l].backward(params, &t.node_cache[i], &dnodes[i], grads, true)?.expect("input grad");
                add(&mut dprev_nodes[i], &dx[..in_node]);
                for (k, e) in graph.edges.iter().enumerate() {
                    if e.from == i {
                        add(&mut dedge_out[k], &dx[in_node..]);
                    }
                }
            }
            for (k, e) in graph.edges.iter().enumerate() {
                if l == 0 {
                    self.edge_models[l].backward(params, &t.edge_cache[k], &dedge_out[k], grads, false)?;
                    continue;
                }
                let dx = self.edge_models[l].backward(params, &t.edge_cache[k], &dedge_out[k], grads, true)?.expect("input grad");
                add(&mut dprev_nodes[e.from], &dx[..in_node]);
                add(&mut dprev_nodes[e.to], &dx[in_node..2 * in_node]);
                add(&mut dprev_edges[k], &dx[2 * in_node..]);
            }
            dnodes = dprev_nodes;
            dedges = dprev_edges;
        }
        Ok((trace.logit, value))
    }
}

fn add(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}
