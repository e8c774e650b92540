use serde::{Deserialize, Serialize};

use super::features::FeatureSet;
use super::PrecondError;
use crate::geom::ObjectInstance;

/// Objects closer than this (centre to centre, metres) share an edge in
/// sparse graphs.
pub const SPARSE_EDGE_DISTANCE: f64 = 0.1;

/// Width of the per-node task label (removal target / other).
pub const TASK_LABEL_LEN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeSource {
    Learned,
    Discrete26,
    MeanPos,
    BBox,
}

impl EdgeSource {
    pub const ALL: [EdgeSource; 4] = [EdgeSource::Learned, EdgeSource::Discrete26, EdgeSource::MeanPos, EdgeSource::BBox];

    pub fn name(self) -> &'static str {
        match self {
            EdgeSource::Learned => "learned",
            EdgeSource::Discrete26 => "discrete26",
            EdgeSource::MeanPos => "meanpos",
            EdgeSource::BBox => "bbox",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Whether features live on edges (otherwise on nodes).
    pub fn is_pairwise(self) -> bool {
        matches!(self, EdgeSource::Learned | EdgeSource::Discrete26)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeMode {
    Dense,
    Sparse,
}

impl EdgeMode {
    pub fn name(self) -> &'static str {
        match self {
            EdgeMode::Dense => "dense",
            EdgeMode::Sparse => "sparse",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "dense" => Some(EdgeMode::Dense),
            "sparse" => Some(EdgeMode::Sparse),
            _ => None,
        }
    }
}

/// Task marks appended to node features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeLabels {
    /// No task label (sweeping).
    None,
    /// One node is the block to be removed; all others share the second label.
    RemovalTarget(usize),
}

impl NodeLabels {
    pub fn width(self) -> usize {
        match self {
            NodeLabels::None => 0,
            NodeLabels::RemovalTarget(_) => TASK_LABEL_LEN,
        }
    }

    fn append(self, node: usize, feature: &mut Vec<f64>) {
        if let NodeLabels::RemovalTarget(t) = self {
            feature.extend_from_slice(if node == t { &[1.0, 0.0] } else { &[0.0, 1.0] });
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub object_id: usize,
    pub feature: Vec<f64>,
}

/// Directed edge from `from` (anchor) to `to` (referrant).
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub feature: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub edge_source: EdgeSource,
    pub node_dim: usize,
    pub edge_dim: usize,
}

impl SceneGraph {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Checks feature widths and edge endpoints.
    pub fn validate(&self) -> Result<(), PrecondError> {
        for n in &self.nodes {
            if n.feature.len() != self.node_dim {
                return Err(PrecondError::Dimension { what: "node feature".into(), expected: self.node_dim, got: n.feature.len() });
            }
        }
        for e in &self.edges {
            if e.feature.len() != self.edge_dim {
                return Err(PrecondError::Dimension { what: "edge feature".into(), expected: self.edge_dim, got: e.feature.len() });
            }
            if e.from == e.to || e.from >= self.nodes.len() || e.to >= self.nodes.len() {
                return Err(PrecondError::Dimension { what: "edge endpoint".into(), expected: self.nodes.len(), got: e.from.max(e.to) });
            }
        }
        Ok(())
    }

    /// Relabels node `i` as `perm[i]`, keeping every feature attached to
    /// the same object.
    pub fn permuted(&self, perm: &[usize]) -> SceneGraph {
        assert_eq!(perm.len(), self.nodes.len());
        let mut nodes = self.nodes.clone();
        for (i, n) in self.nodes.iter().enumerate() {
            nodes[perm[i]] = n.clone();
        }
        let mut edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| Edge { from: perm[e.from], to: perm[e.to], feature: e.feature.clone() })
            .collect();
        edges.sort_by_key(|e| (e.from, e.to));
        SceneGraph { nodes, edges, ..self.clone() }
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.iter().any(|e| e.from == from && e.to == to)
    }

    pub fn edge_feature(&self, from: usize, to: usize) -> Option<&[f64]> {
        self.edges.iter().find(|e| e.from == from && e.to == to).map(|e| e.feature.as_slice())
    }
}

/// Builds the scene graph for `objects`. Dense graphs connect every ordered
/// pair; sparse graphs keep pairs whose object centres are closer than
/// [`SPARSE_EDGE_DISTANCE`]. Pairwise features go on edges with zero node
/// features of the same width; per-node features go on nodes with empty
/// edge features. Task labels are appended to every node feature.
pub fn build_graph(
    objects: &[ObjectInstance],
    features: &FeatureSet,
    mode: EdgeMode,
    labels: NodeLabels,
) -> Result<SceneGraph, PrecondError> {
    let n = objects.len();
    if let NodeLabels::RemovalTarget(t) = labels {
        if t >= n {
            return Err(PrecondError::MissingNode(t));
        }
    }
    let mut nodes = Vec::with_capacity(n);
    for i in 0..n {
        let mut feature = match features {
            FeatureSet::Pairwise { dim, .. } => vec![0.0; *dim],
            FeatureSet::PerNode { dim, nodes, .. } => {
                let f = nodes.get(i).ok_or(PrecondError::MissingNode(i))?;
                if f.len() != *dim {
                    return Err(PrecondError::Dimension { what: format!("node {i} feature"), expected: *dim, got: f.len() });
                }
                f.clone()
            }
        };
        labels.append(i, &mut feature);
        nodes.push(Node { object_id: i, feature });
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if mode == EdgeMode::Sparse && (objects[i].position - objects[j].position).norm() >= SPARSE_EDGE_DISTANCE {
                continue;
            }
            let feature = match features {
                FeatureSet::Pairwise { pairs, scene_id, dim, .. } => {
                    let f = pairs
                        .get(&(i, j))
                        .ok_or(PrecondError::MissingPair { scene_id: *scene_id, anchor: i, referrant: j })?;
                    if f.len() != *dim {
                        return Err(PrecondError::Dimension { what: format!("pair ({i}, {j}) feature"), expected: *dim, got: f.len() });
                    }
                    f.clone()
                }
                FeatureSet::PerNode { .. } => Vec::new(),
            };
            edges.push(Edge { from: i, to: j, feature });
        }
    }
    let (node_dim, edge_dim) = match features {
        FeatureSet::Pairwise { dim, .. } => (dim + labels.width(), *dim),
        FeatureSet::PerNode { dim, .. } => (dim + labels.width(), 0),
    };
    Ok(SceneGraph { nodes, edges, edge_source: features.source(), node_dim, edge_dim })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use std::collections::BTreeMap;

    fn row(n: usize, spacing: f64) -> Vec<ObjectInstance> {
        (0..n).map(|i| ObjectInstance::cuboid([0.04; 3], Vec3::new(i as f64 * spacing, 0.0, 0.02), 0.0)).collect()
    }

    fn toy_pairs(n: usize) -> FeatureSet {
        let mut pairs = BTreeMap::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    pairs.insert((i, j), vec![i as f64, j as f64]);
                }
            }
        }
        FeatureSet::Pairwise { source: EdgeSource::Learned, dim: 2, pairs, scene_id: 7 }
    }

    #[test]
    fn dense_four_objects_has_twelve_edges() {
        let g = build_graph(&row(4, 0.05), &toy_pairs(4), EdgeMode::Dense, NodeLabels::None).unwrap();
        assert_eq!(g.edges.len(), 12);
        assert!(g.edges.iter().all(|e| e.from != e.to));
        assert!(g.nodes.iter().all(|n| n.feature == vec![0.0, 0.0]));
        assert_eq!(g.edge_feature(2, 1), Some(&[2.0, 1.0][..]));
        g.validate().unwrap();
    }

    #[test]
    fn sparse_far_apart_has_no_edges() {
        let g = build_graph(&row(4, 0.15), &toy_pairs(4), EdgeMode::Sparse, NodeLabels::None).unwrap();
        assert!(g.edges.is_empty());
        // neighbours at 0.05 m are kept, next-but-one at 0.1 m are not
        let g = build_graph(&row(3, 0.05), &toy_pairs(3), EdgeMode::Sparse, NodeLabels::None).unwrap();
        let pairs: Vec<_> = g.edges.iter().map(|e| (e.from, e.to)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 0), (1, 2), (2, 1)]);
    }

    #[test]
    fn removal_target_gets_its_own_label() {
        let g = build_graph(&row(3, 0.05), &toy_pairs(3), EdgeMode::Dense, NodeLabels::RemovalTarget(1)).unwrap();
        assert_eq!(g.node_dim, 4);
        assert_eq!(g.nodes[1].feature[2..], [1.0, 0.0]);
        assert_eq!(g.nodes[0].feature[2..], [0.0, 1.0]);
        assert_eq!(g.nodes[2].feature[2..], [0.0, 1.0]);
    }

    #[test]
    fn missing_pair_is_named() {
        let FeatureSet::Pairwise { mut pairs, .. } = toy_pairs(3) else { unreachable!() };
        pairs.remove(&(2, 0));
        let fs = FeatureSet::Pairwise { source: EdgeSource::Learned, dim: 2, pairs, scene_id: 7 };
        let err = build_graph(&row(3, 0.05), &fs, EdgeMode::Dense, NodeLabels::None).unwrap_err();
        assert_eq!(err, PrecondError::MissingPair { scene_id: 7, anchor: 2, referrant: 0 });
        assert!(err.to_string().contains("(2, 0)"));
        // the sparse graph never needs that pair
        assert!(build_graph(&row(3, 0.05), &fs, EdgeMode::Sparse, NodeLabels::None).is_ok());
    }

    #[test]
    fn per_node_features_sit_on_nodes() {
        let fs = FeatureSet::PerNode { source: EdgeSource::MeanPos, dim: 3, nodes: vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]] };
        let g = build_graph(&row(2, 0.05), &fs, EdgeMode::Dense, NodeLabels::None).unwrap();
        assert_eq!(g.edge_dim, 0);
        assert_eq!(g.nodes[1].feature, vec![4.0, 5.0, 6.0]);
        assert_eq!(g.edges.len(), 2);
    }

    #[test]
    fn permutation_moves_features_with_objects() {
        let g = build_graph(&row(3, 0.05), &toy_pairs(3), EdgeMode::Dense, NodeLabels::RemovalTarget(0)).unwrap();
        let p = g.permuted(&[2, 0, 1]);
        assert_eq!(p.nodes[2].feature, g.nodes[0].feature);
        assert_eq!(p.edge_feature(2, 0), g.edge_feature(0, 1));
    }
}
