use super::PrecondError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Rn,
    Gnn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Rn => "rn",
            ModelKind::Gnn => "gnn",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "rn" => Some(ModelKind::Rn),
            "gnn" => Some(ModelKind::Gnn),
            _ => None,
        }
    }
}

/// Architecture of a precondition classifier for graphs with the given
/// node and edge feature widths.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecondConfig {
    pub kind: ModelKind,
    pub node_dim: usize,
    pub edge_dim: usize,
    /// Width of the graph network's edge and node models.
    pub gnn_width: usize,
    pub readout_hidden: usize,
    pub rn_hidden: usize,
    pub rn_out: usize,
    pub rn_g_hidden: usize,
}

impl PrecondConfig {
    pub fn full(kind: ModelKind, node_dim: usize, edge_dim: usize) -> Self {
        Self { kind, node_dim, edge_dim, gnn_width: 128, readout_hidden: 64, rn_hidden: 128, rn_out: 32, rn_g_hidden: 16 }
    }

    /// Graph-network widths halved for the 32-dim desk embeddings.
    pub fn desk(kind: ModelKind, node_dim: usize, edge_dim: usize) -> Self {
        Self { gnn_width: 64, readout_hidden: 32, ..Self::full(kind, node_dim, edge_dim) }
    }

    pub fn to_text(&self) -> String {
        format!(
            "model={}\nnode_dim={}\nedge_dim={}\ngnn_width={}\nreadout_hidden={}\nrn_hidden={}\nrn_out={}\nrn_g_hidden={}\n",
            self.kind.name(),
            self.node_dim,
            self.edge_dim,
            self.gnn_width,
            self.readout_hidden,
            self.rn_hidden,
            self.rn_out,
            self.rn_g_hidden
        )
    }

    /// Parses [`PrecondConfig::to_text`] output; unrelated keys are ignored
    /// so checkpoints may carry extra metadata.
    pub fn from_text(text: &str) -> Result<Self, PrecondError> {
        let bad = |m: String| PrecondError::Config(m);
        let mut cfg = Self::full(ModelKind::Gnn, 0, 0);
        let mut kind = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("bad line {line}")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = || v.parse::<usize>().map_err(|_| bad(format!("bad value for {k}: {v}")));
            match k {
                "model" => kind = Some(ModelKind::from_name(v).ok_or_else(|| bad(format!("unknown model {v}")))?),
                "node_dim" => cfg.node_dim = num()?,
                "edge_dim" => cfg.edge_dim = num()?,
                "gnn_width" => cfg.gnn_width = num()?,
                "readout_hidden" => cfg.readout_hidden = num()?,
                "rn_hidden" => cfg.rn_hidden = num()?,
                "rn_out" => cfg.rn_out = num()?,
                "rn_g_hidden" => cfg.rn_g_hidden = num()?,
                _ => {}
            }
        }
        cfg.kind = kind.ok_or_else(|| bad("missing model".into()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PrecondError> {
        let widths = [self.gnn_width, self.readout_hidden, self.rn_hidden, self.rn_out, self.rn_g_hidden];
        if widths.contains(&0) {
            return Err(PrecondError::Config("layer widths must be positive".into()));
        }
        if self.node_dim + self.edge_dim == 0 {
            return Err(PrecondError::Config("graphs carry no features".into()));
        }
        Ok(())
    }
}
