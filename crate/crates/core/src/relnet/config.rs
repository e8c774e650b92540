use super::RelnetError;

/// Thresholds for scene similarity and the triplet margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastiveConfig {
    pub dp_ratio_sim: f64,
    pub dp_ratio_diff: f64,
    pub dtheta_sim: f64,
    pub dtheta_diff: f64,
    pub gamma: f64,
    /// Fixed actions are comparable only when their magnitudes differ by less.
    pub fixed_action_compare_threshold: f64,
}

impl Default for ContrastiveConfig {
    fn default() -> Self {
        Self {
            dp_ratio_sim: 0.2,
            dp_ratio_diff: 0.21,
            dtheta_sim: 0.004,
            dtheta_diff: 0.008,
            gamma: 2.0,
            fixed_action_compare_threshold: 0.04,
        }
    }
}

impl ContrastiveConfig {
    pub fn validate(&self) -> Result<(), RelnetError> {
        if !(self.dp_ratio_sim < self.dp_ratio_diff && self.dtheta_sim < self.dtheta_diff) {
            return Err(RelnetError::Config("similarity thresholds must be below dissimilarity thresholds".into()));
        }
        if !(self.gamma > 0.0) {
            return Err(RelnetError::Config(format!("gamma {} must be positive", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub pos_cont: f64,
    pub orient_cont: f64,
    pub pos: f64,
    pub orient: f64,
    pub contact: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { pos_cont: 2.0, orient_cont: 2.0, pos: 1.0, orient: 10.0, contact: 1.0 }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self { pos_cont: 0.0, orient_cont: 0.0, pos: 0.0, orient: 0.0, contact: 0.0 }
    }

    pub fn validate(&self) -> Result<(), RelnetError> {
        let all = [self.pos_cont, self.orient_cont, self.pos, self.orient, self.contact];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(RelnetError::Config("loss weights must be finite and non-negative".into()))
        }
    }
}

/// Architecture of the relation model.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationConfig {
    pub resolution: [usize; 3],
    pub voxel_size: f64,
    pub embedding_dim: usize,
    pub conv_channels: Vec<usize>,
    pub head_hidden: Vec<usize>,
}

impl RelationConfig {
    pub fn desk() -> Self {
        Self {
            resolution: [32; 3],
            voxel_size: 0.02,
            embedding_dim: 32,
            conv_channels: vec![8, 16, 32],
            head_hidden: vec![128, 64],
        }
    }

    pub fn full() -> Self {
        Self { resolution: [100; 3], voxel_size: 0.01, embedding_dim: 256, ..Self::desk() }
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        format!(
            "resolution={}\nvoxel_size={}\nembedding_dim={}\nconv_channels={}\nhead_hidden={}\n",
            join(&self.resolution),
            self.voxel_size,
            self.embedding_dim,
            join(&self.conv_channels),
            join(&self.head_hidden)
        )
    }

    pub fn from_text(text: &str) -> Result<Self, RelnetError> {
        let bad = |m: String| RelnetError::Config(m);
        let list = |v: &str| -> Result<Vec<usize>, RelnetError> {
            v.split(',').filter(|s| !s.is_empty()).map(|s| s.trim().parse().map_err(|_| bad(format!("bad list {v}")))).collect()
        };
        let mut cfg = Self { resolution: [0; 3], voxel_size: 0.0, embedding_dim: 0, conv_channels: vec![], head_hidden: vec![] };
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("bad line {line}")))?;
            match k.trim() {
                "resolution" => {
                    let r = list(v)?;
                    cfg.resolution = r.try_into().map_err(|_| bad("resolution needs 3 values".into()))?;
                }
                "voxel_size" => cfg.voxel_size = v.trim().parse().map_err(|_| bad(format!("bad voxel_size {v}")))?,
                "embedding_dim" => cfg.embedding_dim = v.trim().parse().map_err(|_| bad(format!("bad embedding_dim {v}")))?,
                "conv_channels" => cfg.conv_channels = list(v)?,
                "head_hidden" => cfg.head_hidden = list(v)?,
                _ => {}
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), RelnetError> {
        if self.resolution.contains(&0) || !(self.voxel_size > 0.0) || self.embedding_dim == 0 {
            return Err(RelnetError::Config(format!("invalid relation model config {self:?}")));
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) || self.head_hidden.contains(&0) {
            return Err(RelnetError::Config("layer widths must be positive".into()));
        }
        Ok(())
    }
}
