use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::model::RelationModel;
use super::RelnetError;
use crate::geom::{pairwise_view, GridSpec, ObjectInstance};

/// Embeddings of all ordered pairs `(anchor, referrant)` of a scene, in
/// lexicographic pair order. The model is used frozen.
pub fn embed_scene(model: &RelationModel, objects: &[ObjectInstance]) -> Result<Vec<((usize, usize), Vec<f64>)>, RelnetError> {
    if objects.len() < 2 {
        return Err(RelnetError::Data(format!("scene needs at least 2 objects, got {}", objects.len())));
    }
    let grid = GridSpec::centered(model.config.resolution, model.config.voxel_size);
    let mut out = Vec::with_capacity(objects.len() * (objects.len() - 1));
    for i in 0..objects.len() {
        for j in 0..objects.len() {
            if i != j {
                let view = pairwise_view(objects, i, j, &grid)?;
                out.push(((i, j), model.embed(&view)?));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EmbeddingKey {
    pub scene_id: u64,
    pub anchor: u32,
    pub referrant: u32,
}

/// Frozen pair embeddings keyed by scene and ordered object pair.
///
/// File layout (little-endian): magic `RPEMB1`, `u32` version, `u32` dim,
/// `u32 x3` grid resolution, `f64` voxel size, `u32` config digest, `u64`
/// seed, `u64` entry count, entries (`u64` scene, `u32` anchor, `u32` referrant, dim
/// `f64`s) in key order, then a CRC32 of everything before it.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub resolution: [usize; 3],
    pub voxel_size: f64,
    pub config_digest: u32,
    /// Seed of the relation model that produced the entries.
    pub seed: u64,
    pub entries: BTreeMap<EmbeddingKey, Vec<f64>>,
}

const MAGIC: &[u8; 6] = b"RPEMB1";
const VERSION: u32 = 1;

impl EmbeddingTable {
    pub fn new(dim: usize, resolution: [usize; 3], voxel_size: f64, config_digest: u32, seed: u64) -> Self {
        Self { dim, resolution, voxel_size, config_digest, seed, entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, key: EmbeddingKey, value: Vec<f64>) -> Result<(), RelnetError> {
        if value.len() != self.dim {
            return Err(RelnetError::Data(format!("embedding of length {} in a table of dim {}", value.len(), self.dim)));
        }
        self.entries.insert(key, value);
        Ok(())
    }

    pub fn get(&self, scene_id: u64, anchor: usize, referrant: usize) -> Option<&[f64]> {
        self.entries
            .get(&EmbeddingKey { scene_id, anchor: anchor as u32, referrant: referrant as u32 })
            .map(|v| v.as_slice())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(MAGIC);
        b.write_u32::<LittleEndian>(VERSION).unwrap();
        b.write_u32::<LittleEndian>(self.dim as u32).unwrap();
        for r in self.resolution {
            b.write_u32::<LittleEndian>(r as u32).unwrap();
        }
        b.write_f64::<LittleEndian>(self.voxel_size).unwrap();
        b.write_u32::<LittleEndian>(self.config_digest).unwrap();
        b.write_u64::<LittleEndian>(self.seed).unwrap();
        b.write_u64::<LittleEndian>(self.entries.len() as u64).unwrap();
        for (k, v) in &self.entries {
            b.write_u64::<LittleEndian>(k.scene_id).unwrap();
            b.write_u32::<LittleEndian>(k.anchor).unwrap();
            b.write_u32::<LittleEndian>(k.referrant).unwrap();
            for &x in v {
                b.write_f64::<LittleEndian>(x).unwrap();
            }
        }
        let crc = crc32fast::hash(&b);
        b.write_u32::<LittleEndian>(crc).unwrap();
        b
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RelnetError> {
        let bad = |m: &str| RelnetError::Data(format!("embedding file: {m}"));
        let io = |_e: std::io::Error| bad("truncated");
        if bytes.len() < MAGIC.len() + 4 {
            return Err(bad("truncated"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != (&tail[..]).read_u32::<LittleEndian>().map_err(io)? {
            return Err(bad("checksum mismatch"));
        }
        let mut r = body;
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        if r.read_u32::<LittleEndian>().map_err(io)? != VERSION {
            return Err(bad("unsupported version"));
        }
        let dim = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        let mut resolution = [0usize; 3];
        for v in resolution.iter_mut() {
            *v = r.read_u32::<LittleEndian>().map_err(io)? as usize;
        }
        let voxel_size = r.read_f64::<LittleEndian>().map_err(io)?;
        let config_digest = r.read_u32::<LittleEndian>().map_err(io)?;
        let seed = r.read_u64::<LittleEndian>().map_err(io)?;
        let count = r.read_u64::<LittleEndian>().map_err(io)?;
        let mut table = Self::new(dim, resolution, voxel_size, config_digest, seed);
        for _ in 0..count {
            let key = EmbeddingKey {
                scene_id: r.read_u64::<LittleEndian>().map_err(io)?,
                anchor: r.read_u32::<LittleEndian>().map_err(io)?,
                referrant: r.read_u32::<LittleEndian>().map_err(io)?,
            };
            let mut v = vec![0.0; dim];
            r.read_f64_into::<LittleEndian>(&mut v).map_err(io)?;
            table.entries.insert(key, v);
        }
        if !r.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<(), RelnetError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| RelnetError::Data(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, RelnetError> {
        let bytes = std::fs::read(path).map_err(|e| RelnetError::Data(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::relnet::RelationConfig;

    fn small_model() -> RelationModel {
        let cfg = RelationConfig { resolution: [8; 3], voxel_size: 0.04, embedding_dim: 4, conv_channels: vec![2], head_hidden: vec![4] };
        RelationModel::new(cfg, 2).unwrap()
    }

    fn cube(x: f64) -> ObjectInstance {
        ObjectInstance::cuboid([0.08; 3], Vec3::new(x, 0.0, 0.04), 0.0)
    }

    #[test]
    fn counts_and_translation() {
        let m = small_model();
        let scene = [cube(0.0), cube(0.12), cube(-0.12)];
        let e = embed_scene(&m, &scene).unwrap();
        assert_eq!(e.len(), 6);
        assert_eq!(e[0].0, (0, 1));
        let shift = Vec3::new(1.0, -0.5, 0.25);
        let moved: Vec<_> = scene.iter().map(|o| o.translated(&shift)).collect();
        let e2 = embed_scene(&m, &moved).unwrap();
        assert_eq!(e, e2);
        assert!(embed_scene(&m, &scene[..1]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let mut t = EmbeddingTable::new(2, [32; 3], 0.02, 77, 5);
        t.insert(EmbeddingKey { scene_id: 3, anchor: 0, referrant: 1 }, vec![0.5, -1.0]).unwrap();
        t.insert(EmbeddingKey { scene_id: 1, anchor: 1, referrant: 0 }, vec![2.0, 3.0]).unwrap();
        assert!(t.insert(EmbeddingKey { scene_id: 1, anchor: 0, referrant: 1 }, vec![1.0]).is_err());
        let back = EmbeddingTable::from_bytes(&t.to_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.get(3, 0, 1), Some(&[0.5, -1.0][..]));
        let mut bytes = t.to_bytes();
        bytes[20] ^= 0xff;
        assert!(EmbeddingTable::from_bytes(&bytes).is_err());
    }
}
