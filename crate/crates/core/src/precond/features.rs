use std::collections::BTreeMap;

use super::graph::EdgeSource;
use super::PrecondError;
use crate::geom::{pairwise_view, region_index, region_offset, voxelize, GeomError, GridSpec, ObjectInstance, Vec3, REGION_COUNT};
use crate::relnet::EmbeddingTable;

/// Relation features for one scene, either per ordered pair or per object.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureSet {
    Pairwise { source: EdgeSource, dim: usize, pairs: BTreeMap<(usize, usize), Vec<f64>>, scene_id: u64 },
    PerNode { source: EdgeSource, dim: usize, nodes: Vec<Vec<f64>> },
}

impl FeatureSet {
    pub fn source(&self) -> EdgeSource {
        match self {
            FeatureSet::Pairwise { source, .. } | FeatureSet::PerNode { source, .. } => *source,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureSet::Pairwise { dim, .. } | FeatureSet::PerNode { dim, .. } => *dim,
        }
    }
}

/// Frozen relation embeddings of scene `scene_id` for objects `0..n`. Pairs
/// absent from the table are left out and reported by `build_graph` if a
/// graph needs them.
pub fn learned_features(table: &EmbeddingTable, scene_id: u64, n: usize) -> FeatureSet {
    let mut pairs = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            if let Some(e) = table.get(scene_id, i, j).filter(|_| i != j) {
                pairs.insert((i, j), e.to_vec());
            }
        }
    }
    FeatureSet::Pairwise { source: EdgeSource::Learned, dim: table.dim, pairs, scene_id }
}

/// Region of a referrant that lies wholly outside the pair view, from the
/// side of the anchor's bounding box its centre falls on along each axis.
fn region_from_centres(anchor: &ObjectInstance, referrant: &ObjectInstance) -> usize {
    let h = anchor.aabb_half();
    let d = referrant.position - anchor.position;
    let side = |k: usize| -> i8 {
        if d[k] > h[k] {
            1
        } else if d[k] < -h[k] {
            -1
        } else {
            0
        }
    };
    let want = [side(0), side(1), side(2)];
    (0..REGION_COUNT).find(|&r| region_offset(r) == want).unwrap_or(0)
}

/// One-hot 26-region relation of every ordered pair, computed on the
/// anchor-centric pair view over `grid`. A referrant outside the view falls
/// back to the region of its centre.
pub fn discrete_features(objects: &[ObjectInstance], grid: &GridSpec, scene_id: u64) -> Result<FeatureSet, PrecondError> {
    let mut pairs = BTreeMap::new();
    for i in 0..objects.len() {
        for j in 0..objects.len() {
            if i != j {
                let view = pairwise_view(objects, i, j, grid)?;
                let region = match region_index(&view) {
                    Ok(r) => r,
                    Err(GeomError::EmptyReferrant) => region_from_centres(&objects[i], &objects[j]),
                    Err(e) => return Err(e.into()),
                };
                let mut onehot = vec![0.0; REGION_COUNT];
                onehot[region] = 1.0;
                pairs.insert((i, j), onehot);
            }
        }
    }
    Ok(FeatureSet::Pairwise { source: EdgeSource::Discrete26, dim: REGION_COUNT, pairs, scene_id })
}

/// Per-object voxel centroid in world coordinates.
pub fn meanpos_features(objects: &[ObjectInstance], scene_grid: &GridSpec) -> Result<FeatureSet, PrecondError> {
    let vox = voxelize(objects, scene_grid)?;
    let s = scene_grid;
    let nodes = (0..objects.len())
        .map(|c| {
            let cells = vox.grid.centroid_cells(c)?;
            let p = s.origin + (cells + Vec3::repeat(0.5)) * s.voxel_size;
            Ok(vec![p.x, p.y, p.z])
        })
        .collect::<Result<Vec<_>, PrecondError>>()?;
    Ok(FeatureSet::PerNode { source: EdgeSource::MeanPos, dim: 3, nodes })
}

/// Per-object voxel bounding box `[min x, min y, min z, max x, max y, max z]`
/// in world coordinates.
pub fn bbox_features(objects: &[ObjectInstance], scene_grid: &GridSpec) -> Result<FeatureSet, PrecondError> {
    let vox = voxelize(objects, scene_grid)?;
    let s = scene_grid;
    let nodes = (0..objects.len())
        .map(|c| {
            let (lo, hi) = vox.grid.bounds_cells(c)?;
            let mut f = Vec::with_capacity(6);
            f.extend((0..3).map(|k| s.origin[k] + lo[k] as f64 * s.voxel_size));
            f.extend((0..3).map(|k| s.origin[k] + (hi[k] + 1) as f64 * s.voxel_size));
            Ok(f)
        })
        .collect::<Result<Vec<_>, PrecondError>>()?;
    Ok(FeatureSet::PerNode { source: EdgeSource::BBox, dim: 6, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::region_offset;
    use proptest::prelude::*;

    fn above_left() -> Vec<ObjectInstance> {
        vec![
            ObjectInstance::cuboid([0.06; 3], Vec3::new(0.0, 0.0, 0.03), 0.0),
            ObjectInstance::cuboid([0.04; 3], Vec3::new(0.0, 0.0, 0.08), 0.0),
            ObjectInstance::cuboid([0.04; 3], Vec3::new(0.0, 0.12, 0.02), 0.0),
        ]
    }

    fn active(fs: &FeatureSet, pair: (usize, usize)) -> [i8; 3] {
        let FeatureSet::Pairwise { pairs, .. } = fs else { panic!("expected pairwise") };
        let f = &pairs[&pair];
        assert_eq!(f.iter().filter(|&&v| v == 1.0).count(), 1);
        assert_eq!(f.iter().filter(|&&v| v == 0.0).count(), REGION_COUNT - 1);
        region_offset(f.iter().position(|&v| v == 1.0).unwrap())
    }

    #[test]
    fn discrete_regions_of_canonical_scene() {
        let fs = discrete_features(&above_left(), &GridSpec::desk(), 0).unwrap();
        assert_eq!(active(&fs, (0, 1)), [0, 0, 1]);
        assert_eq!(active(&fs, (1, 0)), [0, 0, -1]);
        assert_eq!(active(&fs, (0, 2)), [0, 1, 0]);
    }

    #[test]
    fn referrant_outside_view_uses_centre_region() {
        let scene = [
            ObjectInstance::cuboid([0.04; 3], Vec3::new(0.0, 0.0, 0.02), 0.0),
            ObjectInstance::cuboid([0.04; 3], Vec3::new(-0.5, 0.0, 0.02), 0.0),
        ];
        let fs = discrete_features(&scene, &GridSpec::desk(), 0).unwrap();
        assert_eq!(active(&fs, (0, 1)), [-1, 0, 0]);
    }

    #[test]
    fn meanpos_and_bbox_match_aligned_cube() {
        let grid = GridSpec::new([32; 3], 0.02, Vec3::new(-0.32, -0.32, 0.0));
        let cube = [ObjectInstance::cuboid([0.04; 3], Vec3::new(0.0, 0.0, 0.02), 0.0)];
        let FeatureSet::PerNode { nodes, .. } = meanpos_features(&cube, &grid).unwrap() else { unreachable!() };
        for (v, want) in nodes[0].iter().zip([0.0, 0.0, 0.02]) {
            assert!((v - want).abs() < 1e-12);
        }
        let FeatureSet::PerNode { nodes, .. } = bbox_features(&cube, &grid).unwrap() else { unreachable!() };
        for (v, want) in nodes[0].iter().zip([-0.02, -0.02, 0.0, 0.02, 0.02, 0.04]) {
            assert!((v - want).abs() < 1e-12, "{:?}", nodes[0]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn discrete_one_hot_is_translation_invariant(
            dx in -0.1f64..0.1, dy in -0.1f64..0.1, dz in 0.0f64..0.1,
        ) {
            let scene = above_left();
            let moved: Vec<_> = scene.iter().map(|o| o.translated(&Vec3::new(dx, dy, dz))).collect();
            let a = discrete_features(&scene, &GridSpec::desk(), 0).unwrap();
            let b = discrete_features(&moved, &GridSpec::desk(), 0).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        prop_assert_eq!(active(&a, (i, j)), active(&b, (i, j)));
                    }
                }
            }
        }
    }
}
