use super::{voxelize, GeomError, GridSpec, ObjectInstance, VoxelGrid};

/// Number of regions around an anchor bound (3^3 minus the anchor's own cell).
pub const REGION_COUNT: usize = 26;

/// Anchor-centric three-channel view of an ordered object pair.
///
/// Channel 0 is the union mask, channel 1 the anchor, channel 2 the
/// referrant. The anchor centre sits at the geometric centre of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelPairInput {
    pub grid: VoxelGrid,
    pub anchor_id: usize,
    pub referrant_id: usize,
    /// Set when the referrant centre falls outside the grid box.
    pub clipped: bool,
}

impl VoxelPairInput {
    pub const UNION: usize = 0;
    pub const ANCHOR: usize = 1;
    pub const REFERRANT: usize = 2;

    /// Rebuilds a view from the anchor and referrant occupancy lists; the
    /// union channel is derived.
    pub fn from_masks(
        spec: GridSpec,
        anchor_cells: &[u32],
        referrant_cells: &[u32],
        anchor_id: usize,
        referrant_id: usize,
        clipped: bool,
    ) -> Result<Self, GeomError> {
        let n = spec.n_cells();
        let mut grid = VoxelGrid::empty(spec, 3);
        for (ch, cells) in [(Self::ANCHOR, anchor_cells), (Self::REFERRANT, referrant_cells)] {
            for &c in cells {
                let c = c as usize;
                if c >= n {
                    return Err(GeomError::InvalidGrid(format!("cell {c} outside grid")));
                }
                grid.channel_mut(ch)?[c] = true;
                grid.channel_mut(Self::UNION)?[c] = true;
            }
        }
        Ok(Self { grid, anchor_id, referrant_id, clipped })
    }

    /// Dense `[3, L, W, H]` values in {0, 1}.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.grid.spec.n_cells();
        let mut out = vec![0.0; 3 * n];
        for c in 0..3 {
            let ch = self.grid.channel(c).expect("pair view has three channels");
            for (i, &v) in ch.iter().enumerate() {
                if v {
                    out[c * n + i] = 1.0;
                }
            }
        }
        out
    }

    /// Centre distance between the anchor and referrant masks, in metres.
    pub fn center_distance(&self) -> Result<f64, GeomError> {
        voxel_center_distance(&self.grid, Self::ANCHOR, Self::REFERRANT)
    }
}

/// Voxelises the pair `(anchor, referrant)` in a grid translated so the
/// anchor centre maps to the grid centre. Only `resolution` and `voxel_size`
/// of `spec` are used.
pub fn pairwise_view(
    scene: &[ObjectInstance],
    anchor: usize,
    referrant: usize,
    spec: &GridSpec,
) -> Result<VoxelPairInput, GeomError> {
    if anchor == referrant {
        return Err(GeomError::SameObject(anchor));
    }
    let a = scene.get(anchor).ok_or(GeomError::UnknownObject(anchor))?;
    let r = scene.get(referrant).ok_or(GeomError::UnknownObject(referrant))?;
    let shift = -a.position;
    let local = GridSpec::centered(spec.resolution, spec.voxel_size);
    let a_rel = a.translated(&shift);
    let r_rel = r.translated(&shift);
    let vox = voxelize(&[a_rel, r_rel], &local)?;
    let clipped = !local.contains_point(&r_rel.position);
    let anchor_cells = vox.grid.occupied(0);
    let referrant_cells = vox.grid.occupied(1);
    VoxelPairInput::from_masks(local, &anchor_cells, &referrant_cells, anchor, referrant, clipped)
}

/// Euclidean distance between the occupied-cell centroids of two channels,
/// converted to metres.
pub fn voxel_center_distance(grid: &VoxelGrid, a: usize, b: usize) -> Result<f64, GeomError> {
    let ca = grid.centroid_cells(a)?;
    let cb = grid.centroid_cells(b)?;
    Ok((ca - cb).norm() * grid.spec.voxel_size)
}

/// Region offset `(dx, dy, dz)` in {-1, 0, 1}^3 for a region index.
/// Regions are enumerated lexicographically, skipping `(0, 0, 0)`.
pub fn region_offset(index: usize) -> [i8; 3] {
    assert!(index < REGION_COUNT, "region index {index} out of range");
    let raw = if index >= 13 { index + 1 } else { index };
    [(raw / 9) as i8 - 1, ((raw / 3) % 3) as i8 - 1, (raw % 3) as i8 - 1]
}

fn region_of(offset: [i8; 3]) -> Option<usize> {
    let raw = 9 * (offset[0] + 1) as usize + 3 * (offset[1] + 1) as usize + (offset[2] + 1) as usize;
    match raw {
        13 => None,
        r if r > 13 => Some(r - 1),
        r => Some(r),
    }
}

/// Index of the region (around the anchor's voxel bound) holding the most
/// referrant voxels. Ties go to the lowest index. Referrant voxels inside
/// the anchor bound itself do not vote.
pub fn region_index_masks(grid: &VoxelGrid, anchor: usize, referrant: usize) -> Result<usize, GeomError> {
    let (lo, hi) = grid.bounds_cells(anchor).map_err(|_| GeomError::EmptyAnchor)?;
    let ch = grid.channel(referrant)?;
    let mut counts = [0usize; REGION_COUNT];
    let mut any = false;
    for (i, &v) in ch.iter().enumerate() {
        if !v {
            continue;
        }
        any = true;
        let p = grid.spec.coords(i);
        let mut off = [0i8; 3];
        for k in 0..3 {
            off[k] = if p[k] < lo[k] {
                -1
            } else if p[k] > hi[k] {
                1
            } else {
                0
            };
        }
        if let Some(r) = region_of(off) {
            counts[r] += 1;
        }
    }
    if !any {
        return Err(GeomError::EmptyReferrant);
    }
    let mut best = 0;
    for r in 1..REGION_COUNT {
        if counts[r] > counts[best] {
            best = r;
        }
    }
    Ok(best)
}

/// Discrete spatial relation of a pair view (anchor channel vs referrant).
pub fn region_index(pair: &VoxelPairInput) -> Result<usize, GeomError> {
    region_index_masks(&pair.grid, VoxelPairInput::ANCHOR, VoxelPairInput::REFERRANT)
}
