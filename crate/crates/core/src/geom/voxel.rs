use serde::{Deserialize, Serialize};

use super::{GeomError, ObjectInstance, Vec3};

/// Regular axis-aligned grid. Cell `(ix, iy, iz)` spans
/// `origin + [i, i + 1) * voxel_size` on each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: [usize; 3],
    pub voxel_size: f64,
    pub origin: Vec3,
}

impl GridSpec {
    pub fn new(resolution: [usize; 3], voxel_size: f64, origin: Vec3) -> Self {
        Self { resolution, voxel_size, origin }
    }

    /// 32^3 cells at 2 cm: +-0.32 m around the centre.
    pub fn desk() -> Self {
        Self::centered([32; 3], 0.02)
    }

    /// 100^3 cells at 1 cm: +-0.5 m around the centre.
    pub fn full() -> Self {
        Self::centered([100; 3], 0.01)
    }

    /// Grid whose geometric centre sits at the world origin.
    pub fn centered(resolution: [usize; 3], voxel_size: f64) -> Self {
        let mut g = Self::new(resolution, voxel_size, Vec3::zeros());
        g.origin = -g.half_extent();
        g
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite()) {
            return Err(GeomError::InvalidGrid(format!("voxel size {}", self.voxel_size)));
        }
        if self.resolution.contains(&0) {
            return Err(GeomError::InvalidGrid(format!("resolution {:?}", self.resolution)));
        }
        if !self.origin.iter().all(|v| v.is_finite()) {
            return Err(GeomError::InvalidGrid("non-finite origin".into()));
        }
        Ok(())
    }

    pub fn n_cells(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn half_extent(&self) -> Vec3 {
        Vec3::new(
            self.resolution[0] as f64,
            self.resolution[1] as f64,
            self.resolution[2] as f64,
        ) * (0.5 * self.voxel_size)
    }

    pub fn center(&self) -> Vec3 {
        self.origin + self.half_extent()
    }

    /// The cell containing the grid's geometric centre.
    pub fn center_cell(&self) -> [usize; 3] {
        [self.resolution[0] / 2, self.resolution[1] / 2, self.resolution[2] / 2]
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.resolution[1] + iy) * self.resolution[2] + iz
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let iz = index % self.resolution[2];
        let rest = index / self.resolution[2];
        [rest / self.resolution[1], rest % self.resolution[1], iz]
    }

    /// Centre of a cell relative to the grid origin.
    #[inline]
    pub fn cell_offset(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        Vec3::new(ix as f64 + 0.5, iy as f64 + 0.5, iz as f64 + 0.5) * self.voxel_size
    }

    pub fn cell_center(&self, ix: usize, iy: usize, iz: usize) -> Vec3 {
        self.origin + self.cell_offset(ix, iy, iz)
    }

    /// True if the world point lies inside the closed grid box.
    pub fn contains_point(&self, p: &Vec3) -> bool {
        let rel = p - self.origin;
        (0..3).all(|k| rel[k] >= -1e-12 && rel[k] <= self.resolution[k] as f64 * self.voxel_size + 1e-12)
    }

    /// Cell containing a world point (clamped into the grid).
    pub fn cell_of(&self, p: &Vec3) -> [usize; 3] {
        let rel = (p - self.origin) / self.voxel_size;
        let mut out = [0usize; 3];
        for k in 0..3 {
            let v = (rel[k] + 1e-9).floor();
            out[k] = v.clamp(0.0, (self.resolution[k] - 1) as f64) as usize;
        }
        out
    }

    /// Inclusive cell range whose centres may fall inside `[lo, hi]` (world).
    fn cell_range(&self, lo: &Vec3, hi: &Vec3) -> Option<[(usize, usize); 3]> {
        let mut out = [(0, 0); 3];
        for k in 0..3 {
            let a = ((lo[k] - self.origin[k]) / self.voxel_size - 0.5 - 1e-6).ceil();
            let b = ((hi[k] - self.origin[k]) / self.voxel_size - 0.5 + 1e-6).floor();
            let a = a.max(0.0);
            let b = b.min(self.resolution[k] as f64 - 1.0);
            if a > b {
                return None;
            }
            out[k] = (a as usize, b as usize);
        }
        Some(out)
    }
}

/// Multi-channel binary occupancy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub spec: GridSpec,
    channels: Vec<Vec<bool>>,
}

impl VoxelGrid {
    pub fn empty(spec: GridSpec, n_channels: usize) -> Self {
        let n = spec.n_cells();
        Self { spec, channels: vec![vec![false; n]; n_channels] }
    }

    pub fn from_channels(spec: GridSpec, channels: Vec<Vec<bool>>) -> Result<Self, GeomError> {
        if channels.iter().any(|c| c.len() != spec.n_cells()) {
            return Err(GeomError::InvalidGrid("channel length does not match resolution".into()));
        }
        Ok(Self { spec, channels })
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, c: usize) -> Result<&[bool], GeomError> {
        self.channels.get(c).map(|v| v.as_slice()).ok_or(GeomError::BadChannel(c))
    }

    pub fn channel_mut(&mut self, c: usize) -> Result<&mut [bool], GeomError> {
        self.channels.get_mut(c).map(|v| v.as_mut_slice()).ok_or(GeomError::BadChannel(c))
    }

    pub fn get(&self, c: usize, ix: usize, iy: usize, iz: usize) -> bool {
        self.channels[c][self.spec.index(ix, iy, iz)]
    }

    pub fn count(&self, c: usize) -> usize {
        self.channels.get(c).map_or(0, |ch| ch.iter().filter(|&&v| v).count())
    }

    /// Flat indices of occupied cells in a channel, ascending.
    pub fn occupied(&self, c: usize) -> Vec<u32> {
        self.channels
            .get(c)
            .map(|ch| {
                ch.iter()
                    .enumerate()
                    .filter_map(|(i, &v)| v.then_some(i as u32))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Occupied-cell centroid of a channel, in fractional cell coordinates.
    pub fn centroid_cells(&self, c: usize) -> Result<Vec3, GeomError> {
        let ch = self.channel(c)?;
        let mut sum = Vec3::zeros();
        let mut n = 0usize;
        for (i, &v) in ch.iter().enumerate() {
            if v {
                let [x, y, z] = self.spec.coords(i);
                sum += Vec3::new(x as f64, y as f64, z as f64);
                n += 1;
            }
        }
        if n == 0 {
            return Err(GeomError::EmptyChannel(c));
        }
        Ok(sum / n as f64)
    }

    /// Per-axis (min, max) cell index of a channel.
    pub fn bounds_cells(&self, c: usize) -> Result<([usize; 3], [usize; 3]), GeomError> {
        let ch = self.channel(c)?;
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for (i, &v) in ch.iter().enumerate() {
            if v {
                any = true;
                let p = self.spec.coords(i);
                for k in 0..3 {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
            }
        }
        if !any {
            return Err(GeomError::EmptyChannel(c));
        }
        Ok((lo, hi))
    }
}

/// Output of [`voxelize`]: one channel per input object plus a warning flag
/// for every object that left no voxel in the grid.
#[derive(Debug, Clone)]
pub struct Voxelization {
    pub grid: VoxelGrid,
    pub outside: Vec<bool>,
}

impl Voxelization {
    pub fn any_outside(&self) -> bool {
        self.outside.iter().any(|&o| o)
    }
}

/// Marks a cell occupied in an object's channel iff the cell centre lies
/// inside (or on the boundary of) the primitive.
pub fn voxelize(objects: &[ObjectInstance], spec: &GridSpec) -> Result<Voxelization, GeomError> {
    spec.validate()?;
    if objects.is_empty() {
        return Err(GeomError::NoObjects);
    }
    let mut grid = VoxelGrid::empty(*spec, objects.len());
    let mut outside = vec![false; objects.len()];
    for (c, obj) in objects.iter().enumerate() {
        obj.validate()?;
        let h = obj.aabb_half();
        let rel_center = obj.position - spec.origin;
        let mut hit = false;
        if let Some(range) = spec.cell_range(&(obj.position - h), &(obj.position + h)) {
            let ch = &mut grid.channels[c];
            for ix in range[0].0..=range[0].1 {
                for iy in range[1].0..=range[1].1 {
                    for iz in range[2].0..=range[2].1 {
                        let off = spec.cell_offset(ix, iy, iz) - rel_center;
                        if obj.contains_offset(&off) {
                            ch[spec.index(ix, iy, iz)] = true;
                            hit = true;
                        }
                    }
                }
            }
        }
        outside[c] = !hit;
    }
    Ok(Voxelization { grid, outside })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_cube_gives_64_cells() {
        let spec = GridSpec::new([20; 3], 0.01, Vec3::zeros());
        let cube = ObjectInstance::cuboid([0.04; 3], Vec3::new(0.1, 0.1, 0.1), 0.0);
        let v = voxelize(&[cube], &spec).unwrap();
        assert_eq!(v.grid.count(0), 64);
        assert!(!v.any_outside());
    }

    #[test]
    fn sphere_count_close_to_analytic_volume() {
        let spec = GridSpec::centered([20; 3], 0.01);
        let s = ObjectInstance::sphere(0.05, Vec3::zeros());
        let v = voxelize(&[s], &spec).unwrap();
        let analytic = 4.0 / 3.0 * std::f64::consts::PI * 0.05f64.powi(3) / 0.01f64.powi(3);
        let n = v.grid.count(0) as f64;
        assert!((n - analytic).abs() / analytic < 0.10, "{n} vs {analytic}");
    }

    #[test]
    fn full_scale_shape() {
        let spec = GridSpec::full();
        assert_eq!(spec.resolution, [100, 100, 100]);
        assert_eq!(spec.voxel_size, 0.01);
        let g = VoxelGrid::empty(spec, 3);
        assert_eq!(g.n_channels(), 3);
        assert_eq!(g.channel(2).unwrap().len(), 1_000_000);
    }

    #[test]
    fn object_outside_sets_flag() {
        let spec = GridSpec::desk();
        let inside = ObjectInstance::cuboid([0.04; 3], Vec3::zeros(), 0.0);
        let far = ObjectInstance::cuboid([0.04; 3], Vec3::new(5.0, 0.0, 0.0), 0.0);
        let v = voxelize(&[inside, far], &spec).unwrap();
        assert_eq!(v.outside, vec![false, true]);
        assert_eq!(v.grid.count(1), 0);
    }

    #[test]
    fn empty_object_list_is_an_error() {
        assert_eq!(voxelize(&[], &GridSpec::desk()).unwrap_err(), GeomError::NoObjects);
    }

    #[test]
    fn coords_roundtrip() {
        let spec = GridSpec::new([3, 5, 7], 0.1, Vec3::zeros());
        for i in 0..spec.n_cells() {
            let [x, y, z] = spec.coords(i);
            assert_eq!(spec.index(x, y, z), i);
        }
    }
}
