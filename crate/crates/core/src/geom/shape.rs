use serde::{Deserialize, Serialize};

use super::{GeomError, Vec3};

pub const MIN_DIM: f64 = 0.001;
pub const MAX_DIM: f64 = 1.0;

/// Boundary tolerance for point containment. Points this close to a surface
/// count as inside, which keeps voxelisation stable under translation.
const CONTAIN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShapeKind {
    Cuboid,
    Cylinder,
    Sphere,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 3] = [ShapeKind::Cuboid, ShapeKind::Cylinder, ShapeKind::Sphere];

    pub fn code(self) -> u8 {
        match self {
            ShapeKind::Cuboid => 0,
            ShapeKind::Cylinder => 1,
            ShapeKind::Sphere => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

/// A primitive object placed in the world. Rotation is about +z only.
///
/// `dims` holds full extents for cuboids, `(radius, radius, height)` for
/// cylinders and `(radius, radius, radius)` for spheres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub shape: ShapeKind,
    pub dims: [f64; 3],
    pub position: Vec3,
    pub yaw: f64,
}

impl ObjectInstance {
    pub fn cuboid(dims: [f64; 3], position: Vec3, yaw: f64) -> Self {
        Self { shape: ShapeKind::Cuboid, dims, position, yaw }
    }

    pub fn cylinder(radius: f64, height: f64, position: Vec3, yaw: f64) -> Self {
        Self { shape: ShapeKind::Cylinder, dims: [radius, radius, height], position, yaw }
    }

    pub fn sphere(radius: f64, position: Vec3) -> Self {
        Self { shape: ShapeKind::Sphere, dims: [radius; 3], position, yaw: 0.0 }
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        for d in self.dims {
            if !(MIN_DIM..=MAX_DIM).contains(&d) {
                return Err(GeomError::InvalidObject(format!("dimension {d} outside [{MIN_DIM}, {MAX_DIM}]")));
            }
        }
        if !(-std::f64::consts::PI..=std::f64::consts::PI).contains(&self.yaw) {
            return Err(GeomError::InvalidObject(format!("yaw {} outside [-pi, pi]", self.yaw)));
        }
        if !self.position.iter().all(|v| v.is_finite()) {
            return Err(GeomError::InvalidObject("non-finite position".into()));
        }
        Ok(())
    }

    /// Half extents in the object's local frame.
    pub fn half_extents(&self) -> Vec3 {
        match self.shape {
            ShapeKind::Cuboid => Vec3::new(self.dims[0], self.dims[1], self.dims[2]) * 0.5,
            ShapeKind::Cylinder => Vec3::new(self.dims[0], self.dims[0], self.dims[2] * 0.5),
            ShapeKind::Sphere => Vec3::repeat(self.dims[0]),
        }
    }

    pub fn volume(&self) -> f64 {
        match self.shape {
            ShapeKind::Cuboid => self.dims[0] * self.dims[1] * self.dims[2],
            ShapeKind::Cylinder => std::f64::consts::PI * self.dims[0].powi(2) * self.dims[2],
            ShapeKind::Sphere => 4.0 / 3.0 * std::f64::consts::PI * self.dims[0].powi(3),
        }
    }

    /// Rotates a world-frame offset into the object's local frame.
    pub fn to_local(&self, offset: &Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c * offset.x + s * offset.y, -s * offset.x + c * offset.y, offset.z)
    }

    /// Rotates a local-frame vector into the world frame.
    pub fn to_world(&self, local: &Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c * local.x - s * local.y, s * local.x + c * local.y, local.z)
    }

    /// Point containment with the boundary counted as inside.
    pub fn contains(&self, point: &Vec3) -> bool {
        self.contains_offset(&(point - self.position))
    }

    /// Containment test for a point given relative to the object's centre.
    pub fn contains_offset(&self, offset: &Vec3) -> bool {
        match self.shape {
            ShapeKind::Sphere => offset.norm() <= self.dims[0] + CONTAIN_EPS,
            ShapeKind::Cuboid => {
                let l = self.to_local(offset);
                let h = self.half_extents();
                l.x.abs() <= h.x + CONTAIN_EPS
                    && l.y.abs() <= h.y + CONTAIN_EPS
                    && l.z.abs() <= h.z + CONTAIN_EPS
            }
            ShapeKind::Cylinder => {
                let r = self.dims[0];
                (offset.x * offset.x + offset.y * offset.y).sqrt() <= r + CONTAIN_EPS
                    && offset.z.abs() <= self.dims[2] * 0.5 + CONTAIN_EPS
            }
        }
    }

    /// World-axis-aligned half extents of the object's bounding box.
    pub fn aabb_half(&self) -> Vec3 {
        match self.shape {
            ShapeKind::Sphere | ShapeKind::Cylinder => self.half_extents(),
            ShapeKind::Cuboid => {
                let h = self.half_extents();
                let (s, c) = self.yaw.sin_cos();
                Vec3::new(c.abs() * h.x + s.abs() * h.y, s.abs() * h.x + c.abs() * h.y, h.z)
            }
        }
    }

    /// Corners of the xy footprint (the collision box for cylinders),
    /// counter-clockwise.
    pub fn footprint(&self) -> Vec<super::Vec2> {
        let h = self.half_extents();
        [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            .iter()
            .map(|&(sx, sy)| {
                let w = self.to_world(&Vec3::new(sx * h.x, sy * h.y, 0.0));
                super::Vec2::new(self.position.x + w.x, self.position.y + w.y)
            })
            .collect()
    }

    pub fn bottom(&self) -> f64 {
        self.position.z - self.half_extents().z
    }

    pub fn top(&self) -> f64 {
        self.position.z + self.half_extents().z
    }

    pub fn translated(&self, by: &Vec3) -> Self {
        Self { position: self.position + by, ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_is_inside() {
        let b = ObjectInstance::cuboid([0.04, 0.04, 0.04], Vec3::zeros(), 0.0);
        assert!(b.contains(&Vec3::new(0.02, 0.02, 0.02)));
        assert!(!b.contains(&Vec3::new(0.0201, 0.0, 0.0)));
    }

    #[test]
    fn yawed_box_containment() {
        let b = ObjectInstance::cuboid([0.2, 0.02, 0.02], Vec3::zeros(), std::f64::consts::FRAC_PI_2);
        // long axis now along y
        assert!(b.contains(&Vec3::new(0.0, 0.09, 0.0)));
        assert!(!b.contains(&Vec3::new(0.09, 0.0, 0.0)));
        let a = b.aabb_half();
        assert!((a.x - 0.01).abs() < 1e-12 && (a.y - 0.1).abs() < 1e-12);
    }

    #[test]
    fn cylinder_is_exact_not_boxy() {
        let c = ObjectInstance::cylinder(0.05, 0.1, Vec3::zeros(), 0.0);
        assert!(c.contains(&Vec3::new(0.05, 0.0, 0.05)));
        // box corner region is outside the true cylinder
        assert!(!c.contains(&Vec3::new(0.045, 0.045, 0.0)));
    }

    #[test]
    fn validation_rejects_bad_dims() {
        let mut b = ObjectInstance::cuboid([0.04, 0.04, 0.04], Vec3::zeros(), 0.0);
        assert!(b.validate().is_ok());
        b.dims[1] = 2.0;
        assert!(b.validate().is_err());
        b.dims[1] = 0.04;
        b.yaw = 4.0;
        assert!(b.validate().is_err());
    }
}
