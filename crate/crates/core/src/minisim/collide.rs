//! 2.5D collision queries. Boxes and cylinders collide as z-rotated prisms
//! (separating axes in xy plus the z interval); spheres are exact.

use crate::geom::polygon::{centroid, clip_convex, convex_hull};
use crate::geom::{ObjectInstance, ShapeKind, Vec2, Vec3};

/// Inflation applied to both shapes when extracting the touching region.
const REGION_INFLATE: f64 = 1e-5;
/// Region vertices closer than this are merged.
const REGION_MERGE: f64 = 1e-4;
pub const MAX_EXTREME_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Collider {
    Prism { center: Vec3, half: Vec3, yaw: f64 },
    Ball { center: Vec3, radius: f64 },
}

/// Signed overlap between two colliders. `depth > 0` means the shapes
/// interpenetrate; `normal` is a unit vector pointing from the first shape
/// toward the second along the axis of least overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Overlap {
    pub depth: f64,
    pub normal: Vec3,
}

fn rot(yaw: f64) -> (Vec3, Vec3) {
    let (s, c) = yaw.sin_cos();
    (Vec3::new(c, s, 0.0), Vec3::new(-s, c, 0.0))
}

impl Collider {
    pub fn from_object(obj: &ObjectInstance, center: Vec3) -> Self {
        match obj.shape {
            ShapeKind::Sphere => Collider::Ball { center, radius: obj.dims[0] },
            ShapeKind::Cuboid | ShapeKind::Cylinder => {
                Collider::Prism { center, half: obj.half_extents(), yaw: obj.yaw }
            }
        }
    }

    pub fn center(&self) -> Vec3 {
        match *self {
            Collider::Prism { center, .. } | Collider::Ball { center, .. } => center,
        }
    }

    pub fn moved_to(&self, to: Vec3) -> Self {
        match *self {
            Collider::Prism { half, yaw, .. } => Collider::Prism { center: to, half, yaw },
            Collider::Ball { radius, .. } => Collider::Ball { center: to, radius },
        }
    }

    fn inflated(&self, by: f64) -> Self {
        match *self {
            Collider::Prism { center, half, yaw } => Collider::Prism { center, half: half.add_scalar(by), yaw },
            Collider::Ball { center, radius } => Collider::Ball { center, radius: radius + by },
        }
    }

    fn footprint(&self) -> Vec<Vec2> {
        match *self {
            Collider::Prism { center, half, yaw } => {
                let (ex, ey) = rot(yaw);
                [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
                    .iter()
                    .map(|&(sx, sy)| {
                        let p = center + ex * (sx * half.x) + ey * (sy * half.y);
                        Vec2::new(p.x, p.y)
                    })
                    .collect()
            }
            Collider::Ball { center, radius } => {
                vec![
                    Vec2::new(center.x - radius, center.y - radius),
                    Vec2::new(center.x + radius, center.y - radius),
                    Vec2::new(center.x + radius, center.y + radius),
                    Vec2::new(center.x - radius, center.y + radius),
                ]
            }
        }
    }

    fn z_interval(&self) -> (f64, f64) {
        match *self {
            Collider::Prism { center, half, .. } => (center.z - half.z, center.z + half.z),
            Collider::Ball { center, radius } => (center.z - radius, center.z + radius),
        }
    }
}

fn prism_radius(half: &Vec3, yaw: f64, axis: &Vec3) -> f64 {
    let (ex, ey) = rot(yaw);
    (half.x * ex.dot(axis)).abs() + (half.y * ey.dot(axis)).abs()
}

fn prism_prism(ca: Vec3, ha: Vec3, ya: f64, cb: Vec3, hb: Vec3, yb: f64) -> Overlap {
    let d = cb - ca;
    let (ax, ay) = rot(ya);
    let (bx, by) = rot(yb);
    let mut best = Overlap { depth: f64::INFINITY, normal: Vec3::z() };
    for axis in [ax, ay, bx, by] {
        let sep = d.dot(&axis);
        let depth = prism_radius(&ha, ya, &axis) + prism_radius(&hb, yb, &axis) - sep.abs();
        if depth < best.depth {
            best = Overlap { depth, normal: if sep < 0.0 { -axis } else { axis } };
        }
    }
    let zdepth = ha.z + hb.z - d.z.abs();
    if zdepth < best.depth {
        best = Overlap { depth: zdepth, normal: if d.z < 0.0 { -Vec3::z() } else { Vec3::z() } };
    }
    best
}

fn prism_ball(ca: Vec3, ha: Vec3, ya: f64, cb: Vec3, r: f64) -> Overlap {
    let (ex, ey) = rot(ya);
    let off = cb - ca;
    let local = Vec3::new(off.dot(&ex), off.dot(&ey), off.z);
    let clamped = Vec3::new(
        local.x.clamp(-ha.x, ha.x),
        local.y.clamp(-ha.y, ha.y),
        local.z.clamp(-ha.z, ha.z),
    );
    let diff = local - clamped;
    let to_world = |v: Vec3| ex * v.x + ey * v.y + Vec3::z() * v.z;
    let dist = diff.norm();
    if dist > 0.0 {
        return Overlap { depth: r - dist, normal: to_world(diff / dist) };
    }
    let mut k = 0;
    let mut room = f64::INFINITY;
    for i in 0..3 {
        let gap = ha[i] - local[i].abs();
        if gap < room {
            room = gap;
            k = i;
        }
    }
    let mut n = Vec3::zeros();
    n[k] = if local[k] < 0.0 { -1.0 } else { 1.0 };
    Overlap { depth: r + room, normal: to_world(n) }
}

pub fn overlap(a: &Collider, b: &Collider) -> Overlap {
    match (*a, *b) {
        (Collider::Prism { center: ca, half: ha, yaw: ya }, Collider::Prism { center: cb, half: hb, yaw: yb }) => {
            prism_prism(ca, ha, ya, cb, hb, yb)
        }
        (Collider::Prism { center, half, yaw }, Collider::Ball { center: cb, radius }) => {
            prism_ball(center, half, yaw, cb, radius)
        }
        (Collider::Ball { center: ca, radius }, Collider::Prism { center, half, yaw }) => {
            let o = prism_ball(center, half, yaw, ca, radius);
            Overlap { depth: o.depth, normal: -o.normal }
        }
        (Collider::Ball { center: ca, radius: ra }, Collider::Ball { center: cb, radius: rb }) => {
            let d = cb - ca;
            let n = d.norm();
            let normal = if n > 0.0 { d / n } else { Vec3::z() };
            Overlap { depth: ra + rb - n, normal }
        }
    }
}

/// Touching region between two (nearly) touching shapes: its centroid and
/// up to [`MAX_EXTREME_POINTS`] extreme points. Returns `None` when the
/// shapes are apart.
pub fn contact_region(a: &Collider, b: &Collider, normal: &Vec3) -> Option<(Vec3, Vec<Vec3>)> {
    match (*a, *b) {
        (Collider::Ball { center, radius }, _) => return Some((center + normal * radius, Vec::new())),
        (_, Collider::Ball { center, radius }) => return Some((center - normal * radius, Vec::new())),
        _ => {}
    }
    let (ia, ib) = (a.inflated(REGION_INFLATE), b.inflated(REGION_INFLATE));
    let poly = clip_convex(&ia.footprint(), &ib.footprint());
    let (za, zb) = (ia.z_interval(), ib.z_interval());
    let (zlo, zhi) = (za.0.max(zb.0), za.1.min(zb.1));
    if poly.is_empty() || zlo > zhi {
        return None;
    }
    let c2 = centroid(&poly)?;
    let centre = Vec3::new(c2.x, c2.y, 0.5 * (zlo + zhi));
    let hull = convex_hull(&poly);
    let mut verts: Vec<Vec2> = Vec::new();
    for p in hull.iter() {
        if verts.iter().all(|q| (q - p).norm() > REGION_MERGE) {
            verts.push(*p);
        }
    }
    let zs: Vec<f64> = if zhi - zlo > REGION_MERGE { vec![zlo, zhi] } else { vec![0.5 * (zlo + zhi)] };
    let mut pts: Vec<Vec3> = Vec::new();
    for z in &zs {
        for v in &verts {
            pts.push(Vec3::new(v.x, v.y, *z));
        }
    }
    if pts.len() > MAX_EXTREME_POINTS {
        let n = pts.len();
        pts = (0..MAX_EXTREME_POINTS).map(|i| pts[i * n / MAX_EXTREME_POINTS]).collect();
    }
    Some((centre, pts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxc(c: [f64; 3], h: [f64; 3], yaw: f64) -> Collider {
        Collider::Prism { center: Vec3::from(c), half: Vec3::from(h), yaw }
    }

    #[test]
    fn box_face_gap() {
        let a = boxc([0.0; 3], [0.05; 3], 0.0);
        let b = boxc([-0.12, 0.0, 0.0], [0.05; 3], 0.0);
        let o = overlap(&a, &b);
        assert!((o.depth + 0.02).abs() < 1e-12);
        assert!((o.normal - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn stacked_boxes_normal_up() {
        let a = boxc([0.0; 3], [0.05; 3], 0.0);
        let b = boxc([0.01, 0.0, 0.099], [0.05; 3], 0.3);
        let o = overlap(&a, &b);
        assert!(o.depth > 0.0);
        assert_eq!(o.normal, Vec3::z());
    }

    #[test]
    fn ball_cases() {
        let a = Collider::Ball { center: Vec3::zeros(), radius: 0.05 };
        let b = Collider::Ball { center: Vec3::new(0.0, 0.08, 0.0), radius: 0.05 };
        let o = overlap(&a, &b);
        assert!((o.depth - 0.02).abs() < 1e-12);
        assert!((o.normal - Vec3::y()).norm() < 1e-12);
        let bx = boxc([0.0, 0.0, 0.0], [0.05; 3], 0.0);
        let o = overlap(&bx, &Collider::Ball { center: Vec3::new(0.0, 0.0, 0.1), radius: 0.04 });
        assert!((o.depth + 0.01).abs() < 1e-12);
        let o2 = overlap(&Collider::Ball { center: Vec3::new(0.0, 0.0, 0.1), radius: 0.04 }, &bx);
        assert_eq!(o2.normal, -o.normal);
    }

    #[test]
    fn stacked_region_is_overlap_face() {
        let a = boxc([0.0; 3], [0.05; 3], 0.0);
        let b = boxc([0.03, 0.0, 0.1], [0.05; 3], 0.0);
        let (c, pts) = contact_region(&a, &b, &Vec3::z()).unwrap();
        assert!((c - Vec3::new(0.015, 0.0, 0.05)).norm() < 1e-4);
        assert_eq!(pts.len(), 4);
        assert!(contact_region(&a, &boxc([0.5, 0.0, 0.0], [0.05; 3], 0.0), &Vec3::x()).is_none());
    }
}
