//! Planar convex polygon helpers used by the contact and stability code.
//! Polygons are vertex lists in counter-clockwise order.

use super::Vec2;

const AREA_EPS: f64 = 1e-14;

fn cross(o: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Convex hull by monotone chain. Collinear points are dropped; the
/// result may have fewer than three vertices for degenerate input.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (a.x - b.x).abs() < 1e-15 && (a.y - b.y).abs() < 1e-15);
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(pts.len() * 2);
    for p in pts.iter() {
        while hull.len() >= 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    let lower = hull.len() + 1;
    for p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(*p);
    }
    hull.pop();
    hull
}

/// Sutherland-Hodgman clip of `subject` against the convex polygon `clip`.
/// Boundary points are kept, so touching polygons produce a degenerate
/// (zero-area) result rather than an empty one.
pub fn clip_convex(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let input = std::mem::take(&mut out);
        let side = |p: &Vec2| cross(&a, &b, p);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(&cur), side(&prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    out.push(intersect(&prev, &cur, sp, sc));
                }
                out.push(cur);
            } else if sp >= 0.0 {
                out.push(intersect(&prev, &cur, sp, sc));
            }
        }
    }
    out
}

fn intersect(p: &Vec2, q: &Vec2, sp: f64, sq: f64) -> Vec2 {
    let t = sp / (sp - sq);
    p + (q - p) * t
}

pub fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        s += a.x * b.y - b.x * a.y;
    }
    0.5 * s
}

/// Area centroid, falling back to the vertex mean for degenerate polygons.
pub fn centroid(poly: &[Vec2]) -> Option<Vec2> {
    if poly.is_empty() {
        return None;
    }
    let area = signed_area(poly);
    if area.abs() <= AREA_EPS {
        let sum = poly.iter().fold(Vec2::zeros(), |acc, p| acc + p);
        return Some(sum / poly.len() as f64);
    }
    let n = poly.len();
    let mut c = Vec2::zeros();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let w = a.x * b.y - b.x * a.y;
        c += (a + b) * w;
    }
    Some(c / (6.0 * area))
}

fn segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Signed distance from `p` to the boundary of a convex CCW polygon:
/// positive inside, negative outside, zero on the boundary.
/// Returns `None` for an empty polygon.
pub fn signed_margin(poly: &[Vec2], p: &Vec2) -> Option<f64> {
    match poly.len() {
        0 => None,
        1 => Some(-(p - poly[0]).norm()),
        n => {
            if signed_area(poly).abs() <= AREA_EPS {
                let d = (0..n)
                    .map(|i| segment_distance(p, &poly[i], &poly[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min);
                return Some(-d);
            }
            let mut inside = true;
            let mut min_in = f64::INFINITY;
            let mut min_edge = f64::INFINITY;
            for i in 0..n {
                let (a, b) = (poly[i], poly[(i + 1) % n]);
                let len = (b - a).norm();
                if len == 0.0 {
                    continue;
                }
                let d = cross(&a, &b, p) / len;
                if d < 0.0 {
                    inside = false;
                }
                min_in = min_in.min(d);
                min_edge = min_edge.min(segment_distance(p, &a, &b));
            }
            Some(if inside { min_in } else { -min_edge })
        }
    }
}
