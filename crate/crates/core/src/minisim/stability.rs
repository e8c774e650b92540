use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::collide::{overlap, Collider};
use super::SimError;
use crate::geom::polygon::{clip_convex, convex_hull, signed_area, signed_margin};
use crate::geom::{ObjectInstance, Vec2};

/// Height tolerance for a face to count as resting on another.
pub const SUPPORT_EPS_Z: f64 = 0.002;
pub const DEFAULT_MOVE_THRESHOLD: f64 = 0.0015;
const MAX_INTERPENETRATION: f64 = 1e-4;
const MIN_SUPPORT_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    /// Indices (into the input list) of blocks that lose support.
    pub fallen: BTreeSet<usize>,
    /// Signed distance (m) from each block's COM to the boundary of its
    /// support hull in the input configuration; positive means supported.
    /// Blocks with no supporter get `-inf`.
    pub margins: Vec<f64>,
}

/// Quasi-static support analysis of a block stack resting on the floor
/// (z = 0). `move_threshold` is accepted for interface parity with dynamic
/// checks and must be positive; the verdict depends on support only.
pub fn stability_check(blocks: &[ObjectInstance], move_threshold: f64) -> Result<StabilityReport, SimError> {
    if !(move_threshold > 0.0) {
        return Err(SimError::DegenerateAction(format!("move threshold {move_threshold}")));
    }
    for b in blocks {
        b.validate()?;
    }
    let colliders: Vec<Collider> = blocks.iter().map(|b| Collider::from_object(b, b.position)).collect();
    for i in 0..blocks.len() {
        for j in i + 1..blocks.len() {
            let depth = overlap(&colliders[i], &colliders[j]).depth;
            if depth > MAX_INTERPENETRATION {
                return Err(SimError::InvalidStack { a: i, b: j, depth });
            }
        }
    }

    let footprints: Vec<Vec<Vec2>> = blocks.iter().map(|b| b.footprint()).collect();
    let on_floor: Vec<bool> = blocks.iter().map(|b| b.bottom() <= SUPPORT_EPS_Z).collect();
    // support patches of i, one per supporter j
    let patches: Vec<Vec<(usize, Vec<Vec2>)>> = (0..blocks.len())
        .map(|i| {
            (0..blocks.len())
                .filter(|&j| j != i && (blocks[j].top() - blocks[i].bottom()).abs() <= SUPPORT_EPS_Z)
                .filter_map(|j| {
                    let poly = clip_convex(&footprints[i], &footprints[j]);
                    (signed_area(&poly).abs() > MIN_SUPPORT_AREA).then_some((j, poly))
                })
                .collect()
        })
        .collect();

    let margin = |i: usize, present: &[bool]| -> f64 {
        let com = Vec2::new(blocks[i].position.x, blocks[i].position.y);
        if on_floor[i] {
            return signed_margin(&footprints[i], &com).unwrap_or(f64::NEG_INFINITY);
        }
        let pts: Vec<Vec2> = patches[i].iter().filter(|(j, _)| present[*j]).flat_map(|(_, p)| p.iter().copied()).collect();
        signed_margin(&convex_hull(&pts), &com).unwrap_or(f64::NEG_INFINITY)
    };

    let mut present = vec![true; blocks.len()];
    let margins: Vec<f64> = (0..blocks.len()).map(|i| margin(i, &present)).collect();
    let mut fallen = BTreeSet::new();
    loop {
        let drop: Vec<usize> = (0..blocks.len()).filter(|&i| present[i] && margin(i, &present) < 0.0).collect();
        if drop.is_empty() {
            break;
        }
        for i in drop {
            present[i] = false;
            fallen.insert(i);
        }
    }
    Ok(StabilityReport { stable: fallen.is_empty(), fallen, margins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;

    fn block(dims: [f64; 3], at: [f64; 3]) -> ObjectInstance {
        ObjectInstance::cuboid(dims, Vec3::from(at), 0.0)
    }

    #[test]
    fn single_block_on_floor() {
        let r = stability_check(&[block([0.1; 3], [0.0, 0.0, 0.05])], DEFAULT_MOVE_THRESHOLD).unwrap();
        assert!(r.stable && r.fallen.is_empty());
        assert!((r.margins[0] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn overhang_beyond_edge_falls() {
        let base = block([0.1; 3], [0.0, 0.0, 0.05]);
        let top = block([0.1, 0.1, 0.05], [0.06, 0.0, 0.125]);
        let r = stability_check(&[base, top], DEFAULT_MOVE_THRESHOLD).unwrap();
        assert!(!r.stable);
        assert_eq!(r.fallen.iter().copied().collect::<Vec<_>>(), vec![1]);
        assert!((r.margins[1] + 0.01).abs() < 1e-12);
    }

    #[test]
    fn bridge_needs_both_supports() {
        let a = block([0.06, 0.06, 0.05], [-0.06, 0.0, 0.025]);
        let b = block([0.06, 0.06, 0.05], [0.08, 0.0, 0.025]);
        let c = block([0.24, 0.06, 0.04], [0.0, 0.0, 0.07]);
        assert!(stability_check(&[a, b, c], DEFAULT_MOVE_THRESHOLD).unwrap().stable);
        let r = stability_check(&[b, c], DEFAULT_MOVE_THRESHOLD).unwrap();
        assert!(!r.stable);
        assert!(r.fallen.contains(&1));
    }

    #[test]
    fn collapse_propagates_upward() {
        let base = block([0.1; 3], [0.0, 0.0, 0.05]);
        let mid = block([0.1, 0.1, 0.05], [0.07, 0.0, 0.125]);
        let top = block([0.04, 0.04, 0.04], [0.07, 0.0, 0.17]);
        let r = stability_check(&[base, mid, top], DEFAULT_MOVE_THRESHOLD).unwrap();
        assert_eq!(r.fallen.into_iter().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn interpenetration_is_rejected() {
        let a = block([0.1; 3], [0.0, 0.0, 0.05]);
        let b = block([0.1; 3], [0.05, 0.0, 0.05]);
        assert!(matches!(stability_check(&[a, b], DEFAULT_MOVE_THRESHOLD), Err(SimError::InvalidStack { .. })));
    }

    #[test]
    fn floating_block_falls() {
        let r = stability_check(&[block([0.1; 3], [0.0, 0.0, 0.3])], DEFAULT_MOVE_THRESHOLD).unwrap();
        assert!(!r.stable);
        assert_eq!(r.margins[0], f64::NEG_INFINITY);
    }
}
