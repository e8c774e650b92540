use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_6, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::collide::{contact_region, overlap, Collider};
use super::SimError;
use crate::geom::{pairwise_view, GridSpec, ObjectInstance, ShapeKind, Vec3, VoxelPairInput};

pub const SWEEP_STEP: f64 = 0.005;
/// Rotation per metre of lever arm (rad/m).
pub const ROTATION_GAIN: f64 = 0.5;
pub const ROTATION_CLIP: f64 = 0.15;
pub const FIXED_MAGNITUDE: (f64, f64) = (0.05, 0.20);
pub const MAX_PAIR_DISTANCE: f64 = 0.5;
pub const DIRECTION_COUNT: usize = 18;
pub const ACTIONS_PER_SCENE: usize = 2 * DIRECTION_COUNT;

const START_TOLERANCE: f64 = 1e-6;
const CONTACT_TOLERANCE: f64 = 1e-9;
const BISECT_ITERS: usize = 48;
const OPPOSING_COS: f64 = 0.5;
const SAMPLE_DIM: (f64, f64) = (0.04, 0.20);
const PLACEMENT_RETRIES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    Fixed,
    Adaptive,
}

impl ActionKind {
    pub fn code(self) -> u8 {
        match self {
            ActionKind::Fixed => 0,
            ActionKind::Adaptive => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(ActionKind::Fixed),
            1 => Some(ActionKind::Adaptive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationAction {
    pub direction: Vec3,
    pub magnitude: f64,
    pub kind: ActionKind,
}

impl PerturbationAction {
    /// Commanded motion vector (direction times magnitude).
    pub fn motion(&self) -> Vec3 {
        self.direction * self.magnitude
    }
}

/// Six axis directions followed by the twelve in-plane diagonals
/// (xy, xz, yz pairs).
pub fn action_directions() -> [Vec3; DIRECTION_COUNT] {
    let mut out = [Vec3::zeros(); DIRECTION_COUNT];
    let mut k = 0;
    for axis in 0..3 {
        for s in [1.0, -1.0] {
            out[k][axis] = s;
            k += 1;
        }
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            out[k][i] = si * FRAC_1_SQRT_2;
            out[k][j] = sj * FRAC_1_SQRT_2;
            k += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    /// Position relative to the anchor centre, world-aligned axes.
    pub point: Vec3,
    /// Unit normal pointing from the anchor toward the referrant.
    pub normal: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEffect {
    pub delta_p: f64,
    /// (roll, pitch, yaw) change, each clipped to `ROTATION_CLIP`.
    pub delta_theta: Vec3,
    pub contacts: Vec<Contact>,
    pub blocked: bool,
    /// Net referrant translation.
    pub displacement: Vec3,
}

impl InteractionEffect {
    pub fn contact_mean(&self) -> Option<Vec3> {
        if self.contacts.is_empty() {
            return None;
        }
        let sum = self.contacts.iter().fold(Vec3::zeros(), |acc, c| acc + c.point);
        Some(sum / self.contacts.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionRecord {
    pub scene_id: u64,
    pub anchor: ObjectInstance,
    pub referrant: ObjectInstance,
    pub pair_view: VoxelPairInput,
    pub actions: Vec<PerturbationAction>,
    pub effects: Vec<InteractionEffect>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairScene {
    pub anchor: ObjectInstance,
    pub referrant: ObjectInstance,
    pub actions: Vec<PerturbationAction>,
}

struct Sweep {
    travel: f64,
    hit: Option<Vec3>,
}

/// Moves `mover` along `dir` for at most `length`, stopping at the first
/// increase in penetration against `fixed`.
fn sweep(fixed: &Collider, mover: &Collider, dir: &Vec3, length: f64) -> Sweep {
    let start = mover.center();
    let base = overlap(fixed, mover).depth.max(0.0) + CONTACT_TOLERANCE;
    let hits = |t: f64| {
        let o = overlap(fixed, &mover.moved_to(start + dir * t));
        (o.depth > base, o.normal)
    };
    let mut t = 0.0;
    while t < length {
        let next = (t + SWEEP_STEP).min(length);
        if hits(next).0 {
            let (mut lo, mut hi) = (t, next);
            for _ in 0..BISECT_ITERS {
                let mid = 0.5 * (lo + hi);
                if hits(mid).0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Sweep { travel: lo, hit: Some(hits(hi).1) };
        }
        t = next;
    }
    Sweep { travel: length, hit: None }
}

fn validate_action(action: &PerturbationAction) -> Result<(), SimError> {
    if !(action.magnitude.is_finite() && action.magnitude > 0.0) {
        return Err(SimError::DegenerateAction(format!("magnitude {}", action.magnitude)));
    }
    let n = action.direction.norm();
    if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
        return Err(SimError::DegenerateAction(format!("direction norm {n}")));
    }
    Ok(())
}

/// Executes one perturbation of `referrant` while `anchor` stays fixed.
pub fn apply_perturbation(
    anchor: &ObjectInstance,
    referrant: &ObjectInstance,
    action: &PerturbationAction,
) -> Result<InteractionEffect, SimError> {
    validate_action(action)?;
    let fixed = Collider::from_object(anchor, Vec3::zeros());
    let start = referrant.position - anchor.position;
    let mover = Collider::from_object(referrant, start);
    let initial = overlap(&fixed, &mover).depth;
    if initial > START_TOLERANCE {
        return Err(SimError::Interpenetration(initial));
    }

    let mut contacts = Vec::new();
    let mut torque = Vec3::zeros();
    let mut blocked = false;
    let mut record = |pos: Vec3, normal: Vec3, dir: &Vec3, contacts: &mut Vec<Contact>| {
        if let Some((centre, extremes)) = contact_region(&fixed, &mover.moved_to(pos), &normal) {
            torque += dir.cross(&(centre - pos));
            contacts.push(Contact { point: centre, normal });
            contacts.extend(extremes.into_iter().map(|p| Contact { point: p, normal }));
        }
    };

    let dir = action.direction;
    let first = sweep(&fixed, &mover, &dir, action.magnitude);
    let mut pos = start + dir * first.travel;
    if let Some(normal) = first.hit {
        record(pos, normal, &dir, &mut contacts);
        if normal.dot(&dir) < -OPPOSING_COS {
            blocked = true;
        } else {
            let tangent = dir - normal * normal.dot(&dir);
            let remaining = (action.magnitude - first.travel) * tangent.norm();
            if tangent.norm() > 1e-12 && remaining > 0.0 {
                let slide_dir = tangent.normalize();
                let second = sweep(&fixed, &mover.moved_to(pos), &slide_dir, remaining);
                pos += slide_dir * second.travel;
                if let Some(n2) = second.hit {
                    record(pos, n2, &slide_dir, &mut contacts);
                    blocked = true;
                }
            }
        }
    }

    let final_depth = overlap(&fixed, &mover.moved_to(pos)).depth;
    assert!(final_depth <= START_TOLERANCE.max(initial), "perturbation left interpenetration {final_depth}");
    let delta_theta = (torque * ROTATION_GAIN).map(|v| v.clamp(-ROTATION_CLIP, ROTATION_CLIP));
    let displacement = pos - start;
    Ok(InteractionEffect { delta_p: displacement.norm(), delta_theta, contacts, blocked, displacement })
}

fn random_object<R: Rng>(rng: &mut R, yaw: f64) -> ObjectInstance {
    let mut e = [0.0; 3];
    for v in e.iter_mut() {
        *v = rng.random_range(SAMPLE_DIM.0..=SAMPLE_DIM.1);
    }
    match ShapeKind::ALL[rng.random_range(0..3)] {
        ShapeKind::Cuboid => ObjectInstance::cuboid(e, Vec3::zeros(), yaw),
        ShapeKind::Cylinder => ObjectInstance::cylinder(e[0] / 2.0, e[2], Vec3::zeros(), yaw),
        ShapeKind::Sphere => ObjectInstance::sphere(e[0] / 2.0, Vec3::zeros()),
    }
}

/// Brings `obj` from `from` toward the anchor along `dir` until it touches.
fn approach(anchor: &Collider, obj: &ObjectInstance, from: Vec3, dir: Vec3) -> Option<Vec3> {
    let mover = Collider::from_object(obj, from);
    if overlap(anchor, &mover).depth > 0.0 {
        return None;
    }
    let s = sweep(anchor, &mover, &dir, 2.0 * MAX_PAIR_DISTANCE);
    s.hit.map(|_| from + dir * s.travel)
}

fn place<R: Rng>(
    rng: &mut R,
    anchor: &ObjectInstance,
    fixed: &Collider,
    obj: &ObjectInstance,
    max_distance: f64,
) -> Option<Vec3> {
    let ha = anchor.aabb_half();
    let hr = obj.aabb_half();
    let mode: f64 = rng.random();
    let lateral = |rng: &mut R, k: usize| {
        let span = ha[k] + 0.5 * hr[k];
        rng.random_range(-span..=span)
    };
    if mode < 0.4 {
        // resting on top of or underneath the anchor
        let up = if mode < 0.3 { 1.0 } else { -1.0 };
        let from = Vec3::new(lateral(rng, 0), lateral(rng, 1), up * (ha.z + hr.z + 0.05));
        approach(fixed, obj, from, Vec3::new(0.0, 0.0, -up))
    } else if mode < 0.8 {
        // beside the anchor, touching or with a small gap
        let angle = rng.random_range(0.0..2.0 * PI);
        let u = Vec3::new(angle.cos(), angle.sin(), 0.0);
        let z = rng.random_range(-(ha.z + hr.z) * 0.8..=(ha.z + hr.z) * 0.8);
        let from = u * (ha.x.max(ha.y) * 2.0 + hr.x.max(hr.y) * 2.0 + 0.05) + Vec3::new(0.0, 0.0, z);
        let touch = approach(fixed, obj, from, -u)?;
        let gap = if mode < 0.65 { 0.0 } else { rng.random_range(0.005..=0.06) };
        Some(touch + u * gap)
    } else {
        loop {
            let p = Vec3::new(
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
            );
            if p.norm() <= 1.0 {
                return Some(p * max_distance);
            }
        }
    }
}

/// Samples an anchor at the origin (yaw 0), a referrant within
/// `MAX_PAIR_DISTANCE` and the 36-action set. Fully determined by `seed`.
pub fn sample_pair_scene(seed: u64) -> Result<PairScene, SimError> {
    sample_pair_scene_within(seed, MAX_PAIR_DISTANCE)
}

/// As [`sample_pair_scene`] with a tighter bound on the referrant distance.
pub fn sample_pair_scene_within(seed: u64, max_distance: f64) -> Result<PairScene, SimError> {
    let max_distance = max_distance.min(MAX_PAIR_DISTANCE);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchor = random_object(&mut rng, 0.0);
    let fixed = Collider::from_object(&anchor, Vec3::zeros());
    for _ in 0..PLACEMENT_RETRIES {
        let yaw = rng.random_range(-FRAC_PI_6..=FRAC_PI_6);
        let mut referrant = random_object(&mut rng, yaw);
        let Some(pos) = place(&mut rng, &anchor, &fixed, &referrant, max_distance) else { continue };
        referrant.position = pos;
        let distance = pos.norm();
        if distance > max_distance || distance == 0.0 {
            continue;
        }
        if overlap(&fixed, &Collider::from_object(&referrant, pos)).depth > START_TOLERANCE {
            continue;
        }
        let dirs = action_directions();
        let mut actions = Vec::with_capacity(ACTIONS_PER_SCENE);
        for d in dirs.iter() {
            let magnitude = rng.random_range(FIXED_MAGNITUDE.0..=FIXED_MAGNITUDE.1);
            actions.push(PerturbationAction { direction: *d, magnitude, kind: ActionKind::Fixed });
        }
        for d in dirs.iter() {
            actions.push(PerturbationAction { direction: *d, magnitude: distance, kind: ActionKind::Adaptive });
        }
        return Ok(PairScene { anchor, referrant, actions });
    }
    Err(SimError::PlacementFailed(PLACEMENT_RETRIES))
}

/// Samples a pair scene, executes every action and voxelises the pair view.
/// The referrant centre is kept inside the pair-view grid.
pub fn generate_interaction(scene_id: u64, seed: u64, grid: &GridSpec) -> Result<InteractionRecord, SimError> {
    let half = grid.half_extent();
    let scene = sample_pair_scene_within(seed, half.x.min(half.y).min(half.z))?;
    let effects = scene
        .actions
        .iter()
        .map(|a| apply_perturbation(&scene.anchor, &scene.referrant, a))
        .collect::<Result<Vec<_>, _>>()?;
    let pair_view = pairwise_view(&[scene.anchor, scene.referrant], 0, 1, grid)?;
    // both objects must occupy a voxel for the adaptive ratio to be defined
    pair_view.center_distance()?;
    Ok(InteractionRecord {
        scene_id,
        anchor: scene.anchor,
        referrant: scene.referrant,
        pair_view,
        actions: scene.actions,
        effects,
    })
}
