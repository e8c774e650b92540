use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::dataset::TaskRecord;
use super::PipelineError;
use crate::geom::polygon::{clip_convex, signed_area};
use crate::geom::{ObjectInstance, Vec3};
use crate::minisim::{stability_check, sweep_line_oracle, TaskKind, DEFAULT_MOVE_THRESHOLD, DEFAULT_SWEEP_HALF_WIDTH};

/// Scenes whose label changes if some support margin (or sweep-band
/// clearance) moved by less than this many metres count as marginal.
pub const MARGINAL_MARGIN: f64 = 0.01;

const BLOCK_HEIGHT: f64 = 0.04;
const BLOCK_SIDE: (f64, f64) = (0.04, 0.07);
const BLOCK_YAW: f64 = 0.25;
const SCENE_HALF_WIDTH: f64 = 0.12;
const BEAM_LENGTH: (f64, f64) = (0.12, 0.20);
/// Centre distance range of block pairs a beam may span.
const BRIDGE_SPAN: (f64, f64) = (0.05, 0.14);
/// Chance that the removal target is drawn from the blocks carrying others
/// rather than from all blocks.
const LOADED_TARGET_PROB: f64 = 0.8;
const PLACE_RETRIES: usize = 64;
const CANDIDATE_CHUNK: usize = 64;
/// Candidate scenes tried per requested scene before giving up on balance.
const MAX_CANDIDATES_PER_SCENE: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct TaskGenOptions {
    pub task: TaskKind,
    pub blocks: Vec<usize>,
    /// Scenes per block count.
    pub count: usize,
    pub seed: u64,
    pub marginal_fraction: f64,
    pub first_scene_id: u64,
}

/// Ground-truth precondition: the stack left after removing `target` stands
/// (unstacking), or every object lies within the sweep band (sweeping).
pub fn label_scene(task: TaskKind, objects: &[ObjectInstance], target: Option<usize>) -> Result<bool, PipelineError> {
    match task {
        TaskKind::Unstack => {
            let rest = without(objects, target)?;
            Ok(stability_check(&rest, DEFAULT_MOVE_THRESHOLD)?.stable)
        }
        TaskKind::Sweep => Ok(sweep_line_oracle(objects, DEFAULT_SWEEP_HALF_WIDTH)?),
    }
}

/// Whether a small geometric change could flip the label: some support
/// margin of the remaining stack, or some object's clearance to the sweep
/// band edge, is below [`MARGINAL_MARGIN`].
pub fn is_marginal(task: TaskKind, objects: &[ObjectInstance], target: Option<usize>) -> Result<bool, PipelineError> {
    match task {
        TaskKind::Unstack => {
            let rest = without(objects, target)?;
            let report = stability_check(&rest, DEFAULT_MOVE_THRESHOLD)?;
            Ok(report.margins.iter().any(|m| m.is_finite() && m.abs() < MARGINAL_MARGIN))
        }
        TaskKind::Sweep => {
            let mut ys: Vec<f64> = objects.iter().map(|o| o.position.y).collect();
            ys.sort_by(f64::total_cmp);
            let n = ys.len();
            let median = if n % 2 == 1 { ys[n / 2] } else { 0.5 * (ys[n / 2 - 1] + ys[n / 2]) };
            Ok(ys.iter().any(|y| ((y - median).abs() - DEFAULT_SWEEP_HALF_WIDTH).abs() < MARGINAL_MARGIN))
        }
    }
}

fn without(objects: &[ObjectInstance], target: Option<usize>) -> Result<Vec<ObjectInstance>, PipelineError> {
    let t = target.ok_or_else(|| PipelineError::Data("unstacking scene without removal target".into()))?;
    if t >= objects.len() {
        return Err(PipelineError::Data(format!("removal target {t} out of range")));
    }
    Ok(objects.iter().enumerate().filter(|(i, _)| *i != t).map(|(_, o)| *o).collect())
}

fn footprints_overlap(a: &ObjectInstance, b: &ObjectInstance) -> bool {
    signed_area(&clip_convex(&a.footprint(), &b.footprint())).abs() > 1e-12
}

/// Whether some other block rests directly on block `i`.
fn carries_load(objects: &[ObjectInstance], i: usize) -> bool {
    let b = &objects[i];
    objects.iter().enumerate().any(|(j, o)| j != i && (o.bottom() - b.top()).abs() < 1e-9 && footprints_overlap(o, b))
}

/// Lowers `block` from above onto the floor or the highest block under it.
fn drop_onto(block: &mut ObjectInstance, placed: &[ObjectInstance]) {
    let rest = placed.iter().filter(|o| footprints_overlap(block, o)).map(|o| o.top()).fold(0.0, f64::max);
    block.position.z = rest + 0.5 * block.dims[2];
}

fn random_block<R: Rng>(rng: &mut R) -> ObjectInstance {
    let sx = rng.random_range(BLOCK_SIDE.0..=BLOCK_SIDE.1);
    let sy = rng.random_range(BLOCK_SIDE.0..=BLOCK_SIDE.1);
    let yaw = rng.random_range(-BLOCK_YAW..=BLOCK_YAW);
    ObjectInstance::cuboid([sx, sy, BLOCK_HEIGHT], Vec3::zeros(), yaw)
}

/// Two placed blocks with equal tops whose centres are close enough for a
/// beam to span them.
fn bridge_pairs(placed: &[ObjectInstance]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for a in 0..placed.len() {
        for b in a + 1..placed.len() {
            let (pa, pb) = (placed[a], placed[b]);
            let d = ((pa.position.x - pb.position.x).powi(2) + (pa.position.y - pb.position.y).powi(2)).sqrt();
            if (pa.top() - pb.top()).abs() < 1e-9 && (BRIDGE_SPAN.0..=BRIDGE_SPAN.1).contains(&d) && !footprints_overlap(&pa, &pb) {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

/// A beam laid across `a` and `b`, centred at a random point of the segment
/// between them.
fn beam_over<R: Rng>(rng: &mut R, a: &ObjectInstance, b: &ObjectInstance) -> ObjectInstance {
    let (dx, dy) = (b.position.x - a.position.x, b.position.y - a.position.y);
    let d = (dx * dx + dy * dy).sqrt();
    let len = rng.random_range(BEAM_LENGTH.0..=BEAM_LENGTH.1).max(d + BLOCK_SIDE.0);
    let width = rng.random_range(BLOCK_SIDE.0..=0.06);
    let yaw = dy.atan2(dx) + rng.random_range(-0.1..=0.1);
    let yaw = (yaw + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    let t = rng.random_range(0.0..=1.0);
    let mut beam = ObjectInstance::cuboid([len, width, BLOCK_HEIGHT], Vec3::zeros(), yaw);
    beam.position.x = a.position.x + t * dx + rng.random_range(-0.01..=0.01);
    beam.position.y = a.position.y + t * dy + rng.random_range(-0.01..=0.01);
    beam
}

/// A block set beside `s` with a small gap, so later beams can span both.
fn block_beside<R: Rng>(rng: &mut R, s: &ObjectInstance) -> ObjectInstance {
    let mut b = random_block(rng);
    let angle = rng.random_range(-std::f64::consts::PI..=std::f64::consts::PI);
    let reach = 0.5 * (s.dims[0].max(s.dims[1]) + b.dims[0].max(b.dims[1]));
    let d = reach + rng.random_range(0.005..=0.05);
    b.position.x = s.position.x + d * angle.cos();
    b.position.y = s.position.y + d * angle.sin();
    b
}

/// A stable stack of `n` equal-height blocks. Each new block is placed on
/// the floor, beside an earlier block at the same level, over an earlier
/// block, or as a beam spanning two blocks of equal height, and is then
/// dropped onto whatever lies below it.
fn sample_stack<R: Rng>(rng: &mut R, n: usize) -> Option<Vec<ObjectInstance>> {
    let mut placed: Vec<ObjectInstance> = Vec::with_capacity(n);
    for k in 0..n {
        let mut ok = false;
        for _ in 0..PLACE_RETRIES {
            let pairs = bridge_pairs(&placed);
            let mode: f64 = rng.random();
            let mut b = if k == 0 || mode < 0.15 {
                let mut b = random_block(rng);
                b.position.x = rng.random_range(-SCENE_HALF_WIDTH..=SCENE_HALF_WIDTH);
                b.position.y = rng.random_range(-SCENE_HALF_WIDTH..=SCENE_HALF_WIDTH);
                b
            } else if !pairs.is_empty() && mode < 0.6 {
                let (i, j) = pairs[rng.random_range(0..pairs.len())];
                beam_over(rng, &placed[i], &placed[j])
            } else if mode < 0.75 {
                let s = placed[rng.random_range(0..placed.len())];
                block_beside(rng, &s)
            } else {
                let s = placed[rng.random_range(0..placed.len())];
                let mut b = random_block(rng);
                for axis in 0..2 {
                    let reach = 0.5 * (s.dims[axis] + b.dims[axis]);
                    b.position[axis] = s.position[axis] + rng.random_range(-0.8..=0.8) * reach;
                }
                b
            };
            if b.position.x.abs() > SCENE_HALF_WIDTH + 0.05 || b.position.y.abs() > SCENE_HALF_WIDTH + 0.05 {
                continue;
            }
            drop_onto(&mut b, &placed);
            placed.push(b);
            if stability_check(&placed, DEFAULT_MOVE_THRESHOLD).map(|r| r.stable).unwrap_or(false) {
                ok = true;
                break;
            }
            placed.pop();
        }
        if !ok {
            return None;
        }
    }
    Some(placed)
}

fn random_object_on_floor<R: Rng>(rng: &mut R) -> ObjectInstance {
    let side = |rng: &mut R| rng.random_range(0.03..=0.07);
    let yaw = rng.random_range(-std::f64::consts::PI..=std::f64::consts::PI);
    let mut o = match rng.random_range(0..3) {
        0 => ObjectInstance::cuboid([side(rng), side(rng), side(rng)], Vec3::zeros(), yaw),
        1 => ObjectInstance::cylinder(0.5 * side(rng), side(rng), Vec3::zeros(), 0.0),
        _ => ObjectInstance::sphere(0.5 * side(rng), Vec3::zeros()),
    };
    o.position.z = o.half_extents().z;
    o
}

/// Objects spread along x on the floor. Most sit in a band around a common
/// y; with probability one half some are pushed out of it.
fn sample_line<R: Rng>(rng: &mut R, n: usize) -> Option<Vec<ObjectInstance>> {
    let y0 = rng.random_range(-0.05..=0.05);
    let scatter = rng.random::<f64>() < 0.5;
    let mut placed: Vec<ObjectInstance> = Vec::with_capacity(n);
    let span = 0.09 * n as f64;
    for k in 0..n {
        let mut ok = false;
        for _ in 0..PLACE_RETRIES {
            let mut o = random_object_on_floor(rng);
            o.position.x = -0.5 * span + (k as f64 + rng.random_range(0.2..=0.8)) * span / n as f64;
            let dy = if scatter && rng.random::<f64>() < 0.3 {
                rng.random_range(0.05..=0.2) * if rng.random::<bool>() { 1.0 } else { -1.0 }
            } else {
                rng.random_range(-0.06..=0.06)
            };
            o.position.y = y0 + dy;
            if placed.iter().all(|p| !footprints_overlap(p, &o)) {
                placed.push(o);
                ok = true;
                break;
            }
        }
        if !ok {
            return None;
        }
    }
    Some(placed)
}

struct Candidate {
    objects: Vec<ObjectInstance>,
    target: Option<usize>,
    label: bool,
    marginal: bool,
}

fn candidate(task: TaskKind, n: usize, seed: u64, stream: u64) -> Result<Option<Candidate>, PipelineError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let (objects, target) = match task {
        TaskKind::Unstack => match sample_stack(&mut rng, n) {
            Some(o) => {
                let loaded: Vec<usize> = (0..n).filter(|&i| carries_load(&o, i)).collect();
                let t = if !loaded.is_empty() && rng.random::<f64>() < LOADED_TARGET_PROB {
                    loaded[rng.random_range(0..loaded.len())]
                } else {
                    rng.random_range(0..n)
                };
                (o, Some(t))
            }
            None => return Ok(None),
        },
        TaskKind::Sweep => match sample_line(&mut rng, n) {
            Some(o) => (o, None),
            None => return Ok(None),
        },
    };
    let label = label_scene(task, &objects, target)?;
    let marginal = is_marginal(task, &objects, target)?;
    Ok(Some(Candidate { objects, target, label, marginal }))
}

/// Generates `count` labelled scenes per block count.
///
/// Candidates are drawn from per-(block count, attempt) random streams and
/// accepted in order into four quotas (label x marginal), so the positive
/// fraction stays within one scene of one half and the marginal share
/// matches `marginal_fraction`. Non-marginal scenes keep every margin at
/// least [`MARGINAL_MARGIN`]. The output does not depend on thread count.
pub fn generate_task_scenes(opts: &TaskGenOptions) -> Result<Vec<TaskRecord>, PipelineError> {
    let mut out = Vec::with_capacity(opts.blocks.len() * opts.count);
    let mut next_id = opts.first_scene_id;
    for &n in &opts.blocks {
        if n < 2 {
            return Err(PipelineError::Config(format!("task scenes need at least 2 objects, got {n}")));
        }
        let marginal_total = (opts.marginal_fraction * opts.count as f64).round() as usize;
        let plain_total = opts.count - marginal_total;
        // quotas[marginal][label]
        let mut quota = [[plain_total - plain_total / 2, plain_total / 2], [marginal_total - marginal_total / 2, marginal_total / 2]];
        let mut accepted = 0;
        let mut attempt = 0usize;
        let limit = MAX_CANDIDATES_PER_SCENE * opts.count.max(1);
        while accepted < opts.count {
            if attempt >= limit {
                return Err(PipelineError::Data(format!(
                    "could not balance {} scenes with {n} objects after {limit} candidates",
                    opts.task.name()
                )));
            }
            let streams: Vec<u64> = (attempt..attempt + CANDIDATE_CHUNK).map(|a| ((n as u64) << 32) | a as u64).collect();
            attempt += CANDIDATE_CHUNK;
            let batch = streams
                .par_iter()
                .map(|&s| candidate(opts.task, n, opts.seed, s))
                .collect::<Result<Vec<_>, _>>()?;
            for c in batch.into_iter().flatten() {
                let slot = &mut quota[c.marginal as usize][usize::from(!c.label)];
                if *slot == 0 || accepted == opts.count {
                    continue;
                }
                *slot -= 1;
                accepted += 1;
                out.push(TaskRecord {
                    scene_id: next_id,
                    task: opts.task,
                    objects: c.objects,
                    label: c.label,
                    removal_target: c.target,
                    marginal: c.marginal,
                });
                next_id += 1;
            }
        }
    }
    Ok(out)
}
