use serde::{Deserialize, Serialize};

use super::stability::{stability_check, DEFAULT_MOVE_THRESHOLD};
use super::SimError;
use crate::geom::polygon::{clip_convex, signed_area};
use crate::geom::{GeomError, ObjectInstance, Vec3, VoxelGrid};

pub const DEFAULT_SWEEP_HALF_WIDTH: f64 = 0.075;
/// Sweep bar start, behind the rearmost object along x.
pub const SWEEP_BAR_OFFSET: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    Sweep,
    Unstack,
}

impl TaskKind {
    pub fn code(self) -> u8 {
        match self {
            TaskKind::Sweep => 0,
            TaskKind::Unstack => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(TaskKind::Sweep),
            1 => Some(TaskKind::Unstack),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Sweep => "sweep",
            TaskKind::Unstack => "unstack",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskArgs {
    /// Block to remove (unstack only).
    pub removal_target: Option<usize>,
    pub half_width: f64,
    pub move_threshold: f64,
}

impl Default for TaskArgs {
    fn default() -> Self {
        Self { removal_target: None, half_width: DEFAULT_SWEEP_HALF_WIDTH, move_threshold: DEFAULT_MOVE_THRESHOLD }
    }
}

/// True iff every object's y centre lies within `half_width` of the median
/// y centre (closed interval).
pub fn sweep_line_oracle(objects: &[ObjectInstance], half_width: f64) -> Result<bool, SimError> {
    if objects.len() < 2 {
        return Err(SimError::TooFewObjects { need: 2, got: objects.len() });
    }
    let mut ys: Vec<f64> = objects.iter().map(|o| o.position.y).collect();
    ys.sort_by(f64::total_cmp);
    let n = ys.len();
    let median = if n % 2 == 1 { ys[n / 2] } else { 0.5 * (ys[n / 2 - 1] + ys[n / 2]) };
    Ok(ys.iter().all(|y| (y - median).abs() <= half_width))
}

/// Fits an axis-aligned box to each object channel of `grid`. Cells claimed
/// by several channels go to the lowest channel index.
pub fn reconstruct_boxes(grid: &VoxelGrid) -> Result<Vec<ObjectInstance>, SimError> {
    let spec = grid.spec;
    let n = spec.n_cells();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for c in 0..grid.n_channels() {
        for (i, &v) in grid.channel(c)?.iter().enumerate() {
            if v && owner[i].is_none() {
                owner[i] = Some(c);
            }
        }
    }
    let mut boxes = Vec::with_capacity(grid.n_channels());
    for c in 0..grid.n_channels() {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for (i, o) in owner.iter().enumerate() {
            if *o != Some(c) {
                continue;
            }
            any = true;
            let p = spec.coords(i);
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if !any {
            return Err(GeomError::EmptyChannel(c).into());
        }
        let min = spec.origin + Vec3::new(lo[0] as f64, lo[1] as f64, lo[2] as f64) * spec.voxel_size;
        let max = spec.origin + Vec3::new(hi[0] as f64 + 1.0, hi[1] as f64 + 1.0, hi[2] as f64 + 1.0) * spec.voxel_size;
        let d = max - min;
        boxes.push(ObjectInstance::cuboid([d.x, d.y, d.z], (min + max) * 0.5, 0.0));
    }
    Ok(boxes)
}

/// Drops boxes straight down, lowest first, onto the floor (z = 0) or the
/// highest xy-overlapping box whose top is within `tolerance` above their
/// current bottom.
pub fn settle(boxes: &[ObjectInstance], tolerance: f64) -> Vec<ObjectInstance> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| boxes[a].bottom().total_cmp(&boxes[b].bottom()).then(a.cmp(&b)));
    let mut out = boxes.to_vec();
    let mut placed: Vec<usize> = Vec::new();
    for &i in &order {
        let bottom = out[i].bottom();
        let fp = out[i].footprint();
        let mut rest: f64 = 0.0;
        for &j in &placed {
            let top = out[j].top();
            if top <= bottom + tolerance && signed_area(&clip_convex(&fp, &out[j].footprint())).abs() > 1e-12 {
                rest = rest.max(top);
            }
        }
        out[i].position.z += rest - bottom;
        placed.push(i);
    }
    out
}

/// Predicts the task precondition by running the oracle on a reconstructed
/// scene.
pub fn real2sim_predict(task: TaskKind, reconstruction: &[ObjectInstance], args: &TaskArgs) -> Result<bool, SimError> {
    if reconstruction.is_empty() {
        return Err(SimError::EmptyReconstruction);
    }
    match task {
        TaskKind::Unstack => {
            let target = args.removal_target.ok_or(SimError::BadTarget(usize::MAX))?;
            if target >= reconstruction.len() {
                return Err(SimError::BadTarget(target));
            }
            let rest: Vec<ObjectInstance> =
                reconstruction.iter().enumerate().filter(|(i, _)| *i != target).map(|(_, o)| *o).collect();
            Ok(stability_check(&rest, args.move_threshold)?.stable)
        }
        TaskKind::Sweep => {
            let bar_x = reconstruction.iter().map(|o| o.position.x - o.aabb_half().x).fold(f64::INFINITY, f64::min)
                - SWEEP_BAR_OFFSET;
            debug_assert!(reconstruction.iter().all(|o| o.position.x > bar_x));
            sweep_line_oracle(reconstruction, args.half_width)
        }
    }
}
