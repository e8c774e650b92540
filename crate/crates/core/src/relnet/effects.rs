use super::RelnetError;
use crate::geom::VoxelPairInput;
use crate::minisim::{action_directions, ActionKind, InteractionEffect, InteractionRecord, PerturbationAction};

/// Cartesian action (3) followed by the fixed/adaptive one-hot (2).
pub const ACTION_INPUT_LEN: usize = 5;
/// Voxel displacement (3), orientation change (3), contact mean in voxels (3).
pub const TARGET_LEN: usize = 9;

pub fn action_input(action: &PerturbationAction) -> [f64; ACTION_INPUT_LEN] {
    let m = action.motion();
    let (f, a) = match action.kind {
        ActionKind::Fixed => (1.0, 0.0),
        ActionKind::Adaptive => (0.0, 1.0),
    };
    [m.x, m.y, m.z, f, a]
}

fn ratio_with_distance(effect: &InteractionEffect, action: &PerturbationAction, distance: f64) -> Result<f64, RelnetError> {
    match action.kind {
        ActionKind::Fixed => Ok(effect.delta_p),
        ActionKind::Adaptive => {
            if distance <= 0.0 {
                Err(RelnetError::ZeroDistance)
            } else {
                Ok(effect.delta_p / distance)
            }
        }
    }
}

/// Observed over desired displacement. The desired value is 1 for fixed
/// actions and the voxel centre distance of the pair for adaptive ones.
pub fn dp_ratio(effect: &InteractionEffect, action: &PerturbationAction, pair_view: &VoxelPairInput) -> Result<f64, RelnetError> {
    let distance = match action.kind {
        ActionKind::Fixed => 1.0,
        ActionKind::Adaptive => pair_view.center_distance()?,
    };
    ratio_with_distance(effect, action, distance)
}

/// Regression targets and whether the contact mean is valid.
pub fn effect_targets(effect: &InteractionEffect, voxel_size: f64) -> ([f64; TARGET_LEN], bool) {
    let d = effect.displacement / voxel_size;
    let mut t = [0.0; TARGET_LEN];
    t[0] = d.x.round();
    t[1] = d.y.round();
    t[2] = d.z.round();
    t[3..6].copy_from_slice(effect.delta_theta.as_slice());
    let present = match effect.contact_mean() {
        Some(mu) => {
            let mu = mu / voxel_size;
            t[6..9].copy_from_slice(mu.as_slice());
            true
        }
        None => false,
    };
    (t, present)
}

fn direction_index(action: &PerturbationAction) -> u8 {
    let dirs = action_directions();
    let mut best = 0;
    for (i, d) in dirs.iter().enumerate() {
        if d.dot(&action.direction) > dirs[best].dot(&action.direction) {
            best = i;
        }
    }
    best as u8
}

/// Per-action scalars used for scene similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectSummary {
    pub direction: Vec<u8>,
    pub kind: Vec<ActionKind>,
    pub magnitude: Vec<f64>,
    pub dp_ratio: Vec<f64>,
    /// Sum of absolute orientation-change components.
    pub dtheta: Vec<f64>,
}

impl EffectSummary {
    pub fn from_record(rec: &InteractionRecord) -> Result<Self, RelnetError> {
        if rec.actions.len() != rec.effects.len() {
            return Err(RelnetError::Data(format!("scene {}: actions and effects differ in length", rec.scene_id)));
        }
        let needs_distance = rec.actions.iter().any(|a| a.kind == ActionKind::Adaptive);
        let distance = if needs_distance { rec.pair_view.center_distance()? } else { 1.0 };
        let mut s = Self { direction: vec![], kind: vec![], magnitude: vec![], dp_ratio: vec![], dtheta: vec![] };
        for (a, e) in rec.actions.iter().zip(&rec.effects) {
            s.direction.push(direction_index(a));
            s.kind.push(a.kind);
            s.magnitude.push(a.magnitude);
            s.dp_ratio.push(ratio_with_distance(e, a, distance)?);
            s.dtheta.push(e.delta_theta.iter().map(|v| v.abs()).sum());
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.kind.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kind.is_empty()
    }
}

/// Network inputs and targets derived once from an interaction record.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRecord {
    pub scene_id: u64,
    pub actions: Vec<[f64; ACTION_INPUT_LEN]>,
    pub targets: Vec<[f64; TARGET_LEN]>,
    pub contact_present: Vec<bool>,
    pub summary: EffectSummary,
}

impl PreparedRecord {
    pub fn new(rec: &InteractionRecord) -> Result<Self, RelnetError> {
        let vs = rec.pair_view.grid.spec.voxel_size;
        let summary = EffectSummary::from_record(rec)?;
        let mut out = Self { scene_id: rec.scene_id, actions: vec![], targets: vec![], contact_present: vec![], summary };
        for (a, e) in rec.actions.iter().zip(&rec.effects) {
            out.actions.push(action_input(a));
            let (t, present) = effect_targets(e, vs);
            out.targets.push(t);
            out.contact_present.push(present);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{pairwise_view, GridSpec, ObjectInstance, Vec3};

    fn effect(delta_p: f64) -> InteractionEffect {
        InteractionEffect {
            delta_p,
            delta_theta: Vec3::zeros(),
            contacts: vec![],
            blocked: false,
            displacement: Vec3::new(delta_p, 0.0, 0.0),
        }
    }

    fn act(kind: ActionKind, magnitude: f64) -> PerturbationAction {
        PerturbationAction { direction: Vec3::x(), magnitude, kind }
    }

    fn view(distance: f64) -> VoxelPairInput {
        let scene = [
            ObjectInstance::cuboid([0.04; 3], Vec3::zeros(), 0.0),
            ObjectInstance::cuboid([0.04; 3], Vec3::new(distance, 0.0, 0.0), 0.0),
        ];
        pairwise_view(&scene, 0, 1, &GridSpec::desk()).unwrap()
    }

    #[test]
    fn ratio_cases() {
        let v = view(0.24);
        assert!((v.center_distance().unwrap() - 0.24).abs() < 1e-12);
        assert_eq!(dp_ratio(&effect(0.07), &act(ActionKind::Fixed, 0.1), &v).unwrap(), 0.07);
        assert!((dp_ratio(&effect(0.12), &act(ActionKind::Adaptive, 0.24), &v).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(dp_ratio(&effect(0.0), &act(ActionKind::Fixed, 0.1), &v).unwrap(), 0.0);
    }

    #[test]
    fn zero_distance_is_an_error() {
        let e = effect(0.1);
        assert_eq!(ratio_with_distance(&e, &act(ActionKind::Adaptive, 0.1), 0.0), Err(RelnetError::ZeroDistance));
    }

    #[test]
    fn action_input_one_hot() {
        let a = action_input(&act(ActionKind::Adaptive, 0.3));
        assert_eq!(a, [0.3, 0.0, 0.0, 0.0, 1.0]);
        let f = action_input(&act(ActionKind::Fixed, 0.1));
        assert_eq!(&f[3..], &[1.0, 0.0]);
    }

    #[test]
    fn targets_in_voxel_units() {
        let mut e = effect(0.1);
        let (t, present) = effect_targets(&e, 0.02);
        assert_eq!(&t[..3], &[5.0, 0.0, 0.0]);
        assert!(!present);
        e.contacts.push(crate::minisim::Contact { point: Vec3::new(0.04, 0.0, 0.02), normal: Vec3::z() });
        let (t, present) = effect_targets(&e, 0.02);
        assert!(present);
        assert!((t[6] - 2.0).abs() < 1e-12 && (t[8] - 1.0).abs() < 1e-12);
    }
}
