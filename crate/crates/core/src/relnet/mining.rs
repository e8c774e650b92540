use super::config::ContrastiveConfig;
use super::effects::EffectSummary;
use crate::minisim::ActionKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    Position,
    Orientation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairRelation {
    Similar,
    Dissimilar,
    /// Either no comparable actions or differences between the thresholds.
    Neither,
}

/// Indices into the mined batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
    pub channel: Channel,
}

/// Largest effect difference over comparable action pairs, or `None` when
/// no pair is comparable. Actions are comparable when they share direction
/// and kind, and fixed ones also have magnitudes within the threshold.
fn max_difference(a: &EffectSummary, b: &EffectSummary, channel: Channel, cfg: &ContrastiveConfig) -> Option<f64> {
    let value = |s: &EffectSummary, i: usize| match channel {
        Channel::Position => s.dp_ratio[i],
        Channel::Orientation => s.dtheta[i],
    };
    let mut worst: Option<f64> = None;
    for i in 0..a.len() {
        for j in 0..b.len() {
            if a.direction[i] != b.direction[j] || a.kind[i] != b.kind[j] {
                continue;
            }
            if a.kind[i] == ActionKind::Fixed
                && (a.magnitude[i] - b.magnitude[j]).abs() >= cfg.fixed_action_compare_threshold
            {
                continue;
            }
            let d = (value(a, i) - value(b, j)).abs();
            worst = Some(worst.map_or(d, |w: f64| w.max(d)));
        }
    }
    worst
}

pub fn scene_relation(a: &EffectSummary, b: &EffectSummary, channel: Channel, cfg: &ContrastiveConfig) -> PairRelation {
    let (sim, diff) = match channel {
        Channel::Position => (cfg.dp_ratio_sim, cfg.dp_ratio_diff),
        Channel::Orientation => (cfg.dtheta_sim, cfg.dtheta_diff),
    };
    match max_difference(a, b, channel, cfg) {
        None => PairRelation::Neither,
        Some(d) if d > diff => PairRelation::Dissimilar,
        Some(d) if d < sim => PairRelation::Similar,
        Some(_) => PairRelation::Neither,
    }
}

/// Batch-all mining: every `(a, p, n)` with `a` similar to `p != a` and
/// dissimilar to `n`. Position triplets come first, each channel ordered by
/// anchor, then positive, then negative.
pub fn mine_triplets(batch: &[EffectSummary], cfg: &ContrastiveConfig) -> Vec<Triplet> {
    let n = batch.len();
    let mut out = Vec::new();
    for channel in [Channel::Position, Channel::Orientation] {
        let mut rel = vec![PairRelation::Neither; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let r = scene_relation(&batch[i], &batch[j], channel, cfg);
                rel[i * n + j] = r;
                rel[j * n + i] = r;
            }
        }
        for a in 0..n {
            let negatives: Vec<usize> = (0..n).filter(|&k| rel[a * n + k] == PairRelation::Dissimilar).collect();
            if negatives.is_empty() {
                continue;
            }
            for p in (0..n).filter(|&k| k != a && rel[a * n + k] == PairRelation::Similar) {
                out.extend(negatives.iter().map(|&neg| Triplet { anchor: a, positive: p, negative: neg, channel }));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(ratios: &[f64]) -> EffectSummary {
        let n = ratios.len();
        EffectSummary {
            direction: (0..n as u8).collect(),
            kind: vec![ActionKind::Adaptive; n],
            magnitude: vec![0.2; n],
            dp_ratio: ratios.to_vec(),
            dtheta: vec![0.0; n],
        }
    }

    #[test]
    fn free_free_blocked() {
        let batch = vec![summary(&[1.0, 1.0]), summary(&[1.0, 1.0]), summary(&[0.0, 0.0])];
        let t = mine_triplets(&batch, &ContrastiveConfig::default());
        let pos: Vec<_> = t.iter().filter(|t| t.channel == Channel::Position).map(|t| (t.anchor, t.positive, t.negative)).collect();
        assert_eq!(pos, vec![(0, 1, 2), (1, 0, 2)]);
        assert!(t.iter().all(|t| t.channel == Channel::Position));
    }

    #[test]
    fn identical_scenes_have_no_triplets() {
        let batch = vec![summary(&[0.5, 0.2]); 5];
        assert!(mine_triplets(&batch, &ContrastiveConfig::default()).is_empty());
    }

    #[test]
    fn fixed_actions_need_close_magnitudes() {
        let mut a = summary(&[0.0]);
        let mut b = summary(&[0.5]);
        a.kind[0] = ActionKind::Fixed;
        b.kind[0] = ActionKind::Fixed;
        b.magnitude[0] = 0.22;
        let cfg = ContrastiveConfig::default();
        assert_eq!(scene_relation(&a, &b, Channel::Position, &cfg), PairRelation::Dissimilar);
        b.magnitude[0] = 0.1;
        assert_eq!(scene_relation(&a, &b, Channel::Position, &cfg), PairRelation::Neither);
    }

    #[test]
    fn gap_between_thresholds_is_neither() {
        let cfg = ContrastiveConfig::default();
        let r = scene_relation(&summary(&[0.0]), &summary(&[0.205]), Channel::Position, &cfg);
        assert_eq!(r, PairRelation::Neither);
    }
}
