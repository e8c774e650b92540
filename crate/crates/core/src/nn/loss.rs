//! Scalar losses. Each returns the value together with its gradient.

use super::NnError;

/// Mean squared error and d/da.
pub fn mse(a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(a.len(), b.len());
    let n = a.len().max(1) as f64;
    let mut v = 0.0;
    let g = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            v += d * d;
            2.0 * d / n
        })
        .collect();
    (v / n, g)
}

/// Mean absolute error and d/da (subgradient 0 at equality).
pub fn l1(a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(a.len(), b.len());
    let n = a.len().max(1) as f64;
    let mut v = 0.0;
    let g = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            v += d.abs();
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    (v / n, g)
}

/// Binary cross-entropy on a logit, computed stably; returns (loss, dloss/dlogit).
pub fn bce_with_logits(logit: f64, label: f64) -> (f64, f64) {
    let loss = logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p();
    let p = 1.0 / (1.0 + (-logit).exp());
    (loss, p - label)
}

/// Hinge `max(0, d_ap - d_an + gamma)`; returns (loss, d/d_ap, d/d_an).
pub fn triplet(d_ap: f64, d_an: f64, gamma: f64) -> Result<(f64, f64, f64), NnError> {
    if !(gamma >= 0.0) {
        return Err(NnError::Config(format!("triplet margin {gamma} must be non-negative")));
    }
    if !(d_ap.is_finite() && d_an.is_finite()) {
        return Err(NnError::NonFinite("triplet distances".into()));
    }
    let v = d_ap - d_an + gamma;
    Ok(if v > 0.0 { (v, 1.0, -1.0) } else { (0.0, 0.0, 0.0) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_formula() {
        assert_eq!(triplet(4.0, 1.0, 2.0).unwrap().0, 5.0);
        assert_eq!(triplet(1.0, 4.0, 2.0).unwrap().0, 0.0);
        assert!(triplet(1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn bce_matches_direct_formula() {
        for (z, y) in [(0.3f64, 1.0f64), (-2.0, 0.0), (5.0, 0.0), (-40.0, 1.0)] {
            let p: f64 = 1.0 / (1.0 + (-z).exp());
            let direct = -(y * p.ln() + (1.0 - y) * (1.0 - p).ln());
            let (l, g) = bce_with_logits(z, y);
            assert!((l - direct).abs() < 1e-9 * direct.max(1.0));
            assert!((g - (p - y)).abs() < 1e-12);
            let h = 1e-6;
            let fd = (bce_with_logits(z + h, y).0 - bce_with_logits(z - h, y).0) / (2.0 * h);
            assert!((fd - g).abs() < 1e-6);
        }
    }

    #[test]
    fn mse_and_l1_gradients() {
        let (v, g) = mse(&[1.0, 3.0], &[0.0, 1.0]);
        assert_eq!(v, 2.5);
        assert_eq!(g, vec![1.0, 2.0]);
        let (v, g) = l1(&[1.0, 3.0, 2.0], &[0.0, 4.0, 2.0]);
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(g, vec![1.0 / 3.0, -1.0 / 3.0, 0.0]);
    }
}
