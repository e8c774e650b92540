use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::Sequential;
use super::params::ParamSet;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckConfig {
    /// Initial central-difference step.
    pub step: f64,
    /// Smallest step tried before an element is treated as sitting on a kink.
    pub min_step: f64,
    pub tolerance: f64,
    /// Denominator floor of the relative error.
    pub abs_floor: f64,
    /// Check at most this many entries per block (sampled); `None` checks all.
    pub max_per_block: Option<usize>,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self { step: 1e-4, min_step: 1e-7, tolerance: 1e-4, abs_floor: 1e-6, max_per_block: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    /// Max relative error per parameter block, plus `"input"` when checked.
    pub blocks: Vec<(String, f64)>,
    pub max_error: f64,
    pub checked: usize,
    /// Entries skipped because the finite difference never stabilised.
    pub kinks: usize,
    pub passed: bool,
}

fn rel_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Central difference of `eval` around `x`, halving the step until two
/// successive estimates agree. `None` means the estimate never settled.
fn stable_difference<F: FnMut(f64) -> Result<f64, NnError>>(
    mut eval: F,
    x: f64,
    cfg: &GradcheckConfig,
) -> Result<Option<f64>, NnError> {
    let mut h = cfg.step;
    let mut prev = (eval(x + h)? - eval(x - h)?) / (2.0 * h);
    while h >= cfg.min_step {
        h *= 0.5;
        let cur = (eval(x + h)? - eval(x - h)?) / (2.0 * h);
        if rel_error(prev, cur, cfg.abs_floor) <= 0.1 * cfg.tolerance {
            return Ok(Some(cur));
        }
        prev = cur;
    }
    Ok(None)
}

fn indices(len: usize, cfg: &GradcheckConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    match cfg.max_per_block {
        Some(k) if k < len => {
            let mut v = sample(rng, len, k).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..len).collect(),
    }
}

/// Compares the analytic gradient returned by `f` against finite
/// differences of its loss, block by block.
pub fn gradcheck<F>(params: &mut ParamSet, mut f: F, cfg: &GradcheckConfig) -> Result<GradcheckReport, NnError>
where
    F: FnMut(&ParamSet) -> Result<(f64, Vec<f64>), NnError>,
{
    let (_, analytic) = f(params)?;
    if analytic.len() != params.len() {
        return Err(NnError::Shape { layer: "gradcheck".into(), expected: params.len(), got: analytic.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = GradcheckReport { blocks: Vec::new(), max_error: 0.0, checked: 0, kinks: 0, passed: true };
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let range = params.range(id);
        let mut worst: f64 = 0.0;
        for k in indices(range.len(), cfg, &mut rng) {
            let i = range.start + k;
            let x0 = params.values()[i];
            let numeric = stable_difference(
                |x| {
                    params.values_mut()[i] = x;
                    f(params).map(|r| r.0)
                },
                x0,
                cfg,
            )?;
            params.values_mut()[i] = x0;
            match numeric {
                Some(n) => {
                    worst = worst.max(rel_error(analytic[i], n, cfg.abs_floor));
                    report.checked += 1;
                }
                None => report.kinks += 1,
            }
        }
        report.blocks.push((params.name(id).to_string(), worst));
        report.max_error = report.max_error.max(worst);
    }
    report.passed = report.max_error <= cfg.tolerance;
    Ok(report)
}

/// Gradient check of a [`Sequential`] under the scalar loss `sum(c * y)` with
/// fixed random coefficients `c`, including the input gradient.
pub fn gradcheck_sequential(
    net: &Sequential,
    params: &mut ParamSet,
    input: &[f64],
    cfg: &GradcheckConfig,
) -> Result<GradcheckReport, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
    let coeffs: Vec<f64> = (0..net.output_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let loss = |p: &ParamSet, x: &[f64]| -> Result<f64, NnError> {
        let (y, _) = net.forward(p, x)?;
        Ok(y.iter().zip(&coeffs).map(|(a, b)| a * b).sum())
    };
    let mut report = gradcheck(
        params,
        |p| {
            let (y, cache) = net.forward(p, input)?;
            let v = y.iter().zip(&coeffs).map(|(a, b)| a * b).sum();
            let mut g = p.zeros_like();
            net.backward(p, &cache, &coeffs, &mut g, false)?;
            Ok((v, g))
        },
        cfg,
    )?;

    let (_, cache) = net.forward(params, input)?;
    let mut scratch = params.zeros_like();
    let dx = net.backward(params, &cache, &coeffs, &mut scratch, true)?.expect("input gradient requested");
    let mut x = input.to_vec();
    let mut worst: f64 = 0.0;
    for i in indices(x.len(), cfg, &mut rng) {
        let x0 = x[i];
        let numeric = stable_difference(
            |v| {
                x[i] = v;
                loss(params, &x)
            },
            x0,
            cfg,
        )?;
        x[i] = x0;
        match numeric {
            Some(n) => {
                worst = worst.max(rel_error(dx[i], n, cfg.abs_floor));
                report.checked += 1;
            }
            None => report.kinks += 1,
        }
    }
    report.blocks.push(("input".into(), worst));
    report.max_error = report.max_error.max(worst);
    report.passed = report.max_error <= cfg.tolerance;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::super::layers::{Conv3dSpec, LayerSpec};
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    #[test]
    fn identity_fc_has_no_error() {
        let mut p = ParamSet::new();
        let net = Sequential::new(&mut p, "id", 3, &[LayerSpec::Fc { inputs: 3, outputs: 3 }], &mut rng()).unwrap();
        let r = gradcheck_sequential(&net, &mut p, &[0.2, -0.4, 0.9], &GradcheckConfig::default()).unwrap();
        assert!(r.passed);
        assert!(r.max_error < 1e-8, "{r:?}");
    }

    #[test]
    fn three_layer_mlp() {
        let mut p = ParamSet::new();
        let specs = [
            LayerSpec::Fc { inputs: 5, outputs: 8 },
            LayerSpec::Relu,
            LayerSpec::Fc { inputs: 8, outputs: 6 },
            LayerSpec::Relu,
            LayerSpec::Fc { inputs: 6, outputs: 2 },
        ];
        let net = Sequential::new(&mut p, "mlp", 5, &specs, &mut rng()).unwrap();
        let x: Vec<f64> = (0..5).map(|i| (i as f64 * 1.3).sin()).collect();
        let r = gradcheck_sequential(&net, &mut p, &x, &GradcheckConfig::default()).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn conv_stack() {
        let mut p = ParamSet::new();
        let c1 = Conv3dSpec { in_channels: 2, out_channels: 3, kernel: 3, stride: 2, padding: 1, in_dims: [5, 4, 6] };
        let c2 = Conv3dSpec { in_channels: 3, out_channels: 2, kernel: 3, stride: 1, padding: 1, in_dims: c1.out_dims() };
        let specs = [LayerSpec::Conv3d(c1), LayerSpec::Relu, LayerSpec::Conv3d(c2), LayerSpec::Flatten];
        let net = Sequential::new(&mut p, "conv", c1.in_len(), &specs, &mut rng()).unwrap();
        let x: Vec<f64> = (0..c1.in_len()).map(|i| ((i * 7919) % 13) as f64 / 13.0 - 0.4).collect();
        let r = gradcheck_sequential(&net, &mut p, &x, &GradcheckConfig::default()).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn corrupted_gradient_fails() {
        let mut p = ParamSet::new();
        let net = Sequential::new(&mut p, "m", 2, &[LayerSpec::Fc { inputs: 2, outputs: 1 }], &mut rng()).unwrap();
        let x = [0.3, -0.7];
        let r = gradcheck(
            &mut p,
            |p| {
                let (y, cache) = net.forward(p, &x)?;
                let mut g = p.zeros_like();
                net.backward(p, &cache, &[1.0], &mut g, false)?;
                g[0] *= 1.01;
                Ok((y[0], g))
            },
            &GradcheckConfig::default(),
        )
        .unwrap();
        assert!(!r.passed);
    }
}
