use std::sync::Arc;

use rand::Rng;

use super::params::{BlockId, ParamSet};
use super::{ensure_finite, NnError};

/// A 3D convolution over `[channels, x, y, z]` volumes. Weights are laid out
/// `[out, in, k, k, k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv3dSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub in_dims: [usize; 3],
}

impl Conv3dSpec {
    pub fn out_dims(&self) -> [usize; 3] {
        self.in_dims.map(|d| (d + 2 * self.padding - self.kernel) / self.stride + 1)
    }

    pub fn in_len(&self) -> usize {
        self.in_channels * self.in_dims.iter().product::<usize>()
    }

    pub fn out_len(&self) -> usize {
        self.out_channels * self.out_dims().iter().product::<usize>()
    }

    fn validate(&self) -> Result<(), NnError> {
        let ok = self.in_channels > 0
            && self.out_channels > 0
            && self.kernel > 0
            && self.stride > 0
            && self.in_dims.iter().all(|&d| d + 2 * self.padding >= self.kernel);
        if ok {
            Ok(())
        } else {
            Err(NnError::Config(format!("invalid conv3d {self:?}")))
        }
    }

    /// For input coordinate `i` along one axis: the `(kernel offset, output
    /// coordinate)` pairs it feeds.
    fn taps(&self, i: usize, out_dim: usize) -> Vec<(usize, usize)> {
        (0..self.kernel)
            .filter_map(|k| {
                let shifted = i + self.padding;
                if shifted < k || !(shifted - k).is_multiple_of(self.stride) {
                    return None;
                }
                let o = (shifted - k) / self.stride;
                (o < out_dim).then_some((k, o))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Fc { inputs: usize, outputs: usize },
    Relu,
    Conv3d(Conv3dSpec),
    Flatten,
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    spec: LayerSpec,
    name: String,
    weight: Option<BlockId>,
    bias: Option<BlockId>,
    /// Conv3d only: input index of every patch slot, see [`patch_table`].
    patches: Arc<Vec<u32>>,
}

/// Activations saved by [`Sequential::forward`] for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Cache {
    inputs: Vec<Vec<f64>>,
}

/// A fixed chain of layers whose parameters live in a shared [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Sequential {
    layers: Vec<Layer>,
    input_len: usize,
    output_len: usize,
}

/// Inputs sparser than this use the scatter kernels for conv3d.
const SPARSE_FRACTION: f64 = 0.05;

impl Sequential {
    /// Registers parameters under `prefix.{layer}.weight|bias` and checks
    /// that consecutive layer sizes agree. `input_len` is the flat input size.
    pub fn new<R: Rng>(
        params: &mut ParamSet,
        prefix: &str,
        input_len: usize,
        specs: &[LayerSpec],
        rng: &mut R,
    ) -> Result<Self, NnError> {
        let mut size = input_len;
        let mut layers = Vec::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let name = format!("{prefix}.{i}");
            let mut patches = Arc::default();
            let (weight, bias) = match *spec {
                LayerSpec::Fc { inputs, outputs } => {
                    if inputs != size {
                        return Err(NnError::Shape { layer: name, expected: size, got: inputs });
                    }
                    size = outputs;
                    let w = params.add_uniform(&format!("{name}.weight"), vec![outputs, inputs], inputs, rng)?;
                    let b = params.add_uniform(&format!("{name}.bias"), vec![outputs], inputs, rng)?;
                    (Some(w), Some(b))
                }
                LayerSpec::Conv3d(c) => {
                    c.validate()?;
                    if c.in_len() != size {
                        return Err(NnError::Shape { layer: name, expected: size, got: c.in_len() });
                    }
                    size = c.out_len();
                    let fan_in = c.in_channels * c.kernel.pow(3);
                    let w = params.add_uniform(
                        &format!("{name}.weight"),
                        vec![c.out_channels, c.in_channels, c.kernel, c.kernel, c.kernel],
                        fan_in,
                        rng,
                    )?;
                    let b = params.add_uniform(&format!("{name}.bias"), vec![c.out_channels], fan_in, rng)?;
                    patches = Arc::new(patch_table(&c)?);
                    (Some(w), Some(b))
                }
                LayerSpec::Relu | LayerSpec::Flatten => (None, None),
            };
            layers.push(Layer { spec: *spec, name, weight, bias, patches });
        }
        Ok(Self { layers, input_len, output_len: size })
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    pub fn forward(&self, params: &ParamSet, input: &[f64]) -> Result<(Vec<f64>, Cache), NnError> {
        if input.len() != self.input_len {
            let layer = self.layers.first().map(|l| l.name.clone()).unwrap_or_else(|| "input".into());
            return Err(NnError::Shape { layer, expected: self.input_len, got: input.len() });
        }
        let mut cache = Cache { inputs: Vec::with_capacity(self.layers.len()) };
        let mut x = input.to_vec();
        for layer in &self.layers {
            let y = layer.forward(params, &x)?;
            cache.inputs.push(x);
            x = y;
        }
        Ok((x, cache))
    }

    /// Accumulates parameter gradients into `grads` (a buffer the length of
    /// `params`) and returns the input gradient when requested.
    pub fn backward(
        &self,
        params: &ParamSet,
        cache: &Cache,
        upstream: &[f64],
        grads: &mut [f64],
        want_input_grad: bool,
    ) -> Result<Option<Vec<f64>>, NnError> {
        if cache.inputs.len() != self.layers.len() {
            return Err(NnError::MissingCache);
        }
        if upstream.len() != self.output_len {
            return Err(NnError::Shape { layer: "upstream".into(), expected: self.output_len, got: upstream.len() });
        }
        if grads.len() != params.len() {
            return Err(NnError::Shape { layer: "grads".into(), expected: params.len(), got: grads.len() });
        }
        ensure_finite(upstream, "upstream gradient")?;
        let mut g = upstream.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let need = want_input_grad || i > 0;
            g = layer.backward(params, &cache.inputs[i], &g, grads, need)?;
        }
        Ok(want_input_grad.then_some(g))
    }
}

impl Layer {
    fn forward(&self, params: &ParamSet, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let y = match self.spec {
            LayerSpec::Fc { inputs, outputs } => {
                let w = params.block(self.weight.expect("fc weight"));
                let b = params.block(self.bias.expect("fc bias"));
                let mut y = b.to_vec();
                for o in 0..outputs {
                    y[o] += dot(&w[o * inputs..(o + 1) * inputs], x);
                }
                y
            }
            LayerSpec::Relu => x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect(),
            LayerSpec::Flatten => x.to_vec(),
            LayerSpec::Conv3d(c) => conv_forward(
                &c,
                params.block(self.weight.expect("conv weight")),
                params.block(self.bias.expect("conv bias")),
                &self.patches,
                x,
            ),
        };
        ensure_finite(&y, &self.name)?;
        Ok(y)
    }

    fn backward(
        &self,
        params: &ParamSet,
        x: &[f64],
        g: &[f64],
        grads: &mut [f64],
        need_input: bool,
    ) -> Result<Vec<f64>, NnError> {
        let dx = match self.spec {
            LayerSpec::Fc { inputs, outputs } => {
                let wid = self.weight.expect("fc weight");
                let bid = self.bias.expect("fc bias");
                let w = params.block(wid);
                let wr = params.range(wid);
                let br = params.range(bid);
                let gw = &mut grads[wr];
                for o in 0..outputs {
                    if g[o] == 0.0 {
                        continue;
                    }
                    let row = &mut gw[o * inputs..(o + 1) * inputs];
                    for (gi, xi) in row.iter_mut().zip(x) {
                        *gi += g[o] * xi;
                    }
                }
                for (gb, go) in grads[br].iter_mut().zip(g) {
                    *gb += go;
                }
                if need_input {
                    let mut dx = vec![0.0; inputs];
                    for o in 0..outputs {
                        if g[o] == 0.0 {
                            continue;
                        }
                        let row = &w[o * inputs..(o + 1) * inputs];
                        for (d, wi) in dx.iter_mut().zip(row) {
                            *d += wi * g[o];
                        }
                    }
                    dx
                } else {
                    Vec::new()
                }
            }
            LayerSpec::Relu => x.iter().zip(g).map(|(&xi, &gi)| if xi > 0.0 { gi } else { 0.0 }).collect(),
            LayerSpec::Flatten => g.to_vec(),
            LayerSpec::Conv3d(c) => {
                let wid = self.weight.expect("conv weight");
                let bid = self.bias.expect("conv bias");
                let (wr, br) = (params.range(wid), params.range(bid));
                for o in 0..c.out_channels {
                    let n = g.len() / c.out_channels;
                    grads[br.start + o] += g[o * n..(o + 1) * n].iter().sum::<f64>();
                }
                let w = params.block(wid);
                match (need_input, nonzeros(x)) {
                    (false, Some(nz)) => {
                        conv_weight_grad_sparse(&c, x, &nz, g, &mut grads[wr]);
                        Vec::new()
                    }
                    _ => conv_backward_dense(&c, w, &self.patches, x, g, &mut grads[wr], need_input),
                }
            }
        };
        if need_input {
            ensure_finite(&dx, &self.name)?;
        }
        Ok(dx)
    }
}

/// Dot product over four interleaved partial sums, which lets the loop
/// vectorise. The summation order is fixed, so results are reproducible.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn nonzeros(x: &[f64]) -> Option<Vec<usize>> {
    let nz: Vec<usize> = x.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect();
    ((nz.len() as f64) < SPARSE_FRACTION * x.len() as f64).then_some(nz)
}

struct Geometry {
    id: [usize; 3],
    od: [usize; 3],
    in_vol: usize,
    out_vol: usize,
    k3: usize,
}

impl Geometry {
    fn of(c: &Conv3dSpec) -> Self {
        let id = c.in_dims;
        let od = c.out_dims();
        Self { id, od, in_vol: id.iter().product(), out_vol: od.iter().product(), k3: c.kernel.pow(3) }
    }

    fn split(&self, r: usize) -> [usize; 3] {
        [r / (self.id[1] * self.id[2]), (r / self.id[2]) % self.id[1], r % self.id[2]]
    }
}

/// Per-axis tap tables: for each input coordinate the (k, o) pairs it feeds.
fn tap_tables(c: &Conv3dSpec, g: &Geometry) -> [Vec<Vec<(usize, usize)>>; 3] {
    std::array::from_fn(|a| (0..g.id[a]).map(|i| c.taps(i, g.od[a])).collect())
}

const PAD: u32 = u32::MAX;

/// Input index read by each patch slot `[ci][kx][ky][kz]`, one row of slots
/// per output position, with [`PAD`] for padding.
fn patch_table(c: &Conv3dSpec) -> Result<Vec<u32>, NnError> {
    if c.in_len() >= PAD as usize {
        return Err(NnError::Config(format!("conv3d input of {} values is too large", c.in_len())));
    }
    let g = Geometry::of(c);
    let k = c.kernel;
    let mut table = Vec::with_capacity(g.out_vol * c.in_channels * g.k3);
    let src = |o: usize, a: usize, kk: usize| -> Option<usize> {
        let i = (o * c.stride + kk).checked_sub(c.padding)?;
        (i < g.id[a]).then_some(i)
    };
    for_each_output(&g, |_, o| {
        for ci in 0..c.in_channels {
            for kx in 0..k {
                for ky in 0..k {
                    for kz in 0..k {
                        table.push(match (src(o[0], 0, kx), src(o[1], 1, ky), src(o[2], 2, kz)) {
                            (Some(x), Some(y), Some(z)) => (ci * g.in_vol + (x * g.id[1] + y) * g.id[2] + z) as u32,
                            _ => PAD,
                        });
                    }
                }
            }
        }
    });
    Ok(table)
}

fn for_each_output<F: FnMut(usize, [usize; 3])>(g: &Geometry, mut f: F) {
    for ox in 0..g.od[0] {
        for oy in 0..g.od[1] {
            for oz in 0..g.od[2] {
                f((ox * g.od[1] + oy) * g.od[2] + oz, [ox, oy, oz]);
            }
        }
    }
}

fn conv_forward(c: &Conv3dSpec, w: &[f64], b: &[f64], patches: &[u32], x: &[f64]) -> Vec<f64> {
    let g = Geometry::of(c);
    let k = c.kernel;
    let mut y = vec![0.0; c.out_channels * g.out_vol];
    for o in 0..c.out_channels {
        y[o * g.out_vol..(o + 1) * g.out_vol].fill(b[o]);
    }
    if let Some(nz) = nonzeros(x) {
        let taps = tap_tables(c, &g);
        for idx in nz {
            let v = x[idx];
            let ci = idx / g.in_vol;
            let [ix, iy, iz] = g.split(idx % g.in_vol);
            for &(kx, ox) in &taps[0][ix] {
                for &(ky, oy) in &taps[1][iy] {
                    for &(kz, oz) in &taps[2][iz] {
                        let out = (ox * g.od[1] + oy) * g.od[2] + oz;
                        let koff = (kx * k + ky) * k + kz;
                        for o in 0..c.out_channels {
                            y[o * g.out_vol + out] += v * w[(o * c.in_channels + ci) * g.k3 + koff];
                        }
                    }
                }
            }
        }
        return y;
    }
    let plen = c.in_channels * g.k3;
    let cols = im2col(patches, x);
    // y[o][p] += sum_s w[o][s] * cols[p][s]
    gemm(c.out_channels, plen, g.out_vol, (w, plen, 1), (&cols, 1, plen), 1.0, (&mut y, g.out_vol, 1));
    y
}

fn conv_weight_grad_sparse(c: &Conv3dSpec, x: &[f64], nz: &[usize], gy: &[f64], gw: &mut [f64]) {
    let g = Geometry::of(c);
    let k = c.kernel;
    let taps = tap_tables(c, &g);
    for &idx in nz {
        let v = x[idx];
        let ci = idx / g.in_vol;
        let [ix, iy, iz] = g.split(idx % g.in_vol);
        for &(kx, ox) in &taps[0][ix] {
            for &(ky, oy) in &taps[1][iy] {
                for &(kz, oz) in &taps[2][iz] {
                    let out = (ox * g.od[1] + oy) * g.od[2] + oz;
                    let koff = (kx * k + ky) * k + kz;
                    for o in 0..c.out_channels {
                        gw[(o * c.in_channels + ci) * g.k3 + koff] += v * gy[o * g.out_vol + out];
                    }
                }
            }
        }
    }
}

/// Weight gradient (into `gw`) and, if requested, the input gradient.
fn conv_backward_dense(c: &Conv3dSpec, w: &[f64], patches: &[u32], x: &[f64], gy: &[f64], gw: &mut [f64], need_input: bool) -> Vec<f64> {
    let g = Geometry::of(c);
    let plen = c.in_channels * g.k3;
    let cols = im2col(patches, x);
    // gw[o][s] += sum_p gy[o][p] * cols[p][s]
    gemm(c.out_channels, g.out_vol, plen, (gy, g.out_vol, 1), (&cols, plen, 1), 1.0, (gw, plen, 1));
    if !need_input {
        return Vec::new();
    }
    // dcols[p][s] = sum_o gy[o][p] * w[o][s]
    let mut dcols = vec![0.0; g.out_vol * plen];
    gemm(g.out_vol, c.out_channels, plen, (gy, 1, g.out_vol), (w, plen, 1), 0.0, (&mut dcols, plen, 1));
    let mut dx = vec![0.0; c.in_channels * g.in_vol];
    for (&i, d) in patches.iter().zip(&dcols) {
        if i != PAD {
            dx[i as usize] += d;
        }
    }
    dx
}

/// Patch matrix with one row of `[ci][kx][ky][kz]` inputs per output position.
fn im2col(patches: &[u32], x: &[f64]) -> Vec<f64> {
    patches.iter().map(|&i| if i == PAD { 0.0 } else { x[i as usize] }).collect()
}

type MatRef<'a> = (&'a [f64], usize, usize);

/// `c = a * b + beta * c` for an `m x k` by `k x n` product. Each matrix is
/// given as a slice with its row and column strides.
fn gemm(m: usize, k: usize, n: usize, a: MatRef<'_>, b: MatRef<'_>, beta: f64, c: (&mut [f64], usize, usize)) {
    let extent = |rows: usize, cols: usize, rs: usize, cs: usize| if rows == 0 || cols == 0 { 0 } else { (rows - 1) * rs + (cols - 1) * cs + 1 };
    assert!(a.0.len() >= extent(m, k, a.1, a.2));
    assert!(b.0.len() >= extent(k, n, b.1, b.2));
    assert!(c.0.len() >= extent(m, n, c.1, c.2));
    // SAFETY: the asserts above keep every strided access inside the slices,
    // and `c` is borrowed mutably so it cannot alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1 as isize,
            a.2 as isize,
            b.0.as_ptr(),
            b.1 as isize,
            b.2 as isize,
            beta,
            c.0.as_mut_ptr(),
            c.1 as isize,
            c.2 as isize,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn identity_fc_passes_input_through() {
        let mut p = ParamSet::new();
        let net = Sequential::new(&mut p, "fc", 3, &[LayerSpec::Fc { inputs: 3, outputs: 3 }], &mut rng()).unwrap();
        let w = p.find("fc.0.weight").unwrap();
        let b = p.find("fc.0.bias").unwrap();
        p.set_block(w, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        p.set_block(b, &[0.0; 3]).unwrap();
        let (y, _) = net.forward(&p, &[1.5, -2.0, 0.25]).unwrap();
        assert_eq!(y, vec![1.5, -2.0, 0.25]);
    }

    #[test]
    fn relu_values_and_zero_subgradient() {
        let mut p = ParamSet::new();
        let net = Sequential::new(&mut p, "r", 3, &[LayerSpec::Relu], &mut rng()).unwrap();
        let (y, cache) = net.forward(&p, &[-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(y, vec![0.0, 0.0, 2.0]);
        let mut g = p.zeros_like();
        let dx = net.backward(&p, &cache, &[1.0, 1.0, 1.0], &mut g, true).unwrap().unwrap();
        assert_eq!(dx, vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn scalar_weight_gradient() {
        let mut p = ParamSet::new();
        let net = Sequential::new(&mut p, "s", 1, &[LayerSpec::Fc { inputs: 1, outputs: 1 }], &mut rng()).unwrap();
        let (_, cache) = net.forward(&p, &[2.0]).unwrap();
        let mut g = p.zeros_like();
        net.backward(&p, &cache, &[1.0], &mut g, false).unwrap();
        assert_eq!(g[p.range(p.find("s.0.weight").unwrap())][0], 2.0);
    }

    fn conv(ch: (usize, usize), dims: [usize; 3]) -> Conv3dSpec {
        Conv3dSpec { in_channels: ch.0, out_channels: ch.1, kernel: 3, stride: 2, padding: 1, in_dims: dims }
    }

    #[test]
    fn conv_on_zero_grid_is_bias() {
        let mut p = ParamSet::new();
        let c = conv((2, 3), [4, 4, 4]);
        let net = Sequential::new(&mut p, "c", c.in_len(), &[LayerSpec::Conv3d(c)], &mut rng()).unwrap();
        let (y, _) = net.forward(&p, &vec![0.0; c.in_len()]).unwrap();
        let b = p.block(p.find("c.0.bias").unwrap()).to_vec();
        assert_eq!(c.out_dims(), [2, 2, 2]);
        for o in 0..3 {
            assert!(y[o * 8..(o + 1) * 8].iter().all(|&v| v == b[o]));
        }
    }

    #[test]
    fn sparse_and_dense_conv_agree() {
        let mut p = ParamSet::new();
        let c = conv((2, 4), [6, 5, 7]);
        let net = Sequential::new(&mut p, "c", c.in_len(), &[LayerSpec::Conv3d(c)], &mut rng()).unwrap();
        let mut r = rng();
        let sparse: Vec<f64> = (0..c.in_len()).map(|_| if r.random::<f64>() < 0.1 { 1.0 } else { 0.0 }).collect();
        let dense: Vec<f64> = sparse.iter().map(|v| v + 1e-300).collect();
        let (ys, cs) = net.forward(&p, &sparse).unwrap();
        let (yd, cd) = net.forward(&p, &dense).unwrap();
        for (a, b) in ys.iter().zip(&yd) {
            assert!((a - b).abs() < 1e-12);
        }
        let up: Vec<f64> = (0..ys.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let (mut gs, mut gd) = (p.zeros_like(), p.zeros_like());
        net.backward(&p, &cs, &up, &mut gs, false).unwrap();
        net.backward(&p, &cd, &up, &mut gd, false).unwrap();
        for (a, b) in gs.iter().zip(&gd) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_errors_name_the_layer() {
        let mut p = ParamSet::new();
        let bad = Sequential::new(
            &mut p,
            "m",
            4,
            &[LayerSpec::Fc { inputs: 4, outputs: 3 }, LayerSpec::Fc { inputs: 2, outputs: 1 }],
            &mut rng(),
        );
        assert!(matches!(bad, Err(NnError::Shape { layer, .. }) if layer == "m.1"));
        let mut p = ParamSet::new();
        let net = Sequential::new(&mut p, "m", 4, &[LayerSpec::Fc { inputs: 4, outputs: 3 }], &mut rng()).unwrap();
        assert!(matches!(net.forward(&p, &[0.0; 3]), Err(NnError::Shape { layer, .. }) if layer == "m.0"));
        let mut g = p.zeros_like();
        assert_eq!(net.backward(&p, &Cache::default(), &[0.0; 3], &mut g, false), Err(NnError::MissingCache));
    }

    #[test]
    fn non_finite_input_is_an_error() {
        let mut p = ParamSet::new();
        let net = Sequential::new(&mut p, "m", 2, &[LayerSpec::Fc { inputs: 2, outputs: 1 }], &mut rng()).unwrap();
        assert!(matches!(net.forward(&p, &[f64::NAN, 0.0]), Err(NnError::NonFinite(_))));
    }
}
