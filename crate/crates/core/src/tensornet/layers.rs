//! Layers with explicit forward/backward passes.
//!
//! Parameters live in the layer; gradients are accumulated into a second
//! instance of the same layer (see [`Parameterized::zeroed`]), so forward
//! passes only need `&self`.

use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayViewD, ArrayViewMutD, Axis, Ix1, Zip};
use rand::Rng;

/// Anything with trainable tensors in a fixed order.
pub trait Parameterized: Clone {
    fn params(&self) -> Vec<ArrayViewD<'_, f64>>;
    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>>;

    /// Same shapes, all zeros; used for gradients and optimizer state.
    fn zeroed(&self) -> Self {
        let mut z = self.clone();
        for mut p in z.params_mut() {
            p.fill(0.0);
        }
        z
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn add_scaled(&mut self, other: &Self, scale: f64) {
        let others = other.params();
        for (mut p, o) in self.params_mut().into_iter().zip(others) {
            p.scaled_add(scale, &o);
        }
    }

    fn scale(&mut self, factor: f64) {
        for mut p in self.params_mut() {
            p.mapv_inplace(|v| v * factor);
        }
    }

    fn all_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}

/// He-style scaled uniform initialisation, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`.
pub fn he_uniform<R: Rng + ?Sized>(rng: &mut R, shape: (usize, usize), fan_in: usize) -> Array2<f64> {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    Array2::from_shape_simple_fn(shape, || rng.random_range(-bound..bound))
}

pub fn relu(x: &Array1<f64>) -> Array1<f64> {
    x.mapv(|v| v.max(0.0))
}

pub fn relu3(x: &Array3<f64>) -> Array3<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Zeroes `grad` wherever the ReLU output was not positive.
pub fn relu_backward<D: ndarray::Dimension>(
    grad: &mut ndarray::Array<f64, D>,
    output: &ndarray::Array<f64, D>,
) {
    Zip::from(grad).and(output).for_each(|g, &o| {
        if o <= 0.0 {
            *g = 0.0;
        }
    });
}

/// Fully connected layer, `y = W x + b` with `W: [out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, inputs: usize, outputs: usize) -> Self {
        Self {
            weight: he_uniform(rng, (outputs, inputs), inputs),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.weight.dot(&x) + &self.bias
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&self, x: ArrayView1<f64>, dy: ArrayView1<f64>, grad: &mut Dense) -> Array1<f64> {
        let dy2 = dy.view().insert_axis(Axis(1));
        let x2 = x.view().insert_axis(Axis(0));
        ndarray::linalg::general_mat_mul(1.0, &dy2, &x2, 1.0, &mut grad.weight);
        grad.bias += &dy;
        self.weight.t().dot(&dy)
    }
}

impl Parameterized for Dense {
    fn params(&self) -> Vec<ArrayViewD<'_, f64>> {
        vec![self.weight.view().into_dyn(), self.bias.view().into_dyn()]
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        vec![self.weight.view_mut().into_dyn(), self.bias.view_mut().into_dyn()]
    }
}

/// 3×3 convolution over `[channels, height, width]` with one pixel of zero
/// padding. Implemented as im2col followed by a matrix product.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    /// `[out, in * 9]`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub in_channels: usize,
    pub stride: usize,
}

/// Values a [`Conv2d`] needs to run its backward pass.
#[derive(Debug, Clone)]
pub struct Conv2dCache {
    cols: Array2<f64>,
    input_shape: (usize, usize, usize),
}

const K: usize = 3;

impl Conv2d {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, in_channels: usize, out_channels: usize) -> Self {
        let fan_in = in_channels * K * K;
        Self {
            weight: he_uniform(rng, (out_channels, fan_in), fan_in),
            bias: Array1::zeros(out_channels),
            in_channels,
            stride: 1,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.nrows()
    }

    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        ((h - 1) / self.stride + 1, (w - 1) / self.stride + 1)
    }

    pub fn forward(&self, x: &Array3<f64>) -> (Array3<f64>, Conv2dCache) {
        let (c, h, w) = x.dim();
        debug_assert_eq!(c, self.in_channels);
        let (oh, ow) = self.output_hw(h, w);
        let cols = im2col(x, self.stride, oh, ow);
        let mut y = self.weight.dot(&cols);
        y += &self.bias.view().insert_axis(Axis(1));
        let y = y
            .into_shape_with_order((self.out_channels(), oh, ow))
            .expect("conv output reshape");
        (
            y,
            Conv2dCache {
                cols,
                input_shape: (c, h, w),
            },
        )
    }

    pub fn backward(
        &self,
        cache: &Conv2dCache,
        dy: &Array3<f64>,
        grad: &mut Conv2d,
        need_dx: bool,
    ) -> Option<Array3<f64>> {
        let (o, oh, ow) = dy.dim();
        let dy2 = dy
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((o, oh * ow))
            .expect("conv grad reshape");
        ndarray::linalg::general_mat_mul(1.0, &dy2, &cache.cols.t(), 1.0, &mut grad.weight);
        grad.bias += &dy2.sum_axis(Axis(1));
        need_dx.then(|| {
            let dcols = self.weight.t().dot(&dy2);
            col2im(&dcols, cache.input_shape, self.stride, oh, ow)
        })
    }
}

impl Parameterized for Conv2d {
    fn params(&self) -> Vec<ArrayViewD<'_, f64>> {
        vec![self.weight.view().into_dyn(), self.bias.view().into_dyn()]
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        vec![self.weight.view_mut().into_dyn(), self.bias.view_mut().into_dyn()]
    }
}

fn im2col(x: &Array3<f64>, stride: usize, oh: usize, ow: usize) -> Array2<f64> {
    let (c, h, w) = x.dim();
    let x = x.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let mut cols = Array2::<f64>::zeros((c * K * K, oh * ow));
    let out = cols.as_slice_mut().expect("fresh array");
    for ch in 0..c {
        let plane = &xs[ch * h * w..(ch + 1) * h * w];
        for ky in 0..K {
            for kx in 0..K {
                let row = (ch * K + ky) * K + kx;
                let dst = &mut out[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src_row = &plane[iy as usize * w..(iy as usize + 1) * w];
                    let dst_row = &mut dst[oy * ow..(oy + 1) * ow];
                    if stride == 1 {
                        // ix = ox + kx - 1
                        let lo = if kx == 0 { 1 } else { 0 };
                        let hi = if kx == 2 { ow.min(w - 1) } else { ow.min(w) };
                        for ox in lo..hi {
                            dst_row[ox] = src_row[ox + kx - 1];
                        }
                    } else {
                        for (ox, d) in dst_row.iter_mut().enumerate() {
                            let ix = (ox * stride + kx) as isize - 1;
                            if ix >= 0 && (ix as usize) < w {
                                *d = src_row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(
    cols: &Array2<f64>,
    (c, h, w): (usize, usize, usize),
    stride: usize,
    oh: usize,
    ow: usize,
) -> Array3<f64> {
    let cols = cols.as_standard_layout();
    let cs = cols.as_slice().expect("standard layout");
    let mut x = Array3::<f64>::zeros((c, h, w));
    let xs = x.as_slice_mut().expect("fresh array");
    for ch in 0..c {
        let plane = &mut xs[ch * h * w..(ch + 1) * h * w];
        for ky in 0..K {
            for kx in 0..K {
                let row = (ch * K + ky) * K + kx;
                let src = &cs[row * oh * ow..(row + 1) * oh * ow];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst_row = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                    let src_row = &src[oy * ow..(oy + 1) * ow];
                    for (ox, &v) in src_row.iter().enumerate() {
                        let ix = (ox * stride + kx) as isize - 1;
                        if ix >= 0 && (ix as usize) < w {
                            dst_row[ix as usize] += v;
                        }
                    }
                }
            }
        }
    }
    x
}

/// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
#[derive(Debug, Clone)]
pub struct MaxPoolCache {
    /// Flat input index of each output's maximum.
    argmax: Vec<usize>,
    input_shape: (usize, usize, usize),
}

pub fn max_pool2(x: &Array3<f64>) -> (Array3<f64>, MaxPoolCache) {
    let (c, h, w) = x.dim();
    let (oh, ow) = (h / 2, w / 2);
    let x = x.as_standard_layout();
    let xs = x.as_slice().expect("standard layout");
    let mut y = Array3::<f64>::zeros((c, oh, ow));
    let mut argmax = Vec::with_capacity(c * oh * ow);
    {
        let ys = y.as_slice_mut().expect("fresh array");
        let mut o = 0;
        for ch in 0..c {
            let base = ch * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let i0 = base + 2 * oy * w + 2 * ox;
                    let mut best = i0;
                    for i in [i0 + 1, i0 + w, i0 + w + 1] {
                        if xs[i] > xs[best] {
                            best = i;
                        }
                    }
                    ys[o] = xs[best];
                    argmax.push(best);
                    o += 1;
                }
            }
        }
    }
    (
        y,
        MaxPoolCache {
            argmax,
            input_shape: (c, h, w),
        },
    )
}

pub fn max_pool2_backward(cache: &MaxPoolCache, dy: &Array3<f64>) -> Array3<f64> {
    let mut dx = Array3::<f64>::zeros(cache.input_shape);
    let dxs = dx.as_slice_mut().expect("fresh array");
    for (&i, &g) in cache.argmax.iter().zip(dy.iter()) {
        dxs[i] += g;
    }
    dx
}

/// 1-D convolution over `[channels, time]` with odd kernel width and
/// "same" zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    /// `[out, in * kernel]`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub in_channels: usize,
    pub kernel: usize,
}

#[derive(Debug, Clone)]
pub struct Conv1dCache {
    cols: Array2<f64>,
    input_shape: (usize, usize),
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        assert!(kernel % 2 == 1, "kernel width must be odd");
        let fan_in = in_channels * kernel;
        Self {
            weight: he_uniform(rng, (out_channels, fan_in), fan_in),
            bias: Array1::zeros(out_channels),
            in_channels,
            kernel,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, Conv1dCache) {
        let (c, t) = x.dim();
        debug_assert_eq!(c, self.in_channels);
        let k = self.kernel;
        let half = k / 2;
        let mut cols = Array2::<f64>::zeros((c * k, t));
        for ch in 0..c {
            let src = x.row(ch);
            for j in 0..k {
                let mut dst = cols.row_mut(ch * k + j);
                // input index = out index + j - half
                let lo = half.saturating_sub(j);
                let hi = (t + half).saturating_sub(j).min(t);
                if lo < hi {
                    dst.slice_mut(s![lo..hi])
                        .assign(&src.slice(s![lo + j - half..hi + j - half]));
                }
            }
        }
        let mut y = self.weight.dot(&cols);
        y += &self.bias.view().insert_axis(Axis(1));
        (
            y,
            Conv1dCache {
                cols,
                input_shape: (c, t),
            },
        )
    }

    pub fn backward(
        &self,
        cache: &Conv1dCache,
        dy: &Array2<f64>,
        grad: &mut Conv1d,
        need_dx: bool,
    ) -> Option<Array2<f64>> {
        ndarray::linalg::general_mat_mul(1.0, dy, &cache.cols.t(), 1.0, &mut grad.weight);
        grad.bias += &dy.sum_axis(Axis(1));
        need_dx.then(|| {
            let dcols = self.weight.t().dot(dy);
            let (c, t) = cache.input_shape;
            let k = self.kernel;
            let half = k / 2;
            let mut dx = Array2::<f64>::zeros((c, t));
            for ch in 0..c {
                for j in 0..k {
                    let src = dcols.row(ch * k + j);
                    let lo = half.saturating_sub(j);
                    let hi = (t + half).saturating_sub(j).min(t);
                    if lo < hi {
                        let mut dst = dx.row_mut(ch);
                        let mut d = dst.slice_mut(s![lo + j - half..hi + j - half]);
                        d += &src.slice(s![lo..hi]);
                    }
                }
            }
            dx
        })
    }
}

impl Parameterized for Conv1d {
    fn params(&self) -> Vec<ArrayViewD<'_, f64>> {
        vec![self.weight.view().into_dyn(), self.bias.view().into_dyn()]
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        vec![self.weight.view_mut().into_dyn(), self.bias.view_mut().into_dyn()]
    }
}

/// Stack of dense layers with ReLU between them (none after the last).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    pub layers: Vec<Dense>,
}

/// Inputs to each layer plus the final output, kept for backprop and LRP.
#[derive(Debug, Clone)]
pub struct DenseNetTrace {
    pub activations: Vec<Array1<f64>>,
    pub output: Array1<f64>,
}

impl DenseNet {
    pub fn new<R: Rng + ?Sized>(rng: &mut R, widths: &[usize]) -> Self {
        assert!(widths.len() >= 2);
        Self {
            layers: widths.windows(2).map(|w| Dense::new(rng, w[0], w[1])).collect(),
        }
    }

    pub fn inputs(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().expect("non-empty").outputs()
    }

    pub fn forward(&self, x: ArrayView1<f64>) -> DenseNetTrace {
        let mut activations = vec![x.to_owned()];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(activations[i].view());
            if i == last {
                return DenseNetTrace {
                    activations,
                    output: z,
                };
            }
            activations.push(relu(&z));
        }
        unreachable!("loop returns at the last layer")
    }

    /// Accumulates gradients and returns `dL/dinput`.
    pub fn backward(&self, trace: &DenseNetTrace, dout: ArrayView1<f64>, grad: &mut DenseNet) -> Array1<f64> {
        let mut d = dout.to_owned();
        for i in (0..self.layers.len()).rev() {
            let input = trace.activations[i].view();
            d = self.layers[i].backward(input, d.view(), &mut grad.layers[i]);
            if i > 0 {
                relu_backward(&mut d, &trace.activations[i]);
            }
        }
        d
    }
}

impl Parameterized for DenseNet {
    fn params(&self) -> Vec<ArrayViewD<'_, f64>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}

/// Dimensionality helper for flattening 3-D activations.
pub fn flatten3(x: &Array3<f64>) -> Array1<f64> {
    x.as_standard_layout()
        .into_owned()
        .into_shape_with_order(x.len())
        .expect("flatten")
        .into_dimensionality::<Ix1>()
        .expect("1-D")
}
