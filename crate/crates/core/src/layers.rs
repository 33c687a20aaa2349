//! Layers of the three networks: depth-spanning 1D convolution, ReLU,
//! halving average pooling and doubling nearest-neighbour upsampling.
//!
//! Forward functions are pure. Backward functions read the upstream gradient
//! from `output.grad()` and *accumulate* into `input.grad_mut()` (and into the
//! layer's parameter gradients for convolutions). Nothing is reset implicitly;
//! [`crate::optim::optimizer_step`] zeroes parameter gradients after an update.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{length_err, shape_err, Result};
use crate::tensor::Tensor;

/// Padding applied along the height axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Padding {
    /// Zero padding so that the output height equals the input height.
    /// `(k - 1) / 2` zeros go before the signal, the rest after it.
    SameZero,
    /// No padding; output height is `h - k + 1`.
    Valid,
}

impl Padding {
    fn before(self, kernel_height: usize) -> usize {
        match self {
            Padding::SameZero => (kernel_height - 1) / 2,
            Padding::Valid => 0,
        }
    }

    fn output_height(self, input_height: usize, kernel_height: usize) -> Result<usize> {
        match self {
            Padding::SameZero => Ok(input_height),
            Padding::Valid if input_height < kernel_height => Err(length_err!(
                "valid convolution needs height >= {kernel_height}, got {input_height}"
            )),
            Padding::Valid => Ok(input_height - kernel_height + 1),
        }
    }
}

/// Per-parameter optimizer buffers. `first` doubles as the SGD momentum buffer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimState {
    pub weight_first: Vec<f64>,
    pub weight_second: Vec<f64>,
    pub bias_first: Vec<f64>,
    pub bias_second: Vec<f64>,
    pub step: u64,
}

/// A convolution whose kernel spans the whole input depth and slides along
/// the height only. Weights are laid out `[out][in][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    in_depth: usize,
    out_depth: usize,
    kernel_height: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub weight_grad: Vec<f64>,
    pub bias_grad: Vec<f64>,
    pub state: OptimState,
}

impl ConvLayer {
    /// Zero-initialized layer. Panics on a zero dimension.
    pub fn new(in_depth: usize, out_depth: usize, kernel_height: usize) -> Self {
        assert!(
            in_depth > 0 && out_depth > 0 && kernel_height > 0,
            "layer dimensions must be positive"
        );
        let n = out_depth * in_depth * kernel_height;
        ConvLayer {
            in_depth,
            out_depth,
            kernel_height,
            weights: vec![0.0; n],
            bias: vec![0.0; out_depth],
            weight_grad: vec![0.0; n],
            bias_grad: vec![0.0; out_depth],
            state: OptimState {
                weight_first: vec![0.0; n],
                weight_second: vec![0.0; n],
                bias_first: vec![0.0; out_depth],
                bias_second: vec![0.0; out_depth],
                step: 0,
            },
        }
    }

    /// Layer with the given parameters and fresh gradient/optimizer state.
    pub fn with_params(
        in_depth: usize,
        out_depth: usize,
        kernel_height: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if in_depth == 0 || out_depth == 0 || kernel_height == 0 {
            return Err(shape_err!("layer dimensions must be positive"));
        }
        let mut layer = ConvLayer::new(in_depth, out_depth, kernel_height);
        if weights.len() != layer.weights.len() || bias.len() != out_depth {
            return Err(shape_err!(
                "{}x{}x{} layer given {} weights and {} biases",
                out_depth,
                in_depth,
                kernel_height,
                weights.len(),
                bias.len()
            ));
        }
        layer.weights = weights;
        layer.bias = bias;
        Ok(layer)
    }

    /// Draws weights uniformly from `±sqrt(6 / fan_in)` (He bound) and zeroes
    /// the bias.
    pub fn init_uniform<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let fan_in = (self.in_depth * self.kernel_height) as f64;
        let bound = libm::sqrt(6.0 / fan_in);
        for w in &mut self.weights {
            *w = rng.random_range(-bound..bound);
        }
        self.bias.iter_mut().for_each(|b| *b = 0.0);
    }

    #[inline]
    pub fn in_depth(&self) -> usize {
        self.in_depth
    }

    #[inline]
    pub fn out_depth(&self) -> usize {
        self.out_depth
    }

    #[inline]
    pub fn kernel_height(&self) -> usize {
        self.kernel_height
    }

    #[inline]
    pub fn weight_index(&self, out: usize, inp: usize, tap: usize) -> usize {
        (out * self.in_depth + inp) * self.kernel_height + tap
    }

    #[inline]
    pub fn weight(&self, out: usize, inp: usize, tap: usize) -> f64 {
        self.weights[self.weight_index(out, inp, tap)]
    }

    pub fn zero_grad(&mut self) {
        self.weight_grad.iter_mut().for_each(|g| *g = 0.0);
        self.bias_grad.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn scale_grad(&mut self, factor: f64) {
        self.weight_grad.iter_mut().for_each(|g| *g *= factor);
        self.bias_grad.iter_mut().for_each(|g| *g *= factor);
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Drops gradients and optimizer buffers, keeping the parameters.
    pub fn reset_state(&mut self) {
        *self = ConvLayer::with_params(
            self.in_depth,
            self.out_depth,
            self.kernel_height,
            core::mem::take(&mut self.weights),
            core::mem::take(&mut self.bias),
        )
        .expect("shapes unchanged");
    }
}

/// Valid range of output rows `i` for which input row `i + tap - before`
/// exists, clipped to `0..out_h`.
#[inline]
fn tap_range(tap: usize, before: usize, in_h: usize, out_h: usize) -> (usize, usize) {
    // input index = i + tap - before must lie in 0..in_h
    let lo = before.saturating_sub(tap);
    let hi = (in_h + before).saturating_sub(tap).min(out_h);
    (lo, hi.max(lo))
}

pub fn conv1d_forward(input: &Tensor, layer: &ConvLayer, padding: Padding) -> Result<Tensor> {
    if input.depth() != layer.in_depth {
        return Err(shape_err!(
            "convolution expects depth {}, got {}",
            layer.in_depth,
            input.depth()
        ));
    }
    let in_h = input.height();
    let k = layer.kernel_height;
    let out_h = padding.output_height(in_h, k)?;
    let before = padding.before(k);
    let mut output = Tensor::zeros(layer.out_depth, out_h);
    for o in 0..layer.out_depth {
        let row = output.channel_mut(o);
        row.iter_mut().for_each(|v| *v = layer.bias[o]);
        for c in 0..layer.in_depth {
            let x = input.channel(c);
            for tap in 0..k {
                let w = layer.weight(o, c, tap);
                let (lo, hi) = tap_range(tap, before, in_h, out_h);
                if lo >= hi {
                    continue;
                }
                let offset = lo + tap - before;
                for (y, &xv) in row[lo..hi].iter_mut().zip(&x[offset..offset + (hi - lo)]) {
                    *y += w * xv;
                }
            }
        }
    }
    Ok(output)
}

/// Accumulates `d output / d input` into `input.grad` and the parameter
/// gradients into `layer`, given the upstream gradient in `output.grad`.
pub fn conv1d_backward(
    input: &mut Tensor,
    layer: &mut ConvLayer,
    padding: Padding,
    output: &Tensor,
) -> Result<()> {
    if input.depth() != layer.in_depth {
        return Err(shape_err!(
            "convolution expects depth {}, got {}",
            layer.in_depth,
            input.depth()
        ));
    }
    let in_h = input.height();
    let k = layer.kernel_height;
    let out_h = padding.output_height(in_h, k)?;
    if output.shape() != (layer.out_depth, out_h) {
        return Err(shape_err!(
            "output gradient is {}x{}, expected {}x{}",
            output.depth(),
            output.height(),
            layer.out_depth,
            out_h
        ));
    }
    let before = padding.before(k);
    let (x_all, gx_all) = input.split_mut();
    for o in 0..layer.out_depth {
        let gy = output.grad_channel(o);
        layer.bias_grad[o] += gy.iter().sum::<f64>();
        for c in 0..layer.in_depth {
            let x = &x_all[c * in_h..(c + 1) * in_h];
            for tap in 0..k {
                let (lo, hi) = tap_range(tap, before, in_h, out_h);
                if lo >= hi {
                    continue;
                }
                let offset = lo + tap - before;
                let n = hi - lo;
                let idx = layer.weight_index(o, c, tap);
                let w = layer.weights[idx];
                let mut wg = 0.0;
                let gx = &mut gx_all[c * in_h + offset..c * in_h + offset + n];
                for ((g, &xv), gxv) in gy[lo..hi].iter().zip(&x[offset..offset + n]).zip(gx) {
                    wg += g * xv;
                    *gxv += w * g;
                }
                layer.weight_grad[idx] += wg;
            }
        }
    }
    Ok(())
}

pub fn relu(input: &Tensor) -> Tensor {
    input.map(|v| if v > 0.0 { v } else { 0.0 })
}

/// Passes the gradient where the input is strictly positive.
pub fn relu_backward(input: &mut Tensor, output: &Tensor) -> Result<()> {
    input.ensure_same_shape(output, "relu backward")?;
    let (x, gx) = input.split_mut();
    for ((gxv, &xv), &g) in gx.iter_mut().zip(x).zip(output.grad()) {
        if xv > 0.0 {
            *gxv += g;
        }
    }
    Ok(())
}

/// Mean of non-overlapping pairs along the height. An odd trailing row is dropped.
pub fn avg_pool_halve(input: &Tensor) -> Result<Tensor> {
    if input.height() < 2 {
        return Err(length_err!(
            "pooling needs height >= 2, got {}",
            input.height()
        ));
    }
    let out_h = input.height() / 2;
    let mut output = Tensor::zeros(input.depth(), out_h);
    for c in 0..input.depth() {
        let x = input.channel(c);
        for (i, y) in output.channel_mut(c).iter_mut().enumerate() {
            *y = 0.5 * (x[2 * i] + x[2 * i + 1]);
        }
    }
    Ok(output)
}

pub fn avg_pool_halve_backward(input: &mut Tensor, output: &Tensor) -> Result<()> {
    let (d, h) = input.shape();
    if output.shape() != (d, h / 2) || h < 2 {
        return Err(shape_err!(
            "pooling gradient shape does not match input {d}x{h}"
        ));
    }
    let out_h = h / 2;
    let gx = input.grad_mut();
    for c in 0..d {
        for (i, &g) in output.grad_channel(c).iter().enumerate() {
            gx[c * h + 2 * i] += 0.5 * g;
            gx[c * h + 2 * i + 1] += 0.5 * g;
        }
    }
    debug_assert_eq!(out_h * 2 + h % 2, h);
    Ok(())
}

/// Nearest-neighbour doubling: every row is repeated twice.
pub fn upsample_double(input: &Tensor) -> Tensor {
    let (d, h) = input.shape();
    let mut values = Vec::with_capacity(2 * d * h);
    for c in 0..d {
        for &v in input.channel(c) {
            values.push(v);
            values.push(v);
        }
    }
    Tensor::from_values(d, 2 * h, values).expect("shape computed")
}

pub fn upsample_double_backward(input: &mut Tensor, output: &Tensor) -> Result<()> {
    let (d, h) = input.shape();
    if output.shape() != (d, 2 * h) {
        return Err(shape_err!(
            "upsample gradient shape does not match input {d}x{h}"
        ));
    }
    let gx = input.grad_mut();
    for c in 0..d {
        let gy = output.grad_channel(c);
        for i in 0..h {
            gx[c * h + i] += gy[2 * i] + gy[2 * i + 1];
        }
    }
    Ok(())
}
