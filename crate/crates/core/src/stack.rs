//! A plain stack of same-padded convolutions with ReLU between them, shared
//! by the segmentation and reconstruction networks.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{config_err, Result};
use crate::layers::{conv1d_backward, conv1d_forward, relu, relu_backward, ConvLayer, Padding};
use crate::tensor::Tensor;

/// Flips the second weight of every height-stacked pair of a height-2 kernel
/// whose two weights share a sign.
pub fn enforce_opposite_signs(layer: &mut ConvLayer) -> Result<()> {
    if layer.kernel_height() != 2 {
        return Err(config_err!(
            "sign-based initialization needs kernel height 2, got {}",
            layer.kernel_height()
        ));
    }
    for pair in layer.weights.chunks_exact_mut(2) {
        if pair[0] * pair[1] > 0.0 {
            pair[1] = -pair[1];
        }
    }
    Ok(())
}

/// Base random initialization followed by the opposite-sign fix-up, so the
/// first layer responds to local change along the height.
pub fn sign_init_first_layer<R: Rng + ?Sized>(layer: &mut ConvLayer, rng: &mut R) -> Result<()> {
    if layer.kernel_height() != 2 {
        return Err(config_err!(
            "sign-based initialization needs kernel height 2, got {}",
            layer.kernel_height()
        ));
    }
    layer.init_uniform(rng);
    enforce_opposite_signs(layer)
}

/// True when every height-stacked pair has a non-positive product.
pub fn has_opposite_signs(layer: &ConvLayer) -> bool {
    layer.kernel_height() == 2 && layer.weights.chunks_exact(2).all(|p| p[0] * p[1] <= 0.0)
}

/// Builds `kernels.len()` layers chaining `in_depth → widths[0] → ... → widths[n-1]`.
pub(crate) fn build_layers(
    in_depth: usize,
    kernels: &[usize],
    widths: &[usize],
) -> Result<Vec<ConvLayer>> {
    if kernels.is_empty() || kernels.len() != widths.len() {
        return Err(config_err!(
            "{} kernel heights for {} layer widths",
            kernels.len(),
            widths.len()
        ));
    }
    if kernels.iter().chain(widths).any(|&v| v == 0) {
        return Err(config_err!("kernel heights and widths must be positive"));
    }
    let mut depth = in_depth;
    Ok(kernels
        .iter()
        .zip(widths)
        .map(|(&k, &w)| {
            let layer = ConvLayer::new(depth, w, k);
            depth = w;
            layer
        })
        .collect())
}

/// Activations recorded by [`forward_traced`]: the input followed by the
/// pre- and post-activation of every hidden layer and the final output.
pub(crate) struct Trace {
    pub tensors: Vec<Tensor>,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        self.tensors.last().expect("trace holds the input")
    }

    pub fn output_mut(&mut self) -> &mut Tensor {
        self.tensors.last_mut().expect("trace holds the input")
    }
}

pub(crate) fn forward(layers: &[ConvLayer], input: &Tensor) -> Result<Tensor> {
    let mut x = conv1d_forward(input, &layers[0], Padding::SameZero)?;
    for layer in &layers[1..] {
        x = conv1d_forward(&relu(&x), layer, Padding::SameZero)?;
    }
    Ok(x)
}

pub(crate) fn forward_traced(layers: &[ConvLayer], input: Tensor) -> Result<Trace> {
    let mut tensors = Vec::with_capacity(2 * layers.len());
    tensors.push(input);
    for (i, layer) in layers.iter().enumerate() {
        if i > 0 {
            let act = relu(tensors.last().expect("non-empty"));
            tensors.push(act);
        }
        let pre = conv1d_forward(tensors.last().expect("non-empty"), layer, Padding::SameZero)?;
        tensors.push(pre);
    }
    Ok(Trace { tensors })
}

/// Backpropagates the gradient stored on the trace output through the stack.
pub(crate) fn backward(layers: &mut [ConvLayer], trace: &mut Trace) -> Result<()> {
    let n = layers.len();
    // tensors: [in, pre0, act0, pre1, act1, ..., pre_{n-1}]
    for l in (0..n).rev() {
        let pre_idx = if l == 0 { 1 } else { 2 * l + 1 };
        let in_idx = pre_idx - 1;
        let (head, tail) = trace.tensors.split_at_mut(pre_idx);
        conv1d_backward(
            &mut head[in_idx],
            &mut layers[l],
            Padding::SameZero,
            &tail[0],
        )?;
        if l > 0 {
            let (head, tail) = trace.tensors.split_at_mut(in_idx);
            relu_backward(&mut head[in_idx - 1], &tail[0])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn negation_rule() {
        let mut layer =
            ConvLayer::with_params(1, 2, 2, vec![0.3, 0.5, -0.2, 0.7], vec![0.0; 2]).unwrap();
        enforce_opposite_signs(&mut layer).unwrap();
        assert_eq!(layer.weights, vec![0.3, -0.5, -0.2, 0.7]);
        let mut neg = ConvLayer::with_params(1, 1, 2, vec![-0.3, -0.5], vec![0.0]).unwrap();
        enforce_opposite_signs(&mut neg).unwrap();
        assert_eq!(neg.weights, vec![-0.3, 0.5]);
    }

    #[test]
    fn sign_init_rejects_other_heights() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut layer = ConvLayer::new(3, 4, 3);
        assert!(matches!(
            sign_init_first_layer(&mut layer, &mut rng),
            Err(crate::Error::Config(_))
        ));
    }

    #[test]
    fn sign_init_keeps_magnitudes() {
        let mut a = ConvLayer::new(3, 16, 2);
        let mut b = a.clone();
        a.init_uniform(&mut ChaCha8Rng::seed_from_u64(5));
        sign_init_first_layer(&mut b, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert_eq!(x.abs(), y.abs());
        }
        assert!(has_opposite_signs(&b));
    }

    #[test]
    fn traced_forward_matches_plain() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut layers = build_layers(3, &[2, 3, 5], &[4, 4, 2]).unwrap();
        layers.iter_mut().for_each(|l| l.init_uniform(&mut rng));
        let v = (0..3 * 13).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = Tensor::from_values(3, 13, v).unwrap();
        let plain = forward(&layers, &x).unwrap();
        let trace = forward_traced(&layers, x).unwrap();
        assert_eq!(plain.values(), trace.output().values());
        assert_eq!(trace.tensors.len(), 6);
    }
}
