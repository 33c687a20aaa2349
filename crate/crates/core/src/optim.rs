//! SGD with momentum and Adam, both with classic (non-decoupled) L2 weight
//! decay that skips biases.

use crate::error::{config_err, Result};
use crate::layers::ConvLayer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OptimKind {
    SgdMomentum,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct OptimConfig {
    pub kind: OptimKind,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimConfig {
    pub fn sgd(learning_rate: f64, weight_decay: f64, momentum: f64) -> Self {
        OptimConfig {
            kind: OptimKind::SgdMomentum,
            learning_rate,
            weight_decay,
            momentum,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn adam(learning_rate: f64, weight_decay: f64, beta1: f64, beta2: f64) -> Self {
        OptimConfig {
            kind: OptimKind::Adam,
            learning_rate,
            weight_decay,
            momentum: 0.0,
            beta1,
            beta2,
            epsilon: 1e-8,
        }
    }

    pub fn with_learning_rate(mut self, learning_rate: f64) -> Self {
        self.learning_rate = learning_rate;
        self
    }

    /// `lr > 0` is required, except that `lr == 0` is accepted as a frozen step.
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(config_err!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(config_err!("weight decay must be non-negative"));
        }
        if !unit(self.momentum) || !unit(self.beta1) || !unit(self.beta2) {
            return Err(config_err!("momentum and betas must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(config_err!("epsilon must be positive"));
        }
        Ok(())
    }
}

/// Applies one update to every layer and zeroes the gradients. If every
/// gradient is exactly zero the call is a no-op.
pub fn optimizer_step(layers: &mut [ConvLayer], config: &OptimConfig) -> Result<()> {
    config.validate()?;
    let any_grad = layers
        .iter()
        .any(|l| l.weight_grad.iter().chain(&l.bias_grad).any(|&g| g != 0.0));
    if !any_grad {
        return Ok(());
    }
    for layer in layers.iter_mut() {
        match config.kind {
            OptimKind::SgdMomentum => sgd_update(layer, config),
            OptimKind::Adam => adam_update(layer, config),
        }
        layer.zero_grad();
    }
    Ok(())
}

fn sgd_update(layer: &mut ConvLayer, c: &OptimConfig) {
    let ConvLayer {
        weights,
        bias,
        weight_grad,
        bias_grad,
        state,
        ..
    } = layer;
    state.step += 1;
    for ((w, &g), buf) in weights
        .iter_mut()
        .zip(weight_grad.iter())
        .zip(&mut state.weight_first)
    {
        *buf = c.momentum * *buf + g + c.weight_decay * *w;
        *w -= c.learning_rate * *buf;
    }
    for ((b, &g), buf) in bias
        .iter_mut()
        .zip(bias_grad.iter())
        .zip(&mut state.bias_first)
    {
        *buf = c.momentum * *buf + g;
        *b -= c.learning_rate * *buf;
    }
}

fn adam_update(layer: &mut ConvLayer, c: &OptimConfig) {
    let ConvLayer {
        weights,
        bias,
        weight_grad,
        bias_grad,
        state,
        ..
    } = layer;
    state.step += 1;
    let t = state.step as f64;
    let correct1 = 1.0 - libm::pow(c.beta1, t);
    let correct2 = 1.0 - libm::pow(c.beta2, t);
    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = c.beta1 * *m + (1.0 - c.beta1) * g;
        *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
        let m_hat = *m / correct1;
        let v_hat = *v / correct2;
        *p -= c.learning_rate * m_hat / (libm::sqrt(v_hat) + c.epsilon);
    };
    for (((w, &g), m), v) in weights
        .iter_mut()
        .zip(weight_grad.iter())
        .zip(&mut state.weight_first)
        .zip(&mut state.weight_second)
    {
        let g = g + c.weight_decay * *w;
        update(w, g, m, v);
    }
    for (((b, &g), m), v) in bias
        .iter_mut()
        .zip(bias_grad.iter())
        .zip(&mut state.bias_first)
        .zip(&mut state.bias_second)
    {
        update(b, g, m, v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn scalar(w: f64) -> ConvLayer {
        ConvLayer::with_params(1, 1, 1, vec![w], vec![0.0]).unwrap()
    }

    #[test]
    fn zero_learning_rate_freezes() {
        let mut layers = [scalar(1.5)];
        layers[0].weight_grad[0] = 3.0;
        optimizer_step(&mut layers, &OptimConfig::sgd(0.0, 1e-4, 0.9)).unwrap();
        assert_eq!(layers[0].weights[0], 1.5);
        layers[0].weight_grad[0] = 3.0;
        optimizer_step(&mut layers, &OptimConfig::adam(0.0, 5e-4, 0.9, 0.999)).unwrap();
        assert_eq!(layers[0].weights[0], 1.5);
    }

    #[test]
    fn vanilla_sgd_step() {
        let mut layers = [scalar(1.0)];
        layers[0].weight_grad[0] = 1.0;
        optimizer_step(&mut layers, &OptimConfig::sgd(0.1, 0.0, 0.0)).unwrap();
        assert!((layers[0].weights[0] - 0.9).abs() < 1e-15);
        assert_eq!(layers[0].weight_grad[0], 0.0);
    }

    #[test]
    fn no_gradients_is_noop() {
        let mut layers = [scalar(2.0)];
        layers[0].state.weight_first[0] = 5.0;
        optimizer_step(&mut layers, &OptimConfig::sgd(0.1, 1e-2, 0.9)).unwrap();
        assert_eq!(layers[0].weights[0], 2.0);
        assert_eq!(layers[0].state.step, 0);
    }

    #[test]
    fn weight_decay_skips_bias() {
        let mut layer = ConvLayer::with_params(1, 1, 1, vec![1.0], vec![1.0]).unwrap();
        layer.weight_grad[0] = 1e-300;
        let mut layers = [layer];
        optimizer_step(&mut layers, &OptimConfig::sgd(0.1, 0.5, 0.0)).unwrap();
        assert!((layers[0].weights[0] - 0.95).abs() < 1e-12);
        assert_eq!(layers[0].bias[0], 1.0);
    }

    #[test]
    fn sgd_converges_on_quadratic() {
        // f(w) = (w - 3)^2
        let mut layers = [scalar(0.0)];
        for _ in 0..50 {
            let w = layers[0].weights[0];
            layers[0].weight_grad[0] = 2.0 * (w - 3.0);
            optimizer_step(&mut layers, &OptimConfig::sgd(0.1, 0.0, 0.0)).unwrap();
        }
        assert!((layers[0].weights[0] - 3.0).abs() < 1e-3);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut layers = [scalar(1.0)];
        layers[0].weight_grad[0] = 0.37;
        optimizer_step(&mut layers, &OptimConfig::adam(0.01, 0.0, 0.9, 0.999)).unwrap();
        // bias-corrected first step is lr * g / |g|
        assert!((layers[0].weights[0] - 0.99).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_config() {
        let mut layers = [scalar(1.0)];
        layers[0].weight_grad[0] = 1.0;
        assert!(optimizer_step(&mut layers, &OptimConfig::sgd(-1.0, 0.0, 0.0)).is_err());
        assert!(optimizer_step(&mut layers, &OptimConfig::sgd(0.1, 0.0, 1.0)).is_err());
    }
}
