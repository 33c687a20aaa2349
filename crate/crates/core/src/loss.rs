//! Scalar losses and the reparameterized latent draw.
//!
//! `*_loss` functions are pure. The matching `*_backward` functions add the
//! gradient of that loss into the prediction's gradient grid.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

/// Per-row softmax over the depth axis, computed with max subtraction.
pub fn softmax(logits: &Tensor) -> Tensor {
    let (d, h) = logits.shape();
    let mut out = Tensor::zeros(d, h);
    let mut column = Vec::with_capacity(d);
    for i in 0..h {
        column.clear();
        column.extend((0..d).map(|c| logits.get(c, i)));
        let max = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in column.iter_mut() {
            *v = libm::exp(*v - max);
            sum += *v;
        }
        for (c, v) in column.iter().enumerate() {
            out.set(c, i, v / sum);
        }
    }
    out
}

fn check_labels(logits: &Tensor, labels: &[usize], class_weights: &[f64]) -> Result<()> {
    let (d, h) = logits.shape();
    if labels.len() != h {
        return Err(shape_err!("{} labels for height {h}", labels.len()));
    }
    if class_weights.len() != d {
        return Err(shape_err!(
            "{} class weights for {d} classes",
            class_weights.len()
        ));
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= d) {
        return Err(Error::Label { label, classes: d });
    }
    Ok(())
}

/// Mean over rows of `-w[label] * ln softmax[label]`.
pub fn softmax_cross_entropy(
    logits: &Tensor,
    labels: &[usize],
    class_weights: &[f64],
) -> Result<f64> {
    check_labels(logits, labels, class_weights)?;
    let (d, h) = logits.shape();
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            // log-sum-exp keeps tiny probabilities finite
            let max = (0..d)
                .map(|c| logits.get(c, i))
                .fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = (0..d).map(|c| libm::exp(logits.get(c, i) - max)).sum();
            class_weights[l] * (max + libm::log(sum) - logits.get(l, i))
        })
        .sum();
    Ok(total / h as f64)
}

pub fn softmax_cross_entropy_backward(
    logits: &mut Tensor,
    labels: &[usize],
    class_weights: &[f64],
) -> Result<()> {
    check_labels(logits, labels, class_weights)?;
    let probs = softmax(logits);
    let (d, h) = logits.shape();
    let inv_h = 1.0 / h as f64;
    let grad = logits.grad_mut();
    for (i, &l) in labels.iter().enumerate() {
        let w = class_weights[l] * inv_h;
        for c in 0..d {
            let target = if c == l { 1.0 } else { 0.0 };
            grad[c * h + i] += w * (probs.get(c, i) - target);
        }
    }
    Ok(())
}

/// Mean squared difference over all entries.
pub fn l2_loss(prediction: &Tensor, target: &Tensor) -> Result<f64> {
    prediction.ensure_same_shape(target, "l2 loss")?;
    let n = prediction.values().len() as f64;
    Ok(prediction
        .values()
        .iter()
        .zip(target.values())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

pub fn l2_loss_backward(prediction: &mut Tensor, target: &Tensor) -> Result<()> {
    prediction.ensure_same_shape(target, "l2 loss")?;
    let scale = 2.0 / prediction.values().len() as f64;
    let (p, g) = prediction.split_mut();
    for ((gv, pv), tv) in g.iter_mut().zip(p).zip(target.values()) {
        *gv += scale * (pv - tv);
    }
    Ok(())
}

/// Mean absolute difference over all entries.
pub fn l1_loss(prediction: &Tensor, target: &Tensor) -> Result<f64> {
    prediction.ensure_same_shape(target, "l1 loss")?;
    let n = prediction.values().len() as f64;
    Ok(prediction
        .values()
        .iter()
        .zip(target.values())
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / n)
}

/// Subgradient at a zero residual is 0.
pub fn l1_loss_backward(prediction: &mut Tensor, target: &Tensor) -> Result<()> {
    prediction.ensure_same_shape(target, "l1 loss")?;
    let scale = 1.0 / prediction.values().len() as f64;
    let (p, g) = prediction.split_mut();
    for ((gv, pv), tv) in g.iter_mut().zip(p).zip(target.values()) {
        let r = pv - tv;
        if r > 0.0 {
            *gv += scale;
        } else if r < 0.0 {
            *gv -= scale;
        }
    }
    Ok(())
}

/// KL(N(mean, exp(log_variance)) || N(0, 1)), averaged over entries.
pub fn kl_standard_normal(mean: &Tensor, log_variance: &Tensor) -> Result<f64> {
    mean.ensure_same_shape(log_variance, "kl divergence")?;
    let n = mean.values().len() as f64;
    Ok(mean
        .values()
        .iter()
        .zip(log_variance.values())
        .map(|(&m, &lv)| 0.5 * (libm::exp(lv) + m * m - 1.0 - lv))
        .sum::<f64>()
        / n)
}

pub fn kl_standard_normal_backward(mean: &mut Tensor, log_variance: &mut Tensor) -> Result<()> {
    mean.ensure_same_shape(log_variance, "kl divergence")?;
    let inv_n = 1.0 / mean.values().len() as f64;
    let (m, gm) = mean.split_mut();
    for (g, &v) in gm.iter_mut().zip(m) {
        *g += v * inv_n;
    }
    let (lv, glv) = log_variance.split_mut();
    for (g, &v) in glv.iter_mut().zip(lv) {
        *g += 0.5 * (libm::exp(v) - 1.0) * inv_n;
    }
    Ok(())
}

/// `z = mean + exp(log_variance / 2) * noise` for a fixed noise draw.
pub fn reparameterize_with_noise(
    mean: &Tensor,
    log_variance: &Tensor,
    noise: &[f64],
) -> Result<Tensor> {
    mean.ensure_same_shape(log_variance, "reparameterize")?;
    if noise.len() != mean.values().len() {
        return Err(shape_err!(
            "{} noise values for {} latents",
            noise.len(),
            mean.values().len()
        ));
    }
    let values = mean
        .values()
        .iter()
        .zip(log_variance.values())
        .zip(noise)
        .map(|((&m, &lv), &e)| m + libm::exp(0.5 * lv) * e)
        .collect();
    Tensor::from_values(mean.depth(), mean.height(), values)
}

/// Draws standard normal noise from `rng` and reparameterizes. Returns the
/// sample together with the noise so the backward pass can reuse it.
pub fn reparameterize<R: Rng + ?Sized>(
    mean: &Tensor,
    log_variance: &Tensor,
    rng: &mut R,
) -> Result<(Tensor, Vec<f64>)> {
    let noise: Vec<f64> = (0..mean.values().len())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let z = reparameterize_with_noise(mean, log_variance, &noise)?;
    Ok((z, noise))
}

/// Routes `z.grad` into the mean and log-variance gradients; the noise is a constant.
pub fn reparameterize_backward(
    mean: &mut Tensor,
    log_variance: &mut Tensor,
    noise: &[f64],
    z: &Tensor,
) -> Result<()> {
    mean.ensure_same_shape(z, "reparameterize backward")?;
    log_variance.ensure_same_shape(z, "reparameterize backward")?;
    for (g, &gz) in mean.grad_mut().iter_mut().zip(z.grad()) {
        *g += gz;
    }
    let (lv, glv) = log_variance.split_mut();
    for (((g, &v), &e), &gz) in glv.iter_mut().zip(lv).zip(noise).zip(z.grad()) {
        *g += gz * e * 0.5 * libm::exp(0.5 * v);
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
    fn uniform_logits_give_ln_classes() {
        let logits = Tensor::zeros(5, 4);
        let loss = softmax_cross_entropy(&logits, &[0, 1, 2, 4], &[1.0; 5]).unwrap();
        assert!((loss - libm::log(5.0)).abs() < 1e-12);
    }

    #[test]
    fn softmax_columns_normalize() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = (0..5 * 20).map(|_| rng.random_range(-30.0..30.0)).collect();
        let p = softmax(&Tensor::from_values(5, 20, v).unwrap());
        for i in 0..20 {
            let s: f64 = (0..5).map(|c| p.get(c, i)).sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!((0..5).all(|c| (0.0..=1.0).contains(&p.get(c, i))));
        }
    }

    #[test]
    fn label_out_of_range() {
        let logits = Tensor::zeros(2, 2);
        assert_eq!(
            softmax_cross_entropy(&logits, &[0, 2], &[1.0, 1.0]),
            Err(Error::Label {
                label: 2,
                classes: 2
            })
        );
    }

    #[test]
    fn uniform_weights_reduce_to_plain_cross_entropy() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v = (0..15).map(|_| rng.random_range(-3.0..3.0)).collect();
        let logits = Tensor::from_values(3, 5, v).unwrap();
        let labels = [0, 2, 1, 1, 0];
        let weighted = softmax_cross_entropy(&logits, &labels, &[1.0; 3]).unwrap();
        let p = softmax(&logits);
        let plain = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| -libm::log(p.get(l, i)))
            .sum::<f64>()
            / 5.0;
        assert!((weighted - plain).abs() < 1e-12);
    }

    #[test]
    fn regression_losses() {
        let a = Tensor::from_values(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(l2_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(l1_loss(&a, &a).unwrap(), 0.0);
        let b = a.map(|v| v - 1.5);
        assert!((l2_loss(&a, &b).unwrap() - 2.25).abs() < 1e-15);
        assert!((l1_loss(&a, &b).unwrap() - 1.5).abs() < 1e-15);
        assert!(l2_loss(&a, &Tensor::zeros(1, 4)).is_err());
        let mut z = a.clone();
        l1_loss_backward(&mut z, &a).unwrap();
        assert!(z.grad().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn kl_closed_forms() {
        let z = Tensor::zeros(1, 3);
        assert_eq!(kl_standard_normal(&z, &z).unwrap(), 0.0);
        let m = Tensor::from_values(1, 1, vec![1.0]).unwrap();
        assert_eq!(kl_standard_normal(&m, &Tensor::zeros(1, 1)).unwrap(), 0.5);
    }

    #[test]
    fn collapsed_variance_returns_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mean = Tensor::from_values(1, 4, vec![0.3, -1.0, 2.0, 0.0]).unwrap();
        let lv = Tensor::from_values(1, 4, vec![-50.0; 4]).unwrap();
        let (z, _) = reparameterize(&mean, &lv, &mut rng).unwrap();
        for (a, b) in z.values().iter().zip(mean.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    proptest::proptest! {
        #[test]
        fn kl_is_non_negative(pairs in proptest::collection::vec((-20.0f64..20.0, -20.0f64..20.0), 1..40)) {
            let (m, lv): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let n = m.len();
            let kl = kl_standard_normal(
                &Tensor::from_values(1, n, m).unwrap(),
                &Tensor::from_values(1, n, lv).unwrap(),
            ).unwrap();
            proptest::prop_assert!(kl >= 0.0);
        }
    }
}
