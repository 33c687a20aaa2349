//! Convolutional variational autoencoder over delta-encoded scanpaths.
//!
//! Encoder: two `conv → ReLU → halving average pool` stages and a depth-2
//! head emitting the latent mean and log-variance per position. The latent
//! sample `z` has depth one and a quarter of the input height. Decoder: two
//! `doubling upsample → conv → ReLU` stages and a linear depth-3 output conv.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{config_err, shape_err, Error, Result};
use crate::gaze::{integrate_deltas, make_batches, GazeSample, GazeSequence};
use crate::layers::{
    avg_pool_halve, avg_pool_halve_backward, conv1d_backward, conv1d_forward, relu, relu_backward,
    upsample_double, upsample_double_backward, ConvLayer, Padding,
};
use crate::loss::{
    kl_standard_normal, kl_standard_normal_backward, l2_loss, l2_loss_backward,
    reparameterize_backward, reparameterize_with_noise,
};
use crate::optim::{optimizer_step, OptimConfig};
use crate::schedule::LrSchedule;
use crate::tensor::Tensor;
use crate::INPUT_SCALE;

const PAD: Padding = Padding::SameZero;

/// Smallest generated time step in milliseconds.
pub const MIN_TIME_STEP_MS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct VaeArch {
    pub kernel_height: usize,
    /// Encoder widths; the decoder mirrors them.
    pub widths: [usize; 2],
}

impl Default for VaeArch {
    fn default() -> Self {
        VaeArch {
            kernel_height: 5,
            widths: [16, 32],
        }
    }
}

/// Layers in order: `enc0, enc1, head, dec0, dec1, out`.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeModel {
    pub layers: Vec<ConvLayer>,
    pub epochs_trained: u64,
}

const ENC0: usize = 0;
const ENC1: usize = 1;
const HEAD: usize = 2;
const DEC0: usize = 3;
const DEC1: usize = 4;
const OUT: usize = 5;

impl VaeModel {
    pub fn new<R: Rng + ?Sized>(arch: &VaeArch, rng: &mut R) -> Result<VaeModel> {
        let k = arch.kernel_height;
        let [w0, w1] = arch.widths;
        if k == 0 || w0 == 0 || w1 == 0 {
            return Err(config_err!("VAE kernel height and widths must be positive"));
        }
        let mut layers = vec![
            ConvLayer::new(3, w0, k),
            ConvLayer::new(w0, w1, k),
            ConvLayer::new(w1, 2, k),
            ConvLayer::new(1, w1, k),
            ConvLayer::new(w1, w0, k),
            ConvLayer::new(w0, 3, k),
        ];
        layers.iter_mut().for_each(|l| l.init_uniform(rng));
        Ok(VaeModel {
            layers,
            epochs_trained: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.layers;
        let ok = l.len() == 6
            && l[ENC0].in_depth() == 3
            && l[ENC1].in_depth() == l[ENC0].out_depth()
            && l[HEAD].in_depth() == l[ENC1].out_depth()
            && l[HEAD].out_depth() == 2
            && l[DEC0].in_depth() == 1
            && l[DEC1].in_depth() == l[DEC0].out_depth()
            && l[OUT].in_depth() == l[DEC1].out_depth()
            && l[OUT].out_depth() == 3;
        if ok {
            Ok(())
        } else {
            Err(config_err!("VAE layers do not form encoder/head/decoder"))
        }
    }

    pub fn head_mut(&mut self) -> &mut ConvLayer {
        &mut self.layers[HEAD]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct VaeTrainConfig {
    pub optimizer: OptimConfig,
    pub schedule: LrSchedule,
    pub batch_size: usize,
}

impl Default for VaeTrainConfig {
    fn default() -> Self {
        VaeTrainConfig {
            optimizer: OptimConfig::sgd(1e-3, 1e-6, 0.9),
            schedule: LrSchedule {
                base_lr: 1e-3,
                warmup_lr: 1e-4,
                warmup_epochs: 100,
                decay_factor: 0.1,
                decay_every: 1000,
                stop_lr: 1e-6,
            },
            batch_size: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VaeEpoch {
    pub epoch: usize,
    pub learning_rate: f64,
    pub recon_loss: f64,
    pub kl_loss: f64,
}

fn check_divisible(deltas: &Tensor) -> Result<()> {
    if deltas.depth() != 3 {
        return Err(shape_err!(
            "VAE input must have depth 3, got {}",
            deltas.depth()
        ));
    }
    if deltas.height() < 4 || !deltas.height().is_multiple_of(4) {
        return Err(shape_err!(
            "VAE input height {} is not a positive multiple of 4; pad or crop it first",
            deltas.height()
        ));
    }
    Ok(())
}

/// Latent mean and log-variance, each depth 1 and height `h / 4`.
pub fn vae_encode(model: &VaeModel, deltas: &Tensor) -> Result<(Tensor, Tensor)> {
    check_divisible(deltas)?;
    let l = &model.layers;
    let a = avg_pool_halve(&relu(&conv1d_forward(deltas, &l[ENC0], PAD)?))?;
    let b = avg_pool_halve(&relu(&conv1d_forward(&a, &l[ENC1], PAD)?))?;
    let head = conv1d_forward(&b, &l[HEAD], PAD)?;
    Ok((head.select_channels(&[0])?, head.select_channels(&[1])?))
}

/// Depth-3 deltas of height `4 * z.height()`.
pub fn vae_decode(model: &VaeModel, z: &Tensor) -> Result<Tensor> {
    if z.depth() != 1 {
        return Err(shape_err!(
            "latent sample must have depth 1, got {}",
            z.depth()
        ));
    }
    let l = &model.layers;
    let a = relu(&conv1d_forward(&upsample_double(z), &l[DEC0], PAD)?);
    let b = relu(&conv1d_forward(&upsample_double(&a), &l[DEC1], PAD)?);
    conv1d_forward(&b, &l[OUT], PAD)
}

/// All intermediate tensors of one training pass, in forward order.
struct VaeTrace {
    input: Tensor,
    enc0_pre: Tensor,
    enc0_act: Tensor,
    enc0_pool: Tensor,
    enc1_pre: Tensor,
    enc1_act: Tensor,
    enc1_pool: Tensor,
    head: Tensor,
    mean: Tensor,
    log_var: Tensor,
    noise: Vec<f64>,
    z: Tensor,
    dec0_up: Tensor,
    dec0_pre: Tensor,
    dec0_act: Tensor,
    dec1_up: Tensor,
    dec1_pre: Tensor,
    dec1_act: Tensor,
    output: Tensor,
}

/// `draw_noise(n)` supplies the `n` standard normal values for the latent draw.
fn forward_traced(
    model: &VaeModel,
    input: Tensor,
    draw_noise: impl FnOnce(usize) -> Vec<f64>,
) -> Result<VaeTrace> {
    let l = &model.layers;
    let enc0_pre = conv1d_forward(&input, &l[ENC0], PAD)?;
    let enc0_act = relu(&enc0_pre);
    let enc0_pool = avg_pool_halve(&enc0_act)?;
    let enc1_pre = conv1d_forward(&enc0_pool, &l[ENC1], PAD)?;
    let enc1_act = relu(&enc1_pre);
    let enc1_pool = avg_pool_halve(&enc1_act)?;
    let head = conv1d_forward(&enc1_pool, &l[HEAD], PAD)?;
    let mean = head.select_channels(&[0])?;
    let log_var = head.select_channels(&[1])?;
    let noise = draw_noise(mean.values().len());
    let z = reparameterize_with_noise(&mean, &log_var, &noise)?;
    let dec0_up = upsample_double(&z);
    let dec0_pre = conv1d_forward(&dec0_up, &l[DEC0], PAD)?;
    let dec0_act = relu(&dec0_pre);
    let dec1_up = upsample_double(&dec0_act);
    let dec1_pre = conv1d_forward(&dec1_up, &l[DEC1], PAD)?;
    let dec1_act = relu(&dec1_pre);
    let output = conv1d_forward(&dec1_act, &l[OUT], PAD)?;
    Ok(VaeTrace {
        input,
        enc0_pre,
        enc0_act,
        enc0_pool,
        enc1_pre,
        enc1_act,
        enc1_pool,
        head,
        mean,
        log_var,
        noise,
        z,
        dec0_up,
        dec0_pre,
        dec0_act,
        dec1_up,
        dec1_pre,
        dec1_act,
        output,
    })
}

/// Adds `d(L2 + KL)/dθ` to the layer gradients and returns both loss terms.
fn backward(model: &mut VaeModel, t: &mut VaeTrace) -> Result<(f64, f64)> {
    let recon = l2_loss(&t.output, &t.input)?;
    let kl = kl_standard_normal(&t.mean, &t.log_var)?;
    let l = &mut model.layers;
    l2_loss_backward(&mut t.output, &t.input)?;
    conv1d_backward(&mut t.dec1_act, &mut l[OUT], PAD, &t.output)?;
    relu_backward(&mut t.dec1_pre, &t.dec1_act)?;
    conv1d_backward(&mut t.dec1_up, &mut l[DEC1], PAD, &t.dec1_pre)?;
    upsample_double_backward(&mut t.dec0_act, &t.dec1_up)?;
    relu_backward(&mut t.dec0_pre, &t.dec0_act)?;
    conv1d_backward(&mut t.dec0_up, &mut l[DEC0], PAD, &t.dec0_pre)?;
    upsample_double_backward(&mut t.z, &t.dec0_up)?;
    reparameterize_backward(&mut t.mean, &mut t.log_var, &t.noise, &t.z)?;
    kl_standard_normal_backward(&mut t.mean, &mut t.log_var)?;
    // scatter the two latent gradients back into the depth-2 head output
    let h = t.head.height();
    let g = t.head.grad_mut();
    g[..h].copy_from_slice(t.mean.grad());
    g[h..].copy_from_slice(t.log_var.grad());
    conv1d_backward(&mut t.enc1_pool, &mut l[HEAD], PAD, &t.head)?;
    avg_pool_halve_backward(&mut t.enc1_act, &t.enc1_pool)?;
    relu_backward(&mut t.enc1_pre, &t.enc1_act)?;
    conv1d_backward(&mut t.enc0_pool, &mut l[ENC1], PAD, &t.enc1_pre)?;
    avg_pool_halve_backward(&mut t.enc0_act, &t.enc0_pool)?;
    relu_backward(&mut t.enc0_pre, &t.enc0_act)?;
    conv1d_backward(&mut t.input, &mut l[ENC0], PAD, &t.enc0_pre)?;
    Ok((recon, kl))
}

/// Total loss `L2(x, decode(z)) + KL` for one input with a fixed noise draw.
/// Used by gradient checks; training goes through the traced path.
pub fn vae_loss_with_noise(model: &VaeModel, deltas: &Tensor, noise: &[f64]) -> Result<f64> {
    let (mean, log_var) = vae_encode(model, deltas)?;
    let z = reparameterize_with_noise(&mean, &log_var, noise)?;
    let out = vae_decode(model, &z)?;
    Ok(l2_loss(&out, deltas)? + kl_standard_normal(&mean, &log_var)?)
}

/// Accumulates the gradient of [`vae_loss_with_noise`] into the layers.
pub fn vae_backward_with_noise(
    model: &mut VaeModel,
    deltas: &Tensor,
    noise: &[f64],
) -> Result<f64> {
    check_divisible(deltas)?;
    let mut trace = forward_traced(model, deltas.clone(), |_| noise.to_vec())?;
    let (r, k) = backward(model, &mut trace)?;
    Ok(r + k)
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn vae_train<R: Rng + ?Sized>(
    model: &mut VaeModel,
    delta_corpus: &[Tensor],
    config: &VaeTrainConfig,
    rng: &mut R,
) -> Result<Vec<VaeEpoch>> {
    config.schedule.validate()?;
    config.optimizer.validate()?;
    if delta_corpus.is_empty() {
        return Err(config_err!("VAE training needs a non-empty corpus"));
    }
    for t in delta_corpus {
        check_divisible(t)?;
    }
    let heights: Vec<usize> = delta_corpus.iter().map(Tensor::height).collect();
    let mut history = Vec::new();
    let mut epoch = 1;
    while let Some(lr) = config.schedule.lr_at(epoch) {
        let optim = config.optimizer.with_learning_rate(lr);
        let (mut recon_sum, mut kl_sum) = (0.0, 0.0);
        for batch in make_batches(&heights, rng, config.batch_size) {
            for &i in &batch {
                let mut trace =
                    forward_traced(model, delta_corpus[i].clone(), |n| standard_normal(rng, n))?;
                let (recon, kl) = backward(model, &mut trace)?;
                if !(recon.is_finite() && kl.is_finite()) {
                    return Err(Error::NonFinite {
                        epoch,
                        detail: alloc::format!(
                            "VAE loss recon={recon} kl={kl} at learning rate {lr}"
                        ),
                    });
                }
                recon_sum += recon;
                kl_sum += kl;
            }
            let scale = 1.0 / batch.len() as f64;
            model.layers.iter_mut().for_each(|l| l.scale_grad(scale));
            optimizer_step(&mut model.layers, &optim)?;
        }
        model.epochs_trained += 1;
        let n = delta_corpus.len() as f64;
        history.push(VaeEpoch {
            epoch,
            learning_rate: lr,
            recon_loss: recon_sum / n,
            kl_loss: kl_sum / n,
        });
        epoch += 1;
    }
    Ok(history)
}

/// Samples `z ~ N(0, 1)`, decodes, rescales by 100 and integrates from `start`.
/// Time steps are clamped to at least [`MIN_TIME_STEP_MS`].
pub fn generate_scanpath<R: Rng + ?Sized>(
    model: &VaeModel,
    rng: &mut R,
    target_length: usize,
    start: GazeSample,
) -> Result<GazeSequence> {
    if model.epochs_trained == 0 {
        return Err(config_err!("cannot generate from an untrained VAE"));
    }
    if target_length < 4 || !target_length.is_multiple_of(4) {
        return Err(config_err!(
            "target length must be a positive multiple of 4, got {target_length}"
        ));
    }
    let z = Tensor::from_values(
        1,
        target_length / 4,
        standard_normal(rng, target_length / 4),
    )?;
    let mut deltas = vae_decode(model, &z)?;
    let floor = MIN_TIME_STEP_MS / INPUT_SCALE;
    deltas
        .channel_mut(2)
        .iter_mut()
        .for_each(|v| *v = v.max(floor));
    let mut samples = integrate_deltas(&deltas, start)?;
    samples.truncate(target_length);
    Ok(GazeSequence {
        subject_id: String::from("generated"),
        samples,
        sample_rate_hz: None,
        sanitized: Vec::new(),
    })
}

/// Translates x and y so the mean position sits at the canvas center.
pub fn center_scanpath(seq: &GazeSequence, canvas: (f64, f64)) -> GazeSequence {
    let n = seq.samples.len().max(1) as f64;
    let mx = seq.samples.iter().map(|s| s.x).sum::<f64>() / n;
    let my = seq.samples.iter().map(|s| s.y).sum::<f64>() / n;
    let (dx, dy) = (canvas.0 / 2.0 - mx, canvas.1 / 2.0 - my);
    let mut out = seq.clone();
    for s in &mut out.samples {
        s.x += dx;
        s.y += dy;
    }
    out
}
