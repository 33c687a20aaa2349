//! Window-free eye-movement segmentation.
//!
//! Five same-padded convolutions over the raw `(x, y, t) / 100` tensor, ReLU
//! after the first four, and five per-sample logits at the end. The first
//! layer has height two and starts from the opposite-sign initialization, so
//! every filter begins as a local difference detector.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{config_err, length_err, shape_err, Error, Result};
use crate::gaze::{augment, make_batches, to_input_tensor, Augmentation, GazeSequence};
use crate::layers::ConvLayer;
use crate::loss::{softmax, softmax_cross_entropy, softmax_cross_entropy_backward};
use crate::optim::{optimizer_step, OptimConfig};
use crate::schedule::LrSchedule;
use crate::stack::{self, sign_init_first_layer};
use crate::tensor::Tensor;
use crate::NUM_CLASSES;

pub const SEG_LAYERS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SegArch {
    pub kernel_heights: Vec<usize>,
    pub widths: Vec<usize>,
}

impl Default for SegArch {
    fn default() -> Self {
        SegArch {
            kernel_heights: vec![2, 3, 5, 7, 9],
            widths: vec![16, 16, 16, 16, NUM_CLASSES],
        }
    }
}

impl SegArch {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_heights.len() != SEG_LAYERS || self.widths.len() != SEG_LAYERS {
            return Err(config_err!(
                "segmentation network has exactly {SEG_LAYERS} layers"
            ));
        }
        if self.kernel_heights[0] != 2 {
            return Err(config_err!("first segmentation layer must have height 2"));
        }
        if self.widths[SEG_LAYERS - 1] != NUM_CLASSES {
            return Err(config_err!(
                "last segmentation layer must have {NUM_CLASSES} outputs"
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegModel {
    pub layers: Vec<ConvLayer>,
    pub class_weights: Vec<f64>,
    pub epochs_trained: u64,
}

impl SegModel {
    pub fn new<R: Rng + ?Sized>(arch: &SegArch, rng: &mut R) -> Result<SegModel> {
        arch.validate()?;
        let mut layers = stack::build_layers(3, &arch.kernel_heights, &arch.widths)?;
        sign_init_first_layer(&mut layers[0], rng)?;
        for layer in &mut layers[1..] {
            layer.init_uniform(rng);
        }
        Ok(SegModel {
            layers,
            class_weights: vec![1.0; NUM_CLASSES],
            epochs_trained: 0,
        })
    }

    /// Checks the structural invariants of a (possibly deserialized) model.
    pub fn validate(&self) -> Result<()> {
        let arch = SegArch {
            kernel_heights: self.layers.iter().map(ConvLayer::kernel_height).collect(),
            widths: self.layers.iter().map(ConvLayer::out_depth).collect(),
        };
        arch.validate()?;
        if self.layers[0].in_depth() != 3 {
            return Err(config_err!("segmentation input depth must be 3"));
        }
        if self
            .layers
            .windows(2)
            .any(|w| w[0].out_depth() != w[1].in_depth())
        {
            return Err(config_err!("layer depths do not chain"));
        }
        if self.class_weights.len() != NUM_CLASSES || self.class_weights.iter().any(|&w| !(w > 0.0))
        {
            return Err(config_err!("need {NUM_CLASSES} positive class weights"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SegTrainConfig {
    pub optimizer: OptimConfig,
    pub schedule: LrSchedule,
    pub augmentation: Augmentation,
    pub batch_size: usize,
    /// Lower bound of the random crop length as a fraction of the shortest
    /// sequence in a batch. 1.0 disables cropping.
    pub crop_min_fraction: f64,
}

impl Default for SegTrainConfig {
    fn default() -> Self {
        SegTrainConfig {
            optimizer: OptimConfig::sgd(1e-2, 1e-4, 0.9),
            schedule: LrSchedule::constant_decay(1e-2, 0.1, 500, 1e-6),
            augmentation: Augmentation::default(),
            batch_size: 4,
            crop_min_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub epoch: usize,
    pub learning_rate: f64,
    pub loss: f64,
}

/// Inverse relative class frequency, normalized to mean 1 over the classes
/// that occur. Absent classes get weight 1.
pub fn class_weights_from_counts(counts: &[usize]) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    let present: Vec<usize> = (0..counts.len()).filter(|&c| counts[c] > 0).collect();
    let mut weights = vec![1.0; counts.len()];
    if present.is_empty() {
        return weights;
    }
    for &c in &present {
        weights[c] = total as f64 / counts[c] as f64;
    }
    let mean = present.iter().map(|&c| weights[c]).sum::<f64>() / present.len() as f64;
    for &c in &present {
        weights[c] /= mean;
    }
    weights
}

/// Raw logits, depth 5 and the same height as the input.
pub fn seg_forward(model: &SegModel, input: &Tensor) -> Result<Tensor> {
    if input.depth() != 3 {
        return Err(shape_err!(
            "segmentation input must have depth 3, got {}",
            input.depth()
        ));
    }
    stack::forward(&model.layers, input)
}

struct Item {
    input: Tensor,
    labels: Vec<usize>,
}

pub fn seg_train<R: Rng + ?Sized>(
    model: &mut SegModel,
    dataset: &[GazeSequence],
    config: &SegTrainConfig,
    rng: &mut R,
) -> Result<Vec<EpochLoss>> {
    config.schedule.validate()?;
    config.optimizer.validate()?;
    if dataset.is_empty() {
        return Err(config_err!(
            "segmentation training needs at least one sequence"
        ));
    }
    let mut items = Vec::with_capacity(dataset.len());
    let mut counts = [0usize; NUM_CLASSES];
    for seq in dataset {
        let labels = seq
            .label_indices()
            .ok_or_else(|| config_err!("sequence '{}' is unlabeled", seq.subject_id))?;
        labels.iter().for_each(|&l| counts[l] += 1);
        items.push(Item {
            input: to_input_tensor(seq)?,
            labels,
        });
    }
    model.class_weights = class_weights_from_counts(&counts);
    let batch_size = config.batch_size.max(1);

    let mut history = Vec::new();
    let mut epoch = 1;
    while let Some(lr) = config.schedule.lr_at(epoch) {
        let optim = config.optimizer.with_learning_rate(lr);
        let cropped = crop_epoch(&items, batch_size, config.crop_min_fraction, rng)?;
        let heights: Vec<usize> = cropped.iter().map(|c| c.input.height()).collect();
        let batches = make_batches(&heights, rng, batch_size);
        let mut loss_sum = 0.0;
        for batch in &batches {
            for &i in batch {
                let item = &cropped[i];
                let input = augment(&item.input, rng, &config.augmentation)?;
                let mut trace = stack::forward_traced(&model.layers, input)?;
                let loss =
                    softmax_cross_entropy(trace.output(), &item.labels, &model.class_weights)?;
                if !loss.is_finite() {
                    return Err(Error::NonFinite {
                        epoch,
                        detail: alloc::format!("segmentation loss {loss} at learning rate {lr}"),
                    });
                }
                loss_sum += loss;
                softmax_cross_entropy_backward(
                    trace.output_mut(),
                    &item.labels,
                    &model.class_weights,
                )?;
                stack::backward(&mut model.layers, &mut trace)?;
            }
            let scale = 1.0 / batch.len() as f64;
            model.layers.iter_mut().for_each(|l| l.scale_grad(scale));
            optimizer_step(&mut model.layers, &optim)?;
        }
        model.epochs_trained += 1;
        history.push(EpochLoss {
            epoch,
            learning_rate: lr,
            loss: loss_sum / cropped.len() as f64,
        });
        epoch += 1;
    }
    Ok(history)
}

/// Shuffles the items into groups of `batch_size` and crops every member of a
/// group to one shared random length so the groups batch together.
fn crop_epoch<R: Rng + ?Sized>(
    items: &[Item],
    batch_size: usize,
    min_fraction: f64,
    rng: &mut R,
) -> Result<Vec<Item>> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(rng);
    let mut out = Vec::with_capacity(items.len());
    for group in order.chunks(batch_size) {
        let shortest = group
            .iter()
            .map(|&i| items[i].input.height())
            .min()
            .expect("non-empty chunk");
        let (_, len) = crate::gaze::crop_window(shortest, rng, min_fraction);
        for &i in group {
            let h = items[i].input.height();
            let start = rng.random_range(0..=h - len);
            out.push(Item {
                input: items[i].input.slice_height(start, len)?,
                labels: items[i].labels[start..start + len].to_vec(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegPrediction {
    pub labels: Vec<usize>,
    /// `probabilities[i][c]` for sample `i`, class `c`.
    pub probabilities: Vec<[f64; NUM_CLASSES]>,
}

/// Argmax class per sample (ties go to the lower index) and the softmax probabilities.
pub fn seg_predict(model: &SegModel, seq: &GazeSequence) -> Result<SegPrediction> {
    if seq.samples.is_empty() {
        return Err(length_err!("cannot segment an empty sequence"));
    }
    let probs = softmax(&seg_forward(model, &to_input_tensor(seq)?)?);
    let mut labels = Vec::with_capacity(probs.height());
    let mut probabilities = Vec::with_capacity(probs.height());
    for i in 0..probs.height() {
        let mut row = [0.0; NUM_CLASSES];
        for (c, p) in row.iter_mut().enumerate() {
            *p = probs.get(c, i);
        }
        let best = (1..NUM_CLASSES).fold(0, |best, c| if row[c] > row[best] { c } else { best });
        labels.push(best);
        probabilities.push(row);
    }
    Ok(SegPrediction {
        labels,
        probabilities,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::GazeSample;
    use crate::stack::has_opposite_signs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_arch_invariants() {
        let model = SegModel::new(&SegArch::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        model.validate().unwrap();
        assert_eq!(model.layers.len(), 5);
        assert_eq!(model.layers[0].kernel_height(), 2);
        assert_eq!(model.layers[0].in_depth(), 3);
        assert_eq!(model.layers[4].out_depth(), 5);
        assert!(has_opposite_signs(&model.layers[0]));
    }

    #[test]
    fn bad_arch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let arch = SegArch {
            kernel_heights: vec![3, 3, 5, 7, 9],
            ..SegArch::default()
        };
        assert!(SegModel::new(&arch, &mut rng).is_err());
        let arch = SegArch {
            widths: vec![8, 8, 8, 8, 4],
            ..SegArch::default()
        };
        assert!(SegModel::new(&arch, &mut rng).is_err());
    }

    #[test]
    fn output_height_matches_input() {
        let model = SegModel::new(&SegArch::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for h in [1, 10, 256] {
            let out = seg_forward(&model, &Tensor::zeros(3, h)).unwrap();
            assert_eq!(out.shape(), (5, h));
        }
        assert!(seg_forward(&model, &Tensor::zeros(2, 4)).is_err());
    }

    #[test]
    fn class_weight_normalization() {
        let w = class_weights_from_counts(&[30, 10, 0, 0, 0]);
        assert!((w[0] + w[1] - 2.0).abs() < 1e-12);
        assert!((w[1] / w[0] - 3.0).abs() < 1e-12);
        assert_eq!(&w[2..], &[1.0, 1.0, 1.0]);
        assert_eq!(class_weights_from_counts(&[5, 5, 5, 5, 5]), vec![1.0; 5]);
    }

    #[test]
    fn unlabeled_training_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = SegModel::new(&SegArch::default(), &mut rng).unwrap();
        let seq = GazeSequence::new(
            "a",
            vec![
                GazeSample::new(0.0, 1.0, 1.0),
                GazeSample::new(1.0, 1.0, 1.0),
            ],
        )
        .unwrap();
        let r = seg_train(&mut model, &[seq], &SegTrainConfig::default(), &mut rng);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn argmax_ties_to_lowest() {
        let mut model =
            SegModel::new(&SegArch::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let last = model.layers.last_mut().unwrap();
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        let seq = GazeSequence::new("a", vec![GazeSample::new(0.0, 1.0, 1.0)]).unwrap();
        let p = seg_predict(&model, &seq).unwrap();
        assert_eq!(p.labels, vec![0]);
        assert!((p.probabilities[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
