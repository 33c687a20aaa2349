//! Reconstruction of corrupted gaze signals.
//!
//! The network mirrors the segmentation stack but regresses the clean
//! `(x, y, t) / 100` signal. Training pairs are produced on the fly: a clean
//! section is augmented, a random fraction of its samples is overwritten with
//! zeros or random positions, and the network learns to undo that.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::error::{config_err, data_err, shape_err, Error, Result};
use crate::gaze::{augment, make_batches, to_input_tensor, Augmentation, GazeSequence};
use crate::layers::ConvLayer;
use crate::loss::{l1_loss, l1_loss_backward, l2_loss, l2_loss_backward};
use crate::optim::{optimizer_step, OptimConfig};
use crate::schedule::LrSchedule;
use crate::stack::{self, sign_init_first_layer};
use crate::tensor::Tensor;
use crate::INPUT_SCALE;

/// Fractions of corrupted samples used by the benchmark and drawn during training.
pub const EVAL_FRACTIONS: [f64; 6] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30];

pub const FINAL_KERNEL_HEIGHT: usize = 25;

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ReconArch {
    pub kernel_heights: Vec<usize>,
    pub widths: Vec<usize>,
}

impl Default for ReconArch {
    fn default() -> Self {
        ReconArch {
            kernel_heights: vec![2, 7, 14, FINAL_KERNEL_HEIGHT],
            widths: vec![16, 32, 32, 3],
        }
    }
}

impl ReconArch {
    /// First height 2, last height 25 with depth 3, and every layer strictly
    /// between the height-7 layer and the last one doubles its predecessor.
    pub fn validate(&self) -> Result<()> {
        let k = &self.kernel_heights;
        let n = k.len();
        if n < 2 || n != self.widths.len() {
            return Err(config_err!(
                "reconstruction network needs matching kernel/width lists of length >= 2"
            ));
        }
        if k[0] != 2 {
            return Err(config_err!("first reconstruction layer must have height 2"));
        }
        if k[n - 1] != FINAL_KERNEL_HEIGHT || self.widths[n - 1] != 3 {
            return Err(config_err!(
                "last reconstruction layer must be 3 deep and {FINAL_KERNEL_HEIGHT} high"
            ));
        }
        if let Some(seven) = k.iter().position(|&h| h == 7) {
            for i in seven + 1..n - 1 {
                if k[i] != 2 * k[i - 1] {
                    return Err(config_err!(
                        "kernel heights must double after the height-7 layer"
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconModel {
    pub layers: Vec<ConvLayer>,
    pub epochs_trained: u64,
}

impl ReconModel {
    pub fn new<R: Rng + ?Sized>(arch: &ReconArch, rng: &mut R) -> Result<ReconModel> {
        arch.validate()?;
        let mut layers = stack::build_layers(3, &arch.kernel_heights, &arch.widths)?;
        sign_init_first_layer(&mut layers[0], rng)?;
        for layer in &mut layers[1..] {
            layer.init_uniform(rng);
        }
        Ok(ReconModel {
            layers,
            epochs_trained: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        ReconArch {
            kernel_heights: self.layers.iter().map(ConvLayer::kernel_height).collect(),
            widths: self.layers.iter().map(ConvLayer::out_depth).collect(),
        }
        .validate()?;
        if self.layers[0].in_depth() != 3
            || self
                .layers
                .windows(2)
                .any(|w| w[0].out_depth() != w[1].in_depth())
        {
            return Err(config_err!(
                "reconstruction layer depths do not chain from 3"
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LossKind {
    L2,
    L1,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ReconTrainConfig {
    pub optimizer: OptimConfig,
    pub schedule: LrSchedule,
    /// Epochs trained with the L2 loss before switching to L1.
    pub l2_epochs: usize,
    pub augmentation: Augmentation,
    pub batch_size: usize,
    pub crop_min_fraction: f64,
    /// Corruption fractions drawn uniformly per training step.
    pub fractions: Vec<f64>,
}

impl Default for ReconTrainConfig {
    fn default() -> Self {
        ReconTrainConfig {
            optimizer: OptimConfig::adam(1e-3, 5e-4, 0.9, 0.999),
            schedule: LrSchedule {
                base_lr: 1e-3,
                warmup_lr: 1e-4,
                warmup_epochs: 10,
                decay_factor: 0.1,
                decay_every: 500,
                stop_lr: 1e-6,
            },
            l2_epochs: 100,
            augmentation: Augmentation::default(),
            batch_size: 4,
            crop_min_fraction: 0.5,
            fractions: EVAL_FRACTIONS.to_vec(),
        }
    }
}

impl ReconTrainConfig {
    pub fn loss_at(&self, epoch: usize) -> LossKind {
        if epoch <= self.l2_epochs {
            LossKind::L2
        } else {
            LossKind::L1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconEpoch {
    pub epoch: usize,
    pub learning_rate: f64,
    pub loss_kind: LossKind,
    pub loss: f64,
}

/// Output depth 3 and the input height, in the same normalized units.
pub fn recon_forward(model: &ReconModel, input: &Tensor) -> Result<Tensor> {
    if input.depth() != 3 {
        return Err(shape_err!(
            "reconstruction input must have depth 3, got {}",
            input.depth()
        ));
    }
    stack::forward(&model.layers, input)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ErrorMode {
    Zero,
    Random,
}

/// Overwrites x and y at `ceil(fraction * h)` distinct random rows with zeros
/// or with uniform values in `[0, max x/y value]`. Returns the corrupted
/// tensor and the mask of touched rows.
pub fn inject_errors<R: Rng + ?Sized>(
    tensor: &Tensor,
    rng: &mut R,
    fraction: f64,
    mode: ErrorMode,
) -> Result<(Tensor, Vec<bool>)> {
    if tensor.depth() != 3 {
        return Err(shape_err!(
            "error injection expects depth 3, got {}",
            tensor.depth()
        ));
    }
    if !(0.0..1.0).contains(&fraction) {
        return Err(config_err!(
            "error fraction must lie in [0, 1), got {fraction}"
        ));
    }
    let h = tensor.height();
    // the small slack absorbs representation error, e.g. 0.15 * 100
    let count = (libm::ceil(fraction * h as f64 - 1e-9).max(0.0) as usize).min(h);
    let max_coord = tensor
        .channel(0)
        .iter()
        .chain(tensor.channel(1))
        .copied()
        .fold(0.0f64, f64::max);
    let mut out = tensor.clone();
    out.zero_grad();
    let mut mask = vec![false; h];
    for row in index::sample(rng, h, count).into_vec() {
        mask[row] = true;
        for c in 0..2 {
            let v = match mode {
                ErrorMode::Zero => 0.0,
                ErrorMode::Random if max_coord > 0.0 => rng.random_range(0.0..=max_coord),
                ErrorMode::Random => 0.0,
            };
            out.set(c, row, v);
        }
    }
    Ok((out, mask))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SectionSpec {
    pub count: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Redraws allowed per requested section before giving up.
    pub max_attempts: usize,
}

impl SectionSpec {
    pub fn new(count: usize, min_len: usize, max_len: usize) -> Self {
        SectionSpec {
            count,
            min_len,
            max_len,
            max_attempts: 1000,
        }
    }
}

/// Draws `count` random sections free of noise-labeled and sanitized samples.
/// A section that touches a flagged sample is discarded and redrawn.
pub fn sample_clean_sections<R: Rng + ?Sized>(
    seq: &GazeSequence,
    rng: &mut R,
    draw: &SectionSpec,
) -> Result<Vec<GazeSequence>> {
    if draw.min_len == 0 || draw.min_len > draw.max_len {
        return Err(config_err!("need 0 < min_len <= max_len"));
    }
    let n = seq.len();
    if draw.min_len > n {
        return Err(data_err!(
            "sequence of {n} samples is shorter than min_len {}",
            draw.min_len
        ));
    }
    let flagged = seq.flagged();
    // prefix sums answer "any flag in [a, b)" in O(1)
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0usize);
    for &f in &flagged {
        prefix.push(prefix.last().copied().unwrap_or(0) + usize::from(f));
    }
    let max_len = draw.max_len.min(n);
    let budget = draw.max_attempts.max(1).saturating_mul(draw.count.max(1));
    let mut out = Vec::with_capacity(draw.count);
    let mut attempts = 0;
    while out.len() < draw.count {
        if attempts >= budget {
            return Err(data_err!(
                "found only {} of {} clean sections in '{}' after {attempts} draws",
                out.len(),
                draw.count,
                seq.subject_id
            ));
        }
        attempts += 1;
        let len = rng.random_range(draw.min_len..=max_len);
        let start = rng.random_range(0..=n - len);
        if prefix[start + len] == prefix[start] {
            out.push(seq.section(start, len)?);
        }
    }
    Ok(out)
}

pub fn recon_train<R: Rng + ?Sized>(
    model: &mut ReconModel,
    clean_sections: &[GazeSequence],
    config: &ReconTrainConfig,
    rng: &mut R,
) -> Result<Vec<ReconEpoch>> {
    config.schedule.validate()?;
    config.optimizer.validate()?;
    if clean_sections.is_empty() {
        return Err(config_err!(
            "reconstruction training needs at least one section"
        ));
    }
    if config.fractions.is_empty() || config.fractions.iter().any(|f| !(0.0..1.0).contains(f)) {
        return Err(config_err!("corruption fractions must lie in [0, 1)"));
    }
    let tensors: Vec<Tensor> = clean_sections
        .iter()
        .map(to_input_tensor)
        .collect::<Result<_>>()?;
    let batch_size = config.batch_size.max(1);
    let mut history = Vec::new();
    let mut epoch = 1;
    while let Some(lr) = config.schedule.lr_at(epoch) {
        let optim = config.optimizer.with_learning_rate(lr);
        let kind = config.loss_at(epoch);
        let cropped = crop_group_equal(&tensors, batch_size, config.crop_min_fraction, rng)?;
        let heights: Vec<usize> = cropped.iter().map(Tensor::height).collect();
        let mut loss_sum = 0.0;
        for batch in make_batches(&heights, rng, batch_size) {
            for &i in &batch {
                let clean = augment(&cropped[i], rng, &config.augmentation)?;
                let fraction = config.fractions[rng.random_range(0..config.fractions.len())];
                let mode = if rng.random_bool(0.5) {
                    ErrorMode::Zero
                } else {
                    ErrorMode::Random
                };
                let (corrupted, _) = inject_errors(&clean, rng, fraction, mode)?;
                let mut trace = stack::forward_traced(&model.layers, corrupted)?;
                let loss = match kind {
                    LossKind::L2 => l2_loss(trace.output(), &clean)?,
                    LossKind::L1 => l1_loss(trace.output(), &clean)?,
                };
                if !loss.is_finite() {
                    return Err(Error::NonFinite {
                        epoch,
                        detail: alloc::format!("reconstruction loss {loss} at learning rate {lr}"),
                    });
                }
                loss_sum += loss;
                match kind {
                    LossKind::L2 => l2_loss_backward(trace.output_mut(), &clean)?,
                    LossKind::L1 => l1_loss_backward(trace.output_mut(), &clean)?,
                }
                stack::backward(&mut model.layers, &mut trace)?;
            }
            let scale = 1.0 / batch.len() as f64;
            model.layers.iter_mut().for_each(|l| l.scale_grad(scale));
            optimizer_step(&mut model.layers, &optim)?;
        }
        model.epochs_trained += 1;
        history.push(ReconEpoch {
            epoch,
            learning_rate: lr,
            loss_kind: kind,
            loss: loss_sum / cropped.len() as f64,
        });
        epoch += 1;
    }
    Ok(history)
}

/// Shuffled groups of `batch_size`, each cropped to one shared random length.
pub(crate) fn crop_group_equal<R: Rng + ?Sized>(
    tensors: &[Tensor],
    batch_size: usize,
    min_fraction: f64,
    rng: &mut R,
) -> Result<Vec<Tensor>> {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..tensors.len()).collect();
    order.shuffle(rng);
    let mut out = Vec::with_capacity(tensors.len());
    for group in order.chunks(batch_size) {
        let shortest = group
            .iter()
            .map(|&i| tensors[i].height())
            .min()
            .expect("non-empty chunk");
        let (_, len) = crate::gaze::crop_window(shortest, rng, min_fraction);
        for &i in group {
            let start = rng.random_range(0..=tensors[i].height() - len);
            out.push(tensors[i].slice_height(start, len)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaeScope {
    /// Every sample of the section.
    Entire,
    /// Only the injected positions.
    InducedOnly,
}

impl MaeScope {
    pub fn name(self) -> &'static str {
        match self {
            MaeScope::Entire => "entire",
            MaeScope::InducedOnly => "induced",
        }
    }
}

/// Mean Euclidean (x, y) distance in pixels for one fraction and scope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaeRow {
    pub fraction: f64,
    pub scope: MaeScope,
    pub mae_px: f64,
}

/// One corrupted section: mean induced error against mean remaining error at
/// the injected positions, both divided by the largest mean induced error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPoint {
    pub section_id: usize,
    pub fraction: f64,
    pub normalized_induced_error: f64,
    pub normalized_reconstruction_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconReport {
    /// `fractions × {entire, induced}`, entire rows first for each fraction.
    pub rows: Vec<MaeRow>,
    pub scatter: Vec<ScatterPoint>,
    pub sections: usize,
}

impl ReconReport {
    pub fn mae(&self, fraction: f64, scope: MaeScope) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.scope == scope && (r.fraction - fraction).abs() < 1e-12)
            .map(|r| r.mae_px)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ReconEvalConfig {
    pub fractions: Vec<f64>,
    /// Number of random file draws.
    pub files: usize,
    /// Sections drawn from each selected file.
    pub sections_per_file: usize,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for ReconEvalConfig {
    fn default() -> Self {
        ReconEvalConfig {
            fractions: EVAL_FRACTIONS.to_vec(),
            files: 100,
            sections_per_file: 100,
            min_len: 64,
            max_len: 256,
        }
    }
}

/// Runs the benchmark with the trained network.
pub fn recon_evaluate<R: Rng + ?Sized>(
    model: &ReconModel,
    test_sequences: &[GazeSequence],
    rng: &mut R,
    config: &ReconEvalConfig,
) -> Result<ReconReport> {
    recon_evaluate_with(|t| recon_forward(model, t), test_sequences, rng, config)
}

/// Benchmark driver for an arbitrary repair function mapping a corrupted
/// normalized tensor to a repaired one. Distances are reported in pixels.
pub fn recon_evaluate_with<R, F>(
    mut repair: F,
    test_sequences: &[GazeSequence],
    rng: &mut R,
    config: &ReconEvalConfig,
) -> Result<ReconReport>
where
    R: Rng + ?Sized,
    F: FnMut(&Tensor) -> Result<Tensor>,
{
    if test_sequences.is_empty() {
        return Err(config_err!(
            "reconstruction evaluation needs test sequences"
        ));
    }
    let nf = config.fractions.len();
    let mut entire = vec![(0.0, 0usize); nf];
    let mut induced = vec![(0.0, 0usize); nf];
    // (fraction, mean induced, mean remaining) per corrupted section
    let mut raw_scatter = Vec::new();
    let draw = SectionSpec::new(config.sections_per_file, config.min_len, config.max_len);
    let mut sections = 0;
    for _ in 0..config.files {
        let seq = &test_sequences[rng.random_range(0..test_sequences.len())];
        for section in sample_clean_sections(seq, rng, &draw)? {
            sections += 1;
            let truth = to_input_tensor(&section)?;
            for (fi, &fraction) in config.fractions.iter().enumerate() {
                let mode = if rng.random_bool(0.5) {
                    ErrorMode::Zero
                } else {
                    ErrorMode::Random
                };
                let (corrupted, mask) = inject_errors(&truth, rng, fraction, mode)?;
                let repaired = repair(&corrupted)?;
                if repaired.depth() < 2 || repaired.height() != truth.height() {
                    return Err(shape_err!("repair changed the section shape"));
                }
                let mut induced_err = 0.0;
                let mut remaining_err = 0.0;
                for (i, &masked) in mask.iter().enumerate() {
                    let d = distance_px(&repaired, &truth, i);
                    entire[fi].0 += d;
                    entire[fi].1 += 1;
                    if masked {
                        induced[fi].0 += d;
                        induced[fi].1 += 1;
                        induced_err += distance_px(&corrupted, &truth, i);
                        remaining_err += d;
                    }
                }
                let m = mask.iter().filter(|&&b| b).count();
                if m > 0 {
                    raw_scatter.push((fraction, induced_err / m as f64, remaining_err / m as f64));
                }
            }
        }
    }
    let mean = |(s, n): (f64, usize)| if n == 0 { 0.0 } else { s / n as f64 };
    let mut rows = Vec::with_capacity(2 * nf);
    for (fi, &fraction) in config.fractions.iter().enumerate() {
        rows.push(MaeRow {
            fraction,
            scope: MaeScope::Entire,
            mae_px: mean(entire[fi]),
        });
        rows.push(MaeRow {
            fraction,
            scope: MaeScope::InducedOnly,
            mae_px: mean(induced[fi]),
        });
    }
    let max_induced = raw_scatter.iter().map(|p| p.1).fold(0.0f64, f64::max);
    let norm = if max_induced > 0.0 { max_induced } else { 1.0 };
    let scatter = raw_scatter
        .into_iter()
        .enumerate()
        .map(|(section_id, (fraction, ind, rec))| ScatterPoint {
            section_id,
            fraction,
            normalized_induced_error: ind / norm,
            normalized_reconstruction_error: rec / norm,
        })
        .collect();
    Ok(ReconReport {
        rows,
        scatter,
        sections,
    })
}

/// Euclidean (x, y) distance of row `i`, rescaled to pixels.
fn distance_px(a: &Tensor, b: &Tensor, i: usize) -> f64 {
    let dx = a.get(0, i) - b.get(0, i);
    let dy = a.get(1, i) - b.get(1, i);
    libm::sqrt(dx * dx + dy * dy) * INPUT_SCALE
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::{GazeSample, Label};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(n: usize) -> GazeSequence {
        GazeSequence::new(
            "s",
            (0..n)
                .map(|i| GazeSample::new(i as f64 * 4.0, 100.0 + i as f64, 50.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn default_arch_valid() {
        let arch = ReconArch::default();
        arch.validate().unwrap();
        let bad = ReconArch {
            kernel_heights: vec![2, 7, 9, 25],
            ..arch.clone()
        };
        assert!(bad.validate().is_err());
        let bad = ReconArch {
            kernel_heights: vec![2, 7, 14, 24],
            ..arch
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_output_from_zero_final_layer() {
        let mut model =
            ReconModel::new(&ReconArch::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let last = model.layers.last_mut().unwrap();
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        last.bias = vec![0.25, -1.0, 3.0];
        let input = to_input_tensor(&line(40)).unwrap();
        let out = recon_forward(&model, &input).unwrap();
        for c in 0..3 {
            assert!(out.channel(c).iter().all(|&v| v == last_bias(c)));
        }
        fn last_bias(c: usize) -> f64 {
            [0.25, -1.0, 3.0][c]
        }
    }

    #[test]
    fn injection_counts_and_locality() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = to_input_tensor(&line(100)).unwrap();
        let (c, mask) = inject_errors(&t, &mut rng, 0.05, ErrorMode::Zero).unwrap();
        assert_eq!(mask.iter().filter(|&&m| m).count(), 5);
        for i in 0..100 {
            if mask[i] {
                assert_eq!((c.get(0, i), c.get(1, i)), (0.0, 0.0));
            } else {
                assert_eq!((c.get(0, i), c.get(1, i)), (t.get(0, i), t.get(1, i)));
            }
            assert_eq!(c.get(2, i), t.get(2, i));
        }
        for (f, n) in [(0.10, 10), (0.15, 15), (0.20, 20), (0.25, 25), (0.30, 30)] {
            let (_, m) = inject_errors(&t, &mut rng, f, ErrorMode::Random).unwrap();
            assert_eq!(m.iter().filter(|&&b| b).count(), n);
        }
    }

    #[test]
    fn random_injection_within_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = to_input_tensor(&line(50)).unwrap();
        let max = t
            .channel(0)
            .iter()
            .chain(t.channel(1))
            .copied()
            .fold(0.0, f64::max);
        let (c, mask) = inject_errors(&t, &mut rng, 0.3, ErrorMode::Random).unwrap();
        for i in (0..50).filter(|&i| mask[i]) {
            assert!((0.0..=max).contains(&c.get(0, i)) && (0.0..=max).contains(&c.get(1, i)));
        }
    }

    #[test]
    fn clean_sections_avoid_flags() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let clean = line(30);
        assert_eq!(
            sample_clean_sections(&clean, &mut rng, &SectionSpec::new(5, 3, 10))
                .unwrap()
                .len(),
            5
        );
        let noisy = GazeSequence::new(
            "n",
            (0..30)
                .map(|i| GazeSample::labeled(i as f64, 1.0, 1.0, Label::Noise))
                .collect(),
        )
        .unwrap();
        assert!(matches!(
            sample_clean_sections(
                &noisy,
                &mut rng,
                &SectionSpec {
                    max_attempts: 10,
                    ..SectionSpec::new(1, 3, 10)
                }
            ),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn identity_oracle_without_errors_scores_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = ReconEvalConfig {
            fractions: vec![0.0],
            files: 3,
            sections_per_file: 4,
            min_len: 8,
            max_len: 16,
        };
        let report = recon_evaluate_with(|t| Ok(t.clone()), &[line(60)], &mut rng, &cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows.iter().all(|r| r.mae_px == 0.0));
    }

    #[test]
    fn report_has_two_rows_per_fraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = ReconEvalConfig {
            files: 2,
            sections_per_file: 3,
            min_len: 20,
            max_len: 40,
            ..Default::default()
        };
        let report = recon_evaluate_with(|t| Ok(t.clone()), &[line(80)], &mut rng, &cfg).unwrap();
        assert_eq!(report.rows.len(), 12);
        assert!(report.rows.iter().all(|r| r.mae_px >= 0.0));
        assert!(report
            .scatter
            .iter()
            .all(|p| p.normalized_induced_error <= 1.0));
    }
}
