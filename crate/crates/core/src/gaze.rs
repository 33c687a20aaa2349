//! Gaze samples and sequences, sanitation, tensor encodings, augmentation,
//! equal-height batching and subject-disjoint fold plans.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{config_err, format_err, length_err, shape_err, Error, Result};
use crate::tensor::Tensor;
use crate::INPUT_SCALE;

/// Eye-movement classes in network output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Label {
    Fixation = 0,
    Saccade = 1,
    Pursuit = 2,
    Noise = 3,
    Psm = 4,
}

impl Label {
    pub const ALL: [Label; 5] = [
        Label::Fixation,
        Label::Saccade,
        Label::Pursuit,
        Label::Noise,
        Label::Psm,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Label> {
        Label::ALL.get(index).copied().ok_or(Error::Label {
            label: index,
            classes: Label::ALL.len(),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Fixation => "fixation",
            Label::Saccade => "saccade",
            Label::Pursuit => "pursuit",
            Label::Noise => "noise",
            Label::Psm => "psm",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One gaze sample: time in milliseconds, position in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub label: Option<Label>,
}

impl GazeSample {
    pub fn new(t: f64, x: f64, y: f64) -> Self {
        GazeSample {
            t,
            x,
            y,
            label: None,
        }
    }

    pub fn labeled(t: f64, x: f64, y: f64, label: Label) -> Self {
        GazeSample {
            t,
            x,
            y,
            label: Some(label),
        }
    }
}

/// A row index together with the reason it was zeroed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SanitationEntry {
    pub row: usize,
    pub reason: String,
}

/// Rows whose non-finite fields were replaced by zero, as 0-based data-row indices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SanitationReport {
    pub entries: Vec<SanitationEntry>,
}

impl SanitationReport {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn rows(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.row).collect()
    }

    /// One `row<TAB>reason` line per entry.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&alloc::format!("{}\t{}\n", e.row, e.reason));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GazeSequence {
    pub subject_id: String,
    pub samples: Vec<GazeSample>,
    pub sample_rate_hz: Option<f64>,
    /// Rows zeroed during sanitation; they never count as clean signal.
    pub sanitized: Vec<usize>,
}

impl GazeSequence {
    /// Validates non-emptiness, uniform label presence and monotone time.
    pub fn new(subject_id: impl Into<String>, samples: Vec<GazeSample>) -> Result<Self> {
        let seq = GazeSequence {
            subject_id: subject_id.into(),
            samples,
            sample_rate_hz: None,
            sanitized: Vec::new(),
        };
        seq.validate()?;
        Ok(seq)
    }

    /// Zeroes NaN/Inf fields, records them, then validates. Sanitized time
    /// stamps are exempt from the ordering check.
    pub fn from_raw(
        subject_id: impl Into<String>,
        mut samples: Vec<GazeSample>,
    ) -> Result<(Self, SanitationReport)> {
        let mut report = SanitationReport::default();
        for (row, s) in samples.iter_mut().enumerate() {
            let mut bad = Vec::new();
            for (name, v) in [("t", &mut s.t), ("x", &mut s.x), ("y", &mut s.y)] {
                if !v.is_finite() {
                    bad.push(name);
                    *v = 0.0;
                }
            }
            if !bad.is_empty() {
                report.entries.push(SanitationEntry {
                    row,
                    reason: alloc::format!("non-finite {}", bad.join(",")),
                });
            }
        }
        let seq = GazeSequence {
            subject_id: subject_id.into(),
            samples,
            sample_rate_hz: None,
            sanitized: report.rows(),
        };
        seq.validate()?;
        Ok((seq, report))
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.is_empty() {
            return Err(format_err!("sequence '{}' is empty", self.subject_id));
        }
        let labeled = self.samples[0].label.is_some();
        if let Some(row) = self
            .samples
            .iter()
            .position(|s| s.label.is_some() != labeled)
        {
            return Err(format_err!(
                "row {row}: label presence differs from the first row"
            ));
        }
        let mut last: Option<f64> = None;
        for (row, s) in self.samples.iter().enumerate() {
            if self.sanitized.binary_search(&row).is_ok() {
                continue;
            }
            if !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite()) {
                return Err(format_err!("row {row}: non-finite value"));
            }
            if let Some(prev) = last {
                if s.t < prev {
                    return Err(format_err!("row {row}: timestamp {} precedes {prev}", s.t));
                }
            }
            last = Some(s.t);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.samples.first().is_some_and(|s| s.label.is_some())
    }

    /// Class indices, or `None` for unlabeled sequences.
    pub fn label_indices(&self) -> Option<Vec<usize>> {
        self.samples
            .iter()
            .map(|s| s.label.map(Label::index))
            .collect()
    }

    /// True for samples that carry the noise label or were sanitized.
    pub fn flagged(&self) -> Vec<bool> {
        let mut flags: Vec<bool> = self
            .samples
            .iter()
            .map(|s| s.label == Some(Label::Noise))
            .collect();
        for &row in &self.sanitized {
            if let Some(f) = flags.get_mut(row) {
                *f = true;
            }
        }
        flags
    }

    /// Rows `start..start + len` as a new sequence of the same subject.
    pub fn section(&self, start: usize, len: usize) -> Result<GazeSequence> {
        if len == 0 || start + len > self.samples.len() {
            return Err(length_err!(
                "section {start}..{} outside {}",
                start + len,
                self.samples.len()
            ));
        }
        Ok(GazeSequence {
            subject_id: self.subject_id.clone(),
            samples: self.samples[start..start + len].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
            sanitized: self
                .sanitized
                .iter()
                .filter(|&&r| r >= start && r < start + len)
                .map(|&r| r - start)
                .collect(),
        })
    }
}

/// Depth-3 tensor `(x, y, t) / 100`, one row per sample.
pub fn to_input_tensor(seq: &GazeSequence) -> Result<Tensor> {
    if seq.samples.is_empty() {
        return Err(length_err!("cannot encode an empty sequence"));
    }
    let x: Vec<f64> = seq.samples.iter().map(|s| s.x / INPUT_SCALE).collect();
    let y: Vec<f64> = seq.samples.iter().map(|s| s.y / INPUT_SCALE).collect();
    let t: Vec<f64> = seq.samples.iter().map(|s| s.t / INPUT_SCALE).collect();
    Tensor::from_channels(&[&x, &y, &t])
}

/// Inverse of [`to_input_tensor`]; labels are dropped.
pub fn from_input_tensor(subject_id: &str, tensor: &Tensor) -> Result<GazeSequence> {
    if tensor.depth() != 3 {
        return Err(shape_err!(
            "gaze tensors have depth 3, got {}",
            tensor.depth()
        ));
    }
    let samples = (0..tensor.height())
        .map(|i| {
            GazeSample::new(
                tensor.get(2, i) * INPUT_SCALE,
                tensor.get(0, i) * INPUT_SCALE,
                tensor.get(1, i) * INPUT_SCALE,
            )
        })
        .collect();
    Ok(GazeSequence {
        subject_id: subject_id.to_string(),
        samples,
        sample_rate_hz: None,
        sanitized: Vec::new(),
    })
}

/// Depth-3 tensor of successive differences `(Δx, Δy, Δt) / 100`, height `n - 1`.
pub fn to_delta_tensor(seq: &GazeSequence) -> Result<Tensor> {
    if seq.samples.len() < 2 {
        return Err(length_err!(
            "delta encoding needs at least 2 samples, got {}",
            seq.samples.len()
        ));
    }
    let pairs = || seq.samples.windows(2);
    let dx: Vec<f64> = pairs().map(|w| (w[1].x - w[0].x) / INPUT_SCALE).collect();
    let dy: Vec<f64> = pairs().map(|w| (w[1].y - w[0].y) / INPUT_SCALE).collect();
    let dt: Vec<f64> = pairs().map(|w| (w[1].t - w[0].t) / INPUT_SCALE).collect();
    Tensor::from_channels(&[&dx, &dy, &dt])
}

/// Cumulative sum of a delta tensor anchored at `start`. Returns `height + 1` samples.
pub fn integrate_deltas(deltas: &Tensor, start: GazeSample) -> Result<Vec<GazeSample>> {
    if deltas.depth() != 3 {
        return Err(shape_err!(
            "delta tensors have depth 3, got {}",
            deltas.depth()
        ));
    }
    let mut out = Vec::with_capacity(deltas.height() + 1);
    let mut cur = GazeSample::new(start.t, start.x, start.y);
    out.push(cur);
    for i in 0..deltas.height() {
        cur.x += deltas.get(0, i) * INPUT_SCALE;
        cur.y += deltas.get(1, i) * INPUT_SCALE;
        cur.t += deltas.get(2, i) * INPUT_SCALE;
        out.push(cur);
    }
    Ok(out)
}

/// Augmentation switches and magnitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Augmentation {
    pub jitter: bool,
    pub shift: bool,
    /// Relative jitter bound; each position is scaled by a factor in `[1 - j, 1 + j]`.
    pub jitter_fraction: f64,
    /// Shift bound as a fraction of each channel's observed range.
    pub shift_fraction: f64,
}

impl Default for Augmentation {
    fn default() -> Self {
        Augmentation {
            jitter: true,
            shift: true,
            jitter_fraction: 0.02,
            shift_fraction: 0.10,
        }
    }
}

impl Augmentation {
    pub const NONE: Augmentation = Augmentation {
        jitter: false,
        shift: false,
        jitter_fraction: 0.02,
        shift_fraction: 0.10,
    };
}

/// Jitters and/or shifts the x and y channels. The time channel is untouched.
pub fn augment<R: Rng + ?Sized>(
    tensor: &Tensor,
    rng: &mut R,
    aug: &Augmentation,
) -> Result<Tensor> {
    if tensor.depth() != 3 {
        return Err(shape_err!(
            "augmentation expects depth 3, got {}",
            tensor.depth()
        ));
    }
    let mut out = tensor.clone();
    out.zero_grad();
    for c in 0..2 {
        if aug.jitter && aug.jitter_fraction > 0.0 {
            let j = aug.jitter_fraction;
            for v in out.channel_mut(c) {
                *v *= rng.random_range(1.0 - j..=1.0 + j);
            }
        }
        if aug.shift && aug.shift_fraction > 0.0 {
            let ch = out.channel(c);
            let lo = ch.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ch.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let bound = aug.shift_fraction * (hi - lo);
            if bound > 0.0 {
                let offset = rng.random_range(-bound..=bound);
                out.channel_mut(c).iter_mut().for_each(|v| *v += offset);
            }
        }
    }
    Ok(out)
}

/// Random contiguous window: length uniform in `[ceil(min_fraction * h), h]`,
/// start uniform over the valid positions. Returns `(start, len)`.
pub fn crop_window<R: Rng + ?Sized>(
    height: usize,
    rng: &mut R,
    min_fraction: f64,
) -> (usize, usize) {
    let min_len =
        (libm::ceil(min_fraction.clamp(0.0, 1.0) * height as f64) as usize).clamp(1, height.max(1));
    let len = rng.random_range(min_len..=height.max(min_len));
    let start = rng.random_range(0..=height - len);
    (start, len)
}

pub fn crop_random<R: Rng + ?Sized>(
    tensor: &Tensor,
    rng: &mut R,
    min_fraction: f64,
) -> Result<Tensor> {
    if tensor.height() < 2 {
        return Err(length_err!(
            "cropping needs height >= 2, got {}",
            tensor.height()
        ));
    }
    let (start, len) = crop_window(tensor.height(), rng, min_fraction);
    tensor.slice_height(start, len)
}

/// Groups item indices into batches of uniform height, at most `batch_size`
/// each. Bucket order and in-bucket order are shuffled by `rng`.
pub fn make_batches<R: Rng + ?Sized>(
    heights: &[usize],
    rng: &mut R,
    batch_size: usize,
) -> Vec<Vec<usize>> {
    let batch_size = batch_size.max(1);
    let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &h) in heights.iter().enumerate() {
        buckets.entry(h).or_default().push(i);
    }
    let mut batches = Vec::new();
    for (_, mut members) in buckets {
        members.shuffle(rng);
        for chunk in members.chunks(batch_size) {
            batches.push(chunk.to_vec());
        }
    }
    batches.shuffle(rng);
    batches
}

/// Subject → fold assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn fold_of(&self, subject: &str) -> Option<usize> {
        self.assignment.get(subject).copied()
    }

    pub fn subjects_in(&self, fold: usize) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(s, _)| s.as_str())
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        (0..self.k)
            .map(|f| self.assignment.values().filter(|&&v| v == f).count())
            .collect()
    }

    /// `subject = fold` lines in subject order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, f) in &self.assignment {
            out.push_str(&alloc::format!("{s} = {f}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<FoldPlan> {
        let mut assignment = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (s, f) = line
                .split_once('=')
                .ok_or_else(|| format_err!("line {}: expected 'subject = fold'", n + 1))?;
            let fold = f
                .trim()
                .parse::<usize>()
                .map_err(|_| format_err!("line {}: bad fold index", n + 1))?;
            assignment.insert(s.trim().to_string(), fold);
        }
        let k = assignment.values().max().map_or(0, |m| m + 1);
        let plan = FoldPlan { k, assignment };
        if plan.fold_sizes().contains(&0) {
            return Err(format_err!("fold plan has an empty fold"));
        }
        Ok(plan)
    }
}

/// Shuffles the distinct subjects and deals them round-robin into `k` folds,
/// so fold sizes differ by at most one and the larger folds come first.
pub fn make_folds<R: Rng + ?Sized>(
    sequences: &[GazeSequence],
    k: usize,
    rng: &mut R,
) -> Result<FoldPlan> {
    let mut subjects: Vec<&str> = sequences.iter().map(|s| s.subject_id.as_str()).collect();
    subjects.sort_unstable();
    subjects.dedup();
    if k == 0 || subjects.len() < k {
        return Err(config_err!(
            "{} subjects cannot fill {k} folds",
            subjects.len()
        ));
    }
    subjects.shuffle(rng);
    let assignment = subjects
        .into_iter()
        .enumerate()
        .map(|(i, s)| (s.to_string(), i % k))
        .collect();
    Ok(FoldPlan { k, assignment })
}
