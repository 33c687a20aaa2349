//! Toy corpora with known ground truth: fixation/saccade paths labeled by a
//! velocity threshold, smooth sine paths, and subject-keyed label sets for
//! leakage checks.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::Result;
use crate::gaze::{GazeSample, GazeSequence, Label};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ToyConfig {
    pub sample_interval_ms: f64,
    pub canvas: (f64, f64),
    /// Fixation duration range in samples, inclusive.
    pub fixation_len: (usize, usize),
    /// Saccade duration range in samples, inclusive.
    pub saccade_len: (usize, usize),
    /// Saccade amplitude range in pixels.
    pub saccade_amplitude: (f64, f64),
    /// Half-width of the uniform fixation jitter in pixels.
    pub fixation_jitter: f64,
    /// Speed in px/ms above which the labeler says saccade.
    pub velocity_threshold: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            sample_interval_ms: 4.0,
            canvas: (1000.0, 800.0),
            fixation_len: (20, 60),
            saccade_len: (3, 8),
            saccade_amplitude: (80.0, 400.0),
            fixation_jitter: 0.5,
            velocity_threshold: 1.0,
        }
    }
}

/// Fixation when the speed into a sample (out of it, for the first sample)
/// is at most `threshold` px/ms, saccade otherwise.
pub fn velocity_threshold_labels(samples: &[GazeSample], threshold: f64) -> Vec<Label> {
    let speed = |a: &GazeSample, b: &GazeSample| {
        let dt = (b.t - a.t).abs().max(f64::MIN_POSITIVE);
        libm::hypot(b.x - a.x, b.y - a.y) / dt
    };
    (0..samples.len())
        .map(|i| {
            let v = match i {
                _ if samples.len() < 2 => 0.0,
                0 => speed(&samples[0], &samples[1]),
                _ => speed(&samples[i - 1], &samples[i]),
            };
            if v > threshold {
                Label::Saccade
            } else {
                Label::Fixation
            }
        })
        .collect()
}

/// Unlabeled positions alternating jittered fixations and linear saccades.
pub fn fixation_saccade_path<R: Rng + ?Sized>(
    n: usize,
    rng: &mut R,
    cfg: &ToyConfig,
) -> Vec<GazeSample> {
    let (w, h) = cfg.canvas;
    let mut center = (
        rng.random_range(0.2 * w..0.8 * w),
        rng.random_range(0.2 * h..0.8 * h),
    );
    let mut out = Vec::with_capacity(n);
    let mut t = 0.0;
    let mut push = |out: &mut Vec<GazeSample>, x: f64, y: f64| {
        out.push(GazeSample::new(t, x, y));
        t += cfg.sample_interval_ms;
    };
    while out.len() < n {
        let fix = rng.random_range(cfg.fixation_len.0..=cfg.fixation_len.1);
        for _ in 0..fix.min(n - out.len()) {
            let j = cfg.fixation_jitter;
            let (dx, dy) = if j > 0.0 {
                (rng.random_range(-j..=j), rng.random_range(-j..=j))
            } else {
                (0.0, 0.0)
            };
            push(&mut out, center.0 + dx, center.1 + dy);
        }
        if out.len() >= n {
            break;
        }
        let amp = rng.random_range(cfg.saccade_amplitude.0..=cfg.saccade_amplitude.1);
        let target = pick_target(center, amp, cfg.canvas, rng);
        let steps = rng
            .random_range(cfg.saccade_len.0..=cfg.saccade_len.1)
            .max(1);
        for s in 1..=steps.min(n - out.len()) {
            let f = s as f64 / steps as f64;
            push(
                &mut out,
                center.0 + f * (target.0 - center.0),
                center.1 + f * (target.1 - center.1),
            );
        }
        center = target;
    }
    out
}

/// A point `amp` pixels from `from`, kept inside the central 90% of the canvas.
fn pick_target<R: Rng + ?Sized>(
    from: (f64, f64),
    amp: f64,
    canvas: (f64, f64),
    rng: &mut R,
) -> (f64, f64) {
    let (w, h) = canvas;
    for _ in 0..32 {
        let a = rng.random_range(0.0..core::f64::consts::TAU);
        let p = (from.0 + amp * libm::cos(a), from.1 + amp * libm::sin(a));
        if (0.05 * w..0.95 * w).contains(&p.0) && (0.05 * h..0.95 * h).contains(&p.1) {
            return p;
        }
    }
    // toward the canvas center when every direction leaves it
    let (cx, cy) = (w / 2.0 - from.0, h / 2.0 - from.1);
    let d = libm::hypot(cx, cy).max(1e-9);
    let s = amp.min(d);
    (from.0 + s * cx / d, from.1 + s * cy / d)
}

/// Labeled fixation/saccade sequence; labels come from the velocity labeler.
pub fn fixation_saccade_sequence<R: Rng + ?Sized>(
    subject: &str,
    n: usize,
    rng: &mut R,
    cfg: &ToyConfig,
) -> Result<GazeSequence> {
    let mut samples = fixation_saccade_path(n, rng, cfg);
    let labels = velocity_threshold_labels(&samples, cfg.velocity_threshold);
    samples
        .iter_mut()
        .zip(labels)
        .for_each(|(s, l)| s.label = Some(l));
    let mut seq = GazeSequence::new(subject, samples)?;
    seq.sample_rate_hz = Some(1000.0 / cfg.sample_interval_ms);
    Ok(seq)
}

/// `subjects` labeled sequences of `n` samples named `s00`, `s01`, ...
pub fn segmentation_corpus<R: Rng + ?Sized>(
    subjects: usize,
    n: usize,
    rng: &mut R,
    cfg: &ToyConfig,
) -> Result<Vec<GazeSequence>> {
    (0..subjects)
        .map(|i| fixation_saccade_sequence(&subject_name(i), n, rng, cfg))
        .collect()
}

/// Same paths as [`segmentation_corpus`] but every sample of subject `i`
/// carries class `i % classes`, so labels are a function of the subject.
pub fn subject_keyed_corpus<R: Rng + ?Sized>(
    subjects: usize,
    n: usize,
    classes: usize,
    rng: &mut R,
) -> Result<Vec<GazeSequence>> {
    let cfg = ToyConfig::default();
    (0..subjects)
        .map(|i| {
            let label = Label::from_index(i % classes.max(1))?;
            let mut samples = fixation_saccade_path(n, rng, &cfg);
            samples.iter_mut().for_each(|s| s.label = Some(label));
            GazeSequence::new(subject_name(i), samples)
        })
        .collect()
}

/// Lissajous-style path `center + A sin(2πt/P + φ)` per axis, random
/// amplitude, period and phase.
pub fn sine_path<R: Rng + ?Sized>(
    subject: &str,
    n: usize,
    rng: &mut R,
    cfg: &ToyConfig,
) -> Result<GazeSequence> {
    let (w, h) = cfg.canvas;
    let axis = |rng: &mut R, extent: f64| {
        (
            rng.random_range(0.1 * extent..0.3 * extent),
            rng.random_range(800.0..2000.0),
            rng.random_range(0.0..core::f64::consts::TAU),
        )
    };
    let (ax, px, fx) = axis(rng, w);
    let (ay, py, fy) = axis(rng, h);
    let tau = core::f64::consts::TAU;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 * cfg.sample_interval_ms;
            GazeSample::new(
                t,
                w / 2.0 + ax * libm::sin(tau * t / px + fx),
                h / 2.0 + ay * libm::sin(tau * t / py + fy),
            )
        })
        .collect();
    let mut seq = GazeSequence::new(subject, samples)?;
    seq.sample_rate_hz = Some(1000.0 / cfg.sample_interval_ms);
    Ok(seq)
}

pub fn sine_corpus<R: Rng + ?Sized>(
    count: usize,
    n: usize,
    rng: &mut R,
    cfg: &ToyConfig,
) -> Result<Vec<GazeSequence>> {
    (0..count)
        .map(|i| sine_path(&subject_name(i), n, rng, cfg))
        .collect()
}

/// Unlabeled fixation/saccade sequences of `deltas + 1` samples, so their
/// delta encodings have height `deltas`.
pub fn delta_corpus<R: Rng + ?Sized>(
    count: usize,
    deltas: usize,
    rng: &mut R,
    cfg: &ToyConfig,
) -> Result<Vec<GazeSequence>> {
    (0..count)
        .map(|i| GazeSequence::new(subject_name(i), fixation_saccade_path(deltas + 1, rng, cfg)))
        .collect()
}

pub fn subject_name(i: usize) -> alloc::string::String {
    format!("s{i:02}")
}
