//! Sample-level metrics, subject-disjoint cross validation, scanpath
//! rasterization and the small statistics used to judge generated data.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config_err, shape_err, Result};
use crate::gaze::{FoldPlan, GazeSequence};

/// Rows are the true class, columns the predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[&[u64]]) -> Result<Self> {
        let classes = rows.len();
        if rows.iter().any(|r| r.len() != classes) {
            return Err(shape_err!("confusion matrix must be square"));
        }
        Ok(ConfusionMatrix {
            classes,
            counts: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        if truth >= self.classes || predicted >= self.classes {
            return Err(crate::Error::Label {
                label: truth.max(predicted),
                classes: self.classes,
            });
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    /// Counts only samples whose truth is annotated.
    pub fn record_all(&mut self, truth: &[Option<usize>], predicted: &[usize]) -> Result<()> {
        if truth.len() != predicted.len() {
            return Err(shape_err!(
                "{} truths for {} predictions",
                truth.len(),
                predicted.len()
            ));
        }
        for (t, &p) in truth.iter().zip(predicted) {
            if let Some(t) = *t {
                self.record(t, p)?;
            }
        }
        Ok(())
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(shape_err!(
                "cannot add {}- and {}-class matrices",
                self.classes,
                other.classes
            ));
        }
        self.counts
            .iter_mut()
            .zip(&other.counts)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|p| self.get(c, p)).sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, c)).sum()
    }

    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0)
            .then(|| (0..self.classes).map(|c| self.get(c, c)).sum::<u64>() as f64 / total as f64)
    }
}

/// `None` marks an empty denominator; it is reported as "n/a", never as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub recall: Option<f64>,
    pub precision: Option<f64>,
}

pub fn recall_precision(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..cm.classes())
        .map(|c| {
            let tp = cm.get(c, c) as f64;
            let row = cm.row_sum(c);
            let col = cm.col_sum(c);
            ClassMetrics {
                recall: (row > 0).then(|| tp / row as f64),
                precision: (col > 0).then(|| tp / col as f64),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub fold: usize,
    pub test_subjects: Vec<alloc::string::String>,
    pub confusion: ConfusionMatrix,
    pub metrics: Vec<ClassMetrics>,
    pub samples: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub folds: Vec<FoldReport>,
    pub aggregate: ConfusionMatrix,
    pub metrics: Vec<ClassMetrics>,
}

/// For every fold: train on the other folds, predict the held-out subjects,
/// and sum the confusions. Sequences whose subject is missing from the plan
/// are a configuration error.
pub fn cross_validate<M, T, P>(
    dataset: &[GazeSequence],
    plan: &FoldPlan,
    classes: usize,
    mut train_fn: T,
    mut predict_fn: P,
) -> Result<CvReport>
where
    T: FnMut(usize, &[&GazeSequence]) -> Result<M>,
    P: FnMut(&M, &GazeSequence) -> Result<Vec<usize>>,
{
    if let Some(s) = dataset
        .iter()
        .find(|s| plan.fold_of(&s.subject_id).is_none())
    {
        return Err(config_err!("subject '{}' has no fold", s.subject_id));
    }
    let mut aggregate = ConfusionMatrix::new(classes);
    let mut folds = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        let (test, train): (Vec<&GazeSequence>, Vec<&GazeSequence>) = dataset
            .iter()
            .partition(|s| plan.fold_of(&s.subject_id) == Some(fold));
        let train_subjects: BTreeSet<&str> = train.iter().map(|s| s.subject_id.as_str()).collect();
        assert!(
            test.iter()
                .all(|s| !train_subjects.contains(s.subject_id.as_str())),
            "subject leaked across the fold boundary"
        );
        let labeled: u64 = test
            .iter()
            .map(|s| s.samples.iter().filter(|x| x.label.is_some()).count() as u64)
            .sum();
        if labeled == 0 {
            return Err(config_err!("fold {fold} has no labeled test samples"));
        }
        let model = train_fn(fold, &train)?;
        let mut confusion = ConfusionMatrix::new(classes);
        for seq in &test {
            let predicted = predict_fn(&model, seq)?;
            let truth: Vec<Option<usize>> = seq
                .samples
                .iter()
                .map(|s| s.label.map(|l| l.index()))
                .collect();
            confusion.record_all(&truth, &predicted)?;
        }
        aggregate.add(&confusion)?;
        let mut test_subjects: Vec<_> = test.iter().map(|s| s.subject_id.clone()).collect();
        test_subjects.sort();
        test_subjects.dedup();
        folds.push(FoldReport {
            fold,
            test_subjects,
            metrics: recall_precision(&confusion),
            samples: confusion.total(),
            confusion,
        });
    }
    let metrics = recall_precision(&aggregate);
    Ok(CvReport {
        folds,
        aggregate,
        metrics,
    })
}

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanpathImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl ScanpathImage {
    pub fn new(width: usize, height: usize) -> Self {
        ScanpathImage {
            width,
            height,
            pixels: vec![[0; 3]; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    fn put(&mut self, x: i64, y: i64, channel: usize, value: u8) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.pixels[y as usize * self.width + x as usize][channel] = value;
        }
    }

    pub fn raw_rgb(&self) -> Vec<u8> {
        self.pixels.iter().flat_map(|p| p.iter().copied()).collect()
    }
}

pub const DOT_RADIUS: i64 = 1;

/// Red: a disc at every sample. Green: lines between consecutive samples.
/// Blue: normalized time (first sample 0, last 255) on the same discs.
/// Pixels outside the canvas are dropped.
pub fn rasterize_scanpath(seq: &GazeSequence, width: usize, height: usize) -> ScanpathImage {
    let mut img = ScanpathImage::new(width, height);
    let pts: Vec<(i64, i64)> = seq
        .samples
        .iter()
        .map(|s| (libm::round(s.x) as i64, libm::round(s.y) as i64))
        .collect();
    for w in pts.windows(2) {
        draw_line(&mut img, w[0], w[1]);
    }
    let t0 = seq.samples.first().map_or(0.0, |s| s.t);
    let t1 = seq.samples.last().map_or(0.0, |s| s.t);
    let span = t1 - t0;
    for (s, &(px, py)) in seq.samples.iter().zip(&pts) {
        let blue = if span > 0.0 {
            libm::round(255.0 * (s.t - t0) / span) as u8
        } else {
            0
        };
        for dy in -DOT_RADIUS..=DOT_RADIUS {
            for dx in -DOT_RADIUS..=DOT_RADIUS {
                if dx * dx + dy * dy <= DOT_RADIUS * DOT_RADIUS {
                    img.put(px + dx, py + dy, 0, 255);
                    img.put(px + dx, py + dy, 2, blue);
                }
            }
        }
    }
    img
}

/// Integer Bresenham stepping into the green channel.
fn draw_line(img: &mut ScanpathImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64)) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        img.put(x, y, 1, 255);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Per channel: fraction of lit pixels, mean intensity, and the lit pixels'
/// centroid and spread along both axes (normalized to the canvas).
pub fn channel_statistics(img: &ScanpathImage) -> Vec<f64> {
    let n = (img.width * img.height).max(1) as f64;
    let mut feats = Vec::with_capacity(18);
    for c in 0..3 {
        let (mut lit, mut sum, mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for y in 0..img.height {
            for x in 0..img.width {
                let v = img.get(x, y)[c];
                if v > 0 {
                    let (fx, fy) = (x as f64 / img.width as f64, y as f64 / img.height as f64);
                    lit += 1.0;
                    sx += fx;
                    sy += fy;
                    sxx += fx * fx;
                    syy += fy * fy;
                }
                sum += v as f64 / 255.0;
            }
        }
        let (mx, my) = if lit > 0.0 {
            (sx / lit, sy / lit)
        } else {
            (0.0, 0.0)
        };
        let (vx, vy) = if lit > 0.0 {
            (sxx / lit - mx * mx, syy / lit - my * my)
        } else {
            (0.0, 0.0)
        };
        feats.extend([
            lit / n,
            sum / n,
            mx,
            my,
            libm::sqrt(vx.max(0.0)),
            libm::sqrt(vy.max(0.0)),
        ]);
    }
    feats
}

/// Nearest class mean under z-scored Euclidean distance.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestCentroid {
    centroids: Vec<Vec<f64>>,
    scale: Vec<f64>,
}

impl NearestCentroid {
    /// `features[i]` belongs to class `labels[i]`; every class in
    /// `0..classes` needs at least one example.
    pub fn fit(features: &[Vec<f64>], labels: &[usize], classes: usize) -> Result<Self> {
        let dim = features.first().map_or(0, Vec::len);
        if features.len() != labels.len() || features.iter().any(|f| f.len() != dim) || dim == 0 {
            return Err(shape_err!("inconsistent feature matrix"));
        }
        let mut mean = vec![0.0; dim];
        for f in features {
            mean.iter_mut()
                .zip(f)
                .for_each(|(m, v)| *m += v / features.len() as f64);
        }
        let mut scale = vec![0.0; dim];
        for f in features {
            scale
                .iter_mut()
                .zip(f)
                .zip(&mean)
                .for_each(|((s, v), m)| *s += (v - m) * (v - m));
        }
        for s in &mut scale {
            let sd = libm::sqrt(*s / features.len() as f64);
            *s = if sd > 1e-12 { sd } else { 1.0 };
        }
        let mut centroids = vec![vec![0.0; dim]; classes];
        let mut counts = vec![0usize; classes];
        for (f, &l) in features.iter().zip(labels) {
            if l >= classes {
                return Err(crate::Error::Label { label: l, classes });
            }
            counts[l] += 1;
            centroids[l].iter_mut().zip(f).for_each(|(c, v)| *c += v);
        }
        for (c, &n) in centroids.iter_mut().zip(&counts) {
            if n == 0 {
                return Err(config_err!("every class needs at least one example"));
            }
            c.iter_mut().for_each(|v| *v /= n as f64);
        }
        Ok(NearestCentroid { centroids, scale })
    }

    pub fn predict(&self, features: &[f64]) -> usize {
        let dist = |c: &Vec<f64>| -> f64 {
            c.iter()
                .zip(features)
                .zip(&self.scale)
                .map(|((a, b), s)| ((a - b) / s) * ((a - b) / s))
                .sum()
        };
        (0..self.centroids.len())
            .min_by(|&a, &b| dist(&self.centroids[a]).total_cmp(&dist(&self.centroids[b])))
            .unwrap_or(0)
    }
}

/// Spearman rank correlation with average ranks for ties. `None` if either
/// side is constant or the lengths differ.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / libm::sqrt(va * vb))
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Normalized histogram over `[0, upper]` with `bins` equal bins; values
/// above `upper` land in the last bin.
pub fn histogram(values: &[f64], bins: usize, upper: f64) -> Vec<f64> {
    let mut h = vec![0.0; bins.max(1)];
    if values.is_empty() || !(upper > 0.0) {
        return h;
    }
    for &v in values {
        let b = ((v / upper) * bins as f64) as usize;
        h[b.min(bins - 1)] += 1.0;
    }
    h.iter_mut().for_each(|x| *x /= values.len() as f64);
    h
}

/// Jensen–Shannon divergence in bits (bounded by 1).
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    let kl = |a: &[f64], m: &[f64]| -> f64 {
        a.iter()
            .zip(m)
            .filter(|(&x, _)| x > 0.0)
            .map(|(&x, &y)| x * libm::log2(x / y))
            .sum()
    };
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    0.5 * kl(p, &m) + 0.5 * kl(q, &m)
}

/// Euclidean magnitudes of successive position changes, in pixels.
pub fn step_magnitudes(seq: &GazeSequence) -> Vec<f64> {
    seq.samples
        .windows(2)
        .map(|w| libm::hypot(w[1].x - w[0].x, w[1].y - w[0].y))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::GazeSample;

    #[test]
    fn diagonal_is_perfect() {
        let cm = ConfusionMatrix::from_rows(&[&[5, 0, 0], &[0, 3, 0], &[0, 0, 7]]).unwrap();
        for m in recall_precision(&cm) {
            assert_eq!((m.recall, m.precision), (Some(1.0), Some(1.0)));
        }
    }

    #[test]
    fn two_class_hand_arithmetic() {
        let cm = ConfusionMatrix::from_rows(&[&[8, 2], &[1, 9]]).unwrap();
        let m = recall_precision(&cm);
        assert_eq!(m[0].recall, Some(0.8));
        assert_eq!(m[1].recall, Some(0.9));
        assert_eq!(m[0].precision, Some(8.0 / 9.0));
        assert_eq!(m[1].precision, Some(9.0 / 11.0));
    }

    #[test]
    fn empty_denominators_are_undefined() {
        let cm = ConfusionMatrix::from_rows(&[&[4, 0], &[0, 0]]).unwrap();
        let m = recall_precision(&cm);
        assert_eq!(m[1].recall, None);
        assert_eq!(m[1].precision, None);
        let cm = ConfusionMatrix::from_rows(&[&[4, 0], &[3, 0]]).unwrap();
        assert_eq!(
            recall_precision(&cm)[1],
            ClassMetrics {
                recall: Some(0.0),
                precision: None
            }
        );
    }

    #[test]
    fn unannotated_samples_skipped() {
        let mut cm = ConfusionMatrix::new(2);
        cm.record_all(&[Some(0), None, Some(1)], &[0, 1, 0])
            .unwrap();
        assert_eq!(cm.total(), 2);
    }

    fn path(pts: &[(f64, f64, f64)]) -> GazeSequence {
        GazeSequence::new(
            "p",
            pts.iter()
                .map(|&(t, x, y)| GazeSample::new(t, x, y))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_dot() {
        let img = rasterize_scanpath(&path(&[(0.0, 5.0, 5.0)]), 11, 11);
        assert_eq!(img.get(5, 5), [255, 0, 0]);
        assert_eq!(img.pixels.iter().filter(|p| p[0] > 0).count(), 5);
        assert!(img.pixels.iter().all(|p| p[1] == 0 && p[2] == 0));
    }

    #[test]
    fn two_samples_have_segment_and_time_ramp() {
        let img = rasterize_scanpath(&path(&[(0.0, 2.0, 2.0), (10.0, 12.0, 7.0)]), 20, 10);
        assert_eq!(img.get(2, 2)[2], 0);
        assert_eq!(img.get(12, 7)[2], 255);
        assert_eq!(img.get(2, 2)[1], 255);
        assert_eq!(img.get(12, 7)[1], 255);
        assert_eq!(img.pixels.iter().filter(|p| p[1] > 0).count(), 11);
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn js_bounds() {
        let p = histogram(&[0.1, 0.2, 0.9], 4, 1.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(js_divergence(&p, &p), 0.0);
        assert!((js_divergence(&[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nearest_centroid_separates() {
        let f = vec![
            vec![0.0, 0.0],
            vec![0.2, 0.1],
            vec![5.0, 5.0],
            vec![5.1, 4.9],
        ];
        let nc = NearestCentroid::fit(&f, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(nc.predict(&[0.1, 0.0]), 0);
        assert_eq!(nc.predict(&[4.0, 6.0]), 1);
    }
}
