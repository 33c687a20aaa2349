//! Gaze CSV files: `t_ms,x_px,y_px[,label]`, comma separated, header
//! optional, labels as class indices 0..=4.

use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use gazeconv_core::gaze::{GazeSample, GazeSequence, Label, SanitationReport};
use gazeconv_core::segnet::SegPrediction;

use crate::error::{in_file, CliError, Result};

/// Zero-based column positions. A missing label column means unlabeled data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnMap {
    pub t: usize,
    pub x: usize,
    pub y: usize,
    pub label: Option<usize>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            t: 0,
            x: 1,
            y: 2,
            label: Some(3),
        }
    }
}

/// Subject id of a data file: the file stem up to the first `_`.
pub fn subject_of(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    stem.split('_').next().unwrap_or_default().to_string()
}

pub fn load_csv(path: &Path, columns: &ColumnMap) -> Result<(GazeSequence, SanitationReport)> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_csv(file, &subject_of(path), columns).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Parses gaze rows. The first record is treated as a header when its time
/// field is not a number. Row numbers in errors count data rows from 0.
pub fn parse_csv<R: Read>(
    reader: R,
    subject: &str,
    columns: &ColumnMap,
) -> Result<(GazeSequence, SanitationReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut samples = Vec::new();
    let mut first = true;
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("line {}: {e}", line + 1)))?;
        if first {
            first = false;
            if record
                .get(columns.t)
                .is_some_and(|f| f.parse::<f64>().is_err())
            {
                continue;
            }
        }
        let row = samples.len();
        let field = |idx: usize, name: &str| -> Result<f64> {
            let raw = record
                .get(idx)
                .ok_or_else(|| CliError::Data(format!("row {row}: missing column '{name}'")))?;
            raw.parse::<f64>().map_err(|_| {
                CliError::Data(format!(
                    "row {row}: column '{name}' is not a number: {raw:?}"
                ))
            })
        };
        let mut sample = GazeSample::new(
            field(columns.t, "t")?,
            field(columns.x, "x")?,
            field(columns.y, "y")?,
        );
        if let Some(raw) = columns
            .label
            .and_then(|c| record.get(c))
            .filter(|s| !s.is_empty())
        {
            let idx: usize = raw.parse().map_err(|_| {
                CliError::Data(format!("row {row}: label {raw:?} is not a class index"))
            })?;
            sample.label = Some(
                Label::from_index(idx).map_err(|e| CliError::Data(format!("row {row}: {e}")))?,
            );
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(CliError::Data("file contains no data rows".into()));
    }
    GazeSequence::from_raw(subject, samples).map_err(|e| CliError::Data(e.to_string()))
}

/// Every `*.csv` file directly inside `dir`, in file-name order.
pub fn list_csv(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!("{}: no .csv files", dir.display())));
    }
    Ok(files)
}

pub struct LoadedFile {
    pub path: PathBuf,
    pub sequence: GazeSequence,
    pub report: SanitationReport,
}

pub fn load_dir(dir: &Path, columns: &ColumnMap) -> Result<Vec<LoadedFile>> {
    list_csv(dir)?
        .into_iter()
        .map(|path| {
            let (sequence, report) = load_csv(&path, columns)?;
            Ok(LoadedFile {
                path,
                sequence,
                report,
            })
        })
        .collect()
}

/// `file<TAB>row<TAB>reason` for every sanitized row of every file.
pub fn sanitation_text(files: &[LoadedFile]) -> String {
    let mut out = String::new();
    for f in files {
        let name = f
            .path
            .file_name()
            .map(|n| n.to_string_lossy())
            .unwrap_or_default();
        for line in f.report.to_text().lines() {
            out.push_str(&format!("{name}\t{line}\n"));
        }
    }
    out
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_rows<W: Write>(
    out: W,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let map = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record(header).map_err(map)?;
    for r in rows {
        w.write_record(&r).map_err(map)?;
    }
    w.flush().map_err(|e| CliError::Data(e.to_string()))
}

pub fn write_rows_to(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_rows(std::io::BufWriter::new(file), header, rows)
}

/// Writes a sequence in the input schema, with the label column when labeled.
pub fn write_sequence(path: &Path, seq: &GazeSequence) -> Result<()> {
    let labeled = seq.is_labeled();
    let header: &[&str] = if labeled {
        &["t", "x", "y", "label"]
    } else {
        &["t", "x", "y"]
    };
    let rows = seq.samples.iter().map(|s| {
        let mut r = vec![fmt_f64(s.t), fmt_f64(s.x), fmt_f64(s.y)];
        if let Some(l) = s.label {
            r.push(l.index().to_string());
        }
        r
    });
    write_rows_to(path, header, rows)
}

/// Input columns, then the predicted class and one probability per class.
pub fn write_segmentation(path: &Path, seq: &GazeSequence, pred: &SegPrediction) -> Result<()> {
    let labeled = seq.is_labeled();
    let mut header = vec!["t", "x", "y"];
    if labeled {
        header.push("label");
    }
    header.extend([
        "predicted",
        "p_fixation",
        "p_saccade",
        "p_pursuit",
        "p_noise",
        "p_psm",
    ]);
    let rows = seq
        .samples
        .iter()
        .zip(&pred.labels)
        .zip(&pred.probabilities)
        .map(|((s, &p), probs)| {
            let mut r = vec![fmt_f64(s.t), fmt_f64(s.x), fmt_f64(s.y)];
            if let Some(l) = s.label {
                r.push(l.index().to_string());
            }
            r.push(p.to_string());
            r.extend(probs.iter().map(|&v| fmt_f64(v)));
            r
        });
    write_rows_to(path, &header, rows)
}

pub(crate) fn load_one(path: &Path) -> Result<GazeSequence> {
    let (seq, _) = load_csv(path, &ColumnMap::default())?;
    seq.validate().map_err(|e| in_file(path, e))?;
    Ok(seq)
}
