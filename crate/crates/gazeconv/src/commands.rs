use std::path::{Path, PathBuf};

use gazeconv_core::eval::{
    channel_statistics, cross_validate, histogram, js_divergence, rasterize_scanpath,
    step_magnitudes, ClassMetrics, CvReport,
};
use gazeconv_core::gaze::{
    make_folds, to_delta_tensor, to_input_tensor, GazeSample, GazeSequence, Label,
};
use gazeconv_core::genvae::{center_scanpath, generate_scanpath, vae_train, VaeModel};
use gazeconv_core::model_file::{Model, Task};
use gazeconv_core::reconnet::{
    recon_evaluate, recon_evaluate_with, recon_forward, recon_train, sample_clean_sections,
    ReconModel, ReconReport,
};
use gazeconv_core::schedule::LrSchedule;
use gazeconv_core::segnet::{seg_predict, seg_train, SegModel};
use gazeconv_core::synth;
use gazeconv_core::{Tensor, INPUT_SCALE, NUM_CLASSES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cli::{
    ApplyArgs, Cli, Command, EvalArgs, GenerateArgs, RunArgs, TaskArg, ToyArgs, ToyKind, TrainArgs,
};
use crate::config::RunConfig;
use crate::csv_io::{
    fmt_f64, load_dir, load_one, sanitation_text, write_rows_to, write_segmentation,
    write_sequence, ColumnMap, LoadedFile,
};
use crate::error::{CliError, Result};
use crate::files::{load_model_for, save_model, save_png, write_text};

pub const MODEL_FILE: &str = "model.gcv";

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => train(&a),
        Command::Segment(a) => segment(&a),
        Command::Reconstruct(a) => reconstruct(&a),
        Command::Generate(a) => generate(&a),
        Command::Eval(a) => eval(&a),
        Command::Toy(a) => toy(&a),
    }
}

fn task_of(t: TaskArg) -> Task {
    match t {
        TaskArg::Segment => Task::Segment,
        TaskArg::Reconstruct => Task::Reconstruct,
        TaskArg::Generate => Task::Generate,
    }
}

/// Loads the configuration file (or defaults) and applies flag overrides to
/// the section of `task`.
pub fn resolve(run: &RunArgs, task: Task) -> Result<RunConfig> {
    let mut cfg = match &run.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = run.seed {
        cfg.seed = s;
    }
    if run.data.is_some() {
        cfg.data.clone_from(&run.data);
    }
    if run.out.is_some() {
        cfg.output.clone_from(&run.out);
    }
    let (schedule, optimizer_lr, batch) = match task {
        Task::Segment => {
            let t = &mut cfg.segment.train;
            (
                &mut t.schedule,
                &mut t.optimizer.learning_rate,
                &mut t.batch_size,
            )
        }
        Task::Reconstruct => {
            let t = &mut cfg.reconstruct.train;
            (
                &mut t.schedule,
                &mut t.optimizer.learning_rate,
                &mut t.batch_size,
            )
        }
        Task::Generate => {
            let t = &mut cfg.generate.train;
            (
                &mut t.schedule,
                &mut t.optimizer.learning_rate,
                &mut t.batch_size,
            )
        }
    };
    override_schedule(schedule, run);
    *optimizer_lr = schedule.base_lr;
    if let Some(b) = run.batch_size {
        *batch = b;
    }
    Ok(cfg)
}

fn override_schedule(s: &mut LrSchedule, run: &RunArgs) {
    if let Some(lr) = run.lr {
        s.base_lr = lr;
    }
    if let Some(e) = run.decay_every {
        s.decay_every = e;
    }
    if let Some(stop) = run.stop_lr {
        s.stop_lr = stop;
    }
}

fn required(p: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    p.clone().ok_or_else(|| {
        CliError::Usage(format!("missing --{flag} (or set it in the configuration)"))
    })
}

/// Writes the sidecar, then loads every CSV in the data directory.
fn prepare(cfg: &RunConfig) -> Result<(PathBuf, Vec<LoadedFile>)> {
    let data = required(&cfg.data, "data")?;
    let out = required(&cfg.output, "out")?;
    cfg.write_sidecar(&out)?;
    let files = load_dir(&data, &ColumnMap::default())?;
    write_text(&out.join("sanitation.txt"), &sanitation_text(&files))?;
    Ok((out, files))
}

fn sequences(files: Vec<LoadedFile>) -> Vec<GazeSequence> {
    files.into_iter().map(|f| f.sequence).collect()
}

fn train(a: &TrainArgs) -> Result<()> {
    let task = task_of(a.task);
    let cfg = resolve(&a.run, task)?;
    let (out, files) = prepare(&cfg)?;
    let seqs = sequences(files);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let loss_path = out.join("loss.csv");
    let model = match task {
        Task::Segment => {
            let model = train_segment(&cfg, &seqs, &mut rng, Some(&loss_path))?;
            Model::Segment(model)
        }
        Task::Reconstruct => {
            let draw = cfg.reconstruct.section_spec();
            let mut sections = Vec::new();
            for s in &seqs {
                sections.extend(sample_clean_sections(s, &mut rng, &draw)?);
            }
            let mut model = ReconModel::new(&cfg.reconstruct.arch, &mut rng)?;
            let hist = recon_train(&mut model, &sections, &cfg.reconstruct.train, &mut rng)?;
            let rows = hist.iter().map(|h| {
                let kind = format!("{:?}", h.loss_kind).to_lowercase();
                vec![
                    h.epoch.to_string(),
                    fmt_f64(h.learning_rate),
                    kind,
                    fmt_f64(h.loss),
                ]
            });
            write_rows_to(
                &loss_path,
                &["epoch", "learning_rate", "loss_kind", "loss"],
                rows,
            )?;
            Model::Reconstruct(model)
        }
        Task::Generate => {
            let window = cfg.generate.window;
            let corpus = delta_windows(&seqs, window)?;
            let mut model = VaeModel::new(&cfg.generate.arch, &mut rng)?;
            let hist = vae_train(&mut model, &corpus, &cfg.generate.train, &mut rng)?;
            let rows = hist.iter().map(|h| {
                vec![
                    h.epoch.to_string(),
                    fmt_f64(h.learning_rate),
                    fmt_f64(h.recon_loss),
                    fmt_f64(h.kl_loss),
                ]
            });
            write_rows_to(
                &loss_path,
                &["epoch", "learning_rate", "recon_loss", "kl_loss"],
                rows,
            )?;
            Model::Generate(model)
        }
    };
    let model_path = out.join(MODEL_FILE);
    save_model(&model_path, &model)?;
    println!("trained {} model -> {}", task.name(), model_path.display());
    Ok(())
}

pub fn train_segment(
    cfg: &RunConfig,
    train: &[GazeSequence],
    rng: &mut ChaCha8Rng,
    loss_path: Option<&Path>,
) -> Result<SegModel> {
    let mut model = SegModel::new(&cfg.segment.arch, rng)?;
    let hist = seg_train(&mut model, train, &cfg.segment.train, rng)?;
    if let Some(p) = loss_path {
        let rows = hist.iter().map(|h| {
            vec![
                h.epoch.to_string(),
                fmt_f64(h.learning_rate),
                fmt_f64(h.loss),
            ]
        });
        write_rows_to(p, &["epoch", "learning_rate", "loss"], rows)?;
    }
    Ok(model)
}

/// Cuts every sequence into non-overlapping runs of `window + 1` samples and
/// delta-encodes them.
pub fn delta_windows(seqs: &[GazeSequence], window: usize) -> Result<Vec<Tensor>> {
    if window == 0 || !window.is_multiple_of(4) {
        return Err(CliError::Usage(format!(
            "generate.window must be a positive multiple of 4, got {window}"
        )));
    }
    let mut out = Vec::new();
    for s in seqs {
        let mut start = 0;
        while start + window < s.len() {
            out.push(to_delta_tensor(&s.section(start, window + 1)?)?);
            start += window + 1;
        }
    }
    if out.is_empty() {
        return Err(CliError::Data(format!(
            "no sequence has the {} samples one training window needs",
            window + 1
        )));
    }
    Ok(out)
}

fn segment(a: &ApplyArgs) -> Result<()> {
    let Model::Segment(model) = load_model_for(&a.model, Task::Segment)? else {
        unreachable!()
    };
    let seq = load_one(&a.input)?;
    let pred = seg_predict(&model, &seq)?;
    write_segmentation(&a.output, &seq, &pred)?;
    println!("segmented {} samples -> {}", seq.len(), a.output.display());
    Ok(())
}

fn reconstruct(a: &ApplyArgs) -> Result<()> {
    let Model::Reconstruct(model) = load_model_for(&a.model, Task::Reconstruct)? else {
        unreachable!()
    };
    let seq = load_one(&a.input)?;
    let repaired = recon_forward(&model, &to_input_tensor(&seq)?)?;
    let mut out = seq.clone();
    for (i, s) in out.samples.iter_mut().enumerate() {
        s.x = repaired.get(0, i) * INPUT_SCALE;
        s.y = repaired.get(1, i) * INPUT_SCALE;
    }
    write_sequence(&a.output, &out)?;
    println!(
        "reconstructed {} samples -> {}",
        out.len(),
        a.output.display()
    );
    Ok(())
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let Model::Generate(model) = load_model_for(&a.model, Task::Generate)? else {
        unreachable!()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let start = GazeSample::new(a.start_t, a.start_x, a.start_y);
    let seq = generate_scanpath(&model, &mut rng, a.length, start)?;
    write_sequence(&a.output, &seq)?;
    println!("generated {} samples -> {}", seq.len(), a.output.display());
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let task = task_of(a.task);
    let mut cfg = resolve(&a.run, task)?;
    if let Some(k) = a.folds {
        cfg.eval.folds = k;
    }
    if let Some(f) = &a.fractions {
        cfg.reconstruct.eval.fractions = f.iter().map(|p| p / 100.0).collect();
    }
    if let Some(c) = a.count {
        cfg.generate.count = c;
    }
    match task {
        Task::Segment => eval_segment(&cfg),
        Task::Reconstruct => {
            let model_path = required(&a.model, "model")?;
            let Model::Reconstruct(model) = load_model_for(&model_path, Task::Reconstruct)? else {
                unreachable!()
            };
            eval_reconstruct(&cfg, &model)
        }
        Task::Generate => {
            let model_path = required(&a.model, "model")?;
            let Model::Generate(model) = load_model_for(&model_path, Task::Generate)? else {
                unreachable!()
            };
            eval_generate(&cfg, &model)
        }
    }
}

fn metric(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), fmt_f64)
}

fn metric_rows(metrics: &[ClassMetrics]) -> impl Iterator<Item = Vec<String>> + '_ {
    metrics.iter().enumerate().map(|(c, m)| {
        let name = Label::from_index(c).map_or_else(|_| c.to_string(), |l| l.name().to_string());
        vec![name, metric(m.recall), metric(m.precision)]
    })
}

fn eval_segment(cfg: &RunConfig) -> Result<()> {
    let (out, files) = prepare(cfg)?;
    let seqs = sequences(files);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let plan = make_folds(&seqs, cfg.eval.folds, &mut rng)?;
    write_text(&out.join("fold_plan.txt"), &plan.to_text())?;
    let report = cross_validate(
        &seqs,
        &plan,
        NUM_CLASSES,
        |_, train| {
            let owned: Vec<GazeSequence> = train.iter().map(|s| (*s).clone()).collect();
            train_segment(cfg, &owned, &mut rng, None).map_err(|e| match e {
                CliError::Usage(m) => gazeconv_core::Error::Config(m),
                CliError::Data(m) => gazeconv_core::Error::Data(m),
                CliError::Numeric(m) => gazeconv_core::Error::NonFinite {
                    epoch: 0,
                    detail: m,
                },
            })
        },
        |model, seq| Ok(seg_predict(model, seq)?.labels),
    )?;
    write_cv_report(&out, &report)?;
    let acc = report.aggregate.accuracy().unwrap_or(0.0);
    println!(
        "{}-fold cross validation: accuracy {acc:.4} -> {}",
        plan.k,
        out.display()
    );
    Ok(())
}

pub fn write_cv_report(out: &Path, report: &CvReport) -> Result<()> {
    let fold_rows = report.folds.iter().flat_map(|f| {
        metric_rows(&f.metrics).map(move |mut r| {
            r.insert(0, f.fold.to_string());
            r.push(f.samples.to_string());
            r
        })
    });
    write_rows_to(
        &out.join("folds.csv"),
        &["fold", "class", "recall", "precision", "samples"],
        fold_rows,
    )?;
    write_rows_to(
        &out.join("aggregate.csv"),
        &["class", "recall", "precision"],
        metric_rows(&report.metrics),
    )?;
    let cm = &report.aggregate;
    let mut header = vec!["truth".to_string()];
    header.extend(Label::ALL.iter().map(|l| l.name().to_string()));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = Label::ALL.iter().map(|t| {
        let mut r = vec![t.name().to_string()];
        r.extend(
            Label::ALL
                .iter()
                .map(|p| cm.get(t.index(), p.index()).to_string()),
        );
        r
    });
    write_rows_to(&out.join("confusion.csv"), &header_refs, rows)
}

fn percent(f: f64) -> String {
    fmt_f64((f * 100.0 * 1e9).round() / 1e9)
}

pub fn write_mae_table(path: &Path, report: &ReconReport) -> Result<()> {
    let rows = report.rows.iter().map(|r| {
        vec![
            percent(r.fraction),
            r.scope.name().to_string(),
            fmt_f64(r.mae_px),
        ]
    });
    write_rows_to(path, &["fraction_percent", "scope", "mae_px"], rows)
}

fn eval_reconstruct(cfg: &RunConfig, model: &ReconModel) -> Result<()> {
    let (out, files) = prepare(cfg)?;
    let seqs = sequences(files);
    let ec = &cfg.reconstruct.eval;
    let report = recon_evaluate(model, &seqs, &mut ChaCha8Rng::seed_from_u64(cfg.seed), ec)?;
    // same seed, so the baseline sees exactly the same corruptions
    let baseline = recon_evaluate_with(
        |t| Ok(t.clone()),
        &seqs,
        &mut ChaCha8Rng::seed_from_u64(cfg.seed),
        ec,
    )?;
    write_mae_table(&out.join("mae.csv"), &report)?;
    write_mae_table(&out.join("baseline_mae.csv"), &baseline)?;
    let rows = report.scatter.iter().map(|p| {
        vec![
            p.section_id.to_string(),
            percent(p.fraction),
            fmt_f64(p.normalized_induced_error),
            fmt_f64(p.normalized_reconstruction_error),
        ]
    });
    write_rows_to(
        &out.join("scatter.csv"),
        &[
            "section_id",
            "fraction_percent",
            "normalized_induced_error",
            "normalized_reconstruction_error",
        ],
        rows,
    )?;
    println!(
        "reconstruction benchmark over {} sections -> {}",
        report.sections,
        out.display()
    );
    Ok(())
}

fn eval_generate(cfg: &RunConfig, model: &VaeModel) -> Result<()> {
    let (out, files) = prepare(cfg)?;
    let real = sequences(files);
    let g = &cfg.generate;
    let (w, h) = (g.canvas.0 as f64, g.canvas.1 as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let generated = (0..g.count)
        .map(|_| {
            generate_scanpath(
                model,
                &mut rng,
                g.length,
                GazeSample::new(0.0, w / 2.0, h / 2.0),
            )
        })
        .collect::<gazeconv_core::Result<Vec<_>>>()?;
    let real_steps: Vec<f64> = real.iter().flat_map(step_magnitudes).collect();
    let gen_steps: Vec<f64> = generated.iter().flat_map(step_magnitudes).collect();
    let upper = real_steps.iter().copied().fold(0.0, f64::max);
    let bins = g.histogram_bins.max(1);
    let (p, q) = (
        histogram(&real_steps, bins, upper),
        histogram(&gen_steps, bins, upper),
    );
    let width = upper / bins as f64;
    let rows = (0..bins).map(|b| {
        vec![
            b.to_string(),
            fmt_f64(b as f64 * width),
            fmt_f64((b + 1) as f64 * width),
            fmt_f64(p[b]),
            fmt_f64(q[b]),
        ]
    });
    write_rows_to(
        &out.join("histogram.csv"),
        &["bin", "lower_px", "upper_px", "real", "generated"],
        rows,
    )?;
    let js = js_divergence(&p, &q);
    let summary = vec![
        vec!["js_divergence_bits".to_string(), fmt_f64(js)],
        vec!["real_steps".to_string(), real_steps.len().to_string()],
        vec!["generated_steps".to_string(), gen_steps.len().to_string()],
    ];
    write_rows_to(&out.join("summary.csv"), &["metric", "value"], summary)?;
    let mut stats = Vec::new();
    for (kind, set) in [("real", &real), ("generated", &generated)] {
        for (i, s) in set.iter().enumerate().take(g.count) {
            let img = rasterize_scanpath(
                &center_scanpath(s, (w, h)),
                g.canvas.0 as usize,
                g.canvas.1 as usize,
            );
            save_png(&out.join(format!("{kind}_{i:02}.png")), &img)?;
            let mut row = vec![kind.to_string(), i.to_string()];
            row.extend(channel_statistics(&img).into_iter().map(fmt_f64));
            stats.push(row);
        }
    }
    let mut header = vec!["source".to_string(), "index".to_string()];
    for c in ["red", "green", "blue"] {
        for f in ["lit", "mean", "cx", "cy", "sx", "sy"] {
            header.push(format!("{c}_{f}"));
        }
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows_to(&out.join("channel_stats.csv"), &header_refs, stats)?;
    println!(
        "generated {} scanpaths, JS divergence {js:.4} -> {}",
        generated.len(),
        out.display()
    );
    Ok(())
}

fn toy(a: &ToyArgs) -> Result<()> {
    let mut cfg = RunConfig {
        seed: a.seed,
        output: Some(a.out.clone()),
        ..RunConfig::default()
    };
    if let Some(s) = a.subjects {
        cfg.toy.subjects = s;
    }
    if let Some(l) = a.length {
        cfg.toy.length = l;
    }
    let t = &cfg.toy;
    if t.subjects == 0 || t.length < 2 {
        return Err(CliError::Usage(
            "toy corpora need at least 1 subject and 2 samples".into(),
        ));
    }
    cfg.write_sidecar(&a.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let corpus = match a.kind {
        ToyKind::Segment => synth::segmentation_corpus(t.subjects, t.length, &mut rng, &t.shape)?,
        ToyKind::Reconstruct => synth::sine_corpus(t.subjects, t.length, &mut rng, &t.shape)?,
        ToyKind::Generate => synth::delta_corpus(t.subjects, t.length - 1, &mut rng, &t.shape)?,
        ToyKind::Canary => synth::subject_keyed_corpus(t.subjects, t.length, 2, &mut rng)?,
    };
    for s in &corpus {
        write_sequence(&a.out.join(format!("{}.csv", s.subject_id)), s)?;
    }
    println!("wrote {} files -> {}", corpus.len(), a.out.display());
    Ok(())
}
