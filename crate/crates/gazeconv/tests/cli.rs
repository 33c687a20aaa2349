use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gazeconv"));
    cmd.env_remove("GAZECONV_DATA");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn gazeconv")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn short_segment_model(root: &Path) -> std::path::PathBuf {
    let data = root.join("seg");
    ok(&[
        "toy",
        "segment",
        "--out",
        p(&data),
        "--subjects",
        "2",
        "--length",
        "120",
    ]);
    let out = root.join("seg_model");
    ok(&[
        "train",
        "segment",
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--decay-every",
        "3",
        "--stop-lr",
        "1e-3",
    ]);
    out.join("model.gcv")
}

#[test]
fn segment_keeps_every_row_and_probabilities_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let model = short_segment_model(dir.path());
    let input = dir.path().join("seg").join("s00.csv");
    let output = dir.path().join("labels.csv");
    ok(&[
        "segment",
        "--model",
        p(&model),
        "--input",
        p(&input),
        "--output",
        p(&output),
    ]);
    let (inp, out) = (rows(&input), rows(&output));
    assert_eq!(inp.len(), out.len());
    for (a, b) in inp.iter().zip(&out) {
        assert_eq!(a[..3], b[..3]);
        let total: f64 = b[b.len() - 5..]
            .iter()
            .map(|v| v.parse::<f64>().unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let model = short_segment_model(dir.path());
    let data = dir.path().join("seg");
    let input = data.join("s00.csv");
    let out = dir.path().join("x.csv");

    let mismatch = run(&[
        "reconstruct",
        "--model",
        p(&model),
        "--input",
        p(&input),
        "--output",
        p(&out),
    ]);
    assert_eq!(code(&mismatch), 2);
    assert_eq!(code(&run(&["train", "segment", "--out", p(dir.path())])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    let bad_config = dir.path().join("bad.toml");
    std::fs::write(&bad_config, "seed = 1\nunknown_key = 3\n").unwrap();
    let r = run(&[
        "train",
        "segment",
        "--config",
        p(&bad_config),
        "--data",
        p(&data),
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(code(&r), 2);

    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, "t,x,y\n0,1,2\n4,oops,3\n").unwrap();
    let r = run(&[
        "segment",
        "--model",
        p(&model),
        "--input",
        p(&broken),
        "--output",
        p(&out),
    ]);
    assert_eq!(code(&r), 3);
    assert!(String::from_utf8_lossy(&r.stderr).contains("row 1"));
    let backwards = dir.path().join("backwards.csv");
    std::fs::write(&backwards, "0,1,2\n8,1,2\n4,1,2\n").unwrap();
    let r = run(&[
        "segment",
        "--model",
        p(&model),
        "--input",
        p(&backwards),
        "--output",
        p(&out),
    ]);
    assert_eq!(code(&r), 3);

    let diverge = dir.path().join("diverge");
    let r = run(&[
        "train",
        "segment",
        "--data",
        p(&data),
        "--out",
        p(&diverge),
        "--lr",
        "1e12",
        "--decay-every",
        "3",
        "--stop-lr",
        "1e10",
    ]);
    assert_eq!(code(&r), 4, "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn data_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("seg");
    ok(&[
        "toy",
        "segment",
        "--out",
        p(&data),
        "--subjects",
        "2",
        "--length",
        "60",
    ]);
    let out = dir.path().join("env_run");
    let r = bin()
        .env("GAZECONV_DATA", &data)
        .args([
            "train",
            "segment",
            "--out",
            p(&out),
            "--decay-every",
            "2",
            "--stop-lr",
            "1e-3",
        ])
        .output()
        .unwrap();
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("model.gcv").exists());
    assert!(std::fs::read_to_string(out.join("config.toml"))
        .unwrap()
        .contains("seg"));
    assert_eq!(rows(&out.join("loss.csv")).len(), 4);
}

#[test]
fn generate_writes_requested_length_with_increasing_time() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("vae");
    ok(&[
        "toy",
        "generate",
        "--out",
        p(&data),
        "--subjects",
        "3",
        "--length",
        "129",
    ]);
    let out = dir.path().join("vae_model");
    ok(&[
        "train",
        "generate",
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--decay-every",
        "3",
        "--stop-lr",
        "1e-5",
    ]);
    let model = out.join("model.gcv");
    let gen = |seed: &str, name: &str| {
        let path = dir.path().join(name);
        ok(&[
            "generate",
            "--model",
            p(&model),
            "--length",
            "64",
            "--seed",
            seed,
            "--output",
            p(&path),
        ]);
        rows(&path)
    };
    let a = gen("1", "a.csv");
    assert_eq!(a.len(), 64);
    assert_eq!(a[0][..3], ["0", "500", "400"]);
    let t: Vec<f64> = a.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(gen("1", "b.csv"), a);
    assert_ne!(gen("2", "c.csv"), a);
    let r = run(&[
        "generate",
        "--model",
        p(&model),
        "--length",
        "63",
        "--output",
        p(&dir.path().join("d.csv")),
    ]);
    assert_eq!(code(&r), 2);
}

#[test]
fn reconstructing_clean_file_moves_less_than_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train");
    let held_out = dir.path().join("held_out");
    ok(&[
        "toy",
        "reconstruct",
        "--out",
        p(&train),
        "--subjects",
        "6",
        "--length",
        "400",
        "--seed",
        "1",
    ]);
    ok(&[
        "toy",
        "reconstruct",
        "--out",
        p(&held_out),
        "--subjects",
        "3",
        "--length",
        "200",
        "--seed",
        "2",
    ]);
    let out = dir.path().join("model");
    ok(&[
        "train",
        "reconstruct",
        "--data",
        p(&train),
        "--out",
        p(&out),
        "--decay-every",
        "100",
        "--stop-lr",
        "1e-5",
    ]);
    let model = out.join("model.gcv");
    let report = dir.path().join("report");
    let config = dir.path().join("eval.toml");
    std::fs::write(
        &config,
        "[reconstruct.eval]\nfiles = 6\nsections_per_file = 5\nmax_len = 200\n",
    )
    .unwrap();
    ok(&[
        "eval",
        "reconstruct",
        "--model",
        p(&model),
        "--config",
        p(&config),
        "--data",
        p(&held_out),
        "--out",
        p(&report),
        "--fractions",
        "5",
    ]);
    let mae = rows(&report.join("mae.csv"));
    assert_eq!(mae.len(), 2);
    let validation: f64 = mae[0][2].parse().unwrap();

    let mut moved = Vec::new();
    for i in 0..3 {
        let input = held_out.join(format!("s{i:02}.csv"));
        let output = dir.path().join(format!("repaired{i}.csv"));
        ok(&[
            "reconstruct",
            "--model",
            p(&model),
            "--input",
            p(&input),
            "--output",
            p(&output),
        ]);
        let (a, b) = (rows(&input), rows(&output));
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x[0], y[0]);
            let d = |k: usize| x[k].parse::<f64>().unwrap() - y[k].parse::<f64>().unwrap();
            moved.push(d(1).hypot(d(2)));
        }
    }
    let mean = moved.iter().sum::<f64>() / moved.len() as f64;
    assert!(
        mean < validation,
        "clean file moved {mean} px on average, validation MAE {validation} px"
    );
}
