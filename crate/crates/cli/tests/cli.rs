//! Black-box tests of the `gancmp` binary: exit codes, artifacts, determinism.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flate2::write::GzEncoder;
use flate2::Compression;
use gancmp::data::{parse_pnm, IDX_IMAGE_MAGIC, IDX_LABEL_MAGIC};
use gancmp::metrics::EvalReport;
use gancmp::models::{build_generator, save_checkpoint, Checkpoint};
use gancmp::sampling::{rng_stream, Stream};
use gancmp::Tensor;
use gancmp_cli::manifest::audit;
use tempfile::TempDir;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn gancmp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gancmp")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn config(name: &str) -> PathBuf {
    repo().join("configs").join(name)
}

/// A config file in `dir` derived from a checked-in one by string edits.
fn derived_config(dir: &Path, base: &str, edits: &[(&str, &str)]) -> PathBuf {
    let mut text = fs::read_to_string(config(base)).unwrap();
    for (from, to) in edits {
        assert!(text.contains(from), "{from} not in {base}");
        text = text.replace(from, to);
    }
    let path = dir.join(base);
    fs::write(&path, text).unwrap();
    path
}

fn train_toy_svm(dir: &Path) -> PathBuf {
    let out = dir.join("svm");
    let run = gancmp(&["train", "--config", s(&config("toy-svm.json")), "--out-dir", s(&out)]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    out
}

// ------------------------------------------------------------- prepare

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), to.join(entry.file_name())).unwrap();
    }
}

#[test]
fn prepare_reports_the_shipped_excerpt() {
    let out = gancmp(&["prepare", "--dataset", "mnist", "--dir", s(&repo().join("data/mnist-5k"))]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("checksums: 4 files match"), "{text}");
    assert!(text.lines().any(|l| l == "ok, 4000 train / 1000 test"), "{text}");
}

fn write_gz(path: &Path, bytes: &[u8]) {
    let mut enc = GzEncoder::new(fs::File::create(path).unwrap(), Compression::fast());
    enc.write_all(bytes).unwrap();
    enc.finish().unwrap();
}

fn idx_pair(dir: &Path, prefix: &str, count: u32) {
    let mut images = Vec::with_capacity(16 + count as usize * 784);
    for v in [IDX_IMAGE_MAGIC, count, 28, 28] {
        images.extend_from_slice(&v.to_be_bytes());
    }
    images.resize(16 + count as usize * 784, 0);
    let mut labels = Vec::with_capacity(8 + count as usize);
    labels.extend_from_slice(&IDX_LABEL_MAGIC.to_be_bytes());
    labels.extend_from_slice(&count.to_be_bytes());
    labels.extend((0..count).map(|i| (i % 10) as u8));
    write_gz(&dir.join(format!("{prefix}-images-idx3-ubyte.gz")), &images);
    write_gz(&dir.join(format!("{prefix}-labels-idx1-ubyte.gz")), &labels);
}

#[test]
fn prepare_counts_full_size_mnist() {
    // blank images with the canonical file sizes
    let dir = TempDir::new().unwrap();
    idx_pair(dir.path(), "train", 60_000);
    idx_pair(dir.path(), "t10k", 10_000);
    let out = gancmp(&["prepare", "--dataset", "mnist", "--dir", s(dir.path())]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("ok, 60000 train / 10000 test"), "{}", stdout(&out));
}

#[test]
fn prepare_rejects_a_corrupted_byte() {
    let dir = TempDir::new().unwrap();
    copy_dir(&repo().join("data/mnist-5k"), dir.path());
    let victim = dir.path().join("t10k-labels-idx1-ubyte.gz");
    let mut bytes = fs::read(&victim).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    fs::write(&victim, bytes).unwrap();
    let out = gancmp(&["prepare", "--dataset", "mnist", "--dir", s(dir.path())]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum mismatch"));
}

#[test]
fn prepare_missing_files_and_bad_names() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&gancmp(&["prepare", "--dataset", "mnist", "--dir", s(dir.path())])), 3);
    assert_eq!(code(&gancmp(&["prepare", "--dataset", "mnist", "--dir", s(&dir.path().join("nope"))])), 3);
    assert_eq!(code(&gancmp(&["prepare", "--dataset", "imagenet", "--dir", s(dir.path())])), 2);
    assert_eq!(code(&gancmp(&["prepare", "--dataset", "mnist"])), 2);
    assert_eq!(code(&gancmp(&["frobnicate"])), 2);
}

// ------------------------------------------------------------- train

#[test]
fn train_writes_a_manifest_with_correct_hashes() {
    let dir = TempDir::new().unwrap();
    let out = train_toy_svm(dir.path());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let names: Vec<&str> = manifest["artifacts"].as_array().unwrap().iter().map(|a| a["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["model.ckpt", "history.csv", "epochs.csv"]);
    assert_eq!(manifest["config"]["name"], "toy-svm");
    assert!(manifest["started"].as_str().unwrap() <= manifest["finished"].as_str().unwrap());
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    assert!(audit(&out).unwrap().is_empty());
    fs::write(out.join("history.csv"), "tampered").unwrap();
    assert_eq!(audit(&out).unwrap(), ["history.csv"]);
}

#[test]
fn train_failures_map_to_exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("broken.json"), "{\"name\": ").unwrap();
    assert_eq!(code(&gancmp(&["train", "--config", s(&d.join("broken.json"))])), 2);
    assert_eq!(code(&gancmp(&["train", "--config", s(&d.join("absent.json"))])), 3);

    // batch size 1 with batchnorm fails before any data is read
    let bs1 = derived_config(d, "mnist-resnet.json", &[("\"batch_size\": 32", "\"batch_size\": 1"), ("../data/mnist-5k", ".")]);
    let out = gancmp(&["train", "--config", s(&bs1), "--out-dir", s(&d.join("r"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("batch size 1"));

    // an absurd learning rate overflows on the first update
    let nan = derived_config(d, "toy-svm.json", &[("\"learning_rate\": 0.05", "\"learning_rate\": 1e300")]);
    let out = gancmp(&["train", "--config", s(&nan), "--out-dir", s(&d.join("n"))]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("last good step"));
}

#[test]
fn diverging_gan_keeps_partial_diagnostics() {
    let dir = TempDir::new().unwrap();
    let cfg = derived_config(
        dir.path(),
        "toy-gan.json",
        &[("\"steps\": 2000", "\"steps\": 50"), ("\"window\": 100", "\"window\": 10"), ("\"init_std\": 0.1", "\"init_std\": 1e200")],
    );
    let out_dir = dir.path().join("g");
    let out = gancmp(&["train", "--config", s(&cfg), "--out-dir", s(&out_dir)]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("diagnostics.csv").is_file());
    assert!(audit(&out_dir).unwrap().is_empty());
}

// ------------------------------------------------------------- eval

#[test]
fn eval_report_schema_and_roc_csv() {
    let dir = TempDir::new().unwrap();
    let out = train_toy_svm(dir.path());
    let report_path = dir.path().join("report.json");
    let run = gancmp(&["eval", "--checkpoint", s(&out.join("model.ckpt")), "--out", s(&report_path)]);
    assert_eq!(code(&run), 0);
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    for key in [
        "model", "dataset", "split", "samples", "averaging", "precision", "recall", "accuracy", "f1", "per_class",
        "confusion", "roc_class", "roc", "auc", "macro_auc", "warnings", "seed", "config",
    ] {
        assert!(value.get(key).is_some(), "report lacks `{key}`");
    }
    assert_eq!(value["averaging"], "macro");
    assert_eq!(value["split"], "test");
    assert_eq!(value["samples"], 500);
    let report: EvalReport = serde_json::from_value(value).unwrap();
    let csv = fs::read_to_string(dir.path().join("report.roc.csv")).unwrap();
    assert_eq!(csv.lines().count(), report.roc.len() + 1);
    assert!(!fs::read_to_string(&report_path).unwrap().contains(&s(dir.path()).to_string()));
}

#[test]
fn eval_finds_the_data_from_the_training_directory() {
    let tmp = TempDir::new().unwrap();
    copy_dir(&repo().join("data/mnist-5k"), &tmp.path().join("data/mnist-5k"));
    fs::create_dir_all(tmp.path().join("configs")).unwrap();
    derived_config(
        &tmp.path().join("configs"),
        "mnist-svm.json",
        &[("\"per_class_cap\": 200", "\"per_class_cap\": 5"), ("\"epochs\": 15", "\"epochs\": 1")],
    );
    let run = |args: &[&str]| Command::new(env!("CARGO_BIN_EXE_gancmp")).args(args).current_dir(tmp.path()).output().unwrap();
    let train = run(&["train", "--config", "configs/mnist-svm.json"]);
    assert_eq!(code(&train), 0, "{}", String::from_utf8_lossy(&train.stderr));
    let eval = run(&["eval", "--checkpoint", "runs/mnist-svm/model.ckpt", "--out", "svm.json"]);
    assert_eq!(code(&eval), 0, "{}", String::from_utf8_lossy(&eval.stderr));
    let report: EvalReport = serde_json::from_slice(&fs::read(tmp.path().join("svm.json")).unwrap()).unwrap();
    assert_eq!(report.samples, 1000);
}

#[test]
fn eval_on_train_split_is_recorded() {
    let dir = TempDir::new().unwrap();
    let out = train_toy_svm(dir.path());
    let mut acc = Vec::new();
    for split in ["train", "test"] {
        let path = dir.path().join(format!("{split}.json"));
        let run = gancmp(&["eval", "--checkpoint", s(&out.join("model.ckpt")), "--split", split, "--out", s(&path)]);
        assert_eq!(code(&run), 0);
        let r: EvalReport = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(r.split, split);
        acc.push(r.accuracy);
    }
    eprintln!("toy svm accuracy: train {:.4}, test {:.4}", acc[0], acc[1]);
}

#[test]
fn eval_failures_map_to_exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = train_toy_svm(dir.path());
    let ckpt = out.join("model.ckpt");
    let report = dir.path().join("r.json");
    assert_eq!(code(&gancmp(&["eval", "--checkpoint", s(&dir.path().join("none.ckpt")), "--out", s(&report)])), 3);
    // toy checkpoint against MNIST images
    let mismatch = gancmp(&[
        "eval", "--checkpoint", s(&ckpt), "--dataset", "mnist", "--dir", s(&repo().join("data/mnist-5k")), "--out", s(&report),
    ]);
    assert_eq!(code(&mismatch), 2, "{}", String::from_utf8_lossy(&mismatch.stderr));
    let garbage = dir.path().join("garbage.ckpt");
    fs::write(&garbage, b"GANCKPT1 but not really").unwrap();
    assert_eq!(code(&gancmp(&["eval", "--checkpoint", s(&garbage), "--out", s(&report)])), 3);
    assert_eq!(code(&gancmp(&["eval", "--checkpoint", s(&ckpt), "--split", "dev", "--out", s(&report)])), 2);
}

// ------------------------------------------------------------- compare / roc

fn synthetic_report(dir: &Path, model: &str, p: f64, r: f64, acc: f64, f1: f64, scores: &[f64]) -> PathBuf {
    let labels: Vec<usize> = (0..scores.len()).map(|i| i % 2).collect();
    let logits = Tensor::new(&[scores.len(), 2], scores.iter().flat_map(|&v| [0.0, v]).collect()).unwrap();
    let mut report =
        EvalReport::from_logits(model, "synthetic", "test", &logits, &labels, 1, 0, serde_json::Value::Null).unwrap();
    (report.precision, report.recall, report.accuracy, report.f1) = (p, r, acc, f1);
    let path = dir.join(format!("{model}.json"));
    fs::write(&path, serde_json::to_string(&report).unwrap()).unwrap();
    path
}

#[test]
fn compare_reproduces_the_published_layout() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let scores = [0.1, 0.9, 0.2, 0.8];
    let reports = [
        synthetic_report(d, "SVM", 0.85, 0.80, 0.82, 0.82, &scores),
        synthetic_report(d, "CNN", 0.88, 0.86, 0.87, 0.87, &scores),
        synthetic_report(d, "ResNet", 0.92, 0.91, 0.91, 0.92, &scores),
        synthetic_report(d, "CGAN", 0.95, 0.93, 0.94, 0.94, &scores),
    ];
    let table = d.join("table.md");
    let mut args = vec!["compare", "--reports"];
    args.extend(reports.iter().map(|p| s(p)));
    args.extend(["--out", s(&table)]);
    assert_eq!(code(&gancmp(&args)), 0);
    let expected = "\
| Model | Precision | Recall | Accuracy | F1 |
|---|---|---|---|---|
| SVM | 0.85 | 0.80 | 0.82 | 0.82 |
| CNN | 0.88 | 0.86 | 0.87 | 0.87 |
| ResNet | 0.92 | 0.91 | 0.91 | 0.92 |
| CGAN | 0.95 | 0.93 | 0.94 | 0.94 |
";
    assert_eq!(fs::read_to_string(&table).unwrap(), expected);

    let single = gancmp(&["compare", "--reports", s(&reports[0])]);
    assert_eq!(stdout(&single).lines().count(), 3);
    let rounded = synthetic_report(d, "R", 0.9399, 0.5, 0.5, 0.5, &scores);
    assert!(stdout(&gancmp(&["compare", "--reports", s(&rounded)])).contains("| R | 0.94 | 0.50 |"));
}

#[test]
fn compare_and_roc_reject_malformed_reports() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"model\": \"x\"}").unwrap();
    assert_eq!(code(&gancmp(&["compare", "--reports", s(&bad)])), 3);
    assert_eq!(code(&gancmp(&["roc", "--reports", s(&bad), "--out", s(&dir.path().join("r.csv"))])), 3);
    assert_eq!(code(&gancmp(&["compare", "--reports", s(&dir.path().join("missing.json"))])), 3);
    assert_eq!(code(&gancmp(&["compare"])), 2);
}

#[test]
fn roc_artifacts_and_dominance() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let good = synthetic_report(d, "good", 0.9, 0.9, 0.9, 0.9, &[0.1, 0.9, 0.2, 0.8, 0.3, 0.7]);
    let weak = synthetic_report(d, "weak", 0.5, 0.5, 0.5, 0.5, &[0.1, 0.9, 0.8, 0.2, 0.3, 0.7]);
    let (csv, svg) = (d.join("roc.csv"), d.join("roc.svg"));
    let out = gancmp(&["roc", "--reports", s(&weak), s(&good), "--out", s(&csv), s(&svg)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("dominance: good is above weak"), "{}", stdout(&out));
    let points: usize = [&weak, &good]
        .iter()
        .map(|p| serde_json::from_str::<EvalReport>(&fs::read_to_string(p).unwrap()).unwrap().roc.len())
        .sum();
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), points + 1);
    let svg = fs::read_to_string(&svg).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert_eq!(svg.matches("class=\"chance\"").count(), 1);
    assert_eq!(code(&gancmp(&["roc", "--reports", s(&good), "--out", s(&d.join("roc.png"))])), 2);
}

// ------------------------------------------------------------- generate

fn untrained_generator(dir: &Path) -> PathBuf {
    let g = build_generator(16, 1, 28, &[32, 16, 8]).unwrap();
    let params = g.init_params(&mut rng_stream(0, Stream::Init)).unwrap();
    let path = dir.join("g.ckpt");
    save_checkpoint(&path, &Checkpoint::new(&g, &params, serde_json::Value::Null).unwrap()).unwrap();
    path
}

#[test]
fn generate_names_and_determinism() {
    let dir = TempDir::new().unwrap();
    let ckpt = untrained_generator(dir.path());
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let run = gancmp(&["generate", "--checkpoint", s(&ckpt), "--count", "16", "--seed", seed, "--out", s(out)]);
        assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    }
    let mut names: Vec<String> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    let expected: Vec<String> = (0..16).map(|i| format!("sample_{i:04}.pgm")).collect();
    assert_eq!(names, expected);
    for name in &names {
        let bytes = fs::read(a.join(name)).unwrap();
        assert_eq!(bytes, fs::read(b.join(name)).unwrap());
        let img = parse_pnm(&bytes).unwrap();
        assert_eq!((img.channels, img.width, img.height), (1, 28, 28));
    }
    assert_ne!(fs::read(a.join(&names[0])).unwrap(), fs::read(c.join(&names[0])).unwrap());
}

#[test]
fn generate_refuses_classifiers() {
    let dir = TempDir::new().unwrap();
    let out = train_toy_svm(dir.path());
    let run = gancmp(&["generate", "--checkpoint", s(&out.join("model.ckpt")), "--count", "2", "--seed", "1", "--out", s(dir.path())]);
    assert_eq!(code(&run), 2);
    let missing = gancmp(&["generate", "--checkpoint", s(&dir.path().join("x.ckpt")), "--count", "2", "--seed", "1", "--out", s(dir.path())]);
    assert_eq!(code(&missing), 3);
    let ckpt = untrained_generator(dir.path());
    let eval = gancmp(&["eval", "--checkpoint", s(&ckpt), "--out", s(&dir.path().join("r.json"))]);
    assert_eq!(code(&eval), 2);
}
