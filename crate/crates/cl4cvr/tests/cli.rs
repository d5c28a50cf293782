use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"
[run]
method = "cl4cvr"
seed = 11

[run.hyper]
alpha = 0.1
tau = 0.5
batch_size = 32
epochs = 2
embedding_dim = 4
tower_widths = [8]
encoder_widths = [8]

[data]
source = "synthetic"
vocab_sizes = [40, 20, 10]
train_size = 600
val_size = 300
test_size = 300
base_ctr = 0.4
base_cvr = 0.3
duplicate_fraction = 0.1
duplicate_size_weights = [0.5, 0.5]
click_signal = 1.0
conversion_signal = 1.5
popularity_exponent = 0.5
seed = 4

[experiment]
seeds = [1, 2]
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cl4cvr"))
}

fn write_config(dir: &Path) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, TINY).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["generate", "--config", s(&cfg), "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["train.csv", "val.csv", "test.csv", "schema.toml"] {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        assert!(!x.is_empty());
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn alpha_zero_train_matches_base() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let o = run(&["train", "--config", s(&cfg), "--out", s(&a), "--alpha", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["train", "--config", s(&cfg), "--out", s(&b), "--method", "base"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let auc_cols = |dir: &Path| {
        let text = std::fs::read_to_string(dir.join("summary.csv")).unwrap();
        let row: Vec<String> = text.lines().nth(1).unwrap().split(',').map(String::from).collect();
        row[2..].to_vec()
    };
    assert_eq!(auc_cols(&a), auc_cols(&b));
    assert_eq!(
        std::fs::read(a.join("checkpoint.bin")).unwrap(),
        std::fs::read(b.join("checkpoint.bin")).unwrap()
    );

    // the run directory records the config after overrides
    let resolved = std::fs::read_to_string(a.join("config.toml")).unwrap();
    let parsed: toml::Table = toml::from_str(&resolved).unwrap();
    assert_eq!(parsed["run"]["hyper"]["alpha"].as_float(), Some(0.0));
    assert_eq!(parsed["run"]["method"].as_str(), Some("cl4cvr"));

    let metrics = std::fs::read_to_string(a.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("epoch,seed,train_pred_loss,train_cl_loss,train_loss,val_cvr_auc"));
    assert_eq!(metrics.lines().count(), 3);
}

#[test]
fn eval_reproduces_training_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().join("run");
    assert!(run(&["train", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let o = run(&[
        "eval",
        "--config",
        s(&cfg),
        "--checkpoint",
        s(&out.join("checkpoint.bin")),
        "--split",
        "test",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let eval_auc = stdout.lines().nth(1).unwrap().split(',').nth(1).unwrap().to_string();
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let train_auc = summary.lines().nth(1).unwrap().split(',').nth(6).unwrap().to_string();
    assert_eq!(eval_auc, train_auc);
}

#[test]
fn gradcheck_passes_on_tiny_model() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let o = run(&["gradcheck", "--config", s(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    for group in ["embedding", "ctr_tower", "cvr_tower", "encoder"] {
        assert!(stdout.contains(group), "{stdout}");
    }
    // widths above the gradcheck limit are refused
    let o = run(&["gradcheck", "--config", s(&cfg), "--set", "run.hyper.tower_widths=[64]"]);
    assert!(!o.status.success());
}

#[test]
fn failures_are_one_line_and_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let o = run(&["train", "--config", s(&cfg), "--set", "run.hyper.temperature=1"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("temperature"), "{err}");

    let o = run(&["train", "--config", s(&cfg), "--tau", "0"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("tau"));

    let o = run(&["train", "--config", s(&tmp.path().join("missing.toml"))]);
    assert!(!o.status.success());

    let o = run(&["train", "--config", s(&cfg), "--bogus"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("Usage"));

    let o = run(&["frobnicate"]);
    assert!(!o.status.success());
}

#[test]
fn ablate_and_sweep_write_summaries() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let out = tmp.path().join("abl");
    let o = run(&["ablate", "--config", s(&cfg), "--out", s(&out), "--jobs", "2", "--set", "run.hyper.epochs=1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(table.lines().count(), 6);
    assert!(table.lines().next().unwrap().contains("gain_vs_base"));
    assert_eq!(std::fs::read_dir(out.join("runs")).unwrap().count(), 10);

    let out = tmp.path().join("sw");
    let o = run(&[
        "sweep", "--config", s(&cfg), "--out", s(&out), "--param", "alpha", "--grid", "0,0.5", "--set", "run.hyper.epochs=1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let curve = std::fs::read_to_string(out.join("sweep_alpha.csv")).unwrap();
    assert_eq!(curve.lines().count(), 3);

    let o = run(&["sweep", "--config", s(&cfg), "--out", s(&out), "--param", "alpha", "--grid", "0.1,0.5"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("include 0"));
}

#[test]
fn trains_from_generated_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let data = tmp.path().join("data");
    assert!(run(&["generate", "--config", s(&cfg), "--out", s(&data)]).status.success());
    let csv_cfg = TINY.split("[data]").next().unwrap().to_string()
        + "[data]\nsource = \"csv\"\nschema = \"data/schema.toml\"\ntrain = \"data/train.csv\"\nval = \"data/val.csv\"\ntest = \"data/test.csv\"\n";
    let p = tmp.path().join("csv.toml");
    std::fs::write(&p, csv_cfg).unwrap();
    let o = run(&["train", "--config", s(&p), "--out", s(&tmp.path().join("run"))]);
    assert!(o.status.success(), "{}", stderr(&o));
}
