use std::path::{Path, PathBuf};
use std::process::{Command, Output};

struct Run {
    dir: tempfile::TempDir,
}

impl Run {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn exec(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_ehr-denoise")).current_dir(self.dir.path()).args(args).output().unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.exec(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn err(&self, args: &[&str]) -> (i32, String) {
        let out = self.exec(args);
        assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
        (out.status.code().unwrap(), String::from_utf8(out.stderr).unwrap())
    }

    fn read(&self, name: &str) -> String {
        std::fs::read_to_string(self.path(name)).unwrap()
    }
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn small_pipeline(r: &Run) {
    r.ok(&["gen", "--T", "8", "--rows", "120", "--rank", "2", "--seed", "1", "--out", "clean.ehrb", "--split"]);
    r.ok(&["corrupt", "--input", "clean.ehrb", "--beta", "0.3", "--drop", "0.5", "--seed", "2", "--out", "noisy.ehrb", "--split"]);
}

#[test]
fn empty_matrix_is_valid() {
    let r = Run::new();
    r.ok(&["gen", "--T", "16", "--rows", "0", "--seed", "1", "--out", "e.ehrb"]);
    assert_eq!(r.read("e.ehrb"), "ehrb v1 rows=0 cols=16\n");
}

#[test]
fn oracle_check_passes_and_writes_manifest() {
    let r = Run::new();
    let out = r.ok(&["oracle-check", "--T", "6", "--trials", "50", "--seed", "1"]);
    assert!(out.contains("max |f*-posterior|"), "{out}");
    let m = manifest(&r.path("oracle-check.manifest.json"));
    assert_eq!(m["seeds"]["seed"], 1);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn split_files_partition_rows() {
    let r = Run::new();
    small_pipeline(&r);
    let rows = |n: &str| r.read(n).lines().count() - 1;
    assert_eq!(rows("clean.train.ehrb"), 60);
    assert_eq!(rows("clean.fit.ehrb"), 36);
    assert_eq!(rows("clean.test.ehrb"), 24);
    assert_eq!(rows("noisy.test.ehrb"), 24);
}

#[test]
fn missing_seed_is_a_usage_error() {
    let r = Run::new();
    let (code, err) = r.err(&["gen", "--T", "4", "--rows", "3", "--out", "x.ehrb"]);
    assert_eq!(code, 2);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error[usage]:") && err.contains("--seed"), "{err}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let r = Run::new();
    let (code, err) = r.err(&["spectrum", "--bogus"]);
    assert_eq!(code, 2);
    assert_eq!(err.lines().count(), 1, "{err}");
}

#[test]
fn missing_file_is_reported() {
    let r = Run::new();
    let (code, err) = r.err(&["merge", "--a", "nope.ehrb", "--b", "nope.ehrb", "--out", "m.ehrb"]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error[io]:") && err.contains("nope.ehrb"), "{err}");
}

#[test]
fn schema_version_mismatch_is_a_parse_error() {
    let r = Run::new();
    std::fs::write(r.path("v2.ehrb"), "ehrb v2 rows=1 cols=2\n01\n").unwrap();
    let (_, err) = r.err(&["spectrum", "--input", "v2.ehrb", "--seed", "1", "--out", "s.csv"]);
    assert!(err.starts_with("error[parse]:"), "{err}");
}

#[test]
fn invalid_values_fail_before_reading_inputs() {
    let r = Run::new();
    let (_, err) = r.err(&["corrupt", "--input", "absent.ehrb", "--beta", "1.5", "--seed", "1", "--out", "o.ehrb"]);
    assert!(err.contains("--beta"), "{err}");
    assert!(!r.path("o.ehrb").exists());
}

#[test]
fn eval_shape_mismatch_names_both_files() {
    let r = Run::new();
    small_pipeline(&r);
    r.ok(&["baseline", "--method", "identity", "--input", "noisy.test.ehrb", "--out", "id.csv"]);
    let (code, err) = r.err(&["eval", "--scores", "id.csv", "--truth", "clean.ehrb", "--noisy", "noisy.ehrb", "--seed", "1", "--out", "e.csv"]);
    assert_eq!(code, 1);
    assert!(err.starts_with("error[shape]:"), "{err}");
    assert!(err.contains("id.csv") && err.contains("clean.ehrb"), "{err}");
}

#[test]
fn config_file_values_yield_to_flags() {
    let r = Run::new();
    std::fs::write(r.path("run.cfg"), "seed=5\nrows=10\nT=4\n# comment\n").unwrap();
    r.ok(&["gen", "--config", "run.cfg", "--rows", "7", "--out", "c.ehrb"]);
    let m = manifest(&r.path("c.ehrb.manifest.json"));
    assert_eq!(m["config"]["rows"], 7);
    assert_eq!(m["config"]["seed"], 5);
    assert_eq!(m["config"]["n_cols"], 4);
    assert!(m["inputs"].as_array().unwrap().iter().any(|f| f["path"] == "run.cfg"));
}

#[test]
fn knn_reports_tau() {
    let r = Run::new();
    small_pipeline(&r);
    let out = r.exec(&["baseline", "--method", "knn", "--train", "clean.train.ehrb", "--input", "noisy.test.ehrb", "--tau", "3", "--out", "k.csv"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau = 3"));
    let (_, err) = r.err(&["baseline", "--method", "knn", "--input", "noisy.test.ehrb", "--out", "k.csv"]);
    assert!(err.contains("--train"), "{err}");
}

#[test]
fn full_pipeline_and_replay() {
    let r = Run::new();
    small_pipeline(&r);
    r.ok(&[
        "train", "--noisy", "noisy.train.ehrb", "--clean", "clean.train.ehrb", "--arch", "mlp", "--epochs", "2",
        "--hidden", "16", "--depth", "2", "--seed", "3", "--out", "m.ckpt",
    ]);
    assert!(r.read("m.ckpt.loss.csv").starts_with("epoch,mean_loss\n"));
    r.ok(&["fit-thresholds", "--model", "m.ckpt", "--noisy", "noisy.fit.ehrb", "--clean", "clean.fit.ehrb", "--epochs", "2", "--seed", "4", "--out", "m.thr"]);
    r.ok(&["denoise", "--model", "m.ckpt", "--input", "noisy.test.ehrb", "--thresholds", "m.thr", "--out", "d.csv"]);
    r.ok(&["eval", "--scores", "d.csv", "--truth", "clean.test.ehrb", "--noisy", "noisy.test.ehrb", "--restrict-to-zeros", "--seed", "5", "--out", "d.eval.csv"]);
    let summary: serde_json::Value = serde_json::from_str(&r.read("d.eval.json")).unwrap();
    assert_eq!(summary["restrict_to_zeros"], true);
    r.ok(&["holdout", "--clean", "clean.ehrb", "--noisy", "noisy.ehrb", "--target-dim", "0", "--model", "m.ckpt", "--seed", "6", "--out", "h.json"]);
    r.ok(&["merge", "--a", "noisy.ehrb", "--b", "clean.ehrb", "--out", "merged.ehrb"]);
    assert_eq!(r.read("merged.ehrb"), r.read("clean.ehrb"));

    for m in ["clean.ehrb", "noisy.ehrb", "m.ckpt", "m.thr", "d.csv", "d.eval.csv", "h.json", "merged.ehrb"] {
        let path = format!("{m}.manifest.json");
        let out = r.ok(&["replay", &path]);
        assert!(out.contains("reproduced bitwise"), "{m}: {out}");
    }
}

#[test]
fn replay_detects_changed_outputs() {
    let r = Run::new();
    r.ok(&["gen", "--T", "4", "--rows", "5", "--seed", "1", "--out", "a.ehrb"]);
    let mut m = manifest(&r.path("a.ehrb.manifest.json"));
    m["argv"][6] = serde_json::json!("2");
    std::fs::write(r.path("a.ehrb.manifest.json"), m.to_string()).unwrap();
    let (code, err) = r.err(&["replay", "a.ehrb.manifest.json"]);
    assert_eq!(code, 3);
    assert!(err.contains("a.ehrb"), "{err}");
}

#[test]
fn thread_count_does_not_change_outputs() {
    let r = Run::new();
    r.ok(&["--threads", "1", "gen", "--T", "20", "--rows", "300", "--seed", "9", "--out", "one.ehrb"]);
    r.ok(&["--threads", "4", "gen", "--T", "20", "--rows", "300", "--seed", "9", "--out", "four.ehrb"]);
    assert_eq!(r.read("one.ehrb"), r.read("four.ehrb"));
}

#[test]
fn help_documents_flags() {
    let r = Run::new();
    let out = r.ok(&["train", "--help"]);
    for flag in ["--arch", "--epochs", "--lambda", "--mask-prob", "--seed", "--threads", "--config"] {
        assert!(out.contains(flag), "{flag} missing from help");
    }
}
