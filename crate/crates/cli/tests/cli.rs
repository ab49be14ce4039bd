use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use secmine::heuristics::SecurityLexicon;
use secmine::ingest::{export_jsonl, RawPost};
use secmine::pipeline::RunManifest;
use secmine::synthetic::raw_security_corpus;

struct Run {
    dir: tempfile::TempDir,
}

impl Run {
    /// Small, fast configuration over a 300-post synthetic corpus.
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let kws: Vec<String> = SecurityLexicon::builtin()
            .distinct_keywords()
            .into_iter()
            .map(String::from)
            .collect();
        write_posts(&dir.path().join("posts.jsonl"), &raw_security_corpus(300, &kws, 3));
        let config = format!(
            r#"
seed = 5
output_dir = "{out}"

[input]
paths = ["{posts}"]

[embedding]
dim = 16
epochs = 3
min_count = 1

[pu.grid]
alphas = [1.0]
classifiers = [{{ kind = "logistic_regression", c = 1.0 }}]

[cv]
k = 3
"#,
            out = dir.path().join("out").display(),
            posts = dir.path().join("posts.jsonl").display()
        );
        std::fs::write(dir.path().join("config.toml"), config).unwrap();
        Run { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn secmine(&self, args: &[&str]) -> Output {
        let config = self.path("config.toml");
        let out = Command::new(env!("CARGO_BIN_EXE_secmine"))
            .args(args)
            .arg("--config")
            .arg(&config)
            .output()
            .unwrap();
        out
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.secmine(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn code(&self, args: &[&str]) -> i32 {
        self.secmine(args).status.code().unwrap()
    }

    fn trained(&self) {
        self.ok(&["label"]);
        self.ok(&["train", "--pu-config", self.best().to_str().unwrap()]);
    }

    /// The configuration `train` uses without running cross-validation.
    fn best(&self) -> PathBuf {
        let p = self.path("lr.json");
        std::fs::write(&p, r#"{"alpha": 1.0, "classifier": {"kind": "logistic_regression", "c": 1.0}}"#).unwrap();
        p
    }
}

fn write_posts(path: &Path, posts: &[RawPost]) {
    std::fs::write(path, export_jsonl(posts).unwrap()).unwrap();
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn label_is_deterministic_and_reports_counts() {
    let run = Run::new();
    let stdout = run.ok(&["label"]);
    assert!(stdout.contains("300 posts"), "{stdout}");
    assert!(stdout.contains("tag="), "{stdout}");
    let first = read(&run.path("out/label/labels.csv"));
    run.ok(&["label"]);
    assert_eq!(first, read(&run.path("out/label/labels.csv")));
}

#[test]
fn no_positives_is_a_warning_not_an_error() {
    let run = Run::new();
    let posts: Vec<RawPost> = raw_security_corpus(40, &[], 1)
        .into_iter()
        .map(|mut p| {
            p.tags = vec!["css".into()];
            p
        })
        .collect();
    write_posts(&run.path("posts.jsonl"), &posts);
    let out = run.secmine(&["label"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 positive"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn crossval_single_config_and_degenerate_rows() {
    let run = Run::new();
    run.ok(&["label"]);
    run.ok(&["crossval"]);
    let report: serde_json::Value =
        serde_json::from_slice(&read(&run.path("out/crossval/cv_report.json"))).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 1);
    assert!(run.path("out/crossval/best_config.json").is_file());

    // alpha 0.01 selects no reliable negatives on any fold
    run.ok(&["crossval", "--pu.grid.alphas", "[1.0, 0.01]"]);
    let report: serde_json::Value =
        serde_json::from_slice(&read(&run.path("out/crossval/cv_report.json"))).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["status"], "degenerate");
    assert_eq!(rows[1]["config"]["alpha"], 0.01);
    assert_eq!(rows[0]["rank"], 1);
}

#[test]
fn train_outputs_are_hash_verifiable_and_reproducible() {
    let run = Run::new();
    run.trained();
    for f in ["run_manifest.json", "embedding/embedding.json", "pu/pu_model.json"] {
        assert!(run.path("out/model").join(f).is_file(), "{f}");
    }
    let manifest = RunManifest::load(&run.path("out/model")).unwrap();
    assert!(manifest.stale_files().is_empty());
    assert_eq!(manifest.seed, 5);
    let before: Vec<_> = manifest.outputs.iter().map(|f| f.sha256.clone()).collect();
    run.ok(&["train", "--pu-config", run.best().to_str().unwrap()]);
    let after: Vec<_> = RunManifest::load(&run.path("out/model"))
        .unwrap()
        .outputs
        .iter()
        .map(|f| f.sha256.clone())
        .collect();
    assert_eq!(before, after);
}

#[test]
fn predict_ignores_tags_and_reports_uninferable_posts() {
    let run = Run::new();
    run.trained();
    let mut posts = raw_security_corpus(30, &["encryption".into(), "password".into()], 99);
    let mut blank = posts[0].clone();
    blank.id = 1;
    blank.title = "zzzqqq".into();
    blank.question_html = "<p>xxyyzz</p>".into();
    blank.answers_html.clear();
    posts.push(blank);
    write_posts(&run.path("new.jsonl"), &posts);
    let retagged: Vec<RawPost> = posts
        .iter()
        .cloned()
        .map(|mut p| {
            p.tags = vec!["security".into(), "unrelated-tag".into()];
            p
        })
        .collect();
    write_posts(&run.path("retagged.jsonl"), &retagged);

    let new = run.path("new.jsonl");
    run.ok(&["predict", "--input", new.to_str().unwrap(), "--out", run.path("p1").to_str().unwrap()]);
    run.ok(&["predict", "--input", new.to_str().unwrap(), "--out", run.path("p2").to_str().unwrap()]);
    let retagged = run.path("retagged.jsonl");
    run.ok(&["predict", "--input", retagged.to_str().unwrap(), "--out", run.path("p3").to_str().unwrap()]);
    let a = read(&run.path("p1/predictions.csv"));
    assert_eq!(a, read(&run.path("p2/predictions.csv")));
    assert_eq!(a, read(&run.path("p3/predictions.csv")));

    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("post_id,label,score,status\n"));
    assert!(text.lines().any(|l| l == "1,,,uninferable"), "{text}");
    assert!(text.lines().skip(1).filter(|l| l.ends_with(",ok")).count() == 30);
}

#[test]
fn predict_refuses_mismatched_models() {
    let run = Run::new();
    run.trained();
    // a second model with a different embedding
    run.ok(&[
        "train",
        "--pu-config",
        run.best().to_str().unwrap(),
        "--out",
        run.path("other").to_str().unwrap(),
        "--seed",
        "6",
    ]);
    std::fs::remove_dir_all(run.path("out/model/pu")).unwrap();
    copy_dir(&run.path("other/pu"), &run.path("out/model/pu"));
    let input = run.path("posts.jsonl");
    let out = run.secmine(&["predict", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("embedding"));
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        std::fs::copy(e.path(), to.join(e.file_name())).unwrap();
    }
}

#[test]
fn evaluate_modes() {
    let run = Run::new();
    run.trained();
    let input = run.path("posts.jsonl");
    let input = input.to_str().unwrap();
    run.ok(&["predict", "--input", input]);

    // ground truth equal to the model's own decisions
    let preds = String::from_utf8(read(&run.path("out/predict/predictions.csv"))).unwrap();
    let mut truth = String::from("post_id,truth\n");
    for l in preds.lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        truth.push_str(&format!("{},{}\n", f[0], u8::from(f[1] == "security")));
    }
    std::fs::write(run.path("truth.csv"), truth).unwrap();
    let truth = run.path("truth.csv");
    let stdout = run.ok(&["evaluate", "--input", input, "--labels", truth.to_str().unwrap(), "--mode", "pn"]);
    assert!(stdout.contains("mcc_pn 1.0000"), "{stdout}");

    let labels = run.path("out/label/labels.csv");
    let labels = labels.to_str().unwrap();
    // a low threshold puts unlabelled posts among the predicted positives
    let ub = |r: &str| -> f64 {
        let out = run.ok(&[
            "evaluate", "--input", input, "--labels", labels, "--mode", "pu", "--r", r, "--threshold", "0.05",
        ]);
        let line = out.lines().find(|l| l.starts_with("precision_pu_ub ")).unwrap().to_string();
        line.split(' ').nth(1).unwrap().parse().unwrap()
    };
    let (low, high) = (ub("0"), ub("0.5"));
    assert!(high > low, "{low} {high}");
    let json: serde_json::Value = serde_json::from_slice(&read(&run.path("out/evaluate/metrics.json"))).unwrap();
    assert_eq!(json["r"], 0.5);

    assert_eq!(run.code(&["evaluate", "--input", input, "--labels", labels, "--mode", "pn"]), 2);
    assert_eq!(
        run.code(&["evaluate", "--input", input, "--labels", truth.to_str().unwrap(), "--mode", "pu"]),
        2
    );
}

#[test]
fn exit_codes() {
    let run = Run::new();
    assert_eq!(run.code(&["label", "--embedding.dims", "4"]), 1);
    assert_eq!(run.code(&["frobnicate"]), 1);
    assert_eq!(run.code(&["label", "--input.paths", "[\"/nonexistent.jsonl\"]"]), 2);
    run.ok(&["label"]);
    let degenerate = run.path("tiny.json");
    std::fs::write(&degenerate, r#"{"alpha": 0.01, "classifier": {"kind": "logistic_regression", "c": 1.0}}"#).unwrap();
    let out = run.secmine(&["train", "--pu-config", degenerate.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("histogram"));
}

#[test]
fn stats_and_pca() {
    let run = Run::new();
    run.ok(&["stats"]);
    let stats: serde_json::Value = serde_json::from_slice(&read(&run.path("out/stats/stats.json"))).unwrap();
    assert_eq!(stats["total"]["posts"], 300);
    run.trained();
    run.ok(&["pca"]);
    let csv = String::from_utf8(read(&run.path("out/pca/pca.csv"))).unwrap();
    assert!(csv.starts_with("post_id,pc1,pc2,kw_count\n"));
    assert_eq!(csv.lines().count(), 301);
}
