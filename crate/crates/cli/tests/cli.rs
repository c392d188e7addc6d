use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskdetect")).args(args).output().unwrap()
}

fn p(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

#[test]
fn help_on_every_command_exits_zero() {
    for cmd in [vec!["--help"], vec!["synth", "--help"], vec!["features", "--help"], vec!["train", "--help"],
                vec!["eval", "--help"], vec!["predict", "--help"], vec!["build-dict", "--help"]] {
        let out = run(&cmd);
        assert_eq!(out.status.code(), Some(0), "{cmd:?}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
}

#[test]
fn invalid_flag_value_is_a_usage_error() {
    let out = run(&["synth", "--n-risk", "many", "--out", "x.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn synth_is_reproducible_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for f in [&a, &b] {
        assert!(run(&["--quiet", "--seed", "9", "synth", "--n-risk", "4", "--n-control", "3", "--out", &p(f)]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = riskdetect::corpus::load_corpus(&a, riskdetect::corpus::Task::ThirtyDay).unwrap();
    assert_eq!(c.len(), 7);
}

#[test]
fn latent_features_need_a_fitted_model() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    assert!(run(&["--quiet", "synth", "--n-risk", "2", "--n-control", "2", "--out", &p(&corpus)]).status.success());
    let out = run(&["--quiet", "features", "--corpus", &p(&corpus), "--track", "latent", "--out", &p(&dir.path().join("e.jsonl"))]);
    assert_eq!(out.status.code(), Some(4));
    let out = run(&["--quiet", "features", "--corpus", &p(&corpus), "--track", "handcrafted", "--lexicon-dir", "/nonexistent", "--out", "f.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_corpus_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("empty.jsonl");
    std::fs::write(&corpus, "").unwrap();
    let out = run(&["--quiet", "features", "--corpus", &p(&corpus), "--track", "handcrafted", "--out", &p(&dir.path().join("f.csv"))]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn train_predict_and_corrupted_container() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        r#"
[synthetic]
n_risk = 20
n_control = 20
signal = 0.9

[doc2vec.post]
dim = 16

[doc2vec.segment]
dim = 16

[baseline]
f1 = 0.636
f2 = 0.636

[[model]]
name = "Att"
kind = "cattention"
track = "post"
params = { d_model = 16, n_heads = 2, conv_channels = 4, epochs = 10 }

[[model]]
name = "KNN"
kind = "knn"
track = "latent"
"#,
    )
    .unwrap();
    let models = dir.path().join("models");
    let report = dir.path().join("report.txt");
    let out = run(&["--quiet", "--config", &p(&cfg), "train", "--models", &p(&models), "--report", &p(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().last().unwrap().starts_with("Baseline (external)"));
    assert!(text.contains("0.636"));
    let history = std::fs::read_to_string(models.join("loss_history_0.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,val_loss,val_f2\n"));

    let preds = dir.path().join("p.csv");
    let test = models.join("test.jsonl");
    assert!(run(&["--quiet", "predict", "--models", &p(&models), "--corpus", &p(&test), "--model-name", "KNN", "--out", &p(&preds)]).status.success());
    let csv = std::fs::read_to_string(&preds).unwrap();
    assert!(csv.starts_with("user_id,label,score\n"));
    assert_eq!(csv.lines().count(), 9);
    assert_eq!(run(&["--quiet", "predict", "--models", &p(&models), "--corpus", &p(&test), "--model-name", "nope", "--out", &p(&preds)]).status.code(), Some(2));

    let lda = models.join("lda.bin");
    let mut bytes = std::fs::read(&lda).unwrap();
    let last = bytes.len() - 40;
    bytes[last] ^= 0xFF;
    std::fs::write(&lda, bytes).unwrap();
    let out = run(&["--quiet", "eval", "--models", &p(&models), "--report", &p(&dir.path().join("r2.txt"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
}

#[test]
fn build_dict_from_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    assert!(run(&["--quiet", "synth", "--n-risk", "10", "--n-control", "10", "--signal", "0.9", "--out", &p(&corpus)]).status.success());
    let dict = dir.path().join("d.txt");
    let out = run(&["--quiet", "build-dict", "--corpus", &p(&corpus), "--seeds", "burden,hopeless", "--k", "5", "--name", "gloom", "--out", &p(&dict)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let words: Vec<String> = std::fs::read_to_string(&dict).unwrap().lines().map(String::from).collect();
    assert!(!words.is_empty() && words.len() <= 12);
}
