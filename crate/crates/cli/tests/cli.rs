use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_agreesearch"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth(dir: &Path) -> String {
    let o = run(&["synth", dir.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("agreesearch.conf").to_str().unwrap().to_string()
}

/// Small settings that keep a full train under a few seconds.
const FAST: [&str; 6] = ["--epochs", "2", "--hidden-dim", "8", "--gbdt-rounds", "10"];

#[test]
fn help_lists_every_flag() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for flag in [
        "--bodies",
        "--stances-train",
        "--stances-test",
        "--embeddings",
        "--model-dir",
        "--k ",
        "--epochs",
        "--seed",
        "--svd-rank",
        "--hidden-dim",
        "--port",
        "--config",
    ] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
    for sub in ["train", "eval", "sweep", "query", "serve"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn missing_paths_exit_2_naming_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let conf = synth(dir.path());
    let data = |f: &str| dir.path().join(f).to_str().unwrap().to_string();

    let o = run(&[
        "train",
        "--bodies",
        &data("bodies.csv"),
        "--stances-train",
        &data("stances_train.csv"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--embeddings"), "{}", stderr(&o));

    let o = run(&["train", "--config", &conf, "--embeddings", "/no/such/vectors.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--embeddings"));

    let o = run(&["eval", "--config", &conf, "--model-dir", &data("nothing-here")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--model-dir"));

    let o = run(&["train", "--config", "/no/such.conf"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--config"));

    let o = run(&["train", "--k", "zero"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_eval_query_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let conf = synth(dir.path());
    let models_a = dir.path().join("a");
    let models_b = dir.path().join("b");
    for m in [&models_a, &models_b] {
        let mut args = vec!["train", "--config", &conf, "--model-dir", m.to_str().unwrap()];
        args.extend(FAST);
        let o = run(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("agreement loss per epoch"));
    }
    // same seed, same bytes
    for f in ["features.mstr", "gbdt.mstr", "mlstm.mstr", "embeddings.mstr"] {
        assert_eq!(
            std::fs::read(models_a.join(f)).unwrap(),
            std::fs::read(models_b.join(f)).unwrap(),
            "{f}"
        );
    }
    // flags beat the file: the file asks for 15 epochs
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(models_a.join("train_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["stance_losses"].as_array().unwrap().len(), 2);

    let m = models_a.to_str().unwrap();
    let o = run(&["eval", "--config", &conf, "--model-dir", m]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("controversial questions:"));
    let report = std::fs::read_to_string(models_a.join("reports/report.jsonl")).unwrap();
    assert!(report.contains("\"avg_ndcg\""));
    // a second evaluation reproduces the report exactly
    let o = run(&["eval", "--config", &conf, "--model-dir", m]);
    assert!(o.status.success());
    assert_eq!(
        report,
        std::fs::read_to_string(models_a.join("reports/report.jsonl")).unwrap()
    );

    let question = {
        let csv = std::fs::read_to_string(dir.path().join("stances_test.csv")).unwrap();
        let line = csv.lines().nth(1).unwrap().to_string();
        line.split(',').next().unwrap().to_string()
    };
    let o = run(&["query", "--config", &conf, "--model-dir", m, &question]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    for section in ["agree (", "disagree (", "discuss ("] {
        assert!(text.contains(section), "{text}");
    }
    let count = |label: &str| {
        let line = text.lines().find(|l| l.starts_with(label)).unwrap();
        line[label.len() + 2..line.len() - 1].parse::<usize>().unwrap()
    };
    assert!(count("agree") <= 3 && count("disagree") <= 3 && count("discuss") <= 5);

    let o = run(&["query", "--config", &conf, "--model-dir", m, "  "]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn query_over_empty_store_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let conf = synth(dir.path());
    let models = dir.path().join("models");
    let mut args = vec!["train", "--config", &conf];
    args.extend(FAST);
    assert!(run(&args).status.success());
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "Body ID,articleBody\n").unwrap();
    let o = run(&[
        "query",
        "--config",
        &conf,
        "--model-dir",
        models.to_str().unwrap(),
        "--bodies",
        empty.to_str().unwrap(),
        "anything",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--bodies"));
}

#[test]
fn sweep_writes_one_record_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let conf = synth(dir.path());
    let out = dir.path().join("sweep");
    let mut args = vec![
        "sweep",
        "--config",
        &conf,
        "--sweep-k",
        "1,3",
        "--seeds",
        "1",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend(FAST);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let jsonl = std::fs::read_to_string(out.join("sweep.jsonl")).unwrap();
    let points: Vec<serde_json::Value> = jsonl.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(points.len(), 2);
    assert_eq!(points[0]["k"], 1);
    assert_eq!(points[1]["k"], 3);
    assert_eq!(points[0]["per_seed"].as_array().unwrap().len(), 1);
}
