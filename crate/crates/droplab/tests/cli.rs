use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn droplab(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_droplab"));
    cmd.args(args).env("RUST_LOG", "error").env_remove("DROPLAB_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = droplab(args, &[]);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn small_dataset(dir: &Path) -> String {
    let d = dir.join("data");
    let s = d.to_str().unwrap().to_owned();
    ok(&["gen", "sbm", "--n", "45", "--p-in", "0.2", "--p-out", "0.02", "--noise", "0.5", "--out", &s]);
    s
}

#[test]
fn gen_writes_a_loadable_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let d = small_dataset(tmp.path());
    let g = droplab::load_dataset(Path::new(&d)).unwrap();
    assert_eq!(g.num_nodes(), 45);
    assert_eq!(g.num_classes(), 3);
    assert_eq!(g.features().unwrap().shape(), (45, 30));
    assert_eq!(json(&Path::new(&d).join("config.json"))["generator"]["kind"], "sbm");
}

#[test]
fn train_writes_report_and_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let d = small_dataset(tmp.path());
    let out = tmp.path().join("run");
    let stdout = ok(&[
        "train", "--data", &d, "--drop", "dropmessage", "--rate", "0.4", "--epochs", "12", "--seeds", "3", "--out",
        out.to_str().unwrap(),
    ])
    .stdout;
    assert!(String::from_utf8(stdout).unwrap().starts_with("dropmessage/0.4: test accuracy"));

    let report = json(&out.join("report.json"));
    assert_eq!(report["runs"].as_array().unwrap().len(), 3);
    assert_eq!(report["test_acc"]["runs"], 3);
    assert_eq!(report["config"]["command"], "train");
    assert!(report["config"].get("out").is_none());

    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next(), Some("epoch,train_loss,train_acc,val_acc,test_acc"));
    assert_eq!(lines.count(), 13);
}

#[test]
fn seed_variable_overrides_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("reg");
    let o = droplab(
        &["gen", "regular", "--n", "10", "--d", "3", "--seed", "1", "--out", out.to_str().unwrap()],
        &[("DROPLAB_SEED", "42")],
    );
    assert!(o.status.success());
    assert_eq!(json(&out.join("config.json"))["generator"]["seed"], 42);

    let bad = droplab(&["entropy", "--out", out.to_str().unwrap()], &[("DROPLAB_SEED", "x")]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn replay_ignores_the_seed_variable() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("a");
    let second = tmp.path().join("b");
    ok(&["gen", "regular", "--n", "12", "--d", "3", "--seed", "5", "--out", first.to_str().unwrap()]);
    let config = first.join("config.json");
    let o = droplab(
        &["replay", config.to_str().unwrap(), "--out", second.to_str().unwrap()],
        &[("DROPLAB_SEED", "6")],
    );
    assert!(o.status.success());
    for f in ["graph.tsv", "config.json"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn unperturbed_robustness_row_matches_train() {
    let tmp = tempfile::tempdir().unwrap();
    let d = small_dataset(tmp.path());
    let rob = tmp.path().join("rob");
    let train = tmp.path().join("train");
    let common = ["--epochs", "10", "--seeds", "2", "--rate", "0.3"];
    ok(&[&["robustness", "--data", &d, "--drop", "dropnode", "--ratios", "0,0.2", "--out", rob.to_str().unwrap()][..], &common].concat());
    ok(&[&["train", "--data", &d, "--drop", "dropnode", "--out", train.to_str().unwrap()][..], &common].concat());

    let mut reader = csv::Reader::from_path(rob.join("robustness.csv")).unwrap();
    let first: csv::StringRecord = reader.records().next().unwrap().unwrap();
    assert_eq!(&first[2], "0.0");
    let report = json(&train.join("report.json"));
    let mean: f64 = first[4].parse().unwrap();
    assert_eq!(mean, report["test_acc"]["mean"].as_f64().unwrap());
}

#[test]
fn invalid_requests_fail_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let d = small_dataset(tmp.path());
    let out = tmp.path().join("x");
    let o = out.to_str().unwrap();
    for args in [
        vec!["train", "--data", &d, "--drop", "dropout", "--nodewise", "--out", o],
        vec!["oversmooth", "--data", &d, "--model", "appnp", "--out", o],
        vec!["train", "--data", "/nonexistent", "--out", o],
        vec!["train", "--data", &d, "--rate", "1.5", "--drop", "dropout", "--out", o],
    ] {
        let r = droplab(&args, &[]);
        assert!(!r.status.success(), "{args:?}");
        assert!(String::from_utf8_lossy(&r.stderr).contains("error"), "{args:?}");
    }
    assert_eq!(droplab(&["train", "--drop", "dropsomething"], &[]).status.code(), Some(2));
}

#[test]
fn analysis_commands_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str, &str); 3] = [
        (&["entropy", "--rates", "0.3,0.6"], "entropy.csv", "delta,clean,dropout,dropedge,dropnode,dropmessage"),
        (
            &["variance", "--n", "12", "--d", "3", "--c", "2", "--trials", "300"],
            "variance.csv",
            "method,n,c,d,delta,closed_form,mc_estimate,mc_std_error,trials,z_score",
        ),
        (
            &["regcheck", "--trials", "200", "--drop", "dropmessage", "--var-source", "closed-form"],
            "regcheck.csv",
            "method,delta,trials,var_source,base_loss",
        ),
    ];
    for (i, (args, file, header)) in cases.into_iter().enumerate() {
        let out = tmp.path().join(i.to_string());
        ok(&[args, &["--out", out.to_str().unwrap()][..]].concat());
        let text = fs::read_to_string(out.join(file)).unwrap();
        assert!(text.starts_with(header), "{file}: {text}");
    }
}
