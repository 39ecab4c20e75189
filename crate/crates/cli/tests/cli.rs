use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn thalparc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thalparc"))
        .args(args)
        .current_dir(cwd)
        .env_remove("THALPARC_OUT")
        .output()
        .expect("spawn thalparc")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let o = thalparc(args, cwd);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn kv(path: &Path) -> std::collections::BTreeMap<String, String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Small well-separated dataset in `dir/syn`.
fn synth(dir: &Path) {
    ok(
        &[
            "synth", "--subjects", "4", "--voxels", "60", "--separation", "8", "--seed", "3", "--out", "syn",
        ],
        dir,
    );
}

const FAST: [&str; 4] = ["--epochs", "40", "--n-neighbors", "10"];

#[test]
fn synth_fit_classify_plot() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d);
    assert!(d.join("syn/dataset.tsv").exists() && d.join("syn/synth.spec").exists());

    let mut args = vec!["fit", "--data", "syn/dataset.tsv", "--seed", "1", "--out", "model"];
    args.extend(FAST);
    let stdout = ok(&args, d);
    for f in ["model.tsv", "scaler.tsv", "latent.tsv", "config.resolved"] {
        assert!(d.join("model").join(f).exists(), "{f}");
        assert!(stdout.contains(f));
    }
    let resolved = kv(&d.join("model/config.resolved"));
    assert_eq!(resolved["epochs"], "40");
    assert_eq!(resolved["seed"], "1");
    assert!(!resolved.contains_key("out"));

    ok(
        &["classify", "--model", "model", "--data", "syn/dataset.tsv", "--k", "5", "--out", "pred"],
        d,
    );
    let summary = kv(&d.join("pred/summary.txt"));
    assert_eq!(summary["k"], "5");
    let overall: f64 = summary["overall"].parse().unwrap();
    assert!((0.0..=1.0).contains(&overall));
    let preds = std::fs::read_to_string(d.join("pred/predictions.tsv")).unwrap();
    let data = std::fs::read_to_string(d.join("syn/dataset.tsv")).unwrap();
    assert!(preds.lines().count() > 1);
    assert!(preds.lines().count() <= data.lines().count());

    ok(&["plot", "--latent", "model/latent.tsv", "--out", "fig"], d);
    let svg = std::fs::read_to_string(d.join("fig/embedding.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
}

#[test]
fn all_voxels_labels_every_row_without_summary() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    ok(
        &[
            "synth", "--subjects", "3", "--voxels", "50", "--unlabeled", "0.2", "--seed", "5", "--out", "syn",
        ],
        d,
    );
    let mut args = vec!["fit", "--data", "syn/dataset.tsv", "--out", "model"];
    args.extend(FAST);
    ok(&args, d);
    ok(
        &[
            "classify", "--model", "model", "--data", "syn/dataset.tsv", "--all-voxels", "--k", "3", "--out", "all",
        ],
        d,
    );
    let rows = std::fs::read_to_string(d.join("all/predictions.tsv")).unwrap().lines().count();
    let data = std::fs::read_to_string(d.join("syn/dataset.tsv")).unwrap().lines().count();
    assert_eq!(rows, data);
    assert!(!d.join("all/summary.txt").exists());
}

#[test]
fn high_dimension_needs_explicit_k() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d);
    let mut args = vec!["fit", "--data", "syn/dataset.tsv", "--dim", "5", "--out", "model"];
    args.extend(FAST);
    ok(&args, d);
    let o = thalparc(&["classify", "--model", "model", "--data", "syn/dataset.tsv", "--out", "pred"], d);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.starts_with("error kind=explicit_k_required"), "{err}");
    assert!(!d.join("pred").exists());
    ok(
        &["classify", "--model", "model", "--data", "syn/dataset.tsv", "--k", "7", "--out", "pred"],
        d,
    );
}

#[test]
fn failures_report_one_line_and_leave_nothing() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let o = thalparc(&["fit", "--data", "missing.tsv", "--out", "model"], d);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error kind=io msg="), "{err}");
    assert!(!d.join("model").exists());

    // a failure inside a run must not leave partial artifacts either
    synth(d);
    let o = thalparc(
        &["crossval", "--data", "syn/dataset.tsv", "--folds", "9", "--epochs", "5", "--out", "cv"],
        d,
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("error kind="));
    assert!(!d.join("cv").exists());
}

#[test]
fn usage_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    for args in [&["fit", "--dim", "two"][..], &["frobnicate"][..], &["classify"][..]] {
        let o = thalparc(args, tmp.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8(o.stderr).unwrap().starts_with("error kind=usage"));
    }
}

#[test]
fn flags_override_config_file_and_env_sets_output() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d);
    std::fs::write(
        d.join("run.cfg"),
        "# test run\ndata=syn/dataset.tsv\nepochs=30\nseed=9\nn_neighbors=8\nout=from_file\n",
    )
    .unwrap();
    ok(&["fit", "--config", "run.cfg", "--seed", "4"], d);
    let r = kv(&d.join("from_file/config.resolved"));
    assert_eq!((r["epochs"].as_str(), r["seed"].as_str()), ("30", "4"));
    assert_eq!(r["n_neighbors"], "8");

    let o = Command::new(env!("CARGO_BIN_EXE_thalparc"))
        .args(["fit", "--config", "run.cfg", "--out", "from_flag"])
        .current_dir(d)
        .env("THALPARC_OUT", "from_env")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(d.join("from_flag/model.tsv").exists());

    let o = Command::new(env!("CARGO_BIN_EXE_thalparc"))
        .args(["fit", "--data", "syn/dataset.tsv", "--epochs", "10", "--n-neighbors", "8"])
        .current_dir(d)
        .env("THALPARC_OUT", "from_env")
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(d.join("from_env/model.tsv").exists());

    std::fs::write(d.join("bad.cfg"), "epochs=many\n").unwrap();
    let o = thalparc(&["fit", "--config", "bad.cfg", "--data", "syn/dataset.tsv"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("error kind=invalid_argument"));
}

#[test]
fn features_from_tensor_table() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let mut table = String::from("subject\ti\tj\tk\tdxx\tdyy\tdzz\tdxy\tdxz\tdyz\n");
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                let a = 1.0 + 0.1 * i as f64;
                table.push_str(&format!("s1\t{i}\t{j}\t{k}\t{a}\t0.5\t0.5\t0.05\t0\t0\n"));
            }
        }
    }
    std::fs::write(d.join("tensors.tsv"), table).unwrap();
    ok(&["features", "--input", "tensors.tsv", "--spacing", "1,1,2", "--out", "feat"], d);
    let text = std::fs::read_to_string(d.join("feat/features.tsv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert!(header.contains(&"fa") && header.contains(&"knut_edge"));
    assert_eq!(lines.count(), 27);
    let fa_col = header.iter().position(|h| *h == "fa").unwrap();
    for line in text.lines().skip(1) {
        let fa: f64 = line.split('\t').nth(fa_col).unwrap().parse().unwrap();
        assert!(fa > 0.0 && fa < 1.0);
    }

    let o = thalparc(&["features", "--input", "tensors.tsv", "--spacing", "1,1", "--out", "x"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(!d.join("x").exists());
}
