use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use primcodec::cli::RunManifest;
use primcodec::mtrnn::load_latent;
use primcodec::training::{run_intra_detailed, TrainConfig};
use primcodec::trajectory::load_dataset;

const GEN: &str = r#"{"samples_per_primitive": 4, "seed": 3, "arm": {"steps": 10, "height": 8, "width": 8}}"#;

const MODEL: &str = r#""model": {"layer_sizes": [6, 3], "timescales": [2.0, 5.0], "pb_hidden": 5, "pb_out": 3,
    "motor_hidden": 5, "sensory_hidden": 0}"#;

fn train_json(extra: &str) -> String {
    format!(
        r#"{{"epochs_train": 4, "epochs_eval": 3, "latent_dim": 6, "batch_size": 3, "train_fraction": 0.5, {MODEL}{extra}}}"#
    )
}

fn primcodec(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_primcodec"))
        .args(args)
        .current_dir(dir)
        .env_remove("PRIMCODEC_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr_line(out: &Output) -> String {
    let s = String::from_utf8_lossy(&out.stderr).into_owned();
    assert_eq!(s.trim_end().lines().count(), 1, "stderr is not one line: {s}");
    s.trim_end().to_string()
}

fn with_data(dir: &Path) -> PathBuf {
    fs::write(dir.join("gen.json"), GEN).unwrap();
    ok(&primcodec(&["gen", "--config", "gen.json", "--out", "data"], dir));
    dir.join("data")
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn assert_outputs_exist(dir: &Path) {
    let m = manifest(dir);
    assert!(!m.outputs.is_empty());
    for f in &m.outputs {
        assert!(dir.join(f).is_file(), "listed output {f} is missing");
    }
}

#[test]
fn gen_writes_dataset_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let data = with_data(tmp.path());
    assert_outputs_exist(&data);
    let m = manifest(&data);
    assert_eq!(m.command, "gen");
    assert_eq!(m.inputs.len(), 1);
    assert_eq!(m.input_hash.len(), 64);
    assert_eq!(m.config["seed"], 3);
    let ds = load_dataset(&data).unwrap();
    assert_eq!(ds.len(), 16);
}

#[test]
fn gen_is_byte_identical_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("gen.json"), GEN).unwrap();
    ok(&primcodec(&["gen", "--config", "gen.json", "--out", "a"], tmp.path()));
    ok(&primcodec(&["--threads", "2", "gen", "--config", "gen.json", "--out", "b"], tmp.path()));
    for f in ["dataset.json", "sensory.bin"] {
        assert_eq!(
            fs::read(tmp.path().join("a").join(f)).unwrap(),
            fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn missing_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.json"), r#"{"seed": 1}"#).unwrap();
    let out = primcodec(&["gen", "--config", "bad.json", "--out", "d"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let line = stderr_line(&out);
    assert!(line.starts_with("error[config]:"), "{line}");
    assert!(line.contains("samples_per_primitive"), "{line}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.json"), r#"{"samples_per_primitive": 2, "seed": 1, "sede": 2}"#).unwrap();
    let out = primcodec(&["gen", "--config", "bad.json", "--out", "d"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).contains("sede"));
}

#[test]
fn usage_and_io_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = primcodec(&["frobnicate"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).starts_with("error[usage]:"));

    let out = primcodec(&["train", "--data", "nowhere", "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr_line(&out).starts_with("error[io]:"));

    let out = primcodec(&["--threads", "0", "project-stats", "--k", "3", "--q", "2"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn threads_env_must_be_a_number() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_primcodec"))
        .args(["project-stats", "--k", "3", "--q", "2", "--trials", "200"])
        .env("PRIMCODEC_THREADS", "many")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).contains("PRIMCODEC_THREADS"));
}

#[test]
fn project_stats_reports_moments() {
    let tmp = tempfile::tempdir().unwrap();
    let out = primcodec(
        &["project-stats", "--k", "270", "--q", "40", "--trials", "4000", "--seed", "7", "--out", "s"],
        tmp.path(),
    );
    ok(&out);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let mean = v["empirical_mean"].as_f64().unwrap();
    assert!((mean - 1.0).abs() < 4.0 * (2.0f64 / 40.0 / 4000.0).sqrt() + 1e-3, "{mean}");
    assert_eq!(v["analytic_mean"], 1.0);
    let file: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("s/stats.json")).unwrap()).unwrap();
    assert_eq!(file, v);
    assert_outputs_exist(&tmp.path().join("s"));
}

#[test]
fn train_then_eval_reproduces_the_intra_phases() {
    let tmp = tempfile::tempdir().unwrap();
    let data = with_data(tmp.path());
    fs::write(tmp.path().join("train.json"), train_json("")).unwrap();
    ok(&primcodec(
        &["train", "--data", "data", "--config", "train.json", "--mode", "projection", "--seed", "2", "--out", "run"],
        tmp.path(),
    ));
    ok(&primcodec(&["eval", "--checkpoint", "run", "--mode", "projection"], tmp.path()));
    let run = tmp.path().join("run");
    assert_outputs_exist(&run);
    for f in ["model.bin", "latent_train.bin", "latent_eval.bin", "curve_train.csv", "curve_eval.csv", "report.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }

    let ds = load_dataset(&data).unwrap();
    let mut cfg: TrainConfig = serde_json::from_str(&train_json("")).unwrap();
    cfg.seed = 2;
    let direct = run_intra_detailed(&ds, &cfg).unwrap();
    assert_eq!(load_latent(&run.join("latent_train.bin")).unwrap(), direct.states[0].train.latent);
    assert_eq!(load_latent(&run.join("latent_eval.bin")).unwrap(), direct.states[0].eval.latent);

    let curve = fs::read_to_string(run.join("curve_eval.csv")).unwrap();
    let mut lines = curve.lines();
    assert_eq!(lines.next(), Some("epoch,loss,std,seed2"));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "0");
    assert_eq!(first[1].parse::<f64>().unwrap(), direct.report.runs[0].phases[1].curve[0]);
    assert_eq!(curve.lines().count(), 1 + 4);
}

#[test]
fn cluster_reads_json_and_writes_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for g in 0..3 {
        for i in 0..8 {
            let t = (i + 1) as f64;
            let mut r = vec![0.0; 6];
            r[2 * g] = t;
            r[2 * g + 1] = 0.5 * t + 1.0;
            rows.push(r);
            labels.push(g);
        }
    }
    let input = serde_json::json!({ "latent": rows, "labels": labels });
    fs::write(tmp.path().join("Z.json"), input.to_string()).unwrap();
    let out = primcodec(
        &["cluster", "--input", "Z.json", "--affine", "--k", "3", "--tau", "auto", "--seed", "3", "--out", "c"],
        tmp.path(),
    );
    ok(&out);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["accuracy"], 1.0);
    assert_eq!(v["K"], 3);
    let sweep = fs::read_to_string(tmp.path().join("c/tau_sweep.csv")).unwrap();
    assert!(sweep.starts_with("tau,r_squared\n"));
    assert!(sweep.lines().count() > 2);
    assert_outputs_exist(&tmp.path().join("c"));

    let out = primcodec(&["cluster", "--input", "Z.json", "--k", "3", "--tau", "-1"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let out = primcodec(&["cluster", "--input", "Z.json", "--k", "3", "--tau", "0.5"], tmp.path());
    ok(&out);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["tau"], 0.5);
}

fn experiment_config(dir: &Path, name: &str, mode: &str, extra: &str) {
    let cfg = format!(
        r#"{{"dataset": {GEN}, "train": {}{extra}}}"#,
        train_json(&format!(r#", "init_mode": "{mode}", "repeats": 2"#))
    );
    fs::write(dir.join(name), cfg).unwrap();
}

#[test]
fn intra_runs_merge_into_a_table() {
    let tmp = tempfile::tempdir().unwrap();
    experiment_config(tmp.path(), "p.json", "projection", "");
    experiment_config(tmp.path(), "z.json", "zero", "");
    ok(&primcodec(&["intra", "--config", "p.json", "--out", "ip"], tmp.path()));
    ok(&primcodec(&["intra", "--config", "z.json", "--out", "iz"], tmp.path()));
    let ip = tmp.path().join("ip");
    assert_outputs_exist(&ip);
    for f in ["seed0/model.bin", "seed1/latent_eval.bin", "curve_train.csv", "tau_sweep.csv", "cluster_labels.csv"] {
        assert!(ip.join(f).is_file(), "{f}");
    }

    ok(&primcodec(&["report", "ip", "--out", "one"], tmp.path()));
    let one: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("one/summary.json")).unwrap()).unwrap();
    let run = &one["runs"][0];
    assert_eq!(run["init_mode"], "projection");
    assert!(run["final_losses"]["eval"]["mean"].is_number());
    assert!(run["final_losses"]["train"]["mean"].is_number());
    assert!(run["clustering_accuracy"]["mean"].is_number());

    ok(&primcodec(&["report", "ip", "iz", "--out", "both"], tmp.path()));
    let both: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("both/summary.json")).unwrap()).unwrap();
    let table = both["table"].as_object().unwrap();
    assert_eq!(table.keys().collect::<Vec<_>>(), vec!["projection", "zero"]);
    let p: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ip.join("report.json")).unwrap()).unwrap();
    let finals: Vec<f64> = p["runs"].as_array().unwrap().iter().map(|r| r["phases"][1]["final_loss"].as_f64().unwrap()).collect();
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    assert!((table["projection"]["final_loss_mean"].as_f64().unwrap() - mean).abs() < 1e-12);
    let csv = fs::read_to_string(tmp.path().join("both/summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    // Labels are grouped by primitive, as consecutive batches.
    let labels = fs::read_to_string(ip.join("cluster_labels.csv")).unwrap();
    let prims: Vec<usize> = labels
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("0,"))
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(prims.len(), 16);
    assert!(prims.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn report_needs_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("empty")).unwrap();
    let out = primcodec(&["report", "empty", "--out", "r"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).starts_with("error[config]:"));
}

#[test]
fn inter_requires_a_holdout() {
    let tmp = tempfile::tempdir().unwrap();
    experiment_config(tmp.path(), "i.json", "zero", "");
    let out = primcodec(&["inter", "--config", "i.json", "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).contains("holdout"));

    experiment_config(tmp.path(), "i.json", "zero", r#", "holdout": 9"#);
    let out = primcodec(&["inter", "--config", "i.json", "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    experiment_config(tmp.path(), "i.json", "zero", r#", "holdout": 1"#);
    ok(&primcodec(&["inter", "--config", "i.json", "--out", "x"], tmp.path()));
    assert!(tmp.path().join("x/curve_new.csv").is_file());
    assert_outputs_exist(&tmp.path().join("x"));
}

#[test]
fn divergence_exits_with_numeric_code_and_keeps_last_good_state() {
    let tmp = tempfile::tempdir().unwrap();
    with_data(tmp.path());
    fs::write(tmp.path().join("t.json"), train_json(r#", "lr_theta": 1e300, "lr_schedule": "constant""#)).unwrap();
    let out = primcodec(&["train", "--data", "data", "--config", "t.json", "--out", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stderr_line(&out).starts_with("error[numeric]:"));
    assert!(tmp.path().join("run/model.bin").is_file());
}
