use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::RunRecorder;
use super::report::{cluster_label_rows, sweep_rows};
use super::{ClusterArgs, EvalArgs, ExperimentArgs, GenArgs, ProjectStatsArgs, TrainArgs};
use crate::clustering::{cluster_latent, ClusterOptions, ClusterReport, TauSelection};
use crate::error::{Error, Result};
use crate::mtrnn::{init_params, load_latent, load_model, save_latent, save_model, LatentCodes};
use crate::projection::inner_product_statistics;
use crate::training::{
    intra_codes, intra_phase_seed, run_inter_experiment, run_intra_detailed, stratified_split, success_rates,
    train_phase, ExperimentReport, InitMode, PhaseOutcome, PhaseReport, PrimitiveSuccess, TrainConfig, TrainState,
    Trainable,
};
use crate::trajectory::{load_dataset, save_dataset, GenerateConfig, MotionDataset, Trajectory, DATASET_FILE, SENSORY_FILE};

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| Error::json("config", e))
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::json("stdout", e))?;
    println!("{text}");
    Ok(())
}

fn load_data(rec: &mut RunRecorder, dir: &Path) -> Result<MotionDataset> {
    rec.input(&dir.join(DATASET_FILE))?;
    rec.input(&dir.join(SENSORY_FILE))?;
    load_dataset(dir)
}

pub(crate) fn gen(args: &GenArgs, argv: &[String]) -> Result<()> {
    let mut rec = RunRecorder::new("gen", argv, Some(&args.out))?;
    rec.input(&args.config)?;
    let mut cfg: GenerateConfig = read_json(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let ds = cfg.generate()?;
    save_dataset(&ds, &args.out)?;
    rec.produced(DATASET_FILE);
    rec.produced(SENSORY_FILE);
    rec.finish(to_value(&cfg)?)?;
    Ok(())
}

pub(crate) fn project_stats(args: &ProjectStatsArgs, argv: &[String]) -> Result<()> {
    if args.orthogonal && args.k < 2 {
        return Err(Error::InvalidArgument("--orthogonal needs k ≥ 2".into()));
    }
    if args.k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut rec = RunRecorder::new("project-stats", argv, args.out.as_deref())?;
    let mut a = vec![0.0; args.k];
    a[0] = 1.0;
    let mut b = vec![0.0; args.k];
    b[usize::from(args.orthogonal)] = 1.0;
    let stats = inner_product_statistics(&a, &b, args.q, args.trials, args.seed)?;
    print_json(&stats)?;
    if rec.out_dir().is_some() {
        rec.write_json("stats.json", &stats)?;
    }
    rec.finish(serde_json::json!({
        "k": args.k,
        "q": args.q,
        "trials": args.trials,
        "seed": args.seed,
        "orthogonal": args.orthogonal,
    }))?;
    Ok(())
}

fn curve_rows(curves: &[&[f64]]) -> Vec<Vec<String>> {
    let len = curves.iter().map(|c| c.len()).min().unwrap_or(0);
    (0..len)
        .map(|e| {
            let vals: Vec<f64> = curves.iter().map(|c| c[e]).collect();
            let (mean, var) = crate::numeric::mean_and_variance(&vals);
            let mut row = vec![e.to_string(), mean.to_string(), var.sqrt().to_string()];
            row.extend(vals.iter().map(|v| v.to_string()));
            row
        })
        .collect()
}

fn write_curves(rec: &mut RunRecorder, name: &str, seeds: &[u64], curves: &[&[f64]]) -> Result<()> {
    let seed_cols: Vec<String> = seeds.iter().map(|s| format!("seed{s}")).collect();
    let mut header = vec!["epoch", "loss", "std"];
    header.extend(seed_cols.iter().map(String::as_str));
    rec.write_csv(name, &header, &curve_rows(curves))
}

/// What `train` leaves behind for `eval`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct TrainRecord {
    pub data: PathBuf,
    pub seed: u64,
    pub config: TrainConfig,
    pub train_indices: Vec<usize>,
    pub eval_indices: Vec<usize>,
    pub final_loss: f64,
}

pub(crate) const TRAIN_RECORD: &str = "run.json";

/// Saves the last good state before passing a divergence on.
fn phase_or_checkpoint(
    rec: &mut RunRecorder,
    outcome: Result<PhaseOutcome>,
    model_file: Option<&str>,
    latent_file: &str,
) -> Result<PhaseOutcome> {
    match outcome {
        Err(Error::Diverged { phase, epoch, last_good }) => {
            if let Some(m) = model_file {
                save_model(&last_good.model, &rec.path_for(m)?)?;
            }
            save_latent(&last_good.latent, &rec.path_for(latent_file)?)?;
            Err(Error::Diverged { phase, epoch, last_good })
        }
        other => other,
    }
}

fn refs<'a>(ds: &'a MotionDataset, idx: &[usize]) -> Vec<&'a Trajectory> {
    idx.iter().map(|i| &ds.samples[*i]).collect()
}

pub(crate) fn train(args: &TrainArgs, argv: &[String]) -> Result<()> {
    let mut rec = RunRecorder::new("train", argv, Some(&args.out))?;
    let mut cfg = match &args.config {
        Some(p) => {
            rec.input(p)?;
            read_json::<TrainConfig>(p)?
        }
        None => TrainConfig::default(),
    };
    if let Some(m) = args.mode {
        cfg.init_mode = m;
    }
    if let Some(q) = args.q {
        cfg.latent_dim = q;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = args.epochs {
        cfg.epochs_train = e;
    }
    cfg.validate()?;
    let ds = load_data(&mut rec, &args.data)?;
    let seed = cfg.seed;
    let (train_idx, eval_idx) = stratified_split(&ds.labels(), cfg.train_fraction, seed)?;
    let (z_train, _) = intra_codes(&ds, &cfg, seed, &train_idx, &eval_idx)?;
    let start = TrainState {
        model: init_params(&cfg.arch(&ds), seed)?,
        latent: z_train,
    };
    let data = refs(&ds, &train_idx);
    let outcome = train_phase(start, &data, &cfg, cfg.epochs_train, Trainable::ALL, "train", intra_phase_seed(seed, 0));
    let p = phase_or_checkpoint(&mut rec, outcome, Some("model.bin"), "latent_train.bin")?;

    save_model(&p.state.model, &rec.path_for("model.bin")?)?;
    save_latent(&p.state.latent, &rec.path_for("latent_train.bin")?)?;
    write_curves(&mut rec, "curve_train.csv", &[seed], &[&p.curve])?;
    let record = TrainRecord {
        data: args.data.clone(),
        seed,
        config: cfg.clone(),
        train_indices: train_idx,
        eval_indices: eval_idx,
        final_loss: p.final_loss,
    };
    rec.write_json(TRAIN_RECORD, &record)?;
    rec.finish(to_value(&cfg)?)?;
    Ok(())
}

/// Result of `eval`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub init_mode: InitMode,
    pub seed: u64,
    pub phase: PhaseReport,
    pub success_rates: Vec<PrimitiveSuccess>,
    /// Clustering of the training and evaluation latents together.
    pub clustering: Option<ClusterReport>,
}

fn cluster_or_none(z: &LatentCodes, labels: &[usize], k: usize, seed: u64) -> Result<Option<ClusterReport>> {
    match cluster_latent(&z.to_columns(), &ClusterOptions::auto(k, seed), Some(labels)) {
        Ok(r) => Ok(Some(r)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub(crate) fn eval(args: &EvalArgs, argv: &[String]) -> Result<()> {
    let out = args.out.clone().unwrap_or_else(|| args.checkpoint.clone());
    let mut rec = RunRecorder::new("eval", argv, Some(&out))?;
    let record_path = args.checkpoint.join(TRAIN_RECORD);
    rec.input(&record_path)?;
    let record: TrainRecord = read_json(&record_path)?;
    let model_path = args.checkpoint.join("model.bin");
    let latent_path = args.checkpoint.join("latent_train.bin");
    rec.input(&model_path)?;
    rec.input(&latent_path)?;
    let model = load_model(&model_path)?;
    let z_train = load_latent(&latent_path)?;

    let mut cfg = record.config.clone();
    if let Some(m) = args.mode {
        cfg.init_mode = m;
    }
    if let Some(e) = args.epochs {
        cfg.epochs_eval = e;
    }
    cfg.validate()?;
    let ds = load_data(&mut rec, &record.data)?;
    if model.arch() != &cfg.arch(&ds) {
        return Err(Error::InvalidArgument("checkpoint architecture does not match the dataset".into()));
    }
    let seed = record.seed;
    let (_, z_eval) = intra_codes(&ds, &cfg, seed, &record.train_indices, &record.eval_indices)?;
    let data = refs(&ds, &record.eval_indices);
    let start = TrainState { model, latent: z_eval };
    let outcome = train_phase(
        start,
        &data,
        &cfg,
        cfg.epochs_eval,
        Trainable::LATENT_ONLY,
        "eval",
        intra_phase_seed(seed, 1),
    );
    let p = phase_or_checkpoint(&mut rec, outcome, None, "latent_eval.bin")?;

    let labels: Vec<usize> = record
        .train_indices
        .iter()
        .chain(&record.eval_indices)
        .map(|i| ds.samples[*i].primitive_id)
        .collect();
    let report = EvalReport {
        init_mode: cfg.init_mode,
        seed,
        phase: PhaseReport::new("eval", &p),
        success_rates: success_rates(&p.state, &data, &ds)?,
        clustering: cluster_or_none(&z_train.concat(&p.state.latent)?, &labels, ds.primitive_count(), seed)?,
    };
    save_latent(&p.state.latent, &rec.path_for("latent_eval.bin")?)?;
    write_curves(&mut rec, "curve_eval.csv", &[seed], &[&p.curve])?;
    rec.write_json("report.json", &report)?;
    rec.finish(to_value(&cfg)?)?;
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum LatentInput {
    Rows(Vec<Vec<f64>>),
    Labeled {
        latent: Vec<Vec<f64>>,
        #[serde(default)]
        labels: Option<Vec<usize>>,
    },
}

fn parse_tau(s: &str) -> Result<TauSelection> {
    if s == "auto" {
        return Ok(TauSelection::Auto);
    }
    match s.parse::<f64>() {
        Ok(t) if t > 0.0 && t.is_finite() => Ok(TauSelection::Fixed(t)),
        _ => Err(Error::InvalidArgument(format!("--tau must be `auto` or a positive number, got `{s}`"))),
    }
}

pub(crate) fn cluster(args: &ClusterArgs, argv: &[String]) -> Result<()> {
    let mut rec = RunRecorder::new("cluster", argv, args.out.as_deref())?;
    let tau = parse_tau(&args.tau)?;
    rec.input(&args.input)?;
    let is_json = args.input.extension().is_some_and(|e| e == "json");
    let (z, mut labels) = if is_json {
        match read_json::<LatentInput>(&args.input)? {
            LatentInput::Rows(rows) => (LatentCodes::from_rows(&rows)?, None),
            LatentInput::Labeled { latent, labels } => (LatentCodes::from_rows(&latent)?, labels),
        }
    } else {
        (load_latent(&args.input)?, None)
    };
    if let Some(p) = &args.labels {
        rec.input(p)?;
        labels = Some(read_json(p)?);
    }
    let opts = ClusterOptions {
        k: args.k,
        affine: args.affine,
        tau,
        seed: args.seed,
    };
    let report = cluster_latent(&z.to_columns(), &opts, labels.as_deref())?;
    print_json(&report)?;
    if rec.out_dir().is_some() {
        rec.write_json("cluster_report.json", &report)?;
        let sweep: Vec<Vec<String>> = report
            .sweep
            .iter()
            .map(|p| vec![p.tau.to_string(), p.r_squared.to_string()])
            .collect();
        rec.write_csv("tau_sweep.csv", &["tau", "r_squared"], &sweep)?;
        let rows: Vec<Vec<String>> = report
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let truth = labels.as_ref().and_then(|t| t.get(i)).map_or(String::new(), |t| t.to_string());
                vec![i.to_string(), l.to_string(), truth]
            })
            .collect();
        rec.write_csv("labels.csv", &["sample", "label", "truth"], &rows)?;
    }
    rec.finish(serde_json::json!({
        "k": args.k,
        "affine": args.affine,
        "tau": args.tau,
        "seed": args.seed,
    }))?;
    Ok(())
}

/// Config file of `intra` and `inter`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset directory, relative to the config file.
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Generated in memory when `data` is absent.
    #[serde(default)]
    pub dataset: Option<GenerateConfig>,
    #[serde(default)]
    pub train: TrainConfig,
    /// Held-out primitive of `inter`.
    #[serde(default)]
    pub holdout: Option<usize>,
}

fn experiment_setup(
    args: &ExperimentArgs,
    rec: &mut RunRecorder,
) -> Result<(ExperimentConfig, MotionDataset)> {
    rec.input(&args.config)?;
    let mut cfg: ExperimentConfig = read_json(&args.config)?;
    if let Some(s) = args.seed {
        cfg.train.seed = s;
    }
    if let Some(m) = args.mode {
        cfg.train.init_mode = m;
    }
    cfg.train.validate()?;
    let ds = match (&cfg.data, &cfg.dataset) {
        (Some(dir), None) => {
            let base = args.config.parent().unwrap_or(Path::new(""));
            load_data(rec, &base.join(dir))?
        }
        (None, Some(g)) => g.generate()?,
        (Some(_), Some(_)) => {
            return Err(Error::InvalidArgument("config sets both `data` and `dataset`".into()));
        }
        (None, None) => {
            return Err(Error::InvalidArgument("config needs `data` or `dataset`".into()));
        }
    };
    Ok((cfg, ds))
}

fn write_experiment(rec: &mut RunRecorder, report: &ExperimentReport, phases: [&str; 2]) -> Result<()> {
    let seeds: Vec<u64> = report.runs.iter().map(|r| r.seed).collect();
    for (i, name) in phases.iter().enumerate() {
        let curves: Vec<&[f64]> = report.runs.iter().map(|r| r.phases[i].curve.as_slice()).collect();
        write_curves(rec, &format!("curve_{name}.csv"), &seeds, &curves)?;
    }
    rec.write_csv("tau_sweep.csv", &["seed", "tau", "r_squared"], &sweep_rows(report))?;
    rec.write_csv(
        "cluster_labels.csv",
        &["seed", "sample", "primitive", "label"],
        &cluster_label_rows(report),
    )?;
    rec.write_json("report.json", report)
}

pub(crate) fn intra(args: &ExperimentArgs, argv: &[String]) -> Result<()> {
    let mut rec = RunRecorder::new("intra", argv, Some(&args.out))?;
    let (cfg, ds) = experiment_setup(args, &mut rec)?;
    let run = run_intra_detailed(&ds, &cfg.train)?;
    for (r, states) in run.report.runs.iter().zip(&run.states) {
        let dir = format!("seed{}", r.seed);
        save_model(&states.train.model, &rec.path_for(&format!("{dir}/model.bin"))?)?;
        save_latent(&states.train.latent, &rec.path_for(&format!("{dir}/latent_train.bin"))?)?;
        save_latent(&states.eval.latent, &rec.path_for(&format!("{dir}/latent_eval.bin"))?)?;
    }
    write_experiment(&mut rec, &run.report, ["train", "eval"])?;
    rec.finish(to_value(&cfg)?)?;
    Ok(())
}

pub(crate) fn inter(args: &ExperimentArgs, argv: &[String]) -> Result<()> {
    let mut rec = RunRecorder::new("inter", argv, Some(&args.out))?;
    let (cfg, ds) = experiment_setup(args, &mut rec)?;
    let holdout = cfg
        .holdout
        .ok_or_else(|| Error::InvalidArgument("inter config needs `holdout`".into()))?;
    let report = run_inter_experiment(&ds, &cfg.train, holdout)?;
    write_experiment(&mut rec, &report, ["known", "new"])?;
    rec.finish(to_value(&cfg)?)?;
    Ok(())
}
