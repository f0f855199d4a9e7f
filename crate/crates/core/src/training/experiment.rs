use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{init_latent_with, latent_projection, train_phase, InitMode, PhaseOutcome, TrainConfig, TrainState, Trainable};
use crate::clustering::{cluster_latent, ClusterOptions, ClusterReport};
use crate::error::{Error, Result};
use crate::mtrnn::{forward, init_params, LatentCodes};
use crate::numeric::{mean_and_variance, mix_seed, seeded_rng};
use crate::projection::ProjectionMatrix;
use crate::trajectory::{denormalize_motor, MotionDataset, Trajectory};

/// Key-frame end-effector error, as a fraction of the arm's reach, below
/// which a reproduced motion counts as successful.
pub const SUCCESS_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Intra,
    Inter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub name: String,
    pub samples: usize,
    pub curve: Vec<f64>,
    pub final_loss: f64,
}

impl PhaseReport {
    pub fn new(name: &str, outcome: &PhaseOutcome) -> Self {
        Self {
            name: name.to_string(),
            samples: outcome.state.latent.len(),
            curve: outcome.curve.clone(),
            final_loss: outcome.final_loss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveSuccess {
    pub primitive: usize,
    pub name: String,
    pub samples: usize,
    pub successes: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub phases: Vec<PhaseReport>,
    pub success_rates: Vec<PrimitiveSuccess>,
    /// Clustering of all final latent codes.
    pub clustering: Option<ClusterReport>,
    /// Clustering of the latent codes before any training.
    pub initial_clustering: Option<ClusterReport>,
    /// Mean loss on the first-phase samples after the second phase.
    pub retained_loss: Option<f64>,
}

/// Mean and standard deviation over repeats, per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub phase: String,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub final_mean: f64,
    pub final_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub init_mode: InitMode,
    pub holdout: Option<usize>,
    /// Primitive id of every dataset sample.
    pub primitive_ids: Vec<usize>,
    pub train_indices: Vec<Vec<usize>>,
    pub eval_indices: Vec<Vec<usize>>,
    pub runs: Vec<RunReport>,
    /// Summary of the second phase across repeats.
    pub summary: CurveSummary,
    pub config: TrainConfig,
    /// Kept out of the serialized report so reruns are byte-identical.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl ExperimentReport {
    pub fn final_losses(&self, phase: usize) -> Vec<f64> {
        self.runs.iter().map(|r| r.phases[phase].final_loss).collect()
    }
}

/// Per-primitive split with `fraction` of each primitive (at least one,
/// at most all but one sample) in the first set. Both lists are sorted.
pub fn stratified_split(labels: &[usize], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = seeded_rng(seed, 3);
    let mut first = Vec::new();
    let mut second = Vec::new();
    for label in 0..k {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|i| labels[*i] == label).collect();
        if idx.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "primitive {label} has {} samples; at least 2 are needed to split",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let take = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        first.extend_from_slice(&idx[..take]);
        second.extend_from_slice(&idx[take..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

/// Fraction of samples per primitive whose generated motion puts the end
/// effector within [`SUCCESS_TOLERANCE`] of every scripted key point.
/// Latent row `i` belongs to `data[i]`.
pub fn success_rates(state: &TrainState, data: &[&Trajectory], ds: &MotionDataset) -> Result<Vec<PrimitiveSuccess>> {
    let reach = ds.arm.reach();
    let mut counts = vec![(0usize, 0usize); ds.primitive_count()];
    for (i, traj) in data.iter().enumerate() {
        let out = forward(&state.model, state.latent.row(i))?;
        let angles = match &ds.normalization {
            Some(rec) => denormalize_motor(rec, &out.motor),
            None => out.motor,
        };
        let ok = traj.key_points.iter().all(|kp| {
            let ee = ds.arm.end_effector(angles.row(kp.frame));
            let d = ((ee[0] - kp.position[0]).powi(2) + (ee[1] - kp.position[1]).powi(2)).sqrt();
            d / reach < SUCCESS_TOLERANCE
        });
        let c = &mut counts[traj.primitive_id];
        c.0 += 1;
        c.1 += ok as usize;
    }
    Ok(counts
        .iter()
        .enumerate()
        .filter(|(_, c)| c.0 > 0)
        .map(|(p, (n, s))| PrimitiveSuccess {
            primitive: p,
            name: ds.primitives[p].kind.name().to_string(),
            samples: *n,
            successes: *s,
            rate: *s as f64 / *n as f64,
        })
        .collect())
}

fn cluster_codes(z: &LatentCodes, labels: &[usize], k: usize, seed: u64) -> Result<Option<ClusterReport>> {
    match cluster_latent(&z.to_columns(), &ClusterOptions::auto(k, seed), Some(labels)) {
        Ok(r) => Ok(Some(r)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn summarize(phase: &str, runs: &[RunReport], which: usize) -> CurveSummary {
    let len = runs.iter().map(|r| r.phases[which].curve.len()).min().unwrap_or(0);
    let mut mean = Vec::with_capacity(len);
    let mut std = Vec::with_capacity(len);
    for e in 0..len {
        let vals: Vec<f64> = runs.iter().map(|r| r.phases[which].curve[e]).collect();
        let (m, v) = mean_and_variance(&vals);
        mean.push(m);
        std.push(v.sqrt());
    }
    let finals: Vec<f64> = runs.iter().map(|r| r.phases[which].final_loss).collect();
    let (final_mean, final_var) = mean_and_variance(&finals);
    CurveSummary {
        phase: phase.to_string(),
        mean,
        std,
        final_mean,
        final_std: final_var.sqrt(),
    }
}

fn projection_for(mode: InitMode, samples: &[&Trajectory], q: usize, seed: u64) -> Result<Option<ProjectionMatrix>> {
    match mode {
        InitMode::Projection => latent_projection(samples, q, seed).map(Some),
        _ => Ok(None),
    }
}

fn refs<'a>(ds: &'a MotionDataset, idx: &[usize]) -> Vec<&'a Trajectory> {
    idx.iter().map(|i| &ds.samples[*i]).collect()
}

fn labels_of(data: &[&Trajectory]) -> Vec<usize> {
    data.iter().map(|t| t.primitive_id).collect()
}

/// Final states of one intra-primitive repeat.
#[derive(Debug, Clone)]
pub struct IntraStates {
    pub train: TrainState,
    pub eval: TrainState,
}

#[derive(Debug, Clone)]
pub struct IntraRun {
    pub report: ExperimentReport,
    pub states: Vec<IntraStates>,
}

/// Initial latent codes of one intra repeat for the training and evaluation
/// samples. In projection mode both share the matrix drawn for the training
/// part.
pub fn intra_codes(
    ds: &MotionDataset,
    cfg: &TrainConfig,
    seed: u64,
    train_idx: &[usize],
    eval_idx: &[usize],
) -> Result<(LatentCodes, LatentCodes)> {
    let q = cfg.latent_dim;
    let train = refs(ds, train_idx);
    let eval = refs(ds, eval_idx);
    let proj = projection_for(cfg.init_mode, &train, q, seed)?;
    let z_train = init_latent_with(cfg.init_mode, &train, q, mix_seed(seed, 1), proj.as_ref())?;
    let z_eval = init_latent_with(cfg.init_mode, &eval, q, mix_seed(seed, 2), proj.as_ref())?;
    Ok((z_train, z_eval))
}

/// Shuffle seed of intra phase `phase` (0 = train, 1 = eval).
pub fn intra_phase_seed(seed: u64, phase: u64) -> u64 {
    mix_seed(seed, 3 + phase)
}

/// Stratified split, joint training of `θ` and the training latents, then
/// fitting fresh latents for the held-out samples with `θ` frozen.
pub fn run_intra_experiment(ds: &MotionDataset, cfg: &TrainConfig) -> Result<ExperimentReport> {
    run_intra_detailed(ds, cfg).map(|r| r.report)
}

pub fn run_intra_detailed(ds: &MotionDataset, cfg: &TrainConfig) -> Result<IntraRun> {
    cfg.validate()?;
    ds.validate()?;
    let started = Instant::now();
    let arch = cfg.arch(ds);
    let k = ds.primitive_count();
    let mut runs = Vec::with_capacity(cfg.repeats);
    let mut states = Vec::with_capacity(cfg.repeats);
    let mut train_indices = Vec::new();
    let mut eval_indices = Vec::new();

    for r in 0..cfg.repeats {
        let seed = cfg.seed + r as u64;
        let (train_idx, eval_idx) = stratified_split(&ds.labels(), cfg.train_fraction, seed)?;
        let train = refs(ds, &train_idx);
        let eval = refs(ds, &eval_idx);
        let (z_train, z_eval) = intra_codes(ds, cfg, seed, &train_idx, &eval_idx)?;
        let all_labels: Vec<usize> = labels_of(&train).into_iter().chain(labels_of(&eval)).collect();
        let initial_clustering = cluster_codes(&z_train.concat(&z_eval)?, &all_labels, k, seed)?;

        let start = TrainState {
            model: init_params(&arch, seed)?,
            latent: z_train,
        };
        let p1 = train_phase(start, &train, cfg, cfg.epochs_train, Trainable::ALL, "train", intra_phase_seed(seed, 0))?;
        let eval_start = TrainState {
            model: p1.state.model.clone(),
            latent: z_eval,
        };
        let p2 = train_phase(
            eval_start,
            &eval,
            cfg,
            cfg.epochs_eval,
            Trainable::LATENT_ONLY,
            "eval",
            intra_phase_seed(seed, 1),
        )?;

        let success = success_rates(&p2.state, &eval, ds)?;
        let clustering = cluster_codes(&p1.state.latent.concat(&p2.state.latent)?, &all_labels, k, seed)?;
        runs.push(RunReport {
            seed,
            phases: vec![PhaseReport::new("train", &p1), PhaseReport::new("eval", &p2)],
            success_rates: success,
            clustering,
            initial_clustering,
            retained_loss: None,
        });
        states.push(IntraStates {
            train: p1.state,
            eval: p2.state,
        });
        train_indices.push(train_idx);
        eval_indices.push(eval_idx);
    }

    let summary = summarize("eval", &runs, 1);
    Ok(IntraRun {
        report: ExperimentReport {
            experiment: ExperimentKind::Intra,
            init_mode: cfg.init_mode,
            holdout: None,
            primitive_ids: ds.labels(),
            train_indices,
            eval_indices,
            runs,
            summary,
            config: cfg.clone(),
            wall_clock_secs: started.elapsed().as_secs_f64(),
        },
        states,
    })
}

/// Trains on all primitives except `holdout`, then learns the held-out
/// primitive together with a replayed subset of the first-phase samples.
pub fn run_inter_experiment(ds: &MotionDataset, cfg: &TrainConfig, holdout: usize) -> Result<ExperimentReport> {
    cfg.validate()?;
    ds.validate()?;
    let k = ds.primitive_count();
    if k < 2 {
        return Err(Error::InvalidArgument("inter-primitive runs need at least 2 primitives".into()));
    }
    if holdout >= k {
        return Err(Error::InvalidArgument(format!("holdout primitive {holdout} is out of range 0..{k}")));
    }
    let started = Instant::now();
    let arch = cfg.arch(ds);
    let q = cfg.latent_dim;
    let labels = ds.labels();
    let first_idx: Vec<usize> = (0..ds.len()).filter(|i| labels[*i] != holdout).collect();
    let new_idx: Vec<usize> = (0..ds.len()).filter(|i| labels[*i] == holdout).collect();
    let first = refs(ds, &first_idx);
    let fresh = refs(ds, &new_idx);

    let mut runs = Vec::with_capacity(cfg.repeats);
    let mut train_indices = Vec::new();
    let mut eval_indices = Vec::new();
    for r in 0..cfg.repeats {
        let seed = cfg.seed + r as u64;
        let proj = projection_for(cfg.init_mode, &first, q, seed)?;
        let z_first = init_latent_with(cfg.init_mode, &first, q, mix_seed(seed, 1), proj.as_ref())?;
        let z_fresh = init_latent_with(cfg.init_mode, &fresh, q, mix_seed(seed, 2), proj.as_ref())?;
        let all_labels: Vec<usize> = labels_of(&first).into_iter().chain(labels_of(&fresh)).collect();
        let initial_clustering = cluster_codes(&z_first.concat(&z_fresh)?, &all_labels, k, seed)?;

        let start = TrainState {
            model: init_params(&arch, seed)?,
            latent: z_first,
        };
        let p1 = train_phase(start, &first, cfg, cfg.epochs_train, Trainable::ALL, "known", mix_seed(seed, 3))?;

        let mut replay: Vec<usize> = (0..first.len()).collect();
        replay.shuffle(&mut seeded_rng(seed, 4));
        let n_replay = ((cfg.replay_fraction * first.len() as f64).round() as usize).clamp(1, first.len());
        replay.truncate(n_replay);
        replay.sort_unstable();

        let mut data2: Vec<&Trajectory> = fresh.clone();
        data2.extend(replay.iter().map(|i| first[*i]));
        let start2 = TrainState {
            model: p1.state.model.clone(),
            latent: z_fresh.concat(&p1.state.latent.select(&replay))?,
        };
        let p2 = train_phase(start2, &data2, cfg, cfg.epochs_eval, Trainable::ALL, "new", mix_seed(seed, 5))?;

        let mut retained = p1.state.latent.clone();
        for (j, i) in replay.iter().enumerate() {
            retained.row_mut(*i).copy_from_slice(p2.state.latent.row(fresh.len() + j));
        }
        let retained_state = TrainState {
            model: p2.state.model.clone(),
            latent: retained,
        };
        let retained_loss = super::mean_loss(&retained_state, &first, cfg.weights(&arch))?;

        let new_state = TrainState {
            model: p2.state.model.clone(),
            latent: p2.state.latent.select(&(0..fresh.len()).collect::<Vec<_>>()),
        };
        let success = success_rates(&new_state, &fresh, ds)?;
        let clustering = cluster_codes(&retained_state.latent.concat(&new_state.latent)?, &all_labels, k, seed)?;
        runs.push(RunReport {
            seed,
            phases: vec![PhaseReport::new("known", &p1), PhaseReport::new("new", &p2)],
            success_rates: success,
            clustering,
            initial_clustering,
            retained_loss: Some(retained_loss),
        });
        train_indices.push(first_idx.clone());
        eval_indices.push(new_idx.iter().copied().chain(replay.iter().map(|i| first_idx[*i])).collect());
    }

    let summary = summarize("new", &runs, 1);
    Ok(ExperimentReport {
        experiment: ExperimentKind::Inter,
        init_mode: cfg.init_mode,
        holdout: Some(holdout),
        primitive_ids: labels,
        train_indices,
        eval_indices,
        runs,
        summary,
        config: cfg.clone(),
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}
