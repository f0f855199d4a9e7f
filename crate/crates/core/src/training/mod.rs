//! Latent initialization, training phases and experiment drivers.

mod experiment;
mod optimizer;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mtrnn::{gradients, sample_losses, GradMode, LatentCodes, LossWeights, MtrnnArch, MtrnnModel};
use crate::numeric::seeded_rng;
use crate::projection::{sample_projection, ProjectionMatrix};
use crate::trajectory::{flatten_motor, MotionDataset, Trajectory};

pub use experiment::{
    intra_codes, intra_phase_seed, run_inter_experiment, run_intra_detailed, run_intra_experiment, stratified_split, success_rates, CurveSummary,
    ExperimentKind, ExperimentReport, IntraRun, IntraStates, PhaseReport, PrimitiveSuccess, RunReport, SUCCESS_TOLERANCE,
};
pub use optimizer::{Adam, AdamConfig, RowAdam};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    Zero,
    Random,
    Projection,
}

impl InitMode {
    pub fn name(self) -> &'static str {
        match self {
            InitMode::Zero => "zero",
            InitMode::Random => "random",
            InitMode::Projection => "projection",
        }
    }
}

impl std::str::FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(InitMode::Zero),
            "random" => Ok(InitMode::Random),
            "projection" => Ok(InitMode::Projection),
            other => Err(Error::InvalidArgument(format!(
                "unknown init mode `{other}` (expected zero, random or projection)"
            ))),
        }
    }
}

/// Per-epoch learning-rate multiplier within a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    Constant,
    /// Half-cosine from the base rate towards zero over the phase.
    #[default]
    Cosine,
}

impl LrSchedule {
    /// Multiplier for 1-based `epoch` out of `epochs`.
    pub fn factor(self, epoch: usize, epochs: usize) -> f64 {
        match self {
            LrSchedule::Constant => 1.0,
            LrSchedule::Cosine => {
                let x = (epoch - 1) as f64 / epochs as f64;
                0.5 * (1.0 + (std::f64::consts::PI * x).cos())
            }
        }
    }
}

/// Decoder shape; dataset-dependent sizes are filled in by [`ModelConfig::arch`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub layer_sizes: Vec<usize>,
    pub timescales: Vec<f64>,
    pub pb_hidden: usize,
    pub pb_out: usize,
    pub motor_hidden: usize,
    pub sensory_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let a = MtrnnArch::new(1, 1, 1, 1);
        Self {
            layer_sizes: a.layer_sizes,
            timescales: a.timescales,
            pb_hidden: a.pb_hidden,
            pb_out: a.pb_out,
            motor_hidden: a.motor_hidden,
            sensory_hidden: a.sensory_hidden,
        }
    }
}

impl ModelConfig {
    pub fn arch(&self, latent_dim: usize, ds: &MotionDataset) -> MtrnnArch {
        MtrnnArch {
            layer_sizes: self.layer_sizes.clone(),
            timescales: self.timescales.clone(),
            latent_dim,
            pb_hidden: self.pb_hidden,
            pb_out: self.pb_out,
            motor_dim: ds.joints(),
            motor_hidden: self.motor_hidden,
            sensory_dim: ds.pixels(),
            sensory_hidden: self.sensory_hidden,
            steps: ds.steps(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub lr_theta: f64,
    pub lr_z: f64,
    pub lr_schedule: LrSchedule,
    pub epochs_train: usize,
    pub epochs_eval: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub init_mode: InitMode,
    pub latent_dim: usize,
    pub train_fraction: f64,
    pub replay_fraction: f64,
    /// Independent repetitions with seeds `seed, seed + 1, …`.
    pub repeats: usize,
    /// Defaults to [`LossWeights::balanced`].
    pub loss_weights: Option<LossWeights>,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            lr_theta: 1e-3,
            lr_z: 1e-2,
            lr_schedule: LrSchedule::Cosine,
            epochs_train: 800,
            epochs_eval: 600,
            batch_size: 8,
            seed: 0,
            init_mode: InitMode::Projection,
            latent_dim: 40,
            train_fraction: 0.2,
            replay_fraction: 0.1,
            repeats: 1,
            loss_weights: None,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Settings that make the 4 × 50 sample, 30-step dataset converge in a
    /// few hundred epochs: 200/150 epochs, batches of 2, `lr_θ = 3e-3`.
    pub fn desk() -> Self {
        Self {
            lr_theta: 3e-3,
            epochs_train: 200,
            epochs_eval: 150,
            batch_size: 2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("train_fraction", self.train_fraction), ("replay_fraction", self.replay_fraction)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidArgument(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if self.epochs_train == 0 || self.epochs_eval == 0 {
            return Err(Error::InvalidArgument("epoch counts must be at least 1".into()));
        }
        if self.batch_size == 0 || self.latent_dim == 0 || self.repeats == 0 {
            return Err(Error::InvalidArgument("batch_size, latent_dim and repeats must be positive".into()));
        }
        if !(self.lr_theta >= 0.0 && self.lr_z >= 0.0) {
            return Err(Error::InvalidArgument("learning rates must be non-negative".into()));
        }
        Ok(())
    }

    pub fn arch(&self, ds: &MotionDataset) -> MtrnnArch {
        self.model.arch(self.latent_dim, ds)
    }

    pub fn weights(&self, arch: &MtrnnArch) -> LossWeights {
        self.loss_weights.unwrap_or_else(|| LossWeights::balanced(arch))
    }
}

/// Shared projection used by [`InitMode::Projection`].
pub fn latent_projection(samples: &[&Trajectory], q: usize, seed: u64) -> Result<ProjectionMatrix> {
    let k = samples
        .first()
        .map(|s| s.motor.as_slice().len())
        .ok_or_else(|| Error::InvalidArgument("no samples to project".into()))?;
    sample_projection(k, q, seed)
}

/// One latent row per sample: zeros, standard normal draws, or `P · m`.
pub fn init_latent(mode: InitMode, samples: &[&Trajectory], q: usize, seed: u64) -> Result<LatentCodes> {
    init_latent_with(mode, samples, q, seed, None)
}

/// As [`init_latent`], reusing `projection` when given.
pub(crate) fn init_latent_with(
    mode: InitMode,
    samples: &[&Trajectory],
    q: usize,
    seed: u64,
    projection: Option<&ProjectionMatrix>,
) -> Result<LatentCodes> {
    if q == 0 {
        return Err(Error::InvalidArgument("latent dimension must be at least 1".into()));
    }
    let n = samples.len();
    match mode {
        InitMode::Zero => Ok(LatentCodes::zeros(n, q)),
        InitMode::Random => {
            let mut rng = seeded_rng(seed, 1);
            let data = (0..n * q).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            LatentCodes::from_flat(n, q, data)
        }
        InitMode::Projection => {
            let owned;
            let p = match projection {
                Some(p) => p,
                None => {
                    owned = latent_projection(samples, q, seed)?;
                    &owned
                }
            };
            let rows = samples
                .iter()
                .map(|s| p.project(&flatten_motor(s)))
                .collect::<Result<Vec<_>>>()?;
            LatentCodes::from_rows(&rows)
        }
    }
}

/// Decoder parameters together with the latent codes being trained.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: MtrnnModel,
    pub latent: LatentCodes,
}

/// Which parameter groups a phase updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trainable {
    pub theta: bool,
    pub latent: bool,
}

impl Trainable {
    pub const ALL: Trainable = Trainable { theta: true, latent: true };
    pub const LATENT_ONLY: Trainable = Trainable { theta: false, latent: true };
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutcome {
    pub state: TrainState,
    /// Entry 0 is the mean per-sample loss before any update; entry `e` is
    /// the mean per-sample loss seen while running epoch `e`.
    pub curve: Vec<f64>,
    /// Mean per-sample loss of the returned state.
    pub final_loss: f64,
}

/// Mean per-sample loss of `data` where `data[i]` pairs with latent row `i`.
pub fn mean_loss(state: &TrainState, data: &[&Trajectory], weights: LossWeights) -> Result<f64> {
    let batch: Vec<(usize, &Trajectory)> = data.iter().enumerate().map(|(i, t)| (i, *t)).collect();
    let losses = sample_losses(&state.model, &state.latent, &batch, weights)?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Runs Adam over seeded mini-batches for `epochs` epochs. Latent row `i`
/// belongs to `data[i]`. Groups not in `trainable` are left bit-identical.
pub fn train_phase(
    state: TrainState,
    data: &[&Trajectory],
    config: &TrainConfig,
    epochs: usize,
    trainable: Trainable,
    phase: &str,
    seed: u64,
) -> Result<PhaseOutcome> {
    if !trainable.theta && !trainable.latent {
        return Err(Error::InvalidArgument("nothing to train".into()));
    }
    if data.len() != state.latent.len() {
        return Err(Error::DimensionMismatch {
            context: "latent rows per phase sample",
            expected: data.len(),
            actual: state.latent.len(),
        });
    }
    let weights = config.weights(state.model.arch());
    let diverged = |epoch: usize, last_good: &TrainState| Error::Diverged {
        phase: phase.to_string(),
        epoch,
        last_good: Box::new(last_good.clone()),
    };

    let initial = mean_loss(&state, data, weights)?;
    if !initial.is_finite() {
        return Err(diverged(0, &state));
    }
    let mut curve = Vec::with_capacity(epochs + 1);
    curve.push(initial);

    let mode = if trainable.theta { GradMode::Full } else { GradMode::LatentOnly };
    let mut theta_opt = Adam::new(config.adam, config.lr_theta, state.model.param_count());
    let mut z_opt = RowAdam::new(config.adam, config.lr_z, state.latent.len(), state.latent.dim());
    let mut rng = seeded_rng(seed, 2);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut state = state;
    let mut last_good = state.clone();

    for epoch in 1..=epochs {
        let f = config.lr_schedule.factor(epoch, epochs);
        theta_opt.set_lr(config.lr_theta * f);
        z_opt.set_lr(config.lr_z * f);
        order.shuffle(&mut rng);
        let mut epoch_losses = vec![0.0; data.len()];
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(usize, &Trajectory)> = chunk.iter().map(|i| (*i, data[*i])).collect();
            let g = match gradients(&state.model, &state.latent, &batch, weights, mode) {
                Ok(g) => g,
                Err(Error::NonFinite { .. }) => return Err(diverged(epoch, &last_good)),
                Err(e) => return Err(e),
            };
            if !g.loss.is_finite() {
                return Err(diverged(epoch, &last_good));
            }
            for (i, l) in chunk.iter().zip(&g.sample_losses) {
                epoch_losses[*i] += l;
            }
            if trainable.theta {
                let gp = g.params.as_deref().expect("full gradients requested");
                theta_opt.step(state.model.params_mut(), gp);
            }
            if trainable.latent {
                for (row, gz) in &g.latent {
                    z_opt.step_row(*row, state.latent.row_mut(*row), gz);
                }
            }
        }
        let mean = epoch_losses.iter().sum::<f64>() / data.len() as f64;
        if !mean.is_finite() {
            return Err(diverged(epoch, &last_good));
        }
        curve.push(mean);
        last_good.clone_from(&state);
    }
    let final_loss = match mean_loss(&state, data, weights) {
        Ok(l) if l.is_finite() => l,
        Ok(_) | Err(Error::NonFinite { .. }) => return Err(diverged(epochs, &last_good)),
        Err(e) => return Err(e),
    };
    Ok(PhaseOutcome {
        state,
        curve,
        final_loss,
    })
}
