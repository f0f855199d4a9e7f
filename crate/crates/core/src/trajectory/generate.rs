use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arm::ArmConfig;
use super::normalize::normalize_joint_angles;
use super::primitives::{EePath, KeyPoint, PrimitiveSpec};
use super::render::render_sensory;
use super::resample::resample_frequency_domain;
use super::{MotionDataset, MotorMatrix, Trajectory};
use crate::error::{Error, Result};
use crate::numeric::seeded_rng;

const MAX_PASSES: usize = 8;
const PROBE_POINTS: usize = 200;

/// A candidate variation that could not be executed by the arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub primitive: usize,
    pub variation: Vec<f64>,
    pub reason: String,
}

/// Everything needed to regenerate a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    #[serde(default)]
    pub arm: ArmConfig,
    #[serde(default = "PrimitiveSpec::defaults")]
    pub primitives: Vec<PrimitiveSpec>,
    pub samples_per_primitive: usize,
    pub seed: u64,
    /// When set, paths are sampled at this (even) length and stretched to
    /// `arm.steps` with the frequency-domain resampler.
    #[serde(default)]
    pub raw_steps: Option<usize>,
}

impl GenerateConfig {
    pub fn generate(&self) -> Result<MotionDataset> {
        generate_with_source_length(
            &self.arm,
            &self.primitives,
            self.samples_per_primitive,
            self.seed,
            self.raw_steps,
        )
        .and_then(normalize_joint_angles)
    }
}

/// Builds `K · samples_per_primitive` normalized trajectories.
///
/// Within each primitive the block position and size are drawn from a
/// jittered 3-D grid, so every primitive is a 3-parameter family. The result
/// is a pure function of the arguments.
pub fn generate_dataset(
    arm: &ArmConfig,
    primitives: &[PrimitiveSpec],
    samples_per_primitive: usize,
    seed: u64,
) -> Result<MotionDataset> {
    generate_with_source_length(arm, primitives, samples_per_primitive, seed, None)
        .and_then(normalize_joint_angles)
}

struct Accepted {
    primitive: usize,
    variation: [f64; 3],
    path: EePath,
}

fn generate_with_source_length(
    arm: &ArmConfig,
    primitives: &[PrimitiveSpec],
    samples_per_primitive: usize,
    seed: u64,
    raw_steps: Option<usize>,
) -> Result<MotionDataset> {
    arm.validate()?;
    if samples_per_primitive == 0 {
        return Err(Error::InvalidArgument("samples_per_primitive must be at least 1".into()));
    }
    if primitives.is_empty() {
        return Err(Error::InvalidArgument("at least one primitive is required".into()));
    }
    let source_steps = raw_steps.unwrap_or(arm.steps);
    if source_steps > arm.steps || source_steps < 2 {
        return Err(Error::InvalidArgument(format!(
            "raw_steps {source_steps} must lie in 2..={}",
            arm.steps
        )));
    }
    if source_steps != arm.steps && !source_steps.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("raw_steps {source_steps} must be even")));
    }

    let mut rejections = Vec::new();
    let mut accepted = Vec::with_capacity(primitives.len() * samples_per_primitive);
    for (k, spec) in primitives.iter().enumerate() {
        let picked = sample_variations(arm, spec, k, samples_per_primitive, seed, source_steps, &mut rejections)?;
        accepted.extend(picked);
    }

    let samples = accepted
        .par_iter()
        .map(|a| build_trajectory(arm, a, source_steps))
        .collect::<Result<Vec<_>>>()?;

    Ok(MotionDataset {
        arm: arm.clone(),
        primitives: primitives.to_vec(),
        samples,
        normalization: None,
        seed,
        rejections,
    })
}

fn sample_variations(
    arm: &ArmConfig,
    spec: &PrimitiveSpec,
    primitive: usize,
    wanted: usize,
    seed: u64,
    source_steps: usize,
    rejections: &mut Vec<Rejection>,
) -> Result<Vec<Accepted>> {
    let mut rng = seeded_rng(seed, primitive as u64);
    let mut per_axis = 1usize;
    while per_axis.pow(3) < wanted {
        per_axis += 1;
    }
    let cells: Vec<[usize; 3]> = (0..per_axis.pow(3))
        .map(|c| [c % per_axis, (c / per_axis) % per_axis, c / (per_axis * per_axis)])
        .collect();
    let lerp = |(lo, hi): (f64, f64), cell: usize, u: f64| lo + (cell as f64 + u) / per_axis as f64 * (hi - lo);

    let mut out = Vec::with_capacity(wanted);
    let mut last_reason = String::new();
    'passes: for _ in 0..MAX_PASSES {
        let mut order = cells.clone();
        order.shuffle(&mut rng);
        for cell in order {
            let variation = [
                lerp(spec.target_x, cell[0], rng.random::<f64>()),
                lerp(spec.target_y, cell[1], rng.random::<f64>()),
                lerp(spec.object_size, cell[2], rng.random::<f64>()),
            ];
            let path = spec.path([variation[0], variation[1]], variation[2]);
            match check_reachable(arm, &path, source_steps) {
                Ok(()) => {
                    out.push(Accepted {
                        primitive,
                        variation,
                        path,
                    });
                    if out.len() == wanted {
                        break 'passes;
                    }
                }
                Err(reason) => {
                    last_reason = reason.clone();
                    rejections.push(Rejection {
                        primitive,
                        variation: variation.to_vec(),
                        reason,
                    });
                }
            }
        }
    }
    if out.len() < wanted {
        return Err(Error::UnreachablePrimitive {
            primitive,
            reason: format!(
                "only {} of {wanted} sampled variations are reachable (last: {last_reason})",
                out.len()
            ),
        });
    }
    Ok(out)
}

fn check_reachable(arm: &ArmConfig, path: &EePath, source_steps: usize) -> std::result::Result<(), String> {
    let frames = (0..source_steps).map(|t| path.position(t as f64 / (source_steps - 1) as f64));
    for p in path.probe_points(PROBE_POINTS).chain(frames) {
        if arm.inverse_kinematics(p).is_none() {
            return Err(format!("end-effector point ({:.4}, {:.4}) is unreachable", p[0], p[1]));
        }
    }
    Ok(())
}

fn build_trajectory(arm: &ArmConfig, a: &Accepted, source_steps: usize) -> Result<Trajectory> {
    let p = arm.joints();
    let mut motor = MotorMatrix::zeros(source_steps, p);
    for t in 0..source_steps {
        let pos = a.path.position(t as f64 / (source_steps - 1) as f64);
        let q = arm
            .inverse_kinematics(pos)
            .ok_or_else(|| Error::InvalidArgument("screened point became unreachable".into()))?;
        for (j, v) in q.iter().enumerate() {
            motor.set(t, j, *v);
        }
    }
    if source_steps != arm.steps {
        motor = resample_frequency_domain(&motor, arm.steps)?;
    }

    let steps = arm.steps;
    let mut sensory = Vec::with_capacity(steps * arm.height * arm.width);
    for t in 0..steps {
        let time = t as f64 / (steps - 1) as f64;
        sensory.extend(render_sensory(arm, motor.row(t), a.path.object_position(time), a.variation[2]));
    }
    let key_points = a
        .path
        .key_times()
        .iter()
        .map(|kt| {
            let frame = (kt * (steps - 1) as f64).round() as usize;
            KeyPoint {
                frame,
                position: a.path.position(frame as f64 / (steps - 1) as f64),
            }
        })
        .collect();
    Ok(Trajectory {
        motor,
        sensory,
        primitive_id: a.primitive,
        variation: a.variation.to_vec(),
        key_points,
    })
}
