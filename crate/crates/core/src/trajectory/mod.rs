//! Synthetic motion datasets and trajectory preprocessing.
//!
//! A [`Trajectory`] is one recorded motion: a `T × p` matrix of joint values
//! plus `T` grayscale frames. A [`MotionDataset`] groups trajectories with
//! their primitive labels and the per-joint normalization that was applied.

mod arm;
mod generate;
mod io;
mod normalize;
mod primitives;
mod render;
mod resample;

pub use arm::{ArmConfig, Point2};
pub use generate::{generate_dataset, GenerateConfig, Rejection};
pub use io::{load_dataset, save_dataset, DatasetFiles, DATASET_FILE, DATASET_FORMAT_VERSION, SENSORY_FILE};
pub use normalize::{denormalize_motor, normalize_joint_angles, JointRange, NormalizationRecord};
pub use primitives::{KeyPoint, PrimitiveKind, PrimitiveSpec};
pub use render::render_sensory;
pub use resample::resample_frequency_domain;

use crate::error::{Error, Result};

/// Row-major `steps × joints` matrix of joint values.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorMatrix {
    steps: usize,
    joints: usize,
    data: Vec<f64>,
}

impl MotorMatrix {
    pub fn zeros(steps: usize, joints: usize) -> Self {
        Self {
            steps,
            joints,
            data: vec![0.0; steps * joints],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let joints = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * joints);
        for row in rows {
            if row.len() != joints {
                return Err(Error::DimensionMismatch {
                    context: "motor row",
                    expected: joints,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            steps: rows.len(),
            joints,
            data,
        })
    }

    /// Inverse of [`flatten_motor`]: reshape a time-major vector.
    pub fn from_flat(steps: usize, joints: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != steps * joints {
            return Err(Error::DimensionMismatch {
                context: "flat motor vector",
                expected: steps * joints,
                actual: data.len(),
            });
        }
        Ok(Self { steps, joints, data })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn get(&self, t: usize, j: usize) -> f64 {
        self.data[t * self.joints + j]
    }

    pub fn set(&mut self, t: usize, j: usize, v: f64) {
        self.data[t * self.joints + j] = v;
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.joints..(t + 1) * self.joints]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.steps).map(|t| self.get(t, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.joints.max(1)).map(<[f64]>::to_vec).collect()
    }
}

/// One motion: joint trajectory, rendered frames, label and the parameters
/// that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub motor: MotorMatrix,
    /// `T` frames of `H × W` pixels, frame-major then row-major, in `[0, 1]`.
    pub sensory: Vec<f32>,
    pub primitive_id: usize,
    /// Target x, target y, object size.
    pub variation: Vec<f64>,
    /// Scripted end-effector waypoints at designated frames.
    pub key_points: Vec<KeyPoint>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.motor.steps()
    }

    pub fn frame(&self, t: usize, pixels: usize) -> &[f32] {
        &self.sensory[t * pixels..(t + 1) * pixels]
    }
}

/// Time-major flattening `(m₁,₁ … m₁,ₚ, m₂,₁ …)`.
pub fn flatten_motor(traj: &Trajectory) -> Vec<f64> {
    traj.motor.as_slice().to_vec()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionDataset {
    pub arm: ArmConfig,
    pub primitives: Vec<PrimitiveSpec>,
    pub samples: Vec<Trajectory>,
    /// `None` while the motor values are still raw joint angles.
    pub normalization: Option<NormalizationRecord>,
    pub seed: u64,
    pub rejections: Vec<Rejection>,
}

impl MotionDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn primitive_count(&self) -> usize {
        self.primitives.len()
    }

    pub fn steps(&self) -> usize {
        self.arm.steps
    }

    pub fn joints(&self) -> usize {
        self.arm.link_lengths.len()
    }

    pub fn pixels(&self) -> usize {
        self.arm.height * self.arm.width
    }

    /// Flattened motor length `p · T`.
    pub fn motor_dim(&self) -> usize {
        self.steps() * self.joints()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.primitive_id).collect()
    }

    /// Checks the structural invariants: uniform shapes and full label coverage.
    pub fn validate(&self) -> Result<()> {
        let (t, p, px) = (self.steps(), self.joints(), self.pixels());
        let k = self.primitive_count();
        let mut seen = vec![false; k];
        for (i, s) in self.samples.iter().enumerate() {
            if s.motor.steps() != t || s.motor.joints() != p {
                return Err(Error::InvalidArgument(format!(
                    "sample {i}: motor is {}x{}, expected {t}x{p}",
                    s.motor.steps(),
                    s.motor.joints()
                )));
            }
            if s.sensory.len() != t * px {
                return Err(Error::DimensionMismatch {
                    context: "sensory frames",
                    expected: t * px,
                    actual: s.sensory.len(),
                });
            }
            if s.primitive_id >= k {
                return Err(Error::InvalidArgument(format!(
                    "sample {i}: label {} outside 0..{k}",
                    s.primitive_id
                )));
            }
            seen[s.primitive_id] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!(
                "primitive {missing} has no samples"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(rows: &[Vec<f64>]) -> Trajectory {
        Trajectory {
            motor: MotorMatrix::from_rows(rows).unwrap(),
            sensory: vec![],
            primitive_id: 0,
            variation: vec![],
            key_points: vec![],
        }
    }

    #[test]
    fn flatten_is_time_major() {
        let t = traj(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(flatten_motor(&t), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn flatten_length_is_steps_times_joints() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, 0.5, -0.5]).collect();
        let t = traj(&rows);
        let flat = flatten_motor(&t);
        assert_eq!(flat.len(), 90);
        let back = MotorMatrix::from_flat(30, 3, flat).unwrap();
        assert_eq!(back, t.motor);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(MotorMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(MotorMatrix::from_flat(2, 2, vec![0.0; 3]).is_err());
    }
}
