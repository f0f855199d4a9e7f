use serde::{Deserialize, Serialize};

use super::{MotionDataset, MotorMatrix};
use crate::error::{Error, Result};

/// Observed range of one joint across the whole dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointRange {
    pub min: f64,
    pub max: f64,
    /// Set when `min == max`; such a joint is mapped to 0.
    #[serde(default)]
    pub constant: bool,
}

impl JointRange {
    fn forward(&self, x: f64) -> f64 {
        if self.constant {
            0.0
        } else {
            2.0 * (x - self.min) / (self.max - self.min) - 1.0
        }
    }

    fn inverse(&self, y: f64) -> f64 {
        if self.constant {
            self.min
        } else {
            self.min + (y + 1.0) * 0.5 * (self.max - self.min)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub joints: Vec<JointRange>,
}

impl NormalizationRecord {
    pub fn normalize(&self, motor: &mut MotorMatrix) {
        for t in 0..motor.steps() {
            for (j, range) in self.joints.iter().enumerate() {
                motor.set(t, j, range.forward(motor.get(t, j)));
            }
        }
    }

    pub fn denormalize(&self, motor: &mut MotorMatrix) {
        for t in 0..motor.steps() {
            for (j, range) in self.joints.iter().enumerate() {
                motor.set(t, j, range.inverse(motor.get(t, j)));
            }
        }
    }

    pub fn has_constant_joint(&self) -> bool {
        self.joints.iter().any(|j| j.constant)
    }
}

/// Maps every joint onto `[-1, 1]` using its range over all sequences.
pub fn normalize_joint_angles(mut raw: MotionDataset) -> Result<MotionDataset> {
    if raw.normalization.is_some() {
        return Err(Error::InvalidArgument("dataset is already normalized".into()));
    }
    let p = raw.joints();
    let mut ranges = vec![
        JointRange {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            constant: false,
        };
        p
    ];
    for s in &raw.samples {
        for t in 0..s.motor.steps() {
            for (j, r) in ranges.iter_mut().enumerate() {
                let v = s.motor.get(t, j);
                if !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("non-finite joint value {v}")));
                }
                r.min = r.min.min(v);
                r.max = r.max.max(v);
            }
        }
    }
    if raw.samples.is_empty() {
        return Err(Error::InvalidArgument("cannot normalize an empty dataset".into()));
    }
    for r in &mut ranges {
        r.constant = r.max <= r.min;
    }
    let record = NormalizationRecord { joints: ranges };
    for s in &mut raw.samples {
        record.normalize(&mut s.motor);
    }
    raw.normalization = Some(record);
    Ok(raw)
}

/// Maps normalized joint values back to radians.
pub fn denormalize_motor(record: &NormalizationRecord, motor: &MotorMatrix) -> MotorMatrix {
    let mut out = motor.clone();
    record.denormalize(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{ArmConfig, Trajectory};
    use std::f64::consts::PI;

    fn dataset(columns: &[[f64; 3]]) -> MotionDataset {
        // One joint per column entry, three timesteps.
        let mut arm = ArmConfig::default();
        arm.link_lengths.truncate(columns.len().clamp(2, 3));
        arm.joint_limits.truncate(arm.link_lengths.len());
        arm.steps = 3;
        let p = arm.link_lengths.len();
        let mut motor = MotorMatrix::zeros(3, p);
        for (j, col) in columns.iter().enumerate().take(p) {
            for (t, v) in col.iter().enumerate() {
                motor.set(t, j, *v);
            }
        }
        MotionDataset {
            arm,
            primitives: crate::trajectory::PrimitiveSpec::defaults()[..1].to_vec(),
            samples: vec![Trajectory {
                motor,
                sensory: vec![],
                primitive_id: 0,
                variation: vec![],
                key_points: vec![],
            }],
            normalization: None,
            seed: 0,
            rejections: vec![],
        }
    }

    #[test]
    fn endpoints_map_to_unit_interval() {
        let ds = normalize_joint_angles(dataset(&[[0.0, PI / 2.0, PI], [1.0, 2.0, 3.0]])).unwrap();
        let m = &ds.samples[0].motor;
        assert_eq!([m.get(0, 0), m.get(1, 0), m.get(2, 0)], [-1.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_joint_maps_to_zero_with_flag() {
        let ds = normalize_joint_angles(dataset(&[[0.3, 0.3, 0.3], [1.0, 2.0, 3.0]])).unwrap();
        let rec = ds.normalization.as_ref().unwrap();
        assert!(rec.joints[0].constant);
        assert!(!rec.joints[1].constant);
        let m = &ds.samples[0].motor;
        assert_eq!([m.get(0, 0), m.get(1, 0), m.get(2, 0)], [0.0, 0.0, 0.0]);
        let back = denormalize_motor(rec, m);
        assert_eq!(back.get(1, 0), 0.3);
    }

    #[test]
    fn double_normalization_rejected() {
        let ds = normalize_joint_angles(dataset(&[[0.0, 1.0, 2.0], [1.0, 2.0, 3.0]])).unwrap();
        assert!(normalize_joint_angles(ds).is_err());
    }
}
