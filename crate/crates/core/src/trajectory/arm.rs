use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point2 = [f64; 2];

/// Planar serial arm rooted at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmConfig {
    pub link_lengths: Vec<f64>,
    /// Per-joint `[lo, hi]` in radians.
    pub joint_limits: Vec<(f64, f64)>,
    /// Number of timesteps `T` per trajectory.
    pub steps: usize,
    pub height: usize,
    pub width: usize,
}

impl Default for ArmConfig {
    fn default() -> Self {
        use std::f64::consts::PI;
        Self {
            link_lengths: vec![0.5, 0.4, 0.25],
            joint_limits: vec![(-PI, PI), (-PI, 0.0), (-PI, PI)],
            steps: 30,
            height: 16,
            width: 16,
        }
    }
}

impl ArmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.link_lengths.is_empty() {
            return Err(Error::InvalidArgument("arm needs at least one link".into()));
        }
        if !(2..=3).contains(&self.link_lengths.len()) {
            return Err(Error::InvalidArgument(format!(
                "analytic IK supports 2 or 3 links, got {}",
                self.link_lengths.len()
            )));
        }
        if let Some(l) = self.link_lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidArgument(format!("link length {l} must be positive")));
        }
        if self.joint_limits.len() != self.link_lengths.len() {
            return Err(Error::DimensionMismatch {
                context: "joint_limits",
                expected: self.link_lengths.len(),
                actual: self.joint_limits.len(),
            });
        }
        for (j, (lo, hi)) in self.joint_limits.iter().enumerate() {
            if !(lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "joint {j}: limit lo {lo} must be below hi {hi}"
                )));
            }
        }
        if self.steps < 2 {
            return Err(Error::InvalidArgument("steps must be at least 2".into()));
        }
        if self.height < 8 || self.width < 8 {
            return Err(Error::InvalidArgument(format!(
                "image must be at least 8x8, got {}x{}",
                self.height, self.width
            )));
        }
        Ok(())
    }

    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum()
    }

    pub fn joints(&self) -> usize {
        self.link_lengths.len()
    }

    /// Positions of the base, every joint and the end effector.
    pub fn joint_positions(&self, angles: &[f64]) -> Vec<Point2> {
        let mut pts = Vec::with_capacity(angles.len() + 1);
        let (mut x, mut y, mut phi) = (0.0, 0.0, 0.0);
        pts.push([x, y]);
        for (len, a) in self.link_lengths.iter().zip(angles) {
            phi += a;
            x += len * phi.cos();
            y += len * phi.sin();
            pts.push([x, y]);
        }
        pts
    }

    pub fn end_effector(&self, angles: &[f64]) -> Point2 {
        *self.joint_positions(angles).last().expect("base point always present")
    }

    /// Analytic inverse kinematics with the tool pointing radially away from
    /// the base. Returns `None` when the point is out of reach or violates a
    /// joint limit.
    pub fn inverse_kinematics(&self, target: Point2) -> Option<Vec<f64>> {
        let heading = target[1].atan2(target[0]);
        let (l1, l2) = (self.link_lengths[0], self.link_lengths[1]);
        let wrist = match self.link_lengths.get(2) {
            Some(l3) => [target[0] - l3 * heading.cos(), target[1] - l3 * heading.sin()],
            None => target,
        };
        let r2 = wrist[0] * wrist[0] + wrist[1] * wrist[1];
        let c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
        if !(-1.0..=1.0).contains(&c2) {
            return None;
        }
        let q2 = -c2.acos();
        let q1 = wrist[1].atan2(wrist[0]) - (l2 * q2.sin()).atan2(l1 + l2 * q2.cos());
        let mut angles = vec![q1, q2];
        if self.link_lengths.len() == 3 {
            angles.push(heading - q1 - q2);
        }
        let within = angles
            .iter()
            .zip(&self.joint_limits)
            .all(|(a, (lo, hi))| *a >= *lo && *a <= *hi);
        within.then_some(angles)
    }

    /// Workspace window rendered into the image: `(x_min, y_min, x_span, y_span)`.
    pub(crate) fn view_box(&self) -> (f64, f64, f64, f64) {
        let r = self.reach();
        (-0.1 * r, -0.6 * r, 1.2 * r, 1.2 * r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ik_round_trips_through_fk() {
        let arm = ArmConfig::default();
        for target in [[0.6, 0.1], [0.45, -0.2], [0.8, 0.15], [0.4, 0.45]] {
            let q = arm.inverse_kinematics(target).expect("reachable");
            let ee = arm.end_effector(&q);
            assert!((ee[0] - target[0]).abs() < 1e-12 && (ee[1] - target[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_reach_is_none() {
        let arm = ArmConfig::default();
        assert!(arm.inverse_kinematics([3.0, 0.0]).is_none());
        assert!(arm.inverse_kinematics([0.0, 0.0]).is_none());
    }

    #[test]
    fn rest_pose_points_along_x() {
        let arm = ArmConfig::default();
        let ee = arm.end_effector(&[0.0, 0.0, 0.0]);
        assert!((ee[0] - 1.15).abs() < 1e-12 && ee[1].abs() < 1e-12);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut arm = ArmConfig::default();
        arm.joint_limits[1] = (0.5, 0.5);
        assert!(arm.validate().is_err());
        let mut arm = ArmConfig::default();
        arm.link_lengths.clear();
        arm.joint_limits.clear();
        assert!(arm.validate().is_err());
        let mut arm = ArmConfig::default();
        arm.height = 4;
        assert!(arm.validate().is_err());
        assert!(ArmConfig::default().validate().is_ok());
    }
}
