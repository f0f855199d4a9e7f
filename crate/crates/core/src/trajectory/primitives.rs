use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::arm::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrimitiveKind {
    TouchAndStop,
    PushAway,
    PullBack,
    CircleAround,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 4] = [
        PrimitiveKind::TouchAndStop,
        PrimitiveKind::PushAway,
        PrimitiveKind::PullBack,
        PrimitiveKind::CircleAround,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveKind::TouchAndStop => "touch-and-stop",
            PrimitiveKind::PushAway => "push-away",
            PrimitiveKind::PullBack => "pull-back",
            PrimitiveKind::CircleAround => "circle-around",
        }
    }
}

/// A family of end-effector paths parameterized by block position and size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveSpec {
    pub kind: PrimitiveKind,
    #[serde(default = "default_x_range")]
    pub target_x: (f64, f64),
    #[serde(default = "default_y_range")]
    pub target_y: (f64, f64),
    #[serde(default = "default_size_range")]
    pub object_size: (f64, f64),
    /// Fixed end-effector position every motion starts from.
    #[serde(default = "default_start")]
    pub start: Point2,
}

fn default_x_range() -> (f64, f64) {
    (0.6, 0.72)
}
fn default_y_range() -> (f64, f64) {
    (-0.1, 0.1)
}
fn default_size_range() -> (f64, f64) {
    (0.04, 0.07)
}
fn default_start() -> Point2 {
    [0.4, 0.45]
}

impl PrimitiveSpec {
    pub fn new(kind: PrimitiveKind) -> Self {
        Self {
            kind,
            target_x: default_x_range(),
            target_y: default_y_range(),
            object_size: default_size_range(),
            start: default_start(),
        }
    }

    /// The four default primitives.
    pub fn defaults() -> Vec<Self> {
        PrimitiveKind::ALL.iter().map(|k| Self::new(*k)).collect()
    }

    pub(crate) fn path(&self, target: Point2, size: f64) -> EePath {
        EePath::build(self.kind, self.start, target, size)
    }
}

/// Scripted end-effector position at a given frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyPoint {
    pub frame: usize,
    pub position: Point2,
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Line { from: Point2, to: Point2 },
    Arc { center: Point2, radius: f64, from_angle: f64, sweep: f64 },
}

impl Shape {
    fn at(&self, s: f64) -> Point2 {
        match *self {
            Shape::Line { from, to } => [from[0] + s * (to[0] - from[0]), from[1] + s * (to[1] - from[1])],
            Shape::Arc { center, radius, from_angle, sweep } => {
                let a = from_angle + s * sweep;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Phase {
    t0: f64,
    t1: f64,
    shape: Shape,
    /// Whether the block travels with the end effector during this phase.
    carries_object: bool,
}

/// Piecewise minimum-jerk end-effector path over normalized time `[0, 1]`.
#[derive(Debug, Clone)]
pub(crate) struct EePath {
    phases: Vec<Phase>,
    key_times: Vec<f64>,
    object: Point2,
}

fn min_jerk(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

fn add(a: Point2, b: Point2, k: f64) -> Point2 {
    [a[0] + k * b[0], a[1] + k * b[1]]
}

impl EePath {
    fn build(kind: PrimitiveKind, start: Point2, target: Point2, size: f64) -> Self {
        let norm = (target[0] * target[0] + target[1] * target[1]).sqrt().max(1e-12);
        let radial = [target[0] / norm, target[1] / norm];
        let line = |t0, t1, from, to| Phase {
            t0,
            t1,
            shape: Shape::Line { from, to },
            carries_object: false,
        };
        let (phases, key_times) = match kind {
            PrimitiveKind::TouchAndStop => {
                let approach = add(target, radial, -(size + 0.1));
                let contact = add(target, radial, -size);
                (
                    vec![line(0.0, 0.4, start, approach), line(0.4, 0.65, approach, contact)],
                    vec![0.65, 1.0],
                )
            }
            PrimitiveKind::PushAway => {
                let approach = add(target, radial, -(size + 0.1));
                let contact = add(target, radial, -size);
                let end = add(contact, radial, 0.15);
                let mut push = line(0.5, 0.9, contact, end);
                push.carries_object = true;
                (
                    vec![line(0.0, 0.35, start, approach), line(0.35, 0.5, approach, contact), push],
                    vec![0.5, 0.9],
                )
            }
            PrimitiveKind::PullBack => {
                let approach = add(target, radial, size + 0.1);
                let contact = add(target, radial, size);
                let end = add(contact, radial, -0.15);
                let mut pull = line(0.55, 0.9, contact, end);
                pull.carries_object = true;
                (
                    vec![line(0.0, 0.4, start, approach), line(0.4, 0.55, approach, contact), pull],
                    vec![0.55, 0.9],
                )
            }
            PrimitiveKind::CircleAround => {
                let radius = size + 0.06;
                let approach = add(target, radial, -radius);
                let from_angle = (-radial[1]).atan2(-radial[0]);
                let arc = Phase {
                    t0: 0.3,
                    t1: 0.95,
                    shape: Shape::Arc {
                        center: target,
                        radius,
                        from_angle,
                        sweep: -2.0 * PI,
                    },
                    carries_object: false,
                };
                (
                    vec![line(0.0, 0.3, start, approach), arc],
                    vec![0.3 + 0.65 * 0.25, 0.3 + 0.65 * 0.5, 0.3 + 0.65 * 0.75],
                )
            }
        };
        Self {
            phases,
            key_times,
            object: target,
        }
    }

    fn phase_at(&self, t: f64) -> (&Phase, f64) {
        let last = self.phases.last().expect("paths have at least one phase");
        for ph in &self.phases {
            if t < ph.t1 {
                let s = ((t - ph.t0) / (ph.t1 - ph.t0)).max(0.0);
                return (ph, min_jerk(s));
            }
        }
        (last, 1.0)
    }

    pub(crate) fn position(&self, t: f64) -> Point2 {
        let (ph, s) = self.phase_at(t);
        ph.shape.at(s)
    }

    /// Block center at time `t`; the block moves rigidly with the end
    /// effector while it is pushed or pulled.
    pub(crate) fn object_position(&self, t: f64) -> Point2 {
        let mut offset = [0.0, 0.0];
        for ph in self.phases.iter().filter(|p| p.carries_object) {
            if t <= ph.t0 {
                continue;
            }
            let s = if t >= ph.t1 { 1.0 } else { min_jerk((t - ph.t0) / (ph.t1 - ph.t0)) };
            let a = ph.shape.at(0.0);
            let b = ph.shape.at(s);
            offset[0] += b[0] - a[0];
            offset[1] += b[1] - a[1];
        }
        [self.object[0] + offset[0], self.object[1] + offset[1]]
    }

    pub(crate) fn key_times(&self) -> &[f64] {
        &self.key_times
    }

    /// Densely sampled positions used for reachability screening.
    pub(crate) fn probe_points(&self, samples: usize) -> impl Iterator<Item = Point2> + '_ {
        (0..=samples).map(move |i| self.position(i as f64 / samples as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_start_at_start_and_hit_key_points() {
        for kind in PrimitiveKind::ALL {
            let spec = PrimitiveSpec::new(kind);
            let path = spec.path([0.65, 0.05], 0.05);
            let p0 = path.position(0.0);
            assert!((p0[0] - 0.4).abs() < 1e-12 && (p0[1] - 0.45).abs() < 1e-12, "{kind:?}");
            assert!(!path.key_times().is_empty());
        }
    }

    #[test]
    fn circle_returns_to_approach_point() {
        let spec = PrimitiveSpec::new(PrimitiveKind::CircleAround);
        let path = spec.path([0.7, 0.0], 0.04);
        let a = path.position(0.3);
        let b = path.position(0.95);
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
        assert!((a[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn pushed_block_follows_effector() {
        let spec = PrimitiveSpec::new(PrimitiveKind::PushAway);
        let path = spec.path([0.7, 0.0], 0.04);
        assert_eq!(path.object_position(0.2), [0.7, 0.0]);
        let end = path.object_position(1.0);
        assert!((end[0] - 0.85).abs() < 1e-12 && end[1].abs() < 1e-12);
    }

    #[test]
    fn kind_names_round_trip_through_serde() {
        for kind in PrimitiveKind::ALL {
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.name()));
            let back: PrimitiveKind = serde_json::from_str(&json).unwrap();
            assert_eq!(back, kind);
        }
    }
}
