use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output nonlinearity of a head or of the latent MLP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    pub(crate) fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative expressed through the output value.
    pub(crate) fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtrnnArch {
    /// Fastest layer first.
    pub layer_sizes: Vec<usize>,
    pub timescales: Vec<f64>,
    pub latent_dim: usize,
    /// Hidden width of `p(z)`.
    pub pb_hidden: usize,
    /// Output width of `p(z)`, the top-down input of the slowest layer.
    pub pb_out: usize,
    pub motor_dim: usize,
    /// Zero makes the head affine.
    pub motor_hidden: usize,
    pub sensory_dim: usize,
    /// Zero makes the head affine.
    pub sensory_hidden: usize,
    pub steps: usize,
}

impl MtrnnArch {
    /// Desk-scale defaults: layers `[32, 12]`, timescales `(2, 10)`,
    /// 32-wide hidden layers everywhere.
    pub fn new(latent_dim: usize, motor_dim: usize, sensory_dim: usize, steps: usize) -> Self {
        Self {
            layer_sizes: vec![32, 12],
            timescales: vec![2.0, 10.0],
            latent_dim,
            pb_hidden: 32,
            pb_out: 12,
            motor_dim,
            motor_hidden: 32,
            sensory_dim,
            sensory_hidden: 32,
            steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.is_empty() {
            return Err(Error::InvalidArgument("at least one layer is required".into()));
        }
        if self.layer_sizes.len() != self.timescales.len() {
            return Err(Error::DimensionMismatch {
                context: "timescales",
                expected: self.layer_sizes.len(),
                actual: self.timescales.len(),
            });
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument("layer sizes must be positive".into()));
        }
        if let Some(t) = self.timescales.iter().find(|t| !(**t >= 1.0 && t.is_finite())) {
            return Err(Error::InvalidArgument(format!("timescale {t} must be at least 1")));
        }
        for (name, v) in [
            ("latent_dim", self.latent_dim),
            ("pb_hidden", self.pb_hidden),
            ("pb_out", self.pb_out),
            ("motor_dim", self.motor_dim),
            ("steps", self.steps),
        ] {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    pub fn layer_count(&self) -> usize {
        self.layer_sizes.len()
    }

    /// Width of the top-down input `u` of layer `i`.
    pub fn input_size(&self, i: usize) -> usize {
        self.layer_sizes.get(i + 1).copied().unwrap_or(self.pb_out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Span {
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub fn range(self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct MlpLayout {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub act: Activation,
    /// `hidden × input` and `hidden`; empty when `hidden == 0`.
    pub w1: Span,
    pub b1: Span,
    /// `output × (hidden or input)` and `output`.
    pub w2: Span,
    pub b2: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct LayerLayout {
    pub size: usize,
    pub input: usize,
    pub w: Span,
    pub u: Span,
    /// `size × size × input`, index `(k·size + l)·input + m`.
    pub a: Span,
    pub b: Span,
    pub ln_gain: Span,
    pub ln_bias: Span,
    pub g: Span,
    pub c: Span,
}

/// Offsets of every tensor inside the flat parameter vector, in storage
/// order: latent MLP, layers fastest first, motor head, sensory head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ParamLayout {
    pub pb: MlpLayout,
    pub layers: Vec<LayerLayout>,
    pub motor: MlpLayout,
    pub sensory: MlpLayout,
    pub total: usize,
}

struct Cursor(usize);

impl Cursor {
    fn take(&mut self, len: usize) -> Span {
        let s = Span { start: self.0, len };
        self.0 += len;
        s
    }

    fn mlp(&mut self, input: usize, hidden: usize, output: usize, act: Activation) -> MlpLayout {
        let w1 = self.take(hidden * input);
        let b1 = self.take(hidden);
        let inner = if hidden == 0 { input } else { hidden };
        let w2 = self.take(output * inner);
        let b2 = self.take(output);
        MlpLayout {
            input,
            hidden,
            output,
            act,
            w1,
            b1,
            w2,
            b2,
        }
    }
}

impl ParamLayout {
    pub fn new(arch: &MtrnnArch) -> Self {
        let mut cur = Cursor(0);
        let pb = cur.mlp(arch.latent_dim, arch.pb_hidden, arch.pb_out, Activation::Tanh);
        let layers = (0..arch.layer_count())
            .map(|i| {
                let n = arch.layer_sizes[i];
                let nu = arch.input_size(i);
                LayerLayout {
                    size: n,
                    input: nu,
                    w: cur.take(n * n),
                    u: cur.take(n * nu),
                    a: cur.take(n * n * nu),
                    b: cur.take(n),
                    ln_gain: cur.take(n),
                    ln_bias: cur.take(n),
                    g: cur.take(n * arch.pb_out),
                    c: cur.take(n),
                }
            })
            .collect();
        let top = arch.layer_sizes[0];
        let motor = cur.mlp(top, arch.motor_hidden, arch.motor_dim, Activation::Tanh);
        let sensory = cur.mlp(top, arch.sensory_hidden, arch.sensory_dim, Activation::Sigmoid);
        ParamLayout {
            pb,
            layers,
            motor,
            sensory,
            total: cur.0,
        }
    }

    /// Named tensors in storage order.
    pub fn groups(&self) -> Vec<(String, std::ops::Range<usize>)> {
        let mut out = Vec::new();
        let mlp = |prefix: &str, m: &MlpLayout, out: &mut Vec<(String, std::ops::Range<usize>)>| {
            for (name, s) in [("w1", m.w1), ("b1", m.b1), ("w2", m.w2), ("b2", m.b2)] {
                if s.len > 0 {
                    out.push((format!("{prefix}.{name}"), s.range()));
                }
            }
        };
        mlp("pb", &self.pb, &mut out);
        for (i, l) in self.layers.iter().enumerate() {
            for (name, s) in [
                ("W", l.w),
                ("U", l.u),
                ("A", l.a),
                ("b", l.b),
                ("ln_gain", l.ln_gain),
                ("ln_bias", l.ln_bias),
                ("G", l.g),
                ("c", l.c),
            ] {
                out.push((format!("layer{i}.{name}"), s.range()));
            }
        }
        mlp("motor", &self.motor, &mut out);
        mlp("sensory", &self.sensory, &mut out);
        out
    }
}
