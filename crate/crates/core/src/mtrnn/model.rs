use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arch::{MlpLayout, MtrnnArch, ParamLayout, Span};
use crate::error::{Error, Result};
use crate::numeric::{matvec_add, matvec_t_add, outer_add, seeded_rng};
use crate::trajectory::{MotorMatrix, Trajectory};

pub const LN_EPS: f64 = 1e-12;

/// All trainable decoder parameters in one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MtrnnModel {
    arch: MtrnnArch,
    layout: ParamLayout,
    params: Vec<f64>,
}

impl MtrnnModel {
    pub fn from_params(arch: MtrnnArch, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let layout = ParamLayout::new(&arch);
        if params.len() != layout.total {
            return Err(Error::DimensionMismatch {
                context: "parameter vector",
                expected: layout.total,
                actual: params.len(),
            });
        }
        Ok(Self { arch, layout, params })
    }

    pub fn arch(&self) -> &MtrnnArch {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.layout.total
    }

    /// Named parameter tensors and their ranges in [`params`](Self::params).
    pub fn param_groups(&self) -> Vec<(String, std::ops::Range<usize>)> {
        self.layout.groups()
    }

    fn slice(&self, s: Span) -> &[f64] {
        &self.params[s.range()]
    }
}

/// Trainable latent matrix `Z`, one row per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCodes {
    n: usize,
    q: usize,
    data: Vec<f64>,
}

impl LatentCodes {
    pub fn zeros(n: usize, q: usize) -> Self {
        Self {
            n,
            q,
            data: vec![0.0; n * q],
        }
    }

    pub fn from_flat(n: usize, q: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * q {
            return Err(Error::DimensionMismatch {
                context: "latent matrix",
                expected: n * q,
                actual: data.len(),
            });
        }
        Ok(Self { n, q, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let q = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * q);
        for r in rows {
            if r.len() != q {
                return Err(Error::DimensionMismatch {
                    context: "latent rows",
                    expected: q,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n: rows.len(), q, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.q
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.q..(i + 1) * self.q]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.q..(i + 1) * self.q]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks_exact(self.q.max(1)).take(self.n).map(<[f64]>::to_vec).collect()
    }

    /// `q × n` matrix with samples as columns.
    pub fn to_columns(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.q, self.n, |i, j| self.data[j * self.q + i])
    }

    /// Rows `indices` in order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.q);
        for i in indices {
            data.extend_from_slice(self.row(*i));
        }
        Self {
            n: indices.len(),
            q: self.q,
            data,
        }
    }

    /// Stacks `self` on top of `other`.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.q != other.q {
            return Err(Error::DimensionMismatch {
                context: "latent width",
                expected: self.q,
                actual: other.q,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            n: self.n + other.n,
            q: self.q,
            data,
        })
    }
}

/// Scaled-Gaussian fan-in initialization. The multiplicative tensors, the
/// recurrent and initial-state biases and the head biases start at zero;
/// layer-norm gains at one. The latent MLP biases get a small random offset
/// so that `p(0)` is not the zero vector.
pub fn init_params(arch: &MtrnnArch, seed: u64) -> Result<MtrnnModel> {
    arch.validate()?;
    let layout = ParamLayout::new(arch);
    let mut params = vec![0.0; layout.total];
    let mut rng = seeded_rng(seed, 0);
    let mut gauss = |params: &mut [f64], s: Span, std: f64| {
        for v in &mut params[s.range()] {
            *v = std * rng.sample::<f64, _>(StandardNormal);
        }
    };
    let fan_in = |n: usize| 1.0 / (n.max(1) as f64).sqrt();

    let mlp_weights = |m: &MlpLayout| {
        let inner = if m.hidden == 0 { m.input } else { m.hidden };
        [(m.w1, fan_in(m.input)), (m.w2, fan_in(inner))]
    };
    for (s, std) in mlp_weights(&layout.pb) {
        gauss(&mut params, s, std);
    }
    gauss(&mut params, layout.pb.b1, 0.5);
    gauss(&mut params, layout.pb.b2, 0.5);
    for l in &layout.layers {
        gauss(&mut params, l.w, fan_in(l.size));
        gauss(&mut params, l.u, fan_in(l.input));
        gauss(&mut params, l.g, fan_in(arch.pb_out));
        params[l.ln_gain.range()].fill(1.0);
    }
    for head in [&layout.motor, &layout.sensory] {
        for (s, std) in mlp_weights(head) {
            gauss(&mut params, s, std);
        }
    }
    Ok(MtrnnModel {
        arch: arch.clone(),
        layout,
        params,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// `states[layer][t]` for `t = 0..=T`; `t = 0` is the initial state.
    pub states: Vec<Vec<Vec<f64>>>,
    pub motor: MotorMatrix,
    /// `T × sensory_dim`, row-major.
    pub sensory: Vec<f64>,
}

struct MlpCache {
    hidden: Vec<f64>,
    out: Vec<f64>,
}

fn mlp_forward(params: &[f64], m: &MlpLayout, x: &[f64]) -> MlpCache {
    let mut out = params[m.b2.range()].to_vec();
    if m.hidden == 0 {
        matvec_add(&params[m.w2.range()], x, &mut out);
        out.iter_mut().for_each(|v| *v = m.act.apply(*v));
        return MlpCache { hidden: Vec::new(), out };
    }
    let mut hidden = params[m.b1.range()].to_vec();
    matvec_add(&params[m.w1.range()], x, &mut hidden);
    hidden.iter_mut().for_each(|v| *v = v.tanh());
    matvec_add(&params[m.w2.range()], &hidden, &mut out);
    out.iter_mut().for_each(|v| *v = m.act.apply(*v));
    MlpCache { hidden, out }
}

/// `gout` is the gradient with respect to the MLP output.
fn mlp_backward(
    params: &[f64],
    m: &MlpLayout,
    x: &[f64],
    cache: &MlpCache,
    gout: &[f64],
    grads: Option<&mut [f64]>,
    gx: &mut [f64],
) {
    let d2: Vec<f64> = gout.iter().zip(&cache.out).map(|(g, y)| g * m.act.slope(*y)).collect();
    let inner = if m.hidden == 0 { x } else { &cache.hidden };
    let mut grads = grads;
    if let Some(g) = grads.as_deref_mut() {
        outer_add(&mut g[m.w2.range()], &d2, inner);
        add_into(&mut g[m.b2.range()], &d2);
    }
    if m.hidden == 0 {
        matvec_t_add(&params[m.w2.range()], &d2, gx);
        return;
    }
    let mut gh = vec![0.0; m.hidden];
    matvec_t_add(&params[m.w2.range()], &d2, &mut gh);
    let d1: Vec<f64> = gh.iter().zip(&cache.hidden).map(|(g, h)| g * (1.0 - h * h)).collect();
    if let Some(g) = grads {
        outer_add(&mut g[m.w1.range()], &d1, x);
        add_into(&mut g[m.b1.range()], &d1);
    }
    matvec_t_add(&params[m.w1.range()], &d1, gx);
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Normalizes `x` into `xhat` and returns `1/σ`.
fn layer_norm(x: &[f64], xhat: &mut [f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_std = 1.0 / (var + LN_EPS).sqrt();
    for (o, v) in xhat.iter_mut().zip(x) {
        *o = (v - mean) * inv_std;
    }
    inv_std
}

/// Gradient with respect to the LN input given the gradient `gxhat` with
/// respect to the normalized vector.
fn layer_norm_backward(gxhat: &[f64], xhat: &[f64], inv_std: f64) -> Vec<f64> {
    let n = gxhat.len() as f64;
    let mean_g = gxhat.iter().sum::<f64>() / n;
    let mean_gx = gxhat.iter().zip(xhat).map(|(g, x)| g * x).sum::<f64>() / n;
    gxhat
        .iter()
        .zip(xhat)
        .map(|(g, x)| inv_std * (g - mean_g - x * mean_gx))
        .collect()
}

struct Trace {
    pb: MlpCache,
    /// Per layer, `(T+1) · n` flattened states, normalized pre-gain values
    /// and one inverse standard deviation per step.
    states: Vec<Vec<f64>>,
    xhat: Vec<Vec<f64>>,
    inv_std: Vec<Vec<f64>>,
    motor: Vec<MlpCache>,
    sensory: Vec<MlpCache>,
}

fn check_finite(v: &[f64], step: usize, layer: usize, stage: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step, layer, stage })
    }
}

fn run_forward(model: &MtrnnModel, z: &[f64]) -> Result<Trace> {
    let arch = &model.arch;
    let lay = &model.layout;
    if z.len() != arch.latent_dim {
        return Err(Error::DimensionMismatch {
            context: "latent vector",
            expected: arch.latent_dim,
            actual: z.len(),
        });
    }
    check_finite(z, 0, arch.layer_count(), "latent input")?;
    let steps = arch.steps;
    let nl = arch.layer_count();
    let pb = mlp_forward(&model.params, &lay.pb, z);
    check_finite(&pb.out, 0, nl, "latent MLP")?;

    let mut states: Vec<Vec<f64>> = lay.layers.iter().map(|l| vec![0.0; (steps + 1) * l.size]).collect();
    let mut xhat = states.clone();
    let mut inv_std: Vec<Vec<f64>> = vec![vec![0.0; steps + 1]; nl];

    for (i, l) in lay.layers.iter().enumerate() {
        let n = l.size;
        let mut x = model.slice(l.c).to_vec();
        matvec_add(model.slice(l.g), &pb.out, &mut x);
        inv_std[i][0] = layer_norm(&x, &mut xhat[i][..n]);
        let (gain, bias) = (model.slice(l.ln_gain), model.slice(l.ln_bias));
        for k in 0..n {
            states[i][k] = gain[k] * xhat[i][k] + bias[k];
        }
        check_finite(&states[i][..n], 0, i, "initial state")?;
    }

    let mut pre = Vec::new();
    let mut h = Vec::new();
    for t in 1..=steps {
        for i in (0..nl).rev() {
            let l = &lay.layers[i];
            let (n, nu) = (l.size, l.input);
            let leak = 1.0 / arch.timescales[i];
            let (below, above) = states.split_at_mut(i + 1);
            let cur = &mut below[i];
            let u: &[f64] = if i + 1 < nl {
                &above[0][t * nu..(t + 1) * nu]
            } else {
                &pb.out
            };
            let (past, now) = cur.split_at_mut(t * n);
            let d_prev = &past[(t - 1) * n..];

            pre.clear();
            pre.extend_from_slice(model.slice(l.b));
            matvec_add(model.slice(l.w), d_prev, &mut pre);
            matvec_add(model.slice(l.u), u, &mut pre);
            let a = model.slice(l.a);
            for k in 0..n {
                let mut acc = 0.0;
                for (ll, dl) in d_prev.iter().enumerate() {
                    let row = &a[(k * n + ll) * nu..(k * n + ll + 1) * nu];
                    acc += dl * row.iter().zip(u).map(|(x, y)| x * y).sum::<f64>();
                }
                pre[k] += acc;
            }
            h.clear();
            h.extend(d_prev.iter().zip(&pre).map(|(d, p)| (1.0 - leak) * d + leak * p));
            check_finite(&h, t, i, "leaky update")?;
            let xh = &mut xhat[i][t * n..(t + 1) * n];
            inv_std[i][t] = layer_norm(&h, xh);
            let (gain, bias) = (model.slice(l.ln_gain), model.slice(l.ln_bias));
            for k in 0..n {
                now[k] = gain[k] * xh[k] + bias[k];
            }
            check_finite(&now[..n], t, i, "layer norm")?;
        }
    }

    let n0 = lay.layers[0].size;
    let mut motor = Vec::with_capacity(steps);
    let mut sensory = Vec::with_capacity(steps);
    for t in 1..=steps {
        let d = &states[0][t * n0..(t + 1) * n0];
        let m = mlp_forward(&model.params, &lay.motor, d);
        check_finite(&m.out, t, 0, "motor head")?;
        let s = mlp_forward(&model.params, &lay.sensory, d);
        check_finite(&s.out, t, 0, "sensory head")?;
        motor.push(m);
        sensory.push(s);
    }
    Ok(Trace {
        pb,
        states,
        xhat,
        inv_std,
        motor,
        sensory,
    })
}

/// Unrolls the decoder for `T` steps from latent code `z`.
pub fn forward(model: &MtrnnModel, z: &[f64]) -> Result<ForwardOutput> {
    let trace = run_forward(model, z)?;
    let arch = &model.arch;
    let states = trace
        .states
        .iter()
        .zip(&arch.layer_sizes)
        .map(|(s, n)| s.chunks_exact(*n).map(<[f64]>::to_vec).collect())
        .collect();
    let motor_flat: Vec<f64> = trace.motor.iter().flat_map(|m| m.out.iter().copied()).collect();
    let motor = MotorMatrix::from_flat(arch.steps, arch.motor_dim, motor_flat)?;
    let sensory = trace.sensory.iter().flat_map(|s| s.out.iter().copied()).collect();
    Ok(ForwardOutput { states, motor, sensory })
}

/// Per-modality loss weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub motor: f64,
    pub sensory: f64,
}

impl LossWeights {
    /// `w_m = 1`, `w_s = p / (H·W)` so that both sums have comparable scale.
    pub fn balanced(arch: &MtrnnArch) -> Self {
        let sensory = if arch.sensory_dim == 0 {
            0.0
        } else {
            arch.motor_dim as f64 / arch.sensory_dim as f64
        };
        Self { motor: 1.0, sensory }
    }
}

fn check_target(arch: &MtrnnArch, traj: &Trajectory) -> Result<()> {
    if traj.motor.steps() != arch.steps {
        return Err(Error::DimensionMismatch {
            context: "trajectory length",
            expected: arch.steps,
            actual: traj.motor.steps(),
        });
    }
    if traj.motor.joints() != arch.motor_dim {
        return Err(Error::DimensionMismatch {
            context: "motor width",
            expected: arch.motor_dim,
            actual: traj.motor.joints(),
        });
    }
    if traj.sensory.len() != arch.steps * arch.sensory_dim {
        return Err(Error::DimensionMismatch {
            context: "sensory frames",
            expected: arch.steps * arch.sensory_dim,
            actual: traj.sensory.len(),
        });
    }
    Ok(())
}

fn trace_loss(arch: &MtrnnArch, trace: &Trace, traj: &Trajectory, w: LossWeights) -> f64 {
    let sd = arch.sensory_dim;
    let mut motor = 0.0;
    let mut sensory = 0.0;
    for t in 0..arch.steps {
        for (y, m) in trace.motor[t].out.iter().zip(traj.motor.row(t)) {
            motor += (y - m) * (y - m);
        }
        if w.sensory != 0.0 {
            for (y, s) in trace.sensory[t].out.iter().zip(&traj.sensory[t * sd..(t + 1) * sd]) {
                let e = y - *s as f64;
                sensory += e * e;
            }
        }
    }
    w.motor * motor + w.sensory * sensory
}

/// Which gradients to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradMode {
    /// Parameters and latent codes.
    Full,
    /// Latent codes only; parameters are treated as constants.
    LatentOnly,
}

/// Reverse pass through one unrolled sample. Returns the parameter
/// gradient (when requested) and the latent gradient.
fn run_backward(
    model: &MtrnnModel,
    z: &[f64],
    trace: &Trace,
    traj: &Trajectory,
    w: LossWeights,
    mode: GradMode,
) -> (Option<Vec<f64>>, Vec<f64>) {
    let arch = &model.arch;
    let lay = &model.layout;
    let params = &model.params;
    let nl = arch.layer_count();
    let sd = arch.sensory_dim;
    let mut grads = match mode {
        GradMode::Full => Some(vec![0.0; lay.total]),
        GradMode::LatentOnly => None,
    };

    let mut gd_cur: Vec<Vec<f64>> = lay.layers.iter().map(|l| vec![0.0; l.size]).collect();
    let mut gd_next = gd_cur.clone();
    let mut gp = vec![0.0; arch.pb_out];
    let n0 = lay.layers[0].size;

    for t in (1..=arch.steps).rev() {
        let d = &trace.states[0][t * n0..(t + 1) * n0];
        let mc = &trace.motor[t - 1];
        let gm: Vec<f64> = mc
            .out
            .iter()
            .zip(traj.motor.row(t - 1))
            .map(|(y, m)| 2.0 * w.motor * (y - m))
            .collect();
        mlp_backward(params, &lay.motor, d, mc, &gm, grads.as_deref_mut(), &mut gd_cur[0]);
        if w.sensory != 0.0 {
            let sc = &trace.sensory[t - 1];
            let gs: Vec<f64> = sc
                .out
                .iter()
                .zip(&traj.sensory[(t - 1) * sd..t * sd])
                .map(|(y, s)| 2.0 * w.sensory * (y - *s as f64))
                .collect();
            mlp_backward(params, &lay.sensory, d, sc, &gs, grads.as_deref_mut(), &mut gd_cur[0]);
        }

        for i in 0..nl {
            let l = &lay.layers[i];
            let (n, nu) = (l.size, l.input);
            let leak = 1.0 / arch.timescales[i];
            let xh = &trace.xhat[i][t * n..(t + 1) * n];
            let gain = &params[l.ln_gain.range()];
            let gd = &gd_cur[i];
            if let Some(g) = grads.as_deref_mut() {
                add_into(&mut g[l.ln_bias.range()], gd);
                for (gg, (a, b)) in g[l.ln_gain.range()].iter_mut().zip(gd.iter().zip(xh)) {
                    *gg += a * b;
                }
            }
            let gxhat: Vec<f64> = gd.iter().zip(gain).map(|(a, b)| a * b).collect();
            let gh = layer_norm_backward(&gxhat, xh, trace.inv_std[i][t]);
            let gpre: Vec<f64> = gh.iter().map(|g| g * leak).collect();

            let d_prev = &trace.states[i][(t - 1) * n..t * n];
            let u: &[f64] = if i + 1 < nl {
                &trace.states[i + 1][t * nu..(t + 1) * nu]
            } else {
                &trace.pb.out
            };
            let gprev = &mut gd_next[i];
            for (o, g) in gprev.iter_mut().zip(&gh) {
                *o = (1.0 - leak) * g;
            }
            matvec_t_add(&params[l.w.range()], &gpre, gprev);
            let mut gu = vec![0.0; nu];
            matvec_t_add(&params[l.u.range()], &gpre, &mut gu);
            let a = &params[l.a.range()];
            match grads.as_deref_mut() {
                Some(g) => {
                    outer_add(&mut g[l.w.range()], &gpre, d_prev);
                    outer_add(&mut g[l.u.range()], &gpre, u);
                    add_into(&mut g[l.b.range()], &gpre);
                    let ga = &mut g[l.a.range()];
                    for k in 0..n {
                        let gk = gpre[k];
                        for ll in 0..n {
                            let c = gk * d_prev[ll];
                            let off = (k * n + ll) * nu;
                            let row = &a[off..off + nu];
                            let mut au = 0.0;
                            for m in 0..nu {
                                au += row[m] * u[m];
                                gu[m] += c * row[m];
                                ga[off + m] += c * u[m];
                            }
                            gprev[ll] += gk * au;
                        }
                    }
                }
                None => {
                    for k in 0..n {
                        let gk = gpre[k];
                        for ll in 0..n {
                            let c = gk * d_prev[ll];
                            let off = (k * n + ll) * nu;
                            let row = &a[off..off + nu];
                            let mut au = 0.0;
                            for m in 0..nu {
                                au += row[m] * u[m];
                                gu[m] += c * row[m];
                            }
                            gprev[ll] += gk * au;
                        }
                    }
                }
            }
            if i + 1 < nl {
                add_into(&mut gd_cur[i + 1], &gu);
            } else {
                add_into(&mut gp, &gu);
            }
        }
        std::mem::swap(&mut gd_cur, &mut gd_next);
    }

    for (i, l) in lay.layers.iter().enumerate() {
        let n = l.size;
        let xh = &trace.xhat[i][..n];
        let gd = &gd_cur[i];
        let gain = &params[l.ln_gain.range()];
        if let Some(g) = grads.as_deref_mut() {
            add_into(&mut g[l.ln_bias.range()], gd);
            for (gg, (a, b)) in g[l.ln_gain.range()].iter_mut().zip(gd.iter().zip(xh)) {
                *gg += a * b;
            }
        }
        let gxhat: Vec<f64> = gd.iter().zip(gain).map(|(a, b)| a * b).collect();
        let gx = layer_norm_backward(&gxhat, xh, trace.inv_std[i][0]);
        if let Some(g) = grads.as_deref_mut() {
            outer_add(&mut g[l.g.range()], &gx, &trace.pb.out);
            add_into(&mut g[l.c.range()], &gx);
        }
        matvec_t_add(&params[l.g.range()], &gx, &mut gp);
    }

    let mut gz = vec![0.0; arch.latent_dim];
    mlp_backward(params, &lay.pb, z, &trace.pb, &gp, grads.as_deref_mut(), &mut gz);
    (grads, gz)
}

fn check_batch(latent: &LatentCodes, batch: &[(usize, &Trajectory)], model: &MtrnnModel) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("batch is empty".into()));
    }
    if latent.dim() != model.arch.latent_dim {
        return Err(Error::DimensionMismatch {
            context: "latent width",
            expected: model.arch.latent_dim,
            actual: latent.dim(),
        });
    }
    for (idx, traj) in batch {
        if *idx >= latent.len() {
            return Err(Error::InvalidArgument(format!(
                "sample index {idx} is out of range for {} latent codes",
                latent.len()
            )));
        }
        check_target(&model.arch, traj)?;
    }
    Ok(())
}

/// Per-sample losses of `batch`, in batch order.
pub fn sample_losses(
    model: &MtrnnModel,
    latent: &LatentCodes,
    batch: &[(usize, &Trajectory)],
    weights: LossWeights,
) -> Result<Vec<f64>> {
    check_batch(latent, batch, model)?;
    batch
        .par_iter()
        .map(|(idx, traj)| {
            let trace = run_forward(model, latent.row(*idx))?;
            Ok(trace_loss(&model.arch, &trace, traj, weights))
        })
        .collect()
}

/// `Σ_i w_m‖m̂ − m_i‖² + w_s‖ŝ − s_i‖²` over the batch.
pub fn loss(
    model: &MtrnnModel,
    latent: &LatentCodes,
    batch: &[(usize, &Trajectory)],
    weights: LossWeights,
) -> Result<f64> {
    Ok(sample_losses(model, latent, batch, weights)?.iter().sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    /// Loss of each batch entry, in batch order.
    pub sample_losses: Vec<f64>,
    /// Same layout as [`MtrnnModel::params`]; `None` for [`GradMode::LatentOnly`].
    pub params: Option<Vec<f64>>,
    /// One entry per distinct batch index, sorted by index.
    pub latent: Vec<(usize, Vec<f64>)>,
}

impl Gradients {
    pub fn latent_row(&self, index: usize) -> Option<&[f64]> {
        self.latent
            .binary_search_by_key(&index, |(i, _)| *i)
            .ok()
            .map(|p| self.latent[p].1.as_slice())
    }
}

/// Exact reverse-mode gradients of [`loss`]. Samples are processed in
/// parallel and reduced in batch order, so the result does not depend on
/// the thread count.
pub fn gradients(
    model: &MtrnnModel,
    latent: &LatentCodes,
    batch: &[(usize, &Trajectory)],
    weights: LossWeights,
    mode: GradMode,
) -> Result<Gradients> {
    check_batch(latent, batch, model)?;
    let per_sample: Vec<(f64, Option<Vec<f64>>, Vec<f64>)> = batch
        .par_iter()
        .map(|(idx, traj)| {
            let z = latent.row(*idx);
            let trace = run_forward(model, z)?;
            let l = trace_loss(&model.arch, &trace, traj, weights);
            let (gp, gz) = run_backward(model, z, &trace, traj, weights, mode);
            Ok((l, gp, gz))
        })
        .collect::<Result<_>>()?;

    let mut total = 0.0;
    let mut sample_losses = Vec::with_capacity(batch.len());
    let mut params = match mode {
        GradMode::Full => Some(vec![0.0; model.layout.total]),
        GradMode::LatentOnly => None,
    };
    let mut latent_grads: Vec<(usize, Vec<f64>)> = Vec::new();
    for ((idx, _), (l, gp, gz)) in batch.iter().zip(per_sample) {
        total += l;
        sample_losses.push(l);
        if let (Some(acc), Some(g)) = (params.as_mut(), gp) {
            add_into(acc, &g);
        }
        match latent_grads.binary_search_by_key(idx, |(i, _)| *i) {
            Ok(p) => add_into(&mut latent_grads[p].1, &gz),
            Err(p) => latent_grads.insert(p, (*idx, gz)),
        }
    }
    Ok(Gradients {
        loss: total,
        sample_losses,
        params,
        latent: latent_grads,
    })
}
