use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

fn adam_update(cfg: &AdamConfig, lr: f64, step: u64, p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]) {
    let bc1 = 1.0 - cfg.beta1.powi(step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(step as i32);
    for i in 0..p.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let mhat = m[i] / bc1;
        let vhat = v[i] / bc2;
        p[i] -= lr * mhat / (vhat.sqrt() + cfg.eps);
    }
}

/// Dense Adam state for one parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, lr: f64, len: usize) -> Self {
        Self {
            cfg,
            lr,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        adam_update(&self.cfg, self.lr, self.step, params, grad, &mut self.m, &mut self.v);
    }
}

/// Row-sparse Adam: each row keeps its own step counter and is only
/// touched when it receives a gradient.
#[derive(Debug, Clone)]
pub struct RowAdam {
    cfg: AdamConfig,
    lr: f64,
    width: usize,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: Vec<u64>,
}

impl RowAdam {
    pub fn new(cfg: AdamConfig, lr: f64, rows: usize, width: usize) -> Self {
        Self {
            cfg,
            lr,
            width,
            m: vec![0.0; rows * width],
            v: vec![0.0; rows * width],
            steps: vec![0; rows],
        }
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step_row(&mut self, row: usize, params: &mut [f64], grad: &[f64]) {
        self.steps[row] += 1;
        let r = row * self.width..(row + 1) * self.width;
        adam_update(&self.cfg, self.lr, self.steps[row], params, grad, &mut self.m[r.clone()], &mut self.v[r]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = vec![1.0, -2.0];
        let mut opt = Adam::new(AdamConfig::default(), 0.1, 2);
        opt.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.9).abs() < 1e-7);
        assert!((p[1] + 1.9).abs() < 1e-7);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = vec![5.0];
        let mut opt = Adam::new(AdamConfig::default(), 0.05, 1);
        for _ in 0..2000 {
            let g = [2.0 * (p[0] - 1.5)];
            opt.step(&mut p, &g);
        }
        assert!((p[0] - 1.5).abs() < 1e-3);
    }

    #[test]
    fn rows_track_their_own_steps() {
        let mut opt = RowAdam::new(AdamConfig::default(), 0.1, 2, 1);
        let mut a = [0.0];
        opt.step_row(1, &mut a, &[1.0]);
        assert!((a[0] + 0.1).abs() < 1e-7);
        let mut b = [0.0];
        opt.step_row(0, &mut b, &[1.0]);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut p = vec![0.25, 0.5];
        let mut opt = Adam::new(AdamConfig::default(), 0.0, 2);
        opt.step(&mut p, &[1.0, 1.0]);
        assert_eq!(p, vec![0.25, 0.5]);
    }
}
