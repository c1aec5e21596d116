//! Adam with a step-decay learning-rate schedule.

use crate::tape::Matrix;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    steps: u64,
}

impl Adam {
    pub fn new(shapes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let (m, v) = shapes
            .into_iter()
            .map(|s| (Matrix::zeros(s), Matrix::zeros(s)))
            .unzip();
        Self { m, v, steps: 0 }
    }

    /// One update. `lr[i]` is the step size for parameter `i`.
    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix], lr: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.steps += 1;
        let c1 = 1.0 - BETA1.powi(self.steps as i32);
        let c2 = 1.0 - BETA2.powi(self.steps as i32);
        for i in 0..params.len() {
            let rate = lr[i];
            ndarray::Zip::from(&mut params[i])
                .and(&mut self.m[i])
                .and(&mut self.v[i])
                .and(&grads[i])
                .for_each(|p, m, v, &g| {
                    *m = BETA1 * *m + (1.0 - BETA1) * g;
                    *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                    let mh = *m / c1;
                    let vh = *v / c2;
                    *p -= rate * mh / (vh.sqrt() + EPS);
                });
        }
    }
}

/// Learning rate for `epoch` (0-based) under step decay.
pub fn scheduled_rate(base: f64, epoch: usize, step: usize, factor: f64) -> f64 {
    base * factor.powi((epoch / step) as i32)
}
