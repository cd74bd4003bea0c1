use serde::{Deserialize, Serialize};

use super::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub base_lr: f64,
    /// Horizon of the cosine schedule, in epochs.
    pub total_epochs: usize,
}

impl AdamConfig {
    pub fn new(base_lr: f64, total_epochs: usize) -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            base_lr,
            total_epochs,
        }
    }
}

/// `base · ½(1 + cos(π · epoch / total))`, clamped to 0 past the horizon.
pub fn cosine_learning_rate(base_lr: f64, epoch: usize, total_epochs: usize) -> f64 {
    if total_epochs == 0 {
        return base_lr;
    }
    let progress = (epoch as f64 / total_epochs as f64).min(1.0);
    base_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Adam with bias correction. Moments are kept per parameter tensor and
/// updated in f64 before being stored back at the parameter precision.
#[derive(Clone, Debug)]
pub struct Adam<F> {
    config: AdamConfig,
    step: u64,
    first: Vec<Vec<F>>,
    second: Vec<Vec<F>>,
}

impl<F: Scalar> Adam<F> {
    /// One moment buffer per tensor, sized from `lengths`.
    pub fn new(config: AdamConfig, lengths: impl IntoIterator<Item = usize>) -> Self {
        let (first, second) = lengths
            .into_iter()
            .map(|n| (vec![F::zero(); n], vec![F::zero(); n]))
            .unzip();
        Adam {
            config,
            step: 0,
            first,
            second,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn learning_rate(&self, epoch: usize) -> f64 {
        cosine_learning_rate(self.config.base_lr, epoch, self.config.total_epochs)
    }

    fn advance(&mut self, epoch: usize) -> (f64, f64, f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.config.beta1.powi(t);
        let c2 = 1.0 - self.config.beta2.powi(t);
        (self.learning_rate(epoch), c1, c2)
    }

    fn update_element(&self, p: &mut F, g: F, m: &mut F, v: &mut F, lr: f64, c1: f64, c2: f64) {
        let AdamConfig {
            beta1, beta2, epsilon, ..
        } = self.config;
        let g = g.to_f64().unwrap_or(f64::NAN);
        let m64 = beta1 * m.to_f64().unwrap_or(0.0) + (1.0 - beta1) * g;
        let v64 = beta2 * v.to_f64().unwrap_or(0.0) + (1.0 - beta2) * g * g;
        *m = F::from_f64_lossy(m64);
        *v = F::from_f64_lossy(v64);
        let update = lr * (m64 / c1) / ((v64 / c2).sqrt() + epsilon);
        *p = F::from_f64_lossy(p.to_f64().unwrap_or(f64::NAN) - update);
    }

    /// One update of every tensor. `params` and `grads` must follow the
    /// order used at construction.
    pub fn step(&mut self, params: Vec<&mut [F]>, grads: Vec<&[F]>, epoch: usize) {
        assert_eq!(params.len(), self.first.len(), "tensor count");
        assert_eq!(grads.len(), self.first.len(), "gradient count");
        let (lr, c1, c2) = self.advance(epoch);
        let mut first = std::mem::take(&mut self.first);
        let mut second = std::mem::take(&mut self.second);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut first).zip(&mut second) {
            assert_eq!(p.len(), g.len(), "gradient shape");
            assert_eq!(p.len(), m.len(), "moment shape");
            for i in 0..p.len() {
                self.update_element(&mut p[i], g[i], &mut m[i], &mut v[i], lr, c1, c2);
            }
        }
        self.first = first;
        self.second = second;
    }

    /// Update only the rows flagged in `active` of a single row-major
    /// `rows × width` tensor; other rows and their moments are untouched.
    pub fn step_rows(&mut self, param: &mut [F], grad: &[F], width: usize, active: &[bool], epoch: usize) {
        assert_eq!(self.first.len(), 1, "row updates need a single-tensor optimizer");
        assert_eq!(param.len(), grad.len());
        assert_eq!(param.len(), active.len() * width);
        let (lr, c1, c2) = self.advance(epoch);
        let mut m = std::mem::take(&mut self.first[0]);
        let mut v = std::mem::take(&mut self.second[0]);
        for (row, _) in active.iter().enumerate().filter(|(_, &a)| a) {
            for i in row * width..(row + 1) * width {
                self.update_element(&mut param[i], grad[i], &mut m[i], &mut v[i], lr, c1, c2);
            }
        }
        self.first[0] = m;
        self.second[0] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_unit_step() {
        // Hand-evaluated recurrence: m = 0.1, v = 0.001, m̂ = v̂ = 1, Δ = -lr/(1 + ε).
        let mut adam = Adam::<f64>::new(AdamConfig::new(0.1, 10), [1]);
        let mut p = [0.0f64];
        adam.step(vec![&mut p], vec![&[1.0]], 0);
        assert!((p[0] + 0.1 / (1.0 + 1e-8)).abs() < 1e-15);
        assert_eq!(adam.steps_taken(), 1);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut adam = Adam::<f32>::new(AdamConfig::new(0.01, 5), [3, 2]);
        let mut a = [1.0f32, -2.0, 3.0];
        let mut b = [0.5f32, 0.25];
        for epoch in 0..3 {
            adam.step(vec![&mut a, &mut b], vec![&[0.0; 3], &[0.0; 2]], epoch);
        }
        assert_eq!(a, [1.0, -2.0, 3.0]);
        assert_eq!(b, [0.5, 0.25]);
    }

    #[test]
    fn cosine_schedule_endpoints() {
        assert_eq!(cosine_learning_rate(0.2, 0, 100), 0.2);
        assert!((cosine_learning_rate(0.2, 50, 100) - 0.1).abs() < 1e-15);
        assert!(cosine_learning_rate(0.2, 100, 100).abs() < 1e-17);
        let mut adam = Adam::<f64>::new(AdamConfig::new(0.1, 4), [1]);
        let mut p = [2.0f64];
        adam.step(vec![&mut p], vec![&[3.0]], 4);
        assert!((p[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn row_updates_leave_inactive_rows() {
        let mut adam = Adam::<f32>::new(AdamConfig::new(0.1, 10), [6]);
        let mut w = [1.0f32; 6];
        adam.step_rows(&mut w, &[1.0; 6], 2, &[true, false, true], 0);
        assert_eq!(&w[2..4], &[1.0, 1.0]);
        assert!(w[0] < 1.0 && w[5] < 1.0);
    }
}
