//! Adam with bias correction and the decaying learning-rate schedule.

use super::{ModelParams, ModelShape, Scalar};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Learning rate at a zero-based global step: a 3e-3 exponential decay
/// with time constant 2000 on top of a 1e-4 floor. Step 0 is 3.1e-3.
pub fn learning_rate(step: u64) -> f64 {
    1.0e-4 + 3.0e-3 * (-(step as f64) / 2000.0).exp()
}

/// One Adam update over a parameter slice. `bias1`/`bias2` are the
/// pre-computed correction factors `1 - beta^t`.
fn update_slice<F: Scalar>(
    params: &mut [F],
    grads: &[F],
    first: &mut [F],
    second: &mut [F],
    lr: F,
    bias1: F,
    bias2: F,
) {
    let beta1 = F::c(BETA1);
    let beta2 = F::c(BETA2);
    let eps = F::c(EPSILON);
    let one = F::one();
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(first.iter_mut())
        .zip(second.iter_mut())
    {
        *m = beta1 * *m + (one - beta1) * g;
        *v = beta2 * *v + (one - beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Adam state: first and second moment accumulators shaped like the
/// model, plus the update counter driving bias correction.
pub struct Adam<F> {
    first: ModelParams<F>,
    second: ModelParams<F>,
    updates: u64,
}

impl<F: Scalar> Adam<F> {
    pub fn new(shape: &ModelShape) -> Self {
        Adam {
            first: ModelParams::zeros(shape),
            second: ModelParams::zeros(shape),
            updates: 0,
        }
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Applies one update from averaged batch gradients.
    pub fn step(&mut self, params: &mut ModelParams<F>, grads: &ModelParams<F>, lr: F) {
        debug_assert_eq!(params.shape, grads.shape);
        self.updates += 1;
        let t = self.updates as i32;
        let bias1 = F::c(1.0 - BETA1.powi(t));
        let bias2 = F::c(1.0 - BETA2.powi(t));
        for ((((_, p), (_, g)), (_, m)), (_, v)) in params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.first.tensors_mut())
            .zip(self.second.tensors_mut())
        {
            update_slice(&mut p.data, &g.data, &mut m.data, &mut v.data, lr, bias1, bias2);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learning_rate_schedule_endpoints() {
        assert!((learning_rate(0) - 3.1e-3).abs() < 1e-15);
        // One time constant decays the variable part by 1/e.
        let expected = 1.0e-4 + 3.0e-3 * (-1.0f64).exp();
        assert!((learning_rate(2000) - expected).abs() < 1e-15);
        // The floor survives after the decay term underflows.
        assert_eq!(learning_rate(10_000_000), 1.0e-4);
        for step in (0..20_000).step_by(500) {
            assert!(learning_rate(step + 1) < learning_rate(step));
        }
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let shape = ModelShape::downsized(2, 5);
        let mut params: ModelParams<f64> = ModelParams::init(&shape, 1);
        let before = params.clone();
        let zeros = params.zeros_like();
        let mut adam = Adam::new(&shape);
        adam.step(&mut params, &zeros, 0.01);
        assert_eq!(params, before);
        assert_eq!(adam.updates(), 1);
    }

    #[test]
    fn first_step_matches_hand_computation() {
        // With g = 1: m_hat = v_hat = 1 exactly after bias correction, so
        // the parameter moves by -lr / (1 + eps).
        let mut p = [0.0f64];
        let mut m = [0.0f64];
        let mut v = [0.0f64];
        update_slice(&mut p, &[1.0], &mut m, &mut v, 0.25, 1.0 - BETA1, 1.0 - BETA2);
        let expected = -0.25 / (1.0 + EPSILON);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((m[0] - 0.1).abs() < 1e-15);
        assert!((v[0] - 0.001).abs() < 1e-15);
    }

    #[test]
    fn toy_quadratic_converges() {
        // Minimize (p - 0.7)^2 with exact gradients.
        let mut p = [0.0f64];
        let mut m = [0.0f64];
        let mut v = [0.0f64];
        for t in 1..=500 {
            let g = [2.0 * (p[0] - 0.7)];
            let bias1 = 1.0 - BETA1.powi(t);
            let bias2 = 1.0 - BETA2.powi(t);
            update_slice(&mut p, &g, &mut m, &mut v, 0.05, bias1, bias2);
        }
        assert!((p[0] - 0.7).abs() < 0.01, "ended at {}", p[0]);
    }

    #[test]
    fn adam_updates_every_tensor() {
        let shape = ModelShape::downsized(2, 5);
        let mut params: ModelParams<f64> = ModelParams::init(&shape, 2);
        let before = params.clone();
        let mut grads = params.zeros_like();
        for (_, tensor) in grads.tensors_mut() {
            tensor.data.fill(0.5);
        }
        let mut adam = Adam::new(&shape);
        adam.step(&mut params, &grads, 0.01);
        for ((name, a), (_, b)) in params.tensors().into_iter().zip(before.tensors()) {
            assert!(
                a.data.iter().zip(&b.data).all(|(x, y)| x != y),
                "{name} should move"
            );
        }
    }
}
