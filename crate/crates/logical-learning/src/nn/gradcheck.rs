//! Finite-difference validation of the analytic gradients.
//!
//! The sweep runs the full network in `f64` on a downsized 8x8 model so
//! every single parameter can be perturbed in well under a minute.
//! Central differences with h = 1e-5 carry roughly 1e-10 truncation
//! error, leaving the 1e-4 acceptance threshold entirely to the analytic
//! implementation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{backward_into, forward, loss_of, BackwardScratch, ModelParams, ModelShape};

/// Perturbation used for central differences.
pub const STEP: f64 = 1e-5;

/// Relative error with an absolute guard: tiny true gradients are
/// compared against the guard instead of each other, so noise below
/// 1e-7 cannot manufacture a large ratio.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-3);
    (analytic - numeric).abs() / scale
}

/// Outcome of a full-parameter sweep.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Parameters checked (every parameter of the downsized model).
    pub checked: usize,
    pub max_rel_error: f64,
    /// Tensor and flat index of the worst disagreement.
    pub worst_tensor: String,
    pub worst_index: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// Checks every parameter of a downsized hybrid model (two-value
/// indicator, five outputs) on one synthetic example.
pub fn run(seed: u64) -> GradCheckReport {
    let shape = ModelShape::downsized(2, 5);
    let mut params: ModelParams<f64> = ModelParams::init(&shape, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let image: Vec<f64> = (0..shape.image_len()).map(|_| rng.random()).collect();
    let indicator = [1.0, 0.0];
    let target = 3;

    let trace = forward(&params, &image, &indicator);
    let mut analytic = params.zeros_like();
    let mut scratch = BackwardScratch::new(&shape);
    backward_into(&params, &trace, target, &mut analytic, &mut scratch);

    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
    };

    let tensor_names: Vec<&'static str> =
        params.tensors().iter().map(|(name, _)| *name).collect();
    for (slot, name) in tensor_names.into_iter().enumerate() {
        let len = params.tensors()[slot].1.len();
        for index in 0..len {
            let original = params.tensors()[slot].1.data[index];
            params.tensors_mut()[slot].1.data[index] = original + STEP;
            let plus = loss_of(&params, &image, &indicator, target);
            params.tensors_mut()[slot].1.data[index] = original - STEP;
            let minus = loss_of(&params, &image, &indicator, target);
            params.tensors_mut()[slot].1.data[index] = original;

            let numeric = (plus - minus) / (2.0 * STEP);
            let grad = analytic.tensors()[slot].1.data[index];
            let rel = relative_error(grad, numeric);
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_tensor = name.to_string();
                report.worst_index = index;
                report.analytic_at_worst = grad;
                report.numeric_at_worst = numeric;
            }
        }
    }
    report
}
