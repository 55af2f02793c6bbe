//! Audits the hand-written backpropagation against central finite
//! differences in float64 on the downsized model (8x8 input, same layer
//! pattern). Every parameter is perturbed individually.
//!
//! Usage: `cargo run --example gradient_check [seed]`

use logical_learning::nn::gradcheck;

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);

    println!("gradient check, seed {seed} (downsized model, float64, step 1e-5)");
    let report = gradcheck::run(seed);
    println!("  parameters checked : {}", report.checked);
    println!("  max relative error : {:.3e}", report.max_rel_error);
    println!(
        "  worst parameter    : {}[{}] analytic {:.6e} vs numeric {:.6e}",
        report.worst_tensor, report.worst_index, report.analytic_at_worst, report.numeric_at_worst
    );
    let tolerance = 1e-4;
    if report.passes(tolerance) {
        println!("PASS (tolerance {tolerance:.0e})");
    } else {
        println!("FAIL (tolerance {tolerance:.0e})");
        std::process::exit(1);
    }
}
