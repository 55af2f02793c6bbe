//! Runs a full hybrid experiment through the same harness the CLI uses:
//! trains a case with its auxiliary indicator input, evaluates the
//! logical verdicts on the test split, and writes a self-describing
//! result bundle (config echo, checkpoint, train log, metrics, verdict
//! CSV) under runs/.
//!
//! Usage: `cargo run --example train_hybrid [case] [steps]`
//! (defaults: case 11, 1,000 steps — a few minutes of CPU time).

use std::path::PathBuf;

use logical_learning::experiment::{run_case, ExperimentConfig, StoredMetrics};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let case = args.next().unwrap_or_else(|| "11".to_string());
    let steps: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1_000);

    let mut config = ExperimentConfig::new(&case);
    config.steps = steps;
    config.data_dir = std::env::var_os("MNIST_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"));
    config.out_dir = Some(PathBuf::from("runs").join(format!("example-{case}")));

    println!("running case {case} for {steps} steps...");
    let stored = run_case(&config, |s| {
        println!(
            "  step {:>6} loss {:.4} test-probe acc {:.4}",
            s.step,
            s.mean_loss,
            s.eval_accuracy.unwrap_or(f64::NAN)
        );
    })?;

    match stored {
        StoredMetrics::Benchmark(b) => println!("test accuracy {:.4}", b.accuracy()),
        StoredMetrics::Hybrid { metrics, .. } => {
            println!(
                "logical pass rate {:.4} | logical accuracy {:.4} | overall {:.4}",
                metrics.logical_pass_rate(),
                metrics.logical_accuracy(),
                metrics.overall_accuracy()
            );
            println!(
                "Eq. (1) check: {} correct-and-logical of {} items",
                metrics.correct_logical, metrics.total
            );
        }
    }
    println!(
        "result bundle written to {}",
        config.resolved_out_dir().display()
    );
    Ok(())
}
