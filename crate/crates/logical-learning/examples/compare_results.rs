//! Renders the cross-case report from result bundles. Given directories,
//! it reports those; with no arguments it builds a demonstration set from
//! the paper's own Table 3 numbers, showing the format and the Fig. 7
//! group aggregation (including §3.2's 99.21% / 99.28% group averages).
//!
//! Usage: `cargo run --example compare_results [result_dir...]`

use std::path::PathBuf;

use logical_learning::experiment::{report, BenchmarkMetrics, Metrics};

/// Integer counts over 10,000 test items that reproduce a Table 3 row's
/// rounded percentages.
fn paper_row(logical: u64, correct_logical: u64, conflict_count_failed: u64) -> Metrics {
    Metrics {
        total: 10_000,
        logical,
        correct_logical,
        conflict_count_failed,
        compliance_failed: 10_000 - logical - conflict_count_failed,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dirs: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    if !dirs.is_empty() {
        print!("{}", report(&dirs)?);
        return Ok(());
    }

    println!("(no directories given; demonstrating on the paper's Table 3 numbers)\n");
    let tmp = std::env::temp_dir().join("loglearn-demo-report");
    // Counts chosen so the quotients round to the paper's percentages:
    // e.g. row 11 = pass 99.48%, logical acc 99.24%, overall 98.72%.
    let rows = [
        ("11", paper_row(9_948, 9_872, 40)),
        ("12", paper_row(9_949, 9_870, 40)),
        ("13", paper_row(9_957, 9_870, 30)),
        ("14", paper_row(9_990, 9_890, 8)),
        ("21", paper_row(9_936, 9_854, 50)),
        ("22", paper_row(9_940, 9_872, 45)),
        ("23", paper_row(9_879, 9_819, 100)),
        ("24", paper_row(9_853, 9_795, 120)),
    ];
    let mut dirs = Vec::new();
    for (case, metrics) in rows {
        let dir = tmp.join(case);
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("metrics.txt"), metrics.render(case))?;
        dirs.push(dir);
    }
    let bench_dir = tmp.join("benchmark");
    std::fs::create_dir_all(&bench_dir)?;
    std::fs::write(
        bench_dir.join("metrics.txt"),
        BenchmarkMetrics {
            total: 10_000,
            correct: 9_891,
        }
        .render(),
    )?;
    dirs.insert(0, bench_dir);

    print!("{}", report(&dirs)?);
    println!("\n(run real cases first, e.g. `loglearn run --case 11`, then pass");
    println!(" their out-dirs to this example or to `loglearn report`.)");
    Ok(())
}
