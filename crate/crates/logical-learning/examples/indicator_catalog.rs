//! Prints every cataloged indicator scheme: the digit partition behind
//! each case, its output space, the encoding width, and whether the
//! compliance check is defined.
//!
//! Usage: `cargo run --example indicator_catalog [scheme_seed]`
//! (the seed fixes the random partitions of cases 21-23; default 1).

use logical_learning::catalog;
use logical_learning::scheme::HYBRID_CASES;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scheme_seed: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(1);

    println!("scheme_seed = {scheme_seed} (affects only cases 21-23)\n");
    for case in HYBRID_CASES {
        let task = catalog(case, scheme_seed)?;
        let spec = task.hybrid().expect("hybrid case");
        println!("case {case}:");
        for (z, (group, name)) in spec
            .partition()
            .groups()
            .iter()
            .zip(spec.partition().names())
            .enumerate()
        {
            println!("  indicator {z} ({name}): digits {group:?}");
        }
        println!(
            "  outputs: {:?} (conflict = index {})",
            spec.output_names(),
            spec.conflict_index()
        );
        println!(
            "  encoding width {} | compliance {}",
            spec.encoding().width(),
            if spec.compliance_available() {
                "available"
            } else {
                "unavailable (only the conflict-count check applies)"
            }
        );
        // The projection every digit trains toward under its matching
        // indicator.
        let projections: Vec<String> = (0..10u8)
            .map(|d| format!("{d}->{}", spec.output_names()[spec.project(d)]))
            .collect();
        println!("  projection: {}\n", projections.join(" "));
    }
    Ok(())
}
