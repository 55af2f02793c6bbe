//! Shows how training data is expanded into the image × indicator
//! cross-product with conflict targets (the construction of the paper's
//! Fig. 5): every image pairs with every indicator, and non-suggesting
//! pairs train toward the dedicated conflict label.
//!
//! Usage: `cargo run --example augment_preview [case]` (default 11).

use std::path::PathBuf;

use logical_learning::augment::AugmentedView;
use logical_learning::data::load_split;
use logical_learning::{catalog, Split};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case = std::env::args().nth(1).unwrap_or_else(|| "11".to_string());
    let dir = std::env::var_os("MNIST_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"));

    let data = load_split(&dir, Split::Train)?;
    let task = catalog(&case, 1)?;
    let spec = task.hybrid().ok_or("pick a hybrid case, not benchmark")?;
    let view = AugmentedView::new(&data, spec);

    println!(
        "case {case}: {} images x {} indicators = {} augmented examples (nothing copied)",
        data.len(),
        spec.indicator_count(),
        view.len()
    );
    println!(
        "conflict fraction = {:.4} (= (L-1)/L for single-axis schemes)\n",
        view.conflict_fraction()
    );

    println!("first {} augmented examples:", 3 * spec.indicator_count());
    for index in 0..3 * spec.indicator_count() {
        let example = view.example(index);
        let suggested = spec.suggests(example.indicator, data.label(example.image_index));
        println!(
            "  image {:>2} (digit {}) + indicator {} ({:<12}) -> target {:<10} {}",
            example.image_index,
            example.label,
            example.indicator,
            spec.partition().names()[example.indicator],
            spec.output_names()[example.target],
            if suggested { "" } else { "(conflict)" }
        );
    }
    Ok(())
}
