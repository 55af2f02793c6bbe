//! Loads the MNIST IDX files and prints what the pipeline sees: split
//! sizes, the label histogram, and one image rendered as ASCII art.
//!
//! Usage: `cargo run --example inspect_data` (expects the IDX files in
//! ./data, or set MNIST_DATA_DIR).

use std::path::PathBuf;

use logical_learning::data::{load_split, IMAGE_SIDE};
use logical_learning::Split;

fn data_dir() -> PathBuf {
    std::env::var_os("MNIST_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = data_dir();
    for split in [Split::Train, Split::Test] {
        let data = load_split(&dir, split)?;
        let mut histogram = [0usize; 10];
        for &label in data.labels() {
            histogram[label as usize] += 1;
        }
        println!("{split:?}: {} images, label counts {histogram:?}", data.len());
    }

    let test = load_split(&dir, Split::Test)?;
    let index = 0;
    println!(
        "\ntest image {index} (label {}), raw pixels quantized to 4 levels:",
        test.label(index)
    );
    let pixels = test.image_normalized(index);
    for row in 0..IMAGE_SIDE {
        let line: String = (0..IMAGE_SIDE)
            .map(|col| match pixels[row * IMAGE_SIDE + col] {
                v if v > 0.75 => '#',
                v if v > 0.5 => '+',
                v if v > 0.25 => '.',
                _ => ' ',
            })
            .collect();
        println!("  {line}");
    }
    println!(
        "\nnormalization maps bytes 0..=255 to [0,1]; first nonzero pixel = {:.4}",
        pixels.iter().copied().find(|&v| v > 0.0).unwrap_or(0.0)
    );
    Ok(())
}
