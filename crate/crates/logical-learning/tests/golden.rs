//! Golden regression fixtures pinning the exact numerics of the forward
//! pass and the model-to-reasoner integration.
//!
//! The files under `tests/fixtures/` were produced once by the ignored
//! `print_fixtures` test (`cargo test --test golden print_fixtures --
//! --ignored`) and checked in. The live tests recompute the same
//! quantities from the same seeds and compare within [`TOLERANCE`], so a
//! refactor that changes numerical behavior fails loudly instead of
//! silently shifting every downstream accuracy figure.

use std::fs;
use std::path::PathBuf;

use logical_learning::nn::{cross_entropy_loss, forward, ModelParams, ModelShape};
use logical_learning::reason::predict_bundle;
use logical_learning::scheme::catalog;
use logical_learning::Task;

const TOLERANCE: f64 = 1e-6;

fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn read_fixture(name: &str) -> Vec<f64> {
    let path = fixture_path(name);
    let text = fs::read_to_string(&path).unwrap_or_else(|e| {
        panic!(
            "missing fixture {} ({e}); regenerate with \
             `cargo test --test golden print_fixtures -- --ignored`",
            path.display()
        )
    });
    text.lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !line.starts_with('#'))
        .map(|line| line.parse::<f64>().expect("fixture line parses as f64"))
        .collect()
}

fn assert_close(actual: &[f64], expected: &[f64], what: &str) {
    assert_eq!(actual.len(), expected.len(), "{what}: value count changed");
    for (i, (a, e)) in actual.iter().zip(expected).enumerate() {
        assert!(
            (a - e).abs() <= TOLERANCE,
            "{what}[{i}]: got {a:.9e}, fixture says {e:.9e}"
        );
    }
}

/// Deterministic synthetic image: a fixed integer pattern mapped into
/// [0, 1]. Not random so the fixture is reproducible from source alone.
fn synthetic_image(len: usize, phase: usize) -> Vec<f32> {
    (0..len)
        .map(|i| ((i * 31 + phase * 17 + 7) % 97) as f32 / 96.0)
        .collect()
}

/// Standard 28x28 scenario: probs for seed-0 params, then the
/// cross-entropy loss against target 3 as the final value.
fn standard_values() -> Vec<f64> {
    let shape = ModelShape::standard(2, 11);
    let params = ModelParams::<f32>::init(&shape, 0);
    let image = synthetic_image(shape.image_len(), 0);
    let trace = forward(&params, &image, &[1.0, 0.0]);
    let mut values: Vec<f64> = trace.probs.iter().map(|&p| p as f64).collect();
    values.push(cross_entropy_loss(&trace, 3) as f64);
    values
}

/// Downsized 8x8 scenario (the geometry gradcheck uses), exercising the
/// non-28x28 convolution path.
fn downsized_values() -> Vec<f64> {
    let shape = ModelShape::downsized(3, 5);
    let params = ModelParams::<f32>::init(&shape, 1);
    let image = synthetic_image(shape.image_len(), 1);
    let trace = forward(&params, &image, &[0.0, 1.0, 0.0]);
    trace.probs.iter().map(|&p| p as f64).collect()
}

/// Model-to-reasoner integration: the prediction bundle case 11 produces
/// for seed-2 params, serialized as (predicted, confidence) pairs in
/// indicator order.
fn bundle_values() -> Vec<f64> {
    let Task::Hybrid(spec) = catalog("11", 1).unwrap() else {
        panic!("case 11 is hybrid");
    };
    let shape = ModelShape::standard(spec.encoding().width(), spec.output_count());
    let params = ModelParams::<f32>::init(&shape, 2);
    let image = synthetic_image(shape.image_len(), 2);
    let mut trace = logical_learning::nn::ForwardTrace::new(&shape);
    let bundle = predict_bundle(&params, &spec, &image, &mut trace).unwrap();
    let mut values = Vec::new();
    for record in &bundle.records {
        values.push(record.predicted as f64);
        values.push(record.confidence as f64);
    }
    values
}

#[test]
fn forward_standard_matches_fixture() {
    assert_close(
        &standard_values(),
        &read_fixture("forward_standard.txt"),
        "standard forward",
    );
}

#[test]
fn forward_downsized_matches_fixture() {
    assert_close(
        &downsized_values(),
        &read_fixture("forward_downsized.txt"),
        "downsized forward",
    );
}

#[test]
fn prediction_bundle_matches_fixture() {
    let actual = bundle_values();
    let expected = read_fixture("bundle_case11.txt");
    assert_eq!(actual.len(), expected.len(), "bundle: record count changed");
    for (i, chunk) in actual.chunks(2).zip(expected.chunks(2)).enumerate() {
        let (a, e) = chunk;
        assert_eq!(a[0], e[0], "bundle record {i}: predicted class changed");
        assert!(
            (a[1] - e[1]).abs() <= TOLERANCE,
            "bundle record {i}: confidence {:.9e} vs fixture {:.9e}",
            a[1],
            e[1]
        );
    }
}

/// One-time fixture generator; writes the files the live tests compare
/// against. Ignored so routine runs never overwrite the goldens.
#[test]
#[ignore = "regenerates the checked-in fixtures"]
fn print_fixtures() {
    let dir = fixture_path("");
    fs::create_dir_all(&dir).unwrap();
    let render = |header: &str, values: &[f64]| {
        let mut out = format!("# {header}\n");
        for v in values {
            out.push_str(&format!("{v:.9e}\n"));
        }
        out
    };
    fs::write(
        fixture_path("forward_standard.txt"),
        render(
            "standard(2,11) seed-0 params, synthetic image phase 0, indicator [1,0]: 11 probs then loss@target=3",
            &standard_values(),
        ),
    )
    .unwrap();
    fs::write(
        fixture_path("forward_downsized.txt"),
        render(
            "downsized(3,5) seed-1 params, synthetic image phase 1, indicator [0,1,0]: 5 probs",
            &downsized_values(),
        ),
    )
    .unwrap();
    fs::write(
        fixture_path("bundle_case11.txt"),
        render(
            "case 11 spec, seed-2 params, synthetic image phase 2: (predicted, confidence) per indicator",
            &bundle_values(),
        ),
    )
    .unwrap();
    println!("fixtures written to {}", dir.display());
}
