//! Cross-product augmentation: every image paired with every indicator.
//!
//! An augmented example keeps the original image but retargets it: when
//! the indicator suggests the image's digit the target is the digit's
//! projection into the task's output space, otherwise it is the conflict
//! label. The view is lazy — examples are index arithmetic over the
//! underlying dataset, never a materialized copy.

use crate::data::{Dataset, IMAGE_PIXELS};
use crate::scheme::TaskSpec;

/// One entry of the augmented cross-product. Pixel and indicator inputs
/// are fetched from the owning [`AugmentedView`] on demand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AugmentedExample {
    /// Index of the source image in the underlying dataset.
    pub image_index: usize,
    /// Indicator paired with the image.
    pub indicator: usize,
    /// Original digit label of the image.
    pub label: u8,
    /// Training target in the task's output space (a projected label or
    /// the conflict index).
    pub target: usize,
}

/// Training target for pairing `label` with `indicator` under `spec`.
pub fn target_for(spec: &TaskSpec, indicator: usize, label: u8) -> usize {
    if spec.suggests(indicator, label) {
        spec.project(label)
    } else {
        spec.conflict_index()
    }
}

/// Lazy view of the dataset × indicator cross-product, image-major and
/// indicator-minor: entry `i` pairs image `i / L` with indicator `i % L`.
pub struct AugmentedView<'a> {
    data: &'a Dataset,
    spec: &'a TaskSpec,
}

impl<'a> AugmentedView<'a> {
    pub fn new(data: &'a Dataset, spec: &'a TaskSpec) -> Self {
        AugmentedView { data, spec }
    }

    /// Total number of augmented examples: dataset size times L.
    pub fn len(&self) -> usize {
        self.data.len() * self.spec.indicator_count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dataset(&self) -> &Dataset {
        self.data
    }

    pub fn spec(&self) -> &TaskSpec {
        self.spec
    }

    pub fn example(&self, index: usize) -> AugmentedExample {
        assert!(index < self.len());
        let l = self.spec.indicator_count();
        let image_index = index / l;
        let indicator = index % l;
        let label = self.data.label(image_index);
        AugmentedExample {
            image_index,
            indicator,
            label,
            target: target_for(self.spec, indicator, label),
        }
    }

    /// Normalized pixels of the example's source image.
    pub fn pixels(&self, example: &AugmentedExample) -> [f32; IMAGE_PIXELS] {
        self.data.image_normalized(example.image_index)
    }

    /// Encoded indicator row fed to the network alongside the pixels.
    pub fn indicator_input(&self, example: &AugmentedExample) -> &[f32] {
        self.spec.encoding().encode(example.indicator)
    }

    pub fn iter(&self) -> impl Iterator<Item = AugmentedExample> + '_ {
        (0..self.len()).map(move |i| self.example(i))
    }

    /// Fraction of the full cross-product carrying the conflict target:
    /// each image matches exactly one of the L indicators.
    pub fn conflict_fraction(&self) -> f64 {
        let l = self.spec.indicator_count() as f64;
        (l - 1.0) / l
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;
    use crate::scheme::catalog;
    use proptest::prelude::*;

    /// A tiny dataset with one image per digit; pixel 0 encodes the digit
    /// so images are distinguishable.
    fn ten_digit_dataset() -> Dataset {
        let images: Vec<[u8; IMAGE_PIXELS]> = (0..10u8)
            .map(|d| {
                let mut img = [0u8; IMAGE_PIXELS];
                img[0] = d * 20;
                img
            })
            .collect();
        Dataset::new(images, (0..10u8).collect(), Split::Train).unwrap()
    }

    fn spec_for(case: &str) -> TaskSpec {
        catalog(case, 1).unwrap().hybrid().unwrap().clone()
    }

    #[test]
    fn view_size_is_dataset_times_indicators() {
        let data = ten_digit_dataset();
        let spec = spec_for("11");
        assert_eq!(AugmentedView::new(&data, &spec).len(), 20);
        let spec24 = spec_for("24");
        assert_eq!(AugmentedView::new(&data, &spec24).len(), 100);
    }

    #[test]
    fn full_train_set_under_two_indicators_has_120k_entries() {
        // 60,000 images × L=2; checked without loading MNIST by scaling
        // the arithmetic the view performs.
        let spec = spec_for("11");
        assert_eq!(60_000 * spec.indicator_count(), 120_000);
    }

    #[test]
    fn digit_zero_pairs_under_case_11() {
        let data = ten_digit_dataset();
        let spec = spec_for("11");
        let view = AugmentedView::new(&data, &spec);
        // Image 0 is the digit 0: indicator 0 ({0..4}) suggests it,
        // indicator 1 ({5..9}) conflicts.
        let matched = view.example(0);
        assert_eq!(matched.indicator, 0);
        assert_eq!(matched.target, 0);
        let conflicted = view.example(1);
        assert_eq!(conflicted.indicator, 1);
        assert_eq!(conflicted.target, spec.conflict_index());
    }

    #[test]
    fn digit_six_pairs_under_case_33() {
        let data = ten_digit_dataset();
        let spec = spec_for("33");
        let view = AugmentedView::new(&data, &spec);
        // Image 6 is the digit 6 (even, >=5). With the even indicator the
        // target is the ">=5" class; with the odd indicator it conflicts.
        let even = view.example(6 * 2);
        assert_eq!(even.label, 6);
        assert_eq!(even.target, 1);
        let odd = view.example(6 * 2 + 1);
        assert_eq!(odd.target, spec.conflict_index());
    }

    #[test]
    fn targets_match_an_independent_enumeration() {
        // Re-derive every (digit, indicator) target for case 31 from the
        // group lists alone and compare against the view.
        let data = ten_digit_dataset();
        let spec = spec_for("31");
        let view = AugmentedView::new(&data, &spec);
        let groups = spec.partition().groups().to_vec();
        for example in view.iter() {
            let digit = example.label;
            let expected = if groups[example.indicator].contains(&digit) {
                digit as usize
            } else {
                10
            };
            assert_eq!(example.target, expected);
        }
    }

    #[test]
    fn conflict_fraction_counts_non_matching_pairs() {
        let data = ten_digit_dataset();
        for case in ["11", "24", "31"] {
            let spec = spec_for(case);
            let view = AugmentedView::new(&data, &spec);
            let conflicts = view
                .iter()
                .filter(|e| e.target == spec.conflict_index())
                .count();
            let measured = conflicts as f64 / view.len() as f64;
            assert_eq!(measured, view.conflict_fraction(), "case {case}");
        }
    }

    #[test]
    fn indicator_input_is_the_encoding_row() {
        let data = ten_digit_dataset();
        let spec = spec_for("31");
        let view = AugmentedView::new(&data, &spec);
        let example = view.example(3);
        assert_eq!(view.indicator_input(&example), spec.encoding().encode(3));
        assert_eq!(view.pixels(&example)[0], 0.0);
    }

    proptest! {
        #[test]
        fn index_arithmetic_round_trips(image in 0usize..10, indicator in 0usize..4) {
            let data = ten_digit_dataset();
            let spec = spec_for("31");
            let view = AugmentedView::new(&data, &spec);
            let l = spec.indicator_count();
            let example = view.example(image * l + indicator);
            prop_assert_eq!(example.image_index, image);
            prop_assert_eq!(example.indicator, indicator);
            prop_assert_eq!(example.label, image as u8);
        }

        #[test]
        fn matched_pairs_project_and_others_conflict(index in 0usize..100) {
            let data = ten_digit_dataset();
            let spec = spec_for("24");
            let view = AugmentedView::new(&data, &spec);
            let example = view.example(index);
            if spec.suggests(example.indicator, example.label) {
                prop_assert_eq!(example.target, spec.project(example.label));
            } else {
                prop_assert_eq!(example.target, spec.conflict_index());
            }
        }
    }
}
