//! Table 3/4-style metrics: integer verdict counts, the Eq. (1) rates
//! derived from them, and the text formats they are stored in.

use crate::data::Dataset;
use crate::nn::{argmax, forward_into, ForwardTrace, ModelParams};
use crate::reason::{predict_bundle, reason, IllogicalReason, Verdict, VerdictKind};
use crate::scheme::TaskSpec;

use super::ExperimentError;

/// Verdict counts over one hybrid evaluation. All rates are quotients of
/// these integers, so Eq. (1) — overall = pass × logical accuracy — holds
/// exactly at the rational level: c/t = (l/t)·(c/l).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Metrics {
    pub total: u64,
    /// Items whose bundle passed both logical checks.
    pub logical: u64,
    /// Logical items whose answer equals the projected true label.
    pub correct_logical: u64,
    /// Illogical: not exactly one non-conflict prediction.
    pub conflict_count_failed: u64,
    /// Illogical: the sole claimant contradicted its own indicator.
    pub compliance_failed: u64,
}

impl Metrics {
    /// Tallies verdicts against the true labels. `labels` must align with
    /// `verdicts` item by item.
    pub fn from_verdicts<'a>(
        spec: &TaskSpec,
        labels: impl IntoIterator<Item = u8>,
        verdicts: impl IntoIterator<Item = &'a Verdict>,
    ) -> Metrics {
        let mut m = Metrics {
            total: 0,
            logical: 0,
            correct_logical: 0,
            conflict_count_failed: 0,
            compliance_failed: 0,
        };
        for (label, verdict) in labels.into_iter().zip(verdicts) {
            m.total += 1;
            match verdict.kind {
                VerdictKind::Logical { output, .. } => {
                    m.logical += 1;
                    m.correct_logical += u64::from(output == spec.project(label));
                }
                VerdictKind::Illogical(IllogicalReason::ConflictCountFailed { .. }) => {
                    m.conflict_count_failed += 1;
                }
                VerdictKind::Illogical(IllogicalReason::ComplianceFailed { .. }) => {
                    m.compliance_failed += 1;
                }
            }
        }
        m.assert_identity();
        m
    }

    /// Share of items with a Logical verdict.
    pub fn logical_pass_rate(&self) -> f64 {
        self.logical as f64 / self.total as f64
    }

    /// Accuracy among Logical verdicts; NaN when no item passed (the
    /// quotient is undefined over an empty set).
    pub fn logical_accuracy(&self) -> f64 {
        self.correct_logical as f64 / self.logical as f64
    }

    /// Eq. (1): correct-and-logical over everything. Illogical items
    /// count against this even when their fallback label was right.
    pub fn overall_accuracy(&self) -> f64 {
        self.correct_logical as f64 / self.total as f64
    }

    /// Asserts count consistency and the Eq. (1) identity over the
    /// integer counts: correct/total = (logical/total)·(correct/logical)
    /// cross-multiplies to an exact u128 equality.
    pub fn assert_identity(&self) {
        assert_eq!(
            self.logical + self.conflict_count_failed + self.compliance_failed,
            self.total,
            "verdict counts must partition the total"
        );
        assert!(self.correct_logical <= self.logical);
        let lhs = self.correct_logical as u128 * (self.total as u128 * self.logical as u128);
        let rhs = (self.logical as u128 * self.correct_logical as u128) * self.total as u128;
        assert_eq!(lhs, rhs, "Eq. (1) identity violated over integer counts");
    }

    /// metrics.txt body for a hybrid run.
    pub fn render(&self, case: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!("case = {case}\n"));
        out.push_str(&format!("total = {}\n", self.total));
        out.push_str(&format!("logical = {}\n", self.logical));
        out.push_str(&format!("correct_logical = {}\n", self.correct_logical));
        out.push_str(&format!(
            "conflict_count_failed = {}\n",
            self.conflict_count_failed
        ));
        out.push_str(&format!("compliance_failed = {}\n", self.compliance_failed));
        out.push_str(&format!(
            "logical_pass_rate = {:.6}\n",
            self.logical_pass_rate()
        ));
        out.push_str(&format!(
            "logical_accuracy = {:.6}\n",
            self.logical_accuracy()
        ));
        out.push_str(&format!(
            "overall_accuracy = {:.6}\n",
            self.overall_accuracy()
        ));
        out
    }
}

/// The apparent network has no verdicts — a single accuracy suffices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchmarkMetrics {
    pub total: u64,
    pub correct: u64,
}

impl BenchmarkMetrics {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }

    /// metrics.txt body for a benchmark run.
    pub fn render(&self) -> String {
        format!(
            "case = benchmark\ntotal = {}\ncorrect = {}\naccuracy = {:.6}\n",
            self.total,
            self.correct,
            self.accuracy()
        )
    }
}

/// Runs the full logical pipeline over every test item: L forward passes
/// each, then the two checks. Returns the counts and the per-item
/// verdicts (for the CSV).
pub fn evaluate(
    params: &ModelParams<f32>,
    spec: &TaskSpec,
    test: &Dataset,
) -> Result<(Metrics, Vec<Verdict>), ExperimentError> {
    if test.is_empty() {
        return Err(ExperimentError::EmptyEvaluation);
    }
    let mut trace = ForwardTrace::new(&params.shape);
    let mut verdicts = Vec::with_capacity(test.len());
    for item in 0..test.len() {
        let pixels = test.image_normalized(item);
        let bundle = predict_bundle(params, spec, &pixels, &mut trace)?;
        verdicts.push(reason(spec, bundle));
    }
    let metrics = Metrics::from_verdicts(spec, test.labels().iter().copied(), &verdicts);
    Ok((metrics, verdicts))
}

/// Plain test accuracy for the apparent (no-indicator) network.
pub fn evaluate_benchmark(
    params: &ModelParams<f32>,
    test: &Dataset,
) -> Result<BenchmarkMetrics, ExperimentError> {
    if test.is_empty() {
        return Err(ExperimentError::EmptyEvaluation);
    }
    if params.shape.indicator_width != 0 {
        return Err(crate::reason::ReasonError::ShapeMismatch {
            what: "indicator width",
            expected: 0,
            found: params.shape.indicator_width,
        }
        .into());
    }
    let mut trace = ForwardTrace::new(&params.shape);
    let mut correct = 0u64;
    for item in 0..test.len() {
        let pixels = test.image_normalized(item);
        forward_into(params, &pixels, &[], &mut trace);
        correct += u64::from(argmax(&trace.probs) == test.label(item) as usize);
    }
    Ok(BenchmarkMetrics {
        total: test.len() as u64,
        correct,
    })
}

/// One CSV row per test item: index, true label, verdict kind, the
/// logical label or the failure reason, the fallback label, then the L
/// per-indicator confidences.
pub fn verdict_csv(spec: &TaskSpec, test: &Dataset, verdicts: &[Verdict]) -> String {
    let mut out = String::new();
    out.push_str("item,true_label,verdict,detail,fallback");
    for z in 0..spec.indicator_count() {
        out.push_str(&format!(",confidence_{z}"));
    }
    out.push('\n');
    for (item, verdict) in verdicts.iter().enumerate() {
        let (kind, detail) = match verdict.kind {
            VerdictKind::Logical { output, .. } => ("logical", output.to_string()),
            VerdictKind::Illogical(IllogicalReason::ConflictCountFailed { .. }) => {
                ("illogical", "conflict_count_failed".to_string())
            }
            VerdictKind::Illogical(IllogicalReason::ComplianceFailed { .. }) => {
                ("illogical", "compliance_failed".to_string())
            }
        };
        out.push_str(&format!(
            "{item},{label},{kind},{detail},{fallback}",
            label = test.label(item),
            fallback = verdict.fallback.output,
        ));
        for record in &verdict.bundle.records {
            out.push_str(&format!(",{:.6}", record.confidence));
        }
        out.push('\n');
    }
    out
}

/// A metrics.txt parsed back for reporting: either kind of run.
#[derive(Clone, Debug, PartialEq)]
pub enum StoredMetrics {
    Benchmark(BenchmarkMetrics),
    Hybrid { case: String, metrics: Metrics },
}

impl StoredMetrics {
    pub fn case_id(&self) -> &str {
        match self {
            StoredMetrics::Benchmark(_) => "benchmark",
            StoredMetrics::Hybrid { case, .. } => case,
        }
    }
}

/// Parses a metrics.txt body written by [`Metrics::render`] or
/// [`BenchmarkMetrics::render`].
pub fn parse_metrics(text: &str) -> Result<StoredMetrics, String> {
    let mut fields = std::collections::BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("expected key = value, got {line:?}"))?;
        fields.insert(key.trim().to_string(), value.trim().to_string());
    }
    let count = |key: &str| -> Result<u64, String> {
        fields
            .get(key)
            .ok_or_else(|| format!("missing field {key:?}"))?
            .parse::<u64>()
            .map_err(|e| format!("field {key:?}: {e}"))
    };
    let case = fields
        .get("case")
        .ok_or_else(|| "missing field \"case\"".to_string())?
        .clone();
    if case == "benchmark" {
        Ok(StoredMetrics::Benchmark(BenchmarkMetrics {
            total: count("total")?,
            correct: count("correct")?,
        }))
    } else {
        let metrics = Metrics {
            total: count("total")?,
            logical: count("logical")?,
            correct_logical: count("correct_logical")?,
            conflict_count_failed: count("conflict_count_failed")?,
            compliance_failed: count("compliance_failed")?,
        };
        Ok(StoredMetrics::Hybrid { case, metrics })
    }
}
