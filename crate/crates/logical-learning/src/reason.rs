//! Logical inference: run the network once per indicator and check the
//! resulting bundle for consistency.
//!
//! A bundle is logical when exactly one indicator claims the image (all
//! L-1 others predict the conflict label) and, where the task defines a
//! compliance relation, the claiming indicator's prediction is consistent
//! with it. Anything else is flagged illogical; a fallback answer is
//! still reported for diagnostics, but an illogical item is never scored
//! as correct.

use thiserror::Error;

use crate::nn::{argmax, forward_into, ForwardTrace, ModelParams};
use crate::scheme::TaskSpec;

#[derive(Debug, Error)]
pub enum ReasonError {
    #[error("model {what} is {found}, the task needs {expected}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("compliance check requires exactly one non-conflict prediction, found {0}")]
    PreconditionViolated(usize),
}

/// What the network said under one indicator: the argmax output and the
/// probability mass behind it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndicatorPrediction {
    pub indicator: usize,
    pub predicted: usize,
    /// Max softmax probability, i.e. the probability of `predicted`.
    pub confidence: f32,
}

/// One record per indicator, in indicator order.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionBundle {
    pub records: Vec<IndicatorPrediction>,
}

impl PredictionBundle {
    /// Number of indicators in the bundle.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Predicted output under indicator `z`.
    pub fn predicted(&self, z: usize) -> usize {
        self.records[z].predicted
    }

    /// Confidence of the predicted output under indicator `z`.
    pub fn confidence(&self, z: usize) -> f32 {
        self.records[z].confidence
    }

    /// Indicators whose prediction is not the conflict label.
    pub fn non_conflict(&self, conflict: usize) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| r.predicted != conflict)
            .map(|r| r.indicator)
            .collect()
    }
}

/// Runs the network over every indicator of the task. The caller provides
/// a trace buffer so evaluation loops do not reallocate activations.
pub fn predict_bundle(
    params: &ModelParams<f32>,
    spec: &TaskSpec,
    image: &[f32],
    trace: &mut ForwardTrace<f32>,
) -> Result<PredictionBundle, ReasonError> {
    if params.shape.indicator_width != spec.encoding().width() {
        return Err(ReasonError::ShapeMismatch {
            what: "indicator width",
            expected: spec.encoding().width(),
            found: params.shape.indicator_width,
        });
    }
    if params.shape.output_count != spec.output_count() {
        return Err(ReasonError::ShapeMismatch {
            what: "output count",
            expected: spec.output_count(),
            found: params.shape.output_count,
        });
    }
    let records = (0..spec.indicator_count())
        .map(|z| {
            forward_into(params, image, spec.encoding().encode(z), trace);
            let predicted = argmax(&trace.probs);
            IndicatorPrediction {
                indicator: z,
                predicted,
                confidence: trace.probs[predicted],
            }
        })
        .collect();
    Ok(PredictionBundle { records })
}

/// First logical check: exactly L-1 of the L predictions must be the
/// conflict label.
pub fn check_conflict_count(spec: &TaskSpec, bundle: &PredictionBundle) -> bool {
    bundle.non_conflict(spec.conflict_index()).len() == 1
}

/// Second logical check: the sole claiming indicator's prediction must
/// comply with it. Passes vacuously when the task defines no compliance
/// relation. Requires the conflict-count check to have passed.
pub fn check_compliance(spec: &TaskSpec, bundle: &PredictionBundle) -> Result<bool, ReasonError> {
    let claimants = bundle.non_conflict(spec.conflict_index());
    let [z] = claimants[..] else {
        return Err(ReasonError::PreconditionViolated(claimants.len()));
    };
    if !spec.compliance_available() {
        return Ok(true);
    }
    Ok(spec
        .compliant(z, bundle.predicted(z))
        .expect("compliance table is available"))
}

/// Why a bundle was rejected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IllogicalReason {
    /// Not exactly one indicator claimed the image.
    ConflictCountFailed { non_conflict: usize },
    /// The sole claimant's prediction contradicts its indicator.
    ComplianceFailed { indicator: usize, output: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerdictKind {
    /// The bundle passed both checks; `output` is the answer.
    Logical { indicator: usize, output: usize },
    Illogical(IllogicalReason),
}

/// Highest-confidence non-conflict record of the bundle — or, when every
/// indicator predicted conflict, the highest-confidence record outright
/// (whose output is then the conflict label). Ties resolve to the lowest
/// indicator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fallback {
    pub indicator: usize,
    pub output: usize,
    pub confidence: f32,
}

/// Outcome of reasoning over one bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub fallback: Fallback,
    pub bundle: PredictionBundle,
}

impl Verdict {
    pub fn is_logical(&self) -> bool {
        matches!(self.kind, VerdictKind::Logical { .. })
    }

    /// The answer for a logical bundle; illogical bundles have none.
    pub fn answer(&self) -> Option<usize> {
        match self.kind {
            VerdictKind::Logical { output, .. } => Some(output),
            VerdictKind::Illogical(_) => None,
        }
    }
}

fn best_fallback(bundle: &PredictionBundle, conflict: usize) -> Fallback {
    let best_of = |records: &mut dyn Iterator<Item = &IndicatorPrediction>| {
        records
            .fold(None::<&IndicatorPrediction>, |best, r| match best {
                Some(b) if b.confidence >= r.confidence => Some(b),
                _ => Some(r),
            })
            .copied()
    };
    let record = best_of(&mut bundle.records.iter().filter(|r| r.predicted != conflict))
        .or_else(|| best_of(&mut bundle.records.iter()))
        .expect("bundle is non-empty");
    Fallback {
        indicator: record.indicator,
        output: record.predicted,
        confidence: record.confidence,
    }
}

/// Applies both logical checks to a bundle.
pub fn reason(spec: &TaskSpec, bundle: PredictionBundle) -> Verdict {
    assert_eq!(bundle.len(), spec.indicator_count());
    let conflict = spec.conflict_index();
    let fallback = best_fallback(&bundle, conflict);
    let claimants = bundle.non_conflict(conflict);
    let kind = if let [z] = claimants[..] {
        let output = bundle.predicted(z);
        if spec.compliance_available() && !spec.compliant(z, output).expect("table available") {
            VerdictKind::Illogical(IllogicalReason::ComplianceFailed {
                indicator: z,
                output,
            })
        } else {
            VerdictKind::Logical {
                indicator: z,
                output,
            }
        }
    } else {
        VerdictKind::Illogical(IllogicalReason::ConflictCountFailed {
            non_conflict: claimants.len(),
        })
    };
    Verdict {
        kind,
        fallback,
        bundle,
    }
}

/// Runs the full pipeline for one image: L forward passes, then the
/// logical checks.
pub fn infer(
    params: &ModelParams<f32>,
    spec: &TaskSpec,
    image: &[f32],
    trace: &mut ForwardTrace<f32>,
) -> Result<Verdict, ReasonError> {
    let bundle = predict_bundle(params, spec, image, trace)?;
    Ok(reason(spec, bundle))
}
