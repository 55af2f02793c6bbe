//! Config-driven experiment harness: the plumbing between the library
//! and the `loglearn` CLI. A run trains one case, evaluates it on the
//! test split, and leaves a self-describing result bundle on disk —
//! config echo, checkpoint, training log, metrics, and verdicts — from
//! which `evaluate` can reproduce the metrics bit-exactly and `report`
//! can build the cross-case comparison.

mod metrics;
mod report;

pub use metrics::{
    evaluate, evaluate_benchmark, parse_metrics, verdict_csv, BenchmarkMetrics, Metrics,
    StoredMetrics,
};
pub use report::report;

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::checkpoint::{self, CheckpointError};
use crate::data::{load_split, DataError, Split};
use crate::nn::optim::learning_rate;
use crate::reason::{reason, IndicatorPrediction, PredictionBundle, ReasonError, VerdictKind};
use crate::scheme::{catalog, SchemeError, Task, HYBRID_CASES};
use crate::train::{train, SamplingPolicy, TrainConfig, TrainError, TrainLog, TrainSnapshot};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: expected `key = value`, got {text:?}")]
    BadLine { line: usize, text: String },
    #[error("config value {key} = {value:?}: {reason}")]
    BadValue {
        key: &'static str,
        value: String,
        reason: String,
    },
    #[error("config is missing the required key \"case\"")]
    MissingCase,
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Reason(#[from] ReasonError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("evaluation dataset is empty")]
    EmptyEvaluation,
    #[error("no result bundle at {0} (missing metrics.txt)")]
    MissingResult(PathBuf),
    #[error("malformed metrics file {path}: {reason}")]
    BadMetricsFile { path: PathBuf, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("reasoner self-test found {0} mismatches")]
    SelftestFailed(u64),
}

impl ExperimentError {
    /// Process exit code the CLI maps this error to: 1 usage, 2 data,
    /// 3 diverged training.
    pub fn exit_code(&self) -> i32 {
        use ExperimentError::*;
        match self {
            UnknownKey { .. } | BadLine { .. } | BadValue { .. } | MissingCase | Scheme(_) => 1,
            Train(TrainError::DivergedLoss { .. }) => 3,
            Train(
                TrainError::NoSteps
                | TrainError::EmptyBatch
                | TrainError::BadMatchedProbability(_),
            ) => 1,
            SelftestFailed(_) => 1,
            _ => 2,
        }
    }
}

/// One run's knobs: the case plus the TrainConfig fields, directories,
/// and the scheme seed for the random-partition cases.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub case: String,
    pub steps: u64,
    pub batch_size: usize,
    pub seed: u64,
    /// Fixes the random partitions of cases 21-23; ignored elsewhere.
    pub scheme_seed: u64,
    /// `None` defers to [`SamplingPolicy::default_for`] the case.
    pub sampling: Option<SamplingPolicy>,
    pub eval_every: u64,
    pub eval_subset: usize,
    pub data_dir: PathBuf,
    /// Defaults to `runs/<case>` when unset.
    pub out_dir: Option<PathBuf>,
    pub threads: usize,
}

impl ExperimentConfig {
    pub fn new(case: &str) -> Self {
        ExperimentConfig {
            case: case.to_string(),
            steps: 10_000,
            batch_size: 100,
            seed: 1,
            scheme_seed: 1,
            sampling: None,
            eval_every: 500,
            eval_subset: 1_000,
            data_dir: PathBuf::from("data"),
            out_dir: None,
            threads: 1,
        }
    }

    /// Parses the flat `key = value` config format. Blank lines and
    /// `#`-comments are skipped; unknown keys are hard errors.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut case = None;
        let mut config = ExperimentConfig::new("");
        for (index, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let number = index + 1;
            let Some((key, value)) = line.split_once('=') else {
                return Err(ExperimentError::BadLine {
                    line: number,
                    text: raw.to_string(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "case" => case = Some(value.to_string()),
                "steps" => config.steps = parse_number("steps", value)?,
                "batch_size" => config.batch_size = parse_number("batch_size", value)?,
                "seed" => config.seed = parse_number("seed", value)?,
                "scheme_seed" => config.scheme_seed = parse_number("scheme_seed", value)?,
                "sampling" => config.sampling = parse_sampling(value)?,
                "eval_every" => config.eval_every = parse_number("eval_every", value)?,
                "eval_subset" => config.eval_subset = parse_number("eval_subset", value)?,
                "data_dir" => config.data_dir = PathBuf::from(value),
                "out_dir" => config.out_dir = Some(PathBuf::from(value)),
                "threads" => {
                    config.threads = parse_number("threads", value)?;
                    if config.threads == 0 {
                        return Err(ExperimentError::BadValue {
                            key: "threads",
                            value: value.to_string(),
                            reason: "must be at least 1".to_string(),
                        });
                    }
                }
                _ => {
                    return Err(ExperimentError::UnknownKey {
                        line: number,
                        key: key.to_string(),
                    })
                }
            }
        }
        config.case = case.ok_or(ExperimentError::MissingCase)?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(&self.case))
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            steps: self.steps,
            batch_size: self.batch_size,
            seed: self.seed,
            sampling: self.sampling,
            eval_every: self.eval_every,
            eval_subset: self.eval_subset,
            threads: self.threads,
        }
    }

    /// The provenance echo written as `config.txt`: a re-parseable
    /// config recording every knob (sampling resolved to the policy
    /// actually used), prefixed with code-version and scheme comments.
    pub fn echo(&self, resolved_sampling: SamplingPolicy, scheme_block: Option<&str>) -> String {
        let mut out = String::new();
        out.push_str("# loglearn run provenance; re-parseable as a run config.\n");
        out.push_str(&format!("# code_version: {}\n", code_version()));
        out.push_str(&format!("# code_hash: {}\n", code_hash()));
        if let Some(block) = scheme_block {
            for line in block.lines() {
                out.push_str(&format!("# {line}\n"));
            }
        }
        out.push_str(&format!("case = {}\n", self.case));
        out.push_str(&format!("steps = {}\n", self.steps));
        out.push_str(&format!("batch_size = {}\n", self.batch_size));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("scheme_seed = {}\n", self.scheme_seed));
        out.push_str(&format!(
            "sampling = {}\n",
            sampling_name(resolved_sampling)
        ));
        out.push_str(&format!("eval_every = {}\n", self.eval_every));
        out.push_str(&format!("eval_subset = {}\n", self.eval_subset));
        out.push_str(&format!("data_dir = {}\n", self.data_dir.display()));
        out.push_str(&format!(
            "out_dir = {}\n",
            self.resolved_out_dir().display()
        ));
        out.push_str(&format!("threads = {}\n", self.threads));
        out
    }
}

fn parse_number<N: std::str::FromStr>(
    key: &'static str,
    value: &str,
) -> Result<N, ExperimentError>
where
    N::Err: std::fmt::Display,
{
    value.parse().map_err(|e: N::Err| ExperimentError::BadValue {
        key,
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn parse_sampling(value: &str) -> Result<Option<SamplingPolicy>, ExperimentError> {
    if value == "default" {
        return Ok(None);
    }
    if value == "uniform" {
        return Ok(Some(SamplingPolicy::UniformAugmented));
    }
    if let Some(p) = value.strip_prefix("matched:") {
        let matched_probability = parse_number::<f64>("sampling", p)?;
        if !(matched_probability > 0.0 && matched_probability < 1.0) {
            return Err(ExperimentError::BadValue {
                key: "sampling",
                value: value.to_string(),
                reason: "matched probability must lie strictly between 0 and 1".to_string(),
            });
        }
        return Ok(Some(SamplingPolicy::MatchedBalanced {
            matched_probability,
        }));
    }
    Err(ExperimentError::BadValue {
        key: "sampling",
        value: value.to_string(),
        reason: "expected `uniform`, `matched:<p>`, or `default`".to_string(),
    })
}

fn sampling_name(policy: SamplingPolicy) -> String {
    match policy {
        SamplingPolicy::UniformAugmented => "uniform".to_string(),
        SamplingPolicy::MatchedBalanced {
            matched_probability,
        } => format!("matched:{matched_probability}"),
    }
}

/// `<name> <version>` of this build; recorded in every result bundle.
pub fn code_version() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

/// Content hash of the version string (CRC32, rendered like a short git
/// object id) for quick provenance comparison between result bundles.
pub fn code_hash() -> String {
    format!("{:08x}", crc32fast::hash(code_version().as_bytes()))
}

fn write_file(path: &Path, content: &str) -> Result<(), ExperimentError> {
    fs::write(path, content).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// train_log.csv: one row per step with the loss, wall-clock, and
/// schedule learning rate; snapshot rows carry the test-probe accuracy.
fn train_log_csv(log: &TrainLog) -> String {
    let mut out = String::from("step,loss,millis,learning_rate,eval_accuracy\n");
    let mut snapshots = log.snapshots.iter().peekable();
    for (index, (&loss, &millis)) in log.losses.iter().zip(&log.step_millis).enumerate() {
        let step = index as u64 + 1;
        let eval = match snapshots.peek() {
            Some(s) if s.step == step => snapshots
                .next()
                .and_then(|s| s.eval_accuracy)
                .map(|a| format!("{a:.6}"))
                .unwrap_or_default(),
            _ => String::new(),
        };
        out.push_str(&format!(
            "{step},{loss:.6},{millis:.3},{lr:.6},{eval}\n",
            lr = learning_rate(index as u64)
        ));
    }
    out
}

/// Result of the training half of a run.
pub struct TrainedRun {
    pub out_dir: PathBuf,
    pub task: Task,
    pub sampling: SamplingPolicy,
}

/// Trains the configured case and writes checkpoint.bin, train_log.csv,
/// and the config.txt provenance echo into the output directory.
pub fn train_case(
    config: &ExperimentConfig,
    progress: impl FnMut(&TrainSnapshot),
) -> Result<TrainedRun, ExperimentError> {
    let task = catalog(&config.case, config.scheme_seed)?;
    let train_data = load_split(&config.data_dir, Split::Train)?;
    let test_data = load_split(&config.data_dir, Split::Test)?;
    let outcome = train(
        &task,
        &train_data,
        Some(&test_data),
        &config.train_config(),
        progress,
    )?;

    let out_dir = config.resolved_out_dir();
    fs::create_dir_all(&out_dir).map_err(|source| ExperimentError::Io {
        path: out_dir.clone(),
        source,
    })?;
    checkpoint::save(&outcome.params, &out_dir.join("checkpoint.bin"))?;
    write_file(&out_dir.join("train_log.csv"), &train_log_csv(&outcome.log))?;
    let scheme_block = task.hybrid().map(|spec| spec.describe());
    write_file(
        &out_dir.join("config.txt"),
        &config.echo(outcome.sampling, scheme_block.as_deref()),
    )?;
    Ok(TrainedRun {
        out_dir,
        task,
        sampling: outcome.sampling,
    })
}

/// Loads the checkpoint from the configured output directory, evaluates
/// it on the test split, and writes metrics.txt (plus verdicts.csv for
/// hybrid cases). Returns the parsed metrics.
pub fn evaluate_case(config: &ExperimentConfig) -> Result<StoredMetrics, ExperimentError> {
    let task = catalog(&config.case, config.scheme_seed)?;
    let test_data = load_split(&config.data_dir, Split::Test)?;
    let out_dir = config.resolved_out_dir();
    let params = checkpoint::load(&out_dir.join("checkpoint.bin"))?;
    let stored = match task.hybrid() {
        None => {
            let m = evaluate_benchmark(&params, &test_data)?;
            write_file(&out_dir.join("metrics.txt"), &m.render())?;
            StoredMetrics::Benchmark(m)
        }
        Some(spec) => {
            let (m, verdicts) = evaluate(&params, spec, &test_data)?;
            write_file(&out_dir.join("metrics.txt"), &m.render(&config.case))?;
            write_file(
                &out_dir.join("verdicts.csv"),
                &verdict_csv(spec, &test_data, &verdicts),
            )?;
            StoredMetrics::Hybrid {
                case: config.case.clone(),
                metrics: m,
            }
        }
    };
    Ok(stored)
}

/// A full run: train, then evaluate from the written checkpoint. The
/// result bundle is self-describing — `evaluate_case` over the echoed
/// config reproduces metrics.txt bit-exactly in single-threaded mode.
pub fn run_case(
    config: &ExperimentConfig,
    progress: impl FnMut(&TrainSnapshot),
) -> Result<StoredMetrics, ExperimentError> {
    train_case(config, progress)?;
    evaluate_case(config)
}

/// Outcome of the in-product reasoner oracle suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SelftestReport {
    pub cases: usize,
    pub trials_per_case: u64,
    pub mismatches: u64,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.mismatches == 0
    }
}

/// Checks `reason` against a brute-force restatement of the paper's two
/// logical checks on random synthetic bundles, across every cataloged
/// case. Covers verdict kind and fallback choice.
pub fn selftest(trials_per_case: u64, seed: u64) -> SelftestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0u64;
    for case in HYBRID_CASES {
        let task = catalog(case, 1).expect("cataloged case");
        let spec = task.hybrid().expect("hybrid case");
        let conflict = spec.conflict_index();
        for _ in 0..trials_per_case {
            let records: Vec<IndicatorPrediction> = (0..spec.indicator_count())
                .map(|indicator| IndicatorPrediction {
                    indicator,
                    predicted: rng.random_range(0..spec.output_count()),
                    confidence: rng.random::<f32>(),
                })
                .collect();

            // Brute-force restatement of §2.2, written against raw
            // records rather than the reasoner's helpers.
            let mut claimants = Vec::new();
            for record in &records {
                if record.predicted != conflict {
                    claimants.push(*record);
                }
            }
            let expected_kind = if claimants.len() != 1 {
                VerdictKind::Illogical(
                    crate::reason::IllogicalReason::ConflictCountFailed {
                        non_conflict: claimants.len(),
                    },
                )
            } else {
                let claimant = claimants[0];
                let complies = if spec.compliance_available() {
                    spec.compliant(claimant.indicator, claimant.predicted)
                        .expect("compliance available")
                } else {
                    true
                };
                if complies {
                    VerdictKind::Logical {
                        indicator: claimant.indicator,
                        output: claimant.predicted,
                    }
                } else {
                    VerdictKind::Illogical(crate::reason::IllogicalReason::ComplianceFailed {
                        indicator: claimant.indicator,
                        output: claimant.predicted,
                    })
                }
            };
            let expected_fallback = {
                let pool = if claimants.is_empty() {
                    &records
                } else {
                    &claimants
                };
                let mut best = pool[0];
                for candidate in &pool[1..] {
                    if candidate.confidence > best.confidence {
                        best = *candidate;
                    }
                }
                best
            };

            let verdict = reason(spec, PredictionBundle { records });
            let agrees = verdict.kind == expected_kind
                && verdict.fallback.indicator == expected_fallback.indicator
                && verdict.fallback.output == expected_fallback.predicted
                && verdict.fallback.confidence == expected_fallback.confidence;
            mismatches += u64::from(!agrees);
        }
    }
    SelftestReport {
        cases: HYBRID_CASES.len(),
        trials_per_case,
        mismatches,
    }
}
