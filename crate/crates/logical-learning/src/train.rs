//! Training: batch sampling over the augmented cross-product, Adam
//! updates on the decaying schedule, and periodic progress snapshots.
//!
//! Gradients are accumulated in fixed chunks of 25 examples which are
//! then reduced in chunk order, so results are bit-identical for any
//! thread count — parallelism only changes who computes each chunk.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::augment::target_for;
use crate::data::{Dataset, Split};
use crate::nn::optim::{learning_rate, Adam};
use crate::nn::{
    argmax, backward_into, cross_entropy_loss, forward_into, BackwardScratch, ForwardTrace,
    ModelParams, ModelShape,
};
use crate::scheme::{Task, TaskSpec};

/// Examples per gradient-accumulation chunk; the reduction over chunks is
/// ordered, making training results independent of the thread count.
const CHUNK: usize = 25;

/// Decorrelates the batch sampler from the weight initialization, which
/// consumes a variable number of draws from its own stream.
const SAMPLER_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training data must come from the train split, got the {0:?} split")]
    WrongSplit(Split),
    #[error("evaluation data must come from the test split, got the {0:?} split")]
    EvalSplit(Split),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("steps must be at least 1")]
    NoSteps,
    #[error("batch size must be at least 1")]
    EmptyBatch,
    #[error("matched probability must lie strictly between 0 and 1, got {0}")]
    BadMatchedProbability(f64),
    #[error("loss became non-finite at step {step}")]
    DivergedLoss { step: u64 },
}

/// How image/indicator pairs are drawn from the augmented cross-product.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SamplingPolicy {
    /// Uniform over all dataset-size × L augmented examples. With many
    /// indicators almost every draw is a conflict example.
    UniformAugmented,
    /// Uniform image, then the matching indicator with probability
    /// `matched_probability`, otherwise a uniform non-matching one. Keeps
    /// the true labels visible when L is large.
    MatchedBalanced { matched_probability: f64 },
}

impl SamplingPolicy {
    /// Policy used when a run does not pin one: the cross-product stays
    /// balanced enough up to three indicators; beyond that the matched
    /// pairs are re-weighted to half the batch.
    pub fn default_for(indicator_count: usize) -> Self {
        if indicator_count >= 4 {
            SamplingPolicy::MatchedBalanced {
                matched_probability: 0.5,
            }
        } else {
            SamplingPolicy::UniformAugmented
        }
    }

    /// Draws one (image index, indicator) pair.
    pub fn sample(&self, rng: &mut ChaCha8Rng, data: &Dataset, spec: &TaskSpec) -> (usize, usize) {
        let l = spec.indicator_count();
        match *self {
            SamplingPolicy::UniformAugmented => {
                let flat = rng.random_range(0..data.len() * l);
                (flat / l, flat % l)
            }
            SamplingPolicy::MatchedBalanced { matched_probability } => {
                let image = rng.random_range(0..data.len());
                let matching = spec.matching_indicator(data.label(image));
                let indicator = if rng.random::<f64>() < matched_probability {
                    matching
                } else {
                    let other = rng.random_range(0..l - 1);
                    other + usize::from(other >= matching)
                };
                (image, indicator)
            }
        }
    }
}

/// Knobs for one training run.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub seed: u64,
    /// `None` selects [`SamplingPolicy::default_for`] the task.
    pub sampling: Option<SamplingPolicy>,
    /// Snapshot cadence in steps; 0 snapshots only at the end.
    pub eval_every: u64,
    /// Test images in the periodic accuracy probe.
    pub eval_subset: usize,
    /// Worker threads; results do not depend on this.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 10_000,
            batch_size: 100,
            seed: 1,
            sampling: None,
            eval_every: 500,
            eval_subset: 1000,
            threads: 1,
        }
    }
}

/// One progress row of the training log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainSnapshot {
    /// Completed steps (1-based).
    pub step: u64,
    /// Learning rate applied at that step.
    pub learning_rate: f64,
    /// Mean batch loss since the previous snapshot.
    pub mean_loss: f64,
    /// Per-pair argmax accuracy on the test-split probe subset; `None`
    /// when the run was given no evaluation data.
    pub eval_accuracy: Option<f64>,
}

/// Everything a run records besides the weights: the per-step loss
/// series, per-step wall-clock, and the periodic evaluation snapshots.
#[derive(Clone, Debug, Default)]
pub struct TrainLog {
    /// Mean batch loss at each step, in step order.
    pub losses: Vec<f64>,
    /// Wall-clock milliseconds spent on each step (sampling through the
    /// optimizer update). Excluded from determinism comparisons.
    pub step_millis: Vec<f64>,
    pub snapshots: Vec<TrainSnapshot>,
}

pub struct TrainOutcome {
    pub params: ModelParams<f32>,
    pub log: TrainLog,
    /// Sampling policy actually used (after defaulting).
    pub sampling: SamplingPolicy,
}

struct Worker {
    grads: ModelParams<f32>,
    trace: ForwardTrace<f32>,
    scratch: BackwardScratch<f32>,
    loss: f64,
}

/// Fraction of (image, indicator) pairs over the probe subset whose
/// argmax hits the training target; the benchmark probes plain labels.
pub fn apparent_accuracy(
    params: &ModelParams<f32>,
    task: &Task,
    data: &Dataset,
    limit: usize,
) -> f64 {
    let mut trace = ForwardTrace::new(&params.shape);
    let images = data.len().min(limit);
    if images == 0 {
        return 0.0;
    }
    let mut correct = 0u64;
    let mut total = 0u64;
    for index in 0..images {
        let pixels = data.image_normalized(index);
        match task.hybrid() {
            None => {
                forward_into(params, &pixels, &[], &mut trace);
                correct += u64::from(argmax(&trace.probs) == data.label(index) as usize);
                total += 1;
            }
            Some(spec) => {
                for z in 0..spec.indicator_count() {
                    forward_into(params, &pixels, spec.encoding().encode(z), &mut trace);
                    let target = target_for(spec, z, data.label(index));
                    correct += u64::from(argmax(&trace.probs) == target);
                    total += 1;
                }
            }
        }
    }
    correct as f64 / total as f64
}

/// Trains a fresh model for `task`. Gradient steps consume only `data`
/// (the train split); `eval` — the test split — is read exclusively by
/// the periodic accuracy probe. `on_snapshot` observes each progress row
/// as it is produced (the CLI prints them; tests collect them).
pub fn train(
    task: &Task,
    data: &Dataset,
    eval: Option<&Dataset>,
    config: &TrainConfig,
    mut on_snapshot: impl FnMut(&TrainSnapshot),
) -> Result<TrainOutcome, TrainError> {
    if data.split() != Split::Train {
        return Err(TrainError::WrongSplit(data.split()));
    }
    if let Some(eval) = eval {
        if eval.split() != Split::Test {
            return Err(TrainError::EvalSplit(eval.split()));
        }
    }
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if config.steps == 0 {
        return Err(TrainError::NoSteps);
    }
    if config.batch_size == 0 {
        return Err(TrainError::EmptyBatch);
    }
    if let Some(SamplingPolicy::MatchedBalanced { matched_probability: p }) = config.sampling {
        if !(p > 0.0 && p < 1.0) {
            return Err(TrainError::BadMatchedProbability(p));
        }
    }

    let spec = task.hybrid();
    let sampling = config.sampling.unwrap_or_else(|| match spec {
        Some(s) => SamplingPolicy::default_for(s.indicator_count()),
        None => SamplingPolicy::UniformAugmented,
    });
    let shape = ModelShape::standard(task.indicator_width(), task.output_count());
    let mut params = ModelParams::<f32>::init(&shape, config.seed);
    let mut adam = Adam::new(&shape);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SAMPLER_SALT);

    let chunk_count = config.batch_size.div_ceil(CHUNK);
    let mut workers: Vec<Worker> = (0..chunk_count)
        .map(|_| Worker {
            grads: ModelParams::zeros(&shape),
            trace: ForwardTrace::new(&shape),
            scratch: BackwardScratch::new(&shape),
            loss: 0.0,
        })
        .collect();
    let mut grads = ModelParams::<f32>::zeros(&shape);

    let pool = (config.threads > 1)
        .then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .expect("thread pool")
        });

    let mut log = TrainLog::default();
    let mut interval_loss = 0.0;
    let mut interval_batches = 0u64;
    let mut batch = Vec::with_capacity(config.batch_size);

    for step in 0..config.steps {
        let step_start = std::time::Instant::now();
        batch.clear();
        for _ in 0..config.batch_size {
            batch.push(match spec {
                Some(s) => sampling.sample(&mut rng, data, s),
                None => (rng.random_range(0..data.len()), 0),
            });
        }

        let run_chunks = |workers: &mut [Worker]| {
            workers
                .par_iter_mut()
                .zip(batch.par_chunks(CHUNK))
                .for_each(|(worker, chunk)| {
                    worker.grads.fill_zero();
                    worker.loss = 0.0;
                    for &(image, indicator) in chunk {
                        let pixels = data.image_normalized(image);
                        let (encoded, target): (&[f32], usize) = match spec {
                            Some(s) => (
                                s.encoding().encode(indicator),
                                target_for(s, indicator, data.label(image)),
                            ),
                            None => (&[], data.label(image) as usize),
                        };
                        forward_into(&params, &pixels, encoded, &mut worker.trace);
                        worker.loss += cross_entropy_loss(&worker.trace, target) as f64;
                        backward_into(
                            &params,
                            &worker.trace,
                            target,
                            &mut worker.grads,
                            &mut worker.scratch,
                        );
                    }
                });
        };
        match &pool {
            Some(pool) => pool.install(|| run_chunks(&mut workers)),
            None => run_chunks(&mut workers),
        }

        grads.fill_zero();
        let mut batch_loss = 0.0;
        for worker in workers.iter().take(batch.len().div_ceil(CHUNK)) {
            grads.add_scaled(&worker.grads, 1.0);
            batch_loss += worker.loss;
        }
        let mean_loss = batch_loss / batch.len() as f64;
        if !mean_loss.is_finite() {
            return Err(TrainError::DivergedLoss { step });
        }
        grads.scale(1.0 / batch.len() as f32);
        let lr = learning_rate(step);
        adam.step(&mut params, &grads, lr as f32);

        log.losses.push(mean_loss);
        log.step_millis
            .push(step_start.elapsed().as_secs_f64() * 1e3);
        interval_loss += mean_loss;
        interval_batches += 1;
        let completed = step + 1;
        let due = config.eval_every > 0 && completed % config.eval_every == 0;
        if due || completed == config.steps {
            let snapshot = TrainSnapshot {
                step: completed,
                learning_rate: lr,
                mean_loss: interval_loss / interval_batches as f64,
                eval_accuracy: eval
                    .map(|eval| apparent_accuracy(&params, task, eval, config.eval_subset)),
            };
            on_snapshot(&snapshot);
            log.snapshots.push(snapshot);
            interval_loss = 0.0;
            interval_batches = 0;
        }
    }

    Ok(TrainOutcome {
        params,
        log,
        sampling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::IMAGE_PIXELS;
    use crate::scheme::catalog;

    /// Synthetic 28x28 dataset: label-dependent blocks so the targets are
    /// learnable in a few steps.
    fn synthetic_split(count: usize, split: Split) -> Dataset {
        let images: Vec<[u8; IMAGE_PIXELS]> = (0..count)
            .map(|i| {
                let label = (i % 10) as u8;
                let mut img = [0u8; IMAGE_PIXELS];
                let base = label as usize * 70;
                for p in 0..70 {
                    img[base + p] = 200;
                }
                img
            })
            .collect();
        let labels = (0..count).map(|i| (i % 10) as u8).collect();
        Dataset::new(images, labels, split).unwrap()
    }

    fn synthetic_dataset(count: usize) -> Dataset {
        synthetic_split(count, Split::Train)
    }

    fn tiny_config(steps: u64) -> TrainConfig {
        TrainConfig {
            steps,
            batch_size: 8,
            seed: 3,
            sampling: None,
            eval_every: 0,
            eval_subset: 20,
            threads: 1,
        }
    }

    #[test]
    fn sampling_defaults_follow_indicator_count() {
        assert_eq!(
            SamplingPolicy::default_for(2),
            SamplingPolicy::UniformAugmented
        );
        assert_eq!(
            SamplingPolicy::default_for(4),
            SamplingPolicy::MatchedBalanced {
                matched_probability: 0.5
            }
        );
        assert_eq!(
            SamplingPolicy::default_for(10),
            SamplingPolicy::MatchedBalanced {
                matched_probability: 0.5
            }
        );
    }

    #[test]
    fn uniform_sampling_hits_the_conflict_fraction() {
        let data = synthetic_dataset(50);
        let spec = catalog("24", 1).unwrap().hybrid().unwrap().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let draws = 100_000;
        let conflicts = (0..draws)
            .filter(|_| {
                let (image, indicator) = SamplingPolicy::UniformAugmented.sample(&mut rng, &data, &spec);
                !spec.suggests(indicator, data.label(image))
            })
            .count();
        let fraction = conflicts as f64 / draws as f64;
        assert!((fraction - 0.9).abs() < 0.01, "fraction {fraction}");
    }

    #[test]
    fn matched_balanced_sampling_hits_its_probability() {
        let data = synthetic_dataset(50);
        let spec = catalog("24", 1).unwrap().hybrid().unwrap().clone();
        let policy = SamplingPolicy::MatchedBalanced {
            matched_probability: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let draws = 100_000;
        let mut matched = 0usize;
        let mut per_other = vec![0usize; 10];
        for _ in 0..draws {
            let (image, indicator) = policy.sample(&mut rng, &data, &spec);
            if spec.suggests(indicator, data.label(image)) {
                matched += 1;
            } else {
                per_other[indicator] += 1;
            }
        }
        let fraction = matched as f64 / draws as f64;
        assert!((fraction - 0.5).abs() < 0.01, "fraction {fraction}");
        // Non-matching indicators are drawn uniformly: each of the nine
        // others should hold about a ninth of the conflict draws.
        let conflict_draws: usize = per_other.iter().sum();
        for (z, &count) in per_other.iter().enumerate() {
            let share = count as f64 / conflict_draws as f64;
            assert!((share - 1.0 / 9.0).abs() < 0.02, "indicator {z}: {share}");
        }
    }

    #[test]
    fn training_is_deterministic_for_a_fixed_seed() {
        let data = synthetic_dataset(40);
        let task = catalog("11", 1).unwrap();
        let config = tiny_config(5);
        let a = train(&task, &data, None, &config, |_| {}).unwrap();
        let b = train(&task, &data, None, &config, |_| {}).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.log.snapshots, b.log.snapshots);
        assert_eq!(a.log.losses, b.log.losses);

        let mut other = config;
        other.seed = 4;
        let c = train(&task, &data, None, &other, |_| {}).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn chunked_reduction_makes_thread_count_irrelevant() {
        let data = synthetic_dataset(40);
        let task = catalog("11", 1).unwrap();
        let mut config = tiny_config(4);
        config.batch_size = 60; // several chunks
        let single = train(&task, &data, None, &config, |_| {}).unwrap();
        config.threads = 3;
        let multi = train(&task, &data, None, &config, |_| {}).unwrap();
        assert_eq!(single.params, multi.params);
    }

    #[test]
    fn loss_decreases_on_learnable_synthetic_data() {
        let data = synthetic_dataset(40);
        let eval = synthetic_split(20, Split::Test);
        let task = catalog("benchmark", 1).unwrap();
        let mut config = tiny_config(60);
        config.eval_every = 20;
        let outcome = train(&task, &data, Some(&eval), &config, |_| {}).unwrap();
        let first = outcome.log.snapshots.first().unwrap();
        let last = outcome.log.snapshots.last().unwrap();
        assert!(
            last.mean_loss < first.mean_loss,
            "loss {} -> {}",
            first.mean_loss,
            last.mean_loss
        );
        let accuracy = last.eval_accuracy.unwrap();
        assert!(accuracy > 0.5, "accuracy {accuracy}");
    }

    #[test]
    fn single_example_loss_strictly_decreases_over_ten_steps() {
        // Learnability smoke property from the spec: full-batch steps on
        // one example must strictly reduce that example's loss each step.
        let data = synthetic_dataset(1);
        let task = catalog("benchmark", 1).unwrap();
        let mut config = tiny_config(10);
        config.batch_size = 1;
        let outcome = train(&task, &data, None, &config, |_| {}).unwrap();
        assert_eq!(outcome.log.losses.len(), 10);
        for pair in outcome.log.losses.windows(2) {
            assert!(pair[1] < pair[0], "losses {:?}", outcome.log.losses);
        }
        assert_eq!(outcome.log.step_millis.len(), 10);
    }

    #[test]
    fn snapshots_follow_the_cadence_and_include_the_end() {
        let data = synthetic_dataset(20);
        let task = catalog("benchmark", 1).unwrap();
        let mut config = tiny_config(25);
        config.eval_every = 10;
        let outcome = train(&task, &data, None, &config, |_| {}).unwrap();
        let steps: Vec<u64> = outcome.log.snapshots.iter().map(|s| s.step).collect();
        assert_eq!(steps, vec![10, 20, 25]);
        assert!((outcome.log.snapshots[0].learning_rate - learning_rate(9)).abs() < 1e-15);
        assert_eq!(outcome.log.losses.len(), 25);
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let train_data = synthetic_dataset(20);
        let task = catalog("11", 1).unwrap();
        assert!(matches!(
            train(&task, &train_data, None, &tiny_config(0), |_| {}),
            Err(TrainError::NoSteps)
        ));
        let mut empty_batch = tiny_config(1);
        empty_batch.batch_size = 0;
        assert!(matches!(
            train(&task, &train_data, None, &empty_batch, |_| {}),
            Err(TrainError::EmptyBatch)
        ));

        let mut skewed = tiny_config(1);
        skewed.sampling = Some(SamplingPolicy::MatchedBalanced {
            matched_probability: 1.0,
        });
        assert!(matches!(
            train(&task, &train_data, None, &skewed, |_| {}),
            Err(TrainError::BadMatchedProbability(_))
        ));

        let test_data = synthetic_split(10, Split::Test);
        assert!(matches!(
            train(&task, &test_data, None, &tiny_config(1), |_| {}),
            Err(TrainError::WrongSplit(Split::Test))
        ));
        assert!(matches!(
            train(&task, &train_data, Some(&train_data), &tiny_config(1), |_| {}),
            Err(TrainError::EvalSplit(Split::Train))
        ));
    }

    #[test]
    fn hybrid_training_beats_chance_quickly() {
        let data = synthetic_dataset(40);
        let eval = synthetic_split(20, Split::Test);
        let task = catalog("11", 1).unwrap();
        let mut config = tiny_config(80);
        config.batch_size = 16;
        let outcome = train(&task, &data, Some(&eval), &config, |_| {}).unwrap();
        // Eleven outputs; the probe mixes matched and conflict pairs.
        let accuracy = outcome.log.snapshots.last().unwrap().eval_accuracy.unwrap();
        assert!(accuracy > 0.5, "accuracy {accuracy}");
        assert_eq!(outcome.sampling, SamplingPolicy::UniformAugmented);
    }
}
