//! Hybrid classifiers with auxiliary indicator inputs, conflict-label
//! training, and logical verdict checking on MNIST.
//!
//! The library trains a small convolutional network that receives two
//! inputs: a digit image and an indicator value drawn from a finite set.
//! Each indicator stands for a group of digits; during training every
//! image is paired with every indicator, and pairs whose indicator does
//! not suggest the image's label are taught a dedicated conflict label.
//! At inference the network is run once per indicator and the resulting
//! prediction bundle is checked for logical consistency: exactly one
//! indicator may claim the image, and (where defined) its prediction must
//! comply with the indicator. Bundles that fail the checks are flagged
//! instead of silently answered.
//!
//! Modules:
//! - [`data`]: MNIST IDX ingest and normalization.
//! - [`scheme`]: indicator partitions, compliance relations and the case
//!   catalog.
//! - [`augment`]: the image × indicator cross-product with conflict
//!   targets.
//! - [`nn`]: the network, its gradients, Adam, and finite-difference
//!   checking.
//! - [`checkpoint`]: the binary model file format.
//! - [`reason`]: per-indicator prediction bundles and the logical checks.
//! - [`train`]: the batch sampler and the Adam training loop.
//! - [`experiment`]: config-driven runs, metrics, reports, and the
//!   reasoner self-test backing the `loglearn` CLI.

pub mod augment;
pub mod checkpoint;
pub mod data;
pub mod experiment;
pub mod nn;
pub mod reason;
pub mod scheme;
pub mod train;

pub use augment::AugmentedView;
pub use data::{Dataset, Split};
pub use experiment::{ExperimentConfig, Metrics};
pub use nn::{ModelParams, ModelShape};
pub use reason::{PredictionBundle, Verdict, VerdictKind};
pub use scheme::{catalog, IndicatorEncoding, Partition, Task, TaskSpec};
pub use train::{SamplingPolicy, TrainConfig};
