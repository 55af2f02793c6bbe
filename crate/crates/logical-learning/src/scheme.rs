//! Indicator schemes: partitions of the digit labels, the suggests and
//! compliance relations, the projection onto each task's output space, and
//! the catalog of benchmark cases.
//!
//! An indicator is an auxiliary input value that narrows the set of output
//! labels an image may take. Each task pairs a partition of the ten digits
//! (one group per indicator) with an output space whose final slot is the
//! conflict label.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::DIGITS;

/// Case ids of every hybrid task in the catalog.
pub const HYBRID_CASES: [&str; 11] = [
    "11", "12", "13", "14", "21", "22", "23", "24", "31", "32", "33",
];

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("unknown case id {0:?}")]
    UnknownCase(String),
    #[error("group sizes {sizes:?} must each be >= 1 and sum to 10")]
    BadSizes { sizes: Vec<usize> },
    #[error("compliance relation is undefined for case {0}")]
    ComplianceUndefined(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
}

/// Disjoint non-empty digit groups covering all of 0..=9, one per
/// indicator. Display names are cosmetic and excluded from equality.
#[derive(Clone, Debug)]
pub struct Partition {
    groups: Vec<Vec<u8>>,
    names: Vec<String>,
}

impl PartialEq for Partition {
    fn eq(&self, other: &Self) -> bool {
        self.groups == other.groups
    }
}

impl Partition {
    pub fn new(groups: Vec<Vec<u8>>, names: Vec<String>) -> Result<Self, SchemeError> {
        if groups.len() < 2 {
            return Err(SchemeError::InvalidPartition(format!(
                "need at least 2 groups, got {}",
                groups.len()
            )));
        }
        if names.len() != groups.len() {
            return Err(SchemeError::InvalidPartition(format!(
                "{} names for {} groups",
                names.len(),
                groups.len()
            )));
        }
        let mut seen = [false; DIGITS];
        for group in &groups {
            if group.is_empty() {
                return Err(SchemeError::InvalidPartition("empty group".into()));
            }
            for &digit in group {
                if digit as usize >= DIGITS {
                    return Err(SchemeError::InvalidPartition(format!(
                        "digit {digit} out of range"
                    )));
                }
                if seen[digit as usize] {
                    return Err(SchemeError::InvalidPartition(format!(
                        "digit {digit} appears in two groups"
                    )));
                }
                seen[digit as usize] = true;
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(SchemeError::InvalidPartition(
                "groups do not cover all ten digits".into(),
            ));
        }
        let mut groups = groups;
        for group in &mut groups {
            group.sort_unstable();
        }
        Ok(Partition { groups, names })
    }

    /// Number of groups, i.e. the indicator count L.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn groups(&self) -> &[Vec<u8>] {
        &self.groups
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Index of the unique group containing `digit`.
    pub fn group_of(&self, digit: u8) -> usize {
        self.groups
            .iter()
            .position(|g| g.contains(&digit))
            .expect("partition covers every digit")
    }
}

/// Deterministically draws a partition with the given group sizes.
pub fn random_partition(seed: u64, sizes: &[usize]) -> Result<Partition, SchemeError> {
    if sizes.iter().sum::<usize>() != DIGITS || sizes.iter().any(|&s| s == 0) {
        return Err(SchemeError::BadSizes {
            sizes: sizes.to_vec(),
        });
    }
    let mut digits: Vec<u8> = (0..DIGITS as u8).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    digits.shuffle(&mut rng);
    let mut groups = Vec::with_capacity(sizes.len());
    let mut offset = 0;
    for &size in sizes {
        let mut group: Vec<u8> = digits[offset..offset + size].to_vec();
        group.sort_unstable();
        groups.push(group);
        offset += size;
    }
    let names = groups.iter().map(|g| group_name(g)).collect();
    Partition::new(groups, names)
}

fn group_name(group: &[u8]) -> String {
    let digits: Vec<String> = group.iter().map(|d| d.to_string()).collect();
    format!("{{{}}}", digits.join(","))
}

/// How an indicator index is presented to the network: a fixed row of
/// reals per indicator (one-hot, or concatenated one-hots for
/// multi-axis schemes).
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorEncoding {
    width: usize,
    rows: Vec<Vec<f32>>,
}

impl IndicatorEncoding {
    fn one_hot(count: usize) -> Self {
        let rows = (0..count)
            .map(|i| {
                let mut row = vec![0.0; count];
                row[i] = 1.0;
                row
            })
            .collect();
        IndicatorEncoding { width: count, rows }
    }

    /// Concatenated one-hot axes; indicator `i` decomposes into one cell
    /// index per axis (row-major over axis sizes).
    fn multi_hot(axis_sizes: &[usize]) -> Self {
        let width: usize = axis_sizes.iter().sum();
        let count: usize = axis_sizes.iter().product();
        let rows = (0..count)
            .map(|mut cell| {
                let mut row = vec![0.0; width];
                let mut axis_cells = vec![0usize; axis_sizes.len()];
                for (slot, &size) in axis_cells.iter_mut().zip(axis_sizes).rev() {
                    *slot = cell % size;
                    cell /= size;
                }
                let mut offset = 0;
                for (&axis_cell, &size) in axis_cells.iter().zip(axis_sizes) {
                    row[offset + axis_cell] = 1.0;
                    offset += size;
                }
                row
            })
            .collect();
        IndicatorEncoding { width, rows }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn encode(&self, indicator: usize) -> &[f32] {
        &self.rows[indicator]
    }
}

/// A complete task definition: indicator partition, output space with the
/// trailing conflict slot, digit projection, and (when defined) the
/// compliance relation between indicators and non-conflict outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskSpec {
    case_id: String,
    partition: Partition,
    output_names: Vec<String>,
    project: [usize; DIGITS],
    compliance: Option<Vec<Vec<bool>>>,
    encoding: IndicatorEncoding,
    scheme_seed: Option<u64>,
}

impl TaskSpec {
    fn validate(&self) {
        let conflict = self.conflict_index();
        assert!(self.project.iter().all(|&p| p < conflict));
        for digit in 0..DIGITS as u8 {
            let suggesting = (0..self.indicator_count())
                .filter(|&z| self.suggests(z, digit))
                .count();
            assert_eq!(suggesting, 1, "digit {digit} must have one indicator");
        }
        if let Some(table) = &self.compliance {
            assert_eq!(table.len(), self.indicator_count());
            assert!(table.iter().all(|row| row.len() == conflict));
        }
        assert_eq!(self.encoding.rows.len(), self.indicator_count());
    }

    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    /// Number of indicators L.
    pub fn indicator_count(&self) -> usize {
        self.partition.len()
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// Output space size including the conflict slot.
    pub fn output_count(&self) -> usize {
        self.output_names.len()
    }

    /// The conflict label is always the last output index.
    pub fn conflict_index(&self) -> usize {
        self.output_names.len() - 1
    }

    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }

    /// Output index a correctly matched image of `digit` should produce.
    pub fn project(&self, digit: u8) -> usize {
        self.project[digit as usize]
    }

    /// True iff `digit` belongs to the group of `indicator`.
    pub fn suggests(&self, indicator: usize, digit: u8) -> bool {
        assert!(indicator < self.indicator_count());
        self.partition.groups[indicator].contains(&digit)
    }

    /// The unique indicator suggesting `digit`.
    pub fn matching_indicator(&self, digit: u8) -> usize {
        self.partition.group_of(digit)
    }

    pub fn compliance_available(&self) -> bool {
        self.compliance.is_some()
    }

    /// Whether a non-conflict output is consistent with the indicator that
    /// produced it. Undefined for schemes whose outputs carry no digit
    /// information relatable to the indicator groups.
    pub fn compliant(&self, indicator: usize, output: usize) -> Result<bool, SchemeError> {
        assert!(indicator < self.indicator_count());
        assert!(output < self.conflict_index(), "conflict output has no compliance");
        match &self.compliance {
            Some(table) => Ok(table[indicator][output]),
            None => Err(SchemeError::ComplianceUndefined(self.case_id.clone())),
        }
    }

    pub fn encoding(&self) -> &IndicatorEncoding {
        &self.encoding
    }

    pub fn scheme_seed(&self) -> Option<u64> {
        self.scheme_seed
    }

    /// Plain-text key/value block embedded in configs and result files.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scheme.case = {}\n", self.case_id));
        let groups: Vec<String> = self
            .partition
            .groups
            .iter()
            .map(|g| group_name(g))
            .collect();
        out.push_str(&format!("scheme.indicators = {}\n", groups.join(" | ")));
        out.push_str(&format!("scheme.outputs = {}\n", self.output_names.join(",")));
        if let Some(seed) = self.scheme_seed {
            out.push_str(&format!("scheme.seed = {seed}\n"));
        }
        out.push_str(&format!(
            "scheme.compliance = {}\n",
            if self.compliance.is_some() {
                "available"
            } else {
                "unavailable"
            }
        ));
        out
    }
}

/// What a training or evaluation run targets: the plain benchmark
/// classifier, or a hybrid task from the catalog.
#[derive(Clone, Debug, PartialEq)]
pub enum Task {
    Benchmark,
    Hybrid(TaskSpec),
}

impl Task {
    pub fn hybrid(&self) -> Option<&TaskSpec> {
        match self {
            Task::Benchmark => None,
            Task::Hybrid(spec) => Some(spec),
        }
    }

    /// Indicator vector width fed to the network (0 for the benchmark).
    pub fn indicator_width(&self) -> usize {
        match self {
            Task::Benchmark => 0,
            Task::Hybrid(spec) => spec.encoding().width(),
        }
    }

    /// Network output size (10 digits for the benchmark, task outputs
    /// plus conflict otherwise).
    pub fn output_count(&self) -> usize {
        match self {
            Task::Benchmark => DIGITS,
            Task::Hybrid(spec) => spec.output_count(),
        }
    }
}

fn digit_output_names() -> Vec<String> {
    let mut names: Vec<String> = (0..DIGITS).map(|d| d.to_string()).collect();
    names.push("conflict".into());
    names
}

/// A task whose outputs are the ten digits plus conflict, with membership
/// compliance derived from the partition.
fn digit_output_task(case_id: &str, partition: Partition, scheme_seed: Option<u64>) -> TaskSpec {
    let mut project = [0usize; DIGITS];
    for (digit, slot) in project.iter_mut().enumerate() {
        *slot = digit;
    }
    let compliance = Some(
        (0..partition.len())
            .map(|z| {
                (0..DIGITS)
                    .map(|digit| partition.groups()[z].contains(&(digit as u8)))
                    .collect()
            })
            .collect(),
    );
    let encoding = IndicatorEncoding::one_hot(partition.len());
    let spec = TaskSpec {
        case_id: case_id.to_string(),
        partition,
        output_names: digit_output_names(),
        project,
        compliance,
        encoding,
        scheme_seed,
    };
    spec.validate();
    spec
}

fn below_five_groups() -> (Vec<Vec<u8>>, Vec<String>) {
    (
        vec![vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8, 9]],
        vec!["<5".into(), ">=5".into()],
    )
}

fn parity_groups() -> (Vec<Vec<u8>>, Vec<String>) {
    (
        vec![vec![0, 2, 4, 6, 8], vec![1, 3, 5, 7, 9]],
        vec!["even".into(), "odd".into()],
    )
}

fn coarse_class_outputs() -> Vec<String> {
    vec!["<5".into(), ">=5".into(), "conflict".into()]
}

fn coarse_class_projection() -> [usize; DIGITS] {
    let mut project = [0usize; DIGITS];
    for (digit, slot) in project.iter_mut().enumerate() {
        *slot = usize::from(digit >= 5);
    }
    project
}

/// Case 31: the cell product of the below-five and parity partitions,
/// encoded as two concatenated one-hot axes.
fn multi_axis_task() -> TaskSpec {
    let (axis1, axis1_names) = below_five_groups();
    let (axis2, axis2_names) = parity_groups();
    let mut groups = Vec::new();
    let mut names = Vec::new();
    for (g1, n1) in axis1.iter().zip(&axis1_names) {
        for (g2, n2) in axis2.iter().zip(&axis2_names) {
            let cell: Vec<u8> = g1.iter().copied().filter(|d| g2.contains(d)).collect();
            groups.push(cell);
            names.push(format!("{n1}+{n2}"));
        }
    }
    let partition = Partition::new(groups, names).expect("product cells form a partition");
    let mut spec = digit_output_task("31", partition, None);
    spec.encoding = IndicatorEncoding::multi_hot(&[2, 2]);
    spec.validate();
    spec
}

/// Case 32: prediction reversed, ten digit indicators suggesting two
/// coarse output classes.
fn reversed_task() -> TaskSpec {
    let groups: Vec<Vec<u8>> = (0..DIGITS as u8).map(|d| vec![d]).collect();
    let names = (0..DIGITS).map(|d| d.to_string()).collect();
    let partition = Partition::new(groups, names).expect("singletons form a partition");
    let compliance = Some(
        (0..DIGITS)
            .map(|z| {
                let class = usize::from(z >= 5);
                vec![class == 0, class == 1]
            })
            .collect(),
    );
    let spec = TaskSpec {
        case_id: "32".into(),
        partition,
        output_names: coarse_class_outputs(),
        project: coarse_class_projection(),
        compliance,
        encoding: IndicatorEncoding::one_hot(DIGITS),
        scheme_seed: None,
    };
    spec.validate();
    spec
}

/// Case 33: parity indicators and coarse class outputs. Both sides are
/// abstractions of the digit, so no compliance relation exists.
fn irrelevant_task() -> TaskSpec {
    let (groups, names) = parity_groups();
    let partition = Partition::new(groups, names).expect("parity groups form a partition");
    let spec = TaskSpec {
        case_id: "33".into(),
        partition,
        output_names: coarse_class_outputs(),
        project: coarse_class_projection(),
        compliance: None,
        encoding: IndicatorEncoding::one_hot(2),
        scheme_seed: None,
    };
    spec.validate();
    spec
}

/// Resolves a case id to its task definition. `scheme_seed` fixes the
/// random groupings of cases 21-23 and is ignored elsewhere.
pub fn catalog(case_id: &str, scheme_seed: u64) -> Result<Task, SchemeError> {
    let named = |groups_names: (Vec<Vec<u8>>, Vec<String>), case: &str| {
        let partition = Partition::new(groups_names.0, groups_names.1)
            .expect("catalog partitions are valid");
        Ok(Task::Hybrid(digit_output_task(case, partition, None)))
    };
    match case_id {
        "benchmark" => Ok(Task::Benchmark),
        "11" => named(below_five_groups(), "11"),
        "12" => named(parity_groups(), "12"),
        "13" => named(
            (
                vec![vec![2, 3, 5, 7], vec![0, 1, 4, 6, 8, 9]],
                vec!["prime".into(), "non-prime".into()],
            ),
            "13",
        ),
        "14" => named(
            (
                vec![vec![0], vec![1, 2, 3, 4, 5, 6, 7, 8, 9]],
                vec!["zero".into(), "non-zero".into()],
            ),
            "14",
        ),
        "21" => Ok(Task::Hybrid(digit_output_task(
            "21",
            random_partition(scheme_seed, &[5, 5])?,
            Some(scheme_seed),
        ))),
        "22" => Ok(Task::Hybrid(digit_output_task(
            "22",
            random_partition(scheme_seed, &[3, 7])?,
            Some(scheme_seed),
        ))),
        "23" => Ok(Task::Hybrid(digit_output_task(
            "23",
            random_partition(scheme_seed, &[2, 2, 2, 2, 2])?,
            Some(scheme_seed),
        ))),
        "24" => {
            let groups: Vec<Vec<u8>> = (0..DIGITS as u8).map(|d| vec![d]).collect();
            let names = (0..DIGITS).map(|d| d.to_string()).collect();
            let partition = Partition::new(groups, names).expect("singletons are valid");
            Ok(Task::Hybrid(digit_output_task("24", partition, None)))
        }
        "31" => Ok(Task::Hybrid(multi_axis_task())),
        "32" => Ok(Task::Hybrid(reversed_task())),
        "33" => Ok(Task::Hybrid(irrelevant_task())),
        other => Err(SchemeError::UnknownCase(other.to_string())),
    }
}
