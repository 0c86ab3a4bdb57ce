//! Tabular fitness oracle: complete accuracy tables over the full genotype
//! space, loaded from CSV or generated as seeded synthetic surrogates, with
//! metered evaluation against a fitness-evaluation budget.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::search_space::{Genotype, EDGE_LABELS, NUM_EDGES, NUM_GENOTYPES, NUM_OPERATIONS};
use crate::seeding::derive_seed;

/// Image classification dataset of a benchmark instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Cifar10,
    Cifar100,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 2] = [DatasetKind::Cifar10, DatasetKind::Cifar100];

    pub fn index(self) -> usize {
        match self {
            DatasetKind::Cifar10 => 0,
            DatasetKind::Cifar100 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Cifar10 => "cifar10",
            DatasetKind::Cifar100 => "cifar100",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cifar10" | "cifar-10" => Ok(DatasetKind::Cifar10),
            "cifar100" | "cifar-100" => Ok(DatasetKind::Cifar100),
            other => Err(format!("unknown dataset '{other}'")),
        }
    }
}

/// Attack column of a benchmark instance. `Clean` is the unattacked accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Clean,
    Fgsm,
    Pgd,
    Apgd,
    Square,
}

impl AttackKind {
    pub const ALL: [AttackKind; 5] = [
        AttackKind::Clean,
        AttackKind::Fgsm,
        AttackKind::Pgd,
        AttackKind::Apgd,
        AttackKind::Square,
    ];

    pub fn index(self) -> usize {
        match self {
            AttackKind::Clean => 0,
            AttackKind::Fgsm => 1,
            AttackKind::Pgd => 2,
            AttackKind::Apgd => 3,
            AttackKind::Square => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AttackKind::Clean => "clean",
            AttackKind::Fgsm => "fgsm",
            AttackKind::Pgd => "pgd",
            AttackKind::Apgd => "apgd",
            AttackKind::Square => "square",
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "clean" => Ok(AttackKind::Clean),
            "fgsm" => Ok(AttackKind::Fgsm),
            "pgd" => Ok(AttackKind::Pgd),
            "apgd" => Ok(AttackKind::Apgd),
            "square" | "squares" => Ok(AttackKind::Square),
            other => Err(format!("unknown attack '{other}'")),
        }
    }
}

/// Number of (dataset, attack) instances covered by a table.
pub const NUM_INSTANCES: usize = DatasetKind::ALL.len() * AttackKind::ALL.len();

/// All (dataset, attack) pairs in column order.
pub fn all_instances() -> impl Iterator<Item = (DatasetKind, AttackKind)> {
    DatasetKind::ALL
        .into_iter()
        .flat_map(|d| AttackKind::ALL.into_iter().map(move |a| (d, a)))
}

fn instance_index(dataset: DatasetKind, attack: AttackKind) -> usize {
    dataset.index() * AttackKind::ALL.len() + attack.index()
}

/// Where a table's values came from.
#[derive(Debug, Clone, PartialEq)]
pub enum TableSource {
    Real { path: String },
    Surrogate { seed: u64, ruggedness: f64 },
}

/// Raised by [`BenchmarkTable::evaluate`] when the fitness-evaluation budget
/// is already spent. The counter is left unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("fitness evaluation budget exhausted")]
pub struct BudgetExhausted;

/// Meters fitness evaluations against a fixed budget.
#[derive(Debug, Clone)]
pub struct FitnessCounter {
    used: usize,
    budget: usize,
}

impl FitnessCounter {
    pub fn new(budget: usize) -> FitnessCounter {
        FitnessCounter { used: 0, budget }
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.used
    }

    fn consume_one(&mut self) -> Result<(), BudgetExhausted> {
        if self.used >= self.budget {
            return Err(BudgetExhausted);
        }
        self.used += 1;
        Ok(())
    }
}

/// Failure while loading a benchmark CSV.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad header: {0}")]
    BadHeader(String),
    #[error("line {line}: {message}")]
    BadRow { line: usize, message: String },
    #[error("missing entry for genotype index {0}")]
    MissingEntry(usize),
    #[error("duplicate entry for genotype index {0}")]
    DuplicateEntry(usize),
    #[error("line {line}: accuracy {value} outside [0, 100]")]
    OutOfRangeAccuracy { line: usize, value: f64 },
}

/// Complete accuracy lookup over all genotypes and all (dataset, attack)
/// instances. Values are accuracy percentages in `[0, 100]`. Read-only after
/// construction and safe to share across trial workers.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    source: TableSource,
    // Dense layout: genotype index major, instance index minor.
    accuracies: Vec<f64>,
}

impl BenchmarkTable {
    pub fn source(&self) -> &TableSource {
        &self.source
    }

    /// Uncounted accuracy lookup.
    pub fn accuracy(&self, g: &Genotype, dataset: DatasetKind, attack: AttackKind) -> f64 {
        self.accuracies[g.to_index() * NUM_INSTANCES + instance_index(dataset, attack)]
    }

    /// Counted accuracy lookup: one call consumes exactly one fitness
    /// evaluation. Fails without touching the counter when the budget is
    /// already spent.
    pub fn evaluate(
        &self,
        g: &Genotype,
        dataset: DatasetKind,
        attack: AttackKind,
        counter: &mut FitnessCounter,
    ) -> Result<f64, BudgetExhausted> {
        counter.consume_one()?;
        Ok(self.accuracy(g, dataset, attack))
    }

    /// Exhaustive maximum over all genotypes for one instance. Ties are
    /// broken by the lowest genotype index.
    pub fn optimum(&self, dataset: DatasetKind, attack: AttackKind) -> (Genotype, f64) {
        let inst = instance_index(dataset, attack);
        let mut best_index = 0usize;
        let mut best_acc = self.accuracies[inst];
        for index in 1..NUM_GENOTYPES {
            let acc = self.accuracies[index * NUM_INSTANCES + inst];
            if acc > best_acc {
                best_acc = acc;
                best_index = index;
            }
        }
        (
            Genotype::from_index(best_index).expect("index in range"),
            best_acc,
        )
    }

    /// Loads a table from the benchmark CSV format, verifying completeness
    /// eagerly: exactly one row per genotype index, ascending, every
    /// accuracy in `[0, 100]`.
    pub fn load(path: impl AsRef<Path>) -> Result<BenchmarkTable, FormatError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut table = BenchmarkTable {
            source: TableSource::Real {
                path: path.display().to_string(),
            },
            accuracies: vec![0.0; NUM_GENOTYPES * NUM_INSTANCES],
        };

        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| FormatError::BadHeader("empty file".into()))?;
        let gene_map = parse_header(header)?;

        let mut expected = 0usize;
        for (line_no, line) in lines {
            let line_no = line_no + 1; // 1-based for messages
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 1 + NUM_INSTANCES {
                return Err(FormatError::BadRow {
                    line: line_no,
                    message: format!("expected {} fields, got {}", 1 + NUM_INSTANCES, fields.len()),
                });
            }
            let file_index: usize = fields[0].trim().parse().map_err(|_| FormatError::BadRow {
                line: line_no,
                message: format!("bad index '{}'", fields[0]),
            })?;
            if file_index < expected {
                return Err(FormatError::DuplicateEntry(file_index));
            }
            if file_index > expected {
                return Err(FormatError::MissingEntry(expected));
            }
            if file_index >= NUM_GENOTYPES {
                return Err(FormatError::BadRow {
                    line: line_no,
                    message: format!("index {file_index} outside [0, {NUM_GENOTYPES})"),
                });
            }
            let canonical_index = remap_index(file_index, &gene_map);
            for (col, field) in fields[1..].iter().enumerate() {
                let value: f64 = field.trim().parse().map_err(|_| FormatError::BadRow {
                    line: line_no,
                    message: format!("bad accuracy '{field}'"),
                })?;
                if !(0.0..=100.0).contains(&value) {
                    return Err(FormatError::OutOfRangeAccuracy {
                        line: line_no,
                        value,
                    });
                }
                table.accuracies[canonical_index * NUM_INSTANCES + col] = value;
            }
            expected += 1;
        }
        if expected != NUM_GENOTYPES {
            return Err(FormatError::MissingEntry(expected));
        }
        Ok(table)
    }

    /// Writes the benchmark CSV format with the canonical edge order.
    /// Accuracies use the shortest decimal form that round-trips exactly,
    /// always with at least one fractional digit; output is byte-stable.
    pub fn write_csv(&self, out: &mut impl Write) -> io::Result<()> {
        writeln!(out, "index,edge_order={}", EDGE_LABELS.join(";"))?;
        let mut row = String::with_capacity(128);
        for index in 0..NUM_GENOTYPES {
            row.clear();
            row.push_str(&index.to_string());
            for col in 0..NUM_INSTANCES {
                row.push(',');
                row.push_str(&format_accuracy(
                    self.accuracies[index * NUM_INSTANCES + col],
                ));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut buf = Vec::with_capacity(NUM_GENOTYPES * 96);
        self.write_csv(&mut buf)?;
        fs::write(path, buf)
    }
}

fn format_accuracy(value: f64) -> String {
    let s = value.to_string();
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

/// Parses `index,edge_order=L0;L1;...;L5` and returns, per file gene
/// position, the canonical gene position it maps to. Any permutation of the
/// canonical edge labels is accepted.
fn parse_header(header: &str) -> Result<[usize; NUM_EDGES], FormatError> {
    let rest = header
        .trim()
        .strip_prefix("index,edge_order=")
        .ok_or_else(|| {
            FormatError::BadHeader(format!(
                "expected 'index,edge_order=...', got '{header}'"
            ))
        })?;
    let labels: Vec<&str> = rest.split(';').collect();
    if labels.len() != NUM_EDGES {
        return Err(FormatError::BadHeader(format!(
            "expected {NUM_EDGES} edge labels, got {}",
            labels.len()
        )));
    }
    let mut map = [usize::MAX; NUM_EDGES];
    for (file_pos, label) in labels.iter().enumerate() {
        let canonical_pos = EDGE_LABELS
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| FormatError::BadHeader(format!("unknown edge label '{label}'")))?;
        if map.contains(&canonical_pos) {
            return Err(FormatError::BadHeader(format!(
                "edge label '{label}' repeated"
            )));
        }
        map[file_pos] = canonical_pos;
    }
    Ok(map)
}

/// Re-keys a genotype index expressed in the file's edge order into the
/// canonical edge order.
fn remap_index(file_index: usize, gene_map: &[usize; NUM_EDGES]) -> usize {
    if gene_map.iter().enumerate().all(|(i, &m)| i == m) {
        return file_index;
    }
    let file_genes = *Genotype::from_index(file_index)
        .expect("index in range")
        .genes();
    let mut canonical = [0u8; NUM_EDGES];
    for (file_pos, &canonical_pos) in gene_map.iter().enumerate() {
        canonical[canonical_pos] = file_genes[file_pos];
    }
    Genotype::from_genes(canonical).to_index()
}

// Surrogate landscape constants. Utility levels are assigned per edge by
// distance from a seeded peak operation, so every 1-D slice of the
// separable part is unimodal over the ordinal encoding: a comfortable
// soundness landscape at ruggedness zero, with a minimum per-gene gap of 1.2
// between adjacent ranks.
const UTILITY_LEVELS: [f64; NUM_OPERATIONS] = [4.8, 3.0, 1.9, 0.9, 0.0];
const PAIR_NOISE_AMPLITUDE: f64 = 0.8;
const BASE_RANGE: (f64, f64) = (35.0, 65.0);

struct InstanceLandscape {
    base: f64,
    utilities: [[f64; NUM_OPERATIONS]; NUM_EDGES],
    pair_noise: Vec<[[f64; NUM_OPERATIONS]; NUM_OPERATIONS]>,
}

/// Seeded utilities for one edge: a peak operation gets the top level and
/// the rest fall off with ordinal distance, ties between the two neighbors
/// at equal distance broken by a seeded coin.
fn edge_utilities(rng: &mut ChaCha8Rng) -> [f64; NUM_OPERATIONS] {
    let peak = rng.random_range(0..NUM_OPERATIONS) as i64;
    let left_first = rng.random_bool(0.5);
    let mut order: Vec<usize> = (0..NUM_OPERATIONS).collect();
    order.sort_by_key(|&v| {
        let d = (v as i64 - peak).abs() * 2;
        // Equidistant neighbors get adjacent ranks; the coin picks the side
        // that ranks higher.
        let side_penalty = if (v as i64) < peak {
            i64::from(!left_first)
        } else {
            i64::from(left_first && v as i64 != peak)
        };
        d + side_penalty
    });
    let mut utilities = [0.0; NUM_OPERATIONS];
    for (rank, &v) in order.iter().enumerate() {
        utilities[v] = UTILITY_LEVELS[rank];
    }
    utilities
}

fn instance_landscape(seed: u64, inst: usize, with_noise: bool) -> InstanceLandscape {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, inst as u64]));
    let base = rng.random_range(BASE_RANGE.0..BASE_RANGE.1);
    let mut utilities = [[0.0f64; NUM_OPERATIONS]; NUM_EDGES];
    for edge in utilities.iter_mut() {
        *edge = edge_utilities(&mut rng);
    }
    let mut pair_noise = Vec::new();
    if with_noise {
        // One noise table per unordered edge pair.
        pair_noise =
            vec![[[0.0f64; NUM_OPERATIONS]; NUM_OPERATIONS]; NUM_EDGES * (NUM_EDGES - 1) / 2];
        for table in pair_noise.iter_mut() {
            for row in table.iter_mut() {
                for cell in row.iter_mut() {
                    *cell = rng.random_range(-PAIR_NOISE_AMPLITUDE..PAIR_NOISE_AMPLITUDE);
                }
            }
        }
    }
    InstanceLandscape {
        base,
        utilities,
        pair_noise,
    }
}

/// Deterministic synthetic benchmark. Per instance, the accuracy of a
/// genotype is `clamp(base + sum of per-edge utilities + ruggedness *
/// pairwise interaction noise, 0, 100)`. At `ruggedness = 0` the landscape is
/// edge-separable and the optimum is the per-gene utility argmax.
pub fn generate_surrogate(seed: u64, ruggedness: f64) -> BenchmarkTable {
    let mut accuracies = vec![0.0; NUM_GENOTYPES * NUM_INSTANCES];
    for inst in 0..NUM_INSTANCES {
        let landscape = instance_landscape(seed, inst, ruggedness != 0.0);
        for index in 0..NUM_GENOTYPES {
            let genes = *Genotype::from_index(index).expect("index in range").genes();
            let mut acc = landscape.base;
            for (edge, &gene) in genes.iter().enumerate() {
                acc += landscape.utilities[edge][gene as usize];
            }
            if ruggedness != 0.0 {
                let mut pair = 0usize;
                let mut noise = 0.0;
                for i in 0..NUM_EDGES {
                    for j in (i + 1)..NUM_EDGES {
                        noise += landscape.pair_noise[pair][genes[i] as usize][genes[j] as usize];
                        pair += 1;
                    }
                }
                acc += ruggedness * noise;
            }
            accuracies[index * NUM_INSTANCES + inst] = acc.clamp(0.0, 100.0);
        }
    }
    BenchmarkTable {
        source: TableSource::Surrogate { seed, ruggedness },
        accuracies,
    }
}

/// The separable optimum of `generate_surrogate(seed, 0.0)`, computed
/// directly from the per-gene utility argmax without touching the table.
/// Only meaningful at ruggedness zero.
pub fn separable_optimum(seed: u64, dataset: DatasetKind, attack: AttackKind) -> Genotype {
    let inst = instance_index(dataset, attack);
    let landscape = instance_landscape(seed, inst, false);
    let mut genes = [0u8; NUM_EDGES];
    for (gene, utilities) in genes.iter_mut().zip(landscape.utilities.iter()) {
        let argmax = utilities
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("non-empty");
        *gene = argmax as u8;
    }
    Genotype::from_genes(genes)
}
