//! The discrete architecture search space: a 4-node cell with 6 edges,
//! each edge carrying one of 5 candidate operations.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngExt};
use thiserror::Error;

/// Number of candidate operations per edge.
pub const NUM_OPERATIONS: usize = 5;
/// Number of edges in one cell.
pub const NUM_EDGES: usize = 6;
/// Total number of genotypes, `5^6`.
pub const NUM_GENOTYPES: usize = 15_625;

/// Canonical edge order: `(source, target)` pairs of the 4-node cell in
/// lexicographic order. Gene `k` assigns an operation to `EDGE_ORDER[k]`.
pub const EDGE_ORDER: [(u8, u8); NUM_EDGES] = [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (2, 3)];

/// Edge labels matching [`EDGE_ORDER`], as used in benchmark file headers.
pub const EDGE_LABELS: [&str; NUM_EDGES] = ["01", "02", "12", "03", "13", "23"];

/// One of the five candidate operations an edge can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperationKind {
    Conv1x1,
    Conv3x3,
    AvgPool3x3,
    SkipConnect,
    Zeroize,
}

impl OperationKind {
    /// All operations in canonical index order.
    pub const ALL: [OperationKind; NUM_OPERATIONS] = [
        OperationKind::Conv1x1,
        OperationKind::Conv3x3,
        OperationKind::AvgPool3x3,
        OperationKind::SkipConnect,
        OperationKind::Zeroize,
    ];

    /// Canonical index in `0..5`.
    pub fn index(self) -> u8 {
        match self {
            OperationKind::Conv1x1 => 0,
            OperationKind::Conv3x3 => 1,
            OperationKind::AvgPool3x3 => 2,
            OperationKind::SkipConnect => 3,
            OperationKind::Zeroize => 4,
        }
    }

    /// Inverse of [`OperationKind::index`].
    pub fn from_index(index: u8) -> Option<OperationKind> {
        OperationKind::ALL.get(index as usize).copied()
    }

    /// Display name.
    pub fn name(self) -> &'static str {
        match self {
            OperationKind::Conv1x1 => "conv1x1",
            OperationKind::Conv3x3 => "conv3x3",
            OperationKind::AvgPool3x3 => "avgpool3x3",
            OperationKind::SkipConnect => "skip",
            OperationKind::Zeroize => "zeroize",
        }
    }
}

impl fmt::Display for OperationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Validation failure when constructing a [`Genotype`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenotypeError {
    #[error("expected {NUM_EDGES} genes, got {0}")]
    WrongLength(usize),
    #[error("gene at position {position} is {value}, outside [0, {NUM_OPERATIONS})")]
    OutOfRange { position: usize, value: i64 },
}

/// A cell architecture: one operation index per edge, in [`EDGE_ORDER`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genotype {
    genes: [u8; NUM_EDGES],
}

impl Genotype {
    /// Validates a gene sequence. Accepts exactly [`NUM_EDGES`] values, each
    /// in `[0, NUM_OPERATIONS)`.
    pub fn from_indices(indices: &[i64]) -> Result<Genotype, GenotypeError> {
        if indices.len() != NUM_EDGES {
            return Err(GenotypeError::WrongLength(indices.len()));
        }
        let mut genes = [0u8; NUM_EDGES];
        for (position, &value) in indices.iter().enumerate() {
            if !(0..NUM_OPERATIONS as i64).contains(&value) {
                return Err(GenotypeError::OutOfRange { position, value });
            }
            genes[position] = value as u8;
        }
        Ok(Genotype { genes })
    }

    /// Constructs from genes already known to be in range.
    ///
    /// Panics in debug builds if a gene is out of range.
    pub(crate) fn from_genes(genes: [u8; NUM_EDGES]) -> Genotype {
        debug_assert!(genes.iter().all(|&g| (g as usize) < NUM_OPERATIONS));
        Genotype { genes }
    }

    /// Raw gene values.
    pub fn genes(&self) -> &[u8; NUM_EDGES] {
        &self.genes
    }

    /// The operation assigned to each edge.
    pub fn operations(&self) -> [OperationKind; NUM_EDGES] {
        self.genes
            .map(|g| OperationKind::from_index(g).expect("gene in range"))
    }

    /// Dense index in `[0, NUM_GENOTYPES)`: base-5 positional encoding with
    /// gene 0 most significant.
    pub fn to_index(&self) -> usize {
        self.genes
            .iter()
            .fold(0usize, |acc, &g| acc * NUM_OPERATIONS + g as usize)
    }

    /// Inverse of [`Genotype::to_index`].
    pub fn from_index(mut index: usize) -> Option<Genotype> {
        if index >= NUM_GENOTYPES {
            return None;
        }
        let mut genes = [0u8; NUM_EDGES];
        for slot in genes.iter_mut().rev() {
            *slot = (index % NUM_OPERATIONS) as u8;
            index /= NUM_OPERATIONS;
        }
        Some(Genotype { genes })
    }

    /// Draws each gene independently and uniformly from `{0..4}`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Genotype {
        let mut genes = [0u8; NUM_EDGES];
        for slot in genes.iter_mut() {
            *slot = rng.random_range(0..NUM_OPERATIONS as u8);
        }
        Genotype { genes }
    }

    /// Number of positions where the genes of `self` and `other` differ.
    pub fn hamming_distance(&self, other: &Genotype) -> usize {
        self.genes
            .iter()
            .zip(other.genes.iter())
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Yields all [`NUM_GENOTYPES`] genotypes exactly once, in ascending
/// [`Genotype::to_index`] order.
pub fn enumerate_all() -> impl Iterator<Item = Genotype> {
    (0..NUM_GENOTYPES).map(|i| Genotype::from_index(i).expect("index in range"))
}

impl fmt::Display for Genotype {
    /// Canonical bracketed form, e.g. `[3,1,0,4,2,2]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}]",
            self.genes
                .iter()
                .map(|g| g.to_string())
                .collect::<Vec<_>>()
                .join(",")
        )
    }
}

impl FromStr for Genotype {
    type Err = GenotypeError;

    /// Parses the bracketed text form `[a,b,c,d,e,f]`, tolerating spaces
    /// around values and brackets.
    fn from_str(s: &str) -> Result<Genotype, GenotypeError> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|rest| rest.strip_suffix(']'))
            .ok_or(GenotypeError::WrongLength(0))?;
        let mut values = Vec::with_capacity(NUM_EDGES);
        for token in inner.split(',') {
            let value = token
                .trim()
                .parse::<i64>()
                .map_err(|_| GenotypeError::WrongLength(0))?;
            values.push(value);
        }
        Genotype::from_indices(&values)
    }
}
