//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix or vector contained NaN/Inf where finite values are required.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Incompatible dimensions between operands.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Semantically invalid input (empty data, non-one-hot labels, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Invalid hyperparameter or training configuration.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Weight vector with non-positive mass or negative entries.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// Symmetric matrix failed the positive-definiteness check.
    #[error("matrix not positive definite (min eigenvalue {min_eigenvalue:.6e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    /// The orthogonality constraint needs feature dim >= class count.
    #[error("manifold constraint infeasible: feature dim {d} < class count {c}")]
    ManifoldInfeasible { d: usize, c: usize },

    /// Iterative decomposition failed to converge.
    #[error("svd failed to converge")]
    SvdFailed,

    /// IDX source with an unexpected magic number.
    #[error("{source_name}: wrong idx magic 0x{found:08x} (expected 0x{expected:08x})")]
    IdxWrongMagic {
        source_name: String,
        found: u32,
        expected: u32,
    },

    /// Image and label IDX sources disagree on the sample count.
    #[error("idx count mismatch: {images} images vs {labels} labels")]
    IdxCountMismatch { images: usize, labels: usize },

    /// Binary source ended before the declared payload.
    #[error("{source_name}: truncated at byte {offset}")]
    Truncated { source_name: String, offset: usize },

    /// CSV row with the wrong number of fields.
    #[error("{source_name}: row {row}: expected {expected} fields, found {found}")]
    CsvRaggedRow {
        source_name: String,
        row: usize,
        expected: usize,
        found: usize,
    },

    /// CSV cell that does not parse as a number.
    #[error("{source_name}: row {row}, column {col}: non-numeric cell {value:?}")]
    CsvBadCell {
        source_name: String,
        row: usize,
        col: usize,
        value: String,
    },

    /// Label column name or index not present in the table.
    #[error("{source_name}: unknown label column {column:?}")]
    UnknownLabelColumn {
        source_name: String,
        column: String,
    },

    /// Model file without the expected magic bytes.
    #[error("{source_name}: bad model magic")]
    ModelBadMagic { source_name: String },

    /// Model file written by an unsupported format version.
    #[error("{source_name}: unsupported model format version {found}")]
    ModelBadVersion { source_name: String, found: u16 },

    /// Malformed `key = value` configuration text.
    #[error("{source_name}: line {line}: {reason}")]
    ConfigParse {
        source_name: String,
        line: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
