//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A cell or row of the input file could not be parsed.
    #[error("ingest error at row {row}{}: {message}", column_label(.column))]
    Ingest {
        /// Zero-based data row index (header excluded).
        row: usize,
        /// Column name, when the failure is tied to a single cell.
        column: Option<String>,
        message: String,
    },

    /// The schema is inconsistent with itself or with the file header.
    #[error("schema error: {0}")]
    Schema(String),

    /// An argument violates a precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An iterative routine failed to converge.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    /// The landing enumeration would be too large.
    #[error("landing phase: {fractional} fractional units exceed the enumeration limit of {limit}")]
    Landing { fractional: usize, limit: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn column_label(column: &Option<String>) -> String {
    match column {
        Some(name) => format!(", column '{name}'"),
        None => String::new(),
    }
}

impl Error {
    pub fn ingest(row: usize, column: Option<&str>, message: impl Into<String>) -> Self {
        Error::Ingest {
            row,
            column: column.map(str::to_owned),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) | Error::Argument(_) => 2,
            Error::Ingest { .. } | Error::Io(_) | Error::Csv(_) => 3,
            Error::Convergence { .. } | Error::Landing { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
