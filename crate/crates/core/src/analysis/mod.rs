//! Perplexity matrices, design matrices, and the random-intercept mixed
//! model of perplexity on switch configuration.
//!
//! For sentence `n` and grammar `k`:
//!
//! ```text
//! L[n,k] = S[k,:] · β + u_n + ε,   u_n ~ N(0, σ²_dif),  ε ~ N(0, σ²)
//! ```
//!
//! `S` holds an intercept, one column per switch and one column per switch
//! pair. With the default binary coding a positive main effect means the
//! head-initial setting (bit = 1) raises perplexity, and a positive
//! interaction means sharing head direction raises it.

mod design;
mod matrix;
mod mixed;
mod report;

pub use design::{build_design, build_named_design, switch_pairs, Coding, DesignMatrix};
pub use matrix::{ingest_scores, write_matrix, PerplexityMatrix};
pub use mixed::{fit_mixed, FitOptions, MixedModelFit, ProfiledLikelihood};
pub use report::{
    coefficient_heatmap, distribution_report, group_report, heatmap_svg, write_density_csv,
    write_group_csv, write_heatmap_csv, write_summary_csv, Distribution, GroupRow, Heatmap,
};

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::ngram::NGramError;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("missing cell: sentence {sentence}, grammar \"{grammar}\"")]
    MissingCell { sentence: usize, grammar: String },
    #[error("duplicate cell: sentence {sentence}, grammar \"{grammar}\"")]
    DuplicateCell { sentence: usize, grammar: String },
    #[error("invalid perplexity {value} at sentence {sentence}, grammar \"{grammar}\" (must be finite and >= 1)")]
    InvalidValue {
        sentence: usize,
        grammar: String,
        value: f64,
    },
    #[error("no scores to ingest")]
    Empty,
    #[error("number of switches {0} is outside 2..=20")]
    SwitchCount(usize),
    #[error("grammar name `{0}` is not a switch configuration of the expected length")]
    GrammarName(String),
    #[error("design rows {design:?} do not match matrix columns {matrix:?}")]
    Mismatch {
        design: Vec<String>,
        matrix: Vec<String>,
    },
    #[error("design matrix is rank deficient (rank {rank} of {columns})")]
    RankDeficient { rank: usize, columns: usize },
    #[error("too few observations: {0}")]
    TooFew(String),
    #[error("non-finite log-likelihood")]
    NonFinite,
    #[error("label `{label}` has {count} values; at least 2 are needed")]
    TooFewValues { label: String, count: usize },
    #[error(transparent)]
    Scores(#[from] NGramError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}
