use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::AnalysisError;
use crate::ngram::{read_scores_file, write_scores, SentenceScore};

/// Balanced `N x G` grid of per-sentence perplexities.
#[derive(Debug, Clone, PartialEq)]
pub struct PerplexityMatrix {
    pub values: DMatrix<f64>,
    /// Scored positions per cell, kept so the grid can be written back out.
    pub tokens: DMatrix<usize>,
    pub sentence_ids: Vec<usize>,
    pub grammar_names: Vec<String>,
}

impl PerplexityMatrix {
    /// Wraps raw values; sentence ids default to `0..N`.
    pub fn new(values: DMatrix<f64>, grammar_names: Vec<String>) -> Result<Self, AnalysisError> {
        let (n, g) = values.shape();
        if g != grammar_names.len() {
            return Err(AnalysisError::TooFew(format!(
                "{g} columns but {} grammar names",
                grammar_names.len()
            )));
        }
        let m = PerplexityMatrix {
            values,
            tokens: DMatrix::zeros(n, g),
            sentence_ids: (0..n).collect(),
            grammar_names,
        };
        m.check_values()?;
        Ok(m)
    }

    fn check_values(&self) -> Result<(), AnalysisError> {
        for (j, name) in self.grammar_names.iter().enumerate() {
            for i in 0..self.values.nrows() {
                let v = self.values[(i, j)];
                if !(v.is_finite() && v >= 1.0) {
                    return Err(AnalysisError::InvalidValue {
                        sentence: self.sentence_ids[i],
                        grammar: name.clone(),
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn n_sentences(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_grammars(&self) -> usize {
        self.values.ncols()
    }

    /// Mean perplexity of each grammar column.
    pub fn grammar_means(&self) -> Vec<f64> {
        let n = self.n_sentences() as f64;
        self.values.column_iter().map(|c| c.sum() / n).collect()
    }

    /// Assembles a matrix from score rows. Rows are ordered by sentence id,
    /// columns by grammar name; every cell must appear exactly once.
    pub fn from_scores(scores: &[SentenceScore]) -> Result<Self, AnalysisError> {
        if scores.is_empty() {
            return Err(AnalysisError::Empty);
        }
        let ids: BTreeSet<usize> = scores.iter().map(|s| s.sentence_id).collect();
        let names: BTreeSet<&str> = scores.iter().map(|s| s.grammar.as_str()).collect();
        let row: BTreeMap<usize, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let col: BTreeMap<&str, usize> = names.iter().enumerate().map(|(j, &n)| (n, j)).collect();
        let (n, g) = (ids.len(), names.len());
        let mut values = DMatrix::from_element(n, g, f64::NAN);
        let mut tokens = DMatrix::zeros(n, g);
        let mut filled = DMatrix::from_element(n, g, false);
        for s in scores {
            let (i, j) = (row[&s.sentence_id], col[s.grammar.as_str()]);
            if filled[(i, j)] {
                return Err(AnalysisError::DuplicateCell {
                    sentence: s.sentence_id,
                    grammar: s.grammar.clone(),
                });
            }
            filled[(i, j)] = true;
            values[(i, j)] = s.perplexity;
            tokens[(i, j)] = s.tokens;
        }
        for (j, name) in names.iter().enumerate() {
            for (i, id) in ids.iter().enumerate() {
                if !filled[(i, j)] {
                    return Err(AnalysisError::MissingCell {
                        sentence: *id,
                        grammar: name.to_string(),
                    });
                }
            }
        }
        let m = PerplexityMatrix {
            values,
            tokens,
            sentence_ids: ids.into_iter().collect(),
            grammar_names: names.into_iter().map(String::from).collect(),
        };
        m.check_values()?;
        Ok(m)
    }

    pub fn to_scores(&self) -> Vec<SentenceScore> {
        let mut out = Vec::with_capacity(self.values.len());
        for (i, &id) in self.sentence_ids.iter().enumerate() {
            for (j, g) in self.grammar_names.iter().enumerate() {
                out.push(SentenceScore {
                    sentence_id: id,
                    grammar: g.clone(),
                    perplexity: self.values[(i, j)],
                    tokens: self.tokens[(i, j)],
                });
            }
        }
        out
    }
}

/// Reads and merges scores files into a balanced matrix.
pub fn ingest_scores<P: AsRef<Path>>(files: &[P]) -> Result<PerplexityMatrix, AnalysisError> {
    let mut all = Vec::new();
    for f in files {
        all.extend(read_scores_file(f.as_ref())?);
    }
    PerplexityMatrix::from_scores(&all)
}

/// Writes the matrix as a single scores file.
pub fn write_matrix(path: &Path, m: &PerplexityMatrix) -> Result<(), AnalysisError> {
    let io = |source| AnalysisError::Io {
        path: PathBuf::from(path),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    write_scores(&mut w, &m.to_scores()).map_err(io)?;
    w.flush().map_err(io)
}
