use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::switching::{enumerate_switch_vectors, SwitchVector};

/// Numeric encoding of switch settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coding {
    /// Main effect = bit (1 = head-initial); interaction = 1 when the two
    /// switches share a value.
    #[default]
    Binary,
    /// Main effect = ±1; interaction = product of the two mains.
    Pm1,
}

impl fmt::Display for Coding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Coding::Binary => "binary",
            Coding::Pm1 => "pm1",
        })
    }
}

impl FromStr for Coding {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "binary" => Ok(Coding::Binary),
            "pm1" => Ok(Coding::Pm1),
            other => Err(format!("unknown coding `{other}` (binary, pm1)")),
        }
    }
}

/// Fixed-effects design: one row per grammar, columns
/// `[intercept, K mains, K(K-1)/2 pairwise interactions]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub matrix: DMatrix<f64>,
    pub column_labels: Vec<String>,
    pub row_names: Vec<String>,
    pub switch_names: Vec<String>,
    pub coding: Coding,
}

/// All pairs `(i, j)` with `i < j`, in column order.
pub fn switch_pairs(k: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..k).flat_map(move |i| (i + 1..k).map(move |j| (i, j)))
}

impl DesignMatrix {
    /// Design rows for the given grammar names, in that order.
    pub fn for_grammars(
        names: &[String],
        switch_names: &[String],
        coding: Coding,
    ) -> Result<Self, AnalysisError> {
        let k = switch_names.len();
        if !(2..=20).contains(&k) {
            return Err(AnalysisError::SwitchCount(k));
        }
        let p = 1 + k + k * (k - 1) / 2;
        let mut matrix = DMatrix::zeros(names.len(), p);
        for (r, name) in names.iter().enumerate() {
            let b = SwitchVector::parse(name)
                .filter(|b| b.len() == k)
                .ok_or_else(|| AnalysisError::GrammarName(name.clone()))?;
            let main = |i: usize| match (coding, b.bit(i)) {
                (Coding::Binary, bit) => bit as u8 as f64,
                (Coding::Pm1, true) => 1.0,
                (Coding::Pm1, false) => -1.0,
            };
            matrix[(r, 0)] = 1.0;
            for i in 0..k {
                matrix[(r, 1 + i)] = main(i);
            }
            for (c, (i, j)) in switch_pairs(k).enumerate() {
                matrix[(r, 1 + k + c)] = match coding {
                    Coding::Binary => (b.bit(i) == b.bit(j)) as u8 as f64,
                    Coding::Pm1 => main(i) * main(j),
                };
            }
        }
        let mut column_labels = vec!["intercept".to_string()];
        column_labels.extend(switch_names.iter().cloned());
        column_labels.extend(switch_pairs(k).map(|(i, j)| format!("{}:{}", switch_names[i], switch_names[j])));
        Ok(DesignMatrix {
            matrix,
            column_labels,
            row_names: names.to_vec(),
            switch_names: switch_names.to_vec(),
            coding,
        })
    }

    pub fn k(&self) -> usize {
        self.switch_names.len()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn main_column(&self, i: usize) -> usize {
        1 + i
    }

    /// Column of the interaction between switches `i` and `j` (either order).
    pub fn interaction_column(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let k = self.k();
        // pairs before row i: sum_{r<i} (k-1-r)
        let before = i * (2 * k - i - 1) / 2;
        1 + k + before + (j - i - 1)
    }

    /// Numerical rank from the singular values.
    pub fn rank(&self) -> usize {
        let sv = self.matrix.clone().svd(false, false).singular_values;
        let max = sv.iter().cloned().fold(0.0, f64::max);
        let tol = max * self.matrix.nrows().max(self.ncols()) as f64 * f64::EPSILON;
        sv.iter().filter(|&&s| s > tol).count()
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank() == self.ncols()
    }
}

/// Design over all `2^K` grammars in lexicographic order, switches named
/// `b0, b1, ...`.
pub fn build_design(k: usize, coding: Coding) -> Result<DesignMatrix, AnalysisError> {
    let names: Vec<String> = (0..k).map(|i| format!("b{i}")).collect();
    build_named_design(&names, coding)
}

pub fn build_named_design(switch_names: &[String], coding: Coding) -> Result<DesignMatrix, AnalysisError> {
    let k = switch_names.len();
    if !(2..=20).contains(&k) {
        return Err(AnalysisError::SwitchCount(k));
    }
    let rows: Vec<String> = enumerate_switch_vectors(k)
        .expect("k checked")
        .iter()
        .map(SwitchVector::name)
        .collect();
    DesignMatrix::for_grammars(&rows, switch_names, coding)
}
