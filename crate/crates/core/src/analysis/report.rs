use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::design::switch_pairs;
use super::{AnalysisError, MixedModelFit, PerplexityMatrix};
use crate::switching::{word_order_of, SwitchVector, WordOrder};

/// Switch-by-switch coefficient table: main effects on the diagonal,
/// pairwise interactions off it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heatmap {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
}

pub fn coefficient_heatmap(fit: &MixedModelFit, k: usize) -> Heatmap {
    let mut values = vec![vec![0.0; k]; k];
    let mut stderr = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = fit.beta[1 + i];
        stderr[i][i] = fit.stderr[1 + i];
    }
    for (c, (i, j)) in switch_pairs(k).enumerate() {
        let col = 1 + k + c;
        values[i][j] = fit.beta[col];
        values[j][i] = fit.beta[col];
        stderr[i][j] = fit.stderr[col];
        stderr[j][i] = fit.stderr[col];
    }
    let labels = if fit.switch_names.len() == k {
        fit.switch_names.clone()
    } else {
        (0..k).map(|i| format!("b{i}")).collect()
    };
    Heatmap { labels, values, stderr }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow {
    pub order: WordOrder,
    pub grammars: usize,
    pub mean_perplexity: f64,
}

/// Mean of the per-grammar average perplexities within each basic word
/// order group.
pub fn group_report(l: &PerplexityMatrix) -> Result<Vec<GroupRow>, AnalysisError> {
    let means = l.grammar_means();
    let mut sums = [(0usize, 0.0f64); 4];
    for (name, m) in l.grammar_names.iter().zip(means) {
        let b = SwitchVector::parse(name)
            .filter(|b| b.len() >= 2)
            .ok_or_else(|| AnalysisError::GrammarName(name.clone()))?;
        let slot = &mut sums[word_order_of(&b) as usize];
        slot.0 += 1;
        slot.1 += m;
    }
    Ok(WordOrder::ALL
        .iter()
        .zip(sums)
        .map(|(&order, (count, total))| GroupRow {
            order,
            grammars: count,
            mean_perplexity: if count > 0 { total / count as f64 } else { f64::NAN },
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    pub label: String,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample variance (n - 1 denominator).
    pub variance: f64,
    pub bandwidth: f64,
    /// `(x, density)` points of a Gaussian kernel density estimate.
    pub density: Vec<(f64, f64)>,
}

pub const DENSITY_POINTS: usize = 512;

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Silverman's rule of thumb, `0.9 min(sd, IQR/1.34) n^(-1/5)`, with
/// fallbacks when the spread is zero.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr / 1.34),
        (true, false) => sd,
        _ => 0.0,
    };
    let h = 0.9 * spread * n.powf(-0.2);
    if h > 0.0 {
        h
    } else {
        1e-3 * mean.abs().max(1.0)
    }
}

/// Summary statistics and a density table per label.
pub fn distribution_report(groups: &[(String, Vec<f64>)]) -> Result<Vec<Distribution>, AnalysisError> {
    groups
        .iter()
        .map(|(label, values)| {
            if values.len() < 2 {
                return Err(AnalysisError::TooFewValues {
                    label: label.clone(),
                    count: values.len(),
                });
            }
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let h = silverman_bandwidth(values);
            let (lo, hi) = (min - 5.0 * h, max + 5.0 * h);
            let norm = 1.0 / (n * h * (2.0 * std::f64::consts::PI).sqrt());
            let density = (0..DENSITY_POINTS)
                .map(|i| {
                    let x = lo + (hi - lo) * i as f64 / (DENSITY_POINTS - 1) as f64;
                    let d: f64 = values.iter().map(|v| (-0.5 * ((x - v) / h).powi(2)).exp()).sum();
                    (x, d * norm)
                })
                .collect();
            Ok(Distribution {
                label: label.clone(),
                count: values.len(),
                min,
                max,
                mean,
                variance,
                bandwidth: h,
                density,
            })
        })
        .collect()
}

fn write(path: &Path, text: String) -> Result<(), AnalysisError> {
    fs::write(path, text).map_err(|source| AnalysisError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_heatmap_csv(path: &Path, h: &Heatmap) -> Result<(), AnalysisError> {
    let mut s = String::from("row,column,value,stderr\n");
    for (i, r) in h.labels.iter().enumerate() {
        for (j, c) in h.labels.iter().enumerate() {
            writeln!(s, "{r},{c},{},{}", h.values[i][j], h.stderr[i][j]).unwrap();
        }
    }
    write(path, s)
}

/// Every coefficient of the fit, intercept included.
pub fn write_summary_csv(path: &Path, fit: &MixedModelFit) -> Result<(), AnalysisError> {
    let mut s = String::from("term,value,stderr\n");
    for ((l, b), e) in fit.labels.iter().zip(&fit.beta).zip(&fit.stderr) {
        writeln!(s, "{l},{b},{e}").unwrap();
    }
    writeln!(s, "sigma2_dif,{},", fit.sigma2_dif).unwrap();
    writeln!(s, "sigma2,{},", fit.sigma2).unwrap();
    writeln!(s, "log_likelihood,{},", fit.log_likelihood).unwrap();
    write(path, s)
}

pub fn write_group_csv(path: &Path, rows: &[GroupRow]) -> Result<(), AnalysisError> {
    let mut s = String::from("order,grammars,mean_perplexity\n");
    for r in rows {
        writeln!(s, "{},{},{}", r.order, r.grammars, r.mean_perplexity).unwrap();
    }
    write(path, s)
}

pub fn write_density_csv(path: &Path, dists: &[Distribution]) -> Result<(), AnalysisError> {
    let mut s = String::from("label,x,density\n");
    for d in dists {
        for (x, y) in &d.density {
            writeln!(s, "{},{x},{y}", d.label).unwrap();
        }
    }
    write(path, s)
}

/// A diverging red/blue heatmap with the coefficient printed in each cell.
pub fn heatmap_svg(h: &Heatmap) -> String {
    let k = h.labels.len();
    let cell = 60.0;
    let margin = 70.0;
    let size = margin + cell * k as f64 + 10.0;
    let scale = h
        .values
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" font-family="sans-serif" font-size="11">"#
    )
    .unwrap();
    for (i, label) in h.labels.iter().enumerate() {
        let pos = margin + cell * (i as f64 + 0.5);
        writeln!(s, r#"<text x="{pos}" y="{}" text-anchor="middle">{label}</text>"#, margin - 8.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{pos}" text-anchor="end" dominant-baseline="middle">{label}</text>"#, margin - 8.0)
            .unwrap();
    }
    for i in 0..k {
        for j in 0..k {
            let v = h.values[i][j];
            let t = (v.abs() / scale).min(1.0);
            let fade = (255.0 * (1.0 - t)).round() as u8;
            let color = if v >= 0.0 {
                format!("rgb(255,{fade},{fade})")
            } else {
                format!("rgb({fade},{fade},255)")
            };
            let (x, y) = (margin + cell * j as f64, margin + cell * i as f64);
            writeln!(s, r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{color}" stroke="white"/>"#).unwrap();
            writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" dominant-baseline="middle">{v:.3}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0
            )
            .unwrap();
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn names6() -> Vec<String> {
        crate::switching::enumerate_switch_vectors(6)
            .unwrap()
            .iter()
            .map(SwitchVector::name)
            .collect()
    }

    #[test]
    fn constant_matrix_groups() {
        let l = PerplexityMatrix::new(DMatrix::from_element(3, 64, 4.5), names6()).unwrap();
        for r in group_report(&l).unwrap() {
            assert_eq!(r.grammars, 16);
            assert_eq!(r.mean_perplexity, 4.5);
        }
    }

    #[test]
    fn shifted_ovs_group() {
        let names = names6();
        let delta = 3.25;
        let mut v = DMatrix::from_element(4, 64, 10.0);
        for (j, n) in names.iter().enumerate() {
            if n.starts_with("10") {
                v.column_mut(j).add_scalar_mut(delta);
            }
        }
        let rows = group_report(&PerplexityMatrix::new(v, names).unwrap()).unwrap();
        let ovs = rows.iter().find(|r| r.order == WordOrder::OVS).unwrap();
        for r in &rows {
            if r.order != WordOrder::OVS {
                assert_eq!(ovs.mean_perplexity - r.mean_perplexity, delta);
            }
        }
    }

    #[test]
    fn distribution_summaries() {
        let a = vec![3.0, 4.0, 4.5, 7.0, 9.0];
        let d = distribution_report(&[("x".into(), a.clone()), ("y".into(), a)]).unwrap();
        assert_eq!(d[0].min, 3.0);
        assert_eq!(d[0].max, 9.0);
        assert_eq!(d[0].mean, 5.5);
        assert_eq!(d[0].density, d[1].density);
        assert_eq!((d[0].mean, d[0].variance), (d[1].mean, d[1].variance));
        let err = distribution_report(&[("z".into(), vec![1.0])]).unwrap_err();
        assert!(matches!(err, AnalysisError::TooFewValues { count: 1, .. }));
    }

    #[test]
    fn density_integrates_to_one() {
        for values in [vec![1.0, 2.0, 2.5, 10.0, 11.0, 11.5], vec![5.0, 5.0, 5.0], vec![20.0, 20.1]] {
            let d = &distribution_report(&[("v".into(), values)]).unwrap()[0];
            let area: f64 = d
                .density
                .windows(2)
                .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
                .sum();
            assert!((area - 1.0).abs() < 1e-3, "area {area}");
        }
    }
}
