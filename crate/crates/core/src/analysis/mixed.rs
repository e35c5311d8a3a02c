//! Maximum-likelihood fit of the balanced random-intercept model.
//!
//! Every sentence contributes a block with covariance
//! `σ² (I + λ J)`, `λ = σ²_dif / σ²`, and the same design `X`. For fixed
//! `λ` the block inverse is `(I - c J) / σ²` with `c = λ / (1 + Gλ)`, so
//! GLS for `β` and the residual quadratic form `Q(λ)` are closed form, and
//! `σ²` profiles out as `Q / (NG)` (or `Q / (NG - p)` under REML). What
//! remains is a one-dimensional search over `λ`: a log-spaced scan
//! followed by golden-section refinement of the best bracket.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{AnalysisError, Coding, DesignMatrix, PerplexityMatrix};

/// Relative tolerance on `λ` for the golden-section refinement.
pub const LAMBDA_TOL: f64 = 1e-9;
const LOG10_LAMBDA_MIN: f64 = -8.0;
const LOG10_LAMBDA_MAX: f64 = 8.0;
const SCAN_STEPS_PER_DECADE: usize = 4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FitOptions {
    pub reml: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixedModelFit {
    pub labels: Vec<String>,
    pub switch_names: Vec<String>,
    pub coding: Coding,
    pub beta: Vec<f64>,
    pub stderr: Vec<f64>,
    pub sigma2_dif: f64,
    pub sigma2: f64,
    /// `σ²_dif / σ²` at the optimum.
    pub lambda: f64,
    /// Maximized (restricted, under REML) log-likelihood. Infinite for a
    /// degenerate zero-variance fit.
    pub log_likelihood: f64,
    pub reml: bool,
    pub n_sentences: usize,
    pub n_grammars: usize,
    /// True when the residual variance is zero and the fit sits on the
    /// boundary of the parameter space.
    pub degenerate: bool,
    pub diagnostics: Vec<String>,
}

impl MixedModelFit {
    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.beta[i])
    }
}

/// The likelihood as a function of the variance parameters, with `β`
/// profiled out by GLS.
pub struct ProfiledLikelihood<'a> {
    y: &'a DMatrix<f64>,
    x: &'a DMatrix<f64>,
    /// `X' 1`
    x1: DVector<f64>,
    /// `X' ȳ`, `ȳ` the mean row of `y`
    xy: DVector<f64>,
    /// `1' ȳ`
    ybar_sum: f64,
    xtx: DMatrix<f64>,
    n: usize,
    g: usize,
}

impl<'a> ProfiledLikelihood<'a> {
    pub fn new(l: &'a PerplexityMatrix, s: &'a DesignMatrix) -> Self {
        let (y, x) = (&l.values, &s.matrix);
        let (n, g) = y.shape();
        let ybar = DVector::from_iterator(g, y.column_iter().map(|c| c.sum() / n as f64));
        ProfiledLikelihood {
            y,
            x,
            x1: x.row_sum().transpose(),
            xy: x.tr_mul(&ybar),
            ybar_sum: ybar.sum(),
            xtx: x.tr_mul(x),
            n,
            g,
        }
    }

    fn c(&self, lambda: f64) -> f64 {
        lambda / (1.0 + self.g as f64 * lambda)
    }

    /// `X' W X` for the block weight `W = I - cJ`.
    fn xwx(&self, lambda: f64) -> DMatrix<f64> {
        let c = self.c(lambda);
        &self.xtx - (&self.x1 * self.x1.transpose()) * c
    }

    /// GLS estimate of `β` and the Cholesky factor of `X'WX`.
    pub fn beta(&self, lambda: f64) -> Option<(DVector<f64>, nalgebra::Cholesky<f64, nalgebra::Dyn>)> {
        let c = self.c(lambda);
        let chol = self.xwx(lambda).cholesky()?;
        let rhs = &self.xy - &self.x1 * (c * self.ybar_sum);
        Some((chol.solve(&rhs), chol))
    }

    /// `Q(λ) = Σ_n r_n' (I - cJ) r_n` at the GLS `β`.
    pub fn q(&self, lambda: f64, beta: &DVector<f64>) -> f64 {
        let c = self.c(lambda);
        let mu = self.x * beta;
        let mut q = 0.0;
        for i in 0..self.n {
            let (mut ss, mut s) = (0.0, 0.0);
            for k in 0..self.g {
                let r = self.y[(i, k)] - mu[k];
                ss += r * r;
                s += r;
            }
            q += ss - c * s * s;
        }
        q.max(0.0)
    }

    fn nobs(&self) -> f64 {
        (self.n * self.g) as f64
    }

    /// Log-likelihood at `(λ, σ²)` with `β` at its GLS value.
    pub fn loglik(&self, lambda: f64, sigma2: f64) -> Option<f64> {
        let (beta, _) = self.beta(lambda)?;
        let q = self.q(lambda, &beta);
        let nobs = self.nobs();
        let g = self.g as f64;
        Some(
            -0.5 * (nobs * (2.0 * PI).ln()
                + nobs * sigma2.ln()
                + self.n as f64 * (1.0 + g * lambda).ln()
                + q / sigma2),
        )
    }

    /// Profiled log-likelihood in `λ` alone, with `σ²` at its optimum.
    /// Returns `(loglik, σ², β)`.
    pub fn profiled(&self, lambda: f64, reml: bool) -> Option<(f64, f64, DVector<f64>)> {
        let (beta, chol) = self.beta(lambda)?;
        let q = self.q(lambda, &beta);
        let g = self.g as f64;
        let n = self.n as f64;
        let p = self.x.ncols() as f64;
        let dof = if reml { self.nobs() - p } else { self.nobs() };
        let sigma2 = q / dof;
        let mut ll = -0.5 * (dof * ((2.0 * PI * sigma2).ln() + 1.0) + n * (1.0 + g * lambda).ln());
        if reml {
            // ln det(N X'WX) from the Cholesky diagonal
            let logdet: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum::<f64>() + p * n.ln();
            ll -= 0.5 * logdet;
        }
        Some((ll, sigma2, beta))
    }
}

/// Fits `L[n,k] = S[k,:]·β + u_n + ε` by maximum likelihood (or REML when
/// `opts.reml`).
pub fn fit_mixed(
    l: &PerplexityMatrix,
    s: &DesignMatrix,
    opts: FitOptions,
) -> Result<MixedModelFit, AnalysisError> {
    if s.row_names != l.grammar_names {
        return Err(AnalysisError::Mismatch {
            design: s.row_names.clone(),
            matrix: l.grammar_names.clone(),
        });
    }
    let (n, g) = l.values.shape();
    let p = s.ncols();
    if n < 2 {
        return Err(AnalysisError::TooFew(format!("{n} sentences; at least 2 are needed")));
    }
    if n * g <= p + 2 {
        return Err(AnalysisError::TooFew(format!(
            "{} observations for {p} coefficients and 2 variances",
            n * g
        )));
    }
    let rank = s.rank();
    if rank < p {
        return Err(AnalysisError::RankDeficient { rank, columns: p });
    }

    let prof = ProfiledLikelihood::new(l, s);
    let mut diagnostics = Vec::new();
    let grand = l.values.mean();
    let tss: f64 = l.values.iter().map(|v| (v - grand).powi(2)).sum();
    let (beta0, _) = prof.beta(0.0).ok_or(AnalysisError::RankDeficient { rank, columns: p })?;

    if tss == 0.0 || prof.q(0.0, &beta0) <= 1e-24 * tss {
        diagnostics.push("residual variance is zero: the design explains the data exactly; \
             variance components are reported as 0 on the boundary"
            .to_string());
        return Ok(MixedModelFit {
            labels: s.column_labels.clone(),
            switch_names: s.switch_names.clone(),
            coding: s.coding,
            beta: beta0.iter().copied().collect(),
            stderr: vec![0.0; p],
            sigma2_dif: 0.0,
            sigma2: 0.0,
            lambda: 0.0,
            log_likelihood: f64::INFINITY,
            reml: opts.reml,
            n_sentences: n,
            n_grammars: g,
            degenerate: true,
            diagnostics,
        });
    }

    let objective = |lambda: f64| -> f64 {
        match prof.profiled(lambda, opts.reml) {
            Some((ll, _, _)) if ll.is_finite() => ll,
            _ => f64::NEG_INFINITY,
        }
    };

    // scan: 0 followed by log-spaced points
    let steps = ((LOG10_LAMBDA_MAX - LOG10_LAMBDA_MIN) as usize) * SCAN_STEPS_PER_DECADE;
    let mut grid = vec![0.0];
    grid.extend(
        (0..=steps).map(|i| 10f64.powf(LOG10_LAMBDA_MIN + i as f64 / SCAN_STEPS_PER_DECADE as f64)),
    );
    let values: Vec<f64> = grid.iter().map(|&x| objective(x)).collect();
    let best = (0..grid.len())
        .max_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("non-empty grid");
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (mut lambda, mut ll) = golden_section_max(&objective, lo, hi, LAMBDA_TOL);
    if values[best] > ll {
        lambda = grid[best];
        ll = values[best];
    }
    // within rounding of the boundary value: report the boundary itself
    let at_zero = objective(0.0);
    let near_zero = lambda < 10f64.powf(LOG10_LAMBDA_MIN) && at_zero >= ll - 1e-12 * ll.abs().max(1.0);
    if at_zero >= ll || near_zero {
        lambda = 0.0;
        ll = at_zero;
    }
    if !ll.is_finite() {
        return Err(AnalysisError::NonFinite);
    }
    if lambda == 0.0 {
        diagnostics.push("sentence-difficulty variance estimate is on the boundary (0)".to_string());
    }
    if lambda >= 10f64.powf(LOG10_LAMBDA_MAX) {
        diagnostics.push("variance ratio reached the search ceiling".to_string());
    }

    let (ll, sigma2, beta) = prof.profiled(lambda, opts.reml).ok_or(AnalysisError::NonFinite)?;
    let (_, chol) = prof.beta(lambda).ok_or(AnalysisError::NonFinite)?;
    // Cov(β) = (X' V^-1 X)^-1 = σ² / N · (X'WX)^-1
    let cov = chol.inverse() * (sigma2 / n as f64);
    let stderr: Vec<f64> = cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect();
    let degenerate = sigma2 <= 1e-14 * tss / (n * g) as f64;
    if degenerate {
        diagnostics.push("residual variance is numerically zero".to_string());
    }

    Ok(MixedModelFit {
        labels: s.column_labels.clone(),
        switch_names: s.switch_names.clone(),
        coding: s.coding,
        beta: beta.iter().copied().collect(),
        stderr,
        sigma2_dif: lambda * sigma2,
        sigma2,
        lambda,
        log_likelihood: ll,
        reml: opts.reml,
        n_sentences: n,
        n_grammars: g,
        degenerate,
        diagnostics,
    })
}

/// Golden-section search for the maximum of `f` on `[a, b]`. Stops when
/// the bracket is narrower than `rel_tol` times its midpoint.
fn golden_section_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, rel_tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..500 {
        if (b - a) <= rel_tol * (0.5 * (a + b)).abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::build_design;

    #[test]
    fn golden_section_finds_interior_maximum() {
        let (x, fx) = golden_section_max(&|x: f64| -(x - 2.5).powi(2), 0.0, 10.0, 1e-12);
        assert!((x - 2.5).abs() < 1e-9);
        assert!(fx.abs() < 1e-17);
    }

    #[test]
    fn constant_input_is_degenerate() {
        let d = build_design(2, Coding::Binary).unwrap();
        let l = PerplexityMatrix::new(DMatrix::from_element(5, 4, 7.0), d.row_names.clone()).unwrap();
        let fit = fit_mixed(&l, &d, FitOptions::default()).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.sigma2, 0.0);
        assert_eq!(fit.sigma2_dif, 0.0);
        assert!((fit.beta[0] - 7.0).abs() < 1e-12);
        assert!(fit.beta[1..].iter().all(|b| b.abs() < 1e-12));
        assert!(!fit.diagnostics.is_empty());
    }

    #[test]
    fn mismatched_columns_rejected() {
        let d = build_design(2, Coding::Binary).unwrap();
        let names = vec!["01".into(), "00".into(), "10".into(), "11".into()];
        let l = PerplexityMatrix::new(DMatrix::from_element(3, 4, 2.0), names).unwrap();
        assert!(matches!(fit_mixed(&l, &d, FitOptions::default()), Err(AnalysisError::Mismatch { .. })));
    }

    #[test]
    fn too_few_sentences() {
        let d = build_design(2, Coding::Binary).unwrap();
        let l = PerplexityMatrix::new(DMatrix::from_element(1, 4, 2.0), d.row_names.clone()).unwrap();
        assert!(matches!(fit_mixed(&l, &d, FitOptions::default()), Err(AnalysisError::TooFew(_))));
    }
}
