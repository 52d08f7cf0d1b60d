//! Single-model GLM fitting: Gaussian least squares and binomial (logistic)
//! IRLS, Wald/t inference, likelihood-based information criteria and
//! forward stepwise term selection.

mod irls;
mod ols;
mod stepwise;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use irls::{fit_binomial, irls, IrlsTrace, DEFAULT_MAX_ITER, DIVERGENCE_BOUND};
pub use ols::fit_gaussian;
pub use stepwise::{stepwise_select, Criterion, Direction, SelectionConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Binomial,
}

/// One term of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermFit {
    /// Column index of the feature in the dataset the model was fit on.
    pub index: usize,
    pub name: String,
    pub beta: f64,
    pub se: f64,
    pub p: f64,
}

/// A fitted GLM. Terms are sorted by feature index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GlmFit {
    pub family: Family,
    pub intercept: f64,
    pub terms: Vec<TermFit>,
    #[serde(rename = "logLik")]
    pub log_likelihood: f64,
    pub n_obs: usize,
    pub converged: bool,
}

impl GlmFit {
    pub fn term_indices(&self) -> Vec<usize> {
        self.terms.iter().map(|t| t.index).collect()
    }

    pub fn term(&self, index: usize) -> Option<&TermFit> {
        self.terms.iter().find(|t| t.index == index)
    }

    /// Number of estimated parameters counted by information criteria:
    /// intercept, one per term, plus the dispersion for the Gaussian family.
    pub fn n_params(&self) -> usize {
        1 + self.terms.len() + usize::from(self.family == Family::Gaussian)
    }

    /// Maps the design-column positions `0..p` of a freshly fit model onto
    /// dataset column `columns[pos]`, named from `names`.
    pub fn relabel(mut self, columns: &[usize], names: &[String]) -> GlmFit {
        for term in &mut self.terms {
            let col = columns[term.index];
            term.index = col;
            term.name = names[col].clone();
        }
        self.terms.sort_by_key(|t| t.index);
        self
    }

    /// Linear predictor for every row of `x`, whose columns are dataset
    /// features.
    pub fn linear_predictor(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if let Some(t) = self.terms.iter().find(|t| t.index >= x.ncols()) {
            return Err(Error::FeatureOutOfRange {
                index: t.index,
                n_features: x.ncols(),
            });
        }
        Ok((0..x.nrows())
            .map(|i| {
                let mut eta = self.intercept;
                for t in &self.terms {
                    eta += t.beta * x[(i, t.index)];
                }
                eta
            })
            .collect())
    }

    /// Mean response: probabilities for binomial models, the linear
    /// predictor for Gaussian ones.
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        let eta = self.linear_predictor(x)?;
        Ok(match self.family {
            Family::Gaussian => eta,
            Family::Binomial => eta.into_iter().map(logistic).collect(),
        })
    }
}

pub(crate) fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `-2 log L + penalty * n_params`, with the penalty `log(n_obs)` for BIC and
/// 2 for AIC.
pub fn information_criterion(fit: &GlmFit, criterion: Criterion) -> f64 {
    let k = fit.n_params() as f64;
    let penalty = match criterion {
        Criterion::Aic => 2.0,
        Criterion::Bic => (fit.n_obs as f64).ln(),
    };
    -2.0 * fit.log_likelihood + penalty * k
}

/// Fits `family` on the dataset columns `columns` of `features`, returning a
/// model whose terms carry dataset indices and names.
pub fn fit_columns(
    family: Family,
    features: &DMatrix<f64>,
    y: &[f64],
    columns: &[usize],
    names: &[String],
    max_iter: usize,
) -> Result<GlmFit> {
    if let Some(&bad) = columns.iter().find(|&&c| c >= features.ncols()) {
        return Err(Error::FeatureOutOfRange {
            index: bad,
            n_features: features.ncols(),
        });
    }
    let x = features.select_columns(columns.iter());
    let fit = match family {
        Family::Gaussian => fit_gaussian(&x, y)?,
        Family::Binomial => fit_binomial(&x, y, max_iter)?,
    };
    Ok(fit.relabel(columns, names))
}

/// `[1 | x]`.
pub(crate) fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut out = DMatrix::from_element(n, x.ncols() + 1, 1.0);
    out.view_mut((0, 1), (n, x.ncols())).copy_from(x);
    out
}

/// Least-squares solve of `a * beta = b` by Householder QR. Also returns the
/// unscaled covariance `(A'A)^-1`.
pub(crate) fn qr_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let cols = a.ncols();
    let qr = a.qr();
    let r = qr.r();
    let max_diag = r.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if max_diag == 0.0 || r.diagonal().iter().any(|v| v.abs() <= 1e-10 * max_diag) {
        return Err(Error::RankDeficient);
    }
    let qtb = qr.q().transpose() * b;
    let beta = r
        .solve_upper_triangular(&qtb)
        .ok_or(Error::RankDeficient)?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(cols, cols))
        .ok_or(Error::RankDeficient)?;
    let cov = &r_inv * r_inv.transpose();
    Ok((beta, cov))
}
