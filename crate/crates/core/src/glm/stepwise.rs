use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{fit_binomial, fit_gaussian, information_criterion, Family, GlmFit, DEFAULT_MAX_ITER};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SelectionConfig {
    pub criterion: Criterion,
    pub max_terms: usize,
    pub direction: Direction,
    /// A candidate is only added when it lowers the criterion by at least
    /// this much (and by more than zero).
    pub min_improvement: f64,
    /// IRLS iteration cap for binomial fits.
    pub max_iter: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            criterion: Criterion::Bic,
            max_terms: 10,
            direction: Direction::Forward,
            min_improvement: 0.0,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

fn fit_subset(family: Family, x: &DMatrix<f64>, y: &[f64], cols: &[usize], max_iter: usize) -> Result<GlmFit> {
    let sub = x.select_columns(cols.iter());
    let mut fit = match family {
        Family::Gaussian => fit_gaussian(&sub, y)?,
        Family::Binomial => fit_binomial(&sub, y, max_iter)?,
    };
    for term in &mut fit.terms {
        term.index = cols[term.index];
        term.name = format!("x{}", term.index);
    }
    Ok(fit)
}

/// Forward selection from the intercept-only model over the columns
/// `candidates` of `x`. Each step adds the candidate giving the lowest
/// criterion (lowest column index on ties); selection stops once the best
/// improvement is not positive or falls below `min_improvement`, or when
/// `max_terms` terms are in. Candidates whose fit fails are skipped.
///
/// Terms of the returned model are indexed by column of `x` and named
/// `x{index}`; use [`GlmFit::relabel`] to attach dataset names.
pub fn stepwise_select(
    x: &DMatrix<f64>,
    y: &[f64],
    candidates: &[usize],
    family: Family,
    config: &SelectionConfig,
) -> Result<GlmFit> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate terms".into()));
    }
    if config.max_terms < 1 {
        return Err(Error::InvalidArgument("max_terms must be >= 1".into()));
    }
    if let Some(&bad) = candidates.iter().find(|&&c| c >= x.ncols()) {
        return Err(Error::FeatureOutOfRange {
            index: bad,
            n_features: x.ncols(),
        });
    }
    let mut remaining: Vec<usize> = candidates.to_vec();
    remaining.sort_unstable();
    remaining.dedup();

    let mut selected: Vec<usize> = Vec::new();
    let mut current = fit_subset(family, x, y, &selected, config.max_iter)?;
    let mut current_score = information_criterion(&current, config.criterion);

    while selected.len() < config.max_terms && !remaining.is_empty() {
        let mut best: Option<(usize, GlmFit, f64)> = None;
        for (pos, &c) in remaining.iter().enumerate() {
            let mut cols = selected.clone();
            cols.push(c);
            cols.sort_unstable();
            let Ok(fit) = fit_subset(family, x, y, &cols, config.max_iter) else {
                continue;
            };
            let score = information_criterion(&fit, config.criterion);
            if !score.is_finite() {
                continue;
            }
            if best.as_ref().is_none_or(|(_, _, s)| score < *s) {
                best = Some((pos, fit, score));
            }
        }
        let Some((pos, fit, score)) = best else {
            break;
        };
        let improvement = current_score - score;
        if !(improvement > 0.0) || improvement < config.min_improvement {
            break;
        }
        selected.push(remaining.remove(pos));
        selected.sort_unstable();
        current = fit;
        current_score = score;
    }
    Ok(current)
}
