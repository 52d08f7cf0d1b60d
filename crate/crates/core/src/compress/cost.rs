use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ward::{Dendrogram, Membership};
use crate::ensemble::SignificanceMatrix;
use crate::error::{Error, Result};

/// Floor on the MLE residual variance of a per-term model.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// How the cut is chosen from the cost profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Minimize over the cuts at which every per-term model has a positive
    /// residual variance. Once a term column is fit exactly its Gaussian
    /// likelihood is unbounded and only the variance floor keeps the cost
    /// finite; such cuts, and every finer one, are not eligible. Falls back
    /// to [`SelectionRule::Literal`] if no cut qualifies.
    #[default]
    WellPosed,
    /// Minimize over every evaluated cut, floored costs included.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CostEntry {
    pub k: usize,
    pub cost: f64,
    pub bic_sum: f64,
    /// Term columns whose residual variance hit the floor at this cut.
    pub saturated_terms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CostProfile {
    pub entries: Vec<CostEntry>,
    pub rule: SelectionRule,
    pub selected_k: usize,
}

impl CostProfile {
    pub fn min_cost(&self) -> f64 {
        self.entries.iter().map(|e| e.cost).fold(f64::INFINITY, f64::min)
    }

    /// `k,cost` rows, preceded by `#` comment lines.
    pub fn to_csv(&self, preamble: &[String]) -> String {
        let mut out = String::new();
        for line in preamble {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str("k,cost\n");
        for e in &self.entries {
            out.push_str(&format!("{},{}\n", e.k, e.cost));
        }
        out
    }
}

/// BIC of the group-means model predicting one significance column from the
/// cluster labels: `d * (ln(2 pi sigma2) + 1) + (k + 1) * ln(d)` with
/// `sigma2 = max(RSS / d, 1e-12)`.
pub fn term_model_bic(column: &[f64], membership: &Membership) -> Result<f64> {
    term_model(column, membership).map(|(bic, _)| bic)
}

/// BIC and whether the variance floor was engaged.
fn term_model(column: &[f64], membership: &Membership) -> Result<(f64, bool)> {
    let d = membership.labels.len();
    if column.len() != d {
        return Err(Error::LengthMismatch {
            expected: d,
            found: column.len(),
        });
    }
    if membership.labels.iter().any(|&l| l >= membership.k) {
        return Err(Error::InvalidArgument(format!("labels must be below k = {}", membership.k)));
    }
    let mut sums = vec![0.0; membership.k];
    let mut counts = vec![0usize; membership.k];
    for (&v, &l) in column.iter().zip(&membership.labels) {
        sums[l] += v;
        counts[l] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let rss: f64 = column
        .iter()
        .zip(&membership.labels)
        .map(|(&v, &l)| (v - means[l]).powi(2))
        .sum();
    let df = d as f64;
    let saturated = rss / df <= VARIANCE_FLOOR;
    let sigma2 = (rss / df).max(VARIANCE_FLOOR);
    let neg2ll = df * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0);
    Ok((neg2ll + (membership.k as f64 + 1.0) * df.ln(), saturated))
}

/// Sum of per-term BICs and the number of floored columns.
fn bic_sum(s: &SignificanceMatrix, membership: &Membership) -> Result<(f64, usize)> {
    if s.ncols() == 0 {
        return Err(Error::NoTerms);
    }
    if membership.labels.len() != s.nrows() {
        return Err(Error::LengthMismatch {
            expected: s.nrows(),
            found: membership.labels.len(),
        });
    }
    let per_term = (0..s.ncols())
        .into_par_iter()
        .map(|j| term_model(&s.column(j), membership))
        .collect::<Result<Vec<(f64, bool)>>>()?;
    let sum = per_term.iter().map(|(b, _)| b).sum();
    let saturated = per_term.iter().filter(|(_, sat)| *sat).count();
    Ok((sum, saturated))
}

/// Mean per-term BIC over all columns of `s`.
pub fn cost_at_k(s: &SignificanceMatrix, membership: &Membership) -> Result<f64> {
    Ok(bic_sum(s, membership)?.0 / s.ncols() as f64)
}

fn entry(s: &SignificanceMatrix, membership: &Membership) -> Result<CostEntry> {
    let (sum, saturated_terms) = bic_sum(s, membership)?;
    Ok(CostEntry {
        k: membership.k,
        cost: sum / s.ncols() as f64,
        bic_sum: sum,
        saturated_terms,
    })
}

/// Profile of a one-model ensemble: the single cut `k = 1`.
pub(crate) fn single_model_profile(s: &SignificanceMatrix, rule: SelectionRule) -> Result<CostProfile> {
    Ok(CostProfile {
        entries: vec![entry(s, &Membership::single(s.nrows()))?],
        rule,
        selected_k: 1,
    })
}

/// Cost for every cut `k = 1..=k_max`; the smallest `k` minimizing the cost
/// under [`SelectionRule::WellPosed`] is selected.
pub fn select_k(s: &SignificanceMatrix, dendrogram: &Dendrogram, k_max: usize) -> Result<CostProfile> {
    select_k_with(s, dendrogram, k_max, SelectionRule::WellPosed)
}

/// [`select_k`] with an explicit selection rule.
pub fn select_k_with(
    s: &SignificanceMatrix,
    dendrogram: &Dendrogram,
    k_max: usize,
    rule: SelectionRule,
) -> Result<CostProfile> {
    let d = dendrogram.n_leaves;
    if k_max < 1 || k_max > d {
        return Err(Error::KOutOfRange { k: k_max, d });
    }
    if s.ncols() == 0 {
        return Err(Error::NoTerms);
    }
    let entries = (1..=k_max)
        .into_par_iter()
        .map(|k| entry(s, &dendrogram.memberships_at(k)?))
        .collect::<Result<Vec<_>>>()?;
    let eligible: Vec<&CostEntry> = match rule {
        SelectionRule::WellPosed => entries.iter().take_while(|e| e.saturated_terms == 0).collect(),
        SelectionRule::Literal => Vec::new(),
    };
    let pool: Vec<&CostEntry> = if eligible.is_empty() {
        entries.iter().collect()
    } else {
        eligible
    };
    let mut selected = pool[0];
    for &e in &pool[1..] {
        if e.cost < selected.cost {
            selected = e;
        }
    }
    let selected_k = selected.k;
    Ok(CostProfile {
        entries,
        rule,
        selected_k,
    })
}
