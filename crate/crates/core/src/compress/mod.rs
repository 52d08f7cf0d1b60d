//! Ensemble summarization: cluster the models in significance space, pick
//! the number of clusters minimizing the mean per-term BIC, and replace each
//! cluster by one representative model.

mod cost;
mod ward;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::ensemble::{build_significance_matrix, Ensemble, SignificanceMatrix};
use crate::error::{Error, Result};
use crate::glm::{fit_columns, GlmFit, DEFAULT_MAX_ITER};

pub use cost::{
    cost_at_k, select_k, select_k_with, term_model_bic, CostEntry, CostProfile, SelectionRule, VARIANCE_FLOOR,
};
pub use ward::{memberships_at, ward_cluster, Dendrogram, Membership, Merge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// The member closest (summed Euclidean distance in S) to the others.
    Medoid,
    /// A fresh fit on the terms occurring in the cluster.
    Centroid,
}

/// Which terms a centroid refit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CentroidTerms {
    /// Every term used by any member.
    #[default]
    Union,
    /// Terms used by more than half of the members.
    Majority,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CompressOptions {
    pub centroid_terms: CentroidTerms,
    pub max_iter: usize,
}

impl Default for CompressOptions {
    fn default() -> Self {
        CompressOptions {
            centroid_terms: CentroidTerms::Union,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Cluster {
    /// Label of the cluster in the membership vector.
    pub label: usize,
    pub size: usize,
    pub member_indices: Vec<usize>,
    pub representative: GlmFit,
    /// The centroid refit failed and the medoid stands in.
    #[serde(default)]
    pub degenerate: bool,
    /// The centroid term set was cut to fit the number of observations.
    #[serde(default)]
    pub truncated: bool,
}

/// One representative per cluster. Clusters are ordered by their smallest
/// member index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedEnsemble {
    pub strategy: Strategy,
    pub k: usize,
    pub clusters: Vec<Cluster>,
}

impl CompressedEnsemble {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c.size).collect()
    }

    pub fn representatives(&self) -> impl Iterator<Item = &GlmFit> {
        self.clusters.iter().map(|c| &c.representative)
    }

    /// Total number of terms across representatives.
    pub fn total_terms(&self) -> usize {
        self.representatives().map(|m| m.terms.len()).sum()
    }
}

/// Index (into `members`' model indices) of the member of minimal summed
/// Euclidean distance to the other members; ties go to the lowest index.
pub fn medoid(s: &SignificanceMatrix, members: &[usize]) -> usize {
    let distance = |a: usize, b: usize| -> f64 {
        s.row(a)
            .iter()
            .zip(s.row(b))
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let mut best = (f64::INFINITY, usize::MAX);
    for &m in members {
        let total: f64 = members.iter().filter(|&&o| o != m).map(|&o| distance(m, o)).sum();
        if total < best.0 || (total == best.0 && m < best.1) {
            best = (total, m);
        }
    }
    best.1
}

fn centroid_terms(ensemble: &Ensemble, members: &[usize], rule: CentroidTerms, limit: usize) -> (Vec<usize>, bool) {
    let models = ensemble.models();
    let mut counts: Vec<(usize, usize)> = Vec::new();
    for &m in members {
        for t in &models[m].terms {
            match counts.iter_mut().find(|(idx, _)| *idx == t.index) {
                Some((_, c)) => *c += 1,
                None => counts.push((t.index, 1)),
            }
        }
    }
    if rule == CentroidTerms::Majority {
        counts.retain(|&(_, c)| 2 * c > members.len());
    }
    counts.sort_by_key(|&(idx, _)| idx);
    let truncated = counts.len() > limit;
    if truncated {
        counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        counts.truncate(limit);
    }
    let mut terms: Vec<usize> = counts.into_iter().map(|(idx, _)| idx).collect();
    terms.sort_unstable();
    (terms, truncated)
}

/// Replaces every cluster of `membership` by one representative.
///
/// Medoids are copied verbatim from the ensemble. Centroids are refit on the
/// full `training` data over the cluster's terms (at most `n_obs - 2` of
/// them, most frequent first); a failing refit falls back to the medoid and
/// marks the cluster degenerate.
pub fn compress_membership(
    ensemble: &Ensemble,
    s: &SignificanceMatrix,
    membership: &Membership,
    strategy: Strategy,
    training: Option<&Dataset>,
    options: &CompressOptions,
) -> Result<CompressedEnsemble> {
    if membership.labels.len() != ensemble.len() || s.nrows() != ensemble.len() {
        return Err(Error::LengthMismatch {
            expected: ensemble.len(),
            found: membership.labels.len().min(s.nrows()),
        });
    }
    let training = match (strategy, training) {
        (Strategy::Centroid, None) => {
            return Err(Error::InvalidArgument("centroid compression needs training data".into()))
        }
        (Strategy::Centroid, Some(t)) => {
            if t.n_features() != ensemble.feature_names().len() {
                return Err(Error::LengthMismatch {
                    expected: ensemble.feature_names().len(),
                    found: t.n_features(),
                });
            }
            Some(t)
        }
        (Strategy::Medoid, t) => t,
    };

    let mut groups: Vec<(usize, Vec<usize>)> = membership
        .groups()
        .into_iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .collect();
    groups.sort_by_key(|(_, g)| g[0]);

    let mut clusters = Vec::with_capacity(groups.len());
    for (label, members) in groups {
        let medoid_model = || ensemble.models()[medoid(s, &members)].clone();
        let (representative, degenerate, truncated) = match strategy {
            Strategy::Medoid => (medoid_model(), false, false),
            Strategy::Centroid => {
                let data = training.expect("checked above");
                let limit = data.n_obs().saturating_sub(2);
                let (terms, truncated) = centroid_terms(ensemble, &members, options.centroid_terms, limit);
                match fit_columns(
                    ensemble.family(),
                    data.features(),
                    data.outcome(),
                    &terms,
                    data.feature_names(),
                    options.max_iter,
                ) {
                    Ok(fit) => (fit, false, truncated),
                    Err(e) => {
                        warn!("centroid refit of cluster {label} failed ({e}); using its medoid");
                        (medoid_model(), true, truncated)
                    }
                }
            }
        };
        clusters.push(Cluster {
            label,
            size: members.len(),
            member_indices: members,
            representative,
            degenerate,
            truncated,
        });
    }
    Ok(CompressedEnsemble {
        strategy,
        k: membership.k,
        clusters,
    })
}

/// [`compress_membership`] for the cut of `dendrogram` into `k` clusters.
pub fn compress(
    ensemble: &Ensemble,
    s: &SignificanceMatrix,
    dendrogram: &Dendrogram,
    k: usize,
    strategy: Strategy,
    training: Option<&Dataset>,
    options: &CompressOptions,
) -> Result<CompressedEnsemble> {
    let membership = dendrogram.memberships_at(k)?;
    compress_membership(ensemble, s, &membership, strategy, training, options)
}

/// Everything needed to compress one ensemble: its S matrix, the Ward tree,
/// the cost profile and the chosen cut.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressionPlan {
    pub significance: SignificanceMatrix,
    /// `None` for a single-model ensemble.
    pub dendrogram: Option<Dendrogram>,
    /// `None` when no model has a term.
    pub profile: Option<CostProfile>,
    pub k: usize,
    pub membership: Membership,
}

/// Knobs for [`plan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanOptions {
    /// Largest cut scored; `None` traverses the whole dendrogram.
    pub k_max: Option<usize>,
    /// Use this `k` instead of the cost minimizer.
    pub forced_k: Option<usize>,
    pub rule: SelectionRule,
}

/// Builds S, clusters it, scores the cuts `1..=k_max` and picks `k`.
pub fn plan(ensemble: &Ensemble, options: &PlanOptions) -> Result<CompressionPlan> {
    let d = ensemble.len();
    let significance = build_significance_matrix(ensemble);
    if d == 1 {
        if let Some(k) = options.forced_k.filter(|&k| k != 1) {
            return Err(Error::KOutOfRange { k, d });
        }
        let profile = match cost::single_model_profile(&significance, options.rule) {
            Ok(p) => Some(p),
            Err(Error::NoTerms) => None,
            Err(e) => return Err(e),
        };
        return Ok(CompressionPlan {
            significance,
            dendrogram: None,
            profile,
            k: 1,
            membership: Membership::single(1),
        });
    }
    let dendrogram = ward_cluster(&significance)?;
    let k_max = options.k_max.unwrap_or(d).clamp(1, d);
    let profile = match select_k_with(&significance, &dendrogram, k_max, options.rule) {
        Ok(p) => Some(p),
        Err(Error::NoTerms) => None,
        Err(e) => return Err(e),
    };
    let k = match (options.forced_k, &profile) {
        (Some(k), _) => k,
        (None, Some(p)) => p.selected_k,
        (None, None) => 1,
    };
    let membership = dendrogram.memberships_at(k)?;
    Ok(CompressionPlan {
        significance,
        dendrogram: Some(dendrogram),
        profile,
        k,
        membership,
    })
}

impl CompressionPlan {
    pub fn compress(
        &self,
        ensemble: &Ensemble,
        strategy: Strategy,
        training: Option<&Dataset>,
        options: &CompressOptions,
    ) -> Result<CompressedEnsemble> {
        compress_membership(ensemble, &self.significance, &self.membership, strategy, training, options)
    }
}
