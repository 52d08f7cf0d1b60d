//! Bagged GLM ensembles and their coefficient (B) and significance (S)
//! matrix views.

use std::ops::Deref;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, OutcomeKind, Standardizer};
use crate::dist::floor_p;
use crate::error::{Error, Result};
use crate::glm::{stepwise_select, Family, GlmFit, SelectionConfig};

/// Bootstrap draws allowed per bag before giving up on getting both classes.
pub const MAX_BOOTSTRAP_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BagConfig {
    pub n_bags: usize,
    /// Features drawn per bag; `None` means `ceil(sqrt(p))`.
    pub features_per_bag: Option<usize>,
    /// Screened candidates handed to stepwise selection; `None` means
    /// `min(30, features_per_bag)`.
    pub candidate_cap: Option<usize>,
    pub selection: SelectionConfig,
    pub seed: u64,
}

impl Default for BagConfig {
    fn default() -> Self {
        BagConfig {
            n_bags: 100,
            features_per_bag: None,
            candidate_cap: None,
            selection: SelectionConfig::default(),
            seed: 0,
        }
    }
}

impl BagConfig {
    /// Copy with defaults filled in for a dataset of `n_features` columns.
    pub fn resolve(&self, n_features: usize) -> Result<BagConfig> {
        if self.n_bags < 1 {
            return Err(Error::InvalidArgument("n_bags must be >= 1".into()));
        }
        let per_bag = self
            .features_per_bag
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize);
        if per_bag < 1 || per_bag > n_features {
            return Err(Error::InvalidArgument(format!(
                "features_per_bag = {per_bag} must lie in 1..={n_features}"
            )));
        }
        let cap = self.candidate_cap.unwrap_or(per_bag.min(30));
        if cap < 1 {
            return Err(Error::InvalidArgument("candidate_cap must be >= 1".into()));
        }
        Ok(BagConfig {
            features_per_bag: Some(per_bag),
            candidate_cap: Some(cap.min(per_bag)),
            ..self.clone()
        })
    }
}

/// What the ensemble was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainingMeta {
    pub n_obs: usize,
    pub outcome_kind: OutcomeKind,
    /// Transform applied to raw features before fitting, if any.
    pub standardizer: Option<Standardizer>,
}

/// `d` fitted models over a union of `n` terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    config: BagConfig,
    family: Family,
    models: Vec<GlmFit>,
    term_union: Vec<usize>,
    feature_names: Vec<String>,
    training: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct EnsembleDoc {
    config: BagConfig,
    family: Family,
    models: Vec<GlmFit>,
    term_union: Vec<String>,
    feature_names: Vec<String>,
    training: TrainingMeta,
}

impl Ensemble {
    pub fn from_models(
        models: Vec<GlmFit>,
        feature_names: Vec<String>,
        config: BagConfig,
        training: TrainingMeta,
    ) -> Result<Ensemble> {
        let Some(first) = models.first() else {
            return Err(Error::InvalidArgument("an ensemble needs at least one model".into()));
        };
        let family = first.family;
        if models.iter().any(|m| m.family != family) {
            return Err(Error::InvalidArgument("ensemble members mix families".into()));
        }
        let mut term_union = Vec::new();
        for m in &models {
            for t in &m.terms {
                if t.index >= feature_names.len() {
                    return Err(Error::FeatureOutOfRange {
                        index: t.index,
                        n_features: feature_names.len(),
                    });
                }
                term_union.push(t.index);
            }
        }
        term_union.sort_unstable();
        term_union.dedup();
        Ok(Ensemble {
            config,
            family,
            models,
            term_union,
            feature_names,
            training,
        })
    }

    pub fn config(&self) -> &BagConfig {
        &self.config
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn models(&self) -> &[GlmFit] {
        &self.models
    }

    /// Ensemble size `d`.
    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Sorted dataset indices of every term used by any member.
    pub fn term_union(&self) -> &[usize] {
        &self.term_union
    }

    pub fn term_names(&self) -> Vec<String> {
        self.term_union.iter().map(|&i| self.feature_names[i].clone()).collect()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn training(&self) -> &TrainingMeta {
        &self.training
    }

    pub fn set_standardizer(&mut self, standardizer: Option<Standardizer>) {
        self.training.standardizer = standardizer;
    }

    /// Number of members using each term of the union.
    pub fn term_counts(&self) -> Vec<usize> {
        self.term_union
            .iter()
            .map(|&j| self.models.iter().filter(|m| m.term(j).is_some()).count())
            .collect()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(EnsembleDoc {
            config: self.config.clone(),
            family: self.family,
            models: self.models.clone(),
            term_union: self.term_names(),
            feature_names: self.feature_names.clone(),
            training: self.training.clone(),
        })
        .expect("ensemble is serializable")
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Ensemble> {
        let doc: EnsembleDoc = serde_json::from_value(value)?;
        let ensemble = Ensemble::from_models(doc.models, doc.feature_names, doc.config, doc.training)?;
        if ensemble.term_names() != doc.term_union {
            return Err(Error::InvalidArgument(
                "termUnion does not match the members' terms".into(),
            ));
        }
        Ok(ensemble)
    }
}

/// Per-bag RNG: the master seed selects the key, the bag index the stream,
/// so a bag's draws do not depend on which thread fits it.
pub fn bag_rng(seed: u64, bag: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(bag as u64);
    rng
}

fn abs_correlation(x: &DMatrix<f64>, col: usize, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let xm = x.column(col).sum() / n;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, &yi) in y.iter().enumerate() {
        let dx = x[(i, col)] - xm;
        let dy = yi - ym;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx > 0.0 && syy > 0.0 {
        (sxy / (sxx * syy).sqrt()).abs()
    } else {
        0.0
    }
}

fn fit_bag(dataset: &Dataset, config: &BagConfig, family: Family, bag: usize) -> Result<GlmFit> {
    let mut rng = bag_rng(config.seed, bag);
    let n = dataset.n_obs();
    let y_all = dataset.outcome();

    let mut rows = Vec::new();
    let mut ok = false;
    for _ in 0..MAX_BOOTSTRAP_ATTEMPTS {
        rows = (0..n).map(|_| rng.gen_range(0..n)).collect::<Vec<usize>>();
        let positives = rows.iter().filter(|&&r| y_all[r] == 1.0).count();
        if family == Family::Gaussian || (positives > 0 && positives < n) {
            ok = true;
            break;
        }
    }
    if !ok {
        return Err(Error::DegenerateBootstrap(MAX_BOOTSTRAP_ATTEMPTS));
    }

    let per_bag = config.features_per_bag.expect("resolved");
    let cap = config.candidate_cap.expect("resolved");
    let mut features = sample(&mut rng, dataset.n_features(), per_bag).into_vec();
    features.sort_unstable();

    let full = dataset.features();
    let x = DMatrix::from_fn(n, per_bag, |i, j| full[(rows[i], features[j])]);
    let y: Vec<f64> = rows.iter().map(|&r| y_all[r]).collect();

    let mut ranked: Vec<(usize, f64)> = (0..per_bag).map(|j| (j, abs_correlation(&x, j, &y))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut candidates: Vec<usize> = ranked.iter().take(cap).map(|&(j, _)| j).collect();
    candidates.sort_unstable();

    let fit = stepwise_select(&x, &y, &candidates, family, &config.selection)?;
    Ok(fit.relabel(&features, dataset.feature_names()))
}

/// Fits `n_bags` models, each on a bootstrap resample of the observations
/// and a random feature subset screened down to the candidates most
/// correlated with the outcome, via stepwise selection.
///
/// Bags run in parallel on the current rayon pool; the result is identical
/// to sequential execution for a fixed seed.
pub fn fit_ensemble(dataset: &Dataset, config: &BagConfig) -> Result<Ensemble> {
    let config = config.resolve(dataset.n_features())?;
    let family = match dataset.outcome_kind() {
        OutcomeKind::Binary => Family::Binomial,
        OutcomeKind::Continuous => Family::Gaussian,
    };
    let models = (0..config.n_bags)
        .into_par_iter()
        .map(|bag| fit_bag(dataset, &config, family, bag))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::from_models(
        models,
        dataset.feature_names().to_vec(),
        config,
        TrainingMeta {
            n_obs: dataset.n_obs(),
            outcome_kind: dataset.outcome_kind(),
            standardizer: None,
        },
    )
}

/// A real matrix with row and column labels, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LabeledMatrix {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl LabeledMatrix {
    pub fn nrows(&self) -> usize {
        self.values.len()
    }

    pub fn ncols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }

    /// CSV with a leading `model` header cell. Numbers are written in their
    /// shortest round-trip form, so [`LabeledMatrix::from_csv`] restores
    /// them bitwise. Each `preamble` line is emitted as a `#` comment.
    pub fn to_csv(&self, preamble: &[String]) -> String {
        let mut out = String::new();
        for line in preamble {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["model".to_string()];
        header.extend(self.col_labels.iter().cloned());
        writer.write_record(&header).expect("in-memory write");
        for (label, row) in self.row_labels.iter().zip(&self.values) {
            let mut record = vec![label.clone()];
            record.extend(row.iter().map(|v| v.to_string()));
            writer.write_record(&record).expect("in-memory write");
        }
        let bytes = writer.into_inner().expect("in-memory flush");
        out.push_str(std::str::from_utf8(&bytes).expect("utf-8 input"));
        out
    }

    pub fn from_csv(text: &str) -> Result<LabeledMatrix> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let col_labels: Vec<String> = reader.headers()?.iter().skip(1).map(str::to_owned).collect();
        let mut row_labels = Vec::new();
        let mut values = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let record = record?;
            row_labels.push(record.get(0).unwrap_or_default().to_owned());
            let row = record
                .iter()
                .skip(1)
                .enumerate()
                .map(|(c, cell)| {
                    cell.parse::<f64>().map_err(|_| Error::NonNumeric {
                        row: r + 1,
                        col: col_labels.get(c).cloned().unwrap_or_default(),
                        value: cell.to_owned(),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != col_labels.len() {
                return Err(Error::LengthMismatch {
                    expected: col_labels.len(),
                    found: row.len(),
                });
            }
            values.push(row);
        }
        Ok(LabeledMatrix {
            row_labels,
            col_labels,
            values,
        })
    }
}

/// `d x n` coefficients, 0 where a term is absent. Intercepts are excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientMatrix(pub LabeledMatrix);

/// `d x n` significances `-log10(p)`, 0 where a term is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMatrix(pub LabeledMatrix);

impl Deref for CoefficientMatrix {
    type Target = LabeledMatrix;
    fn deref(&self) -> &LabeledMatrix {
        &self.0
    }
}

impl Deref for SignificanceMatrix {
    type Target = LabeledMatrix;
    fn deref(&self) -> &LabeledMatrix {
        &self.0
    }
}

impl SignificanceMatrix {
    /// Unlabeled matrix from raw rows; entries must lie in `[0, 300]`.
    pub fn from_rows(values: Vec<Vec<f64>>) -> Result<SignificanceMatrix> {
        let ncols = values.first().map_or(0, Vec::len);
        for row in &values {
            if row.len() != ncols {
                return Err(Error::LengthMismatch {
                    expected: ncols,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !(0.0..=300.0).contains(v)) {
                return Err(Error::InvalidArgument(
                    "significance entries must lie in [0, 300]".into(),
                ));
            }
        }
        Ok(SignificanceMatrix(LabeledMatrix {
            row_labels: model_labels(values.len()),
            col_labels: (0..ncols).map(|j| format!("term_{j}")).collect(),
            values,
        }))
    }
}

fn model_labels(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("model_{i}")).collect()
}

fn term_matrix(ensemble: &Ensemble, entry: impl Fn(&crate::glm::TermFit) -> f64) -> LabeledMatrix {
    let values = ensemble
        .models()
        .iter()
        .map(|m| {
            ensemble
                .term_union()
                .iter()
                .map(|&j| m.term(j).map_or(0.0, &entry))
                .collect()
        })
        .collect();
    LabeledMatrix {
        row_labels: model_labels(ensemble.len()),
        col_labels: ensemble.term_names(),
        values,
    }
}

pub fn build_coefficient_matrix(ensemble: &Ensemble) -> CoefficientMatrix {
    CoefficientMatrix(term_matrix(ensemble, |t| t.beta))
}

/// `S[i][j] = -log10(p)` with p floored at 1e-300, and exactly 0 for terms
/// absent from model `i`.
pub fn build_significance_matrix(ensemble: &Ensemble) -> SignificanceMatrix {
    SignificanceMatrix(term_matrix(ensemble, |t| significance(t.p)))
}

/// `-log10(p)` on the floored p-value; never negative zero.
pub fn significance(p: f64) -> f64 {
    let s = -floor_p(p).log10();
    if s <= 0.0 {
        0.0
    } else {
        s
    }
}
