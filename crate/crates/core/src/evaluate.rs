//! Ensemble prediction, AUC, repeated cross-validation of full versus
//! compressed ensembles, and the paired one-tailed t-test.

use log::warn;
use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compress::{plan, CompressOptions, CompressedEnsemble, PlanOptions, SelectionRule, Strategy};
use crate::data::{make_folds, Dataset, OutcomeKind, Standardizer};
use crate::dist::student_t_upper;
use crate::ensemble::{fit_ensemble, BagConfig, Ensemble};
use crate::error::{Error, Result};
use crate::glm::GlmFit;

/// How compressed representatives are weighted when averaging predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Proportional to the number of models in the cluster.
    #[default]
    #[serde(rename = "size")]
    ClusterSize,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PredictionConfig {
    pub compressed_weighting: Weighting,
}

/// Weighted mean of the members' mean responses. Accumulates in the order
/// given.
pub fn predict(models: &[(&GlmFit, f64)], x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("no models to predict with".into()));
    }
    if models.iter().any(|&(_, w)| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    let total: f64 = models.iter().map(|&(_, w)| w).sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("weights must not all be zero".into()));
    }
    let mut acc = vec![0.0; x.nrows()];
    for &(model, w) in models {
        for (a, p) in acc.iter_mut().zip(model.predict(x)?) {
            *a += w * p;
        }
    }
    Ok(acc.into_iter().map(|a| a / total).collect())
}

/// Equal-weight average over every ensemble member.
pub fn predict_ensemble(ensemble: &Ensemble, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let models: Vec<(&GlmFit, f64)> = ensemble.models().iter().map(|m| (m, 1.0)).collect();
    predict(&models, x)
}

pub fn predict_compressed(compressed: &CompressedEnsemble, x: &DMatrix<f64>, weighting: Weighting) -> Result<Vec<f64>> {
    let models: Vec<(&GlmFit, f64)> = compressed
        .clusters
        .iter()
        .map(|c| {
            let w = match weighting {
                Weighting::ClusterSize => c.size as f64,
                Weighting::Uniform => 1.0,
            };
            (&c.representative, w)
        })
        .collect();
    predict(&models, x)
}

/// Area under the ROC curve as the normalized Mann-Whitney statistic: the
/// fraction of (positive, negative) pairs ranked correctly, ties counting
/// one half.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            found: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1.0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of midranks of the positives; ranks are multiples of one half, so
    // the statistic is exact in f64.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j + 2) as f64 / 2.0;
        let positives = order[i..=j].iter().filter(|&&o| labels[o] == 1.0).count();
        rank_sum += midrank * positives as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// One-tailed paired t-test of `baseline > comparison`: returns
/// `P(T >= t)` for `t = mean(diff) / (sd(diff) / sqrt(m))`, `diff =
/// baseline - comparison`, `m - 1` degrees of freedom. Differences that are
/// all equal give 0 or 1 by sign, and an error when they are all zero.
pub fn paired_t_test(baseline: &[f64], comparison: &[f64]) -> Result<f64> {
    if baseline.len() != comparison.len() {
        return Err(Error::LengthMismatch {
            expected: baseline.len(),
            found: comparison.len(),
        });
    }
    let m = baseline.len();
    if m < 2 {
        return Err(Error::InvalidArgument("paired t-test needs at least two pairs".into()));
    }
    let diffs: Vec<f64> = baseline.iter().zip(comparison).map(|(b, c)| b - c).collect();
    let mean = diffs.iter().sum::<f64>() / m as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    if !(var > 0.0) {
        // constant nonzero difference: t is infinite
        return match mean.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => Ok(0.0),
            Some(std::cmp::Ordering::Less) => Ok(1.0),
            _ => Err(Error::DegenerateDifferences),
        };
    }
    let t = mean / (var.sqrt() / (m as f64).sqrt());
    Ok(student_t_upper(t, (m - 1) as f64))
}

/// Cross-validation protocol settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CvConfig {
    pub n_folds: usize,
    pub n_repeats: usize,
    pub seed: u64,
    /// Standardize features inside each training split.
    pub standardize: bool,
    pub k_max: Option<usize>,
    pub rule: SelectionRule,
    pub prediction: PredictionConfig,
    pub compress: CompressOptions,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            n_folds: 3,
            n_repeats: 3,
            seed: 0,
            standardize: true,
            k_max: None,
            rule: SelectionRule::default(),
            prediction: PredictionConfig::default(),
            compress: CompressOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub full: f64,
    pub medoid: f64,
    pub centroid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    pub auc: MethodScores,
    pub selected_k: usize,
    pub n_terms: usize,
    pub medoid_terms: usize,
    pub centroid_terms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetReport {
    pub name: String,
    pub folds: Vec<FoldResult>,
    /// Means over all repeats and folds.
    pub means: MethodScores,
}

/// One-tailed p-values of full versus each compressed method, paired over
/// datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTests {
    pub medoid: Option<f64>,
    pub centroid: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub datasets: Vec<DatasetReport>,
    /// Absent for single-dataset reports.
    pub t_tests: Option<TTests>,
}

/// Models and held-out scores from one train/test split.
#[derive(Debug, Clone)]
pub struct SplitOutcome {
    pub ensemble: Ensemble,
    pub medoid: CompressedEnsemble,
    pub centroid: CompressedEnsemble,
    pub selected_k: usize,
    pub full_predictions: Vec<f64>,
    pub medoid_predictions: Vec<f64>,
    pub centroid_predictions: Vec<f64>,
    pub auc: MethodScores,
}

/// Fits, compresses and scores on one split. Every model is a function of
/// `train` alone; `test` only feeds predictions and AUCs.
pub fn evaluate_split(train: &Dataset, test: &Dataset, bag: &BagConfig, cv: &CvConfig) -> Result<SplitOutcome> {
    if train.outcome_kind() != OutcomeKind::Binary {
        return Err(Error::InvalidArgument("AUC evaluation needs a binary outcome".into()));
    }
    let (train, test_x, standardizer) = if cv.standardize {
        let s = Standardizer::fit(train);
        (s.apply(train)?, s.apply_matrix(test.features())?, Some(s))
    } else {
        (train.clone(), test.features().clone(), None)
    };
    let mut ensemble = fit_ensemble(&train, bag)?;
    ensemble.set_standardizer(standardizer);
    let plan = plan(
        &ensemble,
        &PlanOptions {
            k_max: cv.k_max,
            forced_k: None,
            rule: cv.rule,
        },
    )?;
    let medoid = plan.compress(&ensemble, Strategy::Medoid, None, &cv.compress)?;
    let centroid = plan.compress(&ensemble, Strategy::Centroid, Some(&train), &cv.compress)?;

    let weighting = cv.prediction.compressed_weighting;
    let full_predictions = predict_ensemble(&ensemble, &test_x)?;
    let medoid_predictions = predict_compressed(&medoid, &test_x, weighting)?;
    let centroid_predictions = predict_compressed(&centroid, &test_x, weighting)?;
    let y = test.outcome();
    let auc = MethodScores {
        full: auc(&full_predictions, y)?,
        medoid: auc(&medoid_predictions, y)?,
        centroid: auc(&centroid_predictions, y)?,
    };
    Ok(SplitOutcome {
        ensemble,
        medoid,
        centroid,
        selected_k: plan.k,
        full_predictions,
        medoid_predictions,
        centroid_predictions,
        auc,
    })
}

/// Seed of the bagging run for one (repeat, fold) unit.
pub fn unit_seed(seed: u64, repeat: usize, fold: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((repeat as u64) << 32) | fold as u64);
    rng.set_word_pos(1 << 20);
    rng.next_u64()
}

fn mean_scores(folds: &[FoldResult]) -> MethodScores {
    let m = folds.len() as f64;
    MethodScores {
        full: folds.iter().map(|f| f.auc.full).sum::<f64>() / m,
        medoid: folds.iter().map(|f| f.auc.medoid).sum::<f64>() / m,
        centroid: folds.iter().map(|f| f.auc.centroid).sum::<f64>() / m,
    }
}

/// Repeated stratified k-fold evaluation of one dataset. Units run in
/// parallel; each draws its bagging seed from `(cv.seed, repeat, fold)`.
pub fn cross_validate(name: &str, dataset: &Dataset, bag: &BagConfig, cv: &CvConfig) -> Result<DatasetReport> {
    let folds = make_folds(dataset, cv.n_folds, cv.n_repeats, cv.seed)?;
    let units: Vec<(usize, usize)> = (0..cv.n_repeats)
        .flat_map(|r| (0..cv.n_folds).map(move |f| (r, f)))
        .collect();
    let results = units
        .par_iter()
        .map(|&(repeat, fold)| {
            let train = dataset.subset(&folds.training(repeat, fold));
            let test = dataset.subset(folds.held_out(repeat, fold));
            let bag = BagConfig {
                seed: unit_seed(cv.seed, repeat, fold),
                ..bag.clone()
            };
            let out = evaluate_split(&train, &test, &bag, cv)?;
            Ok(FoldResult {
                repeat,
                fold,
                auc: out.auc,
                selected_k: out.selected_k,
                n_terms: out.ensemble.term_union().len(),
                medoid_terms: out.medoid.total_terms(),
                centroid_terms: out.centroid.total_terms(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let means = mean_scores(&results);
    Ok(DatasetReport {
        name: name.to_owned(),
        folds: results,
        means,
    })
}

/// Cross-validates every dataset and, given at least two, runs the paired
/// t-tests of full versus compressed on the dataset means.
pub fn evaluate_datasets(datasets: &[(String, Dataset)], bag: &BagConfig, cv: &CvConfig) -> Result<EvalReport> {
    let reports = datasets
        .iter()
        .map(|(name, ds)| cross_validate(name, ds, bag, cv))
        .collect::<Result<Vec<_>>>()?;
    let t_tests = if reports.len() >= 2 {
        let full: Vec<f64> = reports.iter().map(|r| r.means.full).collect();
        let test = |method: fn(&MethodScores) -> f64, label: &str| {
            let other: Vec<f64> = reports.iter().map(|r| method(&r.means)).collect();
            match paired_t_test(&full, &other) {
                Ok(p) => Some(p),
                Err(e) => {
                    warn!("t-test full vs {label} skipped: {e}");
                    None
                }
            }
        };
        Some(TTests {
            medoid: test(|m| m.medoid, "medoid"),
            centroid: test(|m| m.centroid, "centroid"),
        })
    } else {
        warn!("single dataset: t-test column omitted");
        None
    };
    Ok(EvalReport {
        datasets: reports,
        t_tests,
    })
}

impl EvalReport {
    /// Methods as rows, datasets as columns, plus a trailing p-value column
    /// when t-tests were run.
    pub fn to_table(&self) -> String {
        let methods: [(&str, fn(&MethodScores) -> f64, Option<Option<f64>>); 3] = [
            ("full", |m| m.full, None),
            ("medoid-compressed", |m| m.medoid, self.t_tests.as_ref().map(|t| t.medoid)),
            ("centroid-compressed", |m| m.centroid, self.t_tests.as_ref().map(|t| t.centroid)),
        ];
        let mut header = vec![String::new()];
        header.extend(self.datasets.iter().map(|d| d.name.clone()));
        if self.t_tests.is_some() {
            header.push("P-value".into());
        }
        let mut rows = vec![header];
        for (label, get, p) in methods {
            let mut row = vec![label.to_string()];
            row.extend(self.datasets.iter().map(|d| format!("{:.3}", get(&d.means))));
            if self.t_tests.is_some() {
                row.push(match p.flatten() {
                    Some(p) => format_p(p),
                    None => "-".into(),
                });
            }
            rows.push(row);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in rows {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    if c == 0 {
                        format!("{cell:<w$}", w = widths[c])
                    } else {
                        format!("{cell:>w$}", w = widths[c])
                    }
                })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

fn format_p(p: f64) -> String {
    if p >= 0.001 {
        format!("{p:.3}")
    } else {
        format!("{p:.1e}")
    }
}
