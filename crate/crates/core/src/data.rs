//! Tabular datasets, CSV ingestion, standardization and stratified
//! cross-validation folds.

use std::collections::HashSet;
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeKind {
    Binary,
    Continuous,
}

/// A complete numeric feature matrix with named columns and one outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    outcome: Vec<f64>,
    feature_names: Vec<String>,
    outcome_kind: OutcomeKind,
    label_mapping: Option<[String; 2]>,
}

impl Dataset {
    /// Builds a validated dataset. Binary outcomes must be coded 0/1 and
    /// contain both classes.
    pub fn new(
        features: DMatrix<f64>,
        outcome: Vec<f64>,
        feature_names: Vec<String>,
        outcome_kind: OutcomeKind,
    ) -> Result<Self> {
        if outcome.len() != features.nrows() {
            return Err(Error::LengthMismatch {
                expected: features.nrows(),
                found: outcome.len(),
            });
        }
        if feature_names.len() != features.ncols() {
            return Err(Error::LengthMismatch {
                expected: features.ncols(),
                found: feature_names.len(),
            });
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateName(name.clone()));
            }
        }
        if features.iter().chain(outcome.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "dataset contains non-finite values".into(),
            ));
        }
        if outcome_kind == OutcomeKind::Binary {
            if let Some(bad) = outcome.iter().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "binary outcome must be coded 0/1, found {bad}"
                )));
            }
            let positives = outcome.iter().filter(|&&v| v == 1.0).count();
            if positives == 0 || positives == outcome.len() {
                return Err(Error::SingleClass);
            }
        }
        Ok(Dataset {
            features,
            outcome,
            feature_names,
            outcome_kind,
            label_mapping: None,
        })
    }

    pub fn with_label_mapping(mut self, mapping: [String; 2]) -> Self {
        self.label_mapping = Some(mapping);
        self
    }

    pub fn n_obs(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn outcome_kind(&self) -> OutcomeKind {
        self.outcome_kind
    }

    /// Original string labels for outcome codes 0 and 1, when the outcome
    /// column was textual.
    pub fn label_mapping(&self) -> Option<&[String; 2]> {
        self.label_mapping.as_ref()
    }

    /// Rows `rows` in the given order. No class-balance validation is done,
    /// so a subset may hold a single class.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let features = self.features.select_rows(rows.iter());
        let outcome = rows.iter().map(|&r| self.outcome[r]).collect();
        Dataset {
            features,
            outcome,
            feature_names: self.feature_names.clone(),
            outcome_kind: self.outcome_kind,
            label_mapping: self.label_mapping.clone(),
        }
    }

    /// Same observations with a replaced outcome vector.
    pub fn with_outcome(&self, outcome: Vec<f64>) -> Result<Dataset> {
        let ds = Dataset::new(
            self.features.clone(),
            outcome,
            self.feature_names.clone(),
            self.outcome_kind,
        )?;
        Ok(Dataset {
            label_mapping: self.label_mapping.clone(),
            ..ds
        })
    }

    pub(crate) fn with_features(&self, features: DMatrix<f64>) -> Dataset {
        Dataset {
            features,
            ..self.clone()
        }
    }

    /// Indices of observations per class, in ascending order (`[zeros, ones]`).
    pub fn class_indices(&self) -> [Vec<usize>; 2] {
        let mut out = [Vec::new(), Vec::new()];
        for (i, &y) in self.outcome.iter().enumerate() {
            out[usize::from(y == 1.0)].push(i);
        }
        out
    }
}

/// Options for [`load_csv`].
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Replace blank feature cells by the column mean instead of failing.
    pub impute_mean: bool,
    /// Force the outcome interpretation. `None` infers it: a numeric column
    /// holding only 0 and 1, or a textual column with two labels, is binary;
    /// any other numeric column is continuous.
    pub outcome_kind: Option<OutcomeKind>,
}

/// Reads a header-first, comma-separated file into a [`Dataset`].
pub fn load_csv(path: impl AsRef<Path>, outcome_column: &str, options: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_csv(&bytes, outcome_column, options)
}

/// [`load_csv`] on in-memory bytes.
pub fn parse_csv(bytes: &[u8], outcome_column: &str, options: &CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let outcome_idx = headers
        .iter()
        .position(|h| h == outcome_column)
        .ok_or_else(|| Error::UnknownColumn(outcome_column.to_owned()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != outcome_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let p = feature_names.len();

    let mut cells: Vec<Option<f64>> = Vec::new();
    let mut raw_outcome: Vec<String> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        for (c, field) in record.iter().enumerate() {
            if c == outcome_idx {
                if field.is_empty() {
                    return Err(Error::MissingValue {
                        row,
                        col: headers[c].clone(),
                    });
                }
                raw_outcome.push(field.to_owned());
            } else if field.is_empty() {
                if !options.impute_mean {
                    return Err(Error::MissingValue {
                        row,
                        col: headers[c].clone(),
                    });
                }
                cells.push(None);
            } else {
                let v: f64 = field.parse().map_err(|_| Error::NonNumeric {
                    row,
                    col: headers[c].clone(),
                    value: field.to_owned(),
                })?;
                if !v.is_finite() {
                    return Err(Error::NonNumeric {
                        row,
                        col: headers[c].clone(),
                        value: field.to_owned(),
                    });
                }
                cells.push(Some(v));
            }
        }
    }
    let n = raw_outcome.len();
    if n == 0 {
        return Err(Error::InvalidArgument("csv has no data rows".into()));
    }

    let features = if options.impute_mean {
        let mut means = vec![0.0; p];
        for (j, mean) in means.iter_mut().enumerate() {
            let present: Vec<f64> = (0..n).filter_map(|i| cells[i * p + j]).collect();
            if present.is_empty() {
                return Err(Error::MissingValue {
                    row: 1,
                    col: feature_names[j].clone(),
                });
            }
            *mean = present.iter().sum::<f64>() / present.len() as f64;
        }
        DMatrix::from_fn(n, p, |i, j| cells[i * p + j].unwrap_or(means[j]))
    } else {
        DMatrix::from_fn(n, p, |i, j| cells[i * p + j].expect("validated above"))
    };

    let (outcome, kind, mapping) = decode_outcome(&raw_outcome, outcome_column, options.outcome_kind)?;
    let ds = Dataset::new(features, outcome, feature_names, kind)?;
    Ok(match mapping {
        Some(m) => ds.with_label_mapping(m),
        None => ds,
    })
}

fn decode_outcome(
    raw: &[String],
    column: &str,
    forced: Option<OutcomeKind>,
) -> Result<(Vec<f64>, OutcomeKind, Option<[String; 2]>)> {
    let numeric: Option<Vec<f64>> = raw.iter().map(|s| s.parse::<f64>().ok()).collect();
    let is_binary_coded = |v: &[f64]| v.iter().all(|&x| x == 0.0 || x == 1.0);

    match (numeric, forced) {
        (Some(values), Some(OutcomeKind::Continuous)) => Ok((values, OutcomeKind::Continuous, None)),
        (Some(values), None) if !is_binary_coded(&values) => Ok((values, OutcomeKind::Continuous, None)),
        (Some(values), _) if is_binary_coded(&values) => Ok((values, OutcomeKind::Binary, None)),
        (None, Some(OutcomeKind::Continuous)) => {
            let (row, value) = raw
                .iter()
                .enumerate()
                .find(|(_, s)| s.parse::<f64>().is_err())
                .expect("some cell failed to parse");
            Err(Error::NonNumeric {
                row: row + 1,
                col: column.to_owned(),
                value: value.clone(),
            })
        }
        _ => {
            // First label seen maps to 0, second to 1.
            let mut labels: Vec<&str> = Vec::with_capacity(2);
            let mut coded = Vec::with_capacity(raw.len());
            for s in raw {
                let code = match labels.iter().position(|l| l == s) {
                    Some(c) => c,
                    None if labels.len() < 2 => {
                        labels.push(s);
                        labels.len() - 1
                    }
                    None => return Err(Error::TooManyLabels(s.clone())),
                };
                coded.push(code as f64);
            }
            if labels.len() < 2 {
                return Err(Error::SingleClass);
            }
            let mapping = [labels[0].to_owned(), labels[1].to_owned()];
            Ok((coded, OutcomeKind::Binary, Some(mapping)))
        }
    }
}

/// Per-feature centering and scaling learned on one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Columns with zero sample variance; their scale is fixed at 1.
    pub constant: Vec<bool>,
}

impl Standardizer {
    pub fn fit(dataset: &Dataset) -> Standardizer {
        let x = dataset.features();
        let n = x.nrows();
        let mut means = Vec::with_capacity(x.ncols());
        let mut scales = Vec::with_capacity(x.ncols());
        let mut constant = Vec::with_capacity(x.ncols());
        for (j, col) in x.column_iter().enumerate() {
            let mean = col.iter().sum::<f64>() / n as f64;
            let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
            let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
            let is_constant = !(sd > 0.0) || col.iter().all(|&v| v == col[0]);
            if is_constant {
                warn!("feature `{}` is constant; standardized to 0", dataset.feature_names()[j]);
            }
            means.push(mean);
            scales.push(if is_constant { 1.0 } else { sd });
            constant.push(is_constant);
        }
        Standardizer {
            means,
            scales,
            constant,
        }
    }

    pub fn apply_matrix(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.means.len() {
            return Err(Error::LengthMismatch {
                expected: self.means.len(),
                found: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            if self.constant[j] {
                0.0
            } else {
                (x[(i, j)] - self.means[j]) / self.scales[j]
            }
        }))
    }

    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        Ok(dataset.with_features(self.apply_matrix(dataset.features())?))
    }
}

/// Centers every feature to mean 0 and scales to unit sample standard
/// deviation (n - 1 denominator). Constant columns become all-zero.
pub fn standardize(dataset: &Dataset) -> (Dataset, Standardizer) {
    let standardizer = Standardizer::fit(dataset);
    let out = standardizer
        .apply(dataset)
        .expect("standardizer was fit on this dataset");
    (out, standardizer)
}

/// Repeated k-fold partition. `assignments[repeat][fold]` lists the held-out
/// observation indices in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FoldPlan {
    pub n_folds: usize,
    pub n_repeats: usize,
    pub seed: u64,
    pub assignments: Vec<Vec<Vec<usize>>>,
}

impl FoldPlan {
    pub fn held_out(&self, repeat: usize, fold: usize) -> &[usize] {
        &self.assignments[repeat][fold]
    }

    /// Complement of the held-out fold, ascending.
    pub fn training(&self, repeat: usize, fold: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.assignments[repeat]
            .iter()
            .enumerate()
            .filter(|&(f, _)| f != fold)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Stratified repeated k-fold assignment. Each class is shuffled and dealt
/// round-robin over the folds, continuing from where the previous class
/// stopped so fold sizes stay within one of each other.
pub fn make_folds(dataset: &Dataset, n_folds: usize, n_repeats: usize, seed: u64) -> Result<FoldPlan> {
    if n_folds < 2 {
        return Err(Error::InvalidArgument(format!("n_folds must be >= 2, got {n_folds}")));
    }
    if n_repeats < 1 {
        return Err(Error::InvalidArgument("n_repeats must be >= 1".into()));
    }
    let strata: Vec<Vec<usize>> = match dataset.outcome_kind() {
        OutcomeKind::Binary => {
            let classes = dataset.class_indices();
            for class in &classes {
                if class.len() < n_folds {
                    return Err(Error::ClassTooSmall {
                        count: class.len(),
                        folds: n_folds,
                    });
                }
            }
            classes.into()
        }
        OutcomeKind::Continuous => {
            if dataset.n_obs() < n_folds {
                return Err(Error::ClassTooSmall {
                    count: dataset.n_obs(),
                    folds: n_folds,
                });
            }
            vec![(0..dataset.n_obs()).collect()]
        }
    };

    let assignments = (0..n_repeats)
        .map(|repeat| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(repeat as u64);
            let mut folds = vec![Vec::new(); n_folds];
            let mut next = 0;
            for stratum in &strata {
                let mut order = stratum.clone();
                order.shuffle(&mut rng);
                for idx in order {
                    folds[next].push(idx);
                    next = (next + 1) % n_folds;
                }
            }
            for fold in &mut folds {
                fold.sort_unstable();
            }
            folds
        })
        .collect();

    Ok(FoldPlan {
        n_folds,
        n_repeats,
        seed,
        assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(s: &str, opts: &CsvOptions) -> Result<Dataset> {
        parse_csv(s.as_bytes(), "y", opts)
    }

    #[test]
    fn loads_minimal_binary_csv() {
        let ds = csv("x,y\n1,0\n2,1\n3,0\n4,1\n", &CsvOptions::default()).unwrap();
        assert_eq!(ds.n_obs(), 4);
        assert_eq!(ds.n_features(), 1);
        assert_eq!(ds.outcome_kind(), OutcomeKind::Binary);
        assert_eq!(ds.outcome(), &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(ds.feature_names(), &["x".to_string()]);
    }

    #[test]
    fn blank_cell_is_rejected_by_default() {
        let err = csv("a,b,y\n1,2,0\n3,,1\n", &CsvOptions::default()).unwrap_err();
        assert_eq!(err.to_string(), "missing value at row 2, col b");
    }

    #[test]
    fn blank_cell_can_be_imputed() {
        let opts = CsvOptions {
            impute_mean: true,
            ..Default::default()
        };
        let ds = csv("a,b,y\n1,2,0\n3,,1\n5,4,1\n", &opts).unwrap();
        assert_eq!(ds.features()[(1, 1)], 3.0);
    }

    #[test]
    fn string_labels_map_by_first_appearance() {
        let ds = csv("x,y\n1,case\n2,control\n3,control\n4,case\n", &CsvOptions::default()).unwrap();
        let expected = vec![0.0, 1.0, 1.0, 0.0];
        assert_eq!(ds.outcome(), expected.as_slice());
        let mapping = ds.label_mapping().unwrap();
        assert_eq!(mapping, &["case".to_string(), "control".to_string()]);
        // remapping codes back to labels recovers the column
        let back: Vec<&str> = ds.outcome().iter().map(|&c| mapping[c as usize].as_str()).collect();
        assert_eq!(back, ["case", "control", "control", "case"]);
    }

    #[test]
    fn error_paths() {
        let o = CsvOptions::default();
        assert!(matches!(csv("x,z\n1,0\n", &o), Err(Error::UnknownColumn(_))));
        assert!(matches!(csv("x,y\nfoo,0\n2,1\n", &o), Err(Error::NonNumeric { .. })));
        assert!(matches!(csv("x,y\n1,1\n2,1\n", &o), Err(Error::SingleClass)));
        assert!(matches!(csv("x,y\n1,a\n2,b\n3,c\n", &o), Err(Error::TooManyLabels(_))));
        assert!(matches!(
            load_csv("/nonexistent/file.csv", "y", &o),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn numeric_non_binary_outcome_is_continuous() {
        let ds = csv("x,y\n1,0.5\n2,1.5\n3,2\n", &CsvOptions::default()).unwrap();
        assert_eq!(ds.outcome_kind(), OutcomeKind::Continuous);
    }

    #[test]
    fn standardize_hand_example() {
        let ds = Dataset::new(
            DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 5.0, 5.0, 5.0]),
            vec![0.0, 1.0, 0.0],
            vec!["a".into(), "c".into()],
            OutcomeKind::Binary,
        )
        .unwrap();
        let (std, rec) = standardize(&ds);
        let col: Vec<f64> = std.features().column(0).iter().copied().collect();
        assert_eq!(col, vec![-1.0, 0.0, 1.0]);
        let constant: Vec<f64> = std.features().column(1).iter().copied().collect();
        assert_eq!(constant, vec![0.0, 0.0, 0.0]);
        assert_eq!(rec.constant, vec![false, true]);
        assert_eq!(rec.scales[1], 1.0);
        assert_eq!(rec.apply(&ds).unwrap(), std);
    }

    #[test]
    fn six_observation_folds_hold_one_of_each_class() {
        let ds = Dataset::new(
            DMatrix::from_fn(6, 1, |i, _| i as f64),
            vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
            vec!["x".into()],
            OutcomeKind::Binary,
        )
        .unwrap();
        let plan = make_folds(&ds, 3, 1, 42).unwrap();
        for fold in &plan.assignments[0] {
            let pos = fold.iter().filter(|&&i| ds.outcome()[i] == 1.0).count();
            assert_eq!((pos, fold.len() - pos), (1, 1));
        }
        assert_eq!(plan, make_folds(&ds, 3, 1, 42).unwrap());
        assert!(matches!(make_folds(&ds, 4, 1, 0), Err(Error::ClassTooSmall { .. })));
        assert!(make_folds(&ds, 1, 1, 0).is_err());
    }
}
