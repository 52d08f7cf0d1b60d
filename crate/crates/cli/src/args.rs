use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mdl_ensemble::compress::{CentroidTerms, SelectionRule};
use mdl_ensemble::evaluate::Weighting;
use mdl_ensemble::glm::Criterion;

/// Bagged GLM ensembles and their compression to a few representative models.
#[derive(Debug, Parser)]
#[command(name = "mdl-ensemble", version)]
pub struct Cli {
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a bagged ensemble and write ensemble.json, B.csv and S.csv.
    Fit(FitArgs),
    /// Cluster a fitted ensemble and write costs.csv plus compressed models.
    Compress(CompressArgs),
    /// Cross-validate full against compressed ensembles on one or more datasets.
    Evaluate(EvaluateArgs),
    /// fit, compress and evaluate on one dataset.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionArg {
    Aic,
    Bic,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Criterion {
        match c {
            CriterionArg::Aic => Criterion::Aic,
            CriterionArg::Bic => Criterion::Bic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyArg {
    Medoid,
    Centroid,
    Both,
}

impl StrategyArg {
    pub fn medoid(self) -> bool {
        matches!(self, StrategyArg::Medoid | StrategyArg::Both)
    }

    pub fn centroid(self) -> bool {
        matches!(self, StrategyArg::Centroid | StrategyArg::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KRuleArg {
    WellPosed,
    Literal,
}

impl From<KRuleArg> for SelectionRule {
    fn from(r: KRuleArg) -> SelectionRule {
        match r {
            KRuleArg::WellPosed => SelectionRule::WellPosed,
            KRuleArg::Literal => SelectionRule::Literal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CentroidTermsArg {
    Union,
    Majority,
}

impl From<CentroidTermsArg> for CentroidTerms {
    fn from(c: CentroidTermsArg) -> CentroidTerms {
        match c {
            CentroidTermsArg::Union => CentroidTerms::Union,
            CentroidTermsArg::Majority => CentroidTerms::Majority,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightingArg {
    Size,
    Uniform,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Weighting {
        match w {
            WeightingArg::Size => Weighting::ClusterSize,
            WeightingArg::Uniform => Weighting::Uniform,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InputArgs {
    /// Name of the outcome column.
    #[arg(long)]
    pub outcome: String,
    /// Replace missing feature values by the column mean instead of failing.
    #[arg(long)]
    pub impute_mean: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BagArgs {
    #[arg(long, default_value_t = 100)]
    pub bags: usize,
    #[arg(long, value_enum, default_value_t = CriterionArg::Bic)]
    pub criterion: CriterionArg,
    /// Features sampled per bag [default: ceil(sqrt(p))].
    #[arg(long)]
    pub features_per_bag: Option<usize>,
    /// Candidates kept after correlation screening [default: min(30, features per bag)].
    #[arg(long)]
    pub candidate_cap: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub max_terms: usize,
    /// Fit on raw rather than standardized features.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CompressionArgs {
    /// Largest number of clusters scored [default: ensemble size].
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Which cuts may be selected: only those where every term model has
    /// positive residual variance, or all of them.
    #[arg(long, value_enum, default_value_t = KRuleArg::WellPosed)]
    pub k_rule: KRuleArg,
    #[arg(long, value_enum, default_value_t = CentroidTermsArg::Union)]
    pub centroid_terms: CentroidTermsArg,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CvArgs {
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Weighting of compressed representatives at prediction time.
    #[arg(long, value_enum, default_value_t = WeightingArg::Size)]
    pub weighting: WeightingArg,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FitArgs {
    /// Training data (CSV with a header row).
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub bag: BagArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CompressArgs {
    /// ensemble.json written by `fit`.
    #[arg(long)]
    pub ensemble: PathBuf,
    /// Training data; required for centroid refits.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, requires = "data")]
    pub outcome: Option<String>,
    #[arg(long)]
    pub impute_mean: bool,
    #[arg(long, value_enum, default_value_t = StrategyArg::Both)]
    pub strategy: StrategyArg,
    /// Number of clusters, overriding the cost minimizer.
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub compression: CompressionArgs,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EvaluateArgs {
    /// One or more datasets; repeat the flag or list several paths.
    #[arg(long, required = true, num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub bag: BagArgs,
    #[command(flatten)]
    pub compression: CompressionArgs,
    #[command(flatten)]
    pub cv: CvArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PipelineArgs {
    /// Training data (CSV with a header row).
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub bag: BagArgs,
    #[arg(long, value_enum, default_value_t = StrategyArg::Both)]
    pub strategy: StrategyArg,
    /// Number of clusters, overriding the cost minimizer.
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub compression: CompressionArgs,
    #[command(flatten)]
    pub cv: CvArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
}
