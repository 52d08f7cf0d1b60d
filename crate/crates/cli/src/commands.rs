use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use log::info;
use serde_json::Value;

use mdl_ensemble::compress::{plan, CompressOptions, PlanOptions, Strategy};
use mdl_ensemble::data::{load_csv, standardize, CsvOptions, Dataset};
use mdl_ensemble::ensemble::{build_coefficient_matrix, build_significance_matrix, fit_ensemble, BagConfig, Ensemble};
use mdl_ensemble::evaluate::{evaluate_datasets, CvConfig, PredictionConfig};
use mdl_ensemble::glm::SelectionConfig;

use crate::args::{BagArgs, CompressArgs, CompressionArgs, CvArgs, EvaluateArgs, FitArgs, PipelineArgs, StrategyArg};
use crate::output::{write, write_json, Provenance};

fn load(path: &Path, outcome: &str, impute_mean: bool) -> anyhow::Result<Dataset> {
    let options = CsvOptions {
        impute_mean,
        ..Default::default()
    };
    load_csv(path, outcome, &options).with_context(|| format!("loading {}", path.display()))
}

fn bag_config(args: &BagArgs, seed: u64) -> BagConfig {
    BagConfig {
        n_bags: args.bags,
        features_per_bag: args.features_per_bag,
        candidate_cap: args.candidate_cap,
        selection: SelectionConfig {
            criterion: args.criterion.into(),
            max_terms: args.max_terms,
            ..Default::default()
        },
        seed,
    }
}

fn compress_options(args: &CompressionArgs) -> CompressOptions {
    CompressOptions {
        centroid_terms: args.centroid_terms.into(),
        ..Default::default()
    }
}

fn fit_dataset(data: &Dataset, bag: &BagArgs, seed: u64) -> anyhow::Result<Ensemble> {
    let config = bag_config(bag, seed);
    let ensemble = if bag.no_standardize {
        fit_ensemble(data, &config)?
    } else {
        let (scaled, standardizer) = standardize(data);
        let mut e = fit_ensemble(&scaled, &config)?;
        e.set_standardizer(Some(standardizer));
        e
    };
    info!("fit {} models over {} terms", ensemble.len(), ensemble.term_union().len());
    Ok(ensemble)
}

fn write_fit(ensemble: &Ensemble, provenance: &Provenance, out: &Path) -> anyhow::Result<()> {
    write_json(out, "ensemble.json", &provenance.attach(ensemble.to_json_value()))?;
    let lines = provenance.lines();
    write(out, "B.csv", &build_coefficient_matrix(ensemble).to_csv(&lines))?;
    write(out, "S.csv", &build_significance_matrix(ensemble).to_csv(&lines))
}

fn create_dir(out: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

pub fn fit(args: &FitArgs) -> anyhow::Result<Ensemble> {
    create_dir(&args.out)?;
    let data = load(&args.data, &args.input.outcome, args.input.impute_mean)?;
    let ensemble = fit_dataset(&data, &args.bag, args.seed)?;
    write_fit(&ensemble, &Provenance::new("fit", args.seed, args)?, &args.out)?;
    Ok(ensemble)
}

/// `training` must already be on the ensemble's feature scale.
fn write_compressed(
    ensemble: &Ensemble,
    training: Option<&Dataset>,
    strategy: StrategyArg,
    k: Option<usize>,
    compression: &CompressionArgs,
    provenance: &Provenance,
    out: &Path,
) -> anyhow::Result<()> {
    if strategy.centroid() && training.is_none() {
        bail!("centroid compression needs the training data (--data and --outcome)");
    }
    let plan = plan(
        ensemble,
        &PlanOptions {
            k_max: compression.k_max,
            forced_k: k,
            rule: compression.k_rule.into(),
        },
    )?;
    let lines = provenance.lines();
    let costs = match &plan.profile {
        Some(p) => p.to_csv(&lines),
        None => {
            let mut text: String = lines.iter().map(|l| format!("# {l}\n")).collect();
            text.push_str("k,cost\n");
            text
        }
    };
    write(out, "costs.csv", &costs)?;
    info!("selected k = {}", plan.k);

    let options = compress_options(compression);
    let strategies = [
        (strategy.medoid(), Strategy::Medoid, "compressed_medoid.json"),
        (strategy.centroid(), Strategy::Centroid, "compressed_centroid.json"),
    ];
    for (wanted, s, name) in strategies {
        if wanted {
            let compressed = plan.compress(ensemble, s, training, &options)?;
            write_json(out, name, &provenance.attach(serde_json::to_value(&compressed)?))?;
        }
    }
    Ok(())
}

/// Applies the ensemble's stored standardizer, after checking the columns
/// line up with the ones it was fit on.
fn training_for(ensemble: &Ensemble, data: Dataset) -> anyhow::Result<Dataset> {
    if data.feature_names() != ensemble.feature_names() {
        bail!("training data columns do not match the ensemble's features");
    }
    Ok(match &ensemble.training().standardizer {
        Some(s) => s.apply(&data)?,
        None => data,
    })
}

pub fn compress(args: &CompressArgs) -> anyhow::Result<()> {
    create_dir(&args.out)?;
    let text = fs::read_to_string(&args.ensemble).with_context(|| format!("reading {}", args.ensemble.display()))?;
    let value: Value = serde_json::from_str(&text)?;
    let ensemble = Ensemble::from_json_value(value).context("parsing the ensemble")?;
    let training = match (&args.data, &args.outcome) {
        (Some(path), Some(outcome)) => Some(training_for(&ensemble, load(path, outcome, args.impute_mean)?)?),
        (Some(_), None) => bail!("--data needs --outcome"),
        (None, _) => None,
    };
    let provenance = Provenance::new("compress", ensemble.config().seed, args)?;
    write_compressed(
        &ensemble,
        training.as_ref(),
        args.strategy,
        args.k,
        &args.compression,
        &provenance,
        &args.out,
    )
}

fn cv_config(cv: &CvArgs, bag: &BagArgs, compression: &CompressionArgs, seed: u64) -> CvConfig {
    CvConfig {
        n_folds: cv.folds,
        n_repeats: cv.repeats,
        seed,
        standardize: !bag.no_standardize,
        k_max: compression.k_max,
        rule: compression.k_rule.into(),
        prediction: PredictionConfig {
            compressed_weighting: cv.weighting.into(),
        },
        compress: compress_options(compression),
    }
}

fn write_report(
    datasets: &[(String, Dataset)],
    bag: &BagArgs,
    cv: &CvConfig,
    provenance: &Provenance,
    out: &Path,
) -> anyhow::Result<()> {
    let report = evaluate_datasets(datasets, &bag_config(bag, cv.seed), cv)?;
    write_json(out, "report.json", &provenance.attach(serde_json::to_value(&report)?))?;
    let mut text: String = provenance.lines().iter().map(|l| format!("# {l}\n")).collect();
    text.push_str(&report.to_table());
    write(out, "report.txt", &text)
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn evaluate(args: &EvaluateArgs) -> anyhow::Result<()> {
    create_dir(&args.out)?;
    let datasets = args
        .data
        .iter()
        .map(|p| Ok((dataset_name(p), load(p, &args.input.outcome, args.input.impute_mean)?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let cv = cv_config(&args.cv, &args.bag, &args.compression, args.seed);
    write_report(
        &datasets,
        &args.bag,
        &cv,
        &Provenance::new("evaluate", args.seed, args)?,
        &args.out,
    )
}

pub fn pipeline(args: &PipelineArgs) -> anyhow::Result<()> {
    create_dir(&args.out)?;
    let provenance = Provenance::new("pipeline", args.seed, args)?;
    let data = load(&args.data, &args.input.outcome, args.input.impute_mean)?;
    let ensemble = fit_dataset(&data, &args.bag, args.seed)?;
    write_fit(&ensemble, &provenance, &args.out)?;
    let training = training_for(&ensemble, data.clone())?;
    write_compressed(
        &ensemble,
        Some(&training),
        args.strategy,
        args.k,
        &args.compression,
        &provenance,
        &args.out,
    )?;
    let cv = cv_config(&args.cv, &args.bag, &args.compression, args.seed);
    write_report(&[(dataset_name(&args.data), data)], &args.bag, &cv, &provenance, &args.out)
}
