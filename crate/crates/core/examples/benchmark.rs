//! Cross-validates full versus compressed ensembles on the planted-signal
//! benchmark and prints the per-fold results.

use mdl_ensemble::compress::CentroidTerms;
use mdl_ensemble::ensemble::BagConfig;
use mdl_ensemble::evaluate::{cross_validate, CvConfig};
use mdl_ensemble::synthetic::{planted, PlantedSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map_or(Ok(2016), |s| s.parse())?;
    let (data, informative) = planted(&PlantedSpec {
        seed,
        ..Default::default()
    })?;
    println!("informative features: {informative:?}");
    let mut cv = CvConfig {
        seed,
        ..Default::default()
    };
    if std::env::args().any(|a| a == "--majority") {
        cv.compress.centroid_terms = CentroidTerms::Majority;
    }
    let report = cross_validate("planted", &data, &BagConfig::default(), &cv)?;
    for f in &report.folds {
        println!(
            "repeat {} fold {}: k={} terms={} auc full={:.3} medoid={:.3} centroid={:.3}",
            f.repeat, f.fold, f.selected_k, f.n_terms, f.auc.full, f.auc.medoid, f.auc.centroid
        );
    }
    println!("means: {:?}", report.means);
    Ok(())
}
