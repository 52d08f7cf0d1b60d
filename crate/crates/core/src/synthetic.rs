//! Seeded synthetic datasets with a known set of informative features.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, OutcomeKind};
use crate::error::Result;
use crate::glm::logistic;

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub n_obs: usize,
    pub n_features: usize,
    pub n_informative: usize,
    /// Coefficient of every informative (standard normal) feature.
    pub effect: f64,
    pub outcome_kind: OutcomeKind,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            n_obs: 200,
            n_features: 50,
            n_informative: 3,
            effect: 2.5,
            outcome_kind: OutcomeKind::Binary,
            seed: 0,
        }
    }
}

/// Standard normal features `f0, f1, ...`; the outcome depends on
/// `n_informative` randomly placed columns through a logistic (binary) or
/// identity-plus-unit-noise (continuous) link. Returns the dataset and the
/// sorted informative column indices.
pub fn planted(spec: &PlantedSpec) -> Result<(Dataset, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut informative = sample(&mut rng, spec.n_features, spec.n_informative).into_vec();
    informative.sort_unstable();
    let x = DMatrix::from_fn(spec.n_obs, spec.n_features, |_, _| rng.sample::<f64, _>(StandardNormal));
    let outcome: Vec<f64> = (0..spec.n_obs)
        .map(|i| {
            let eta: f64 = informative.iter().map(|&j| spec.effect * x[(i, j)]).sum();
            match spec.outcome_kind {
                OutcomeKind::Binary => f64::from(rng.gen::<f64>() < logistic(eta)),
                OutcomeKind::Continuous => eta + rng.sample::<f64, _>(StandardNormal),
            }
        })
        .collect();
    let names = (0..spec.n_features).map(|j| format!("f{j}")).collect();
    Ok((Dataset::new(x, outcome, names, spec.outcome_kind)?, informative))
}
