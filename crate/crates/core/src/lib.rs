//! Bagged generalized-linear-model ensembles, compressed to a handful of
//! representative models.
//!
//! The pipeline is:
//!
//! 1. fit an ensemble of stepwise-selected GLMs on bootstrap resamples
//!    ([`ensemble::fit_ensemble`]);
//! 2. describe every member by the `-log10` p-values of its terms, the
//!    significance matrix ([`ensemble::build_significance_matrix`]);
//! 3. cluster its rows with Ward's criterion and choose the cut whose
//!    per-term group-means models have the lowest mean BIC
//!    ([`compress::plan`]);
//! 4. keep one medoid or refit centroid per cluster
//!    ([`compress::compress`]);
//! 5. compare full and compressed ensembles by cross-validated AUC
//!    ([`evaluate::cross_validate`]).
//!
//! ```
//! use mdl_ensemble::evaluate::auc;
//!
//! let a = auc(&[0.9, 0.4, 0.4, 0.1], &[1.0, 1.0, 0.0, 0.0]).unwrap();
//! assert_eq!(a, 0.875);
//! ```
//!
//! The guide in `book/` walks through each stage; its code blocks are
//! compiled and run as doc-tests of this crate.

pub mod compress;
pub mod data;
pub mod dist;
pub mod ensemble;
pub mod error;
pub mod evaluate;
pub mod glm;
pub mod synthetic;

pub use error::{Error, Result};

/// Version string embedded in every artifact the CLI writes.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/glm.md")]
    mod glm {}
    #[doc = include_str!("../../../book/src/ensemble.md")]
    mod ensemble {}
    #[doc = include_str!("../../../book/src/compression.md")]
    mod compression {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
