use nalgebra::{DMatrix, DVector};

use super::{logistic, qr_solve, with_intercept, Family, GlmFit, TermFit};
use crate::dist::{floor_p, normal_two_sided};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITER: usize = 25;
/// Any |coefficient| above this marks the fit as not converged.
pub const DIVERGENCE_BOUND: f64 = 1e4;

const DEVIANCE_TOL: f64 = 1e-8;
const MIN_WEIGHT: f64 = 1e-12;
const MAX_HALVINGS: usize = 30;
/// Relative log-likelihood loss still accepted as "no worse"; below this the
/// comparison is rounding noise.
const ROUNDING_SLACK: f64 = 1e-12;
/// Deviance this close to zero only happens under complete separation.
const SEPARATION_DEVIANCE: f64 = 1e-6;

/// Everything the IRLS loop produced, including the per-iteration deviance.
#[derive(Debug, Clone)]
pub struct IrlsTrace {
    /// Intercept first, then one coefficient per column.
    pub beta: DVector<f64>,
    /// Inverse Fisher information at `beta`.
    pub covariance: DMatrix<f64>,
    /// Deviance at the start point followed by one entry per iteration.
    pub deviances: Vec<f64>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub hit_iteration_cap: bool,
    pub diverged: bool,
    pub separated: bool,
}

fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

fn log_likelihood(eta: &DVector<f64>, y: &[f64]) -> f64 {
    eta.iter().zip(y).map(|(&e, &yi)| yi * e - softplus(e)).sum()
}

/// Logistic IRLS from `beta = 0` with step halving, so the deviance never
/// increases between iterations beyond rounding (relative 1e-12). Stops when the deviance changes by less
/// than 1e-8 or after `max_iter` iterations.
pub fn irls(x: &DMatrix<f64>, y: &[f64], max_iter: usize) -> Result<IrlsTrace> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: y.len(),
        });
    }
    let positives = y.iter().filter(|&&v| v == 1.0).count();
    if positives == 0 || positives == n {
        return Err(Error::SingleClass);
    }
    if n < x.ncols() + 1 {
        return Err(Error::TooFewObservations {
            n_obs: n,
            n_params: x.ncols() + 1,
        });
    }
    let design = with_intercept(x);
    let p = design.ncols();

    let mut beta = DVector::zeros(p);
    let mut eta = &design * &beta;
    let mut ll = log_likelihood(&eta, y);
    let mut deviances = vec![-2.0 * ll];
    let mut converged = false;
    let mut diverged = false;

    for _ in 0..max_iter {
        let mu = eta.map(logistic);
        let w = mu.map(|m| (m * (1.0 - m)).max(MIN_WEIGHT));
        let sw = w.map(f64::sqrt);
        let z = DVector::from_fn(n, |i, _| eta[i] + (y[i] - mu[i]) / w[i]);
        let mut wx = design.clone();
        for (i, mut row) in wx.row_iter_mut().enumerate() {
            row *= sw[i];
        }
        let wz = z.component_mul(&sw);
        let (mut proposal, _) = qr_solve(wx, &wz)?;

        let mut new_eta = &design * &proposal;
        let mut new_ll = log_likelihood(&new_eta, y);
        let no_worse = |candidate: f64| candidate.is_finite() && candidate >= ll - ROUNDING_SLACK * (1.0 + ll.abs());
        let mut halvings = 0;
        while !no_worse(new_ll) && halvings < MAX_HALVINGS {
            proposal = (&beta + &proposal) * 0.5;
            new_eta = &design * &proposal;
            new_ll = log_likelihood(&new_eta, y);
            halvings += 1;
        }
        if !no_worse(new_ll) {
            // no step along the Newton direction improves the fit
            deviances.push(-2.0 * ll);
            converged = true;
            break;
        }
        let change = -2.0 * (ll - new_ll);
        beta = proposal;
        eta = new_eta;
        ll = new_ll;
        deviances.push(-2.0 * ll);
        if beta.iter().any(|b| b.abs() > DIVERGENCE_BOUND) {
            diverged = true;
            break;
        }
        if change.abs() < DEVIANCE_TOL {
            converged = true;
            break;
        }
    }
    if !ll.is_finite() {
        return Err(Error::NonFiniteLikelihood);
    }
    let hit_iteration_cap = !converged && !diverged;
    let separated = -2.0 * ll < SEPARATION_DEVIANCE;

    let mu = eta.map(logistic);
    let sw = mu.map(|m| (m * (1.0 - m)).max(MIN_WEIGHT).sqrt());
    let mut wx = design.clone();
    for (i, mut row) in wx.row_iter_mut().enumerate() {
        row *= sw[i];
    }
    let (_, covariance) = qr_solve(wx, &DVector::zeros(n))?;

    Ok(IrlsTrace {
        beta,
        covariance,
        deviances,
        log_likelihood: ll,
        converged: converged && !separated,
        hit_iteration_cap,
        diverged,
        separated,
    })
}

/// Logistic regression with an intercept. `x` holds the term columns only;
/// terms of the result are indexed by column position. Standard errors are
/// Wald errors from the inverse Fisher information, p-values two-sided
/// normal.
///
/// The fit is reported with `converged = false`, never as an error, when the
/// iteration cap is hit, a coefficient exceeds [`DIVERGENCE_BOUND`] or the
/// classes are completely separated.
pub fn fit_binomial(x: &DMatrix<f64>, y: &[f64], max_iter: usize) -> Result<GlmFit> {
    let trace = irls(x, y, max_iter)?;
    let terms = (0..x.ncols())
        .map(|j| {
            let b = trace.beta[j + 1];
            let se = trace.covariance[(j + 1, j + 1)].sqrt();
            TermFit {
                index: j,
                name: format!("x{j}"),
                beta: b,
                se,
                p: floor_p(normal_two_sided(b / se)),
            }
        })
        .collect();
    Ok(GlmFit {
        family: Family::Binomial,
        intercept: trace.beta[0],
        terms,
        log_likelihood: trace.log_likelihood,
        n_obs: x.nrows(),
        converged: trace.converged,
    })
}
