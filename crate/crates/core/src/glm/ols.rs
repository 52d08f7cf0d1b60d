use nalgebra::{DMatrix, DVector};

use super::{qr_solve, with_intercept, Family, GlmFit, TermFit};
use crate::dist::{floor_p, student_t_two_sided};
use crate::error::{Error, Result};

/// Ordinary least squares with an intercept. `x` holds the term columns
/// only; terms of the result are indexed by column position.
///
/// Standard errors use `RSS / (n - p - 1)`, p-values the two-sided Student-t
/// with `n - p - 1` degrees of freedom, and the log-likelihood the Gaussian
/// MLE variance `RSS / n`.
pub fn fit_gaussian(x: &DMatrix<f64>, y: &[f64]) -> Result<GlmFit> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: y.len(),
        });
    }
    if n <= p + 1 {
        return Err(Error::TooFewObservations {
            n_obs: n,
            n_params: p + 1,
        });
    }
    let design = with_intercept(x);
    let yv = DVector::from_column_slice(y);
    let (beta, cov) = qr_solve(design.clone(), &yv)?;
    let resid = &yv - &design * &beta;
    let rss = resid.norm_squared();
    let df = (n - p - 1) as f64;
    let sigma2 = rss / df;

    let terms = (0..p)
        .map(|j| {
            let b = beta[j + 1];
            let se = (sigma2 * cov[(j + 1, j + 1)]).sqrt();
            let p_value = if se > 0.0 {
                student_t_two_sided(b / se, df)
            } else if b == 0.0 {
                1.0
            } else {
                0.0
            };
            TermFit {
                index: j,
                name: format!("x{j}"),
                beta: b,
                se,
                p: floor_p(p_value),
            }
        })
        .collect();

    let log_likelihood = gaussian_log_likelihood(rss, n);
    if !log_likelihood.is_finite() {
        return Err(Error::NonFiniteLikelihood);
    }
    Ok(GlmFit {
        family: Family::Gaussian,
        intercept: beta[0],
        terms,
        log_likelihood,
        n_obs: n,
        converged: true,
    })
}

/// `-n/2 * (ln(2 pi sigma2) + 1)` with `sigma2 = RSS / n`, floored at the
/// smallest normal double so exact fits stay finite.
pub(crate) fn gaussian_log_likelihood(rss: f64, n: usize) -> f64 {
    let nf = n as f64;
    let sigma2 = (rss / nf).max(f64::MIN_POSITIVE);
    -0.5 * nf * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::P_VALUE_FLOOR;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn exact_fit_floors_p_value() {
        let fit = fit_gaussian(&col(&[1.0, 2.0, 3.0, 4.0]), &[2.0, 4.0, 6.0, 8.0]).unwrap();
        assert!((fit.terms[0].beta - 2.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert_eq!(fit.terms[0].p, P_VALUE_FLOOR);
        assert!(fit.log_likelihood.is_finite());
    }

    #[test]
    fn simple_regression_matches_hand_formulas() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [1.1, 1.9, 3.2, 3.8];
        let fit = fit_gaussian(&col(&x), &y).unwrap();

        // closed-form simple regression
        let n = 4.0;
        let xm = x.iter().sum::<f64>() / n;
        let ym = y.iter().sum::<f64>() / n;
        let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - xm) * (b - ym)).sum();
        let slope = sxy / sxx;
        let intercept = ym - slope * xm;
        let rss: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        let se = (rss / 2.0 / sxx).sqrt();
        let t = slope / se;
        // Student-t with 2 df has a closed-form two-sided tail.
        let p = 1.0 - t / (2.0 + t * t).sqrt();
        let ll = -n / 2.0 * ((2.0 * std::f64::consts::PI * rss / n).ln() + 1.0);

        let term = &fit.terms[0];
        assert!((term.beta - slope).abs() < 1e-10);
        assert!((fit.intercept - intercept).abs() < 1e-10);
        assert!((term.se - se).abs() < 1e-10);
        assert!((term.p - p).abs() < 1e-10);
        assert!((fit.log_likelihood - ll).abs() < 1e-10);
        assert!((slope - 0.94).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_is_the_mean() {
        let y = [3.0, 5.0, 10.0];
        let fit = fit_gaussian(&DMatrix::zeros(3, 0), &y).unwrap();
        assert!((fit.intercept - 6.0).abs() < 1e-12);
        assert!(fit.terms.is_empty());
    }

    #[test]
    fn rejects_rank_deficient_and_small_designs() {
        let x = DMatrix::from_column_slice(5, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        let y = [1.0, 0.0, 2.0, 1.0, 3.0];
        assert!(matches!(fit_gaussian(&x, &y), Err(Error::RankDeficient)));
        assert!(matches!(
            fit_gaussian(&col(&[1.0, 2.0]), &[1.0, 2.0]),
            Err(Error::TooFewObservations { .. })
        ));
    }
}
