//! Naive reference implementations and the randomized suites comparing the
//! library against them. Each suite returns the number of instances checked.

use mdl_ensemble::compress::{cost_at_k, medoid, term_model_bic, ward_cluster, Membership, VARIANCE_FLOOR};
use mdl_ensemble::ensemble::SignificanceMatrix;
use mdl_ensemble::evaluate::auc;
use mdl_ensemble::glm::{fit_binomial, fit_gaussian};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const INSTANCES: usize = 500;

pub type SuiteResult = Result<usize, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

/// Random significance-like matrix: nonnegative, with some exact zeros.
pub fn random_s(rng: &mut ChaCha8Rng, d: usize, n: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|_| {
            (0..n)
                .map(|_| if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..6.0) })
                .collect()
        })
        .collect()
}

pub struct NaiveMerge {
    pub lo: usize,
    pub hi: usize,
    pub cost: f64,
    pub size: usize,
}

/// Agglomeration recomputing every cluster centroid from the raw rows at each
/// step; cost `|A||B|/(|A|+|B|) * ||c_A - c_B||^2`, ties to the smallest
/// `(lo, hi)` node pair.
pub fn naive_ward(rows: &[Vec<f64>]) -> Vec<NaiveMerge> {
    let d = rows.len();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..d).map(|i| (i, vec![i])).collect();
    let centroid = |members: &[usize]| -> Vec<f64> {
        let mut c = vec![0.0; rows[0].len()];
        for &m in members {
            for (cj, v) in c.iter_mut().zip(&rows[m]) {
                *cj += v;
            }
        }
        c.iter().map(|v| v / members.len() as f64).collect()
    };
    let mut merges = Vec::new();
    for step in 0..d - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let (ca, cb) = (centroid(&clusters[a].1), centroid(&clusters[b].1));
                let dist2: f64 = ca.iter().zip(&cb).map(|(x, y)| (x - y) * (x - y)).sum();
                let (na, nb) = (clusters[a].1.len() as f64, clusters[b].1.len() as f64);
                let cost = na * nb / (na + nb) * dist2;
                let (lo, hi) = (clusters[a].0.min(clusters[b].0), clusters[a].0.max(clusters[b].0));
                let better = match best {
                    None => true,
                    Some((c, blo, bhi, _, _)) => cost < c || (cost == c && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((cost, lo, hi, a, b));
                }
            }
        }
        let (cost, lo, hi, a, b) = best.unwrap();
        let mut members = clusters[a].1.clone();
        members.extend(&clusters[b].1);
        let size = members.len();
        clusters.remove(b);
        clusters[a] = (d + step, members);
        merges.push(NaiveMerge { lo, hi, cost, size });
    }
    merges
}

pub fn ward_suite(seed: u64) -> SuiteResult {
    let mut rng = rng(seed);
    for case in 0..INSTANCES {
        let d = rng.gen_range(2..=12);
        let n = rng.gen_range(1..=8);
        let rows = random_s(&mut rng, d, n);
        let tree = ward_cluster(&SignificanceMatrix::from_rows(rows.clone()).unwrap()).unwrap();
        let naive = naive_ward(&rows);
        for (t, (m, o)) in tree.merges.iter().zip(&naive).enumerate() {
            if (m.left, m.right, m.size) != (o.lo, o.hi, o.size) || !close(m.cost, o.cost, 1e-9) {
                return Err(format!(
                    "case {case} step {t}: got ({}, {}, {}, {}), naive ({}, {}, {}, {})",
                    m.left, m.right, m.size, m.cost, o.lo, o.hi, o.size, o.cost
                ));
            }
        }
    }
    Ok(INSTANCES)
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn medoid_suite(seed: u64) -> SuiteResult {
    let mut rng = rng(seed);
    for case in 0..INSTANCES {
        let d = rng.gen_range(1..=12);
        let n = rng.gen_range(1..=8);
        let rows = random_s(&mut rng, d, n);
        let s = SignificanceMatrix::from_rows(rows.clone()).unwrap();
        let mut members: Vec<usize> = (0..d).filter(|_| rng.gen_bool(0.7)).collect();
        if members.is_empty() {
            members.push(0);
        }
        let sums: Vec<f64> = members
            .iter()
            .map(|&i| members.iter().map(|&j| euclid(&rows[i], &rows[j])).sum())
            .collect();
        let min = sums.iter().cloned().fold(f64::INFINITY, f64::min);
        let got = medoid(&s, &members);
        let Some(pos) = members.iter().position(|&m| m == got) else {
            return Err(format!("case {case}: medoid {got} is not a member"));
        };
        if sums[pos] > min + 1e-9 {
            return Err(format!("case {case}: medoid {got} has sum {}, minimum {min}", sums[pos]));
        }
        // exact ties go to the lowest index
        if let Some(&lower) = members.iter().zip(&sums).find(|(&i, &s)| i < got && s == sums[pos]).map(|(i, _)| i) {
            return Err(format!("case {case}: medoid {got} ties with lower index {lower}"));
        }
    }
    Ok(INSTANCES)
}

/// Fraction of (positive, negative) pairs with the positive scored higher,
/// ties counting one half.
pub fn pairwise_auc(scores: &[f64], labels: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1.0 && labels[j] == 0.0 {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

pub fn auc_suite(seed: u64) -> SuiteResult {
    let mut rng = rng(seed);
    for case in 0..INSTANCES {
        let n = rng.gen_range(2..=40);
        let mut labels: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_bool(0.5))).collect();
        labels[0] = 1.0;
        labels[1] = 0.0;
        labels.shuffle(&mut rng);
        // coarse scores so ties are common
        let levels = rng.gen_range(1..=10);
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 / 3.0).collect();
        let got = auc(&scores, &labels).unwrap();
        let expected = pairwise_auc(&scores, &labels);
        if (got - expected).abs() > 1e-12 {
            return Err(format!("case {case}: auc {got}, pairwise {expected}"));
        }
    }
    Ok(INSTANCES)
}

/// BIC of the group-means model from the sum-of-squares decomposition
/// `RSS = sum x^2 - sum_g (sum_g x)^2 / n_g`.
pub fn closed_form_bic(column: &[f64], labels: &[usize], k: usize) -> f64 {
    let d = column.len() as f64;
    let total_sq: f64 = column.iter().map(|v| v * v).sum();
    let mut between = 0.0;
    for g in 0..k {
        let vals: Vec<f64> = column.iter().zip(labels).filter(|(_, &l)| l == g).map(|(v, _)| *v).collect();
        if !vals.is_empty() {
            let s: f64 = vals.iter().sum();
            between += s * s / vals.len() as f64;
        }
    }
    let rss = (total_sq - between).max(0.0);
    let sigma2 = (rss / d).max(VARIANCE_FLOOR);
    d * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0) + (k as f64 + 1.0) * d.ln()
}

fn random_membership(rng: &mut ChaCha8Rng, d: usize) -> Membership {
    let k = rng.gen_range(1..=d);
    let mut labels: Vec<usize> = (0..d).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect();
    labels.shuffle(rng);
    Membership { k, labels }
}

pub fn term_bic_suite(seed: u64) -> SuiteResult {
    let mut rng = rng(seed);
    for checked in 0..INSTANCES {
        let d = rng.gen_range(2..=12);
        let column: Vec<f64> = random_s(&mut rng, d, 1).into_iter().map(|r| r[0]).collect();
        let m = random_membership(&mut rng, d);
        let got = term_model_bic(&column, &m).unwrap();
        let expected = closed_form_bic(&column, &m.labels, m.k);
        if !close(got, expected, 1e-9) {
            return Err(format!("case {checked}: bic {got}, closed form {expected}"));
        }
    }
    Ok(INSTANCES)
}

pub fn cost_suite(seed: u64) -> SuiteResult {
    let mut rng = rng(seed);
    for checked in 0..INSTANCES {
        let d = rng.gen_range(2..=12);
        let n = rng.gen_range(1..=8);
        let rows = random_s(&mut rng, d, n);
        let m = random_membership(&mut rng, d);
        let columns: Vec<Vec<f64>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let s = SignificanceMatrix::from_rows(rows.clone()).unwrap();
        let got = cost_at_k(&s, &m).unwrap();
        let expected = columns.iter().map(|c| closed_form_bic(c, &m.labels, m.k)).sum::<f64>() / n as f64;
        if !close(got, expected, 1e-9) {
            return Err(format!("case {checked}: cost {got}, brute force {expected}"));
        }

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let permuted = SignificanceMatrix::from_rows(rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect())
            .unwrap();
        let mut relabel: Vec<usize> = (0..m.k).collect();
        relabel.shuffle(&mut rng);
        let renamed = Membership {
            k: m.k,
            labels: m.labels.iter().map(|&l| relabel[l]).collect(),
        };
        let again = cost_at_k(&permuted, &renamed).unwrap();
        if !close(got, again, 1e-9) {
            return Err(format!("case {checked}: cost not invariant ({got} vs {again})"));
        }
    }
    Ok(INSTANCES)
}

/// Two-sided Student-t tail by composite Simpson integration of the density
/// over `[0, |t|]`.
pub fn simpson_t_two_sided(t: f64, df: f64) -> f64 {
    let log_norm = libm::lgamma((df + 1.0) / 2.0) - libm::lgamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln();
    let density = |u: f64| (log_norm - (df + 1.0) / 2.0 * (u * u / df).ln_1p()).exp();
    let a = t.abs();
    let steps = 20_000;
    let h = a / steps as f64;
    let mut sum = density(0.0) + density(a);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * density(i as f64 * h);
    }
    (1.0 - 2.0 * sum * h / 3.0).max(0.0)
}

pub fn ols_suite(seed: u64) -> SuiteResult {
    let mut rng = rng(seed);
    for case in 0..INSTANCES {
        let p = rng.gen_range(1..=5);
        let n = rng.gen_range(p + 3..=40);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let beta_true: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| 0.5 + (0..p).map(|j| beta_true[j] * x[(i, j)]).sum::<f64>() + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let fit = fit_gaussian(&x, &y).map_err(|e| format!("case {case}: {e}"))?;

        let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
        let yv = DVector::from_column_slice(&y);
        let xtx_inv = (design.transpose() * &design).try_inverse().ok_or("singular X'X")?;
        let beta = &xtx_inv * design.transpose() * &yv;
        let rss = (&yv - &design * &beta).norm_squared();
        let df = (n - p - 1) as f64;
        let sigma2 = rss / df;

        if !close(fit.intercept, beta[0], 1e-10) {
            return Err(format!("case {case}: intercept {} vs {}", fit.intercept, beta[0]));
        }
        for (j, term) in fit.terms.iter().enumerate() {
            let se = (sigma2 * xtx_inv[(j + 1, j + 1)]).sqrt();
            let pval = simpson_t_two_sided(beta[j + 1] / se, df);
            if !close(term.beta, beta[j + 1], 1e-10) || !close(term.se, se, 1e-10) || (term.p - pval).abs() > 1e-10 {
                return Err(format!(
                    "case {case} term {j}: ({}, {}, {}) vs normal equations ({}, {se}, {pval})",
                    term.beta,
                    term.se,
                    term.p,
                    beta[j + 1]
                ));
            }
        }
    }
    Ok(INSTANCES)
}

/// Largest |X'(y - mu)| entry at the fitted coefficients, intercept column
/// included.
pub fn score_max(x: &DMatrix<f64>, y: &[f64], intercept: f64, beta: &[f64]) -> f64 {
    let mut score = vec![0.0; beta.len() + 1];
    for i in 0..x.nrows() {
        let eta = intercept + (0..beta.len()).map(|j| beta[j] * x[(i, j)]).sum::<f64>();
        let r = y[i] - 1.0 / (1.0 + (-eta).exp());
        score[0] += r;
        for j in 0..beta.len() {
            score[j + 1] += r * x[(i, j)];
        }
    }
    score.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn irls_suite(seed: u64) -> SuiteResult {
    let mut rng = rng(seed);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < INSTANCES {
        attempts += 1;
        if attempts > 4 * INSTANCES {
            return Err(format!("only {checked} converged fits in {attempts} attempts"));
        }
        let p = rng.gen_range(1..=4);
        let n = rng.gen_range(30..=80);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let coef: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let eta = -0.3 + (0..p).map(|j| coef[j] * x[(i, j)]).sum::<f64>();
                f64::from(rng.gen::<f64>() < 1.0 / (1.0 + (-eta).exp()))
            })
            .collect();
        let Ok(fit) = fit_binomial(&x, &y, 25) else {
            continue;
        };
        if !fit.converged {
            continue;
        }
        let beta: Vec<f64> = fit.terms.iter().map(|t| t.beta).collect();
        let score = score_max(&x, &y, fit.intercept, &beta);
        if score >= 1e-6 {
            return Err(format!("case {checked}: score {score}"));
        }
        checked += 1;
    }
    Ok(checked)
}
