//! Statistics for the identification experiment: binomial tests, Kendall τ-b,
//! principal components of the performance measures and a two-way ANOVA.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use statrs::function::erf::erfc;
use statrs::function::factorial::ln_binomial;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("column {0} is constant")]
    ConstantColumn(usize),
}

fn arg(msg: impl Into<String>) -> StatsError {
    StatsError::Argument(msg.into())
}

/// Exact upper tail `P(X >= k)` for `X ~ Binomial(n, p0)`.
pub fn binomial_test_ge(k: u32, n: u32, p0: f64) -> Result<f64, StatsError> {
    if k > n {
        return Err(arg(format!("k = {k} exceeds n = {n}")));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(arg(format!("chance probability {p0} outside (0, 1)")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let (lp, lq) = (p0.ln(), (-p0).ln_1p());
    let log_term = |i: u32| ln_binomial(n as u64, i as u64) + i as f64 * lp + (n - i) as f64 * lq;
    // Add the tail from the far end inward; for the tails of interest terms grow
    // toward k, so the small terms are accumulated first.
    let mut sum = 0.0;
    for i in (k..=n).rev() {
        sum += log_term(i).exp();
    }
    Ok(sum.min(1.0))
}

/// Smallest `k` with `P(X >= k) <= alpha`, if any.
pub fn min_significant_hits(n: u32, p0: f64, alpha: f64) -> Result<Option<u32>, StatsError> {
    for k in 0..=n {
        if binomial_test_ge(k, n, p0)? <= alpha {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauResult {
    pub tau: f64,
    /// Two-sided, normal approximation with tie-corrected variance.
    pub p_value: f64,
    pub z: f64,
    /// Concordant minus discordant pairs.
    pub score: i64,
    pub n: usize,
}

/// Sum of `t(t-1)/2`, `t(t-1)(t-2)` and `t(t-1)(2t+5)` over runs of equal values in a
/// sorted sequence.
fn tie_sums<T: PartialEq>(sorted: &[T]) -> (u64, f64, f64) {
    let (mut pairs, mut v0, mut v1) = (0u64, 0.0, 0.0);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as u64;
        if t > 1 {
            pairs += t * (t - 1) / 2;
            let tf = t as f64;
            v0 += tf * (tf - 1.0) * (tf - 2.0);
            v1 += tf * (tf - 1.0) * (2.0 * tf + 5.0);
        }
        i = j;
    }
    (pairs, v0, v1)
}

/// Merge sort of `v` that returns the number of inversions.
fn sort_count_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        sort_count_swaps(l, bl) + sort_count_swaps(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall τ-b in `O(n log n)`.
pub fn kendall_tau_b(a: &[f64], b: &[f64]) -> Result<TauResult, StatsError> {
    if a.len() != b.len() {
        return Err(arg(format!("lengths differ: {} and {}", a.len(), b.len())));
    }
    let n = a.len();
    if n < 2 {
        return Err(arg("need at least 2 observations"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(arg("NaN in input"));
    }
    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.total_cmp(&q.1)));
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let (x_ties, x0, x1) = tie_sums(&xs);
    let (joint_ties, _, _) = tie_sums(&pairs);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = sort_count_swaps(&mut ys, &mut buf);
    let (y_ties, y0, y1) = tie_sums(&ys);

    let total = (n as u64) * (n as u64 - 1) / 2;
    if x_ties == total || y_ties == total {
        return Err(StatsError::Degenerate("an input is constant".into()));
    }
    let score = total as i64 - x_ties as i64 - y_ties as i64 + joint_ties as i64 - 2 * swaps as i64;
    let tau = score as f64 / ((total - x_ties) as f64).sqrt() / ((total - y_ties) as f64).sqrt();

    let nf = n as f64;
    let m = nf * (nf - 1.0);
    let mut var = (m * (2.0 * nf + 5.0) - x1 - y1) / 18.0 + 2.0 * x_ties as f64 * y_ties as f64 / m;
    if n > 2 {
        var += x0 * y0 / (9.0 * m * (nf - 2.0));
    }
    let (z, p_value) = if var > 0.0 {
        let z = score as f64 / var.sqrt();
        (z, erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0))
    } else {
        (0.0, 1.0)
    };
    Ok(TauResult {
        tau: tau.clamp(-1.0, 1.0),
        p_value,
        z,
        score,
        n,
    })
}

fn check_table(rows: &[Vec<f64>]) -> Result<usize, StatsError> {
    if rows.len() < 2 {
        return Err(arg("need at least 2 rows"));
    }
    let p = rows[0].len();
    if p == 0 {
        return Err(arg("no columns"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != p) {
        return Err(arg(format!("row {i} has {} values, expected {p}", rows[i].len())));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(arg("non-finite value"));
    }
    Ok(p)
}

/// Columns centered and scaled to unit sample variance.
fn standardize(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, StatsError> {
    let p = check_table(rows)?;
    let n = rows.len();
    let mut m = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    for j in 0..p {
        let mut col = m.column_mut(j);
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / (n as f64 - 1.0)).sqrt();
        if sd == 0.0 || sd <= 1e-13 * mean.abs() {
            return Err(StatsError::ConstantColumn(j));
        }
        col /= sd;
    }
    Ok(m)
}

/// Product-moment correlations between the columns of `rows`; unit diagonal.
pub fn correlation_matrix(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, StatsError> {
    let z = standardize(rows)?;
    let n = rows.len() as f64;
    let p = z.ncols();
    let mut r = vec![vec![0.0; p]; p];
    for i in 0..p {
        r[i][i] = 1.0;
        for j in i + 1..p {
            let v = (z.column(i).dot(&z.column(j)) / (n - 1.0)).clamp(-1.0, 1.0);
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    /// Eigenvalues of the correlation matrix, descending.
    pub eigenvalues: Vec<f64>,
    pub variance_explained: Vec<f64>,
    /// `loadings[measure][component]`: correlation of a measure with a component.
    pub loadings: Vec<Vec<f64>>,
    /// `scores[row][component]` of the standardized data.
    pub scores: Vec<Vec<f64>>,
}

/// Principal components of the correlation matrix of `rows` (observations × measures).
///
/// Component signs are chosen so that loadings sum to a positive value.
pub fn pca(rows: &[Vec<f64>]) -> Result<PcaSummary, StatsError> {
    let z = standardize(rows)?;
    let n = rows.len() as f64;
    let p = z.ncols();
    let corr = {
        let mut c = z.transpose() * &z / (n - 1.0);
        for i in 0..p {
            c[(i, i)] = 1.0;
        }
        c
    };
    let eig = SymmetricEigen::new(corr);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let variance_explained = eigenvalues.iter().map(|l| l / total).collect();

    let mut vectors = DMatrix::zeros(p, p);
    for (c, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let s = v.sum();
        let flip = if s.abs() > 1e-12 {
            s < 0.0
        } else {
            v[v.iamax()] < 0.0
        };
        if flip {
            v.neg_mut();
        }
        vectors.set_column(c, &v);
    }
    let loadings = (0..p)
        .map(|m| (0..p).map(|c| vectors[(m, c)] * eigenvalues[c].sqrt()).collect())
        .collect();
    let s = &z * &vectors;
    let scores = (0..s.nrows())
        .map(|r| (0..p).map(|c| s[(r, c)]).collect())
        .collect();
    Ok(PcaSummary {
        eigenvalues,
        variance_explained,
        loadings,
        scores,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaEffect {
    pub df: f64,
    pub sum_sq: f64,
    pub mean_sq: f64,
    pub f: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaResidual {
    pub df: f64,
    pub sum_sq: f64,
    pub mean_sq: f64,
}

/// Sequential (type I) decomposition in the order A, B, A×B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnovaTable {
    pub a: AnovaEffect,
    pub b: AnovaEffect,
    pub interaction: AnovaEffect,
    pub residual: AnovaResidual,
}

fn codes<T: Ord + Clone>(labels: &[T]) -> (Vec<usize>, usize) {
    let mut levels = BTreeMap::new();
    for l in labels {
        let next = levels.len();
        levels.entry(l.clone()).or_insert(next);
    }
    // Re-number in sorted order so the design does not depend on input order.
    let sorted: BTreeMap<T, usize> = levels.keys().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    (labels.iter().map(|l| sorted[l]).collect(), sorted.len())
}

/// Residual sum of squares and rank of the least-squares fit of `y` on `x`.
fn fit(x: &DMatrix<f64>, y: &DVector<f64>) -> (f64, usize) {
    let svd = x.clone().svd(true, true);
    let eps = 1e-10 * svd.singular_values.max() * x.nrows().max(x.ncols()) as f64;
    let rank = svd.rank(eps);
    let beta = svd.solve(y, eps).expect("U and V were computed");
    ((y - x * beta).norm_squared(), rank)
}

/// Two-way ANOVA with interaction; unbalanced designs are allowed.
pub fn anova_two_way<A: Ord + Clone, B: Ord + Clone>(
    values: &[f64],
    factor_a: &[A],
    factor_b: &[B],
) -> Result<AnovaTable, StatsError> {
    let n = values.len();
    if factor_a.len() != n || factor_b.len() != n {
        return Err(arg("values and factors differ in length"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(arg("non-finite response"));
    }
    let (ca, la) = codes(factor_a);
    let (cb, lb) = codes(factor_b);
    if la < 2 {
        return Err(arg("factor A has a single level"));
    }
    if lb < 2 {
        return Err(arg("factor B has a single level"));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let y = DVector::from_iterator(n, values.iter().map(|v| v - mean));
    let scale = y.norm_squared();

    let ncols = la * lb;
    let design = |terms: usize| {
        DMatrix::from_fn(n, ncols, |r, c| {
            let (ia, ib) = (ca[r], cb[r]);
            let hit = match c {
                0 => true,
                c if c < la => terms >= 1 && ia == c,
                c if c < la + lb - 1 => terms >= 2 && ib == c - la + 1,
                c => {
                    let k = c - (la + lb - 1);
                    terms >= 3 && ia == 1 + k / (lb - 1) && ib == 1 + k % (lb - 1)
                }
            };
            if hit {
                1.0
            } else {
                0.0
            }
        })
    };
    let fits: Vec<(f64, usize)> = (0..4).map(|t| fit(&design(t), &y)).collect();
    let (rss_full, rank_full) = fits[3];
    let df_res = n - rank_full;
    if df_res == 0 {
        return Err(StatsError::Degenerate("no residual degrees of freedom".into()));
    }
    let tiny = 1e-12 * scale;
    let rss_full = if rss_full <= tiny { 0.0 } else { rss_full };
    let ms_res = rss_full / df_res as f64;
    let effect = |t: usize| {
        let df = (fits[t].1 - fits[t - 1].1) as f64;
        let ss = (fits[t - 1].0 - fits[t].0).max(0.0);
        let ss = if ss <= tiny { 0.0 } else { ss };
        let ms = if df > 0.0 { ss / df } else { 0.0 };
        let (f, p_value) = if ss == 0.0 || df == 0.0 {
            (0.0, 1.0)
        } else if ms_res == 0.0 {
            (f64::INFINITY, 0.0)
        } else {
            let f = ms / ms_res;
            let dist = FisherSnedecor::new(df, df_res as f64).expect("positive dfs");
            (f, dist.sf(f))
        };
        AnovaEffect {
            df,
            sum_sq: ss,
            mean_sq: ms,
            f,
            p_value,
        }
    };
    Ok(AnovaTable {
        a: effect(1),
        b: effect(2),
        interaction: effect(3),
        residual: AnovaResidual {
            df: df_res as f64,
            sum_sq: rss_full,
            mean_sq: ms_res,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exact tail for p0 = 1/16 in integers: sum C(n,i) 15^(n-i) / 16^n.
    fn exact_tail_sixteenth(k: u32, n: u32) -> f64 {
        let mut c: u128 = 1;
        let mut num: u128 = 0;
        for i in 0..=n {
            if i >= k {
                num += c * 15u128.pow(n - i);
            }
            c = c * (n - i) as u128 / (i as u128 + 1);
        }
        num as f64 / 16f64.powi(n as i32)
    }

    #[test]
    fn binomial_edges() {
        assert_eq!(binomial_test_ge(0, 20, 1.0 / 16.0).unwrap(), 1.0);
        let all = binomial_test_ge(20, 20, 1.0 / 16.0).unwrap();
        assert!((all / (1.0f64 / 16.0).powi(20) - 1.0).abs() < 1e-12);
        assert!(binomial_test_ge(21, 20, 0.5).is_err());
        assert!(binomial_test_ge(3, 20, 0.0).is_err());
        assert!(binomial_test_ge(3, 20, 1.0).is_err());
    }

    #[test]
    fn binomial_matches_integer_oracle() {
        for k in 0..=20 {
            let got = binomial_test_ge(k, 20, 1.0 / 16.0).unwrap();
            let want = exact_tail_sixteenth(k, 20);
            assert!((got - want).abs() <= 1e-12 * want, "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn binomial_frozen_values() {
        // Exact rational evaluation.
        let cases = [
            (5, 0.00669139817509827),
            (6, 0.0010755805903361086),
            (7, 0.0001396109928757484),
            (20, 8.271806125530277e-25),
        ];
        for (k, want) in cases {
            let got = binomial_test_ge(k, 20, 1.0 / 16.0).unwrap();
            assert!((got / want - 1.0).abs() < 1e-12, "k={k}");
        }
        assert_eq!(min_significant_hits(20, 1.0 / 16.0, 0.001).unwrap(), Some(7));
    }

    #[test]
    fn binomial_symmetric_half() {
        // P(X>=11) + P(X=10) + P(X<=9) = 1 and P(X<=9) = P(X>=11) at p0 = 1/2.
        let ge11 = binomial_test_ge(11, 20, 0.5).unwrap();
        let p10 = binomial_test_ge(10, 20, 0.5).unwrap() - ge11;
        assert!((2.0 * ge11 + p10 - 1.0).abs() < 1e-12);
    }

    fn naive_tau(a: &[f64], b: &[f64]) -> f64 {
        let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                let dx = a[i] - a[j];
                let dy = b[i] - b[j];
                if dx == 0.0 && dy == 0.0 {
                } else if dx == 0.0 {
                    tx += 1;
                } else if dy == 0.0 {
                    ty += 1;
                } else if (dx > 0.0) == (dy > 0.0) {
                    c += 1;
                } else {
                    d += 1;
                }
            }
        }
        (c - d) as f64 / ((c + d + ty) as f64).sqrt() / ((c + d + tx) as f64).sqrt()
    }

    #[test]
    fn tau_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..60 {
            let n = rng.random_range(2..=500);
            let levels = if trial % 3 == 0 { 4 } else { 50 };
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
            let want = naive_tau(&a, &b);
            match kendall_tau_b(&a, &b) {
                Ok(r) => assert_eq!(r.tau, want.clamp(-1.0, 1.0), "n={n}"),
                Err(_) => assert!(want.is_nan()),
            }
        }
    }

    #[test]
    fn tau_extremes_and_errors() {
        let a: Vec<f64> = (0..30).map(|i| (i * 7 % 30) as f64).collect();
        assert_eq!(kendall_tau_b(&a, &a).unwrap().tau, 1.0);
        let rev: Vec<f64> = a.iter().map(|v| -v).collect();
        assert_eq!(kendall_tau_b(&a, &rev).unwrap().tau, -1.0);
        assert!(matches!(
            kendall_tau_b(&a, &vec![1.0; 30]),
            Err(StatsError::Degenerate(_))
        ));
        assert!(kendall_tau_b(&a, &a[..10]).is_err());
        assert!(kendall_tau_b(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn tau_matches_reference_p() {
        // Reference values from an independent tie-corrected implementation.
        let a = [1.0, 2.0, 2.0, 3.0, 4.0, 4.0, 4.0, 5.0, 6.0, 7.0];
        let b = [2.0, 1.0, 3.0, 3.0, 5.0, 4.0, 6.0, 6.0, 7.0, 6.0];
        let r = kendall_tau_b(&a, &b).unwrap();
        assert!((r.tau - 0.8048780487804879).abs() < 1e-14);
        assert!((r.p_value / 0.0021868650320006396 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tau_monotone_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..100).map(|_| rng.random_range(0..10) as f64).collect();
        let b: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
        let bt: Vec<f64> = b.iter().map(|v| (3.0 * v).exp() + 1.0).collect();
        let r1 = kendall_tau_b(&a, &b).unwrap();
        let r2 = kendall_tau_b(&a, &bt).unwrap();
        assert_eq!(r1.tau, r2.tau);
        assert_eq!(r1.p_value, r2.p_value);
    }

    /// Cyclic Jacobi eigenvalues of a symmetric matrix.
    fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
        let n = a.len();
        for _ in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i][j] * a[i][j])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut e: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        e.sort_by(|x, y| y.total_cmp(x));
        e
    }

    fn direct_correlation(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let p = rows[0].len();
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..p).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let cov = |i: usize, j: usize| {
            rows.iter()
                .map(|r| (r[i] - mean[i]) * (r[j] - mean[j]))
                .sum::<f64>()
                / (n - 1.0)
        };
        (0..p)
            .map(|i| (0..p).map(|j| cov(i, j) / (cov(i, i) * cov(j, j)).sqrt()).collect())
            .collect()
    }

    fn random_rows(seed: u64, n: usize, p: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let common = rng.random::<f64>();
                (0..p).map(|j| common * j as f64 + rng.random::<f64>()).collect()
            })
            .collect()
    }

    #[test]
    fn pca_matches_jacobi_oracle() {
        let rows = random_rows(5, 20, 5);
        let s = pca(&rows).unwrap();
        let oracle = jacobi_eigenvalues(direct_correlation(&rows));
        let total: f64 = oracle.iter().sum();
        for (got, want) in s.variance_explained.iter().zip(&oracle) {
            assert!((got - want / total).abs() < 1e-6);
        }
        assert!((s.variance_explained.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(s.variance_explained.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn pca_loadings_are_correlations() {
        let rows = random_rows(8, 30, 5);
        let s = pca(&rows).unwrap();
        for m in 0..5 {
            for c in 0..2 {
                let pairs: Vec<Vec<f64>> = rows
                    .iter()
                    .zip(&s.scores)
                    .map(|(r, sc)| vec![r[m], sc[c]])
                    .collect();
                let r = direct_correlation(&pairs)[0][1];
                assert!((r - s.loadings[m][c]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pca_rank_one_and_isotropic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| {
                let v = rng.random::<f64>();
                (0..5).map(|_| v + 1e-9 * rng.random::<f64>()).collect()
            })
            .collect();
        assert!(pca(&rows).unwrap().variance_explained[0] > 0.999_999);

        use rand_distr::{Distribution, StandardNormal};
        let rows: Vec<Vec<f64>> = (0..20_000)
            .map(|_| (0..5).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        for f in pca(&rows).unwrap().variance_explained {
            assert!((f - 0.2).abs() < 0.03, "{f}");
        }
    }

    #[test]
    fn pca_affine_invariance_and_errors() {
        let rows = random_rows(2, 15, 5);
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| (j as f64 + 2.0) * v - 7.0).collect())
            .collect();
        let a = pca(&rows).unwrap().variance_explained;
        let b = pca(&scaled).unwrap().variance_explained;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        let mut bad = rows.clone();
        for r in &mut bad {
            r[3] = 0.5;
        }
        assert_eq!(pca(&bad).unwrap_err(), StatsError::ConstantColumn(3));
        assert!(pca(&rows[..1]).is_err());
    }

    #[test]
    fn correlation_properties() {
        let rows = random_rows(4, 25, 5);
        let r = correlation_matrix(&rows).unwrap();
        let want = direct_correlation(&rows);
        for i in 0..5 {
            assert_eq!(r[i][i], 1.0);
            for j in 0..5 {
                assert_eq!(r[i][j], r[j][i]);
                assert!((r[i][j] - want[i][j]).abs() < 1e-12);
            }
        }
        let neg: Vec<Vec<f64>> = rows.iter().map(|x| vec![x[0], -x[0]]).collect();
        assert!((correlation_matrix(&neg).unwrap()[0][1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn anova_balanced_hand_oracle() {
        // 2x2, 3 replicates per cell.
        let cells = [[[4.0, 5.0, 6.0], [7.0, 9.0, 8.0]], [[6.0, 6.0, 9.0], [12.0, 10.0, 11.0]]];
        let (mut y, mut a, mut b) = (vec![], vec![], vec![]);
        for (i, row) in cells.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                for &v in cell {
                    y.push(v);
                    a.push(i);
                    b.push(j);
                }
            }
        }
        let grand = y.iter().sum::<f64>() / 12.0;
        let cell_mean = |i: usize, j: usize| cells[i][j].iter().sum::<f64>() / 3.0;
        let a_mean = |i: usize| (cell_mean(i, 0) + cell_mean(i, 1)) / 2.0;
        let b_mean = |j: usize| (cell_mean(0, j) + cell_mean(1, j)) / 2.0;
        let ss_a = 6.0 * (0..2).map(|i| (a_mean(i) - grand).powi(2)).sum::<f64>();
        let ss_b = 6.0 * (0..2).map(|j| (b_mean(j) - grand).powi(2)).sum::<f64>();
        let mut ss_ab = 0.0;
        let mut ss_e = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                ss_ab += 3.0 * (cell_mean(i, j) - a_mean(i) - b_mean(j) + grand).powi(2);
                ss_e += cells[i][j].iter().map(|v| (v - cell_mean(i, j)).powi(2)).sum::<f64>();
            }
        }
        let ms_e = ss_e / 8.0;
        let t = anova_two_way(&y, &a, &b).unwrap();
        assert!((t.a.f - ss_a / ms_e).abs() < 1e-9);
        assert!((t.b.f - ss_b / ms_e).abs() < 1e-9);
        assert!((t.interaction.f - ss_ab / ms_e).abs() < 1e-9);
        assert_eq!(t.residual.df, 8.0);
    }

    #[test]
    fn anova_unbalanced_reference() {
        // Sequential sums of squares from an independent OLS implementation.
        let y = [
            0.61, 0.55, 0.72, 0.48, 0.66, 0.59, 0.70, 0.52, 0.63, 0.58, 0.49, 0.67, 0.71, 0.60,
            0.57, 0.64, 0.53, 0.69, 0.62, 0.50, 0.74,
        ];
        let a = [0, 0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 1];
        let b: Vec<u8> = (0..21).map(|i| (i / 7) as u8).collect();
        let t = anova_two_way(&y, &a, &b).unwrap();
        let close = |x: f64, w: f64| assert!((x - w).abs() <= 1e-9 * w.abs().max(1e-3), "{x} vs {w}");
        close(t.a.sum_sq, 0.02742857142857145);
        close(t.b.sum_sq, 0.002452380952380928);
        close(t.interaction.sum_sq, 0.004600952380952392);
        close(t.residual.sum_sq, 0.09101333333333333);
        close(t.a.f, 4.520530743794738);
        close(t.b.f, 0.2020896990498494);
        close(t.interaction.f, 0.3791438198484794);
        close(t.a.p_value, 0.050502820928723526);
        close(t.b.p_value, 0.8192098856001072);
        close(t.interaction.p_value, 0.6908229655459377);
        assert_eq!((t.a.df, t.b.df, t.interaction.df, t.residual.df), (1.0, 2.0, 2.0, 15.0));
    }

    #[test]
    fn anova_constant_and_errors() {
        let y = vec![0.3; 12];
        let a: Vec<usize> = (0..12).map(|i| i % 2).collect();
        let b: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let t = anova_two_way(&y, &a, &b).unwrap();
        for e in [t.a, t.b, t.interaction] {
            assert_eq!((e.f, e.p_value), (0.0, 1.0));
        }
        assert!(anova_two_way(&y, &vec![0; 12], &b).is_err());
        assert!(anova_two_way(&y, &a, &vec!["g"; 12]).is_err());
    }

    #[test]
    fn anova_detects_injected_effect() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (mut y, mut a, mut b) = (vec![], vec![], vec![]);
        for i in 0..60 {
            let fa = i % 2;
            let fb = (i / 2) % 3;
            y.push(1.5 * fa as f64 + rng.random::<f64>());
            a.push(fa);
            b.push(fb);
        }
        let t = anova_two_way(&y, &a, &b).unwrap();
        assert!(t.a.p_value < 0.01 && t.b.p_value > 0.01);
        let shifted: Vec<f64> = y.iter().map(|v| v + 100.0).collect();
        let scaled: Vec<f64> = y.iter().map(|v| v * 3.0).collect();
        let ts = anova_two_way(&shifted, &a, &b).unwrap();
        let tc = anova_two_way(&scaled, &a, &b).unwrap();
        assert!((ts.a.f - t.a.f).abs() < 1e-6 * t.a.f);
        assert!((tc.b.p_value - t.b.p_value).abs() < 1e-9);
    }
}
