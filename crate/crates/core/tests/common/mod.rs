//! Independent reference computations for integration tests.
#![allow(dead_code)]

/// `P(X >= k)` for `X ~ Binomial(n, 1/16)` from exact integer counts.
pub fn binomial_tail_sixteenth(k: u32, n: u32) -> f64 {
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

/// τ-b by counting every pair.
pub fn naive_tau_b(a: &[f64], b: &[f64]) -> f64 {
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

pub fn correlation(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
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

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += a[i][j] * a[i][j];
                }
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
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

/// F ratios `(A, B, AxB)` of a balanced two-way layout `cells[a][b][replicate]`.
pub fn balanced_anova_f(cells: &[Vec<Vec<f64>>]) -> (f64, f64, f64) {
    let la = cells.len();
    let lb = cells[0].len();
    let r = cells[0][0].len();
    let cm = |i: usize, j: usize| cells[i][j].iter().sum::<f64>() / r as f64;
    let am = |i: usize| (0..lb).map(|j| cm(i, j)).sum::<f64>() / lb as f64;
    let bm = |j: usize| (0..la).map(|i| cm(i, j)).sum::<f64>() / la as f64;
    let g = (0..la).map(am).sum::<f64>() / la as f64;
    let ss_a = (lb * r) as f64 * (0..la).map(|i| (am(i) - g).powi(2)).sum::<f64>();
    let ss_b = (la * r) as f64 * (0..lb).map(|j| (bm(j) - g).powi(2)).sum::<f64>();
    let (mut ss_ab, mut ss_e) = (0.0, 0.0);
    for i in 0..la {
        for j in 0..lb {
            ss_ab += r as f64 * (cm(i, j) - am(i) - bm(j) + g).powi(2);
            ss_e += cells[i][j].iter().map(|v| (v - cm(i, j)).powi(2)).sum::<f64>();
        }
    }
    let ms_e = ss_e / (la * lb * (r - 1)) as f64;
    (
        ss_a / (la - 1) as f64 / ms_e,
        ss_b / (lb - 1) as f64 / ms_e,
        ss_ab / ((la - 1) * (lb - 1)) as f64 / ms_e,
    )
}
