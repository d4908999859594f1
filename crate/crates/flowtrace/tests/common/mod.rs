//! Shared helpers for the integration suites, including the
//! residual-regression oracle for partial correlations. The oracle works on
//! raw data with ordinary least squares, fully independent of the production
//! path through the cached correlation matrix.

// Each integration test target compiles this module separately and uses a
// different subset of it.
#![allow(dead_code)]

use ndarray::Array2;

/// Partial correlation of columns `i` and `j` given `cond`, computed by
/// regressing each on the conditioning columns (with intercept) and
/// correlating the residuals.
pub fn partial_correlation_oracle(data: &Array2<f64>, i: usize, j: usize, cond: &[usize]) -> f64 {
    let ri = ols_residuals(data, i, cond);
    let rj = ols_residuals(data, j, cond);
    pearson(&ri, &rj)
}

fn ols_residuals(data: &Array2<f64>, target: usize, cond: &[usize]) -> Vec<f64> {
    let n = data.nrows();
    let k = cond.len() + 1; // intercept column
    // Normal equations: (X^T X) beta = X^T y.
    let mut xtx = vec![0.0; k * k];
    let mut xty = vec![0.0; k];
    let x_at = |row: usize, col: usize| -> f64 {
        if col == 0 {
            1.0
        } else {
            data[[row, cond[col - 1]]]
        }
    };
    for row in 0..n {
        let y = data[[row, target]];
        for a in 0..k {
            let xa = x_at(row, a);
            xty[a] += xa * y;
            for b in 0..k {
                xtx[a * k + b] += xa * x_at(row, b);
            }
        }
    }
    let beta = solve_dense(&mut xtx, &mut xty, k);
    (0..n)
        .map(|row| {
            let mut fit = 0.0;
            for a in 0..k {
                fit += beta[a] * x_at(row, a);
            }
            data[[row, target]] - fit
        })
        .collect()
}

/// Gaussian elimination with partial pivoting; panics on singular systems
/// (the oracle is only used on well-conditioned random tables).
fn solve_dense(a: &mut [f64], b: &mut [f64], k: usize) -> Vec<f64> {
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&x, &y| a[x * k + col].abs().partial_cmp(&a[y * k + col].abs()).unwrap())
            .unwrap();
        assert!(a[pivot * k + col].abs() > 1e-12, "singular design matrix");
        if pivot != col {
            for c in 0..k {
                a.swap(col * k + c, pivot * k + c);
            }
            b.swap(col, pivot);
        }
        let d = a[col * k + col];
        for row in col + 1..k {
            let f = a[row * k + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..k {
                a[row * k + c] -= f * a[col * k + c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for col in (0..k).rev() {
        let mut s = b[col];
        for c in col + 1..k {
            s -= a[col * k + c] * x[c];
        }
        x[col] = s / a[col * k + col];
    }
    x
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Files whose bytes legitimately vary between runs (they carry wall times).
pub const TIMING_FILES: &[&str] = &[
    "provenance.json",
    "stats.csv",
    "stats.md",
    "discovery_stats.json",
];

pub fn bundle_files(dir: &std::path::Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

/// Byte-compare two bundles, allowing only wall-time cells to differ.
pub fn assert_bundles_identical(a: &std::path::Path, b: &std::path::Path) {
    let files_a = bundle_files(a);
    assert_eq!(files_a, bundle_files(b), "bundle file sets differ");
    for name in &files_a {
        if TIMING_FILES.contains(&name.as_str()) {
            continue;
        }
        let ba = std::fs::read(a.join(name)).unwrap();
        let bb = std::fs::read(b.join(name)).unwrap();
        assert_eq!(ba, bb, "bundle file {name} differs");
    }
    // The cost table may differ only in its wall-seconds cell.
    let stats_a = std::fs::read_to_string(a.join("stats.csv")).unwrap();
    let stats_b = std::fs::read_to_string(b.join("stats.csv")).unwrap();
    let la: Vec<&str> = stats_a.lines().collect();
    let lb: Vec<&str> = stats_b.lines().collect();
    assert_eq!(la.len(), lb.len());
    for (x, y) in la.iter().zip(&lb) {
        if x == y {
            continue;
        }
        let cx: Vec<&str> = x.split(',').collect();
        let cy: Vec<&str> = y.split(',').collect();
        assert_eq!(cx[..2], cy[..2], "stats rows differ beyond wall time");
    }
}

/// All subsets of `pool` with size up to `max_size`.
pub fn subsets_up_to(pool: &[usize], max_size: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for size in 1..=max_size.min(pool.len()) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.iter().map(|&i| pool[i]).collect());
            // next combination
            let mut pos = size;
            let mut advanced = false;
            while pos > 0 {
                pos -= 1;
                if idx[pos] != pos + pool.len() - size {
                    idx[pos] += 1;
                    for q in pos + 1..size {
                        idx[q] = idx[q - 1] + 1;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
    }
    out
}
