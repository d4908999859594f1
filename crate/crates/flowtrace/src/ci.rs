//! Gaussian conditional-independence machinery.
//!
//! Correlations are computed once per dataset and cached; every test during
//! skeleton search is then pure arithmetic on the cached matrix. Partial
//! correlations come from the correlation submatrix over `{i, j} ∪ cond`
//! (precision-matrix formula, evaluated through the Schur complement of the
//! conditioning block). Decisions use the Fisher-Z transform:
//! `z = atanh(r) * sqrt(n - |cond| - 3)`, independent iff `|z| <= Phi^-1(1 - alpha/2)`.

use ndarray::{ArrayView2, Array2};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::LaggedTable;
use crate::error::{Error, Result};

/// Clamp applied to |r| before the Fisher transform so z stays finite under
/// numerically perfect correlation.
pub const R_CLAMP: f64 = 1.0 - 1e-12;

/// Pivot tolerance below which a conditioning submatrix counts as collinear.
const SINGULAR_TOL: f64 = 1e-12;

/// Result of one conditional-independence test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiTestResult {
    pub r: f64,
    pub z: f64,
    pub independent: bool,
    /// Size of the conditioning set.
    pub order: usize,
}

/// Two-sided normal critical value `Phi^-1(1 - alpha/2)`.
pub fn critical_z(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

/// |r| decision boundary equivalent to the z-threshold at this order; lets
/// the search compare partial correlations directly without a per-test atanh.
pub fn r_threshold(n: usize, order: usize, alpha: f64) -> f64 {
    (critical_z(alpha) / ((n - order - 3) as f64).sqrt()).tanh()
}

/// Fisher-Z test of a (partial) correlation at conditioning order `order`.
pub fn fisher_z_test(r: f64, n: usize, order: usize, alpha: f64) -> Result<CiTestResult> {
    if n < order + 4 {
        return Err(Error::InsufficientSamples { n, order });
    }
    let r_c = r.clamp(-R_CLAMP, R_CLAMP);
    let z = r_c.atanh() * ((n - order - 3) as f64).sqrt();
    Ok(CiTestResult {
        r,
        z,
        independent: z.abs() <= critical_z(alpha),
        order,
    })
}

/// Strength of a surviving edge: the minimum |partial correlation| over every
/// test performed on the pair — the weakest evidence that still failed to
/// separate it. `None` when no test was ever performed.
pub fn edge_strength<I: IntoIterator<Item = f64>>(test_correlations: I) -> Option<f64> {
    test_correlations
        .into_iter()
        .map(f64::abs)
        .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
}

/// Per-dataset correlation cache. Zero-variance columns are flagged; their
/// off-diagonal correlations are stored as 0 so every test involving them
/// comes out independent, and conditioning on them is a no-op.
pub struct CorrCache {
    corr: Vec<f64>,
    p: usize,
    n_rows: usize,
    constant: Vec<bool>,
}

/// Reusable buffers for the Schur-complement solve; one per worker thread.
#[derive(Default)]
pub struct PcorrScratch {
    chol: Vec<f64>,
    w: Vec<f64>,
    v: Vec<f64>,
}

/// Outcome of one search-side CI test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CiOutcome {
    Dependent { r: f64 },
    Independent { r: f64 },
    /// Collinear conditioning set: independence not rejected, counted as a
    /// diagnostic rather than aborting the search.
    Collinear,
}

impl CorrCache {
    pub fn from_table(table: &LaggedTable) -> Self {
        Self::from_view(table.values.view())
    }

    pub fn from_view(data: ArrayView2<'_, f64>) -> Self {
        let n = data.nrows();
        let p = data.ncols();
        assert!(n >= 2, "need at least two rows for correlations");
        let mut constant = vec![false; p];
        // Standardize so that Z^T Z is directly the correlation matrix.
        let mut z = Array2::<f64>::zeros((n, p));
        for c in 0..p {
            let col = data.column(c);
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            let mut sum = 0.0;
            for &x in col {
                min = min.min(x);
                max = max.max(x);
                sum += x;
            }
            if min == max {
                constant[c] = true;
                continue; // leave the z column at zero
            }
            let mean = sum / n as f64;
            let ss: f64 = col.iter().map(|&x| (x - mean) * (x - mean)).sum();
            let scale = 1.0 / ss.sqrt();
            for (r, &x) in col.iter().enumerate() {
                z[[r, c]] = (x - mean) * scale;
            }
        }
        let mut corr = Array2::<f64>::zeros((p, p));
        ndarray::linalg::general_mat_mul(1.0, &z.t(), &z, 0.0, &mut corr);
        let mut corr = corr.into_raw_vec_and_offset().0;
        for i in 0..p {
            for j in 0..p {
                let v = &mut corr[i * p + j];
                *v = v.clamp(-1.0, 1.0);
            }
            corr[i * p + i] = 1.0;
        }
        CorrCache {
            corr,
            p,
            n_rows: n,
            constant,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.p
    }

    pub fn is_constant(&self, c: usize) -> bool {
        self.constant[c]
    }

    pub fn n_constant(&self) -> usize {
        self.constant.iter().filter(|&&c| c).count()
    }

    #[inline]
    pub fn corr_at(&self, i: usize, j: usize) -> f64 {
        self.corr[i * self.p + j]
    }

    /// Partial correlation of columns `i`, `j` given `cond`.
    pub fn partial_correlation(&self, i: usize, j: usize, cond: &[usize]) -> Result<f64> {
        assert!(i != j && !cond.contains(&i) && !cond.contains(&j));
        let mut scratch = PcorrScratch::default();
        self.partial_with_scratch(i, j, cond, &mut scratch)
            .ok_or(Error::CollinearConditioningSet)
    }

    /// Schur-complement evaluation; `None` marks a collinear conditioning set.
    pub(crate) fn partial_with_scratch(
        &self,
        i: usize,
        j: usize,
        cond: &[usize],
        scratch: &mut PcorrScratch,
    ) -> Option<f64> {
        let r_ij = self.corr_at(i, j);
        let l = cond.len();
        if l == 0 {
            return Some(r_ij);
        }
        if l == 1 {
            let k = cond[0];
            let (rik, rjk) = (self.corr_at(i, k), self.corr_at(j, k));
            let den2 = (1.0 - rik * rik) * (1.0 - rjk * rjk);
            if !(den2 > SINGULAR_TOL) {
                return None;
            }
            return Some(((r_ij - rik * rjk) / den2.sqrt()).clamp(-1.0, 1.0));
        }
        // Cholesky of the conditioning block D, then w = L^-1 D_i, v = L^-1 D_j:
        // partial covariance r_ij - w.v, partial variances 1 - |w|^2, 1 - |v|^2.
        scratch.chol.resize(l * l, 0.0);
        scratch.w.resize(l, 0.0);
        scratch.v.resize(l, 0.0);
        let chol = &mut scratch.chol;
        let w = &mut scratch.w;
        let v = &mut scratch.v;
        for a in 0..l {
            for b in 0..=a {
                let mut s = self.corr_at(cond[a], cond[b]);
                for m in 0..b {
                    s -= chol[a * l + m] * chol[b * l + m];
                }
                if a == b {
                    if !(s > SINGULAR_TOL) {
                        return None;
                    }
                    chol[a * l + a] = s.sqrt();
                } else {
                    chol[a * l + b] = s / chol[b * l + b];
                }
            }
            let mut wi = self.corr_at(cond[a], i);
            let mut vi = self.corr_at(cond[a], j);
            for m in 0..a {
                wi -= chol[a * l + m] * w[m];
                vi -= chol[a * l + m] * v[m];
            }
            w[a] = wi / chol[a * l + a];
            v[a] = vi / chol[a * l + a];
        }
        let mut wv = 0.0;
        let mut ww = 0.0;
        let mut vv = 0.0;
        for a in 0..l {
            wv += w[a] * v[a];
            ww += w[a] * w[a];
            vv += v[a] * v[a];
        }
        let rxx = 1.0 - ww;
        let ryy = 1.0 - vv;
        if !(rxx > SINGULAR_TOL && ryy > SINGULAR_TOL) {
            return None;
        }
        Some(((r_ij - wv) / (rxx * ryy).sqrt()).clamp(-1.0, 1.0))
    }

    /// Search-side test with a precomputed |r| threshold for the order.
    #[inline]
    pub(crate) fn decide(
        &self,
        i: usize,
        j: usize,
        cond: &[usize],
        r_thresh: f64,
        scratch: &mut PcorrScratch,
    ) -> CiOutcome {
        if self.constant[i] || self.constant[j] {
            return CiOutcome::Independent { r: 0.0 };
        }
        match self.partial_with_scratch(i, j, cond, scratch) {
            None => CiOutcome::Collinear,
            Some(r) => {
                if r.abs() <= r_thresh {
                    CiOutcome::Independent { r }
                } else {
                    CiOutcome::Dependent { r }
                }
            }
        }
    }
}
