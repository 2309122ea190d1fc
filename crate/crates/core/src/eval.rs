//! Alignment of an estimate with the ground truth and recovery metrics.
//!
//! Atoms are only identifiable up to permutation and sign, so the estimate
//! is first matched to the truth by a maximum-weight assignment on
//! `|A*^T A_hat|`, then each matched column's sign is read off the inner
//! product.

use std::fmt;

use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Dictionary;
use crate::spectral;

/// Entries at or below this magnitude count as zero when comparing supports.
pub const SUPPORT_ZERO_TOL: f64 = 1e-12;

/// Recovery threshold on the Frobenius error for noiseless runs.
pub const NOISELESS_THRESHOLD: f64 = 1e-4;
/// Recovery threshold on the Frobenius error for noisy runs.
pub const NOISY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    /// `perm[i]` is the estimated atom matched to true atom `i`.
    pub perm: Vec<usize>,
    /// Sign applied to `est[perm[i]]`.
    pub signs: Vec<f64>,
    pub total_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub perm: Vec<usize>,
    pub signs: Vec<f64>,
    pub fro_error: f64,
    pub max_col_error: f64,
    pub column_errors: Vec<f64>,
    pub spectral_ratio: f64,
    pub support_exact_frac: f64,
    pub recovered: bool,
    pub threshold_used: f64,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "fro_error,max_col_error,spectral_ratio,support_frac,recovered";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.fro_error, self.max_col_error, self.spectral_ratio, self.support_exact_frac, self.recovered
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.csv_row())
    }
}

/// Maximum-weight perfect matching on a square weight matrix.
///
/// Returns `assign` with row `i` matched to column `assign[i]`. This is the
/// O(m^3) potential-based Kuhn-Munkres method run on the negated weights.
pub fn max_weight_assignment(weights: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    let (rows, cols) = weights.dim();
    if rows != cols {
        return Err(Error::dims(format!("weight matrix must be square, got {rows}x{cols}")));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::dims("weight matrix has non-finite entries"));
    }
    let n = rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    let cost = |i: usize, j: usize| -weights[[i - 1, j - 1]];
    // 1-based arrays; index 0 is the virtual start column.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[row_of[j] - 1] = j - 1;
    }
    Ok(assign)
}

fn check_dims(truth: ArrayView2<'_, f64>, est: ArrayView2<'_, f64>) -> Result<()> {
    if truth.dim() != est.dim() {
        return Err(Error::dims(format!(
            "truth is {:?} but the estimate is {:?}",
            truth.dim(),
            est.dim()
        )));
    }
    Ok(())
}

/// Matches estimated atoms to true atoms, up to sign.
pub fn match_atoms(truth: &Dictionary, est: &Dictionary) -> Result<MatchResult> {
    match_views(truth.entries().view(), est.entries().view())
}

fn match_views(truth: ArrayView2<'_, f64>, est: ArrayView2<'_, f64>) -> Result<MatchResult> {
    check_dims(truth, est)?;
    let inner = truth.t().dot(&est);
    let weights = inner.mapv(f64::abs);
    let perm = max_weight_assignment(weights.view())?;
    let signs = perm
        .iter()
        .enumerate()
        .map(|(i, &j)| if inner[[i, j]] < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let total_weight = perm.iter().enumerate().map(|(i, &j)| weights[[i, j]]).sum();
    Ok(MatchResult {
        perm,
        signs,
        total_weight,
    })
}

/// Reorders and flips the columns of `est` so column `i` lines up with
/// true atom `i`.
pub fn align(est: ArrayView2<'_, f64>, matching: &MatchResult) -> Array2<f64> {
    let mut out = Array2::zeros(est.raw_dim());
    for (i, (&j, &s)) in matching.perm.iter().zip(&matching.signs).enumerate() {
        out.column_mut(i).assign(&(&est.column(j) * s));
    }
    out
}

fn column_errors(truth: ArrayView2<'_, f64>, aligned: &Array2<f64>) -> Vec<f64> {
    let diff = aligned - &truth;
    spectral::column_norms(diff.view()).to_vec()
}

/// Largest column error after alignment.
pub fn max_column_error(truth: ArrayView2<'_, f64>, est: ArrayView2<'_, f64>) -> Result<f64> {
    let matching = match_views(truth, est)?;
    let aligned = align(est, &matching);
    Ok(column_errors(truth, &aligned).into_iter().fold(0.0, f64::max))
}

fn support_of(col: ndarray::ArrayView1<'_, f64>) -> Vec<usize> {
    col.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > SUPPORT_ZERO_TOL)
        .map(|(i, _)| i)
        .collect()
}

/// Aligns `est` to `truth` and computes every metric.
pub fn report(truth: &Dictionary, est: &Dictionary, threshold: f64) -> Result<EvalReport> {
    let (t, e) = (truth.entries().view(), est.entries().view());
    let matching = match_views(t, e)?;
    let aligned = align(e, &matching);
    let diff = &aligned - &t;
    let fro_error = spectral::frobenius(diff.view());
    let column_errors = column_errors(t, &aligned);
    let max_col_error = column_errors.iter().copied().fold(0.0, f64::max);
    let truth_norm = spectral::spectral_norm(t)?;
    let spectral_ratio = if truth_norm > 0.0 {
        spectral::spectral_norm(diff.view())? / truth_norm
    } else {
        spectral::spectral_norm(diff.view())?
    };
    let m = t.ncols();
    let exact = (0..m)
        .filter(|&i| support_of(t.column(i)) == support_of(aligned.column(i)))
        .count();
    let support_exact_frac = if m == 0 { 1.0 } else { exact as f64 / m as f64 };
    Ok(EvalReport {
        perm: matching.perm,
        signs: matching.signs,
        fro_error,
        max_col_error,
        column_errors,
        spectral_ratio,
        support_exact_frac,
        recovered: fro_error < threshold,
        threshold_used: threshold,
    })
}
