//! Rank transforms: pseudo-observations and Kendall's tau.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::RowMatrix;

/// An n x d sample of values in the open unit cube.
///
/// Samples built by [`pseudo_observations`] have every column equal to a
/// permutation of `{1/(n+1), ..., n/(n+1)}`. [`PseudoSample::from_uniforms`]
/// accepts any interior sample (for example exact draws from a copula).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PseudoSample {
    u: RowMatrix,
}

impl PseudoSample {
    pub fn from_uniforms(u: RowMatrix) -> Result<Self> {
        if u.nrows() < 2 {
            return Err(Error::RowCountTooSmall(u.nrows()));
        }
        if u.ncols() < 2 {
            return Err(Error::ShapeMismatch(format!(
                "a copula sample needs d >= 2 columns, got {}",
                u.ncols()
            )));
        }
        if let Some(&v) = u.as_slice().iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
            return Err(Error::PointOnBoundary { value: v });
        }
        Ok(Self { u })
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn dim(&self) -> usize {
        self.u.ncols()
    }

    pub fn matrix(&self) -> &RowMatrix {
        &self.u
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.u.row(i)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.u.column(j)
    }

    /// Average of the pairwise sample Kendall's taus (the plain tau when d = 2).
    pub fn mean_pairwise_tau(&self) -> Result<f64> {
        let d = self.dim();
        let cols: Vec<Vec<f64>> = (0..d).map(|j| self.column(j)).collect();
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for a in 0..d {
            for b in (a + 1)..d {
                sum += kendall_tau(&cols[a], &cols[b])?;
                pairs += 1;
            }
        }
        Ok(sum / pairs as f64)
    }
}

/// Permutation sorting `values` ascending, plus the number of tied neighbours.
fn sorted_order(values: &[f64]) -> Result<(Vec<usize>, usize)> {
    if let Some(row) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue {
            row: row + 1,
            col: "residual".to_string(),
        });
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let ties = idx
        .windows(2)
        .filter(|w| values[w[0]] == values[w[1]])
        .count();
    Ok((idx, ties))
}

/// Ranks of one column (1-based, right-continuous ECDF times n).
pub fn ranks(values: &[f64]) -> Result<Vec<usize>> {
    let (order, ties) = sorted_order(values)?;
    if ties > 0 {
        return Err(Error::TiesDetected { count: ties });
    }
    let mut r = vec![0usize; values.len()];
    for (k, &i) in order.iter().enumerate() {
        r[i] = k + 1;
    }
    Ok(r)
}

/// Rescaled ranks `rank / (n + 1)` column by column.
pub fn pseudo_observations(residuals: &RowMatrix) -> Result<PseudoSample> {
    let n = residuals.nrows();
    let d = residuals.ncols();
    if n < 2 {
        return Err(Error::RowCountTooSmall(n));
    }
    let denom = n as f64 + 1.0;
    let mut u = RowMatrix::zeros(n, d);
    for j in 0..d {
        let r = ranks(&residuals.column(j))?;
        for (i, rk) in r.into_iter().enumerate() {
            u.set(i, j, rk as f64 / denom);
        }
    }
    PseudoSample::from_uniforms(u)
}

pub fn pseudo_observations_from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<PseudoSample> {
    pseudo_observations(&RowMatrix::from_columns(columns)?)
}

/// Sample Kendall's tau in O(n log n): sort by `u`, then count the inversions
/// of `v` with a bottom-up merge sort.
pub fn kendall_tau(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let n = u.len();
    if n < 2 {
        return Err(Error::RowCountTooSmall(n));
    }
    let (order, ties_u) = sorted_order(u)?;
    let (_, ties_v) = sorted_order(v)?;
    if ties_u + ties_v > 0 {
        return Err(Error::TiesDetected {
            count: ties_u + ties_v,
        });
    }
    let mut seq: Vec<f64> = order.iter().map(|&i| v[i]).collect();
    let discordant = count_inversions(&mut seq);
    let pairs = (n as u64) * (n as u64 - 1) / 2;
    Ok((pairs as f64 - 2.0 * discordant as f64) / pairs as f64)
}

/// Sorts `a` ascending and returns the number of inverted pairs.
fn count_inversions(a: &mut [f64]) -> u64 {
    let n = a.len();
    let mut buf = a.to_vec();
    let mut inversions = 0u64;
    let mut width = 1;
    while width < n {
        let mut start = 0;
        while start < n {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            let (mut i, mut j, mut k) = (start, mid, start);
            while i < mid && j < end {
                if a[i] <= a[j] {
                    buf[k] = a[i];
                    i += 1;
                } else {
                    buf[k] = a[j];
                    j += 1;
                    inversions += (mid - i) as u64;
                }
                k += 1;
            }
            buf[k..k + (mid - i)].copy_from_slice(&a[i..mid]);
            k += mid - i;
            buf[k..k + (end - j)].copy_from_slice(&a[j..end]);
            start = end;
        }
        a.copy_from_slice(&buf);
        width *= 2;
    }
    inversions
}
