//! Rank-revealing subspace helpers built on the SVD.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Singular values (descending) with the matching left and right vectors.
pub(crate) struct SortedSvd {
    pub values: Vec<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn sorted_svd(m: &DMatrix<f64>) -> SortedSvd {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return SortedSvd {
            values: vec![0.0; if rows < cols { cols } else { 0 }],
            u: DMatrix::identity(rows, rows),
            v: DMatrix::identity(cols, cols),
        };
    }
    // nalgebra's bidiagonal SVD mis-deflates exact zero singular values,
    // so the decomposition is delegated to faer.
    let fm = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = fm.svd().expect("SVD of a finite matrix converges");
    let s = svd.S().column_vector();
    let k = rows.min(cols);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let (fu, fv) = (svd.U(), svd.V());
    let permuted = |c: usize| if c < k { order[c] } else { c };
    let mut values: Vec<f64> = order.iter().map(|&i| s[i]).collect();
    // Wide matrices: report the trailing zero values of the square padding.
    values.resize(cols.max(k), 0.0);
    let u = DMatrix::from_fn(rows, rows, |r, c| fu[(r, permuted(c))]);
    let v = DMatrix::from_fn(cols, cols, |r, c| fv[(r, permuted(c))]);
    SortedSvd { values, u, v }
}

/// Moore-Penrose inverse, dropping singular values at or below `eps`.
pub(crate) fn pseudo_inverse(m: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let svd = sorted_svd(m);
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (i, &s) in svd.values.iter().enumerate().take(m.nrows().min(m.ncols())) {
        if s > eps {
            out += svd.v.column(i) * svd.u.column(i).transpose() / s;
        }
    }
    out
}

/// Number of singular values above `threshold`; fails when the split is
/// not separated by at least a factor 10.
pub(crate) fn decide_rank(values: &[f64], threshold: f64) -> Result<usize> {
    let rank = values.iter().take_while(|&&s| s > threshold).count();
    if rank > 0 && rank < values.len() {
        let retained = values[rank - 1];
        let discarded = values[rank];
        log::debug!(
            "rank {rank}: retained {retained:e}, discarded {discarded:e}, threshold {threshold:e}"
        );
        if retained < 10.0 * discarded {
            return Err(Error::IllConditioned {
                retained,
                discarded,
            });
        }
    }
    Ok(rank)
}

/// Orthonormal basis of the column space.
pub(crate) fn range(m: &DMatrix<f64>, threshold: f64) -> Result<DMatrix<f64>> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Ok(DMatrix::zeros(m.nrows(), 0));
    }
    let svd = sorted_svd(m);
    let r = decide_rank(&svd.values, threshold)?;
    Ok(svd.u.columns(0, r).into_owned())
}

/// Orthonormal basis of the kernel.
pub(crate) fn kernel(m: &DMatrix<f64>, threshold: f64) -> Result<DMatrix<f64>> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return Ok(DMatrix::identity(n, n));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let svd = sorted_svd(m);
    let r = decide_rank(&svd.values, threshold)?;
    Ok(svd.v.columns(r, n - r).into_owned())
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns `q`.
pub(crate) fn complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    kernel(&q.transpose(), 0.5).expect("orthonormal input has a clean spectrum")
}

/// `{x : a x in span(u)}` for orthonormal `u`.
pub(crate) fn preimage(a: &DMatrix<f64>, u: &DMatrix<f64>, threshold: f64) -> Result<DMatrix<f64>> {
    let perp = complement(u);
    kernel(&(perp.transpose() * a), threshold)
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    sorted_svd(m).values.first().copied().unwrap_or(0.0)
}

/// 2-norm condition number (infinite when singular).
pub(crate) fn condition(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let v = sorted_svd(m).values;
    let min = *v.last().unwrap();
    if min == 0.0 {
        f64::INFINITY
    } else {
        v[0] / min
    }
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub(crate) fn from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Shape(format!("{what}: ragged rows")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Data(format!("{what}: non-finite entry")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}
