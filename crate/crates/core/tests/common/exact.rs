//! Exact rational arithmetic: regularity and Wong-sequence index of small
//! integer pencils.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Q = BigRational;
pub type Mat = Vec<Vec<Q>>;

pub fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

pub fn ratio(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn from_ints(n: usize, v: &[i64]) -> Mat {
    v.chunks(n).map(|r| r.iter().map(|x| q(*x)).collect()).collect()
}

pub fn to_f64(m: &Mat) -> nalgebra::DMatrix<f64> {
    use num_traits::ToPrimitive;
    let r = m.len();
    let c = if r == 0 { 0 } else { m[0].len() };
    nalgebra::DMatrix::from_fn(r, c, |i, j| m[i][j].to_f64().unwrap())
}

fn mul(a: &Mat, b: &Mat, inner: usize, cols: usize) -> Mat {
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).fold(Q::zero(), |acc, k| acc + &row[k] * &b[k][j]))
                .collect()
        })
        .collect()
}

/// Reduced row echelon form and pivot columns.
pub fn rref(mut m: Mat) -> (Mat, Vec<usize>) {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].clone().recip();
        for x in m[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let delta = &f * &m[r][j];
                    m[i][j] = &m[i][j] - delta;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows {
            break;
        }
    }
    (m, pivots)
}

/// Basis of the null space of an `rows x cols` matrix, as column vectors.
pub fn nullspace(m: &Mat, cols: usize) -> Vec<Vec<Q>> {
    let (r, pivots) = rref(m.clone());
    (0..cols)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut v = vec![Q::zero(); cols];
            v[free] = Q::one();
            for (row, &p) in pivots.iter().enumerate() {
                v[p] = -r[row][free].clone();
            }
            v
        })
        .collect()
}

/// Rank of a set of column vectors.
pub fn rank_of(vectors: &[Vec<Q>]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    rref(vectors.to_vec()).1.len()
}

pub fn det(mut m: Mat) -> Q {
    let n = m.len();
    let mut d = Q::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !m[i][c].is_zero()) else {
            return Q::zero();
        };
        if p != c {
            m.swap(p, c);
            d = -d;
        }
        d = &d * &m[c][c];
        for i in c + 1..n {
            let f = &m[i][c] / &m[c][c];
            for j in c..n {
                let delta = &f * &m[c][j];
                m[i][j] = &m[i][j] - delta;
            }
        }
    }
    d
}

/// `det(sE - A)` has degree at most `n`, so it vanishes identically iff
/// it vanishes at `n + 1` distinct integers.
pub fn is_regular(e: &Mat, a: &Mat) -> bool {
    let n = e.len();
    (0..=n as i64).any(|s| {
        let sq = q(s);
        let m: Mat = (0..n)
            .map(|i| (0..n).map(|j| &sq * &e[i][j] - &a[i][j]).collect())
            .collect();
        !det(m).is_zero()
    })
}

/// Preimage `{x : M x in span(basis)}` of a subspace under `M`.
fn preimage(m: &Mat, basis: &[Vec<Q>]) -> Vec<Vec<Q>> {
    let n = m.len();
    let k = basis.len();
    // [M | -B] [x; y] = 0
    let stacked: Mat = (0..n)
        .map(|i| {
            let mut row = m[i].clone();
            row.extend(basis.iter().map(|b| -b[i].clone()));
            row
        })
        .collect();
    let kernel = nullspace(&stacked, n + k);
    let xs: Vec<Vec<Q>> = kernel.into_iter().map(|v| v[..n].to_vec()).collect();
    independent(xs)
}

fn independent(vs: Vec<Vec<Q>>) -> Vec<Vec<Q>> {
    if vs.is_empty() {
        return vs;
    }
    let (r, pivots) = rref(vs);
    r.into_iter().take(pivots.len()).collect()
}

/// Differentiation index of a regular pencil from the second Wong
/// sequence `W_0 = 0`, `W_{i+1} = E^{-1}(A W_i)`: the first `k` with
/// `W_k = W_{k+1}`. `None` for singular pencils.
pub fn wong_index(e: &Mat, a: &Mat) -> Option<usize> {
    if !is_regular(e, a) {
        return None;
    }
    let n = e.len();
    let mut w: Vec<Vec<Q>> = Vec::new();
    for k in 0..=n {
        let image: Vec<Vec<Q>> = w
            .iter()
            .map(|v| {
                let col: Mat = v.iter().map(|x| vec![x.clone()]).collect();
                mul(a, &col, n, 1).into_iter().map(|r| r[0].clone()).collect()
            })
            .collect();
        let next = preimage(e, &image);
        if rank_of(&next) == rank_of(&w) {
            return Some(k);
        }
        w = next;
    }
    unreachable!("Wong sequence must stabilise within n steps")
}

pub fn max_abs(m: &Mat) -> Q {
    m.iter()
        .flatten()
        .map(|x| x.abs())
        .fold(Q::zero(), |a, b| if b > a { b } else { a })
}
