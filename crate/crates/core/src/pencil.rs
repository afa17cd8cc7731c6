//! Regularity and index analysis of square matrix pencils `(E, A)`.
//!
//! The quasi-Weierstrass split is computed from the two Wong sequences
//!
//! ```text
//! V_0 = R^n,  V_{i+1} = A^{-1}(E V_i)      -> V*, dim d
//! W_0 = {0},  W_{i+1} = E^{-1}(A W_i)      -> W*, dim a
//! ```
//!
//! with every rank decision made by singular value thresholding on the
//! norm-balanced pencil. With `T = [V*, W*]` and `S = [E V*, A W*]^{-1}`
//! the pencil becomes `(diag(I, N), diag(J, I))`; the number of strict
//! increases of `W_i` is the nilpotency index of `N`. `J` is brought to
//! real Schur form and `N` comes out strictly upper triangular because the
//! basis of `W*` is ordered along the chain.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Default relative tolerance for rank and regularity decisions.
pub const DEFAULT_TOL: f64 = 1e-10;

const SAMPLE_PHASE: f64 = 0.318_309_886_183_790_7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PencilRepr", into = "PencilRepr")]
pub struct MatrixPencil {
    e: DMatrix<f64>,
    a: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct PencilRepr {
    #[serde(rename = "E")]
    e: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
}

impl TryFrom<PencilRepr> for MatrixPencil {
    type Error = Error;
    fn try_from(r: PencilRepr) -> Result<Self> {
        MatrixPencil::new(linalg::from_rows(&r.e, "E")?, linalg::from_rows(&r.a, "A")?)
    }
}

impl From<MatrixPencil> for PencilRepr {
    fn from(p: MatrixPencil) -> Self {
        PencilRepr {
            e: linalg::to_rows(&p.e),
            a: linalg::to_rows(&p.a),
        }
    }
}

impl MatrixPencil {
    pub fn new(e: DMatrix<f64>, a: DMatrix<f64>) -> Result<Self> {
        if !e.is_square() || e.shape() != a.shape() {
            return Err(Error::Shape(format!(
                "pencil needs equal square matrices, got {:?} and {:?}",
                e.shape(),
                a.shape()
            )));
        }
        if e.iter().chain(a.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("pencil has non-finite entries".into()));
        }
        Ok(MatrixPencil { e, a })
    }

    pub fn from_row_slices(n: usize, e: &[f64], a: &[f64]) -> Result<Self> {
        if e.len() != n * n || a.len() != n * n {
            return Err(Error::Shape(format!("expected {} entries", n * n)));
        }
        Self::new(
            DMatrix::from_row_slice(n, n, e),
            DMatrix::from_row_slice(n, n, a),
        )
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    /// `det(s E - A)` for complex `s`.
    pub fn det_at(&self, s: Complex64) -> Complex64 {
        let n = self.dim();
        if n == 0 {
            return Complex64::new(1.0, 0.0);
        }
        let m = DMatrix::from_fn(n, n, |r, c| {
            s * Complex64::new(self.e[(r, c)], 0.0) - Complex64::new(self.a[(r, c)], 0.0)
        });
        m.determinant()
    }

    /// `(P E Q, P A Q)`.
    pub fn transformed(&self, p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<Self> {
        MatrixPencil::new(p * &self.e * q, p * &self.a * q)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetSample {
    /// Sample point `[re, im]`.
    pub s: [f64; 2],
    /// `det(sE - A)` as `[re, im]`.
    pub det: [f64; 2],
    /// Magnitude a regular pencil must exceed at some sample point.
    pub threshold: f64,
}

/// `n + 1` determinant samples on a circle of radius `|A|_F / |E|_F`.
pub fn det_samples(p: &MatrixPencil, tol: f64) -> Vec<DetSample> {
    let n = p.dim();
    let ne = p.e.norm();
    let na = p.a.norm();
    let mut radius = na / ne;
    if !radius.is_finite() || radius == 0.0 {
        radius = 1.0;
    }
    let scale = (ne * radius + na).powi(n as i32);
    (0..=n)
        .map(|k| {
            let theta = std::f64::consts::TAU * (k as f64 + SAMPLE_PHASE) / (n + 1) as f64;
            let s = Complex64::from_polar(radius, theta);
            let det = p.det_at(s);
            DetSample {
                s: [s.re, s.im],
                det: [det.re, det.im],
                threshold: tol * scale,
            }
        })
        .collect()
}

/// Whether `det(sE - A)` is not the zero polynomial.
///
/// A polynomial of degree at most `n` that vanishes at `n + 1` distinct
/// points is zero, so one sample above the threshold decides regularity.
pub fn is_regular(p: &MatrixPencil, tol: f64) -> bool {
    if p.dim() == 0 {
        return true;
    }
    det_samples(p, tol)
        .iter()
        .any(|s| Complex64::new(s.det[0], s.det[1]).norm() > s.threshold)
}

/// Quasi-Weierstrass decomposition `S E T = diag(I_d, N)`,
/// `S A T = diag(J, I_a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeierstrassForm {
    /// Left transformation `S`.
    pub left: DMatrix<f64>,
    /// Right transformation `T`; its first `n_diff` columns span the
    /// differential subspace.
    pub right: DMatrix<f64>,
    /// `J`, real Schur form.
    pub dynamics: DMatrix<f64>,
    /// `N`, strictly upper triangular.
    pub nilpotent: DMatrix<f64>,
    pub n_diff: usize,
    pub n_alg: usize,
    /// Nilpotency index of `N`.
    pub index: usize,
    pub residual_e: f64,
    pub residual_a: f64,
    pub cond_left: f64,
    pub cond_right: f64,
}

impl WeierstrassForm {
    pub fn dim(&self) -> usize {
        self.n_diff + self.n_alg
    }

    /// Strangeness index of the pencil: `index - 1` when algebraic
    /// variables exist, 0 otherwise.
    pub fn strangeness_index(&self) -> usize {
        self.index.saturating_sub(1)
    }

    /// `T^{-1}`.
    pub fn right_inverse(&self) -> DMatrix<f64> {
        self.right
            .clone()
            .try_inverse()
            .unwrap_or_else(|| DMatrix::from_element(self.dim(), self.dim(), f64::NAN))
    }

    pub fn nilpotent_power(&self, j: usize) -> DMatrix<f64> {
        let mut p = DMatrix::identity(self.n_alg, self.n_alg);
        for _ in 0..j {
            p = &self.nilpotent * p;
        }
        p
    }
}

fn block_diag(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let (d, a) = (top.nrows(), bottom.nrows());
    let mut m = DMatrix::zeros(d + a, d + a);
    m.view_mut((0, 0), (d, d)).copy_from(top);
    m.view_mut((d, d), (a, a)).copy_from(bottom);
    m
}

/// Frobenius residuals `(|S E T - diag(I, N)|, |S A T - diag(J, I)|)`.
pub fn equivalence_residual(p: &MatrixPencil, w: &WeierstrassForm) -> (f64, f64) {
    let e_target = block_diag(&DMatrix::identity(w.n_diff, w.n_diff), &w.nilpotent);
    let a_target = block_diag(&w.dynamics, &DMatrix::identity(w.n_alg, w.n_alg));
    let se = &w.left * &p.e * &w.right - e_target;
    let sa = &w.left * &p.a * &w.right - a_target;
    (se.norm(), sa.norm())
}

fn ill(retained: f64, discarded: f64) -> Error {
    Error::IllConditioned {
        retained,
        discarded,
    }
}

/// Algebraic Wong chain: orthonormal basis of `W*` ordered by chain level,
/// plus the number of strict increases.
fn algebraic_chain(e: &DMatrix<f64>, a: &DMatrix<f64>, tol: f64) -> Result<(DMatrix<f64>, usize)> {
    let n = e.nrows();
    let mut basis = DMatrix::<f64>::zeros(n, 0);
    let mut steps = 0;
    for _ in 0..=n {
        let image = linalg::range(&(a * &basis), tol)?;
        let next = linalg::preimage(e, &image, tol)?;
        let (have, got) = (basis.ncols(), next.ncols());
        if got == have {
            return Ok((basis, steps));
        }
        if got < have {
            return Err(ill(f64::NAN, f64::NAN));
        }
        // New directions of W_{i+1} orthogonal to W_i.
        let projected = &next - &basis * (basis.transpose() * &next);
        let svd = linalg::sorted_svd(&projected);
        let ext = svd.u.columns(0, got - have).into_owned();
        let mut grown = DMatrix::zeros(n, got);
        grown.view_mut((0, 0), (n, have)).copy_from(&basis);
        grown.view_mut((0, have), (n, got - have)).copy_from(&ext);
        basis = grown;
        steps += 1;
    }
    Err(ill(f64::NAN, f64::NAN))
}

/// Differential Wong chain limit `V*`.
fn differential_limit(e: &DMatrix<f64>, a: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let n = e.nrows();
    let mut basis = DMatrix::<f64>::identity(n, n);
    for _ in 0..=n {
        let image = linalg::range(&(e * &basis), tol)?;
        let next = linalg::preimage(a, &image, tol)?;
        if next.ncols() == basis.ncols() {
            return Ok(next);
        }
        basis = next;
    }
    Err(ill(f64::NAN, f64::NAN))
}

pub fn weierstrass(p: &MatrixPencil, tol: f64) -> Result<WeierstrassForm> {
    let n = p.dim();
    if n == 0 {
        let empty = DMatrix::zeros(0, 0);
        return Ok(WeierstrassForm {
            left: empty.clone(),
            right: empty.clone(),
            dynamics: empty.clone(),
            nilpotent: empty,
            n_diff: 0,
            n_alg: 0,
            index: 0,
            residual_e: 0.0,
            residual_a: 0.0,
            cond_left: 1.0,
            cond_right: 1.0,
        });
    }
    if !is_regular(p, tol) {
        return Err(Error::SingularPencil);
    }

    let scale_of = |m: &DMatrix<f64>| {
        let s = linalg::spectral_norm(m);
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };
    let alpha = scale_of(&p.e);
    let beta = scale_of(&p.a);
    let e = &p.e / alpha;
    let a = &p.a / beta;

    let (w_basis, index) = algebraic_chain(&e, &a, tol)?;
    let mut v_basis = differential_limit(&e, &a, tol)?;
    let (d, na) = (v_basis.ncols(), w_basis.ncols());
    if d + na != n {
        return Err(ill(f64::NAN, f64::NAN));
    }

    let assemble = |v: &DMatrix<f64>| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let mut t = DMatrix::zeros(n, n);
        t.view_mut((0, 0), (n, d)).copy_from(v);
        t.view_mut((0, d), (n, na)).copy_from(&w_basis);
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (n, d)).copy_from(&(&e * v));
        m.view_mut((0, d), (n, na)).copy_from(&(&a * &w_basis));
        let sv = linalg::sorted_svd(&m).values;
        let smallest = *sv.last().unwrap();
        if smallest <= tol * sv[0] {
            return Err(ill(smallest, tol * sv[0]));
        }
        let s = m.try_inverse().ok_or_else(|| ill(0.0, 0.0))?;
        Ok((s, t))
    };

    let (mut s, mut t) = assemble(&v_basis)?;
    let mut dynamics = (&s * &a * &t).view((0, 0), (d, d)).into_owned();
    // Real Schur is cosmetic here; keep the unreduced block if QR stalls.
    if d > 0 {
        if let Some(schur) = dynamics.clone().try_schur(f64::EPSILON, 10_000) {
            let (q, upper) = schur.unpack();
            v_basis = &v_basis * &q;
            (s, t) = assemble(&v_basis)?;
            dynamics = upper;
        }
    }
    let mut nilpotent = (&s * &e * &t).view((d, d), (na, na)).into_owned();
    for r in 0..na {
        for c in 0..=r {
            nilpotent[(r, c)] = 0.0;
        }
    }

    let mut row_scale = DVector::from_element(n, 1.0 / beta);
    row_scale.rows_mut(0, d).fill(1.0 / alpha);
    let left = DMatrix::from_diagonal(&row_scale) * s;
    let dynamics = dynamics * (beta / alpha);
    let nilpotent = nilpotent * (alpha / beta);

    let mut w = WeierstrassForm {
        cond_left: linalg::condition(&left),
        cond_right: linalg::condition(&t),
        left,
        right: t,
        dynamics,
        nilpotent,
        n_diff: d,
        n_alg: na,
        index,
        residual_e: 0.0,
        residual_a: 0.0,
    };
    let (re, ra) = equivalence_residual(p, &w);
    w.residual_e = re;
    w.residual_a = ra;
    log::debug!(
        "weierstrass: d={d} a={na} nu={index} residuals=({re:e}, {ra:e}) cond(S)={:e} cond(T)={:e}",
        w.cond_left,
        w.cond_right
    );
    Ok(w)
}

/// Differentiation index (nilpotency index of `N`).
pub fn diff_index(p: &MatrixPencil, tol: f64) -> Result<usize> {
    weierstrass(p, tol).map(|w| w.index)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PencilReport {
    pub regular: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition: Option<[f64; 2]>,
    pub det_samples: Vec<DetSample>,
    pub tolerances: Tolerances,
}

/// Regularity plus, for regular pencils, the `(d, a, nu)` split.
pub fn analyze(p: &MatrixPencil, tol: f64) -> Result<PencilReport> {
    let det_samples = det_samples(p, tol);
    let regular = is_regular(p, tol);
    let mut report = PencilReport {
        regular,
        d: None,
        a: None,
        nu: None,
        residuals: None,
        condition: None,
        det_samples,
        tolerances: Tolerances { tol },
    };
    if regular {
        let w = weierstrass(p, tol)?;
        report.d = Some(w.n_diff);
        report.a = Some(w.n_alg);
        report.nu = Some(w.index);
        report.residuals = Some([w.residual_e, w.residual_a]);
        report.condition = Some([w.cond_left, w.cond_right]);
    }
    Ok(report)
}
