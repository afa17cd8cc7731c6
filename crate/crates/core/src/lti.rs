//! Linear time-invariant descriptor subsystems, their direct and delayed
//! coupling, and the explicit solution of the algebraic part.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ddae::Classification;
use crate::error::{Error, Result};
use crate::forcing::ForcingFunction;
use crate::linalg;
use crate::pencil::{self, MatrixPencil, WeierstrassForm};

/// `E z' = A z + B u + f(t)`, `y = C z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LtiRepr", into = "LtiRepr")]
pub struct LtiDescriptor {
    e: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    f: ForcingFunction,
}

#[derive(Serialize, Deserialize)]
struct LtiRepr {
    #[serde(rename = "E")]
    e: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B", default)]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C", default)]
    c: Vec<Vec<f64>>,
    #[serde(default)]
    f: Option<ForcingFunction>,
}

impl TryFrom<LtiRepr> for LtiDescriptor {
    type Error = Error;
    fn try_from(r: LtiRepr) -> Result<Self> {
        let e = linalg::from_rows(&r.e, "E")?;
        let a = linalg::from_rows(&r.a, "A")?;
        let n = e.nrows();
        let mut b = linalg::from_rows(&r.b, "B")?;
        if r.b.is_empty() {
            b = DMatrix::zeros(n, 0);
        }
        let mut c = linalg::from_rows(&r.c, "C")?;
        if r.c.is_empty() {
            c = DMatrix::zeros(0, n);
        }
        let f = r.f.unwrap_or_else(|| ForcingFunction::zeros(n));
        LtiDescriptor::new(e, a, b, c, f)
    }
}

impl From<LtiDescriptor> for LtiRepr {
    fn from(s: LtiDescriptor) -> Self {
        LtiRepr {
            e: linalg::to_rows(&s.e),
            a: linalg::to_rows(&s.a),
            b: linalg::to_rows(&s.b),
            c: linalg::to_rows(&s.c),
            f: Some(s.f),
        }
    }
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data(format!("{what} has non-finite entries")));
    }
    Ok(())
}

impl LtiDescriptor {
    pub fn new(
        e: DMatrix<f64>,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        f: ForcingFunction,
    ) -> Result<Self> {
        let n = e.nrows();
        if !e.is_square() || a.shape() != (n, n) {
            return Err(Error::Shape(format!(
                "E and A must be equal square matrices, got {:?} and {:?}",
                e.shape(),
                a.shape()
            )));
        }
        if b.nrows() != n {
            return Err(Error::Shape(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::Shape(format!("C has {} columns, expected {n}", c.ncols())));
        }
        if f.dim() != n {
            return Err(Error::Shape(format!("forcing has dimension {}, expected {n}", f.dim())));
        }
        for (m, what) in [(&e, "E"), (&a, "A"), (&b, "B"), (&c, "C")] {
            check_finite(m, what)?;
        }
        Ok(LtiDescriptor { e, a, b, c, f })
    }

    /// Unforced system.
    pub fn homogeneous(
        e: DMatrix<f64>,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
    ) -> Result<Self> {
        let n = e.nrows();
        Self::new(e, a, b, c, ForcingFunction::zeros(n))
    }

    pub fn with_forcing(mut self, f: ForcingFunction) -> Result<Self> {
        if f.dim() != self.dim() {
            return Err(Error::Shape("forcing dimension mismatch".into()));
        }
        self.f = f;
        Ok(self)
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn forcing(&self) -> &ForcingFunction {
        &self.f
    }

    pub fn dim(&self) -> usize {
        self.e.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn pencil(&self) -> MatrixPencil {
        MatrixPencil::new(self.e.clone(), self.a.clone()).expect("validated at construction")
    }
}

/// `E z'(t) = A0 z(t) + A1 z(t - tau) + f(t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LinearDdaeRepr", into = "LinearDdaeRepr")]
pub struct LinearDdae {
    e: DMatrix<f64>,
    a0: DMatrix<f64>,
    a1: DMatrix<f64>,
    tau: f64,
    f: ForcingFunction,
}

#[derive(Serialize, Deserialize)]
struct LinearDdaeRepr {
    #[serde(rename = "E")]
    e: Vec<Vec<f64>>,
    #[serde(rename = "A0")]
    a0: Vec<Vec<f64>>,
    #[serde(rename = "A1")]
    a1: Vec<Vec<f64>>,
    tau: f64,
    #[serde(default)]
    f: Option<ForcingFunction>,
}

impl TryFrom<LinearDdaeRepr> for LinearDdae {
    type Error = Error;
    fn try_from(r: LinearDdaeRepr) -> Result<Self> {
        let e = linalg::from_rows(&r.e, "E")?;
        let f = r.f.unwrap_or_else(|| ForcingFunction::zeros(e.nrows()));
        LinearDdae::new(
            e,
            linalg::from_rows(&r.a0, "A0")?,
            linalg::from_rows(&r.a1, "A1")?,
            r.tau,
            f,
        )
    }
}

impl From<LinearDdae> for LinearDdaeRepr {
    fn from(d: LinearDdae) -> Self {
        LinearDdaeRepr {
            e: linalg::to_rows(&d.e),
            a0: linalg::to_rows(&d.a0),
            a1: linalg::to_rows(&d.a1),
            tau: d.tau,
            f: Some(d.f),
        }
    }
}

impl LinearDdae {
    pub fn new(
        e: DMatrix<f64>,
        a0: DMatrix<f64>,
        a1: DMatrix<f64>,
        tau: f64,
        f: ForcingFunction,
    ) -> Result<Self> {
        let n = e.nrows();
        if !e.is_square() || a0.shape() != (n, n) || a1.shape() != (n, n) {
            return Err(Error::Shape(format!(
                "E, A0, A1 must be equal square matrices, got {:?}, {:?}, {:?}",
                e.shape(),
                a0.shape(),
                a1.shape()
            )));
        }
        if f.dim() != n {
            return Err(Error::Shape(format!("forcing has dimension {}, expected {n}", f.dim())));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("delay must be positive, got {tau}")));
        }
        for (m, what) in [(&e, "E"), (&a0, "A0"), (&a1, "A1")] {
            check_finite(m, what)?;
        }
        Ok(LinearDdae { e, a0, a1, tau, f })
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }
    pub fn a0(&self) -> &DMatrix<f64> {
        &self.a0
    }
    pub fn a1(&self) -> &DMatrix<f64> {
        &self.a1
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn forcing(&self) -> &ForcingFunction {
        &self.f
    }
    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    /// The pencil `(E, A0)` of the associated delay-free DAE.
    pub fn pencil(&self) -> MatrixPencil {
        MatrixPencil::new(self.e.clone(), self.a0.clone()).expect("validated at construction")
    }
}

fn check_interconnect(s1: &LtiDescriptor, s2: &LtiDescriptor) -> Result<()> {
    if s1.inputs() != s2.outputs() || s2.inputs() != s1.outputs() {
        return Err(Error::DimensionMismatch(format!(
            "subsystem 1 has {} inputs and {} outputs, subsystem 2 has {} inputs and {} outputs",
            s1.inputs(),
            s1.outputs(),
            s2.inputs(),
            s2.outputs()
        )));
    }
    Ok(())
}

fn blocks(
    top_left: &DMatrix<f64>,
    top_right: &DMatrix<f64>,
    bottom_left: &DMatrix<f64>,
    bottom_right: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (n1, n2) = (top_left.nrows(), bottom_right.nrows());
    let mut m = DMatrix::zeros(n1 + n2, n1 + n2);
    m.view_mut((0, 0), (n1, n1)).copy_from(top_left);
    m.view_mut((0, n1), (n1, n2)).copy_from(top_right);
    m.view_mut((n1, 0), (n2, n1)).copy_from(bottom_left);
    m.view_mut((n1, n1), (n2, n2)).copy_from(bottom_right);
    m
}

/// Closed loop `u1 = y2`, `u2 = y1` without delay.
pub fn couple(s1: &LtiDescriptor, s2: &LtiDescriptor) -> Result<LtiDescriptor> {
    check_interconnect(s1, s2)?;
    let (n1, n2) = (s1.dim(), s2.dim());
    let z12 = DMatrix::zeros(n1, n2);
    let z21 = DMatrix::zeros(n2, n1);
    let e = blocks(&s1.e, &z12, &z21, &s2.e);
    let a = blocks(&s1.a, &(&s1.b * &s2.c), &(&s2.b * &s1.c), &s2.a);
    let n = n1 + n2;
    LtiDescriptor::new(
        e,
        a,
        DMatrix::zeros(n, 0),
        DMatrix::zeros(0, n),
        s1.f.stack(&s2.f),
    )
}

/// Hybrid coupling where subsystem 1 receives the output of subsystem 2
/// delayed by `tau`, written in the shifted form whose associated DAE
/// is block lower triangular.
pub fn hybrid_shifted(s1: &LtiDescriptor, s2: &LtiDescriptor, tau: f64) -> Result<LinearDdae> {
    check_interconnect(s1, s2)?;
    let (n1, n2) = (s1.dim(), s2.dim());
    let z11 = DMatrix::zeros(n1, n1);
    let z12 = DMatrix::zeros(n1, n2);
    let z21 = DMatrix::zeros(n2, n1);
    let z22 = DMatrix::zeros(n2, n2);
    let e = blocks(&s1.e, &z12, &z21, &s2.e);
    let a0 = blocks(&s1.a, &z12, &(&s2.b * &s1.c), &s2.a);
    let a1 = blocks(&z11, &(&s1.b * &s2.c), &z21, &z22);
    LinearDdae::new(e, a0, a1, tau, s1.f.stack(&s2.f))
}

/// `z_a(t) = -sum_{j < nu} N^j (B_a u^(j)(t) + f_a^(j)(t))`.
pub fn algebraic_solution(
    w: &WeierstrassForm,
    ba: &DMatrix<f64>,
    u: &ForcingFunction,
    fa: &ForcingFunction,
    t: f64,
) -> Result<DVector<f64>> {
    let na = w.n_alg;
    if ba.nrows() != na || ba.ncols() != u.dim() || fa.dim() != na {
        return Err(Error::DimensionMismatch(format!(
            "algebraic block has {na} rows; got B_a {:?}, u of dim {}, f_a of dim {}",
            ba.shape(),
            u.dim(),
            fa.dim()
        )));
    }
    let mut z = DVector::zeros(na);
    let mut power = DMatrix::identity(na, na);
    for j in 0..w.index {
        let term = ba * u.derivative(t, j)? + fa.derivative(t, j)?;
        z -= &power * term;
        power = &w.nilpotent * power;
    }
    Ok(z)
}

/// Whether `z0` satisfies the algebraic solution formula at `t0`.
pub fn is_consistent(
    sys: &LtiDescriptor,
    z0: &DVector<f64>,
    u: &ForcingFunction,
    t0: f64,
    tol: f64,
) -> Result<bool> {
    if z0.len() != sys.dim() || u.dim() != sys.inputs() {
        return Err(Error::DimensionMismatch("state or input dimension".into()));
    }
    let w = pencil::weierstrass(&sys.pencil(), pencil::DEFAULT_TOL)?;
    let d = w.n_diff;
    let n = sys.dim();
    let xi = w.right_inverse() * z0;
    let sb = &w.left * &sys.b;
    let ba = sb.rows(d, n - d).into_owned();
    let fa = sys.f.transform(&w.left)?.rows(d..n);
    let expected = algebraic_solution(&w, &ba, u, &fa, t0)?;
    let gap = (xi.rows(d, n - d) - &expected).amax();
    Ok(gap <= tol * (1.0 + expected.amax()))
}

/// Weierstrass data of `(E, A0)` together with the transformed delay
/// coupling of a linear DDAE.
#[derive(Clone, Debug)]
pub struct LinearStructure {
    pub form: WeierstrassForm,
    /// `S A1`.
    pub delayed_left: DMatrix<f64>,
    /// Highest `j` with `N^j (S A1 T)_alg != 0`, if any.
    pub highest_power: Option<usize>,
    pub classification: Classification,
}

pub fn linear_structure(d: &LinearDdae, tol: f64) -> Result<LinearStructure> {
    let form = pencil::weierstrass(&d.pencil(), tol)?;
    let delayed_left = &form.left * &d.a1;
    let transformed = &delayed_left * &form.right;
    let (nd, na) = (form.n_diff, form.n_alg);
    let alg = transformed.rows(nd, na).into_owned();
    let threshold = tol * (1.0 + linalg::spectral_norm(&d.a1));
    let mut highest_power = None;
    let mut power = alg;
    for j in 0..form.index {
        let size = linalg::max_abs(&power);
        log::debug!("delay coupling N^{j} block: max {size:e}, threshold {threshold:e}");
        if size > threshold {
            highest_power = Some(j);
        }
        power = &form.nilpotent * power;
    }
    let classification = match highest_power {
        None => Classification::Retarded,
        Some(k) => Classification::from_order(k + 1),
    };
    Ok(LinearStructure {
        form,
        delayed_left,
        highest_power,
        classification,
    })
}

/// Retarded, neutral or advanced type of a linear DDAE.
pub fn classify_linear(d: &LinearDdae, tol: f64) -> Result<Classification> {
    linear_structure(d, tol).map(|s| s.classification)
}

/// The hybrid pencil is regular exactly when both subsystem pencils are.
pub fn regularity_theorem_check(s1: &LtiDescriptor, s2: &LtiDescriptor, tau: f64, tol: f64) -> bool {
    let Ok(h) = hybrid_shifted(s1, s2, tau) else {
        return false;
    };
    let hybrid = pencil::is_regular(&h.pencil(), tol);
    let parts = pencil::is_regular(&s1.pencil(), tol) && pencil::is_regular(&s2.pencil(), tol);
    hybrid == parts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(e: f64, a: f64, b: f64, c: f64) -> LtiDescriptor {
        LtiDescriptor::homogeneous(
            DMatrix::from_element(1, 1, e),
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, c),
        )
        .unwrap()
    }

    #[test]
    fn couple_two_integrators() {
        let s = scalar(1.0, 0.0, 1.0, 1.0);
        let c = couple(&s, &s).unwrap();
        assert_eq!(c.e(), &DMatrix::identity(2, 2));
        assert_eq!(c.a(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        assert_eq!(c.inputs(), 0);
        assert_eq!(c.outputs(), 0);
    }

    #[test]
    fn hybrid_blocks() {
        let s1 = scalar(1.0, -1.0, 2.0, 3.0);
        let s2 = scalar(0.0, 1.0, 5.0, 7.0);
        let h = hybrid_shifted(&s1, &s2, 0.1).unwrap();
        assert_eq!(h.a0(), &DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 15.0, 1.0]));
        assert_eq!(h.a1(), &DMatrix::from_row_slice(2, 2, &[0.0, 14.0, 0.0, 0.0]));
        let c = couple(&s1, &s2).unwrap();
        assert_eq!(&(h.a0() + h.a1()), c.a());
    }

    #[test]
    fn interconnect_dimensions_are_checked() {
        let s1 = scalar(1.0, 0.0, 1.0, 1.0);
        let s2 = LtiDescriptor::homogeneous(
            DMatrix::identity(1, 1),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        assert!(matches!(couple(&s1, &s2), Err(Error::DimensionMismatch(_))));
        assert!(matches!(
            hybrid_shifted(&s1, &s2, 1.0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn nonpositive_delay_rejected() {
        let s = scalar(1.0, 0.0, 1.0, 1.0);
        assert!(matches!(
            hybrid_shifted(&s, &s, 0.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn scalar_algebraic_consistency() {
        // 0 = z + u
        let s = scalar(0.0, -1.0, -1.0, 1.0);
        let u = ForcingFunction::polynomial(vec![vec![0.5, 2.0]]);
        let t0 = 0.25;
        let target = -u.eval(t0)[0];
        assert!(is_consistent(&s, &DVector::from_element(1, target), &u, t0, 1e-10).unwrap());
        assert!(!is_consistent(&s, &DVector::from_element(1, target + 1.0), &u, t0, 1e-10).unwrap());
    }

    #[test]
    fn ode_is_always_consistent() {
        let s = scalar(1.0, -3.0, 1.0, 1.0);
        let u = ForcingFunction::constant(&[4.0]);
        assert!(is_consistent(&s, &DVector::from_element(1, 123.0), &u, 0.0, 1e-12).unwrap());
    }

    #[test]
    fn delay_free_system_is_retarded() {
        let d = LinearDdae::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
            1.0,
            ForcingFunction::zeros(2),
        )
        .unwrap();
        assert_eq!(classify_linear(&d, pencil::DEFAULT_TOL).unwrap(), Classification::Retarded);
    }

    #[test]
    fn advanced_example_classification() {
        let d = LinearDdae::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]),
            1.0,
            ForcingFunction::zeros(2),
        )
        .unwrap();
        assert_eq!(
            classify_linear(&d, pencil::DEFAULT_TOL).unwrap(),
            Classification::Advanced(2)
        );
    }

    #[test]
    fn json_schema() {
        let s: LtiDescriptor = serde_json::from_str(
            r#"{"E": [[1]], "A": [[-1]], "B": [[1]], "C": [[1]], "f": {"poly": [[0, 1]]}}"#,
        )
        .unwrap();
        assert_eq!(s.dim(), 1);
        assert_eq!(s.forcing().eval(2.0)[0], 2.0);
        let closed: LtiDescriptor = serde_json::from_str(r#"{"E": [[1, 0], [0, 1]], "A": [[0, 1], [1, 0]]}"#).unwrap();
        assert_eq!((closed.inputs(), closed.outputs()), (0, 0));
        let d: LinearDdae = serde_json::from_str(
            r#"{"E": [[1]], "A0": [[0]], "A1": [[-1]], "tau": 1.0}"#,
        )
        .unwrap();
        assert_eq!(d.tau(), 1.0);
        assert!(serde_json::from_str::<LinearDdae>(
            r#"{"E": [[1]], "A0": [[0]], "A1": [[-1]], "tau": -1.0}"#
        )
        .is_err());
    }
}
