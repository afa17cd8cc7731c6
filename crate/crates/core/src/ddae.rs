//! Strangeness-free delay DAE models.
//!
//! A model splits its residual into `d` differential equations
//! `D(t, z, z', z_tau)` and `a` algebraic equations
//! `A(t, z, z_tau, z_tau', ..., z_tau^(s-1))`, where `s` is the declared
//! delay-derivative order. Hidden constraints belong to `A`; they are part
//! of the model, not derived at runtime.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::{ForcingFunction, HistoryFunction};
use crate::linalg;
use crate::lti::{self, LinearDdae};

/// Type of a DDAE by the highest delayed derivative order `s` of its
/// underlying delay differential equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "ClassificationRepr", try_from = "ClassificationRepr")]
pub enum Classification {
    Retarded,
    Neutral,
    Advanced(usize),
}

#[derive(Serialize, Deserialize)]
struct ClassificationRepr {
    tag: String,
    s: usize,
}

impl From<Classification> for ClassificationRepr {
    fn from(c: Classification) -> Self {
        let tag = match c {
            Classification::Retarded => "Retarded",
            Classification::Neutral => "Neutral",
            Classification::Advanced(_) => "Advanced",
        };
        ClassificationRepr {
            tag: tag.into(),
            s: c.order(),
        }
    }
}

impl TryFrom<ClassificationRepr> for Classification {
    type Error = Error;
    fn try_from(r: ClassificationRepr) -> Result<Self> {
        let c = Classification::from_order(r.s);
        if ClassificationRepr::from(c).tag != r.tag {
            return Err(Error::Data(format!("tag {} does not match s = {}", r.tag, r.s)));
        }
        Ok(c)
    }
}

impl Classification {
    pub fn from_order(s: usize) -> Self {
        match s {
            0 => Classification::Retarded,
            1 => Classification::Neutral,
            s => Classification::Advanced(s),
        }
    }

    pub fn order(&self) -> usize {
        match *self {
            Classification::Retarded => 0,
            Classification::Neutral => 1,
            Classification::Advanced(s) => s,
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Advanced(s) => write!(f, "Advanced(s={s})"),
            c => write!(f, "{c:?}(s={})", c.order()),
        }
    }
}

/// Strangeness-free DDAE.
///
/// `delayed[k]` holds `z^(k)(t - tau)`; callers pass
/// [`delayed_len`] entries.
pub trait SfDdaeModel: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn n_differential(&self) -> usize;
    fn n_algebraic(&self) -> usize {
        self.dim() - self.n_differential()
    }
    fn tau(&self) -> f64;
    /// Declared delay-derivative order `s` of the algebraic part.
    fn delay_order(&self) -> usize;

    fn differential(
        &self,
        t: f64,
        z: &DVector<f64>,
        zdot: &DVector<f64>,
        delayed: &[DVector<f64>],
    ) -> DVector<f64>;

    fn algebraic(&self, t: f64, z: &DVector<f64>, delayed: &[DVector<f64>]) -> DVector<f64>;

    /// `(dD/dz, dD/dz')`, each `d x n`.
    fn differential_jacobians(
        &self,
        t: f64,
        z: &DVector<f64>,
        zdot: &DVector<f64>,
        delayed: &[DVector<f64>],
    ) -> (DMatrix<f64>, DMatrix<f64>);

    /// `dA/dz`, `a x n`.
    fn algebraic_jacobian(&self, t: f64, z: &DVector<f64>, delayed: &[DVector<f64>]) -> DMatrix<f64>;
}

/// Number of delayed derivative orders a model evaluation needs: the
/// delayed state itself is always supplied.
pub fn delayed_len(m: &dyn SfDdaeModel) -> usize {
    m.delay_order().max(1)
}

/// Result of an admissibility check.
#[derive(Clone, Debug, PartialEq)]
pub struct Admissibility {
    pub admissible: bool,
    pub residual: DVector<f64>,
}

impl Admissibility {
    pub fn norm(&self) -> f64 {
        self.residual.norm()
    }
}

/// Delayed argument bundle of a history at the delayed time `s`.
pub fn history_bundle(m: &dyn SfDdaeModel, phi: &HistoryFunction, s: f64) -> Result<Vec<DVector<f64>>> {
    (0..delayed_len(m)).map(|k| phi.derivative(s, k)).collect()
}

/// `A(0, phi(0), phi(-tau), ..., phi^(s-1)(-tau))` against `tol`.
pub fn admissible(m: &dyn SfDdaeModel, phi: &HistoryFunction, tol: f64) -> Result<Admissibility> {
    if phi.dim() != m.dim() {
        return Err(Error::DimensionMismatch(format!(
            "history has dimension {}, model {}",
            phi.dim(),
            m.dim()
        )));
    }
    let delayed = history_bundle(m, phi, -m.tau())?;
    let residual = m.algebraic(0.0, &phi.eval(0.0), &delayed);
    Ok(Admissibility {
        admissible: residual.norm() <= tol,
        residual,
    })
}

/// Classification from the declared delay-derivative order.
pub fn classify(m: &dyn SfDdaeModel) -> Classification {
    Classification::from_order(m.delay_order())
}

/// Stacked `[D; A]`.
pub fn residual(
    m: &dyn SfDdaeModel,
    t: f64,
    z: &DVector<f64>,
    zdot: &DVector<f64>,
    delayed: &[DVector<f64>],
) -> Result<DVector<f64>> {
    let need = delayed_len(m);
    if delayed.len() < need {
        return Err(Error::Differentiability {
            requested: need - 1,
            available: delayed.len().saturating_sub(1),
        });
    }
    if z.len() != m.dim() || zdot.len() != m.dim() {
        return Err(Error::DimensionMismatch("state dimension".into()));
    }
    let d = m.differential(t, z, zdot, delayed);
    let a = m.algebraic(t, z, delayed);
    let mut out = DVector::zeros(m.dim());
    out.rows_mut(0, d.len()).copy_from(&d);
    out.rows_mut(d.len(), a.len()).copy_from(&a);
    Ok(out)
}

/// Checks that `dA/dz` has full row rank at the given point.
pub fn check_constraint_rank(
    m: &dyn SfDdaeModel,
    t: f64,
    z: &DVector<f64>,
    delayed: &[DVector<f64>],
    tol: f64,
) -> Result<()> {
    let a = m.n_algebraic();
    if a == 0 {
        return Ok(());
    }
    let jac = m.algebraic_jacobian(t, z, delayed);
    let svd = linalg::sorted_svd(&jac);
    let scale = svd.values.first().copied().unwrap_or(0.0);
    let rank = linalg::decide_rank(&svd.values, tol * scale)?;
    if rank < a {
        return Err(Error::Data(format!(
            "constraint Jacobian of `{}` has rank {rank} < {a} at t = {t}",
            m.name()
        )));
    }
    Ok(())
}

/// Largest relative mismatch between analytic Jacobians and central
/// differences with step `h`, relative to `1 + |J|_max`.
pub fn jacobian_mismatch(
    m: &dyn SfDdaeModel,
    t: f64,
    z: &DVector<f64>,
    zdot: &DVector<f64>,
    delayed: &[DVector<f64>],
    h: f64,
) -> f64 {
    let n = m.dim();
    let (dz, dzdot) = m.differential_jacobians(t, z, zdot, delayed);
    let az = m.algebraic_jacobian(t, z, delayed);
    let mut worst: f64 = 0.0;
    let mut compare = |analytic: &DMatrix<f64>, numeric: &DMatrix<f64>| {
        let scale = 1.0 + linalg::max_abs(analytic);
        worst = worst.max(linalg::max_abs(&(analytic - numeric)) / scale);
    };
    let fd = |f: &dyn Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, rows: usize| {
        let mut jac = DMatrix::zeros(rows, n);
        for j in 0..n {
            let step = h * (1.0 + x[j].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += step;
            xm[j] -= step;
            jac.set_column(j, &((f(&xp) - f(&xm)) / (2.0 * step)));
        }
        jac
    };
    let d = m.n_differential();
    let a = m.n_algebraic();
    compare(&dz, &fd(&|x| m.differential(t, x, zdot, delayed), z, d));
    compare(&dzdot, &fd(&|x| m.differential(t, z, x, delayed), zdot, d));
    compare(&az, &fd(&|x| m.algebraic(t, x, delayed), z, a));
    worst
}

/// A linear DDAE written in strangeness-free form through the
/// Weierstrass split of `(E, A0)`: with `xi = T^{-1} z`,
///
/// ```text
/// D = xi_d' - J xi_d - (S A1)_d z_tau - f_d(t)
/// A = xi_a + sum_j N^j ((S A1)_a z_tau^(j) + f_a^(j)(t))
/// ```
#[derive(Clone, Debug)]
pub struct LinearSfModel {
    name: String,
    tau: f64,
    n_diff: usize,
    order: usize,
    index: usize,
    t_inv: DMatrix<f64>,
    dynamics: DMatrix<f64>,
    delayed_diff: DMatrix<f64>,
    /// `N^j (S A1)_a` for `j < order`.
    delayed_alg: Vec<DMatrix<f64>>,
    nilpotent: DMatrix<f64>,
    forcing_diff: ForcingFunction,
    forcing_alg: ForcingFunction,
    classification: Classification,
}

impl LinearSfModel {
    pub fn new(name: impl Into<String>, sys: &LinearDdae, tol: f64) -> Result<Self> {
        let st = lti::linear_structure(sys, tol)?;
        let w = &st.form;
        let (d, a) = (w.n_diff, w.n_alg);
        let n = d + a;
        let order = st.highest_power.map_or(0, |k| k + 1);
        let alg = st.delayed_left.rows(d, a).into_owned();
        let delayed_alg = (0..order).map(|j| w.nilpotent_power(j) * &alg).collect();
        let sf = sys.forcing().transform(&w.left)?;
        Ok(LinearSfModel {
            name: name.into(),
            tau: sys.tau(),
            n_diff: d,
            order,
            index: w.index,
            t_inv: w.right_inverse(),
            dynamics: w.dynamics.clone(),
            delayed_diff: st.delayed_left.rows(0, d).into_owned(),
            delayed_alg,
            nilpotent: w.nilpotent.clone(),
            forcing_diff: sf.rows(0..d),
            forcing_alg: sf.rows(d..n),
            classification: st.classification,
        })
    }

    pub fn classification(&self) -> Classification {
        self.classification
    }

    /// Nilpotency index of the associated pencil.
    pub fn index(&self) -> usize {
        self.index
    }
}

impl SfDdaeModel for LinearSfModel {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.t_inv.nrows()
    }
    fn n_differential(&self) -> usize {
        self.n_diff
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn delay_order(&self) -> usize {
        self.order
    }

    fn differential(
        &self,
        t: f64,
        z: &DVector<f64>,
        zdot: &DVector<f64>,
        delayed: &[DVector<f64>],
    ) -> DVector<f64> {
        let d = self.n_diff;
        let top = self.t_inv.rows(0, d);
        top * zdot - &self.dynamics * (top * z) - &self.delayed_diff * &delayed[0] - self.forcing_diff.eval(t)
    }

    fn algebraic(&self, t: f64, z: &DVector<f64>, delayed: &[DVector<f64>]) -> DVector<f64> {
        let (d, a) = (self.n_diff, self.n_algebraic());
        let mut r = self.t_inv.rows(d, a) * z;
        for (j, m) in self.delayed_alg.iter().enumerate() {
            r += m * &delayed[j];
        }
        let mut power = DMatrix::identity(a, a);
        for j in 0..self.index {
            // Declared forcing orders are checked when the model is built.
            r += &power * self.forcing_alg.derivative(t, j).unwrap_or_else(|_| DVector::zeros(a));
            power = &self.nilpotent * power;
        }
        r
    }

    fn differential_jacobians(
        &self,
        _t: f64,
        _z: &DVector<f64>,
        _zdot: &DVector<f64>,
        _delayed: &[DVector<f64>],
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let top = self.t_inv.rows(0, self.n_diff).into_owned();
        (-&self.dynamics * &top, top)
    }

    fn algebraic_jacobian(&self, _t: f64, _z: &DVector<f64>, _delayed: &[DVector<f64>]) -> DMatrix<f64> {
        self.t_inv.rows(self.n_diff, self.n_algebraic()).into_owned()
    }
}

/// Wraps a linear DDAE; fails if the forcing does not declare enough
/// derivatives for the algebraic solution formula.
pub fn wrap_linear(name: impl Into<String>, sys: &LinearDdae, tol: f64) -> Result<LinearSfModel> {
    let m = LinearSfModel::new(name, sys, tol)?;
    if m.n_algebraic() > 0 && m.index > 0 {
        sys.forcing().check_order(m.index - 1)?;
    }
    Ok(m)
}
