//! Built-in models: the pendulum/mass-spring-damper family and the small
//! linear systems used to illustrate index and solvability phenomena.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ddae::{wrap_linear, SfDdaeModel};
use crate::error::{Error, Result};
use crate::forcing::{ForcingFunction, HistoryFunction};
use crate::lti::{self, LinearDdae, LtiDescriptor};
use crate::mos::Instance;
use crate::pencil::{MatrixPencil, DEFAULT_TOL};

/// Physical parameters of the pendulum attached to a mass-spring-damper.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmsdParams {
    /// Mass of the numerical substructure.
    #[serde(rename = "M")]
    pub mass: f64,
    #[serde(rename = "C")]
    pub damping: f64,
    #[serde(rename = "K")]
    pub stiffness: f64,
    #[serde(rename = "m")]
    pub pendulum_mass: f64,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "g")]
    pub gravity: f64,
    /// Actuator delay.
    pub tau: f64,
}

impl Default for PmsdParams {
    fn default() -> Self {
        PmsdParams {
            mass: 1.0,
            damping: 0.3,
            stiffness: 5.0,
            pendulum_mass: 0.2,
            length: 1.0,
            gravity: 9.81,
            tau: 0.05,
        }
    }
}

impl PmsdParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} = {v}")));
        for (what, v) in [("M", self.mass), ("m", self.pendulum_mass), ("L", self.length), ("tau", self.tau)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(what, v);
            }
        }
        for (what, v) in [("C", self.damping), ("K", self.stiffness), ("g", self.gravity)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(what, v);
            }
        }
        Ok(())
    }

    fn from_map(p: &Params) -> Result<Self> {
        let out = PmsdParams {
            mass: p["M"],
            damping: p["C"],
            stiffness: p["K"],
            pendulum_mass: p["m"],
            length: p["L"],
            gravity: p["g"],
            tau: p["tau"],
        };
        out.validate()?;
        Ok(out)
    }
}

/// Mass-spring-damper in first-order descriptor form with the row
/// scaling `E = diag(1, M)`; input is the external force, output the
/// displacement.
pub fn msd_subsystem(p: &PmsdParams) -> Result<LtiDescriptor> {
    p.validate()?;
    LtiDescriptor::homogeneous(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, p.mass]),
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -p.stiffness, -p.damping]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
    )
}

/// The pendulum as a nonlinear control DAE with input `u` (suspension
/// height) and output the vertical force on the suspension point.
///
/// States `(x2, y2, lambda, vx, vy, w)`, where `w` copies the input so
/// that the output has no feedthrough.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendulumSubsystem {
    pub params: PmsdParams,
}

impl PendulumSubsystem {
    pub const DIM: usize = 6;

    pub fn strangeness_index(&self) -> usize {
        2
    }
    pub fn n_differential(&self) -> usize {
        2
    }
    pub fn n_algebraic(&self) -> usize {
        4
    }

    pub fn residual(&self, z: &DVector<f64>, zdot: &DVector<f64>, u: f64) -> DVector<f64> {
        let p = &self.params;
        let (m, g, l) = (p.pendulum_mass, p.gravity, p.length);
        DVector::from_vec(vec![
            zdot[0] - z[3],
            zdot[1] - z[4],
            z[5] - u,
            m * zdot[3] + 2.0 * z[2] * z[0],
            m * zdot[4] + 2.0 * z[2] * (z[1] - u) + m * g,
            z[0] * z[0] + (z[1] - u).powi(2) - l * l,
        ])
    }

    /// `(dF/dz, dF/dz', dF/du)`.
    pub fn jacobians(&self, z: &DVector<f64>, u: f64) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let m = self.params.pendulum_mass;
        let mut jz = DMatrix::zeros(6, 6);
        let mut jzd = DMatrix::zeros(6, 6);
        let mut ju = DVector::zeros(6);
        jz[(0, 3)] = -1.0;
        jzd[(0, 0)] = 1.0;
        jz[(1, 4)] = -1.0;
        jzd[(1, 1)] = 1.0;
        jz[(2, 5)] = 1.0;
        ju[2] = -1.0;
        jz[(3, 0)] = 2.0 * z[2];
        jz[(3, 2)] = 2.0 * z[0];
        jzd[(3, 3)] = m;
        jz[(4, 1)] = 2.0 * z[2];
        jz[(4, 2)] = 2.0 * (z[1] - u);
        jzd[(4, 4)] = m;
        ju[4] = -2.0 * z[2];
        jz[(5, 0)] = 2.0 * z[0];
        jz[(5, 1)] = 2.0 * (z[1] - u);
        ju[5] = -2.0 * (z[1] - u);
        (jz, jzd, ju)
    }

    pub fn output(&self, z: &DVector<f64>) -> f64 {
        -2.0 * z[2] * (z[1] - z[5]) - self.params.pendulum_mass * self.params.gravity
    }

    pub fn output_gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(6);
        g[1] = -2.0 * z[2];
        g[2] = -2.0 * (z[1] - z[5]);
        g[5] = 2.0 * z[2];
        g
    }

    /// Hanging equilibrium below the suspension height `u`.
    pub fn rest_state(&self, u: f64) -> DVector<f64> {
        let p = &self.params;
        let lambda = p.pendulum_mass * p.gravity / (2.0 * p.length);
        DVector::from_vec(vec![0.0, u - p.length, lambda, 0.0, 0.0, u])
    }
}

pub fn pendulum_subsystem(p: &PmsdParams) -> Result<PendulumSubsystem> {
    p.validate()?;
    Ok(PendulumSubsystem { params: *p })
}

/// How the pendulum force reaches the mass-spring-damper.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coupling {
    /// Force computed from states delayed by `tau` (hybrid test).
    Delayed,
    /// Force computed from current states (fully coupled reference).
    Instantaneous,
    /// Prescribed constant force; the subsystems decouple.
    Constant(f64),
}

/// Pendulum on a mass-spring-damper in strangeness-free form.
///
/// States `(y1, x2, y2, v1, v2, v3, lambda)`. The differential part holds
/// the kinematics of `y1, x2` and the dynamics of `v1, v2`; the algebraic
/// part is the position constraint with its first two derivatives, which
/// determine `y2, v3, lambda`.
#[derive(Clone, Debug)]
pub struct PendulumMsd {
    pub params: PmsdParams,
    pub coupling: Coupling,
    name: String,
}

pub mod state {
    pub const Y1: usize = 0;
    pub const X2: usize = 1;
    pub const Y2: usize = 2;
    pub const V1: usize = 3;
    pub const V2: usize = 4;
    pub const V3: usize = 5;
    pub const LAMBDA: usize = 6;
}
use state::*;

impl PendulumMsd {
    pub fn new(params: PmsdParams, coupling: Coupling) -> Result<Self> {
        params.validate()?;
        let name = match coupling {
            Coupling::Delayed => "pmsd-hybrid",
            Coupling::Instantaneous => "pmsd-coupled",
            Coupling::Constant(_) => "pmsd-constant-force",
        };
        Ok(PendulumMsd {
            params,
            coupling,
            name: name.into(),
        })
    }

    /// Vertical pendulum force evaluated at `z`.
    pub fn pendulum_force(&self, z: &DVector<f64>) -> f64 {
        -2.0 * z[LAMBDA] * (z[Y2] - z[Y1]) - self.params.pendulum_mass * self.params.gravity
    }

    fn force(&self, z: &DVector<f64>, delayed: &[DVector<f64>]) -> f64 {
        match self.coupling {
            Coupling::Delayed => self.pendulum_force(&delayed[0]),
            Coupling::Instantaneous => self.pendulum_force(z),
            Coupling::Constant(f) => f,
        }
    }

    /// Gradient of the force with respect to the current state.
    fn force_gradient(&self, z: &DVector<f64>) -> [f64; 7] {
        let mut g = [0.0; 7];
        if self.coupling == Coupling::Instantaneous {
            g[Y1] = 2.0 * z[LAMBDA];
            g[Y2] = -2.0 * z[LAMBDA];
            g[LAMBDA] = -2.0 * (z[Y2] - z[Y1]);
        }
        g
    }

    /// Constant history with the pendulum at angle `theta0` from the
    /// vertical, the mass at `y1`, all velocities zero and the multiplier
    /// chosen so that every constraint holds.
    pub fn rest_perturbed_state(&self, theta0: f64, y1: f64) -> DVector<f64> {
        let l = self.params.length;
        let mut z = DVector::zeros(7);
        z[Y1] = y1;
        z[X2] = l * theta0.sin();
        z[Y2] = y1 - l * theta0.cos();
        // The last constraint is affine in lambda, also through the
        // delayed force of a constant history.
        let eval = |lambda: f64| {
            let mut s = z.clone();
            s[LAMBDA] = lambda;
            self.algebraic(0.0, &s, std::slice::from_ref(&s))[2]
        };
        let (r0, r1) = (eval(0.0), eval(1.0));
        z[LAMBDA] = -r0 / (r1 - r0);
        z
    }

    /// `H = M v1^2/2 + K y1^2/2 + m g y1 - m (v2^2 + v3^2)/2 - m g y2`,
    /// which satisfies `dH/dt = -C v1^2` for instantaneous coupling.
    pub fn energy(&self, z: &DVector<f64>) -> f64 {
        let p = &self.params;
        let mg = p.pendulum_mass * p.gravity;
        0.5 * p.mass * z[V1].powi(2) + 0.5 * p.stiffness * z[Y1].powi(2) + mg * z[Y1]
            - 0.5 * p.pendulum_mass * (z[V2].powi(2) + z[V3].powi(2))
            - mg * z[Y2]
    }
}

impl SfDdaeModel for PendulumMsd {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        7
    }
    fn n_differential(&self) -> usize {
        4
    }
    fn tau(&self) -> f64 {
        self.params.tau
    }
    fn delay_order(&self) -> usize {
        match self.coupling {
            Coupling::Delayed => 1,
            _ => 0,
        }
    }

    fn differential(
        &self,
        _t: f64,
        z: &DVector<f64>,
        zdot: &DVector<f64>,
        delayed: &[DVector<f64>],
    ) -> DVector<f64> {
        let p = &self.params;
        let f = self.force(z, delayed);
        DVector::from_vec(vec![
            zdot[Y1] - z[V1],
            zdot[X2] - z[V2],
            p.mass * zdot[V1] + p.damping * z[V1] + p.stiffness * z[Y1] - f,
            p.pendulum_mass * zdot[V2] + 2.0 * z[LAMBDA] * z[X2],
        ])
    }

    fn algebraic(&self, _t: f64, z: &DVector<f64>, delayed: &[DVector<f64>]) -> DVector<f64> {
        let p = &self.params;
        let f = self.force(z, delayed);
        let r = z[Y2] - z[Y1];
        let dv = z[V3] - z[V1];
        let len2 = z[X2].powi(2) + r * r;
        let accel = p.gravity + f / p.mass - p.damping / p.mass * z[V1] - p.stiffness / p.mass * z[Y1];
        DVector::from_vec(vec![
            len2 - p.length.powi(2),
            2.0 * z[X2] * z[V2] + 2.0 * r * dv,
            2.0 * z[V2].powi(2) + 2.0 * dv * dv - 4.0 / p.pendulum_mass * z[LAMBDA] * len2 - 2.0 * r * accel,
        ])
    }

    fn differential_jacobians(
        &self,
        _t: f64,
        z: &DVector<f64>,
        _zdot: &DVector<f64>,
        _delayed: &[DVector<f64>],
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        let p = &self.params;
        let fg = self.force_gradient(z);
        let mut jz = DMatrix::zeros(4, 7);
        let mut jzd = DMatrix::zeros(4, 7);
        jz[(0, V1)] = -1.0;
        jzd[(0, Y1)] = 1.0;
        jz[(1, V2)] = -1.0;
        jzd[(1, X2)] = 1.0;
        jz[(2, Y1)] = p.stiffness;
        jz[(2, V1)] = p.damping;
        for (j, g) in fg.iter().enumerate() {
            jz[(2, j)] -= g;
        }
        jzd[(2, V1)] = p.mass;
        jz[(3, X2)] = 2.0 * z[LAMBDA];
        jz[(3, LAMBDA)] = 2.0 * z[X2];
        jzd[(3, V2)] = p.pendulum_mass;
        (jz, jzd)
    }

    fn algebraic_jacobian(&self, _t: f64, z: &DVector<f64>, delayed: &[DVector<f64>]) -> DMatrix<f64> {
        let p = &self.params;
        let f = self.force(z, delayed);
        let fg = self.force_gradient(z);
        let r = z[Y2] - z[Y1];
        let dv = z[V3] - z[V1];
        let len2 = z[X2].powi(2) + r * r;
        let accel = p.gravity + f / p.mass - p.damping / p.mass * z[V1] - p.stiffness / p.mass * z[Y1];
        let mu = 4.0 / p.pendulum_mass;
        let mut j = DMatrix::zeros(3, 7);

        j[(0, Y1)] = -2.0 * r;
        j[(0, X2)] = 2.0 * z[X2];
        j[(0, Y2)] = 2.0 * r;

        j[(1, Y1)] = -2.0 * dv;
        j[(1, Y2)] = 2.0 * dv;
        j[(1, X2)] = 2.0 * z[V2];
        j[(1, V2)] = 2.0 * z[X2];
        j[(1, V3)] = 2.0 * r;
        j[(1, V1)] = -2.0 * r;

        j[(2, V2)] = 4.0 * z[V2];
        j[(2, V3)] = 4.0 * dv;
        j[(2, V1)] = -4.0 * dv + 2.0 * r * p.damping / p.mass;
        j[(2, X2)] = -mu * z[LAMBDA] * 2.0 * z[X2];
        j[(2, Y1)] = mu * z[LAMBDA] * 2.0 * r + 2.0 * accel + 2.0 * r * p.stiffness / p.mass;
        j[(2, Y2)] = -mu * z[LAMBDA] * 2.0 * r - 2.0 * accel;
        j[(2, LAMBDA)] = -mu * len2;
        for (c, g) in fg.iter().enumerate() {
            j[(2, c)] -= 2.0 * r * g / p.mass;
        }
        j
    }
}

pub fn pmsd_hybrid_shifted(p: &PmsdParams) -> Result<PendulumMsd> {
    PendulumMsd::new(*p, Coupling::Delayed)
}

/// Delay-free reference; `tau` only sets the segment length.
pub fn pmsd_coupled(p: &PmsdParams) -> Result<PendulumMsd> {
    PendulumMsd::new(*p, Coupling::Instantaneous)
}

/// `x' = y`, `0 = x(t) - y(t - tau)` in strangeness-free form:
/// both equations are algebraic, `A = [x - y_tau; y - y_tau']`.
#[derive(Clone, Debug)]
pub struct AdvancedExample {
    pub tau: f64,
}

impl SfDdaeModel for AdvancedExample {
    fn name(&self) -> &str {
        "ex-advanced"
    }
    fn dim(&self) -> usize {
        2
    }
    fn n_differential(&self) -> usize {
        0
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn delay_order(&self) -> usize {
        2
    }
    fn differential(&self, _: f64, _: &DVector<f64>, _: &DVector<f64>, _: &[DVector<f64>]) -> DVector<f64> {
        DVector::zeros(0)
    }
    fn algebraic(&self, _t: f64, z: &DVector<f64>, delayed: &[DVector<f64>]) -> DVector<f64> {
        DVector::from_vec(vec![z[0] - delayed[0][1], z[1] - delayed[1][1]])
    }
    fn differential_jacobians(
        &self,
        _: f64,
        _: &DVector<f64>,
        _: &DVector<f64>,
        _: &[DVector<f64>],
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        (DMatrix::zeros(0, 2), DMatrix::zeros(0, 2))
    }
    fn algebraic_jacobian(&self, _: f64, _: &DVector<f64>, _: &[DVector<f64>]) -> DMatrix<f64> {
        DMatrix::identity(2, 2)
    }
}

/// Split-index example: the full 3x3 system and its two subsystems.
pub fn split_index_subsystems(c: f64) -> Result<(LtiDescriptor, LtiDescriptor)> {
    let s1 = LtiDescriptor::homogeneous(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 2, &[0.0, c, c, 0.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
    )?;
    let s2 = LtiDescriptor::homogeneous(
        DMatrix::zeros(1, 1),
        DMatrix::from_element(1, 1, -1.0),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, 1.0),
    )?;
    Ok((s1, s2))
}

pub fn split_index_system(c: f64) -> Result<MatrixPencil> {
    MatrixPencil::from_row_slices(
        3,
        &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        &[0.0, c, 0.0, c, 0.0, 1.0, 0.0, 1.0, -1.0],
    )
}

/// Parameters of the coupled example of two index-1 subsystems.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CoupledIndexParams {
    pub a: [f64; 2],
    /// `b[i] = [b_{i,1}, b_{i,2}]`.
    pub b: [[f64; 2]; 2],
    /// `c[i] = [c_{i,1}, c_{i,2}]`.
    pub c: [[f64; 2]; 2],
}

pub fn coupled_index_subsystems(p: &CoupledIndexParams) -> Result<(LtiDescriptor, LtiDescriptor)> {
    let sub = |i: usize| {
        LtiDescriptor::homogeneous(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[p.a[i], 0.0, 0.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[p.b[i][0], p.b[i][1], p.c[i][0], p.c[i][1]]),
            DMatrix::identity(2, 2),
        )
    };
    Ok((sub(0)?, sub(1)?))
}

/// Shifted-hybrid example: two nilpotent subsystems coupled through
/// `[[a, b], [c, d]]`.
pub fn shifted_index_subsystems(a: f64, b: f64, c: f64, d: f64) -> Result<(LtiDescriptor, LtiDescriptor)> {
    let e = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    let s1 = LtiDescriptor::homogeneous(
        e.clone(),
        DMatrix::identity(2, 2),
        DMatrix::identity(2, 2),
        DMatrix::identity(2, 2),
    )?;
    let s2 = LtiDescriptor::homogeneous(
        e,
        DMatrix::identity(2, 2),
        DMatrix::from_row_slice(2, 2, &[a, b, c, d]),
        DMatrix::identity(2, 2),
    )?;
    Ok((s1, s2))
}

/// Data of the shifting example: `f`, `g` and a history whose second
/// component meets `g` only at `t = 0`.
#[derive(Clone, Debug)]
pub struct ShiftData {
    pub tau: f64,
    pub f: ForcingFunction,
    pub g: ForcingFunction,
    pub history: HistoryFunction,
}

impl ShiftData {
    /// `f = 1 + t`, `g = 2 - t + t^2/2`, `phi = (1/2 + t, g(tau) + 3 t)`.
    pub fn standard(tau: f64) -> Self {
        let g = ForcingFunction::polynomial(vec![vec![2.0, -1.0, 0.5]]);
        let g_tau = g.eval(tau)[0];
        ShiftData {
            tau,
            f: ForcingFunction::polynomial(vec![vec![1.0, 1.0]]),
            history: HistoryFunction::polynomial(vec![vec![0.5, 1.0], vec![g_tau, 3.0]]),
            g,
        }
    }

    /// `x1' = x2(t - tau) + f`, with the algebraic equation either shifted
    /// (`0 = x2 - g(t + tau)`) or as modelled (`0 = x2(t - tau) - g(t)`).
    pub fn system(&self, shifted: bool) -> Result<LinearDdae> {
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let (a0, a1, second) = if shifted {
            (
                DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
                self.g.shifted(self.tau).transform(&DMatrix::from_element(1, 1, -1.0))?,
            )
        } else {
            (
                DMatrix::zeros(2, 2),
                DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 1.0]),
                self.g.transform(&DMatrix::from_element(1, 1, -1.0))?,
            )
        };
        LinearDdae::new(e, a0, a1, self.tau, self.f.stack(&second))
    }

    /// Closed-form solution on `[0, tau]`:
    /// `x1 = phi1(0) + int_0^t phi2(s - tau) + f(s) ds`, `x2 = g(t + tau)`.
    pub fn exact(&self, t: f64) -> DVector<f64> {
        let phi = self.history.as_forcing();
        let integrand = phi.rows(1..2).shifted(-self.tau).stack(&self.f);
        let x1 = phi.eval(0.0)[0] + integrate_polynomial(&integrand, t);
        DVector::from_vec(vec![x1, self.g.eval(t + self.tau)[0]])
    }
}

/// `int_0^t sum_i p_i(s) ds` for polynomial components, by Gauss-Legendre
/// quadrature that is exact up to degree 9.
fn integrate_polynomial(f: &ForcingFunction, t: f64) -> f64 {
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let half = 0.5 * t;
    NODES
        .iter()
        .zip(WEIGHTS)
        .map(|(x, w)| w * f.eval(half * (1.0 + x)).sum())
        .sum::<f64>()
        * half
}

pub fn advanced_example_linear(tau: f64) -> Result<LinearDdae> {
    LinearDdae::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]),
        tau,
        ForcingFunction::zeros(2),
    )
}

/// History `(0, t + 1)` of the advanced example.
pub fn advanced_example_history() -> HistoryFunction {
    HistoryFunction::polynomial(vec![vec![0.0], vec![1.0, 1.0]])
}

/// Parameter values by name.
pub type Params = BTreeMap<String, f64>;

/// What a registry model exposes for structural analysis.
#[derive(Clone, Debug)]
pub enum Structure {
    Pencil(MatrixPencil),
    Lti(LtiDescriptor),
    Linear(LinearDdae),
    /// Nonlinear model described by its strangeness-free split.
    Nonlinear {
        d: usize,
        a: usize,
        strangeness: usize,
    },
}

pub struct BuiltModel {
    pub name: String,
    pub structure: Structure,
    /// Named subsystem pencils, if the model is assembled from parts.
    pub subsystems: Vec<(String, MatrixPencil)>,
    pub simulation: Option<Arc<dyn SfDdaeModel>>,
    pub history: Option<HistoryFunction>,
    pub default_horizon: f64,
}

impl BuiltModel {
    fn new(name: &str, structure: Structure) -> Self {
        BuiltModel {
            name: name.into(),
            structure,
            subsystems: Vec::new(),
            simulation: None,
            history: None,
            default_horizon: 1.0,
        }
    }
}

pub struct RegistryEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub defaults: &'static [(&'static str, f64)],
    build: fn(&Params) -> Result<BuiltModel>,
}

impl RegistryEntry {
    /// Defaults merged with `overrides`; unknown keys are rejected.
    pub fn params(&self, overrides: &[(String, f64)]) -> Result<Params> {
        let mut p: Params = self.defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (k, v) in overrides {
            match p.get_mut(k) {
                Some(slot) => *slot = *v,
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "`{}` has no parameter `{k}` (known: {})",
                        self.name,
                        self.defaults.iter().map(|(k, _)| *k).collect::<Vec<_>>().join(", ")
                    )))
                }
            }
        }
        Ok(p)
    }

    pub fn build(&self, overrides: &[(String, f64)]) -> Result<BuiltModel> {
        (self.build)(&self.params(overrides)?)
    }
}

const PMSD_DEFAULTS: &[(&str, f64)] = &[
    ("C", 0.3),
    ("K", 5.0),
    ("L", 1.0),
    ("M", 1.0),
    ("g", 9.81),
    ("m", 0.2),
    ("tau", 0.05),
    ("theta0", 0.1),
    ("y1", 0.0),
];

fn pmsd_instance(p: &Params, coupling: Coupling) -> Result<(Arc<PendulumMsd>, HistoryFunction)> {
    let model = PendulumMsd::new(PmsdParams::from_map(p)?, coupling)?;
    let z0 = model.rest_perturbed_state(p["theta0"], p["y1"]);
    Ok((Arc::new(model), HistoryFunction::constant(z0.as_slice())))
}

fn build_pmsd(p: &Params, coupling: Coupling, name: &str) -> Result<BuiltModel> {
    let (model, history) = pmsd_instance(p, coupling)?;
    let mut b = BuiltModel::new(
        name,
        Structure::Nonlinear {
            d: 4,
            a: 3,
            strangeness: 2,
        },
    );
    let params = PmsdParams::from_map(p)?;
    b.subsystems.push(("msd".into(), msd_subsystem(&params)?.pencil()));
    b.simulation = Some(model);
    b.history = Some(history);
    b.default_horizon = 5.0 * params.tau;
    Ok(b)
}

fn build_linear(name: &str, sys: LinearDdae, history: HistoryFunction, horizon: f64) -> Result<BuiltModel> {
    let sim = wrap_linear(name, &sys, DEFAULT_TOL)?;
    let mut b = BuiltModel::new(name, Structure::Linear(sys));
    b.simulation = Some(Arc::new(sim));
    b.history = Some(history);
    b.default_horizon = horizon;
    Ok(b)
}

fn registry() -> Vec<RegistryEntry> {
    vec![
        RegistryEntry {
            name: "msd",
            summary: "mass-spring-damper subsystem, unforced",
            defaults: &[("C", 0.3), ("K", 5.0), ("M", 1.0), ("tau", 1.0), ("y0", 1.0), ("v0", 0.0)],
            build: |p| {
                let params = PmsdParams {
                    mass: p["M"],
                    damping: p["C"],
                    stiffness: p["K"],
                    tau: p["tau"],
                    ..PmsdParams::default()
                };
                let s = msd_subsystem(&params)?;
                let sys = LinearDdae::new(
                    s.e().clone(),
                    s.a().clone(),
                    DMatrix::zeros(2, 2),
                    params.tau,
                    ForcingFunction::zeros(2),
                )?;
                let mut b = build_linear("msd", sys, HistoryFunction::constant(&[p["y0"], p["v0"]]), 2.0)?;
                b.structure = Structure::Lti(s);
                Ok(b)
            },
        },
        RegistryEntry {
            name: "pendulum",
            summary: "pendulum subsystem with feedthrough variable (structure only)",
            defaults: &[("L", 1.0), ("g", 9.81), ("m", 0.2)],
            build: |p| {
                let params = PmsdParams {
                    pendulum_mass: p["m"],
                    length: p["L"],
                    gravity: p["g"],
                    ..PmsdParams::default()
                };
                let s = pendulum_subsystem(&params)?;
                Ok(BuiltModel::new(
                    "pendulum",
                    Structure::Nonlinear {
                        d: s.n_differential(),
                        a: s.n_algebraic(),
                        strangeness: s.strangeness_index(),
                    },
                ))
            },
        },
        RegistryEntry {
            name: "pmsd-coupled",
            summary: "pendulum on mass-spring-damper, instantaneous coupling (reference)",
            defaults: PMSD_DEFAULTS,
            build: |p| build_pmsd(p, Coupling::Instantaneous, "pmsd-coupled"),
        },
        RegistryEntry {
            name: "pmsd-hybrid",
            summary: "pendulum on mass-spring-damper, force delayed by the actuator (shifted form)",
            defaults: PMSD_DEFAULTS,
            build: |p| build_pmsd(p, Coupling::Delayed, "pmsd-hybrid"),
        },
        RegistryEntry {
            name: "ex-split-index",
            summary: "index-1 system whose split subsystem has index 2 or is singular",
            defaults: &[("c", 1.0)],
            build: |p| {
                let (s1, s2) = split_index_subsystems(p["c"])?;
                let full = lti::couple(&s1, &s2)?;
                let mut b = BuiltModel::new("ex-split-index", Structure::Lti(full));
                b.subsystems = vec![("s1".into(), s1.pencil()), ("s2".into(), s2.pencil())];
                Ok(b)
            },
        },
        RegistryEntry {
            name: "ex-coupled-index",
            summary: "two index-1 subsystems coupled without delay",
            defaults: &[
                ("a1", -1.0),
                ("a2", -2.0),
                ("b1.1", 1.0),
                ("b1.2", 0.5),
                ("b2.1", 0.2),
                ("b2.2", 1.0),
                ("c1.1", 0.3),
                ("c1.2", 0.5),
                ("c2.1", 0.4),
                ("c2.2", 0.5),
            ],
            build: |p| {
                let cp = CoupledIndexParams {
                    a: [p["a1"], p["a2"]],
                    b: [[p["b1.1"], p["b1.2"]], [p["b2.1"], p["b2.2"]]],
                    c: [[p["c1.1"], p["c1.2"]], [p["c2.1"], p["c2.2"]]],
                };
                let (s1, s2) = coupled_index_subsystems(&cp)?;
                let mut b = BuiltModel::new("ex-coupled-index", Structure::Lti(lti::couple(&s1, &s2)?));
                b.subsystems = vec![("s1".into(), s1.pencil()), ("s2".into(), s2.pencil())];
                Ok(b)
            },
        },
        RegistryEntry {
            name: "ex-shifted-index",
            summary: "shifted hybrid coupling of two nilpotent subsystems",
            defaults: &[("a", 0.5), ("b", 0.5), ("c", 1.0), ("d", 0.5), ("tau", 1.0)],
            build: |p| {
                let (s1, s2) = shifted_index_subsystems(p["a"], p["b"], p["c"], p["d"])?;
                let h = lti::hybrid_shifted(&s1, &s2, p["tau"])?;
                let mut b = BuiltModel::new("ex-shifted-index", Structure::Linear(h));
                b.subsystems = vec![("s1".into(), s1.pencil()), ("s2".into(), s2.pencil())];
                Ok(b)
            },
        },
        RegistryEntry {
            name: "ex-shift",
            summary: "shifting an equation enlarges the solution space",
            defaults: &[("shifted", 1.0), ("tau", 1.0)],
            build: |p| {
                let data = ShiftData::standard(p["tau"]);
                let sys = data.system(p["shifted"] != 0.0)?;
                if p["shifted"] != 0.0 {
                    build_linear("ex-shift", sys, data.history, data.tau)
                } else {
                    Ok(BuiltModel::new("ex-shift", Structure::Linear(sys)))
                }
            },
        },
        RegistryEntry {
            name: "ex-advanced",
            summary: "advanced DDAE whose solution stops at the first breakpoint",
            defaults: &[("tau", 1.0)],
            build: |p| {
                let tau = p["tau"];
                let mut b = BuiltModel::new("ex-advanced", Structure::Linear(advanced_example_linear(tau)?));
                b.simulation = Some(Arc::new(AdvancedExample { tau }));
                b.history = Some(advanced_example_history());
                b.default_horizon = 2.0 * tau;
                Ok(b)
            },
        },
    ]
}

/// All built-in models.
pub fn builtin_models() -> Vec<RegistryEntry> {
    registry()
}

pub fn lookup(name: &str) -> Result<RegistryEntry> {
    registry()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownModel(name.into()))
}

/// Delay family for a sweep: hybrid members and the delay-free reference.
pub struct SweepFamily {
    pub builder: Box<dyn Fn(f64) -> Result<Instance> + Sync>,
    pub reference: Instance,
    /// Components compared against the reference.
    pub outputs: Vec<usize>,
}

/// The pendulum/mass-spring-damper family; the reference uses the
/// nominal `tau` of `params` as its segment length.
pub fn pmsd_sweep_family(overrides: &[(String, f64)]) -> Result<SweepFamily> {
    let entry = lookup("pmsd-hybrid")?;
    let params = entry.params(overrides)?;
    let (reference, ref_history) = pmsd_instance(&params, Coupling::Instantaneous)?;
    let reference: Instance = (reference, ref_history);
    Ok(SweepFamily {
        builder: Box::new(move |tau| {
            let mut p = params.clone();
            p.insert("tau".into(), tau);
            let (m, h) = pmsd_instance(&p, Coupling::Delayed)?;
            Ok((m as Arc<dyn SfDdaeModel>, h))
        }),
        reference,
        outputs: (0..7).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddae::{self, classify, jacobian_mismatch, Classification};

    #[test]
    fn registry_names() {
        let names: Vec<_> = builtin_models().iter().map(|e| e.name).collect();
        for n in [
            "msd",
            "pendulum",
            "pmsd-coupled",
            "pmsd-hybrid",
            "ex-split-index",
            "ex-coupled-index",
            "ex-shifted-index",
            "ex-shift",
            "ex-advanced",
        ] {
            assert!(names.contains(&n), "{n}");
        }
        assert!(matches!(lookup("nope"), Err(Error::UnknownModel(_))));
        assert!(lookup("ex-split-index")
            .unwrap()
            .build(&[("zeta".into(), 1.0)])
            .is_err());
    }

    #[test]
    fn hybrid_rest_history_is_admissible_and_neutral() {
        let m = pmsd_hybrid_shifted(&PmsdParams::default()).unwrap();
        assert_eq!(classify(&m), Classification::Neutral);
        assert_eq!((m.n_differential(), m.n_algebraic()), (4, 3));
        let z = m.rest_perturbed_state(0.0, 0.0);
        let adm = ddae::admissible(&m, &HistoryFunction::constant(z.as_slice()), 1e-12).unwrap();
        assert!(adm.admissible, "{}", adm.residual);
        let coupled = pmsd_coupled(&PmsdParams::default()).unwrap();
        let zc = coupled.rest_perturbed_state(0.0, 0.0);
        assert!((zc[LAMBDA] - z[LAMBDA]).abs() < 1e-12);
    }

    #[test]
    fn pmsd_jacobians() {
        let z = DVector::from_vec(vec![0.1, 0.3, -0.9, 0.2, -0.4, 0.5, 1.3]);
        let zd = DVector::from_vec(vec![0.3, -0.2, 0.1, 0.7, 0.2, -0.6, 0.4]);
        let del = vec![DVector::from_vec(vec![0.05, 0.2, -0.95, 0.1, 0.0, 0.3, 1.1])];
        for coupling in [Coupling::Delayed, Coupling::Instantaneous, Coupling::Constant(-2.0)] {
            let m = PendulumMsd::new(PmsdParams::default(), coupling).unwrap();
            let err = jacobian_mismatch(&m, 0.0, &z, &zd, &del, 1e-6);
            assert!(err < 1e-7, "{coupling:?}: {err}");
        }
    }

    #[test]
    fn pendulum_record_at_rest() {
        let s = pendulum_subsystem(&PmsdParams::default()).unwrap();
        let z = s.rest_state(0.3);
        let r = s.residual(&z, &DVector::zeros(6), 0.3);
        assert!(r.amax() < 1e-14);
        assert!(s.output(&z).abs() < 1e-14);
    }

    #[test]
    fn shift_closed_form_at_zero() {
        let d = ShiftData::standard(1.0);
        let x = d.exact(0.0);
        assert_eq!(x[0], 0.5);
        assert_eq!(x[1], d.g.eval(1.0)[0]);
        // x1' = phi2(t - tau) + f(t)
        let h = 1e-5;
        let slope = (d.exact(0.5 + h)[0] - d.exact(0.5 - h)[0]) / (2.0 * h);
        let expect = d.history.eval(-0.5)[1] + d.f.eval(0.5)[0];
        assert!((slope - expect).abs() < 1e-8);
    }
}
