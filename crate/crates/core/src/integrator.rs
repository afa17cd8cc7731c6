//! Three-stage Radau IIA collocation for one delay-free segment.
//!
//! Delayed quantities are known functions of time on a segment, so each
//! step solves the stacked `[D; A]` system at the three collocation
//! points with a full Newton iteration. The scheme is stiffly accurate:
//! the step endpoint is the last stage, where `A = 0` is enforced.

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::ddae::{self, SfDdaeModel};
use crate::error::{Error, Result};
use crate::forcing::HistoryFunction;
use crate::linalg;

const CONDITION_WARNING: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorOptions {
    /// Nominal step; `tau / 200` when absent.
    pub h: Option<f64>,
    pub newton_tol: f64,
    pub res_tol: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
    /// Bound on the algebraic residual of segment initial values.
    pub consistency_tol: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            h: None,
            newton_tol: 1e-10,
            res_tol: 1e-8,
            max_newton: 10,
            max_halvings: 8,
            consistency_tol: 1e-6,
        }
    }
}

impl IntegratorOptions {
    pub fn step_for(&self, tau: f64) -> f64 {
        self.h.unwrap_or(tau / 200.0)
    }

    pub fn min_step(tau: f64) -> f64 {
        tau / 32768.0
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{what} must be positive, got {v}")))
            }
        };
        if let Some(h) = self.h {
            positive(h, "h")?;
        }
        positive(self.newton_tol, "newton tolerance")?;
        positive(self.res_tol, "residual tolerance")?;
        positive(self.consistency_tol, "consistency tolerance")?;
        if self.max_newton == 0 {
            return Err(Error::InvalidParameter("max_newton must be at least 1".into()));
        }
        Ok(())
    }
}

/// Solution values (and derivatives) at delayed times.
pub trait DelayedSource: Sync {
    /// `z^(k)(s)`.
    fn eval(&self, s: f64, k: usize) -> Result<DVector<f64>>;
}

impl DelayedSource for HistoryFunction {
    fn eval(&self, s: f64, k: usize) -> Result<DVector<f64>> {
        self.derivative(s, k)
    }
}

/// Delayed argument bundle `[z(t - tau), z'(t - tau), ...]`.
pub fn delayed_bundle(m: &dyn SfDdaeModel, source: &dyn DelayedSource, t: f64) -> Result<Vec<DVector<f64>>> {
    let s = t - m.tau();
    (0..ddae::delayed_len(m)).map(|k| source.eval(s, k)).collect()
}

pub struct SegmentProblem<'a> {
    pub model: &'a dyn SfDdaeModel,
    pub t_start: f64,
    pub t_end: f64,
    pub source: &'a dyn DelayedSource,
    pub z0: DVector<f64>,
}

/// One accepted step with cubic Hermite data.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub t0: f64,
    pub t1: f64,
    pub z0: DVector<f64>,
    pub z1: DVector<f64>,
    pub d0: DVector<f64>,
    pub d1: DVector<f64>,
}

impl Step {
    fn eval(&self, t: f64, k: usize) -> DVector<f64> {
        let h = self.t1 - self.t0;
        if k == 0 {
            if t <= self.t0 {
                return self.z0.clone();
            }
            if t >= self.t1 {
                return self.z1.clone();
            }
        }
        let s = ((t - self.t0) / h).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        if k == 0 {
            &self.z0 * (2.0 * s3 - 3.0 * s2 + 1.0)
                + &self.d0 * (h * (s3 - 2.0 * s2 + s))
                + &self.z1 * (-2.0 * s3 + 3.0 * s2)
                + &self.d1 * (h * (s3 - s2))
        } else {
            (&self.z1 - &self.z0) * ((6.0 * s - 6.0 * s2) / h)
                + &self.d0 * (3.0 * s2 - 4.0 * s + 1.0)
                + &self.d1 * (3.0 * s2 - 2.0 * s)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub steps: usize,
    pub newton_iterations: usize,
    pub halvings: usize,
    /// Largest endpoint residual of `[D; A]` over accepted steps.
    pub max_residual: f64,
    /// Largest stage Jacobian condition estimate observed.
    pub max_condition: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentSolution {
    pub t_start: f64,
    pub t_end: f64,
    pub steps: Vec<Step>,
    pub stats: SegmentStats,
}

impl SegmentSolution {
    pub fn mesh(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.steps.iter().map(|s| s.t0).collect();
        if let Some(last) = self.steps.last() {
            m.push(last.t1);
        }
        m
    }

    pub fn states(&self) -> Vec<DVector<f64>> {
        let mut v: Vec<DVector<f64>> = self.steps.iter().map(|s| s.z0.clone()).collect();
        if let Some(last) = self.steps.last() {
            v.push(last.z1.clone());
        }
        v
    }

    pub fn start_state(&self) -> &DVector<f64> {
        &self.steps[0].z0
    }

    /// Left limit at the segment end.
    pub fn end_state(&self) -> &DVector<f64> {
        &self.steps.last().expect("segments are never empty").z1
    }

    /// Dense output on the closed segment; interior mesh points use the
    /// step to their right.
    pub fn eval(&self, t: f64, k: usize) -> Result<DVector<f64>> {
        if k > 1 {
            return Err(Error::Differentiability {
                requested: k,
                available: 1,
            });
        }
        let slack = 1e-12 * (self.t_end - self.t_start).max(self.t_end.abs());
        if !(t >= self.t_start - slack && t <= self.t_end + slack) {
            return Err(Error::OutOfRange {
                t,
                lo: self.t_start,
                hi: self.t_end,
            });
        }
        let i = self.steps.partition_point(|s| s.t0 <= t).max(1) - 1;
        Ok(self.steps[i].eval(t, k))
    }
}

struct Tableau {
    c: [f64; 3],
    /// Inverse of the Butcher matrix.
    w: Matrix3<f64>,
    /// Derivative weights at the step start for nodes `[0, c1, c2, c3]`.
    start_slope: [f64; 4],
}

fn lagrange_derivative(nodes: &[f64], m: usize, x: f64) -> f64 {
    let mut total = 0.0;
    for k in 0..nodes.len() {
        if k == m {
            continue;
        }
        let mut term = 1.0 / (nodes[m] - nodes[k]);
        for l in 0..nodes.len() {
            if l != m && l != k {
                term *= (x - nodes[l]) / (nodes[m] - nodes[l]);
            }
        }
        total += term;
    }
    total
}

impl Tableau {
    fn radau3() -> Self {
        let r6 = 6f64.sqrt();
        let c = [(4.0 - r6) / 10.0, (4.0 + r6) / 10.0, 1.0];
        let a = Matrix3::new(
            (88.0 - 7.0 * r6) / 360.0,
            (296.0 - 169.0 * r6) / 1800.0,
            (-2.0 + 3.0 * r6) / 225.0,
            (296.0 + 169.0 * r6) / 1800.0,
            (88.0 + 7.0 * r6) / 360.0,
            (-2.0 - 3.0 * r6) / 225.0,
            (16.0 - r6) / 36.0,
            (16.0 + r6) / 36.0,
            1.0 / 9.0,
        );
        let w = a.try_inverse().expect("Radau matrix is invertible");
        let nodes = [0.0, c[0], c[1], c[2]];
        let start_slope = [0, 1, 2, 3].map(|m| lagrange_derivative(&nodes, m, 0.0));
        Tableau { c, w, start_slope }
    }
}

enum Attempt {
    Accepted {
        step: Step,
        iterations: usize,
        residual: f64,
        condition: Option<f64>,
    },
    Failed {
        residual: f64,
        iterate: DVector<f64>,
        condition: Option<f64>,
    },
}

struct Stepper<'a> {
    model: &'a dyn SfDdaeModel,
    source: &'a dyn DelayedSource,
    opts: &'a IntegratorOptions,
    tab: Tableau,
}

impl Stepper<'_> {
    fn stage_derivatives(&self, y0: &DVector<f64>, stages: &[DVector<f64>; 3], h: f64) -> [DVector<f64>; 3] {
        std::array::from_fn(|i| {
            let mut d = DVector::zeros(y0.len());
            for j in 0..3 {
                d += (&stages[j] - y0) * (self.tab.w[(i, j)] / h);
            }
            d
        })
    }

    fn attempt(&self, t0: f64, t1: f64, y0: &DVector<f64>, slope: &DVector<f64>, want_condition: bool) -> Result<Attempt> {
        let m = self.model;
        let n = m.dim();
        let nd = m.n_differential();
        let h = t1 - t0;
        let times: [f64; 3] = std::array::from_fn(|i| if i == 2 { t1 } else { t0 + self.tab.c[i] * h });
        let delayed: Vec<Vec<DVector<f64>>> = times
            .iter()
            .map(|&t| delayed_bundle(m, self.source, t))
            .collect::<Result<_>>()?;

        let mut stages: [DVector<f64>; 3] = std::array::from_fn(|i| y0 + slope * (self.tab.c[i] * h));
        let mut condition = None;
        let mut last_residual = f64::INFINITY;

        let stack = |stages: &[DVector<f64>; 3]| -> DVector<f64> {
            let dots = self.stage_derivatives(y0, stages, h);
            let mut f = DVector::zeros(3 * n);
            for i in 0..3 {
                let d = m.differential(times[i], &stages[i], &dots[i], &delayed[i]);
                let a = m.algebraic(times[i], &stages[i], &delayed[i]);
                f.rows_mut(i * n, nd).copy_from(&d);
                f.rows_mut(i * n + nd, n - nd).copy_from(&a);
            }
            f
        };
        let flatten = |stages: &[DVector<f64>; 3]| {
            DVector::from_iterator(3 * n, stages.iter().flat_map(|s| s.iter().copied()))
        };

        for iter in 0..self.opts.max_newton {
            let dots = self.stage_derivatives(y0, &stages, h);
            let f = stack(&stages);
            last_residual = f.amax();
            if !last_residual.is_finite() {
                break;
            }
            let mut jac = DMatrix::zeros(3 * n, 3 * n);
            for i in 0..3 {
                let (dz, dzdot) = m.differential_jacobians(times[i], &stages[i], &dots[i], &delayed[i]);
                let az = m.algebraic_jacobian(times[i], &stages[i], &delayed[i]);
                for j in 0..3 {
                    let mut block = DMatrix::zeros(n, n);
                    let mut top = &dzdot * (self.tab.w[(i, j)] / h);
                    if i == j {
                        top += &dz;
                        block.rows_mut(nd, n - nd).copy_from(&az);
                    }
                    block.rows_mut(0, nd).copy_from(&top);
                    jac.view_mut((i * n, j * n), (n, n)).copy_from(&block);
                }
            }
            if want_condition && iter == 0 {
                let c = linalg::condition(&jac);
                if c > CONDITION_WARNING {
                    log::warn!("stage Jacobian of `{}` at t = {t0} has condition {c:e}", m.name());
                }
                condition = Some(c);
            }
            let Some(delta) = jac.lu().solve(&f) else {
                log::debug!("singular stage Jacobian at t = {t0}, h = {h:e}");
                break;
            };
            for i in 0..3 {
                stages[i] -= delta.rows(i * n, n);
            }
            let y = flatten(&stages);
            if !y.iter().all(|v| v.is_finite()) {
                break;
            }
            if delta.amax() <= self.opts.newton_tol * (1.0 + y.amax()) {
                let f = stack(&stages);
                let end = f.rows(2 * n, n).amax();
                if end <= self.opts.res_tol {
                    let dots = self.stage_derivatives(y0, &stages, h);
                    let mut d0 = y0 * self.tab.start_slope[0];
                    for j in 0..3 {
                        d0 += &stages[j] * self.tab.start_slope[j + 1];
                    }
                    d0 /= h;
                    let [_, _, z1] = stages;
                    let [_, _, d1] = dots;
                    return Ok(Attempt::Accepted {
                        step: Step {
                            t0,
                            t1,
                            z0: y0.clone(),
                            z1,
                            d0,
                            d1,
                        },
                        iterations: iter + 1,
                        residual: end,
                        condition,
                    });
                }
                last_residual = end;
                break;
            }
        }
        Ok(Attempt::Failed {
            residual: last_residual,
            iterate: flatten(&stages),
            condition,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn advance(
        &self,
        t0: f64,
        t1: f64,
        y0: &DVector<f64>,
        slope: &DVector<f64>,
        depth: usize,
        h_min: f64,
        out: &mut SegmentSolution,
    ) -> Result<()> {
        let want_condition = out.steps.is_empty() || depth > 0;
        match self.attempt(t0, t1, y0, slope, want_condition)? {
            Attempt::Accepted {
                step,
                iterations,
                residual,
                condition,
            } => {
                out.stats.steps += 1;
                out.stats.newton_iterations += iterations;
                out.stats.max_residual = out.stats.max_residual.max(residual);
                if let Some(c) = condition {
                    out.stats.max_condition = out.stats.max_condition.max(c);
                }
                out.steps.push(step);
                Ok(())
            }
            Attempt::Failed {
                residual,
                iterate,
                condition,
            } => {
                if let Some(c) = condition {
                    out.stats.max_condition = out.stats.max_condition.max(c);
                }
                let half = 0.5 * (t1 - t0);
                if depth >= self.opts.max_halvings || half < h_min {
                    return Err(Error::NewtonDivergence {
                        t: t0,
                        residual,
                        iterate: iterate.iter().copied().collect(),
                    });
                }
                log::debug!("halving step at t = {t0} (residual {residual:e})");
                out.stats.halvings += 1;
                let mid = t0 + half;
                self.advance(t0, mid, y0, slope, depth + 1, h_min, out)?;
                let last = out.steps.last().expect("step just accepted");
                let (y_mid, s_mid) = (last.z1.clone(), last.d1.clone());
                self.advance(mid, t1, &y_mid, &s_mid, depth + 1, h_min, out)
            }
        }
    }
}

/// Solves one segment on a uniform mesh with the nominal step density.
pub fn integrate_segment(p: &SegmentProblem<'_>, opts: &IntegratorOptions) -> Result<SegmentSolution> {
    opts.validate()?;
    let m = p.model;
    let len = p.t_end - p.t_start;
    if !(len > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "empty segment [{}, {}]",
            p.t_start, p.t_end
        )));
    }
    if p.z0.len() != m.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has dimension {}, model {}",
            p.z0.len(),
            m.dim()
        )));
    }
    let delayed = delayed_bundle(m, p.source, p.t_start)?;
    let r = m.algebraic(p.t_start, &p.z0, &delayed).norm();
    if !(r <= opts.consistency_tol) {
        return Err(Error::InconsistentInitialState { residual: r });
    }
    ddae::check_constraint_rank(m, p.t_start, &p.z0, &delayed, crate::pencil::DEFAULT_TOL)?;

    let h = opts.step_for(m.tau());
    let count = ((len / h) - 1e-9).ceil().max(1.0) as usize;
    let h_min = IntegratorOptions::min_step(m.tau());
    let stepper = Stepper {
        model: m,
        source: p.source,
        opts,
        tab: Tableau::radau3(),
    };
    let mut out = SegmentSolution {
        t_start: p.t_start,
        t_end: p.t_end,
        steps: Vec::with_capacity(count),
        stats: SegmentStats::default(),
    };
    let mut y = p.z0.clone();
    let mut slope = DVector::zeros(m.dim());
    for k in 0..count {
        let t0 = p.t_start + len * k as f64 / count as f64;
        let t1 = if k + 1 == count {
            p.t_end
        } else {
            p.t_start + len * (k + 1) as f64 / count as f64
        };
        stepper.advance(t0, t1, &y, &slope, 0, h_min, &mut out)?;
        let last = out.steps.last().expect("step accepted");
        y = last.z1.clone();
        slope = last.d1.clone();
    }
    Ok(out)
}

/// Nearest consistent point by Gauss-Newton on `A` with pseudoinverse
/// steps; components `A` does not depend on are left untouched.
pub fn project_consistent(
    m: &dyn SfDdaeModel,
    z_guess: &DVector<f64>,
    t: f64,
    source: &dyn DelayedSource,
) -> Result<DVector<f64>> {
    if z_guess.len() != m.dim() {
        return Err(Error::DimensionMismatch("state dimension".into()));
    }
    let delayed = delayed_bundle(m, source, t)?;
    let mut z = z_guess.clone();
    if m.n_algebraic() == 0 {
        return Ok(z);
    }
    let jac0 = m.algebraic_jacobian(t, &z, &delayed);
    let norms: Vec<f64> = (0..m.dim()).map(|j| jac0.column(j).norm()).collect();
    let biggest = norms.iter().cloned().fold(0.0, f64::max);
    let active: Vec<usize> = (0..m.dim()).filter(|&j| norms[j] > 1e-14 * biggest).collect();

    let mut r = m.algebraic(t, &z, &delayed);
    for _ in 0..50 {
        let scale = 1.0 + z.amax();
        if r.amax() <= 1e-14 * scale {
            return Ok(z);
        }
        let jac = m.algebraic_jacobian(t, &z, &delayed);
        let sub = DMatrix::from_fn(jac.nrows(), active.len(), |i, j| jac[(i, active[j])]);
        let eps = 1e-12 * linalg::spectral_norm(&sub).max(f64::MIN_POSITIVE);
        let pinv = linalg::pseudo_inverse(&sub, eps);
        let step = pinv * &r;
        for (k, &j) in active.iter().enumerate() {
            z[j] -= step[k];
        }
        r = m.algebraic(t, &z, &delayed);
        if step.amax() <= 1e-15 * scale && r.amax() <= 1e-10 * scale {
            return Ok(z);
        }
    }
    if r.amax() <= 1e-12 * (1.0 + z.amax()) {
        return Ok(z);
    }
    Err(Error::ProjectionFailed { residual: r.norm() })
}
