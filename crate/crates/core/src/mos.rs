//! Method of steps: a DDAE on `[0, T]` is solved as a chain of DAEs on
//! `[(i-1) tau, i tau]`, each reading its delayed arguments from the
//! previous segment (or the history on the first one) and starting from
//! the previous right limit.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddae::{self, SfDdaeModel};
use crate::error::{Error, Result};
use crate::forcing::HistoryFunction;
use crate::integrator::{self, DelayedSource, IntegratorOptions, SegmentProblem, SegmentSolution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum Status {
    Complete,
    /// The right limit entering segment `index` violates the algebraic
    /// equations of that segment.
    BrokeDown { index: usize, time: f64, residual: f64 },
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub history: HistoryFunction,
    pub tau: f64,
    /// Requested horizon.
    pub horizon: f64,
    pub segments: Vec<SegmentSolution>,
    pub status: Status,
    /// Dense-output queries issued on segments while solving.
    pub dense_queries: usize,
}

impl Trajectory {
    /// `0, tau, 2 tau, ...` up to the last covered time.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = vec![0.0];
        b.extend(self.segments.iter().map(|s| s.t_end));
        b
    }

    /// End of the covered time range.
    pub fn covered_until(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.t_end)
    }

    pub fn is_complete(&self) -> bool {
        self.status == Status::Complete
    }

    fn locate(&self, t: f64) -> Option<usize> {
        // Right segment at interior breakpoints.
        let i = self.segments.partition_point(|s| s.t_start <= t);
        if i == 0 {
            return None;
        }
        let last = self.segments.len() - 1;
        Some((i - 1).min(last))
    }
}

/// `z^(k)(t)`: history for `t < 0`, otherwise the segment containing
/// `t`, taking the right segment at breakpoints.
pub fn evaluate(tr: &Trajectory, t: f64, k: usize) -> Result<DVector<f64>> {
    if k > 1 {
        return Err(Error::Differentiability {
            requested: k,
            available: 1,
        });
    }
    let hi = tr.covered_until();
    if !(t >= -tr.tau * (1.0 + 1e-12)) || t > hi + 1e-12 * hi.abs().max(tr.tau) {
        return Err(Error::OutOfRange { t, lo: -tr.tau, hi });
    }
    if t < 0.0 || (t == 0.0 && tr.segments.is_empty()) {
        return tr.history.derivative(t, k);
    }
    match tr.locate(t) {
        Some(i) => tr.segments[i].eval(t, k),
        None => tr.history.derivative(t, k),
    }
}

/// Delayed source for one segment: the previous segment on its closed
/// interval, or the history.
struct PreviousSegment<'a> {
    segment: &'a SegmentSolution,
    queries: &'a AtomicUsize,
}

impl DelayedSource for PreviousSegment<'_> {
    fn eval(&self, s: f64, k: usize) -> Result<DVector<f64>> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.segment.eval(s, k)
    }
}

pub fn solve_itp(
    m: &dyn SfDdaeModel,
    phi: &HistoryFunction,
    horizon: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    if m.delay_order() >= 3 {
        return Err(Error::Unsupported(format!(
            "`{}` declares delay-derivative order {}; dense output supports at most first derivatives",
            m.name(),
            m.delay_order()
        )));
    }
    opts.validate()?;
    let tau = m.tau();
    let adm = ddae::admissible(m, phi, opts.consistency_tol)?;
    if !adm.admissible {
        return Err(Error::InadmissibleHistory {
            residual: adm.norm(),
        });
    }

    let count = ((horizon / tau) - 1e-9).ceil().max(1.0) as usize;
    let queries = AtomicUsize::new(0);
    let mut segments: Vec<SegmentSolution> = Vec::with_capacity(count);
    let mut status = Status::Complete;
    for i in 1..=count {
        let t_start = (i - 1) as f64 * tau;
        let t_end = if i == count { horizon } else { i as f64 * tau };
        let solved = {
            let prev = segments.last().map(|segment| PreviousSegment {
                segment,
                queries: &queries,
            });
            let source: &dyn DelayedSource = match &prev {
                Some(p) => p,
                None => phi,
            };
            let z0 = match segments.last() {
                Some(s) => s.end_state().clone(),
                None => phi.eval(0.0),
            };
            if i > 1 {
                let delayed = integrator::delayed_bundle(m, source, t_start)?;
                let residual = m.algebraic(t_start, &z0, &delayed).norm();
                log::debug!("breakpoint {i}: algebraic residual {residual:e}");
                if !(residual <= opts.consistency_tol) {
                    status = Status::BrokeDown {
                        index: i,
                        time: t_start,
                        residual,
                    };
                    break;
                }
            }
            let problem = SegmentProblem {
                model: m,
                t_start,
                t_end,
                source,
                z0,
            };
            integrator::integrate_segment(&problem, opts).map_err(|e| Error::Segment {
                index: i,
                source: Box::new(e),
            })?
        };
        segments.push(solved);
    }
    Ok(Trajectory {
        history: phi.clone(),
        tau,
        horizon,
        segments,
        status,
        dense_queries: queries.into_inner(),
    })
}

/// Delayed bundle at `t` as the solver saw it: the segment containing `t`
/// (right one at breakpoints) reads its predecessor on the closed
/// interval, or the history.
pub fn delayed_from_trajectory(m: &dyn SfDdaeModel, tr: &Trajectory, t: f64) -> Result<Vec<DVector<f64>>> {
    let s = t - tr.tau;
    let previous = match tr.locate(t) {
        Some(i) if i > 0 => Some(&tr.segments[i - 1]),
        Some(_) => None,
        None => return (0..ddae::delayed_len(m)).map(|k| evaluate(tr, s, k)).collect(),
    };
    (0..ddae::delayed_len(m))
        .map(|k| match previous {
            Some(seg) => seg.eval(s.max(seg.t_start), k),
            None => tr.history.derivative(s.min(0.0), k),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub points: usize,
    /// Largest `|[D; A]|_inf` over the grid.
    pub max_residual: f64,
    pub max_differential_residual: f64,
    pub max_algebraic_residual: f64,
    /// Largest algebraic residual per constraint.
    pub max_constraint_residuals: Vec<f64>,
    /// Largest algebraic residual at right limits of breakpoints.
    pub max_breakpoint_residual: f64,
}

/// Re-evaluates the original residual on `points` equispaced times of
/// the covered range, reading every argument through [`evaluate`].
pub fn audit(m: &dyn SfDdaeModel, tr: &Trajectory, points: usize) -> Result<AuditReport> {
    let hi = tr.covered_until();
    let a = m.n_algebraic();
    let nd = m.n_differential();
    let mut report = AuditReport {
        points,
        max_residual: 0.0,
        max_differential_residual: 0.0,
        max_algebraic_residual: 0.0,
        max_constraint_residuals: vec![0.0; a],
        max_breakpoint_residual: 0.0,
    };
    if tr.segments.is_empty() {
        return Ok(report);
    }
    for p in 0..points {
        let t = if points == 1 { 0.0 } else { hi * p as f64 / (points - 1) as f64 };
        let z = evaluate(tr, t, 0)?;
        let zd = evaluate(tr, t, 1)?;
        let delayed = delayed_from_trajectory(m, tr, t)?;
        let r = ddae::residual(m, t, &z, &zd, &delayed)?;
        let dr = r.rows(0, nd).amax();
        let ar = r.rows(nd, a);
        report.max_differential_residual = report.max_differential_residual.max(dr);
        for (slot, v) in report.max_constraint_residuals.iter_mut().zip(ar.iter()) {
            *slot = slot.max(v.abs());
        }
        if a > 0 {
            report.max_algebraic_residual = report.max_algebraic_residual.max(ar.amax());
        }
    }
    for s in &tr.segments {
        let delayed = delayed_from_trajectory(m, tr, s.t_start)?;
        let r = m.algebraic(s.t_start, s.start_state(), &delayed);
        if a > 0 {
            report.max_breakpoint_residual = report.max_breakpoint_residual.max(r.amax());
        }
    }
    report.max_residual = report
        .max_differential_residual
        .max(report.max_algebraic_residual);
    Ok(report)
}

/// Algebraic residual norm at time `t` with state `z`.
pub fn algebraic_residual_at(m: &dyn SfDdaeModel, tr: &Trajectory, t: f64, z: &DVector<f64>) -> Result<f64> {
    let delayed = delayed_from_trajectory(m, tr, t)?;
    Ok(m.algebraic(t, z, &delayed).norm())
}

/// CSV rows `t, z_1..z_n, segment_index, A_residual_norm` at every mesh
/// point; breakpoints appear once, as the start of the right segment.
pub fn write_csv<W: Write>(m: &dyn SfDdaeModel, tr: &Trajectory, out: W) -> Result<()> {
    let n = m.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("z_{i}")));
    header.push("segment_index".into());
    header.push("A_residual_norm".into());
    w.write_record(&header)?;
    let last = tr.segments.len();
    for (idx, seg) in tr.segments.iter().enumerate() {
        let mesh = seg.mesh();
        let states = seg.states();
        let take = if idx + 1 == last { mesh.len() } else { mesh.len() - 1 };
        for (t, z) in mesh.iter().zip(states.iter()).take(take) {
            let res = algebraic_residual_at(m, tr, *t, z)?;
            let mut row = vec![format!("{t:.12e}")];
            row.extend(z.iter().map(|v| format!("{v:.12e}")));
            row.push((idx + 1).to_string());
            row.push(format!("{res:.6e}"));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// A model together with the history it is started from.
pub type Instance = (Arc<dyn SfDdaeModel>, HistoryFunction);

#[derive(Clone, Debug)]
pub struct SweepEntry {
    pub tau: f64,
    pub trajectory: Trajectory,
    /// Max-norm deviation of the output components from the reference on
    /// the shared grid.
    pub deviation: f64,
}

/// Solves the `tau`-family in parallel and compares each member with a
/// delay-free reference on `grid` equispaced points of `[0, horizon]`.
/// Results are returned in the order of `taus`.
pub fn tau_sweep<F>(
    builder: F,
    reference: &Instance,
    taus: &[f64],
    horizon: f64,
    outputs: &[usize],
    grid: usize,
    opts: &IntegratorOptions,
) -> Result<Vec<Result<SweepEntry>>>
where
    F: Fn(f64) -> Result<Instance> + Sync,
{
    if taus.is_empty() {
        return Err(Error::InvalidParameter("empty delay list".into()));
    }
    if let Some(bad) = taus.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameter(format!("delay must be positive, got {bad}")));
    }
    let grid = grid.max(2);
    let reference_tr = solve_itp(reference.0.as_ref(), &reference.1, horizon, opts)?;
    if !reference_tr.is_complete() {
        return Err(Error::Data(format!("reference run stopped: {:?}", reference_tr.status)));
    }
    let times: Vec<f64> = (0..grid)
        .map(|i| horizon * i as f64 / (grid - 1) as f64)
        .collect();
    let reference_values: Vec<DVector<f64>> = times
        .iter()
        .map(|&t| evaluate(&reference_tr, t, 0))
        .collect::<Result<_>>()?;

    Ok(taus
        .par_iter()
        .map(|&tau| {
            let (model, phi) = builder(tau)?;
            let trajectory = solve_itp(model.as_ref(), &phi, horizon, opts)?;
            if !trajectory.is_complete() {
                return Err(Error::Data(format!("run with tau = {tau} stopped: {:?}", trajectory.status)));
            }
            let mut deviation: f64 = 0.0;
            for (t, r) in times.iter().zip(&reference_values) {
                let z = evaluate(&trajectory, *t, 0)?;
                for &c in outputs {
                    deviation = deviation.max((z[c] - r[c]).abs());
                }
            }
            Ok(SweepEntry {
                tau,
                trajectory,
                deviation,
            })
        })
        .collect())
}
