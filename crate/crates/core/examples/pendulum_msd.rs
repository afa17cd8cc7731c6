//! Pendulum on a mass-spring-damper, coupled through a delayed force.

use ddae::integrator::IntegratorOptions;
use ddae::models::{pmsd_hybrid_shifted, state, PmsdParams};
use ddae::mos;

fn main() -> ddae::Result<()> {
    let params = PmsdParams::default();
    let model = pmsd_hybrid_shifted(&params)?;
    let z0 = model.rest_perturbed_state(0.1, 0.0);
    let history = ddae::HistoryFunction::constant(z0.as_slice());

    let tr = mos::solve_itp(&model, &history, 2.0, &IntegratorOptions::default())?;
    println!("status: {:?}, segments: {}", tr.status, tr.segments.len());
    let audit = mos::audit(&model, &tr, 401)?;
    println!("audit: {audit:?}");
    for t in [0.0, 0.5, 1.0, 1.5, 2.0] {
        let z = mos::evaluate(&tr, t, 0)?;
        println!(
            "t={t:.1} y1={:+.5} x2={:+.5} y2={:+.5} energy={:.6}",
            z[state::Y1],
            z[state::X2],
            z[state::Y2],
            model.energy(&z)
        );
    }
    Ok(())
}
