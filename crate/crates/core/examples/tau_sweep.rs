//! Deviation of the delayed coupling from the direct one as the delay shrinks.

use ddae::integrator::IntegratorOptions;
use ddae::models::pmsd_sweep_family;
use ddae::mos;

fn main() -> ddae::Result<()> {
    let family = pmsd_sweep_family(&[])?;
    let taus = [0.05, 0.025, 0.0125];
    let entries = mos::tau_sweep(
        &family.builder,
        &family.reference,
        &taus,
        1.0,
        &family.outputs,
        201,
        &IntegratorOptions::default(),
    )?;
    for entry in entries {
        match entry {
            Ok(e) => println!("tau={:<7} deviation={:.3e}", e.tau, e.deviation),
            Err(err) => println!("failed: {err}"),
        }
    }
    Ok(())
}
