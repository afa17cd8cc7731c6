//! An advanced DDAE breaks down at the first breakpoint for a generic history.

use ddae::integrator::IntegratorOptions;
use ddae::models::{advanced_example_history, AdvancedExample};
use ddae::{mos, Status};

fn main() -> ddae::Result<()> {
    let model = AdvancedExample { tau: 1.0 };
    println!("classification: {:?}", ddae::ddae::classify(&model));

    let tr = mos::solve_itp(&model, &advanced_example_history(), 3.0, &IntegratorOptions::default())?;
    match tr.status {
        Status::Complete => println!("completed on [0, {}]", tr.covered_until()),
        Status::BrokeDown { index, time, residual } => {
            println!("breakdown entering segment {index} at t={time}, residual {residual:.3}")
        }
    }
    let z = mos::evaluate(&tr, 0.5, 0)?;
    println!("z(0.5) = [{:.6}, {:.6}]", z[0], z[1]);
    Ok(())
}
