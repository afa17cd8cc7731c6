//! A shifted delay system against its closed-form solution on the first interval.

use ddae::integrator::IntegratorOptions;
use ddae::ddae::wrap_linear;
use ddae::models::ShiftData;
use ddae::pencil::DEFAULT_TOL;
use ddae::mos;

fn main() -> ddae::Result<()> {
    let data = ShiftData::standard(1.0);
    let sys = data.system(true)?;
    let model = wrap_linear("shift", &sys, DEFAULT_TOL)?;
    println!("classification: {:?}", model.classification());

    let tr = mos::solve_itp(&model, &data.history, 1.0, &IntegratorOptions::default())?;
    let mut worst: f64 = 0.0;
    for i in 0..=20 {
        let t = i as f64 / 20.0;
        let z = mos::evaluate(&tr, t, 0)?;
        worst = worst.max((z - data.exact(t)).amax());
    }
    println!("max deviation from closed form on [0, 1]: {worst:.2e}");
    Ok(())
}
