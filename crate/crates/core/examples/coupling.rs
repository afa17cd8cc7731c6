//! Couple two descriptor subsystems directly and through a delayed interface.

use ddae::lti::{self, LtiDescriptor};
use ddae::pencil::{self, DEFAULT_TOL};
use ddae::models::shifted_index_subsystems;

fn main() -> ddae::Result<()> {
    let (s1, s2): (LtiDescriptor, LtiDescriptor) = shifted_index_subsystems(0.5, 0.5, 1.0, 0.5)?;

    let coupled = lti::couple(&s1, &s2)?;
    let nu = pencil::diff_index(&coupled.pencil(), DEFAULT_TOL)?;
    println!("instantaneous coupling: n={} nu={nu}", coupled.dim());

    let tau = 0.1;
    let hybrid = lti::hybrid_shifted(&s1, &s2, tau)?;
    let structure = lti::linear_structure(&hybrid, DEFAULT_TOL)?;
    println!(
        "delayed coupling (tau={tau}): nu={} type={:?}",
        structure.form.index, structure.classification
    );
    println!(
        "regular iff both subsystems regular: {}",
        lti::regularity_theorem_check(&s1, &s2, tau, DEFAULT_TOL)
    );
    Ok(())
}
