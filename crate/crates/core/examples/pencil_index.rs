//! Regularity and differentiation index of a few descriptor pencils.

use ddae::models::split_index_system;
use ddae::pencil::{self, MatrixPencil, DEFAULT_TOL};

fn main() -> ddae::Result<()> {
    let nilpotent = MatrixPencil::from_row_slices(
        3,
        &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
    )?;
    let report = pencil::analyze(&nilpotent, DEFAULT_TOL)?;
    println!("3x3 nilpotent chain: regular={} nu={:?}", report.regular, report.nu);

    for c in [-1.0, 0.5, 2.0] {
        let p = split_index_system(c)?;
        let w = pencil::weierstrass(&p, DEFAULT_TOL)?;
        let (re, ra) = pencil::equivalence_residual(&p, &w);
        println!(
            "split system c={c}: d={} a={} nu={} residual={:.1e}",
            w.n_diff,
            w.n_alg,
            w.index,
            re.max(ra)
        );
    }

    let singular = MatrixPencil::from_row_slices(2, &[1.0, 0.0, 0.0, 0.0], &[0.0; 4])?;
    println!("zero coupling block: regular={}", pencil::is_regular(&singular, DEFAULT_TOL));
    Ok(())
}
