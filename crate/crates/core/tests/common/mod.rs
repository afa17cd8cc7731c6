#![allow(dead_code)]

pub mod exact;

use nalgebra::DMatrix;
use rand::Rng;

/// Random matrix with entries uniform in `[-1, 1]`.
pub fn random_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

/// Random matrix with singular values in `[1, 4]`.
pub fn well_conditioned<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let q1 = random_matrix(rng, n, n).qr().q();
    let q2 = random_matrix(rng, n, n).qr().q();
    let s = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| rng.gen_range(1.0..4.0)));
    q1 * s * q2
}

/// Nilpotent single Jordan block of size `k`.
pub fn shift_block(k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
}

pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut(a.shape(), b.shape()).copy_from(b);
    m
}

/// Random descriptor subsystem. `E` has random rank; a singular pencil is
/// produced by zeroing a common row of `E` and `A`.
pub fn random_subsystem<R: Rng>(
    rng: &mut R,
    n: usize,
    inputs: usize,
    outputs: usize,
    singular: bool,
) -> ddae::LtiDescriptor {
    let rank = rng.gen_range(0..=n);
    let mut e = random_matrix(rng, n, rank) * random_matrix(rng, rank, n);
    let mut a = random_matrix(rng, n, n);
    if singular {
        let row = rng.gen_range(0..n);
        e.row_mut(row).fill(0.0);
        a.row_mut(row).fill(0.0);
    }
    ddae::LtiDescriptor::homogeneous(e, a, random_matrix(rng, n, inputs), random_matrix(rng, outputs, n)).unwrap()
}

/// `z' = -z^2`, exact solution `1 / (1 + t)` from `z(0) = 1`.
pub struct Riccati;

impl ddae::SfDdaeModel for Riccati {
    fn name(&self) -> &str {
        "riccati"
    }
    fn dim(&self) -> usize {
        1
    }
    fn n_differential(&self) -> usize {
        1
    }
    fn tau(&self) -> f64 {
        2.0
    }
    fn delay_order(&self) -> usize {
        0
    }
    fn differential(&self, _: f64, z: &nalgebra::DVector<f64>, zd: &nalgebra::DVector<f64>, _: &[nalgebra::DVector<f64>]) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_element(1, zd[0] + z[0] * z[0])
    }
    fn algebraic(&self, _: f64, _: &nalgebra::DVector<f64>, _: &[nalgebra::DVector<f64>]) -> nalgebra::DVector<f64> {
        nalgebra::DVector::zeros(0)
    }
    fn differential_jacobians(
        &self,
        _: f64,
        z: &nalgebra::DVector<f64>,
        _: &nalgebra::DVector<f64>,
        _: &[nalgebra::DVector<f64>],
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        (DMatrix::from_element(1, 1, 2.0 * z[0]), DMatrix::identity(1, 1))
    }
    fn algebraic_jacobian(&self, _: f64, _: &nalgebra::DVector<f64>, _: &[nalgebra::DVector<f64>]) -> DMatrix<f64> {
        DMatrix::zeros(0, 1)
    }
}
