mod common;

use common::{random_matrix, random_subsystem, shift_block, well_conditioned};
use ddae::forcing::ForcingFunction;
use ddae::lti::{self, LinearDdae, LtiDescriptor};
use ddae::models;
use ddae::pencil::{self, MatrixPencil, DEFAULT_TOL};
use ddae::Classification;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn hybrid_determinant_is_block_triangular() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let (n1, n2) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let (m1, m2) = (rng.gen_range(1..3), rng.gen_range(1..3));
        let sing = rng.gen_bool(0.2);
        let s1 = random_subsystem(&mut rng, n1, m1, m2, sing);
        let sing = rng.gen_bool(0.2);
        let s2 = random_subsystem(&mut rng, n2, m2, m1, sing);
        let h = lti::hybrid_shifted(&s1, &s2, 0.5).unwrap().pencil();
        for sample in pencil::det_samples(&h, DEFAULT_TOL) {
            let s = Complex64::new(sample.s[0], sample.s[1]);
            let whole = h.det_at(s);
            let parts = s1.pencil().det_at(s) * s2.pencil().det_at(s);
            // Natural magnitude (|E||s| + |A|)^n of the determinant.
            let natural = sample.threshold / DEFAULT_TOL;
            let scale = whole.norm().max(parts.norm()).max(natural);
            assert!((whole - parts).norm() <= 1e-8 * scale, "{whole} vs {parts}");
        }
    }
}

#[test]
fn regularity_theorem_on_random_and_example_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let (n1, n2) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let sing = rng.gen_bool(0.3);
        let s1 = random_subsystem(&mut rng, n1, 1, 2, sing);
        let sing = rng.gen_bool(0.3);
        let s2 = random_subsystem(&mut rng, n2, 2, 1, sing);
        assert!(lti::regularity_theorem_check(&s1, &s2, 1.0, DEFAULT_TOL));
    }
    for c in [-2.0, 0.0, 0.5, 1.0] {
        let (s1, s2) = models::split_index_subsystems(c).unwrap();
        assert!(lti::regularity_theorem_check(&s1, &s2, 1.0, DEFAULT_TOL));
    }
    for c in [0.0, 1.0, -1.0, 0.3] {
        let (s1, s2) = models::shifted_index_subsystems(0.5, 0.5, c, 0.5).unwrap();
        assert!(lti::regularity_theorem_check(&s1, &s2, 1.0, DEFAULT_TOL));
    }
}

#[test]
fn classification_invariant_under_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let advanced = models::advanced_example_linear(1.0).unwrap();
    let (s1, s2) = models::shifted_index_subsystems(0.5, 0.5, 1.0, 0.5).unwrap();
    let hybrid = lti::hybrid_shifted(&s1, &s2, 1.0).unwrap();
    let shift = models::ShiftData::standard(1.0).system(true).unwrap();
    for sys in [advanced, hybrid, shift] {
        let base = lti::classify_linear(&sys, DEFAULT_TOL).unwrap();
        let n = sys.dim();
        for _ in 0..50 {
            let p = well_conditioned(&mut rng, n);
            let q = well_conditioned(&mut rng, n);
            let moved = LinearDdae::new(
                &p * sys.e() * &q,
                &p * sys.a0() * &q,
                &p * sys.a1() * &q,
                sys.tau(),
                ForcingFunction::zeros(n),
            )
            .unwrap();
            assert_eq!(lti::classify_linear(&moved, DEFAULT_TOL).unwrap(), base);
        }
    }
}

#[test]
fn algebraic_solution_satisfies_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    // Algebraic part with nilpotency 3 plus one differential state.
    let e0 = common::block_diag(&DMatrix::identity(1, 1), &shift_block(3));
    let a0 = common::block_diag(&DMatrix::from_element(1, 1, -0.5), &DMatrix::identity(3, 3));
    let p = well_conditioned(&mut rng, 4);
    let q = well_conditioned(&mut rng, 4);
    let pen = MatrixPencil::new(&p * e0 * &q, &p * a0 * &q).unwrap();
    let w = pencil::weierstrass(&pen, DEFAULT_TOL).unwrap();
    assert_eq!((w.n_diff, w.index), (1, 3));
    for degree in 0..=3 {
        let coeffs = |rng: &mut ChaCha8Rng, dim: usize| -> Vec<Vec<f64>> {
            (0..dim).map(|_| (0..=degree).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
        };
        let u = ForcingFunction::polynomial(coeffs(&mut rng, 2));
        let fa = ForcingFunction::polynomial(coeffs(&mut rng, 3));
        let ba = random_matrix(&mut rng, 3, 2);
        for t in [-1.0, 0.0, 0.3, 2.0] {
            let za = lti::algebraic_solution(&w, &ba, &u, &fa, t).unwrap();
            let mut zdot = DVector::zeros(3);
            let mut power = DMatrix::identity(3, 3);
            for j in 0..w.index {
                zdot -= &power * (&ba * u.derivative(t, j + 1).unwrap() + fa.derivative(t, j + 1).unwrap());
                power = &w.nilpotent * power;
            }
            let r = &w.nilpotent * zdot - &za - &ba * u.eval(t) - fa.eval(t);
            assert!(r.amax() < 1e-12, "degree {degree}: {r}");
        }
    }
}

#[test]
fn consistency_against_algebraic_solution() {
    let (s1, s2) = models::split_index_subsystems(0.5).unwrap();
    let full = lti::couple(&s1, &s2).unwrap();
    // Unforced index-1 system: algebraic components vanish in Weierstrass
    // coordinates, i.e. z = T [x; 0].
    let w = pencil::weierstrass(&full.pencil(), DEFAULT_TOL).unwrap();
    let z0 = w.right.columns(0, w.n_diff) * DVector::from_element(w.n_diff, 1.3);
    let u = ForcingFunction::zeros(0);
    assert!(lti::is_consistent(&full, &z0, &u, 0.0, 1e-10).unwrap());
    let bad = &z0 + w.right.column(w.n_diff);
    assert!(!lti::is_consistent(&full, &bad, &u, 0.0, 1e-10).unwrap());
}

#[test]
fn zero_delay_substitution_recovers_coupling() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let s1 = random_subsystem(&mut rng, 3, 2, 1, false);
        let s2 = random_subsystem(&mut rng, 2, 1, 2, false);
        let h = lti::hybrid_shifted(&s1, &s2, 0.1).unwrap();
        let c = lti::couple(&s1, &s2).unwrap();
        assert_eq!(h.e(), c.e());
        assert_eq!(&(h.a0() + h.a1()), c.a());
    }
}

#[test]
fn json_schemas() {
    let s: LtiDescriptor = serde_json::from_str(r#"{"E":[[1,0],[0,0]],"A":[[0,1],[1,0]],"B":[[0],[1]],"C":[[0,1]]}"#).unwrap();
    assert_eq!((s.dim(), s.inputs(), s.outputs()), (2, 1, 1));
    let back: LtiDescriptor = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(back.a(), s.a());

    let d: LinearDdae =
        serde_json::from_str(r#"{"E":[[1,0],[0,0]],"A0":[[0,1],[1,0]],"A1":[[0,0],[0,-1]],"tau":1}"#).unwrap();
    assert_eq!(lti::classify_linear(&d, DEFAULT_TOL).unwrap(), Classification::Advanced(2));
    assert!(serde_json::from_str::<LinearDdae>(r#"{"E":[[1]],"A0":[[0]],"A1":[[0]],"tau":0}"#).is_err());
    assert!(serde_json::from_str::<LtiDescriptor>(r#"{"E":[[1,0]],"A":[[0]]}"#).is_err());
}
