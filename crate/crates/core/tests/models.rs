use ddae::integrator::IntegratorOptions;
use ddae::lti;
use ddae::models::{self, state::*, Coupling, PendulumMsd, PmsdParams, Structure};
use ddae::mos;
use ddae::pencil::{self, DEFAULT_TOL};
use ddae::{Classification, HistoryFunction, SfDdaeModel};
use nalgebra::{DVector, Vector4};

/// Driven mass-spring-damper carrying a pendulum that does not act back:
/// states `(y1, v1, theta, omega)`.
fn rk4_uncoupled(p: &PmsdParams, force: f64, theta0: f64, y0: f64, t_end: f64, dt: f64) -> Vector4<f64> {
    let rhs = |s: &Vector4<f64>| {
        let acc = (force - p.damping * s[1] - p.stiffness * s[0]) / p.mass;
        Vector4::new(s[1], acc, s[3], -(p.gravity + acc) * s[2].sin() / p.length)
    };
    let mut s = Vector4::new(y0, 0.0, theta0, 0.0);
    let steps = (t_end / dt).round() as usize;
    for _ in 0..steps {
        let k1 = rhs(&s);
        let k2 = rhs(&(s + k1 * (dt / 2.0)));
        let k3 = rhs(&(s + k2 * (dt / 2.0)));
        let k4 = rhs(&(s + k3 * dt));
        s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    s
}

#[test]
fn constant_force_matches_uncoupled_oracle() {
    let p = PmsdParams::default();
    let force = -1.2;
    let m = PendulumMsd::new(p, Coupling::Constant(force)).unwrap();
    let (theta0, y0) = (0.25, 0.1);
    let phi = HistoryFunction::constant(m.rest_perturbed_state(theta0, y0).as_slice());
    let horizon = 0.5;
    let tr = mos::solve_itp(&m, &phi, horizon, &IntegratorOptions::default()).unwrap();
    assert!(tr.is_complete());
    for t in [0.1, 0.25, 0.5] {
        let s = rk4_uncoupled(&p, force, theta0, y0, t, 1e-4);
        let z = mos::evaluate(&tr, t, 0).unwrap();
        let expect = [
            (Y1, s[0]),
            (V1, s[1]),
            (X2, p.length * s[2].sin()),
            (Y2, s[0] - p.length * s[2].cos()),
        ];
        for (i, v) in expect {
            assert!((z[i] - v).abs() < 1e-6, "t={t} component {i}: {} vs {v}", z[i]);
        }
    }
}

#[test]
fn coupled_energy_decays_at_damping_rate() {
    for damping in [0.0, 0.3] {
        let p = PmsdParams {
            damping,
            tau: 0.1,
            ..PmsdParams::default()
        };
        let m = models::pmsd_coupled(&p).unwrap();
        let phi = HistoryFunction::constant(m.rest_perturbed_state(0.4, 0.2).as_slice());
        let tr = mos::solve_itp(&m, &phi, 2.0, &IntegratorOptions::default()).unwrap();
        let h0 = m.energy(&phi.eval(0.0));
        let mut prev = h0;
        let mut dissipated = 0.0;
        let n = 400;
        for k in 1..=n {
            let (t0, t1) = (2.0 * (k - 1) as f64 / n as f64, 2.0 * k as f64 / n as f64);
            let z = mos::evaluate(&tr, t1, 0).unwrap();
            let h = m.energy(&z);
            // Trapezoidal estimate of the integral of C v1^2.
            let v0 = mos::evaluate(&tr, t0, 0).unwrap()[V1];
            dissipated += 0.5 * (t1 - t0) * damping * (v0 * v0 + z[V1] * z[V1]);
            assert!(h <= prev + 1e-9, "energy grew at t={t1}");
            prev = h;
        }
        assert!((h0 - prev - dissipated).abs() < 1e-4 * (1.0 + dissipated), "{h0} {prev} {dissipated}");
    }
}

#[test]
fn composed_subsystems_satisfied_by_coupled_solution() {
    let p = PmsdParams {
        tau: 0.1,
        ..PmsdParams::default()
    };
    let m = models::pmsd_coupled(&p).unwrap();
    let msd = models::msd_subsystem(&p).unwrap();
    let pend = models::pendulum_subsystem(&p).unwrap();
    let phi = HistoryFunction::constant(m.rest_perturbed_state(0.3, 0.0).as_slice());
    let tr = mos::solve_itp(&m, &phi, 0.5, &IntegratorOptions::default()).unwrap();
    for t in [0.05, 0.17, 0.33, 0.5] {
        let z = mos::evaluate(&tr, t, 0).unwrap();
        let zd = mos::evaluate(&tr, t, 1).unwrap();
        // Pendulum record state (x2, y2, lambda, vx, vy, w) with w = y1.
        let zp = DVector::from_vec(vec![z[X2], z[Y2], z[LAMBDA], z[V2], z[V3], z[Y1]]);
        let zpd = DVector::from_vec(vec![zd[X2], zd[Y2], zd[LAMBDA], zd[V2], zd[V3], zd[Y1]]);
        let rp = pend.residual(&zp, &zpd, z[Y1]);
        // Mass-spring-damper driven by the pendulum output.
        let x = DVector::from_vec(vec![z[Y1], z[V1]]);
        let xd = DVector::from_vec(vec![zd[Y1], zd[V1]]);
        let u = DVector::from_element(1, pend.output(&zp));
        let rm = msd.e() * xd - msd.a() * x - msd.b() * u;
        assert!(rp.amax() < 1e-6 && rm.amax() < 1e-6, "t={t}: {rp} {rm}");
        assert!((msd.c() * DVector::from_vec(vec![z[Y1], z[V1]]))[0] == z[Y1]);
    }
}

#[test]
fn stated_properties_of_registry_models() {
    for c in [-2.0, -0.5, 0.5, 1.0, 3.0] {
        let (s1, s2) = models::split_index_subsystems(c).unwrap();
        let full = lti::couple(&s1, &s2).unwrap().pencil();
        assert_eq!(full.e(), models::split_index_system(c).unwrap().e());
        assert_eq!(full.a(), models::split_index_system(c).unwrap().a());
        assert_eq!(pencil::diff_index(&full, DEFAULT_TOL).unwrap(), 1);
        assert_eq!(pencil::diff_index(&s1.pencil(), DEFAULT_TOL).unwrap(), 2);
    }
    let (s1, _) = models::split_index_subsystems(0.0).unwrap();
    assert!(!pencil::is_regular(&s1.pencil(), DEFAULT_TOL));

    let b = models::lookup("ex-coupled-index").unwrap().build(&[]).unwrap();
    let Structure::Lti(sys) = &b.structure else { panic!() };
    assert_eq!(pencil::diff_index(&sys.pencil(), DEFAULT_TOL).unwrap(), 1);
    for (_, sub) in &b.subsystems {
        assert_eq!(pencil::diff_index(sub, DEFAULT_TOL).unwrap(), 1);
    }

    let data = models::ShiftData::standard(1.0);
    assert!(!pencil::is_regular(&data.system(false).unwrap().pencil(), DEFAULT_TOL));
    let shifted = data.system(true).unwrap();
    assert_eq!(pencil::diff_index(&shifted.pencil(), DEFAULT_TOL).unwrap(), 1);
    assert_eq!(lti::classify_linear(&shifted, DEFAULT_TOL).unwrap(), Classification::Retarded);

    let adv = models::advanced_example_linear(1.0).unwrap();
    assert_eq!(lti::classify_linear(&adv, DEFAULT_TOL).unwrap(), Classification::Advanced(2));

    let pend = models::pendulum_subsystem(&PmsdParams::default()).unwrap();
    assert_eq!((pend.strangeness_index(), pend.n_differential(), pend.n_algebraic()), (2, 2, 4));

    let hybrid = models::pmsd_hybrid_shifted(&PmsdParams::default()).unwrap();
    assert_eq!((hybrid.n_differential(), hybrid.n_algebraic()), (4, 3));
    assert_eq!(ddae::ddae::classify(&hybrid), Classification::Neutral);
    let coupled = models::pmsd_coupled(&PmsdParams::default()).unwrap();
    assert_eq!(ddae::ddae::classify(&coupled), Classification::Retarded);
}

#[test]
fn parameters_and_validation() {
    let entry = models::lookup("pmsd-hybrid").unwrap();
    let b = entry.build(&[("tau".into(), 0.02), ("M".into(), 2.0)]).unwrap();
    let m = b.simulation.unwrap();
    assert_eq!(m.tau(), 0.02);
    assert!(entry.build(&[("tau".into(), 0.0)]).is_err());
    assert!(entry.build(&[("L".into(), -1.0)]).is_err());

    let json = serde_json::to_value(PmsdParams::default()).unwrap();
    for key in ["M", "C", "K", "m", "L", "g", "tau"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    let msd = models::msd_subsystem(&PmsdParams { mass: 3.0, ..PmsdParams::default() }).unwrap();
    assert_eq!(msd.e()[(1, 1)], 3.0);
}
