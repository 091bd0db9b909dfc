use dgdae::gradients::DiscreteGradientKind;
use dgdae::integrators::{
    dg_step, gonzalez_constrained_step, implicit_euler_step, index1_dg_step, project_to_constraint, JacobianMode,
};
use dgdae::problems::{by_name, make_friction, make_linear_invariant_fixture, make_sinh_gordon};
use dgdae::{integrate, NewtonConfig, Scheme, Vector};
use proptest::prelude::*;

fn cfg() -> NewtonConfig {
    NewtonConfig::default()
}

fn final_state(problem: &str, scheme: Scheme, dt: f64, steps: usize) -> Vector {
    let spec = by_name(problem, None, 0).unwrap();
    let method = spec.method(scheme).unwrap();
    let traj = integrate(method.as_ref(), &spec.default_initial_state, dt, steps, &[], &cfg()).unwrap();
    traj.last_state().unwrap().clone()
}

/// Observed order of the leading `components` entries from three runs to a
/// common end time, halving `dt`.
fn observed_order(problem: &str, scheme: Scheme, dt: f64, steps: usize, components: usize) -> f64 {
    let z1 = final_state(problem, scheme, dt, steps);
    let z2 = final_state(problem, scheme, dt / 2.0, 2 * steps);
    let z4 = final_state(problem, scheme, dt / 4.0, 4 * steps);
    let d = |a: &Vector, b: &Vector| (a - b).rows(0, components).norm();
    (d(&z1, &z2) / d(&z2, &z4)).log2()
}

#[test]
fn implicit_euler_is_first_order() {
    let p = observed_order("linear-test", Scheme::ImplicitEuler, 0.05, 10, 3);
    assert!(p >= 0.9, "observed order {p}");
}

// Positions and velocities only for the pendulum models: the multiplier of
// an index-3 constraint does not converge under midpoint averaging.
#[test]
fn discrete_gradient_schemes_are_at_least_first_order() {
    for (problem, scheme, components) in [
        ("friction", Scheme::DgAvf, 4),
        ("friction", Scheme::DgMidpoint, 4),
        ("sinh-gordon", Scheme::DgIndex1, 32),
        ("pendulum", Scheme::Gonzalez, 4),
    ] {
        let p = observed_order(problem, scheme, 0.04, 5, components);
        assert!(p >= 0.9, "{problem} {scheme}: observed order {p}");
    }
}

#[test]
fn analytic_and_difference_jacobians_agree() {
    let spec = make_linear_invariant_fixture();
    let z = &spec.default_initial_state;
    let analytic = NewtonConfig {
        jacobian: JacobianMode::Analytic,
        ..cfg()
    };
    let a = implicit_euler_step(spec.general(), z, 0.1, &analytic).unwrap();
    let b = implicit_euler_step(spec.general(), z, 0.1, &cfg()).unwrap();
    assert!((&a.state - &b.state).amax() < 1e-12);
}

#[test]
fn friction_energy_never_increases() {
    let spec = make_friction();
    let lg = spec.linear_gradient().unwrap();
    for dg in [DiscreteGradientKind::avf(), DiscreteGradientKind::Midpoint] {
        let mut z = spec.default_initial_state.clone();
        let mut v = lg.v.value(&z);
        for _ in 0..200 {
            z = dg_step(lg, &dg, &z, 0.05, &cfg()).unwrap().state;
            let vn = lg.v.value(&z);
            assert!(vn <= v + 1e-10, "{dg:?}: {v} -> {vn}");
            v = vn;
        }
    }
}

#[test]
fn projection_undoes_a_constant_shift() {
    let spec = make_sinh_gordon(16).unwrap();
    let lg = spec.linear_gradient().unwrap();
    let u0 = spec.default_initial_state.clone();
    for a in [-0.3, 0.05, 0.7] {
        let projected = project_to_constraint(lg, &u0.add_scalar(a), &cfg()).unwrap();
        assert!((&projected - &u0).amax() < 1e-12, "shift {a}");
    }
}

#[test]
fn gonzalez_flips_the_sign_of_an_initial_constraint_violation() {
    let spec = by_name("pendulum", None, 0).unwrap();
    let model = spec.constrained().unwrap();
    let g = &model.position_constraints()[0];
    let z0 = Vector::from_vec(vec![1.1, 0.0, 0.0, 0.3, 0.0]);
    let q0 = z0.rows(0, 2).into_owned();
    let z1 = gonzalez_constrained_step(model, &z0, 0.1, &cfg()).unwrap().state;
    let q1 = z1.rows(0, 2).into_owned();
    assert!((g.value(&q1) + g.value(&q0)).abs() < 1e-12);
}

#[test]
fn equilibria_are_fixed_points() {
    // pendulum hanging at rest, lambda = (|p|^2 - q2)/|q|^2 = 1
    let spec = by_name("pendulum", None, 0).unwrap();
    let z = Vector::from_vec(vec![0.0, -1.0, 0.0, 0.0, 1.0]);
    let out = gonzalez_constrained_step(spec.constrained().unwrap(), &z, 0.2, &cfg()).unwrap();
    assert!((&out.state - &z).amax() < 1e-12);

    let spec = make_sinh_gordon(8).unwrap();
    let z = Vector::zeros(8);
    let out = index1_dg_step(spec.linear_gradient().unwrap(), &z, 0.3, &cfg()).unwrap();
    assert!(out.state.amax() < 1e-12);
    assert!(out.redundant.unwrap().amax() < 1e-12);
}

#[test]
fn step_difference_quotient_tends_to_the_vector_field() {
    let spec = make_friction();
    let lg = spec.linear_gradient().unwrap();
    let z = spec.default_initial_state.clone();
    // differential components only: A ż = S ∇V
    let rhs = lg.rhs(&z);
    let mut prev = f64::INFINITY;
    for dt in [1e-2, 1e-3, 1e-4] {
        let zn = dg_step(lg, &DiscreteGradientKind::avf(), &z, dt, &cfg()).unwrap().state;
        let err = (&lg.a * (&zn - &z) / dt - &rhs).rows(0, 4).amax();
        assert!(err < prev, "dt {dt}: {err}");
        prev = err;
    }
    assert!(prev < 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn index1_step_conserves_h_and_stays_on_the_manifold(seed in 0u64..1000, dt in 0.01f64..0.3) {
        let spec = make_sinh_gordon(8).unwrap();
        let lg = spec.linear_gradient().unwrap();
        let z = spec.sample_manifold(1, seed).remove(0);
        let out = index1_dg_step(lg, &z, dt, &cfg()).unwrap();
        let (h0, h1) = (lg.v.value(&z), lg.v.value(&out.state));
        prop_assert!((h1 - h0).abs() <= 1e-12 * h0);
        prop_assert!(lg.constraints[0].value(&out.state).abs() < 1e-11);
    }

    #[test]
    fn gonzalez_step_conserves_the_pendulum_energy(
        phi in 0.0f64..std::f64::consts::TAU,
        omega in -1.5f64..1.5,
        dt in 0.01f64..0.2,
    ) {
        let spec = by_name("pendulum", None, 0).unwrap();
        let model = spec.constrained().unwrap();
        let (q, p) = ([phi.cos(), phi.sin()], [-omega * phi.sin(), omega * phi.cos()]);
        let lambda = omega * omega - q[1];
        let z = Vector::from_vec(vec![q[0], q[1], p[0], p[1], lambda]);
        let h = model.lifted_hamiltonian();
        let out = gonzalez_constrained_step(model, &z, dt, &cfg()).unwrap();
        prop_assert!((h.value(&out.state) - h.value(&z)).abs() < 1e-12);
    }

    #[test]
    fn linear_invariant_survives_implicit_euler(y1 in -1.0f64..1.0, y2 in -1.0f64..1.0, dt in 0.01f64..0.2) {
        let spec = make_linear_invariant_fixture();
        let z = Vector::from_vec(vec![y1, y2, y1 * y2]);
        let out = implicit_euler_step(spec.general(), &z, dt, &cfg()).unwrap();
        prop_assert!((out.state[0] + out.state[1] - y1 - y2).abs() < 1e-13);
    }
}
