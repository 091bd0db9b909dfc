use dgdae::model::{verify_structure, StructureClaim};
use dgdae::problems::{by_name, make_friction_with, PROBLEM_NAMES};
use dgdae::{Error, Matrix, Scheme, Vector};

#[test]
fn every_problem_builds_and_supports_its_recommended_scheme() {
    for name in PROBLEM_NAMES {
        let spec = by_name(name, None, 0).unwrap();
        assert_eq!(spec.name, name);
        assert_eq!(spec.default_initial_state.len(), spec.dim());
        assert!(spec.supports(spec.recommended_scheme), "{name}");
        assert!(spec.method(spec.recommended_scheme).is_ok(), "{name}");
    }
}

#[test]
fn unsupported_schemes_are_rejected() {
    let spec = by_name("smhs", None, 0).unwrap();
    for scheme in Scheme::ALL {
        assert_eq!(spec.supports(scheme), spec.method(scheme).is_ok(), "{scheme}");
    }
    assert!(!spec.supports(Scheme::Gonzalez));
    assert!(matches!(by_name("nonesuch", None, 0), Err(Error::UnknownProblem(_))));
    assert!(by_name("pendulum", Some(8), 0).is_err());
}

#[test]
fn claimed_structure_holds_on_manifold_samples() {
    for name in PROBLEM_NAMES {
        let spec = by_name(name, None, 0).unwrap();
        let Some(lg) = spec.linear_gradient() else { continue };
        let samples = spec.sample_manifold(20, 7);
        let report = verify_structure(lg, &samples, 1e-9).unwrap();
        assert!(report.passed, "{name}: worst {}", report.worst);
        assert!(report.max_constraint_residual < 1e-9, "{name}: {}", report.max_constraint_residual);
        assert_ne!(report.claim, StructureClaim::None, "{name}");
    }
}

#[test]
fn samples_lie_on_the_constraint_manifold() {
    for name in PROBLEM_NAMES {
        let spec = by_name(name, None, 0).unwrap();
        for z in spec.sample_manifold(20, 11) {
            for g in spec.constraints() {
                assert!(g.value(&z).abs() < 1e-9, "{name}: {} = {}", g.name(), g.value(&z));
            }
        }
    }
}

#[test]
fn invariant_gradients_match_finite_differences() {
    for name in PROBLEM_NAMES {
        let spec = by_name(name, None, 0).unwrap();
        for z in spec.sample_manifold(5, 3) {
            for obs in spec.observers() {
                let err = obs.gradient_fd_error(&z, 1e-6);
                assert!(err < 1e-6, "{name} {}: {err}", obs.name());
            }
        }
    }
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let spec = by_name("smhs", None, 0).unwrap();
    assert_eq!(spec.sample_manifold(4, 9), spec.sample_manifold(4, 9));
    assert_ne!(spec.sample_manifold(4, 9), spec.sample_manifold(4, 10));
    let a = by_name("smhs", None, 1).unwrap().default_initial_state;
    let b = by_name("smhs", None, 1).unwrap().default_initial_state;
    assert_eq!(a, b);
}

#[test]
fn friction_model_validates_its_parameters() {
    let m = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let spec = make_friction_with(m, Vector::from_vec(vec![0.2, 0.0])).unwrap();
    let lg = spec.linear_gradient().unwrap();
    assert!(verify_structure(lg, &spec.sample_manifold(10, 2), 1e-9).unwrap().passed);

    let asym = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
    assert!(make_friction_with(asym, Vector::from_vec(vec![0.1, 0.1])).is_err());
    let indefinite = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    assert!(make_friction_with(indefinite, Vector::from_vec(vec![0.1, 0.1])).is_err());
    assert!(make_friction_with(Matrix::identity(2, 2), Vector::from_vec(vec![-0.1, 0.1])).is_err());
}

#[test]
fn sinh_gordon_default_data_satisfies_the_constraint() {
    for grid in [8, 16, 32, 64] {
        let spec = by_name("sinh-gordon", Some(grid), 0).unwrap();
        let f = spec.invariant("F").unwrap();
        assert!(f.value(&spec.default_initial_state).abs() < 1e-13, "grid {grid}");
    }
}
