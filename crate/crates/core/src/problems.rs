//! Built-in problem instances.
//!
//! | name          | system                         | state          |
//! |---------------|--------------------------------|----------------|
//! | `smhs`        | coarse modified Hunter–Saxton  | `z ∈ ℝ³`       |
//! | `pendulum`    | constrained Hamiltonian        | `(q, p, λ)`    |
//! | `friction`    | pendulum with linear friction  | `(q, v, λ)`    |
//! | `sinh-gordon` | `D u̇ = M ∇H(u)` on a periodic grid | `u ∈ ℝ^I`  |
//! | `linear-test` | index-1 fixture with a linear invariant | `y ∈ ℝ³` |

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gradients::{FieldHint, ScalarField};
use crate::integrators::{
    DiscreteGradientMethod, GonzalezMethod, ImplicitEuler, Index1Method, OneStepMethod, SAveraging, Scheme,
};
use crate::linalg::{Matrix, Vector};
use crate::model::{ConstrainedHamiltonian, GeneralDAE, LinearGradientDAE, StructureClaim, StructureMatrix};

pub const PROBLEM_NAMES: [&str; 5] = ["smhs", "pendulum", "friction", "sinh-gordon", "linear-test"];

pub const DEFAULT_GRID: usize = 32;

type Sampler = Arc<dyn Fn(usize, u64) -> Vec<Vector> + Send + Sync>;

/// A packaged problem: model, observed quantities, default data and a
/// sampler for points on the constraint manifold.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    general: GeneralDAE,
    linear_gradient: Option<LinearGradientDAE>,
    constrained: Option<ConstrainedHamiltonian>,
    /// The quantity reported in the `V` column.
    pub primary: ScalarField,
    /// Further named quantities, one CSV column each.
    pub extras: Vec<ScalarField>,
    pub default_initial_state: Vector,
    pub recommended_scheme: Scheme,
    pub index: &'static str,
    pub notes: &'static str,
    sampler: Sampler,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("primary", &self.primary.name())
            .field("extras", &self.extras.iter().map(|e| e.name()).collect::<Vec<_>>())
            .field("recommended_scheme", &self.recommended_scheme)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.general.dim()
    }

    /// `A ż = f(z)` form (always available).
    pub fn general(&self) -> &GeneralDAE {
        &self.general
    }

    pub fn linear_gradient(&self) -> Option<&LinearGradientDAE> {
        self.linear_gradient.as_ref()
    }

    pub fn constrained(&self) -> Option<&ConstrainedHamiltonian> {
        self.constrained.as_ref()
    }

    pub fn constraints(&self) -> &[ScalarField] {
        &self.general.constraints
    }

    pub fn structure_claim(&self) -> StructureClaim {
        self.linear_gradient.as_ref().map_or(StructureClaim::None, |l| l.structure_claim)
    }

    /// Primary quantity followed by the extras.
    pub fn observers(&self) -> Vec<ScalarField> {
        std::iter::once(self.primary.clone()).chain(self.extras.iter().cloned()).collect()
    }

    /// Looks up the primary quantity or an extra by name.
    pub fn invariant(&self, name: &str) -> Option<&ScalarField> {
        std::iter::once(&self.primary).chain(&self.extras).find(|f| f.name() == name)
    }

    /// `count` deterministic points on the constraint manifold.
    pub fn sample_manifold(&self, count: usize, seed: u64) -> Vec<Vector> {
        (self.sampler)(count, seed)
    }

    pub fn supports(&self, scheme: Scheme) -> bool {
        match scheme {
            Scheme::ImplicitEuler => true,
            Scheme::DgAvf | Scheme::DgMidpoint | Scheme::DgProper => self.linear_gradient.is_some(),
            Scheme::DgIndex1 => self.linear_gradient.as_ref().is_some_and(|l| l.subspaces.nullity() > 0),
            Scheme::Gonzalez => self.constrained.is_some(),
        }
    }

    /// Binds `scheme` to this problem's model.
    pub fn method(&self, scheme: Scheme) -> Result<Box<dyn OneStepMethod + '_>> {
        let incompatible = || Error::IncompatibleScheme {
            scheme: scheme.name().to_string(),
            problem: self.name.clone(),
        };
        if !self.supports(scheme) {
            return Err(incompatible());
        }
        Ok(match scheme {
            Scheme::ImplicitEuler => Box::new(ImplicitEuler(&self.general)),
            Scheme::DgAvf | Scheme::DgMidpoint | Scheme::DgProper => Box::new(DiscreteGradientMethod {
                dae: self.linear_gradient.as_ref().ok_or_else(incompatible)?,
                gradient: scheme.discrete_gradient().ok_or_else(incompatible)?,
                averaging: SAveraging::Average,
            }),
            Scheme::DgIndex1 => Box::new(Index1Method {
                dae: self.linear_gradient.as_ref().ok_or_else(incompatible)?,
                averaging: SAveraging::Average,
            }),
            Scheme::Gonzalez => Box::new(GonzalezMethod(self.constrained.as_ref().ok_or_else(incompatible)?)),
        })
    }
}

/// Looks up a built-in problem by its CLI name.
pub fn by_name(name: &str, grid: Option<usize>, seed: u64) -> Result<ProblemSpec> {
    if grid.is_some() && name != "sinh-gordon" {
        return Err(Error::InvalidArgument(format!("--grid does not apply to problem `{name}`")));
    }
    match name {
        "smhs" => Ok(make_smhs(seed)),
        "pendulum" => Ok(make_constrained_hamiltonian()),
        "friction" => Ok(make_friction()),
        "sinh-gordon" => make_sinh_gordon(grid.unwrap_or(DEFAULT_GRID)),
        "linear-test" => Ok(make_linear_invariant_fixture()),
        _ => Err(Error::UnknownProblem(name.to_string())),
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn v(xs: &[f64]) -> Vector {
    Vector::from_row_slice(xs)
}

// ---------------------------------------------------------------------------
// smHS

fn smhs_a() -> Matrix {
    Matrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 0.0, -1.0, 1.0, 1.0, 0.0, -1.0])
}

fn smhs_f(z: &Vector) -> Vector {
    let w = |i: usize, j: usize, k: usize| z[i] * (1.0 + 2.0 * z[i] - z[j] - z[k]);
    let (w1, w2, w3) = (w(0, 1, 2), w(1, 0, 2), w(2, 0, 1));
    let s1 = (z[1] - z[0]).powi(2);
    let s2 = (z[2] - z[1]).powi(2);
    let s3 = (z[0] - z[2]).powi(2);
    v(&[0.5 * (w1 + w2) - 0.5 * s1, 0.5 * (w2 + w3) - 0.5 * s2, 0.5 * (w1 + w3) - 0.5 * s3])
}

fn smhs_f_jacobian(z: &Vector) -> Matrix {
    // Rows of ∂w and ∂s.
    let mut dw = Matrix::zeros(3, 3);
    for i in 0..3 {
        for j in 0..3 {
            dw[(i, j)] = if i == j {
                1.0 + 4.0 * z[i] - (z[0] + z[1] + z[2] - z[i])
            } else {
                -z[i]
            };
        }
    }
    let (d1, d2, d3) = (z[1] - z[0], z[2] - z[1], z[0] - z[2]);
    let ds = Matrix::from_row_slice(3, 3, &[-2.0 * d1, 2.0 * d1, 0.0, 0.0, -2.0 * d2, 2.0 * d2, 2.0 * d3, 0.0, -2.0 * d3]);
    let m1 = Matrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0]);
    (m1 * dw - ds) * 0.5
}

fn smhs_h() -> ScalarField {
    let x = Matrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
    ScalarField::quadratic("H", x)
}

/// Points of `{g = 0}` reached along random rays: with `z = t r`,
/// `g(t r) = t⟨1, r⟩ + t² H(r)` vanishes at `t = −⟨1, r⟩ / H(r)`.
fn smhs_samples(count: usize, seed: u64) -> Vec<Vector> {
    let h = smhs_h();
    let mut rng = rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let r = Vector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
        let hr = h.value(&r);
        if hr < 1e-2 {
            continue;
        }
        let t = -r.sum() / hr;
        let z = &r * t;
        if !(0.1..=3.0).contains(&z.norm()) {
            continue;
        }
        out.push(z);
    }
    out
}

/// Coarse discretization of the modified Hunter–Saxton equation, with
/// quantities `V = z₁+z₂+z₃` (primary column), `H` and `g = V + H`.
/// `seed` selects the initial ray.
pub fn make_smhs(seed: u64) -> ProblemSpec {
    let h = smhs_h();
    let lin = ScalarField::linear("V", Vector::from_element(3, 1.0));
    let (hv, hg) = (h.clone(), h.clone());
    let g = ScalarField::new(
        "g",
        3,
        move |z: &Vector| z.sum() + hv.value(z),
        move |z: &Vector| hg.gradient(z).add_scalar(1.0),
    );
    let general = GeneralDAE::new(smhs_a(), smhs_f, vec![g.clone()])
        .expect("valid smHS model")
        .with_jacobian(smhs_f_jacobian);
    ProblemSpec {
        name: "smhs".into(),
        general,
        linear_gradient: None,
        constrained: None,
        primary: lin,
        extras: vec![h, g],
        default_initial_state: smhs_samples(1, seed).remove(0),
        recommended_scheme: Scheme::ImplicitEuler,
        index: "uniform index-1 (constraint g)",
        notes: "V = z1+z2+z3 is conserved but not proper; H is proper and H = -V on the manifold",
        sampler: Arc::new(smhs_samples),
    }
}

// ---------------------------------------------------------------------------
// Planar pendulum and its frictional variant

fn unit_circle() -> ScalarField {
    ScalarField::new(
        "g",
        2,
        |q: &Vector| 0.5 * (q.norm_squared() - 1.0),
        |q: &Vector| q.clone(),
    )
}

fn pendulum_hamiltonian() -> ScalarField {
    ScalarField::new(
        "H",
        4,
        |z: &Vector| 0.5 * (z[2] * z[2] + z[3] * z[3]) + z[1],
        |z: &Vector| v(&[0.0, 1.0, z[2], z[3]]),
    )
}

/// Points `(q, w, λ)` with `|q| = 1`, `w` tangent and `λ` consistent with
/// the acceleration-level constraint; `lambda(q, w)` supplies the latter.
fn circle_samples(count: usize, seed: u64, lambda: impl Fn(&Vector, &Vector) -> f64) -> Vec<Vector> {
    let mut rng = rng(seed);
    (0..count)
        .map(|_| {
            let phi = rng.random_range(0.0..2.0 * PI);
            let omega = rng.random_range(0.2..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let q = v(&[phi.cos(), phi.sin()]);
            let w = v(&[-omega * q[1], omega * q[0]]);
            let l = lambda(&q, &w);
            v(&[q[0], q[1], w[0], w[1], l])
        })
        .collect()
}

/// Planar pendulum `H = ½|p|² + q₂`, `g = ½(|q|² − 1)` in the augmented
/// linear-gradient form with `V = H + λ g`. Starts at `q = (1, 0)` at rest.
pub fn make_constrained_hamiltonian() -> ProblemSpec {
    let model = ConstrainedHamiltonian::new(2, pendulum_hamiltonian(), vec![unit_circle()]).expect("valid pendulum");
    let dae = model.augmented_dae().expect("valid pendulum structure");
    let h = model.lifted_hamiltonian();
    let g = model.state_constraints()[0].clone();
    ProblemSpec {
        name: "pendulum".into(),
        general: dae.to_general(),
        primary: dae.v.clone(),
        linear_gradient: Some(dae),
        constrained: Some(model),
        extras: vec![h, g],
        // λ = (|p|² − q₂)/|q|² vanishes here.
        default_initial_state: v(&[1.0, 0.0, 0.0, 0.0, 0.0]),
        recommended_scheme: Scheme::Gonzalez,
        index: "index 3 (holonomic constraint)",
        notes: "augmented Hamiltonian V = H + lambda g; A^+ S is constant and skew",
        sampler: Arc::new(|count, seed| circle_samples(count, seed, |q, p| (p.norm_squared() - q[1]) / q.norm_squared())),
    }
}

/// Pendulum with friction `q̇ = v`, `M v̇ = −∇U − (Jg)ᵀλ − F v`, `g(q) = 0`,
/// with `M = I`, `U = q₂`, `F = diag(0.1, 0.1)`.
pub fn make_friction() -> ProblemSpec {
    make_friction_with(Matrix::identity(2, 2), v(&[0.1, 0.1])).expect("valid default friction model")
}

/// Friction model with mass matrix `mass` (symmetric positive definite) and
/// friction coefficients `friction` (the diagonal of `F`, nonnegative).
///
/// The dissipated energy is `H = ½⟨v, Mv⟩ + U(q)`; the model is posed in the
/// augmented form `diag(I, M, O) ż = S ∇V` with `V = H + λ g` and
/// `S = [[O, M⁻¹, O], [−I, −F M⁻¹, O], [O, O, I]]`.
pub fn make_friction_with(mass: Matrix, friction: Vector) -> Result<ProblemSpec> {
    if mass.shape() != (2, 2) || friction.len() != 2 {
        return Err(Error::InvalidArgument("friction model is planar: M is 2x2 and F has 2 entries".into()));
    }
    if (&mass - mass.transpose()).amax() > 1e-14 * mass.amax() {
        return Err(Error::InvalidArgument("mass matrix must be symmetric".into()));
    }
    let m_inv = mass
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("mass matrix must be positive definite".into()))?
        .inverse();
    if friction.iter().any(|f| !(*f >= 0.0) || !f.is_finite()) {
        return Err(Error::InvalidArgument("friction coefficients must be finite and nonnegative".into()));
    }
    let fric = Matrix::from_diagonal(&friction);

    let mut a = Matrix::zeros(5, 5);
    a.view_mut((0, 0), (2, 2)).fill_with_identity();
    a.view_mut((2, 2), (2, 2)).copy_from(&mass);
    let mut s = Matrix::zeros(5, 5);
    s.view_mut((0, 2), (2, 2)).copy_from(&m_inv);
    s.view_mut((2, 0), (2, 2)).copy_from(&-Matrix::identity(2, 2));
    s.view_mut((2, 2), (2, 2)).copy_from(&-(&fric * &m_inv));
    s[(4, 4)] = 1.0;

    let (mh, mg) = (mass.clone(), mass.clone());
    let h_pv = move |z: &Vector| 0.5 * z.rows(2, 2).dot(&(&mh * z.rows(2, 2))) + z[1];
    let h = ScalarField::new("H", 5, h_pv.clone(), move |z: &Vector| {
        let mv = &mg * z.rows(2, 2);
        v(&[0.0, 1.0, mv[0], mv[1], 0.0])
    });
    let mv = mass.clone();
    let vfield = ScalarField::new(
        "V",
        5,
        move |z: &Vector| h_pv(z) + z[4] * 0.5 * (z[0] * z[0] + z[1] * z[1] - 1.0),
        move |z: &Vector| {
            let m = &mv * z.rows(2, 2);
            v(&[z[4] * z[0], 1.0 + z[4] * z[1], m[0], m[1], 0.5 * (z[0] * z[0] + z[1] * z[1] - 1.0)])
        },
    );
    let g = ScalarField::new(
        "g",
        5,
        |z: &Vector| 0.5 * (z[0] * z[0] + z[1] * z[1] - 1.0),
        |z: &Vector| v(&[z[0], z[1], 0.0, 0.0, 0.0]),
    );
    let dae = LinearGradientDAE::new(
        a,
        StructureMatrix::Constant(s),
        vfield.clone(),
        vec![g.clone()],
        StructureClaim::Dissipative,
    )?;

    // d²g/dt² = |v|² + qᵀ M⁻¹(−∇U − qλ − Fv) = 0 fixes λ.
    let sampler: Sampler = Arc::new(move |count, seed| {
        let (m_inv, fric) = (m_inv.clone(), fric.clone());
        circle_samples(count, seed, move |q, w| {
            let grad_u = v(&[0.0, 1.0]);
            let rhs = w.norm_squared() - q.dot(&(&m_inv * (grad_u + &fric * w)));
            rhs / q.dot(&(&m_inv * q))
        })
    });
    Ok(ProblemSpec {
        name: "friction".into(),
        general: dae.to_general(),
        linear_gradient: Some(dae),
        constrained: None,
        primary: vfield,
        extras: vec![h, g],
        default_initial_state: v(&[1.0, 0.0, 0.0, 0.0, 0.0]),
        recommended_scheme: Scheme::DgAvf,
        index: "index 3 (holonomic constraint)",
        notes: "augmented energy V = H + lambda g is dissipated; A^+ S has symmetric part -M^-1 F M^-1",
        sampler,
    })
}

// ---------------------------------------------------------------------------
// Mixed-derivative PDE semi-discretization

/// Periodic forward difference `(D u)ᵢ = (uᵢ₊₁ − uᵢ)/Δx`.
pub fn forward_difference(grid: usize, dx: f64) -> Matrix {
    Matrix::from_fn(grid, grid, |i, j| {
        if j == i {
            -1.0 / dx
        } else if j == (i + 1) % grid {
            1.0 / dx
        } else {
            0.0
        }
    })
}

/// Periodic average `(M u)ᵢ = (uᵢ + uᵢ₊₁)/2`.
pub fn forward_average(grid: usize) -> Matrix {
    Matrix::from_fn(grid, grid, |i, j| if j == i || j == (i + 1) % grid { 0.5 } else { 0.0 })
}

/// `u_i = a sin(2πi/I)`, `i = 1..I`. Odd about the node `i = 0`.
pub fn sine_profile(grid: usize, amplitude: f64) -> Vector {
    Vector::from_fn(grid, |i, _| amplitude * (2.0 * PI * (i + 1) as f64 / grid as f64).sin())
}

/// `u_i = 0.5 sin(2πx_i/I) + 0.4 sin(4πx_i/I)` with `x_i = i + ½`: odd about a
/// half-node, so `Σ sinh u_i` cancels in pairs `(i, I − 1 − i)`.
///
/// Data odd about a node is carried along exactly by the AVF scheme, which
/// then keeps `F = 0` as well; this profile has no such symmetry.
pub fn default_sinh_gordon_profile(grid: usize) -> Vector {
    Vector::from_fn(grid, |i, _| {
        let x = 2.0 * PI * ((i + 1) as f64 + 0.5) / grid as f64;
        0.5 * x.sin() + 0.4 * (2.0 * x).sin()
    })
}

/// `D u̇ = M ∇V(u)` on `I = grid` periodic nodes with `Δx = period / I`.
///
/// `Null(D) = span{1}` and `Mᵀ1 = 1`, so the implicit constraint is
/// `F(u) = ⟨1, ∇V(u)⟩ = 0`, exposed as the constraint `F`. Its gradient is
/// the Hessian applied to `1`, taken by central differences of `∇V`.
pub fn make_mixed_derivative(grid: usize, field: ScalarField, period: f64) -> Result<ProblemSpec> {
    if grid < 3 {
        return Err(Error::InvalidArgument(format!("grid must have at least 3 nodes, got {grid}")));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidArgument(format!("period {period} must be positive")));
    }
    if field.dim() != grid {
        return Err(Error::DimensionMismatch {
            expected: grid,
            got: field.dim(),
        });
    }
    let (fv, fg) = (field.clone(), field.clone());
    let constraint = ScalarField::new(
        "F",
        grid,
        move |u: &Vector| fv.gradient(u).sum(),
        move |u: &Vector| {
            let h = 1e-5 * (1.0 + u.amax());
            let ones = Vector::from_element(u.len(), h);
            (fg.gradient(&(u + &ones)) - fg.gradient(&(u - &ones))) / (2.0 * h)
        },
    );
    build_mixed_derivative(grid, field, constraint, period, Vector::zeros(grid))
}

fn build_mixed_derivative(
    grid: usize,
    field: ScalarField,
    constraint: ScalarField,
    period: f64,
    initial: Vector,
) -> Result<ProblemSpec> {
    let dx = period / grid as f64;
    let dae = LinearGradientDAE::new(
        forward_difference(grid, dx),
        StructureMatrix::Constant(forward_average(grid)),
        field.clone(),
        vec![constraint.clone()],
        StructureClaim::Conservative,
    )?;
    let sinh_sum = matches!(field.hint(), FieldHint::StrictlyConvex) && field.name() == "H";
    let sampler: Sampler = if sinh_sum {
        Arc::new(move |count, seed| {
            let mut rng = rng(seed);
            (0..count)
                .map(|_| shift_to_zero_sinh_sum(&Vector::from_fn(grid, |_, _| rng.random_range(-1.0..1.0))))
                .collect()
        })
    } else {
        Arc::new(move |count, _| vec![Vector::zeros(grid); count])
    };
    Ok(ProblemSpec {
        name: "sinh-gordon".into(),
        general: dae.to_general(),
        linear_gradient: Some(dae),
        constrained: None,
        primary: field,
        extras: vec![constraint],
        default_initial_state: initial,
        recommended_scheme: Scheme::DgIndex1,
        index: "uniform index-1 (constraint F)",
        notes: "D^+ M is circulant and skew; H is proper",
        sampler,
    })
}

/// The uniform shift `u + s·1` with `Σ sinh(uᵢ + s) = 0`:
/// `tanh s = −Σ sinh uᵢ / Σ cosh uᵢ`.
pub fn shift_to_zero_sinh_sum(u: &Vector) -> Vector {
    let s = (-u.iter().map(|x| x.sinh()).sum::<f64>() / u.iter().map(|x| x.cosh()).sum::<f64>()).atanh();
    u.add_scalar(s)
}

/// Sinh-Gordon `u_tx = sinh u` with `H = Σ cosh uᵢ`, `F = Σ sinh uᵢ`, period
/// `2π` and initial data [`default_sinh_gordon_profile`] (which has `F = 0`).
pub fn make_sinh_gordon(grid: usize) -> Result<ProblemSpec> {
    if grid < 3 {
        return Err(Error::InvalidArgument(format!("grid must have at least 3 nodes, got {grid}")));
    }
    let constraint = ScalarField::new(
        "F",
        grid,
        |u: &Vector| u.iter().map(|x| x.sinh()).sum(),
        |u: &Vector| u.map(f64::cosh),
    );
    build_mixed_derivative(
        grid,
        ScalarField::cosh_sum("H", grid),
        constraint,
        2.0 * PI,
        default_sinh_gordon_profile(grid),
    )
}

// ---------------------------------------------------------------------------
// Linear-invariant fixture

/// `A = diag(1, 1, 0)`, `f(y) = (y₃, −y₃, y₃ − y₁y₂)`: the invariant
/// `y₁ + y₂` has `γ = (1, 1, 0) ∈ Car(A)` and the constraint is index-1.
pub fn make_linear_invariant_fixture() -> ProblemSpec {
    let a = Matrix::from_diagonal(&v(&[1.0, 1.0, 0.0]));
    let constraint = ScalarField::new(
        "c",
        3,
        |y: &Vector| y[2] - y[0] * y[1],
        |y: &Vector| v(&[-y[1], -y[0], 1.0]),
    );
    let general = GeneralDAE::new(a, |y: &Vector| v(&[y[2], -y[2], y[2] - y[0] * y[1]]), vec![constraint])
        .expect("valid fixture")
        .with_jacobian(|y: &Vector| Matrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, -1.0, -y[1], -y[0], 1.0]));
    ProblemSpec {
        name: "linear-test".into(),
        general,
        linear_gradient: None,
        constrained: None,
        primary: ScalarField::linear("V", v(&[1.0, 1.0, 0.0])),
        extras: vec![],
        default_initial_state: v(&[0.5, 0.3, 0.15]),
        recommended_scheme: Scheme::ImplicitEuler,
        index: "uniform index-1 (constraint y3 = y1 y2)",
        notes: "y1 + y2 is a linear invariant with gamma in Car(A)",
        sampler: Arc::new(|count, seed| {
            let mut rng = rng(seed);
            (0..count)
                .map(|_| {
                    let (a, b) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    v(&[a, b, a * b])
                })
                .collect()
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{is_skew_symmetric, pseudo_inverse};

    #[test]
    fn smhs_kernel_and_identities() {
        let spec = make_smhs(7);
        let a = &spec.general().a;
        assert_eq!((a * Vector::from_element(3, 1.0)).amax(), 0.0);
        let (h, vv, g) = (
            spec.invariant("H").unwrap(),
            spec.invariant("V").unwrap(),
            spec.invariant("g").unwrap(),
        );
        for z in spec.sample_manifold(10, 1) {
            assert!((g.value(&z) - h.value(&z) - vv.value(&z)).abs() < 1e-14);
            assert!(g.value(&z).abs() < 1e-12);
        }
        // 1ᵀ f = g.
        for z in spec.sample_manifold(5, 2).iter().map(|z| z.add_scalar(0.3)) {
            assert!((spec.general().f(&z).sum() - g.value(&z)).abs() < 1e-13);
        }
    }

    #[test]
    fn smhs_jacobian_matches_differences() {
        let z = v(&[0.3, -0.7, 1.1]);
        let jac = smhs_f_jacobian(&z);
        let h = 1e-6;
        for j in 0..3 {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[j] += h;
            zm[j] -= h;
            let col = (smhs_f(&zp) - smhs_f(&zm)) / (2.0 * h);
            assert!((col - jac.column(j)).amax() < 1e-8);
        }
    }

    #[test]
    fn smhs_seed_selects_initial_state() {
        assert_eq!(make_smhs(3).default_initial_state, make_smhs(3).default_initial_state);
        assert_ne!(make_smhs(3).default_initial_state, make_smhs(4).default_initial_state);
    }

    #[test]
    fn pendulum_default_state_is_consistent() {
        let spec = make_constrained_hamiltonian();
        let z = &spec.default_initial_state;
        let lg = spec.linear_gradient().unwrap();
        assert_eq!(lg.constraint_values(z)[0], 0.0);
        assert_eq!(lg.implicit_constraint(z)[0], 0.0);
        // V = H on the manifold.
        for z in spec.sample_manifold(10, 5) {
            let h = spec.invariant("H").unwrap().value(&z);
            assert!((spec.primary.value(&z) - h).abs() < 1e-14);
        }
    }

    #[test]
    fn friction_rejects_invalid_parameters() {
        assert!(make_friction_with(-Matrix::identity(2, 2), v(&[0.1, 0.1])).is_err());
        assert!(make_friction_with(Matrix::identity(2, 2), v(&[-0.1, 0.1])).is_err());
        assert!(make_friction_with(Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]), v(&[0.1, 0.1])).is_err());
        assert!(make_friction_with(Matrix::identity(3, 3), v(&[0.1, 0.1])).is_err());
    }

    #[test]
    fn friction_energy_decays_at_rate_vfv() {
        let spec = make_friction();
        let lg = spec.linear_gradient().unwrap();
        let h = spec.invariant("H").unwrap();
        let pinv = &lg.subspaces.pinv;
        for z in spec.sample_manifold(10, 9) {
            let rate = h.gradient(&z).dot(&(pinv * lg.rhs(&z)));
            let vfv = 0.1 * (z[2] * z[2] + z[3] * z[3]);
            assert!((rate + vfv).abs() < 1e-14, "{rate} vs {vfv}");
        }
    }

    #[test]
    fn zero_friction_is_skew() {
        let spec = make_friction_with(Matrix::identity(2, 2), Vector::zeros(2)).unwrap();
        let lg = spec.linear_gradient().unwrap();
        let m = &lg.subspaces.pinv * lg.s_at(&spec.default_initial_state);
        assert!(is_skew_symmetric(&m, 1e-15).unwrap().0);
    }

    #[test]
    fn sinh_gordon_operators() {
        for grid in [3, 4, 7, 32] {
            let spec = make_sinh_gordon(grid).unwrap();
            let lg = spec.linear_gradient().unwrap();
            let ones = Vector::from_element(grid, 1.0);
            assert!((&lg.a * &ones).amax() < 1e-12);
            let m = lg.s_at(&ones);
            assert!((m.tr_mul(&ones) - &ones).amax() == 0.0);
            let sub = pseudo_inverse(&lg.a, None).unwrap();
            assert_eq!(sub.nullity(), 1);
            assert!((sub.null_basis.column(0).abs() - ones.clone() / (grid as f64).sqrt()).amax() < 1e-12);
            assert!(spec.constraints()[0].value(&spec.default_initial_state).abs() < 1e-14);
        }
        assert!(make_sinh_gordon(2).is_err());
    }

    #[test]
    fn circulant_shift_commutes() {
        let grid = 9;
        let d = forward_difference(grid, 0.3);
        let m = forward_average(grid);
        let shift = Matrix::from_fn(grid, grid, |i, j| if j == (i + 1) % grid { 1.0 } else { 0.0 });
        assert!((&shift * &d - &d * &shift).amax() <= 1e-13);
        assert!((&shift * &m - &m * &shift).amax() <= 1e-13);
    }

    #[test]
    fn sinh_shift_examples() {
        let u = Vector::from_element(6, 0.4);
        assert!(shift_to_zero_sinh_sum(&u).amax() < 1e-15);
        let s = sine_profile(8, 0.5);
        assert!((shift_to_zero_sinh_sum(&s) - &s).amax() < 1e-15);
        for grid in [3, 8, 33] {
            let u = default_sinh_gordon_profile(grid);
            assert!(u.iter().map(|x| x.sinh()).sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn generic_mixed_derivative_constraint() {
        let field = ScalarField::quadratic("W", Matrix::identity(5, 5));
        let spec = make_mixed_derivative(5, field, 1.0).unwrap();
        let f = &spec.constraints()[0];
        let u = v(&[0.1, 0.2, -0.3, 0.4, 0.5]);
        assert!((f.value(&u) - u.sum()).abs() < 1e-15);
        assert!((f.gradient(&u) - Vector::from_element(5, 1.0)).amax() < 1e-8);
        assert!(make_mixed_derivative(2, ScalarField::cosh_sum("H", 2), 1.0).is_err());
    }

    #[test]
    fn linear_fixture_gamma_in_coimage() {
        let spec = make_linear_invariant_fixture();
        let sub = &spec.general().subspaces;
        let gamma = v(&[1.0, 1.0, 0.0]);
        assert!(crate::linalg::project(&sub.null_basis, &gamma).unwrap().amax() < 1e-15);
        for z in spec.sample_manifold(5, 0) {
            let f = spec.general().f(&z);
            assert_eq!(f[0] + f[1], 0.0);
        }
    }

    #[test]
    fn lookup_by_name() {
        for name in PROBLEM_NAMES {
            let spec = by_name(name, None, 0).unwrap();
            assert_eq!(spec.name, name);
            assert!(spec.supports(spec.recommended_scheme));
        }
        assert!(matches!(by_name("nope", None, 0), Err(Error::UnknownProblem(_))));
        assert!(by_name("smhs", Some(8), 0).is_err());
        assert_eq!(by_name("sinh-gordon", Some(8), 0).unwrap().dim(), 8);
    }

    #[test]
    fn scheme_compatibility() {
        let smhs = make_smhs(0);
        assert!(smhs.method(Scheme::ImplicitEuler).is_ok());
        assert!(matches!(smhs.method(Scheme::DgAvf).err(), Some(Error::IncompatibleScheme { .. })));
        assert!(smhs.method(Scheme::Gonzalez).is_err());
        let pendulum = make_constrained_hamiltonian();
        assert!(pendulum.method(Scheme::Gonzalez).is_ok());
        assert!(make_friction().method(Scheme::Gonzalez).is_err());
    }
}
