//! One-step schemes and the Newton solver they share.
//!
//! * [`implicit_euler_step`]: `A(z' − z)/Δt = f(z')`.
//! * [`dg_step`]: `A(z' − z)/Δt = S̄(z', z) ḡ(z', z)` for any discrete gradient.
//! * [`gonzalez_constrained_step`]: Gonzalez' scheme for constrained
//!   Hamiltonian systems.
//! * [`index1_dg_step`]: the redundant-variable scheme
//!   `A(z' − z)/Δt = S̄ ḡ_P(z', z) + B c`, `G(z') = 0`, which keeps the state
//!   on the constraint manifold and conserves `V` for index-1 problems.

use std::fmt;

use crate::error::{check_dim, Error, Result};
use crate::gradients::{midpoint_gradient, DiscreteGradientKind, ScalarField};
use crate::linalg::{ensure_finite_vector, Matrix, Vector};
use crate::model::{ConstrainedHamiltonian, GeneralDAE, LinearGradientDAE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JacobianMode {
    /// Use the problem-supplied Jacobian.
    Analytic,
    /// Forward differences; the default step is `√ε (1 + ‖w‖∞)`.
    ForwardDifference { step: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub residual_tol: f64,
    pub step_tol: f64,
    pub max_iters: usize,
    pub jacobian: JacobianMode,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-12,
            step_tol: 1e-14,
            max_iters: 50,
            jacobian: JacobianMode::ForwardDifference { step: None },
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) || !(self.step_tol > 0.0) {
            return Err(Error::InvalidArgument("Newton tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("Newton max_iters must be at least 1".into()));
        }
        if let JacobianMode::ForwardDifference { step: Some(h) } = self.jacobian {
            if !(h > 0.0) {
                return Err(Error::InvalidArgument(format!("finite-difference step {h}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub solution: Vector,
    pub iters: usize,
    /// `‖residual(solution)‖∞`.
    pub residual: f64,
}

const MAX_HALVINGS: usize = 20;

/// Newton's method with forward-difference Jacobians.
pub fn newton_solve<R>(residual: R, w0: &Vector, cfg: &NewtonConfig) -> Result<NewtonOutcome>
where
    R: Fn(&Vector) -> Result<Vector>,
{
    if cfg.jacobian == JacobianMode::Analytic {
        return Err(Error::InvalidArgument(
            "analytic Jacobian requested but none supplied".into(),
        ));
    }
    newton_core(&residual, None::<&fn(&Vector) -> Result<Matrix>>, w0, cfg)
}

/// Newton's method; `jacobian` is used when `cfg.jacobian` is
/// [`JacobianMode::Analytic`], forward differences otherwise.
pub fn newton_solve_with_jacobian<R, J>(residual: R, jacobian: J, w0: &Vector, cfg: &NewtonConfig) -> Result<NewtonOutcome>
where
    R: Fn(&Vector) -> Result<Vector>,
    J: Fn(&Vector) -> Result<Matrix>,
{
    newton_core(&residual, Some(&jacobian), w0, cfg)
}

fn fd_jacobian<R>(residual: &R, w: &Vector, r: &Vector, step: Option<f64>) -> Result<Matrix>
where
    R: Fn(&Vector) -> Result<Vector>,
{
    let h = step.unwrap_or_else(|| f64::EPSILON.sqrt() * (1.0 + w.amax()));
    let mut jac = Matrix::zeros(r.len(), w.len());
    let mut wp = w.clone();
    for j in 0..w.len() {
        let orig = wp[j];
        wp[j] = orig + h;
        let dh = wp[j] - orig;
        let rp = residual(&wp)?;
        jac.set_column(j, &((rp - r) / dh));
        wp[j] = orig;
    }
    Ok(jac)
}

fn solve_linear(jac: Matrix, rhs: &Vector) -> Result<Vector> {
    if jac.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularJacobian);
    }
    let lu = jac.lu();
    let diag = lu.u().diagonal();
    let max = diag.amax();
    let min = diag.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if max == 0.0 || min <= 1e-15 * max {
        return Err(Error::SingularJacobian);
    }
    lu.solve(rhs).ok_or(Error::SingularJacobian)
}

fn newton_core<R, J>(residual: &R, jacobian: Option<&J>, w0: &Vector, cfg: &NewtonConfig) -> Result<NewtonOutcome>
where
    R: Fn(&Vector) -> Result<Vector>,
    J: Fn(&Vector) -> Result<Matrix>,
{
    cfg.validate()?;
    let mut w = w0.clone();
    let mut r = residual(&w)?;
    check_dim(w.len(), r.len())?;
    let mut rn = if r.iter().all(|x| x.is_finite()) { r.amax() } else { f64::INFINITY };
    if !rn.is_finite() {
        return Err(Error::NoConvergence { iters: 0, residual: rn });
    }

    for iter in 0..cfg.max_iters {
        if rn <= cfg.residual_tol {
            return Ok(NewtonOutcome {
                solution: w,
                iters: iter,
                residual: rn,
            });
        }
        let jac = match (cfg.jacobian, jacobian) {
            (JacobianMode::Analytic, Some(j)) => j(&w)?,
            (JacobianMode::ForwardDifference { step }, _) => fd_jacobian(residual, &w, &r, step)?,
            (JacobianMode::Analytic, None) => unreachable!("checked by newton_solve"),
        };
        let delta = solve_linear(jac, &(-&r))?;

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = &w + &delta * lambda;
            let rt = residual(&trial)?;
            let rtn = if rt.iter().all(|x| x.is_finite()) { rt.amax() } else { f64::INFINITY };
            if rtn < rn {
                accepted = Some((trial, rt, rtn));
                break;
            }
            if rtn.is_finite() {
                accepted = Some((trial, rt, rtn));
            }
            lambda *= 0.5;
        }
        let Some((trial, rt, rtn)) = accepted else {
            return Err(Error::NoConvergence {
                iters: iter + 1,
                residual: rn,
            });
        };
        let step_norm = (&trial - &w).amax();
        w = trial;
        r = rt;
        rn = rtn;
        if rn <= cfg.residual_tol {
            return Ok(NewtonOutcome {
                solution: w,
                iters: iter + 1,
                residual: rn,
            });
        }
        if step_norm <= cfg.step_tol * (1.0 + w.amax()) {
            return Err(Error::NoConvergence {
                iters: iter + 1,
                residual: rn,
            });
        }
    }
    Err(Error::NoConvergence {
        iters: cfg.max_iters,
        residual: rn,
    })
}

/// Result of one step of a scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: Vector,
    /// Redundant variables `c` of the index-1 scheme.
    pub redundant: Option<Vector>,
    pub newton_iters: usize,
    pub newton_residual: f64,
    pub fallback_used: bool,
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("time step {dt} must be positive")))
    }
}

/// `A(z' − z)/Δt = f(z')`.
pub fn implicit_euler_step(dae: &GeneralDAE, z: &Vector, dt: f64, cfg: &NewtonConfig) -> Result<StepOutcome> {
    check_dt(dt)?;
    check_dim(dae.dim(), z.len())?;
    let residual = |w: &Vector| -> Result<Vector> { Ok(&dae.a * (w - z) / dt - dae.f(w)) };
    let out = match cfg.jacobian {
        JacobianMode::Analytic => {
            if dae.f_jacobian(z).is_none() {
                return Err(Error::InvalidArgument("model has no analytic Jacobian".into()));
            }
            let jac = |w: &Vector| -> Result<Matrix> {
                Ok(&dae.a / dt - dae.f_jacobian(w).expect("checked above"))
            };
            newton_solve_with_jacobian(residual, jac, z, cfg)?
        }
        JacobianMode::ForwardDifference { .. } => newton_solve(residual, z, cfg)?,
    };
    Ok(StepOutcome {
        state: out.solution,
        redundant: None,
        newton_iters: out.iters,
        newton_residual: out.residual,
        fallback_used: false,
    })
}

/// Two-point approximation `S̄(z', z)` of the structure matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SAveraging {
    /// `(S(z') + S(z))/2`.
    #[default]
    Average,
    /// `S(z)`.
    Left,
}

fn s_bar(dae: &LinearGradientDAE, zn: &Vector, z: &Vector, averaging: SAveraging) -> Matrix {
    if dae.s.is_constant() {
        return dae.s_at(z);
    }
    match averaging {
        SAveraging::Average => (dae.s_at(zn) + dae.s_at(z)) * 0.5,
        SAveraging::Left => dae.s_at(z),
    }
}

/// `A(z' − z)/Δt = S̄(z', z) ḡ(z', z)` with `S̄` averaged.
pub fn dg_step(
    dae: &LinearGradientDAE,
    dg: &DiscreteGradientKind,
    z: &Vector,
    dt: f64,
    cfg: &NewtonConfig,
) -> Result<StepOutcome> {
    dg_step_with(dae, dg, SAveraging::Average, z, dt, cfg)
}

pub fn dg_step_with(
    dae: &LinearGradientDAE,
    dg: &DiscreteGradientKind,
    averaging: SAveraging,
    z: &Vector,
    dt: f64,
    cfg: &NewtonConfig,
) -> Result<StepOutcome> {
    check_dt(dt)?;
    check_dim(dae.dim(), z.len())?;
    dg.validate()?;
    let residual = |w: &Vector| -> Result<Vector> {
        let g = dg.evaluate(&dae.v, w, z)?.gradient;
        Ok(&dae.a * (w - z) / dt - s_bar(dae, w, z, averaging) * g)
    };
    let out = newton_solve(residual, z, cfg).map_err(|e| match e {
        Error::SingularJacobian if dae.subspaces.nullity() > 0 => Error::UnderdeterminedSystem,
        e => e,
    })?;
    let fallback_used = dg.evaluate(&dae.v, &out.solution, z)?.fallback_used;
    Ok(StepOutcome {
        state: out.solution,
        redundant: None,
        newton_iters: out.iters,
        newton_residual: out.residual,
        fallback_used,
    })
}

/// Gonzalez' energy- and constraint-preserving step for
/// `q̇ = H_p, ṗ = −H_q − (Jg)ᵀλ, 0 = g(q)`:
///
/// ```text
/// (q' − q)/Δt = ḡ_p H
/// (p' − p)/Δt = −ḡ_q H − (J̄g)ᵀ (λ' + λ)/2
///           0 = (g(q') + g(q))/2
/// ```
///
/// with midpoint discrete gradients for `H` and for every row of `Jg`.
pub fn gonzalez_constrained_step(
    model: &ConstrainedHamiltonian,
    z: &Vector,
    dt: f64,
    cfg: &NewtonConfig,
) -> Result<StepOutcome> {
    check_dt(dt)?;
    check_dim(model.dim(), z.len())?;
    let (n, h) = (model.n(), model.multipliers());
    let qp = z.rows(0, 2 * n).into_owned();
    let q = z.rows(0, n).into_owned();
    let lambda = z.rows(2 * n, h).into_owned();
    let g_old: Vec<f64> = model.position_constraints().iter().map(|g| g.value(&q)).collect();

    let residual = |w: &Vector| -> Result<Vector> {
        let qp_new = w.rows(0, 2 * n).into_owned();
        let q_new = w.rows(0, n).into_owned();
        let lambda_bar = (w.rows(2 * n, h) + &lambda) * 0.5;
        let dh = midpoint_gradient(model.hamiltonian(), &qp_new, &qp)?;
        let mut r = Vector::zeros(2 * n + h);
        for i in 0..n {
            r[i] = (w[i] - z[i]) / dt - dh[n + i];
            r[n + i] = (w[n + i] - z[n + i]) / dt + dh[i];
        }
        for (k, g) in model.position_constraints().iter().enumerate() {
            let row = midpoint_gradient(g, &q_new, &q)?;
            for i in 0..n {
                r[n + i] += row[i] * lambda_bar[k];
            }
            r[2 * n + k] = 0.5 * (g.value(&q_new) + g_old[k]);
        }
        Ok(r)
    };
    let out = newton_solve(residual, z, cfg)?;
    Ok(StepOutcome {
        state: out.solution,
        redundant: None,
        newton_iters: out.iters,
        newton_residual: out.residual,
        fallback_used: false,
    })
}

/// Redundant-variable discrete gradient step for uniform index-1 problems.
///
/// Solves for `(z', c) ∈ ℝ^{d+ℓ}`:
///
/// ```text
/// A(z' − z)/Δt = S̄(z', z) ḡ_P V(z', z) + B c
///        G(z') = Bᵀ S(z') ∇V(z') = 0
/// ```
///
/// where `ḡ_P` is the interior-division gradient. With both endpoints on the
/// manifold `ḡ_P ∈ Car(A)`, and `V(z') = V(z)` follows.
pub fn index1_dg_step(dae: &LinearGradientDAE, z: &Vector, dt: f64, cfg: &NewtonConfig) -> Result<StepOutcome> {
    index1_dg_step_with(dae, &DiscreteGradientKind::proper(), SAveraging::Average, z, dt, cfg)
}

pub fn index1_dg_step_with(
    dae: &LinearGradientDAE,
    dg: &DiscreteGradientKind,
    averaging: SAveraging,
    z: &Vector,
    dt: f64,
    cfg: &NewtonConfig,
) -> Result<StepOutcome> {
    check_dt(dt)?;
    let d = dae.dim();
    check_dim(d, z.len())?;
    dg.validate()?;
    let ell = dae.subspaces.nullity();
    let b = &dae.subspaces.range_perp_basis;
    let residual = |w: &Vector| -> Result<Vector> {
        let zn = w.rows(0, d).into_owned();
        let c = w.rows(d, ell).into_owned();
        let g = dg.evaluate(&dae.v, &zn, z)?.gradient;
        let mut r = Vector::zeros(d + ell);
        r.rows_mut(0, d)
            .copy_from(&(&dae.a * (&zn - z) / dt - s_bar(dae, &zn, z, averaging) * g - b * c));
        r.rows_mut(d, ell).copy_from(&dae.implicit_constraint(&zn));
        Ok(r)
    };
    let mut w0 = Vector::zeros(d + ell);
    w0.rows_mut(0, d).copy_from(z);
    let out = newton_solve(residual, &w0, cfg)?;
    let state = out.solution.rows(0, d).into_owned();
    let fallback_used = dg.evaluate(&dae.v, &state, z)?.fallback_used;
    Ok(StepOutcome {
        redundant: Some(out.solution.rows(d, ell).into_owned()),
        state,
        newton_iters: out.iters,
        newton_residual: out.residual,
        fallback_used,
    })
}

/// Moves `z0` along `Null(A)` (minimal correction, orthonormal basis) until
/// the implicit constraint `G` vanishes.
pub fn project_to_constraint(dae: &LinearGradientDAE, z0: &Vector, cfg: &NewtonConfig) -> Result<Vector> {
    check_dim(dae.dim(), z0.len())?;
    project_along_null_space(&dae.subspaces.null_basis, z0, cfg, |z| dae.implicit_constraint(z))
}

/// [`project_to_constraint`] for a general DAE, with `G(z) = Bᵀ f(z)`.
pub fn project_general_to_constraint(dae: &GeneralDAE, z0: &Vector, cfg: &NewtonConfig) -> Result<Vector> {
    check_dim(dae.dim(), z0.len())?;
    let b = dae.subspaces.range_perp_basis.clone();
    project_along_null_space(&dae.subspaces.null_basis, z0, cfg, move |z| b.tr_mul(&dae.f(z)))
}

fn project_along_null_space<G>(null_basis: &Matrix, z0: &Vector, cfg: &NewtonConfig, g: G) -> Result<Vector>
where
    G: Fn(&Vector) -> Vector,
{
    let ell = null_basis.ncols();
    if ell == 0 {
        return Ok(z0.clone());
    }
    let residual = |s: &Vector| -> Result<Vector> { Ok(g(&(z0 + null_basis * s))) };
    let out = newton_solve(residual, &Vector::zeros(ell), cfg)?;
    Ok(z0 + null_basis * out.solution)
}

/// A scheme bound to its model.
pub trait OneStepMethod: Send + Sync {
    fn dim(&self) -> usize;

    /// Declared constraints, evaluated for the per-step residual norm.
    fn constraints(&self) -> &[ScalarField];

    /// Initial-state preparation (projection onto the constraint manifold
    /// for schemes that require it).
    fn prepare(&self, z0: &Vector, _cfg: &NewtonConfig) -> Result<Vector> {
        Ok(z0.clone())
    }

    fn step(&self, z: &Vector, dt: f64, cfg: &NewtonConfig) -> Result<StepOutcome>;
}

pub struct ImplicitEuler<'a>(pub &'a GeneralDAE);

impl OneStepMethod for ImplicitEuler<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn constraints(&self) -> &[ScalarField] {
        &self.0.constraints
    }

    fn step(&self, z: &Vector, dt: f64, cfg: &NewtonConfig) -> Result<StepOutcome> {
        implicit_euler_step(self.0, z, dt, cfg)
    }
}

pub struct DiscreteGradientMethod<'a> {
    pub dae: &'a LinearGradientDAE,
    pub gradient: DiscreteGradientKind,
    pub averaging: SAveraging,
}

impl OneStepMethod for DiscreteGradientMethod<'_> {
    fn dim(&self) -> usize {
        self.dae.dim()
    }

    fn constraints(&self) -> &[ScalarField] {
        &self.dae.constraints
    }

    fn step(&self, z: &Vector, dt: f64, cfg: &NewtonConfig) -> Result<StepOutcome> {
        dg_step_with(self.dae, &self.gradient, self.averaging, z, dt, cfg)
    }
}

pub struct Index1Method<'a> {
    pub dae: &'a LinearGradientDAE,
    pub averaging: SAveraging,
}

impl OneStepMethod for Index1Method<'_> {
    fn dim(&self) -> usize {
        self.dae.dim()
    }

    fn constraints(&self) -> &[ScalarField] {
        &self.dae.constraints
    }

    fn prepare(&self, z0: &Vector, cfg: &NewtonConfig) -> Result<Vector> {
        project_to_constraint(self.dae, z0, cfg)
    }

    fn step(&self, z: &Vector, dt: f64, cfg: &NewtonConfig) -> Result<StepOutcome> {
        index1_dg_step_with(self.dae, &DiscreteGradientKind::proper(), self.averaging, z, dt, cfg)
    }
}

pub struct GonzalezMethod<'a>(pub &'a ConstrainedHamiltonian);

impl OneStepMethod for GonzalezMethod<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn constraints(&self) -> &[ScalarField] {
        self.0.state_constraints()
    }

    fn step(&self, z: &Vector, dt: f64, cfg: &NewtonConfig) -> Result<StepOutcome> {
        gonzalez_constrained_step(self.0, z, dt, cfg)
    }
}

/// Scheme selector used by the problem library and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    ImplicitEuler,
    DgAvf,
    DgMidpoint,
    DgProper,
    DgIndex1,
    Gonzalez,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::ImplicitEuler,
        Scheme::DgAvf,
        Scheme::DgMidpoint,
        Scheme::DgProper,
        Scheme::DgIndex1,
        Scheme::Gonzalez,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::ImplicitEuler => "implicit-euler",
            Scheme::DgAvf => "dg-avf",
            Scheme::DgMidpoint => "dg-midpoint",
            Scheme::DgProper => "dg-proper",
            Scheme::DgIndex1 => "dg-index1",
            Scheme::Gonzalez => "gonzalez",
        }
    }

    /// Discrete gradient used by the `dg-*` schemes.
    pub fn discrete_gradient(self) -> Option<DiscreteGradientKind> {
        match self {
            Scheme::DgAvf => Some(DiscreteGradientKind::avf()),
            Scheme::DgMidpoint => Some(DiscreteGradientKind::Midpoint),
            Scheme::DgProper | Scheme::DgIndex1 => Some(DiscreteGradientKind::proper()),
            Scheme::ImplicitEuler | Scheme::Gonzalez => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step_index: usize,
    pub time: f64,
    pub state: Vector,
    /// Observer values in observer order.
    pub invariant_values: Vec<(String, f64)>,
    pub constraint_residual_norm: f64,
    pub redundant_c_norm: f64,
    pub newton_iters: usize,
    pub newton_residual: f64,
    pub fallback_used: bool,
}

impl StepRecord {
    pub fn invariant(&self, name: &str) -> Option<f64> {
        self.invariant_values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_state(&self) -> Option<&Vector> {
        self.records.last().map(|r| &r.state)
    }

    /// `max_m |I(z^(m)) − I(z^(0))|` for a named observer.
    pub fn max_drift(&self, name: &str) -> Option<f64> {
        let first = self.records.first()?.invariant(name)?;
        self.records
            .iter()
            .map(|r| r.invariant(name).map(|v| (v - first).abs()))
            .try_fold(0.0_f64, |m, d| d.map(|d| m.max(d)))
    }

    /// `max_m |I(z^(m))|` for a named observer.
    pub fn max_abs(&self, name: &str) -> Option<f64> {
        self.records
            .iter()
            .map(|r| r.invariant(name).map(f64::abs))
            .try_fold(0.0_f64, |m, d| d.map(|d| m.max(d)))
    }
}

/// An integration that stopped early.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationFailure {
    /// Index of the step that failed (the record for this index is absent).
    pub step: usize,
    pub partial: Trajectory,
    pub error: Error,
}

impl fmt::Display for IntegrationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {} failed: {}", self.step, self.error)
    }
}

impl std::error::Error for IntegrationFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn make_record(
    method: &dyn OneStepMethod,
    observers: &[ScalarField],
    step_index: usize,
    time: f64,
    outcome: StepOutcome,
) -> StepRecord {
    let state = outcome.state;
    let constraint_residual_norm = method
        .constraints()
        .iter()
        .map(|g| g.value(&state).powi(2))
        .sum::<f64>()
        .sqrt();
    StepRecord {
        step_index,
        time,
        invariant_values: observers.iter().map(|o| (o.name().to_string(), o.value(&state))).collect(),
        constraint_residual_norm,
        redundant_c_norm: outcome.redundant.map_or(0.0, |c| c.norm()),
        newton_iters: outcome.newton_iters,
        newton_residual: outcome.newton_residual,
        fallback_used: outcome.fallback_used,
        state,
    }
}

/// Runs `steps` steps of `method` from `z0` (after [`OneStepMethod::prepare`]).
/// Each Newton solve starts from the previous state.
pub fn integrate(
    method: &dyn OneStepMethod,
    z0: &Vector,
    dt: f64,
    steps: usize,
    observers: &[ScalarField],
    cfg: &NewtonConfig,
) -> std::result::Result<Trajectory, IntegrationFailure> {
    let fail = |step, partial, error| IntegrationFailure { step, partial, error };
    let precheck = || -> Result<()> {
        if steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        check_dt(dt)?;
        cfg.validate()?;
        check_dim(method.dim(), z0.len())?;
        ensure_finite_vector(z0, "initial state")?;
        for o in observers {
            check_dim(method.dim(), o.dim())?;
        }
        Ok(())
    };
    precheck().map_err(|e| fail(0, Trajectory::default(), e))?;
    let start = method.prepare(z0, cfg).map_err(|e| fail(0, Trajectory::default(), e))?;

    let mut traj = Trajectory {
        records: Vec::with_capacity(steps + 1),
    };
    traj.records.push(make_record(
        method,
        observers,
        0,
        0.0,
        StepOutcome {
            state: start,
            redundant: None,
            newton_iters: 0,
            newton_residual: 0.0,
            fallback_used: false,
        },
    ));
    for m in 1..=steps {
        let z = traj.last_state().expect("non-empty").clone();
        match method.step(&z, dt, cfg) {
            Ok(outcome) => traj.records.push(make_record(method, observers, m, m as f64 * dt, outcome)),
            Err(e) => return Err(fail(m, traj, e)),
        }
    }
    Ok(traj)
}
