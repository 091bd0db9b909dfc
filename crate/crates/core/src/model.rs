//! DAE models `A ż = f(z)` and linear-gradient DAEs `A ż = S(z)∇V(z)`,
//! with properness checks, properization and the explicit structure-matrix
//! constructions for conservative and dissipative quantities.

use std::fmt;
use std::sync::Arc;

use nalgebra::Cholesky;

use crate::error::{check_dim, Error, Result};
use crate::gradients::{FieldHint, ScalarField};
use crate::linalg::{
    ensure_finite_matrix, is_negative_semidefinite, is_skew_symmetric, project, pseudo_inverse,
    Matrix, SubspaceData, Vector,
};

pub type VectorFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureClaim {
    Conservative,
    Dissipative,
    None,
}

/// The `S` of a linear-gradient DAE.
#[derive(Clone)]
pub enum StructureMatrix {
    Constant(Matrix),
    StateDependent(MatrixFn),
}

impl StructureMatrix {
    pub fn at(&self, z: &Vector) -> Matrix {
        match self {
            Self::Constant(s) => s.clone(),
            Self::StateDependent(f) => f(z),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant(_))
    }
}

impl fmt::Debug for StructureMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(s) => f.debug_tuple("Constant").field(s).finish(),
            Self::StateDependent(_) => f.write_str("StateDependent(..)"),
        }
    }
}

fn constraint_values(constraints: &[ScalarField], z: &Vector) -> Vector {
    Vector::from_iterator(constraints.len(), constraints.iter().map(|g| g.value(z)))
}

/// General DAE `A ż = f(z)`.
#[derive(Clone)]
pub struct GeneralDAE {
    pub a: Matrix,
    f: VectorFn,
    f_jacobian: Option<MatrixFn>,
    pub constraints: Vec<ScalarField>,
    pub subspaces: SubspaceData,
}

impl fmt::Debug for GeneralDAE {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralDAE")
            .field("a", &self.a)
            .field("constraints", &self.constraints)
            .field("rank", &self.subspaces.rank)
            .finish_non_exhaustive()
    }
}

impl GeneralDAE {
    pub fn new<F>(a: Matrix, f: F, constraints: Vec<ScalarField>) -> Result<Self>
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        Self::from_arc(a, Arc::new(f), constraints)
    }

    fn from_arc(a: Matrix, f: VectorFn, constraints: Vec<ScalarField>) -> Result<Self> {
        let subspaces = pseudo_inverse(&a, None)?;
        for g in &constraints {
            check_dim(a.nrows(), g.dim())?;
        }
        Ok(Self {
            a,
            f,
            f_jacobian: None,
            constraints,
            subspaces,
        })
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        self.f_jacobian = Some(Arc::new(jac));
        self
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn f(&self, z: &Vector) -> Vector {
        (self.f)(z)
    }

    pub fn f_jacobian(&self, z: &Vector) -> Option<Matrix> {
        self.f_jacobian.as_ref().map(|j| j(z))
    }

    /// Values `g_i(z)` of the declared constraints.
    pub fn constraint_values(&self, z: &Vector) -> Vector {
        constraint_values(&self.constraints, z)
    }
}

/// Linear-gradient DAE `A ż = S(z)∇V(z)`.
#[derive(Debug, Clone)]
pub struct LinearGradientDAE {
    pub a: Matrix,
    pub s: StructureMatrix,
    pub v: ScalarField,
    pub constraints: Vec<ScalarField>,
    pub subspaces: SubspaceData,
    pub structure_claim: StructureClaim,
}

impl LinearGradientDAE {
    pub fn new(
        a: Matrix,
        s: StructureMatrix,
        v: ScalarField,
        constraints: Vec<ScalarField>,
        structure_claim: StructureClaim,
    ) -> Result<Self> {
        let subspaces = pseudo_inverse(&a, None)?;
        let d = a.nrows();
        check_dim(d, v.dim())?;
        for g in &constraints {
            check_dim(d, g.dim())?;
        }
        if let StructureMatrix::Constant(s) = &s {
            check_dim(d, s.nrows())?;
            check_dim(d, s.ncols())?;
            ensure_finite_matrix(s, "structure matrix")?;
        }
        Ok(Self {
            a,
            s,
            v,
            constraints,
            subspaces,
            structure_claim,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn s_at(&self, z: &Vector) -> Matrix {
        self.s.at(z)
    }

    /// `S(z)∇V(z)`.
    pub fn rhs(&self, z: &Vector) -> Vector {
        self.s_at(z) * self.v.gradient(z)
    }

    /// Implicit constraint `G(z) = Bᵀ S(z) ∇V(z)`.
    pub fn implicit_constraint(&self, z: &Vector) -> Vector {
        self.subspaces.range_perp_basis.tr_mul(&self.rhs(z))
    }

    pub fn constraint_values(&self, z: &Vector) -> Vector {
        constraint_values(&self.constraints, z)
    }

    pub fn to_general(&self) -> GeneralDAE {
        let s = self.s.clone();
        let v = self.v.clone();
        GeneralDAE {
            a: self.a.clone(),
            f: Arc::new(move |z: &Vector| s.at(z) * v.gradient(z)),
            f_jacobian: None,
            constraints: self.constraints.clone(),
            subspaces: self.subspaces.clone(),
        }
    }

    pub fn check_proper(&self, z: &Vector, tol: f64) -> Result<ProperCheck> {
        check_proper(&self.subspaces, &self.constraints, &self.v, z, tol)
    }
}

/// `Bᵀ f(z)`, with `B` spanning `Range(A)^⊥`.
pub fn implicit_constraint_residual(dae: &GeneralDAE, z: &Vector) -> Result<Vector> {
    check_dim(dae.dim(), z.len())?;
    Ok(dae.subspaces.range_perp_basis.tr_mul(&dae.f(z)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProperCheck {
    pub proper: bool,
    /// `‖P_Null(A) ∇V(z)‖`.
    pub residual: f64,
    /// False when some declared constraint exceeds `tol` at `z`.
    pub on_manifold: bool,
}

/// Properness test `∇V(z) ∈ Car(A)` at a single point.
pub fn check_proper(
    subspaces: &SubspaceData,
    constraints: &[ScalarField],
    v: &ScalarField,
    z: &Vector,
    tol: f64,
) -> Result<ProperCheck> {
    check_dim(subspaces.dim(), z.len())?;
    check_dim(subspaces.dim(), v.dim())?;
    let residual = project(&subspaces.null_basis, &v.gradient(z))?.norm();
    let on_manifold = constraints.iter().all(|g| g.value(z).abs() <= tol);
    Ok(ProperCheck {
        proper: residual <= tol,
        residual,
        on_manifold,
    })
}

/// Time derivative `⟨∇V(z), A†f(z)⟩` of a proper `V` along solutions.
pub fn proper_time_derivative(dae: &GeneralDAE, v: &ScalarField, z: &Vector) -> Result<f64> {
    check_dim(dae.dim(), z.len())?;
    Ok(v.gradient(z).dot(&(&dae.subspaces.pinv * dae.f(z))))
}

/// A properized function `V = Ṽ + Σ cᵢ(z) gᵢ(z)`.
#[derive(Debug, Clone)]
pub struct Properized {
    base: ScalarField,
    constraints: Vec<ScalarField>,
    null_basis: Matrix,
}

impl Properized {
    /// Coefficients `c(z) = −Wᵀ (W Wᵀ)⁻¹ Eᵀ ∇Ṽ(z)` with `W = Eᵀ [∇g₁ … ∇g_k]`.
    pub fn coefficients(&self, z: &Vector) -> Result<Vector> {
        check_dim(self.base.dim(), z.len())?;
        let ell = self.null_basis.ncols();
        let k = self.constraints.len();
        if ell == 0 {
            return Ok(Vector::zeros(k));
        }
        let mut grads = Matrix::zeros(z.len(), k);
        for (i, g) in self.constraints.iter().enumerate() {
            grads.set_column(i, &g.gradient(z));
        }
        let w = self.null_basis.tr_mul(&grads);
        let wwt = &w * w.transpose();
        let trace = wwt.trace();
        let chol = Cholesky::new(wwt).ok_or(Error::RankDeficientW)?;
        let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, x| m.min(x * x));
        if !(trace > 0.0) || min_pivot <= 1e-12 * trace {
            return Err(Error::RankDeficientW);
        }
        let rhs = self.null_basis.tr_mul(&self.base.gradient(z));
        Ok(-(w.transpose() * chol.solve(&rhs)))
    }

    pub fn value(&self, z: &Vector) -> Result<f64> {
        let c = self.coefficients(z)?;
        Ok(self.base.value(z)
            + self.constraints.iter().zip(c.iter()).map(|(g, ci)| ci * g.value(z)).sum::<f64>())
    }

    /// On-manifold gradient `∇Ṽ + Σ cᵢ ∇gᵢ`; the `gᵢ ∇cᵢ` terms vanish on CM
    /// and are dropped everywhere.
    pub fn gradient(&self, z: &Vector) -> Result<Vector> {
        let c = self.coefficients(z)?;
        let mut g = self.base.gradient(z);
        for (gi, ci) in self.constraints.iter().zip(c.iter()) {
            g.axpy(*ci, &gi.gradient(z), 1.0);
        }
        Ok(g)
    }

    /// Infallible field view; evaluation points with a rank-deficient `W`
    /// produce NaN.
    pub fn to_field(&self) -> ScalarField {
        let (pv, pg) = (self.clone(), self.clone());
        let dim = self.base.dim();
        ScalarField::new(
            format!("{}_proper", self.base.name()),
            dim,
            move |z: &Vector| pv.value(z).unwrap_or(f64::NAN),
            move |z: &Vector| pg.gradient(z).unwrap_or_else(|_| Vector::from_element(dim, f64::NAN)),
        )
    }
}

/// Constructive properization of `v_tilde` with respect to `dae`.
pub fn properize(v_tilde: &ScalarField, dae: &GeneralDAE) -> Result<Properized> {
    check_dim(dae.dim(), v_tilde.dim())?;
    if dae.constraints.len() < dae.subspaces.nullity() {
        return Err(Error::RankDeficientW);
    }
    Ok(Properized {
        base: v_tilde.clone(),
        constraints: dae.constraints.clone(),
        null_basis: dae.subspaces.null_basis.clone(),
    })
}

/// Outcome of a sample-based structure verification.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub claim: StructureClaim,
    /// Skew residual (conservative / none) or largest symmetric eigenvalue
    /// (dissipative) of `A†S(z)` per sample.
    pub per_sample: Vec<f64>,
    pub worst: f64,
    pub max_constraint_residual: f64,
    pub passed: bool,
}

pub fn verify_structure(dae: &LinearGradientDAE, samples: &[Vector], tol: f64) -> Result<StructureReport> {
    let mut per_sample = Vec::with_capacity(samples.len());
    let mut passed = true;
    let mut max_constraint_residual: f64 = 0.0;
    for z in samples {
        check_dim(dae.dim(), z.len())?;
        max_constraint_residual = max_constraint_residual.max(dae.constraint_values(z).amax());
        let m = &dae.subspaces.pinv * dae.s_at(z);
        let (ok, r) = match dae.structure_claim {
            StructureClaim::Dissipative => is_negative_semidefinite(&m, tol)?,
            StructureClaim::Conservative => is_skew_symmetric(&m, tol)?,
            StructureClaim::None => (true, is_skew_symmetric(&m, tol)?.1),
        };
        passed &= ok;
        per_sample.push(r);
    }
    let worst = per_sample.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(StructureReport {
        claim: dae.structure_claim,
        per_sample,
        worst,
        max_constraint_residual,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstructedKind {
    Conservative,
    Dissipative,
}

/// Structure matrix `S(z)` built from `(A, f, V)` so that `S(z)∇V(z) = f(z)`.
#[derive(Debug, Clone)]
pub struct ConstructedStructure {
    dae: GeneralDAE,
    v: ScalarField,
    kind: ConstructedKind,
    tol: f64,
}

impl ConstructedStructure {
    pub fn kind(&self) -> ConstructedKind {
        self.kind
    }

    pub fn eval(&self, z: &Vector) -> Result<Matrix> {
        check_dim(self.dae.dim(), z.len())?;
        let f = self.dae.f(z);
        let pinv_f = &self.dae.subspaces.pinv * &f;
        let grad = self.v.gradient(z);
        match self.kind {
            ConstructedKind::Conservative => {
                let n2 = grad.norm_squared();
                if n2.sqrt() <= self.tol {
                    return Err(Error::VanishingGradient(n2.sqrt()));
                }
                let a_grad = &self.dae.a * &grad;
                Ok((&f * grad.transpose() - a_grad * pinv_f.transpose()) / n2)
            }
            ConstructedKind::Dissipative => {
                let rate = pinv_f.dot(&grad);
                if rate.abs() <= self.tol {
                    return Err(Error::VanishingDissipation(rate));
                }
                Ok(&f * pinv_f.transpose() / rate)
            }
        }
    }

    /// `A† S(z)`.
    pub fn pinv_times_s(&self, z: &Vector) -> Result<Matrix> {
        Ok(&self.dae.subspaces.pinv * self.eval(z)?)
    }

    /// `‖S(z)∇V(z) − f(z)‖`.
    pub fn reconstruction_residual(&self, z: &Vector) -> Result<f64> {
        let s = self.eval(z)?;
        Ok((s * self.v.gradient(z) - self.dae.f(z)).norm())
    }
}

/// `S(z) = [f ∇Vᵀ − A∇V (A†f)ᵀ] / ‖∇V‖²`; `A†S` is skew wherever `V` is a
/// proper conserved quantity.
pub fn build_conservative_s(dae: &GeneralDAE, v: &ScalarField, tol: f64) -> Result<ConstructedStructure> {
    check_dim(dae.dim(), v.dim())?;
    Ok(ConstructedStructure {
        dae: dae.clone(),
        v: v.clone(),
        kind: ConstructedKind::Conservative,
        tol,
    })
}

/// `S(z) = f (A†f)ᵀ / ⟨A†f, ∇V⟩`.
pub fn build_dissipative_s(dae: &GeneralDAE, v: &ScalarField, tol: f64) -> Result<ConstructedStructure> {
    check_dim(dae.dim(), v.dim())?;
    Ok(ConstructedStructure {
        dae: dae.clone(),
        v: v.clone(),
        kind: ConstructedKind::Dissipative,
        tol,
    })
}

/// Smallest `t` in `[t_min, t_max]` with `g(t·dir) = 0`, found by a sign
/// scan on `samples` subintervals followed by bisection.
pub fn root_along_ray(g: &ScalarField, dir: &Vector, t_min: f64, t_max: f64, samples: usize) -> Option<f64> {
    let eval = |t: f64| g.value(&(dir * t));
    let h = (t_max - t_min) / samples as f64;
    let mut lo = t_min;
    let mut f_lo = eval(lo);
    for i in 1..=samples {
        let hi = t_min + h * i as f64;
        let f_hi = eval(hi);
        if f_lo == 0.0 {
            return Some(lo);
        }
        if f_lo.signum() != f_hi.signum() {
            let (mut a, mut b, mut fa) = (lo, hi, f_lo);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let fm = eval(m);
                if fm == 0.0 || (b - a) <= f64::EPSILON * m.abs() {
                    return Some(m);
                }
                if fa.signum() == fm.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            return Some(0.5 * (a + b));
        }
        lo = hi;
        f_lo = f_hi;
    }
    None
}

/// Whether a field is known to be quadratic.
pub fn is_quadratic(v: &ScalarField) -> bool {
    matches!(v.hint(), FieldHint::Quadratic(_))
}

/// Hamiltonian system with holonomic constraints
/// `q̇ = H_p`, `ṗ = −H_q − (Jg)ᵀλ`, `0 = g(q)` in the state `z = (q, p, λ)`.
#[derive(Debug, Clone)]
pub struct ConstrainedHamiltonian {
    n: usize,
    hamiltonian: ScalarField,
    constraints: Vec<ScalarField>,
    lifted: Vec<ScalarField>,
}

impl ConstrainedHamiltonian {
    /// `hamiltonian` acts on `(q, p) ∈ ℝ^{2n}`, each constraint on `q ∈ ℝ^n`.
    pub fn new(n: usize, hamiltonian: ScalarField, constraints: Vec<ScalarField>) -> Result<Self> {
        check_dim(2 * n, hamiltonian.dim())?;
        for g in &constraints {
            check_dim(n, g.dim())?;
        }
        let d = 2 * n + constraints.len();
        let lifted = constraints
            .iter()
            .map(|g| {
                let (gv, gg) = (g.clone(), g.clone());
                ScalarField::new(
                    g.name(),
                    d,
                    move |z: &Vector| gv.value(&z.rows(0, n).into_owned()),
                    move |z: &Vector| {
                        let mut out = Vector::zeros(d);
                        out.rows_mut(0, n).copy_from(&gg.gradient(&z.rows(0, n).into_owned()));
                        out
                    },
                )
            })
            .collect();
        Ok(Self {
            n,
            hamiltonian,
            constraints,
            lifted,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn multipliers(&self) -> usize {
        self.constraints.len()
    }

    pub fn dim(&self) -> usize {
        2 * self.n + self.constraints.len()
    }

    pub fn hamiltonian(&self) -> &ScalarField {
        &self.hamiltonian
    }

    pub fn position_constraints(&self) -> &[ScalarField] {
        &self.constraints
    }

    /// Constraints as functions of the full state `(q, p, λ)`.
    pub fn state_constraints(&self) -> &[ScalarField] {
        &self.lifted
    }

    /// `H(q, p)` as a function of the full state.
    pub fn lifted_hamiltonian(&self) -> ScalarField {
        let (n, d) = (self.n, self.dim());
        let (hv, hg) = (self.hamiltonian.clone(), self.hamiltonian.clone());
        ScalarField::new(
            self.hamiltonian.name(),
            d,
            move |z: &Vector| hv.value(&z.rows(0, 2 * n).into_owned()),
            move |z: &Vector| {
                let mut out = Vector::zeros(d);
                out.rows_mut(0, 2 * n).copy_from(&hg.gradient(&z.rows(0, 2 * n).into_owned()));
                out
            },
        )
    }

    /// Augmented Hamiltonian `V(q, p, λ) = H(q, p) + ⟨λ, g(q)⟩`.
    pub fn augmented_hamiltonian(&self) -> ScalarField {
        let this = self.clone();
        let this_g = self.clone();
        ScalarField::new("V", self.dim(), move |z: &Vector| this.augmented_value(z), move |z: &Vector| {
            this_g.augmented_gradient(z)
        })
    }

    fn augmented_value(&self, z: &Vector) -> f64 {
        let n = self.n;
        let q = z.rows(0, n).into_owned();
        let mut v = self.hamiltonian.value(&z.rows(0, 2 * n).into_owned());
        for (k, g) in self.constraints.iter().enumerate() {
            v += z[2 * n + k] * g.value(&q);
        }
        v
    }

    fn augmented_gradient(&self, z: &Vector) -> Vector {
        let n = self.n;
        let q = z.rows(0, n).into_owned();
        let mut out = Vector::zeros(self.dim());
        out.rows_mut(0, 2 * n).copy_from(&self.hamiltonian.gradient(&z.rows(0, 2 * n).into_owned()));
        for (k, g) in self.constraints.iter().enumerate() {
            let lambda = z[2 * n + k];
            let dg = g.gradient(&q);
            for i in 0..n {
                out[i] += lambda * dg[i];
            }
            out[2 * n + k] = g.value(&q);
        }
        out
    }

    /// Linear-gradient form `diag(I, I, O) ż = [[O, I, ·], [−I, O, ·], [·, ·, I]] ∇V`.
    pub fn augmented_dae(&self) -> Result<LinearGradientDAE> {
        let (n, h, d) = (self.n, self.multipliers(), self.dim());
        let mut a = Matrix::zeros(d, d);
        a.view_mut((0, 0), (2 * n, 2 * n)).fill_with_identity();
        let mut s = Matrix::zeros(d, d);
        s.view_mut((0, n), (n, n)).fill_with_identity();
        s.view_mut((n, 0), (n, n)).copy_from(&-Matrix::identity(n, n));
        s.view_mut((2 * n, 2 * n), (h, h)).fill_with_identity();
        LinearGradientDAE::new(
            a,
            StructureMatrix::Constant(s),
            self.augmented_hamiltonian(),
            self.lifted.clone(),
            StructureClaim::Conservative,
        )
    }
}
