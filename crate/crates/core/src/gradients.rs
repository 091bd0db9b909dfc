//! Discrete gradients.
//!
//! A discrete gradient of `V` is a two-point map `ḡ(z, z')` with
//! `⟨ḡ(z, z'), z − z'⟩ = V(z) − V(z')` (the discrete chain rule) and
//! `ḡ(z, z) = ∇V(z)`. Three constructions are provided:
//!
//! * [`avf_gradient`]: the average vector field, `∫₀¹ ∇V((1−ξ)z + ξz') dξ`,
//!   evaluated by Gauss–Legendre quadrature.
//! * [`midpoint_gradient`]: Gonzalez' midpoint construction.
//! * [`proper_gradient`]: the interior-division gradient
//!   `θ(z,z')∇V(z) + θ(z',z)∇V(z')`, which stays in `Car(A)` whenever both
//!   endpoints lie on the constraint manifold and `V` is proper.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{Matrix, Vector};

pub type ValueFn = Arc<dyn Fn(&Vector) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

/// Structural hint attached to a scalar field.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldHint {
    /// `V(z) = ½ zᵀXz` with symmetric `X`.
    Quadratic(Matrix),
    StrictlyConvex,
    General,
}

/// A differentiable function `ℝ^d → ℝ` with an analytic gradient.
#[derive(Clone)]
pub struct ScalarField {
    name: String,
    dim: usize,
    value: ValueFn,
    gradient: GradientFn,
    hint: FieldHint,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("hint", &self.hint)
            .finish_non_exhaustive()
    }
}

impl ScalarField {
    pub fn new<V, G>(name: impl Into<String>, dim: usize, value: V, gradient: G) -> Self
    where
        V: Fn(&Vector) -> f64 + Send + Sync + 'static,
        G: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hint: FieldHint::General,
        }
    }

    pub fn with_hint(mut self, hint: FieldHint) -> Self {
        self.hint = hint;
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hint(&self) -> &FieldHint {
        &self.hint
    }

    pub fn value(&self, z: &Vector) -> f64 {
        (self.value)(z)
    }

    pub fn gradient(&self, z: &Vector) -> Vector {
        (self.gradient)(z)
    }

    /// `½ zᵀXz`. Only the symmetric part of `x` is used.
    pub fn quadratic(name: impl Into<String>, x: Matrix) -> Self {
        let x = (&x + x.transpose()) * 0.5;
        let dim = x.nrows();
        let xv = x.clone();
        let xg = x.clone();
        Self::new(
            name,
            dim,
            move |z: &Vector| 0.5 * z.dot(&(&xv * z)),
            move |z: &Vector| &xg * z,
        )
        .with_hint(FieldHint::Quadratic(x))
    }

    /// `Σᵢ cosh zᵢ`, strictly convex.
    pub fn cosh_sum(name: impl Into<String>, dim: usize) -> Self {
        Self::new(
            name,
            dim,
            |z: &Vector| z.iter().map(|x| x.cosh()).sum(),
            |z: &Vector| z.map(f64::sinh),
        )
        .with_hint(FieldHint::StrictlyConvex)
    }

    /// `⟨γ, z⟩`.
    pub fn linear(name: impl Into<String>, gamma: Vector) -> Self {
        let dim = gamma.len();
        let g = gamma.clone();
        Self::new(name, dim, move |z: &Vector| g.dot(z), move |_: &Vector| gamma.clone())
    }

    /// Relative discrepancy between the analytic gradient and central
    /// differences with step `h` at `z`.
    pub fn gradient_fd_error(&self, z: &Vector, h: f64) -> f64 {
        let g = self.gradient(z);
        let mut fd = Vector::zeros(self.dim);
        for i in 0..self.dim {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[i] += h;
            zm[i] -= h;
            fd[i] = (self.value(&zp) - self.value(&zm)) / (2.0 * h);
        }
        (&g - &fd).norm() / g.norm().max(1.0)
    }

    fn check(&self, z: &Vector, zp: &Vector) -> Result<()> {
        check_dim(self.dim, z.len())?;
        check_dim(self.dim, zp.len())
    }
}

/// Default AVF quadrature order (exact through degree 13).
pub const DEFAULT_AVF_ORDER: usize = 7;
/// Default relative threshold for a degenerate θ denominator.
pub const DEFAULT_THETA_DENOMINATOR_TOL: f64 = 1e-10;
/// Two points closer than this (relative to `max(1, ‖z‖)`) are treated as equal.
pub const COINCIDENCE_TOL: f64 = 1e-14;
/// Below this ratio between the θ numerator and the magnitude of its terms
/// the numerator is re-evaluated from gradient differences.
const CANCELLATION_RATIO: f64 = 1e-4;

pub(crate) fn coincident(z: &Vector, zp: &Vector) -> bool {
    (z - zp).norm() <= COINCIDENCE_TOL * z.norm().max(1.0)
}

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_n'(x).
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pnm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// Average vector field gradient with an `order`-point Gauss–Legendre rule.
pub fn avf_gradient(v: &ScalarField, z: &Vector, zp: &Vector, order: usize) -> Result<Vector> {
    v.check(z, zp)?;
    if order == 0 {
        return Err(Error::InvalidArgument("AVF quadrature order must be positive".into()));
    }
    if z == zp {
        return Ok(v.gradient(z));
    }
    let (nodes, weights) = gauss_legendre(order);
    let dz = zp - z;
    let mut acc = Vector::zeros(v.dim());
    for (xi, w) in nodes.iter().zip(&weights) {
        acc.axpy(*w, &v.gradient(&(z + &dz * *xi)), 1.0);
    }
    Ok(acc)
}

/// Gonzalez midpoint discrete gradient.
pub fn midpoint_gradient(v: &ScalarField, z: &Vector, zp: &Vector) -> Result<Vector> {
    v.check(z, zp)?;
    if coincident(z, zp) {
        return Ok(v.gradient(z));
    }
    let mid = (z + zp) * 0.5;
    let gm = v.gradient(&mid);
    let dz = z - zp;
    let correction = (v.value(z) - v.value(zp) - gm.dot(&dz)) / dz.norm_squared();
    Ok(gm + dz * correction)
}

/// `θ(z, z') = [V(z) − V(z') − ⟨∇V(z'), z−z'⟩] / ⟨∇V(z) − ∇V(z'), z−z'⟩`.
pub fn theta_coefficient(
    v: &ScalarField,
    z: &Vector,
    zp: &Vector,
    denominator_tol: f64,
) -> Result<f64> {
    v.check(z, zp)?;
    if let FieldHint::Quadratic(_) = v.hint() {
        return Ok(0.5);
    }
    theta_from_gradients(v, z, zp, &v.gradient(z), &v.gradient(zp), denominator_tol)
}

fn theta_from_gradients(
    v: &ScalarField,
    z: &Vector,
    zp: &Vector,
    gz: &Vector,
    gzp: &Vector,
    denominator_tol: f64,
) -> Result<f64> {
    let dz = z - zp;
    let distance_sq = dz.norm_squared();
    let denominator = (gz - gzp).dot(&dz);
    if !(denominator.abs() > denominator_tol * distance_sq) || distance_sq == 0.0 {
        return Err(Error::DegenerateDenominator {
            denominator,
            distance_sq,
        });
    }
    let (vz, vzp) = (v.value(z), v.value(zp));
    let linear = gzp.dot(&dz);
    let mut numerator = vz - vzp - linear;
    if numerator.abs() < CANCELLATION_RATIO * (vz.abs() + vzp.abs() + linear.abs()) {
        // Taylor remainder in integral form: ∫₀¹ ⟨∇V(z' + s(z−z')) − ∇V(z'), z−z'⟩ ds.
        let (nodes, weights) = gauss_legendre(DEFAULT_AVF_ORDER);
        numerator = nodes
            .iter()
            .zip(&weights)
            .map(|(s, w)| w * (v.gradient(&(zp + &dz * *s)) - gzp).dot(&dz))
            .sum();
    }
    Ok(numerator / denominator)
}

/// Result of evaluating a discrete gradient that may have fallen back to the
/// midpoint construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEval {
    pub gradient: Vector,
    pub fallback_used: bool,
}

fn lexicographically_le(a: &Vector, b: &Vector) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    true
}

/// Interior-division coefficients `(θ(z,z'), θ(z',z))`; they sum to one.
pub fn proper_coefficients(
    v: &ScalarField,
    z: &Vector,
    zp: &Vector,
    denominator_tol: f64,
) -> Result<(f64, f64)> {
    let theta = theta_coefficient(v, z, zp, denominator_tol)?;
    Ok((theta, 1.0 - theta))
}

/// Interior-division discrete gradient.
///
/// The pair is put in a canonical order before evaluation so the result is
/// bitwise symmetric in `(z, z')`. When the θ denominator degenerates and
/// `fallback` is set, the midpoint gradient is returned and flagged.
pub fn proper_gradient(
    v: &ScalarField,
    z: &Vector,
    zp: &Vector,
    denominator_tol: f64,
    fallback: bool,
) -> Result<GradientEval> {
    v.check(z, zp)?;
    if coincident(z, zp) {
        return Ok(GradientEval {
            gradient: v.gradient(z),
            fallback_used: false,
        });
    }
    let (a, b) = if lexicographically_le(z, zp) { (z, zp) } else { (zp, z) };
    let (ga, gb) = (v.gradient(a), v.gradient(b));
    let theta = match v.hint() {
        FieldHint::Quadratic(_) => Ok(0.5),
        _ => theta_from_gradients(v, a, b, &ga, &gb, denominator_tol),
    };
    match theta {
        Ok(theta) => Ok(GradientEval {
            gradient: ga * theta + gb * (1.0 - theta),
            fallback_used: false,
        }),
        Err(e @ Error::DegenerateDenominator { .. }) => {
            if fallback {
                Ok(GradientEval {
                    gradient: midpoint_gradient(v, a, b)?,
                    fallback_used: true,
                })
            } else {
                Err(e)
            }
        }
        Err(e) => Err(e),
    }
}

/// Selector among the available discrete gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiscreteGradientKind {
    Avf { quadrature_order: usize },
    Midpoint,
    Proper { theta_denominator_tol: f64, fallback: bool },
}

impl DiscreteGradientKind {
    pub fn avf() -> Self {
        Self::Avf {
            quadrature_order: DEFAULT_AVF_ORDER,
        }
    }

    pub fn proper() -> Self {
        Self::Proper {
            theta_denominator_tol: DEFAULT_THETA_DENOMINATOR_TOL,
            fallback: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Avf { quadrature_order } if quadrature_order < 2 => Err(Error::InvalidArgument(
                format!("AVF quadrature order {quadrature_order} < 2"),
            )),
            Self::Proper {
                theta_denominator_tol,
                ..
            } if !(theta_denominator_tol > 0.0) => Err(Error::InvalidArgument(format!(
                "theta denominator tolerance {theta_denominator_tol} must be positive"
            ))),
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, v: &ScalarField, z: &Vector, zp: &Vector) -> Result<GradientEval> {
        match *self {
            Self::Avf { quadrature_order } => Ok(GradientEval {
                gradient: avf_gradient(v, z, zp, quadrature_order)?,
                fallback_used: false,
            }),
            Self::Midpoint => Ok(GradientEval {
                gradient: midpoint_gradient(v, z, zp)?,
                fallback_used: false,
            }),
            Self::Proper {
                theta_denominator_tol,
                fallback,
            } => proper_gradient(v, z, zp, theta_denominator_tol, fallback),
        }
    }
}

/// `|⟨ḡ, z−z'⟩ − (V(z) − V(z'))|` for the selected discrete gradient.
pub fn chain_rule_residual(
    kind: &DiscreteGradientKind,
    v: &ScalarField,
    z: &Vector,
    zp: &Vector,
) -> Result<f64> {
    let g = kind.evaluate(v, z, zp)?.gradient;
    Ok((g.dot(&(z - zp)) - (v.value(z) - v.value(zp))).abs())
}
