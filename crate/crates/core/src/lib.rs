//! Structure-preserving time integration for differential-algebraic
//! equations `A ż = f(z)` with conservation or dissipation laws.
//!
//! * [`linalg`]: Moore–Penrose pseudoinverse and subspace bases.
//! * [`gradients`]: discrete gradients (AVF, midpoint, interior division).
//! * [`model`]: linear-gradient DAEs, properness and structure matrices.
//! * [`integrators`]: implicit Euler, discrete gradient schemes, Gonzalez'
//!   scheme and the index-1 redundant-variable scheme.
//! * [`problems`]: built-in problem instances.
//! * [`cli`]: the experiment runner behind the `dgdae` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod gradients;
pub mod integrators;
pub mod linalg;
pub mod model;
pub mod problems;

pub use error::{Error, Result};
pub use gradients::{DiscreteGradientKind, FieldHint, ScalarField};
pub use integrators::{integrate, NewtonConfig, OneStepMethod, Scheme, StepRecord, Trajectory};
pub use linalg::{pseudo_inverse, Matrix, SubspaceData, Vector};
pub use model::{GeneralDAE, LinearGradientDAE, StructureClaim, StructureMatrix};
pub use problems::ProblemSpec;
