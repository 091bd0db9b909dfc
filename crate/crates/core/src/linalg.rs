//! Dense linear-algebra substrate.
//!
//! Everything here works on small dense square matrices. The Moore–Penrose
//! inverse and the four subspace bases are all read off a single SVD
//! `A = U Σ Vᵀ` with the singular values sorted in descending order:
//!
//! * `Car(A) = Null(A)^⊥` is spanned by the leading `rank` columns of `V`,
//! * `Null(A)` by the trailing columns of `V`,
//! * `Range(A)^⊥` by the trailing columns of `U`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_dim, Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Pseudoinverse of a square matrix together with orthonormal bases of its
/// fundamental subspaces.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceData {
    pub pinv: Matrix,
    pub rank: usize,
    /// d×ℓ, orthonormal columns spanning Null(A).
    pub null_basis: Matrix,
    /// d×rank, orthonormal columns spanning Car(A).
    pub car_basis: Matrix,
    /// d×ℓ, orthonormal columns spanning Range(A)^⊥.
    pub range_perp_basis: Matrix,
    pub singular_values: Vec<f64>,
    pub tol_used: f64,
}

impl SubspaceData {
    pub fn dim(&self) -> usize {
        self.pinv.nrows()
    }

    /// Number of algebraic directions, `d - rank`.
    pub fn nullity(&self) -> usize {
        self.dim() - self.rank
    }
}

pub(crate) fn ensure_finite_matrix(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub(crate) fn ensure_finite_vector(v: &Vector, what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn ensure_square(m: &Matrix) -> Result<usize> {
    if m.nrows() == m.ncols() {
        Ok(m.nrows())
    } else {
        Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        })
    }
}

/// Default rank threshold: `max(rows, cols) · ε · σ_max`.
pub fn default_rank_tol(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Moore–Penrose inverse of a square matrix with numerical rank detection.
pub fn pseudo_inverse(a: &Matrix, rank_tol: Option<f64>) -> Result<SubspaceData> {
    let d = ensure_square(a)?;
    ensure_finite_matrix(a, "pseudo_inverse input")?;
    if let Some(tol) = rank_tol {
        if !(tol >= 0.0) || !tol.is_finite() {
            return Err(Error::InvalidArgument(format!("rank tolerance {tol}")));
        }
    }
    if d == 0 {
        return Ok(SubspaceData {
            pinv: Matrix::zeros(0, 0),
            rank: 0,
            null_basis: Matrix::zeros(0, 0),
            car_basis: Matrix::zeros(0, 0),
            range_perp_basis: Matrix::zeros(0, 0),
            singular_values: Vec::new(),
            tol_used: 0.0,
        });
    }

    // nalgebra's bidiagonal SVD can lose accuracy on exactly rank-deficient
    // input, so the decomposition is done by faer.
    let fa = faer::Mat::<f64>::from_fn(d, d, |i, j| a[(i, j)]);
    let svd = fa.svd().map_err(|_| Error::EigenSolverFailure)?;
    let (u, v, s) = (svd.U(), svd.V(), svd.S().column_vector());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));

    let sigma: Vec<f64> = order.iter().map(|&i| s[i]).collect();
    let sigma_max = sigma[0];
    let tol = rank_tol.unwrap_or_else(|| default_rank_tol(d, d, sigma_max));
    let rank = sigma.iter().take_while(|&&s| s > tol).count();

    let u_sorted = Matrix::from_fn(d, d, |r, c| u[(r, order[c])]);
    let v_sorted = Matrix::from_fn(d, d, |r, c| v[(r, order[c])]);

    let mut pinv = Matrix::zeros(d, d);
    for (k, s) in sigma.iter().enumerate().take(rank) {
        pinv += (v_sorted.column(k) * u_sorted.column(k).transpose()) / *s;
    }

    Ok(SubspaceData {
        pinv,
        rank,
        null_basis: v_sorted.columns(rank, d - rank).into_owned(),
        car_basis: v_sorted.columns(0, rank).into_owned(),
        range_perp_basis: u_sorted.columns(rank, d - rank).into_owned(),
        singular_values: sigma,
        tol_used: tol,
    })
}

/// Max-abs entry norm.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// The four Penrose residuals `‖AXA − A‖`, `‖XAX − X‖`, `‖(XA)ᵀ − XA‖`,
/// `‖(AX)ᵀ − AX‖` in the max-abs norm.
pub fn penrose_residuals(a: &Matrix, x: &Matrix) -> [f64; 4] {
    let ax = a * x;
    let xa = x * a;
    [
        max_abs(&(&ax * a - a)),
        max_abs(&(&xa * x - x)),
        max_abs(&(xa.transpose() - &xa)),
        max_abs(&(ax.transpose() - &ax)),
    ]
}

/// Orthogonal projection `basis · (basisᵀ · v)` onto the span of orthonormal
/// columns. An empty basis projects everything to zero.
pub fn project(basis: &Matrix, v: &Vector) -> Result<Vector> {
    check_dim(basis.nrows(), v.len())?;
    if basis.ncols() == 0 {
        return Ok(Vector::zeros(v.len()));
    }
    let coeffs = basis.tr_mul(v);
    Ok(basis * coeffs)
}

/// Returns `(‖M + Mᵀ‖_max ≤ tol, ‖M + Mᵀ‖_max)`.
pub fn is_skew_symmetric(m: &Matrix, tol: f64) -> Result<(bool, f64)> {
    ensure_square(m)?;
    let residual = max_abs(&(m + m.transpose()));
    Ok((residual <= tol, residual))
}

/// Largest eigenvalue of the symmetric part `(M + Mᵀ)/2`.
pub fn max_symmetric_eigenvalue(m: &Matrix) -> Result<f64> {
    let d = ensure_square(m)?;
    ensure_finite_matrix(m, "symmetric eigenvalue input")?;
    if d == 0 {
        return Ok(0.0);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, 10_000).ok_or(Error::EigenSolverFailure)?;
    Ok(eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Returns `(λ_max((M + Mᵀ)/2) ≤ tol, λ_max)`.
pub fn is_negative_semidefinite(m: &Matrix, tol: f64) -> Result<(bool, f64)> {
    let lambda = max_symmetric_eigenvalue(m)?;
    Ok((lambda <= tol, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn smhs_a() -> Matrix {
        Matrix::from_row_slice(3, 3, &[-1.0, 1.0, 0.0, 0.0, -1.0, 1.0, 1.0, 0.0, -1.0])
    }

    #[test]
    fn identity_pinv() {
        let sd = pseudo_inverse(&Matrix::identity(3, 3), None).unwrap();
        assert_eq!(sd.rank, 3);
        assert_eq!(sd.nullity(), 0);
        assert!(max_abs(&(sd.pinv - Matrix::identity(3, 3))) < 1e-15);
    }

    #[test]
    fn zero_pinv() {
        let sd = pseudo_inverse(&Matrix::zeros(3, 3), None).unwrap();
        assert_eq!(sd.rank, 0);
        assert_eq!(max_abs(&sd.pinv), 0.0);
        assert_eq!(sd.null_basis.ncols(), 3);
        let gram = sd.null_basis.transpose() * &sd.null_basis;
        assert!(max_abs(&(gram - Matrix::identity(3, 3))) < 1e-14);
    }

    #[test]
    fn smhs_matrix_rank_and_kernel() {
        let a = smhs_a();
        // Row sums vanish, so A·1 = 0 by direct arithmetic.
        let ones = Vector::from_element(3, 1.0);
        assert_eq!((&a * &ones).amax(), 0.0);

        let sd = pseudo_inverse(&a, None).unwrap();
        assert_eq!(sd.rank, 2);
        let e = sd.null_basis.column(0);
        let expected = 1.0 / 3.0_f64.sqrt();
        for i in 0..3 {
            assert!((e[i].abs() - expected).abs() < 1e-14);
        }
        for r in penrose_residuals(&a, &sd.pinv) {
            assert!(r <= 1e-12, "penrose residual {r}");
        }
        assert!(max_abs(&(&a * &sd.null_basis)) < 1e-14);
        assert!(max_abs(&(sd.range_perp_basis.transpose() * &a)) < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            pseudo_inverse(&Matrix::zeros(2, 3), None),
            Err(Error::NonSquare { rows: 2, cols: 3 })
        ));
        let mut m = Matrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(pseudo_inverse(&m, None), Err(Error::NonFinite(_))));
        assert!(is_skew_symmetric(&Matrix::zeros(2, 3), 0.0).is_err());
        assert!(is_negative_semidefinite(&Matrix::zeros(3, 2), 0.0).is_err());
    }

    #[test]
    fn projection_examples() {
        let e1 = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let p = project(&e1, &Vector::from_vec(vec![3.0, 4.0])).unwrap();
        assert_eq!(p, Vector::from_vec(vec![3.0, 0.0]));

        let empty = Matrix::zeros(2, 0);
        let p = project(&empty, &Vector::from_vec(vec![3.0, 4.0])).unwrap();
        assert_eq!(p, Vector::zeros(2));

        let s = 1.0 / 3.0_f64.sqrt();
        let ones = Matrix::from_column_slice(3, 1, &[s, s, s]);
        let p = project(&ones, &Vector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        // <b, e1> = 1/√3, times b gives 1/3 per component.
        for i in 0..3 {
            assert!((p[i] - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(project(&ones, &Vector::zeros(2)).is_err());
    }

    #[test]
    fn skew_predicates() {
        // Canonical symplectic matrix with n = 1.
        let j = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert_eq!(is_skew_symmetric(&j, 0.0).unwrap(), (true, 0.0));
        let (ok, res) = is_skew_symmetric(&Matrix::identity(3, 3), 1e-12).unwrap();
        assert!(!ok);
        assert_eq!(res, 2.0);
    }

    #[test]
    fn semidefinite_predicates() {
        let neg = -Matrix::identity(3, 3);
        assert!(is_negative_semidefinite(&neg, 1e-12).unwrap().0);
        assert!(!is_negative_semidefinite(&Matrix::identity(3, 3), 1e-12).unwrap().0);
        let j = Matrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        let (ok, lambda) = is_negative_semidefinite(&j, 1e-12).unwrap();
        assert!(ok);
        assert!(lambda.abs() < 1e-15);
    }

    fn arb_matrix() -> impl Strategy<Value = Matrix> {
        (1usize..=8, 0usize..=8).prop_flat_map(|(d, r)| {
            let r = r.min(d);
            (
                prop::collection::vec(-2.0f64..2.0, d * d),
                prop::collection::vec(-2.0f64..2.0, d * d),
                Just((d, r)),
                any::<bool>(),
            )
                .prop_map(|(x, y, (d, r), deficient)| {
                    let a = Matrix::from_vec(d, d, x);
                    if deficient {
                        let left = Matrix::from_vec(d, d, y).columns(0, r).into_owned();
                        left * a.rows(0, r).into_owned()
                    } else {
                        a
                    }
                })
        })
    }

    proptest! {
        #[test]
        fn projection_idempotent_and_contractive(m in arb_matrix(), v in prop::collection::vec(-5.0f64..5.0, 8)) {
            let d = m.nrows();
            let sd = pseudo_inverse(&m, None).unwrap();
            let v = Vector::from_iterator(d, v.into_iter().take(d));
            for basis in [&sd.null_basis, &sd.car_basis] {
                let p = project(basis, &v).unwrap();
                let pp = project(basis, &p).unwrap();
                prop_assert!((&pp - &p).amax() <= 1e-12);
                prop_assert!(p.norm() <= v.norm() * (1.0 + 1e-12));
            }
        }

        #[test]
        fn bases_complete_and_orthonormal(m in arb_matrix()) {
            let d = m.nrows();
            let sd = pseudo_inverse(&m, None).unwrap();
            prop_assert_eq!(sd.rank + sd.null_basis.ncols(), d);
            let mut stacked = Matrix::zeros(d, d);
            stacked.columns_mut(0, sd.rank).copy_from(&sd.car_basis);
            stacked.columns_mut(sd.rank, d - sd.rank).copy_from(&sd.null_basis);
            let gram = stacked.transpose() * &stacked;
            prop_assert!(max_abs(&(gram - Matrix::identity(d, d))) <= 1e-10);
        }
    }
}
