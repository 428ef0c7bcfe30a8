//! Dense-matrix primitives and decompositions used by every solver.
//!
//! Conventions used throughout the crate:
//! * data matrices are column-per-sample (`d x n`),
//! * all decompositions are deterministic: repeated calls on the same input
//!   are bit-identical, and SVD signs follow a fixed convention,
//! * tolerances scale with the magnitude of the input, since problem scales
//!   vary with dataset normalization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Dense real matrix, `f64` entries.
pub type Matrix = DMatrix<f64>;
/// Dense real column vector.
pub type Vector = DVector<f64>;

/// Eigenvalues this far below zero (times scale) fail the SPD check; small
/// negatives above it are treated as round-off.
const SPD_NEG_TOL: f64 = 1e-10;
/// Floor applied to eigenvalues before sqrt/inversion; absorbs round-off
/// only, positive definiteness itself is the caller's guarantee.
const EIG_FLOOR: f64 = 1e-12;

/// Full singular value decomposition `P = U * diag(sigma) * V^T`.
///
/// `u` is square `p x p`, `v` is square `q x q`, and `singular_values` holds
/// the `min(p, q)` values sorted in non-increasing order. Signs are
/// normalized: in each column of `u` the entry of largest magnitude (lowest
/// index on ties) is non-negative, with the paired column of `v` flipped in
/// tandem so the product is unchanged.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl SvdResult {
    /// Rebuild `U * diag(sigma) * V^T` (mostly for checks).
    pub fn reconstruct(&self) -> Matrix {
        let p = self.u.nrows();
        let q = self.v.nrows();
        let mut sigma = Matrix::zeros(p, q);
        for (i, s) in self.singular_values.iter().enumerate() {
            sigma[(i, i)] = *s;
        }
        &self.u * sigma * self.v.transpose()
    }
}

/// Largest absolute entry, used as the scale for relative tolerances.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Fail with [`Error::NonFinite`] if any entry is NaN or infinite.
pub fn ensure_finite(m: &Matrix, context: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context.to_string()))
    }
}

/// Checked construction from row-major data: shape at least 1x1, all
/// entries finite.
pub fn matrix_from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidInput(format!(
            "matrix must be at least 1x1, got {rows}x{cols}"
        )));
    }
    if data.len() != rows * cols {
        return Err(Error::ShapeMismatch(format!(
            "expected {} entries for a {rows}x{cols} matrix, got {}",
            rows * cols,
            data.len()
        )));
    }
    let m = Matrix::from_row_slice(rows, cols, data);
    ensure_finite(&m, "matrix construction")?;
    Ok(m)
}

/// Full SVD with deterministic sign normalization.
pub fn svd(p: &Matrix) -> Result<SvdResult> {
    ensure_finite(p, "svd input")?;
    let (rows, cols) = p.shape();
    let k = rows.min(cols);

    let thin = p
        .clone()
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or(Error::SvdFailed)?;
    let u_thin = thin.u.expect("u requested");
    let v_thin = thin.v_t.expect("v_t requested").transpose();
    let mut triples: Vec<(f64, usize)> = thin
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    // nalgebra already orders these; the explicit stable sort pins the
    // contract regardless.
    triples.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let mut u = Matrix::zeros(rows, k);
    let mut v = Matrix::zeros(cols, k);
    let mut singular_values = Vec::with_capacity(k);
    for (j, (s, old)) in triples.iter().enumerate() {
        singular_values.push(*s);
        u.set_column(j, &u_thin.column(*old));
        v.set_column(j, &v_thin.column(*old));
    }

    let u = complete_orthonormal_basis(u);
    let v = complete_orthonormal_basis(v);
    let (u, v) = normalize_signs(u, v, k);

    Ok(SvdResult {
        u,
        singular_values,
        v,
    })
}

/// Extend orthonormal columns to a full square orthonormal basis by
/// Gram-Schmidt against the identity vectors in index order. Deterministic.
fn complete_orthonormal_basis(partial: Matrix) -> Matrix {
    let n = partial.nrows();
    let k = partial.ncols();
    if k == n {
        return partial;
    }
    let mut full = Matrix::zeros(n, n);
    full.view_mut((0, 0), (n, k)).copy_from(&partial);
    let mut have = k;
    for idx in 0..n {
        if have == n {
            break;
        }
        let mut cand = Vector::zeros(n);
        cand[idx] = 1.0;
        // Two orthogonalization passes keep the completion orthonormal to
        // round-off even when the candidate is nearly in the span.
        for _ in 0..2 {
            for j in 0..have {
                let col = full.column(j);
                let proj = col.dot(&cand);
                cand -= proj * Vector::from_column_slice(col.as_slice());
            }
        }
        let norm = cand.norm();
        if norm > 1e-8 {
            full.set_column(have, &(cand / norm));
            have += 1;
        }
    }
    debug_assert_eq!(have, n, "orthonormal completion ran out of candidates");
    full
}

/// Sign convention: in each column of `u` the entry of largest magnitude
/// (lowest index wins ties) is made non-negative; the paired `v` column
/// flips with it. Unpaired `v` columns get the same rule directly.
fn normalize_signs(mut u: Matrix, mut v: Matrix, paired: usize) -> (Matrix, Matrix) {
    for j in 0..u.ncols() {
        if dominant_entry(&u.column(j).into_owned()) < 0.0 {
            u.column_mut(j).neg_mut();
            if j < paired {
                v.column_mut(j).neg_mut();
            }
        }
    }
    for j in paired..v.ncols() {
        if dominant_entry(&v.column(j).into_owned()) < 0.0 {
            v.column_mut(j).neg_mut();
        }
    }
    (u, v)
}

fn dominant_entry(col: &Vector) -> f64 {
    let mut best = 0usize;
    for i in 1..col.len() {
        if col[i].abs() > col[best].abs() {
            best = i;
        }
    }
    col[best]
}

/// Symmetric eigendecomposition with the shared SPD checks: symmetry within
/// `1e-10 * scale`, eigenvalues no lower than `-1e-10 * scale`.
fn spd_eigen(a: &Matrix, context: &str) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    ensure_finite(a, context)?;
    if a.nrows() != a.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "{context}: expected square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = max_abs(a).max(1.0);
    let asym = (a - a.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(Error::InvalidInput(format!(
            "{context}: matrix is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    // Symmetrize so round-off asymmetry cannot leak into the eigensolver.
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min_eig = eig.eigenvalues.min();
    if min_eig < -SPD_NEG_TOL * scale {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min_eig,
        });
    }
    Ok(eig)
}

/// Symmetric positive-definite square root via eigendecomposition.
pub fn spd_sqrt(a: &Matrix) -> Result<Matrix> {
    let eig = spd_eigen(a, "spd_sqrt")?;
    Ok(rebuild_symmetric(&eig, f64::sqrt))
}

/// Symmetric positive-definite inverse via eigendecomposition.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    let eig = spd_eigen(a, "spd_inverse")?;
    Ok(rebuild_symmetric(&eig, |x| 1.0 / x))
}

fn rebuild_symmetric(
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    f: impl Fn(f64) -> f64,
) -> Matrix {
    let q = &eig.eigenvectors;
    let mapped = Vector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| f(l.max(EIG_FLOOR))),
    );
    let m = q * Matrix::from_diagonal(&mapped) * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// Centering matrix `C = I_n - (1/n) 1 1^T`; right-multiplying removes
/// column means.
pub fn centering_matrix(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - 1.0 / n as f64
    })
}

/// Weighted centering matrix `C_w = I_n - (1 / sum(alpha)) * alpha * 1^T`
/// for `D = diag(alpha)`; satisfies `C_w * alpha = 0`, so right-multiplying
/// a data matrix removes its alpha-weighted column mean.
pub fn weighted_centering(alpha: &Vector) -> Result<Matrix> {
    ensure_finite(&Matrix::from_column_slice(alpha.len(), 1, alpha.as_slice()), "weights")?;
    if alpha.iter().any(|&a| a < 0.0) {
        return Err(Error::InvalidWeights("negative weight".to_string()));
    }
    let total: f64 = alpha.sum();
    if total <= 0.0 {
        return Err(Error::InvalidWeights(format!(
            "weights must have positive mass, sum = {total}"
        )));
    }
    let n = alpha.len();
    Ok(Matrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - alpha[i] / total
    }))
}

/// `M * centering_matrix(n)` without materializing the `n x n` matrix.
pub fn center_columns(m: &Matrix) -> Matrix {
    let n = m.ncols() as f64;
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let mean = row.sum() / n;
        row.add_scalar_mut(-mean);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_spd(dim: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let b = random_matrix(dim, dim, rng);
        &b * b.transpose() + Matrix::identity(dim, dim) * 0.5
    }

    #[test]
    fn svd_identity() {
        let r = svd(&Matrix::identity(2, 2)).unwrap();
        assert_eq!(r.singular_values, vec![1.0, 1.0]);
        assert_abs_diff_eq!(r.u, Matrix::identity(2, 2), epsilon = 1e-12);
        assert_abs_diff_eq!(r.v, Matrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn svd_diagonal() {
        let r = svd(&Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 2.0]))).unwrap();
        assert_abs_diff_eq!(r.singular_values[0], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.singular_values[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.u, Matrix::identity(2, 2), epsilon = 1e-12);
        assert_abs_diff_eq!(r.v, Matrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn svd_reconstructs_rectangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = random_matrix(5, 3, &mut rng);
        let r = svd(&p).unwrap();
        assert_eq!(r.u.shape(), (5, 5));
        assert_eq!(r.v.shape(), (3, 3));
        let tol = 1e-10 * max_abs(&p).max(1.0);
        assert!(max_abs(&(&r.reconstruct() - &p)) <= tol);
        // orthonormality of the completed bases
        assert!(max_abs(&(r.u.transpose() * &r.u - Matrix::identity(5, 5))) <= 1e-10 * 5.0);
        assert!(max_abs(&(r.v.transpose() * &r.v - Matrix::identity(3, 3))) <= 1e-10 * 3.0);
        // descending order
        assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn svd_sign_convention_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_matrix(4, 6, &mut rng);
        let a = svd(&p).unwrap();
        let b = svd(&p).unwrap();
        assert_eq!(a.u, b.u);
        assert_eq!(a.v, b.v);
        assert_eq!(a.singular_values, b.singular_values);
        for j in 0..a.u.ncols() {
            assert!(dominant_entry(&a.u.column(j).into_owned()) >= 0.0);
        }
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut p = Matrix::identity(2, 2);
        p[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&p), Err(Error::NonFinite(_))));
    }

    #[test]
    fn spd_sqrt_diagonal_and_identity() {
        let s = spd_sqrt(&Matrix::from_diagonal(&Vector::from_vec(vec![4.0, 9.0]))).unwrap();
        assert_abs_diff_eq!(s, Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 3.0])), epsilon = 1e-12);
        let i = spd_sqrt(&Matrix::identity(3, 3)).unwrap();
        assert_abs_diff_eq!(i, Matrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn spd_sqrt_multiply_back() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let s = spd_sqrt(&a).unwrap();
        assert!(max_abs(&(&s * &s - &a)) <= 1e-9 * max_abs(&a));
    }

    #[test]
    fn spd_inverse_diagonal() {
        let inv = spd_inverse(&Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 5.0]))).unwrap();
        assert_abs_diff_eq!(
            inv,
            Matrix::from_diagonal(&Vector::from_vec(vec![0.5, 0.2])),
            epsilon = 1e-12
        );
        let i = spd_inverse(&Matrix::identity(4, 4)).unwrap();
        assert_abs_diff_eq!(i, Matrix::identity(4, 4), epsilon = 1e-12);
    }

    #[test]
    fn spd_random_multiply_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let dim = rng.random_range(2..=20);
            let a = random_spd(dim, &mut rng);
            let scale = max_abs(&a).max(1.0);
            let s = spd_sqrt(&a).unwrap();
            assert!(max_abs(&(&s * &s - &a)) <= 1e-9 * scale);
            let inv = spd_inverse(&a).unwrap();
            let eye = Matrix::identity(dim, dim);
            assert!(max_abs(&(&a * &inv - &eye)) <= 1e-8 * scale);
            assert!(max_abs(&(&inv - inv.transpose())) <= 1e-12 * scale);
        }
    }

    #[test]
    fn spd_rejects_indefinite() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, -1.0]));
        assert!(matches!(
            spd_sqrt(&a),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn spd_rejects_asymmetric() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(spd_sqrt(&a), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn centering_matrix_small_cases() {
        assert_abs_diff_eq!(centering_matrix(1), Matrix::zeros(1, 1), epsilon = 0.0);
        assert_abs_diff_eq!(
            centering_matrix(2),
            Matrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]),
            epsilon = 1e-15
        );
        let c3 = centering_matrix(3);
        for i in 0..3 {
            assert_abs_diff_eq!(c3.row(i).sum(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn centering_matrix_idempotent_symmetric() {
        for n in [1usize, 2, 5, 9] {
            let c = centering_matrix(n);
            assert!(max_abs(&(&c * &c - &c)) <= 1e-12);
            assert!(max_abs(&(&c - c.transpose())) <= 1e-15);
        }
    }

    #[test]
    fn weighted_centering_uniform_matches_plain() {
        let alpha = Vector::from_element(4, 0.25);
        let cw = weighted_centering(&alpha).unwrap();
        assert_eq!(cw, centering_matrix(4));
    }

    #[test]
    fn weighted_centering_kills_weighted_mean() {
        // C_w alpha = 0: the weighted mean of the columns is removed.
        let alpha = Vector::from_vec(vec![1.0, 0.0]);
        let cw = weighted_centering(&alpha).unwrap();
        assert_abs_diff_eq!(
            cw,
            Matrix::from_row_slice(2, 2, &[0.0, -1.0, 0.0, 1.0]),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!((&cw * alpha).amax(), 0.0, epsilon = 1e-15);

        let alpha = Vector::from_vec(vec![0.2, 0.5, 0.3, 0.0]);
        let cw = weighted_centering(&alpha).unwrap();
        assert!((cw * alpha).amax() <= 1e-12);
    }

    #[test]
    fn weighted_centering_single_sample() {
        let cw = weighted_centering(&Vector::from_vec(vec![1.0])).unwrap();
        assert_abs_diff_eq!(cw, Matrix::zeros(1, 1), epsilon = 0.0);
    }

    #[test]
    fn weighted_centering_rejects_bad_weights() {
        assert!(weighted_centering(&Vector::from_vec(vec![0.0, 0.0])).is_err());
        assert!(weighted_centering(&Vector::from_vec(vec![1.0, -0.5])).is_err());
    }

    #[test]
    fn center_columns_matches_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_matrix(4, 7, &mut rng);
        let via_product = &m * centering_matrix(7);
        assert!(max_abs(&(center_columns(&m) - via_product)) <= 1e-12);
    }

    #[test]
    fn checked_constructor_validates() {
        assert!(matrix_from_row_major(0, 3, &[]).is_err());
        assert!(matrix_from_row_major(2, 2, &[1.0, 2.0, 3.0]).is_err());
        assert!(matrix_from_row_major(1, 2, &[1.0, f64::INFINITY]).is_err());
        let m = matrix_from_row_major(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m[(1, 0)], 3.0);
    }
}
