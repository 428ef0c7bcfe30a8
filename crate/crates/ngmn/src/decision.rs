//! The decision head: a multi-class squared-hinge SVM with per-sample
//! adaptive weights, solved in closed form under a flexible Stiefel manifold
//! constraint on the weight matrix.
//!
//! One fitting pass alternates three exact block updates:
//! * `alpha` from the per-sample losses (sorted closed form, equivalently a
//!   simplex projection of `-f / 2 gamma`),
//! * `(W, b)` by a matrix square root plus an orthogonal Procrustes step, so
//!   that `W^T (X Cw D Cw^T X^T + lambda I) W = I_c` holds exactly,
//! * the slack matrix `M` elementwise from the margin violations.
//!
//! Labels are carried as +/-1 with exactly one positive entry per column;
//! the slack update's derivation needs `y .* y = 1`, which one-hot 0/1
//! labels would break.

use crate::error::{Error, Result};
use crate::matrix::{self, Matrix, Vector};
use crate::oracle::simplex_projection;
use crate::ridge::argmax_columns;

/// `c x n` label matrix with entries in {-1, +1} and exactly one +1 per
/// column. The single-row case is the plain binary encoding, where the sign
/// alone carries the class.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmLabels {
    ypm: Matrix,
}

impl SvmLabels {
    /// Validate a +/-1 matrix with one positive entry per column (any sign
    /// pattern when there is a single row).
    pub fn from_pm_matrix(ypm: Matrix) -> Result<Self> {
        let binary = ypm.nrows() == 1;
        for (j, col) in ypm.column_iter().enumerate() {
            let mut positives = 0usize;
            for &v in col.iter() {
                if v == 1.0 {
                    positives += 1;
                } else if v != -1.0 {
                    return Err(Error::InvalidInput(format!(
                        "label column {j} has entry {v}, expected +1 or -1"
                    )));
                }
            }
            if !binary && positives != 1 {
                return Err(Error::InvalidInput(format!(
                    "label column {j} has {positives} positive entries, expected exactly 1"
                )));
            }
        }
        Ok(Self { ypm })
    }

    /// Build from class indices: `Y_pm = 2 * one_hot - 1`.
    pub fn from_labels(labels: &[usize], classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::InvalidInput(
                "class count must be positive".to_string(),
            ));
        }
        let mut ypm = Matrix::from_element(classes, labels.len(), -1.0);
        for (j, &l) in labels.iter().enumerate() {
            if l >= classes {
                return Err(Error::InvalidInput(format!(
                    "label {l} out of range for {classes} classes"
                )));
            }
            ypm[(l, j)] = 1.0;
        }
        Ok(Self { ypm })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.ypm
    }

    pub fn classes(&self) -> usize {
        self.ypm.nrows()
    }

    pub fn samples(&self) -> usize {
        self.ypm.ncols()
    }
}

/// How the per-sample weights are produced each pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    /// Fixed `alpha = 1/n`; the plain weighted SVM without adaptivity.
    Uniform,
    /// Closed-form weights with the self-tuned trade-off: gamma is chosen so
    /// that exactly the worst sample drops out.
    SelfTuned,
    /// Simplex projection of `-f / (2 gamma)` for a fixed gamma > 0.
    FixedGamma(f64),
}

impl AlphaMode {
    pub fn validate(&self) -> Result<()> {
        if let AlphaMode::FixedGamma(g) = self {
            if !(*g > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "fixed gamma must be positive, got {g}"
                )));
            }
        }
        Ok(())
    }
}

/// Fitted decision-layer state.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionState {
    /// `d_in x c`.
    pub w: Matrix,
    /// Length `c`.
    pub b: Vector,
    /// Per-sample weights on the probability simplex (length = training n).
    pub alpha: Vector,
    /// Non-negative slack, `c x n`.
    pub m: Matrix,
    pub lambda: f64,
    pub alpha_mode: AlphaMode,
    /// Trade-off used by the last alpha update (0 for uniform mode).
    pub gamma: f64,
}

/// Per-sample squared losses `f_i = ||W^T x_i + b - y_i - y_i .* m_i||^2`.
pub fn sample_losses(state: &DecisionState, x: &Matrix, labels: &SvmLabels) -> Result<Vector> {
    losses_for(&state.w, &state.b, &state.m, x, labels)
}

fn losses_for(
    w: &Matrix,
    b: &Vector,
    m: &Matrix,
    x: &Matrix,
    labels: &SvmLabels,
) -> Result<Vector> {
    let ypm = labels.matrix();
    if x.ncols() != ypm.ncols() || m.shape() != ypm.shape() || x.nrows() != w.nrows() {
        return Err(Error::ShapeMismatch(
            "sample_losses: inconsistent shapes".to_string(),
        ));
    }
    let scores = scores_for(w, b, x);
    let residual = scores - ypm - ypm.component_mul(m);
    Ok(Vector::from_iterator(
        residual.ncols(),
        residual.column_iter().map(|col| col.norm_squared()),
    ))
}

fn scores_for(w: &Matrix, b: &Vector, x: &Matrix) -> Matrix {
    let mut scores = w.transpose() * x;
    for mut col in scores.column_iter_mut() {
        col += b;
    }
    scores
}

/// Closed-form adaptive weights.
///
/// With losses sorted ascending, the self-tuned trade-off is
/// `gamma = (n-1)/2 * f_(n) - 1/2 * sum_{i<n} f_(i)`, which makes
/// `alpha_i = (f_(n) - f_i)_+ / (2 gamma)` the exact minimizer: weights sum
/// to one, are non-negative, and the worst sample gets zero. Equal losses
/// give `gamma ~ 0`, where the weights fall back to uniform.
pub fn update_alpha(f: &Vector) -> Result<(Vector, f64)> {
    let n = f.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "adaptive weights need at least 2 samples, got {n}"
        )));
    }
    if f.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidInput(
            "losses must be finite and non-negative".to_string(),
        ));
    }
    let mut sorted: Vec<f64> = f.iter().copied().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let f_max = sorted[n - 1];
    let partial: f64 = sorted[..n - 1].iter().sum();
    let gamma = 0.5 * (n - 1) as f64 * f_max - 0.5 * partial;
    if gamma <= 1e-12 {
        return Ok((Vector::from_element(n, 1.0 / n as f64), gamma));
    }
    let alpha = Vector::from_iterator(n, f.iter().map(|&fi| (f_max - fi).max(0.0) / (2.0 * gamma)));
    Ok((alpha, gamma))
}

/// Closed-form `(W, b)` under the manifold constraint
/// `W^T (X D_hat X^T + lambda I) W = I_c` with `D_hat = Cw D Cw^T`.
///
/// `S = (X D_hat X^T + lambda I)^(1/2)` reduces the weighted regression to
/// an orthogonal Procrustes problem, solved by the SVD of
/// `S^-1 X D_hat G^T`; the weighted products are formed through the rank-one
/// expansion of `Cw` rather than the `n x n` centering matrix itself.
pub fn update_weights_bias(
    x: &Matrix,
    g: &Matrix,
    alpha: &Vector,
    lambda: f64,
) -> Result<(Matrix, Vector)> {
    let d = x.nrows();
    let c = g.nrows();
    let n = x.ncols();
    if g.ncols() != n || alpha.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "update_weights_bias: {} samples in X, {} in G, {} weights",
            n,
            g.ncols(),
            alpha.len()
        )));
    }
    if d < c {
        return Err(Error::ManifoldInfeasible { d, c });
    }
    if lambda <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if alpha.iter().any(|&a| a < 0.0) {
        return Err(Error::InvalidWeights("negative weight".to_string()));
    }
    let total = alpha.sum();
    if total <= 0.0 {
        return Err(Error::InvalidWeights(
            "weights must have positive mass".to_string(),
        ));
    }

    // X D and the weighted sums X D 1, G D 1
    let mut x_weighted = x.clone();
    for (j, mut col) in x_weighted.column_iter_mut().enumerate() {
        col *= alpha[j];
    }
    let x_alpha = x * alpha;
    let g_alpha = g * alpha;

    // X D_hat X^T = X D X^T - (X D 1)(X D 1)^T / (1^T D 1), same for G
    let xdx_hat = &x_weighted * x.transpose() - &x_alpha * x_alpha.transpose() / total;
    let xdg_hat = &x_weighted * g.transpose() - &x_alpha * g_alpha.transpose() / total;

    let a = xdx_hat + Matrix::identity(d, d) * lambda;
    let s = matrix::spd_sqrt(&a)?;
    let s_inv = matrix::spd_inverse(&s)?;

    let svd = matrix::svd(&(&s_inv * xdg_hat))?;
    let u_c = svd.u.columns(0, c).into_owned();
    let w = &s_inv * u_c * svd.v.transpose();
    let b = (g_alpha - w.transpose() * x_alpha) / total;
    Ok((w, b))
}

/// Elementwise slack update `m_i = (y_i .* (W^T x_i + b) - 1)_+`, the exact
/// minimizer of each per-sample subproblem over `M >= 0`.
pub fn update_slack(w: &Matrix, b: &Vector, x: &Matrix, labels: &SvmLabels) -> Result<Matrix> {
    let ypm = labels.matrix();
    if x.ncols() != ypm.ncols() || w.ncols() != ypm.nrows() || w.nrows() != x.nrows() {
        return Err(Error::ShapeMismatch(
            "update_slack: inconsistent shapes".to_string(),
        ));
    }
    let scores = scores_for(w, b, x);
    Ok(ypm.component_mul(&scores).map(|v| (v - 1.0).max(0.0)))
}

/// Weighted squared-hinge objective with regularizers; the quantity the
/// alternating updates minimize block by block.
#[allow(clippy::too_many_arguments)]
pub fn weighted_objective(
    w: &Matrix,
    b: &Vector,
    m: &Matrix,
    alpha: &Vector,
    gamma: f64,
    x: &Matrix,
    labels: &SvmLabels,
    lambda: f64,
) -> Result<f64> {
    let f = losses_for(w, b, m, x, labels)?;
    Ok(f.dot(alpha) + lambda * w.norm_squared() + gamma * alpha.norm_squared())
}

/// Fit the decision layer by alternating exact block updates.
///
/// Starts from `M = 0`, uniform weights, and the constrained regression on
/// the raw labels; each pass then updates `alpha` from the current losses,
/// `(W, b)` against the slack-adjusted targets `G = Y + Y .* M`, and `M`
/// from the new scores.
pub fn fit_decision_layer(
    x: &Matrix,
    labels: &SvmLabels,
    lambda: f64,
    alpha_mode: AlphaMode,
    inner_iters: usize,
) -> Result<DecisionState> {
    if inner_iters == 0 {
        return Err(Error::InvalidConfig(
            "inner_iters must be at least 1".to_string(),
        ));
    }
    alpha_mode.validate()?;
    let n = x.ncols();
    if labels.samples() != n {
        return Err(Error::ShapeMismatch(format!(
            "fit_decision_layer: {} samples in X, {} labels",
            n,
            labels.samples()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput(
            "decision layer needs at least 2 samples".to_string(),
        ));
    }
    let ypm = labels.matrix();
    let uniform = Vector::from_element(n, 1.0 / n as f64);

    let mut m = Matrix::zeros(labels.classes(), n);
    let mut alpha = uniform.clone();
    let mut gamma = 0.0;
    let (mut w, mut b) = update_weights_bias(x, ypm, &alpha, lambda)?;

    for _ in 0..inner_iters {
        let f = losses_for(&w, &b, &m, x, labels)?;
        (alpha, gamma) = match alpha_mode {
            AlphaMode::Uniform => (uniform.clone(), 0.0),
            AlphaMode::SelfTuned => update_alpha(&f)?,
            AlphaMode::FixedGamma(g) => (simplex_projection(&(-&f / (2.0 * g))), g),
        };
        let g_target = ypm + ypm.component_mul(&m);
        (w, b) = update_weights_bias(x, &g_target, &alpha, lambda)?;
        m = update_slack(&w, &b, x, labels)?;
    }

    Ok(DecisionState {
        w,
        b,
        alpha,
        m,
        lambda,
        alpha_mode,
        gamma,
    })
}

/// Raw class scores `W^T x_j + b` per column.
pub fn decision_scores(state: &DecisionState, x: &Matrix) -> Result<Matrix> {
    if x.nrows() != state.w.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "decision_scores: head expects {} feature rows, got {}",
            state.w.nrows(),
            x.nrows()
        )));
    }
    Ok(scores_for(&state.w, &state.b, x))
}

/// Predicted class per sample: argmax score, lowest index on ties.
pub fn decision_predict(state: &DecisionState, x: &Matrix) -> Result<Vec<usize>> {
    Ok(argmax_columns(&decision_scores(state, x)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_simplex(n: usize, rng: &mut ChaCha8Rng) -> Vector {
        let raw = Vector::from_fn(n, |_, _| rng.random_range(0.01..1.0));
        let total = raw.sum();
        raw / total
    }

    fn dummy_state(w: Matrix, b: Vector, m: Matrix) -> DecisionState {
        DecisionState {
            alpha: Vector::from_element(m.ncols().max(1), 1.0 / m.ncols().max(1) as f64),
            w,
            b,
            m,
            lambda: 1.0,
            alpha_mode: AlphaMode::SelfTuned,
            gamma: 0.0,
        }
    }

    #[test]
    fn labels_validation() {
        let good = Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!(SvmLabels::from_pm_matrix(good).is_ok());
        let two_pos = Matrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!(SvmLabels::from_pm_matrix(two_pos).is_err());
        let bad_entry = Matrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert!(SvmLabels::from_pm_matrix(bad_entry).is_err());

        let from_idx = SvmLabels::from_labels(&[0, 1, 0], 2).unwrap();
        assert_eq!(
            from_idx.matrix(),
            &Matrix::from_row_slice(2, 3, &[1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
        );
        assert!(SvmLabels::from_labels(&[2], 2).is_err());
    }

    #[test]
    fn losses_known_cases() {
        // c = 1: score 2 against target 1 gives (2 - 1)^2 = 1
        let labels1 = SvmLabels::from_pm_matrix(Matrix::from_element(1, 1, 1.0)).unwrap();
        let state1 = dummy_state(
            Matrix::from_element(1, 1, 2.0),
            Vector::zeros(1),
            Matrix::zeros(1, 1),
        );
        let f = sample_losses(&state1, &Matrix::from_element(1, 1, 1.0), &labels1).unwrap();
        assert_abs_diff_eq!(f[0], 1.0, epsilon = 1e-15);

        // c = 2, zero scores vs y = [1, -1]: residual [-1, 1], f = 2
        let labels = SvmLabels::from_labels(&[0], 2).unwrap();
        let state = dummy_state(Matrix::zeros(1, 2), Vector::zeros(2), Matrix::zeros(2, 1));
        let f = sample_losses(&state, &Matrix::zeros(1, 1), &labels).unwrap();
        assert_abs_diff_eq!(f[0], 2.0, epsilon = 1e-15);

        // support-vector case: scores equal the slack-adjusted target
        let m = Matrix::from_row_slice(2, 1, &[0.5, 0.0]);
        let ypm = labels.matrix();
        let target = ypm.column(0) + ypm.column(0).component_mul(&m.column(0));
        let state_sv = dummy_state(
            Matrix::zeros(1, 2),
            Vector::from_column_slice(target.as_slice()),
            m,
        );
        let f = sample_losses(&state_sv, &Matrix::zeros(1, 1), &labels).unwrap();
        assert_abs_diff_eq!(f[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn alpha_known_cases() {
        let (alpha, gamma) = update_alpha(&Vector::from_vec(vec![1.0, 2.0, 3.0])).unwrap();
        assert_abs_diff_eq!(gamma, 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(alpha[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(alpha[1], 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(alpha[2], 0.0, epsilon = 1e-15);

        let (alpha, _) = update_alpha(&Vector::from_vec(vec![5.0, 5.0, 5.0])).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(alpha[i], 1.0 / 3.0, epsilon = 1e-15);
        }

        let (alpha, gamma) = update_alpha(&Vector::from_vec(vec![0.0, 0.0, 1.0])).unwrap();
        assert_abs_diff_eq!(gamma, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(alpha[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(alpha[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(alpha[2], 0.0, epsilon = 1e-15);

        assert!(update_alpha(&Vector::from_vec(vec![1.0])).is_err());
        assert!(update_alpha(&Vector::from_vec(vec![1.0, f64::NAN])).is_err());
    }

    #[test]
    fn alpha_matches_simplex_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let n = rng.random_range(2..30);
            let f = Vector::from_fn(n, |_, _| rng.random_range(0.0..5.0));
            let (alpha, gamma) = update_alpha(&f).unwrap();
            if gamma <= 1e-6 {
                continue;
            }
            let projected = oracle::simplex_projection(&(-&f / (2.0 * gamma)));
            assert!((&alpha - &projected).amax() <= 1e-10);
            assert!((alpha.sum() - 1.0).abs() <= 1e-10);
            assert!(alpha.iter().all(|&a| a >= 0.0));
            // zero weight on the worst sample
            let worst = f.imax();
            assert_abs_diff_eq!(alpha[worst], 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn weights_bias_hand_instance() {
        let x = Matrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let g = Matrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let alpha = Vector::from_element(2, 0.5);
        let (w, b) = update_weights_bias(&x, &g, &alpha, 1.0).unwrap();
        assert_abs_diff_eq!(w[(0, 0)], 1.0 / 2.0f64.sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(b[0], 0.0, epsilon = 1e-12);

        // scores are x / sqrt(2)
        let state = dummy_state(w, b, Matrix::zeros(1, 2));
        let scores = decision_scores(&state, &x).unwrap();
        assert_abs_diff_eq!(scores[(0, 0)], 1.0 / 2.0f64.sqrt(), epsilon = 1e-10);
        assert_abs_diff_eq!(scores[(0, 1)], -1.0 / 2.0f64.sqrt(), epsilon = 1e-10);
    }

    fn constraint_gap(w: &Matrix, x: &Matrix, alpha: &Vector, lambda: f64) -> f64 {
        let d = x.nrows();
        let total = alpha.sum();
        let mut xw = x.clone();
        for (j, mut col) in xw.column_iter_mut().enumerate() {
            col *= alpha[j];
        }
        let xa = x * alpha;
        let a =
            &xw * x.transpose() - &xa * xa.transpose() / total + Matrix::identity(d, d) * lambda;
        let gram = w.transpose() * a * w;
        matrix::max_abs(&(gram - Matrix::identity(w.ncols(), w.ncols())))
    }

    #[test]
    fn weights_bias_degenerate_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let x = Matrix::from_fn(3, 10, |_, _| rng.random_range(-1.0..1.0));
        let g = Matrix::zeros(2, 10);
        let alpha = random_simplex(10, &mut rng);
        let (w, b) = update_weights_bias(&x, &g, &alpha, 0.7).unwrap();
        assert!(constraint_gap(&w, &x, &alpha, 0.7) <= 1e-6);
        let expect_b = -(w.transpose() * (&x * &alpha)) / alpha.sum();
        assert!((b - expect_b).amax() <= 1e-12);
    }

    #[test]
    fn weights_bias_matches_explicit_centering_route() {
        // same values through the n x n weighted-centering products
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..10 {
            let d = rng.random_range(2..6);
            let c = rng.random_range(1..=d.min(3));
            let n = rng.random_range(3..12);
            let x = Matrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0));
            let g = Matrix::from_fn(c, n, |_, _| rng.random_range(-1.0..1.0));
            let alpha = random_simplex(n, &mut rng);
            let lambda = rng.random_range(0.1..2.0);

            let (w, b) = update_weights_bias(&x, &g, &alpha, lambda).unwrap();

            let cw = matrix::weighted_centering(&alpha).unwrap();
            let d_mat = Matrix::from_diagonal(&alpha);
            let d_hat = &cw * &d_mat * cw.transpose();
            let a = &x * &d_hat * x.transpose() + Matrix::identity(d, d) * lambda;
            let s = matrix::spd_sqrt(&a).unwrap();
            let s_inv = matrix::spd_inverse(&s).unwrap();
            let svd = matrix::svd(&(&s_inv * &x * &d_hat * g.transpose())).unwrap();
            let w_explicit = &s_inv * svd.u.columns(0, c).into_owned() * svd.v.transpose();
            let ones = Vector::from_element(n, 1.0);
            let b_explicit = (&g * &d_mat * &ones - w_explicit.transpose() * &x * &d_mat * &ones)
                / (ones.transpose() * &d_mat * &ones)[0];

            assert!((&w - &w_explicit).amax() <= 1e-9);
            assert!((&b - &b_explicit).amax() <= 1e-9);
        }
    }

    #[test]
    fn weights_bias_dominates_random_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let d = 6;
        let c = 3;
        let n = 25;
        let x = Matrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0));
        let g = Matrix::from_fn(c, n, |_, _| rng.random_range(-1.0..1.0));
        let alpha = random_simplex(n, &mut rng);
        let lambda = 0.5;
        let (w, _) = update_weights_bias(&x, &g, &alpha, lambda).unwrap();

        // the trace objective and feasible set, rebuilt explicitly
        let total = alpha.sum();
        let mut xw = x.clone();
        for (j, mut col) in xw.column_iter_mut().enumerate() {
            col *= alpha[j];
        }
        let xa = &x * &alpha;
        let ga = &g * &alpha;
        let xdg_hat = &xw * g.transpose() - &xa * ga.transpose() / total;
        let a =
            &xw * x.transpose() - &xa * xa.transpose() / total + Matrix::identity(d, d) * lambda;
        let s = matrix::spd_sqrt(&a).unwrap();

        let ours = (w.transpose() * &xdg_hat).trace();
        for cand in oracle::random_feasible_manifold_points(&s, c, 1000, 99).unwrap() {
            let theirs = (cand.transpose() * &xdg_hat).trace();
            assert!(
                ours >= theirs - 1e-9,
                "random feasible point beat the closed form: {theirs} > {ours}"
            );
        }
        assert!(constraint_gap(&w, &x, &alpha, lambda) <= 1e-6);
    }

    #[test]
    fn weights_bias_rejects_infeasible_dims() {
        let x = Matrix::zeros(2, 5);
        let g = Matrix::zeros(3, 5);
        let alpha = Vector::from_element(5, 0.2);
        assert!(matches!(
            update_weights_bias(&x, &g, &alpha, 1.0),
            Err(Error::ManifoldInfeasible { d: 2, c: 3 })
        ));
    }

    #[test]
    fn slack_known_cases() {
        let labels = SvmLabels::from_labels(&[0], 2).unwrap();
        // inside the margin: no slack
        let w = Matrix::from_row_slice(1, 2, &[0.5, -0.2]);
        let b = Vector::zeros(2);
        let x = Matrix::from_element(1, 1, 1.0);
        let m = update_slack(&w, &b, &x, &labels).unwrap();
        assert_eq!(m, Matrix::zeros(2, 1));

        // scores [2, -3] vs y [1, -1]: slack [1, 2]
        let w = Matrix::from_row_slice(1, 2, &[2.0, -3.0]);
        let m = update_slack(&w, &b, &x, &labels).unwrap();
        assert_abs_diff_eq!(m[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(1, 0)], 2.0, epsilon = 1e-15);

        // zero scores: everything strictly inside
        let m = update_slack(&Matrix::zeros(1, 2), &b, &x, &labels).unwrap();
        assert_eq!(m, Matrix::zeros(2, 1));
    }

    #[test]
    fn slack_satisfies_kkt() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let d = rng.random_range(1..5);
            let c = rng.random_range(1..4);
            let n = rng.random_range(1..10);
            let labels_idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
            let labels = SvmLabels::from_labels(&labels_idx, c).unwrap();
            let w = Matrix::from_fn(d, c, |_, _| rng.random_range(-2.0..2.0));
            let b = Vector::from_fn(c, |_, _| rng.random_range(-1.0..1.0));
            let x = Matrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0));
            let m = update_slack(&w, &b, &x, &labels).unwrap();

            let margins = labels
                .matrix()
                .component_mul(&scores_for(&w, &b, &x))
                .map(|v| v - 1.0);
            for i in 0..c {
                for j in 0..n {
                    let mij = m[(i, j)];
                    assert!(mij >= 0.0);
                    assert!(mij >= margins[(i, j)] - 1e-15);
                    // complementary slackness
                    assert!(((mij - margins[(i, j)]) * mij).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn fit_separable_one_dimensional() {
        // binary single-row encoding; the sign of W^T x + b separates
        let x = Matrix::from_row_slice(1, 4, &[-1.0, -1.1, 1.0, 1.1]);
        let labels =
            SvmLabels::from_pm_matrix(Matrix::from_row_slice(1, 4, &[-1.0, -1.0, 1.0, 1.0]))
                .unwrap();
        let state = fit_decision_layer(&x, &labels, 0.5, AlphaMode::SelfTuned, 3).unwrap();
        let scores = decision_scores(&state, &x).unwrap();
        for j in 0..4 {
            assert_eq!(
                scores[(0, j)] > 0.0,
                labels.matrix()[(0, j)] > 0.0,
                "sample {j} misclassified (score {})",
                scores[(0, j)]
            );
        }
    }

    #[test]
    fn fit_single_pass_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let x = Matrix::from_fn(3, 12, |_, _| rng.random_range(-1.0..1.0));
        let labels_idx: Vec<usize> = (0..12).map(|_| rng.random_range(0..2)).collect();
        let labels = SvmLabels::from_labels(&labels_idx, 2).unwrap();
        let state = fit_decision_layer(&x, &labels, 0.5, AlphaMode::SelfTuned, 1).unwrap();
        assert!((state.alpha.sum() - 1.0).abs() <= 1e-10);
        assert!(state.alpha.iter().all(|&a| a >= 0.0));
        assert!(state.m.iter().all(|&v| v >= 0.0));
        assert!(constraint_gap(&state.w, &x, &state.alpha, 0.5) <= 1e-6);

        assert!(fit_decision_layer(&x, &labels, 0.5, AlphaMode::SelfTuned, 0).is_err());
    }

    #[test]
    fn fixed_gamma_uses_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let x = Matrix::from_fn(2, 8, |_, _| rng.random_range(-1.0..1.0));
        let labels_idx: Vec<usize> = (0..8).map(|_| rng.random_range(0..2)).collect();
        let labels = SvmLabels::from_labels(&labels_idx, 2).unwrap();
        let state = fit_decision_layer(&x, &labels, 0.5, AlphaMode::FixedGamma(2.0), 2).unwrap();
        assert!((state.alpha.sum() - 1.0).abs() <= 1e-10);
        assert_eq!(state.gamma, 2.0);
        assert!(fit_decision_layer(&x, &labels, 0.5, AlphaMode::FixedGamma(0.0), 2).is_err());
    }

    #[test]
    fn block_update_monotone_with_frozen_alpha() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..50 {
            let d = rng.random_range(2..6);
            let c = rng.random_range(1..=d.min(3));
            let n = rng.random_range(4..16);
            let x = Matrix::from_fn(d, n, |_, _| rng.random_range(-1.0..1.0));
            let labels_idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
            let labels = SvmLabels::from_labels(&labels_idx, c).unwrap();
            let alpha = random_simplex(n, &mut rng);
            let gamma = rng.random_range(0.1..2.0);
            let lambda = rng.random_range(0.1..2.0);

            // a feasible starting point for the same alpha
            let g0 = Matrix::from_fn(c, n, |_, _| rng.random_range(-1.0..1.0));
            let (w0, b0) = update_weights_bias(&x, &g0, &alpha, lambda).unwrap();
            let m0 = Matrix::from_fn(c, n, |_, _| rng.random_range(0.0..1.0));

            let before =
                weighted_objective(&w0, &b0, &m0, &alpha, gamma, &x, &labels, lambda).unwrap();
            let g_target = labels.matrix() + labels.matrix().component_mul(&m0);
            let (w1, b1) = update_weights_bias(&x, &g_target, &alpha, lambda).unwrap();
            let mid =
                weighted_objective(&w1, &b1, &m0, &alpha, gamma, &x, &labels, lambda).unwrap();
            let m1 = update_slack(&w1, &b1, &x, &labels).unwrap();
            let after =
                weighted_objective(&w1, &b1, &m1, &alpha, gamma, &x, &labels, lambda).unwrap();

            assert!(
                mid <= before + 1e-9,
                "(W,b) step increased: {before} -> {mid}"
            );
            assert!(after <= mid + 1e-9, "M step increased: {mid} -> {after}");
        }
    }

    #[test]
    fn scores_tie_breaks_low_and_constant_bias() {
        let state = dummy_state(
            Matrix::zeros(2, 2),
            Vector::from_vec(vec![1.0, 0.0]),
            Matrix::zeros(2, 2),
        );
        let x = Matrix::from_fn(2, 3, |i, j| (i + j) as f64);
        assert_eq!(decision_predict(&state, &x).unwrap(), vec![0, 0, 0]);

        let tie = DecisionState {
            b: Vector::zeros(2),
            ..state
        };
        assert_eq!(decision_predict(&tie, &x).unwrap(), vec![0, 0, 0]);
    }
}
