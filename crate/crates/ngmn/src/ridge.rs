//! Ridge-regression layers: closed-form fitting, forward inference, and
//! low-rank label back-substitution.
//!
//! A layer maps `H_prev (d_in x n)` to `sigma(W^T H_prev + b 1^T)` with
//! `W (d_in x d_out)`. Fitting regresses the pre-activation onto a target
//! matrix in one shot: center both sides, solve the regularized normal
//! equations for `W`, then put the mean structure back through `b`. Label
//! information travels the other way as `softmax(W (T - b 1^T))`, the rank-c
//! surrogate for inverting `W W^T H`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::activations::{softmax_columns, Activation};
use crate::error::{Error, Result};
use crate::matrix::{self, Matrix, Vector};

/// One fitted layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// `d_in x d_out`, applied transposed.
    pub w: Matrix,
    /// Length `d_out`.
    pub b: Vector,
    pub activation: Activation,
}

impl LayerParams {
    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.ncols()
    }
}

/// Which space the per-layer regression target lives in.
///
/// `Inverse` (default) fits each layer against the inverse-activation image
/// of its label matrix, so the linear part regresses in pre-activation
/// space. `Direct` regresses on the label matrix itself; kept for ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TargetSpace {
    #[default]
    Inverse,
    Direct,
}

/// Hyperparameters of a stack of ridge layers.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeConfig {
    /// Regularization weight, must be positive: it both fixes overfitting
    /// and guarantees the normal-equation matrix is invertible.
    pub lambda: f64,
    /// Output width of each layer, in order. For a standalone ridge network
    /// the last width must equal the class count.
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub target_space: TargetSpace,
}

impl RidgeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.widths.is_empty() {
            return Err(Error::InvalidConfig("widths must not be empty".to_string()));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidConfig("zero layer width".to_string()));
        }
        Ok(())
    }
}

/// One row of a training trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub loss: f64,
    pub train_acc: f64,
}

/// Forward one layer: `sigma(W^T H_prev + b 1^T)`.
pub fn forward_layer(params: &LayerParams, h_prev: &Matrix) -> Result<Matrix> {
    if h_prev.nrows() != params.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "forward_layer: layer expects {} input rows, got {}",
            params.input_dim(),
            h_prev.nrows()
        )));
    }
    let mut z = params.w.transpose() * h_prev;
    for mut col in z.column_iter_mut() {
        col += &params.b;
    }
    Ok(params.activation.apply(&z))
}

/// Precomputed factor for fitting any number of targets against the same
/// input matrix: the regularized inverse of the centered Gram matrix and the
/// centered input. The first layer of a network sees the raw data every
/// iteration, so reusing this is the difference between one and `max_iter`
/// large eigendecompositions.
pub(crate) struct LayerSolver {
    inv_gram: Matrix,
    centered: Matrix,
}

impl LayerSolver {
    pub(crate) fn new(h_prev: &Matrix, lambda: f64) -> Result<Self> {
        if lambda <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        matrix::ensure_finite(h_prev, "fit_layer input")?;
        let d = h_prev.nrows();
        let centered = matrix::center_columns(h_prev);
        let gram = &centered * centered.transpose() + Matrix::identity(d, d) * lambda;
        let inv_gram = matrix::spd_inverse(&gram)?;
        Ok(Self { inv_gram, centered })
    }

    /// Closed-form minimizer of
    /// `||W^T H + b 1^T - T||_F^2 + lambda ||W||_F^2`.
    pub(crate) fn solve(&self, h_prev: &Matrix, target: &Matrix) -> Result<(Matrix, Vector)> {
        if target.ncols() != h_prev.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "fit_layer: input has {} samples, target has {}",
                h_prev.ncols(),
                target.ncols()
            )));
        }
        let n = h_prev.ncols() as f64;
        let target_centered = matrix::center_columns(target);
        let w = &self.inv_gram * (&self.centered * target_centered.transpose());
        let residual = target - w.transpose() * h_prev;
        let b = (&residual * Vector::from_element(h_prev.ncols(), 1.0)) / n;
        Ok((w, b))
    }
}

/// Fit one layer's weights and bias against a target matrix.
pub fn fit_layer(h_prev: &Matrix, target: &Matrix, lambda: f64) -> Result<(Matrix, Vector)> {
    LayerSolver::new(h_prev, lambda)?.solve(h_prev, target)
}

/// Ridge objective of one layer; the quantity `fit_layer` minimizes.
pub fn layer_objective(w: &Matrix, b: &Vector, h_prev: &Matrix, target: &Matrix, lambda: f64) -> f64 {
    let mut z = w.transpose() * h_prev;
    for mut col in z.column_iter_mut() {
        col += b;
    }
    (z - target).norm_squared() + lambda * w.norm_squared()
}

/// Push label information down one layer: `softmax(W (T - b 1^T))` where
/// `T` is the target matrix layer `l` was fit against. The result is the
/// label matrix for layer `l - 1`, with every column summing to 1.
pub fn backward_labels(params: &LayerParams, y_tilde: &Matrix) -> Result<Matrix> {
    if y_tilde.nrows() != params.output_dim() {
        return Err(Error::ShapeMismatch(format!(
            "backward_labels: layer outputs {} rows, label matrix has {}",
            params.output_dim(),
            y_tilde.nrows()
        )));
    }
    let mut shifted = y_tilde.clone();
    for mut col in shifted.column_iter_mut() {
        col -= &params.b;
    }
    Ok(softmax_columns(&(&params.w * shifted)))
}

/// Check that every column of `y` is one-hot and that there are at least
/// two classes; returns the class index per column.
pub fn validate_one_hot(y: &Matrix) -> Result<Vec<usize>> {
    let c = y.nrows();
    if c < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 classes, got {c}"
        )));
    }
    let mut labels = Vec::with_capacity(y.ncols());
    for (j, col) in y.column_iter().enumerate() {
        let mut hot = None;
        for (i, &v) in col.iter().enumerate() {
            if v == 1.0 {
                if hot.is_some() {
                    return Err(Error::InvalidInput(format!(
                        "column {j} is not one-hot: multiple ones"
                    )));
                }
                hot = Some(i);
            } else if v != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "column {j} is not one-hot: entry {v}"
                )));
            }
        }
        labels.push(hot.ok_or_else(|| {
            Error::InvalidInput(format!("column {j} is not one-hot: all zeros"))
        })?);
    }
    Ok(labels)
}

/// Seeded layer-stack initialization: `W` uniform in `(-s, s)` with
/// `s = sqrt(6 / (d_in + d_out))`, `b = 0`.
pub fn init_layers(
    input_dim: usize,
    widths: &[usize],
    activation: Activation,
    seed: u64,
) -> Vec<LayerParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(widths.len());
    let mut d_in = input_dim;
    for &d_out in widths {
        let s = (6.0 / (d_in + d_out) as f64).sqrt();
        let w = Matrix::from_fn(d_in, d_out, |_, _| rng.random_range(-s..s));
        layers.push(LayerParams {
            w,
            b: Vector::zeros(d_out),
            activation,
        });
        d_in = d_out;
    }
    layers
}

/// Forward through a stack of layers, keeping every intermediate feature
/// matrix; `out[0]` is the input itself.
pub fn forward_all(layers: &[LayerParams], x: &Matrix) -> Result<Vec<Matrix>> {
    let mut features = Vec::with_capacity(layers.len() + 1);
    features.push(x.clone());
    for layer in layers {
        let next = forward_layer(layer, features.last().unwrap())?;
        features.push(next);
    }
    Ok(features)
}

/// The per-layer regression target for a label matrix in (0, 1).
fn layer_target(space: TargetSpace, activation: &Activation, y_tilde: &Matrix) -> Matrix {
    match space {
        TargetSpace::Inverse => activation.invert(y_tilde),
        TargetSpace::Direct => y_tilde.clone(),
    }
}

/// Train a standalone ridge network against one-hot labels.
///
/// Each sweep runs forward inference, then refits layers top-down: the top
/// layer's label matrix is `Y`, and each fitted layer back-substitutes its
/// own target to produce the label matrix one level down. Stops when the
/// relative change of the summed layer objectives drops below `tol`.
pub fn train_ridge_network(
    x: &Matrix,
    y: &Matrix,
    config: &RidgeConfig,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> Result<(Vec<LayerParams>, Vec<TraceRow>)> {
    config.validate()?;
    if max_iter == 0 {
        return Err(Error::InvalidConfig("max_iter must be at least 1".to_string()));
    }
    let labels = validate_one_hot(y)?;
    if x.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "x has {} samples, y has {}",
            x.ncols(),
            y.ncols()
        )));
    }
    matrix::ensure_finite(x, "training data")?;
    if *config.widths.last().unwrap() != y.nrows() {
        return Err(Error::InvalidConfig(format!(
            "last width {} must equal class count {}",
            config.widths.last().unwrap(),
            y.nrows()
        )));
    }

    let mut layers = init_layers(x.nrows(), &config.widths, config.activation, seed);
    let input_solver = LayerSolver::new(x, config.lambda)?;
    let mut trace: Vec<TraceRow> = Vec::new();

    for iter in 0..max_iter {
        let features = forward_all(&layers, x)?;
        let mut y_tilde = y.clone();
        let mut total_loss = 0.0;
        for l in (0..layers.len()).rev() {
            let target = layer_target(config.target_space, &config.activation, &y_tilde);
            let (w, b) = if l == 0 {
                input_solver.solve(&features[0], &target)?
            } else {
                fit_layer(&features[l], &target, config.lambda)?
            };
            layers[l].w = w;
            layers[l].b = b;
            total_loss +=
                layer_objective(&layers[l].w, &layers[l].b, &features[l], &target, config.lambda);
            if l > 0 {
                // the label matrix itself flows backward; its (0, 1) range
                // keeps the reconstruction softmax out of saturation
                y_tilde = backward_labels(&layers[l], &y_tilde)?;
            }
        }
        let preds = predict_ridge(&layers, x)?;
        let correct = preds.iter().zip(&labels).filter(|(p, t)| p == t).count();
        let train_acc = correct as f64 / labels.len() as f64;
        let converged = trace.last().is_some_and(|prev| {
            (total_loss - prev.loss).abs() <= tol * prev.loss.abs().max(1e-12)
        });
        trace.push(TraceRow {
            iter,
            loss: total_loss,
            train_acc,
        });
        if converged {
            break;
        }
    }
    Ok((layers, trace))
}

/// Class index per sample: argmax over the top layer's output, lowest index
/// on ties.
pub fn predict_ridge(layers: &[LayerParams], x: &Matrix) -> Result<Vec<usize>> {
    let top = forward_all(layers, x)?.pop().unwrap();
    Ok(argmax_columns(&top))
}

/// Argmax per column, lowest index on ties.
pub fn argmax_columns(scores: &Matrix) -> Vec<usize> {
    scores
        .column_iter()
        .map(|col| {
            let mut best = 0usize;
            for i in 1..col.len() {
                if col[i] > col[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
