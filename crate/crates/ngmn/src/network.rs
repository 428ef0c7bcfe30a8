//! The full model: ridge feature layers topped by the manifold SVM head,
//! jointly trained by alternating closed-form updates.
//!
//! Each outer sweep pushes the head's slack-adjusted targets back down
//! through the feature layers (low-rank label back-substitution), refits
//! every layer in closed form, runs fresh forward inference, and refits the
//! head on the new features. The returned model therefore always carries a
//! head consistent with its final features. Training is single-threaded and
//! bit-reproducible per seed.

use crate::activations::{softmax_columns, Activation};
use crate::decision::{
    self, AlphaMode, DecisionState, SvmLabels,
};
use crate::error::{Error, Result};
use crate::matrix::{self, Matrix};
use crate::ridge::{
    self, argmax_columns, LayerParams, LayerSolver, TargetSpace, TraceRow,
};

/// What the head hands back as the top label matrix for the backward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TopTarget {
    /// The slack-adjusted regression target `G = Y + Y .* M` the head was
    /// actually fit against.
    #[default]
    SlackAdjusted,
    /// The raw +/-1 labels; kept for ablation.
    RawLabels,
}

/// The persisted part of a model's configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Widths of the ridge feature layers (the head supplies the final
    /// class-count mapping).
    pub hidden_widths: Vec<usize>,
    pub activation: Activation,
    pub lambda: f64,
    pub alpha_mode: AlphaMode,
    pub seed: u64,
}

/// Trainer knobs that are not part of the persisted artifact.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Alternating passes inside each head fit.
    pub head_iters: usize,
    pub target_space: TargetSpace,
    pub top_target: TopTarget,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_iter: 30,
            tol: 1e-4,
            head_iters: 1,
            target_space: TargetSpace::Inverse,
            top_target: TopTarget::SlackAdjusted,
        }
    }
}

/// A trained network: ridge layers, decision head, the persisted config,
/// and the per-iteration training trace.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub layers: Vec<LayerParams>,
    pub head: DecisionState,
    pub config: ModelConfig,
    pub trace: Vec<TraceRow>,
}

impl NetworkModel {
    pub fn input_dim(&self) -> usize {
        self.layers
            .first()
            .map(|l| l.input_dim())
            .unwrap_or_else(|| self.head.w.nrows())
    }

    pub fn classes(&self) -> usize {
        self.head.w.ncols()
    }
}

fn validate_train_inputs(
    x: &Matrix,
    y: &Matrix,
    config: &ModelConfig,
    options: &TrainOptions,
) -> Result<Vec<usize>> {
    if config.lambda <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "lambda must be positive, got {}",
            config.lambda
        )));
    }
    config.alpha_mode.validate()?;
    if options.max_iter == 0 {
        return Err(Error::InvalidConfig(
            "max_iter must be at least 1".to_string(),
        ));
    }
    if config.hidden_widths.iter().any(|&w| w == 0) {
        return Err(Error::InvalidConfig("zero layer width".to_string()));
    }
    let labels = ridge::validate_one_hot(y)?;
    if x.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "x has {} samples, y has {}",
            x.ncols(),
            y.ncols()
        )));
    }
    matrix::ensure_finite(x, "training data")?;
    let head_in = *config.hidden_widths.last().unwrap_or(&x.nrows());
    let c = y.nrows();
    if head_in < c {
        return Err(Error::ManifoldInfeasible { d: head_in, c });
    }
    Ok(labels)
}

/// The head's top label matrix and its (0, 1) back-substitution through the
/// head weights.
fn head_backward(head: &DecisionState, ypm: &Matrix, top_target: TopTarget) -> Matrix {
    let y_top = match top_target {
        TopTarget::SlackAdjusted => ypm + ypm.component_mul(&head.m),
        TopTarget::RawLabels => ypm.clone(),
    };
    let mut shifted = y_top;
    for mut col in shifted.column_iter_mut() {
        col -= &head.b;
    }
    softmax_columns(&(&head.w * shifted))
}

/// Jointly train ridge layers and the decision head.
pub fn train(
    x: &Matrix,
    y: &Matrix,
    config: &ModelConfig,
    options: &TrainOptions,
) -> Result<NetworkModel> {
    let labels = validate_train_inputs(x, y, config, options)?;
    let c = y.nrows();
    let ypm = SvmLabels::from_labels(&labels, c)?;

    let mut layers = ridge::init_layers(
        x.nrows(),
        &config.hidden_widths,
        config.activation,
        config.seed,
    );
    let input_solver = if layers.is_empty() {
        None
    } else {
        Some(LayerSolver::new(x, config.lambda)?)
    };

    let mut features = ridge::forward_all(&layers, x)?;
    let mut head = decision::fit_decision_layer(
        features.last().unwrap(),
        &ypm,
        config.lambda,
        config.alpha_mode,
        options.head_iters,
    )?;

    // The alternation has no convergence guarantee and can cycle between
    // class-to-score-dimension assignments; the head objective separates
    // those phases cleanly, so the returned model is the best-scoring
    // snapshot while the trace keeps every iteration.
    let mut best: Option<(f64, Vec<LayerParams>, DecisionState)> = None;
    let mut trace: Vec<TraceRow> = Vec::new();
    for iter in 0..options.max_iter {
        // backward: head target down through the ridge layers
        let mut y_tilde = head_backward(&head, ypm.matrix(), options.top_target);
        let mut ridge_loss = 0.0;
        for l in (0..layers.len()).rev() {
            let target = match options.target_space {
                TargetSpace::Inverse => config.activation.invert(&y_tilde),
                TargetSpace::Direct => y_tilde.clone(),
            };
            let (w, b) = if l == 0 {
                input_solver.as_ref().unwrap().solve(&features[0], &target)?
            } else {
                ridge::fit_layer(&features[l], &target, config.lambda)?
            };
            layers[l].w = w;
            layers[l].b = b;
            ridge_loss += ridge::layer_objective(
                &layers[l].w,
                &layers[l].b,
                &features[l],
                &target,
                config.lambda,
            );
            if l > 0 {
                y_tilde = ridge::backward_labels(&layers[l], &y_tilde)?;
            }
        }

        // fresh forward inference and head refit on the new features
        features = ridge::forward_all(&layers, x)?;
        let top = features.last().unwrap();
        head = decision::fit_decision_layer(
            top,
            &ypm,
            config.lambda,
            config.alpha_mode,
            options.head_iters,
        )?;
        let head_obj = decision::weighted_objective(
            &head.w, &head.b, &head.m, &head.alpha, head.gamma, top, &ypm, config.lambda,
        )?;

        let total_loss = ridge_loss + head_obj;
        let preds = argmax_columns(&decision::decision_scores(&head, top)?);
        let correct = preds.iter().zip(&labels).filter(|(p, t)| p == t).count();
        let train_acc = correct as f64 / labels.len() as f64;

        if best.as_ref().is_none_or(|(obj, _, _)| head_obj < *obj) {
            best = Some((head_obj, layers.clone(), head.clone()));
        }

        let converged = trace.last().is_some_and(|prev: &TraceRow| {
            (total_loss - prev.loss).abs() <= options.tol * prev.loss.abs().max(1e-12)
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

    let (_, layers, head) = best.expect("max_iter >= 1 guarantees one iteration");
    Ok(NetworkModel {
        layers,
        head,
        config: config.clone(),
        trace,
    })
}

/// Forward the ridge layers, then the head; argmax per column.
pub fn predict(model: &NetworkModel, x: &Matrix) -> Result<Vec<usize>> {
    if x.nrows() != model.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "model expects {} input rows, got {}",
            model.input_dim(),
            x.nrows()
        )));
    }
    let features = ridge::forward_all(&model.layers, x)?;
    let scores = decision::decision_scores(&model.head, features.last().unwrap())?;
    Ok(argmax_columns(&scores))
}

/// Raw head scores on forwarded features, for callers that need margins.
pub fn predict_scores(model: &NetworkModel, x: &Matrix) -> Result<Matrix> {
    let features = ridge::forward_all(&model.layers, x)?;
    decision::decision_scores(&model.head, features.last().unwrap())
}

/// Convenience: one-hot matrix from class indices.
pub fn one_hot_from_labels(labels: &[usize], classes: usize) -> Result<Matrix> {
    if classes < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 classes, got {classes}"
        )));
    }
    let mut y = Matrix::zeros(classes, labels.len());
    for (j, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::InvalidInput(format!(
                "label {l} out of range for {classes} classes"
            )));
        }
        y[(l, j)] = 1.0;
    }
    Ok(y)
}

/// Accuracy of a model on a labeled set.
pub fn model_accuracy(model: &NetworkModel, x: &Matrix, labels: &[usize]) -> Result<f64> {
    let preds = predict(model, x)?;
    let correct = preds.iter().zip(labels).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / labels.len().max(1) as f64)
}
