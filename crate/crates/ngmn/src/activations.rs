//! Invertible elementwise activations and the column-wise softmax used to
//! map reconstructed labels back into (0, 1).

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// The elementwise nonlinearity. Every variant is strictly monotone, so the
/// inverse is well defined on its range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    Sigmoid,
    /// Negative-side slope in (0, 1).
    LeakyRelu(f64),
    Tanh,
    Identity,
}

/// An activation plus the clip margin applied before inversion. Sigmoid and
/// tanh targets sit exactly on their range boundary for one-hot labels, so
/// the inverse clips inputs `clip_eps` inside the open range first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activation {
    pub kind: ActivationKind,
    pub clip_eps: f64,
}

pub const DEFAULT_CLIP_EPS: f64 = 1e-6;

impl Activation {
    pub fn new(kind: ActivationKind, clip_eps: f64) -> Result<Self> {
        if let ActivationKind::LeakyRelu(a) = kind {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "leaky relu slope must lie in (0, 1), got {a}"
                )));
            }
        }
        if !(clip_eps > 0.0 && clip_eps < 0.1) {
            return Err(Error::InvalidConfig(format!(
                "clip epsilon must lie in (0, 0.1), got {clip_eps}"
            )));
        }
        Ok(Self { kind, clip_eps })
    }

    pub fn sigmoid() -> Self {
        Self {
            kind: ActivationKind::Sigmoid,
            clip_eps: DEFAULT_CLIP_EPS,
        }
    }

    fn forward_scalar(&self, z: f64) -> f64 {
        match self.kind {
            ActivationKind::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            ActivationKind::LeakyRelu(a) => {
                if z >= 0.0 {
                    z
                } else {
                    a * z
                }
            }
            ActivationKind::Tanh => z.tanh(),
            ActivationKind::Identity => z,
        }
    }

    fn inverse_scalar(&self, h: f64) -> f64 {
        let eps = self.clip_eps;
        match self.kind {
            ActivationKind::Sigmoid => {
                let h = h.clamp(eps, 1.0 - eps);
                (h / (1.0 - h)).ln()
            }
            ActivationKind::LeakyRelu(a) => {
                if h >= 0.0 {
                    h
                } else {
                    h / a
                }
            }
            ActivationKind::Tanh => {
                let h = h.clamp(-1.0 + eps, 1.0 - eps);
                h.atanh()
            }
            ActivationKind::Identity => h,
        }
    }

    /// Elementwise forward map.
    pub fn apply(&self, z: &Matrix) -> Matrix {
        z.map(|v| self.forward_scalar(v))
    }

    /// Elementwise inverse, clipping into the open range first. Exact for
    /// leaky relu and identity; `invert(apply(x)) = x` whenever `apply(x)`
    /// stays at least `clip_eps` away from the range boundary.
    pub fn invert(&self, h: &Matrix) -> Matrix {
        h.map(|v| self.inverse_scalar(v))
    }
}

/// Column-wise softmax with per-column max subtraction for stability. Each
/// output column sums to 1 and every entry lies in (0, 1).
pub fn softmax_columns(z: &Matrix) -> Matrix {
    let mut out = z.clone();
    for mut col in out.column_iter_mut() {
        let max = col.max();
        let mut sum = 0.0;
        for v in col.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        col /= sum;
    }
    out
}
