//! Closed-form training of multi-layer neural classifiers.
//!
//! No gradients anywhere: feature layers are fit by ridge regression with
//! invertible activations, label information flows backward through a
//! low-rank reconstruction, and the decision head is an adaptive-weight
//! multi-class SVM constrained to a flexible Stiefel manifold. Every update
//! is an analytic solution, and the [`oracle`] module certifies each one
//! against an independent numerical check.

pub mod activations;
pub mod config;
pub mod data;
pub mod decision;
pub mod error;
pub mod matrix;
pub mod model_io;
pub mod network;
pub mod oracle;
pub mod ridge;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::{Matrix, Vector};
