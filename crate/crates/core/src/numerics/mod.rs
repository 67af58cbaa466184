//! Framework-free numerics: matrices, activations, loss, a two-hidden-layer
//! MLP with hand-written backprop, and Adam.

mod adam;
pub mod dd;
pub(crate) mod gradcheck;
mod matrix;
mod mlp;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use adam::{AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use gradcheck::{finite_diff_check, finite_diff_max_rel_error, Probe, FD_STEP};
pub use matrix::{axpy, dot, Matrix};
pub use mlp::{mlp_backward, mlp_forward, MlpCache, MlpParams};

/// Elementwise `max(0, x)`.
pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| relu_scalar(v)).collect()
}

#[inline]
pub(crate) fn relu_scalar(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// ReLU derivative, with the subgradient at exactly zero taken as 0.
#[inline]
pub(crate) fn relu_grad(pre: f64) -> f64 {
    if pre > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Empty("softmax"));
    }
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    weighted_mse(pred, target, None)
}

/// Mean of `w_i (pred_i - target_i)^2` over all `n` elements (not over the
/// weight mass). Without weights every `w_i` is 1.
pub fn weighted_mse(
    pred: &[f64],
    target: &[f64],
    weights: Option<&[f64]>,
) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::shape("mse", pred.len(), target.len()));
    }
    if let Some(w) = weights {
        if w.len() != pred.len() {
            return Err(Error::shape("mse weights", pred.len(), w.len()));
        }
    }
    if pred.is_empty() {
        return Err(Error::Empty("mse"));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(pred.len());
    for i in 0..pred.len() {
        let w = weights.map_or(1.0, |w| w[i]);
        let d = pred[i] - target[i];
        loss += w * d * d;
        grad.push(2.0 * w * d / n);
    }
    Ok((loss / n, grad))
}

/// Dense affine layer `y = W x + b` with `W` of shape `(out, in)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
        }
    }

    /// Weights and biases uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn uniform<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weight = Matrix::from_fn(out_dim, in_dim, |_, _| rng.gen_range(-bound..=bound));
        let bias = (0..out_dim).map(|_| rng.gen_range(-bound..=bound)).collect();
        Self { weight, bias }
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.out_dim()];
        self.weight.affine_into(x, &self.bias, &mut out);
        out
    }

    /// Accumulates `dW += dy xᵀ`, `db += dy` and, if requested, `dx += Wᵀ dy`.
    pub(crate) fn backward_acc(
        &self,
        x: &[f64],
        dy: &[f64],
        grad_w: &mut Matrix,
        grad_b: &mut Matrix,
        dx: Option<&mut [f64]>,
    ) {
        grad_w.add_outer(1.0, dy, x);
        axpy(1.0, dy, grad_b.as_mut_slice());
        if let Some(dx) = dx {
            self.weight.transpose_mul_acc(dy, dx);
        }
    }
}

/// One gradient tensor per parameter tensor; biases are `(n, 1)` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub tensors: Vec<Matrix>,
}

impl GradientSet {
    pub fn zeros(shapes: &[(usize, usize)]) -> Self {
        Self {
            tensors: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
        }
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.tensors.iter().map(Matrix::shape).collect()
    }

    pub fn check_shapes(&self, shapes: &[(usize, usize)]) -> Result<()> {
        let own = self.shapes();
        if own != shapes {
            return Err(Error::shape(
                "GradientSet",
                format!("{shapes:?}"),
                format!("{own:?}"),
            ));
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &GradientSet) -> Result<()> {
        other.check_shapes(&self.shapes())?;
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        self.tensors.iter_mut().for_each(|t| t.scale(s));
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Matrix::is_finite)
    }

    pub fn is_zero(&self) -> bool {
        self.tensors
            .iter()
            .all(|t| t.as_slice().iter().all(|&v| v == 0.0))
    }

    /// Flattened view of all entries, in tensor order.
    pub fn flat(&self) -> Vec<f64> {
        self.tensors
            .iter()
            .flat_map(|t| t.as_slice().iter().copied())
            .collect()
    }
}

/// A network built from [`Linear`] layers that owns its Adam state.
///
/// Tensor order is `[W_0, b_0, W_1, b_1, ...]` following [`Parameters::layers`];
/// gradients, checkpoints and the optimizer all use that order.
pub trait Parameters {
    fn layers(&self) -> Vec<&Linear>;

    fn layers_and_optimizer(&mut self) -> (Vec<&mut Linear>, &mut AdamState);

    fn optimizer(&self) -> &AdamState;

    fn shapes(&self) -> Vec<(usize, usize)> {
        self.layers()
            .iter()
            .flat_map(|l| [l.weight.shape(), (l.bias.len(), 1)])
            .collect()
    }

    fn tensors(&self) -> Vec<&[f64]> {
        self.layers()
            .into_iter()
            .flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()])
            .collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers_and_optimizer()
            .0
            .into_iter()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    fn param_count(&self) -> usize {
        self.shapes().iter().map(|(r, c)| r * c).sum()
    }

    fn zero_grads(&self) -> GradientSet {
        GradientSet::zeros(&self.shapes())
    }

    /// One bias-corrected Adam update with the given learning rate.
    fn adam_step(&mut self, grads: &GradientSet, lr: f64) -> Result<()> {
        grads.check_shapes(&self.shapes())?;
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradients passed to adam_step".into()));
        }
        let (layers, adam) = self.layers_and_optimizer();
        let tensors = layers
            .into_iter()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()]);
        adam.apply(tensors, grads, lr)
    }

    /// Copies parameter values (not optimizer state) into a flat vector.
    fn flat_params(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    /// Overwrites parameter values from a flat vector in tensor order.
    fn load_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::shape(
                "Parameters::load_flat",
                self.param_count(),
                values.len(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter payload".into()));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}
