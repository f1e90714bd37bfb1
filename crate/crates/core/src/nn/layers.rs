use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{ParamRole, ParamView, ParamViewMut, Parameters};
use super::tensor::{gemm, Matrix, Op, Vector};
use crate::error::{Error, Result};

/// Weights (`out × in`) and bias (`out`) of one fully connected layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayerParams {
    pub weights: Matrix,
    pub bias: Vector,
}

impl DenseLayerParams {
    pub fn new(weights: Matrix, bias: Vector) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::shape("DenseLayerParams bias", weights.rows(), bias.len()));
        }
        Ok(DenseLayerParams { weights, bias })
    }

    pub fn zeros(output: usize, input: usize) -> Self {
        DenseLayerParams {
            weights: Matrix::zeros(output, input),
            bias: Vector::zeros(output),
        }
    }

    /// Uniform in ±sqrt(6 / (fan_in + fan_out)), zero bias.
    pub fn glorot<R: Rng + ?Sized>(output: usize, input: usize, rng: &mut R) -> Self {
        let weights = glorot_matrix(output, input, rng);
        DenseLayerParams {
            weights,
            bias: Vector::zeros(output),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }
}

pub(crate) fn glorot_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-limit..=limit))
}

impl Parameters for DenseLayerParams {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<ParamView<'a>>) {
        out.push(ParamView::matrix(format!("{prefix}.weight"), &self.weights, ParamRole::Weight));
        out.push(ParamView::vector(format!("{prefix}.bias"), &self.bias, ParamRole::Bias));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamViewMut<'a>>) {
        out.push(ParamViewMut::matrix(format!("{prefix}.weight"), &mut self.weights, ParamRole::Weight));
        out.push(ParamViewMut::vector(format!("{prefix}.bias"), &mut self.bias, ParamRole::Bias));
    }
}

/// `weights · input + bias`
pub fn dense_forward(layer: &DenseLayerParams, input: &[f64]) -> Result<Vector> {
    if input.len() != layer.input_dim() {
        return Err(Error::shape("dense_forward input", layer.input_dim(), input.len()));
    }
    let mut out = layer.weights.matvec(input)?;
    out.iter_mut().zip(layer.bias.iter()).for_each(|(o, b)| *o += b);
    Ok(out)
}

/// Row-wise `dense_forward` over a `batch × in` matrix.
pub fn dense_forward_batch(layer: &DenseLayerParams, input: &Matrix) -> Result<Matrix> {
    if input.cols() != layer.input_dim() {
        return Err(Error::shape("dense_forward_batch input", layer.input_dim(), input.cols()));
    }
    let mut out = Matrix::zeros(input.rows(), layer.output_dim());
    for r in 0..out.rows() {
        out.row_mut(r).copy_from_slice(&layer.bias);
    }
    gemm(1.0, input, Op::N, &layer.weights, Op::T, 1.0, &mut out)?;
    Ok(out)
}

/// Accumulates `∂L/∂W` and `∂L/∂b` into `grads` given the layer input and the
/// gradient at its output; returns `∂L/∂input` when requested.
pub fn dense_backward_batch(
    layer: &DenseLayerParams,
    input: &Matrix,
    grad_output: &Matrix,
    grads: &mut DenseLayerParams,
    want_input_grad: bool,
) -> Result<Option<Matrix>> {
    if grad_output.cols() != layer.output_dim() || grad_output.rows() != input.rows() {
        return Err(Error::shape(
            "dense_backward_batch grad_output",
            format!("{}x{}", input.rows(), layer.output_dim()),
            format!("{}x{}", grad_output.rows(), grad_output.cols()),
        ));
    }
    gemm(1.0, grad_output, Op::T, input, Op::N, 1.0, &mut grads.weights)?;
    for r in 0..grad_output.rows() {
        for (g, d) in grads.bias.iter_mut().zip(grad_output.row(r)) {
            *g += d;
        }
    }
    if want_input_grad {
        let mut dx = Matrix::zeros(input.rows(), layer.input_dim());
        gemm(1.0, grad_output, Op::N, &layer.weights, Op::N, 0.0, &mut dx)?;
        Ok(Some(dx))
    } else {
        Ok(None)
    }
}

pub fn relu(input: &[f64]) -> Vector {
    input.iter().map(|&v| v.max(0.0)).collect::<Vec<_>>().into()
}

pub fn relu_in_place(values: &mut [f64]) {
    values.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Masks `grad` where the (post-activation) output was clipped to zero.
pub fn relu_backward_in_place(activated: &[f64], grad: &mut [f64]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `exp(z_j / T) / Σ_k exp(z_k / T)`, stabilized by subtracting the max.
pub fn softmax_temperature(logits: &[f64], temperature: f64) -> Result<Vector> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid(format!("temperature must be positive, got {temperature}")));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax logits"));
    }
    let mut out = logits.to_vec();
    softmax_row_in_place(&mut out, temperature);
    Ok(out.into())
}

pub(crate) fn softmax_row_in_place(row: &mut [f64], temperature: f64) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = ((*v - max) / temperature).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

/// `-ln p[target]`
pub fn cross_entropy_loss(probabilities: &[f64], target_class: usize) -> Result<f64> {
    let p = *probabilities.get(target_class).ok_or_else(|| {
        Error::invalid(format!(
            "target class {target_class} out of range for {} classes",
            probabilities.len()
        ))
    })?;
    let total: f64 = probabilities.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
    }
    Ok(-p.ln())
}

/// Output of [`softmax_cross_entropy_batch`].
pub struct SoftmaxCrossEntropy {
    /// Mean loss over the batch.
    pub loss: f64,
    pub probabilities: Matrix,
    /// `∂ mean_loss / ∂ logits`, i.e. `(p - onehot) / (T · batch)`.
    pub grad_logits: Matrix,
}

/// Batched temperature softmax followed by mean cross-entropy.
pub fn softmax_cross_entropy_batch(logits: &Matrix, targets: &[usize], temperature: f64) -> Result<SoftmaxCrossEntropy> {
    if targets.len() != logits.rows() {
        return Err(Error::shape("softmax_cross_entropy_batch targets", logits.rows(), targets.len()));
    }
    if targets.is_empty() {
        return Err(Error::InsufficientData("empty batch".into()));
    }
    if !(temperature > 0.0) {
        return Err(Error::invalid(format!("temperature must be positive, got {temperature}")));
    }
    if !logits.is_finite() {
        return Err(Error::NonFinite("logits"));
    }
    let classes = logits.cols();
    let batch = logits.rows() as f64;
    let mut probabilities = logits.clone();
    let mut grad_logits = Matrix::zeros(logits.rows(), classes);
    let mut loss = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        if t >= classes {
            return Err(Error::invalid(format!("target class {t} out of range for {classes} classes")));
        }
        let p = probabilities.row_mut(r);
        softmax_row_in_place(p, temperature);
        loss -= p[t].ln();
        let scale = 1.0 / (temperature * batch);
        let g = grad_logits.row_mut(r);
        for (j, gj) in g.iter_mut().enumerate() {
            let indicator = if j == t { 1.0 } else { 0.0 };
            *gj = (probabilities.get(r, j) - indicator) * scale;
        }
    }
    Ok(SoftmaxCrossEntropy {
        loss: loss / batch,
        probabilities,
        grad_logits,
    })
}
