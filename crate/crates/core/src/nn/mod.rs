//! Fully connected ReLU network with exact backpropagation.
//!
//! Batches are stored row-major: a batch of `B` samples is a `B x d` matrix.
//! Layer `l` computes `y_l = x_l W_l^T + b_l` with `W_l` of shape
//! `fan_out x fan_in`; hidden layers apply ReLU, the output layer emits raw
//! logits.

mod gradcheck;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::stream_rng;
use crate::scheme::{sample_matrix, InitScheme, LayerInitPlan, NetworkSpec};

pub use gradcheck::{gradcheck, gradcheck_finite_diff, GradCheck, GRAD_FLOOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitProvenance {
    pub scheme: InitScheme,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    pub spec: NetworkSpec,
    /// `weights[l - 1]` has shape `fan_out(l) x fan_in(l)`.
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub provenance: InitProvenance,
}

/// Per-layer values of one forward pass.
#[derive(Debug, Clone)]
pub struct BatchActivations {
    /// `inputs[l - 1]` is `x_l`: the batch for layer 1, `ReLU(y_{l-1})` after.
    pub inputs: Vec<Array2<f64>>,
    /// `pre[l - 1]` is `y_l`; the last entry holds the logits.
    pub pre: Vec<Array2<f64>>,
}

impl BatchActivations {
    pub fn logits(&self) -> &Array2<f64> {
        self.pre.last().expect("network has at least two layers")
    }

    pub fn batch_size(&self) -> usize {
        self.inputs[0].nrows()
    }
}

#[derive(Debug, Clone)]
pub struct GradientSet {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    /// `input_grads[l - 1]` is `Δx_l`, the gradient w.r.t. layer `l`'s input.
    pub input_grads: Vec<Array2<f64>>,
    /// `pre_grads[l - 1]` is `Δy_l`.
    pub pre_grads: Vec<Array2<f64>>,
}

pub fn init_network(spec: &NetworkSpec, plan: &LayerInitPlan, seed: u64) -> Result<DenseNetwork> {
    spec.validate()?;
    plan.check_matches(spec)?;
    let mut rng = stream_rng(seed, 0);
    let mut weights = Vec::with_capacity(spec.depth());
    let mut biases = Vec::with_capacity(spec.depth());
    for l in 1..=spec.depth() {
        weights.push(sample_matrix(
            &mut rng,
            spec.fan_out(l),
            spec.fan_in(l),
            plan.layers[l - 1].weight_variance,
            plan.distribution(),
        )?);
        biases.push(Array1::zeros(spec.fan_out(l)));
    }
    Ok(DenseNetwork {
        spec: spec.clone(),
        weights,
        biases,
        provenance: InitProvenance {
            scheme: plan.scheme,
            seed,
        },
    })
}

fn relu(y: &Array2<f64>) -> Array2<f64> {
    y.mapv(|v| v.max(0.0))
}

impl DenseNetwork {
    /// Network with explicit parameters; shapes must chain.
    pub fn from_parts(
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        provenance: InitProvenance,
    ) -> Result<Self> {
        let first = weights.first().ok_or_else(|| invalid("no layers"))?;
        let spec = NetworkSpec::new(first.ncols(), weights.iter().map(|w| w.nrows()).collect())?;
        if biases.len() != weights.len() {
            return Err(invalid("one bias vector per layer required"));
        }
        for l in 1..=spec.depth() {
            if weights[l - 1].ncols() != spec.fan_in(l) || biases[l - 1].len() != spec.width(l) {
                return Err(invalid(format!("parameter shapes do not chain at layer {l}")));
            }
        }
        Ok(Self {
            spec,
            weights,
            biases,
            provenance,
        })
    }

    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn forward(&self, batch: ArrayView2<'_, f64>) -> Result<BatchActivations> {
        if batch.ncols() != self.spec.input_dim {
            return Err(invalid(format!(
                "batch has {} features, network expects {}",
                batch.ncols(),
                self.spec.input_dim
            )));
        }
        let depth = self.depth();
        let mut inputs = Vec::with_capacity(depth);
        let mut pre = Vec::with_capacity(depth);
        inputs.push(batch.to_owned());
        for l in 0..depth {
            let y = inputs[l].dot(&self.weights[l].t()) + &self.biases[l];
            if l + 1 < depth {
                inputs.push(relu(&y));
            }
            pre.push(y);
        }
        Ok(BatchActivations { inputs, pre })
    }

    /// Logits only, without keeping intermediate layers.
    pub fn predict(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if batch.ncols() != self.spec.input_dim {
            return Err(invalid(format!(
                "batch has {} features, network expects {}",
                batch.ncols(),
                self.spec.input_dim
            )));
        }
        let depth = self.depth();
        let mut x = batch.to_owned();
        for l in 0..depth {
            let y = x.dot(&self.weights[l].t()) + &self.biases[l];
            x = if l + 1 < depth { relu(&y) } else { y };
        }
        Ok(x)
    }

    /// Gradients of the mean softmax cross-entropy.
    pub fn backward(&self, acts: &BatchActivations, labels: &[usize]) -> Result<GradientSet> {
        let logits = acts.logits();
        if labels.len() != logits.nrows() {
            return Err(invalid(format!(
                "{} labels for a batch of {}",
                labels.len(),
                logits.nrows()
            )));
        }
        let grad = softmax_ce_grad(logits, labels)?;
        self.backward_from(acts, grad)
    }

    /// Backpropagates an arbitrary gradient `output_grad` w.r.t. the logits.
    pub fn backward_from(
        &self,
        acts: &BatchActivations,
        output_grad: Array2<f64>,
    ) -> Result<GradientSet> {
        let depth = self.depth();
        if acts.pre.len() != depth || acts.inputs.len() != depth {
            return Err(invalid("activations do not belong to this network"));
        }
        for l in 0..depth {
            if acts.pre[l].ncols() != self.weights[l].nrows()
                || acts.inputs[l].ncols() != self.weights[l].ncols()
            {
                return Err(invalid(format!("activation shape mismatch at layer {}", l + 1)));
            }
        }
        if output_grad.dim() != acts.logits().dim() {
            return Err(invalid("output gradient shape does not match logits"));
        }

        let mut weights = vec![Array2::zeros((0, 0)); depth];
        let mut biases = vec![Array1::zeros(0); depth];
        let mut input_grads = vec![Array2::zeros((0, 0)); depth];
        let mut pre_grads = vec![Array2::zeros((0, 0)); depth];

        let mut dy = output_grad;
        for l in (0..depth).rev() {
            weights[l] = dy.t().dot(&acts.inputs[l]);
            biases[l] = dy.sum_axis(Axis(0));
            let dx = dy.dot(&self.weights[l]);
            if l > 0 {
                // ReLU gate; the derivative at exactly zero is taken as zero.
                let mut next = dx.clone();
                Zip::from(&mut next).and(&acts.pre[l - 1]).for_each(|g, &y| {
                    if y <= 0.0 {
                        *g = 0.0;
                    }
                });
                pre_grads[l] = std::mem::replace(&mut dy, next);
            } else {
                pre_grads[l] = std::mem::take(&mut dy);
            }
            input_grads[l] = dx;
        }
        Ok(GradientSet {
            weights,
            biases,
            input_grads,
            pre_grads,
        })
    }

    /// Plain SGD: `p <- p - lr * g` for every weight and bias.
    pub fn sgd_step(&mut self, grads: &GradientSet, lr: f64) -> Result<()> {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(invalid(format!("learning rate must be positive, got {lr}")));
        }
        if grads.weights.len() != self.depth() {
            return Err(invalid("gradient set does not match network depth"));
        }
        for l in 0..self.depth() {
            if grads.weights[l].dim() != self.weights[l].dim()
                || grads.biases[l].len() != self.biases[l].len()
            {
                return Err(invalid(format!("gradient shape mismatch at layer {}", l + 1)));
            }
        }
        for l in 0..self.depth() {
            self.weights[l].scaled_add(-lr, &grads.weights[l]);
            self.biases[l].scaled_add(-lr, &grads.biases[l]);
        }
        Ok(())
    }

    /// Population variance of each layer's weights.
    pub fn weight_variances(&self) -> Vec<f64> {
        self.weights.iter().map(|w| population_variance(w.iter().copied())).collect()
    }
}

pub fn forward(net: &DenseNetwork, batch: ArrayView2<'_, f64>) -> Result<BatchActivations> {
    net.forward(batch)
}

pub fn backward(net: &DenseNetwork, acts: &BatchActivations, labels: &[usize]) -> Result<GradientSet> {
    net.backward(acts, labels)
}

pub fn sgd_step(net: &mut DenseNetwork, grads: &GradientSet, lr: f64) -> Result<()> {
    net.sgd_step(grads, lr)
}

fn check_labels(logits: &Array2<f64>, labels: &[usize]) -> Result<()> {
    if labels.len() != logits.nrows() {
        return Err(invalid(format!(
            "{} labels for {} rows of logits",
            labels.len(),
            logits.nrows()
        )));
    }
    if logits.nrows() == 0 {
        return Err(invalid("empty batch"));
    }
    let classes = logits.ncols();
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(invalid(format!("label {bad} out of range for {classes} classes")));
    }
    Ok(())
}

fn log_softmax_row(row: ndarray::ArrayView1<'_, f64>) -> Array1<f64> {
    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    row.mapv(|v| v - lse)
}

/// Mean softmax cross-entropy over the batch.
pub fn loss_softmax_ce(logits: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    check_labels(logits, labels)?;
    let total: f64 = logits
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(row, &y)| -log_softmax_row(row)[y])
        .sum();
    Ok(total / labels.len() as f64)
}

/// `(softmax(logits) - onehot(labels)) / B`.
fn softmax_ce_grad(logits: &Array2<f64>, labels: &[usize]) -> Result<Array2<f64>> {
    check_labels(logits, labels)?;
    let scale = 1.0 / labels.len() as f64;
    let mut grad = Array2::zeros(logits.dim());
    for ((row, mut out), &y) in logits.rows().into_iter().zip(grad.rows_mut()).zip(labels) {
        let probs = log_softmax_row(row).mapv(f64::exp);
        out.assign(&(probs * scale));
        out[y] -= scale;
    }
    Ok(grad)
}

/// Fraction of rows whose arg-max logit equals the label.
pub fn accuracy(logits: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    check_labels(logits, labels)?;
    let hits = logits
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(row, &y)| argmax(row.iter().copied()) == y)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Variance around the overall mean of `values`; zero for an empty input.
pub(crate) fn population_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
}

#[cfg(test)]
mod tests;
