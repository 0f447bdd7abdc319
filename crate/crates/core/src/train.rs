//! Seeded minibatch SGD on a [`Dataset`].

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{DataSource, Dataset};
use crate::error::{invalid, Error, Result};
use crate::nn::{accuracy, init_network, loss_softmax_ce, population_variance, DenseNetwork};
use crate::rng::{derive_seed, stream_rng};
use crate::scheme::{build_plan, InitScheme, NetworkSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Samples (taken from the front of the dataset) used for gradient
    /// statistics snapshots.
    pub probe_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            lr: 0.01,
            batch_size: 32,
            seed: 0,
            probe_size: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy over the whole dataset after the epoch.
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientSnapshot {
    pub epoch: usize,
    /// Variance of `∂loss/∂W_l` entries on the probe batch, per layer.
    pub weight_grad_variance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub scheme: InitScheme,
    pub spec: NetworkSpec,
    pub config: TrainConfig,
    pub data: DataSource,
    pub solved_k: Option<f64>,
    /// Evaluation before the first update.
    pub initial: EpochStats,
    /// One entry per requested epoch.
    pub epochs: Vec<EpochStats>,
    /// Taken at epochs 0, `epochs / 2` and `epochs`.
    pub gradient_snapshots: Vec<GradientSnapshot>,
    pub final_weight_variance: Vec<f64>,
}

impl TrainReport {
    pub fn final_stats(&self) -> EpochStats {
        *self.epochs.last().unwrap_or(&self.initial)
    }

    /// `1 - final_loss / initial_loss`.
    pub fn loss_reduction(&self) -> f64 {
        1.0 - self.final_stats().loss / self.initial.loss
    }
}

fn evaluate(net: &DenseNetwork, data: &Dataset, epoch: usize) -> Result<EpochStats> {
    let logits = net.predict(data.features.view())?;
    let loss = loss_softmax_ce(&logits, &data.labels)?;
    if !loss.is_finite() {
        return Err(Error::Diverged {
            epoch,
            detail: format!("training loss is {loss}"),
        });
    }
    Ok(EpochStats {
        epoch,
        loss,
        accuracy: accuracy(&logits, &data.labels)?,
    })
}

fn snapshot(
    net: &DenseNetwork,
    probe: ArrayView2<'_, f64>,
    labels: &[usize],
    epoch: usize,
) -> Result<GradientSnapshot> {
    let grads = net.backward(&net.forward(probe)?, labels)?;
    Ok(GradientSnapshot {
        epoch,
        weight_grad_variance: grads
            .weights
            .iter()
            .map(|g| population_variance(g.iter().copied()))
            .collect(),
    })
}

/// Trains a freshly initialized network and reports per-epoch statistics.
///
/// The initialization seed and the data order are both derived from
/// `config.seed`, so two schemes trained with the same config see identical
/// minibatches.
pub fn train(
    spec: &NetworkSpec,
    scheme: &InitScheme,
    data: &Dataset,
    config: &TrainConfig,
) -> Result<TrainReport> {
    if config.epochs == 0 {
        return Err(invalid("epochs must be positive"));
    }
    if !(config.lr.is_finite() && config.lr > 0.0) {
        return Err(invalid(format!("learning rate must be positive, got {}", config.lr)));
    }
    if config.batch_size == 0 || config.probe_size == 0 {
        return Err(invalid("batch size and probe size must be positive"));
    }
    if data.is_empty() {
        return Err(invalid("dataset is empty"));
    }
    if spec.input_dim != data.dims() {
        return Err(invalid(format!(
            "network input {} does not match {} data features",
            spec.input_dim,
            data.dims()
        )));
    }
    let outputs = spec.width(spec.depth());
    if outputs < data.num_classes {
        return Err(invalid(format!(
            "{outputs} output units for {} classes",
            data.num_classes
        )));
    }

    let plan = build_plan(spec, scheme)?;
    let mut net = init_network(spec, &plan, derive_seed(config.seed, 0))?;
    let mut order_rng = stream_rng(config.seed, 1);

    let probe_n = config.probe_size.min(data.len());
    let probe = data.features.slice(ndarray::s![..probe_n, ..]);
    let probe_labels = &data.labels[..probe_n];
    let mid = config.epochs / 2;

    let initial = evaluate(&net, data, 0)?;
    let mut gradient_snapshots = vec![snapshot(&net, probe, probe_labels, 0)?];
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut order_rng);
        for chunk in order.chunks(config.batch_size) {
            let batch = data.features.select(Axis(0), chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
            let acts = net.forward(batch.view())?;
            let grads = net.backward(&acts, &labels)?;
            if grads
                .weights
                .iter()
                .any(|g| g.iter().any(|v| !v.is_finite()))
            {
                return Err(Error::Diverged {
                    epoch,
                    detail: "non-finite weight gradient".into(),
                });
            }
            net.sgd_step(&grads, config.lr)?;
        }
        epochs.push(evaluate(&net, data, epoch)?);
        if (epoch == mid && mid > 0) || epoch == config.epochs {
            gradient_snapshots.push(snapshot(&net, probe, probe_labels, epoch)?);
        }
    }

    Ok(TrainReport {
        scheme: *scheme,
        spec: spec.clone(),
        config: *config,
        data: data.source.clone(),
        solved_k: plan.solved_k.map(|s| s.k),
        initial,
        epochs,
        gradient_snapshots,
        final_weight_variance: net.weight_variances(),
    })
}
