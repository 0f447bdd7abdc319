//! Theoretical and Monte Carlo per-layer variance profiles.
//!
//! For a ReLU network with zero-mean independent weights the forward
//! pre-activation variance obeys `Var[y_l] = (1/2) n_l Var[w_l] Var[y_{l-1}]`
//! and the backward input-gradient variance obeys
//! `Var[Δx_l] = (1/2) n̂_l Var[w_l] Var[Δx_{l+1}]`. The theoretical profile
//! stores the running products of those per-layer gains; the empirical
//! profile measures the same quantities on freshly initialized networks.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::nn::{init_network, population_variance};
use crate::rng::{derive_seed, stream_rng};
use crate::scheme::plan::layer_gain;
use crate::scheme::{
    build_plan, sample_matrix, Distribution, InitScheme, LayerInitPlan, NetworkSpec, Propagation,
};

/// Measured variances below this are reported as dead signal.
pub const DEAD_SIGNAL_THRESHOLD: f64 = 1e-30;

/// Column order of [`VarianceProfile::to_csv`].
pub const CSV_COLUMNS: [&str; 7] = [
    "layer",
    "theo_fwd",
    "theo_bwd",
    "emp_act_var",
    "emp_grad_var",
    "rel_err_fwd",
    "rel_err_bwd",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputDistribution {
    /// Zero-mean unit-variance Gaussian inputs.
    #[default]
    StandardNormal,
    /// Inputs uniform on `[0, 1]`, like pixel data scaled by 1/255.
    ZeroOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerVariance {
    pub layer: usize,
    /// Predicted `Var[y_l] / Var[y_1]`.
    pub theoretical_forward_ratio: f64,
    /// `prod_{j=l..L} (1/2) n̂_j Var[w_j]`.
    pub theoretical_backward_ratio: f64,
    /// Measured `Var[y_l]`.
    pub empirical_act_var: Option<f64>,
    /// Measured `Var[Δx_l]`.
    pub empirical_grad_var: Option<f64>,
    /// Fraction of exact zeros after the ReLU; hidden layers only.
    pub empirical_zero_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileMeta {
    pub spec: NetworkSpec,
    pub scheme: InitScheme,
    pub trials: Option<usize>,
    pub batch: Option<usize>,
    pub seed: Option<u64>,
    pub input: Option<InputDistribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceProfile {
    pub layers: Vec<LayerVariance>,
    pub meta: ProfileMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    pub trials: usize,
    pub batch: usize,
    pub seed: u64,
    pub input: InputDistribution,
}

pub fn theoretical_profile(spec: &NetworkSpec, plan: &LayerInitPlan) -> Result<VarianceProfile> {
    spec.validate()?;
    plan.check_matches(spec)?;
    let depth = spec.depth();

    let mut forward = Vec::with_capacity(depth);
    let mut running = 1.0;
    for l in 1..=depth {
        if l >= 2 {
            running *= layer_gain(plan, spec, l, Propagation::Forward);
        }
        forward.push(running);
    }

    let mut backward = vec![1.0; depth];
    let mut running = 1.0;
    for l in (1..=depth).rev() {
        running *= layer_gain(plan, spec, l, Propagation::Backward);
        backward[l - 1] = running;
    }

    let layers = (1..=depth)
        .map(|l| LayerVariance {
            layer: l,
            theoretical_forward_ratio: forward[l - 1],
            theoretical_backward_ratio: backward[l - 1],
            empirical_act_var: None,
            empirical_grad_var: None,
            empirical_zero_fraction: None,
        })
        .collect();
    Ok(VarianceProfile {
        layers,
        meta: ProfileMeta {
            spec: spec.clone(),
            scheme: plan.scheme,
            trials: None,
            batch: None,
            seed: None,
            input: None,
        },
    })
}

struct TrialStats {
    act: Vec<f64>,
    grad: Vec<f64>,
    zero: Vec<f64>,
}

fn run_trial(
    spec: &NetworkSpec,
    plan: &LayerInitPlan,
    options: &ProfileOptions,
    trial: usize,
) -> Result<TrialStats> {
    let seed = derive_seed(options.seed, trial as u64);
    let net = init_network(spec, plan, seed)?;
    let mut rng = stream_rng(seed, 1);
    let batch = match options.input {
        InputDistribution::StandardNormal => sample_matrix(
            &mut rng,
            options.batch,
            spec.input_dim,
            1.0,
            Distribution::Normal,
        )?,
        InputDistribution::ZeroOne => {
            // U[-1/2, 1/2] has variance 1/12
            sample_matrix(
                &mut rng,
                options.batch,
                spec.input_dim,
                1.0 / 12.0,
                Distribution::Uniform,
            )?
            .mapv(|v| v + 0.5)
        }
    };
    let acts = net.forward(batch.view())?;
    let out_width = spec.width(spec.depth());
    let output_grad: Array2<f64> =
        sample_matrix(&mut rng, options.batch, out_width, 1.0, Distribution::Normal)?;
    let grads = net.backward_from(&acts, output_grad)?;

    let act = acts.pre.iter().map(|y| population_variance(y.iter().copied())).collect();
    let grad = grads
        .input_grads
        .iter()
        .map(|g| population_variance(g.iter().copied()))
        .collect();
    let zero = acts.inputs[1..]
        .iter()
        .map(|x| x.iter().filter(|&&v| v == 0.0).count() as f64 / x.len() as f64)
        .collect();
    Ok(TrialStats { act, grad, zero })
}

/// Monte Carlo profile of `scheme` on `spec`, averaged over
/// `options.trials` independently seeded networks.
///
/// Trial `t` uses a seed derived from `(options.seed, t)`, and per-trial
/// results are reduced in trial order, so the output does not depend on how
/// trials are scheduled.
pub fn empirical_profile(
    spec: &NetworkSpec,
    scheme: &InitScheme,
    options: &ProfileOptions,
) -> Result<VarianceProfile> {
    if options.trials == 0 || options.batch == 0 {
        return Err(invalid("trials and batch must be positive"));
    }
    let plan = build_plan(spec, scheme)?;
    empirical_profile_for_plan(spec, &plan, options)
}

pub fn empirical_profile_for_plan(
    spec: &NetworkSpec,
    plan: &LayerInitPlan,
    options: &ProfileOptions,
) -> Result<VarianceProfile> {
    if options.trials == 0 || options.batch == 0 {
        return Err(invalid("trials and batch must be positive"));
    }
    let mut profile = theoretical_profile(spec, plan)?;

    #[cfg(feature = "parallel")]
    let stats: Vec<Result<TrialStats>> = {
        use rayon::prelude::*;
        (0..options.trials)
            .into_par_iter()
            .map(|t| run_trial(spec, plan, options, t))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let stats: Vec<Result<TrialStats>> = (0..options.trials)
        .map(|t| run_trial(spec, plan, options, t))
        .collect();

    let depth = spec.depth();
    let mut act = vec![0.0; depth];
    let mut grad = vec![0.0; depth];
    let mut zero = vec![0.0; depth - 1];
    for trial in stats {
        let trial = trial?;
        for l in 0..depth {
            act[l] += trial.act[l];
            grad[l] += trial.grad[l];
        }
        for (z, t) in zero.iter_mut().zip(&trial.zero) {
            *z += t;
        }
    }
    let n = options.trials as f64;
    for (l, layer) in profile.layers.iter_mut().enumerate() {
        layer.empirical_act_var = Some(act[l] / n);
        layer.empirical_grad_var = Some(grad[l] / n);
        layer.empirical_zero_fraction = zero.get(l).map(|z| z / n);
    }
    profile.meta.trials = Some(options.trials);
    profile.meta.batch = Some(options.batch);
    profile.meta.seed = Some(options.seed);
    profile.meta.input = Some(options.input);
    Ok(profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerComparison {
    pub layer: usize,
    /// `(emp_act_var_l / emp_act_var_1) / theo_fwd_l - 1`.
    pub rel_err_fwd: Option<f64>,
    /// `(emp_grad_var_l / emp_grad_var_L) / (theo_bwd_l / theo_bwd_L) - 1`.
    pub rel_err_bwd: Option<f64>,
    pub dead_activation: bool,
    pub dead_gradient: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileComparison {
    pub layers: Vec<LayerComparison>,
    pub max_abs_rel_err_fwd: Option<f64>,
    pub max_abs_rel_err_bwd: Option<f64>,
    /// Layers whose activation or gradient variance fell below
    /// [`DEAD_SIGNAL_THRESHOLD`].
    pub dead_layers: Vec<usize>,
}

fn relative_error(measured: f64, measured_ref: f64, predicted: f64) -> Option<f64> {
    let ratio = measured / measured_ref;
    let err = ratio / predicted - 1.0;
    err.is_finite().then_some(err)
}

/// Per-layer relative error between measured and predicted variance ratios.
///
/// Ratios are taken against layer 1 (forward) and layer `L` (backward) so the
/// unknown input and output-gradient scales cancel. Errors are `None` where a
/// reference variance is zero.
pub fn compare_profiles(profile: &VarianceProfile) -> Result<ProfileComparison> {
    let layers = &profile.layers;
    if layers.is_empty() {
        return Err(invalid("profile has no layers"));
    }
    let emp = |f: fn(&LayerVariance) -> Option<f64>| -> Result<Vec<f64>> {
        layers
            .iter()
            .map(|l| f(l).ok_or_else(|| invalid(format!("layer {} lacks empirical fields", l.layer))))
            .collect()
    };
    let act = emp(|l| l.empirical_act_var)?;
    let grad = emp(|l| l.empirical_grad_var)?;
    let last = layers.len() - 1;
    let theo_bwd_last = layers[last].theoretical_backward_ratio;

    let mut out = Vec::with_capacity(layers.len());
    let mut dead_layers = Vec::new();
    for (i, layer) in layers.iter().enumerate() {
        let cmp = LayerComparison {
            layer: layer.layer,
            rel_err_fwd: relative_error(act[i], act[0], layer.theoretical_forward_ratio),
            rel_err_bwd: relative_error(
                grad[i],
                grad[last],
                layer.theoretical_backward_ratio / theo_bwd_last,
            ),
            dead_activation: act[i] < DEAD_SIGNAL_THRESHOLD,
            dead_gradient: grad[i] < DEAD_SIGNAL_THRESHOLD,
        };
        if cmp.dead_activation || cmp.dead_gradient {
            dead_layers.push(layer.layer);
        }
        out.push(cmp);
    }
    let max_abs = |f: fn(&LayerComparison) -> Option<f64>| {
        out.iter().filter_map(f).map(f64::abs).reduce(f64::max)
    };
    Ok(ProfileComparison {
        max_abs_rel_err_fwd: max_abs(|c| c.rel_err_fwd),
        max_abs_rel_err_bwd: max_abs(|c| c.rel_err_bwd),
        layers: out,
        dead_layers,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl VarianceProfile {
    pub fn has_empirical(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.empirical_act_var.is_some() && l.empirical_grad_var.is_some())
    }

    /// CSV with the columns of [`CSV_COLUMNS`]; empirical and error cells
    /// are empty for a theoretical-only profile.
    pub fn to_csv(&self) -> String {
        let comparison = if self.has_empirical() {
            compare_profiles(self).ok()
        } else {
            None
        };
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for (i, l) in self.layers.iter().enumerate() {
            let cmp = comparison.as_ref().map(|c| c.layers[i]);
            let row = [
                l.layer.to_string(),
                l.theoretical_forward_ratio.to_string(),
                l.theoretical_backward_ratio.to_string(),
                cell(l.empirical_act_var),
                cell(l.empirical_grad_var),
                cell(cmp.and_then(|c| c.rel_err_fwd)),
                cell(cmp.and_then(|c| c.rel_err_bwd)),
            ];
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}
