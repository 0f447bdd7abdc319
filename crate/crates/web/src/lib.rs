//! wasm-bindgen bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string; errors surface as thrown strings.

use depthscale::analyzer::{empirical_profile, theoretical_profile, InputDistribution, ProfileOptions};
use depthscale::{
    build_plan, Direction, Distribution, FanMode, InitScheme, KSolution, KSource, NetworkSpec,
};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, JsValue> {
    serde_json::to_string(value).map_err(js_err)
}

/// Scheme names as used by the command-line tool.
fn scheme(kind: &str, variance: f64, shift: u32, uniform: bool) -> Result<InitScheme, JsValue> {
    let distribution = if uniform {
        Distribution::Uniform
    } else {
        Distribution::Normal
    };
    let fan_mode = FanMode::FanOut;
    let depthwise = |direction| InitScheme::DepthwiseLog {
        k_source: KSource::SolveFromV(variance),
        shift,
        direction,
        distribution,
        fan_mode,
    };
    Ok(match kind {
        "glorot" => InitScheme::Glorot { distribution },
        "he" => InitScheme::He {
            distribution,
            fan_mode,
        },
        "const" => InitScheme::ConstantScaled {
            target_variance: variance,
            distribution,
            fan_mode,
        },
        "depthwise-inc" => depthwise(Direction::Increasing),
        "depthwise-dec" => depthwise(Direction::Decreasing),
        other => return Err(js_err(format!("unknown scheme `{other}`"))),
    })
}

#[derive(Serialize)]
struct PlanView {
    k: Option<f64>,
    betas: Vec<f64>,
    weight_variances: Vec<f64>,
    forward: Vec<f64>,
    backward: Vec<f64>,
}

/// Per-layer beta, weight variance and theoretical forward/backward ratios
/// of one scheme on a uniform-width network.
#[wasm_bindgen]
pub fn plan(kind: &str, layers: usize, width: usize, variance: f64, shift: u32) -> Result<String, JsValue> {
    let spec = NetworkSpec::uniform(width, layers).map_err(js_err)?;
    let plan = build_plan(&spec, &scheme(kind, variance, shift, false)?).map_err(js_err)?;
    let profile = theoretical_profile(&spec, &plan).map_err(js_err)?;
    to_json(&PlanView {
        k: plan.solved_k.as_ref().map(|s| s.k),
        betas: plan.betas(),
        weight_variances: plan.weight_variances(),
        forward: profile.layers.iter().map(|l| l.theoretical_forward_ratio).collect(),
        backward: profile.layers.iter().map(|l| l.theoretical_backward_ratio).collect(),
    })
}

#[derive(Serialize)]
struct ProfileView {
    theoretical_forward: Vec<f64>,
    empirical_forward: Vec<Option<f64>>,
    theoretical_backward: Vec<f64>,
    empirical_backward: Vec<Option<f64>>,
    zero_fraction: Vec<Option<f64>>,
}

/// Monte Carlo variance profile next to the theoretical one. Empirical
/// values are normalized to layer 1 (forward) and layer L (backward).
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn profile(
    kind: &str,
    layers: usize,
    width: usize,
    variance: f64,
    shift: u32,
    uniform: bool,
    trials: usize,
    batch: usize,
    seed: u32,
) -> Result<String, JsValue> {
    let spec = NetworkSpec::uniform(width, layers).map_err(js_err)?;
    let options = ProfileOptions {
        trials,
        batch,
        seed: seed.into(),
        input: InputDistribution::StandardNormal,
    };
    let p = empirical_profile(&spec, &scheme(kind, variance, shift, uniform)?, &options)
        .map_err(js_err)?;
    let first = p.layers[0].empirical_act_var.unwrap_or(f64::NAN);
    let last_theo = p.layers[layers - 1].theoretical_backward_ratio;
    let last = p.layers[layers - 1].empirical_grad_var.unwrap_or(f64::NAN);
    let finite = |v: f64| v.is_finite().then_some(v);
    to_json(&ProfileView {
        theoretical_forward: p.layers.iter().map(|l| l.theoretical_forward_ratio).collect(),
        empirical_forward: p
            .layers
            .iter()
            .map(|l| l.empirical_act_var.and_then(|v| finite(v / first)))
            .collect(),
        theoretical_backward: p
            .layers
            .iter()
            .map(|l| l.theoretical_backward_ratio / last_theo)
            .collect(),
        empirical_backward: p
            .layers
            .iter()
            .map(|l| l.empirical_grad_var.and_then(|v| finite(v / last)))
            .collect(),
        zero_fraction: p.layers.iter().map(|l| l.empirical_zero_fraction).collect(),
    })
}

#[derive(Serialize)]
struct SweepPoint {
    layers: usize,
    k: Option<f64>,
    s: Option<f64>,
    error: Option<String>,
}

/// Solved K for every depth in `2..=max_layers`.
#[wasm_bindgen]
pub fn solve_k_sweep(width: usize, variance: f64, shift: u32, max_layers: usize) -> Result<String, JsValue> {
    let points: Vec<SweepPoint> = (2..=max_layers.max(2))
        .map(|layers| match KSolution::new(layers, width, variance, shift) {
            Ok(s) => SweepPoint {
                layers,
                k: Some(s.k),
                s: Some(s.log_inverse_sum),
                error: None,
            },
            Err(e) => SweepPoint {
                layers,
                k: None,
                s: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    to_json(&points)
}
