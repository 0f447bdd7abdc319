use serde::{Deserialize, Serialize};

use super::depthwise::{beta, KSolution};
use super::network::NetworkSpec;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Normal,
    Uniform,
}

/// Which fan the He base variance `2/fan` is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FanMode {
    /// `2/n_l`: unit gain in the forward direction.
    FanIn,
    /// `2/n̂_l`: unit gain in the backward direction.
    #[default]
    FanOut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KSource {
    Explicit(f64),
    /// Solve `K` so the total gain equals this target variance.
    SolveFromV(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitScheme {
    Glorot {
        distribution: Distribution,
    },
    He {
        distribution: Distribution,
        #[serde(default)]
        fan_mode: FanMode,
    },
    /// Every layer past the first is scaled by `V^(1/(L-1))`.
    ConstantScaled {
        target_variance: f64,
        distribution: Distribution,
        #[serde(default)]
        fan_mode: FanMode,
    },
    DepthwiseLog {
        k_source: KSource,
        #[serde(default)]
        shift: u32,
        direction: Direction,
        distribution: Distribution,
        #[serde(default)]
        fan_mode: FanMode,
    },
}

impl InitScheme {
    pub fn distribution(&self) -> Distribution {
        match *self {
            Self::Glorot { distribution }
            | Self::He { distribution, .. }
            | Self::ConstantScaled { distribution, .. }
            | Self::DepthwiseLog { distribution, .. } => distribution,
        }
    }

    /// Short human-readable tag, e.g. `depthwise-inc(V=22)/normal`.
    pub fn label(&self) -> String {
        let dist = match self.distribution() {
            Distribution::Normal => "normal",
            Distribution::Uniform => "uniform",
        };
        let head = match *self {
            Self::Glorot { .. } => "glorot".to_string(),
            Self::He { .. } => "he".to_string(),
            Self::ConstantScaled {
                target_variance, ..
            } => format!("const(V={target_variance})"),
            Self::DepthwiseLog {
                k_source,
                shift,
                direction,
                ..
            } => {
                let dir = match direction {
                    Direction::Increasing => "inc",
                    Direction::Decreasing => "dec",
                };
                let k = match k_source {
                    KSource::Explicit(k) => format!("K={k}"),
                    KSource::SolveFromV(v) => format!("V={v}"),
                };
                if shift == 0 {
                    format!("depthwise-{dir}({k})")
                } else {
                    format!("depthwise-{dir}({k},c={shift})")
                }
            }
        };
        format!("{head}/{dist}")
    }
}

/// Base-variance rule for [`base_variance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseMode {
    HeFanIn,
    HeFanOut,
    Glorot,
}

impl From<FanMode> for BaseMode {
    fn from(mode: FanMode) -> Self {
        match mode {
            FanMode::FanIn => Self::HeFanIn,
            FanMode::FanOut => Self::HeFanOut,
        }
    }
}

pub fn base_variance(fan_in: usize, fan_out: usize, mode: BaseMode) -> Result<f64> {
    if fan_in == 0 || fan_out == 0 {
        return Err(invalid(format!(
            "fan counts must be positive, got fan_in={fan_in} fan_out={fan_out}"
        )));
    }
    Ok(match mode {
        BaseMode::HeFanIn => 2.0 / fan_in as f64,
        BaseMode::HeFanOut => 2.0 / fan_out as f64,
        BaseMode::Glorot => 2.0 / (fan_in + fan_out) as f64,
    })
}

/// Parameters of the zero-mean distribution realizing a layer's variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionParams {
    Normal { std: f64 },
    Uniform { half_width: f64 },
}

impl DistributionParams {
    pub fn for_variance(distribution: Distribution, variance: f64) -> Self {
        match distribution {
            Distribution::Normal => Self::Normal {
                std: variance.sqrt(),
            },
            Distribution::Uniform => Self::Uniform {
                half_width: (3.0 * variance).sqrt(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerInit {
    pub layer: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Always `alpha * beta`.
    pub weight_variance: f64,
    pub params: DistributionParams,
}

impl LayerInit {
    fn new(layer: usize, alpha: f64, beta: f64, distribution: Distribution) -> Self {
        let weight_variance = alpha * beta;
        Self {
            layer,
            alpha,
            beta,
            weight_variance,
            params: DistributionParams::for_variance(distribution, weight_variance),
        }
    }
}

/// Per-layer variances for one network under one scheme. Biases are always
/// initialized to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerInitPlan {
    pub scheme: InitScheme,
    pub layers: Vec<LayerInit>,
    /// Present when `K` was solved from a target variance.
    pub solved_k: Option<KSolution>,
}

impl LayerInitPlan {
    pub fn distribution(&self) -> Distribution {
        self.scheme.distribution()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn weight_variances(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.weight_variance).collect()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.beta).collect()
    }

    /// Same scheme, every weight variance replaced by `variance`.
    pub fn with_constant_variance(&self, variance: f64) -> Self {
        let dist = self.distribution();
        let layers = self
            .layers
            .iter()
            .map(|l| LayerInit {
                layer: l.layer,
                alpha: l.alpha,
                beta: if l.alpha > 0.0 { variance / l.alpha } else { 0.0 },
                weight_variance: variance,
                params: DistributionParams::for_variance(dist, variance),
            })
            .collect();
        Self {
            scheme: self.scheme,
            layers,
            solved_k: self.solved_k,
        }
    }

    pub(crate) fn check_matches(&self, spec: &NetworkSpec) -> Result<()> {
        if self.layers.len() != spec.depth() {
            return Err(invalid(format!(
                "plan has {} layers but network has {}",
                self.layers.len(),
                spec.depth()
            )));
        }
        Ok(())
    }
}

pub fn build_plan(spec: &NetworkSpec, scheme: &InitScheme) -> Result<LayerInitPlan> {
    spec.validate()?;
    let depth = spec.depth();
    let fan_alpha = |mode: FanMode| -> Result<Vec<f64>> {
        (1..=depth)
            .map(|l| base_variance(spec.fan_in(l), spec.fan_out(l), mode.into()))
            .collect()
    };

    let (alphas, betas, solved_k) = match *scheme {
        InitScheme::Glorot { .. } => {
            let alphas = (1..=depth)
                .map(|l| base_variance(spec.fan_in(l), spec.fan_out(l), BaseMode::Glorot))
                .collect::<Result<Vec<_>>>()?;
            (alphas, vec![1.0; depth], None)
        }
        InitScheme::He { fan_mode, .. } => (fan_alpha(fan_mode)?, vec![1.0; depth], None),
        InitScheme::ConstantScaled {
            target_variance,
            fan_mode,
            ..
        } => {
            if !(target_variance.is_finite() && target_variance > 0.0) {
                return Err(invalid(format!(
                    "target variance must be a finite positive real, got {target_variance}"
                )));
            }
            let scale = target_variance.powf(1.0 / (depth - 1) as f64);
            let mut betas = vec![scale; depth];
            betas[0] = 1.0;
            (fan_alpha(fan_mode)?, betas, None)
        }
        InitScheme::DepthwiseLog {
            k_source,
            shift,
            direction,
            fan_mode,
            ..
        } => {
            let alphas = fan_alpha(fan_mode)?;
            let (k, solved) = match k_source {
                KSource::Explicit(k) => (k, None),
                KSource::SolveFromV(v) => {
                    let width = spec.common_scaled_fan(fan_mode).ok_or_else(|| {
                        Error::Unsupported(format!(
                            "solving K needs equal {} across layers 2..={depth}; supply K explicitly",
                            match fan_mode {
                                FanMode::FanIn => "fan-in",
                                FanMode::FanOut => "fan-out",
                            }
                        ))
                    })?;
                    let solution = KSolution::new(depth, width, v, shift)?;
                    (solution.k, Some(solution))
                }
            };
            let mut betas = vec![1.0; depth];
            for l in 2..=depth {
                let alpha = alphas[l - 1];
                if alpha >= 1.0 {
                    return Err(Error::Unsupported(format!(
                        "layer {l} has base variance {alpha} >= 1; depth-wise scaling needs fan >= 3"
                    )));
                }
                betas[l - 1] = beta(l, k, alpha, shift)?;
            }
            if direction == Direction::Decreasing {
                betas[1..].reverse();
            }
            (alphas, betas, solved)
        }
    };

    let distribution = scheme.distribution();
    let layers = alphas
        .iter()
        .zip(&betas)
        .enumerate()
        .map(|(i, (&a, &b))| LayerInit::new(i + 1, a, b, distribution))
        .collect();
    Ok(LayerInitPlan {
        scheme: *scheme,
        layers,
        solved_k,
    })
}

/// Direction of signal flow for [`gain_product`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    Forward,
    Backward,
}

/// Per-layer gain `(1/2) * fan * Var[w_l]` with fan `n_l` (forward) or `n̂_l`
/// (backward).
pub(crate) fn layer_gain(
    plan: &LayerInitPlan,
    spec: &NetworkSpec,
    layer: usize,
    direction: Propagation,
) -> f64 {
    let fan = match direction {
        Propagation::Forward => spec.fan_in(layer),
        Propagation::Backward => spec.fan_out(layer),
    };
    0.5 * fan as f64 * plan.layers[layer - 1].weight_variance
}

/// Total variance gain over layers `2..=L`.
pub fn gain_product(plan: &LayerInitPlan, spec: &NetworkSpec, direction: Propagation) -> Result<f64> {
    plan.check_matches(spec)?;
    Ok((2..=spec.depth())
        .map(|l| layer_gain(plan, spec, l, direction))
        .product())
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;
    use crate::scheme::log_inverse_sum;

    fn depthwise(v: f64, direction: Direction) -> InitScheme {
        InitScheme::DepthwiseLog {
            k_source: KSource::SolveFromV(v),
            shift: 0,
            direction,
            distribution: Distribution::Normal,
            fan_mode: FanMode::FanOut,
        }
    }

    fn he() -> InitScheme {
        InitScheme::He {
            distribution: Distribution::Normal,
            fan_mode: FanMode::FanIn,
        }
    }

    #[test]
    fn base_variance_examples() {
        assert_eq!(base_variance(64, 64, BaseMode::HeFanIn).unwrap(), 0.03125);
        assert_eq!(base_variance(64, 64, BaseMode::Glorot).unwrap(), 0.015625);
        assert_eq!(base_variance(2, 8, BaseMode::HeFanIn).unwrap(), 1.0);
        assert_eq!(base_variance(2, 8, BaseMode::HeFanOut).unwrap(), 0.25);
        assert!(base_variance(0, 8, BaseMode::HeFanIn).is_err());
        assert!(base_variance(8, 0, BaseMode::Glorot).is_err());
    }

    #[test]
    fn he_plan_is_unscaled() {
        let spec = NetworkSpec::uniform(64, 10).unwrap();
        let plan = build_plan(&spec, &he()).unwrap();
        for layer in &plan.layers {
            assert_eq!(layer.beta, 1.0);
            assert_eq!(layer.weight_variance, 0.03125);
        }
        assert_eq!(gain_product(&plan, &spec, Propagation::Forward).unwrap(), 1.0);
        assert_eq!(gain_product(&plan, &spec, Propagation::Backward).unwrap(), 1.0);
    }

    #[test]
    fn two_layer_he_single_factor() {
        let spec = NetworkSpec::uniform(16, 2).unwrap();
        let plan = build_plan(&spec, &he()).unwrap();
        assert_eq!(gain_product(&plan, &spec, Propagation::Forward).unwrap(), 1.0);
    }

    #[test]
    fn constant_scaled_matches_root() {
        let spec = NetworkSpec::uniform(64, 54).unwrap();
        let scheme = InitScheme::ConstantScaled {
            target_variance: 22.0,
            distribution: Distribution::Uniform,
            fan_mode: FanMode::FanOut,
        };
        let plan = build_plan(&spec, &scheme).unwrap();
        let expected = (22f64.ln() / 53.0).exp();
        assert_eq!(plan.layers[0].beta, 1.0);
        for layer in &plan.layers[1..] {
            assert_relative_eq!(layer.beta, expected, max_relative = 1e-14);
        }
        let product: f64 = std::iter::repeat_n(expected, 53).product();
        assert_relative_eq!(product, 22.0, max_relative = 1e-12);
        assert_relative_eq!(
            gain_product(&plan, &spec, Propagation::Backward).unwrap(),
            22.0,
            max_relative = 1e-9
        );
    }

    #[test]
    fn increasing_plan_hits_target() {
        let spec = NetworkSpec::uniform(64, 54).unwrap();
        let plan = build_plan(&spec, &depthwise(22.0, Direction::Increasing)).unwrap();
        let betas = plan.betas();
        assert_eq!(betas[0], 1.0);
        assert!(betas[1..].windows(2).all(|w| w[0] < w[1]));
        // independent product over the 53 scaled layers
        let direct: f64 = plan.layers[1..]
            .iter()
            .map(|l| 0.5 * 64.0 * l.alpha * l.beta)
            .product();
        assert_relative_eq!(direct, 22.0, max_relative = 1e-9);
        let solved = plan.solved_k.unwrap();
        assert_relative_eq!(
            solved.log_inverse_sum,
            log_inverse_sum(54).unwrap(),
            max_relative = 1e-15
        );
        for layer in &plan.layers {
            assert_eq!(layer.weight_variance, layer.alpha * layer.beta);
        }
    }

    #[test]
    fn decreasing_plan_reverses_betas() {
        let spec = NetworkSpec::uniform(64, 12).unwrap();
        let inc = build_plan(&spec, &depthwise(3.0, Direction::Increasing)).unwrap();
        let dec = build_plan(&spec, &depthwise(3.0, Direction::Decreasing)).unwrap();
        let mut reversed = inc.betas()[1..].to_vec();
        reversed.reverse();
        assert_eq!(&dec.betas()[1..], reversed.as_slice());
        assert_eq!(dec.layers[0].beta, 1.0);
        assert_relative_eq!(
            gain_product(&inc, &spec, Propagation::Forward).unwrap(),
            gain_product(&dec, &spec, Propagation::Forward).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn solve_requires_uniform_fans() {
        let spec = NetworkSpec::new(8, vec![8, 16, 8, 8]).unwrap();
        let err = build_plan(&spec, &depthwise(2.0, Direction::Increasing)).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));

        let explicit = InitScheme::DepthwiseLog {
            k_source: KSource::Explicit(3.0),
            shift: 0,
            direction: Direction::Increasing,
            distribution: Distribution::Normal,
            fan_mode: FanMode::FanOut,
        };
        let plan = build_plan(&spec, &explicit).unwrap();
        assert_eq!(plan.layers[2].beta, 1.0);
        assert!(plan.solved_k.is_none());
    }

    #[test]
    fn classifier_head_solves_with_fan_in() {
        let spec = NetworkSpec::classifier(32, 64, 54, 10).unwrap();
        let scheme = InitScheme::DepthwiseLog {
            k_source: KSource::SolveFromV(22.0),
            shift: 0,
            direction: Direction::Increasing,
            distribution: Distribution::Normal,
            fan_mode: FanMode::FanIn,
        };
        let plan = build_plan(&spec, &scheme).unwrap();
        assert_relative_eq!(
            gain_product(&plan, &spec, Propagation::Forward).unwrap(),
            22.0,
            max_relative = 1e-9
        );
        assert!(build_plan(&spec, &depthwise(22.0, Direction::Increasing)).is_err());
    }

    #[test]
    fn distribution_params_realize_variance() {
        let p = DistributionParams::for_variance(Distribution::Uniform, 0.03125);
        match p {
            DistributionParams::Uniform { half_width } => {
                assert_relative_eq!(half_width, 0.306186, epsilon = 1e-6);
                assert_relative_eq!(half_width * half_width / 3.0, 0.03125, max_relative = 1e-15);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn gain_product_rejects_mismatch() {
        let spec = NetworkSpec::uniform(8, 4).unwrap();
        let plan = build_plan(&spec, &he()).unwrap();
        let other = NetworkSpec::uniform(8, 5).unwrap();
        assert!(gain_product(&plan, &other, Propagation::Forward).is_err());
    }

    #[test]
    fn scheme_round_trips_through_json() {
        let scheme = depthwise(22.0, Direction::Decreasing);
        let text = serde_json::to_string(&scheme).unwrap();
        assert_eq!(serde_json::from_str::<InitScheme>(&text).unwrap(), scheme);
        assert_eq!(scheme.label(), "depthwise-dec(V=22)/normal");
    }
}
