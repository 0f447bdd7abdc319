//! Initialization schemes and per-layer variance planning.
//!
//! Layers are numbered `1..=L` throughout, matching the way the variance
//! recursions are usually written: layer 1 consumes the raw input and layer `L`
//! produces the logits. Vectors indexed by layer store layer `l` at `l - 1`.

mod depthwise;
mod network;
pub(crate) mod plan;
mod sample;

pub use depthwise::{beta, log_inverse_sum, shifted_log_inverse_sum, solve_k, KSolution};
pub use network::{Activation, NetworkSpec};
pub use plan::{
    base_variance, build_plan, gain_product, BaseMode, Direction, Distribution,
    DistributionParams, FanMode, InitScheme, KSource, LayerInit, LayerInitPlan, Propagation,
};
pub use sample::sample_matrix;
