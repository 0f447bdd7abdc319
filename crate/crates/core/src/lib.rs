//! Depth-aware variance-scaling initialization for deep fully connected ReLU
//! networks.
//!
//! The crate is organised bottom-up:
//!
//! * [`scheme`] computes per-layer weight variances. Besides Glorot and He it
//!   provides a constant per-layer scale and the depth-wise logarithmic scale
//!   `beta_l = alpha^(log_(l+c)(K) - 1)`, together with a solver that picks `K`
//!   so that the network's total variance gain equals a requested target.
//! * [`nn`] is a small dense ReLU network with exact backpropagation, SGD and a
//!   finite-difference gradient check.
//! * [`analyzer`] predicts per-layer activation and gradient variance from a
//!   plan and measures it by Monte Carlo.
//! * [`data`] provides a synthetic blob generator and a CIFAR-10 binary loader.
//! * [`train`] runs seeded SGD and produces a [`train::TrainReport`].

pub mod analyzer;
pub mod data;
mod error;
pub mod nn;
pub mod rng;
pub mod scheme;
pub mod train;

pub use error::{Error, Result};
pub use scheme::{
    base_variance, beta, build_plan, gain_product, log_inverse_sum, sample_matrix, solve_k,
    Activation, BaseMode, Direction, Distribution, FanMode, InitScheme, KSolution, KSource,
    LayerInit, LayerInitPlan, NetworkSpec, Propagation,
};
