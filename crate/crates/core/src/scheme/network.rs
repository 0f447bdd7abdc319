use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

/// Shape of a fully connected network.
///
/// `layer_widths[l - 1]` is the number of units of layer `l`; the last entry is
/// the output layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub layer_widths: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, layer_widths: Vec<usize>) -> Result<Self> {
        let spec = Self {
            input_dim,
            layer_widths,
            activation: Activation::Relu,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `layers` layers of `width` units fed by a `width`-dimensional input.
    pub fn uniform(width: usize, layers: usize) -> Result<Self> {
        Self::new(width, vec![width; layers])
    }

    /// `layers - 1` hidden layers of `width` units followed by a
    /// `classes`-unit output layer.
    pub fn classifier(input_dim: usize, width: usize, layers: usize, classes: usize) -> Result<Self> {
        if layers < 2 {
            return Err(invalid(format!("need at least 2 layers, got {layers}")));
        }
        let mut widths = vec![width; layers - 1];
        widths.push(classes);
        Self::new(input_dim, widths)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(invalid(format!(
                "network needs at least 2 layers, got {}",
                self.layer_widths.len()
            )));
        }
        if self.input_dim == 0 {
            return Err(invalid("input_dim must be positive"));
        }
        if let Some(pos) = self.layer_widths.iter().position(|&w| w == 0) {
            return Err(invalid(format!("layer {} has zero width", pos + 1)));
        }
        Ok(())
    }

    /// Number of layers `L`.
    pub fn depth(&self) -> usize {
        self.layer_widths.len()
    }

    pub fn width(&self, layer: usize) -> usize {
        self.layer_widths[layer - 1]
    }

    /// Inputs feeding each unit of `layer` (`n_l`).
    pub fn fan_in(&self, layer: usize) -> usize {
        if layer == 1 {
            self.input_dim
        } else {
            self.layer_widths[layer - 2]
        }
    }

    /// Units receiving the gradient of `layer`'s input (`n̂_l`), i.e. the
    /// number of rows of that layer's weight matrix.
    pub fn fan_out(&self, layer: usize) -> usize {
        self.layer_widths[layer - 1]
    }

    /// The common fan of layers `2..=L` under `mode`, if all are equal.
    pub(crate) fn common_scaled_fan(&self, mode: super::FanMode) -> Option<usize> {
        let fan = |l| match mode {
            super::FanMode::FanIn => self.fan_in(l),
            super::FanMode::FanOut => self.fan_out(l),
        };
        let first = fan(2);
        (3..=self.depth()).all(|l| fan(l) == first).then_some(first)
    }

    /// Number of trainable parameters.
    pub fn parameter_count(&self) -> usize {
        (1..=self.depth())
            .map(|l| self.fan_in(l) * self.width(l) + self.width(l))
            .sum()
    }
}
