use ndarray::ArrayView2;

use super::{loss_softmax_ce, DenseNetwork};
use crate::error::{invalid, Result};

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `max |analytic - numeric| / max(|analytic|, |numeric|, GRAD_FLOOR)`
    /// over the compared parameters.
    pub max_rel_error: f64,
    pub compared: usize,
    /// Parameters whose stencil flips some ReLU on or off. The loss is not
    /// differentiable across such a stencil, so they are not compared.
    pub kinks: usize,
}

/// Gradient magnitude below which errors are measured absolutely. A zero
/// gradient has no relative error; the stencil still returns roundoff.
pub const GRAD_FLOOR: f64 = 1e-6;

/// Max relative error between backpropagated and finite-difference
/// gradients over every weight and bias.
pub fn gradcheck_finite_diff(
    net: &DenseNetwork,
    batch: ArrayView2<'_, f64>,
    labels: &[usize],
    epsilon: f64,
) -> Result<f64> {
    gradcheck(net, batch, labels, epsilon).map(|c| c.max_rel_error)
}

/// Finite differences use the fourth-order stencil
/// `(8 (f(+e) - f(-e)) - (f(+2e) - f(-2e))) / 12e`.
pub fn gradcheck(
    net: &DenseNetwork,
    batch: ArrayView2<'_, f64>,
    labels: &[usize],
    epsilon: f64,
) -> Result<GradCheck> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let acts = net.forward(batch)?;
    let grads = net.backward(&acts, labels)?;

    // loss and ReLU on/off pattern of the hidden layers
    let evaluate = |probe: &DenseNetwork| -> Result<(f64, Vec<bool>)> {
        let acts = probe.forward(batch)?;
        let hidden = &acts.pre[..acts.pre.len() - 1];
        let pattern = hidden.iter().flat_map(|y| y.iter().map(|&v| v > 0.0)).collect();
        Ok((loss_softmax_ce(acts.logits(), labels)?, pattern))
    };
    let (_, base_pattern) = evaluate(net)?;

    let mut probe = net.clone();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        compared: 0,
        kinks: 0,
    };
    let mut compare = |probe: &mut DenseNetwork,
                       set: &dyn Fn(&mut DenseNetwork, f64),
                       orig: f64,
                       analytic: f64|
     -> Result<()> {
        let mut at = |offset: f64| -> Result<Option<f64>> {
            set(probe, orig + offset);
            let (loss, pattern) = evaluate(probe)?;
            Ok((pattern == base_pattern).then_some(loss))
        };
        let points = [at(epsilon)?, at(-epsilon)?, at(2.0 * epsilon)?, at(-2.0 * epsilon)?];
        set(probe, orig);
        let [Some(p1), Some(m1), Some(p2), Some(m2)] = points else {
            out.kinks += 1;
            return Ok(());
        };
        let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * epsilon);
        let denom = analytic.abs().max(numeric.abs()).max(GRAD_FLOOR);
        out.max_rel_error = out.max_rel_error.max((analytic - numeric).abs() / denom);
        out.compared += 1;
        Ok(())
    };

    for l in 0..net.depth() {
        let (rows, cols) = net.weights[l].dim();
        for r in 0..rows {
            for c in 0..cols {
                let orig = net.weights[l][[r, c]];
                compare(
                    &mut probe,
                    &|p, v| p.weights[l][[r, c]] = v,
                    orig,
                    grads.weights[l][[r, c]],
                )?;
            }
        }
        for i in 0..net.biases[l].len() {
            let orig = net.biases[l][i];
            compare(&mut probe, &|p, v| p.biases[l][i] = v, orig, grads.biases[l][i])?;
        }
    }
    Ok(out)
}
