use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution as _, Normal, Uniform};

use super::Distribution;
use crate::error::{invalid, Result};

/// Draws a `rows x cols` matrix of independent zero-mean entries with the
/// given population variance, in row-major order.
pub fn sample_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
    distribution: Distribution,
) -> Result<Array2<f64>> {
    if !(variance.is_finite() && variance >= 0.0) {
        return Err(invalid(format!(
            "variance must be finite and non-negative, got {variance}"
        )));
    }
    if variance == 0.0 {
        return Ok(Array2::zeros((rows, cols)));
    }
    let values: Vec<f64> = match distribution {
        Distribution::Normal => {
            let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| invalid(e.to_string()))?;
            (0..rows * cols).map(|_| normal.sample(rng)).collect()
        }
        Distribution::Uniform => {
            let half_width = (3.0 * variance).sqrt();
            let uniform = Uniform::new_inclusive(-half_width, half_width)
                .map_err(|e| invalid(e.to_string()))?;
            (0..rows * cols).map(|_| uniform.sample(rng)).collect()
        }
    };
    Ok(Array2::from_shape_vec((rows, cols), values).expect("row-major buffer matches shape"))
}
