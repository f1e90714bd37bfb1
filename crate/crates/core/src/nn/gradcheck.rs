//! Central finite-difference gradient checking.
//!
//! Only the scalar loss is evaluated here, never the analytic backward pass,
//! so the comparison is independent of the code under test.

use rand::Rng;

use super::params::Parameters;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Denominator floor of the relative error, so coordinates whose true
/// gradient is zero are compared at the finite-difference noise level.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct CoordinateCheck {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub coordinates: Vec<CoordinateCheck>,
}

impl GradCheckReport {
    pub fn checked(&self) -> usize {
        self.coordinates.len()
    }

    pub fn max_relative_error(&self) -> f64 {
        self.coordinates.iter().map(|c| c.relative_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&CoordinateCheck> {
        self.coordinates
            .iter()
            .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
    }

    /// Coordinates whose gradient is well above the noise floor.
    pub fn nontrivial(&self) -> usize {
        self.coordinates
            .iter()
            .filter(|c| c.analytic.abs().max(c.numeric.abs()) > 10.0 * RELATIVE_ERROR_FLOOR)
            .count()
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Compares `analytic` against central differences of `loss` at roughly
/// `coordinates` randomly drawn positions, spread evenly over every tensor.
pub fn check_gradients<P, R>(
    params: &P,
    analytic: &P,
    loss: impl Fn(&P) -> f64,
    coordinates: usize,
    step: f64,
    rng: &mut R,
) -> GradCheckReport
where
    P: Parameters + Clone,
    R: Rng + ?Sized,
{
    let layout: Vec<(String, usize)> = params
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.values.len()))
        .collect();
    let grads: Vec<Vec<f64>> = analytic.params().iter().map(|p| p.values.to_vec()).collect();
    let per_tensor = coordinates.div_ceil(layout.len().max(1));

    let mut probe = params.clone();
    let mut report = GradCheckReport::default();
    for (t, (name, len)) in layout.iter().enumerate() {
        let picks: Vec<usize> = if *len <= per_tensor {
            (0..*len).collect()
        } else {
            (0..per_tensor).map(|_| rng.gen_range(0..*len)).collect()
        };
        for idx in picks {
            let original = params.params()[t].values[idx];
            set_coordinate(&mut probe, t, idx, original + step);
            let plus = loss(&probe);
            set_coordinate(&mut probe, t, idx, original - step);
            let minus = loss(&probe);
            set_coordinate(&mut probe, t, idx, original);
            let numeric = (plus - minus) / (2.0 * step);
            let a = grads[t][idx];
            report.coordinates.push(CoordinateCheck {
                param: name.clone(),
                index: idx,
                analytic: a,
                numeric,
                relative_error: relative_error(a, numeric),
            });
        }
    }
    report
}

fn set_coordinate<P: Parameters>(p: &mut P, tensor: usize, index: usize, value: f64) {
    p.params_mut()[tensor].values[index] = value;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{DenseLayerParams, Matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_layer_squared_loss_has_zero_gradient() {
        let layer = DenseLayerParams::zeros(2, 3);
        let x = [0.3, -0.7, 1.1];
        let loss = |l: &DenseLayerParams| {
            let y = crate::nn::dense_forward(l, &x).unwrap();
            0.5 * y.iter().map(|v| v * v).sum::<f64>()
        };
        // analytic: dW = y xᵀ = 0, db = y = 0
        let grads = layer.zeros_like();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let report = check_gradients(&layer, &grads, loss, 8, DEFAULT_STEP, &mut rng);
        assert_eq!(report.checked(), 6); // 4 sampled weights + both biases
        assert!(report.max_relative_error() < 1e-4);
        assert!(report.coordinates.iter().all(|c| c.numeric.abs() < 1e-9));
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let layer = DenseLayerParams::new(Matrix::from_vec(1, 1, vec![2.0]).unwrap(), vec![0.0].into()).unwrap();
        let loss = |l: &DenseLayerParams| l.weights.get(0, 0).powi(2);
        let mut wrong = layer.zeros_like();
        wrong.weights.set(0, 0, 3.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let report = check_gradients(&layer, &wrong, loss, 2, DEFAULT_STEP, &mut rng);
        assert!(report.max_relative_error() > 0.2);
    }
}
