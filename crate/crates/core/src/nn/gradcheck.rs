//! Finite-difference gradient checking.
//!
//! The probe evaluates a scalar loss at `point +/- epsilon` per coordinate
//! (central differences, f64 accumulation) and compares against the analytic
//! gradient. The loss closure must be deterministic at the probe point:
//! run dropout in eval mode or with a fixed mask.

/// Central-difference gradient of `f` at `point`.
pub fn numeric_gradient(
    mut f: impl FnMut(&[f32]) -> f64,
    point: &[f32],
    epsilon: f32,
) -> Vec<f64> {
    let mut probe = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let orig = probe[i];
        probe[i] = orig + epsilon;
        let plus = f(&probe);
        probe[i] = orig - epsilon;
        let minus = f(&probe);
        probe[i] = orig;
        grad.push((plus - minus) / (2.0 * epsilon as f64));
    }
    grad
}

/// Worst relative disagreement between an analytic gradient and its numeric
/// estimate. Each coordinate is normalized by `max(|analytic|, |numeric|, 1)`
/// so that near-zero gradients are compared absolutely.
pub fn max_relative_error(analytic: &[f32], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| {
            let denom = (a as f64).abs().max(n.abs()).max(1.0);
            ((a as f64) - n).abs() / denom
        })
        .fold(0.0, f64::max)
}

/// Convenience: numeric gradient vs. analytic gradient in one call.
pub fn grad_check(
    f: impl FnMut(&[f32]) -> f64,
    point: &[f32],
    analytic: &[f32],
    epsilon: f32,
) -> f64 {
    let numeric = numeric_gradient(f, point, epsilon);
    max_relative_error(analytic, &numeric)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_checks_out() {
        // f(x) = sum x_i^2, grad = 2x
        let point = [0.5f32, -1.25, 2.0];
        let f = |x: &[f32]| x.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>();
        let analytic: Vec<f32> = point.iter().map(|&v| 2.0 * v).collect();
        let err = grad_check(f, &point, &analytic, 1e-3);
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let point = [1.0f32, 2.0];
        let f = |x: &[f32]| x.iter().map(|&v| v as f64).sum::<f64>();
        let wrong = [1.0f32, 3.0];
        let err = grad_check(f, &point, &wrong, 1e-3);
        assert!(err > 0.5);
    }
}
