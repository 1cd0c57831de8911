//! Elementwise activations with their gradient rules.

use crate::tensor::Tensor;

/// Largest f32 strictly below 1. `tanh` saturates to exactly 1.0 in f32 for
/// large inputs; clamping keeps the output strictly inside (-1, 1).
const TANH_CEILING: f32 = 1.0 - f32::EPSILON / 2.0;

/// Elementwise `max(0, x)`.
pub fn relu(input: &Tensor) -> Tensor {
    let data = input.data().iter().map(|&v| v.max(0.0)).collect();
    Tensor::from_vec(input.shape(), data).expect("same shape")
}

/// Gradient of [`relu`]: passes `dy` where the input was strictly positive.
pub fn relu_backward(input: &Tensor, dy: &Tensor) -> Tensor {
    assert_eq!(input.shape(), dy.shape(), "relu backward shape mismatch");
    let data = input
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(input.shape(), data).expect("same shape")
}

/// Elementwise hyperbolic tangent, strictly inside (-1, 1) for finite inputs.
pub fn tanh_act(input: &Tensor) -> Tensor {
    let data = input
        .data()
        .iter()
        .map(|&v| v.tanh().clamp(-TANH_CEILING, TANH_CEILING))
        .collect();
    Tensor::from_vec(input.shape(), data).expect("same shape")
}

/// Gradient of [`tanh_act`] expressed through the forward output:
/// `dx = dy * (1 - y^2)`.
pub fn tanh_backward(output: &Tensor, dy: &Tensor) -> Tensor {
    assert_eq!(output.shape(), dy.shape(), "tanh backward shape mismatch");
    let data = output
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&y, &g)| g * (1.0 - y * y))
        .collect();
    Tensor::from_vec(output.shape(), data).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_clips_negatives() {
        let x = Tensor::from_vec(&[2], vec![-1.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 2.0]);
    }

    #[test]
    fn tanh_is_odd_and_zero_at_zero() {
        let x = Tensor::from_vec(&[3], vec![0.0, 0.7, -0.7]).unwrap();
        let y = tanh_act(&x);
        assert_eq!(y.data()[0], 0.0);
        assert_eq!(y.data()[1], -y.data()[2]);
    }

    #[test]
    fn tanh_magnitude_stays_below_one() {
        let x = Tensor::from_vec(&[4], vec![50.0, -50.0, 1e30, -1e30]).unwrap();
        for &v in tanh_act(&x).data() {
            assert!(v.abs() < 1.0);
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let points = [-1.3f32, -0.4, 0.2, 0.9, 2.1];
        let eps = 1e-3f64;
        for &p in &points {
            let x = Tensor::from_vec(&[1], vec![p]).unwrap();
            let dy = Tensor::from_vec(&[1], vec![1.0]).unwrap();

            let analytic_tanh = tanh_backward(&tanh_act(&x), &dy).data()[0] as f64;
            let num_tanh = ((p as f64 + eps).tanh() - (p as f64 - eps).tanh()) / (2.0 * eps);
            assert!(
                (analytic_tanh - num_tanh).abs() / num_tanh.abs().max(1.0) < 1e-4,
                "tanh grad at {p}: {analytic_tanh} vs {num_tanh}"
            );

            let analytic_relu = relu_backward(&x, &dy).data()[0] as f64;
            let f = |v: f64| v.max(0.0);
            let num_relu = (f(p as f64 + eps) - f(p as f64 - eps)) / (2.0 * eps);
            assert!(
                (analytic_relu - num_relu).abs() < 1e-4,
                "relu grad at {p}: {analytic_relu} vs {num_relu}"
            );
        }
    }
}
