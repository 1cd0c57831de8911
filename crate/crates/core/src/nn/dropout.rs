//! Inverted dropout: survivors are scaled by `1/(1-p)` at train time so that
//! eval mode is the exact identity.

use rand::Rng;

use super::batchnorm::Mode;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Dropout layer. The mask produced in a train-mode forward pass must be
/// replayed in backward.
#[derive(Debug, Clone)]
pub struct Dropout {
    pub p: f32,
}

/// Per-element multipliers from a train-mode pass (`None` when the pass was
/// an identity: eval mode or `p == 0`).
pub type DropoutMask = Option<Vec<f32>>;

impl Dropout {
    pub fn new(p: f32) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::config(format!(
                "dropout probability {p} must lie in [0, 1)"
            )));
        }
        Ok(Dropout { p })
    }

    pub fn forward(&self, x: &Tensor, mode: Mode, rng: &mut impl Rng) -> (Tensor, DropoutMask) {
        if mode == Mode::Eval || self.p == 0.0 {
            return (x.clone(), None);
        }
        let scale = 1.0 / (1.0 - self.p);
        let mask: Vec<f32> = (0..x.len())
            .map(|_| {
                if rng.random::<f32>() < self.p {
                    0.0
                } else {
                    scale
                }
            })
            .collect();
        let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        (
            Tensor::from_vec(x.shape(), data).expect("same shape"),
            Some(mask),
        )
    }

    pub fn backward(&self, dy: &Tensor, mask: &DropoutMask) -> Tensor {
        match mask {
            None => dy.clone(),
            Some(m) => {
                let data = dy.data().iter().zip(m).map(|(v, s)| v * s).collect();
                Tensor::from_vec(dy.shape(), data).expect("same shape")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn p_zero_is_identity_in_both_modes() {
        let x = Tensor::from_vec(&[4], vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let d = Dropout::new(0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (y, mask) = d.forward(&x, Mode::Train, &mut rng);
        assert_eq!(y, x);
        assert!(mask.is_none());
        let (y, _) = d.forward(&x, Mode::Eval, &mut rng);
        assert_eq!(y, x);
    }

    #[test]
    fn eval_mode_is_identity_for_any_p() {
        let x = Tensor::full(&[100], 2.0);
        let d = Dropout::new(0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (y, mask) = d.forward(&x, Mode::Eval, &mut rng);
        assert_eq!(y, x);
        assert!(mask.is_none());
    }

    #[test]
    fn survivor_fraction_and_mean_follow_large_numbers() {
        let n = 1_000_000;
        let x = Tensor::full(&[n], 1.0);
        let d = Dropout::new(0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (y, _) = d.forward(&x, Mode::Train, &mut rng);
        let survivors = y.data().iter().filter(|&&v| v != 0.0).count();
        let frac = survivors as f64 / n as f64;
        assert!((frac - 0.75).abs() < 0.01, "survivor fraction {frac}");
        let mean = y.data().iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn same_seed_reproduces_mask_bit_exactly() {
        let x = Tensor::full(&[512], 1.0);
        let d = Dropout::new(0.5).unwrap();
        let (y1, m1) = d.forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(9));
        let (y2, m2) = d.forward(&x, Mode::Train, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(y1, y2);
        assert_eq!(m1, m2);
    }

    #[test]
    fn backward_replays_the_mask() {
        let x = Tensor::full(&[256], 1.0);
        let d = Dropout::new(0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (y, mask) = d.forward(&x, Mode::Train, &mut rng);
        let dy = Tensor::full(&[256], 1.0);
        let dx = d.backward(&dy, &mask);
        assert_eq!(dx.data(), y.data());
    }

    #[test]
    fn p_at_or_above_one_is_config_error() {
        assert!(matches!(Dropout::new(1.0), Err(Error::Config(_))));
        assert!(matches!(Dropout::new(1.5), Err(Error::Config(_))));
        assert!(matches!(Dropout::new(-0.1), Err(Error::Config(_))));
    }
}
