use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Ornstein-Uhlenbeck process with unit time step and zero mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct OuNoise<S> {
    pub theta: S,
    pub sigma: S,
    pub state: S,
}

impl<S: Scalar> OuNoise<S> {
    pub fn new(theta: f64, sigma: f64) -> Self {
        Self {
            theta: S::of(theta),
            sigma: S::of(sigma),
            state: S::zero(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> S {
        let n: f64 = rng.sample(StandardNormal);
        self.state += -self.theta * self.state + self.sigma * S::of(n);
        self.state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_sigma_is_silent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut n = OuNoise::<f64>::new(0.15, 0.0);
        assert!((0..1000).all(|_| n.sample(&mut rng) == 0.0));
    }

    #[test]
    fn stationary_variance() {
        // Var = sigma^2 / (1 - (1 - theta)^2)
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut n = OuNoise::<f64>::new(0.15, 0.2);
        let xs: Vec<f64> = (0..200_000).map(|_| n.sample(&mut rng)).skip(1000).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        let expect = 0.04 / (1.0 - 0.85f64.powi(2));
        assert!(mean.abs() < 0.03, "{mean}");
        assert!((var / expect - 1.0).abs() < 0.05, "{var} vs {expect}");
    }
}
