//! Product-of-Beta point density on the unit square.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::samplers::THETA_BOX;
use crate::scalar::Scalar;

/// `rho(x; theta) = Beta(x1; alpha1, beta1) Beta(x2; alpha2, beta2)`.
#[derive(Debug, Clone)]
pub struct BetaGridDensity {
    theta: [f64; 4],
    gammas: [Gamma<f64>; 4],
}

impl BetaGridDensity {
    pub fn new<T: Scalar>(theta: [T; 4]) -> Result<Self> {
        let theta = theta.map(|t| t.as_f64());
        if theta.iter().any(|t| !(*t >= THETA_BOX.0 && *t <= THETA_BOX.1)) {
            return Err(Error::InvalidParameter(format!("Beta parameters {theta:?} outside [1, 10]")));
        }
        let g = |shape: f64| Gamma::new(shape, 1.0).expect("shape is positive");
        Ok(Self {
            theta,
            gammas: [g(theta[0]), g(theta[1]), g(theta[2]), g(theta[3])],
        })
    }

    pub fn theta(&self) -> [f64; 4] {
        self.theta
    }

    /// Mean point `(alpha1 / (alpha1 + beta1), alpha2 / (alpha2 + beta2))`.
    pub fn mean(&self) -> [f64; 2] {
        let [a1, b1, a2, b2] = self.theta;
        [a1 / (a1 + b1), a2 / (a2 + b2)]
    }

    /// One draw; each coordinate is `X / (X + Y)` with Gamma variates.
    pub fn sample<T: Scalar, R: Rng + ?Sized>(&self, rng: &mut R) -> [T; 2] {
        let mut coord = |i: usize| loop {
            let x = self.gammas[2 * i].sample(rng);
            let y = self.gammas[2 * i + 1].sample(rng);
            let v = x / (x + y);
            // keep strictly inside the square
            if v > 0.0 && v < 1.0 {
                break v;
            }
        };
        let x = coord(0);
        let y = coord(1);
        [T::lit(x), T::lit(y)]
    }
}

/// One draw from `rho(.; theta)`.
pub fn sample_beta_density<T: Scalar, R: Rng + ?Sized>(theta: [T; 4], rng: &mut R) -> Result<[T; 2]> {
    Ok(BetaGridDensity::new(theta)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ks_uniform(mut xs: Vec<f64>) -> f64 {
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn unit_parameters_are_uniform() {
        let d = BetaGridDensity::new([1.0, 1.0, 1.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<[f64; 2]> = (0..10_000).map(|_| d.sample(&mut rng)).collect();
        assert!(ks_uniform(pts.iter().map(|p| p[0]).collect()) < 0.02);
        assert!(ks_uniform(pts.iter().map(|p| p[1]).collect()) < 0.02);
    }

    #[test]
    fn skewed_mean() {
        let d = BetaGridDensity::new([10.0, 1.0, 10.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let mut s = [0.0; 2];
        for _ in 0..n {
            let p: [f64; 2] = d.sample(&mut rng);
            assert!(p.iter().all(|c| *c > 0.0 && *c < 1.0));
            s[0] += p[0];
            s[1] += p[1];
        }
        // Beta(10, 1) has variance 10 / (121 * 12)
        let se = (10.0f64 / (121.0 * 12.0) / n as f64).sqrt();
        for c in s {
            assert!((c / n as f64 - 10.0 / 11.0).abs() < 3.0 * se);
        }
        assert_eq!(d.mean(), [10.0 / 11.0, 10.0 / 11.0]);
    }

    #[test]
    fn parameters_outside_box_rejected() {
        assert!(BetaGridDensity::new([0.5, 1.0, 1.0, 1.0]).is_err());
        assert!(BetaGridDensity::new([1.0, 1.0, 1.0, 10.5]).is_err());
    }
}
