//! Prior measures on the unknown `u` and on the discretization size `k`.
//!
//! Gaussian priors (vector, squared-exponential process, Wiener) are
//! prepared once into a [`GaussianPrior`] holding the mean and a square-root
//! factor of the covariance; the pCN kernel then draws centred increments
//! from it.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{FieldSamples, UnknownState};
use crate::scalar::{std_normal, uniform, Scalar};

/// Squared-exponential covariance `variance * exp(-(x - x')^2 / two_ell_sq)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquaredExponential<T> {
    pub variance: T,
    pub two_ell_sq: T,
}

impl<T: Scalar> Default for SquaredExponential<T> {
    fn default() -> Self {
        Self {
            variance: T::lit(50.0),
            two_ell_sq: T::lit(0.5),
        }
    }
}

impl<T: Scalar> SquaredExponential<T> {
    pub fn eval(&self, x: T, y: T) -> T {
        let d = x - y;
        self.variance * (-(d * d) / self.two_ell_sq).exp()
    }
}

/// The beam prior kernel `50 exp(-(x - x')^2 / 0.5)`.
pub fn gp_kernel<T: Scalar>(x: T, y: T) -> T {
    SquaredExponential::default().eval(x, y)
}

/// Prior on the size `k` of a grid, truncated to `k_min..=k_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KPrior {
    Poisson { mean: f64, k_min: usize, k_max: usize },
    PointMass(usize),
}

impl KPrior {
    /// Poisson prior with the default truncation `2..=10 * mean`.
    pub fn poisson(mean: f64) -> Self {
        KPrior::Poisson {
            mean,
            k_min: 2,
            k_max: (10.0 * mean).ceil() as usize,
        }
    }

    /// Unnormalized log-mass; `-inf` outside the support.
    pub fn log_pmf(&self, k: usize) -> f64 {
        match *self {
            KPrior::Poisson { mean, k_min, k_max } => {
                if k < k_min || k > k_max {
                    f64::NEG_INFINITY
                } else {
                    log_pmf_poisson_k(k, mean)
                }
            }
            KPrior::PointMass(k0) => {
                if k == k0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn contains(&self, k: usize) -> bool {
        self.log_pmf(k).is_finite()
    }
}

/// `log(mean^k e^-mean / k!)`.
pub fn log_pmf_poisson_k(k: usize, mean: f64) -> f64 {
    let kf = k as f64;
    kf * mean.ln() - mean - libm::lgamma(kf + 1.0)
}

/// Every prior used by the experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec<T> {
    GaussianVector {
        mean: Vec<T>,
        variance: T,
    },
    GaussianProcess {
        mean: T,
        kernel: SquaredExponential<T>,
        grid: Arc<Vec<T>>,
    },
    /// Standard Brownian motion pinned at zero on the first grid node.
    Wiener {
        grid: Arc<Vec<T>>,
    },
    UniformBox {
        lo: Vec<T>,
        hi: Vec<T>,
    },
    K(KPrior),
}

/// Covariance square root in the form cheapest to apply.
#[derive(Debug, Clone)]
enum Factor<T> {
    Diagonal(T),
    /// Row-major lower-triangular `L` with `L L^T = C + jitter I`.
    Dense { n: usize, lower: Vec<T> },
    /// Brownian increments with standard deviations `sqrt(dt)`.
    Wiener(Vec<T>),
}

/// A Gaussian prior prepared for repeated sampling.
#[derive(Debug, Clone)]
pub struct GaussianPrior<T> {
    mean: Vec<T>,
    factor: Factor<T>,
    grid: Option<Arc<Vec<T>>>,
    jitter: T,
}

impl<T: Scalar> GaussianPrior<T> {
    pub fn from_spec(spec: &PriorSpec<T>) -> Result<Self> {
        match spec {
            PriorSpec::GaussianVector { mean, variance } => {
                if !(*variance >= T::zero()) {
                    return Err(Error::InvalidParameter(format!(
                        "prior variance must be nonnegative, got {variance}"
                    )));
                }
                Ok(Self {
                    mean: mean.clone(),
                    factor: Factor::Diagonal(variance.sqrt()),
                    grid: None,
                    jitter: T::zero(),
                })
            }
            PriorSpec::GaussianProcess { mean, kernel, grid } => {
                let n = grid.len();
                let mut cov = vec![T::zero(); n * n];
                for i in 0..n {
                    for j in 0..n {
                        cov[i * n + j] = kernel.eval(grid[i], grid[j]);
                    }
                }
                let (lower, jitter) = cholesky_with_jitter(&cov, n, kernel.variance)?;
                Ok(Self {
                    mean: vec![*mean; n],
                    factor: Factor::Dense { n, lower },
                    grid: Some(Arc::clone(grid)),
                    jitter,
                })
            }
            PriorSpec::Wiener { grid } => {
                if grid.is_empty() || grid[0] != T::zero() {
                    return Err(Error::InvalidParameter(
                        "Wiener representation grid must start at 0".into(),
                    ));
                }
                FieldSamples::new(Arc::clone(grid), vec![T::zero(); grid.len()])?;
                let sd = grid.windows(2).map(|w| (w[1] - w[0]).sqrt()).collect();
                Ok(Self {
                    mean: vec![T::zero(); grid.len()],
                    factor: Factor::Wiener(sd),
                    grid: Some(Arc::clone(grid)),
                    jitter: T::zero(),
                })
            }
            _ => Err(Error::InvalidParameter(
                "pCN needs a Gaussian prior (vector, process or Wiener)".into(),
            )),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// Diagonal jitter that was needed to factor the covariance.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    /// A draw from `N(0, C)`.
    pub fn sample_centered<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        match &self.factor {
            Factor::Diagonal(sd) => (0..self.mean.len())
                .map(|_| *sd * std_normal::<T, _>(rng))
                .collect(),
            Factor::Dense { n, lower } => {
                let z: Vec<T> = (0..*n).map(|_| std_normal::<T, _>(rng)).collect();
                (0..*n)
                    .map(|i| {
                        let row = &lower[i * n..i * n + i + 1];
                        row.iter().zip(&z).map(|(&l, &zj)| l * zj).sum()
                    })
                    .collect()
            }
            Factor::Wiener(sd) => {
                let mut out = Vec::with_capacity(sd.len() + 1);
                let mut acc = T::zero();
                out.push(acc);
                for s in sd {
                    acc += *s * std_normal::<T, _>(rng);
                    out.push(acc);
                }
                out
            }
        }
    }

    /// Wraps coordinates into the matching [`UnknownState`] variant.
    pub fn wrap(&self, values: Vec<T>) -> UnknownState<T> {
        match &self.grid {
            Some(g) => UnknownState::Field(
                FieldSamples::new(Arc::clone(g), values).expect("grid and values match"),
            ),
            None => UnknownState::FiniteVector(values),
        }
    }

    /// A draw from `N(m, C)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> UnknownState<T> {
        let xi = self.sample_centered(rng);
        self.wrap(self.mean.iter().zip(xi).map(|(&m, x)| m + x).collect())
    }

    /// The prior mean as a state.
    pub fn mean_state(&self) -> UnknownState<T> {
        self.wrap(self.mean.clone())
    }
}

/// Cholesky factor of `cov + eps * I`, starting at `eps = 1e-8 * scale` and
/// escalating by 10 up to `1e-4 * scale`. Returns the factor and the jitter.
pub fn cholesky_with_jitter<T: Scalar>(cov: &[T], n: usize, scale: T) -> Result<(Vec<T>, T)> {
    if cov.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: cov.len(),
        });
    }
    let mut asym = T::zero();
    for i in 0..n {
        for j in 0..i {
            asym = asym.max((cov[i * n + j] - cov[j * n + i]).abs());
        }
    }
    if asym > T::lit(1e-12) * scale.abs().max(T::one()) {
        return Err(Error::Factorization(format!(
            "covariance is not symmetric (max asymmetry {asym})"
        )));
    }
    let mut eps = T::lit(1e-8) * scale;
    let max_eps = T::lit(1e-4) * scale * T::lit(1.000001);
    while eps <= max_eps {
        if let Some(l) = dense_cholesky(cov, n, eps) {
            return Ok((l, eps));
        }
        eps *= T::lit(10.0);
    }
    Err(Error::Factorization(format!(
        "covariance not positive definite even with jitter {}",
        T::lit(1e-4) * scale
    )))
}

fn dense_cholesky<T: Scalar>(a: &[T], n: usize, eps: T) -> Option<Vec<T>> {
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            if i == j {
                s += eps;
            }
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Convenience wrapper: i.i.d. `N(mean_i, variance)` coordinates.
pub fn sample_gaussian_vector<T: Scalar, R: Rng + ?Sized>(
    spec: &PriorSpec<T>,
    rng: &mut R,
) -> Result<Vec<T>> {
    match spec {
        PriorSpec::GaussianVector { .. } => {
            Ok(GaussianPrior::from_spec(spec)?.sample(rng).coords().to_vec())
        }
        _ => Err(Error::InvalidParameter("expected a GaussianVector prior".into())),
    }
}

/// One draw of a Gaussian process on its representation grid.
pub fn sample_gp<T: Scalar, R: Rng + ?Sized>(
    spec: &PriorSpec<T>,
    rng: &mut R,
) -> Result<FieldSamples<T>> {
    match spec {
        PriorSpec::GaussianProcess { .. } => match GaussianPrior::from_spec(spec)?.sample(rng) {
            UnknownState::Field(f) => Ok(f),
            _ => unreachable!("process priors produce fields"),
        },
        _ => Err(Error::InvalidParameter("expected a GaussianProcess prior".into())),
    }
}

/// One Brownian path on the representation grid, `u(0) = 0`.
pub fn sample_wiener<T: Scalar, R: Rng + ?Sized>(
    spec: &PriorSpec<T>,
    rng: &mut R,
) -> Result<FieldSamples<T>> {
    match spec {
        PriorSpec::Wiener { .. } => match GaussianPrior::from_spec(spec)?.sample(rng) {
            UnknownState::Field(f) => Ok(f),
            _ => unreachable!("Wiener priors produce fields"),
        },
        _ => Err(Error::InvalidParameter("expected a Wiener prior".into())),
    }
}

/// Independent uniform coordinates in `[lo_i, hi_i)`.
pub fn sample_uniform_box<T: Scalar, R: Rng + ?Sized>(lo: &[T], hi: &[T], rng: &mut R) -> Vec<T> {
    lo.iter().zip(hi).map(|(&l, &h)| uniform(rng, l, h)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::uniform_abscissae;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kernel_values() {
        assert_eq!(gp_kernel(3.0, 3.0), 50.0);
        assert!(gp_kernel(0.0, 100.0) < 1e-300);
        let v = gp_kernel(0.0, 0.5f64.sqrt());
        assert!((v - 50.0 / std::f64::consts::E).abs() < 1e-12);
        assert!((v - 18.394).abs() < 1e-3);
    }

    #[test]
    fn zero_variance_returns_mean() {
        let spec = PriorSpec::GaussianVector { mean: vec![200.0; 5], variance: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_gaussian_vector(&spec, &mut rng).unwrap(), vec![200.0; 5]);
    }

    #[test]
    fn gaussian_vector_mean_within_clt() {
        let spec = PriorSpec::GaussianVector { mean: vec![200.0; 5], variance: 25.0 };
        let prior = GaussianPrior::from_spec(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut sum = [0.0; 5];
        for _ in 0..n {
            for (s, v) in sum.iter_mut().zip(prior.sample(&mut rng).coords()) {
                *s += v;
            }
        }
        let tol = 3.0 * (25.0f64 / n as f64).sqrt();
        for s in sum {
            assert!((s / n as f64 - 200.0).abs() < tol);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let spec = PriorSpec::GaussianProcess {
            mean: 200.0,
            kernel: SquaredExponential::default(),
            grid: uniform_abscissae(0.0, 10.0, 100),
        };
        let a = sample_gp(&spec, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_gp(&spec, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gp_moments() {
        let grid = uniform_abscissae(0.0, 10.0, 100);
        let h = grid[1] - grid[0];
        let spec = PriorSpec::GaussianProcess {
            mean: 200.0,
            kernel: SquaredExponential::default(),
            grid,
        };
        let prior = GaussianPrior::from_spec(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let (i, j) = (40, 41);
        let (mut s_i, mut s_j, mut s_ii, mut s_jj, mut s_ij) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let u = prior.sample(&mut rng);
            let c = u.coords();
            s_i += c[i];
            s_j += c[j];
            s_ii += c[i] * c[i];
            s_jj += c[j] * c[j];
            s_ij += c[i] * c[j];
        }
        let nf = n as f64;
        let (m_i, m_j) = (s_i / nf, s_j / nf);
        let v_i = s_ii / nf - m_i * m_i;
        let v_j = s_jj / nf - m_j * m_j;
        let corr = (s_ij / nf - m_i * m_j) / (v_i * v_j).sqrt();
        assert!((v_i - 50.0).abs() < 5.0, "variance {v_i}");
        assert!((m_i - 200.0).abs() < 3.0 * (50.0f64 / nf).sqrt());
        let expected = (-h * h / 0.5f64).exp();
        assert!((corr - expected).abs() < 0.01, "corr {corr} vs {expected}");
    }

    #[test]
    fn wiener_pinned_and_brownian() {
        let grid = uniform_abscissae(0.0, 10.0, 1000);
        let spec = PriorSpec::Wiener { grid: grid.clone() };
        let prior = GaussianPrior::from_spec(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 10_000;
        let (i1, i2, i3) = (200, 500, 900);
        let (mut v1, mut v2, mut inc_a, mut inc_b, mut inc_ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let u = prior.sample(&mut rng);
            let c = u.coords();
            assert_eq!(c[0], 0.0);
            v1 += c[i1] * c[i1];
            v2 += c[i2] * c[i2];
            let a = c[i2] - c[i1];
            let b = c[i3] - c[i2];
            inc_a += a * a;
            inc_b += b * b;
            inc_ab += a * b;
        }
        let nf = n as f64;
        assert!((v1 / nf / grid[i1] - 1.0).abs() < 0.1);
        assert!((v2 / nf / grid[i2] - 1.0).abs() < 0.1);
        let corr = inc_ab / (inc_a * inc_b).sqrt();
        assert!(corr.abs() < 0.05, "increment correlation {corr}");
    }

    #[test]
    fn wiener_requires_zero_start() {
        let spec = PriorSpec::Wiener { grid: Arc::new(vec![0.5, 1.0]) };
        assert!(GaussianPrior::<f64>::from_spec(&spec).is_err());
    }

    #[test]
    fn non_gaussian_prior_rejected_for_pcn() {
        let spec = PriorSpec::UniformBox { lo: vec![0.0], hi: vec![1.0] };
        assert!(GaussianPrior::<f64>::from_spec(&spec).is_err());
    }

    #[test]
    fn poisson_ratios() {
        let p = KPrior::poisson(60.0);
        assert!(((p.log_pmf(61) - p.log_pmf(60)).exp() - 60.0 / 61.0).abs() < 1e-12);
        assert!(((p.log_pmf(60) - p.log_pmf(59)).exp() - 1.0).abs() < 1e-12);
        assert_eq!(p.log_pmf(1), f64::NEG_INFINITY);
        assert_eq!(p.log_pmf(601), f64::NEG_INFINITY);
        assert!(p.contains(600));
        let pm = KPrior::PointMass(24);
        assert_eq!(pm.log_pmf(24), 0.0);
        assert!(!pm.contains(25));
    }

    #[test]
    fn gp_factor_in_f32() {
        let spec = PriorSpec::GaussianProcess {
            mean: 200.0f32,
            kernel: SquaredExponential::default(),
            grid: uniform_abscissae(0.0f32, 10.0, 100),
        };
        let prior = GaussianPrior::from_spec(&spec).unwrap();
        let u = prior.sample(&mut ChaCha8Rng::seed_from_u64(5));
        assert!(u.coords().iter().all(|v| v.is_finite()));
    }

    proptest! {
        #[test]
        fn poisson_ratio_is_lambda_over_k(k in 2usize..500, mean in 1.0f64..100.0) {
            let r = (log_pmf_poisson_k(k + 1, mean) - log_pmf_poisson_k(k, mean)).exp();
            let expected = mean / (k as f64 + 1.0);
            prop_assert!((r / expected - 1.0).abs() < 1e-9);
        }

        #[test]
        fn uniform_box_stays_inside(seed in any::<u64>(), lo in -5.0f64..0.0, w in 0.01f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = sample_uniform_box(&[lo, lo], &[lo + w, lo + 2.0 * w], &mut rng);
            prop_assert!(x[0] >= lo && x[0] < lo + w);
            prop_assert!(x[1] >= lo && x[1] < lo + 2.0 * w);
        }
    }
}
