//! Euler-Maruyama solution map of `dz = f(z) dt + du` on a moving time grid.
//!
//! The driving path `u` is a Brownian sample stored on a fine representation
//! grid and read between nodes by linear interpolation. The grid consists of
//! the fixed endpoints `t0` and `T` plus the `k` interior points carried by
//! the discretization parameter. Starting from `z(0) = 0`, the first step to
//! `t0` leaves `z(t0) = u(t0)` (the drift vanishes at 0).

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result, SolverFailure};
use crate::model::{
    uniform_abscissae, DiscretizationParam, Domain, FieldSamples, ForwardModel, Location,
    NoiseModel, ObservationModel, UnknownState,
};
use crate::priors::{GaussianPrior, PriorSpec};
use crate::scalar::{interp_linear, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Drift {
    /// `10 z (1 - z^2) / (1 + z^2)`.
    DoubleWell,
    Zero,
}

/// `10 z (1 - z^2) / (1 + z^2)`.
pub fn drift<T: Scalar>(z: T) -> T {
    let z2 = z * z;
    T::lit(10.0) * z * (T::one() - z2) / (T::one() + z2)
}

impl Drift {
    pub fn eval<T: Scalar>(self, z: T) -> T {
        match self {
            Drift::DoubleWell => drift(z),
            Drift::Zero => T::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeConfig<T> {
    pub t0: T,
    pub t_end: T,
    pub drift: Drift,
    pub obs_times: Vec<T>,
    pub noise_variance: T,
    /// Number of intervals of the representation grid on `[0, t_end]`.
    pub representation_intervals: usize,
    /// Iterates beyond this magnitude count as a blow-up.
    pub divergence_threshold: T,
}

impl<T: Scalar> Default for SdeConfig<T> {
    fn default() -> Self {
        Self {
            t0: T::lit(0.01),
            t_end: T::lit(10.0),
            drift: Drift::DoubleWell,
            obs_times: (1..=24).map(|i| T::lit(0.2 * i as f64)).collect(),
            noise_variance: T::lit(0.01),
            representation_intervals: 1000,
            divergence_threshold: T::lit(1e6),
        }
    }
}

impl<T: Scalar> SdeConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 >= T::zero() && self.t0 < self.t_end) {
            return Err(Error::InvalidParameter("need 0 <= t0 < t_end".into()));
        }
        if self.obs_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("observation times must increase".into()));
        }
        if self.obs_times.iter().any(|t| !(*t > T::zero() && *t < self.t_end)) {
            return Err(Error::InvalidParameter("observation times must lie in (0, T)".into()));
        }
        if !(self.noise_variance > T::zero()) || self.representation_intervals == 0 {
            return Err(Error::InvalidParameter("noise variance and grid size must be positive".into()));
        }
        Ok(())
    }

    pub fn representation_grid(&self) -> Arc<Vec<T>> {
        uniform_abscissae(T::zero(), self.t_end, self.representation_intervals)
    }

    pub fn wiener_prior(&self) -> PriorSpec<T> {
        PriorSpec::Wiener { grid: self.representation_grid() }
    }

    /// The time of the last observation.
    pub fn horizon(&self) -> T {
        self.obs_times.last().copied().unwrap_or(self.t_end)
    }
}

/// Nodal values of an Euler-Maruyama path.
#[derive(Debug, Clone, PartialEq)]
pub struct SdePath<T> {
    pub nodes: Vec<T>,
    pub z: Vec<T>,
}

impl<T: Scalar> SdePath<T> {
    pub fn eval(&self, t: T) -> T {
        interp_linear(&self.nodes, &self.z, t)
    }
}

/// `t0, sorted interior points, T`.
pub fn sde_nodes<T: Scalar>(interior: &[T], cfg: &SdeConfig<T>) -> Vec<T> {
    let mut nodes = Vec::with_capacity(interior.len() + 2);
    nodes.push(cfg.t0);
    nodes.extend_from_slice(interior);
    nodes[1..].sort_by(|a, b| a.partial_cmp(b).expect("grid points are not NaN"));
    nodes.push(cfg.t_end);
    nodes
}

/// Marches over `nodes` until the first node at or beyond `horizon`.
pub fn euler_maruyama<T: Scalar>(
    u: &FieldSamples<T>,
    nodes: &[T],
    cfg: &SdeConfig<T>,
    horizon: T,
) -> std::result::Result<SdePath<T>, SolverFailure> {
    let mut z = u.eval(nodes[0]) - u.eval(T::zero());
    let mut path = SdePath { nodes: vec![nodes[0]], z: vec![z] };
    let mut u_prev = u.eval(nodes[0]);
    for w in nodes.windows(2) {
        if w[0] >= horizon {
            break;
        }
        let u_next = u.eval(w[1]);
        z = z + (w[1] - w[0]) * cfg.drift.eval(z) + (u_next - u_prev);
        u_prev = u_next;
        if !z.is_finite() {
            return Err(SolverFailure::NonFinite);
        }
        if z.abs() > cfg.divergence_threshold {
            return Err(SolverFailure::Diverged { magnitude: z.abs().as_f64(), at: w[1].as_f64() });
        }
        path.nodes.push(w[1]);
        path.z.push(z);
    }
    Ok(path)
}

/// Point evaluations of the interpolated path.
pub fn observe_sde<T: Scalar>(path: &SdePath<T>, times: &[T]) -> Vec<T> {
    times.iter().map(|&t| path.eval(t)).collect()
}

/// The discretized SDE forward map. Marching stops once the last
/// observation time is covered, since later nodes cannot affect the data.
#[derive(Debug, Clone)]
pub struct SdeForward<T> {
    pub cfg: SdeConfig<T>,
}

impl<T: Scalar> SdeForward<T> {
    pub fn new(cfg: SdeConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn domain(&self) -> Domain<T> {
        Domain::Interval { lo: T::zero(), hi: self.cfg.t_end }
    }

    /// Full path over `[t0, T]` for the given grid.
    pub fn solve(
        &self,
        u: &UnknownState<T>,
        a: &DiscretizationParam<T>,
        horizon: T,
    ) -> std::result::Result<SdePath<T>, SolverFailure> {
        let (UnknownState::Field(path), DiscretizationParam::GridBased { points }) = (u, a) else {
            return Err(SolverFailure::Incompatible("the SDE solver needs a path and a grid"));
        };
        euler_maruyama(path, &sde_nodes(points, &self.cfg), &self.cfg, horizon)
    }
}

impl<T: Scalar> ForwardModel<T> for SdeForward<T> {
    fn output_dim(&self) -> usize {
        self.cfg.obs_times.len()
    }

    fn evaluate(
        &self,
        u: &UnknownState<T>,
        a: &DiscretizationParam<T>,
    ) -> std::result::Result<Vec<T>, SolverFailure> {
        let path = self.solve(u, a, self.cfg.horizon())?;
        Ok(observe_sde(&path, &self.cfg.obs_times))
    }
}

/// Synthetic SDE experiment: true driving path, its solution on the
/// representation grid and noisy observations.
#[derive(Debug, Clone)]
pub struct SdeTruth<T> {
    pub u: FieldSamples<T>,
    pub path: SdePath<T>,
    pub clean: Vec<T>,
}

/// Draws a Brownian path, solves on the representation grid and adds noise.
pub fn generate_sde_data<T: Scalar>(
    cfg: &SdeConfig<T>,
    seed: u64,
) -> Result<(ObservationModel<T>, SdeTruth<T>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prior = GaussianPrior::from_spec(&cfg.wiener_prior())?;
    let UnknownState::Field(u) = prior.sample(&mut rng) else {
        unreachable!("Wiener prior yields a field")
    };
    let grid = u.grid().clone();
    let path = euler_maruyama(&u, &grid, cfg, cfg.t_end)
        .map_err(|e| Error::InvalidParameter(format!("reference solve failed: {e}")))?;
    let clean = observe_sde(&path, &cfg.obs_times);
    let noise = NoiseModel::isotropic(clean.len(), cfg.noise_variance)?;
    let data = clean.iter().zip(noise.sample(&mut rng)).map(|(&c, e)| c + e).collect();
    let locations = cfg.obs_times.iter().map(|&t| Location::Line(t)).collect();
    let obs = ObservationModel::new(locations, data, noise, &Domain::Interval { lo: T::zero(), hi: cfg.t_end })?;
    Ok((obs, SdeTruth { u, path, clean }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FailureCounter;
    use crate::potential;

    fn brownian(seed: u64, cfg: &SdeConfig<f64>) -> FieldSamples<f64> {
        let prior = GaussianPrior::from_spec(&cfg.wiener_prior()).unwrap();
        match prior.sample(&mut ChaCha8Rng::seed_from_u64(seed)) {
            UnknownState::Field(f) => f,
            _ => unreachable!(),
        }
    }

    fn uniform_interior(k: usize, cfg: &SdeConfig<f64>) -> Vec<f64> {
        match DiscretizationParam::uniform_grid(k, cfg.t0, cfg.t_end) {
            DiscretizationParam::GridBased { points } => points,
            _ => unreachable!(),
        }
    }

    #[test]
    fn drift_values() {
        assert_eq!(drift(0.0), 0.0);
        assert_eq!(drift(1.0), 0.0);
        assert_eq!(drift(-1.0), 0.0);
        assert!((drift(2.0) + 12.0f64).abs() < 1e-12);
    }

    #[test]
    fn without_drift_path_reproduces_noise() {
        let cfg = SdeConfig { drift: Drift::Zero, ..Default::default() };
        let u = brownian(1, &cfg);
        let nodes = sde_nodes(&[0.3, 1.234, 4.0, 4.5, 7.77], &cfg);
        let path = euler_maruyama(&u, &nodes, &cfg, cfg.t_end).unwrap();
        for (t, z) in path.nodes.iter().zip(&path.z) {
            assert!((z - u.eval(*t)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_input_stays_at_zero() {
        let cfg = SdeConfig::<f64>::default();
        let u = FieldSamples::new(cfg.representation_grid(), vec![0.0; 1001]).unwrap();
        let path = euler_maruyama(&u, &sde_nodes(&uniform_interior(24, &cfg), &cfg), &cfg, 10.0).unwrap();
        assert!(path.z.iter().all(|z| *z == 0.0));
        assert!(observe_sde(&path, &cfg.obs_times).iter().all(|z| *z == 0.0));
    }

    #[test]
    fn coarse_uniform_grid_blows_up() {
        let cfg = SdeConfig::<f64>::default();
        let nodes = sde_nodes(&uniform_interior(24, &cfg), &cfg);
        let failures = (0..100)
            .filter(|&s| euler_maruyama(&brownian(s, &cfg), &nodes, &cfg, cfg.t_end).is_err())
            .count();
        assert!(failures >= 1);
    }

    #[test]
    fn refinement_converges_to_representation_solution() {
        let cfg = SdeConfig::<f64>::default();
        let mut wins = 0;
        for seed in 0..10 {
            let u = brownian(100 + seed, &cfg);
            let fine = euler_maruyama(&u, u.grid(), &cfg, cfg.t_end).unwrap();
            let errs: Vec<f64> = [50, 100, 200]
                .iter()
                .map(|&k| {
                    let p = euler_maruyama(&u, &sde_nodes(&uniform_interior(k, &cfg), &cfg), &cfg, cfg.t_end);
                    p.map(|p| p.nodes.iter().zip(&p.z).map(|(t, z)| (z - fine.eval(*t)).abs()).fold(0.0, f64::max))
                        .unwrap_or(f64::INFINITY)
                })
                .collect();
            if errs[1] < errs[0] && errs[2] < errs[1] {
                wins += 1;
            }
        }
        assert!(wins >= 8, "monotone in {wins} of 10 paths");
    }

    #[test]
    fn grid_beyond_last_observation_is_irrelevant() {
        let cfg = SdeConfig::<f64>::default();
        let (obs, truth) = generate_sde_data(&cfg, 5).unwrap();
        let f = SdeForward::new(cfg.clone()).unwrap();
        let u = UnknownState::Field(truth.u.clone());
        let mut left: Vec<f64> = (1..=20).map(|i| 0.24 * i as f64).collect();
        left.push(5.0);
        let mut a1 = left.clone();
        a1.extend([6.0, 8.5, 9.9]);
        let mut a2 = left;
        a2.extend([7.3, 5.1, 9.0]);
        let c = FailureCounter::default();
        let p1 = potential(&u, &DiscretizationParam::grid(a1), &obs, &f, &c);
        let p2 = potential(&u, &DiscretizationParam::grid(a2), &obs, &f, &c);
        assert_eq!(p1.to_bits(), p2.to_bits());
    }

    #[test]
    fn data_is_reproducible_and_truth_fits() {
        let cfg = SdeConfig::<f64>::default();
        let (a, truth) = generate_sde_data(&cfg, 11).unwrap();
        let (b, _) = generate_sde_data(&cfg, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(truth.u.values()[0], 0.0);
        let f = SdeForward::new(cfg.clone()).unwrap();
        let rep: Vec<f64> = truth.u.grid()[1..1000].iter().copied().filter(|t| *t > cfg.t0).collect();
        let psi = potential(&UnknownState::Field(truth.u), &DiscretizationParam::grid(rep), &a, &f, &FailureCounter::default());
        assert!((psi - 12.0).abs() < 2.0 * 12f64.sqrt() * 2.0, "psi {psi}");
    }
}
