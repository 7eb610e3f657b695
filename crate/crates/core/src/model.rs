//! Shared domain types and the data-misfit potential.
//!
//! Every sampler works with the joint state `(u, a)`: the unknown input `u`
//! and the discretization parameter `a = (k, theta)` of the forward model.
//! The only coupling to the data is through [`potential`], which evaluates
//! half the noise-weighted squared residual of the discretized forward map.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result, SolverFailure};
use crate::scalar::{interp_linear, std_normal, Scalar};

/// Diagonal Gaussian observation noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel<T> {
    variances: Vec<T>,
}

impl<T: Scalar> NoiseModel<T> {
    pub fn new(variances: Vec<T>) -> Result<Self> {
        if let Some(v) = variances.iter().find(|v| !(v.is_finite() && **v > T::zero())) {
            return Err(Error::InvalidParameter(format!(
                "noise variances must be finite and positive, got {v}"
            )));
        }
        Ok(Self { variances })
    }

    /// `dim` independent coordinates with a common variance.
    pub fn isotropic(dim: usize, variance: T) -> Result<Self> {
        Self::new(vec![variance; dim])
    }

    pub fn dim(&self) -> usize {
        self.variances.len()
    }

    pub fn variances(&self) -> &[T] {
        &self.variances
    }

    /// One draw of the noise vector.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        self.variances
            .iter()
            .map(|v| v.sqrt() * std_normal::<T, _>(rng))
            .collect()
    }
}

/// Squared noise-weighted norm `sum_i r_i^2 / var_i`.
pub fn gamma_norm_sq<T: Scalar>(residual: &[T], noise: &NoiseModel<T>) -> Result<T> {
    if residual.len() != noise.dim() {
        return Err(Error::DimensionMismatch {
            expected: noise.dim(),
            found: residual.len(),
        });
    }
    Ok(residual
        .iter()
        .zip(noise.variances())
        .map(|(&r, &v)| r * r / v)
        .sum())
}

/// Spatial or temporal domain of a forward problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain<T> {
    Interval { lo: T, hi: T },
    UnitSquare,
}

/// A sensor position (or observation time) inside a [`Domain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location<T> {
    Line(T),
    Plane([T; 2]),
}

impl<T: Scalar> Domain<T> {
    pub fn contains(&self, loc: &Location<T>) -> bool {
        match (self, loc) {
            (Domain::Interval { lo, hi }, Location::Line(x)) => *x >= *lo && *x <= *hi,
            (Domain::UnitSquare, Location::Plane([x, y])) => {
                *x > T::zero() && *x < T::one() && *y > T::zero() && *y < T::one()
            }
            _ => false,
        }
    }
}

/// Sensor layout, observed data and noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationModel<T> {
    locations: Vec<Location<T>>,
    data: Vec<T>,
    noise: NoiseModel<T>,
}

impl<T: Scalar> ObservationModel<T> {
    pub fn new(
        locations: Vec<Location<T>>,
        data: Vec<T>,
        noise: NoiseModel<T>,
        domain: &Domain<T>,
    ) -> Result<Self> {
        if data.len() != locations.len() {
            return Err(Error::DimensionMismatch {
                expected: locations.len(),
                found: data.len(),
            });
        }
        if noise.dim() != data.len() {
            return Err(Error::DimensionMismatch {
                expected: data.len(),
                found: noise.dim(),
            });
        }
        if let Some(bad) = locations.iter().find(|l| !domain.contains(l)) {
            return Err(Error::InvalidParameter(format!(
                "sensor location {bad:?} lies outside the domain"
            )));
        }
        Ok(Self {
            locations,
            data,
            noise,
        })
    }

    pub fn locations(&self) -> &[Location<T>] {
        &self.locations
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn noise(&self) -> &NoiseModel<T> {
        &self.noise
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Discretization parameter `a = (k, theta)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DiscretizationParam<T> {
    /// Interior grid points of a one-dimensional domain (`k = points.len()`).
    /// The fixed endpoints belong to the forward problem and are not stored.
    GridBased { points: Vec<T> },
    /// `k` mesh generators drawn from a Beta x Beta density with parameter
    /// `theta = (alpha1, beta1, alpha2, beta2)`.
    DensityBased { k: usize, theta: [T; 4] },
}

impl<T: Scalar> DiscretizationParam<T> {
    pub fn grid(points: Vec<T>) -> Self {
        DiscretizationParam::GridBased { points }
    }

    /// `k` interior points equally spaced strictly inside `(lo, hi)`.
    pub fn uniform_grid(k: usize, lo: T, hi: T) -> Self {
        let h = (hi - lo) / T::from_count(k + 1);
        DiscretizationParam::GridBased {
            points: (1..=k).map(|i| lo + h * T::from_count(i)).collect(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            DiscretizationParam::GridBased { points } => points.len(),
            DiscretizationParam::DensityBased { k, .. } => *k,
        }
    }

    /// Checks the invariants against a domain `[lo, hi]` (grid) or the
    /// Beta parameter box `[1, 10]^4` (density).
    pub fn validate(&self, lo: T, hi: T) -> Result<()> {
        match self {
            DiscretizationParam::GridBased { points } => {
                if let Some(p) = points.iter().find(|p| !(**p > lo && **p < hi)) {
                    return Err(Error::InvalidParameter(format!(
                        "grid point {p} outside the open domain ({lo}, {hi})"
                    )));
                }
            }
            DiscretizationParam::DensityBased { k, theta } => {
                if *k == 0 {
                    return Err(Error::InvalidParameter("k must be positive".into()));
                }
                let (a, b) = (T::one(), T::lit(10.0));
                if theta.iter().any(|t| !(*t >= a && *t <= b)) {
                    return Err(Error::InvalidParameter(format!(
                        "Beta parameters {theta:?} outside [1, 10]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Sorted copy of the interior grid points (empty for density-based).
    pub fn sorted_points(&self) -> Vec<T> {
        match self {
            DiscretizationParam::GridBased { points } => {
                let mut p = points.clone();
                p.sort_by(|a, b| a.partial_cmp(b).expect("grid points are not NaN"));
                p
            }
            DiscretizationParam::DensityBased { .. } => Vec::new(),
        }
    }
}

/// A function sampled on a fixed, strictly increasing representation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSamples<T> {
    grid: Arc<Vec<T>>,
    values: Vec<T>,
}

impl<T: Scalar> FieldSamples<T> {
    pub fn new(grid: Arc<Vec<T>>, values: Vec<T>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "representation grid must be strictly increasing".into(),
            ));
        }
        Ok(Self { grid, values })
    }

    /// Same grid, new values (length checked in debug builds only).
    pub fn with_values(&self, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), self.grid.len());
        Self {
            grid: Arc::clone(&self.grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Vec<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    /// Piecewise-linear evaluation, constant beyond the grid ends.
    pub fn eval(&self, x: T) -> T {
        interp_linear(&self.grid, &self.values, x)
    }
}

/// Uniform abscissae `lo, lo + h, ..., hi` with `n` intervals.
pub fn uniform_abscissae<T: Scalar>(lo: T, hi: T, n: usize) -> Arc<Vec<T>> {
    let h = (hi - lo) / T::from_count(n);
    Arc::new(
        (0..=n)
            .map(|i| if i == n { hi } else { lo + h * T::from_count(i) })
            .collect(),
    )
}

/// The inferred input `u`.
#[derive(Debug, Clone, PartialEq)]
pub enum UnknownState<T> {
    FiniteVector(Vec<T>),
    Field(FieldSamples<T>),
    PlanarPoint([T; 2]),
}

impl<T: Scalar> UnknownState<T> {
    /// Flat view of the coordinates (vector entries, field values or `[x, y]`).
    pub fn coords(&self) -> &[T] {
        match self {
            UnknownState::FiniteVector(v) => v,
            UnknownState::Field(f) => f.values(),
            UnknownState::PlanarPoint(p) => p,
        }
    }

    pub fn coords_mut(&mut self) -> &mut [T] {
        match self {
            UnknownState::FiniteVector(v) => v,
            UnknownState::Field(f) => f.values_mut(),
            UnknownState::PlanarPoint(p) => p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            UnknownState::PlanarPoint([x, y]) => {
                let inside = |c: &T| *c > T::zero() && *c < T::one();
                if inside(x) && inside(y) {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "planar point ({x}, {y}) outside the open unit square"
                    )))
                }
            }
            UnknownState::Field(f) => FieldSamples::new(f.grid.clone(), f.values.clone()).map(|_| ()),
            UnknownState::FiniteVector(_) => Ok(()),
        }
    }
}

/// Per-kernel proposal and acceptance counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tallies {
    pub u_proposed: u64,
    pub u_accepted: u64,
    pub relocation_proposed: u64,
    pub relocation_accepted: u64,
    pub birth_death_proposed: u64,
    pub birth_death_accepted: u64,
    pub theta_proposed: u64,
    pub theta_accepted: u64,
}

impl Tallies {
    pub fn merge(&mut self, other: &Tallies) {
        self.u_proposed += other.u_proposed;
        self.u_accepted += other.u_accepted;
        self.relocation_proposed += other.relocation_proposed;
        self.relocation_accepted += other.relocation_accepted;
        self.birth_death_proposed += other.birth_death_proposed;
        self.birth_death_accepted += other.birth_death_accepted;
        self.theta_proposed += other.theta_proposed;
        self.theta_accepted += other.theta_accepted;
    }

    /// Attempts and acceptances summed over every discretization move.
    pub fn a_counts(&self) -> (u64, u64) {
        (
            self.relocation_proposed + self.birth_death_proposed + self.theta_proposed,
            self.relocation_accepted + self.birth_death_accepted + self.theta_accepted,
        )
    }
}

/// Current state of one Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState<T> {
    pub u: UnknownState<T>,
    pub a: DiscretizationParam<T>,
    /// `potential(u, a)`; kept in sync by every kernel.
    pub cached_potential: T,
    pub iteration: usize,
    pub tallies: Tallies,
}

impl<T: Scalar> ChainState<T> {
    /// Builds a state and evaluates its potential.
    pub fn new<F: ForwardModel<T> + ?Sized>(
        u: UnknownState<T>,
        a: DiscretizationParam<T>,
        post: &Posterior<'_, T, F>,
    ) -> Self {
        let cached_potential = post.potential(&u, &a);
        Self {
            u,
            a,
            cached_potential,
            iteration: 0,
            tallies: Tallies::default(),
        }
    }
}

/// A discretized forward map `G^a`.
pub trait ForwardModel<T: Scalar>: Sync {
    /// Number of observed quantities produced.
    fn output_dim(&self) -> usize;

    /// Evaluates `G^a(u)`.
    fn evaluate(
        &self,
        u: &UnknownState<T>,
        a: &DiscretizationParam<T>,
    ) -> std::result::Result<Vec<T>, SolverFailure>;
}

impl<T: Scalar, F: ForwardModel<T> + ?Sized> ForwardModel<T> for &F {
    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }

    fn evaluate(
        &self,
        u: &UnknownState<T>,
        a: &DiscretizationParam<T>,
    ) -> std::result::Result<Vec<T>, SolverFailure> {
        (**self).evaluate(u, a)
    }
}

/// Thread-safe count of forward-solver failures.
#[derive(Debug, Default)]
pub struct FailureCounter(AtomicU64);

impl FailureCounter {
    pub fn record(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// `Psi(u, a; y) = 0.5 * |y - G^a(u)|_Gamma^2`.
///
/// Solver failures and non-finite outputs give `+inf` and are counted.
///
/// # Panics
/// If the forward output length differs from the data length.
pub fn potential<T: Scalar, F: ForwardModel<T> + ?Sized>(
    u: &UnknownState<T>,
    a: &DiscretizationParam<T>,
    obs: &ObservationModel<T>,
    forward: &F,
    failures: &FailureCounter,
) -> T {
    let out = match forward.evaluate(u, a) {
        Ok(out) if out.iter().all(|v| v.is_finite()) => out,
        _ => {
            failures.record();
            return T::infinity();
        }
    };
    let residual: Vec<T> = obs.data().iter().zip(&out).map(|(&y, &g)| y - g).collect();
    assert_eq!(
        out.len(),
        obs.len(),
        "forward output length does not match the data"
    );
    let norm = gamma_norm_sq(&residual, obs.noise()).expect("dimensions checked above");
    if norm.is_finite() {
        T::lit(0.5) * norm
    } else {
        failures.record();
        T::infinity()
    }
}

/// Observation model, forward map and failure counter bundled together.
pub struct Posterior<'a, T: Scalar, F: ?Sized> {
    pub obs: &'a ObservationModel<T>,
    pub forward: &'a F,
    failures: FailureCounter,
}

impl<'a, T: Scalar, F: ForwardModel<T> + ?Sized> Posterior<'a, T, F> {
    pub fn new(obs: &'a ObservationModel<T>, forward: &'a F) -> Self {
        Self {
            obs,
            forward,
            failures: FailureCounter::default(),
        }
    }

    pub fn potential(&self, u: &UnknownState<T>, a: &DiscretizationParam<T>) -> T {
        potential(u, a, self.obs, self.forward, &self.failures)
    }

    /// Solver failures seen so far through this posterior.
    pub fn failures(&self) -> u64 {
        self.failures.get()
    }
}
