//! Metropolis-within-Gibbs over `(u, a)`.
//!
//! Stage I updates `u | a, y` (pCN for Gaussian priors, random-walk
//! Metropolis for box priors). Stage II updates `a | u, y`: with probability
//! `zeta` a fixed-dimension move (relocate one grid point, or perturb the
//! density parameter `theta`), otherwise a birth/death move on `k`.
//! Every proposal is symmetric with respect to the reference measure, so the
//! acceptance ratios only involve potential differences and the `k` prior.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{ChainState, DiscretizationParam, ForwardModel, Posterior, Tallies, UnknownState};
use crate::priors::{GaussianPrior, KPrior};
use crate::scalar::{std_normal, uniform, Scalar};

/// Lower and upper bounds of the Beta parameter box.
pub const THETA_BOX: (f64, f64) = (1.0, 10.0);

/// Run-level sampler settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub beta: f64,
    pub zeta: f64,
    pub n_iterations: usize,
    pub seed: u64,
    /// Store every `thin`-th state.
    pub thin: usize,
    /// Largest `|k~ - k|` of the symmetric birth/death proposal.
    pub k_block: usize,
    /// Fraction of iterations discarded before computing statistics.
    pub burn_in: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            beta: 0.08,
            zeta: 0.5,
            n_iterations: 1000,
            seed: 0,
            thin: 10,
            k_block: 1,
            burn_in: 0.2,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidParameter(format!("beta = {} not in [0, 1]", self.beta)));
        }
        if !(0.0..=1.0).contains(&self.zeta) {
            return Err(Error::InvalidParameter(format!("zeta = {} not in [0, 1]", self.zeta)));
        }
        if self.thin == 0 || self.k_block == 0 {
            return Err(Error::InvalidParameter("thin and k_block must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return Err(Error::InvalidParameter(format!("burn_in = {} not in [0, 1)", self.burn_in)));
        }
        Ok(())
    }
}

/// `min{1, exp(psi_cur - psi_prop)}`; an undefined difference rejects.
pub fn metropolis_acceptance<T: Scalar>(psi_cur: T, psi_prop: T) -> f64 {
    let d = (psi_cur - psi_prop).as_f64();
    if d.is_nan() {
        0.0
    } else {
        d.exp().min(1.0)
    }
}

/// `min{1, nu(k~)/nu(k) exp(psi_cur - psi_prop)}` from log prior masses.
pub fn birth_death_acceptance<T: Scalar>(
    log_nu_cur: f64,
    log_nu_prop: f64,
    psi_cur: T,
    psi_prop: T,
) -> f64 {
    if log_nu_prop == f64::NEG_INFINITY {
        return 0.0;
    }
    let d = (log_nu_prop - log_nu_cur) + (psi_cur - psi_prop).as_f64();
    if d.is_nan() {
        0.0
    } else {
        d.exp().min(1.0)
    }
}

fn accept<R: Rng + ?Sized>(prob: f64, rng: &mut R) -> bool {
    prob >= 1.0 || rng.gen::<f64>() < prob
}

/// Distribution of new grid-point locations.
#[derive(Debug, Clone, PartialEq)]
pub enum LocationProposal<T> {
    /// Uniform on the open interval `(lo, hi)`.
    UniformInterval { lo: T, hi: T },
    /// Uniform over a finite set of locations (small test problems).
    UniformChoice(Vec<T>),
}

impl<T: Scalar> LocationProposal<T> {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        match self {
            LocationProposal::UniformInterval { lo, hi } => loop {
                let x = uniform(rng, *lo, *hi);
                if x > *lo {
                    break x;
                }
            },
            LocationProposal::UniformChoice(set) => set[rng.gen_range(0..set.len())],
        }
    }
}

/// Stage I kernel.
#[derive(Debug, Clone)]
pub enum UKernel<T> {
    /// Preconditioned Crank-Nicolson around the prior mean.
    Pcn { prior: GaussianPrior<T>, beta: T },
    /// Gaussian random walk under a uniform prior on the open box `(lo, hi)`.
    RandomWalk { step: T, lo: Vec<T>, hi: Vec<T> },
    /// `u` held fixed.
    Fixed,
}

/// Stage II kernel.
#[derive(Debug, Clone)]
pub enum AKernel<T> {
    Grid {
        locations: LocationProposal<T>,
        k_prior: KPrior,
    },
    Density {
        step: T,
        k_prior: KPrior,
    },
    /// Fixed discretization (baseline runs).
    Fixed,
}

#[derive(Debug, Clone)]
pub struct GibbsKernels<T> {
    pub u: UKernel<T>,
    pub a: AKernel<T>,
}

/// One pCN update of `u`. Returns whether the proposal was accepted.
pub fn pcn_step<T, F, R>(
    state: &mut ChainState<T>,
    prior: &GaussianPrior<T>,
    beta: T,
    post: &Posterior<'_, T, F>,
    rng: &mut R,
) -> bool
where
    T: Scalar,
    F: ForwardModel<T> + ?Sized,
    R: Rng + ?Sized,
{
    state.tallies.u_proposed += 1;
    let shrink = (T::one() - beta * beta).sqrt() - T::one();
    let xi = prior.sample_centered(rng);
    let mut prop = state.u.clone();
    for ((p, &m), x) in prop.coords_mut().iter_mut().zip(prior.mean()).zip(xi) {
        *p = *p + shrink * (*p - m) + beta * x;
    }
    let psi = post.potential(&prop, &state.a);
    let ok = accept(metropolis_acceptance(state.cached_potential, psi), rng);
    if ok {
        state.u = prop;
        state.cached_potential = psi;
        state.tallies.u_accepted += 1;
    }
    ok
}

/// One random-walk Metropolis update of `u` under a uniform box prior.
pub fn random_walk_step<T, F, R>(
    state: &mut ChainState<T>,
    step: T,
    lo: &[T],
    hi: &[T],
    post: &Posterior<'_, T, F>,
    rng: &mut R,
) -> bool
where
    T: Scalar,
    F: ForwardModel<T> + ?Sized,
    R: Rng + ?Sized,
{
    state.tallies.u_proposed += 1;
    let mut prop = state.u.clone();
    for p in prop.coords_mut() {
        *p += step * std_normal::<T, _>(rng);
    }
    let inside = prop
        .coords()
        .iter()
        .zip(lo.iter().zip(hi))
        .all(|(x, (l, h))| x > l && x < h);
    if !inside {
        return false;
    }
    let psi = post.potential(&prop, &state.a);
    let ok = accept(metropolis_acceptance(state.cached_potential, psi), rng);
    if ok {
        state.u = prop;
        state.cached_potential = psi;
        state.tallies.u_accepted += 1;
    }
    ok
}

/// Replaces one uniformly chosen grid point by a fresh draw.
pub fn relocation_step<T, F, R>(
    state: &mut ChainState<T>,
    locations: &LocationProposal<T>,
    post: &Posterior<'_, T, F>,
    rng: &mut R,
) -> bool
where
    T: Scalar,
    F: ForwardModel<T> + ?Sized,
    R: Rng + ?Sized,
{
    state.tallies.relocation_proposed += 1;
    let DiscretizationParam::GridBased { points } = &state.a else {
        return false;
    };
    if points.is_empty() {
        return false;
    }
    let mut prop = points.clone();
    let idx = rng.gen_range(0..prop.len());
    prop[idx] = locations.draw(rng);
    let a = DiscretizationParam::GridBased { points: prop };
    let psi = post.potential(&state.u, &a);
    let ok = accept(metropolis_acceptance(state.cached_potential, psi), rng);
    if ok {
        state.a = a;
        state.cached_potential = psi;
        state.tallies.relocation_accepted += 1;
    }
    ok
}

/// Symmetric jump `k -> k + d`, `d` uniform on `{-b..-1, 1..b}`.
fn propose_k_jump<R: Rng + ?Sized>(k_block: usize, rng: &mut R) -> isize {
    let size = rng.gen_range(1..=k_block) as isize;
    if rng.gen::<bool>() {
        size
    } else {
        -size
    }
}

/// Birth/death move on `k`: births append uniform draws, deaths remove
/// uniformly chosen points. For density-based `a` only `k` changes.
pub fn birth_death_step<T, F, R>(
    state: &mut ChainState<T>,
    locations: &LocationProposal<T>,
    k_prior: &KPrior,
    k_block: usize,
    post: &Posterior<'_, T, F>,
    rng: &mut R,
) -> bool
where
    T: Scalar,
    F: ForwardModel<T> + ?Sized,
    R: Rng + ?Sized,
{
    state.tallies.birth_death_proposed += 1;
    let k = state.a.k();
    let d = propose_k_jump(k_block, rng);
    let k_new = k as isize + d;
    if k_new < 0 || !k_prior.contains(k_new as usize) {
        return false;
    }
    let k_new = k_new as usize;
    let a = match &state.a {
        DiscretizationParam::GridBased { points } => {
            let mut p = points.clone();
            if k_new > k {
                p.extend((k..k_new).map(|_| locations.draw(rng)));
            } else {
                for _ in k_new..k {
                    let idx = rng.gen_range(0..p.len());
                    p.swap_remove(idx);
                }
            }
            DiscretizationParam::GridBased { points: p }
        }
        DiscretizationParam::DensityBased { theta, .. } => DiscretizationParam::DensityBased {
            k: k_new,
            theta: *theta,
        },
    };
    let psi = post.potential(&state.u, &a);
    let prob = birth_death_acceptance(k_prior.log_pmf(k), k_prior.log_pmf(k_new), state.cached_potential, psi);
    let ok = accept(prob, rng);
    if ok {
        state.a = a;
        state.cached_potential = psi;
        state.tallies.birth_death_accepted += 1;
    }
    ok
}

/// Gaussian random walk on `theta` within the box `[1, 10]^4`.
pub fn density_param_step<T, F, R>(
    state: &mut ChainState<T>,
    step: T,
    post: &Posterior<'_, T, F>,
    rng: &mut R,
) -> bool
where
    T: Scalar,
    F: ForwardModel<T> + ?Sized,
    R: Rng + ?Sized,
{
    state.tallies.theta_proposed += 1;
    let DiscretizationParam::DensityBased { k, theta } = &state.a else {
        return false;
    };
    let mut prop = *theta;
    for t in prop.iter_mut() {
        *t += step * std_normal::<T, _>(rng);
    }
    let (lo, hi) = (T::lit(THETA_BOX.0), T::lit(THETA_BOX.1));
    if prop.iter().any(|t| !(*t >= lo && *t <= hi)) {
        return false;
    }
    let a = DiscretizationParam::DensityBased { k: *k, theta: prop };
    let psi = post.potential(&state.u, &a);
    let ok = accept(metropolis_acceptance(state.cached_potential, psi), rng);
    if ok {
        state.a = a;
        state.cached_potential = psi;
        state.tallies.theta_accepted += 1;
    }
    ok
}

/// A stored (thinned) state.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSample<T> {
    pub iteration: usize,
    pub u: UnknownState<T>,
    pub a: DiscretizationParam<T>,
    pub potential: T,
}

/// Output of [`run_gibbs`].
#[derive(Debug, Clone)]
pub struct ChainRecord<T> {
    pub samples: Vec<ChainSample<T>>,
    pub tallies: Tallies,
    pub n_iterations: usize,
    pub solver_failures: u64,
    pub final_state: ChainState<T>,
}

impl<T: Scalar> ChainRecord<T> {
    /// Stored samples with `iteration >= burn_in * n_iterations`.
    pub fn post_burn_in(&self, burn_in: f64) -> &[ChainSample<T>] {
        let cut = (burn_in * self.n_iterations as f64).ceil() as usize;
        let start = self.samples.partition_point(|s| s.iteration < cut);
        &self.samples[start..]
    }
}

/// Runs `config.n_iterations` Gibbs sweeps from `initial`.
pub fn run_gibbs<T, F>(
    initial: ChainState<T>,
    config: &SamplerConfig,
    kernels: &GibbsKernels<T>,
    post: &Posterior<'_, T, F>,
) -> Result<ChainRecord<T>>
where
    T: Scalar,
    F: ForwardModel<T> + ?Sized,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let failures_before = post.failures();
    let mut state = initial;
    let record = |s: &ChainState<T>| ChainSample {
        iteration: s.iteration,
        u: s.u.clone(),
        a: s.a.clone(),
        potential: s.cached_potential,
    };
    let mut samples = vec![record(&state)];
    for _ in 0..config.n_iterations {
        match &kernels.u {
            UKernel::Pcn { prior, beta } => {
                pcn_step(&mut state, prior, *beta, post, &mut rng);
            }
            UKernel::RandomWalk { step, lo, hi } => {
                random_walk_step(&mut state, *step, lo, hi, post, &mut rng);
            }
            UKernel::Fixed => {}
        }
        match &kernels.a {
            AKernel::Grid { locations, k_prior } => {
                if rng.gen::<f64>() < config.zeta {
                    relocation_step(&mut state, locations, post, &mut rng);
                } else {
                    birth_death_step(&mut state, locations, k_prior, config.k_block, post, &mut rng);
                }
            }
            AKernel::Density { step, k_prior } => {
                if rng.gen::<f64>() < config.zeta {
                    density_param_step(&mut state, *step, post, &mut rng);
                } else {
                    // Grid locations are irrelevant for density-based moves.
                    let none = LocationProposal::UniformChoice(Vec::new());
                    birth_death_step(&mut state, &none, k_prior, config.k_block, post, &mut rng);
                }
            }
            AKernel::Fixed => {}
        }
        state.iteration += 1;
        if state.iteration % config.thin == 0 {
            samples.push(record(&state));
        }
    }
    Ok(ChainRecord {
        samples,
        tallies: state.tallies,
        n_iterations: config.n_iterations,
        solver_failures: post.failures() - failures_before,
        final_state: state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::SolverFailure;
    use crate::model::{Domain, Location, NoiseModel, ObservationModel};
    use crate::priors::PriorSpec;
    use proptest::prelude::*;

    /// Output: first coordinate of `u` and the mean grid location.
    struct Toy;

    impl ForwardModel<f64> for Toy {
        fn output_dim(&self) -> usize {
            2
        }
        fn evaluate(
            &self,
            u: &UnknownState<f64>,
            a: &DiscretizationParam<f64>,
        ) -> std::result::Result<Vec<f64>, SolverFailure> {
            let p = a.sorted_points();
            let m = if p.is_empty() { 0.0 } else { p.iter().sum::<f64>() / p.len() as f64 };
            Ok(vec![u.coords()[0], m])
        }
    }

    /// Constant output: the potential never depends on `(u, a)`.
    struct Flat;

    impl ForwardModel<f64> for Flat {
        fn output_dim(&self) -> usize {
            2
        }
        fn evaluate(
            &self,
            _: &UnknownState<f64>,
            _: &DiscretizationParam<f64>,
        ) -> std::result::Result<Vec<f64>, SolverFailure> {
            Ok(vec![0.0, 0.0])
        }
    }

    /// Fails whenever a grid point lies beyond 5.
    struct Fragile;

    impl ForwardModel<f64> for Fragile {
        fn output_dim(&self) -> usize {
            2
        }
        fn evaluate(
            &self,
            _: &UnknownState<f64>,
            a: &DiscretizationParam<f64>,
        ) -> std::result::Result<Vec<f64>, SolverFailure> {
            if a.sorted_points().iter().any(|&p| p > 5.0) {
                Err(SolverFailure::NonFinite)
            } else {
                Ok(vec![0.0, 0.0])
            }
        }
    }

    fn obs() -> ObservationModel<f64> {
        ObservationModel::new(
            vec![Location::Line(1.0), Location::Line(2.0)],
            vec![0.5, 3.0],
            NoiseModel::isotropic(2, 0.1).unwrap(),
            &Domain::Interval { lo: 0.0, hi: 10.0 },
        )
        .unwrap()
    }

    fn vector_prior(dim: usize) -> GaussianPrior<f64> {
        GaussianPrior::from_spec(&PriorSpec::GaussianVector { mean: vec![1.0; dim], variance: 4.0 }).unwrap()
    }

    fn grid_kernels(k_prior: KPrior, beta: f64) -> GibbsKernels<f64> {
        GibbsKernels {
            u: UKernel::Pcn { prior: vector_prior(3), beta },
            a: AKernel::Grid {
                locations: LocationProposal::UniformInterval { lo: 0.0, hi: 10.0 },
                k_prior,
            },
        }
    }

    #[test]
    fn acceptance_formulas() {
        assert_eq!(metropolis_acceptance(1.0, 1.0), 1.0);
        assert_eq!(metropolis_acceptance(1.0, f64::INFINITY), 0.0);
        assert_eq!(metropolis_acceptance(f64::INFINITY, f64::INFINITY), 0.0);
        assert!((metropolis_acceptance(0.0, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        let p = KPrior::poisson(60.0);
        let up = birth_death_acceptance(p.log_pmf(60), p.log_pmf(61), 2.0, 2.0);
        assert!((up - 60.0 / 61.0).abs() < 1e-12);
        assert!((up - 0.9836).abs() < 1e-4);
        assert_eq!(birth_death_acceptance(p.log_pmf(60), p.log_pmf(59), 2.0, 2.0), 1.0);
    }

    #[test]
    fn beta_zero_keeps_u() {
        let o = obs();
        let post = Posterior::new(&o, &Toy);
        let u0 = UnknownState::FiniteVector(vec![0.3, -2.0, 7.0]);
        let init = ChainState::new(u0.clone(), DiscretizationParam::uniform_grid(5, 0.0, 10.0), &post);
        let cfg = SamplerConfig { beta: 0.0, n_iterations: 200, thin: 1, ..Default::default() };
        let rec = run_gibbs(init, &cfg, &grid_kernels(KPrior::poisson(5.0), 0.0), &post).unwrap();
        assert_eq!(rec.tallies.u_accepted, rec.tallies.u_proposed);
        assert!(rec.samples.iter().all(|s| s.u == u0));
    }

    #[test]
    fn zero_iterations_keep_initial_state() {
        let o = obs();
        let post = Posterior::new(&o, &Toy);
        let init = ChainState::new(
            UnknownState::FiniteVector(vec![0.0; 3]),
            DiscretizationParam::uniform_grid(3, 0.0, 10.0),
            &post,
        );
        let cfg = SamplerConfig { n_iterations: 0, ..Default::default() };
        let rec = run_gibbs(init.clone(), &cfg, &grid_kernels(KPrior::poisson(3.0), 0.1), &post).unwrap();
        assert_eq!(rec.samples.len(), 1);
        assert_eq!(rec.samples[0].a, init.a);
        assert_eq!(rec.final_state, init);
    }

    #[test]
    fn zeta_one_never_changes_k() {
        let o = obs();
        let post = Posterior::new(&o, &Toy);
        let init = ChainState::new(
            UnknownState::FiniteVector(vec![0.0; 3]),
            DiscretizationParam::uniform_grid(4, 0.0, 10.0),
            &post,
        );
        let cfg = SamplerConfig { zeta: 1.0, n_iterations: 500, thin: 1, ..Default::default() };
        let rec = run_gibbs(init, &cfg, &grid_kernels(KPrior::poisson(4.0), 0.1), &post).unwrap();
        assert_eq!(rec.tallies.birth_death_proposed, 0);
        assert!(rec.samples.iter().all(|s| s.a.k() == 4));
        assert!(rec.tallies.relocation_accepted > 0);
    }

    #[test]
    fn point_mass_fixes_k() {
        let o = obs();
        let post = Posterior::new(&o, &Toy);
        let init = ChainState::new(
            UnknownState::FiniteVector(vec![0.0; 3]),
            DiscretizationParam::uniform_grid(6, 0.0, 10.0),
            &post,
        );
        let cfg = SamplerConfig { zeta: 0.0, n_iterations: 300, thin: 1, k_block: 3, ..Default::default() };
        let rec = run_gibbs(init, &cfg, &grid_kernels(KPrior::PointMass(6), 0.1), &post).unwrap();
        assert_eq!(rec.tallies.birth_death_accepted, 0);
        assert!(rec.samples.iter().all(|s| s.a.k() == 6));
        assert_eq!(rec.solver_failures, 0);
    }

    #[test]
    fn constant_potential_accepts_every_relocation() {
        let o = obs();
        let post = Posterior::new(&o, &Flat);
        let mut state = ChainState::new(
            UnknownState::FiniteVector(vec![0.0]),
            DiscretizationParam::uniform_grid(3, 0.0, 10.0),
            &post,
        );
        let loc = LocationProposal::UniformInterval { lo: 0.0, hi: 10.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(relocation_step(&mut state, &loc, &post, &mut rng));
        }
    }

    #[test]
    fn blown_up_relocations_are_rejected() {
        let o = obs();
        let post = Posterior::new(&o, &Fragile);
        let mut state = ChainState::new(
            UnknownState::FiniteVector(vec![0.0]),
            DiscretizationParam::grid(vec![1.0, 2.0]),
            &post,
        );
        let loc = LocationProposal::UniformInterval { lo: 6.0, hi: 10.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            assert!(!relocation_step(&mut state, &loc, &post, &mut rng));
        }
        assert_eq!(post.failures(), 50);
        assert_eq!(state.a, DiscretizationParam::grid(vec![1.0, 2.0]));
    }

    #[test]
    fn empty_grid_relocation_is_rejected() {
        let o = obs();
        let post = Posterior::new(&o, &Flat);
        let mut state = ChainState::new(UnknownState::FiniteVector(vec![0.0]), DiscretizationParam::grid(vec![]), &post);
        let loc = LocationProposal::UniformInterval { lo: 0.0, hi: 10.0 };
        assert!(!relocation_step(&mut state, &loc, &post, &mut ChaCha8Rng::seed_from_u64(3)));
        assert_eq!(state.tallies.relocation_proposed, 1);
    }

    #[test]
    fn theta_outside_box_rejected_inside_accepted() {
        let o = obs();
        let post = Posterior::new(&o, &Flat);
        let theta = [1.0, 10.0, 5.0, 5.0];
        let mut state = ChainState::new(
            UnknownState::PlanarPoint([0.5, 0.5]),
            DiscretizationParam::DensityBased { k: 10, theta },
            &post,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut accepted = 0;
        for _ in 0..200 {
            let before = state.a.clone();
            if density_param_step(&mut state, 0.5, &post, &mut rng) {
                accepted += 1;
                if let DiscretizationParam::DensityBased { theta, .. } = &state.a {
                    assert!(theta.iter().all(|t| (1.0..=10.0).contains(t)));
                }
            } else {
                assert_eq!(state.a, before);
            }
        }
        assert!(accepted > 0);
        assert_eq!(state.tallies.theta_accepted, accepted);
    }

    #[test]
    fn cached_potential_stays_consistent() {
        let o = obs();
        let post = Posterior::new(&o, &Toy);
        let init = ChainState::new(
            UnknownState::FiniteVector(vec![0.0; 3]),
            DiscretizationParam::uniform_grid(4, 0.0, 10.0),
            &post,
        );
        let cfg = SamplerConfig { n_iterations: 2000, thin: 1, beta: 0.3, ..Default::default() };
        let rec = run_gibbs(init, &cfg, &grid_kernels(KPrior::poisson(4.0), 0.3), &post).unwrap();
        for s in &rec.samples {
            let fresh = post.potential(&s.u, &s.a);
            assert!((fresh - s.potential).abs() <= 1e-10 * fresh.abs().max(1.0));
        }
        assert!(rec.tallies.u_accepted > 0 && rec.tallies.birth_death_accepted > 0);
    }

    #[test]
    fn random_walk_respects_box() {
        let o = obs();
        let post = Posterior::new(&o, &Flat);
        let init = ChainState::new(UnknownState::PlanarPoint([0.5, 0.5]), DiscretizationParam::grid(vec![]), &post);
        let kernels = GibbsKernels {
            u: UKernel::RandomWalk { step: 0.3, lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] },
            a: AKernel::Fixed,
        };
        let cfg = SamplerConfig { n_iterations: 1000, thin: 1, ..Default::default() };
        let rec = run_gibbs(init, &cfg, &kernels, &post).unwrap();
        for s in &rec.samples {
            assert!(s.u.validate().is_ok());
        }
        let t = rec.tallies;
        assert!(t.u_accepted > 0 && t.u_accepted < t.u_proposed);
    }

    #[test]
    fn run_is_deterministic() {
        let o = obs();
        let post = Posterior::new(&o, &Toy);
        let init = ChainState::new(
            UnknownState::FiniteVector(vec![0.0; 3]),
            DiscretizationParam::uniform_grid(4, 0.0, 10.0),
            &post,
        );
        let cfg = SamplerConfig { n_iterations: 300, seed: 77, ..Default::default() };
        let k = grid_kernels(KPrior::poisson(4.0), 0.2);
        let a = run_gibbs(init.clone(), &cfg, &k, &post).unwrap();
        let b = run_gibbs(init, &cfg, &k, &post).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.tallies, b.tallies);
    }

    #[test]
    fn post_burn_in_cuts_prefix() {
        let o = obs();
        let post = Posterior::new(&o, &Flat);
        let init = ChainState::new(UnknownState::FiniteVector(vec![0.0; 3]), DiscretizationParam::grid(vec![1.0]), &post);
        let cfg = SamplerConfig { n_iterations: 100, thin: 10, ..Default::default() };
        let rec = run_gibbs(init, &cfg, &grid_kernels(KPrior::poisson(3.0), 0.1), &post).unwrap();
        assert_eq!(rec.samples.len(), 11);
        let kept = rec.post_burn_in(0.2);
        assert_eq!(kept.first().unwrap().iteration, 20);
        assert_eq!(kept.len(), 9);
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(SamplerConfig { beta: 1.5, ..Default::default() }.validate().is_err());
        assert!(SamplerConfig { zeta: -0.1, ..Default::default() }.validate().is_err());
        assert!(SamplerConfig { thin: 0, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn acceptance_pair_symmetry(p1 in 0.0f64..50.0, p2 in 0.0f64..50.0) {
            let fwd = metropolis_acceptance(p1, p2);
            let rev = metropolis_acceptance(p2, p1);
            let r = (p1 - p2).exp();
            prop_assert!((fwd * rev - r.min(1.0 / r)).abs() <= 1e-12 * r.min(1.0 / r).max(1e-300));
            prop_assert!(fwd == 1.0 || rev == 1.0);
        }

        #[test]
        fn birth_death_pair_symmetry(k in 3usize..200, p1 in 0.0f64..20.0, p2 in 0.0f64..20.0) {
            let nu = KPrior::poisson(60.0);
            let fwd = birth_death_acceptance(nu.log_pmf(k), nu.log_pmf(k + 1), p1, p2);
            let rev = birth_death_acceptance(nu.log_pmf(k + 1), nu.log_pmf(k), p2, p1);
            let r = (nu.log_pmf(k + 1) - nu.log_pmf(k) + p1 - p2).exp();
            let expected = r.min(1.0 / r);
            prop_assert!((fwd * rev - expected).abs() <= 1e-10 * expected);
        }
    }
}
