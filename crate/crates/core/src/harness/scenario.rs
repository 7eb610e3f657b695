//! Data generation and chain runs for the four experiments.

use std::time::Instant;


use super::config::{ScenarioConfig, ScenarioKind};
use crate::beam::{self, BeamForward};
use crate::diagnostics::{
    acceptance_summary, grid_histogram, mean_fraction_in, percentile_bands, reconstruction_error,
    AcceptanceSummary, GridHistogram, PercentileBands, ReconstructionError,
};
use crate::error::{Error, Result, SolverFailure};
use crate::fem::{self, FemForward, Mesh};
use crate::model::{
    uniform_abscissae, ChainState, DiscretizationParam, FieldSamples, ForwardModel, ObservationModel,
    Posterior, UnknownState,
};
use crate::priors::{GaussianPrior, KPrior, PriorSpec, SquaredExponential};
use crate::samplers::{run_gibbs, AKernel, ChainRecord, GibbsKernels, LocationProposal, UKernel};
use crate::sde::{euler_maruyama, SdeForward, SdePath};

/// Percentile levels written to `bands.csv`.
pub const LEVELS: [f64; 5] = [5.0, 10.0, 50.0, 90.0, 95.0];

/// Grid-histogram buckets hold this many counts each.
pub const BUCKET_WIDTH: usize = 2;

/// The forward model of a scenario.
#[derive(Debug)]
pub enum Forward {
    Beam(BeamForward<f64>),
    Sde(SdeForward<f64>),
    Fem(FemForward<f64>),
}

impl ForwardModel<f64> for Forward {
    fn output_dim(&self) -> usize {
        match self {
            Forward::Beam(f) => f.output_dim(),
            Forward::Sde(f) => f.output_dim(),
            Forward::Fem(f) => f.output_dim(),
        }
    }

    fn evaluate(
        &self,
        u: &UnknownState<f64>,
        a: &DiscretizationParam<f64>,
    ) -> std::result::Result<Vec<f64>, SolverFailure> {
        match self {
            Forward::Beam(f) => f.evaluate(u, a),
            Forward::Sde(f) => f.evaluate(u, a),
            Forward::Fem(f) => f.evaluate(u, a),
        }
    }
}

pub fn build_forward(cfg: &ScenarioConfig) -> Result<Forward> {
    Ok(match cfg.kind {
        ScenarioKind::BeamDiscrete | ScenarioKind::BeamContinuous => {
            Forward::Beam(BeamForward::new(cfg.beam.cfg.clone(), cfg.beam.sensors_for(cfg.layout))?)
        }
        ScenarioKind::Sde => Forward::Sde(SdeForward::new(cfg.sde.cfg.clone())?),
        ScenarioKind::SourceDetection => Forward::Fem(FemForward::new(cfg.fem.cfg.clone())?),
    })
}

/// Piecewise-constant moduli of the five beam segments.
pub const BEAM_SEGMENT_MODULI: [f64; 5] = [190.0, 213.0, 195.0, 208.0, 200.0];

/// Smooth modulus profile used as the continuous ground truth.
pub fn beam_truth_profile(x: f64) -> f64 {
    200.0 + 6.0 * (1.3 * x).sin() + 4.0 * (0.6 * x + 0.5).cos()
}

fn beam_grid(cfg: &ScenarioConfig) -> std::sync::Arc<Vec<f64>> {
    uniform_abscissae(0.0, cfg.beam.cfg.length, cfg.beam.representation_intervals)
}

/// Synthetic observations plus everything known about the truth.
#[derive(Debug, Clone)]
pub struct DataSet {
    pub obs: ObservationModel<f64>,
    pub truth: UnknownState<f64>,
    /// Noise-free output of the reference discretization.
    pub clean: Vec<f64>,
    /// True SDE trajectory on the representation grid.
    pub trajectory: Option<SdePath<f64>>,
}

pub fn generate_data(cfg: &ScenarioConfig, forward: &Forward) -> Result<DataSet> {
    let seed = cfg.data_seed;
    let mut set = match (cfg.kind, forward) {
        (ScenarioKind::BeamDiscrete | ScenarioKind::BeamContinuous, Forward::Beam(f)) => {
            let truth = if cfg.kind == ScenarioKind::BeamDiscrete {
                UnknownState::FiniteVector(BEAM_SEGMENT_MODULI.to_vec())
            } else {
                let grid = beam_grid(cfg);
                let values = grid.iter().map(|&x| beam_truth_profile(x)).collect();
                UnknownState::Field(FieldSamples::new(grid, values)?)
            };
            let (obs, clean) = beam::generate_beam_data(&truth, f, seed)?;
            DataSet { obs, truth, clean, trajectory: None }
        }
        (ScenarioKind::Sde, Forward::Sde(f)) => {
            let (obs, t) = crate::sde::generate_sde_data(&f.cfg, seed)?;
            DataSet { obs, truth: UnknownState::Field(t.u), clean: t.clean, trajectory: Some(t.path) }
        }
        (ScenarioKind::SourceDetection, Forward::Fem(f)) => {
            let (obs, clean) = fem::generate_fem_data(f, cfg.fem.source, seed)?;
            DataSet { obs, truth: UnknownState::PlanarPoint(cfg.fem.source), clean, trajectory: None }
        }
        _ => return Err(Error::InvalidParameter("forward model does not match the scenario".into())),
    };
    if cfg.zero_noise {
        set.obs = ObservationModel::new(
            set.obs.locations().to_vec(),
            set.clean.clone(),
            set.obs.noise().clone(),
            &domain(forward),
        )?;
    }
    Ok(set)
}

fn domain(forward: &Forward) -> crate::model::Domain<f64> {
    match forward {
        Forward::Beam(f) => f.domain(),
        Forward::Sde(f) => f.domain(),
        Forward::Fem(f) => f.domain(),
    }
}

/// Prior, kernels and starting point of a chain.
pub struct ChainSetup {
    pub kernels: GibbsKernels<f64>,
    pub initial_u: UnknownState<f64>,
    pub initial_a: DiscretizationParam<f64>,
}

pub fn chain_setup(cfg: &ScenarioConfig) -> Result<ChainSetup> {
    let beta = cfg.sampler.beta;
    match cfg.kind {
        ScenarioKind::BeamDiscrete | ScenarioKind::BeamContinuous => {
            let b = &cfg.beam;
            let length = b.cfg.length;
            let (spec, k_prior, k0) = if cfg.kind == ScenarioKind::BeamDiscrete {
                let spec = PriorSpec::GaussianVector { mean: vec![b.prior_mean; 5], variance: b.prior_variance };
                (spec, KPrior::PointMass(b.k_fixed), b.k_fixed)
            } else {
                let spec = PriorSpec::GaussianProcess {
                    mean: b.prior_mean,
                    kernel: SquaredExponential { variance: b.gp_variance, two_ell_sq: b.gp_two_ell_sq },
                    grid: beam_grid(cfg),
                };
                let mut kp = KPrior::poisson(b.k_prior_mean);
                if let KPrior::Poisson { k_min, k_max, .. } = &mut kp {
                    *k_min = b.k_min;
                    if let Some(m) = b.k_max {
                        *k_max = m;
                    }
                }
                (spec, kp, b.k_prior_mean.round() as usize)
            };
            let prior = GaussianPrior::from_spec(&spec)?;
            let a = if cfg.baseline {
                AKernel::Fixed
            } else {
                AKernel::Grid { locations: LocationProposal::UniformInterval { lo: 0.0, hi: length }, k_prior }
            };
            Ok(ChainSetup {
                initial_u: prior.mean_state(),
                initial_a: DiscretizationParam::uniform_grid(k0, 0.0, length),
                kernels: GibbsKernels { u: UKernel::Pcn { prior, beta }, a },
            })
        }
        ScenarioKind::Sde => {
            let s = &cfg.sde;
            let prior = GaussianPrior::from_spec(&s.cfg.wiener_prior())?;
            let (t0, t_end) = (s.cfg.t0, s.cfg.t_end);
            let a = if cfg.baseline {
                AKernel::Fixed
            } else {
                let loc = LocationProposal::UniformInterval { lo: t0, hi: t_end };
                AKernel::Grid { locations: loc, k_prior: KPrior::PointMass(s.k) }
            };
            let initial_a = DiscretizationParam::uniform_grid(s.k, t0, t_end);
            Ok(ChainSetup {
                initial_u: prior.mean_state(),
                initial_a,
                kernels: GibbsKernels { u: UKernel::Pcn { prior, beta }, a },
            })
        }
        ScenarioKind::SourceDetection => {
            let f = &cfg.fem;
            let a = if cfg.baseline {
                AKernel::Fixed
            } else {
                AKernel::Density { step: f.theta_step, k_prior: KPrior::PointMass(f.k) }
            };
            Ok(ChainSetup {
                initial_u: UnknownState::PlanarPoint(f.initial_source),
                initial_a: DiscretizationParam::DensityBased { k: f.k, theta: f.initial_theta },
                kernels: GibbsKernels {
                    u: UKernel::RandomWalk { step: f.source_step, lo: vec![0.0; 2], hi: vec![1.0; 2] },
                    a,
                },
            })
        }
    }
}

/// Abscissae of the coordinates of `u` (grid for fields, index otherwise).
pub fn u_coordinates(u: &UnknownState<f64>) -> Vec<f64> {
    match u {
        UnknownState::Field(f) => f.grid().to_vec(),
        _ => (0..u.coords().len()).map(|i| i as f64).collect(),
    }
}

/// Everything derived from one chain.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub record: ChainRecord<f64>,
    pub acceptance: AcceptanceSummary,
    pub runtime_secs: f64,
    /// Iteration index of the first post-burn-in sample.
    pub n_post: usize,
    pub u_coords: Vec<f64>,
    pub u_bands: PercentileBands,
    /// Pushforward samples `(iteration, G^{a_n}(u_n))`.
    pub outputs: Vec<(usize, Vec<f64>)>,
    pub output_bands: PercentileBands,
    pub sensor_coords: Vec<Vec<f64>>,
    pub reconstruction: ReconstructionError,
    /// Per-sensor RMS distance of the chain pushforward to the reference output.
    pub pushforward_rms: Vec<f64>,
    pub failed_outputs: usize,
    pub histogram: Option<GridHistogram>,
    /// Mean fraction of grid points up to the last sensor.
    pub fraction_before_last_sensor: Option<f64>,
    /// SDE trajectories of posterior paths on the representation grid.
    pub trajectory_bands: Option<(Vec<f64>, PercentileBands)>,
    /// Final FEM mesh and interior-node density ratio top-right / bottom-left.
    pub final_mesh: Option<Mesh<f64>>,
    pub mesh_density_ratio: Option<f64>,
    /// Pushforward through the fine reference mesh, RMS to the reference.
    pub fine_pushforward_rms: Option<Vec<f64>>,
    pub posterior_mean_u: Vec<f64>,
    /// Traces of `u` at fixed abscissae (continuous beam).
    pub traces: Vec<(f64, Vec<f64>)>,
}

/// Runs one chain of `cfg` against `data`.
pub fn run_chain(cfg: &ScenarioConfig, forward: &Forward, data: &DataSet) -> Result<RunResult> {
    cfg.validate()?;
    let start = Instant::now();
    let setup = chain_setup(cfg)?;
    let post = Posterior::new(&data.obs, forward);
    let initial = ChainState::new(setup.initial_u, setup.initial_a, &post);
    let mut sampler = cfg.sampler.clone();
    sampler.seed = cfg.chain_seed;
    let record = run_gibbs(initial, &sampler, &setup.kernels, &post)?;
    let runtime_secs = start.elapsed().as_secs_f64();
    summarize_chain(cfg, forward, data, record, runtime_secs)
}

fn summarize_chain(
    cfg: &ScenarioConfig,
    forward: &Forward,
    data: &DataSet,
    record: ChainRecord<f64>,
    runtime_secs: f64,
) -> Result<RunResult> {
    let post = record.post_burn_in(cfg.sampler.burn_in);
    if post.is_empty() {
        return Err(Error::EmptyChain);
    }
    let u_coords = u_coordinates(&post[0].u);
    let us: Vec<&[f64]> = post.iter().map(|s| s.u.coords()).collect();
    let u_bands = percentile_bands(&us, &LEVELS)?;
    let posterior_mean_u = u_bands.mean.clone();

    let mut outputs = Vec::with_capacity(post.len());
    let mut failed_outputs = 0;
    for s in post {
        match forward.evaluate(&s.u, &s.a) {
            Ok(o) => outputs.push((s.iteration, o)),
            Err(_) => failed_outputs += 1,
        }
    }
    if outputs.is_empty() {
        return Err(Error::EmptyChain);
    }
    let out_refs: Vec<&[f64]> = outputs.iter().map(|(_, o)| o.as_slice()).collect();
    let output_bands = percentile_bands(&out_refs, &LEVELS)?;
    let reconstruction = reconstruction_error(&out_refs, &data.clean)?;
    let pushforward_rms = rms_to(&out_refs, &data.clean);
    let sensor_coords = data
        .obs
        .locations()
        .iter()
        .map(|l| match l {
            crate::model::Location::Line(x) => vec![*x],
            crate::model::Location::Plane(p) => p.to_vec(),
        })
        .collect();

    let grids: Vec<Vec<f64>> = post
        .iter()
        .filter_map(|s| match &s.a {
            DiscretizationParam::GridBased { points } => Some(points.clone()),
            _ => None,
        })
        .collect();
    let grid_refs: Vec<&[f64]> = grids.iter().map(Vec::as_slice).collect();
    let (histogram, fraction_before_last_sensor) = if grid_refs.is_empty() {
        (None, None)
    } else {
        let (n_int, last) = match forward {
            Forward::Beam(f) => (f.cfg.length.round() as usize, f.sensors.iter().copied().fold(0.0, f64::max)),
            Forward::Sde(f) => (f.cfg.t_end.round() as usize, f.cfg.horizon()),
            Forward::Fem(_) => unreachable!("FEM runs use density parameters"),
        };
        (
            Some(grid_histogram(&grid_refs, n_int.max(1), BUCKET_WIDTH)?),
            Some(mean_fraction_in(&grid_refs, 0.0, last)?),
        )
    };

    let trajectory_bands = match forward {
        Forward::Sde(f) => {
            let grid = f.cfg.representation_grid();
            let paths: Vec<Vec<f64>> = post
                .iter()
                .filter_map(|s| match &s.u {
                    UnknownState::Field(u) => euler_maruyama(u, &grid, &f.cfg, f.cfg.t_end).ok().map(|p| p.z),
                    _ => None,
                })
                .collect();
            if paths.is_empty() {
                None
            } else {
                let refs: Vec<&[f64]> = paths.iter().map(Vec::as_slice).collect();
                Some((grid.to_vec(), percentile_bands(&refs, &LEVELS)?))
            }
        }
        _ => None,
    };

    let (final_mesh, mesh_density_ratio, fine_pushforward_rms) = match forward {
        Forward::Fem(f) => {
            let mesh = f.mesh(&record.final_state.a)?;
            let count = |lo: f64, hi: f64| {
                mesh.nodes
                    .iter()
                    .zip(&mesh.boundary)
                    .filter(|(p, b)| !**b && p.iter().all(|c| *c >= lo && *c <= hi))
                    .count()
            };
            let (top, bottom) = (count(0.7, 1.0), count(0.0, 0.3));
            let ratio = if bottom == 0 { f64::INFINITY } else { top as f64 / bottom as f64 };
            let fine = DiscretizationParam::DensityBased { k: cfg.fem.reference_k, theta: [1.0; 4] };
            let fine_out: Vec<Vec<f64>> = post.iter().filter_map(|s| f.evaluate(&s.u, &fine).ok()).collect();
            let refs: Vec<&[f64]> = fine_out.iter().map(Vec::as_slice).collect();
            (Some(mesh), Some(ratio), Some(rms_to(&refs, &data.clean)))
        }
        _ => (None, None, None),
    };

    let traces = match &post[0].u {
        UnknownState::Field(_) if cfg.kind.is_beam() => [4.0, 8.0]
            .iter()
            .map(|&x| {
                let t = record
                    .samples
                    .iter()
                    .map(|s| match &s.u {
                        UnknownState::Field(u) => u.eval(x),
                        _ => f64::NAN,
                    })
                    .collect();
                (x, t)
            })
            .collect(),
        _ => Vec::new(),
    };

    Ok(RunResult {
        acceptance: acceptance_summary(&record.tallies),
        n_post: post.len(),
        record,
        runtime_secs,
        u_coords,
        u_bands,
        output_bands,
        sensor_coords,
        reconstruction,
        pushforward_rms,
        failed_outputs,
        histogram,
        fraction_before_last_sensor,
        trajectory_bands,
        final_mesh,
        mesh_density_ratio,
        fine_pushforward_rms,
        posterior_mean_u,
        traces,
        outputs,
    })
}

fn rms_to(outputs: &[&[f64]], reference: &[f64]) -> Vec<f64> {
    let n = outputs.len().max(1) as f64;
    (0..reference.len())
        .map(|i| (outputs.iter().map(|o| (o[i] - reference[i]).powi(2)).sum::<f64>() / n).sqrt())
        .collect()
}

/// Runs `n_chains` chains with seeds `chain_seed, chain_seed + 1, ...`
/// concurrently, each with its own forward model.
pub fn run_chains(cfg: &ScenarioConfig, data: &DataSet, n_chains: usize) -> Result<Vec<RunResult>> {
    let n = n_chains.max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..n)
            .map(|i| {
                let c = cfg.clone().with_chain_seed(cfg.chain_seed.wrapping_add(i as u64));
                scope.spawn(move || {
                    let forward = build_forward(&c)?;
                    run_chain(&c, &forward, data)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::InvalidParameter("chain thread panicked".into()))))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ScenarioKind) -> ScenarioConfig {
        let mut c = ScenarioConfig::defaults(kind);
        c.sampler.n_iterations = 60;
        c.fem.k = 20;
        c.fem.reference_k = 60;
        c
    }

    #[test]
    fn zero_noise_data_equals_clean_output() {
        let mut c = small(ScenarioKind::BeamDiscrete);
        c.zero_noise = true;
        let f = build_forward(&c).unwrap();
        let d = generate_data(&c, &f).unwrap();
        assert_eq!(d.obs.data(), d.clean.as_slice());
    }

    #[test]
    fn default_data_settings() {
        let c = small(ScenarioKind::Sde);
        let f = build_forward(&c).unwrap();
        let d = generate_data(&c, &f).unwrap();
        assert_eq!(d.obs.len(), 24);
        assert!((d.obs.noise().variances()[0] - 0.01).abs() < 1e-15);
        let c = ScenarioConfig::defaults(ScenarioKind::SourceDetection);
        assert_eq!(c.fem.cfg.sensors.len(), 25);
        assert_eq!(c.fem.source, [0.85, 0.85]);
        assert!((c.fem.cfg.noise_variance - 0.05f64.powi(2)).abs() < 1e-15);
    }

    #[test]
    fn every_scenario_runs_briefly() {
        for kind in [
            ScenarioKind::BeamDiscrete,
            ScenarioKind::BeamContinuous,
            ScenarioKind::Sde,
            ScenarioKind::SourceDetection,
        ] {
            for baseline in [false, true] {
                let mut c = small(kind);
                c.baseline = baseline;
                let f = build_forward(&c).unwrap();
                let d = generate_data(&c, &f).unwrap();
                let r = run_chain(&c, &f, &d).unwrap();
                assert_eq!(r.record.samples.len(), 7);
                assert_eq!(r.u_bands.mean.len(), r.u_coords.len());
                if baseline {
                    assert!(r.record.samples.iter().all(|s| s.a == r.record.samples[0].a));
                }
            }
        }
    }

    #[test]
    fn concurrent_chains_use_distinct_seeds() {
        let c = small(ScenarioKind::BeamDiscrete);
        let f = build_forward(&c).unwrap();
        let d = generate_data(&c, &f).unwrap();
        let rs = run_chains(&c, &d, 2).unwrap();
        assert_eq!(rs.len(), 2);
        assert_ne!(rs[0].record.final_state.u, rs[1].record.final_state.u);
        let solo = run_chain(&c, &f, &d).unwrap();
        assert_eq!(solo.record.final_state.u, rs[0].record.final_state.u);
    }
}
