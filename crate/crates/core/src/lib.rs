//! Joint Bayesian inference of unknown inputs and forward-model
//! discretizations.
//!
//! The sampler alternates preconditioned Crank-Nicolson updates of the
//! unknown `u` with reversible-jump (or parametric) updates of the
//! discretization `a`, so the grid adapts to where the data needs accuracy.
//! Three forward problems are provided: a Timoshenko cantilever beam, a
//! double-well SDE and a Poisson point-source problem on CVT meshes.

pub mod beam;
pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod harness;
pub mod model;
pub mod priors;
pub mod samplers;
pub mod scalar;
pub mod sde;

pub use error::{Error, Result, SolverFailure};
pub use model::{
    gamma_norm_sq, potential, ChainState, DiscretizationParam, Domain, FieldSamples, ForwardModel,
    Location, NoiseModel, ObservationModel, Posterior, Tallies, UnknownState,
};
pub use priors::{GaussianPrior, KPrior, PriorSpec, SquaredExponential};
pub use samplers::{run_gibbs, AKernel, ChainRecord, GibbsKernels, LocationProposal, SamplerConfig, UKernel};
pub use scalar::Scalar;

pub type ChainStateF64 = ChainState<f64>;
pub type ChainStateF32 = ChainState<f32>;
pub type DiscretizationParamF64 = DiscretizationParam<f64>;
pub type UnknownStateF64 = UnknownState<f64>;
pub type ObservationModelF64 = ObservationModel<f64>;
pub type ChainRecordF64 = ChainRecord<f64>;
