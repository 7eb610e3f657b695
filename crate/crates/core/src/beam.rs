//! Timoshenko cantilever under a tip point load.
//!
//! The beam is clamped at `x = 0` and loaded by a hanging mass at `x = L`.
//! With `G = E / (2 (1 + r))` the static equations are marched left to right
//! in the first-order form
//!
//! ```text
//! z'   = phi - s / G
//! phi' = m / (E I)
//! m'   = kappa A s
//! s'   = 0
//! ```
//!
//! where `m = E I phi'` is the bending moment and `s` the (scaled) shear.
//! The initial values `z = phi = 0`, `m = P L`, `s = -P / (kappa A)` encode
//! the tip load, so `m(x) = P (L - x)`. Explicit Euler on an arbitrary
//! sorted grid makes `z(x_j)` depend only on the modulus at nodes left of
//! `x_j`.
//!
//! Moduli are carried in GPa and converted to Pa with `modulus_unit`;
//! deflections are reported in units of `deflection_unit` metres.

use std::f64::consts::{PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result, SolverFailure};
use crate::model::{
    DiscretizationParam, Domain, FieldSamples, ForwardModel, Location, NoiseModel,
    ObservationModel, UnknownState,
};
use crate::scalar::{interp_linear, Scalar};

/// Geometry, material and observation constants.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamConfig<T> {
    pub length: T,
    pub width: T,
    pub height: T,
    pub poisson_ratio: T,
    pub shear_correction: T,
    pub tip_mass: T,
    pub gravity: T,
    /// Mollifier width of the observation functionals.
    pub delta: T,
    pub noise_variance: T,
    /// Pascals per unit of the modulus field (GPa).
    pub modulus_unit: T,
    /// Metres per unit of reported deflection.
    pub deflection_unit: T,
}

impl<T: Scalar> Default for BeamConfig<T> {
    fn default() -> Self {
        Self {
            length: T::lit(10.0),
            width: T::lit(0.1),
            height: T::lit(0.3),
            poisson_ratio: T::lit(0.28),
            shear_correction: T::lit(5.0 / 6.0),
            tip_mass: T::lit(5.0),
            gravity: T::lit(9.81),
            delta: T::lit(0.3),
            noise_variance: T::lit(1e-3),
            modulus_unit: T::lit(1e9),
            deflection_unit: T::lit(7e-6),
        }
    }
}

impl<T: Scalar> BeamConfig<T> {
    pub fn area(&self) -> T {
        self.width * self.height
    }

    pub fn inertia(&self) -> T {
        self.width * self.height * self.height * self.height / T::lit(12.0)
    }

    /// Tip load `P` in newtons.
    pub fn load(&self) -> T {
        self.tip_mass * self.gravity
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("length", self.length),
            ("width", self.width),
            ("height", self.height),
            ("poisson_ratio", self.poisson_ratio),
            ("shear_correction", self.shear_correction),
            ("gravity", self.gravity),
            ("delta", self.delta),
            ("noise_variance", self.noise_variance),
            ("modulus_unit", self.modulus_unit),
            ("deflection_unit", self.deflection_unit),
        ];
        for (name, v) in fields {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("beam {name} must be positive, got {v}")));
            }
        }
        if self.tip_mass < T::zero() {
            return Err(Error::InvalidParameter("tip mass must be nonnegative".into()));
        }
        Ok(())
    }

    /// Closed-form Timoshenko tip deflection (metres) of a homogeneous beam.
    pub fn analytic_tip_deflection(&self, modulus: T) -> T {
        let e = modulus * self.modulus_unit;
        let g = e / (T::lit(2.0) * (T::one() + self.poisson_ratio));
        let (p, l) = (self.load(), self.length);
        p * l * l * l / (T::lit(3.0) * e * self.inertia())
            + p * l / (self.shear_correction * self.area() * g)
    }
}

/// Bending moment `P (L - x)` carried by the section at `x`.
pub fn moment_profile<T: Scalar>(x: T, cfg: &BeamConfig<T>) -> T {
    cfg.load() * (cfg.length - x)
}

/// Young's modulus along the beam, in GPa.
#[derive(Debug, Clone, PartialEq)]
pub enum YoungsModulusField<T> {
    /// Equal-length segments covering `[0, L]`.
    PiecewiseConstant(Vec<T>),
    Continuous(FieldSamples<T>),
}

impl<T: Scalar> YoungsModulusField<T> {
    pub fn from_state(u: &UnknownState<T>) -> std::result::Result<Self, SolverFailure> {
        match u {
            UnknownState::FiniteVector(v) if !v.is_empty() => Ok(Self::PiecewiseConstant(v.clone())),
            UnknownState::Field(f) => Ok(Self::Continuous(f.clone())),
            _ => Err(SolverFailure::Incompatible("beam modulus must be a vector or a field")),
        }
    }

    pub fn at(&self, x: T, length: T) -> T {
        match self {
            YoungsModulusField::PiecewiseConstant(seg) => {
                let n = seg.len();
                let idx = (x / length * T::from_count(n)).floor().to_usize().unwrap_or(0);
                seg[idx.min(n - 1)]
            }
            YoungsModulusField::Continuous(f) => f.eval(x),
        }
    }
}

/// Nodal solution of the marching scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSolution<T> {
    pub nodes: Vec<T>,
    /// Deflection in metres.
    pub z: Vec<T>,
    pub phi: Vec<T>,
    pub moment: Vec<T>,
}

impl<T: Scalar> BeamSolution<T> {
    /// Linear interpolant of the deflection.
    pub fn deflection(&self, x: T) -> T {
        interp_linear(&self.nodes, &self.z, x)
    }

    pub fn tip(&self) -> T {
        *self.z.last().expect("solution has nodes")
    }
}

/// `0, sorted interior points, L`.
pub fn beam_nodes<T: Scalar>(interior: &[T], length: T) -> Vec<T> {
    let mut nodes = Vec::with_capacity(interior.len() + 2);
    nodes.push(T::zero());
    nodes.extend_from_slice(interior);
    nodes[1..].sort_by(|a, b| a.partial_cmp(b).expect("grid points are not NaN"));
    nodes.push(length);
    nodes
}

/// Explicit Euler march over `nodes` (sorted, from 0 to L).
pub fn solve_beam_on_nodes<T: Scalar>(
    field: &YoungsModulusField<T>,
    nodes: &[T],
    cfg: &BeamConfig<T>,
) -> std::result::Result<BeamSolution<T>, SolverFailure> {
    let n = nodes.len();
    let ka = cfg.shear_correction * cfg.area();
    let inertia = cfg.inertia();
    let two_one_r = T::lit(2.0) * (T::one() + cfg.poisson_ratio);
    let p = cfg.load();
    let (mut z, mut phi, mut m) = (T::zero(), T::zero(), p * cfg.length);
    let s = -p / ka;
    let mut sol = BeamSolution {
        nodes: nodes.to_vec(),
        z: Vec::with_capacity(n),
        phi: Vec::with_capacity(n),
        moment: Vec::with_capacity(n),
    };
    for j in 0..n {
        sol.z.push(z);
        sol.phi.push(phi);
        sol.moment.push(m);
        if j + 1 == n {
            break;
        }
        let x = nodes[j];
        let u = field.at(x, cfg.length);
        if !(u > T::zero()) {
            return Err(SolverFailure::NonPositiveModulus { value: u.as_f64(), at: x.as_f64() });
        }
        let e = u * cfg.modulus_unit;
        let g = e / two_one_r;
        let h = nodes[j + 1] - x;
        z += h * (phi - s / g);
        phi += h * m / (e * inertia);
        m += h * ka * s;
    }
    if sol.z.iter().any(|v| !v.is_finite()) {
        return Err(SolverFailure::NonFinite);
    }
    Ok(sol)
}

/// Sorts the interior points of `grid` and marches from 0 to L.
pub fn solve_beam<T: Scalar>(
    field: &YoungsModulusField<T>,
    grid: &DiscretizationParam<T>,
    cfg: &BeamConfig<T>,
) -> std::result::Result<BeamSolution<T>, SolverFailure> {
    match grid {
        DiscretizationParam::GridBased { points } => {
            solve_beam_on_nodes(field, &beam_nodes(points, cfg.length), cfg)
        }
        _ => Err(SolverFailure::Incompatible("the beam solver needs a grid")),
    }
}

/// Normalizing constant of the truncated Gaussian mollifier centred at `s`.
pub fn mollifier_mass<T: Scalar>(s: T, cfg: &BeamConfig<T>) -> f64 {
    let (s, l, d) = (s.as_f64(), cfg.length.as_f64(), cfg.delta.as_f64());
    d * (PI / 2.0).sqrt() * (libm::erf((l - s) / (d * SQRT_2)) + libm::erf(s / (d * SQRT_2)))
}

/// Left Riemann sum of `z * phi_i` over the solution nodes, in output units.
pub fn observe_beam<T: Scalar>(sol: &BeamSolution<T>, sensors: &[T], cfg: &BeamConfig<T>) -> Vec<T> {
    let two_d2 = T::lit(2.0) * cfg.delta * cfg.delta;
    let nodes = &sol.nodes;
    sensors
        .iter()
        .map(|&s| {
            let gamma = T::lit(mollifier_mass(s, cfg));
            let mut acc = T::zero();
            for j in 0..nodes.len() - 1 {
                let d = s - nodes[j];
                acc += sol.z[j] * (-(d * d) / two_d2).exp() * (nodes[j + 1] - nodes[j]);
            }
            acc / gamma / cfg.deflection_unit
        })
        .collect()
}

/// The discretized beam forward map for a fixed sensor layout.
#[derive(Debug, Clone)]
pub struct BeamForward<T> {
    pub cfg: BeamConfig<T>,
    pub sensors: Vec<T>,
}

impl<T: Scalar> BeamForward<T> {
    pub fn new(cfg: BeamConfig<T>, sensors: Vec<T>) -> Result<Self> {
        cfg.validate()?;
        if let Some(s) = sensors.iter().find(|s| !(**s >= T::zero() && **s <= cfg.length)) {
            return Err(Error::InvalidParameter(format!("sensor {s} outside the beam")));
        }
        Ok(Self { cfg, sensors })
    }

    pub fn domain(&self) -> Domain<T> {
        Domain::Interval { lo: T::zero(), hi: self.cfg.length }
    }
}

impl<T: Scalar> ForwardModel<T> for BeamForward<T> {
    fn output_dim(&self) -> usize {
        self.sensors.len()
    }

    fn evaluate(
        &self,
        u: &UnknownState<T>,
        a: &DiscretizationParam<T>,
    ) -> std::result::Result<Vec<T>, SolverFailure> {
        let field = YoungsModulusField::from_state(u)?;
        let sol = solve_beam(&field, a, &self.cfg)?;
        Ok(observe_beam(&sol, &self.sensors, &self.cfg))
    }
}

/// Number of interior points of the fine reference grid.
pub const REFERENCE_K: usize = 500;

/// Synthetic data: the `k = 500` uniform-grid output for `true_u` plus
/// `N(0, noise_variance)` noise. Also returns the noise-free output.
pub fn generate_beam_data<T: Scalar>(
    true_u: &UnknownState<T>,
    forward: &BeamForward<T>,
    seed: u64,
) -> Result<(ObservationModel<T>, Vec<T>)> {
    let fine = DiscretizationParam::uniform_grid(REFERENCE_K, T::zero(), forward.cfg.length);
    let clean = forward
        .evaluate(true_u, &fine)
        .map_err(|e| Error::InvalidParameter(format!("reference solve failed: {e}")))?;
    let noise = NoiseModel::isotropic(clean.len(), forward.cfg.noise_variance)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = clean.iter().zip(noise.sample(&mut rng)).map(|(&c, e)| c + e).collect();
    let locations = forward.sensors.iter().map(|&s| Location::Line(s)).collect();
    let obs = ObservationModel::new(locations, data, noise, &forward.domain())?;
    Ok((obs, clean))
}
