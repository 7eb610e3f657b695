//! Point-source detection for `-Laplace z = delta_u` on the unit square.
//!
//! The discretization parameter `a = (k, theta)` selects a P1 finite-element
//! mesh: `k` generators are placed by MacQueen's CVT iteration for the
//! Beta x Beta density `rho(.; theta)`, augmented with boundary nodes and
//! triangulated (Delaunay). Homogeneous Dirichlet values are eliminated and
//! the stiffness system is factored once per mesh.

pub mod cvt;
pub mod density;
pub mod mesh;
pub mod sparse;

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result, SolverFailure};
use crate::model::{DiscretizationParam, Domain, ForwardModel, Location, NoiseModel, ObservationModel, UnknownState};
use crate::scalar::Scalar;

pub use cvt::macqueen_cvt;
pub use density::{sample_beta_density, BetaGridDensity};
pub use mesh::{boundary_resolution, build_mesh, Mesh};
pub use sparse::{CsrMatrix, EnvelopeCholesky};

/// P1 stiffness matrix on the interior (free) nodes.
/// `free[i]` is the unknown index of node `i`, `None` on the boundary.
pub fn assemble_stiffness<T: Scalar>(mesh: &Mesh<T>) -> (CsrMatrix<T>, Vec<Option<usize>>) {
    let mut free = vec![None; mesh.nodes.len()];
    let mut n = 0;
    for (i, b) in mesh.boundary.iter().enumerate() {
        if !b {
            free[i] = Some(n);
            n += 1;
        }
    }
    let mut triplets = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [p0, p1, p2] = tri.map(|i| mesh.nodes[i]);
        let b = [p1[1] - p2[1], p2[1] - p0[1], p0[1] - p1[1]];
        let c = [p2[0] - p1[0], p0[0] - p2[0], p1[0] - p0[0]];
        let four_area = T::lit(4.0) * mesh.area(t);
        for i in 0..3 {
            let Some(fi) = free[tri[i]] else { continue };
            for j in 0..3 {
                let Some(fj) = free[tri[j]] else { continue };
                triplets.push((fi, fj, (b[i] * b[j] + c[i] * c[j]) / four_area));
            }
        }
    }
    (CsrMatrix::from_triplets(n, triplets), free)
}

/// Nodal load of a unit point source: the P1 basis functions of the
/// containing triangle evaluated at `source`.
pub fn dirac_load<T: Scalar>(mesh: &Mesh<T>, source: [T; 2]) -> std::result::Result<Vec<T>, SolverFailure> {
    let (t, lam) = mesh
        .locate(source)
        .ok_or(SolverFailure::OutsideMesh(source[0].as_f64(), source[1].as_f64()))?;
    let mut b = vec![T::zero(); mesh.nodes.len()];
    for (&i, l) in mesh.triangles[t].iter().zip(lam) {
        b[i] = l;
    }
    Ok(b)
}

/// Barycentric interpolation of nodal values.
pub fn observe_fem<T: Scalar>(solution: &[T], mesh: &Mesh<T>, sensors: &[[T; 2]]) -> Result<Vec<T>> {
    sensors
        .iter()
        .map(|&s| {
            let (t, lam) = mesh
                .locate(s)
                .ok_or_else(|| Error::Geometry(format!("sensor ({}, {}) outside the mesh", s[0], s[1])))?;
            Ok(mesh.triangles[t].iter().zip(lam).map(|(&i, l)| l * solution[i]).sum())
        })
        .collect()
}

/// A mesh with its factored stiffness matrix.
#[derive(Debug, Clone)]
pub struct FemSystem<T> {
    pub mesh: Mesh<T>,
    free: Vec<Option<usize>>,
    factor: EnvelopeCholesky<T>,
}

impl<T: Scalar> FemSystem<T> {
    pub fn new(mesh: Mesh<T>) -> Result<Self> {
        let (k, free) = assemble_stiffness(&mesh);
        let factor = EnvelopeCholesky::factor(&k)?;
        Ok(Self { mesh, free, factor })
    }

    /// Nodal solution (zero on the boundary) for a unit source at `source`.
    pub fn solve_dirac(&self, source: [T; 2]) -> std::result::Result<Vec<T>, SolverFailure> {
        let load = dirac_load(&self.mesh, source)?;
        let mut rhs = vec![T::zero(); self.factor.n()];
        for (i, f) in self.free.iter().enumerate() {
            if let Some(fi) = f {
                rhs[*fi] = load[i];
            }
        }
        let x = self.factor.solve(&rhs);
        let sol: Vec<T> = self.free.iter().map(|f| f.map_or(T::zero(), |fi| x[fi])).collect();
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(SolverFailure::Singular("non-finite solution".into()));
        }
        Ok(sol)
    }
}

/// Solves on `mesh` and samples the solution at `sensors`.
pub fn assemble_and_solve<T: Scalar>(mesh: &Mesh<T>, source: [T; 2]) -> Result<Vec<T>> {
    FemSystem::new(mesh.clone())?
        .solve_dirac(source)
        .map_err(|e| Error::Geometry(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FemConfig<T> {
    pub sensors: Vec<[T; 2]>,
    pub noise_variance: T,
    /// MacQueen updates per generator.
    pub updates_per_point: usize,
    /// Global seed mixed into every mesh seed.
    pub mesh_seed: u64,
    pub cache_capacity: usize,
}

impl<T: Scalar> Default for FemConfig<T> {
    fn default() -> Self {
        let s = |i: usize| T::lit(0.5 + 0.1 * i as f64);
        Self {
            sensors: (0..5).flat_map(|j| (0..5).map(move |i| [s(i), s(j)])).collect(),
            noise_variance: T::lit(0.0025),
            updates_per_point: 200,
            mesh_seed: 0,
            cache_capacity: 16,
        }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of the CVT for `(theta, k)`, so each `a` maps to one mesh.
pub fn mesh_seed<T: Scalar>(theta: &[T; 4], k: usize, global: u64) -> u64 {
    let mut h = splitmix(global);
    for t in theta {
        h = splitmix(h ^ t.as_f64().to_bits());
    }
    splitmix(h ^ k as u64)
}

type CacheKey = (usize, [u64; 4]);

/// The discretized source-to-sensor map with a small cache of factored meshes.
#[derive(Debug)]
pub struct FemForward<T> {
    pub cfg: FemConfig<T>,
    cache: Mutex<VecDeque<(CacheKey, Arc<FemSystem<T>>)>>,
}

impl<T: Scalar> FemForward<T> {
    pub fn new(cfg: FemConfig<T>) -> Result<Self> {
        if let Some(s) = cfg.sensors.iter().find(|s| !s.iter().all(|c| *c > T::zero() && *c < T::one())) {
            return Err(Error::InvalidParameter(format!("sensor {s:?} outside the unit square")));
        }
        Ok(Self { cfg, cache: Mutex::new(VecDeque::new()) })
    }

    pub fn domain(&self) -> Domain<T> {
        Domain::UnitSquare
    }

    /// CVT generators for `(k, theta)`.
    pub fn generators(&self, k: usize, theta: [T; 4]) -> Result<Vec<[T; 2]>> {
        let density = BetaGridDensity::new(theta)?;
        let mut rng = ChaCha8Rng::seed_from_u64(mesh_seed(&theta, k, self.cfg.mesh_seed));
        Ok(macqueen_cvt(&density, k, self.cfg.updates_per_point * k, &mut rng))
    }

    /// The factored system for `(k, theta)`, built on first use.
    pub fn system(&self, k: usize, theta: [T; 4]) -> Result<Arc<FemSystem<T>>> {
        let key = (k, theta.map(|t| t.as_f64().to_bits()));
        {
            let mut cache = self.cache.lock().expect("mesh cache poisoned");
            if let Some(pos) = cache.iter().position(|(k2, _)| *k2 == key) {
                let entry = cache.remove(pos).expect("position is valid");
                let sys = Arc::clone(&entry.1);
                cache.push_front(entry);
                return Ok(sys);
            }
        }
        let gens = self.generators(k, theta)?;
        let sys = Arc::new(FemSystem::new(build_mesh(&gens, boundary_resolution(k))?)?);
        let mut cache = self.cache.lock().expect("mesh cache poisoned");
        cache.push_front((key, Arc::clone(&sys)));
        cache.truncate(self.cfg.cache_capacity.max(1));
        Ok(sys)
    }

    pub fn mesh(&self, a: &DiscretizationParam<T>) -> Result<Mesh<T>> {
        match a {
            DiscretizationParam::DensityBased { k, theta } => Ok(self.system(*k, *theta)?.mesh.clone()),
            _ => Err(Error::InvalidParameter("FEM meshes need a density-based parameter".into())),
        }
    }

    /// Nodal solution on the mesh selected by `a`.
    pub fn solve(&self, source: [T; 2], a: &DiscretizationParam<T>) -> std::result::Result<(Arc<FemSystem<T>>, Vec<T>), SolverFailure> {
        let DiscretizationParam::DensityBased { k, theta } = a else {
            return Err(SolverFailure::Incompatible("FEM meshes need a density-based parameter"));
        };
        let sys = self.system(*k, *theta).map_err(|e| SolverFailure::Singular(e.to_string()))?;
        let sol = sys.solve_dirac(source)?;
        Ok((sys, sol))
    }
}

impl<T: Scalar> ForwardModel<T> for FemForward<T> {
    fn output_dim(&self) -> usize {
        self.cfg.sensors.len()
    }

    fn evaluate(
        &self,
        u: &UnknownState<T>,
        a: &DiscretizationParam<T>,
    ) -> std::result::Result<Vec<T>, SolverFailure> {
        let UnknownState::PlanarPoint(source) = u else {
            return Err(SolverFailure::Incompatible("the source must be a planar point"));
        };
        let (sys, sol) = self.solve(*source, a)?;
        observe_fem(&sol, &sys.mesh, &self.cfg.sensors).map_err(|_| {
            SolverFailure::OutsideMesh(source[0].as_f64(), source[1].as_f64())
        })
    }
}

/// Size of the fine reference mesh.
pub const REFERENCE_K: usize = 2000;

/// Data from the `k = 2000` uniform-density mesh. Returns the observation
/// model and the noise-free sensor values.
pub fn generate_fem_data<T: Scalar>(
    forward: &FemForward<T>,
    source: [T; 2],
    seed: u64,
) -> Result<(ObservationModel<T>, Vec<T>)> {
    let a = DiscretizationParam::DensityBased { k: REFERENCE_K, theta: [T::one(); 4] };
    let clean = forward
        .evaluate(&UnknownState::PlanarPoint(source), &a)
        .map_err(|e| Error::InvalidParameter(format!("reference solve failed: {e}")))?;
    let noise = NoiseModel::isotropic(clean.len(), forward.cfg.noise_variance)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = clean.iter().zip(noise.sample(&mut rng)).map(|(&c, e)| c + e).collect();
    let locations = forward.cfg.sensors.iter().map(|&s| Location::Plane(s)).collect();
    let obs = ObservationModel::new(locations, data, noise, &Domain::UnitSquare)?;
    Ok((obs, clean))
}
