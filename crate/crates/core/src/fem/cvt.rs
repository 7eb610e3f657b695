//! MacQueen's probabilistic iteration for centroidal Voronoi tessellations.

use rand::Rng;

use super::density::BetaGridDensity;
use crate::scalar::Scalar;

/// Index of the generator closest to `x` (ties go to the lowest index).
pub fn nearest<T: Scalar>(generators: &[[T; 2]], x: [T; 2]) -> usize {
    let mut best = 0;
    let mut best_d = T::infinity();
    for (i, g) in generators.iter().enumerate() {
        let dx = g[0] - x[0];
        let dy = g[1] - x[1];
        let d = dx * dx + dy * dy;
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// `k` generators: i.i.d. draws from `rho` refined by `n_updates` MacQueen
/// steps, each moving the generator nearest to a fresh sample to the running
/// mean of the samples it has absorbed.
pub fn macqueen_cvt<T: Scalar, R: Rng + ?Sized>(
    density: &BetaGridDensity,
    k: usize,
    n_updates: usize,
    rng: &mut R,
) -> Vec<[T; 2]> {
    let mut gens: Vec<[T; 2]> = (0..k).map(|_| density.sample(rng)).collect();
    let mut counts = vec![1usize; k];
    if k == 0 {
        return gens;
    }
    for _ in 0..n_updates {
        let x: [T; 2] = density.sample(rng);
        let j = nearest(&gens, x);
        let c = T::from_count(counts[j]);
        let g = &mut gens[j];
        g[0] = (c * g[0] + x[0]) / (c + T::one());
        g[1] = (c * g[1] + x[1]) / (c + T::one());
        counts[j] += 1;
    }
    gens
}
