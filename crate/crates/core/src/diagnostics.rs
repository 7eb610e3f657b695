//! Summaries of chain output: percentile bands, grid-occupancy tables,
//! reconstruction error, acceptance rates, running means and total-variation
//! distances.

use crate::error::{Error, Result};
use crate::model::Tallies;
use crate::scalar::Scalar;

/// Empirical quantile of sorted data, linear between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pointwise mean and quantiles of a collection of equally long vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileBands {
    /// Levels in percent, e.g. `[5, 10, 90, 95]`.
    pub levels: Vec<f64>,
    pub mean: Vec<f64>,
    /// `bands[l][i]`: level `l` at abscissa `i`.
    pub bands: Vec<Vec<f64>>,
}

impl PercentileBands {
    pub fn median_like(&self, level: f64) -> Option<&[f64]> {
        self.levels.iter().position(|l| *l == level).map(|i| self.bands[i].as_slice())
    }
}

/// Default band levels.
pub const BAND_LEVELS: [f64; 4] = [5.0, 10.0, 90.0, 95.0];

pub fn percentile_bands<T: Scalar>(samples: &[&[T]], levels: &[f64]) -> Result<PercentileBands> {
    let first = samples.first().ok_or(Error::EmptyChain)?;
    let dim = first.len();
    if let Some(bad) = samples.iter().find(|s| s.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: bad.len() });
    }
    let n = samples.len() as f64;
    let mut mean = vec![0.0; dim];
    let mut bands = vec![vec![0.0; dim]; levels.len()];
    let mut column = Vec::with_capacity(samples.len());
    for i in 0..dim {
        column.clear();
        column.extend(samples.iter().map(|s| s[i].as_f64()));
        mean[i] = column.iter().sum::<f64>() / n;
        column.sort_by(|a, b| a.total_cmp(b));
        for (l, level) in levels.iter().enumerate() {
            bands[l][i] = quantile_sorted(&column, level / 100.0);
        }
    }
    Ok(PercentileBands { levels: levels.to_vec(), mean, bands })
}

/// Per-state counts of grid points in unit subintervals and the derived
/// bucket-by-subinterval probability table.
#[derive(Debug, Clone, PartialEq)]
pub struct GridHistogram {
    pub n_intervals: usize,
    pub bucket_width: usize,
    /// `counts[state][interval]`.
    pub counts: Vec<Vec<usize>>,
}

impl GridHistogram {
    /// Probability of each count bucket per subinterval:
    /// `table[bucket][interval]`, bucket `b` covering counts
    /// `b * width ..= b * width + width - 1`.
    pub fn table(&self) -> Vec<Vec<f64>> {
        let max = self.counts.iter().flatten().copied().max().unwrap_or(0);
        let n_buckets = max / self.bucket_width + 1;
        let mut t = vec![vec![0.0; self.n_intervals]; n_buckets];
        let n = self.counts.len() as f64;
        for state in &self.counts {
            for (i, &c) in state.iter().enumerate() {
                t[c / self.bucket_width][i] += 1.0 / n;
            }
        }
        t
    }

    pub fn mean_count(&self, interval: usize) -> f64 {
        self.counts.iter().map(|s| s[interval] as f64).sum::<f64>() / self.counts.len() as f64
    }

    /// Most probable bucket (lowest on ties).
    pub fn modal_bucket(&self, interval: usize) -> usize {
        let t = self.table();
        let mut best = 0;
        for b in 0..t.len() {
            if t[b][interval] > t[best][interval] {
                best = b;
            }
        }
        best
    }
}

/// Occupancy of the unit subintervals `[i, i + 1)` of `[0, n_intervals]`.
pub fn grid_histogram<T: Scalar>(grids: &[&[T]], n_intervals: usize, bucket_width: usize) -> Result<GridHistogram> {
    if grids.is_empty() {
        return Err(Error::EmptyChain);
    }
    if bucket_width == 0 || n_intervals == 0 {
        return Err(Error::InvalidParameter("histogram needs positive sizes".into()));
    }
    let counts = grids
        .iter()
        .map(|g| {
            let mut c = vec![0; n_intervals];
            for p in g.iter() {
                let idx = p.as_f64().floor().max(0.0) as usize;
                c[idx.min(n_intervals - 1)] += 1;
            }
            c
        })
        .collect();
    Ok(GridHistogram { n_intervals, bucket_width, counts })
}

/// Fraction of grid points inside `[lo, hi]`, averaged over states.
pub fn mean_fraction_in<T: Scalar>(grids: &[&[T]], lo: f64, hi: f64) -> Result<f64> {
    if grids.is_empty() {
        return Err(Error::EmptyChain);
    }
    let total: f64 = grids
        .iter()
        .map(|g| {
            if g.is_empty() {
                0.0
            } else {
                g.iter().filter(|p| (lo..=hi).contains(&p.as_f64())).count() as f64 / g.len() as f64
            }
        })
        .sum();
    Ok(total / grids.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionError {
    pub total: f64,
    pub per_sensor: Vec<f64>,
}

/// `e_r = sqrt(sum_n |G^{a_n}(u_n) - G(u)|^2)`, also split per sensor.
pub fn reconstruction_error<T: Scalar>(outputs: &[&[T]], reference: &[T]) -> Result<ReconstructionError> {
    let mut per = vec![0.0; reference.len()];
    for out in outputs {
        if out.len() != reference.len() {
            return Err(Error::DimensionMismatch { expected: reference.len(), found: out.len() });
        }
        for ((acc, o), r) in per.iter_mut().zip(out.iter()).zip(reference) {
            let d = o.as_f64() - r.as_f64();
            *acc += d * d;
        }
    }
    let total = per.iter().sum::<f64>().sqrt();
    Ok(ReconstructionError { total, per_sensor: per.into_iter().map(f64::sqrt).collect() })
}

/// `0.5 * sum_j |a_j - b_j| w_j` for densities normalized on a shared
/// quadrature rule with weights `w`.
pub fn tv_distance_discretized(a: &[f64], b: &[f64], weights: &[f64]) -> Result<f64> {
    if a.len() != weights.len() || b.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: weights.len(), found: a.len().min(b.len()) });
    }
    for d in [a, b] {
        if d.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidParameter("densities must be nonnegative".into()));
        }
        let mass: f64 = d.iter().zip(weights).map(|(v, w)| v * w).sum();
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!("density integrates to {mass}, not 1")));
        }
    }
    Ok(0.5 * a.iter().zip(b).zip(weights).map(|((x, y), w)| (x - y).abs() * w).sum::<f64>())
}

/// Scalar toy problem for the posterior-perturbation bound: prior
/// `N(0, 1)`, data `y = u + noise`, and a surrogate `u + eps e(a)` with `a`
/// uniform on a finite set. The joint posterior is marginalized over `a` and
/// compared with the exact posterior by quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateToy {
    pub y: f64,
    pub noise_variance: f64,
    /// Surrogate error profile `e(a_j)`, one entry per discretization.
    pub errors: Vec<f64>,
    pub u_lo: f64,
    pub u_hi: f64,
    pub n_nodes: usize,
}

impl Default for SurrogateToy {
    fn default() -> Self {
        Self {
            y: 0.7,
            noise_variance: 0.25,
            errors: vec![1.0, -0.5, 0.8, 0.3, -1.0],
            u_lo: -8.0,
            u_hi: 8.0,
            n_nodes: 8001,
        }
    }
}

impl SurrogateToy {
    fn nodes_and_weights(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_nodes;
        let h = (self.u_hi - self.u_lo) / (n - 1) as f64;
        let nodes = (0..n).map(|i| self.u_lo + h * i as f64).collect();
        let weights = (0..n).map(|i| if i == 0 || i == n - 1 { h / 2.0 } else { h }).collect();
        (nodes, weights)
    }

    fn normalize(density: &mut [f64], weights: &[f64]) {
        let z: f64 = density.iter().zip(weights).map(|(d, w)| d * w).sum();
        density.iter_mut().for_each(|d| *d /= z);
    }

    /// TV distance between the exact and the surrogate posterior of `u`.
    pub fn tv_distance(&self, eps: f64) -> Result<f64> {
        let (nodes, weights) = self.nodes_and_weights();
        let prior = |u: f64| (-0.5 * u * u).exp();
        let lik = |g: f64| (-0.5 * (self.y - g).powi(2) / self.noise_variance).exp();
        let mut exact: Vec<f64> = nodes.iter().map(|&u| prior(u) * lik(u)).collect();
        let mut approx: Vec<f64> = nodes
            .iter()
            .map(|&u| prior(u) * self.errors.iter().map(|e| lik(u + eps * e)).sum::<f64>() / self.errors.len() as f64)
            .collect();
        Self::normalize(&mut exact, &weights);
        Self::normalize(&mut approx, &weights);
        tv_distance_discretized(&exact, &approx, &weights)
    }

    /// `(eps, tv)` for each `eps`.
    pub fn sweep(&self, eps: &[f64]) -> Result<Vec<(f64, f64)>> {
        eps.iter().map(|&e| Ok((e, self.tv_distance(e)?))).collect()
    }
}

/// Acceptance rates per kernel (`None` if never attempted).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptanceSummary {
    pub u: Option<f64>,
    pub relocation: Option<f64>,
    pub birth_death: Option<f64>,
    pub theta: Option<f64>,
    /// All discretization moves pooled.
    pub a: Option<f64>,
}

fn rate(accepted: u64, proposed: u64) -> Option<f64> {
    (proposed > 0).then(|| accepted as f64 / proposed as f64)
}

pub fn acceptance_summary(t: &Tallies) -> AcceptanceSummary {
    let (a_prop, a_acc) = t.a_counts();
    AcceptanceSummary {
        u: rate(t.u_accepted, t.u_proposed),
        relocation: rate(t.relocation_accepted, t.relocation_proposed),
        birth_death: rate(t.birth_death_accepted, t.birth_death_proposed),
        theta: rate(t.theta_accepted, t.theta_proposed),
        a: rate(a_acc, a_prop),
    }
}

/// Prefix means of a trace.
pub fn running_mean(trace: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    trace
        .iter()
        .enumerate()
        .map(|(i, x)| {
            acc += x;
            acc / (i + 1) as f64
        })
        .collect()
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
