//! Symmetric sparse matrices and an envelope (skyline) Cholesky solver with
//! reverse Cuthill-McKee reordering.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Compressed sparse rows holding both triangles of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    /// Sums duplicate `(i, j, v)` entries.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, col_idx, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.row(i).find(|(c, _)| *c == j).map_or(T::zero(), |(_, v)| v)
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> T {
        let mut m = T::zero();
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m = m.max((v - self.get(j, i)).abs());
            }
        }
        m
    }
}

/// Reverse Cuthill-McKee ordering; `perm[new] = old`.
pub fn rcm_ordering<T: Scalar>(a: &CsrMatrix<T>) -> Vec<usize> {
    let n = a.n();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).filter(|(j, _)| *j != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs = |start: usize, visited: &mut Vec<bool>, out: &mut Vec<usize>| {
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            out.push(v);
            let mut nbrs: Vec<usize> = a.row(v).map(|(j, _)| j).filter(|&j| !visited[j]).collect();
            nbrs.sort_by_key(|&j| (degree[j], j));
            for j in nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    };
    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .expect("unvisited node exists");
        // Move towards a pseudo-peripheral node: restart from the last node
        // reached by a trial BFS.
        let mut trial_visited = visited.clone();
        let mut trial = Vec::new();
        bfs(seed, &mut trial_visited, &mut trial);
        let start = *trial.last().expect("bfs visits the seed");
        bfs(start, &mut visited, &mut order);
    }
    order.reverse();
    order
}

/// Cholesky factor stored row-wise over each row's envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky<T> {
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> EnvelopeCholesky<T> {
    /// Factors `P A P^T` with the RCM permutation.
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        Self::factor_with(a, rcm_ordering(a))
    }

    pub fn factor_with(a: &CsrMatrix<T>, perm: Vec<usize>) -> Result<Self> {
        let n = a.n();
        if perm.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: perm.len() });
        }
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (j, _) in a.row(old) {
                first[new] = first[new].min(inv[j]);
            }
        }
        let mut offset = vec![0; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i] + 1);
        }
        let mut data = vec![T::zero(); offset[n]];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let c = inv[j];
                if c <= new {
                    data[offset[new] + c - first[new]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let start = fi.max(fj);
                let mut s = data[offset[i] + j - fi];
                for p in start..j {
                    s -= data[offset[i] + p - fi] * data[offset[j] + p - fj];
                }
                if j < i {
                    data[offset[i] + j - fi] = s / data[offset[j] + j - fj];
                } else {
                    if !(s > T::zero()) {
                        return Err(Error::Factorization(format!(
                            "matrix not positive definite (pivot {s} at row {i})"
                        )));
                    }
                    data[offset[i] + i - fi] = s.sqrt();
                }
            }
        }
        Ok(Self { perm, first, offset, data })
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    fn at(&self, i: usize, j: usize) -> T {
        self.data[self.offset[i] + j - self.first[i]]
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n();
        let mut y: Vec<T> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let mut s = y[i];
            for p in self.first[i]..i {
                s -= self.at(i, p) * y[p];
            }
            y[i] = s / self.at(i, i);
        }
        for i in (0..n).rev() {
            y[i] /= self.at(i, i);
            let yi = y[i];
            for p in self.first[i]..i {
                y[p] -= self.at(i, p) * yi;
            }
        }
        let mut x = vec![T::zero(); n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// 1D Laplacian with a shuffled numbering.
    fn scrambled_laplacian(n: usize) -> CsrMatrix<f64> {
        let label = |i: usize| (i * 7) % n;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((label(i), label(i), 2.0));
            if i + 1 < n {
                t.push((label(i), label(i + 1), -1.0));
                t.push((label(i + 1), label(i), -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn triplets_are_merged() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 1.0), (0, 1, 1.0), (1, 1, 5.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn rcm_shrinks_the_envelope_of_a_scrambled_band() {
        let a = scrambled_laplacian(101);
        let natural = EnvelopeCholesky::factor_with(&a, (0..101).collect()).unwrap();
        let rcm = EnvelopeCholesky::factor(&a).unwrap();
        assert!(rcm.envelope_size() <= 2 * 101);
        assert!(rcm.envelope_size() < natural.envelope_size());
    }

    #[test]
    fn solves_laplacian() {
        let a = scrambled_laplacian(50);
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.matvec(&x);
        let sol = EnvelopeCholesky::factor(&a).unwrap().solve(&b);
        for (p, q) in sol.iter().zip(&x) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(EnvelopeCholesky::factor(&a).is_err());
    }

    #[test]
    fn disconnected_blocks() {
        let a = CsrMatrix::from_triplets(3, vec![(0, 0, 2.0), (1, 1, 3.0), (2, 2, 4.0)]);
        let x: Vec<f64> = EnvelopeCholesky::factor(&a).unwrap().solve(&[2.0, 3.0, 4.0]);
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    proptest! {
        #[test]
        fn random_spd_systems(seed in any::<u64>(), n in 2usize..25) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut t = Vec::new();
            let mut diag = vec![1.0; n];
            for i in 0..n {
                for j in 0..i {
                    if rng.gen::<f64>() < 0.2 {
                        let v: f64 = rng.gen_range(-1.0..1.0);
                        t.push((i, j, v));
                        t.push((j, i, v));
                        diag[i] += v.abs();
                        diag[j] += v.abs();
                    }
                }
            }
            for (i, d) in diag.into_iter().enumerate() {
                t.push((i, i, d));
            }
            let a = CsrMatrix::from_triplets(n, t);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sol = EnvelopeCholesky::factor(&a).unwrap().solve(&a.matvec(&x));
            for (p, q) in sol.iter().zip(&x) {
                prop_assert!((p - q).abs() < 1e-10);
            }
        }
    }
}
