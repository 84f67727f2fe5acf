//! Sparse matrices and the banded LU used for time stepping.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds an `n x n` matrix from triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(trip.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(p) => self.vals[r.start + p],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[p] * x[self.col_idx[p]];
            }
            y[i] = s;
        }
    }

    /// `y += a * A x`
    pub fn mul_vec_add(&self, a: f64, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[p] * x[self.col_idx[p]];
            }
            y[i] += a * s;
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut trip = Vec::with_capacity(self.vals.len());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                trip.push((j, i, v));
            }
        }
        CsrMatrix::from_triplets(self.n, trip)
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let mut trip = Vec::with_capacity(self.vals.len() + other.vals.len());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                trip.push((i, j, a * v));
            }
            for (j, v) in other.row(i) {
                trip.push((i, j, b * v));
            }
        }
        CsrMatrix::from_triplets(self.n, trip)
    }

    pub fn scale(&self, a: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= a);
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (v - self.get(j, i)).abs() <= tol))
    }
}

/// Reverse Cuthill-McKee ordering of the symmetrised pattern.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in adj.iter_mut() {
        list.sort_unstable();
        list.dedup();
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        // start from an unvisited node of minimum degree
        let start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (adj[i].len(), i))
            .unwrap();
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// LU factorisation without pivoting of a banded matrix in RCM ordering.
///
/// The time-step operators are dominated by the positive definite mass
/// term, so the factorisation exists without pivoting.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    lower: usize,
    upper: usize,
    /// Row-major band: row `i`, column `j` at `i * width + (j + lower - i)`.
    band: Vec<f64>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut lower, mut upper) = (0usize, 0usize);
        for i in 0..n {
            for (j, _) in a.row(i) {
                let (pi, pj) = (inv[i], inv[j]);
                if pj < pi {
                    lower = lower.max(pi - pj);
                } else {
                    upper = upper.max(pj - pi);
                }
            }
        }
        let width = lower + upper + 1;
        let mut band = vec![0.0; n * width];
        for i in 0..n {
            for (j, v) in a.row(i) {
                let (pi, pj) = (inv[i], inv[j]);
                band[pi * width + (pj + lower - pi)] += v;
            }
        }
        let scale = band.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let pivot = band[k * width + lower];
            if !(pivot.abs() > 1e-14 * scale) || !pivot.is_finite() {
                return Err(Error::Solver(format!(
                    "zero pivot {pivot:e} at row {k} of {n} (matrix scale {scale:e})"
                )));
            }
            let iend = (k + lower + 1).min(n);
            let jend = (k + upper + 1).min(n);
            for i in (k + 1)..iend {
                let lik_idx = i * width + (k + lower - i);
                let lik = band[lik_idx] / pivot;
                band[lik_idx] = lik;
                if lik == 0.0 {
                    continue;
                }
                for j in (k + 1)..jend {
                    let ukj = band[k * width + (j + lower - k)];
                    band[i * width + (j + lower - i)] -= lik * ukj;
                }
            }
        }
        Ok(BandedLu {
            n,
            perm,
            lower,
            upper,
            band,
        })
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let width = self.lower + self.upper + 1;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let start = i.saturating_sub(self.lower);
            let mut s = y[i];
            for (k, yk) in y.iter().enumerate().take(i).skip(start) {
                s -= self.band[i * width + (k + self.lower - i)] * yk;
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let end = (i + self.upper + 1).min(n);
            let mut s = y[i];
            for (j, yj) in y.iter().enumerate().take(end).skip(i + 1) {
                s -= self.band[i * width + (j + self.lower - i)] * yj;
            }
            y[i] = s / self.band[i * width + self.lower];
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
