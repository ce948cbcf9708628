//! Sparse symmetric storage and a direct envelope `LDLᵀ` solver.
//!
//! The systems assembled in this crate are symmetric in the plain (non-Hermitian)
//! sense: real SPD for the forward and Riesz problems, complex symmetric with a
//! positive-definite real part for the coupled complex problem. Both admit an
//! `LDLᵀ` factorization without pivoting. Unknowns are reordered with reverse
//! Cuthill-McKee before factorization to keep the envelope narrow.

use std::collections::VecDeque;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Field scalar used by the sparse kernels.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn conjugate(self) -> Self;
    fn finite(self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn conjugate(self) -> Self {
        self
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn conjugate(self) -> Self {
        self.conj()
    }
    fn finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Accumulates `(row, col, value)` entries; duplicates are summed on compression.
#[derive(Debug, Clone)]
pub struct TripletBuilder<T> {
    n: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> TripletBuilder<T> {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> CsrMatrix<T> {
        self.entries.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<T> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Square compressed-sparse-row matrix with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let mut acc = T::zero();
                for (j, a) in self.row(i) {
                    acc += a * x[j];
                }
                acc
            })
            .collect()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                worst = worst.max((a - self.get(j, i)).modulus());
            }
        }
        worst
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> CsrMatrix<U> {
        CsrMatrix {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Restrict to the rows and columns listed in `keep`, in that order.
    pub fn submatrix(&self, keep: &[usize]) -> CsrMatrix<T> {
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut b = TripletBuilder::with_capacity(keep.len(), self.nnz());
        for (new_i, &old_i) in keep.iter().enumerate() {
            for (old_j, v) in self.row(old_i) {
                let new_j = map[old_j];
                if new_j != usize::MAX {
                    b.add(new_i, new_j, v);
                }
            }
        }
        b.build()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|i| self.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
            .collect()
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

pub fn norm2<T: Scalar>(a: &[T]) -> f64 {
    a.iter().map(|x| x.modulus().powi(2)).sum::<f64>().sqrt()
}

/// Reverse Cuthill-McKee ordering; `perm[new] = old`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(adj, &degree, seed);
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> Vec<usize> {
    let mut level = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::new();
    level[start] = 0;
    queue.push_back(start);
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    level
}

fn pseudo_peripheral(adj: &[Vec<usize>], degree: &[usize], seed: usize) -> usize {
    let mut current = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let level = bfs_levels(adj, current);
        let max_level = level.iter().filter(|&&l| l != usize::MAX).max().copied().unwrap_or(0);
        if max_level <= ecc && ecc > 0 {
            break;
        }
        ecc = max_level;
        let next = (0..adj.len())
            .filter(|&i| level[i] == max_level)
            .min_by_key(|&i| (degree[i], i))
            .unwrap_or(current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// Envelope (skyline) `LDLᵀ` factorization of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct LdltFactor<T> {
    n: usize,
    perm: Vec<usize>,
    /// first column of each row's envelope (permuted numbering)
    first: Vec<usize>,
    /// offset of each row's envelope inside `lower`
    offset: Vec<usize>,
    lower: Vec<T>,
    diag: Vec<T>,
    condition: f64,
}

impl<T: Scalar> LdltFactor<T> {
    pub fn new(a: &CsrMatrix<T>) -> Result<Self> {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(&a.adjacency());
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (new_i, &old_i) in perm.iter().enumerate() {
            for (old_j, _) in a.row(old_i) {
                let new_j = inv[old_j];
                if new_j < first[new_i] {
                    first[new_i] = new_j;
                }
            }
        }
        let mut offset = vec![0usize; n + 1];
        for i in 0..n {
            offset[i + 1] = offset[i] + (i - first[i]);
        }
        let mut lower = vec![T::zero(); offset[n]];
        let mut diag = vec![T::zero(); n];
        for (new_i, &old_i) in perm.iter().enumerate() {
            for (old_j, v) in a.row(old_i) {
                let new_j = inv[old_j];
                if new_j < new_i {
                    lower[offset[new_i] + new_j - first[new_i]] = v;
                } else if new_j == new_i {
                    diag[new_i] = v;
                }
            }
        }

        let scale = diag
            .iter()
            .map(|d| d.modulus())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut dmin = f64::INFINITY;
        let mut dmax = 0.0f64;
        let mut w = vec![T::zero(); n];
        for i in 0..n {
            let fi = first[i];
            let row_off = offset[i];
            // w[j] = L_ij * D_j for j < i
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = lower[row_off + j - fi];
                let jrow = offset[j];
                for k in k0..j {
                    s -= w[k] * lower[jrow + k - fj];
                }
                w[j] = s;
            }
            let mut d = diag[i];
            for j in fi..i {
                let l = w[j] / diag[j];
                lower[row_off + j - fi] = l;
                d -= w[j] * l;
            }
            let m = d.modulus();
            if !d.finite() || m <= 1e-14 * scale {
                let condition = if m > 0.0 { dmax.max(m) / m } else { f64::INFINITY };
                return Err(Error::Singular {
                    pivot: perm[i],
                    modulus: m,
                    condition,
                });
            }
            dmin = dmin.min(m);
            dmax = dmax.max(m);
            diag[i] = d;
        }
        Ok(Self {
            n,
            perm,
            first,
            offset,
            lower,
            diag,
            condition: if n == 0 { 1.0 } else { dmax / dmin },
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Ratio of the largest to the smallest pivot modulus; a cheap conditioning proxy.
    pub fn pivot_ratio(&self) -> f64 {
        self.condition
    }

    pub fn envelope_size(&self) -> usize {
        self.lower.len()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut y: Vec<T> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.offset[i]..self.offset[i + 1]];
            let mut s = y[i];
            for (k, &l) in row.iter().enumerate() {
                s -= l * y[fi + k];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] = y[i] / self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.lower[self.offset[i]..self.offset[i + 1]];
            let yi = y[i];
            for (k, &l) in row.iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![T::zero(); n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

impl LdltFactor<Complex64> {
    /// Solve `conj(A) x = b` with the factors of `A`.
    pub fn solve_conjugate(&self, b: &[Complex64]) -> Vec<Complex64> {
        let bc: Vec<Complex64> = b.iter().map(|z| z.conj()).collect();
        self.solve(&bc).into_iter().map(|z| z.conj()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn laplacian_1d(n: usize) -> CsrMatrix<f64> {
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 2.0);
            if i + 1 < n {
                b.add(i, i + 1, -1.0);
                b.add(i + 1, i, -1.0);
            }
        }
        b.build()
    }

    #[test]
    fn duplicates_are_summed() {
        let mut b = TripletBuilder::new(2);
        b.add(0, 0, 1.0);
        b.add(0, 0, 2.5);
        b.add(1, 0, -1.0);
        let m = b.build();
        assert_eq!(m.get(0, 0), 3.5);
        assert_eq!(m.get(1, 0), -1.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn solves_tridiagonal() {
        let a = laplacian_1d(50);
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&x_true);
        let f = LdltFactor::new(&a).unwrap();
        let x = f.solve(&b);
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut b = TripletBuilder::new(2);
        b.add(0, 0, 1.0);
        b.add(0, 1, 1.0);
        b.add(1, 0, 1.0);
        b.add(1, 1, 1.0);
        let err = LdltFactor::new(&b.build()).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = laplacian_1d(17);
        let mut p = reverse_cuthill_mckee(&a.adjacency());
        p.sort_unstable();
        assert_eq!(p, (0..17).collect::<Vec<_>>());
    }

    #[test]
    fn conjugate_solve() {
        let n = 6;
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.add(i, i, Complex64::new(3.0, 1.0));
            if i + 1 < n {
                b.add(i, i + 1, Complex64::new(-1.0, 0.2));
                b.add(i + 1, i, Complex64::new(-1.0, 0.2));
            }
        }
        let a = b.build();
        let f = LdltFactor::new(&a).unwrap();
        let rhs: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let x = f.solve_conjugate(&rhs);
        let ac = a.map(|z| z.conj());
        let r = ac.mul_vec(&x);
        for (u, v) in r.iter().zip(&rhs) {
            assert!((u - v).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn random_complex_symmetric_systems(seed in 0u64..1000, n in 2usize..40) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut b = TripletBuilder::new(n);
            for i in 0..n {
                b.add(i, i, Complex64::new(4.0 + rng.random::<f64>(), rng.random::<f64>()));
                for _ in 0..2 {
                    let j = rng.random_range(0..n);
                    if j != i {
                        let v = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                        b.add(i, j, v);
                        b.add(j, i, v);
                    }
                }
            }
            let a = b.build();
            prop_assert!(a.asymmetry() == 0.0);
            let x_true: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, -(i as f64) * 0.5)).collect();
            let rhs = a.mul_vec(&x_true);
            let x = LdltFactor::new(&a).unwrap().solve(&rhs);
            for (u, v) in x.iter().zip(&x_true) {
                prop_assert!((u - v).norm() < 1e-9 * (1.0 + v.norm()));
            }
        }
    }
}
