//! Banded direct solvers: LU with partial pivoting for the complex symmetric
//! Helmholtz blocks and Cholesky for Hermitian positive definite matrices.
//!
//! Structured-mesh matrices have bandwidth about the number of nodes along the
//! short side of the grid; reverse Cuthill–McKee is used when it does better than
//! the given ordering.

use std::collections::VecDeque;

use crate::operator::LinearOperator;
use crate::sparse::CsrMatrix;
use crate::{Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Reverse Cuthill–McKee ordering of the symmetrised sparsity pattern.
/// `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.nrows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree = |i: usize| adj[i].len();

    let bfs_levels = |start: usize, visited_mask: &[bool]| -> (Vec<usize>, usize) {
        // returns (last level nodes, depth)
        let mut level = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        level[start] = 0;
        let mut order = Vec::new();
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &v in &adj[u] {
                if level[v] == usize::MAX && !visited_mask[v] {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let depth = order.iter().map(|&u| level[u]).max().unwrap_or(0);
        (order.into_iter().filter(|&u| level[u] == depth).collect(), depth)
    };

    let mut visited = vec![false; n];
    let mut perm = Vec::with_capacity(n);
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start node
        let mut start = seed;
        let (mut last, mut depth) = bfs_levels(start, &visited);
        for _ in 0..8 {
            let cand = *last.iter().min_by_key(|&&u| degree(u)).unwrap();
            let (l2, d2) = bfs_levels(cand, &visited);
            if d2 <= depth {
                break;
            }
            start = cand;
            last = l2;
            depth = d2;
        }
        let first = perm.len();
        visited[start] = true;
        perm.push(start);
        let mut head = first;
        while head < perm.len() {
            let u = perm[head];
            head += 1;
            let mut next: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            next.sort_by_key(|&v| (degree(v), v));
            for v in next {
                visited[v] = true;
                perm.push(v);
            }
        }
    }
    perm.reverse();
    perm
}

fn permuted_bandwidth(a: &CsrMatrix, inv: &[usize]) -> (usize, usize) {
    let (mut lo, mut up) = (0, 0);
    for i in 0..a.nrows() {
        for &j in a.row(i).0 {
            let (pi, pj) = (inv[i], inv[j]);
            if pj < pi {
                lo = lo.max(pi - pj);
            } else {
                up = up.max(pj - pi);
            }
        }
    }
    (lo, up)
}

/// Ordering with the smaller bandwidth: identity or RCM. Returns `(perm, inv)`.
fn choose_ordering(a: &CsrMatrix) -> (Vec<usize>, Vec<usize>) {
    let n = a.nrows();
    let ident: Vec<usize> = (0..n).collect();
    let (l0, u0) = a.bandwidth();
    let rcm = reverse_cuthill_mckee(a);
    let mut inv = vec![0; n];
    for (new, &old) in rcm.iter().enumerate() {
        inv[old] = new;
    }
    let (l1, u1) = permuted_bandwidth(a, &inv);
    if l1 + u1 < l0 + u0 {
        (rcm, inv)
    } else {
        (ident.clone(), ident)
    }
}

/// LU factorization `P A Q = L U` in band storage, with `Q` a symmetric
/// reordering and `P` partial row pivoting.
#[derive(Debug, Clone)]
pub struct DirectFactorization {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row `i` holds columns `i - kl ..= i + ku + kl` at offset `j + kl - i`.
    band: Vec<C64>,
    pivots: Vec<usize>,
    perm: Vec<usize>,
}

/// Fill statistics of a factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FillStats {
    pub dim: usize,
    pub lower_bandwidth: usize,
    pub upper_bandwidth: usize,
    pub stored_entries: usize,
}

pub fn factorize(a: &CsrMatrix) -> Result<DirectFactorization> {
    DirectFactorization::new(a)
}

impl DirectFactorization {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
        }
        let n = a.nrows();
        let (perm, inv) = choose_ordering(a);
        let (kl, ku) = permuted_bandwidth(a, &inv);
        let w = 2 * kl + ku + 1;
        let mut band = vec![ZERO; n * w];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            let pi = inv[i];
            for (&j, &v) in cols.iter().zip(vals) {
                band[pi * w + inv[j] + kl - pi] += v;
            }
        }
        let tiny = n.max(1) as f64 * f64::EPSILON * a.max_abs();
        let mut pivots = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = band[k * w + kl].norm();
            for i in k + 1..=last_row {
                let v = band[i * w + k + kl - i].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= tiny || best == 0.0 {
                return Err(Error::SingularMatrix { pivot: k, dim: n });
            }
            pivots[k] = p;
            let last_col = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    band.swap(k * w + j + kl - k, p * w + j + kl - p);
                }
            }
            let inv_piv = 1.0 / band[k * w + kl];
            for i in k + 1..=last_row {
                let l = band[i * w + k + kl - i] * inv_piv;
                band[i * w + k + kl - i] = l;
                if l == ZERO {
                    continue;
                }
                let (head, tail) = band.split_at_mut(i * w);
                let row_k = &head[k * w..k * w + w];
                let row_i = &mut tail[..w];
                for j in k + 1..=last_col {
                    row_i[j + kl - i] -= l * row_k[j + kl - k];
                }
            }
        }
        Ok(Self { n, kl, ku, band, pivots, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn fill_stats(&self) -> FillStats {
        FillStats {
            dim: self.n,
            lower_bandwidth: self.kl,
            upper_bandwidth: self.ku + self.kl,
            stored_entries: self.band.len(),
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [C64]) {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = 2 * kl + ku + 1;
        let mut x: Vec<C64> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk == ZERO {
                continue;
            }
            for i in k + 1..=(k + kl).min(n.saturating_sub(1)) {
                x[i] -= self.band[i * w + k + kl - i] * xk;
            }
        }
        for k in (0..n).rev() {
            let row = &self.band[k * w..k * w + w];
            let mut s = x[k];
            for j in k + 1..=(k + ku + kl).min(n - 1) {
                s -= row[j + kl - k] * x[j];
            }
            x[k] = s / row[kl];
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = x[new];
        }
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

impl LinearOperator for DirectFactorization {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(x);
        self.solve_in_place(y);
    }
}

/// Cholesky factor `A = L L^H` of a Hermitian positive definite band matrix, in the
/// given ordering.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    kd: usize,
    /// Row `i` of `L` holds columns `i - kd ..= i` at offset `j + kd - i`.
    band: Vec<C64>,
}

pub fn cholesky(a: &CsrMatrix) -> Result<BandedCholesky> {
    BandedCholesky::new(a)
}

impl BandedCholesky {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), got: a.ncols() });
        }
        let n = a.nrows();
        let (lo, up) = a.bandwidth();
        let kd = lo.max(up);
        let w = kd + 1;
        let mut band = vec![ZERO; n * w];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j <= i {
                    band[i * w + j + kd - i] = v;
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(kd);
            for j in j0..=i {
                // L[i][j] = (A[i][j] - sum_{p<j} L[i][p] conj(L[j][p])) / L[j][j]
                let mut s = band[i * w + j + kd - i];
                let p0 = j0.max(j.saturating_sub(kd));
                for p in p0..j {
                    s -= band[i * w + p + kd - i] * band[j * w + p + kd - j].conj();
                }
                if j == i {
                    if !(s.re > 0.0) || !s.re.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i });
                    }
                    band[i * w + kd] = C64::new(s.re.sqrt(), 0.0);
                } else {
                    band[i * w + j + kd - i] = s / band[j * w + kd].re;
                }
            }
        }
        Ok(Self { n, kd, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn l(&self, i: usize, j: usize) -> C64 {
        self.band[i * (self.kd + 1) + j + self.kd - i]
    }

    fn cols(&self, i: usize) -> std::ops::RangeInclusive<usize> {
        i.saturating_sub(self.kd)..=i
    }

    /// `x <- L^{-1} x`.
    pub fn solve_lower(&self, x: &mut [C64]) {
        for i in 0..self.n {
            let mut s = x[i];
            for j in *self.cols(i).start()..i {
                s -= self.l(i, j) * x[j];
            }
            x[i] = s / self.l(i, i).re;
        }
    }

    /// `x <- L^{-H} x`.
    pub fn solve_upper(&self, x: &mut [C64]) {
        for i in (0..self.n).rev() {
            x[i] /= self.l(i, i).re;
            let xi = x[i];
            for j in *self.cols(i).start()..i {
                x[j] -= self.l(i, j).conj() * xi;
            }
        }
    }

    /// `x <- L x`.
    pub fn mul_lower(&self, x: &mut [C64]) {
        for i in (0..self.n).rev() {
            let mut s = ZERO;
            for j in self.cols(i) {
                s += self.l(i, j) * x[j];
            }
            x[i] = s;
        }
    }

    /// `x <- L^H x`.
    pub fn mul_upper(&self, x: &mut [C64]) {
        for i in 0..self.n {
            let mut s = self.l(i, i).re * x[i];
            for r in i + 1..=(i + self.kd).min(self.n - 1) {
                s += self.l(r, i).conj() * x[r];
            }
            x[i] = s;
        }
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [C64]) {
        self.solve_lower(x);
        self.solve_upper(x);
    }
}
