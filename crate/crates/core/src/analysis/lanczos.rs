//! Extreme eigenpairs of Hermitian operators by Lanczos with full reorthogonalisation.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::operator::{axpy, dot, norm2};
use crate::C64;

pub(crate) struct RitzPairs {
    /// Smallest Ritz value first.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
    /// Residual norm of the smallest pair.
    pub residual: f64,
}

fn normalize(v: &mut [C64]) -> f64 {
    let nrm = norm2(v);
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    nrm
}

/// Smallest eigenvalues of the Hermitian map `op`, started from `start`.
/// Stops once the smallest Ritz pair has residual below `tol`, after `max_steps`
/// steps per cycle and `cycles` restarts from the current Ritz vector.
pub(crate) fn smallest<F>(op: F, start: &[C64], keep: usize, tol: f64, max_steps: usize, cycles: usize) -> RitzPairs
where
    F: Fn(&[C64], &mut [C64]),
{
    let n = start.len();
    let max_steps = max_steps.min(n).max(1);
    let mut v0 = start.to_vec();
    if normalize(&mut v0) == 0.0 {
        v0[0] = C64::new(1.0, 0.0);
    }
    let mut best = None;
    for _ in 0..cycles.max(1) {
        let (pairs, done) = cycle(&op, v0, keep, tol, max_steps);
        v0 = pairs.vectors[0].clone();
        best = Some(pairs);
        if done {
            break;
        }
    }
    best.expect("at least one cycle")
}

fn cycle<F>(op: &F, v0: Vec<C64>, keep: usize, tol: f64, max_steps: usize) -> (RitzPairs, bool)
where
    F: Fn(&[C64], &mut [C64]),
{
    let n = v0.len();
    let mut basis: Vec<Vec<C64>> = vec![v0];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); n];
    loop {
        let j = basis.len() - 1;
        op(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for v in &basis {
                let c = dot(v, &w);
                axpy(-c, v, &mut w);
            }
        }
        let b = normalize(&mut w);
        let m = alpha.len();
        let exhausted = b <= 1e-14 * alpha.iter().fold(1e-300f64, |s, x| s.max(x.abs())) || m == n;
        if m % 5 == 0 || m == max_steps || exhausted {
            let (values, coeffs) = tridiagonal_eigen(&alpha, &beta);
            let residual = if exhausted { 0.0 } else { b * coeffs[0][m - 1].abs() };
            let scale = values.iter().fold(0f64, |s, x| s.max(x.abs())).max(1e-300);
            let done = exhausted || residual <= tol * scale;
            if done || m == max_steps {
                let take = keep.max(1).min(m);
                let vectors = coeffs[..take]
                    .iter()
                    .map(|s| {
                        let mut x = vec![C64::new(0.0, 0.0); n];
                        for (v, &c) in basis.iter().zip(s) {
                            axpy(C64::new(c, 0.0), v, &mut x);
                        }
                        normalize(&mut x);
                        x
                    })
                    .collect();
                let values = values[..take].to_vec();
                return (RitzPairs { values, vectors, residual }, done);
            }
        }
        beta.push(b);
        basis.push(w.clone());
    }
}

/// Ascending eigenvalues and eigenvectors of the symmetric tridiagonal matrix.
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 120;
        let g = DMatrix::<C64>::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
        let exact = h.clone().symmetric_eigenvalues();
        let lo = exact.iter().copied().fold(f64::INFINITY, f64::min);
        let op = |x: &[C64], y: &mut [C64]| {
            let xv = nalgebra::DVector::from_column_slice(x);
            y.copy_from_slice((&h * xv).as_slice());
        };
        let start = vec![C64::new(1.0, 0.5); n];
        let r = smallest(op, &start, 3, 1e-12, 120, 3);
        assert!((r.values[0] - lo).abs() < 1e-9 * lo.abs().max(1.0), "{} vs {lo}", r.values[0]);
        assert!(r.values.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn diagonal_exhausts() {
        let d = [3.0, 1.0, 2.0];
        let op = |x: &[C64], y: &mut [C64]| {
            for i in 0..3 {
                y[i] = x[i] * d[i];
            }
        };
        let r = smallest(op, &[C64::new(1.0, 0.0); 3], 1, 1e-12, 10, 1);
        assert!((r.values[0] - 1.0).abs() < 1e-12);
        assert_eq!(r.residual, 0.0);
    }
}
