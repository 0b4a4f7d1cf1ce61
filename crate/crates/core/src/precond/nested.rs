//! Inexact solves by an inner preconditioned GMRES iteration.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::krylov::{gmres, KrylovConfig, PrecondSide};
use crate::operator::LinearOperator;
use crate::sparse::CsrMatrix;
use crate::C64;

/// Totals over every inner solve sharing these counters.
#[derive(Debug, Default)]
pub struct InnerCounters {
    calls: AtomicUsize,
    iterations: AtomicUsize,
    failures: AtomicUsize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InnerStats {
    pub calls: usize,
    pub iterations: usize,
    /// Inner solves that stopped at the cap or broke down.
    pub failures: usize,
}

impl InnerStats {
    /// Mean inner iterations per inner solve.
    pub fn average(&self) -> f64 {
        if self.calls == 0 {
            0.0
        } else {
            self.iterations as f64 / self.calls as f64
        }
    }
}

impl InnerCounters {
    pub fn snapshot(&self) -> InnerStats {
        InnerStats {
            calls: self.calls.load(Ordering::Relaxed),
            iterations: self.iterations.load(Ordering::Relaxed),
            failures: self.failures.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        self.calls.store(0, Ordering::Relaxed);
        self.iterations.store(0, Ordering::Relaxed);
        self.failures.store(0, Ordering::Relaxed);
    }
}

/// Approximate `A^{-1}` by right-preconditioned GMRES run to a loose tolerance.
/// The resulting map depends on its input nonlinearly, so it may only be used
/// inside a flexible outer method.
pub struct NestedSolver {
    matrix: CsrMatrix,
    precond: Box<dyn LinearOperator + Send>,
    inner_tol: f64,
    inner_max_iters: usize,
    counters: Arc<InnerCounters>,
}

pub fn make_nested_solver(
    matrix: CsrMatrix,
    inner_precond: Box<dyn LinearOperator + Send>,
    inner_tol: f64,
    inner_max_iters: usize,
    counters: Arc<InnerCounters>,
) -> NestedSolver {
    NestedSolver { matrix, precond: inner_precond, inner_tol, inner_max_iters, counters }
}

impl NestedSolver {
    pub fn counters(&self) -> &Arc<InnerCounters> {
        &self.counters
    }
}

impl LinearOperator for NestedSolver {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let cfg = KrylovConfig::new(PrecondSide::Right, self.inner_tol, self.inner_max_iters);
        self.counters.calls.fetch_add(1, Ordering::Relaxed);
        match gmres(&self.matrix, self.precond.as_ref(), x, &cfg) {
            Ok((sol, rep)) => {
                self.counters.iterations.fetch_add(rep.iterations, Ordering::Relaxed);
                if !rep.converged {
                    self.counters.failures.fetch_add(1, Ordering::Relaxed);
                }
                y.copy_from_slice(&sol);
            }
            Err(err) => {
                log::warn!("inner solve failed: {err}");
                self.counters.failures.fetch_add(1, Ordering::Relaxed);
                self.precond.apply(x, y);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_system, AssemblyCoefficients};
    use crate::factor::factorize;
    use crate::mesh::Mesh;

    #[test]
    fn tight_tolerance_with_exact_inner_precond_is_direct_solve() {
        let mesh = Mesh::unit_square(10);
        let a = assemble_system(&mesh, &AssemblyCoefficients::constant(&mesh, 6.0, 6.0)).unwrap();
        let lu = factorize(&a).unwrap();
        let counters = Arc::new(InnerCounters::default());
        let nested = make_nested_solver(a.clone(), Box::new(lu.clone()), 1e-12, 50, counters.clone());
        let b: Vec<C64> = (0..a.nrows()).map(|i| C64::new((i as f64).sin(), 1.0)).collect();
        let x = nested.apply_vec(&b);
        let exact = lu.solve(&b);
        assert!(x.iter().zip(&exact).all(|(p, q)| (p - q).norm() < 1e-10));
        let s = counters.snapshot();
        assert_eq!((s.calls, s.failures), (1, 0));
        assert!(s.iterations <= 2);
    }

    #[test]
    fn cap_counts_as_failure() {
        let mesh = Mesh::unit_square(10);
        let a = assemble_system(&mesh, &AssemblyCoefficients::constant(&mesh, 6.0, 0.0)).unwrap();
        let counters = Arc::new(InnerCounters::default());
        let n = a.nrows();
        let nested = make_nested_solver(a, Box::new(crate::operator::Identity(n)), 1e-12, 3, counters.clone());
        let _ = nested.apply_vec(&vec![C64::new(1.0, 0.0); n]);
        assert_eq!(counters.snapshot(), InnerStats { calls: 1, iterations: 3, failures: 1 });
    }
}
