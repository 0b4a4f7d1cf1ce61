//! One- and two-level Schwarz preconditioners built from an absorbed operator.
//!
//! | kind      | local problems       | combination | coarse    |
//! |-----------|----------------------|-------------|-----------|
//! | `As1`     | Dirichlet minors     | additive    | none      |
//! | `As`      | Dirichlet minors     | additive    | additive  |
//! | `Ras1`    | Dirichlet minors     | restricted  | none      |
//! | `Hras`    | Dirichlet minors     | restricted  | hybrid    |
//! | `ImpRas1` | impedance, closed    | restricted  | none      |
//! | `ImpHras` | impedance, closed    | restricted  | hybrid    |
//!
//! The hybrid form is `Q + P0^T B_loc P0` with `Q = R0^T A_0^{-1} R0` and
//! `P0 = I - A Q`. Restricted combination averages the local solutions over the
//! coarse cells that own each node.

pub mod nested;

use std::sync::Arc;

use rayon::prelude::*;

use crate::assembly::{assemble_local_impedance, AssemblyCoefficients};
use crate::decomposition::{build_decomposition, Decomposition};
use crate::factor::factorize;
use crate::mesh::{CoarseLayout, Mesh};
use crate::operator::LinearOperator;
use crate::sparse::CsrMatrix;
use crate::{Error, Result, C64};

pub use nested::{make_nested_solver, InnerCounters, InnerStats, NestedSolver};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum PrecondKind {
    #[serde(rename = "AS1")]
    As1,
    #[serde(rename = "AS")]
    As,
    #[serde(rename = "RAS1")]
    Ras1,
    #[serde(rename = "HRAS")]
    Hras,
    #[serde(rename = "ImpRAS1")]
    ImpRas1,
    #[serde(rename = "ImpHRAS")]
    ImpHras,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseMode {
    Additive,
    Hybrid,
}

impl PrecondKind {
    pub const ALL: [PrecondKind; 6] = [
        PrecondKind::As1,
        PrecondKind::As,
        PrecondKind::Ras1,
        PrecondKind::Hras,
        PrecondKind::ImpRas1,
        PrecondKind::ImpHras,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrecondKind::As1 => "AS1",
            PrecondKind::As => "AS",
            PrecondKind::Ras1 => "RAS1",
            PrecondKind::Hras => "HRAS",
            PrecondKind::ImpRas1 => "ImpRAS1",
            PrecondKind::ImpHras => "ImpHRAS",
        }
    }

    pub fn impedance(self) -> bool {
        matches!(self, PrecondKind::ImpRas1 | PrecondKind::ImpHras)
    }

    pub fn restricted(self) -> bool {
        !matches!(self, PrecondKind::As1 | PrecondKind::As)
    }

    pub fn coarse(self) -> Option<CoarseMode> {
        match self {
            PrecondKind::As => Some(CoarseMode::Additive),
            PrecondKind::Hras | PrecondKind::ImpHras => Some(CoarseMode::Hybrid),
            _ => None,
        }
    }

    /// The same local part without the coarse level.
    pub fn one_level(self) -> Self {
        match self {
            PrecondKind::As => PrecondKind::As1,
            PrecondKind::Hras => PrecondKind::Ras1,
            PrecondKind::ImpHras => PrecondKind::ImpRas1,
            k => k,
        }
    }
}

impl std::fmt::Display for PrecondKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PrecondKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PrecondKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Unknown(s.to_string()))
    }
}

/// Which matrix forms the projection `P0 = I - A Q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// The matrix of the system being solved.
    #[default]
    System,
    /// The absorbed matrix the preconditioner is built from.
    Shifted,
}

/// How coarse or local problems are solved.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InnerSolve {
    #[default]
    Direct,
    /// Inner GMRES to `tol`, preconditioned by ImpRAS1 on a decomposition of the
    /// problem's own mesh into cells of side about `cell_size`.
    Nested { tol: f64, max_iters: usize, cell_size: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecondOptions {
    pub projection: Projection,
    pub coarse_solve: InnerSolve,
    pub local_solve: InnerSolve,
    pub parallel: bool,
}

impl Default for PrecondOptions {
    fn default() -> Self {
        Self {
            projection: Projection::System,
            coarse_solve: InnerSolve::Direct,
            local_solve: InnerSolve::Direct,
            parallel: true,
        }
    }
}

/// Everything a preconditioner is built from.
pub struct Problem<'a> {
    pub mesh: &'a Mesh,
    pub decomposition: &'a Decomposition,
    /// Matrix of the system being solved.
    pub system: &'a CsrMatrix,
    /// Absorbed matrix `A_eps` and the coefficients it was assembled with.
    pub shifted: &'a CsrMatrix,
    pub coeff: &'a AssemblyCoefficients,
}

type Solver = Box<dyn LinearOperator + Send>;

struct LocalPart {
    subdomain: usize,
    indices: Vec<usize>,
    solver: Solver,
    /// `(global node, weight, position in indices)` of owned nodes.
    core: Vec<(usize, f64, usize)>,
}

struct CoarsePart {
    r0: CsrMatrix,
    r0t: CsrMatrix,
    solver: Solver,
    projector: CsrMatrix,
    mode: CoarseMode,
}

pub struct SchwarzPreconditioner {
    kind: PrecondKind,
    n: usize,
    locals: Vec<LocalPart>,
    coarse: Option<CoarsePart>,
    coarse_enabled: bool,
    parallel: bool,
    counters: Arc<InnerCounters>,
}

/// `R0 A R0^T`.
pub fn galerkin_coarse_matrix(r0: &CsrMatrix, a: &CsrMatrix) -> Result<CsrMatrix> {
    r0.matmul(a)?.matmul(&r0.transpose())
}

fn nested_impras1(
    mesh: &Mesh,
    matrix: CsrMatrix,
    coeff: &AssemblyCoefficients,
    tol: f64,
    max_iters: usize,
    cell_size: f64,
    parallel: bool,
    counters: Arc<InnerCounters>,
) -> Result<NestedSolver> {
    let layout = CoarseLayout::with_cell_size(mesh, cell_size)?;
    let dec = build_decomposition(mesh, &layout)?;
    let inner = build_preconditioner(
        PrecondKind::ImpRas1,
        &Problem { mesh, decomposition: &dec, system: &matrix, shifted: &matrix, coeff },
        &PrecondOptions { parallel, ..PrecondOptions::default() },
    )?;
    Ok(make_nested_solver(matrix, Box::new(inner), tol, max_iters, counters))
}

pub fn build_preconditioner(
    kind: PrecondKind,
    problem: &Problem,
    options: &PrecondOptions,
) -> Result<SchwarzPreconditioner> {
    let mesh = problem.mesh;
    let dec = problem.decomposition;
    let n = mesh.num_nodes();
    for m in [problem.system, problem.shifted] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: m.nrows() });
        }
    }
    if dec.num_nodes() != n {
        return Err(Error::DimensionMismatch { expected: n, got: dec.num_nodes() });
    }
    let counters = Arc::new(InnerCounters::default());

    let build_local = |s: &crate::decomposition::Subdomain| -> Result<Option<LocalPart>> {
        let (indices, solver): (Vec<usize>, Solver) = if kind.impedance() {
            let local = assemble_local_impedance(mesh, &s.elements, problem.coeff)?;
            let solver: Solver = match options.local_solve {
                InnerSolve::Direct => Box::new(factorize(&local.matrix)?),
                InnerSolve::Nested { tol, max_iters, cell_size } => {
                    let [i0, i1, j0, j1] = s.cells;
                    let sub = mesh.submesh(i0, i1, j0, j1)?;
                    debug_assert_eq!(sub.nodes, local.nodes);
                    let coeff = AssemblyCoefficients {
                        wavespeed: problem.coeff.wavespeed.restrict(&sub),
                        ..problem.coeff.clone()
                    };
                    Box::new(nested_impras1(
                        &sub.mesh,
                        local.matrix,
                        &coeff,
                        tol,
                        max_iters,
                        cell_size,
                        false,
                        counters.clone(),
                    )?)
                }
            };
            (local.nodes, solver)
        } else {
            if s.interior.is_empty() {
                return Ok(None);
            }
            if options.local_solve != InnerSolve::Direct {
                return Err(Error::InvalidArgument(
                    "nested local solves need impedance local problems".into(),
                ));
            }
            let minor = problem.shifted.submatrix(&s.interior, &s.interior)?;
            (s.interior.clone(), Box::new(factorize(&minor)?))
        };
        let core = s
            .core
            .iter()
            .filter_map(|c| {
                let pos = if kind.impedance() { Some(c.closed_pos) } else { c.interior_pos };
                pos.map(|p| (c.node, c.weight, p))
            })
            .collect();
        Ok(Some(LocalPart { subdomain: s.id, indices, solver, core }))
    };
    let built: Vec<Result<Option<LocalPart>>> = if options.parallel {
        dec.subdomains().par_iter().map(build_local).collect()
    } else {
        dec.subdomains().iter().map(build_local).collect()
    };
    let mut locals = Vec::with_capacity(built.len());
    for part in built {
        if let Some(p) = part? {
            locals.push(p);
        }
    }

    let coarse = match kind.coarse() {
        None => None,
        Some(mode) => {
            let r0 = dec.coarse_interp().clone();
            let ac = galerkin_coarse_matrix(&r0, problem.shifted)?;
            let solver: Solver = match options.coarse_solve {
                InnerSolve::Direct => Box::new(factorize(&ac)?),
                InnerSolve::Nested { tol, max_iters, cell_size } => {
                    let coarse_mesh = dec.layout().coarse_mesh(mesh);
                    let coeff = AssemblyCoefficients {
                        wavespeed: problem.coeff.wavespeed.resample(&coarse_mesh),
                        ..problem.coeff.clone()
                    };
                    Box::new(nested_impras1(
                        &coarse_mesh,
                        ac,
                        &coeff,
                        tol,
                        max_iters,
                        cell_size,
                        options.parallel,
                        counters.clone(),
                    )?)
                }
            };
            let projector = match options.projection {
                Projection::System => problem.system.clone(),
                Projection::Shifted => problem.shifted.clone(),
            };
            Some(CoarsePart { r0t: r0.transpose(), r0, solver, projector, mode })
        }
    };

    Ok(SchwarzPreconditioner {
        kind,
        n,
        locals,
        coarse,
        coarse_enabled: true,
        parallel: options.parallel,
        counters,
    })
}

impl SchwarzPreconditioner {
    pub fn kind(&self) -> PrecondKind {
        self.kind
    }

    pub fn num_local_solvers(&self) -> usize {
        self.locals.len()
    }

    /// Subdomain ids with a local solver, in application order.
    pub fn local_subdomains(&self) -> Vec<usize> {
        self.locals.iter().map(|l| l.subdomain).collect()
    }

    /// Whether the preconditioner is a fixed linear map (no inner iterations).
    pub fn is_linear(&self) -> bool {
        Arc::strong_count(&self.counters) == 1
    }

    pub fn inner_stats(&self) -> InnerStats {
        self.counters.snapshot()
    }

    pub fn reset_inner_stats(&self) {
        self.counters.reset()
    }

    /// Switch the coarse level off (or back on) without rebuilding.
    pub fn set_coarse_enabled(&mut self, enabled: bool) {
        self.coarse_enabled = enabled;
    }

    fn local_solutions(&self, v: &[C64]) -> Vec<Vec<C64>> {
        let solve = |l: &LocalPart| -> Vec<C64> {
            let rhs: Vec<C64> = l.indices.iter().map(|&i| v[i]).collect();
            l.solver.apply_vec(&rhs)
        };
        if self.parallel {
            self.locals.par_iter().map(solve).collect()
        } else {
            self.locals.iter().map(solve).collect()
        }
    }

    /// One-level part `B_loc v`.
    pub fn apply_local(&self, v: &[C64], y: &mut [C64]) {
        y.iter_mut().for_each(|x| *x = ZERO);
        let sols = self.local_solutions(v);
        for (l, sol) in self.locals.iter().zip(&sols) {
            if self.kind.restricted() {
                for &(node, w, pos) in &l.core {
                    y[node] += w * sol[pos];
                }
            } else {
                for (&i, &s) in l.indices.iter().zip(sol) {
                    y[i] += s;
                }
            }
        }
    }

    fn coarse_correction(c: &CoarsePart, v: &[C64]) -> Vec<C64> {
        let rhs = c.r0.mul_vec(v);
        let sol = c.solver.apply_vec(&rhs);
        c.r0t.mul_vec(&sol)
    }
}

impl LinearOperator for SchwarzPreconditioner {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &[C64], y: &mut [C64]) {
        let coarse = self.coarse.as_ref().filter(|_| self.coarse_enabled);
        let Some(c) = coarse else {
            self.apply_local(v, y);
            return;
        };
        match c.mode {
            CoarseMode::Additive => {
                self.apply_local(v, y);
                let y0 = Self::coarse_correction(c, v);
                y.iter_mut().zip(&y0).for_each(|(a, b)| *a += b);
            }
            CoarseMode::Hybrid => {
                let y0 = Self::coarse_correction(c, v);
                let ay0 = c.projector.mul_vec(&y0);
                let p: Vec<C64> = v.iter().zip(&ay0).map(|(a, b)| a - b).collect();
                let mut z = vec![ZERO; self.n];
                self.apply_local(&p, &mut z);
                // P0^T z = z - Q^T A^T z, and A, A_0 are complex symmetric
                let az = c.projector.mul_vec(&z);
                let qaz = Self::coarse_correction(c, &az);
                for i in 0..self.n {
                    y[i] = y0[i] + z[i] - qaz[i];
                }
            }
        }
    }
}
