//! Experiment configurations, right-hand sides, single runs and result tables.

mod output;
mod presets;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_system, AssemblyCoefficients, ShiftMode};
use crate::decomposition::build_decomposition;
use crate::krylov::{fgmres, gmres, KrylovConfig, PrecondSide};
use crate::mesh::{build_fine_mesh, build_wavespeed, ceil_snapped, CoarseLayout, Mesh, MeshRule, Scenario, WaveSpeedField};
use crate::precond::{build_preconditioner, InnerSolve, PrecondKind, PrecondOptions, Problem, Projection};
use crate::sparse::CsrMatrix;
use crate::{Error, Result, C64};

pub use output::{emit_results, read_results, write_results, OutputFormat};
pub use presets::{default_ks, expand_preset, run_table, Preset, RunSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsKind {
    PlaneWave,
    Ones,
}

impl std::str::FromStr for RhsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "plane_wave" => Ok(RhsKind::PlaneWave),
            "ones" => Ok(RhsKind::Ones),
            _ => Err(Error::Unknown(s.to_string())),
        }
    }
}

/// Inner iterations replacing exact coarse or local solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "level", content = "alpha")]
pub enum Nesting {
    None,
    /// Coarse problem solved by GMRES with ImpRAS1 on cells of size `k^-alpha`.
    Coarse(f64),
    /// Local impedance problems solved by GMRES with ImpRAS1 on cells of size `k^-alpha`.
    Local(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: String,
    /// Wavenumber, or angular frequency for variable speed.
    pub k: f64,
    pub mesh_rule: MeshRule,
    pub scenario: Scenario,
    pub c_star: f64,
    /// Absorption in the solved problem (additive, constant speed only).
    pub eps_prob: f64,
    pub precond: PrecondKind,
    pub nesting: Nesting,
    /// Coarse cells have side about `k^-alpha`.
    pub alpha: f64,
    /// `eps_prec = k^beta`, or `rho = k^(beta - 2)` for variable speed.
    pub beta: f64,
    pub rel_tol: f64,
    pub inner_tol: f64,
    pub max_iters: usize,
    pub inner_max_iters: usize,
    pub rhs: RhsKind,
    pub side: PrecondSide,
    pub projection: Projection,
    pub parallel: bool,
    /// Permit runs above the desk-scale memory budget.
    pub allow_large: bool,
}

impl ExperimentConfig {
    pub fn new(k: f64, mesh_rule: MeshRule, precond: PrecondKind, alpha: f64, beta: f64) -> Self {
        Self {
            preset: "custom".into(),
            k,
            mesh_rule,
            scenario: Scenario::Constant,
            c_star: 1.0,
            eps_prob: 0.0,
            precond,
            nesting: Nesting::None,
            alpha,
            beta,
            rel_tol: 1e-6,
            inner_tol: 0.5,
            max_iters: 200,
            inner_max_iters: 200,
            rhs: RhsKind::PlaneWave,
            side: PrecondSide::Right,
            projection: Projection::System,
            parallel: true,
            allow_large: false,
        }
    }

    pub fn variable_speed(&self) -> bool {
        self.scenario != Scenario::Constant
    }

    /// Coarse cells per side.
    pub fn coarse_cells(&self) -> usize {
        let m = ceil_snapped(self.k.powf(self.alpha)).max(1);
        if self.variable_speed() {
            // a multiple of 3 puts coarse gridlines on the centred inner square
            3 * m.div_ceil(3)
        } else {
            m
        }
    }

    pub fn preconditioner_shift(&self) -> ShiftMode {
        if self.variable_speed() {
            ShiftMode::MultiplicativeRho(self.k.powf(self.beta - 2.0))
        } else {
            ShiftMode::AdditiveEps(self.k.powf(self.beta))
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) {
            return Err(Error::InvalidArgument(format!("k must be positive, got {}", self.k)));
        }
        if self.variable_speed() && self.eps_prob != 0.0 {
            return Err(Error::InvalidArgument("variable speed problems are solved without absorption".into()));
        }
        if self.nesting != Nesting::None && self.side != PrecondSide::Right {
            return Err(Error::InvalidArgument("nested inner solves need right preconditioning".into()));
        }
        Ok(())
    }

    /// Rough peak memory of the run in bytes.
    pub fn memory_estimate(&self) -> Result<usize> {
        let m = self.mesh_rule.cells_per_side(self.k)?;
        let n = (m + 1) * (m + 1);
        let vectors = match self.nesting {
            Nesting::None => self.max_iters + 2,
            _ => 2 * self.max_iters + 2,
        };
        Ok(n * 16 * (vectors + 7 * 3))
    }
}

/// Largest wavenumber run on a pollution-free mesh without opt-in.
pub const POLLUTION_FREE_K_CAP: f64 = 60.0;

/// Desk-scale memory budget for a single run.
pub const MEMORY_BUDGET: usize = 3 << 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub preset: String,
    pub k: f64,
    pub n: usize,
    pub mesh_rule: String,
    pub precond: String,
    pub alpha: f64,
    pub beta: f64,
    pub scenario: String,
    pub c_star: f64,
    /// `-1` when the cap was hit without convergence.
    pub outer_iters: i64,
    /// Mean inner iterations per inner solve; 0 without nesting.
    pub inner_iters_avg: f64,
    pub converged: bool,
    pub time_total_s: f64,
    pub time_per_iter_s: f64,
    /// True relative residual `||f - A u|| / ||f||`; empty if the run failed.
    pub final_relres: Option<f64>,
}

impl ResultRow {
    fn skeleton(config: &ExperimentConfig, n: usize) -> Self {
        Self {
            preset: config.preset.clone(),
            k: config.k,
            n,
            mesh_rule: config.mesh_rule.name(),
            precond: config.precond.name().into(),
            alpha: config.alpha,
            beta: config.beta,
            scenario: config.scenario.name().into(),
            c_star: config.c_star,
            outer_iters: -1,
            inner_iters_avg: 0.0,
            converged: false,
            time_total_s: 0.0,
            time_per_iter_s: 0.0,
            final_relres: None,
        }
    }

    /// Row for a configuration that could not be run.
    pub fn failed(config: &ExperimentConfig) -> Self {
        let n = config.mesh_rule.cells_per_side(config.k).map(|m| (m + 1) * (m + 1)).unwrap_or(0);
        Self::skeleton(config, n)
    }

    /// Outer count as printed in tables: the number, or `*`.
    pub fn iterations_label(&self) -> String {
        if self.outer_iters < 0 {
            "*".into()
        } else {
            self.outer_iters.to_string()
        }
    }
}

/// Nodal interpolant of `exp(i k x)`.
pub fn plane_wave(mesh: &Mesh, k: f64) -> Vec<C64> {
    (0..mesh.num_nodes())
        .map(|n| {
            let [x, _] = mesh.node_coords(n);
            C64::from_polar(1.0, k * x)
        })
        .collect()
}

/// Right-hand side: all ones, or `A u_I` for the plane-wave interpolant `u_I`.
pub fn build_rhs(mesh: &Mesh, kind: RhsKind, k: f64, a: &CsrMatrix) -> Vec<C64> {
    match kind {
        RhsKind::Ones => vec![C64::new(1.0, 0.0); mesh.num_nodes()],
        RhsKind::PlaneWave => a.mul_vec(&plane_wave(mesh, k)),
    }
}

/// A fully assembled experiment, kept for inspection by tests and the CLI.
pub struct Setup {
    pub mesh: Mesh,
    pub system: CsrMatrix,
    pub shifted: CsrMatrix,
    pub coeff_prec: AssemblyCoefficients,
    pub decomposition: crate::decomposition::Decomposition,
    pub wavespeed: WaveSpeedField,
}

pub fn build_setup(config: &ExperimentConfig) -> Result<Setup> {
    config.validate()?;
    if !config.allow_large && config.memory_estimate()? > MEMORY_BUDGET {
        return Err(Error::InvalidArgument(format!(
            "estimated memory {} MB exceeds the budget; pass --allow-large to run anyway",
            config.memory_estimate()? >> 20
        )));
    }
    if !config.allow_large && config.mesh_rule == MeshRule::PollutionFree && config.k > POLLUTION_FREE_K_CAP {
        return Err(Error::InvalidArgument(format!(
            "pollution-free meshes are capped at k = {POLLUTION_FREE_K_CAP}; pass --allow-large to run k = {}",
            config.k
        )));
    }
    let mesh = build_fine_mesh(config.k, config.mesh_rule)?;
    let cells = config.coarse_cells();
    let layout = CoarseLayout::with_cells(&mesh, cells, cells)?;
    let decomposition = build_decomposition(&mesh, &layout)?;
    let wavespeed = match config.scenario {
        Scenario::Constant => WaveSpeedField::constant(&mesh),
        s => build_wavespeed(&mesh, s, config.c_star, decomposition.overlap_layers())?,
    };
    let coeff_prob = if config.variable_speed() {
        AssemblyCoefficients::variable(config.k, wavespeed.clone(), 0.0)
    } else {
        AssemblyCoefficients::constant(&mesh, config.k, config.eps_prob)
    };
    let system = assemble_system(&mesh, &coeff_prob)?;
    let coeff_prec = coeff_prob.with_shift(config.preconditioner_shift());
    let shifted = if coeff_prec.shift_mode == coeff_prob.shift_mode {
        system.clone()
    } else {
        assemble_system(&mesh, &coeff_prec)?
    };
    Ok(Setup { mesh, system, shifted, coeff_prec, decomposition, wavespeed })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultRow> {
    let start = Instant::now();
    let setup = build_setup(config)?;
    if let Some(w) = setup.decomposition.warning() {
        log::warn!("k={}: {w}", config.k);
    }
    let inner = |alpha: f64| InnerSolve::Nested {
        tol: config.inner_tol,
        max_iters: config.inner_max_iters,
        cell_size: config.k.powf(-alpha),
    };
    let options = PrecondOptions {
        projection: config.projection,
        coarse_solve: match config.nesting {
            Nesting::Coarse(a) => inner(a),
            _ => InnerSolve::Direct,
        },
        local_solve: match config.nesting {
            Nesting::Local(a) => inner(a),
            _ => InnerSolve::Direct,
        },
        parallel: config.parallel,
    };
    let problem = Problem {
        mesh: &setup.mesh,
        decomposition: &setup.decomposition,
        system: &setup.system,
        shifted: &setup.shifted,
        coeff: &setup.coeff_prec,
    };
    let prec = build_preconditioner(config.precond, &problem, &options)?;
    let b = build_rhs(&setup.mesh, config.rhs, config.k, &setup.system);

    let kcfg = KrylovConfig::new(config.side, config.rel_tol, config.max_iters);
    let (_, report) = if config.nesting == Nesting::None {
        gmres(&setup.system, &prec, &b, &kcfg)?
    } else {
        fgmres(&setup.system, &prec, &b, &kcfg.flexible())?
    };
    let stats = prec.inner_stats();
    if stats.failures > 0 {
        log::warn!("k={}: {} of {} inner solves stopped at the cap", config.k, stats.failures, stats.calls);
    }
    let total = start.elapsed().as_secs_f64();
    let mut row = ResultRow::skeleton(config, setup.mesh.num_nodes());
    row.outer_iters = if report.converged { report.iterations as i64 } else { -1 };
    row.inner_iters_avg = stats.average();
    row.converged = report.converged;
    row.time_total_s = total;
    row.time_per_iter_s = total / report.iterations.max(1) as f64;
    row.final_relres = Some(report.true_relres);
    log::info!(
        "{} k={} {} alpha={} beta={} -> {} ({:.1} inner) in {:.2}s",
        config.preset,
        config.k,
        config.precond,
        config.alpha,
        config.beta,
        row.iterations_label(),
        row.inner_iters_avg,
        total
    );
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::factorize;

    #[test]
    fn ones_rhs() {
        let mesh = Mesh::unit_square(4);
        let a = CsrMatrix::identity(25);
        let b = build_rhs(&mesh, RhsKind::Ones, 1.0, &a);
        assert_eq!(b, vec![C64::new(1.0, 0.0); 25]);
    }

    #[test]
    fn plane_wave_has_unit_modulus_and_is_recovered() {
        let mesh = Mesh::unit_square(12);
        let u = plane_wave(&mesh, 1.0);
        assert!(u.iter().all(|v| (v.norm() - 1.0).abs() < 1e-15));
        let a = assemble_system(&mesh, &AssemblyCoefficients::constant(&mesh, 5.0, 0.0)).unwrap();
        let b = build_rhs(&mesh, RhsKind::PlaneWave, 5.0, &a);
        let x = factorize(&a).unwrap().solve(&b);
        let ui = plane_wave(&mesh, 5.0);
        let err: f64 = x.iter().zip(&ui).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        assert!(err / (ui.len() as f64).sqrt() < 1e-10);
    }

    #[test]
    fn small_run_converges() {
        let mut cfg = ExperimentConfig::new(10.0, MeshRule::PointsPerWavelength, PrecondKind::Hras, 1.0, 1.0);
        cfg.mesh_rule = MeshRule::Explicit(40);
        let row = run_experiment(&cfg).unwrap();
        assert!(row.converged);
        assert_eq!(row.n, 41 * 41);
        assert!(row.final_relres.unwrap() <= 2e-6);
    }

    #[test]
    fn coarse_cells_for_variable_speed_are_multiple_of_three() {
        let mut cfg = ExperimentConfig::new(40.0, MeshRule::PollutionFree, PrecondKind::Hras, 1.0, 1.0);
        assert_eq!(cfg.coarse_cells(), 40);
        cfg.scenario = Scenario::CenteredSquare;
        assert_eq!(cfg.coarse_cells(), 42);
    }

    #[test]
    fn large_runs_are_refused_without_opt_in() {
        let cfg = ExperimentConfig::new(100.0, MeshRule::PollutionFree, PrecondKind::Hras, 1.0, 1.0);
        assert!(matches!(build_setup(&cfg), Err(Error::InvalidArgument(_))));
    }
}
