//! Field-of-values scaling of two-level preconditioners against `k` and the absorption.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_energy_matrix, assemble_system, AssemblyCoefficients};
use crate::decomposition::build_decomposition;
use crate::krylov::PrecondSide;
use crate::mesh::{build_coarse_layout, Mesh};
use crate::operator::LinearOperator;
use crate::precond::{build_preconditioner, PrecondKind, PrecondOptions, Problem};
use crate::{Result, C64};

use super::{check_gmres_bound, InnerProduct};

/// `B^{-1} A` (left) or `A B^{-1}` (right) assembled column by column.
pub fn preconditioned_dense(a: &dyn LinearOperator, b: &dyn LinearOperator, side: PrecondSide) -> DMatrix<C64> {
    let n = a.dim();
    let columns: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[j] = C64::new(1.0, 0.0);
            match side {
                PrecondSide::Left => b.apply_vec(&a.apply_vec(&e)),
                PrecondSide::Right => a.apply_vec(&b.apply_vec(&e)),
                PrecondSide::None => a.apply_vec(&e),
            }
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| columns[j][i])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub ks: Vec<f64>,
    /// Absorption `eps = k^beta` in both the problem and the preconditioner.
    pub beta: f64,
    /// Coarse cells per side `ceil(k^alpha)`.
    pub alpha: f64,
    /// Fine cells per side `ceil(mesh_factor * k)`.
    pub mesh_factor: f64,
    pub precond: PrecondKind,
    /// Iterations of the envelope check.
    pub gmres_iters: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { ks: vec![5.0, 10.0, 15.0, 20.0], beta: 2.0, alpha: 1.0, mesh_factor: 3.0, precond: PrecondKind::As, gmres_iters: 25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `left_D` for `B^{-1} A` in the `D` inner product, `right_Dinv` for `A B^{-1}` in `D^{-1}`.
    pub tag: String,
    pub k: f64,
    pub eps: f64,
    #[serde(rename = "H")]
    pub h_coarse: f64,
    pub dist: f64,
    pub norm: f64,
    pub beta: f64,
    pub certified: bool,
    pub max_ratio: f64,
}

/// Assembled operators for one wavenumber of a sweep.
pub struct AnalysisInstance {
    pub mesh: Mesh,
    pub system: crate::sparse::CsrMatrix,
    pub energy: crate::sparse::CsrMatrix,
    pub preconditioner: crate::precond::SchwarzPreconditioner,
    pub eps: f64,
    pub h_coarse: f64,
}

pub fn analysis_instance(k: f64, spec: &SweepSpec) -> Result<AnalysisInstance> {
    let m = crate::mesh::ceil_snapped(spec.mesh_factor * k).max(1);
    let mesh = Mesh::unit_square(m);
    let eps = k.powf(spec.beta);
    let coeff = AssemblyCoefficients::constant(&mesh, k, eps);
    let system = assemble_system(&mesh, &coeff)?;
    let energy = assemble_energy_matrix(&mesh, k)?;
    let layout = build_coarse_layout(&mesh, k, spec.alpha)?;
    let decomposition = build_decomposition(&mesh, &layout)?;
    let problem = Problem { mesh: &mesh, decomposition: &decomposition, system: &system, shifted: &system, coeff: &coeff };
    let preconditioner = build_preconditioner(spec.precond, &problem, &PrecondOptions::default())?;
    let h_coarse = 1.0 / layout.mx() as f64;
    Ok(AnalysisInstance { mesh, system, energy, preconditioner, eps, h_coarse })
}

pub fn scaling_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &k in &spec.ks {
        let inst = analysis_instance(k, spec)?;
        let n = inst.system.nrows();
        // not the constant vector: it lies in the coarse space, where hybrid methods are exact
        let b = super::pseudo_random(n, k.to_bits());
        for (tag, side, ip) in [
            ("left_D", PrecondSide::Left, InnerProduct::Weighted(&inst.energy)),
            ("right_Dinv", PrecondSide::Right, InnerProduct::InverseWeighted(&inst.energy)),
        ] {
            let c = preconditioned_dense(&inst.system, &inst.preconditioner, side);
            let report = check_gmres_bound(&c, &ip, &b, spec.gmres_iters)?;
            let e = &report.estimate;
            log::info!(
                "k={k} {tag}: dist={:.3e} norm={:.3e} certified={} envelope={}",
                e.dist_to_origin,
                e.norm,
                e.certified,
                if report.checked { report.holds.to_string() } else { "skipped".into() }
            );
            rows.push(SweepRow {
                tag: tag.into(),
                k,
                eps: inst.eps,
                h_coarse: inst.h_coarse,
                dist: e.dist_to_origin,
                norm: e.norm,
                beta: e.beta,
                certified: e.certified,
                max_ratio: report.max_ratio,
            });
        }
    }
    Ok(rows)
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx < 1e-12 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Slopes of `log norm` against `log(k^2/eps)` and of `log dist` against `log(eps/k^2)`
/// over the rows carrying `tag`.
pub fn sweep_slopes(rows: &[SweepRow], tag: &str) -> (Option<f64>, Option<f64>) {
    let sel: Vec<&SweepRow> = rows.iter().filter(|r| r.tag == tag).collect();
    let ratio: Vec<f64> = sel.iter().map(|r| r.k * r.k / r.eps).collect();
    let inv: Vec<f64> = ratio.iter().map(|r| 1.0 / r).collect();
    let norms: Vec<f64> = sel.iter().map(|r| r.norm).collect();
    let dists: Vec<f64> = sel.iter().map(|r| r.dist).collect();
    (fit_loglog_slope(&ratio, &norms), fit_loglog_slope(&inv, &dists))
}

pub fn emit_sweep<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
