//! Invariant checks shared by the property suite and the acceptance target.
#![allow(dead_code)]

use helmdd::assembly::{assemble_energy_matrix, assemble_system, AssemblyCoefficients};
use helmdd::decomposition::{build_coarse_interpolation, build_decomposition, build_ras_weights};
use helmdd::factor::cholesky;
use helmdd::harness::plane_wave;
use helmdd::krylov::{gmres, KrylovConfig, PrecondSide};
use helmdd::mesh::{CoarseLayout, Mesh};
use helmdd::precond::{build_preconditioner, PrecondKind, PrecondOptions, Problem};
use helmdd::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Absorption for rule 0 (none), 1 (`k`) or 2 (`k^2`).
pub fn eps_for(k: f64, rule: u8) -> f64 {
    match rule {
        0 => 0.0,
        1 => k,
        _ => k * k,
    }
}

pub fn random_vec(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn complex_symmetry(m: usize, k: f64, rule: u8) -> Check {
    let mesh = Mesh::unit_square(m);
    let a = assemble_system(&mesh, &AssemblyCoefficients::constant(&mesh, k, eps_for(k, rule))).map_err(|e| e.to_string())?;
    let diff = a.max_abs_diff(&a.transpose());
    ensure!(diff <= 1e-14 * a.max_abs(), "A - A^T = {diff:e} (m={m}, k={k})");
    Ok(())
}

pub fn energy_positive_definite(m: usize, k: f64, seed: u64) -> Check {
    let mesh = Mesh::unit_square(m);
    let d = assemble_energy_matrix(&mesh, k).map_err(|e| e.to_string())?;
    ensure!(d.max_abs_diff(&d.conj_transpose()) <= 1e-14 * d.max_abs(), "D not Hermitian (m={m}, k={k})");
    ensure!(cholesky(&d).is_ok(), "Cholesky failed (m={m}, k={k})");
    let x = random_vec(d.nrows(), seed);
    let q: C64 = x.iter().zip(d.mul_vec(&x)).map(|(a, b)| a.conj() * b).sum();
    ensure!(q.re > 0.0 && q.im.abs() <= 1e-12 * q.re, "x^H D x = {q} (m={m}, k={k})");
    Ok(())
}

pub fn ras_partition_of_unity(m: usize, mx: usize, my: usize) -> Check {
    let mesh = Mesh::unit_square(m);
    let layout = CoarseLayout::with_cells(&mesh, mx, my).map_err(|e| e.to_string())?;
    let weights = build_ras_weights(&mesh, &layout);
    ensure!(weights.len() == mesh.num_nodes(), "weight table has {} rows", weights.len());
    for (node, w) in weights.iter().enumerate() {
        let s: f64 = w.iter().map(|p| p.1).sum();
        ensure!((s - 1.0).abs() < 1e-14, "weights at node {node} sum to {s}");
        ensure!(w.iter().all(|p| p.1 > 0.0) && w.len() <= 4, "bad owners at node {node}: {w:?}");
    }
    Ok(())
}

pub fn coarse_columns_sum_to_one(m: usize, mx: usize, my: usize) -> Check {
    let mesh = Mesh::unit_square(m);
    let layout = CoarseLayout::with_cells(&mesh, mx, my).map_err(|e| e.to_string())?;
    let r0 = build_coarse_interpolation(&mesh, &layout);
    let sums = r0.transpose_mul_vec(&vec![C64::new(1.0, 0.0); r0.nrows()]);
    let worst = sums.iter().map(|s| (s - 1.0).norm()).fold(0.0, f64::max);
    ensure!(worst < 1e-13, "column sum off by {worst:e} (m={m}, {mx}x{my})");
    Ok(())
}

pub fn gmres_monotone(m: usize, k: f64, cells: usize, kind: PrecondKind, side: PrecondSide, seed: u64) -> Check {
    let mesh = Mesh::unit_square(m);
    let coeff = AssemblyCoefficients::constant(&mesh, k, k);
    let a = assemble_system(&mesh, &AssemblyCoefficients::constant(&mesh, k, 0.0)).map_err(|e| e.to_string())?;
    let a_eps = assemble_system(&mesh, &coeff).map_err(|e| e.to_string())?;
    let layout = CoarseLayout::with_cells(&mesh, cells, cells).map_err(|e| e.to_string())?;
    let dec = build_decomposition(&mesh, &layout).map_err(|e| e.to_string())?;
    let problem = Problem { mesh: &mesh, decomposition: &dec, system: &a, shifted: &a_eps, coeff: &coeff };
    let prec = build_preconditioner(kind, &problem, &PrecondOptions::default()).map_err(|e| e.to_string())?;
    let b = random_vec(a.nrows(), seed);
    let (_, rep) = gmres(&a, &prec, &b, &KrylovConfig::new(side, 1e-8, 150)).map_err(|e| e.to_string())?;
    ensure!(rep.residual_history[0] == 1.0, "history starts at {}", rep.residual_history[0]);
    for (i, w) in rep.residual_history.windows(2).enumerate() {
        ensure!(w[1] <= w[0] * (1.0 + 1e-12), "residual rose at step {} ({} -> {})", i + 1, w[0], w[1]);
    }
    Ok(())
}

pub fn plane_wave_recovery(m: usize, k: f64, rule: u8) -> Check {
    let mesh = Mesh::unit_square(m);
    let coeff = AssemblyCoefficients::constant(&mesh, k, eps_for(k, rule));
    let a = assemble_system(&mesh, &coeff).map_err(|e| e.to_string())?;
    let u = plane_wave(&mesh, k);
    let f = a.mul_vec(&u);
    let layout = CoarseLayout::with_cells(&mesh, 2, 2).map_err(|e| e.to_string())?;
    let dec = build_decomposition(&mesh, &layout).map_err(|e| e.to_string())?;
    let problem = Problem { mesh: &mesh, decomposition: &dec, system: &a, shifted: &a, coeff: &coeff };
    let prec = build_preconditioner(PrecondKind::ImpHras, &problem, &PrecondOptions::default()).map_err(|e| e.to_string())?;
    let (x, rep) = gmres(&a, &prec, &f, &KrylovConfig::new(PrecondSide::Right, 1e-12, 200)).map_err(|e| e.to_string())?;
    ensure!(rep.converged, "GMRES did not converge (m={m}, k={k})");
    let err: Vec<C64> = x.iter().zip(&u).map(|(p, q)| p - q).collect();
    let rel = norm(&err) / norm(&u);
    ensure!(rel < 1e-8, "relative error {rel:e} (m={m}, k={k})");
    Ok(())
}
