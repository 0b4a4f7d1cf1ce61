//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Reference counts are the published table entries; tolerances are pinned below.

mod support;

use std::time::Instant;

use helmdd::analysis::{
    analysis_instance, check_adjoint_identity, check_gmres_bound, fit_loglog_slope, preconditioned_dense, InnerProduct,
    SweepSpec,
};
use helmdd::assembly::{assemble_local_impedance, assemble_system, AssemblyCoefficients};
use helmdd::decomposition::{build_coarse_interpolation, build_decomposition, build_ras_weights};
use helmdd::harness::{expand_preset, run_experiment, ExperimentConfig, Preset, ResultRow, RunSettings};
use helmdd::krylov::{gmres, KrylovConfig, PrecondSide};
use helmdd::mesh::{CoarseLayout, Mesh, Scenario};
use helmdd::operator::LinearOperator;
use helmdd::precond::{build_preconditioner, PrecondKind, PrecondOptions, Problem};
use helmdd::C64;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative error allowed between a preconditioner and its dense formula.
const DENSE_ORACLE_TOL: f64 = 1e-10;
/// Wall-clock budget for the dense-oracle sweep, seconds.
const DENSE_ORACLE_SECONDS: f64 = 10.0;
/// Relative band around published outer counts.
const COUNT_BAND: f64 = 0.5;
/// Absolute band around published inner averages.
const INNER_BAND: f64 = 2.0;
/// Outer iteration cap shared by all table runs.
const CAP: usize = 200;
/// One-level RAS1 at k=20 must need at least this many iterations.
const RAS1_FLOOR: i64 = 60;
/// Fitted slope window for Table 4 iterations against n.
const SLOPE_WINDOW: (f64, f64) = (0.05, 0.35);
/// Slack in the field-of-values GMRES envelope.
const ENVELOPE_SLACK: f64 = 1e-10;
/// Adjoint identity: pointwise tolerance and instance count.
const ADJOINT_TOL: f64 = 1e-10;
const ADJOINT_INSTANCES: u64 = 100;
/// Largest k whose field of values is checked against the envelope.
const ENVELOPE_K_MAX: f64 = 15.0;
/// Allowed spread of iteration counts in the strong-absorption regime.
const STRONG_ABSORPTION_SPREAD: i64 = 3;
/// Allowed gap between resolved and unresolved inclusions.
const INCLUSION_GAP: i64 = 3;
/// Seeds drawn for each property invariant and their time budget.
const PROPERTY_SEEDS: u64 = 50;
const PROPERTY_SECONDS: f64 = 60.0;

struct Outcome {
    id: usize,
    pass: bool,
    detail: String,
}

fn within(count: i64, reference: f64) -> bool {
    count >= 0 && (count as f64 - reference).abs() <= COUNT_BAND * reference
}

fn solve(c: &ExperimentConfig) -> ResultRow {
    let t = Instant::now();
    let row = run_experiment(c).unwrap_or_else(|e| {
        eprintln!("  {} k={} failed: {e}", c.precond, c.k);
        ResultRow::failed(c)
    });
    eprintln!(
        "  {:<8} k={:<4} alpha={:<4} beta={:<4} {:<16} c*={:<5} n={:<7} iters={} inner={:.2} ({:.1}s)",
        row.precond,
        row.k,
        row.alpha,
        row.beta,
        row.scenario,
        row.c_star,
        row.n,
        row.iterations_label(),
        row.inner_iters_avg,
        t.elapsed().as_secs_f64()
    );
    row
}

fn pick(preset: Preset, k: f64, keep: impl Fn(&ExperimentConfig) -> bool) -> Vec<ExperimentConfig> {
    let settings = RunSettings { max_iters: CAP, ..RunSettings::default() };
    expand_preset(preset, &[k], &settings).into_iter().filter(|c| keep(c)).collect()
}

fn one(preset: Preset, k: f64, keep: impl Fn(&ExperimentConfig) -> bool) -> ResultRow {
    let configs = pick(preset, k, keep);
    assert_eq!(configs.len(), 1, "{preset:?} k={k} selects {} rows", configs.len());
    solve(&configs[0])
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

// ---------------------------------------------------------------------------
// 1. dense oracle

fn dense_inverse(a: &DMatrix<C64>) -> DMatrix<C64> {
    a.clone().lu().try_inverse().expect("local matrix is invertible")
}

/// Rows `nodes` of the identity.
fn selection(nodes: &[usize], n: usize) -> DMatrix<C64> {
    let mut r = DMatrix::zeros(nodes.len(), n);
    for (i, &g) in nodes.iter().enumerate() {
        r[(i, g)] = C64::new(1.0, 0.0);
    }
    r
}

fn dense_formula(kind: PrecondKind, mesh: &Mesh, layout: &CoarseLayout, a: &DMatrix<C64>, a_eps: &DMatrix<C64>, coeff: &AssemblyCoefficients) -> DMatrix<C64> {
    let n = mesh.num_nodes();
    let dec = build_decomposition(mesh, layout).unwrap();
    let weights = build_ras_weights(mesh, layout);
    let mut local = DMatrix::<C64>::zeros(n, n);
    for s in dec.subdomains() {
        let cell = layout.cell_index(s.core_cell.0, s.core_cell.1);
        let (nodes, a_l) = if kind.impedance() {
            let lm = assemble_local_impedance(mesh, &s.elements, coeff).unwrap();
            (lm.nodes.clone(), lm.matrix.to_dense())
        } else {
            if s.interior.is_empty() {
                continue;
            }
            let r = selection(&s.interior, n);
            (s.interior.clone(), &r * a_eps * r.transpose())
        };
        let r = selection(&nodes, n);
        let mut inv = dense_inverse(&a_l);
        if kind.restricted() {
            for (i, &g) in nodes.iter().enumerate() {
                let w = weights[g].iter().find(|p| p.0 == cell).map_or(0.0, |p| p.1);
                inv.row_mut(i).scale_mut(w);
            }
        }
        local += r.transpose() * inv * &r;
    }
    let r0 = build_coarse_interpolation(mesh, layout).to_dense();
    let q = || r0.transpose() * dense_inverse(&(&r0 * a_eps * r0.transpose())) * &r0;
    let id = DMatrix::<C64>::identity(n, n);
    match kind {
        PrecondKind::As1 | PrecondKind::Ras1 | PrecondKind::ImpRas1 => local,
        PrecondKind::As => local + q(),
        PrecondKind::Hras | PrecondKind::ImpHras => {
            let q = q();
            &q + (&id - &q * a) * local * (&id - a * &q)
        }
    }
}

fn criterion_dense_oracle() -> Outcome {
    let t = Instant::now();
    let mut worst = 0f64;
    let mut cases = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for &(m, mx, my) in &[(8, 2, 2), (7, 2, 1), (6, 1, 2), (8, 1, 1), (5, 2, 2)] {
        let mesh = Mesh::unit_square(m);
        let layout = CoarseLayout::with_cells(&mesh, mx, my).unwrap();
        let dec = build_decomposition(&mesh, &layout).unwrap();
        let k = 4.0;
        let coeff = AssemblyCoefficients::constant(&mesh, k, k);
        let a = assemble_system(&mesh, &AssemblyCoefficients::constant(&mesh, k, 0.0)).unwrap();
        let a_eps = assemble_system(&mesh, &coeff).unwrap();
        let (ad, aed) = (a.to_dense(), a_eps.to_dense());
        let problem = Problem { mesh: &mesh, decomposition: &dec, system: &a, shifted: &a_eps, coeff: &coeff };
        for kind in PrecondKind::ALL {
            let prec = build_preconditioner(kind, &problem, &PrecondOptions::default()).unwrap();
            let dense = dense_formula(kind, &mesh, &layout, &ad, &aed, &coeff);
            for _ in 0..20 {
                let v: Vec<C64> = (0..a.nrows()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                let got = DVector::from_vec(prec.apply_vec(&v));
                let want = &dense * DVector::from_vec(v);
                worst = worst.max((got - &want).norm() / want.norm());
                cases += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Outcome {
        id: 1,
        pass: worst <= DENSE_ORACLE_TOL && secs < DENSE_ORACLE_SECONDS,
        detail: format!("{cases} applications, max rel err {worst:.2e} (tol {DENSE_ORACLE_TOL:e}), {secs:.2}s"),
    }
}

// ---------------------------------------------------------------------------
// 2-6. constant-speed tables

fn criterion_table1() -> Outcome {
    let hras: Vec<(f64, ResultRow)> = [(20.0, 12.0), (40.0, 18.0), (60.0, 25.0)]
        .iter()
        .map(|&(k, r)| (r, one(Preset::Table1, k, |c| c.precond == PrecondKind::Hras && c.alpha == 1.0 && c.beta == 1.0)))
        .collect();
    let ras20 = one(Preset::Table1, 20.0, |c| c.precond == PrecondKind::Ras1 && c.alpha == 1.0 && c.beta == 1.0);
    let ras40 = one(Preset::Table1, 40.0, |c| c.precond == PrecondKind::Ras1 && c.alpha == 1.0 && c.beta == 1.0);
    let bands = hras.iter().all(|(r, row)| within(row.outer_iters, *r));
    let pass = bands && ras20.outer_iters >= RAS1_FLOOR && !ras40.converged;
    let counts: Vec<String> = hras.iter().map(|(r, row)| format!("{} (ref {r})", row.iterations_label())).collect();
    Outcome {
        id: 2,
        pass,
        detail: format!(
            "HRAS k=20/40/60: {}; RAS1 k=20: {} (>= {RAS1_FLOOR}), k=40: {} (cap {CAP})",
            counts.join(", "),
            ras20.iterations_label(),
            ras40.iterations_label()
        ),
    }
}

fn criterion_regime_flip() -> Outcome {
    let sel = |kind| move |c: &ExperimentConfig| c.precond == kind && close(c.alpha, 0.6) && c.beta == 1.0;
    let hras = one(Preset::Table1, 40.0, sel(PrecondKind::Hras));
    let imp = one(Preset::Table1, 40.0, sel(PrecondKind::ImpHras));
    let hras_count = if hras.converged { hras.outer_iters } else { CAP as i64 };
    let pass = imp.converged && (imp.outer_iters as usize) < CAP && hras_count >= 2 * imp.outer_iters;
    Outcome {
        id: 3,
        pass,
        detail: format!("k=40 alpha=0.6: HRAS {} vs ImpHRAS {}", hras.iterations_label(), imp.iterations_label()),
    }
}

fn criterion_table2() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (kind, refs) in [(PrecondKind::ImpHras, [14.0, 21.0, 28.0]), (PrecondKind::ImpRas1, [16.0, 23.0, 30.0])] {
        let mut got = Vec::new();
        for (k, r) in [20.0, 40.0, 60.0].into_iter().zip(refs) {
            let row = one(Preset::Table2, k, |c| c.precond == kind);
            pass &= within(row.outer_iters, r);
            got.push(row.iterations_label());
        }
        parts.push(format!("{kind} {} (ref {:?})", got.join("/"), refs));
    }
    Outcome { id: 4, pass, detail: parts.join("; ") }
}

fn criterion_table3() -> Outcome {
    let at = |k: f64, beta: f64| one(Preset::Table3, k, move |c| c.beta == beta);
    let r20 = at(20.0, 1.0);
    let r40 = at(40.0, 1.0);
    let r40b2 = at(40.0, 2.0);
    let worse = r40b2.outer_iters < 0 || (r40.outer_iters >= 0 && r40b2.outer_iters > r40.outer_iters);
    let pass = within(r20.outer_iters, 19.0)
        && within(r40.outer_iters, 22.0)
        && (r20.inner_iters_avg - 2.0).abs() <= INNER_BAND
        && (r40.inner_iters_avg - 3.0).abs() <= INNER_BAND
        && worse;
    Outcome {
        id: 5,
        pass,
        detail: format!(
            "beta=1: k=20 {}({:.2}) ref 19(2), k=40 {}({:.2}) ref 22(3); beta=2 k=40: {}",
            r20.iterations_label(),
            r20.inner_iters_avg,
            r40.iterations_label(),
            r40.inner_iters_avg,
            r40b2.iterations_label()
        ),
    }
}

fn criterion_table4() -> Outcome {
    let rows: Vec<ResultRow> = [60.0, 80.0, 100.0, 120.0, 140.0, 160.0]
        .into_iter()
        .map(|k| one(Preset::Table4, k, |c| c.precond == PrecondKind::ImpHras && close(c.alpha, 0.4)))
        .collect();
    let all = rows.iter().all(|r| r.converged);
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let its: Vec<f64> = rows.iter().map(|r| r.outer_iters as f64).collect();
    let slope = if all { fit_loglog_slope(&ns, &its) } else { None };
    let pass = slope.is_some_and(|s| s >= SLOPE_WINDOW.0 && s <= SLOPE_WINDOW.1);
    let counts: Vec<String> = rows.iter().map(|r| r.iterations_label()).collect();
    Outcome {
        id: 6,
        pass,
        detail: format!("ImpHRAS alpha=0.4 counts {}; slope vs n {:?} (window {:?})", counts.join(","), slope, SLOPE_WINDOW),
    }
}

// ---------------------------------------------------------------------------
// 7-8. field of values

struct FovRun {
    k: f64,
    certified: bool,
    envelope_checked: bool,
    envelope_holds: bool,
    max_ratio: f64,
    iterations: Option<usize>,
}

/// HRAS with `alpha = 1` and `eps = k^2` in problem and preconditioner.
fn fov_run(k: f64) -> FovRun {
    let t = Instant::now();
    let spec = SweepSpec { precond: PrecondKind::Hras, beta: 2.0, alpha: 1.0, ..SweepSpec::default() };
    let inst = analysis_instance(k, &spec).unwrap();
    let n = inst.system.nrows();
    let b = vec![C64::new(1.0, 0.0); n];
    let (_, rep) = gmres(&inst.system, &inst.preconditioner, &b, &KrylovConfig::new(PrecondSide::Right, 1e-6, CAP)).unwrap();
    let c = preconditioned_dense(&inst.system, &inst.preconditioner, PrecondSide::Left);
    // constants lie in the coarse space, where HRAS is exact; probe with a generic vector
    let probe = support::random_vec(n, k as u64);
    let env = check_gmres_bound(&c, &InnerProduct::Weighted(&inst.energy), &probe, spec.gmres_iters).unwrap();
    let run = FovRun {
        k,
        certified: env.estimate.certified,
        envelope_checked: env.checked,
        envelope_holds: env.holds,
        max_ratio: env.max_ratio,
        iterations: rep.converged.then_some(rep.iterations),
    };
    eprintln!(
        "  HRAS eps=k^2 k={k} n={n}: dist={:.3} norm={:.3} certified={} envelope={} iters={:?} ({:.1}s)",
        env.estimate.dist_to_origin,
        env.estimate.norm,
        run.certified,
        run.envelope_holds,
        run.iterations,
        t.elapsed().as_secs_f64()
    );
    run
}

fn criterion_envelope(runs: &[FovRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs.iter().filter(|r| r.k <= ENVELOPE_K_MAX && r.certified) {
        pass &= r.envelope_checked && r.envelope_holds;
        parts.push(format!("k={} max ratio {:.3}", r.k, r.max_ratio));
    }
    pass &= !parts.is_empty();

    let mut worst = 0f64;
    let mut identity_ok = true;
    for seed in 0..ADJOINT_INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.gen_range(2..12);
        let c = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let g = DMatrix::<C64>::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let d = &g * g.adjoint() + DMatrix::<C64>::identity(n, n) * C64::new(0.1, 0.0);
        let rep = check_adjoint_identity(&c, &helmdd::sparse::CsrMatrix::from_dense(&d), 20, seed).unwrap();
        worst = worst.max(rep.max_pointwise_error);
        identity_ok &= rep.holds && rep.max_pointwise_error <= ADJOINT_TOL;
    }
    Outcome {
        id: 7,
        pass: pass && identity_ok,
        detail: format!(
            "envelope (slack {ENVELOPE_SLACK:e}): {}; adjoint identity on {ADJOINT_INSTANCES} instances, max err {worst:.2e}",
            parts.join(", ")
        ),
    }
}

fn criterion_strong_absorption(runs: &[FovRun]) -> Outcome {
    let counts: Vec<Option<usize>> = runs.iter().map(|r| r.iterations).collect();
    let certified = runs.iter().all(|r| r.certified);
    let converged: Vec<i64> = counts.iter().flatten().map(|&c| c as i64).collect();
    let spread = converged.iter().max().zip(converged.iter().min()).map(|(a, b)| a - b);
    let pass = certified && converged.len() == runs.len() && spread.is_some_and(|s| s <= STRONG_ABSORPTION_SPREAD);
    Outcome {
        id: 8,
        pass,
        detail: format!(
            "k=5,10,15,20 counts {:?}, spread {:?} (<= {STRONG_ABSORPTION_SPREAD}), all certified: {certified}",
            counts, spread
        ),
    }
}

// ---------------------------------------------------------------------------
// 9. variable speed

fn criterion_variable_speed() -> Outcome {
    let at = |c_star: f64, scenario: Scenario| {
        one(Preset::Table6Variable, 40.0, move |c| c.beta == 1.0 && close(c.c_star, c_star) && c.scenario == scenario)
    };
    let fast = at(1.5, Scenario::CenteredSquare);
    let slow = at(0.66, Scenario::CenteredSquare);
    let slow_unresolved = at(0.66, Scenario::ShiftedSquare);
    let pass = fast.converged
        && slow.converged
        && slow_unresolved.converged
        && slow.outer_iters > fast.outer_iters
        && (slow.outer_iters - slow_unresolved.outer_iters).abs() <= INCLUSION_GAP;
    Outcome {
        id: 9,
        pass,
        detail: format!(
            "omega=40 beta=1: c*=1.5 {} vs c*=0.66 {} (ref 22 vs 31); c*=0.66 resolved {} vs unresolved {} (gap <= {INCLUSION_GAP})",
            fast.iterations_label(),
            slow.iterations_label(),
            slow.iterations_label(),
            slow_unresolved.iterations_label()
        ),
    }
}

// ---------------------------------------------------------------------------
// 10. invariants on seeded configurations

fn criterion_properties() -> Outcome {
    let t = Instant::now();
    let sides = [PrecondSide::Left, PrecondSide::Right, PrecondSide::None];
    let mut failures = Vec::new();
    for seed in 0..PROPERTY_SEEDS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.gen_range(8..24);
        let k = rng.gen_range(1.0..10.0);
        let rule = rng.gen_range(0..3u8);
        let mx = rng.gen_range(1..6);
        let my = rng.gen_range(1..6);
        let checks = [
            support::complex_symmetry(m, k, rule),
            support::energy_positive_definite(m, k, seed),
            support::ras_partition_of_unity(m, mx, my),
            support::coarse_columns_sum_to_one(m, mx, my),
            support::gmres_monotone(m, k, rng.gen_range(1..4), PrecondKind::ALL[seed as usize % 6], sides[seed as usize % 3], seed),
            support::plane_wave_recovery(m, k, rule),
        ];
        failures.extend(checks.into_iter().filter_map(|c| c.err()));
    }
    let secs = t.elapsed().as_secs_f64();
    for f in &failures {
        eprintln!("  {f}");
    }
    Outcome {
        id: 10,
        pass: failures.is_empty() && secs < PROPERTY_SECONDS,
        detail: format!("6 invariants x {PROPERTY_SEEDS} seeds, {} failures, {secs:.1}s", failures.len()),
    }
}

fn main() {
    // `cargo test` passes harness flags; a name filter other than ours skips the run.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if args.iter().any(|a| !"acceptance".contains(a.as_str())) {
        return;
    }
    let start = Instant::now();
    let mut outcomes = Vec::new();
    let mut report = |o: Outcome| {
        println!("criterion {:>2}: {}  {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        outcomes.push(o.pass);
    };
    report(criterion_dense_oracle());
    report(criterion_table1());
    report(criterion_regime_flip());
    report(criterion_table2());
    report(criterion_table3());
    report(criterion_table4());
    let fov: Vec<FovRun> = [5.0, 10.0, 15.0, 20.0].into_iter().map(fov_run).collect();
    report(criterion_envelope(&fov));
    report(criterion_strong_absorption(&fov));
    report(criterion_variable_speed());
    report(criterion_properties());
    let failed = outcomes.iter().filter(|p| !**p).count();
    println!("acceptance: {} of {} criteria passed in {:.0}s", outcomes.len() - failed, outcomes.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
