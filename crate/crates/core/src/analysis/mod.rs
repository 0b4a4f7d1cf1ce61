//! Field-of-values estimates in weighted inner products, the GMRES envelope they
//! imply, and scaling sweeps of preconditioned Helmholtz operators on small meshes.

mod lanczos;
mod sweep;

use nalgebra::{DMatrix, DVector, DVectorView, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::factor::{cholesky, BandedCholesky};
use crate::krylov::{gmres, KrylovConfig, PrecondSide};
use crate::operator::{dot, Identity, LinearOperator};
use crate::sparse::CsrMatrix;
use crate::{Error, Result, C64};

pub use sweep::{
    analysis_instance, emit_sweep, fit_loglog_slope, preconditioned_dense, scaling_sweep, sweep_slopes, AnalysisInstance, SweepRow,
    SweepSpec,
};

/// Relative tolerance of the field-of-values boundary and certification threshold.
pub const FOV_TOL: f64 = 1e-6;
/// Largest dimension accepted by the dense analysis path.
pub const DENSE_CAP: usize = 4000;
/// Number of angles in the boundary sweep.
pub const ANGLES: usize = 256;
/// Below this size every angle is handled by a full dense eigensolve.
const DIRECT_N: usize = 64;

/// Inner product `<x, y>_W = y^H W x`.
#[derive(Debug, Clone, Copy)]
pub enum InnerProduct<'a> {
    Identity,
    /// `W = D` for Hermitian positive definite `D`.
    Weighted(&'a CsrMatrix),
    /// `W = D^{-1}`; only `D` is supplied.
    InverseWeighted(&'a CsrMatrix),
}

impl InnerProduct<'_> {
    pub fn tag(&self) -> &'static str {
        match self {
            InnerProduct::Identity => "I",
            InnerProduct::Weighted(_) => "D",
            InnerProduct::InverseWeighted(_) => "D^-1",
        }
    }

    fn factor(&self, n: usize) -> Result<Option<BandedCholesky>> {
        match self {
            InnerProduct::Identity => Ok(None),
            InnerProduct::Weighted(d) | InnerProduct::InverseWeighted(d) => {
                if d.nrows() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: d.nrows() });
                }
                Ok(Some(cholesky(d)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FovEstimate {
    pub matrix: String,
    pub inner_product: String,
    /// Lower estimate of `dist(0, W(C))`; 0 when the origin may lie in `W(C)`.
    pub dist_to_origin: f64,
    /// Distance from the origin to the hull of computed boundary points.
    pub dist_upper: f64,
    pub norm: f64,
    /// `cos(beta) = dist / norm`.
    pub beta: f64,
    pub certified: bool,
    pub angles: usize,
}

impl FovEstimate {
    pub fn cos_beta(&self) -> f64 {
        self.beta.cos()
    }

    pub fn sin_beta(&self) -> f64 {
        self.beta.sin()
    }
}

fn view(x: &[C64]) -> DVectorView<'_, C64> {
    DVectorView::from_slice(x, x.len())
}

/// Dense matrix as an operator.
pub struct DenseOperator<'a>(pub &'a DMatrix<C64>);

impl LinearOperator for DenseOperator<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let r = self.0 * view(x);
        y.copy_from_slice(r.as_slice());
    }
}

/// `x -> D^{-1} x` through a Cholesky factor.
struct CholeskyInverse(BandedCholesky);

impl LinearOperator for CholeskyInverse {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(x);
        self.0.solve_in_place(y);
    }
}

fn map_columns(m: &mut DMatrix<C64>, f: impl Fn(&mut [C64]) + Sync + Send) {
    let n = m.nrows();
    m.as_mut_slice().par_chunks_mut(n).for_each(f);
}

/// Matrix `T` with `W_W(C) = W(T)` and `||C||_W = ||T||_2`: with `D = L L^H`,
/// `T = L^H C L^{-H}` for `W = D` and `T = L^{-1} C L` for `W = D^{-1}`.
pub fn transform(c: &DMatrix<C64>, ip: &InnerProduct) -> Result<DMatrix<C64>> {
    let n = check_square(c)?;
    let Some(l) = ip.factor(n)? else {
        return Ok(c.clone());
    };
    let mut y = c.adjoint();
    let out = match ip {
        InnerProduct::Weighted(_) => {
            map_columns(&mut y, |col| l.solve_lower(col));
            let mut x = y.adjoint();
            map_columns(&mut x, |col| l.mul_upper(col));
            x
        }
        _ => {
            map_columns(&mut y, |col| l.mul_upper(col));
            let mut x = y.adjoint();
            map_columns(&mut x, |col| l.solve_lower(col));
            x
        }
    };
    Ok(out)
}

fn check_square(c: &DMatrix<C64>) -> Result<usize> {
    if c.nrows() != c.ncols() {
        return Err(Error::DimensionMismatch { expected: c.nrows(), got: c.ncols() });
    }
    if c.nrows() > DENSE_CAP {
        return Err(Error::TooLarge { dim: c.nrows(), cap: DENSE_CAP });
    }
    if c.nrows() == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    Ok(c.nrows())
}

/// Smallest eigenpair of `(e^{i theta} C + e^{-i theta} C^H) / 2`.
fn rotated_min_dense(c: &DMatrix<C64>, theta: f64) -> (f64, DVector<C64>) {
    let z = C64::from_polar(0.5, theta);
    let h = c * z + c.adjoint() * z.conj();
    let eig = SymmetricEigen::new(h);
    let (i, lam) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty");
    (lam, eig.eigenvectors.column(i).into_owned())
}

fn rayleigh(c: &DMatrix<C64>, x: &[C64]) -> C64 {
    let cx = c * view(x);
    dot(x, cx.as_slice()) / dot(x, x)
}

/// Maximise `g` over a uniform angle grid, then refine around the best angle by
/// golden-section search. Returns the best angle, its value and all evaluations.
fn maximize_over_angles<G>(g: G) -> (f64, f64, Vec<(f64, f64)>)
where
    G: Fn(f64) -> f64 + Sync,
{
    let step = std::f64::consts::TAU / ANGLES as f64;
    let mut evals: Vec<(f64, f64)> = (0..ANGLES).into_par_iter().map(|i| (i as f64 * step, g(i as f64 * step))).collect();
    let (mut best_t, mut best) = evals.iter().copied().fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best_t - step, best_t + step);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    evals.push((c, fc));
    evals.push((d, fd));
    for _ in 0..40 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = g(c);
            evals.push((c, fc));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = g(d);
            evals.push((d, fd));
        }
        if b - a < 1e-10 {
            break;
        }
    }
    for &(t, v) in &evals {
        if v > best {
            best = v;
            best_t = t;
        }
    }
    (best_t, best, evals)
}

/// Distance from the origin to the convex hull of `points` (0 if enclosed).
pub fn hull_distance(points: &[C64]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|z| (z.re, z.im)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.is_empty() {
        return f64::INFINITY;
    }
    if pts.len() == 1 {
        return pts[0].0.hypot(pts[0].1);
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    let seg = |a: (f64, f64), b: (f64, f64)| {
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 { (-(a.0 * dx + a.1 * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
        (a.0 + t * dx).hypot(a.1 + t * dy)
    };
    let m = hull.len();
    let min_edge = (0..m).map(|i| seg(hull[i], hull[(i + 1) % m])).fold(f64::INFINITY, f64::min);
    let inside = m >= 3 && (0..m).all(|i| cross(hull[i], hull[(i + 1) % m], (0.0, 0.0)) >= 0.0);
    if inside {
        0.0
    } else {
        min_edge
    }
}

/// Spectral norm of a dense matrix.
fn spectral_norm(t: &DMatrix<C64>) -> f64 {
    let n = t.nrows();
    if n <= DIRECT_N {
        return t.clone().singular_values().max();
    }
    let op = |x: &[C64], y: &mut [C64]| {
        let tx = t * view(x);
        let r = t.ad_mul(&tx);
        for (yi, ri) in y.iter_mut().zip(r.iter()) {
            *yi = -ri;
        }
    };
    let start = pseudo_random(n, 7);
    let r = lanczos::smallest(op, &start, 1, 1e-13, 120, 6);
    (-r.values[0]).max(0.0).sqrt()
}

fn pseudo_random(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

/// Field of values of `C` in the inner product `ip`.
///
/// `W(T)` lies in the half plane `Re(e^{i theta} z) >= lambda_min(theta)` for every
/// angle, so the largest `lambda_min` found is a lower estimate of the distance.
pub fn fov_distance(c: &DMatrix<C64>, ip: &InnerProduct) -> Result<FovEstimate> {
    let t = transform(c, ip)?;
    let mut est = fov_of(&t);
    est.inner_product = ip.tag().into();
    Ok(est)
}

fn fov_of(t: &DMatrix<C64>) -> FovEstimate {
    let n = t.nrows();
    let norm = spectral_norm(t);
    let (lower, points, angles) = if n <= DIRECT_N { boundary_direct(t) } else { boundary_subspace(t, norm) };
    let mut dist = lower.max(0.0).min(norm);
    let certified = dist > FOV_TOL * norm;
    if !certified {
        dist = 0.0;
    }
    let dist_upper = hull_distance(&points);
    let cos = if norm > 0.0 { (dist / norm).clamp(0.0, 1.0) } else { 0.0 };
    FovEstimate {
        matrix: String::new(),
        inner_product: "I".into(),
        dist_to_origin: dist,
        dist_upper,
        norm,
        beta: cos.acos(),
        certified,
        angles,
    }
}

fn boundary_direct(t: &DMatrix<C64>) -> (f64, Vec<C64>, usize) {
    let (_, best, evals) = maximize_over_angles(|th| rotated_min_dense(t, th).0);
    let points = evals.par_iter().map(|&(th, _)| rayleigh(t, rotated_min_dense(t, th).1.as_slice())).collect();
    (best, points, evals.len())
}

/// Rayleigh-Ritz on a growing subspace: the projected `lambda_min` bounds the true
/// one from above at every angle; Lanczos at the projected optimum gives the true
/// value there and enriches the subspace until the two agree.
fn boundary_subspace(t: &DMatrix<C64>, norm: f64) -> (f64, Vec<C64>, usize) {
    let n = t.nrows();
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut images: Vec<Vec<C64>> = Vec::new();
    let add = |mut v: Vec<C64>, basis: &mut Vec<Vec<C64>>, images: &mut Vec<Vec<C64>>| {
        let before = crate::operator::norm2(&v);
        for _ in 0..2 {
            for b in basis.iter() {
                let c = dot(b, &v);
                crate::operator::axpy(-c, b, &mut v);
            }
        }
        let after = crate::operator::norm2(&v);
        if after > 1e-8 * before {
            v.iter_mut().for_each(|x| *x /= after);
            images.push((t * view(&v)).as_slice().to_vec());
            basis.push(v);
        }
    };
    let rotated = |theta: f64| {
        let z = C64::from_polar(0.5, theta);
        move |x: &[C64], y: &mut [C64]| {
            let a = t * view(x);
            let b = t.ad_mul(&view(x));
            for ((yi, ai), bi) in y.iter_mut().zip(a.iter()).zip(b.iter()) {
                *yi = z * ai + z.conj() * bi;
            }
        }
    };
    let tol = FOV_TOL * norm.max(1e-300);
    let mut points = Vec::new();
    let mut lower = f64::NEG_INFINITY;
    let mut angles = 0;
    for (i, th) in [0.0, 0.5, 1.0, 1.5].into_iter().enumerate() {
        let r = lanczos::smallest(rotated(th * std::f64::consts::PI), &pseudo_random(n, i as u64), 3, 1e-8, 60, 1);
        for v in r.vectors {
            points.push(rayleigh(t, &v));
            add(v, &mut basis, &mut images);
        }
    }
    for _round in 0..24 {
        let p = basis.len();
        let proj = DMatrix::from_fn(p, p, |i, j| dot(&basis[i], &images[j]));
        let (theta, upper, evals) = maximize_over_angles(|th| rotated_min_dense(&proj, th).0);
        angles += evals.len();
        let (_, y) = rotated_min_dense(&proj, theta);
        let mut start = vec![C64::new(0.0, 0.0); n];
        for (b, &c) in basis.iter().zip(y.iter()) {
            crate::operator::axpy(c, b, &mut start);
        }
        points.push(rayleigh(&proj, y.as_slice()));
        if upper <= 0.0 {
            // the projected range already reaches the origin
            lower = lower.max(upper);
            break;
        }
        let r = lanczos::smallest(rotated(theta), &start, 3, 1e-11, 200, 4);
        lower = lower.max(r.values[0] - r.residual);
        for v in &r.vectors {
            points.push(rayleigh(t, v));
        }
        if upper - r.values[0] <= tol {
            break;
        }
        for v in r.vectors {
            add(v, &mut basis, &mut images);
        }
    }
    (lower, points, angles)
}

/// Outcome of running weighted GMRES against the field-of-values envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub estimate: FovEstimate,
    /// False when the field of values was not certified to exclude the origin.
    pub checked: bool,
    pub holds: bool,
    /// Largest `||r_m||_W / ||r_0||_W / sin(beta)^m` over `m >= 1` with a positive bound.
    pub max_ratio: f64,
    pub residuals: Vec<f64>,
    pub bounds: Vec<f64>,
}

/// Slack added to the envelope when comparing.
pub const ENVELOPE_SLACK: f64 = 1e-10;

/// Run GMRES on `C x = b` minimising the `W`-norm of the residual, and compare
/// every iterate with `sin(beta)^m`.
pub fn check_gmres_bound(c: &DMatrix<C64>, ip: &InnerProduct, b: &[C64], max_iters: usize) -> Result<EnvelopeReport> {
    let mut estimate = fov_distance(c, ip)?;
    estimate.matrix = "C".into();
    if !estimate.certified {
        return Ok(EnvelopeReport {
            estimate,
            checked: false,
            holds: false,
            max_ratio: f64::NAN,
            residuals: Vec::new(),
            bounds: Vec::new(),
        });
    }
    let n = c.nrows();
    let weight: Box<dyn LinearOperator> = match ip {
        InnerProduct::Identity => Box::new(Identity(n)),
        InnerProduct::Weighted(d) => Box::new(*d),
        InnerProduct::InverseWeighted(d) => Box::new(CholeskyInverse(cholesky(d)?)),
    };
    let cfg = KrylovConfig::new(PrecondSide::None, 1e-13, max_iters.min(n)).weighted(weight.as_ref());
    let op = DenseOperator(c);
    let residuals = match gmres(&op, &Identity(n), b, &cfg) {
        Ok((_, rep)) => rep.residual_history,
        Err(Error::Breakdown { .. }) => return Err(Error::Breakdown { iteration: 0, relres: f64::NAN }),
        Err(e) => return Err(e),
    };
    let s = estimate.sin_beta();
    let bounds: Vec<f64> = (0..residuals.len()).map(|m| s.powi(m as i32)).collect();
    let holds = residuals.iter().zip(&bounds).all(|(r, b)| *r <= b + ENVELOPE_SLACK);
    let max_ratio = residuals
        .iter()
        .zip(&bounds)
        .skip(1)
        .filter(|(_, b)| **b > 1e-12)
        .map(|(r, b)| r / b)
        .fold(0.0, f64::max);
    Ok(EnvelopeReport { estimate, checked: true, holds, max_ratio, residuals, bounds })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjointReport {
    /// Largest relative gap between `<Cv,v>_D/<v,v>_D` and the conjugate of the
    /// `D^{-1}` quotient of `C^H` at `w = D v`.
    pub max_pointwise_error: f64,
    pub dist_weighted: f64,
    pub dist_inverse_adjoint: f64,
    pub norm: f64,
    pub holds: bool,
}

/// Relation between the `D` field of values of `C` and the `D^{-1}` field of
/// values of `C^H`, checked at `samples` random vectors and through the distances.
pub fn check_adjoint_identity(c: &DMatrix<C64>, d: &CsrMatrix, samples: usize, seed: u64) -> Result<AdjointReport> {
    let n = check_square(c)?;
    let chol = cholesky(d)?;
    let ch = c.adjoint();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0f64;
    for _ in 0..samples {
        let v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let cv = (c * view(&v)).as_slice().to_vec();
        let q1 = dot(&v, &d.mul_vec(&cv)) / dot(&v, &d.mul_vec(&v));
        let w = d.mul_vec(&v);
        let chw = (&ch * view(&w)).as_slice().to_vec();
        let mut dinv_chw = chw.clone();
        chol.solve_in_place(&mut dinv_chw);
        let mut dinv_w = w.clone();
        chol.solve_in_place(&mut dinv_w);
        let q2 = dot(&w, &dinv_chw) / dot(&w, &dinv_w);
        let scale = (q1.norm() + q2.norm()).max(f64::MIN_POSITIVE);
        worst = worst.max((q1 - q2.conj()).norm() / scale);
    }
    let a = fov_distance(c, &InnerProduct::Weighted(d))?;
    let b = fov_distance(&ch, &InnerProduct::InverseWeighted(d))?;
    let holds = worst <= 1e-10 && (a.dist_to_origin - b.dist_to_origin).abs() <= FOV_TOL * a.norm.max(b.norm) * 10.0;
    Ok(AdjointReport {
        max_pointwise_error: worst,
        dist_weighted: a.dist_to_origin,
        dist_inverse_adjoint: b.dist_to_origin,
        norm: a.norm,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[C64]) -> DMatrix<C64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(values))
    }

    fn random_spd(n: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::<C64>::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let d = &g * g.adjoint() + DMatrix::identity(n, n) * C64::new(n as f64 * 0.1, 0.0);
        CsrMatrix::from_dense(&d)
    }

    fn random_matrix(n: usize, seed: u64) -> DMatrix<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn hermitian_interval() {
        let c = diag(&[2.0, 3.0, 5.0].map(|x| C64::new(x, 0.0)));
        let e = fov_distance(&c, &InnerProduct::Identity).unwrap();
        assert!((e.dist_to_origin - 2.0).abs() < 1e-9);
        assert!((e.norm - 5.0).abs() < 1e-12);
        assert!(e.certified);
        assert!((e.cos_beta() - 0.4).abs() < 1e-9);
    }

    #[test]
    fn segment_from_one_to_i() {
        let c = diag(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
        let e = fov_distance(&c, &InnerProduct::Identity).unwrap();
        let exact = 0.5f64.sqrt();
        assert!((e.dist_to_origin - exact).abs() < 1e-8, "{}", e.dist_to_origin);
        assert!(e.dist_upper >= e.dist_to_origin - 1e-12);
    }

    #[test]
    fn origin_inside() {
        let c = diag(&[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]);
        let e = fov_distance(&c, &InnerProduct::Identity).unwrap();
        assert_eq!(e.dist_to_origin, 0.0);
        assert!(!e.certified);
    }

    #[test]
    fn weighted_transform_preserves_quotients() {
        let n = 6;
        let c = random_matrix(n, 1);
        let d = random_spd(n, 2);
        let dd = d.to_dense();
        let t = transform(&c, &InnerProduct::Weighted(&d)).unwrap();
        let l = dd.clone().cholesky().unwrap().l();
        let expect = l.adjoint() * &c * l.adjoint().try_inverse().unwrap();
        assert!((&t - &expect).camax() < 1e-10);
        let ti = transform(&c, &InnerProduct::InverseWeighted(&d)).unwrap();
        let expect = l.clone().try_inverse().unwrap() * &c * &l;
        assert!((&ti - &expect).camax() < 1e-10);
    }

    #[test]
    fn subspace_path_matches_direct_path() {
        let n = 90;
        let mut c = random_matrix(n, 5) * C64::new(0.1, 0.0);
        for i in 0..n {
            c[(i, i)] += C64::new(2.0, 1.0);
        }
        let sub = fov_of(&c);
        let step = std::f64::consts::TAU / 2048.0;
        let direct = (0..2048).map(|i| rotated_min_dense(&c, i as f64 * step).0).fold(f64::NEG_INFINITY, f64::max);
        assert!(sub.certified);
        assert!(sub.dist_to_origin <= direct + 1e-6 * sub.norm);
        assert!(sub.dist_to_origin >= direct - 1e-5 * sub.norm, "{} vs {direct}", sub.dist_to_origin);
        let sv = c.clone().singular_values().max();
        assert!((sub.norm - sv).abs() < 1e-8 * sv);
    }

    #[test]
    fn identity_envelope() {
        let c = DMatrix::<C64>::identity(5, 5);
        let r = check_gmres_bound(&c, &InnerProduct::Identity, &[C64::new(1.0, 0.0); 5], 25).unwrap();
        assert!(r.checked && r.holds);
        assert!(r.estimate.beta.abs() < 1e-12);
        assert_eq!(r.residuals.len(), 2);
    }

    #[test]
    fn skew_pair_envelope() {
        let c = diag(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
        let r = check_gmres_bound(&c, &InnerProduct::Identity, &[C64::new(1.0, 0.0); 2], 25).unwrap();
        assert!(r.checked && r.holds);
        assert!(r.max_ratio <= 1.0 + 1e-9);
    }

    #[test]
    fn uncertified_is_skipped() {
        let c = diag(&[C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]);
        let r = check_gmres_bound(&c, &InnerProduct::Identity, &[C64::new(1.0, 0.0); 2], 25).unwrap();
        assert!(!r.checked);
    }

    #[test]
    fn adjoint_identity_random() {
        let c = random_matrix(20, 11);
        let d = random_spd(20, 12);
        let r = check_adjoint_identity(&c, &d, 10, 0).unwrap();
        assert!(r.max_pointwise_error < 1e-10);
        assert!(r.holds);
    }

    #[test]
    fn adjoint_identity_diag_distance() {
        let c = diag(&[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
        let d = random_spd(2, 4);
        let r = check_adjoint_identity(&c, &d, 5, 1).unwrap();
        assert!(r.holds);
    }

    #[test]
    fn identity_inner_product_reduces_to_conjugation() {
        let c = random_matrix(8, 3);
        let d = CsrMatrix::identity(8);
        let r = check_adjoint_identity(&c, &d, 20, 9).unwrap();
        assert!(r.max_pointwise_error < 1e-12);
    }

    #[test]
    fn too_large_is_refused() {
        let c = DMatrix::<C64>::zeros(DENSE_CAP + 1, DENSE_CAP + 1);
        assert!(matches!(fov_distance(&c, &InnerProduct::Identity), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn hull_distance_cases() {
        let sq = [C64::new(1.0, 1.0), C64::new(-1.0, 1.0), C64::new(-1.0, -1.0), C64::new(1.0, -1.0)];
        assert_eq!(hull_distance(&sq), 0.0);
        let seg = [C64::new(1.0, 0.0), C64::new(0.0, 1.0)];
        assert!((hull_distance(&seg) - 0.5f64.sqrt()).abs() < 1e-15);
        let tri = [C64::new(2.0, 0.0), C64::new(3.0, 1.0), C64::new(3.0, -1.0)];
        assert!((hull_distance(&tri) - 2.0).abs() < 1e-15);
    }
}
