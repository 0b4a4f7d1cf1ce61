//! Full (unrestarted) GMRES: standard, weighted and flexible variants with left,
//! right or no preconditioning. The initial guess is always zero.

use std::time::{Duration, Instant};

use crate::operator::{axpy, dot, LinearOperator};
use crate::{Error, Result, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Gmres,
    WeightedGmres,
    Fgmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecondSide {
    Left,
    Right,
    None,
}

#[derive(Clone, Copy)]
pub struct KrylovConfig<'a> {
    pub variant: Variant,
    pub side: PrecondSide,
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Hermitian positive definite `D` for the weighted variant.
    pub weight: Option<&'a dyn LinearOperator>,
}

impl Default for KrylovConfig<'_> {
    fn default() -> Self {
        Self { variant: Variant::Gmres, side: PrecondSide::Right, rel_tol: 1e-6, max_iters: 200, weight: None }
    }
}

impl std::fmt::Debug for KrylovConfig<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KrylovConfig")
            .field("variant", &self.variant)
            .field("side", &self.side)
            .field("rel_tol", &self.rel_tol)
            .field("max_iters", &self.max_iters)
            .field("weighted", &self.weight.is_some())
            .finish()
    }
}

impl<'a> KrylovConfig<'a> {
    pub fn new(side: PrecondSide, rel_tol: f64, max_iters: usize) -> Self {
        Self { side, rel_tol, max_iters, ..Self::default() }
    }

    pub fn weighted(mut self, d: &'a dyn LinearOperator) -> Self {
        self.variant = Variant::WeightedGmres;
        self.weight = Some(d);
        self
    }

    pub fn flexible(mut self) -> Self {
        self.variant = Variant::Fgmres;
        self.side = PrecondSide::Right;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovReport {
    pub converged: bool,
    pub iterations: usize,
    /// Relative (preconditioned, possibly weighted) residual norms, starting at 1.
    pub residual_history: Vec<f64>,
    /// `||b - A x|| / ||b||` at exit.
    pub true_relres: f64,
    pub wall_time: Duration,
    /// Number of stored basis vectors and their size in bytes.
    pub basis_vectors: usize,
    pub basis_bytes: usize,
}

impl KrylovReport {
    pub fn final_relres(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&0.0)
    }
}

/// GMRES on `A x = b` with preconditioner `m` applied on `config.side`.
pub fn gmres(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[C64],
    config: &KrylovConfig,
) -> Result<(Vec<C64>, KrylovReport)> {
    if config.variant == Variant::Fgmres {
        return fgmres(a, m, b, config);
    }
    let weight = match (config.variant, config.weight) {
        (Variant::WeightedGmres, Some(d)) => Some(d),
        (Variant::WeightedGmres, None) => {
            return Err(Error::InvalidArgument("weighted GMRES needs a weight matrix".into()))
        }
        _ => None,
    };
    run(a, m, b, config, false, weight)
}

/// Flexible GMRES: right preconditioning, the preconditioner may vary per step.
pub fn fgmres(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[C64],
    config: &KrylovConfig,
) -> Result<(Vec<C64>, KrylovReport)> {
    if config.side != PrecondSide::Right {
        return Err(Error::InvalidArgument("FGMRES requires right preconditioning".into()));
    }
    run(a, m, b, config, true, None)
}

struct Givens {
    c: f64,
    s: C64,
}

impl Givens {
    fn new(a: C64, b: C64) -> (Self, C64) {
        let (na, nb) = (a.norm(), b.norm());
        if nb == 0.0 {
            return (Self { c: 1.0, s: ZERO }, a);
        }
        if na == 0.0 {
            return (Self { c: 0.0, s: b.conj() / nb }, C64::new(nb, 0.0));
        }
        let denom = na.hypot(nb);
        let phase = a / na;
        (Self { c: na / denom, s: phase * b.conj() / denom }, phase * denom)
    }

    fn apply(&self, x: &mut C64, y: &mut C64) {
        let (a, b) = (*x, *y);
        *x = self.c * a + self.s * b;
        *y = -self.s.conj() * a + self.c * b;
    }
}

fn run(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[C64],
    config: &KrylovConfig,
    flexible: bool,
    weight: Option<&dyn LinearOperator>,
) -> Result<(Vec<C64>, KrylovReport)> {
    let start = Instant::now();
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    if config.side != PrecondSide::None && m.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: m.dim() });
    }
    if config.max_iters == 0 {
        return Err(Error::InvalidArgument("max_iters must be positive".into()));
    }
    let bnorm = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let side = if flexible { PrecondSide::Right } else { config.side };

    // D-weighted products: <x, y>_D = (D x)^H y, so the D-images of the basis are kept.
    let apply_d = |x: &[C64]| -> Vec<C64> {
        match weight {
            Some(d) => d.apply_vec(x),
            None => x.to_vec(),
        }
    };
    let dnorm = |x: &[C64], dx: &[C64]| dot(x, dx).re.max(0.0).sqrt();

    let r0 = match side {
        PrecondSide::Left => m.apply_vec(b),
        _ => b.to_vec(),
    };
    let dr0 = apply_d(&r0);
    let beta = dnorm(&r0, &dr0);
    if beta == 0.0 || bnorm == 0.0 {
        let report = KrylovReport {
            converged: true,
            iterations: 0,
            residual_history: vec![0.0],
            true_relres: 0.0,
            wall_time: start.elapsed(),
            basis_vectors: 0,
            basis_bytes: 0,
        };
        return Ok((vec![ZERO; n], report));
    }

    let scale = |x: &mut Vec<C64>, s: f64| x.iter_mut().for_each(|v| *v *= s);
    let mut v0 = r0;
    scale(&mut v0, 1.0 / beta);
    let mut basis = vec![v0];
    let mut dbasis: Vec<Vec<C64>> = Vec::new();
    if weight.is_some() {
        let mut d0 = dr0;
        scale(&mut d0, 1.0 / beta);
        dbasis.push(d0);
    }
    let mut zs: Vec<Vec<C64>> = Vec::new();
    let mut hcols: Vec<Vec<C64>> = Vec::new();
    let mut rots: Vec<Givens> = Vec::new();
    let mut g = vec![C64::new(beta, 0.0)];
    let mut history = vec![1.0];
    let mut converged = false;
    let mut tmp = vec![ZERO; n];

    for j in 0..config.max_iters {
        let mut w = vec![ZERO; n];
        match side {
            PrecondSide::Right => {
                m.apply(&basis[j], &mut tmp);
                a.apply(&tmp, &mut w);
                if flexible {
                    zs.push(tmp.clone());
                }
            }
            PrecondSide::Left => {
                a.apply(&basis[j], &mut tmp);
                m.apply(&tmp, &mut w);
            }
            PrecondSide::None => a.apply(&basis[j], &mut w),
        }
        let w_in = {
            let dw = apply_d(&w);
            dnorm(&w, &dw)
        };

        let mut h = vec![ZERO; j + 2];
        let ip_basis = |i: usize, w: &[C64]| -> C64 {
            if weight.is_some() {
                dot(&dbasis[i], w)
            } else {
                dot(&basis[i], w)
            }
        };
        for i in 0..=j {
            let hij = ip_basis(i, &w);
            h[i] = hij;
            axpy(-hij, &basis[i], &mut w);
        }
        let mut dw = apply_d(&w);
        let mut wn = dnorm(&w, &dw);
        let second: Vec<C64> = (0..=j).map(|i| ip_basis(i, &w)).collect();
        let loss = second.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if loss > 1e-8 * wn.max(f64::MIN_POSITIVE) {
            for (i, &c) in second.iter().enumerate() {
                h[i] += c;
                axpy(-c, &basis[i], &mut w);
            }
            dw = apply_d(&w);
            wn = dnorm(&w, &dw);
        }
        h[j + 1] = C64::new(wn, 0.0);

        for (i, rot) in rots.iter().enumerate() {
            let (lo, hi) = h.split_at_mut(i + 1);
            rot.apply(&mut lo[i], &mut hi[0]);
        }
        let (rot, r) = Givens::new(h[j], h[j + 1]);
        h[j] = r;
        h[j + 1] = ZERO;
        g.push(ZERO);
        {
            let (lo, hi) = g.split_at_mut(j + 1);
            rot.apply(&mut lo[j], &mut hi[0]);
        }
        rots.push(rot);
        hcols.push(h);

        let relres = g[j + 1].norm() / beta;
        let prev = *history.last().unwrap();
        history.push(relres.min(prev));
        let breakdown = wn <= 1e-14 * w_in.max(f64::MIN_POSITIVE);
        if relres <= config.rel_tol {
            converged = true;
            break;
        }
        if breakdown {
            return Err(Error::Breakdown { iteration: j + 1, relres });
        }
        if j + 1 == config.max_iters {
            break;
        }
        scale(&mut w, 1.0 / wn);
        basis.push(w);
        if weight.is_some() {
            scale(&mut dw, 1.0 / wn);
            dbasis.push(dw);
        }
    }

    // back substitution on the rotated Hessenberg
    let k = hcols.len();
    let mut y = vec![ZERO; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for l in i + 1..k {
            s -= hcols[l][i] * y[l];
        }
        y[i] = s / hcols[i][i];
    }
    let mut x = vec![ZERO; n];
    if flexible {
        for (l, z) in zs.iter().enumerate() {
            axpy(y[l], z, &mut x);
        }
    } else {
        let mut u = vec![ZERO; n];
        for l in 0..k {
            axpy(y[l], &basis[l], &mut u);
        }
        match side {
            PrecondSide::Right => m.apply(&u, &mut x),
            _ => x = u,
        }
    }

    let ax = a.apply_vec(&x);
    let true_res = ax.iter().zip(b).map(|(p, q)| (q - p).norm_sqr()).sum::<f64>().sqrt();
    let stored = basis.len() + dbasis.len() + zs.len();
    let report = KrylovReport {
        converged,
        iterations: k,
        residual_history: history,
        true_relres: true_res / bnorm,
        wall_time: start.elapsed(),
        basis_vectors: stored,
        basis_bytes: stored * n * std::mem::size_of::<C64>(),
    };
    Ok((x, report))
}
