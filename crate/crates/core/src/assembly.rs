//! P1 finite-element assembly of the Helmholtz operator, the energy matrix and
//! impedance-local subdomain matrices.
//!
//! All element integrals are exact. With `e^{-i omega t}` time dependence the
//! bilinear form is `(grad u, grad v) - (shift u, v) - i (kappa u, v)_boundary`.

use std::collections::HashMap;

use crate::mesh::{Mesh, WaveSpeedField};
use crate::sparse::CsrMatrix;
use crate::{Error, Result, C64};

/// How absorption enters the volume term.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMode {
    /// `k^2 + i eps` with `k = omega / c`; constant speed only.
    AdditiveEps(f64),
    /// `(1 + i rho) (omega / c_e)^2`.
    MultiplicativeRho(f64),
}

#[derive(Debug, Clone)]
pub struct AssemblyCoefficients {
    pub omega: f64,
    pub wavespeed: WaveSpeedField,
    pub shift_mode: ShiftMode,
}

impl AssemblyCoefficients {
    /// Constant speed `c = 1`, so `k = omega`.
    pub fn constant(mesh: &Mesh, k: f64, eps: f64) -> Self {
        Self {
            omega: k,
            wavespeed: WaveSpeedField::constant(mesh),
            shift_mode: ShiftMode::AdditiveEps(eps),
        }
    }

    pub fn variable(omega: f64, wavespeed: WaveSpeedField, rho: f64) -> Self {
        Self { omega, wavespeed, shift_mode: ShiftMode::MultiplicativeRho(rho) }
    }

    /// Same speed and frequency with a different shift.
    pub fn with_shift(&self, shift_mode: ShiftMode) -> Self {
        Self { shift_mode, ..self.clone() }
    }

    /// Volume coefficient multiplying the element mass matrix.
    pub fn shift(&self, element: usize) -> C64 {
        let k = self.omega / self.wavespeed.values()[element];
        match self.shift_mode {
            ShiftMode::AdditiveEps(eps) => C64::new(k * k, eps),
            ShiftMode::MultiplicativeRho(rho) => C64::new(k * k, rho * k * k),
        }
    }

    /// Impedance coefficient `omega / c` of an edge adjacent to `element`.
    pub fn impedance(&self, element: usize) -> f64 {
        self.omega / self.wavespeed.values()[element]
    }

    fn validate(&self, mesh: &Mesh) -> Result<()> {
        let n = self.wavespeed.values().len();
        if n != mesh.num_elements() {
            return Err(Error::DimensionMismatch { expected: mesh.num_elements(), got: n });
        }
        if !(self.omega > 0.0) {
            return Err(Error::InvalidArgument(format!("omega must be positive, got {}", self.omega)));
        }
        match self.shift_mode {
            ShiftMode::AdditiveEps(_) if !self.wavespeed.is_constant() => Err(
                Error::InvalidArgument("additive eps shift requires a constant wave speed".into()),
            ),
            ShiftMode::MultiplicativeRho(rho) if rho < 0.0 => {
                Err(Error::InvalidArgument(format!("rho must be non-negative, got {rho}")))
            }
            _ => Ok(()),
        }
    }
}

/// P1 stiffness matrix of a triangle: `(b_i b_j + c_i c_j) / (4 |T|)`.
pub fn element_stiffness(v: &[[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let b = [v[1][1] - v[2][1], v[2][1] - v[0][1], v[0][1] - v[1][1]];
    let c = [v[2][0] - v[1][0], v[0][0] - v[2][0], v[1][0] - v[0][0]];
    let area = 0.5 * (b[0] * c[1] - b[1] * c[0]).abs();
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
        }
    }
    k
}

/// P1 mass matrix of a triangle: `|T| / 12 * (1 + delta_ij)`.
pub fn element_mass(area: f64) -> [[f64; 3]; 3] {
    let mut m = [[area / 12.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = area / 6.0;
    }
    m
}

/// P1 mass matrix of a boundary edge of length `len`.
pub fn edge_mass(len: f64) -> [[f64; 2]; 2] {
    [[len / 3.0, len / 6.0], [len / 6.0, len / 3.0]]
}

/// Matrix on the node set `nodes` (sorted global indices) of an element subset.
#[derive(Debug, Clone)]
pub struct LocalMatrix {
    pub matrix: CsrMatrix,
    pub nodes: Vec<usize>,
}

struct Terms {
    stiffness: f64,
    mass: MassTerm,
    boundary: bool,
}

enum MassTerm {
    Shift,
    Energy(f64),
    Plain,
}

/// Assembles over `elements`; boundary terms go on edges that belong to exactly
/// one of those elements. Rows and columns are indexed by `local_of`.
fn assemble_elements(
    mesh: &Mesh,
    elements: &[usize],
    local_of: &dyn Fn(usize) -> usize,
    n: usize,
    coeff: Option<&AssemblyCoefficients>,
    terms: Terms,
) -> Result<CsrMatrix> {
    let mut trip = Vec::with_capacity(9 * elements.len() + 4 * mesh.nx().max(mesh.ny()));
    for &e in elements {
        let verts = mesh.element_vertices(e);
        let nodes = mesh.elements()[e];
        let area = mesh.element_area(e);
        let ke = element_stiffness(&verts);
        let me = element_mass(area);
        let s = match terms.mass {
            MassTerm::Shift => -coeff.expect("shift needs coefficients").shift(e),
            MassTerm::Energy(k) => C64::new(k * k, 0.0),
            MassTerm::Plain => C64::new(1.0, 0.0),
        };
        for i in 0..3 {
            for j in 0..3 {
                let v = C64::new(terms.stiffness * ke[i][j], 0.0) + s * me[i][j];
                trip.push((local_of(nodes[i]), local_of(nodes[j]), v));
            }
        }
    }

    if terms.boundary {
        let coeff = coeff.expect("boundary term needs coefficients");
        // edges keyed by sorted node pair -> (count, element)
        let mut edges: HashMap<(usize, usize), (u8, usize)> = HashMap::with_capacity(3 * elements.len());
        for &e in elements {
            let el = mesh.elements()[e];
            for (a, b) in [(el[0], el[1]), (el[1], el[2]), (el[2], el[0])] {
                let key = (a.min(b), a.max(b));
                edges.entry(key).and_modify(|c| c.0 += 1).or_insert((1, e));
            }
        }
        let mut boundary: Vec<_> = edges.into_iter().filter(|(_, (c, _))| *c == 1).collect();
        boundary.sort_unstable_by_key(|&(key, _)| key);
        for ((a, b), (_, e)) in boundary {
            let [xa, ya] = mesh.node_coords(a);
            let [xb, yb] = mesh.node_coords(b);
            let len = ((xb - xa).powi(2) + (yb - ya).powi(2)).sqrt();
            let kappa = coeff.impedance(e);
            let be = edge_mass(len);
            let pair = [a, b];
            for i in 0..2 {
                for j in 0..2 {
                    trip.push((
                        local_of(pair[i]),
                        local_of(pair[j]),
                        C64::new(0.0, -kappa * be[i][j]),
                    ));
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, n, trip)
}

fn all_elements(mesh: &Mesh) -> Vec<usize> {
    (0..mesh.num_elements()).collect()
}

/// `A = S - sum_e shift_e M_e - i B_kappa` on the whole mesh.
pub fn assemble_system(mesh: &Mesh, coeff: &AssemblyCoefficients) -> Result<CsrMatrix> {
    coeff.validate(mesh)?;
    assemble_elements(
        mesh,
        &all_elements(mesh),
        &|i| i,
        mesh.num_nodes(),
        Some(coeff),
        Terms { stiffness: 1.0, mass: MassTerm::Shift, boundary: true },
    )
}

/// `D_k = S + k^2 M`.
pub fn assemble_energy_matrix(mesh: &Mesh, k: f64) -> Result<CsrMatrix> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("wavenumber must be positive, got {k}")));
    }
    assemble_elements(
        mesh,
        &all_elements(mesh),
        &|i| i,
        mesh.num_nodes(),
        None,
        Terms { stiffness: 1.0, mass: MassTerm::Energy(k), boundary: false },
    )
}

pub fn assemble_stiffness(mesh: &Mesh) -> CsrMatrix {
    assemble_elements(
        mesh,
        &all_elements(mesh),
        &|i| i,
        mesh.num_nodes(),
        None,
        Terms { stiffness: 1.0, mass: MassTerm::Energy(0.0), boundary: false },
    )
    .expect("mesh indices are in range")
}

pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    assemble_elements(
        mesh,
        &all_elements(mesh),
        &|i| i,
        mesh.num_nodes(),
        None,
        Terms { stiffness: 0.0, mass: MassTerm::Plain, boundary: false },
    )
    .expect("mesh indices are in range")
}

/// Helmholtz matrix on the closed subdomain formed by `subdomain_elements`, with the
/// impedance term on its entire boundary.
pub fn assemble_local_impedance(
    mesh: &Mesh,
    subdomain_elements: &[usize],
    coeff: &AssemblyCoefficients,
) -> Result<LocalMatrix> {
    coeff.validate(mesh)?;
    if subdomain_elements.is_empty() {
        return Err(Error::InvalidArgument("empty subdomain".into()));
    }
    if let Some(&e) = subdomain_elements.iter().find(|&&e| e >= mesh.num_elements()) {
        return Err(Error::IndexOutOfRange { index: e, len: mesh.num_elements() });
    }
    let mut nodes: Vec<usize> = subdomain_elements
        .iter()
        .flat_map(|&e| mesh.elements()[e])
        .collect();
    nodes.sort_unstable();
    nodes.dedup();
    let mut map = vec![usize::MAX; mesh.num_nodes()];
    for (l, &g) in nodes.iter().enumerate() {
        map[g] = l;
    }
    let matrix = assemble_elements(
        mesh,
        subdomain_elements,
        &|g| map[g],
        nodes.len(),
        Some(coeff),
        Terms { stiffness: 1.0, mass: MassTerm::Shift, boundary: true },
    )?;
    Ok(LocalMatrix { matrix, nodes })
}
