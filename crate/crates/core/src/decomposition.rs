//! Overlapping subdomains built from coarse cells, RAS weights and the coarse
//! interpolation matrix `R0`.
//!
//! Subdomain `l` is coarse cell `l` (row-major, `l = J * Mx + I`) grown by
//! `overlap_layers` rings of fine cells and clipped at the outer boundary.

use std::io::Write;

use crate::mesh::{CoarseLayout, Mesh};
use crate::sparse::CsrMatrix;
use crate::{Error, Result, C64};

/// A node of the (unextended, closed) coarse cell with its RAS weight and its
/// positions in the subdomain's index lists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreNode {
    pub node: usize,
    pub weight: f64,
    pub interior_pos: Option<usize>,
    pub closed_pos: usize,
}

#[derive(Debug, Clone)]
pub struct Subdomain {
    pub id: usize,
    pub core_cell: (usize, usize),
    /// Extended fine-cell rectangle `[i0, i1) × [j0, j1)`.
    pub cells: [usize; 4],
    pub elements: Vec<usize>,
    /// Nodes of the open extended subdomain plus those on the outer boundary,
    /// sorted. Nodes on the artificial boundary (including its endpoints on the
    /// outer boundary) are excluded.
    pub interior: Vec<usize>,
    /// All nodes of the closed extended subdomain, sorted.
    pub closed: Vec<usize>,
    pub core: Vec<CoreNode>,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    num_nodes: usize,
    layout: CoarseLayout,
    overlap_layers: usize,
    subdomains: Vec<Subdomain>,
    r0: CsrMatrix,
    warning: Option<String>,
}

/// Number of coarse cells along one axis whose closed extent contains gridline `i`.
fn owners_1d(lines: &[usize], i: usize) -> usize {
    let last = *lines.last().unwrap();
    if i == 0 || i == last {
        1
    } else if lines.binary_search(&i).is_ok() {
        2
    } else {
        1
    }
}

/// RAS weight of a node owned by a coarse cell: `1 / (number of owning cells)`.
pub fn ras_weight(mesh: &Mesh, layout: &CoarseLayout, node: usize) -> f64 {
    let (i, j) = mesh.node_ij(node);
    1.0 / (owners_1d(layout.x_lines(), i) * owners_1d(layout.y_lines(), j)) as f64
}

/// For every fine node, the `(subdomain, weight)` pairs of its owning coarse cells.
pub fn build_ras_weights(mesh: &Mesh, layout: &CoarseLayout) -> Vec<Vec<(usize, f64)>> {
    let cells_1d = |lines: &[usize], i: usize| -> Vec<usize> {
        let last = lines.len() - 1;
        match lines.binary_search(&i) {
            Ok(0) => vec![0],
            Ok(p) if p == last => vec![last - 1],
            Ok(p) => vec![p - 1, p],
            Err(p) => vec![p - 1],
        }
    };
    (0..mesh.num_nodes())
        .map(|n| {
            let (i, j) = mesh.node_ij(n);
            let cx = cells_1d(layout.x_lines(), i);
            let cy = cells_1d(layout.y_lines(), j);
            let w = 1.0 / (cx.len() * cy.len()) as f64;
            let mut out: Vec<(usize, f64)> = cy
                .iter()
                .flat_map(|&cj| cx.iter().map(move |&ci| (layout.cell_index(ci, cj), w)))
                .collect();
            out.sort_unstable_by_key(|p| p.0);
            out
        })
        .collect()
}

/// `R0[p, j]`: the coarse P1 hat of coarse node `p` evaluated at fine node `j`.
pub fn build_coarse_interpolation(mesh: &Mesh, layout: &CoarseLayout) -> CsrMatrix {
    let (bx, by) = (layout.x_lines(), layout.y_lines());
    let mxn = layout.mx() + 1;
    let locate = |lines: &[usize], i: usize| -> usize {
        match lines.binary_search(&i) {
            Ok(p) => p.min(lines.len() - 2),
            Err(p) => p - 1,
        }
    };
    let mut trip = Vec::with_capacity(3 * mesh.num_nodes());
    for n in 0..mesh.num_nodes() {
        let (i, j) = mesh.node_ij(n);
        let (ci, cj) = (locate(bx, i), locate(by, j));
        let (x0, x1) = (mesh.xs()[bx[ci]], mesh.xs()[bx[ci + 1]]);
        let (y0, y1) = (mesh.ys()[by[cj]], mesh.ys()[by[cj + 1]]);
        let [x, y] = mesh.node_coords(n);
        let s = (x - x0) / (x1 - x0);
        let t = (y - y0) / (y1 - y0);
        let sw = cj * mxn + ci;
        let (se, ne, nw) = (sw + 1, sw + mxn + 1, sw + mxn);
        let vals = if s >= t {
            [(sw, 1.0 - s), (se, s - t), (ne, t)]
        } else {
            [(sw, 1.0 - t), (ne, s), (nw, t - s)]
        };
        for (p, v) in vals {
            if v > 1e-14 {
                trip.push((p, n, C64::new(v, 0.0)));
            }
        }
    }
    CsrMatrix::from_triplets(layout.num_nodes(), mesh.num_nodes(), trip)
        .expect("coarse node indices are in range")
}

pub fn build_decomposition(mesh: &Mesh, layout: &CoarseLayout) -> Result<Decomposition> {
    if *layout.x_lines().last().unwrap() != mesh.nx() || *layout.y_lines().last().unwrap() != mesh.ny() {
        return Err(Error::InvalidArgument("coarse layout does not match the fine mesh".into()));
    }
    let g_min = layout.min_width();
    let overlap_layers = (g_min - 1) / 2;
    let warning = (overlap_layers == 0 && layout.num_cells() > 1).then(|| {
        let msg = format!("coarse cells of width {g_min} allow no overlap; subdomains do not overlap");
        log::warn!("{msg}");
        msg
    });

    let (nx, ny) = (mesh.nx(), mesh.ny());
    let mut subdomains = Vec::with_capacity(layout.num_cells());
    for id in 0..layout.num_cells() {
        let [ci0, ci1, cj0, cj1] = layout.cell_bounds(id);
        let i0 = ci0.saturating_sub(overlap_layers);
        let j0 = cj0.saturating_sub(overlap_layers);
        let i1 = (ci1 + overlap_layers).min(nx);
        let j1 = (cj1 + overlap_layers).min(ny);

        let mut elements = Vec::with_capacity(2 * (i1 - i0) * (j1 - j0));
        for j in j0..j1 {
            for i in i0..i1 {
                elements.extend(mesh.cell_elements(i, j));
            }
        }
        let mut closed = Vec::with_capacity((i1 - i0 + 1) * (j1 - j0 + 1));
        let mut interior = Vec::with_capacity(closed.capacity());
        for j in j0..=j1 {
            for i in i0..=i1 {
                let n = mesh.node_index(i, j);
                closed.push(n);
                let artificial = (i == i0 && i0 > 0)
                    || (i == i1 && i1 < nx)
                    || (j == j0 && j0 > 0)
                    || (j == j1 && j1 < ny);
                if !artificial {
                    interior.push(n);
                }
            }
        }
        let mut core = Vec::with_capacity((ci1 - ci0 + 1) * (cj1 - cj0 + 1));
        for j in cj0..=cj1 {
            for i in ci0..=ci1 {
                let n = mesh.node_index(i, j);
                core.push(CoreNode {
                    node: n,
                    weight: ras_weight(mesh, layout, n),
                    interior_pos: interior.binary_search(&n).ok(),
                    closed_pos: closed.binary_search(&n).expect("core lies in the closed set"),
                });
            }
        }
        subdomains.push(Subdomain {
            id,
            core_cell: layout.cell_ij(id),
            cells: [i0, i1, j0, j1],
            elements,
            interior,
            closed,
            core,
        });
    }

    Ok(Decomposition {
        num_nodes: mesh.num_nodes(),
        layout: layout.clone(),
        overlap_layers,
        subdomains,
        r0: build_coarse_interpolation(mesh, layout),
        warning,
    })
}

impl Decomposition {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn layout(&self) -> &CoarseLayout {
        &self.layout
    }

    pub fn overlap_layers(&self) -> usize {
        self.overlap_layers
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subdomains
    }

    pub fn coarse_interp(&self) -> &CsrMatrix {
        &self.r0
    }

    /// Set when the layout leaves no room for overlap.
    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    /// Debug dump, one line per subdomain: `id l_ov cell_i cell_j n_interior n_closed`.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        for s in &self.subdomains {
            writeln!(
                out,
                "{} {} {} {} {} {}",
                s.id,
                self.overlap_layers,
                s.core_cell.0,
                s.core_cell.1,
                s.interior.len(),
                s.closed.len()
            )?;
        }
        Ok(())
    }
}

/// Entries of `v` at `index_set`.
pub fn restrict(v: &[C64], index_set: &[usize]) -> Result<Vec<C64>> {
    index_set
        .iter()
        .map(|&i| v.get(i).copied().ok_or(Error::IndexOutOfRange { index: i, len: v.len() }))
        .collect()
}

/// Scatters `w` into a zero vector of length `n` at `index_set`.
pub fn prolong(w: &[C64], index_set: &[usize], n: usize) -> Result<Vec<C64>> {
    if w.len() != index_set.len() {
        return Err(Error::DimensionMismatch { expected: index_set.len(), got: w.len() });
    }
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (&i, &x) in index_set.iter().zip(w) {
        *out.get_mut(i).ok_or(Error::IndexOutOfRange { index: i, len: n })? = x;
    }
    Ok(out)
}
