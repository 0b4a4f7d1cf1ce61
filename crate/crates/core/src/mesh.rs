//! Structured triangulations of rectangles, snapped coarse layouts and
//! piecewise-constant wave-speed fields.
//!
//! A [`Mesh`] is a tensor-product grid `xs × ys` whose cells are each split into two
//! triangles by the south-west to north-east diagonal. Node `(i, j)` has index
//! `j * (nx + 1) + i`; cell `(i, j)` owns elements `2c` (`[SW, SE, NE]`) and `2c + 1`
//! (`[SW, NE, NW]`) with `c = j * nx + i`. Both triangles are counter-clockwise.

use std::io::Write;

use crate::{Error, Result};

/// Rule mapping a wavenumber to the number of fine cells per side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshRule {
    /// `h ~ k^{-3/2}`: `m = ceil(k^{3/2})`.
    PollutionFree,
    /// `h = pi / (5k)`, ten points per wavelength: `m = ceil(5k / pi)`.
    PointsPerWavelength,
    Explicit(usize),
}

impl MeshRule {
    pub fn cells_per_side(self, k: f64) -> Result<usize> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidArgument(format!("wavenumber must be positive, got {k}")));
        }
        let m = match self {
            MeshRule::PollutionFree => ceil_snapped(k.powf(1.5)),
            MeshRule::PointsPerWavelength => ceil_snapped(5.0 * k / std::f64::consts::PI),
            MeshRule::Explicit(m) => m,
        };
        if m == 0 {
            return Err(Error::InvalidArgument("mesh needs at least one cell per side".into()));
        }
        Ok(m)
    }

    pub fn name(self) -> String {
        match self {
            MeshRule::PollutionFree => "pollution_free".into(),
            MeshRule::PointsPerWavelength => "points_per_wavelength".into(),
            MeshRule::Explicit(m) => format!("explicit({m})"),
        }
    }
}

impl std::str::FromStr for MeshRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pollution_free" | "pollution-free" => Ok(MeshRule::PollutionFree),
            "points_per_wavelength" | "points-per-wavelength" | "ppw" => {
                Ok(MeshRule::PointsPerWavelength)
            }
            _ => {
                let inner = s
                    .strip_prefix("explicit(")
                    .and_then(|r| r.strip_suffix(')'))
                    .or_else(|| s.strip_prefix("explicit:"))
                    .ok_or_else(|| Error::Unknown(s.to_string()))?;
                inner
                    .parse()
                    .map(MeshRule::Explicit)
                    .map_err(|_| Error::Unknown(s.to_string()))
            }
        }
    }
}

/// `ceil(x)` that ignores floating-point noise just above an integer
/// (`100f64.powf(1.5)` must give 1000, not 1001).
pub(crate) fn ceil_snapped(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    South,
    East,
    North,
    West,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub side: Side,
    /// The element the edge belongs to.
    pub element: usize,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nx: usize,
    ny: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
    elements: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    boundary_nodes: Vec<usize>,
}

/// Fine mesh of the unit square for wavenumber `k`.
pub fn build_fine_mesh(k: f64, rule: MeshRule) -> Result<Mesh> {
    let m = rule.cells_per_side(k)?;
    Ok(Mesh::unit_square(m))
}

impl Mesh {
    /// Uniform `m × m` mesh of the unit square, `h = 1/m`.
    pub fn unit_square(m: usize) -> Self {
        assert!(m > 0, "mesh needs at least one cell per side");
        let lines: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
        Self::tensor(lines.clone(), lines).expect("uniform gridlines are valid")
    }

    /// Triangulated tensor grid with the given (strictly increasing) gridlines.
    pub fn tensor(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || ys.len() < 2 {
            return Err(Error::InvalidArgument("need at least two gridlines per axis".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) || ys.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("gridlines must be strictly increasing".into()));
        }
        let nx = xs.len() - 1;
        let ny = ys.len() - 1;
        let node = |i: usize, j: usize| j * (nx + 1) + i;

        let mut elements = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let sw = node(i, j);
                let se = node(i + 1, j);
                let ne = node(i + 1, j + 1);
                let nw = node(i, j + 1);
                elements.push([sw, se, ne]);
                elements.push([sw, ne, nw]);
            }
        }

        let cell = |i: usize, j: usize| j * nx + i;
        let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            boundary_edges.push(BoundaryEdge {
                nodes: [node(i, 0), node(i + 1, 0)],
                side: Side::South,
                element: 2 * cell(i, 0),
            });
        }
        for j in 0..ny {
            boundary_edges.push(BoundaryEdge {
                nodes: [node(nx, j), node(nx, j + 1)],
                side: Side::East,
                element: 2 * cell(nx - 1, j),
            });
        }
        for i in 0..nx {
            boundary_edges.push(BoundaryEdge {
                nodes: [node(i + 1, ny), node(i, ny)],
                side: Side::North,
                element: 2 * cell(i, ny - 1) + 1,
            });
        }
        for j in 0..ny {
            boundary_edges.push(BoundaryEdge {
                nodes: [node(0, j + 1), node(0, j)],
                side: Side::West,
                element: 2 * cell(0, j) + 1,
            });
        }

        let mut boundary_nodes: Vec<usize> = (0..(nx + 1) * (ny + 1))
            .filter(|&n| {
                let (i, j) = (n % (nx + 1), n / (nx + 1));
                i == 0 || i == nx || j == 0 || j == ny
            })
            .collect();
        boundary_nodes.sort_unstable();

        Ok(Self { nx, ny, xs, ys, elements, boundary_edges, boundary_nodes })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Cells per side for square meshes (`nx`).
    pub fn m(&self) -> usize {
        self.nx
    }

    /// Fine mesh parameter of a uniform unit-square mesh (`1/m`).
    pub fn h(&self) -> f64 {
        self.xs[1] - self.xs[0]
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn num_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// Grid position `(i, j)` of node `n`.
    pub fn node_ij(&self, n: usize) -> (usize, usize) {
        (n % (self.nx + 1), n / (self.nx + 1))
    }

    pub fn node_coords(&self, n: usize) -> [f64; 2] {
        let (i, j) = self.node_ij(n);
        [self.xs[i], self.ys[j]]
    }

    pub fn is_boundary_node(&self, n: usize) -> bool {
        let (i, j) = self.node_ij(n);
        i == 0 || i == self.nx || j == 0 || j == self.ny
    }

    /// The two elements of cell `(i, j)`.
    pub fn cell_elements(&self, i: usize, j: usize) -> [usize; 2] {
        let c = j * self.nx + i;
        [2 * c, 2 * c + 1]
    }

    /// Cell `(i, j)` containing element `e`.
    pub fn element_cell(&self, e: usize) -> (usize, usize) {
        let c = e / 2;
        (c % self.nx, c / self.nx)
    }

    pub fn element_vertices(&self, e: usize) -> [[f64; 2]; 3] {
        self.elements[e].map(|n| self.node_coords(n))
    }

    /// Signed area (positive for counter-clockwise vertices).
    pub fn element_area(&self, e: usize) -> f64 {
        let [a, b, c] = self.element_vertices(e);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn element_centroid(&self, e: usize) -> [f64; 2] {
        let [a, b, c] = self.element_vertices(e);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Mesh of cells `i0..i1 × j0..j1` with maps from its nodes and elements to ours.
    pub fn submesh(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> Result<SubMesh> {
        if i0 >= i1 || j0 >= j1 || i1 > self.nx || j1 > self.ny {
            return Err(Error::InvalidArgument(format!(
                "invalid cell range {i0}..{i1} x {j0}..{j1}"
            )));
        }
        let mesh = Mesh::tensor(self.xs[i0..=i1].to_vec(), self.ys[j0..=j1].to_vec())?;
        let nodes = (j0..=j1)
            .flat_map(|j| (i0..=i1).map(move |i| (i, j)))
            .map(|(i, j)| self.node_index(i, j))
            .collect();
        let mut elements = Vec::with_capacity(mesh.num_elements());
        for j in j0..j1 {
            for i in i0..i1 {
                elements.extend(self.cell_elements(i, j));
            }
        }
        Ok(SubMesh { mesh, nodes, elements })
    }

    /// Plain-text dump: a `nodes` block of `index x y` lines, then an `elements` block
    /// of `index n0 n1 n2` lines.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "nodes")?;
        for n in 0..self.num_nodes() {
            let [x, y] = self.node_coords(n);
            writeln!(out, "{n} {x} {y}")?;
        }
        writeln!(out, "elements")?;
        for (e, [a, b, c]) in self.elements.iter().enumerate() {
            writeln!(out, "{e} {a} {b} {c}")?;
        }
        Ok(())
    }
}

/// A rectangular piece of a mesh together with its embedding.
#[derive(Debug, Clone)]
pub struct SubMesh {
    pub mesh: Mesh,
    /// Parent node index of each local node.
    pub nodes: Vec<usize>,
    /// Parent element index of each local element.
    pub elements: Vec<usize>,
}

/// Coarse cells as rectangles of whole fine cells.
///
/// `bx[p]` is the fine gridline index of the `p`-th coarse gridline in `x`
/// (`bx[0] = 0`, `bx[mx] = nx`), likewise `by`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoarseLayout {
    bx: Vec<usize>,
    by: Vec<usize>,
}

/// Coarse layout with `M = ceil(k^alpha)` cells per side.
pub fn build_coarse_layout(mesh: &Mesh, k: f64, alpha: f64) -> Result<CoarseLayout> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!("wavenumber must be positive, got {k}")));
    }
    let m = ceil_snapped(k.powf(alpha)).max(1);
    CoarseLayout::with_cells(mesh, m, m)
}

fn snap_axis(fine: usize, coarse: usize) -> Result<Vec<usize>> {
    if coarse == 0 {
        return Err(Error::InvalidArgument("coarse layout needs at least one cell".into()));
    }
    if coarse > fine {
        return Err(Error::CoarseFinerThanFine { coarse, fine });
    }
    let lines: Vec<usize> = (0..=coarse)
        .map(|p| (p as f64 * fine as f64 / coarse as f64).round() as usize)
        .collect();
    for w in lines.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::DegenerateLayout { line: w[1] });
        }
    }
    Ok(lines)
}

impl CoarseLayout {
    /// `mx × my` coarse cells with nominal uniform gridlines snapped to the nearest
    /// fine gridline.
    pub fn with_cells(mesh: &Mesh, mx: usize, my: usize) -> Result<Self> {
        Ok(Self { bx: snap_axis(mesh.nx(), mx)?, by: snap_axis(mesh.ny(), my)? })
    }

    /// Layout whose cells have side about `target` in physical length.
    pub fn with_cell_size(mesh: &Mesh, target: f64) -> Result<Self> {
        let lx = mesh.xs()[mesh.nx()] - mesh.xs()[0];
        let ly = mesh.ys()[mesh.ny()] - mesh.ys()[0];
        let mx = ceil_snapped(lx / target).clamp(1, mesh.nx());
        let my = ceil_snapped(ly / target).clamp(1, mesh.ny());
        Self::with_cells(mesh, mx, my)
    }

    pub fn from_lines(bx: Vec<usize>, by: Vec<usize>) -> Result<Self> {
        for lines in [&bx, &by] {
            if lines.len() < 2 || lines[0] != 0 {
                return Err(Error::InvalidArgument("coarse gridlines must start at 0".into()));
            }
            if let Some(w) = lines.windows(2).find(|w| w[1] <= w[0]) {
                return Err(Error::DegenerateLayout { line: w[1] });
            }
        }
        Ok(Self { bx, by })
    }

    pub fn mx(&self) -> usize {
        self.bx.len() - 1
    }

    pub fn my(&self) -> usize {
        self.by.len() - 1
    }

    pub fn num_cells(&self) -> usize {
        self.mx() * self.my()
    }

    pub fn num_nodes(&self) -> usize {
        (self.mx() + 1) * (self.my() + 1)
    }

    pub fn x_lines(&self) -> &[usize] {
        &self.bx
    }

    pub fn y_lines(&self) -> &[usize] {
        &self.by
    }

    /// Coarse cell index `J * mx + I`.
    pub fn cell_index(&self, ci: usize, cj: usize) -> usize {
        cj * self.mx() + ci
    }

    pub fn cell_ij(&self, cell: usize) -> (usize, usize) {
        (cell % self.mx(), cell / self.mx())
    }

    /// Fine-cell rectangle `[i0, i1) × [j0, j1)` of coarse cell `cell`.
    pub fn cell_bounds(&self, cell: usize) -> [usize; 4] {
        let (ci, cj) = self.cell_ij(cell);
        [self.bx[ci], self.bx[ci + 1], self.by[cj], self.by[cj + 1]]
    }

    /// Smallest coarse-cell width in fine cells over both axes.
    pub fn min_width(&self) -> usize {
        self.bx
            .windows(2)
            .chain(self.by.windows(2))
            .map(|w| w[1] - w[0])
            .min()
            .unwrap()
    }

    /// Distinct coarse-cell widths (in fine cells) along `x`.
    pub fn x_widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.bx.windows(2).map(|w| w[1] - w[0]).collect();
        w.sort_unstable();
        w.dedup();
        w
    }

    /// The coarse triangulation as a mesh with the coarse gridline coordinates.
    pub fn coarse_mesh(&self, fine: &Mesh) -> Mesh {
        let xs = self.bx.iter().map(|&i| fine.xs()[i]).collect();
        let ys = self.by.iter().map(|&j| fine.ys()[j]).collect();
        Mesh::tensor(xs, ys).expect("snapped gridlines are strictly increasing")
    }

    /// Fine node index of each coarse node (row-major in the coarse grid).
    pub fn coarse_node_fine_indices(&self, fine: &Mesh) -> Vec<usize> {
        self.by
            .iter()
            .flat_map(|&j| self.bx.iter().map(move |&i| (i, j)))
            .map(|(i, j)| fine.node_index(i, j))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Constant,
    CenteredSquare,
    ShiftedSquare,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Constant => "constant",
            Scenario::CenteredSquare => "centered_square",
            Scenario::ShiftedSquare => "shifted_square",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "constant" => Ok(Scenario::Constant),
            "centered_square" | "resolved" => Ok(Scenario::CenteredSquare),
            "shifted_square" | "unresolved" => Ok(Scenario::ShiftedSquare),
            _ => Err(Error::Unknown(s.to_string())),
        }
    }
}

/// Per-element wave speed.
#[derive(Debug, Clone)]
pub struct WaveSpeedField {
    values: Vec<f64>,
    scenario: Scenario,
    c_star: f64,
    /// Inner square `[x0, x1] × [y0, y1]` for the square scenarios.
    inner: Option<[f64; 4]>,
}

/// Wave speed `c_star` in a side-1/3 square `Omega_1` and 1 elsewhere.
///
/// The nominal centred square is snapped to the nearest fine gridlines; `offset`
/// moves it north-west by that many fine cells in each direction.
pub fn build_wavespeed(
    mesh: &Mesh,
    scenario: Scenario,
    c_star: f64,
    offset: usize,
) -> Result<WaveSpeedField> {
    if !(c_star > 0.0) {
        return Err(Error::InvalidArgument(format!("c_star must be positive, got {c_star}")));
    }
    let inner = match scenario {
        Scenario::Constant => None,
        Scenario::CenteredSquare | Scenario::ShiftedSquare => {
            let shift = if scenario == Scenario::ShiftedSquare { offset } else { 0 };
            let snap = |n: usize, t: f64| (n as f64 * t).round() as usize;
            let (i0, i1) = (snap(mesh.nx(), 1.0 / 3.0), snap(mesh.nx(), 2.0 / 3.0));
            let (j0, j1) = (snap(mesh.ny(), 1.0 / 3.0), snap(mesh.ny(), 2.0 / 3.0));
            if i0 >= i1 || j0 >= j1 {
                return Err(Error::InvalidArgument("mesh too coarse to resolve the inner square".into()));
            }
            if shift > i0 || j1 + shift > mesh.ny() {
                return Err(Error::InvalidArgument(format!(
                    "offset {shift} moves the inner square outside the domain"
                )));
            }
            let (i0, i1, j0, j1) = (i0 - shift, i1 - shift, j0 + shift, j1 + shift);
            Some([mesh.xs()[i0], mesh.xs()[i1], mesh.ys()[j0], mesh.ys()[j1]])
        }
    };
    let mut field = WaveSpeedField { values: Vec::new(), scenario, c_star, inner };
    field.values = (0..mesh.num_elements())
        .map(|e| {
            let [x, y] = mesh.element_centroid(e);
            field.speed_at(x, y)
        })
        .collect();
    Ok(field)
}

impl WaveSpeedField {
    pub fn constant(mesh: &Mesh) -> Self {
        Self {
            values: vec![1.0; mesh.num_elements()],
            scenario: Scenario::Constant,
            c_star: 1.0,
            inner: None,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn c_star(&self) -> f64 {
        self.c_star
    }

    pub fn inner_square(&self) -> Option<[f64; 4]> {
        self.inner
    }

    pub fn is_constant(&self) -> bool {
        let first = self.values.first().copied().unwrap_or(1.0);
        self.values.iter().all(|&c| c == first)
    }

    /// Speed at a point (interior of `Omega_1` gets `c_star`).
    pub fn speed_at(&self, x: f64, y: f64) -> f64 {
        match self.inner {
            Some([x0, x1, y0, y1]) if x > x0 && x < x1 && y > y0 && y < y1 => self.c_star,
            _ => 1.0,
        }
    }

    /// The same field on another mesh: each element takes the speed whose inverse
    /// square is the element average of `1 / c^2`, so the mass term sees the mean
    /// of `(omega / c)^2`.
    pub fn resample(&self, mesh: &Mesh) -> Self {
        const Q: usize = 12;
        let values = (0..mesh.num_elements())
            .map(|e| {
                let [p0, p1, p2] = mesh.element_vertices(e);
                let mut sum = 0.0;
                let mut count = 0usize;
                for a in 0..Q {
                    for b in 0..Q - a {
                        for (off, ok) in [(1.0 / 3.0, true), (2.0 / 3.0, a + b + 1 < Q)] {
                            if !ok {
                                continue;
                            }
                            let (l1, l2) = ((a as f64 + off) / Q as f64, (b as f64 + off) / Q as f64);
                            let l0 = 1.0 - l1 - l2;
                            let x = l0 * p0[0] + l1 * p1[0] + l2 * p2[0];
                            let y = l0 * p0[1] + l1 * p1[1] + l2 * p2[1];
                            sum += self.speed_at(x, y).powi(-2);
                            count += 1;
                        }
                    }
                }
                (sum / count as f64).powf(-0.5)
            })
            .collect();
        Self { values, scenario: self.scenario, c_star: self.c_star, inner: self.inner }
    }

    /// Restriction to the elements of a submesh.
    pub fn restrict(&self, sub: &SubMesh) -> Self {
        Self {
            values: sub.elements.iter().map(|&e| self.values[e]).collect(),
            scenario: self.scenario,
            c_star: self.c_star,
            inner: self.inner,
        }
    }
}
