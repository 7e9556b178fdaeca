//! Structured rectangular meshes of the unit square and the L-shaped domain.
//!
//! Both domains are cut out of a uniform background grid with `2^(l+1)` cells
//! per direction. Nodes and cells are numbered lexicographically by `(y, x)`.

use std::io::Write;

use crate::error::{Error, Result};

pub const MAX_LEVEL: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    /// `(0,1)^2`
    UnitSquare,
    /// `(-1,1)^2 \ [0,1) x (-1,0]`
    LShape,
}

impl Domain {
    /// Lower-left corner and side length of the background grid.
    fn bounding_box(self) -> ([f64; 2], f64) {
        match self {
            Domain::UnitSquare => ([0.0, 0.0], 1.0),
            Domain::LShape => ([-1.0, -1.0], 2.0),
        }
    }

    /// Whether the open background-grid cell with centre `(cx, cy)` belongs to the domain.
    fn contains_cell_centre(self, cx: f64, cy: f64) -> bool {
        match self {
            Domain::UnitSquare => true,
            Domain::LShape => !(cx > 0.0 && cy < 0.0),
        }
    }

    pub fn area(self) -> f64 {
        match self {
            Domain::UnitSquare => 1.0,
            Domain::LShape => 3.0,
        }
    }

    /// Interior angle at the re-entrant corner, if any.
    pub fn reentrant_angle(self) -> Option<f64> {
        match self {
            Domain::UnitSquare => None,
            Domain::LShape => Some(1.5 * std::f64::consts::PI),
        }
    }

    /// Diagonal of a level-0 cell, the reference mesh size `h0`.
    pub fn h0(self) -> f64 {
        let (_, side) = self.bounding_box();
        side / 2.0 * std::f64::consts::SQRT_2
    }
}

/// Region carrying the distributed control.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Region {
    #[default]
    Whole,
    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl Region {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Region::Whole => true,
            Region::Rect { x0, x1, y0, y1 } => x >= x0 && x <= x1 && y >= y0 && y <= y1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RectMesh {
    pub domain: Domain,
    pub level: u32,
    /// Background-grid cells per direction.
    pub grid_n: usize,
    pub origin: [f64; 2],
    pub hx: f64,
    pub hy: f64,
    pub nodes: Vec<[f64; 2]>,
    /// Counterclockwise node quadruples, lower-left first.
    pub cells: Vec<[usize; 4]>,
    pub boundary: Vec<bool>,
    /// Background-grid index `(i, j)` of every cell.
    cell_ij: Vec<[usize; 2]>,
    /// Background grid cell -> mesh cell.
    cell_lookup: Vec<Option<usize>>,
}

/// Builds the level-`level` mesh of `domain`.
pub fn build_mesh(domain: Domain, level: u32) -> Result<RectMesh> {
    if level == 0 || level > MAX_LEVEL {
        return Err(Error::UnsupportedLevel(level));
    }
    let n = 1usize << (level + 1);
    let (origin, side) = domain.bounding_box();
    let h = side / n as f64;
    let coord = |k: usize, o: f64| o + side * (k as f64) / (n as f64);

    let active = |i: isize, j: isize| -> bool {
        if i < 0 || j < 0 || i >= n as isize || j >= n as isize {
            return false;
        }
        let cx = coord(i as usize, origin[0]) + 0.5 * h;
        let cy = coord(j as usize, origin[1]) + 0.5 * h;
        domain.contains_cell_centre(cx, cy)
    };

    let mut node_index = vec![usize::MAX; (n + 1) * (n + 1)];
    let mut nodes = Vec::new();
    let mut boundary = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            let (ii, jj) = (i as isize, j as isize);
            let around = [
                active(ii - 1, jj - 1),
                active(ii, jj - 1),
                active(ii - 1, jj),
                active(ii, jj),
            ];
            if around.iter().any(|&a| a) {
                node_index[j * (n + 1) + i] = nodes.len();
                nodes.push([coord(i, origin[0]), coord(j, origin[1])]);
                boundary.push(!around.iter().all(|&a| a));
            }
        }
    }

    let mut cells = Vec::new();
    let mut cell_ij = Vec::new();
    let mut cell_lookup = vec![None; n * n];
    for j in 0..n {
        for i in 0..n {
            if !active(i as isize, j as isize) {
                continue;
            }
            let id = |i: usize, j: usize| node_index[j * (n + 1) + i];
            cell_lookup[j * n + i] = Some(cells.len());
            cells.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            cell_ij.push([i, j]);
        }
    }

    Ok(RectMesh {
        domain,
        level,
        grid_n: n,
        origin,
        hx: h,
        hy: h,
        nodes,
        cells,
        boundary,
        cell_ij,
        cell_lookup,
    })
}

impl RectMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_interior_nodes(&self) -> usize {
        self.boundary.iter().filter(|&&b| !b).count()
    }

    /// Mesh size: the cell diagonal.
    pub fn h(&self) -> f64 {
        self.hx.hypot(self.hy)
    }

    pub fn h_over_h0(&self) -> f64 {
        self.h() / self.domain.h0()
    }

    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    /// Lower-left corner of a cell.
    pub fn cell_origin(&self, cell: usize) -> [f64; 2] {
        self.nodes[self.cells[cell][0]]
    }

    pub fn centroid(&self, cell: usize) -> [f64; 2] {
        let [x, y] = self.cell_origin(cell);
        [x + 0.5 * self.hx, y + 0.5 * self.hy]
    }

    pub fn cell_grid_index(&self, cell: usize) -> [usize; 2] {
        self.cell_ij[cell]
    }

    /// Maps a physical point to its containing cell and reference coordinates in `[0,1]^2`.
    ///
    /// Points on shared edges go to the cell above/right when that cell exists.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, [f64; 2])> {
        let n = self.grid_n as isize;
        let sx = (x - self.origin[0]) / self.hx;
        let sy = (y - self.origin[1]) / self.hy;
        let tol = 1e-12 * n as f64;
        if sx < -tol || sy < -tol || sx > n as f64 + tol || sy > n as f64 + tol {
            return None;
        }
        let fi = sx.floor() as isize;
        let fj = sy.floor() as isize;
        // Candidates: the floor cell first, then neighbours for points on grid lines.
        for dj in [0isize, -1] {
            for di in [0isize, -1] {
                let (i, j) = (fi + di, fj + dj);
                if i < 0 || j < 0 || i >= n || j >= n {
                    continue;
                }
                let (xi, eta) = (sx - i as f64, sy - j as f64);
                if xi < -tol || xi > 1.0 + tol || eta < -tol || eta > 1.0 + tol {
                    continue;
                }
                if let Some(c) = self.cell_lookup[j as usize * self.grid_n + i as usize] {
                    return Some((c, [xi.clamp(0.0, 1.0), eta.clamp(0.0, 1.0)]));
                }
            }
        }
        None
    }

    /// Writes the plain-text mesh dump: `n x y b` per node, then `c i0 i1 i2 i3` per cell.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (k, p) in self.nodes.iter().enumerate() {
            writeln!(out, "n {} {} {}", p[0], p[1], u8::from(self.boundary[k]))?;
        }
        for c in &self.cells {
            writeln!(out, "c {} {} {} {}", c[0], c[1], c[2], c[3])?;
        }
        Ok(())
    }
}

/// Cells tiling the control region `omega`.
pub fn cells_in_omega(mesh: &RectMesh, omega: &Region) -> Result<Vec<usize>> {
    match *omega {
        Region::Whole => Ok((0..mesh.n_cells()).collect()),
        Region::Rect { x0, x1, y0, y1 } => {
            if !(x0 < x1 && y0 < y1) {
                return Err(Error::MisalignedRegion(format!(
                    "degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]"
                )));
            }
            let to_grid = |v: f64, o: f64, h: f64, name: &str| -> Result<usize> {
                let s = (v - o) / h;
                let k = s.round();
                if (s - k).abs() > 1e-9 || k < 0.0 || k > mesh.grid_n as f64 {
                    return Err(Error::MisalignedRegion(format!(
                        "{name} = {v} is not a grid line of the level-{} mesh",
                        mesh.level
                    )));
                }
                Ok(k as usize)
            };
            let i0 = to_grid(x0, mesh.origin[0], mesh.hx, "x0")?;
            let i1 = to_grid(x1, mesh.origin[0], mesh.hx, "x1")?;
            let j0 = to_grid(y0, mesh.origin[1], mesh.hy, "y0")?;
            let j1 = to_grid(y1, mesh.origin[1], mesh.hy, "y1")?;
            let mut out = Vec::new();
            for j in j0..j1 {
                for i in i0..i1 {
                    match mesh.cell_lookup[j * mesh.grid_n + i] {
                        Some(c) => out.push(c),
                        None => {
                            return Err(Error::MisalignedRegion(format!(
                                "rectangle [{x0}, {x1}] x [{y0}, {y1}] leaves the domain"
                            )))
                        }
                    }
                }
            }
            out.sort_unstable();
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_level1_counts() {
        let m = build_mesh(Domain::UnitSquare, 1).unwrap();
        assert_eq!(m.n_cells(), 16);
        assert_eq!(m.n_nodes(), 25);
        assert_eq!(m.n_interior_nodes(), 9);
        assert_eq!(m.boundary.iter().filter(|&&b| b).count(), 16);
        assert!((m.h_over_h0() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unit_square_level6_free_dofs() {
        let m = build_mesh(Domain::UnitSquare, 6).unwrap();
        assert_eq!(m.n_cells(), 16384);
        assert_eq!(4 * m.n_interior_nodes(), 64516);
    }

    #[test]
    fn lshape_level1_counts() {
        let m = build_mesh(Domain::LShape, 1).unwrap();
        assert_eq!(m.n_cells(), 12);
        assert_eq!(m.n_nodes(), 21);
        assert!((m.hx - 0.5).abs() < 1e-15);
        assert_eq!(m.n_interior_nodes(), 5);
    }

    #[test]
    fn lshape_reentrant_corner_and_edges_are_boundary() {
        let m = build_mesh(Domain::LShape, 3).unwrap();
        for (k, p) in m.nodes.iter().enumerate() {
            let on_reentrant =
                (p[0] == 0.0 && p[1] <= 0.0) || (p[1] == 0.0 && p[0] >= 0.0);
            let on_outer = p[0].abs() == 1.0 || p[1].abs() == 1.0;
            assert_eq!(m.boundary[k], on_reentrant || on_outer, "node {p:?}");
        }
        // no node inside the removed quadrant
        assert!(m.nodes.iter().all(|p| !(p[0] > 0.0 && p[1] < 0.0)));
    }

    #[test]
    fn areas_sum_to_domain_area() {
        for (d, level) in [(Domain::UnitSquare, 3), (Domain::LShape, 4)] {
            let m = build_mesh(d, level).unwrap();
            let total = m.n_cells() as f64 * m.cell_area();
            assert!((total - d.area()).abs() <= 1e-12 * d.area());
        }
    }

    #[test]
    fn interior_nodes_have_four_cells() {
        let m = build_mesh(Domain::UnitSquare, 2).unwrap();
        let mut count = vec![0; m.n_nodes()];
        for c in &m.cells {
            for &v in c {
                count[v] += 1;
            }
        }
        for (k, &b) in m.boundary.iter().enumerate() {
            if !b {
                assert_eq!(count[k], 4);
            }
        }
    }

    #[test]
    fn shared_edges_are_conforming() {
        let m = build_mesh(Domain::LShape, 2).unwrap();
        use std::collections::HashMap;
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for c in &m.cells {
            for e in 0..4 {
                let (a, b) = (c[e], c[(e + 1) % 4]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        // every edge is shared by at most two cells and boundary edges join boundary nodes
        for (&(a, b), &k) in &edges {
            assert!(k <= 2);
            if k == 1 {
                assert!(m.boundary[a] && m.boundary[b]);
            }
        }
    }

    #[test]
    fn boundary_is_stable_under_refinement() {
        for d in [Domain::UnitSquare, Domain::LShape] {
            let coarse = build_mesh(d, 2).unwrap();
            let fine = build_mesh(d, 3).unwrap();
            for (k, p) in coarse.nodes.iter().enumerate() {
                if !coarse.boundary[k] {
                    continue;
                }
                let q = fine
                    .nodes
                    .iter()
                    .position(|r| r == p)
                    .expect("coarse node present in the fine mesh");
                assert!(fine.boundary[q]);
            }
        }
    }

    #[test]
    fn ordering_is_lexicographic() {
        let m = build_mesh(Domain::LShape, 2).unwrap();
        for w in m.nodes.windows(2) {
            assert!((w[0][1], w[0][0]) < (w[1][1], w[1][0]));
        }
    }

    #[test]
    fn omega_selection() {
        let m = build_mesh(Domain::UnitSquare, 1).unwrap();
        assert_eq!(cells_in_omega(&m, &Region::Whole).unwrap().len(), 16);
        let q = Region::Rect { x0: 0.0, x1: 0.5, y0: 0.0, y1: 0.5 };
        assert_eq!(cells_in_omega(&m, &q).unwrap().len(), 4);
        let bad = Region::Rect { x0: 0.0, x1: 0.3, y0: 0.0, y1: 0.3 };
        assert!(matches!(cells_in_omega(&m, &bad), Err(Error::MisalignedRegion(_))));
    }

    #[test]
    fn omega_outside_lshape_rejected() {
        let m = build_mesh(Domain::LShape, 1).unwrap();
        let r = Region::Rect { x0: 0.0, x1: 0.5, y0: -0.5, y1: 0.0 };
        assert!(cells_in_omega(&m, &r).is_err());
    }

    #[test]
    fn rejects_bad_level() {
        assert!(matches!(build_mesh(Domain::UnitSquare, 0), Err(Error::UnsupportedLevel(0))));
        assert!(build_mesh(Domain::UnitSquare, 9).is_err());
    }

    #[test]
    fn locate_points() {
        let m = build_mesh(Domain::LShape, 1).unwrap();
        let (c, r) = m.locate(-0.25, 0.75).unwrap();
        let o = m.cell_origin(c);
        assert!((o[0] + 0.5).abs() < 1e-15 && (o[1] - 0.5).abs() < 1e-15);
        assert!((r[0] - 0.5).abs() < 1e-14 && (r[1] - 0.5).abs() < 1e-14);
        assert!(m.locate(0.5, -0.5).is_none());
        assert!(m.locate(1.0, 1.0).is_some());
        assert!(m.locate(1.5, 0.0).is_none());
    }

    #[test]
    fn dump_format() {
        let m = build_mesh(Domain::UnitSquare, 1).unwrap();
        let mut buf = Vec::new();
        m.write_dump(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().filter(|l| l.starts_with("n ")).count(), 25);
        assert_eq!(s.lines().filter(|l| l.starts_with("c ")).count(), 16);
        assert_eq!(s.lines().next().unwrap(), "n 0 0 1");
    }
}
