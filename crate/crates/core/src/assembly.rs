//! Degree-of-freedom management and assembly of the plate forms.
//!
//! With `D²` the Hessian and `cof` its cofactor matrix,
//!
//! * `a(η, χ) = ∫ D²η : D²χ`
//! * `b(η, χ, φ) = ½ ∫ cof(D²η) Dχ · Dφ`
//! * `A(Λ, Φ) = a(λ1, φ1) + a(λ2, φ2)`
//! * `B(Ξ, Λ, Φ) = b(ξ1, λ2, φ1) + b(ξ2, λ1, φ1) - b(ξ1, λ1, φ2)`
//!
//! Pair vectors are stored block-wise, `[first; second]`, each block of length
//! `n_free`. All cells of a mesh are congruent, so element matrices and the
//! element trilinear tensor are computed once per space.

use crate::control::ControlField;
use crate::element::{self, Derivs, PhysicalTable, N_LOCAL};
use crate::error::{Error, Result};
use crate::mesh::RectMesh;
use crate::sparse::SparseMatrix;

pub const DEFAULT_FORM_ORDER: usize = 5;
pub const DEFAULT_LOAD_ORDER: usize = 7;

#[derive(Debug, Clone)]
pub struct DofMap {
    /// First global slot of each node (`None` for clamped boundary nodes); the
    /// four kinds `(v, dx, dy, dxy)` follow consecutively.
    pub node_base: Vec<Option<usize>>,
    pub cell_dofs: Vec<[Option<usize>; N_LOCAL]>,
    pub n_free: usize,
}

/// Clamps all four DOF kinds at boundary nodes; free DOFs are numbered in node order.
pub fn build_dofmap(mesh: &RectMesh) -> DofMap {
    let mut next = 0;
    let node_base: Vec<Option<usize>> = mesh
        .boundary
        .iter()
        .map(|&b| {
            if b {
                None
            } else {
                next += 4;
                Some(next - 4)
            }
        })
        .collect();
    let cell_dofs = mesh
        .cells
        .iter()
        .map(|c| std::array::from_fn(|f| node_base[c[f / 4]].map(|b| b + f % 4)))
        .collect();
    DofMap { node_base, cell_dofs, n_free: next }
}

/// Coefficients of one scalar field on the free DOFs (clamped DOFs are zero).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(pub Vec<f64>);

impl ScalarField {
    pub fn zeros(n: usize) -> Self {
        ScalarField(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// A pair of scalar fields on one DOF map, e.g. `Ψ = (ψ1, ψ2)` or `Θ = (θ1, θ2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairField {
    pub first: ScalarField,
    pub second: ScalarField,
}

impl PairField {
    pub fn zeros(n: usize) -> Self {
        PairField { first: ScalarField::zeros(n), second: ScalarField::zeros(n) }
    }

    pub fn n_free(&self) -> usize {
        self.first.len()
    }

    pub fn from_block(v: &[f64]) -> Self {
        assert!(v.len().is_multiple_of(2));
        let n = v.len() / 2;
        PairField { first: ScalarField(v[..n].to_vec()), second: ScalarField(v[n..].to_vec()) }
    }

    pub fn to_block(&self) -> Vec<f64> {
        let mut v = self.first.0.clone();
        v.extend_from_slice(&self.second.0);
        v
    }
}

/// Discrete space on one mesh with cached element data.
#[derive(Debug, Clone)]
pub struct FeSpace {
    pub mesh: RectMesh,
    pub dofs: DofMap,
    /// Basis tabulated on the form rule.
    pub form: PhysicalTable,
    /// Basis tabulated on the load/error rule.
    pub load: PhysicalTable,
    a_elem: [[f64; N_LOCAL]; N_LOCAL],
    m_elem: [[f64; N_LOCAL]; N_LOCAL],
    /// `b_elem[k][j][i] = b(φ_k, φ_j, φ_i)` on one cell.
    b_elem: Vec<f64>,
    /// `∫_T φ_i`
    cell_integral: [f64; N_LOCAL],
    scalar_rows: Vec<Vec<usize>>,
}

#[inline]
fn hess_dot(a: &Derivs, b: &Derivs) -> f64 {
    a.dxx * b.dxx + 2.0 * a.dxy * b.dxy + a.dyy * b.dyy
}

/// `cof(D²η) Dχ · Dφ` at one point.
#[inline]
fn cof_form(eta: &Derivs, chi: &Derivs, phi: &Derivs) -> f64 {
    eta.dyy * chi.dx * phi.dx - eta.dxy * (chi.dx * phi.dy + chi.dy * phi.dx) + eta.dxx * chi.dy * phi.dy
}

#[inline]
fn bracket_pt(eta: &Derivs, chi: &Derivs) -> f64 {
    eta.dxx * chi.dyy + eta.dyy * chi.dxx - 2.0 * eta.dxy * chi.dxy
}

impl FeSpace {
    pub fn new(mesh: RectMesh) -> Result<Self> {
        Self::with_orders(mesh, DEFAULT_FORM_ORDER, DEFAULT_LOAD_ORDER)
    }

    pub fn with_orders(mesh: RectMesh, form_order: usize, load_order: usize) -> Result<Self> {
        let dofs = build_dofmap(&mesh);
        let (hx, hy) = (mesh.hx, mesh.hy);
        let form = element::tabulate(&element::gauss_rule(form_order)?).physical(hx, hy);
        let load = element::tabulate(&element::gauss_rule(load_order)?).physical(hx, hy);

        let mut a_elem = [[0.0; N_LOCAL]; N_LOCAL];
        let mut m_elem = [[0.0; N_LOCAL]; N_LOCAL];
        let mut b_elem = vec![0.0; N_LOCAL * N_LOCAL * N_LOCAL];
        let mut cell_integral = [0.0; N_LOCAL];
        for (q, row) in form.table.iter().enumerate() {
            let w = form.weights[q];
            for i in 0..N_LOCAL {
                cell_integral[i] += w * row[i].v;
                for j in 0..N_LOCAL {
                    a_elem[i][j] += w * hess_dot(&row[i], &row[j]);
                    m_elem[i][j] += w * row[i].v * row[j].v;
                    for k in 0..N_LOCAL {
                        b_elem[(k * N_LOCAL + j) * N_LOCAL + i] +=
                            0.5 * w * cof_form(&row[k], &row[j], &row[i]);
                    }
                }
            }
        }

        let mut scalar_rows = vec![Vec::new(); dofs.n_free];
        for cd in &dofs.cell_dofs {
            for gi in cd.iter().flatten() {
                scalar_rows[*gi].extend(cd.iter().flatten());
            }
        }
        for r in &mut scalar_rows {
            r.sort_unstable();
            r.dedup();
        }

        Ok(FeSpace { mesh, dofs, form, load, a_elem, m_elem, b_elem, cell_integral, scalar_rows })
    }

    pub fn n_free(&self) -> usize {
        self.dofs.n_free
    }

    /// Gathers the 16 local coefficients of a cell.
    #[inline]
    pub fn local(&self, field: &[f64], cell: usize) -> [f64; N_LOCAL] {
        let cd = &self.dofs.cell_dofs[cell];
        std::array::from_fn(|f| cd[f].map_or(0.0, |g| field[g]))
    }

    pub fn cell_integrals(&self) -> &[f64; N_LOCAL] {
        &self.cell_integral
    }

    pub fn scalar_pattern(&self) -> SparseMatrix {
        SparseMatrix::from_pattern(&self.scalar_rows)
    }

    /// Pattern of a 2x2 block operator on pair vectors.
    pub fn block_pattern(&self) -> SparseMatrix {
        let n = self.n_free();
        let mut rows = Vec::with_capacity(2 * n);
        for _ in 0..2 {
            for r in &self.scalar_rows {
                let mut row = r.clone();
                row.extend(r.iter().map(|c| c + n));
                rows.push(row);
            }
        }
        SparseMatrix::from_pattern(&rows)
    }

    fn scatter(&self, m: &mut SparseMatrix, cell: usize, roff: usize, coff: usize, local: &[[f64; N_LOCAL]; N_LOCAL]) {
        let cd = &self.dofs.cell_dofs[cell];
        for i in 0..N_LOCAL {
            let Some(gi) = cd[i] else { continue };
            for j in 0..N_LOCAL {
                if let Some(gj) = cd[j] {
                    m.add(roff + gi, coff + gj, local[i][j]);
                }
            }
        }
    }

    fn scatter_vec(&self, v: &mut [f64], cell: usize, off: usize, local: &[f64; N_LOCAL]) {
        for (f, g) in self.dofs.cell_dofs[cell].iter().enumerate() {
            if let Some(g) = g {
                v[off + g] += local[f];
            }
        }
    }

    /// `K[i][j] = Σ_k η_k b(φ_k, φ_j, φ_i) + Σ_k η_k b(φ_j, φ_k, φ_i)`, the local
    /// matrix of `ξ ↦ b(η, ξ, ·) + b(ξ, η, ·)`.
    fn local_b_sym(&self, eta: &[f64; N_LOCAL]) -> [[f64; N_LOCAL]; N_LOCAL] {
        let mut out = [[0.0; N_LOCAL]; N_LOCAL];
        let t = &self.b_elem;
        for (k, &ek) in eta.iter().enumerate() {
            if ek == 0.0 {
                continue;
            }
            for j in 0..N_LOCAL {
                let first = &t[(k * N_LOCAL + j) * N_LOCAL..(k * N_LOCAL + j + 1) * N_LOCAL];
                let second = &t[(j * N_LOCAL + k) * N_LOCAL..(j * N_LOCAL + k + 1) * N_LOCAL];
                for i in 0..N_LOCAL {
                    out[i][j] += ek * (first[i] + second[i]);
                }
            }
        }
        out
    }

    /// `r[i] = Σ_{k,j} η_k χ_j b(φ_k, φ_j, φ_i)` on one cell.
    fn local_b_apply(&self, eta: &[f64; N_LOCAL], chi: &[f64; N_LOCAL]) -> [f64; N_LOCAL] {
        let mut r = [0.0; N_LOCAL];
        let t = &self.b_elem;
        for (k, &ek) in eta.iter().enumerate() {
            if ek == 0.0 {
                continue;
            }
            for (j, &cj) in chi.iter().enumerate() {
                let s = ek * cj;
                if s == 0.0 {
                    continue;
                }
                let row = &t[(k * N_LOCAL + j) * N_LOCAL..(k * N_LOCAL + j + 1) * N_LOCAL];
                for i in 0..N_LOCAL {
                    r[i] += s * row[i];
                }
            }
        }
        r
    }
}

pub fn assemble_a(space: &FeSpace) -> SparseMatrix {
    let mut m = space.scalar_pattern();
    for c in 0..space.mesh.n_cells() {
        space.scatter(&mut m, c, 0, 0, &space.a_elem);
    }
    m
}

pub fn assemble_mass(space: &FeSpace) -> SparseMatrix {
    let mut m = space.scalar_pattern();
    for c in 0..space.mesh.n_cells() {
        space.scatter(&mut m, c, 0, 0, &space.m_elem);
    }
    m
}

fn assemble_block(space: &FeSpace, psi: &PairField, with_a: bool, linear_sign: f64) -> SparseMatrix {
    let n = space.n_free();
    let mut m = space.block_pattern();
    let neg = |x: [[f64; N_LOCAL]; N_LOCAL]| x.map(|r| r.map(|v| -v));
    let scale = |x: [[f64; N_LOCAL]; N_LOCAL], s: f64| x.map(|r| r.map(|v| s * v));
    for c in 0..space.mesh.n_cells() {
        if with_a {
            space.scatter(&mut m, c, 0, 0, &space.a_elem);
            space.scatter(&mut m, c, n, n, &space.a_elem);
        }
        let p1 = space.local(&psi.first.0, c);
        let p2 = space.local(&psi.second.0, c);
        let s1 = scale(space.local_b_sym(&p1), linear_sign);
        let s2 = scale(space.local_b_sym(&p2), linear_sign);
        space.scatter(&mut m, c, 0, 0, &s2);
        space.scatter(&mut m, c, 0, n, &s1);
        space.scatter(&mut m, c, n, 0, &neg(s1));
    }
    m
}

/// Block matrix of `B'(Ψ)`: `J[i][j] = B(Ψ, φ_j, φ_i) + B(φ_j, Ψ, φ_i)`.
pub fn assemble_b_jacobian(space: &FeSpace, psi: &PairField) -> SparseMatrix {
    assemble_block(space, psi, false, 1.0)
}

/// Linearized state operator `A + B'(Ψ)`.
pub fn assemble_jacobian(space: &FeSpace, psi: &PairField) -> SparseMatrix {
    assemble_block(space, psi, true, 1.0)
}

/// `A + s B'(Ψ)`; `s = -1` builds a deliberately inconsistent operator for fault-injection checks.
pub fn assemble_jacobian_with_sign(space: &FeSpace, psi: &PairField, s: f64) -> SparseMatrix {
    assemble_block(space, psi, true, s)
}

/// Matrix of `⟨B'(Ψ)* ξ, Φ⟩ = B(Ψ, Φ, ξ) + B(Φ, Ψ, ξ)`: row `i` tests with `Φ = φ_i`,
/// column `j` is the coefficient of `ξ`. Evaluated by direct quadrature, independent
/// of the element tensor used for the Jacobian.
pub fn assemble_b_adjoint(space: &FeSpace, psi: &PairField) -> SparseMatrix {
    let n = space.n_free();
    let t = &space.form;
    let mut m = space.block_pattern();
    for c in 0..space.mesh.n_cells() {
        let p1 = space.local(&psi.first.0, c);
        let p2 = space.local(&psi.second.0, c);
        let mut s1 = [[0.0; N_LOCAL]; N_LOCAL];
        let mut s2 = [[0.0; N_LOCAL]; N_LOCAL];
        for q in 0..t.n_points() {
            let w = 0.5 * t.weights[q];
            let (d1, d2) = (t.eval(q, &p1), t.eval(q, &p2));
            let row = &t.table[q];
            for i in 0..N_LOCAL {
                for j in 0..N_LOCAL {
                    // b(ψ, φ_i, φ_j) + b(φ_i, ψ, φ_j)
                    s1[i][j] += w * (cof_form(&d1, &row[i], &row[j]) + cof_form(&row[i], &d1, &row[j]));
                    s2[i][j] += w * (cof_form(&d2, &row[i], &row[j]) + cof_form(&row[i], &d2, &row[j]));
                }
            }
        }
        let neg1 = s1.map(|r| r.map(|v| -v));
        space.scatter(&mut m, c, 0, 0, &s2);
        space.scatter(&mut m, c, n, 0, &s1);
        space.scatter(&mut m, c, 0, n, &neg1);
    }
    m
}

/// Block vector of `B(Ψ, Ψ, ·)`.
pub fn nonlinear_term(space: &FeSpace, psi: &PairField) -> Vec<f64> {
    let n = space.n_free();
    let mut out = vec![0.0; 2 * n];
    for c in 0..space.mesh.n_cells() {
        let p1 = space.local(&psi.first.0, c);
        let p2 = space.local(&psi.second.0, c);
        let r12 = space.local_b_apply(&p1, &p2);
        let r21 = space.local_b_apply(&p2, &p1);
        let r11 = space.local_b_apply(&p1, &p1);
        let first: [f64; N_LOCAL] = std::array::from_fn(|i| r12[i] + r21[i]);
        let second: [f64; N_LOCAL] = r11.map(|v| -v);
        space.scatter_vec(&mut out, c, 0, &first);
        space.scatter_vec(&mut out, c, n, &second);
    }
    out
}

/// Quadrature value of `b(η, χ, φ)` using the form rule directly.
pub fn eval_b(space: &FeSpace, eta: &ScalarField, chi: &ScalarField, phi: &ScalarField) -> f64 {
    let t = &space.form;
    let mut total = 0.0;
    for c in 0..space.mesh.n_cells() {
        let (le, lc, lp) = (space.local(&eta.0, c), space.local(&chi.0, c), space.local(&phi.0, c));
        for q in 0..t.n_points() {
            total += 0.5 * t.weights[q] * cof_form(&t.eval(q, &le), &t.eval(q, &lc), &t.eval(q, &lp));
        }
    }
    total
}

/// `(∫ [η, χ] φ, -2 b(η, χ, φ))`; the two agree for fields vanishing with their
/// gradients on the boundary.
pub fn eval_bracket_identity(space: &FeSpace, eta: &ScalarField, chi: &ScalarField, phi: &ScalarField) -> (f64, f64) {
    let t = &space.form;
    let mut lhs = 0.0;
    for c in 0..space.mesh.n_cells() {
        let (le, lc, lp) = (space.local(&eta.0, c), space.local(&chi.0, c), space.local(&phi.0, c));
        for q in 0..t.n_points() {
            lhs += t.weights[q] * bracket_pt(&t.eval(q, &le), &t.eval(q, &lc)) * t.eval(q, &lp).v;
        }
    }
    (lhs, -2.0 * eval_b(space, eta, chi, phi))
}

/// Loads `∫ g_m φ_i` of several sources at once, on the load rule.
pub fn assemble_loads<const K: usize, G>(space: &FeSpace, g: G) -> Result<[Vec<f64>; K]>
where
    G: Fn(f64, f64) -> Result<[f64; K]>,
{
    let n = space.n_free();
    let mut out: [Vec<f64>; K] = std::array::from_fn(|_| vec![0.0; n]);
    let t = &space.load;
    for c in 0..space.mesh.n_cells() {
        let o = space.mesh.cell_origin(c);
        let mut local = [[0.0; N_LOCAL]; K];
        for q in 0..t.n_points() {
            let [xi, eta] = t.points[q];
            let (x, y) = (o[0] + xi * t.hx, o[1] + eta * t.hy);
            let vals = g(x, y)?;
            for (m, &v) in vals.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFiniteSource { cell: c, x, y });
                }
                for i in 0..N_LOCAL {
                    local[m][i] += t.weights[q] * v * t.table[q][i].v;
                }
            }
        }
        for m in 0..K {
            space.scatter_vec(&mut out[m], c, 0, &local[m]);
        }
    }
    Ok(out)
}

/// `∫ g φ_i` over the free DOFs of one scalar field.
pub fn assemble_load<G: Fn(f64, f64) -> f64>(space: &FeSpace, g: G) -> Result<Vec<f64>> {
    let [v] = assemble_loads(space, |x, y| Ok([g(x, y)]))?;
    Ok(v)
}

/// `∫_ω u φ_i` for a piecewise-constant control.
pub fn control_load(space: &FeSpace, u: &ControlField) -> Vec<f64> {
    let mut out = vec![0.0; space.n_free()];
    for (&c, &val) in u.cells().iter().zip(u.values()) {
        if val != 0.0 {
            let local = space.cell_integral.map(|v| v * val);
            space.scatter_vec(&mut out, c, 0, &local);
        }
    }
    out
}

/// `∫_Ω g` on the load rule.
pub fn integrate<G: Fn(f64, f64) -> Result<f64>>(space: &FeSpace, g: G) -> Result<f64> {
    let t = &space.load;
    let mut total = 0.0;
    for c in 0..space.mesh.n_cells() {
        let o = space.mesh.cell_origin(c);
        for q in 0..t.n_points() {
            let [xi, eta] = t.points[q];
            total += t.weights[q] * g(o[0] + xi * t.hx, o[1] + eta * t.hy)?;
        }
    }
    Ok(total)
}

impl FeSpace {
    /// Nodal BFS interpolant; `nodal` returns `(v, dx, dy, dxy)` at a node.
    pub fn interpolate<F: Fn(f64, f64) -> [f64; 4]>(&self, nodal: F) -> ScalarField {
        let mut v = vec![0.0; self.n_free()];
        for (k, base) in self.dofs.node_base.iter().enumerate() {
            if let Some(b) = base {
                let p = self.mesh.nodes[k];
                v[*b..*b + 4].copy_from_slice(&nodal(p[0], p[1]));
            }
        }
        ScalarField(v)
    }

    /// Field value and derivatives at a physical point, `None` outside the mesh.
    pub fn evaluate(&self, field: &[f64], x: f64, y: f64) -> Option<Derivs> {
        let (c, [xi, eta]) = self.mesh.locate(x, y)?;
        Some(self.evaluate_in_cell(field, c, xi, eta))
    }

    pub fn evaluate_in_cell(&self, field: &[f64], cell: usize, xi: f64, eta: f64) -> Derivs {
        let basis = element::physical_basis(xi, eta, self.mesh.hx, self.mesh.hy);
        let local = self.local(field, cell);
        let mut d = Derivs::default();
        for (c, b) in local.iter().zip(&basis) {
            d.axpy(*c, b);
        }
        d
    }

    /// Injects a field from a coarser nested space (exact: the spaces are nested).
    pub fn prolongate(&self, coarse: &FeSpace, field: &ScalarField) -> ScalarField {
        self.interpolate(|x, y| {
            coarse
                .evaluate(&field.0, x, y)
                .map_or([0.0; 4], |d| [d.v, d.dx, d.dy, d.dxy])
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, Domain};

    fn space(d: Domain, l: u32) -> FeSpace {
        FeSpace::new(build_mesh(d, l).unwrap()).unwrap()
    }

    #[test]
    fn free_dof_counts() {
        assert_eq!(space(Domain::UnitSquare, 1).n_free(), 36);
        assert_eq!(space(Domain::UnitSquare, 2).n_free(), 196);
        assert_eq!(space(Domain::LShape, 1).n_free(), 20);
    }

    #[test]
    fn local_to_global_injective() {
        let s = space(Domain::LShape, 2);
        for cd in &s.dofs.cell_dofs {
            let mut g: Vec<usize> = cd.iter().flatten().copied().collect();
            let n = g.len();
            g.sort_unstable();
            g.dedup();
            assert_eq!(g.len(), n);
        }
    }

    #[test]
    fn psi_zero_jacobian_vanishes() {
        let s = space(Domain::UnitSquare, 2);
        let j = assemble_b_jacobian(&s, &PairField::zeros(s.n_free()));
        assert_eq!(j.max_abs(), 0.0);
    }

    #[test]
    fn load_of_zero_and_linearity() {
        let s = space(Domain::UnitSquare, 2);
        assert!(assemble_load(&s, |_, _| 0.0).unwrap().iter().all(|&v| v == 0.0));
        let g1 = |x: f64, y: f64| (3.0 * x).sin() * y;
        let g2 = |x: f64, y: f64| x * x - y;
        let l1 = assemble_load(&s, g1).unwrap();
        let l2 = assemble_load(&s, g2).unwrap();
        let l = assemble_load(&s, |x, y| 2.0 * g1(x, y) - 0.5 * g2(x, y)).unwrap();
        for i in 0..l.len() {
            assert!((l[i] - (2.0 * l1[i] - 0.5 * l2[i])).abs() < 1e-13);
        }
    }

    #[test]
    fn non_finite_source_names_cell() {
        let s = space(Domain::UnitSquare, 1);
        let e = assemble_load(&s, |x, _| if x > 0.9 { f64::NAN } else { 1.0 }).unwrap_err();
        assert!(matches!(e, Error::NonFiniteSource { .. }));
    }

    #[test]
    fn hermite_scaling_of_unit_load() {
        let s = space(Domain::UnitSquare, 2);
        let l = assemble_load(&s, |_, _| 1.0).unwrap();
        let h = s.mesh.hx;
        // an interior node: value entry ~ h^2, derivative entries vanish or scale with h
        let base = s.dofs.node_base.iter().flatten().next().copied().unwrap();
        let v = l[base];
        assert!((v - h * h).abs() < 1e-14, "{v}");
        for k in 1..4 {
            assert!(l[base + k].abs() <= h * v.abs() + 1e-15);
        }
    }

    #[test]
    fn prolongation_is_exact() {
        let coarse = space(Domain::LShape, 1);
        let fine = space(Domain::LShape, 2);
        let f = coarse.interpolate(|x, y| {
            let (a, b) = (x * x - 1.0, y * y - 1.0);
            [a * a * b * b * (x + 2.0), 4.0 * x * a * b * b * (x + 2.0) + a * a * b * b, 4.0 * y * a * a * b * (x + 2.0), 16.0 * x * y * a * b * (x + 2.0) + 4.0 * y * a * a * b]
        });
        let g = fine.prolongate(&coarse, &f);
        for &(x, y) in &[(-0.3, 0.7), (-0.81, -0.42), (0.33, 0.21)] {
            let a = coarse.evaluate(&f.0, x, y).unwrap();
            let b = fine.evaluate(&g.0, x, y).unwrap();
            assert!((a.v - b.v).abs() < 1e-13 && (a.dxx - b.dxx).abs() < 1e-11);
        }
    }
}
