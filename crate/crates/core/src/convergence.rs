//! Error norms against manufactured solutions, experimental orders of convergence,
//! and multi-level studies.

use std::ops::RangeInclusive;
use std::time::Instant;

use log::info;

use crate::assembly::{FeSpace, PairField, ScalarField, DEFAULT_FORM_ORDER, DEFAULT_LOAD_ORDER};
use crate::control::{pdas_solve, Bounds, ControlField, OcpSolution, PdasOptions, PostprocessedControl};
use crate::element::{gauss_rule, tabulate, PhysicalTable};
use crate::error::{Error, Result};
use crate::jet::Jet4;
use crate::manufactured::{CaseSpec, Field};
use crate::mesh::{build_mesh, cells_in_omega, Region};
use crate::solver::VkProblem;

pub const DEFAULT_ERROR_ORDER: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    /// `|·|_{H²}` seminorm, `(∫ D²e : D²e)^{1/2}`.
    H2Semi,
    /// Full `H¹` norm (value and gradient).
    H1,
    L2,
}

/// All three error measures of one field (or of a pair, combined in `ℓ²`).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormSet {
    pub l2: f64,
    pub h1: f64,
    pub h2_semi: f64,
}

impl NormSet {
    pub fn get(&self, n: Norm) -> f64 {
        match n {
            Norm::H2Semi => self.h2_semi,
            Norm::H1 => self.h1,
            Norm::L2 => self.l2,
        }
    }
}

/// Error quadrature rule of `n` points per direction on the cells of `space`.
pub fn error_table(space: &FeSpace, n: usize) -> Result<PhysicalTable> {
    Ok(tabulate(&gauss_rule(n)?).physical(space.mesh.hx, space.mesh.hy))
}

/// Errors of the discrete fields against exact jets; `exact` returns one jet per field.
pub fn field_errors<const K: usize, G>(
    space: &FeSpace,
    table: &PhysicalTable,
    fields: [&ScalarField; K],
    exact: G,
) -> Result<NormSet>
where
    G: Fn(f64, f64) -> Result<[Jet4; K]>,
{
    let (mut l2, mut g2, mut s2) = (0.0, 0.0, 0.0);
    for c in 0..space.mesh.n_cells() {
        let o = space.mesh.cell_origin(c);
        let locals = fields.map(|f| space.local(&f.0, c));
        for q in 0..table.n_points() {
            let [xi, eta] = table.points[q];
            let w = table.weights[q];
            let ex = exact(o[0] + xi * table.hx, o[1] + eta * table.hy)?;
            for k in 0..K {
                let d = table.eval(q, &locals[k]);
                let e = &ex[k];
                let ev = d.v - e.value();
                let (ex_, ey) = (d.dx - e.dx(), d.dy - e.dy());
                let (exx, exy, eyy) = (d.dxx - e.dxx(), d.dxy - e.dxy(), d.dyy - e.dyy());
                l2 += w * ev * ev;
                g2 += w * (ex_ * ex_ + ey * ey);
                s2 += w * (exx * exx + 2.0 * exy * exy + eyy * eyy);
            }
        }
    }
    Ok(NormSet { l2: l2.sqrt(), h1: (l2 + g2).sqrt(), h2_semi: s2.sqrt() })
}

/// Error of a pair of fields in one norm.
pub fn error_norm<G>(space: &FeSpace, table: &PhysicalTable, field: &PairField, exact: G, norm: Norm) -> Result<f64>
where
    G: Fn(f64, f64) -> Result<[Jet4; 2]>,
{
    Ok(field_errors(space, table, [&field.first, &field.second], exact)?.get(norm))
}

/// `‖u_h − ū‖_{L²(ω)}` for the piecewise-constant control.
pub fn control_error<G>(space: &FeSpace, table: &PhysicalTable, u: &ControlField, exact: G) -> Result<f64>
where
    G: Fn(f64, f64) -> Result<f64>,
{
    let mut s = 0.0;
    for (&c, &v) in u.cells().iter().zip(u.values()) {
        let o = space.mesh.cell_origin(c);
        for q in 0..table.n_points() {
            let [xi, eta] = table.points[q];
            let e = v - exact(o[0] + xi * table.hx, o[1] + eta * table.hy)?;
            s += table.weights[q] * e * e;
        }
    }
    Ok(s.sqrt())
}

/// `‖ũ_h − ū‖_{L²(ω)}` for the post-processed control.
pub fn postprocessed_error<G>(
    space: &FeSpace,
    table: &PhysicalTable,
    post: &PostprocessedControl<'_>,
    cells: &[usize],
    exact: G,
) -> Result<f64>
where
    G: Fn(f64, f64) -> Result<f64>,
{
    let mut s = 0.0;
    for &c in cells {
        let o = space.mesh.cell_origin(c);
        for q in 0..table.n_points() {
            let [xi, eta] = table.points[q];
            let e = post.eval_in_cell(c, xi, eta)? - exact(o[0] + xi * table.hx, o[1] + eta * table.hy)?;
            s += table.weights[q] * e * e;
        }
    }
    Ok(s.sqrt())
}

/// Discrete `‖u_h − 𝒫_h ū‖_{L²(ω)}` with `𝒫_h` the centroid evaluation.
pub fn centroid_error<G>(space: &FeSpace, u: &ControlField, exact: G) -> Result<f64>
where
    G: Fn(f64, f64) -> Result<f64>,
{
    let mut s = 0.0;
    for (&c, &v) in u.cells().iter().zip(u.values()) {
        let [x, y] = space.mesh.centroid(c);
        let e = v - exact(x, y)?;
        s += e * e;
    }
    Ok((s * space.mesh.cell_area()).sqrt())
}

/// `δ_l = log(e_l/e_{l−1}) / log(h_l/h_{l−1})`; the first entry and entries touching a
/// non-positive error are `None`.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<Option<f64>>> {
    if errors.len() != hs.len() {
        return Err(Error::DimensionMismatch { expected: hs.len(), got: errors.len() });
    }
    if hs.iter().any(|&h| !(h > 0.0)) || hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("mesh sizes must be positive and strictly decreasing".into()));
    }
    let mut out = vec![None];
    for l in 1..errors.len() {
        let (e0, e1) = (errors[l - 1], errors[l]);
        out.push(if e0 > 0.0 && e1 > 0.0 && e0.is_finite() && e1.is_finite() {
            Some((e1 / e0).ln() / (hs[l] / hs[l - 1]).ln())
        } else {
            None
        });
    }
    if errors.is_empty() {
        out.clear();
    }
    Ok(out)
}

/// Error columns of a study, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Column {
    StateEnergy,
    AdjointEnergy,
    ControlL2,
    PostprocessedL2,
    CentroidL2,
    StateH1,
    StateL2,
    AdjointH1,
    AdjointL2,
}

impl Column {
    pub const ALL: [Column; 9] = [
        Column::StateEnergy,
        Column::AdjointEnergy,
        Column::ControlL2,
        Column::PostprocessedL2,
        Column::CentroidL2,
        Column::StateH1,
        Column::StateL2,
        Column::AdjointH1,
        Column::AdjointL2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Column::StateEnergy => "state_energy",
            Column::AdjointEnergy => "adjoint_energy",
            Column::ControlL2 => "control_l2",
            Column::PostprocessedL2 => "postprocessed_l2",
            Column::CentroidL2 => "centroid_l2",
            Column::StateH1 => "state_h1",
            Column::StateL2 => "state_l2",
            Column::AdjointH1 => "adjoint_h1",
            Column::AdjointL2 => "adjoint_l2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub level: u32,
    /// Free DOFs per scalar field.
    pub n_free: usize,
    pub h_ratio: f64,
    pub state: NormSet,
    pub adjoint: NormSet,
    pub control_l2: f64,
    pub postprocessed_l2: f64,
    pub centroid_l2: f64,
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    pub seconds: f64,
}

impl ErrorRecord {
    pub fn get(&self, c: Column) -> f64 {
        match c {
            Column::StateEnergy => self.state.h2_semi,
            Column::AdjointEnergy => self.adjoint.h2_semi,
            Column::ControlL2 => self.control_l2,
            Column::PostprocessedL2 => self.postprocessed_l2,
            Column::CentroidL2 => self.centroid_l2,
            Column::StateH1 => self.state.h1,
            Column::StateL2 => self.state.l2,
            Column::AdjointH1 => self.adjoint.h1,
            Column::AdjointL2 => self.adjoint.l2,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EocTable {
    pub records: Vec<ErrorRecord>,
}

impl EocTable {
    pub fn errors(&self, c: Column) -> Vec<f64> {
        self.records.iter().map(|r| r.get(c)).collect()
    }

    pub fn h_ratios(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.h_ratio).collect()
    }

    /// EOC column aligned with the records (first entry `None`).
    pub fn eoc(&self, c: Column) -> Vec<Option<f64>> {
        eoc(&self.errors(c), &self.h_ratios()).expect("levels are strictly increasing")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub omega: Region,
    pub pdas: PdasOptions,
    pub form_order: usize,
    pub load_order: usize,
    pub error_order: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            omega: Region::Whole,
            pdas: PdasOptions::default(),
            form_order: DEFAULT_FORM_ORDER,
            load_order: DEFAULT_LOAD_ORDER,
            error_order: DEFAULT_ERROR_ORDER,
        }
    }
}

/// Solved optimal-control problem on one level.
#[derive(Debug, Clone)]
pub struct LevelSolve {
    pub problem: VkProblem,
    pub solution: OcpSolution,
}

pub fn case_bounds(case: &CaseSpec) -> Result<Bounds> {
    Bounds::new(case.u_a, case.u_b, case.alpha)
}

/// Solves one level, optionally warm-started from a solve on a coarser nested mesh.
pub fn solve_level(case: &CaseSpec, level: u32, opts: &StudyOptions, coarse: Option<&LevelSolve>) -> Result<LevelSolve> {
    let bounds = case_bounds(case)?;
    let space = FeSpace::with_orders(build_mesh(case.domain, level)?, opts.form_order, opts.load_order)?;
    let problem = VkProblem::from_case(case, space)?;
    let space = &problem.space;
    let cells = cells_in_omega(&space.mesh, &opts.omega)?;
    let (u0, psi0) = match coarse {
        Some(prev) => {
            let cs = &prev.problem.space;
            let cu = &prev.solution.control;
            let mut coarse_val = vec![None; cs.mesh.n_cells()];
            for (&c, &v) in cu.cells().iter().zip(cu.values()) {
                coarse_val[c] = Some(v);
            }
            let vals = cells
                .iter()
                .map(|&c| {
                    let [x, y] = space.mesh.centroid(c);
                    cs.mesh.locate(x, y).and_then(|(k, _)| coarse_val[k]).unwrap_or(0.0)
                })
                .collect();
            let psi = PairField {
                first: space.prolongate(cs, &prev.solution.state.first),
                second: space.prolongate(cs, &prev.solution.state.second),
            };
            (ControlField::new(&space.mesh, cells, vals, &bounds)?, Some(psi))
        }
        None => {
            let n = cells.len();
            (ControlField::new(&space.mesh, cells, vec![0.0; n], &bounds)?, None)
        }
    };
    let solution = pdas_solve(&problem, u0, psi0.as_ref(), &opts.pdas)?;
    Ok(LevelSolve { problem, solution })
}

/// All error columns of a solved level.
pub fn level_errors(case: &CaseSpec, solved: &LevelSolve, opts: &StudyOptions) -> Result<ErrorRecord> {
    let space = &solved.problem.space;
    let sol = &solved.solution;
    let table = error_table(space, opts.error_order)?;
    let fields = |x: f64, y: f64| case.exact.fields(x, y);
    let state = field_errors(space, &table, [&sol.state.first, &sol.state.second], |x, y| {
        let f = fields(x, y)?;
        Ok([f[Field::Psi1.index()], f[Field::Psi2.index()]])
    })?;
    let adjoint = field_errors(space, &table, [&sol.adjoint.first, &sol.adjoint.second], |x, y| {
        let f = fields(x, y)?;
        Ok([f[Field::Theta1.index()], f[Field::Theta2.index()]])
    })?;
    let ubar = |x: f64, y: f64| case.control(x, y);
    let bounds = case_bounds(case)?;
    let post = PostprocessedControl::new(space, &sol.adjoint, &bounds, &opts.omega)?;
    Ok(ErrorRecord {
        level: space.mesh.level,
        n_free: space.n_free(),
        h_ratio: space.mesh.h_over_h0(),
        state,
        adjoint,
        control_l2: control_error(space, &table, &sol.control, ubar)?,
        postprocessed_l2: postprocessed_error(space, &table, &post, sol.control.cells(), ubar)?,
        centroid_l2: centroid_error(space, &sol.control, ubar)?,
        outer_iterations: sol.outer_iterations(),
        newton_iterations: sol.newton_iterations(),
        seconds: 0.0,
    })
}

/// Solves every level in `levels` with nested initial guesses and tabulates the errors.
pub fn run_study(case: &CaseSpec, levels: RangeInclusive<u32>, opts: &StudyOptions) -> Result<EocTable> {
    if levels.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "levels must be ascending, got {}..{}",
            levels.start(),
            levels.end()
        )));
    }
    let mut table = EocTable::default();
    let mut prev: Option<LevelSolve> = None;
    for level in levels {
        let t0 = Instant::now();
        let wrap = |e: Error| Error::AtLevel { level, source: Box::new(e) };
        let solved = solve_level(case, level, opts, prev.as_ref()).map_err(wrap)?;
        let mut rec = level_errors(case, &solved, opts).map_err(wrap)?;
        rec.seconds = t0.elapsed().as_secs_f64();
        info!(
            "{} level {level}: N = {}, energy error {:.6e}, control error {:.6e}, {} sweeps, {:.1} s",
            case.id, rec.n_free, rec.state.h2_semi, rec.control_l2, rec.outer_iterations, rec.seconds
        );
        table.records.push(rec);
        prev = Some(solved);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eoc_examples() {
        assert_eq!(eoc(&[4.0, 1.0], &[2.0, 1.0]).unwrap(), vec![None, Some(2.0)]);
        assert_eq!(eoc(&[1.0, 1.0], &[2.0, 1.0]).unwrap()[1], Some(0.0));
        let d = eoc(&[0.41295628, 0.10369078], &[0.25, 0.125]).unwrap()[1].unwrap();
        assert!((d - 1.993).abs() < 1e-3, "{d}");
    }

    #[test]
    fn eoc_flags_bad_entries() {
        let d = eoc(&[1.0, 0.0, 0.5], &[1.0, 0.5, 0.25]).unwrap();
        assert_eq!(d, vec![None, None, None]);
        assert!(eoc(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(eoc(&[1.0], &[1.0, 0.5]).is_err());
        assert!(eoc(&[], &[]).unwrap().is_empty());
    }

    #[test]
    fn zero_error_for_zero_fields() {
        let space = FeSpace::new(build_mesh(crate::mesh::Domain::UnitSquare, 1).unwrap()).unwrap();
        let t = error_table(&space, 7).unwrap();
        let z = PairField::zeros(space.n_free());
        let e = error_norm(&space, &t, &z, |_, _| Ok([Jet4::constant(0.0); 2]), Norm::H1).unwrap();
        assert_eq!(e, 0.0);
    }
}
