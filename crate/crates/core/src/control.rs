//! Piecewise-constant controls, the reduced cost and its gradient, and the
//! primal-dual active-set iteration for the box-constrained problem.

use log::{debug, info};

use crate::assembly::{FeSpace, PairField};
use crate::error::{Error, Result};
use crate::mesh::{cells_in_omega, Region, RectMesh};
use crate::solver::{solve_adjoint, solve_state, NewtonOptions, SolveReport, VkProblem};
use crate::sparse::dot;

/// Box `[u_a, u_b]` and Tikhonov weight `alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub u_a: f64,
    pub u_b: f64,
    pub alpha: f64,
}

impl Bounds {
    pub fn new(u_a: f64, u_b: f64, alpha: f64) -> Result<Self> {
        if !(u_a.is_finite() && u_b.is_finite()) || u_a > u_b {
            return Err(Error::InvalidBounds(format!("need finite u_a <= u_b, got [{u_a}, {u_b}]")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidBounds(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Bounds { u_a, u_b, alpha })
    }

    pub fn project(&self, v: f64) -> f64 {
        v.clamp(self.u_a, self.u_b)
    }
}

/// Which bound a cell value sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activity {
    Lower,
    Inactive,
    Upper,
}

/// Cellwise-constant admissible control on the cells of `ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlField {
    cells: Vec<usize>,
    values: Vec<f64>,
    bounds: Bounds,
    cell_area: f64,
}

impl ControlField {
    /// Values are projected onto the box.
    pub fn new(mesh: &RectMesh, cells: Vec<usize>, values: Vec<f64>, bounds: &Bounds) -> Result<Self> {
        if cells.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: cells.len(), got: values.len() });
        }
        if let Some(&c) = cells.iter().find(|&&c| c >= mesh.n_cells()) {
            return Err(Error::InvalidArgument(format!("cell {c} not in mesh")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite control value".into()));
        }
        let values = values.into_iter().map(|v| bounds.project(v)).collect();
        Ok(ControlField { cells, values, bounds: *bounds, cell_area: mesh.cell_area() })
    }

    pub fn constant(mesh: &RectMesh, omega: &Region, value: f64, bounds: &Bounds) -> Result<Self> {
        let cells = cells_in_omega(mesh, omega)?;
        let n = cells.len();
        Self::new(mesh, cells, vec![value; n], bounds)
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Same cells, new values (projected).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.cells.len() {
            return Err(Error::DimensionMismatch { expected: self.cells.len(), got: values.len() });
        }
        let values = values.into_iter().map(|v| self.bounds.project(v)).collect();
        Ok(ControlField { values, ..self.clone() })
    }

    pub fn activity(&self) -> Vec<Activity> {
        self.values
            .iter()
            .map(|&v| {
                if v <= self.bounds.u_a {
                    Activity::Lower
                } else if v >= self.bounds.u_b {
                    Activity::Upper
                } else {
                    Activity::Inactive
                }
            })
            .collect()
    }

    /// Numbers of cells on the lower and the upper bound.
    pub fn active_counts(&self) -> (usize, usize) {
        let a = self.activity();
        (
            a.iter().filter(|&&s| s == Activity::Lower).count(),
            a.iter().filter(|&&s| s == Activity::Upper).count(),
        )
    }

    /// `α/2 ‖u‖²_{L²(ω)}`
    pub fn tikhonov(&self) -> f64 {
        0.5 * self.bounds.alpha * self.cell_area * self.values.iter().map(|v| v * v).sum::<f64>()
    }
}

/// Reduced cost `½‖Ψ_h − Ψ_d‖² + α/2 ‖u‖²`.
///
/// The tracking term is expanded as `½ΨᵀMΨ − Ψᵀ(Ψ_d, Φ) + ½‖Ψ_d‖²`, which is exactly the
/// functional whose derivative the discrete adjoint computes.
pub fn cost(problem: &VkProblem, psi: &PairField, u: &ControlField) -> f64 {
    let mut j = 0.5 * problem.obs_norm2 + u.tikhonov();
    for (p, obs) in [(&psi.first.0, &problem.obs_load[0]), (&psi.second.0, &problem.obs_load[1])] {
        j += 0.5 * problem.mass.bilinear(p, p) - dot(p, obs);
    }
    j
}

/// Cell mean of a scalar field, `|T|⁻¹ ∫_T θ`.
pub fn cell_mean(space: &FeSpace, field: &[f64], cell: usize) -> f64 {
    let local = space.local(field, cell);
    let w = space.cell_integrals();
    local.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / space.mesh.cell_area()
}

/// `-mean_T(θ₁)/α` on every control cell, before projection.
pub fn unprojected_update(space: &FeSpace, theta: &PairField, u: &ControlField) -> Vec<f64> {
    let alpha = u.bounds().alpha;
    u.cells().iter().map(|&c| -cell_mean(space, &theta.first.0, c) / alpha).collect()
}

/// Gradient of the reduced cost with respect to the cell values:
/// `g_T = |T| (α u_T + mean_T θ₁)`.
pub fn reduced_gradient(space: &FeSpace, u: &ControlField, theta: &PairField) -> Vec<f64> {
    let area = space.mesh.cell_area();
    let alpha = u.bounds().alpha;
    u.cells()
        .iter()
        .zip(u.values())
        .map(|(&c, &v)| area * (alpha * v + cell_mean(space, &theta.first.0, c)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdasOptions {
    /// Stop when the update changes no cell value by more than `tol_u * max(1, max|u|)`.
    pub tol_u: f64,
    pub max_outer: usize,
    /// Damping of the fixed-point update, in `(0, 1]`.
    pub relaxation: f64,
    pub newton: NewtonOptions,
}

impl Default for PdasOptions {
    fn default() -> Self {
        PdasOptions { tol_u: 1e-9, max_outer: 60, relaxation: 1.0, newton: NewtonOptions::default() }
    }
}

/// One outer iteration of the active-set loop.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub cost: f64,
    /// `max_T |u_new − u|`
    pub change: f64,
    pub lower: usize,
    pub upper: usize,
    pub newton: SolveReport,
}

#[derive(Debug, Clone)]
pub struct OcpSolution {
    pub control: ControlField,
    pub state: PairField,
    pub adjoint: PairField,
    pub cost: f64,
    pub history: Vec<OuterRecord>,
}

impl OcpSolution {
    pub fn outer_iterations(&self) -> usize {
        self.history.len()
    }

    pub fn newton_iterations(&self) -> usize {
        self.history.iter().map(|r| r.newton.iterations).sum()
    }
}

/// Primal-dual active-set fixed point `u ← P_[u_a,u_b](−mean θ₁/α)`.
///
/// Each sweep solves the state (Newton, warm-started from the previous sweep or from
/// `psi_guess`) and the adjoint, then updates the control. Terminates when the active
/// sets repeat and the update is below `tol_u` (relative to the control magnitude, as
/// the adjoint carries the rounding floor of the state solve); the returned control is the one the
/// returned state and adjoint belong to.
pub fn pdas_solve(
    problem: &VkProblem,
    initial: ControlField,
    psi_guess: Option<&PairField>,
    opts: &PdasOptions,
) -> Result<OcpSolution> {
    if !(opts.relaxation > 0.0 && opts.relaxation <= 1.0) {
        return Err(Error::InvalidArgument(format!("relaxation {} not in (0, 1]", opts.relaxation)));
    }
    let space = &problem.space;
    let mut u = initial;
    let mut guess = psi_guess.cloned();
    let mut history: Vec<OuterRecord> = Vec::new();
    loop {
        let (psi, newton) = match solve_state(problem, &u, guess.as_ref(), &opts.newton) {
            Ok(r) => r,
            // a warm start that fails is retried from zero before giving up
            Err(Error::NewtonDiverged { .. }) if guess.is_some() => {
                solve_state(problem, &u, None, &opts.newton)?
            }
            Err(e) => return Err(e),
        };
        let theta = solve_adjoint(problem, &psi)?;
        let j = cost(problem, &psi, &u);
        let target = unprojected_update(space, &theta, &u);
        let new_vals: Vec<f64> = u
            .values()
            .iter()
            .zip(&target)
            .map(|(&v, &t)| v + opts.relaxation * (u.bounds().project(t) - v))
            .collect();
        let next = u.with_values(new_vals)?;
        let change = u.values().iter().zip(next.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let (lower, upper) = u.active_counts();
        debug!("pdas sweep {}: J = {j:.12e}, change = {change:.3e}, active {lower}/{upper}", history.len() + 1);
        history.push(OuterRecord { cost: j, change, lower, upper, newton });
        let u_scale = u.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if change <= opts.tol_u * u_scale && u.activity() == next.activity() {
            info!("pdas converged in {} sweeps, J = {j:.12e}", history.len());
            return Ok(OcpSolution { control: u, state: psi, adjoint: theta, cost: j, history });
        }
        if history.len() >= opts.max_outer {
            return Err(Error::PdasDiverged {
                iterations: history.len(),
                last_change: change,
                active_history: history.iter().map(|r| (r.lower, r.upper)).collect(),
            });
        }
        u = next;
        guess = Some(psi);
    }
}

/// Post-processed control `P_[u_a,u_b](−θ₁ₕ(x)/α)`, defined on `ω` only.
#[derive(Debug, Clone)]
pub struct PostprocessedControl<'a> {
    space: &'a FeSpace,
    theta1: &'a [f64],
    bounds: Bounds,
    in_omega: Vec<bool>,
}

impl<'a> PostprocessedControl<'a> {
    pub fn new(space: &'a FeSpace, theta: &'a PairField, bounds: &Bounds, omega: &Region) -> Result<Self> {
        let mut in_omega = vec![false; space.mesh.n_cells()];
        for c in cells_in_omega(&space.mesh, omega)? {
            in_omega[c] = true;
        }
        Ok(PostprocessedControl { space, theta1: &theta.first.0, bounds: *bounds, in_omega })
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        match self.space.mesh.locate(x, y) {
            Some((c, [xi, eta])) if self.in_omega[c] => {
                let d = self.space.evaluate_in_cell(self.theta1, c, xi, eta);
                Ok(self.bounds.project(-d.v / self.bounds.alpha))
            }
            _ => Err(Error::OutsideControlRegion(x, y)),
        }
    }

    /// Evaluation with a known cell and reference coordinates (quadrature loops).
    pub fn eval_in_cell(&self, cell: usize, xi: f64, eta: f64) -> Result<f64> {
        if !self.in_omega[cell] {
            let o = self.space.mesh.cell_origin(cell);
            return Err(Error::OutsideControlRegion(o[0], o[1]));
        }
        let d = self.space.evaluate_in_cell(self.theta1, cell, xi, eta);
        Ok(self.bounds.project(-d.v / self.bounds.alpha))
    }
}

/// Cell-centroid samples of `g` on the given cells.
pub fn centroid_project<G: Fn(f64, f64) -> Result<f64>>(mesh: &RectMesh, cells: &[usize], g: G) -> Result<Vec<f64>> {
    cells
        .iter()
        .map(|&c| {
            let [x, y] = mesh.centroid(c);
            g(x, y)
        })
        .collect()
}
