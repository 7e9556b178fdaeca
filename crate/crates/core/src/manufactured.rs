//! Manufactured optimal-control problems with known state, adjoint and control.
//!
//! Sources and observations are reverse-engineered from the exact fields so that
//! the optimality system holds exactly; all derivatives come from [`Jet4`].

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::{bracket, Jet4};
use crate::mesh::Domain;

/// Exact fields `(psi1, psi2, theta1, theta2)` as jets at a point.
pub trait ExactSolution: Send + Sync {
    fn fields(&self, x: f64, y: f64) -> Result<[Jet4; 4]>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Psi1,
    Psi2,
    Theta1,
    Theta2,
}

impl Field {
    pub fn index(self) -> usize {
        match self {
            Field::Psi1 => 0,
            Field::Psi2 => 1,
            Field::Theta1 => 2,
            Field::Theta2 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseId {
    Ex1,
    Ex2,
    Custom,
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseId::Ex1 => "ex1",
            CaseId::Ex2 => "ex2",
            CaseId::Custom => "custom",
        })
    }
}

#[derive(Clone)]
pub struct CaseSpec {
    pub id: CaseId,
    pub domain: Domain,
    pub alpha: f64,
    pub u_a: f64,
    pub u_b: f64,
    /// Regularity index of the corner singularity (L-shaped case only).
    pub gamma: Option<f64>,
    pub exact: Arc<dyn ExactSolution>,
}

impl fmt::Debug for CaseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CaseSpec")
            .field("id", &self.id)
            .field("domain", &self.domain)
            .field("alpha", &self.alpha)
            .field("u_a", &self.u_a)
            .field("u_b", &self.u_b)
            .field("gamma", &self.gamma)
            .finish()
    }
}

/// `psi1 = psi2 = sin^2(pi x) sin^2(pi y)`, `theta1 = theta2 = x^2 y^2 (1-x)^2 (1-y)^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquareSolution;

impl ExactSolution for SquareSolution {
    fn fields(&self, x: f64, y: f64) -> Result<[Jet4; 4]> {
        let (jx, jy) = Jet4::coords(x, y);
        let pi = std::f64::consts::PI;
        let sx = jx.scale(pi).sin();
        let sy = jy.scale(pi).sin();
        let psi = sx * sx * sy * sy;
        let px = jx * (-jx).add_scalar(1.0);
        let py = jy * (-jy).add_scalar(1.0);
        let theta = px * px * py * py;
        Ok([psi, psi, theta, theta])
    }
}

/// Corner-singular field `(x^2-1)^2 (y^2-1)^2 r^{1+gamma} g(theta)` on the L-shape,
/// used for all four fields.
#[derive(Debug, Clone, Copy)]
pub struct LShapeSolution {
    pub gamma: f64,
    pub omega: f64,
}

impl LShapeSolution {
    fn angular(&self, t: &Jet4) -> Jet4 {
        let (g, w) = (self.gamma, self.omega);
        let a = ((g - 1.0) * w).sin() / (g - 1.0) - ((g + 1.0) * w).sin() / (g + 1.0);
        let b = ((g - 1.0) * w).cos() - ((g + 1.0) * w).cos();
        let cos_part = t.scale(g - 1.0).cos() - t.scale(g + 1.0).cos();
        let sin_part = t.scale(g - 1.0).sin().scale(1.0 / (g - 1.0))
            - t.scale(g + 1.0).sin().scale(1.0 / (g + 1.0));
        cos_part.scale(a) - sin_part.scale(b)
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<Jet4> {
        if x == 0.0 && y == 0.0 {
            return Err(Error::JetDomain("singular corner (0, 0)".into()));
        }
        let (jx, jy) = Jet4::coords(x, y);
        let r2 = jx * jx + jy * jy;
        let radial = r2.ln()?.scale(0.5 * (1.0 + self.gamma)).exp();
        let two_pi = 2.0 * std::f64::consts::PI;
        let theta = Jet4::atan2_with(&jy, &jx, |t| if t < 0.0 { t + two_pi } else { t })?;
        let cx = (jx * jx).add_scalar(-1.0);
        let cy = (jy * jy).add_scalar(-1.0);
        Ok(cx * cx * cy * cy * radial * self.angular(&theta))
    }
}

impl ExactSolution for LShapeSolution {
    fn fields(&self, x: f64, y: f64) -> Result<[Jet4; 4]> {
        let v = self.eval(x, y)?;
        Ok([v; 4])
    }
}

/// Residual `sin^2(gamma w) - gamma^2 sin^2(w)` of the corner-exponent equation.
pub fn gamma_residual(gamma: f64, omega: f64) -> f64 {
    (gamma * omega).sin().powi(2) - gamma * gamma * omega.sin().powi(2)
}

/// Root of [`gamma_residual`] in `(0.5, 0.6)` by bisection.
pub fn gamma_root(omega: f64) -> Result<f64> {
    gamma_root_in(omega, 0.5, 0.6)
}

pub fn gamma_root_in(omega: f64, lo: f64, hi: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (gamma_residual(a, omega), gamma_residual(b, omega));
    if fa * fb > 0.0 {
        return Err(Error::NoBracket { lo, hi });
    }
    while b - a > 1e-15 {
        let m = 0.5 * (a + b);
        let fm = gamma_residual(m, omega);
        if fm == 0.0 {
            return Ok(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}

impl CaseSpec {
    /// Unit square, `alpha = 1e-5`, bounds `[-750, -50]`.
    pub fn ex1() -> Self {
        CaseSpec {
            id: CaseId::Ex1,
            domain: Domain::UnitSquare,
            alpha: 1e-5,
            u_a: -750.0,
            u_b: -50.0,
            gamma: None,
            exact: Arc::new(SquareSolution),
        }
    }

    /// L-shaped domain, `alpha = 1e-3`, bounds `[-600, -50]`.
    pub fn ex2() -> Self {
        let omega = 1.5 * std::f64::consts::PI;
        let gamma = gamma_root(omega).expect("bracket (0.5, 0.6) contains the 3pi/2 root");
        CaseSpec {
            id: CaseId::Ex2,
            domain: Domain::LShape,
            alpha: 1e-3,
            u_a: -600.0,
            u_b: -50.0,
            gamma: Some(gamma),
            exact: Arc::new(LShapeSolution { gamma, omega }),
        }
    }

    pub fn custom(domain: Domain, alpha: f64, u_a: f64, u_b: f64, exact: Arc<dyn ExactSolution>) -> Self {
        CaseSpec { id: CaseId::Custom, domain, alpha, u_a, u_b, gamma: None, exact }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "ex1" => Some(Self::ex1()),
            "ex2" => Some(Self::ex2()),
            _ => None,
        }
    }

    pub fn project(&self, v: f64) -> f64 {
        v.clamp(self.u_a, self.u_b)
    }

    /// Exact control `clamp(-theta1 / alpha)`.
    pub fn control(&self, x: f64, y: f64) -> Result<f64> {
        let th = exact_eval(self, Field::Theta1, x, y)?;
        Ok(self.project(-th.value() / self.alpha))
    }
}

pub fn exact_eval(case: &CaseSpec, field: Field, x: f64, y: f64) -> Result<Jet4> {
    Ok(case.exact.fields(x, y)?[field.index()])
}

/// Data of the manufactured problem at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointData {
    /// Load of the displacement equation.
    pub f: f64,
    /// Load of the Airy-stress equation.
    pub f_tilde: f64,
    pub psi1_d: f64,
    pub psi2_d: f64,
    pub u_bar: f64,
}

pub fn sources_and_observations(case: &CaseSpec, x: f64, y: f64) -> Result<PointData> {
    let [p1, p2, t1, t2] = case.exact.fields(x, y)?;
    let u_bar = case.project(-t1.value() / case.alpha);
    Ok(PointData {
        f: p1.bilaplacian() - bracket(&p1, &p2) - u_bar,
        f_tilde: p2.bilaplacian() + 0.5 * bracket(&p1, &p1),
        psi1_d: p1.value() - t1.bilaplacian() + bracket(&p2, &t1) - bracket(&p1, &t2),
        psi2_d: p2.value() - t2.bilaplacian() + bracket(&p1, &t1),
        u_bar,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_root_value() {
        let w = 1.5 * std::f64::consts::PI;
        let g = gamma_root(w).unwrap();
        assert!((g - 0.5444837367).abs() < 1e-9, "{g}");
        assert!(gamma_residual(g, w).abs() <= 1e-11);
        assert!(gamma_residual(0.5, w) * gamma_residual(0.6, w) < 0.0);
    }

    #[test]
    fn gamma_no_bracket() {
        assert!(matches!(gamma_root_in(1.5 * std::f64::consts::PI, 0.1, 0.2), Err(Error::NoBracket { .. })));
    }

    #[test]
    fn ex1_centre_values() {
        let c = CaseSpec::ex1();
        let p = exact_eval(&c, Field::Psi1, 0.5, 0.5).unwrap();
        assert!((p.value() - 1.0).abs() < 1e-15);
        assert!(p.dx().abs() < 1e-14 && p.dy().abs() < 1e-14);
        let t = exact_eval(&c, Field::Theta1, 0.5, 0.5).unwrap();
        assert!((t.value() - 0.00390625).abs() < 1e-17);
    }

    #[test]
    fn ex1_control_values() {
        let c = CaseSpec::ex1();
        let d = sources_and_observations(&c, 0.5, 0.5).unwrap();
        assert!((d.u_bar + 390.625).abs() < 1e-10);
        // theta1 < 5e-4 near the boundary: upper bound active
        let t = exact_eval(&c, Field::Theta1, 0.05, 0.5).unwrap().value();
        assert!(t < 5e-4);
        assert_eq!(c.control(0.05, 0.5).unwrap(), -50.0);
    }

    #[test]
    fn ex1_observation_brackets_cancel_at_centre() {
        let c = CaseSpec::ex1();
        let d = sources_and_observations(&c, 0.5, 0.5).unwrap();
        let [p1, _, t1, _] = c.exact.fields(0.5, 0.5).unwrap();
        assert!((d.psi1_d - (p1.value() - t1.bilaplacian())).abs() < 1e-12);
    }

    #[test]
    fn ex2_singular_corner_rejected() {
        let c = CaseSpec::ex2();
        assert!(exact_eval(&c, Field::Psi1, 0.0, 0.0).is_err());
    }

    #[test]
    fn ex2_vanishes_on_reentrant_edges() {
        let s = LShapeSolution { gamma: CaseSpec::ex2().gamma.unwrap(), omega: 1.5 * std::f64::consts::PI };
        // theta = 0 (positive x axis) and theta = 3pi/2 (negative y axis): value and gradient vanish
        for &(x, y) in &[(0.4, 1e-300), (0.7, 1e-300)] {
            let v = s.eval(x, y).unwrap();
            assert!(v.value().abs() < 1e-12 && v.dy().abs() < 1e-10, "{:?}", (v.value(), v.dy()));
        }
        for &y in &[-0.3, -0.8] {
            let v = s.eval(-1e-300, y).unwrap();
            assert!(v.value().abs() < 1e-10 && v.dx().abs() < 1e-9, "{:?}", (v.value(), v.dx()));
        }
    }
}
