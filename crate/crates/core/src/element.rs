//! Bogner-Fox-Schmit bicubic Hermite element on the reference square `[0,1]^2`
//! and tensor-product Gauss-Legendre quadrature.
//!
//! Local basis function `4 * node + kind`, with nodes counterclockwise from the
//! lower-left corner and kinds `(v, dx, dy, dxy)`.

use crate::error::{Error, Result};

pub const N_LOCAL: usize = 16;

/// Reference coordinates of the four local nodes.
pub const NODE_REF: [[usize; 2]; 4] = [[0, 0], [1, 0], [1, 1], [0, 1]];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    Value,
    Dx,
    Dy,
    Dxy,
}

impl DofKind {
    pub const ALL: [DofKind; 4] = [DofKind::Value, DofKind::Dx, DofKind::Dy, DofKind::Dxy];

    pub fn of_local(f: usize) -> DofKind {
        Self::ALL[f % 4]
    }

    fn slope_in_x(self) -> bool {
        matches!(self, DofKind::Dx | DofKind::Dxy)
    }

    fn slope_in_y(self) -> bool {
        matches!(self, DofKind::Dy | DofKind::Dxy)
    }

    /// Factor turning the reference basis function into the physical one.
    pub fn scale(self, hx: f64, hy: f64) -> f64 {
        match self {
            DofKind::Value => 1.0,
            DofKind::Dx => hx,
            DofKind::Dy => hy,
            DofKind::Dxy => hx * hy,
        }
    }
}

/// Cubic Hermite basis on `[0,1]`: value-left, slope-left, value-right, slope-right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hermite1d {
    pub val: [f64; 4],
    pub d1: [f64; 4],
    pub d2: [f64; 4],
}

pub fn hermite1d(t: f64) -> Hermite1d {
    let t2 = t * t;
    let t3 = t2 * t;
    Hermite1d {
        val: [
            1.0 - 3.0 * t2 + 2.0 * t3,
            t - 2.0 * t2 + t3,
            3.0 * t2 - 2.0 * t3,
            -t2 + t3,
        ],
        d1: [
            -6.0 * t + 6.0 * t2,
            1.0 - 4.0 * t + 3.0 * t2,
            6.0 * t - 6.0 * t2,
            -2.0 * t + 3.0 * t2,
        ],
        d2: [-6.0 + 12.0 * t, -4.0 + 6.0 * t, 6.0 - 12.0 * t, -2.0 + 6.0 * t],
    }
}

/// Value and derivatives through second order of one basis function at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Derivs {
    pub v: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

impl Derivs {
    pub fn axpy(&mut self, a: f64, o: &Derivs) {
        self.v += a * o.v;
        self.dx += a * o.dx;
        self.dy += a * o.dy;
        self.dxx += a * o.dxx;
        self.dxy += a * o.dxy;
        self.dyy += a * o.dyy;
    }
}

/// Reference basis function `f` (no Hermite scaling) at `(xi, eta)`.
pub fn reference_basis(f: usize, bx: &Hermite1d, by: &Hermite1d) -> Derivs {
    let node = NODE_REF[f / 4];
    let kind = DofKind::of_local(f);
    let ix = 2 * node[0] + usize::from(kind.slope_in_x());
    let iy = 2 * node[1] + usize::from(kind.slope_in_y());
    Derivs {
        v: bx.val[ix] * by.val[iy],
        dx: bx.d1[ix] * by.val[iy],
        dy: bx.val[ix] * by.d1[iy],
        dxx: bx.d2[ix] * by.val[iy],
        dxy: bx.d1[ix] * by.d1[iy],
        dyy: bx.val[ix] * by.d2[iy],
    }
}

/// All 16 physical basis functions of a `hx x hy` cell at reference point `(xi, eta)`.
pub fn physical_basis(xi: f64, eta: f64, hx: f64, hy: f64) -> [Derivs; N_LOCAL] {
    let bx = hermite1d(xi);
    let by = hermite1d(eta);
    std::array::from_fn(|f| scale_to_physical(f, &reference_basis(f, &bx, &by), hx, hy))
}

fn scale_to_physical(f: usize, r: &Derivs, hx: f64, hy: f64) -> Derivs {
    let s = DofKind::of_local(f).scale(hx, hy);
    Derivs {
        v: s * r.v,
        dx: s * r.dx / hx,
        dy: s * r.dy / hy,
        dxx: s * r.dxx / (hx * hx),
        dxy: s * r.dxy / (hx * hy),
        dyy: s * r.dyy / (hy * hy),
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub n: usize,
    /// Reference points in `[0,1]^2`.
    pub points: Vec<[f64; 2]>,
    /// Weights summing to one.
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// 1D Gauss-Legendre rule with `n` points mapped to `[0,1]`.
pub fn gauss_1d(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(1..=12).contains(&n) {
        return Err(Error::QuadratureOrder(n));
    }
    let (x, w) = gauss_legendre(n);
    Ok((
        x.iter().map(|&t| 0.5 * (1.0 + t)).collect(),
        w.iter().map(|&v| 0.5 * v).collect(),
    ))
}

/// Tensor-product Gauss rule with `n` points per direction on `[0,1]^2`.
pub fn gauss_rule(n: usize) -> Result<QuadratureRule> {
    let (x, w) = gauss_1d(n)?;
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            points.push([x[i], x[j]]);
            weights.push(w[i] * w[j]);
        }
    }
    Ok(QuadratureRule { n, points, weights })
}

/// Reference basis values and derivatives at the points of a rule.
#[derive(Debug, Clone)]
pub struct ShapeTable {
    pub rule: QuadratureRule,
    /// `table[q][f]`
    pub table: Vec<[Derivs; N_LOCAL]>,
}

pub fn tabulate(rule: &QuadratureRule) -> ShapeTable {
    let table = rule
        .points
        .iter()
        .map(|&[xi, eta]| {
            let bx = hermite1d(xi);
            let by = hermite1d(eta);
            std::array::from_fn(|f| reference_basis(f, &bx, &by))
        })
        .collect();
    ShapeTable { rule: rule.clone(), table }
}

impl ShapeTable {
    /// Physical basis functions on a `hx x hy` cell, with weights scaled by the cell area.
    pub fn physical(&self, hx: f64, hy: f64) -> PhysicalTable {
        let table = self
            .table
            .iter()
            .map(|row| std::array::from_fn(|f| scale_to_physical(f, &row[f], hx, hy)))
            .collect();
        PhysicalTable {
            points: self.rule.points.clone(),
            weights: self.rule.weights.iter().map(|w| w * hx * hy).collect(),
            table,
            hx,
            hy,
        }
    }
}

/// Basis functions of one congruent physical cell at the quadrature points.
#[derive(Debug, Clone)]
pub struct PhysicalTable {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub table: Vec<[Derivs; N_LOCAL]>,
    pub hx: f64,
    pub hy: f64,
}

impl PhysicalTable {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// Field derivatives at quadrature point `q` from 16 local coefficients.
    #[inline]
    pub fn eval(&self, q: usize, coeffs: &[f64; N_LOCAL]) -> Derivs {
        let mut d = Derivs::default();
        for (c, phi) in coeffs.iter().zip(&self.table[q]) {
            if *c != 0.0 {
                d.axpy(*c, phi);
            }
        }
        d
    }
}

/// Local BFS interpolation coefficients on the cell with lower-left corner `origin`.
///
/// `nodal` returns `(v, dx, dy, dxy)` of the interpolated function at a point.
pub fn interpolate_cell<F>(origin: [f64; 2], hx: f64, hy: f64, nodal: F) -> [f64; N_LOCAL]
where
    F: Fn(f64, f64) -> [f64; 4],
{
    let mut c = [0.0; N_LOCAL];
    for (a, r) in NODE_REF.iter().enumerate() {
        let vals = nodal(origin[0] + r[0] as f64 * hx, origin[1] + r[1] as f64 * hy);
        c[4 * a..4 * a + 4].copy_from_slice(&vals);
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_endpoints() {
        let h0 = hermite1d(0.0);
        assert_eq!(h0.val, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(h0.d1, [0.0, 1.0, 0.0, 0.0]);
        let h1 = hermite1d(1.0);
        assert_eq!(h1.val, [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(h1.d1, [0.0, 0.0, 0.0, 1.0]);
        let h = hermite1d(0.5);
        assert_eq!(h.val[0], 0.5);
        assert_eq!(h.val[1], 0.125);
    }

    #[test]
    fn gauss_small_rules() {
        let r1 = gauss_rule(1).unwrap();
        assert_eq!(r1.points, vec![[0.5, 0.5]]);
        assert!((r1.weights[0] - 1.0).abs() < 1e-15);
        let (x, _) = gauss_1d(2).unwrap();
        let d = 0.5 / 3f64.sqrt();
        assert!((x[0] - (0.5 - d)).abs() < 1e-15);
        assert!((x[1] - (0.5 + d)).abs() < 1e-15);
        assert!(gauss_rule(0).is_err());
        assert!(gauss_rule(13).is_err());
    }

    #[test]
    fn gauss_exactness() {
        let (x, w) = gauss_1d(4).unwrap();
        let v: f64 = x.iter().zip(&w).map(|(t, w)| w * t.powi(6)).sum();
        assert!((v - 1.0 / 7.0).abs() < 1e-14);
        for n in 1..=12 {
            let (x, w) = gauss_1d(n).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let deg = 2 * n - 1;
            let v: f64 = x.iter().zip(&w).map(|(t, w)| w * t.powi(deg as i32)).sum();
            assert!((v - 1.0 / (deg + 1) as f64).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn kronecker_property() {
        // nodal functionals of each physical basis function on a non-square cell
        let (hx, hy) = (0.3, 0.7);
        for f in 0..N_LOCAL {
            for (a, r) in NODE_REF.iter().enumerate() {
                let b = physical_basis(r[0] as f64, r[1] as f64, hx, hy);
                let d = b[f];
                let functionals = [d.v, d.dx, d.dy, d.dxy];
                for (k, val) in functionals.iter().enumerate() {
                    let expect = if f == 4 * a + k { 1.0 } else { 0.0 };
                    assert!((val - expect).abs() < 1e-14, "f={f} node={a} kind={k}: {val}");
                }
            }
        }
    }

    #[test]
    fn value_functions_partition_unity() {
        let t = tabulate(&gauss_rule(5).unwrap());
        for row in &t.table {
            let s: f64 = (0..4).map(|a| row[4 * a].v).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    fn poly_interp_error(p: impl Fn(f64, f64) -> [f64; 4] + Copy, pv: impl Fn(f64, f64) -> f64) -> f64 {
        let (origin, hx, hy) = ([0.2, 0.1], 0.5, 0.4);
        let c = interpolate_cell(origin, hx, hy, p);
        let tab = tabulate(&gauss_rule(5).unwrap()).physical(hx, hy);
        let mut err: f64 = 0.0;
        for q in 0..tab.n_points() {
            let d = tab.eval(q, &c);
            let [xi, eta] = tab.points[q];
            let exact = pv(origin[0] + xi * hx, origin[1] + eta * hy);
            err = err.max((d.v - exact).abs() / exact.abs().max(1e-300));
        }
        err
    }

    #[test]
    fn q3_reproduction() {
        let e = poly_interp_error(
            |x, y| [x.powi(3) * y.powi(3), 3.0 * x * x * y.powi(3), 3.0 * x.powi(3) * y * y, 9.0 * x * x * y * y],
            |x, y| x.powi(3) * y.powi(3),
        );
        assert!(e < 1e-13, "{e}");
    }

    #[test]
    fn quartic_not_reproduced() {
        let e = poly_interp_error(|x, _| [x.powi(4), 4.0 * x.powi(3), 0.0, 0.0], |x, _| x.powi(4));
        assert!(e > 1e-6);
    }

    #[test]
    fn second_derivatives_match_finite_differences() {
        let (hx, hy) = (1.0, 1.0);
        let step = 1e-4;
        for &(xi, eta) in &[(0.3, 0.6), (0.71, 0.15), (0.5, 0.5)] {
            let c = physical_basis(xi, eta, hx, hy);
            let px = physical_basis(xi + step, eta, hx, hy);
            let mx = physical_basis(xi - step, eta, hx, hy);
            let py = physical_basis(xi, eta + step, hx, hy);
            let my = physical_basis(xi, eta - step, hx, hy);
            for f in 0..N_LOCAL {
                let dxx = (px[f].v - 2.0 * c[f].v + mx[f].v) / (step * step);
                let dyy = (py[f].v - 2.0 * c[f].v + my[f].v) / (step * step);
                let dxy = (py[f].dx - my[f].dx) / (2.0 * step);
                let dx = (px[f].v - mx[f].v) / (2.0 * step);
                assert!((dxx - c[f].dxx).abs() < 1e-6);
                assert!((dyy - c[f].dyy).abs() < 1e-6);
                assert!((dxy - c[f].dxy).abs() < 1e-6);
                assert!((dx - c[f].dx).abs() < 1e-6);
            }
        }
    }
}
