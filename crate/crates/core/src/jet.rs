//! Bivariate truncated Taylor series ("jets") to total degree 4.
//!
//! A [`Jet4`] at a point stores `∂^{i+j} f / ∂x^i ∂y^j / (i! j!)` for `i + j <= 4`.
//! Arithmetic follows the truncated product rule; elementary functions are
//! applied by composing their univariate Taylor expansion with the jet.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

pub const ORDER: usize = 4;
pub const LEN: usize = 15;

#[inline]
const fn idx(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

const FACT: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet4 {
    c: [f64; LEN],
}

impl Default for Jet4 {
    fn default() -> Self {
        Self::constant(0.0)
    }
}

impl Jet4 {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = v;
        Jet4 { c }
    }

    /// The coordinate function `x` expanded at `x0`.
    pub fn var_x(x0: f64) -> Self {
        let mut j = Self::constant(x0);
        j.c[idx(1, 0)] = 1.0;
        j
    }

    /// The coordinate function `y` expanded at `y0`.
    pub fn var_y(y0: f64) -> Self {
        let mut j = Self::constant(y0);
        j.c[idx(0, 1)] = 1.0;
        j
    }

    /// Both coordinate jets at `(x0, y0)`.
    pub fn coords(x0: f64, y0: f64) -> (Self, Self) {
        (Self::var_x(x0), Self::var_y(y0))
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Taylor coefficient of `x^i y^j`.
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        assert!(i + j <= ORDER);
        self.c[idx(i, j)]
    }

    /// Partial derivative `∂^{i+j} f / ∂x^i ∂y^j`.
    pub fn deriv(&self, i: usize, j: usize) -> f64 {
        self.coeff(i, j) * FACT[i] * FACT[j]
    }

    pub fn dx(&self) -> f64 {
        self.deriv(1, 0)
    }
    pub fn dy(&self) -> f64 {
        self.deriv(0, 1)
    }
    pub fn dxx(&self) -> f64 {
        self.deriv(2, 0)
    }
    pub fn dxy(&self) -> f64 {
        self.deriv(1, 1)
    }
    pub fn dyy(&self) -> f64 {
        self.deriv(0, 2)
    }

    /// `f_xxxx + 2 f_xxyy + f_yyyy`
    pub fn bilaplacian(&self) -> f64 {
        self.deriv(4, 0) + 2.0 * self.deriv(2, 2) + self.deriv(0, 4)
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }

    pub fn scale(&self, s: f64) -> Self {
        Jet4 { c: self.c.map(|v| v * s) }
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut r = *self;
        r.c[0] += s;
        r
    }

    /// `sum_k coeffs[k] * (self - self.value())^k`, with `coeffs[k] = f^(k)(a) / k!`.
    fn compose(&self, coeffs: [f64; ORDER + 1]) -> Self {
        let mut h = *self;
        h.c[0] = 0.0;
        let mut out = Jet4::constant(coeffs[0]);
        let mut power = Jet4::constant(1.0);
        for &ck in &coeffs[1..] {
            power = power * h;
            if ck != 0.0 {
                out = out + power.scale(ck);
            }
        }
        out
    }

    /// Applies `f` given its derivatives `f^(k)(a)` at `a = self.value()`.
    fn apply(&self, derivs: [f64; ORDER + 1]) -> Self {
        self.compose(std::array::from_fn(|k| derivs[k] / FACT[k]))
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.apply([s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.apply([c, -s, -c, s, c])
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.apply([e; 5])
    }

    pub fn ln(&self) -> Result<Self> {
        let a = self.value();
        if a <= 0.0 || !a.is_finite() {
            return Err(Error::JetDomain(format!("ln of non-positive value {a}")));
        }
        let r = 1.0 / a;
        Ok(self.apply([a.ln(), r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r]))
    }

    /// `self^p` for real `p`; requires a positive base.
    pub fn powf(&self, p: f64) -> Result<Self> {
        let a = self.value();
        if a <= 0.0 || !a.is_finite() {
            return Err(Error::JetDomain(format!("pow of non-positive base {a}")));
        }
        let mut d = [0.0; ORDER + 1];
        let mut fall = 1.0;
        for (k, dk) in d.iter_mut().enumerate() {
            *dk = fall * a.powf(p - k as f64);
            fall *= p - k as f64;
        }
        Ok(self.apply(d))
    }

    pub fn sqrt(&self) -> Result<Self> {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Result<Self> {
        let a = self.value();
        if a == 0.0 || !a.is_finite() {
            return Err(Error::JetDomain(format!("reciprocal of {a}")));
        }
        let r = 1.0 / a;
        Ok(self.apply([r, -r * r, 2.0 * r.powi(3), -6.0 * r.powi(4), 24.0 * r.powi(5)]))
    }

    pub fn div(&self, other: &Jet4) -> Result<Self> {
        Ok(*self * other.recip()?)
    }

    /// `atan2(y, x)` with the branch chosen by `branch(value)`; requires `(x, y) != 0`.
    ///
    /// Uses `atan2(y, x) = t0 + atan((y x0 - x y0) / (x x0 + y y0))`, whose inner
    /// argument vanishes at the expansion point.
    pub fn atan2_with(y: &Jet4, x: &Jet4, branch: impl Fn(f64) -> f64) -> Result<Self> {
        let (x0, y0) = (x.value(), y.value());
        if x0 == 0.0 && y0 == 0.0 {
            return Err(Error::JetDomain("atan2 at the origin".into()));
        }
        let num = y.scale(x0) - x.scale(y0);
        let den = x.scale(x0) + y.scale(y0);
        let mut t = num.div(&den)?;
        t.c[0] = 0.0;
        // atan(t) = t - t^3/3 + O(t^5)
        let mut out = t.compose([0.0, 1.0, 0.0, -1.0 / 3.0, 0.0]);
        out.c[0] = branch(y0.atan2(x0));
        Ok(out)
    }

    pub fn atan2(y: &Jet4, x: &Jet4) -> Result<Self> {
        Self::atan2_with(y, x, |t| t)
    }
}

/// Von Kármán bracket `[a, b] = a_xx b_yy + a_yy b_xx - 2 a_xy b_xy` at the expansion point.
pub fn bracket(a: &Jet4, b: &Jet4) -> f64 {
    a.dxx() * b.dyy() + a.dyy() * b.dxx() - 2.0 * a.dxy() * b.dxy()
}

impl Add for Jet4 {
    type Output = Jet4;
    fn add(self, o: Jet4) -> Jet4 {
        Jet4 { c: std::array::from_fn(|k| self.c[k] + o.c[k]) }
    }
}

impl Sub for Jet4 {
    type Output = Jet4;
    fn sub(self, o: Jet4) -> Jet4 {
        Jet4 { c: std::array::from_fn(|k| self.c[k] - o.c[k]) }
    }
}

impl Neg for Jet4 {
    type Output = Jet4;
    fn neg(self) -> Jet4 {
        self.scale(-1.0)
    }
}

impl Mul for Jet4 {
    type Output = Jet4;
    fn mul(self, o: Jet4) -> Jet4 {
        let mut c = [0.0; LEN];
        for i1 in 0..=ORDER {
            for j1 in 0..=ORDER - i1 {
                let a = self.c[idx(i1, j1)];
                if a == 0.0 {
                    continue;
                }
                for i2 in 0..=ORDER - i1 - j1 {
                    for j2 in 0..=ORDER - i1 - j1 - i2 {
                        c[idx(i1 + i2, j1 + j2)] += a * o.c[idx(i2, j2)];
                    }
                }
            }
        }
        Jet4 { c }
    }
}

impl Mul<f64> for Jet4 {
    type Output = Jet4;
    fn mul(self, s: f64) -> Jet4 {
        self.scale(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_along_x() {
        let s = Jet4::var_x(0.0).sin();
        let expect = [0.0, 1.0, 0.0, -1.0 / 6.0, 0.0];
        for (i, e) in expect.iter().enumerate() {
            assert!((s.coeff(i, 0) - e).abs() < 1e-15);
        }
        for j in 1..=4 {
            assert_eq!(s.coeff(0, j), 0.0);
        }
    }

    #[test]
    fn product_of_coordinates() {
        let (x, y) = Jet4::coords(2.0, 3.0);
        let p = x * y;
        assert_eq!(p.value(), 6.0);
        assert_eq!(p.dx(), 3.0);
        assert_eq!(p.dy(), 2.0);
        assert_eq!(p.dxy(), 1.0);
        for i in 0..=4 {
            for j in 0..=4 - i {
                if i + j >= 2 && !(i == 1 && j == 1) {
                    assert_eq!(p.coeff(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn constant_jet() {
        let c = Jet4::constant(3.5);
        assert_eq!(c.value(), 3.5);
        assert!((1..LEN).all(|k| c.c[k] == 0.0));
    }

    #[test]
    fn domain_errors() {
        let x = Jet4::var_x(-1.0);
        assert!(x.ln().is_err());
        assert!(x.powf(0.5).is_err());
        assert!(Jet4::atan2(&Jet4::var_y(0.0), &Jet4::var_x(0.0)).is_err());
    }

    #[test]
    fn bracket_of_quadratics() {
        let (x, y) = Jet4::coords(0.3, -0.7);
        assert_eq!(bracket(&(x * x), &(y * y)), 4.0);
    }

    #[test]
    fn polynomial_bilaplacian() {
        // x^2 y^2 has bilaplacian 2 * 4 = 8
        let (x, y) = Jet4::coords(0.4, 0.9);
        let p = x * x * y * y;
        assert!((p.bilaplacian() - 8.0).abs() < 1e-14);
    }

    #[test]
    fn exp_ln_inverse() {
        let (x, y) = Jet4::coords(0.5, 0.25);
        let f = (x * y).add_scalar(1.0);
        let g = f.ln().unwrap().exp();
        for k in 0..LEN {
            assert!((f.c[k] - g.c[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn atan2_matches_polar_identity() {
        // tan(atan2(y, x)) * x == y, checked through cos/sin: r cos(t) = x
        let (x, y) = Jet4::coords(-0.4, 0.3);
        let t = Jet4::atan2(&y, &x).unwrap();
        let r = (x * x + y * y).sqrt().unwrap();
        let xr = r * t.cos();
        let yr = r * t.sin();
        for k in 0..LEN {
            assert!((xr.c[k] - x.c[k]).abs() < 1e-13, "{k}");
            assert!((yr.c[k] - y.c[k]).abs() < 1e-13, "{k}");
        }
    }
}
