//! Checks against closed forms worked out by hand, independent of the library's
//! jets and quadrature.

use std::f64::consts::PI;

use vkctrl_core::assembly::{assemble_a, assemble_load, FeSpace};
use vkctrl_core::control::{Bounds, ControlField};
use vkctrl_core::convergence::case_bounds;
use vkctrl_core::manufactured::CaseSpec;
use vkctrl_core::mesh::{build_mesh, Domain, Region};
use vkctrl_core::solver::{solve_state, NewtonOptions, VkProblem};
use vkctrl_core::sparse::factorize_symmetric;

/// 5-point Gauss–Legendre on [0, 1].
const GAUSS5: [(f64, f64); 5] = [
    (0.046910077030668, 0.118463442528095),
    (0.230765344947158, 0.239314335249683),
    (0.5, 0.284444444444444),
    (0.769234655052842, 0.239314335249683),
    (0.953089922969332, 0.118463442528095),
];

/// `u = sin²(πx) sin²(πy)`: value, first and second derivatives.
fn bump(x: f64, y: f64) -> [f64; 6] {
    let (s, sp, spp) = profile(x);
    let (t, tp, tpp) = profile(y);
    [s * t, sp * t, s * tp, spp * t, sp * tp, s * tpp]
}

/// `sin²(πx)` and its first two derivatives.
fn profile(x: f64) -> (f64, f64, f64) {
    let a = 2.0 * PI * x;
    ((1.0 - a.cos()) / 2.0, PI * a.sin(), 2.0 * PI * PI * a.cos())
}

/// `Δ²u` for the bump, via `s'''' = -8π⁴ cos 2πx`.
fn bump_bilaplacian(x: f64, y: f64) -> f64 {
    let (s, _, spp) = profile(x);
    let (t, _, tpp) = profile(y);
    let s4 = -8.0 * PI.powi(4) * (2.0 * PI * x).cos();
    let t4 = -8.0 * PI.powi(4) * (2.0 * PI * y).cos();
    s4 * t + 2.0 * spp * tpp + s * t4
}

/// `(L², H¹-semi, H²-semi)` errors of a discrete field against the bump.
fn bump_errors(space: &FeSpace, c: &[f64]) -> [f64; 3] {
    let m = &space.mesh;
    let mut e = [0.0; 3];
    for cell in 0..m.n_cells() {
        let o = m.cell_origin(cell);
        for &(xi, wx) in &GAUSS5 {
            for &(eta, wy) in &GAUSS5 {
                let w = wx * wy * m.hx * m.hy;
                let d = space.evaluate_in_cell(c, cell, xi, eta);
                let u = bump(o[0] + xi * m.hx, o[1] + eta * m.hy);
                e[0] += w * (d.v - u[0]).powi(2);
                e[1] += w * ((d.dx - u[1]).powi(2) + (d.dy - u[2]).powi(2));
                e[2] += w * ((d.dxx - u[3]).powi(2) + 2.0 * (d.dxy - u[4]).powi(2) + (d.dyy - u[5]).powi(2));
            }
        }
    }
    e.map(f64::sqrt)
}

fn square(level: u32) -> FeSpace {
    FeSpace::new(build_mesh(Domain::UnitSquare, level).unwrap()).unwrap()
}

fn biharmonic(space: &FeSpace) -> Vec<f64> {
    let a = assemble_a(space);
    let f = assemble_load(space, bump_bilaplacian).unwrap();
    factorize_symmetric(&a, None).unwrap().solve(&f).unwrap()
}

fn rates(e: &[f64]) -> Vec<f64> {
    e.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[test]
fn biharmonic_rates() {
    let errs: Vec<[f64; 3]> = (1..=4).map(|l| {
        let s = square(l);
        bump_errors(&s, &biharmonic(&s))
    }).collect();
    let h2: Vec<f64> = errs.iter().map(|e| e[2]).collect();
    let l2: Vec<f64> = errs.iter().map(|e| e[0]).collect();
    let r2 = rates(&h2);
    let r0 = rates(&l2);
    assert!((r2.last().unwrap() - 2.0).abs() < 0.1, "energy rates {r2:?}");
    assert!(*r0.last().unwrap() > 3.7, "L2 rates {r0:?}");
}

/// Galerkin orthogonality gives `|u - u_h|²₂ = |u|²₂ - |u_h|²₂` with `|u|²₂ = 2π⁴`.
#[test]
fn galerkin_pythagoras() {
    let s = square(3);
    let c = biharmonic(&s);
    let uh2 = assemble_a(&s).bilinear(&c, &c);
    let e = bump_errors(&s, &c)[2];
    let exact = 2.0 * PI.powi(4);
    assert!((e * e - (exact - uh2)).abs() < 1e-6 * exact, "{} vs {}", e * e, exact - uh2);
}

#[test]
fn interpolation_rates() {
    let errs: Vec<[f64; 3]> = (1..=4)
        .map(|l| {
            let s = square(l);
            let c = s.interpolate(|x, y| {
                let (a, ap, _) = profile(x);
                let (b, bp, _) = profile(y);
                [a * b, ap * b, a * bp, ap * bp]
            });
            bump_errors(&s, &c.0)
        })
        .collect();
    for (k, want) in [(0, 4.0), (1, 3.0), (2, 2.0)] {
        let r = rates(&errs.iter().map(|e| e[k]).collect::<Vec<_>>());
        assert!((r.last().unwrap() - want).abs() < 0.15, "norm {k}: {r:?}");
    }
}

/// `∫ x²(1-x)² y²(1-y)² = (1/30)² = 1/900`, through interpolant cell integrals.
#[test]
fn interpolant_mass() {
    let p = |t: f64| (t * t * (1.0 - t).powi(2), 2.0 * t * (1.0 - t) * (1.0 - 2.0 * t));
    let mut errs = Vec::new();
    for l in 1..=4 {
        let s = square(l);
        let c = s.interpolate(|x, y| {
            let ((a, ap), (b, bp)) = (p(x), p(y));
            [a * b, ap * b, a * bp, ap * bp]
        });
        let ci = s.cell_integrals();
        let total: f64 =
            (0..s.mesh.n_cells()).map(|k| s.local(&c.0, k).iter().zip(ci).map(|(a, b)| a * b).sum::<f64>()).sum();
        errs.push((total - 1.0 / 900.0).abs());
    }
    assert!(errs[3] < 1e-7, "{errs:?}");
    assert!(rates(&errs).iter().all(|&r| r > 3.5), "{errs:?}");
}

fn exact_control(case: &CaseSpec, space: &FeSpace, b: &Bounds) -> ControlField {
    let m = &space.mesh;
    let cells: Vec<usize> = (0..m.n_cells()).collect();
    let vals = cells
        .iter()
        .map(|&c| {
            let [x, y] = m.centroid(c);
            case.control(x, y).unwrap()
        })
        .collect();
    ControlField::new(m, cells, vals, b).unwrap()
}

/// With the exact control, Newton from zero and from the interpolated exact state land
/// on the same discrete state, quickly.
#[test]
fn newton_on_exact_data() {
    let case = CaseSpec::ex1();
    let b = case_bounds(&case).unwrap();
    let p = VkProblem::for_level(&case, 3).unwrap();
    let u = exact_control(&case, &p.space, &b);
    let opts = NewtonOptions::default();
    let (psi0, r0) = solve_state(&p, &u, None, &opts).unwrap();
    let interp = p.space.interpolate(|x, y| {
        let (a, ap, _) = profile(x);
        let (c, cp, _) = profile(y);
        [a * c, ap * c, a * cp, ap * cp]
    });
    let start = vkctrl_core::assembly::PairField { first: interp.clone(), second: interp };
    let (psi1, r1) = solve_state(&p, &u, Some(&start), &opts).unwrap();
    assert!(r0.converged && r1.converged);
    assert!(r1.iterations <= r0.iterations && r0.iterations <= 8, "{} {}", r0.iterations, r1.iterations);
    let d = psi0.to_block().iter().zip(psi1.to_block()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(d < 1e-9, "{d}");
    // The discrete state is close to the exact one in energy.
    let e = bump_errors(&p.space, &psi0.first.0)[2];
    assert!(e < 0.3, "{e}");
}

#[test]
fn constant_control_region() {
    let case = CaseSpec::ex1();
    let b = case_bounds(&case).unwrap();
    let s = square(2);
    let u = ControlField::constant(&s.mesh, &Region::Whole, -100.0, &b).unwrap();
    assert_eq!(u.len(), 64);
    assert!(u.values().iter().all(|&v| v == -100.0));
    let half = Region::Rect { x0: 0.0, x1: 0.5, y0: 0.0, y1: 1.0 };
    assert_eq!(ControlField::constant(&s.mesh, &half, 0.0, &b).unwrap().len(), 32);
}
