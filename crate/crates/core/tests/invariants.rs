use proptest::prelude::*;

use vkctrl_core::assembly::{assemble_a, eval_b, FeSpace, ScalarField};
use vkctrl_core::control::Bounds;
use vkctrl_core::convergence::eoc;
use vkctrl_core::mesh::{build_mesh, Domain};

fn space() -> FeSpace {
    FeSpace::new(build_mesh(Domain::UnitSquare, 1).unwrap()).unwrap()
}

fn field(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent_and_feasible(lo in -1e3f64..0.0, width in 0.0f64..1e3, v in -1e4f64..1e4) {
        let b = Bounds::new(lo, lo + width, 1e-3).unwrap();
        let p = b.project(v);
        prop_assert!(p >= b.u_a && p <= b.u_b);
        prop_assert_eq!(b.project(p), p);
        if v >= b.u_a && v <= b.u_b {
            prop_assert_eq!(p, v);
        }
    }

    #[test]
    fn eoc_recovers_power_laws(c in 1e-3f64..1e3, p in 0.3f64..4.5) {
        let hs = [1.0, 0.5, 0.25, 0.125];
        let e: Vec<f64> = hs.iter().map(|h: &f64| c * h.powf(p)).collect();
        let r = eoc(&e, &hs).unwrap();
        prop_assert!(r[0].is_none());
        for v in &r[1..] {
            prop_assert!((v.unwrap() - p).abs() < 1e-9);
        }
    }

    #[test]
    fn a_is_positive(x in field(36)) {
        let s = space();
        let a = assemble_a(&s);
        let q = a.bilinear(&x, &x);
        let n2: f64 = x.iter().map(|v| v * v).sum();
        prop_assert!(q > 0.0 || n2 == 0.0);
    }

    #[test]
    fn b_exchange_symmetry(e in field(36), c in field(36), p in field(36)) {
        let s = space();
        let (e, c, p) = (ScalarField(e), ScalarField(c), ScalarField(p));
        let b1 = eval_b(&s, &e, &c, &p);
        let b2 = eval_b(&s, &e, &p, &c);
        let b3 = eval_b(&s, &c, &e, &p);
        let scale = b1.abs().max(1.0);
        prop_assert!((b1 - b2).abs() <= 1e-11 * scale);
        prop_assert!((b1 - b3).abs() <= 1e-11 * scale);
    }

    #[test]
    fn b_is_trilinear(e in field(36), c in field(36), p in field(36), t in -3.0f64..3.0) {
        let s = space();
        let et: Vec<f64> = e.iter().map(|v| t * v).collect();
        let b1 = eval_b(&s, &ScalarField(et), &ScalarField(c.clone()), &ScalarField(p.clone()));
        let b0 = eval_b(&s, &ScalarField(e), &ScalarField(c), &ScalarField(p));
        prop_assert!((b1 - t * b0).abs() <= 1e-10 * b0.abs().max(1.0));
    }
}
