mod common;

use std::sync::Arc;

use abreu_core::discrete::{hessian_h, ScalarField};
use abreu_core::geometry::lifted_boundary;
use abreu_core::model::{builtin_models, build_penalty, Lagrangian, PenaltyG};
use abreu_core::solver::Problem;
use proptest::prelude::*;

fn penalties() -> Vec<PenaltyG> {
    builtin_models()
        .iter()
        .map(|m| build_penalty(m.envelope()).unwrap())
        .collect()
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn g_is_even_and_g1_odd(x in 0.0f64..2.0) {
        for pen in penalties() {
            prop_assert_eq!(pen.g(x), pen.g(-x));
            prop_assert_eq!(pen.g1(x), -pen.g1(-x));
        }
    }

    #[test]
    fn g_growth_bounds(x in -2.0f64..2.0) {
        for pen in penalties() {
            let t = x * x;
            prop_assert!(pen.h(t) >= t);
            prop_assert!(pen.g2(x) >= 2.0 * pen.h(t) - 1e-12 * pen.h(t));
            prop_assert!(2.0 * pen.h(t) >= 2.0 * t);
            prop_assert!(pen.g1(x) * x >= 2.0 * t * t * (1.0 - 1e-12));
            prop_assert!(pen.g(x) >= 0.0);
        }
    }

    #[test]
    fn g_derivatives_match_differences(x in 0.05f64..1.5) {
        let d = 1e-5;
        for pen in penalties() {
            let fd1 = (pen.g(x + d) - pen.g(x - d)) / (2.0 * d);
            let fd2 = (pen.g1(x + d) - pen.g1(x - d)) / (2.0 * d);
            prop_assert!((fd1 - pen.g1(x)).abs() <= 1e-6 * pen.g1(x).abs().max(1.0), "{} {}", fd1, pen.g1(x));
            prop_assert!((fd2 - pen.g2(x)).abs() <= 1e-6 * pen.g2(x).abs().max(1.0), "{} {}", fd2, pen.g2(x));
        }
    }

    #[test]
    fn lifted_boundary_below_phi_and_rises_as_eps_falls(
        r in 0.0f64..0.999,
        theta in 0.0f64..std::f64::consts::TAU,
        e1 in 1e-6f64..0.5,
        ratio in 0.01f64..0.99,
    ) {
        let grid = common::unit_grid(17);
        let spec = grid.spec();
        let x = [r * theta.cos(), r * theta.sin()];
        let phi = spec.boundary.value(x);
        let big = lifted_boundary(spec, spec.defining_function(), e1, 2).unwrap()(x);
        let small = lifted_boundary(spec, spec.defining_function(), e1 * ratio, 2).unwrap()(x);
        prop_assert!(big <= phi);
        prop_assert!(small <= phi);
        prop_assert!(big <= small);
    }

    #[test]
    fn hessian_stencil_is_exact_on_quadratics(
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        c in -3.0f64..3.0,
        d in -1.0f64..1.0,
    ) {
        let grid = common::unit_grid(17);
        let u = ScalarField::from_fn(Arc::clone(&grid), |x| {
            0.5 * a * x[0] * x[0] + b * x[0] * x[1] + 0.5 * c * x[1] * x[1] + d * x[0]
        });
        let hess = hessian_h(&u);
        for &k in hess.nodes() {
            let m = hess.at(k);
            prop_assert!((m.a11 - a).abs() <= 1e-9);
            prop_assert!((m.a22 - c).abs() <= 1e-9);
            prop_assert!((m.a12 - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn barrier_second_variation_nonnegative(seed in any::<u64>(), vseed in any::<u64>()) {
        let grid = common::unit_grid(17);
        let mut rng = common::rng(seed);
        let u = common::random_convex_field(&grid, &mut rng);
        let problem = Problem::new(Arc::clone(&grid), builtin_models()[0].clone()).unwrap();
        let energy = problem.energy(0.0625).unwrap();
        let v: Vec<f64> = {
            let mut r = common::rng(vseed);
            (0..grid.len()).map(|_| rand::Rng::gen_range(&mut r, -1.0..1.0)).collect()
        };
        let hess = energy.hessian(u.values()).unwrap();
        let mut hv = vec![0.0; v.len()];
        hess.apply(&v, &mut hv);
        let q: f64 = energy.free_nodes().iter().map(|&k| v[k] * hv[k]).sum();
        let scale: f64 = energy.free_nodes().iter().map(|&k| (v[k] * hv[k]).abs()).sum();
        prop_assert!(q >= -1e-10 * scale.max(1.0), "{}", q);
    }

    #[test]
    fn penalized_energy_is_convex_on_segments(s1 in any::<u64>(), s2 in any::<u64>(), t in 0.05f64..0.95) {
        let grid = common::unit_grid(17);
        let u0 = common::random_convex_field(&grid, &mut common::rng(s1));
        let u1 = common::random_convex_field(&grid, &mut common::rng(s2));
        for model in builtin_models() {
            let problem = Problem::new(Arc::clone(&grid), model).unwrap();
            let energy = problem.energy(0.0625).unwrap();
            let ut: Vec<f64> = u0.values().iter().zip(u1.values()).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            let j0 = energy.value(u0.values()).unwrap().total;
            let j1 = energy.value(u1.values()).unwrap().total;
            let jt = energy.value(&ut).unwrap().total;
            let gap = (1.0 - t) * j0 + t * j1 - jt;
            prop_assert!(gap >= -1e-8 * (j0.abs() + j1.abs()).max(1.0), "gap {}", gap);
        }
    }

    #[test]
    fn lagrangian_derivatives_and_convexity(
        x0 in -0.9f64..0.9,
        x1 in -0.9f64..0.9,
        z in -1.0f64..1.0,
        p0 in -1.0f64..1.0,
        p1 in -1.0f64..1.0,
    ) {
        let x = [x0, x1];
        let p = [p0, p1];
        let d = 1e-5;
        for model in builtin_models() {
            check_lagrangian(model.as_ref(), x, z, p, d)?;
        }
    }
}

fn check_lagrangian(m: &dyn Lagrangian, x: [f64; 2], z: f64, p: [f64; 2], d: f64) -> Result<(), TestCaseError> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs().max(1.0);
    let fz = (m.value(x, z + d, p) - m.value(x, z - d, p)) / (2.0 * d);
    prop_assert!(close(fz, m.d_z(x, z, p)), "{} d_z {} vs {}", m.name(), fz, m.d_z(x, z, p));
    let fzz = (m.d_z(x, z + d, p) - m.d_z(x, z - d, p)) / (2.0 * d);
    prop_assert!(close(fzz, m.d_zz(x, z, p)), "{} d_zz", m.name());
    let dp = m.d_p(x, z, p);
    let pp = m.d_pp(x, z, p);
    let pz = m.d_pz(x, z, p);
    let mut trace = 0.0;
    for i in 0..2 {
        let mut pl = p;
        let mut pm = p;
        pl[i] += d;
        pm[i] -= d;
        let fp = (m.value(x, z, pl) - m.value(x, z, pm)) / (2.0 * d);
        prop_assert!(close(fp, dp[i]), "{} d_p[{}]", m.name(), i);
        let (gl, gm) = (m.d_p(x, z, pl), m.d_p(x, z, pm));
        for j in 0..2 {
            prop_assert!(close((gl[j] - gm[j]) / (2.0 * d), pp[j][i]), "{} d_pp", m.name());
        }
        let gz = (m.d_p(x, z + d, p)[i] - m.d_p(x, z - d, p)[i]) / (2.0 * d);
        prop_assert!(close(gz, pz[i]), "{} d_pz[{}]", m.name(), i);
        let mut xl = x;
        let mut xm = x;
        xl[i] += d;
        xm[i] -= d;
        trace += (m.d_p(xl, z, p)[i] - m.d_p(xm, z, p)[i]) / (2.0 * d);
    }
    prop_assert!(close(trace, m.d_px_trace(x, z, p)), "{} d_px_trace", m.name());

    // joint Hessian in (z, p) is positive semidefinite: check leading minors
    let h = [
        [m.d_zz(x, z, p), pz[0], pz[1]],
        [pz[0], pp[0][0], pp[0][1]],
        [pz[1], pp[1][0], pp[1][1]],
    ];
    let scale = h.iter().flatten().fold(1.0f64, |a, b| a.max(b.abs()));
    let tol = 1e-10 * scale * scale * scale;
    let det3 = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1])
        - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
        + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
    for i in 0..3 {
        prop_assert!(h[i][i] >= -tol, "{} diagonal", m.name());
    }
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        prop_assert!(h[i][i] * h[j][j] - h[i][j] * h[j][i] >= -tol, "{} 2x2 minor", m.name());
    }
    prop_assert!(det3 >= -tol, "{} determinant {}", m.name(), det3);
    Ok(())
}
