//! Analytic gradients against central finite differences on random admissible
//! fields.

mod common;

use std::sync::Arc;

use abreu_core::discrete::DiscreteEnergy;
use abreu_core::model::{exp_lagrangian, quadratic_lagrangian, rochet_chone, Gamma, Lagrangian};
use abreu_core::solver::Problem;
use abreu_core::Result;

const FIELDS: usize = 20;
const TOL: f64 = 1e-6;

/// Relative error of the directional derivative along the gradient itself,
/// restricted to the free nodes, so the reference `|g|^2` has no cancellation.
fn along_gradient(
    f: impl Fn(&[f64]) -> Result<f64>,
    grad: &[f64],
    u: &[f64],
    free: &[usize],
) -> f64 {
    let mut v = vec![0.0; u.len()];
    for &k in free {
        v[k] = grad[k];
    }
    let gg: f64 = free.iter().map(|&k| grad[k] * grad[k]).sum();
    let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let t = 1e-6 / vmax;
    let shifted = |s: f64| -> Vec<f64> { u.iter().zip(&v).map(|(a, b)| a + s * b).collect() };
    let fd = (f(&shifted(t)).unwrap() - f(&shifted(-t)).unwrap()) / (2.0 * t);
    (fd - gg).abs() / gg
}

fn models() -> Vec<Arc<dyn Lagrangian>> {
    vec![
        Arc::new(rochet_chone(2.0, Gamma::Constant(1.0), 1.0).unwrap()),
        Arc::new(rochet_chone(3.0, Gamma::Constant(1.0), 1.0).unwrap()),
        Arc::new(quadratic_lagrangian()),
        Arc::new(exp_lagrangian()),
    ]
}

#[test]
fn energy_terms_match_finite_differences() {
    let grid = common::unit_grid(17);
    let mut rng = common::rng(2024);
    for model in models() {
        let problem = Problem::new(Arc::clone(&grid), Arc::clone(&model)).unwrap();
        for trial in 0..FIELDS {
            let eps = [0.25, 0.0625, 0.01][trial % 3];
            let u = common::random_convex_field(&grid, &mut rng);
            let energy = problem.energy(eps).unwrap();
            let v = u.values();
            let free = energy.free_nodes();

            let e_b = along_gradient(|w| energy.barrier_value(w), &energy.barrier_gradient(v).unwrap(), v, free);
            let e_f = along_gradient(|w| Ok(energy.lagrangian_value(w)), &energy.lagrangian_gradient(v), v, free);
            let e_g = along_gradient(|w| Ok(energy.penalty_value(w)), &energy.penalty_gradient(v), v, free);
            let e_t = along_gradient(|w| Ok(energy.value(w)?.total), &energy.gradient(v).unwrap(), v, free);
            for (name, e) in [("barrier", e_b), ("F", e_f), ("G", e_g), ("total", e_t)] {
                assert!(e <= TOL, "{} trial {trial} {name}: {e:.3e}", model.name());
            }
        }
    }
}

#[test]
fn single_node_derivatives() {
    let grid = common::unit_grid(17);
    let mut rng = common::rng(7);
    let model: Arc<dyn Lagrangian> = Arc::new(rochet_chone(2.0, Gamma::Constant(1.0), 1.0).unwrap());
    let problem = Problem::new(Arc::clone(&grid), model).unwrap();
    let energy = problem.energy(0.05).unwrap();
    let u = common::random_convex_field(&grid, &mut rng);
    let g = energy.gradient(u.values()).unwrap();
    let inner = grid.index(8, 8);
    let ring_side = grid.index(2, 8);
    for k in [inner, ring_side, grid.index(5, 6)] {
        let mut w = u.values().to_vec();
        let t = 1e-6;
        w[k] += t;
        let plus = energy.value(&w).unwrap().total;
        w[k] -= 2.0 * t;
        let minus = energy.value(&w).unwrap().total;
        let fd = (plus - minus) / (2.0 * t);
        assert!((fd - g[k]).abs() <= TOL * g[k].abs().max(1e-6), "node {k}: {fd} vs {}", g[k]);
    }
}

#[test]
fn hessian_action_matches_gradient_differences() {
    let grid = common::unit_grid(17);
    let mut rng = common::rng(99);
    for model in models() {
        let problem = Problem::new(Arc::clone(&grid), model).unwrap();
        let energy = problem.energy(0.0625).unwrap();
        let u = common::random_convex_field(&grid, &mut rng);
        let v: Vec<f64> = (0..grid.len())
            .map(|k| if energy.free_nodes().contains(&k) { ((k * 7919) % 13) as f64 / 13.0 - 0.5 } else { 0.0 })
            .collect();
        let hess = energy.hessian(u.values()).unwrap();
        let mut hv = vec![0.0; grid.len()];
        hess.apply(&v, &mut hv);
        let t = 1e-6;
        let at = |s: f64| {
            let w: Vec<f64> = u.values().iter().zip(&v).map(|(a, b)| a + s * b).collect();
            energy.gradient(&w).unwrap()
        };
        let (gp, gm) = (at(t), at(-t));
        let scale = hv.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for &k in energy.free_nodes() {
            let fd = (gp[k] - gm[k]) / (2.0 * t);
            assert!((fd - hv[k]).abs() <= 1e-5 * scale, "node {k}: {fd} vs {}", hv[k]);
        }
    }
}

#[test]
fn constrained_energy_gradient() {
    let grid = common::unit_grid(17);
    let mut rng = common::rng(5);
    let model: Arc<dyn Lagrangian> = Arc::new(rochet_chone(2.0, Gamma::Constant(1.0), 1.0).unwrap());
    let energy = DiscreteEnergy::constrained(Arc::clone(&grid), model, 0.01).unwrap();
    for _ in 0..5 {
        let u = common::random_convex_field(&grid, &mut rng);
        let v = u.values();
        let e = along_gradient(|w| Ok(energy.value(w)?.total), &energy.gradient(v).unwrap(), v, energy.free_nodes());
        assert!(e <= TOL, "{e:.3e}");
    }
}
