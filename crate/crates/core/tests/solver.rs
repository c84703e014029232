mod common;

use std::sync::Arc;

use abreu_core::discrete::{hessian_h, DiscreteEnergy};
use abreu_core::model::{rochet_chone, Gamma, Lagrangian, ZeroLagrangian};
use abreu_core::solver::{
    baseline_minimize, continuation_sweep, feasible_start, minimize, newton_minimize, EpsSchedule,
    MuSchedule, NewtonConfig, Problem, StartPolicy,
};

fn rc() -> Arc<dyn Lagrangian> {
    Arc::new(rochet_chone(2.0, Gamma::Constant(1.0), 1.0).unwrap())
}

#[test]
fn newton_descends_and_stays_convex() {
    let grid = common::unit_grid(17);
    let problem = Problem::new(Arc::clone(&grid), rc()).unwrap();
    let u0 = feasible_start(&grid).unwrap();
    let (u, report) = newton_minimize(&problem, &u0, 0.0625, &NewtonConfig::default()).unwrap();
    assert!(report.final_grad_norm <= NewtonConfig::default().tol_grad);
    assert!(report.min_det > 0.0);
    for w in report.energy_history.windows(2) {
        assert!(w[1] <= w[0], "energy rose: {} -> {}", w[0], w[1]);
    }
    assert!(hessian_h(&u).first_violation().is_none());
}

#[test]
fn barrier_only_minimizer_is_flat_in_the_middle() {
    // with F = 0 and G = 0 only the barrier acts: the minimizer keeps det
    // bounded away from zero and its Hessian varies slowly near the center
    let grid = common::unit_grid(17);
    let model: Arc<dyn Lagrangian> = Arc::new(ZeroLagrangian::default());
    let problem = Problem::new(Arc::clone(&grid), model).unwrap();
    let u0 = feasible_start(&grid).unwrap();
    let (u, report) = newton_minimize(&problem, &u0, 0.25, &NewtonConfig::default()).unwrap();
    assert!(report.min_det > 0.0);
    let hf = hessian_h(&u);
    let c = hf.at(grid.index(8, 8));
    let n = hf.at(grid.index(9, 8));
    assert!((c.det() - n.det()).abs() <= 0.1 * c.det());
}

#[test]
fn baseline_with_huge_mu_stays_admissible() {
    let grid = common::unit_grid(17);
    let mu = MuSchedule {
        mu0: 1e6,
        ratio: 0.5,
        mu_min: 1e6,
    };
    let (u, report) = baseline_minimize(&grid, rc(), &mu, &NewtonConfig::default()).unwrap();
    assert_eq!(report.mu, vec![1e6]);
    assert!(report.min_det > 0.0);
    let hf = hessian_h(&u);
    assert!(grid.mask_inner().indices().all(|k| hf.det(k) > 0.0 && hf.at(k).a11 > 0.0));
}

#[test]
fn single_point_sweep() {
    let grid = common::unit_grid(17);
    let problem = Problem::new(Arc::clone(&grid), rc()).unwrap();
    let schedule = EpsSchedule {
        eps0: 0.125,
        ratio: 0.5,
        count: 1,
    };
    let sweep = continuation_sweep(&problem, &schedule, &NewtonConfig::default(), None, StartPolicy::Warm).unwrap();
    assert_eq!(sweep.eps(), vec![0.125]);
    assert_eq!(sweep.solutions.len(), 1);
    assert!(sweep.reports[0].err_k.is_none());
}

#[test]
fn warm_and_cold_sweeps_agree() {
    let grid = common::unit_grid(17);
    let problem = Problem::new(Arc::clone(&grid), rc()).unwrap();
    let schedule = EpsSchedule {
        eps0: 0.0625,
        ratio: 0.5,
        count: 3,
    };
    let cfg = NewtonConfig::default();
    let warm = continuation_sweep(&problem, &schedule, &cfg, None, StartPolicy::Warm).unwrap();
    let cold = continuation_sweep(&problem, &schedule, &cfg, None, StartPolicy::Cold).unwrap();
    eprintln!("newton iterations: warm {} cold {}", warm.total_iters(), cold.total_iters());
    let inside = grid.mask_inside();
    for (a, b) in warm.solutions.iter().zip(&cold.solutions) {
        assert!(a.max_abs_diff(b, inside) <= 1e-7);
    }
}

#[test]
fn baseline_converges_to_unconstrained_solution() {
    // the unconstrained minimizer 0.75|x|^2 - 1/16 is convex, so the
    // constraint is inactive; the pinned layer outside the inner disk makes
    // the error first order in h
    let err = |n: usize| {
        let grid = common::unit_grid(n);
        let (u, _) = baseline_minimize(&grid, rc(), &MuSchedule::default(), &NewtonConfig::default()).unwrap();
        grid.mask_inner()
            .indices()
            .map(|k| {
                let x = grid.coord(k);
                (u.get(k) - (0.75 * (x[0] * x[0] + x[1] * x[1]) - 0.0625)).abs()
            })
            .fold(0.0, f64::max)
    };
    let (coarse, fine) = (err(17), err(33));
    assert!(fine <= 0.05, "{fine}");
    assert!(fine <= 0.6 * coarse, "{coarse} -> {fine}");
}

#[test]
fn minimize_rejects_infeasible_start() {
    let grid = common::unit_grid(17);
    let energy = DiscreteEnergy::constrained(Arc::clone(&grid), rc(), 0.1).unwrap();
    let u0 = abreu_core::ScalarField::from_fn(Arc::clone(&grid), |x| -(x[0] * x[0] + x[1] * x[1]));
    assert!(minimize(&energy, &u0, &NewtonConfig::default()).is_err());
}
