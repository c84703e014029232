//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use abreu_core::geometry::build_grid;
use abreu_core::model::{exp_lagrangian, rochet_chone, Gamma};
use abreu_core::solver::Problem;
use abreu_core::{DomainSpec, Lagrangian, ScalarField};

pub fn problem(n: usize, exp: bool) -> Problem {
    let grid = Arc::new(build_grid(&DomainSpec::unit_disk(0.5).expect("valid"), n).expect("valid"));
    let model: Arc<dyn Lagrangian> = if exp {
        Arc::new(exp_lagrangian())
    } else {
        Arc::new(rochet_chone(2.0, Gamma::Constant(1.0), 1.0).expect("valid"))
    };
    Problem::new(grid, model).expect("valid")
}

/// A strictly convex field inside the barrier's domain.
pub fn convex_field(problem: &Problem) -> ScalarField {
    ScalarField::from_fn(Arc::clone(&problem.grid), |x| 0.6 * (x[0] * x[0] + x[1] * x[1]) + 0.1 * x[0] - 0.2)
}
