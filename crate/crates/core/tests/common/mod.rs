#![allow(dead_code)]

use std::sync::Arc;

use abreu_core::geometry::{build_grid, DomainSpec, Grid};
use abreu_core::ScalarField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn unit_grid(n: usize) -> Arc<Grid> {
    Arc::new(build_grid(&DomainSpec::unit_disk(0.5).unwrap(), n).unwrap())
}

/// A strictly discretely convex field: a random convex quadratic plus a small
/// random smooth perturbation.
pub fn random_convex_field(grid: &Arc<Grid>, rng: &mut ChaCha8Rng) -> ScalarField {
    loop {
        let a = rng.gen_range(0.6..1.6);
        let c = rng.gen_range(0.6..1.6);
        let b = rng.gen_range(-0.3..0.3);
        let d = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        let e = rng.gen_range(-0.3..0.3);
        let amp = rng.gen_range(0.0..0.01);
        let (kx, ky, ph) = (rng.gen_range(1.0..3.0), rng.gen_range(1.0..3.0), rng.gen_range(0.0..6.0));
        let values: Vec<f64> = (0..grid.len())
            .map(|k| {
                let x = grid.coord(k);
                0.5 * (a * x[0] * x[0] + 2.0 * b * x[0] * x[1] + c * x[1] * x[1])
                    + d[0] * x[0]
                    + d[1] * x[1]
                    + e
                    + amp * (kx * x[0] + ph).sin() * (ky * x[1]).cos()
            })
            .collect();
        let u = ScalarField::new(Arc::clone(grid), values).unwrap();
        if abreu_core::discrete::hessian_h(&u).first_violation().is_none() {
            return u;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
