//! Runtime checks of the penalty identity, the a priori bounds and the decay
//! rates on solver output.

use std::fmt;

use crate::discrete::{gradient_h, hessian_h, ScalarField};
use crate::error::{Error, Result};
use crate::model::PenaltyG;
use crate::solver::SweepReport;

pub const G_IDENTITY_TOL: f64 = 1e-10;
pub const LINFTY_TOL: f64 = 1e-8;
pub const CONVEXITY_TOL: f64 = 1e-8;
pub const DECAY_MIN_SLOPE: f64 = 0.9;
pub const KEYEST_MAX_GROWTH: f64 = 1e3;
/// Additive slack of the gradient bound, in units of `h`.
pub const GRADIENT_SLACK_H: f64 = 10.0;

/// Where an audit was taken.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AuditContext {
    pub eps: Option<f64>,
    pub n_per_axis: Option<usize>,
}

/// Result of one check. `passed` is decided by each check from `measured`
/// and `threshold` as documented there.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub context: AuditContext,
    pub detail: String,
}

impl AuditOutcome {
    pub fn with_context(mut self, context: AuditContext) -> Self {
        self.context = context;
        self
    }
}

impl fmt::Display for AuditOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: measured {:.6e}, threshold {:.6e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold
        )?;
        if let Some(eps) = self.context.eps {
            write!(f, ", eps {eps:.6e}")?;
        }
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

fn outcome(name: &'static str, passed: bool, measured: f64, threshold: f64, detail: String) -> AuditOutcome {
    AuditOutcome {
        name,
        passed,
        measured,
        threshold,
        context: AuditContext::default(),
        detail,
    }
}

/// `|a - b| / (1 + |a|)`, zero when both agree exactly (infinities included).
pub fn relative_error(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / (1.0 + a.abs())
    }
}

/// Largest relative error between `G'(x)`, computed by a route independent
/// of `H`, and `2 x H(x^2)`. Passes at `1e-10`.
pub fn check_g_identity(pen: &PenaltyG, samples: &[f64]) -> AuditOutcome {
    let mut worst: f64 = 0.0;
    let mut at = f64::NAN;
    let mut failures = 0;
    for &x in samples {
        match pen.g1_independent(x) {
            Ok(g1) => {
                let e = relative_error(g1, 2.0 * x * pen.h(x * x));
                if !(e <= worst) {
                    worst = if e.is_nan() { f64::INFINITY } else { e };
                    at = x;
                }
            }
            Err(_) => failures += 1,
        }
    }
    let passed = failures == 0 && worst <= G_IDENTITY_TOL;
    outcome(
        "g_identity",
        passed,
        worst,
        G_IDENTITY_TOL,
        format!("{} samples, worst at x = {at:.6}, {failures} quadrature failures", samples.len()),
    )
}

/// Counts samples violating `H(t) >= t` (at `t = x^2`) or `G'(x) x >= 2 x^4`,
/// with no tolerance.
pub fn check_h_bounds(pen: &PenaltyG, samples: &[f64]) -> AuditOutcome {
    let violations = samples
        .iter()
        .filter(|&&x| {
            let t = x * x;
            let quartic = 2.0 * x * t * x;
            !(pen.h(t) >= t) || !(pen.g1(x) * x >= quartic)
        })
        .count();
    outcome(
        "h_lower_bound",
        violations == 0,
        violations as f64,
        0.0,
        format!("{} samples", samples.len()),
    )
}

/// Lower bound `-(C1 + sup|phi|) / delta` with
/// `C1 = sup|phi| + sup|e^rho - 1| + 1` and `delta = dist(Omega_0, dOmega) / diam(Omega)`.
pub fn linfty_lower_bound(u: &ScalarField) -> f64 {
    let grid = u.grid();
    let spec = grid.spec();
    let rho = spec.defining_function();
    let inside = grid.mask_inside();
    let sup_phi = inside
        .indices()
        .map(|k| spec.boundary.value(grid.coord(k)).abs())
        .fold(spec.sup_boundary_abs_phi(), f64::max);
    // rho is smallest at the center
    let sup_lift = rho.value(spec.outer.center).exp_m1().abs().max(
        inside
            .indices()
            .map(|k| rho.value(grid.coord(k)).exp_m1().abs())
            .fold(0.0, f64::max),
    );
    let c1 = sup_phi + sup_lift + 1.0;
    let delta = grid.inner_boundary_distance() / spec.outer.diameter();
    -(c1 + sup_phi) / delta
}

/// Passes if `max u <= sup_{dOmega} phi + 1e-8` and `min u` is above
/// [`linfty_lower_bound`]. `measured` is `max u - sup phi`.
pub fn check_linfty(u: &ScalarField) -> AuditOutcome {
    let grid = u.grid();
    let sup_phi = grid.spec().sup_boundary_phi();
    let inside = grid.mask_inside();
    let max_u = u.max_over(inside);
    let min_u = u.min_over(inside);
    let lower = linfty_lower_bound(u);
    let excess = max_u - sup_phi;
    outcome(
        "linfty",
        excess <= LINFTY_TOL && min_u >= lower,
        excess,
        LINFTY_TOL,
        format!("max u {max_u:.6e}, sup phi {sup_phi:.6e}, min u {min_u:.6e}, lower bound {lower:.6e}"),
    )
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Slope of `penalty_quartic` against eps over the final `max(4, count/2)`
/// points; passes at `>= 0.9`.
pub fn check_penalty_decay_series(eps: &[f64], quartic: &[f64]) -> Result<AuditOutcome> {
    if eps.len() < 4 || quartic.len() != eps.len() {
        return Err(Error::InsufficientData {
            needed: 4,
            got: eps.len().min(quartic.len()),
        });
    }
    let m = 4.max(eps.len() / 2);
    let start = eps.len() - m;
    let slope = loglog_slope(&eps[start..], &quartic[start..]);
    Ok(outcome(
        "penalty_decay",
        slope >= DECAY_MIN_SLOPE,
        slope,
        DECAY_MIN_SLOPE,
        format!("last {m} points"),
    ))
}

pub fn check_penalty_decay(sweep: &SweepReport) -> Result<AuditOutcome> {
    let quartic: Vec<f64> = sweep.reports.iter().map(|r| r.penalty_quartic).collect();
    check_penalty_decay_series(&sweep.eps(), &quartic)
}

/// Smallest eigenvalue of `D^2_h u` over the interior nodes; passes at
/// `>= -1e-8` with every trace positive. Nodes with a stencil neighbor on
/// the other side of the inner boundary are reported separately.
pub fn check_convexity(u: &ScalarField) -> AuditOutcome {
    let grid = u.grid();
    let hf = hessian_h(u);
    let inner = grid.mask_inner();
    let n = grid.n_per_axis();
    let mut min_all = f64::INFINITY;
    let mut min_cross = f64::INFINITY;
    let mut min_trace = f64::INFINITY;
    for &k in hf.nodes() {
        let a = hf.at(k);
        let e = a.min_eigenvalue();
        min_all = min_all.min(e);
        min_trace = min_trace.min(a.trace());
        let side = inner.get(k);
        let crosses = [k + 1, k - 1, k + n, k - n, k + n + 1, k + n - 1, k - n + 1, k - n - 1]
            .iter()
            .any(|&m| inner.get(m) != side);
        if crosses {
            min_cross = min_cross.min(e);
        }
    }
    outcome(
        "convexity",
        min_all >= -CONVEXITY_TOL && min_trace > 0.0,
        min_all,
        -CONVEXITY_TOL,
        format!("min trace {min_trace:.6e}, min eigenvalue across the inner boundary {min_cross:.6e}"),
    )
}

/// The monitored quantity must be finite everywhere and its maximum at most
/// `1e3` times its value at the largest eps (the first entry).
pub fn check_keyest_bounded_series(values: &[f64]) -> Result<AuditOutcome> {
    if values.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: values.len(),
        });
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let finite = values.iter().all(|v| v.is_finite());
    let threshold = KEYEST_MAX_GROWTH * values[0];
    Ok(outcome(
        "keyest_bounded",
        finite && max <= threshold,
        max,
        threshold,
        format!("{} points", values.len()),
    ))
}

pub fn check_keyest_bounded(sweep: &SweepReport) -> Result<AuditOutcome> {
    let v: Vec<f64> = sweep.reports.iter().map(|r| r.keyest_monitor).collect();
    check_keyest_bounded_series(&v)
}

/// `|D_h u| <= (sup_{dOmega} phi - min u) / dist(Omega_0, dOmega) + 10 h` at
/// the inner nodes. `measured` is the largest gradient norm.
pub fn check_gradient_bound(u: &ScalarField) -> AuditOutcome {
    let grid = u.grid();
    let spec = grid.spec();
    let grad = gradient_h(u);
    let max_grad = grid
        .mask_inner()
        .indices()
        .map(|k| grad[k][0].hypot(grad[k][1]))
        .fold(0.0, f64::max);
    let bound = (spec.sup_boundary_phi() - u.min_over(grid.mask_inside()))
        / grid.inner_boundary_distance()
        + GRADIENT_SLACK_H * grid.spacing();
    outcome(
        "gradient_bound",
        max_grad <= bound,
        max_grad,
        bound,
        String::new(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainSpec};
    use crate::model::{build_penalty, GrowthEnvelope};
    use std::sync::Arc;

    fn paraboloid() -> ScalarField {
        let g = Arc::new(build_grid(&DomainSpec::unit_disk(0.5).unwrap(), 33).unwrap());
        ScalarField::from_fn(g, |x| 0.5 * (x[0] * x[0] + x[1] * x[1]))
    }

    #[test]
    fn g_identity_unit_envelopes() {
        let pen = build_penalty(&GrowthEnvelope::ones()).unwrap();
        let a = check_g_identity(&pen, &[1.0, 0.0, -1.0, 3.5]);
        assert!(a.passed, "{a}");
        assert_eq!(a.measured, 0.0);
    }

    #[test]
    fn linfty_on_boundary_data() {
        let u = paraboloid();
        let a = check_linfty(&u);
        assert!(a.passed, "{a}");
        assert!(a.measured <= 0.0);
        let mut bumped = u.clone();
        let k = u.grid().index(16, 16);
        bumped.values_mut()[k] += 1.0;
        assert!(!check_linfty(&bumped).passed);
    }

    #[test]
    fn lower_bound_geometry() {
        // C1 = 0.5 + (1 - e^{-1/2}) + 1, delta = dist / 2
        let u = paraboloid();
        let dist = u.grid().inner_boundary_distance();
        let c1 = 0.5 + (1.0 - (-0.5f64).exp()) + 1.0;
        let expected = -(c1 + 0.5) / (dist / 2.0);
        assert!((linfty_lower_bound(&u) - expected).abs() < 1e-12);
    }

    #[test]
    fn decay_series() {
        let eps: Vec<f64> = (0..8).map(|k| 0.0625 * 0.5f64.powi(k)).collect();
        let good: Vec<f64> = eps.iter().map(|e| 3.0 * e * e).collect();
        let a = check_penalty_decay_series(&eps, &good).unwrap();
        assert!(a.passed);
        assert!((a.measured - 2.0).abs() < 1e-12);
        let stalled = vec![1e-3; 8];
        let b = check_penalty_decay_series(&eps, &stalled).unwrap();
        assert!(!b.passed);
        assert_eq!(b.measured, 0.0);
        assert!(matches!(
            check_penalty_decay_series(&eps[..3], &good[..3]),
            Err(Error::InsufficientData { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn convexity_examples() {
        let u = paraboloid();
        let a = check_convexity(&u);
        assert!(a.passed);
        assert!((a.measured - 1.0).abs() < 1e-9);
        let saddle = ScalarField::from_fn(Arc::clone(u.grid()), |x| x[0] * x[1]);
        let b = check_convexity(&saddle);
        assert!(!b.passed);
        assert!((b.measured + 1.0).abs() < 1e-9);
    }

    #[test]
    fn keyest_series() {
        assert!(check_keyest_bounded_series(&[1.0, 0.5, 0.7]).unwrap().passed);
        let divergent: Vec<f64> = (0..8).map(|k| 10f64.powi(k)).collect();
        assert!(!check_keyest_bounded_series(&divergent).unwrap().passed);
        assert!(!check_keyest_bounded_series(&[1.0, f64::NAN]).unwrap().passed);
        assert!(matches!(
            check_keyest_bounded_series(&[1.0]),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn gradient_bound_on_paraboloid() {
        let a = check_gradient_bound(&paraboloid());
        assert!(a.passed, "{a}");
    }

    #[test]
    fn relative_error_conventions() {
        assert_eq!(relative_error(f64::INFINITY, f64::INFINITY), 0.0);
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(1.0, 2.0), 0.5);
    }
}
