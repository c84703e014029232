//! Damped Newton on the discrete energies, eps-continuation, the directly
//! constrained baseline and the Euler-Lagrange residual.

use std::sync::Arc;
use std::time::{Duration, Instant};

use log::{debug, warn};

use crate::discrete::{hessian_h, DiscreteEnergy, EnergyBreakdown, ScalarField};
use crate::error::{invalid, Error, Result};
use crate::geometry::{lifted_boundary, DomainSpec, Grid, Mask};
use crate::linalg::{dot, norm_inf, pcg, CgStatus};
use crate::model::{build_penalty, Lagrangian, PenaltyG};

/// Smallest step the line search tries before giving up.
pub const MIN_STEP: f64 = 1e-14;
/// Determinant floor a starting field must clear at every barrier node.
pub const START_MIN_DET: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Tolerance on the sup-norm of the reduced gradient divided by `h^2`.
    /// Once the Newton decrement drops below the rounding floor of the
    /// energy, full steps are taken while they shrink the gradient; a solve
    /// that cannot shrink it further stops there.
    pub tol_grad: f64,
    pub max_iters: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub cg_tol: f64,
    pub cg_max: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol_grad: 1e-8,
            max_iters: 200,
            armijo: 1e-4,
            backtrack: 0.5,
            cg_tol: 1e-10,
            cg_max: 5000,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_grad > 0.0) {
            return Err(invalid("tol_grad", "must be positive"));
        }
        if self.max_iters == 0 || self.cg_max == 0 {
            return Err(invalid("max_iters", "iteration limits must be positive"));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(invalid("armijo", "must lie in (0, 1)"));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(invalid("backtrack", "must lie in (0, 1)"));
        }
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(invalid("cg_tol", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// `eps_k = eps0 * ratio^k` for `k < count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsSchedule {
    pub eps0: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Default for EpsSchedule {
    fn default() -> Self {
        Self {
            eps0: 0.0625,
            ratio: 0.5,
            count: 8,
        }
    }
}

impl EpsSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return Err(invalid("eps0", format!("must lie in (0, 1), got {}", self.eps0)));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(invalid("ratio", format!("must lie in (0, 1), got {}", self.ratio)));
        }
        if self.count == 0 {
            return Err(invalid("count", "must be at least 1"));
        }
        if !(self.values().last().copied().unwrap_or(0.0) > 0.0) {
            return Err(invalid("count", "schedule underflows to zero"));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.eps0 * self.ratio.powi(k as i32))
            .collect()
    }
}

/// Barrier weights `mu0 * ratio^k` down to `mu_min` for the baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuSchedule {
    pub mu0: f64,
    pub ratio: f64,
    pub mu_min: f64,
}

impl Default for MuSchedule {
    fn default() -> Self {
        Self {
            mu0: 0.1,
            ratio: 0.1,
            mu_min: 1e-6,
        }
    }
}

impl MuSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return Err(invalid("mu0", "must be positive"));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(invalid("mu_ratio", "must lie in (0, 1)"));
        }
        if !(self.mu_min > 0.0) {
            return Err(invalid("mu_min", "must be positive"));
        }
        Ok(())
    }

    /// Decreasing weights; the last one is `mu_min` unless `mu0 < mu_min`.
    pub fn values(&self) -> Vec<f64> {
        let mut out = vec![self.mu0];
        let mut k = 1;
        while *out.last().expect("nonempty") > self.mu_min * (1.0 + 1e-9) {
            let mu = self.mu0 * self.ratio.powi(k);
            out.push(if mu < self.mu_min * (1.0 + 1e-9) { self.mu_min } else { mu });
            k += 1;
        }
        out
    }
}

/// Iteration statistics of one Newton solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStats {
    pub iters: usize,
    pub final_grad_norm: f64,
    /// Total energy at the start and after every accepted step.
    pub energy_history: Vec<f64>,
    pub cg_iters: usize,
    pub steepest_fallbacks: usize,
}

/// Minimizes `energy` over its free nodes starting from `u0`.
pub fn minimize(
    energy: &DiscreteEnergy,
    u0: &ScalarField,
    cfg: &NewtonConfig,
) -> Result<(ScalarField, NewtonStats)> {
    cfg.validate()?;
    let grid = energy.grid();
    let h2 = grid.spacing() * grid.spacing();
    let free = energy.free_nodes();
    let mut u = u0.values().to_vec();
    let mut current = energy.value(&u)?.total;
    let mut stats = NewtonStats {
        iters: 0,
        final_grad_norm: f64::NAN,
        energy_history: vec![current],
        cg_iters: 0,
        steepest_fallbacks: 0,
    };
    let mut trial = u.clone();
    let mut full = vec![0.0; grid.len()];
    let mut out = vec![0.0; grid.len()];
    loop {
        let g = energy.gradient(&u)?;
        let gr: Vec<f64> = free.iter().map(|&k| g[k]).collect();
        let gnorm = norm_inf(&gr) / h2;
        stats.final_grad_norm = gnorm;
        debug!("newton iter {} energy {current:.16e} grad {gnorm:.3e}", stats.iters);
        if gnorm <= cfg.tol_grad {
            break;
        }
        if stats.iters >= cfg.max_iters {
            return Err(Error::MaxIters {
                iters: stats.iters,
                grad_norm: gnorm,
            });
        }

        let hess = energy.hessian(&u)?;
        let diag_full = hess.diagonal();
        let inv_diag: Vec<f64> = free
            .iter()
            .map(|&k| {
                let d = diag_full[k];
                if d > 0.0 { 1.0 / d } else { 1.0 }
            })
            .collect();
        let rhs: Vec<f64> = gr.iter().map(|v| -v).collect();
        let forcing = cfg.cg_tol.max(1e-2f64.min(gnorm));
        let cg = pcg(
            |x, y| {
                full.iter_mut().for_each(|v| *v = 0.0);
                out.iter_mut().for_each(|v| *v = 0.0);
                for (i, &k) in free.iter().enumerate() {
                    full[k] = x[i];
                }
                hess.apply(&full, &mut out);
                for (i, &k) in free.iter().enumerate() {
                    y[i] += out[k];
                }
            },
            &inv_diag,
            &rhs,
            forcing,
            cfg.cg_max,
        );
        stats.cg_iters += cg.iters;
        let mut dir = cg.x;
        let mut slope = dot(&gr, &dir);
        let usable = match cg.status {
            CgStatus::Converged => true,
            CgStatus::MaxIters => cg.rel_residual < 0.5,
            CgStatus::Indefinite => false,
        };
        if !usable || !(slope < 0.0) {
            warn!(
                "newton iter {}: CG {:?} (residual {:.2e}), steepest descent step",
                stats.iters, cg.status, cg.rel_residual
            );
            stats.steepest_fallbacks += 1;
            dir = rhs.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
            slope = dot(&gr, &dir);
        }

        // feasibility first, then sufficient decrease
        let slack = 16.0 * f64::EPSILON * energy.magnitude(&u);
        if usable && -slope <= slack {
            // the energy can no longer resolve the decrease: take the full
            // step as long as it stays feasible and shrinks the gradient
            for (i, &k) in free.iter().enumerate() {
                trial[k] = u[k] + dir[i];
            }
            let shrinks = energy.check_domain(&trial).is_ok() && {
                let gt = energy.gradient(&trial)?;
                free.iter().fold(0.0f64, |m, &k| m.max(gt[k].abs())) / h2 < gnorm
            };
            if !shrinks {
                debug!("newton iter {}: decrement {:.3e} at rounding floor", stats.iters, -slope);
                break;
            }
            current = energy.value(&trial)?.total;
            u.copy_from_slice(&trial);
            stats.iters += 1;
            stats.energy_history.push(current);
            continue;
        }
        let mut alpha = 1.0;
        loop {
            if alpha < MIN_STEP {
                return Err(Error::LineSearchStall {
                    iter: stats.iters,
                    grad_norm: gnorm,
                });
            }
            for (i, &k) in free.iter().enumerate() {
                trial[k] = u[k] + alpha * dir[i];
            }
            if energy.check_domain(&trial).is_err() {
                alpha *= cfg.backtrack;
                continue;
            }
            let value = energy.value(&trial)?.total;
            if value <= current + cfg.armijo * alpha * slope + slack {
                current = value;
                break;
            }
            alpha *= cfg.backtrack;
        }
        u.copy_from_slice(&trial);
        stats.iters += 1;
        stats.energy_history.push(current);
    }
    Ok((ScalarField::new(Arc::clone(grid), u)?, stats))
}

/// Per-eps diagnostics of a converged penalized solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub eps: f64,
    pub iters: usize,
    pub final_grad_norm: f64,
    pub energy: EnergyBreakdown,
    /// `int_{Omega_0} F` alone.
    pub plain_j: f64,
    pub min_det: f64,
    pub linfty_u: f64,
    /// `int_{Omega \ Omega_0} (u - phi_eps)^4`.
    pub penalty_quartic: f64,
    /// `(1/2 eps) int_{Omega \ Omega_0} G'(u - phi_eps)(u - phi_eps)`.
    pub keyest_monitor: f64,
    /// Interior median of `|U^ij D_ij w - f_eps / eps|`.
    pub el_residual_median: f64,
    /// Interior median of `|f_eps| / eps`.
    pub el_rhs_median: f64,
    /// Error against the reference field on the compact mask, if given.
    pub err_k: Option<f64>,
    pub energy_history: Vec<f64>,
    pub cg_iters: usize,
    pub steepest_fallbacks: usize,
    pub wall_time: Duration,
}

/// A fully specified penalized problem: grid, Lagrangian, penalty and the
/// boundary value `psi` of `w`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Arc<Grid>,
    pub model: Arc<dyn Lagrangian>,
    pub pen: Arc<PenaltyG>,
    pub psi: ScalarField,
}

impl Problem {
    /// Penalty built from the model envelopes, `psi = 1`.
    pub fn new(grid: Arc<Grid>, model: Arc<dyn Lagrangian>) -> Result<Self> {
        let pen = Arc::new(build_penalty(model.envelope())?);
        let psi = ScalarField::from_fn(Arc::clone(&grid), |_| 1.0);
        Ok(Self {
            grid,
            model,
            pen,
            psi,
        })
    }

    pub fn with_psi(mut self, psi: ScalarField) -> Result<Self> {
        if let Some(k) = self
            .grid
            .mask_boundary()
            .indices()
            .find(|&k| !(psi.get(k) > 0.0))
        {
            return Err(invalid("psi", format!("must be positive on the boundary, node {k}")));
        }
        self.psi = psi;
        Ok(self)
    }

    pub fn spec(&self) -> &DomainSpec {
        self.grid.spec()
    }

    /// `phi_eps` sampled on the grid.
    pub fn lifted(&self, eps: f64) -> Result<ScalarField> {
        let spec = self.spec();
        let f = lifted_boundary(spec, spec.defining_function(), eps, 2)?;
        Ok(ScalarField::from_fn(Arc::clone(&self.grid), f))
    }

    pub fn energy(&self, eps: f64) -> Result<DiscreteEnergy> {
        DiscreteEnergy::penalized(
            Arc::clone(&self.model),
            Arc::clone(&self.pen),
            &self.lifted(eps)?,
            eps,
        )
    }
}

/// `u0 = phi + alpha (|x - c|^2 - R^2)` with the boundary layer pinned to
/// `phi`, for the first `alpha` in `0, 1e-3, 2e-3, 4e-3, ...` up to 10 whose
/// discrete Hessians have `det >= 1e-3` at every interior node.
pub fn feasible_start(grid: &Arc<Grid>) -> Result<ScalarField> {
    let nodes: Vec<usize> = grid.mask_interior().indices().collect();
    feasible_start_on(grid, &nodes)
}

fn start_alphas() -> impl Iterator<Item = f64> {
    std::iter::once(0.0).chain(
        (0..)
            .map(|k| 1e-3 * 2f64.powi(k))
            .take_while(|a| *a <= 10.0)
            .chain(std::iter::once(10.0)),
    )
}

fn feasible_start_on(grid: &Arc<Grid>, nodes: &[usize]) -> Result<ScalarField> {
    let spec = grid.spec();
    let c = spec.outer.center;
    let r2 = spec.outer.radius * spec.outer.radius;
    let pinned = grid.mask_boundary();
    let free = Mask::from_fn(grid.len(), |k| nodes.contains(&k));
    for alpha in start_alphas() {
        let values: Vec<f64> = (0..grid.len())
            .map(|k| {
                let x = grid.coord(k);
                let phi = spec.boundary.value(x);
                if pinned.get(k) || !free.get(k) {
                    phi
                } else {
                    let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                    phi + alpha * (d2 - r2)
                }
            })
            .collect();
        let u = ScalarField::new(Arc::clone(grid), values)?;
        let hf = hessian_h(&u);
        let ok = nodes.iter().all(|&k| {
            let a = hf.at(k);
            a.a11 > 0.0 && a.det() >= START_MIN_DET
        });
        if ok {
            debug!("feasible start with alpha = {alpha}");
            return Ok(u);
        }
    }
    Err(Error::StartFailure)
}

/// Minimizes the penalized energy at `eps` and collects diagnostics.
pub fn newton_minimize(
    problem: &Problem,
    u0: &ScalarField,
    eps: f64,
    cfg: &NewtonConfig,
) -> Result<(ScalarField, SolveReport)> {
    let start = Instant::now();
    let energy = problem.energy(eps)?;
    let (u, stats) = minimize(&energy, u0, cfg)?;
    let wall_time = start.elapsed();
    let report = solve_report(problem, &energy, &u, eps, stats, wall_time)?;
    Ok((u, report))
}

fn solve_report(
    problem: &Problem,
    energy: &DiscreteEnergy,
    u: &ScalarField,
    eps: f64,
    stats: NewtonStats,
    wall_time: Duration,
) -> Result<SolveReport> {
    let v = u.values();
    let res = abreu_residual(problem, u, eps)?;
    let linfty_u = problem
        .grid
        .mask_inside()
        .indices()
        .map(|k| v[k].abs())
        .fold(0.0, f64::max);
    Ok(SolveReport {
        eps,
        iters: stats.iters,
        final_grad_norm: stats.final_grad_norm,
        energy: energy.value(v)?,
        plain_j: energy.lagrangian_value(v),
        min_det: energy.min_det(v),
        linfty_u,
        penalty_quartic: energy.penalty_quartic(v),
        keyest_monitor: energy.keyest_monitor(v),
        el_residual_median: res.median_abs_residual(),
        el_rhs_median: res.median_abs_rhs(),
        err_k: None,
        energy_history: stats.energy_history,
        cg_iters: stats.cg_iters,
        steepest_fallbacks: stats.steepest_fallbacks,
        wall_time,
    })
}

/// Reports and solutions of an eps-continuation, largest eps first.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub reports: Vec<SolveReport>,
    pub solutions: Vec<ScalarField>,
}

impl SweepReport {
    pub fn eps(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.eps).collect()
    }

    pub fn total_iters(&self) -> usize {
        self.reports.iter().map(|r| r.iters).sum()
    }
}

/// How each solve of a sweep is started.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartPolicy {
    /// From the previous solution, blended toward the feasible start if needed.
    Warm,
    /// Every solve from the feasible start.
    Cold,
}

/// Solves the schedule in decreasing eps order. When `reference` is given
/// each report carries the sup-norm error against it over `compact`.
pub fn continuation_sweep(
    problem: &Problem,
    schedule: &EpsSchedule,
    cfg: &NewtonConfig,
    reference: Option<(&ScalarField, &Mask)>,
    policy: StartPolicy,
) -> Result<SweepReport> {
    schedule.validate()?;
    let cold = feasible_start(&problem.grid)?;
    let mut reports = Vec::with_capacity(schedule.count);
    let mut solutions: Vec<ScalarField> = Vec::with_capacity(schedule.count);
    for eps in schedule.values() {
        let start = match (policy, solutions.last()) {
            (StartPolicy::Warm, Some(prev)) => warm_start(problem, prev, &cold),
            _ => cold.clone(),
        };
        let (u, mut report) = newton_minimize(problem, &start, eps, cfg).map_err(|e| Error::AtEps {
            eps,
            source: Box::new(e),
        })?;
        if let Some((r, mask)) = reference {
            report.err_k = Some(u.max_abs_diff(r, mask));
        }
        log::info!(
            "eps {eps:.4e}: {} iters, J_eps {:.10e}, err_K {:?}",
            report.iters,
            report.energy.total,
            report.err_k
        );
        reports.push(report);
        solutions.push(u);
    }
    Ok(SweepReport { reports, solutions })
}

/// The previous solution if it is a valid start, otherwise the first convex
/// combination `(1 - t) prev + t cold`, `t = 1/2, 3/4, ...`, that is.
fn warm_start(problem: &Problem, prev: &ScalarField, cold: &ScalarField) -> ScalarField {
    let nodes: Vec<usize> = problem.grid.mask_interior().indices().collect();
    let ok = |u: &ScalarField| {
        let hf = hessian_h(u);
        nodes.iter().all(|&k| {
            let a = hf.at(k);
            a.a11 > 0.0 && a.det() > 0.0
        })
    };
    if ok(prev) {
        return prev.clone();
    }
    let mut t = 0.5;
    while t < 1.0 - 1e-6 {
        let values = prev
            .values()
            .iter()
            .zip(cold.values())
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        let u = ScalarField::new(Arc::clone(&problem.grid), values).expect("same grid");
        if ok(&u) {
            return u;
        }
        t = 0.5 * (1.0 + t);
    }
    cold.clone()
}

/// Outcome of the directly constrained baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    pub mu: Vec<f64>,
    pub iters: Vec<usize>,
    pub plain_j: f64,
    pub min_det: f64,
    pub wall_time: Duration,
}

/// Minimizes `int_{Omega_0} F + mu * barrier(Omega_0)` with `u = phi` at
/// every node outside the inner region, for each `mu` of the schedule,
/// warm-starting each stage.
pub fn baseline_minimize(
    grid: &Arc<Grid>,
    model: Arc<dyn Lagrangian>,
    mu_schedule: &MuSchedule,
    cfg: &NewtonConfig,
) -> Result<(ScalarField, BaselineReport)> {
    mu_schedule.validate()?;
    let start = Instant::now();
    let inner: Vec<usize> = grid.mask_inner().indices().collect();
    let mut u = feasible_start_on(grid, &inner)?;
    let mut iters = Vec::new();
    let mus = mu_schedule.values();
    let mut last = None;
    for &mu in &mus {
        let energy = DiscreteEnergy::constrained(Arc::clone(grid), Arc::clone(&model), mu)?;
        let (next, stats) = minimize(&energy, &u, cfg).map_err(|e| Error::AtEps {
            eps: mu,
            source: Box::new(e),
        })?;
        debug!("baseline mu {mu:.1e}: {} iters", stats.iters);
        iters.push(stats.iters);
        u = next;
        last = Some(energy);
    }
    let energy = last.expect("schedule is nonempty");
    let report = BaselineReport {
        mu: mus,
        iters,
        plain_j: energy.lagrangian_value(u.values()),
        min_det: energy.min_det(u.values()),
        wall_time: start.elapsed(),
    };
    Ok((u, report))
}

/// `w = 1 / det D^2_h u` and the residual of `U^ij D_ij w = f_eps / eps`.
#[derive(Debug, Clone)]
pub struct AbreuResidual {
    pub w: ScalarField,
    /// Interior nodes, in grid order.
    pub nodes: Vec<usize>,
    /// Indexed like the grid; zero off `nodes`.
    pub lma_residual: Vec<f64>,
    pub f_eps: Vec<f64>,
    pub eps: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

impl AbreuResidual {
    pub fn median_abs_residual(&self) -> f64 {
        median(self.nodes.iter().map(|&k| self.lma_residual[k].abs()).collect())
    }

    pub fn median_abs_rhs(&self) -> f64 {
        median(self.nodes.iter().map(|&k| self.f_eps[k].abs() / self.eps).collect())
    }
}

/// Evaluates the Euler-Lagrange system at `u`. On the inner nodes
/// `f_eps = F_z - (tr F_px + F_pz . Du + F_pp : D^2 u)`, elsewhere
/// `f_eps = G'(u - phi_eps) / eps`.
pub fn abreu_residual(problem: &Problem, u: &ScalarField, eps: f64) -> Result<AbreuResidual> {
    let grid = &problem.grid;
    let hf = hessian_h(u);
    if let Some(e) = hf.first_violation() {
        return Err(e);
    }
    let phi_eps = problem.lifted(eps)?;
    let n = grid.n_per_axis();
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    let nodes: Vec<usize> = hf.nodes().to_vec();
    let mut w = vec![0.0; grid.len()];
    for k in grid.mask_boundary().indices() {
        w[k] = problem.psi.get(k);
    }
    for &k in &nodes {
        w[k] = 1.0 / hf.det(k);
    }
    let v = u.values();
    let inner = grid.mask_inner();
    let mut f_eps = vec![0.0; grid.len()];
    let mut res = vec![0.0; grid.len()];
    for &k in &nodes {
        let a = hf.at(k);
        f_eps[k] = if inner.get(k) {
            let x = grid.coord(k);
            let p = [(v[k + 1] - v[k - 1]) * 0.5 / h, (v[k + n] - v[k - n]) * 0.5 / h];
            let m = problem.model.as_ref();
            let fpz = m.d_pz(x, v[k], p);
            let fpp = m.d_pp(x, v[k], p);
            let fpp_d2u = fpp[0][0] * a.a11 + fpp[1][1] * a.a22 + (fpp[0][1] + fpp[1][0]) * a.a12;
            m.d_z(x, v[k], p) - (m.d_px_trace(x, v[k], p) + fpz[0] * p[0] + fpz[1] * p[1] + fpp_d2u)
        } else {
            problem.pen.g1(v[k] - phi_eps.get(k)) / eps
        };
        let w11 = (w[k + 1] - 2.0 * w[k] + w[k - 1]) * inv_h2;
        let w22 = (w[k + n] - 2.0 * w[k] + w[k - n]) * inv_h2;
        let w12 = (w[k + n + 1] - w[k + n - 1] - w[k - n + 1] + w[k - n - 1]) * 0.25 * inv_h2;
        let lhs = a.a22 * w11 + a.a11 * w22 - 2.0 * a.a12 * w12;
        res[k] = lhs - f_eps[k] / eps;
    }
    Ok(AbreuResidual {
        w: ScalarField::new(Arc::clone(grid), w)?,
        nodes,
        lma_residual: res,
        f_eps,
        eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainSpec, InnerShape, QuadraticData};
    use crate::model::{quadratic_lagrangian, rochet_chone, Gamma, ZeroLagrangian};
    use approx::assert_abs_diff_eq;

    fn unit_grid(n: usize) -> Arc<Grid> {
        Arc::new(build_grid(&DomainSpec::unit_disk(0.5).unwrap(), n).unwrap())
    }

    #[test]
    fn schedules() {
        let s = EpsSchedule::default();
        let v = s.values();
        assert_eq!(v.len(), 8);
        assert_eq!(v[0], 0.0625);
        assert_eq!(v[7], 2f64.powi(-11));
        assert!(EpsSchedule { count: 0, ..s }.validate().is_err());
        assert!(EpsSchedule { eps0: 1.0, ..s }.validate().is_err());
        let mu = MuSchedule::default().values();
        assert_eq!(mu.len(), 6);
        assert_eq!(*mu.last().unwrap(), 1e-6);
    }

    #[test]
    fn start_for_unit_paraboloid_needs_no_shift() {
        let g = unit_grid(17);
        let u = feasible_start(&g).unwrap();
        for k in 0..g.len() {
            let x = g.coord(k);
            assert_abs_diff_eq!(u.get(k), 0.5 * (x[0] * x[0] + x[1] * x[1]), epsilon = 1e-15);
        }
    }

    fn affine_spec(curvature: f64) -> DomainSpec {
        DomainSpec::new(
            crate::geometry::Disk {
                center: [0.0, 0.0],
                radius: 1.0,
            },
            InnerShape::Disk {
                center: [0.0, 0.0],
                radius: 0.5,
            },
            Arc::new(QuadraticData::new(curvature, [0.3, -0.2], 0.1)),
        )
        .unwrap()
    }

    #[test]
    fn start_shift_is_quadratic_away_from_the_layer() {
        let g = Arc::new(build_grid(&affine_spec(0.03), 17).unwrap());
        let u = feasible_start(&g).unwrap();
        let hf = hessian_h(&u);
        assert!(hf.min_det() >= START_MIN_DET);
        let a = hf.at(g.index(8, 8));
        assert_abs_diff_eq!(a.a12, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(a.a11, a.a22, epsilon = 1e-9);
        // det 0.03^2 < 1e-3, so alpha > 0 was needed
        assert!(a.a11 > 0.03 + 1e-6);
        for k in g.mask_boundary().indices() {
            assert_eq!(u.get(k), g.spec().boundary.value(g.coord(k)));
        }
    }

    #[test]
    fn affine_data_has_no_start_on_the_staircase() {
        // At layer corners the pinned value enters only the cross stencil,
        // so det(alpha M) = alpha^2 det M < 0 for every alpha.
        let g = Arc::new(build_grid(&affine_spec(0.0), 17).unwrap());
        assert_eq!(feasible_start(&g).unwrap_err(), Error::StartFailure);
    }

    #[test]
    fn infinite_tolerance_returns_start() {
        let g = unit_grid(17);
        let p = Problem::new(Arc::clone(&g), Arc::new(quadratic_lagrangian())).unwrap();
        let u0 = feasible_start(&g).unwrap();
        let cfg = NewtonConfig {
            tol_grad: f64::INFINITY,
            ..NewtonConfig::default()
        };
        let (u, r) = newton_minimize(&p, &u0, 0.1, &cfg).unwrap();
        assert_eq!(r.iters, 0);
        assert_eq!(u.values(), u0.values());
    }

    #[test]
    fn residual_vanishes_for_exact_data() {
        // F = 0, u = |x|^2/2 and phi_eps replaced by u itself
        let g = unit_grid(17);
        let p = Problem::new(Arc::clone(&g), Arc::new(ZeroLagrangian::default())).unwrap();
        let u = feasible_start(&g).unwrap();
        let res = abreu_residual(&p, &u, 0.1).unwrap();
        for &k in &res.nodes {
            assert_abs_diff_eq!(res.w.get(k), 1.0, epsilon = 1e-12);
        }
        // the lift makes G' nonzero in the annulus; on the inner nodes the
        // residual is exactly zero
        for k in g.mask_inner().indices() {
            assert_abs_diff_eq!(res.lma_residual[k], 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn residual_rochet_chone_paraboloid() {
        // div(Du - x) = 0 for u = |x|^2/2, so f_eps = gamma = 1
        let g = unit_grid(17);
        let rc = rochet_chone(2.0, Gamma::Constant(1.0), 1.0).unwrap();
        let p = Problem::new(Arc::clone(&g), Arc::new(rc)).unwrap();
        let u = feasible_start(&g).unwrap();
        let eps = 0.125;
        let res = abreu_residual(&p, &u, eps).unwrap();
        for k in g.mask_inner().indices() {
            assert_abs_diff_eq!(res.f_eps[k], 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(res.lma_residual[k], -1.0 / eps, epsilon = 1e-8);
        }
    }
}
