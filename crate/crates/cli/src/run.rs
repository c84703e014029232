//! The subcommands. Each writes its results under an output directory and
//! returns the audit outcomes it computed.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use abreu_core::audit::{
    check_convexity, check_g_identity, check_gradient_bound, check_h_bounds, check_keyest_bounded_series,
    check_linfty, check_penalty_decay_series, AuditContext,
};
use abreu_core::geometry::compact_subset_mask;
use abreu_core::model::audit_envelope;
use abreu_core::solver::{
    baseline_minimize, continuation_sweep, feasible_start, newton_minimize, BaselineReport, SweepReport,
};
use abreu_core::{AuditOutcome, Grid, Mask, PenaltyG, ScalarField};
use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::error::CliError;
use crate::output::{
    baseline_field_path, ensure_dir, read_field_csv, read_sweep_csv, sweep_field_path, write_audit_csv,
    write_baseline_csv, write_field_csv, write_sweep_csv, write_text, FieldDump, SweepRow, CSV_SCHEMA_VERSION,
};
use crate::svg::{heatmap, line_plot, PlotSpec, Series};

pub const SWEEP_CSV: &str = "sweep.csv";
pub const AUDIT_CSV: &str = "audit.csv";
pub const SOLVE_CSV: &str = "solve.csv";
pub const BASELINE_CSV: &str = "baseline.csv";
pub const EFFECTIVE_CONFIG: &str = "effective_config.toml";
pub const MANIFEST: &str = "manifest.toml";
pub const HEATMAP_SVG: &str = "heatmap_final.svg";
pub const BASELINE_SVG: &str = "heatmap_baseline.svg";
pub const ERROR_SVG: &str = "err_vs_eps.svg";
pub const DECAY_SVG: &str = "penalty_decay.svg";

/// The output directory: the override when given, else the configured one.
pub fn output_dir(cfg: &RunConfig, override_dir: Option<&Path>) -> PathBuf {
    override_dir.map_or_else(|| cfg.output_dir.clone(), Path::to_path_buf)
}

fn prepare(cfg: &RunConfig, out: &Path, command: &str) -> Result<(), CliError> {
    ensure_dir(out)?;
    let effective = RunConfig {
        output_dir: out.to_path_buf(),
        ..cfg.clone()
    };
    write_text(&out.join(EFFECTIVE_CONFIG), &effective.to_toml())?;
    write_text(
        &out.join(MANIFEST),
        &format!(
            "command = \"{command}\"\nconfig_schema_version = {SCHEMA_VERSION}\ncsv_schema_version = {CSV_SCHEMA_VERSION}\n"
        ),
    )
}

/// Everything a sweep run produced.
#[derive(Debug, Clone)]
pub struct SweepBundle {
    pub sweep: SweepReport,
    pub baseline: ScalarField,
    pub baseline_report: BaselineReport,
    pub rows: Vec<SweepRow>,
    pub audits: Vec<AuditOutcome>,
}

/// Baseline once, the eps-continuation once, every audit, all files.
pub fn run_sweep(cfg: &RunConfig, out: &Path) -> Result<SweepBundle, CliError> {
    prepare(cfg, out, "sweep")?;
    let problem = cfg.problem()?;
    let grid = Arc::clone(&problem.grid);
    let compact = compact(cfg, &grid)?;

    info!("baseline");
    let (baseline, baseline_report) = baseline_minimize(&grid, Arc::clone(&problem.model), &cfg.mu_schedule(), &cfg.newton())?;
    info!("sweep over {} eps values", cfg.schedule.count);
    let sweep = continuation_sweep(
        &problem,
        &cfg.eps_schedule(),
        &cfg.newton(),
        Some((&baseline, &compact)),
        cfg.start_policy(),
    )?;

    let rows: Vec<SweepRow> = sweep.reports.iter().map(SweepRow::from).collect();
    write_sweep_csv(&out.join(SWEEP_CSV), &rows)?;
    write_baseline_csv(&out.join(BASELINE_CSV), &baseline_report)?;
    write_field_csv(&baseline_field_path(out), &baseline)?;
    for (k, u) in sweep.solutions.iter().enumerate() {
        write_field_csv(&sweep_field_path(out, k), u)?;
    }

    let audits = audit_all(cfg, &problem.pen, &rows, &sweep.solutions)?;
    write_audit_csv(&out.join(AUDIT_CSV), &audits)?;
    write_figures(out, &rows, sweep.solutions.last(), Some(&baseline))?;
    Ok(SweepBundle {
        sweep,
        baseline,
        baseline_report,
        rows,
        audits,
    })
}

/// One penalized solve at `eps` (default: the first of the schedule).
pub fn run_solve(cfg: &RunConfig, eps: Option<f64>, out: &Path) -> Result<(SweepRow, Vec<AuditOutcome>), CliError> {
    prepare(cfg, out, "solve")?;
    let eps = eps.unwrap_or(cfg.schedule.eps0);
    if !(eps > 0.0 && eps < 1.0) {
        return Err(CliError::Validation {
            key: "eps".into(),
            message: format!("must lie in (0, 1), got {eps}"),
        });
    }
    let problem = cfg.problem()?;
    let start = feasible_start(&problem.grid)?;
    let (u, report) = newton_minimize(&problem, &start, eps, &cfg.newton())?;
    let row = SweepRow::from(&report);
    write_sweep_csv(&out.join(SOLVE_CSV), std::slice::from_ref(&row))?;
    write_field_csv(&sweep_field_path(out, 0), &u)?;
    let audits = solution_audits(&u, eps);
    write_audit_csv(&out.join(AUDIT_CSV), &audits)?;
    write_heatmap(&out.join(HEATMAP_SVG), &u, &format!("u_eps, eps = {eps:.4e}"))?;
    Ok((row, audits))
}

/// The directly constrained baseline alone.
pub fn run_baseline(cfg: &RunConfig, out: &Path) -> Result<BaselineReport, CliError> {
    prepare(cfg, out, "baseline")?;
    let grid = cfg.grid()?;
    let (u, report) = baseline_minimize(&grid, cfg.model()?, &cfg.mu_schedule(), &cfg.newton())?;
    write_baseline_csv(&out.join(BASELINE_CSV), &report)?;
    write_field_csv(&baseline_field_path(out), &u)?;
    write_heatmap(&out.join(BASELINE_SVG), &u, "baseline")?;
    Ok(report)
}

/// Re-audits the output of an earlier sweep found in `input`.
pub fn run_audit(cfg: &RunConfig, input: &Path, out: &Path) -> Result<Vec<AuditOutcome>, CliError> {
    ensure_dir(out)?;
    let grid = cfg.grid()?;
    let mut rows = read_sweep_csv(&input.join(SWEEP_CSV))?;
    let solutions = (0..rows.len())
        .map(|k| load_field(&sweep_field_path(input, k), &grid))
        .collect::<Result<Vec<_>, _>>()?;
    let baseline_path = baseline_field_path(input);
    if baseline_path.exists() {
        let baseline = load_field(&baseline_path, &grid)?;
        let compact = compact(cfg, &grid)?;
        for (row, u) in rows.iter_mut().zip(&solutions) {
            row.err_k = Some(u.max_abs_diff(&baseline, &compact));
        }
    }
    let pen = cfg.problem()?.pen;
    let audits = audit_all(cfg, &pen, &rows, &solutions)?;
    write_audit_csv(&out.join(AUDIT_CSV), &audits)?;
    Ok(audits)
}

/// Regenerates the figures of an earlier sweep found in `input`.
pub fn run_report(input: &Path, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(out)?;
    let rows = read_sweep_csv(&input.join(SWEEP_CSV))?;
    let last = rows
        .len()
        .checked_sub(1)
        .map(|k| read_field_csv(&sweep_field_path(input, k)))
        .transpose()?;
    let baseline_path = baseline_field_path(input);
    let baseline = if baseline_path.exists() {
        Some(read_field_csv(&baseline_path)?)
    } else {
        None
    };
    write_text(&out.join(ERROR_SVG), &error_plot(&rows))?;
    write_text(&out.join(DECAY_SVG), &decay_plot(&rows))?;
    let mut files = vec![out.join(ERROR_SVG), out.join(DECAY_SVG)];
    if let (Some(u), Some(row)) = (&last, rows.last()) {
        write_text(&out.join(HEATMAP_SVG), &dump_heatmap(u, &format!("u_eps, eps = {:.4e}", row.eps)))?;
        files.push(out.join(HEATMAP_SVG));
    }
    if let Some(b) = &baseline {
        write_text(&out.join(BASELINE_SVG), &dump_heatmap(b, "baseline"))?;
        files.push(out.join(BASELINE_SVG));
    }
    Ok(files)
}

fn compact(cfg: &RunConfig, grid: &Grid) -> Result<Mask, CliError> {
    compact_subset_mask(grid, cfg.audit.compact_margin).map_err(|e| CliError::Validation {
        key: "audit.compact_margin".into(),
        message: e.to_string(),
    })
}

fn load_field(path: &Path, grid: &Arc<Grid>) -> Result<ScalarField, CliError> {
    let dump = read_field_csv(path)?;
    if dump.n_per_axis != grid.n_per_axis() {
        return Err(CliError::input(
            path,
            format!("{} nodes per axis, configuration has {}", dump.n_per_axis, grid.n_per_axis()),
        ));
    }
    let moved = dump
        .coords
        .iter()
        .zip(grid.coords())
        .any(|(a, b)| (a[0] - b[0]).abs() > 1e-12 || (a[1] - b[1]).abs() > 1e-12);
    if moved {
        return Err(CliError::input(path, "node coordinates differ from the configured grid"));
    }
    ScalarField::new(Arc::clone(grid), dump.values).map_err(CliError::from)
}

/// Samples for the penalty checks, uniform on `[-range, range]`.
pub fn penalty_samples(seed: u64, count: usize, range: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen_range(-range..=range)).collect()
}

fn solution_audits(u: &ScalarField, eps: f64) -> Vec<AuditOutcome> {
    let ctx = AuditContext {
        eps: Some(eps),
        n_per_axis: Some(u.grid().n_per_axis()),
    };
    vec![
        check_linfty(u).with_context(ctx),
        check_convexity(u).with_context(ctx),
        check_gradient_bound(u).with_context(ctx),
    ]
}

/// Penalty and envelope checks, per-solution bounds, and the series checks
/// that have enough points.
fn audit_all(
    cfg: &RunConfig,
    pen: &PenaltyG,
    rows: &[SweepRow],
    solutions: &[ScalarField],
) -> Result<Vec<AuditOutcome>, CliError> {
    let samples = penalty_samples(cfg.seed, cfg.audit.g_samples, cfg.audit.g_range);
    let mut out = vec![check_g_identity(pen, &samples), check_h_bounds(pen, &samples)];

    let model = cfg.model()?;
    let d = &cfg.domain;
    let x_bound = d.outer_center[0].hypot(d.outer_center[1]) + d.outer_radius;
    let env = audit_envelope(model.as_ref(), x_bound, cfg.audit.g_samples, cfg.seed);
    out.push(AuditOutcome {
        name: "envelope",
        passed: env.passed(),
        measured: env.worst_excess,
        threshold: 0.0,
        context: AuditContext::default(),
        detail: format!("{} samples, F_pp semidefinite: {}", env.samples, env.hessian_psd),
    });

    for (row, u) in rows.iter().zip(solutions) {
        out.extend(solution_audits(u, row.eps));
    }

    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let quartic: Vec<f64> = rows.iter().map(|r| r.penalty_quartic).collect();
    let keyest: Vec<f64> = rows.iter().map(|r| r.keyest_monitor).collect();
    match check_penalty_decay_series(&eps, &quartic) {
        Ok(o) => out.push(o),
        Err(e) => warn!("penalty decay audit skipped: {e}"),
    }
    match check_keyest_bounded_series(&keyest) {
        Ok(o) => out.push(o),
        Err(e) => warn!("keyest audit skipped: {e}"),
    }
    if let (Some(first), Some(last)) = (rows.first().and_then(|r| r.err_k), rows.last().and_then(|r| r.err_k)) {
        if rows.len() >= 2 {
            out.push(AuditOutcome {
                name: "err_k_decrease",
                passed: last < first,
                measured: last,
                threshold: first,
                context: AuditContext::default(),
                detail: "sup error on K against the baseline, last eps vs first".into(),
            });
        }
    }
    Ok(out)
}

fn write_heatmap(path: &Path, u: &ScalarField, title: &str) -> Result<(), CliError> {
    let grid = u.grid();
    let inside = grid.mask_inside();
    let values: Vec<Option<f64>> = (0..grid.len())
        .map(|k| inside.get(k).then(|| u.get(k)))
        .collect();
    write_text(path, &heatmap(grid.n_per_axis(), &values, title))
}

fn dump_heatmap(d: &FieldDump, title: &str) -> String {
    let values: Vec<Option<f64>> = d
        .values
        .iter()
        .zip(&d.inside)
        .map(|(&v, &i)| i.then_some(v))
        .collect();
    heatmap(d.n_per_axis, &values, title)
}

fn error_plot(rows: &[SweepRow]) -> String {
    let spec = PlotSpec {
        title: "sup error on K against the baseline".into(),
        x_label: "eps".into(),
        y_label: "err_K".into(),
        log_x: true,
        log_y: true,
    };
    let (x, y) = rows.iter().filter_map(|r| r.err_k.map(|e| (r.eps, e))).unzip();
    line_plot(&spec, &[Series { label: "err_K".into(), x, y }])
}

fn decay_plot(rows: &[SweepRow]) -> String {
    let spec = PlotSpec {
        title: "penalty decay".into(),
        x_label: "eps".into(),
        y_label: "integral of (u - phi_eps)^4 outside the inner region".into(),
        log_x: true,
        log_y: true,
    };
    let x: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let y = rows.iter().map(|r| r.penalty_quartic).collect();
    // slope-one guide through the last point
    let guide = rows
        .last()
        .map(|l| Series {
            label: "slope 1".into(),
            x: x.clone(),
            y: x.iter().map(|e| l.penalty_quartic * e / l.eps).collect(),
        })
        .into_iter();
    let mut series = vec![Series {
        label: "penalty_quartic".into(),
        x,
        y,
    }];
    series.extend(guide);
    line_plot(&spec, &series)
}

fn write_figures(
    out: &Path,
    rows: &[SweepRow],
    last: Option<&ScalarField>,
    baseline: Option<&ScalarField>,
) -> Result<(), CliError> {
    write_text(&out.join(ERROR_SVG), &error_plot(rows))?;
    write_text(&out.join(DECAY_SVG), &decay_plot(rows))?;
    if let (Some(u), Some(row)) = (last, rows.last()) {
        write_heatmap(&out.join(HEATMAP_SVG), u, &format!("u_eps, eps = {:.4e}", row.eps))?;
    }
    if let Some(b) = baseline {
        write_heatmap(&out.join(BASELINE_SVG), b, "baseline")?;
    }
    Ok(())
}

/// `Err(Audit)` when any outcome failed.
pub fn require_passed(audits: &[AuditOutcome]) -> Result<(), CliError> {
    let failed = audits.iter().filter(|a| !a.passed).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Audit { failed })
    }
}
