//! CSV schemas (version 1) for sweep summaries, audit outcomes and field dumps.
//!
//! Every float is written as `{:.16e}`, i.e. 17 significant digits, which
//! round-trips `f64` exactly.

use std::fs;
use std::path::{Path, PathBuf};

use abreu_core::solver::{BaselineReport, SolveReport};
use abreu_core::{AuditOutcome, ScalarField};

use crate::error::CliError;

pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const SWEEP_COLUMNS: [&str; 11] = [
    "eps",
    "iters",
    "grad_norm",
    "J",
    "Jeps",
    "min_det",
    "err_K_vs_baseline",
    "penalty_quartic",
    "keyest_monitor",
    "el_residual_median",
    "wall_ms",
];

pub const AUDIT_COLUMNS: [&str; 6] = ["name", "passed", "measured", "threshold", "eps", "detail"];

pub const FIELD_COLUMNS: [&str; 6] = ["i", "j", "x", "y", "inside", "u"];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn parse_f64(s: &str, path: &Path) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::input(path, format!("not a number: {s:?}")))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::input(path, format!("{other:?}")),
    }
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads a CSV with the exact expected header.
fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let found = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(CliError::input(
            path,
            format!("unexpected columns {:?}, expected {:?}", found, header),
        ));
    }
    r.records()
        .map(|rec| rec.map_err(|e| csv_error(path, e)))
        .collect()
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub iters: usize,
    pub grad_norm: f64,
    pub j: f64,
    pub jeps: f64,
    pub min_det: f64,
    pub err_k: Option<f64>,
    pub penalty_quartic: f64,
    pub keyest_monitor: f64,
    pub el_residual_median: f64,
    pub wall_ms: u128,
}

impl From<&SolveReport> for SweepRow {
    fn from(r: &SolveReport) -> Self {
        Self {
            eps: r.eps,
            iters: r.iters,
            grad_norm: r.final_grad_norm,
            j: r.plain_j,
            jeps: r.energy.total,
            min_det: r.min_det,
            err_k: r.err_k,
            penalty_quartic: r.penalty_quartic,
            keyest_monitor: r.keyest_monitor,
            el_residual_median: r.el_residual_median,
            wall_ms: r.wall_time.as_millis(),
        }
    }
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    write_rows(
        path,
        &SWEEP_COLUMNS,
        rows.iter().map(|r| {
            vec![
                fmt_f64(r.eps),
                r.iters.to_string(),
                fmt_f64(r.grad_norm),
                fmt_f64(r.j),
                fmt_f64(r.jeps),
                fmt_f64(r.min_det),
                fmt_opt(r.err_k),
                fmt_f64(r.penalty_quartic),
                fmt_f64(r.keyest_monitor),
                fmt_f64(r.el_residual_median),
                r.wall_ms.to_string(),
            ]
        }),
    )
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>, CliError> {
    read_rows(path, &SWEEP_COLUMNS)?
        .iter()
        .map(|rec| {
            let f = |i: usize| parse_f64(&rec[i], path);
            let err_k = if rec[6].is_empty() { None } else { Some(f(6)?) };
            Ok(SweepRow {
                eps: f(0)?,
                iters: rec[1]
                    .parse()
                    .map_err(|_| CliError::input(path, "bad iters"))?,
                grad_norm: f(2)?,
                j: f(3)?,
                jeps: f(4)?,
                min_det: f(5)?,
                err_k,
                penalty_quartic: f(7)?,
                keyest_monitor: f(8)?,
                el_residual_median: f(9)?,
                wall_ms: rec[10]
                    .parse()
                    .map_err(|_| CliError::input(path, "bad wall_ms"))?,
            })
        })
        .collect()
}

pub fn write_audit_csv(path: &Path, outcomes: &[AuditOutcome]) -> Result<(), CliError> {
    write_rows(
        path,
        &AUDIT_COLUMNS,
        outcomes.iter().map(|o| {
            vec![
                o.name.to_string(),
                o.passed.to_string(),
                fmt_f64(o.measured),
                fmt_f64(o.threshold),
                fmt_opt(o.context.eps),
                o.detail.clone(),
            ]
        }),
    )
}

/// A field dump read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub n_per_axis: usize,
    pub coords: Vec<[f64; 2]>,
    pub inside: Vec<bool>,
    pub values: Vec<f64>,
}

/// Writes every grid node in index order.
pub fn write_field_csv(path: &Path, u: &ScalarField) -> Result<(), CliError> {
    let grid = u.grid();
    let inside = grid.mask_inside();
    write_rows(
        path,
        &FIELD_COLUMNS,
        (0..grid.len()).map(|k| {
            let (i, j) = grid.ij(k);
            let x = grid.coord(k);
            vec![
                i.to_string(),
                j.to_string(),
                fmt_f64(x[0]),
                fmt_f64(x[1]),
                u8::from(inside.get(k)).to_string(),
                fmt_f64(u.get(k)),
            ]
        }),
    )
}

pub fn read_field_csv(path: &Path) -> Result<FieldDump, CliError> {
    let rows = read_rows(path, &FIELD_COLUMNS)?;
    let n = (rows.len() as f64).sqrt().round() as usize;
    if n * n != rows.len() || n == 0 {
        return Err(CliError::input(path, format!("{} rows is not a square grid", rows.len())));
    }
    let mut dump = FieldDump {
        n_per_axis: n,
        coords: Vec::with_capacity(rows.len()),
        inside: Vec::with_capacity(rows.len()),
        values: Vec::with_capacity(rows.len()),
    };
    for (k, rec) in rows.iter().enumerate() {
        let (i, j): (usize, usize) = (
            rec[0].parse().map_err(|_| CliError::input(path, "bad i"))?,
            rec[1].parse().map_err(|_| CliError::input(path, "bad j"))?,
        );
        if j * n + i != k {
            return Err(CliError::input(path, format!("row {k} holds node ({i}, {j})")));
        }
        dump.coords.push([parse_f64(&rec[2], path)?, parse_f64(&rec[3], path)?]);
        dump.inside.push(&rec[4] == "1");
        dump.values.push(parse_f64(&rec[5], path)?);
    }
    Ok(dump)
}

pub fn write_baseline_csv(path: &Path, report: &BaselineReport) -> Result<(), CliError> {
    write_rows(
        path,
        &["mu", "iters"],
        report
            .mu
            .iter()
            .zip(&report.iters)
            .map(|(mu, it)| vec![fmt_f64(*mu), it.to_string()]),
    )
}

/// `fields/u_<k>.csv` for the k-th solution of a sweep.
pub fn sweep_field_path(dir: &Path, k: usize) -> PathBuf {
    dir.join("fields").join(format!("u_{k:02}.csv"))
}

pub fn baseline_field_path(dir: &Path) -> PathBuf {
    dir.join("fields").join("baseline.csv")
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir.join("fields")).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use abreu_core::geometry::build_grid;
    use abreu_core::DomainSpec;
    use std::sync::Arc;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn sweep_rows_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let rows = vec![
            SweepRow {
                eps: 0.0625,
                iters: 7,
                grad_norm: 3e-9,
                j: -0.25,
                jeps: 1.0 / 3.0,
                min_det: 0.5,
                err_k: Some(0.1),
                penalty_quartic: 1e-7,
                keyest_monitor: 0.03,
                el_residual_median: 12.0,
                wall_ms: 42,
            },
            SweepRow {
                eps: 0.03125,
                iters: 5,
                grad_norm: 1e-9,
                j: -0.2,
                jeps: 0.3,
                min_det: 0.4,
                err_k: None,
                penalty_quartic: 2e-8,
                keyest_monitor: 0.01,
                el_residual_median: 20.0,
                wall_ms: 3,
            },
        ];
        write_sweep_csv(&path, &rows).unwrap();
        assert_eq!(read_sweep_csv(&path).unwrap(), rows);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(&SWEEP_COLUMNS.join(",")));
    }

    #[test]
    fn field_dump_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let grid = Arc::new(build_grid(&DomainSpec::unit_disk(0.5).unwrap(), 9).unwrap());
        let u = ScalarField::from_fn(Arc::clone(&grid), |x| x[0].sin() + x[1] / 3.0);
        write_field_csv(&path, &u).unwrap();
        let dump = read_field_csv(&path).unwrap();
        assert_eq!(dump.n_per_axis, 9);
        assert_eq!(dump.values, u.values());
        assert_eq!(dump.coords, grid.coords());
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_sweep_csv(&path), Err(CliError::Input { .. })));
    }
}
