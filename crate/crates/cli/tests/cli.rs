use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use abreu_cli::output::read_sweep_csv;

fn abreu(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abreu"))
        .args(args)
        .arg("--output")
        .arg(out)
        .env_remove("ABREU_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, format!("schema_version = 1\n{body}")).unwrap();
    path.to_string_lossy().into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn quadratic_sweep_passes_and_error_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "q.toml", "[model]\nkind = \"quadratic_test\"\n");
    let out = dir.path().join("out");
    let o = abreu(&["sweep", "--config", &cfg], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_sweep_csv(&out.join("sweep.csv")).unwrap();
    assert_eq!(rows.len(), 8);
    let first = rows[0].err_k.unwrap();
    let last = rows[7].err_k.unwrap();
    assert!(last < first, "{first} -> {last}");
    for f in ["audit.csv", "effective_config.toml", "manifest.toml", "err_vs_eps.svg", "penalty_decay.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(out.join("fields").join("u_07.csv").exists());
}

#[test]
fn rochet_chone_sweep_writes_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "rc.toml",
        "[model]\nkind = \"rochet_chone\"\nq = 2.0\ngamma = 1.0\n",
    );
    let out = dir.path().join("out");
    let o = abreu(&["sweep", "--config", &cfg], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let svg = fs::read_to_string(out.join("heatmap_final.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let zero = config(dir.path(), "zero.toml", "[model]\nkind = \"exp\"\n[schedule]\ncount = 0\n");
    let unknown = config(dir.path(), "unknown.toml", "foo = 1\n[model]\nkind = \"exp\"\n");
    let small_q = config(dir.path(), "q.toml", "[model]\nkind = \"rochet_chone\"\nq = 0.5\n");
    for cfg in [zero, unknown, small_q] {
        let o = abreu(&["sweep", "--config", &cfg], &out);
        assert_eq!(code(&o), 2, "{cfg}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = abreu(&["sweep", "--config", "/nonexistent/run.toml"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn affine_boundary_data_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "affine.toml",
        "[model]\nkind = \"quadratic_test\"\n[boundary]\ncurvature = 0.0\nslope = [1.0, 0.0]\n",
    );
    let o = abreu(&["solve", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn identical_runs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "rc.toml",
        "seed = 7\n[model]\nkind = \"rochet_chone\"\n[schedule]\ncount = 4\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&abreu(&["sweep", "--config", &cfg], &a)), 0);
    assert_eq!(code(&abreu(&["sweep", "--config", &cfg], &b)), 0);
    // wall_ms is the last column and the only one allowed to differ
    let strip = |p: &Path| -> Vec<String> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    assert_eq!(strip(&a.join("sweep.csv")), strip(&b.join("sweep.csv")));
    for f in ["audit.csv", "fields/u_03.csv", "fields/baseline.csv", "heatmap_final.svg", "penalty_decay.svg"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn audit_and_report_reproduce_sweep_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "q.toml", "[model]\nkind = \"quadratic_test\"\n[schedule]\ncount = 5\n");
    let run = dir.path().join("run");
    assert_eq!(code(&abreu(&["sweep", "--config", &cfg], &run)), 0);

    let re = dir.path().join("re");
    let o = abreu(&["audit", "--config", &cfg, "--input", run.to_str().unwrap()], &re);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(run.join("audit.csv")).unwrap(), fs::read(re.join("audit.csv")).unwrap());

    let fig = dir.path().join("fig");
    let o = abreu(&["report", "--input", run.to_str().unwrap()], &fig);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["heatmap_final.svg", "heatmap_baseline.svg", "err_vs_eps.svg", "penalty_decay.svg"] {
        assert_eq!(fs::read(run.join(f)).unwrap(), fs::read(fig.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn audit_rejects_mismatched_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "q.toml", "[model]\nkind = \"quadratic_test\"\n[schedule]\ncount = 2\n");
    let other = config(dir.path(), "q17.toml", "[model]\nkind = \"quadratic_test\"\n[grid]\nn_per_axis = 17\n");
    let run = dir.path().join("run");
    assert_eq!(code(&abreu(&["sweep", "--config", &cfg], &run)), 0);
    let o = abreu(&["audit", "--config", &other, "--input", run.to_str().unwrap()], &run);
    assert_eq!(code(&o), 1);
}

#[test]
fn solve_and_baseline_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "rc.toml", "[model]\nkind = \"rochet_chone\"\n");
    let out = dir.path().join("out");
    let o = abreu(&["solve", "--config", &cfg, "--eps", "0.01"], &out);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_sweep_csv(&out.join("solve.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].eps, 0.01);

    let o = abreu(&["baseline", "--config", &cfg], &out);
    assert_eq!(code(&o), 0);
    assert!(out.join("fields").join("baseline.csv").exists());
    assert!(out.join("heatmap_baseline.svg").exists());
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "rc.toml", "[model]\nkind = \"rochet_chone\"\n");
    let out = dir.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_abreu"))
        .args(["baseline", "--config", &cfg])
        .env("ABREU_OUTPUT_DIR", &out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let echoed = fs::read_to_string(out.join("effective_config.toml")).unwrap();
    assert!(echoed.contains("from_env"));
}
