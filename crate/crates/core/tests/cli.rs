use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dgdae::cli::{run, RunConfig, CSV_BASE_COLUMNS, EXIT_OK, EXIT_SOLVER_FAILURE, EXIT_USAGE};

fn dgdae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgdae"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().skip(1).filter(|l| !l.starts_with('#')).collect()
}

fn header(csv: &str) -> Vec<&str> {
    csv.lines().next().unwrap().split(',').collect()
}

#[test]
fn run_to_stdout_has_one_row_per_step_plus_initial() {
    let out = dgdae(&["run", "--problem", "linear-test", "--scheme", "implicit-euler", "--dt", "0.05", "--steps", "7"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(!csv.contains('\r'));
    let head = header(&csv);
    assert_eq!(&head[..8], &CSV_BASE_COLUMNS);
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 8);
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), head.len());
        assert_eq!(cells[0].parse::<usize>().unwrap(), i);
        let t: f64 = cells[1].parse().unwrap();
        assert!((t - 0.05 * i as f64).abs() < 1e-12);
    }
}

#[test]
fn extra_invariants_add_one_column_each() {
    let out = dgdae(&["run", "--problem", "sinh-gordon", "--grid", "8", "--steps", "3"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let csv = String::from_utf8(out.stdout).unwrap();
    let head = header(&csv);
    let spec = dgdae::problems::by_name("sinh-gordon", Some(8), 0).unwrap();
    assert_eq!(head.len(), 8 + spec.extras.len());
    for (name, col) in spec.extras.iter().zip(&head[8..]) {
        assert_eq!(name.name(), *col);
    }
}

#[test]
fn out_path_and_snapshot_every() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let p = path.to_str().unwrap();
    let out = dgdae(&["run", "--problem", "pendulum", "--steps", "10", "--snapshot-every", "4", "--out", p]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert!(out.stdout.is_empty());
    let csv = fs::read_to_string(&path).unwrap();
    let steps: Vec<usize> = data_rows(&csv)
        .iter()
        .map(|r| r.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(steps, vec![0, 4, 8, 10]);
}

#[test]
fn usage_errors_exit_with_one() {
    for args in [
        &["run", "--problem", "nonesuch"][..],
        &["run", "--problem", "smhs", "--scheme", "rk4"],
        &["run", "--problem", "smhs", "--scheme", "gonzalez"],
        &["run", "--problem", "smhs", "--dt", "-1"],
        &["run", "--problem", "smhs", "--grid", "8"],
        &["run", "--problem", "smhs", "--out", "/nonexistent-dir/x.csv"],
        &["check", "nonesuch"],
    ] {
        let out = dgdae(args);
        assert_eq!(out.status.code(), Some(EXIT_USAGE), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn solver_failure_exits_with_two_and_marks_the_step() {
    let out = dgdae(&[
        "run", "--problem", "sinh-gordon", "--grid", "8", "--dt", "0.5", "--steps", "5",
        "--newton-max-iters", "1", "--newton-tol", "1e-15",
    ]);
    assert_eq!(out.status.code(), Some(EXIT_SOLVER_FAILURE));
    let csv = String::from_utf8(out.stdout).unwrap();
    let last = csv.lines().last().unwrap();
    assert!(last.starts_with("# failed at step "), "{last}");
    let n: usize = last.trim_start_matches("# failed at step ").parse().unwrap();
    assert_eq!(data_rows(&csv).len(), n);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# linear fixture\nproblem = linear-test\nscheme = implicit-euler\nsteps = 9\ndt=0.01\n").unwrap();
    let c = cfg.to_str().unwrap();
    let out = dgdae(&["run", "--config", c, "--steps", "2"]);
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 3);
    let t: f64 = rows[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!((t - 0.02).abs() < 1e-15);

    fs::write(&cfg, "problem = linear-test\ncolour = blue\n").unwrap();
    assert_eq!(dgdae(&["run", "--config", c]).status.code(), Some(EXIT_USAGE));
}

#[test]
fn batch_runs_write_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run".to_string(), "--jobs".into(), "2".into()];
    let mut outs = Vec::new();
    for (i, problem) in ["linear-test", "pendulum", "friction"].iter().enumerate() {
        let cfg = dir.path().join(format!("{i}.cfg"));
        let out = dir.path().join(format!("{i}.csv"));
        fs::write(&cfg, format!("problem = {problem}\nsteps = 4\nout = {}\n", out.display())).unwrap();
        args.push("--config".into());
        args.push(cfg.to_str().unwrap().into());
        outs.push(out);
    }
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = dgdae(&refs);
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    for p in &outs {
        assert_eq!(data_rows(&fs::read_to_string(p).unwrap()).len(), 5, "{}", p.display());
    }
}

#[test]
fn check_reports_structure() {
    let out = dgdae(&["check", "friction"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("structure: dissipative, constant S"), "{text}");

    let out = dgdae(&["check", "--problem", "sinh-gordon", "--grid", "8"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("structure: conservative, constant S"), "{text}");
}

#[test]
fn library_run_matches_binary_output() {
    let mut cfg = RunConfig::new("smhs");
    cfg.steps = 5;
    let mut buf = Vec::new();
    let report = run(&cfg, &mut buf);
    assert_eq!(report.exit_code, EXIT_OK);
    let bin = dgdae(&["run", "--problem", "smhs", "--steps", "5"]);
    assert_eq!(buf, bin.stdout);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<_> = (0..2).map(|i| dir.path().join(format!("{i}.csv"))).collect();
    for f in &files {
        let out = dgdae(&["run", "--problem", "smhs", "--seed", "3", "--steps", "6", "--out", f.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(EXIT_OK));
    }
    let read = |p: &Path| fs::read(p).unwrap();
    assert_eq!(read(&files[0]), read(&files[1]));
}
