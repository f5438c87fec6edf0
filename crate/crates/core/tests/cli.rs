use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aepml"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn adapt(out: &Path, extra: &[&str]) -> Output {
    let cfg = config("example1.toml");
    let mut args = vec![
        "adapt",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--set",
        "run.max_iter=5",
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn csv_columns(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    (
        header,
        lines
            .map(|l| l.split(',').map(str::to_string).collect())
            .collect(),
    )
}

#[test]
fn adapt_writes_increasing_dof_and_reports_budget() {
    let dir = tempfile::tempdir().unwrap();
    let o = adapt(dir.path(), &["--vtk-every", "2"]);
    // tol is far below what five iterations reach
    assert_eq!(
        o.status.code(),
        Some(5),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let (header, rows) = csv_columns(&dir.path().join("convergence.csv"));
    assert_eq!(header, "iter,dof,eps_f,eps_p,e_h,seconds");
    assert_eq!(rows.len(), 5);
    let dof: Vec<usize> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(dof.windows(2).all(|w| w[1] > w[0]), "{dof:?}");
    assert!(rows.iter().all(|r| r[4].is_empty()));
    for name in ["final.vtk", "adapt_002.vtk", "adapt_004.vtk"] {
        let vtk = fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(vtk.starts_with("# vtk DataFile Version 3.0\n"), "{name}");
    }
    assert!(!dir.path().join("adapt_001.vtk").exists());
    assert!(stdout(&o).contains("status: iteration budget exhausted"));
}

#[test]
fn outputs_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    adapt(a.path(), &[]);
    adapt(b.path(), &[]);
    assert_eq!(
        fs::read(a.path().join("final.vtk")).unwrap(),
        fs::read(b.path().join("final.vtk")).unwrap()
    );
    let strip = |p: &Path| {
        csv_columns(p)
            .1
            .into_iter()
            .map(|r| r[..5].to_vec())
            .collect::<Vec<_>>()
    };
    assert_eq!(
        strip(&a.path().join("convergence.csv")),
        strip(&b.path().join("convergence.csv"))
    );
}

#[test]
fn converged_adapt_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = adapt(dir.path(), &["--set", "run.tol=1e9"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(csv_columns(&dir.path().join("convergence.csv")).1.len(), 1);
}

#[test]
fn params_meets_target() {
    let cfg = config("example1.toml");
    let o = run(&[
        "params",
        "--config",
        cfg.to_str().unwrap(),
        "--target",
        "1e-8",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap();
        line.split('=').nth(1).unwrap().trim().parse().unwrap()
    };
    assert!(value("F1*sqrt(period)") <= 1e-8);
    assert!(value("F2*sqrt(period)") <= 1e-8);
    assert_eq!(value("delta"), 3.0);
}

#[test]
fn spectral_check_passes_on_default() {
    let o = run(&["spectral-check"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() > 10);
    assert!(!text.contains("FAIL"));
}

#[test]
fn dumped_config_reparses_identically() {
    for name in ["example1.toml", "corner.toml", "highfreq.toml"] {
        let cfg = config(name);
        let first = stdout(&run(&[
            "solve",
            "--config",
            cfg.to_str().unwrap(),
            "--set",
            "run.tau=0.3",
            "--dump-config",
        ]));
        let dir = tempfile::tempdir().unwrap();
        let echoed = dir.path().join("echo.toml");
        fs::write(&echoed, &first).unwrap();
        let second = stdout(&run(&[
            "solve",
            "--config",
            echoed.to_str().unwrap(),
            "--dump-config",
        ]));
        assert_eq!(first, second, "{name}");
        assert!(first.contains("tau = 0.3"));
    }
}

#[test]
fn solve_writes_fields() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "solve",
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "run.h0=0.5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let vtk = fs::read_to_string(dir.path().join("solution.vtk")).unwrap();
    for field in [
        "p_re", "p_im", "u1_re", "u1_im", "u2_re", "u2_im", "eta", "region",
    ] {
        assert!(vtk.contains(&format!("SCALARS {field} ")), "{field}");
    }
    assert!(stdout(&o).contains("eps_f = "));
}

#[test]
fn exit_codes_by_error_family() {
    let code = |args: &[&str]| run(args).status.code();
    assert_eq!(code(&["solve", "--set", "problem.mu=-1"]), Some(2));
    assert_eq!(code(&["solve", "--set", "problem.theta=1.6"]), Some(2));
    // α_{-1} = κ for κ(1 + sin θ) = 2π at θ = π/6
    assert_eq!(
        code(&["solve", "--set", "problem.kappa=4.1887902047863905"]),
        Some(2)
    );
    assert_eq!(
        code(&["solve", "--set", "problem.profile=\"0:0 0.5:1.5 1:0\""]),
        Some(3)
    );
    let corner = config("corner.toml");
    assert_eq!(
        code(&["verify-flat", "--config", corner.to_str().unwrap()]),
        Some(2)
    );
    assert_eq!(
        code(&["solve", "--config", "/nonexistent/aepml.toml"]),
        Some(1)
    );
    assert_eq!(code(&["frobnicate"]), Some(2));
}
