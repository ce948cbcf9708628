use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thermoshape"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn out_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn error_line(o: &Output) -> serde_json::Value {
    let text = String::from_utf8(o.stderr.clone()).unwrap();
    let line = text.lines().last().unwrap();
    serde_json::from_str(line).unwrap()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn forward_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = run(&["forward", "--spec", "test1", "--delta", "0", "--out", out_arg(d)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["profile.csv", "profile_clean.csv", "field.vtk", "run_manifest.json"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f}");
    }
    assert_eq!(read(&a.join("profile.csv")), read(&a.join("profile_clean.csv")));
    let vtk = String::from_utf8(read(&a.join("field.vtk"))).unwrap();
    assert!(vtk.starts_with("# vtk DataFile"));
    assert!(vtk.contains("SCALARS temperature"));
}

#[test]
fn reconstruct_reports_a_regular_termination() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "reconstruct",
        "--spec",
        "test1",
        "--r0",
        "0.005",
        "--delta",
        "0.01",
        "--out",
        out_arg(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&read(&dir.path().join("summary.json"))).unwrap();
    let t = summary["termination"].as_str().unwrap();
    assert!(["stagnation", "t_min", "K_max"].contains(&t), "{t}");
    for f in [
        "history.csv",
        "mesh_0000.msh",
        "final_state.vtk",
        "profile.csv",
        "run_manifest.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn manifest_records_overrides_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let o = run(&[
        "reconstruct",
        "--spec",
        "test2",
        "--r0",
        "0.0025",
        "--cb",
        "0.8",
        "--rho",
        "1e-5",
        "--s",
        "2e6",
        "--kmax",
        "4",
        "--seed",
        "99",
        "--out",
        out_arg(&first),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_slice(&read(&first.join("run_manifest.json"))).unwrap();
    assert_eq!(m["command"], "reconstruct");
    assert_eq!(m["spec"]["guess"]["r0"], 0.0025);
    assert_eq!(m["spec"]["opt"]["c_b"], 0.8);
    assert_eq!(m["spec"]["opt"]["rho_mode"]["mode"], "fixed");
    assert_eq!(m["spec"]["opt"]["rho_mode"]["value"], 1e-5);
    assert_eq!(m["spec"]["opt"]["s"], 2e6);
    assert_eq!(m["spec"]["opt"]["k_max"], 4);
    assert_eq!(m["spec"]["seed"], 99);

    let second = dir.path().join("second");
    let manifest = first.join("run_manifest.json");
    let o = run(&["replay", manifest.to_str().unwrap(), "--out", out_arg(&second)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(&first.join("history.csv")), read(&second.join("history.csv")));
    assert_eq!(
        read(&first.join("run_manifest.json")),
        read(&second.join("run_manifest.json"))
    );
}

#[test]
fn sweep_writes_a_ranked_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args([
            "sweep",
            "--spec",
            "test1",
            "--r0",
            "0.004,0.005",
            "--cb",
            "0.5,1",
            "--kmax",
            "3",
        ])
        .args(["--out", out_arg(dir.path())])
        .env("THERMOSHAPE_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let costs: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(costs.windows(2).all(|w| w[0] <= w[1]));
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0], (i + 1).to_string());
        assert!(dir.path().join(r[9]).join("history.csv").exists());
    }
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("rank"));
}

#[test]
fn sensitivity_and_estimate_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("s");
    let o = run(&["sensitivity", "--spec", "test1", "--out", out_arg(&s)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(s.join("sensitivity.csv")).unwrap();
    assert!(csv.starts_with("mesh_level,h_max,min_aK,max_hK_over_aK,field_kind,t,fd_error,grad_norm\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 2 * 3);
    let cb = std::fs::read_to_string(s.join("cb_sweep.csv")).unwrap();
    assert_eq!(cb.lines().count(), 1 + 3 * 3 * 2);

    let e = dir.path().join("e");
    let o = run(&["estimate", "--spec", "test1", "--out", out_arg(&e)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value = serde_json::from_slice(&read(&e.join("indicators.json"))).unwrap();
    let cells = json["cells"].as_u64().unwrap() as usize;
    let csv = std::fs::read_to_string(e.join("indicators.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + cells);
    assert!(!json["marked"].as_array().unwrap().is_empty());
}

#[test]
fn failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let cases: [(&[&str], i32, &str); 5] = [
        (&["reconstruct", "--cb", "2", "--out", out], 2, "config"),
        (&["reconstruct", "--bogus"], 2, "config"),
        (&["forward", "--spec", "no-such-experiment", "--out", out], 2, "config"),
        (&["reconstruct", "--r0", "0.004,0.005", "--out", out], 2, "config"),
        (&["forward", "--out", "/proc/thermoshape/out"], 4, "io"),
    ];
    for (args, code, kind) in cases {
        let o = run(args);
        assert_eq!(o.status.code(), Some(code), "{args:?}");
        let line = error_line(&o);
        assert_eq!(line["kind"], kind);
        assert_eq!(line["exit_code"], code);
        assert_eq!(String::from_utf8_lossy(&o.stderr).trim().lines().count(), 1);
    }
    let o = bin()
        .args(["sweep", "--kmax", "1", "--out", out])
        .env("THERMOSHAPE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_errors_exit_with_three() {
    use thermoshape::Error;
    use thermoshape_cli::CliError;
    let e = CliError::from(Error::Inversion { cell: 4, area: -1e-9 });
    assert_eq!(e.exit_code(), 3);
    let line: serde_json::Value = serde_json::from_str(&e.to_line()).unwrap();
    assert_eq!(line["kind"], "numerical");
    assert_eq!(CliError::from(Error::Residual(1.0)).exit_code(), 3);
    assert_eq!(CliError::from(std::io::Error::other("disk")).exit_code(), 4);
}
