use std::process::{Command, Output};

fn trigap(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_trigap"));
    c.args(args).env_remove("TRIGAP_THREADS");
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().expect("run trigap")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn eigen_prints_csv_and_summary() {
    let o = trigap(&["eigen", "--max-level", "6", "--accuracy", "1"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), trigap::eigensolver::EIGEN_CSV_HEADER);
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[2], "6");
    let xi: f64 = row[5].parse().unwrap();
    assert!((xi - trigap::geometry::EQUILATERAL_GAP).abs() < 1.0);
    assert!(lines.next().unwrap().starts_with("lambda1"));
}

#[test]
fn invalid_apex_is_an_input_error() {
    let o = trigap(&["eigen", "--x", "0.5", "--y", "-1"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("apex height"));
    assert!(o.stdout.is_empty());
}

#[test]
fn unmet_target_exits_nonzero() {
    let o = trigap(&["eigen", "--max-level", "4", "--accuracy", "1e-9"], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains(",false"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# defaults\nmax_level = 5\naccuracy=1e-9\n\nx = 0.6\ny = 0.6\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = trigap(&["--config", cfg, "eigen"], &[]);
    assert_eq!(from_file.status.code(), Some(1));
    let row = stdout(&from_file).lines().nth(1).unwrap().to_string();
    let x: f64 = row.split(',').next().unwrap().parse().unwrap();
    assert!((x - 0.6).abs() < 1e-15 && row.contains(",5,"), "{row}");
    // The file's accuracy still applies, so the solve runs to the new cap.
    let flagged = trigap(&["--config", cfg, "eigen", "--max-level", "6"], &[]);
    assert_eq!(flagged.status.code(), Some(1));
    assert!(stdout(&flagged).lines().nth(1).unwrap().contains(",6,"));
    let loose = trigap(&["--config", cfg, "eigen", "--accuracy", "10"], &[]);
    assert!(loose.status.success());
}

#[test]
fn malformed_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "accuracy 0.1\n").unwrap();
    let o = trigap(&["--config", cfg.to_str().unwrap(), "eigen"], &[]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(&cfg, "accuracy = lots\n").unwrap();
    let o = trigap(&["--config", cfg.to_str().unwrap(), "eigen"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_count_falls_back_to_the_environment() {
    let args = ["plot-grid", "--tau-steps", "2", "--nu-steps", "2", "--max-level", "4", "--accuracy", "10"];
    assert!(trigap(&args, &[("TRIGAP_THREADS", "2")]).status.success());
    assert_eq!(trigap(&args, &[("TRIGAP_THREADS", "zero")]).status.code(), Some(2));
    assert_eq!(trigap(&args, &[("TRIGAP_THREADS", "0")]).status.code(), Some(2));
    // The flag wins over a broken environment value.
    let mut with_flag = args.to_vec();
    with_flag.extend(["--threads", "1"]);
    assert!(trigap(&with_flag, &[("TRIGAP_THREADS", "zero")]).status.success());
}

#[test]
fn plot_grid_counts_rows() {
    let o = trigap(&["plot-grid", "--tau-steps", "2", "--nu-steps", "2", "--max-level", "5", "--accuracy", "10"], &[]);
    assert!(o.status.success());
    let text = stdout(&o);
    let csv: Vec<&str> = text.lines().take_while(|l| !l.contains("cells")).collect();
    assert_eq!(csv[0], "tau,nu,log_xi");
    assert_eq!(csv.len(), 5);
}

#[test]
fn lame_spectrum_lists_the_first_values() {
    let o = trigap(&["lame-spectrum", "--count", "3"], &[]);
    assert!(o.status.success());
    let text = stdout(&o);
    let values: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    let pi2 = std::f64::consts::PI.powi(2);
    let expected = [16.0 / 3.0, 112.0 / 9.0, 64.0 / 3.0];
    assert_eq!(values.len(), 3);
    for (v, e) in values.iter().zip(expected) {
        assert!((v - e * pi2).abs() < 1e-9 * v);
    }
}

#[test]
fn resume_refuses_a_different_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let out = out.to_str().unwrap();
    let base = ["sweep", "--window", "0.6,0.7,0.5,0.55", "--accuracy", "1e-2", "--max-level", "7", "--out", out];
    let mut first = base.to_vec();
    first.extend(["--stop-after", "1"]);
    let o = trigap(&first, &[]);
    assert_eq!(o.status.code(), Some(1), "interrupted sweeps are not successes");
    let mut other = base.to_vec();
    other[2] = "0.6,0.7,0.5,0.6";
    other.push("--resume");
    let o = trigap(&other, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("different configuration"));
}

#[test]
fn bad_window_is_rejected() {
    let o = trigap(&["sweep", "--window", "0.4,0.7,0.5,0.6"], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = trigap(&["sweep", "--window", "0.6,0.7"], &[]);
    assert_eq!(o.status.code(), Some(2));
}
