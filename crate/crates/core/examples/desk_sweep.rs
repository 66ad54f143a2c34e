//! Certification sweep over a window, followed by the coverage audit.
//!
//! cargo run --release --example desk_sweep -- 0.6,0.7,0.5,0.6 1e-3 out.csv extrapolated covering

use std::time::Instant;

use trigap::sweep::{
    coverage_audit, run_sweep, AccuracyPolicy, RunControl, Stepping, SweepConfig, SweepOutput,
    Window, AUDIT_SPACING,
};

fn main() -> trigap::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let window = Window::parse(args.first().map(String::as_str).unwrap_or("0.6,0.7,0.5,0.6"))?;
    let mut policy = AccuracyPolicy::desk();
    if let Some(f) = args.get(1) {
        policy.floor = f.parse().expect("accuracy floor");
        policy.initial = policy.initial.max(policy.floor);
    }
    if let Some(m) = args.get(3) {
        policy.error_model = trigap::eigensolver::ErrorModel::parse(m)?;
    }
    let out = SweepOutput::new(args.get(2).map(String::as_str).unwrap_or("desk_sweep.csv"));
    let start = Instant::now();
    let stepping = match args.get(4) {
        Some(s) => Stepping::parse(s)?,
        None => Stepping::Covering,
    };
    let cfg = SweepConfig::new(window, policy).with_stepping(stepping);
    let report = run_sweep(&cfg, &out, RunControl::default())?;
    let met = report.cells.iter().filter(|c| c.accuracy_met).count();
    println!(
        "{} rows, {} cells ({} meet the digit rule) in {:.1} s",
        report.state.rows_written,
        report.cells.len(),
        met,
        start.elapsed().as_secs_f64()
    );
    let audit = coverage_audit(&report.cells, &window, AUDIT_SPACING);
    println!(
        "audit: {} lattice points, {} uncovered",
        audit.lattice_points,
        audit.uncovered.len()
    );
    for (x, y) in audit.uncovered.iter().take(10) {
        println!("  uncovered ({x:.4}, {y:.4})");
    }
    Ok(())
}
