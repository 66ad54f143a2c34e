//! Interrupts a small sweep, resumes it, and compares the CSV with an
//! uninterrupted run.
//!
//! cargo run --release --example resume_sweep -- 0.6,0.7,0.55,0.6 2

use trigap::sweep::{run_sweep, AccuracyPolicy, RunControl, SweepConfig, SweepOutput, Window};

fn main() -> trigap::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let window = Window::parse(args.first().map_or("0.6,0.7,0.55,0.6", String::as_str))?;
    let stop: usize = args.get(1).map_or(1, |s| s.parse().expect("units before the stop"));
    let cfg = SweepConfig::new(window, AccuracyPolicy::desk());
    let dir = std::env::temp_dir().join(format!("trigap-resume-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;

    let whole = SweepOutput::new(dir.join("whole.csv"));
    run_sweep(&cfg, &whole, RunControl::default())?;

    let parts = SweepOutput::new(dir.join("parts.csv"));
    let first = run_sweep(&cfg, &parts, RunControl { stop_after_rows: Some(stop), ..Default::default() })?;
    println!("stopped after {} units, {} cells", first.state.rows_written, first.cells.len());
    let done = run_sweep(&cfg, &parts, RunControl { resume: true, ..Default::default() })?;
    println!("resumed to {} units, {} cells", done.state.rows_written, done.cells.len());

    let same = std::fs::read(&whole.csv)? == std::fs::read(&parts.csv)?;
    println!("byte-identical: {same}");
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
