//! log ξ over a uniform (τ, ν) lattice, ready for a contour plot.
//!
//! cargo run --release --example plot_grid -- 21 20 grid.csv

use trigap::eigensolver::GapOptions;
use trigap::study::{plot_csv, plot_grid};

fn main() -> trigap::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let tau_steps = args.first().map_or(9, |s| s.parse().expect("tau steps"));
    let nu_steps = args.get(1).map_or(8, |s| s.parse().expect("nu steps"));
    let cells = plot_grid(tau_steps, nu_steps, &GapOptions::new(0.1).with_max_level(8))?;
    let csv = plot_csv(&cells);
    match args.get(2) {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    if let Some(c) = cells.iter().filter(|c| c.log_xi.is_some()).min_by(|a, b| a.log_xi.partial_cmp(&b.log_xi).unwrap()) {
        eprintln!("smallest log xi {:.6} at tau {:.4}, nu {:.4}", c.log_xi.unwrap(), c.tau, c.nu);
    }
    Ok(())
}
