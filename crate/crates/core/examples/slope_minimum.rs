//! Minimum of the first-order gap slope over eigenspace mixes and
//! diameter-preserving directions, plus a coarse landscape.
//!
//! cargo run --release --example slope_minimum -- 10000 landscape.csv

use trigap::deformation::{lambda1_slope, minimize_I_with_grid, slope_landscape_csv, slope_minimum_closed_form};

fn main() -> trigap::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let grid = args.first().map_or(2000, |s| s.parse().expect("grid size"));
    let m = minimize_I_with_grid(grid);
    let exact = slope_minimum_closed_form();
    println!("minimum I = {:.12} (closed form {:.12})", m.value, exact);
    println!("(alpha, beta) = ({:.8}, {:.8})", m.coeffs.alpha, m.coeffs.beta);
    println!("(a, b) = ({:.8}, {:.8})", m.direction.a, m.direction.b);
    println!("d lambda1/dt along it = {:.10}", lambda1_slope(&m.direction)?);
    if let Some(path) = args.get(1) {
        std::fs::write(path, slope_landscape_csv(72, 19))?;
        println!("landscape written to {path}");
    }
    Ok(())
}
