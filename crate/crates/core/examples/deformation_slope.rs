//! ξ along the worst diameter-preserving deformation of the equilateral
//! triangle and its first differences.
//!
//! cargo run --release --example deformation_slope -- 0.005 0.01 0.02 0.05

use trigap::deformation::{equilateral_slope_bound, lambda1_slope, DeformationDirection};
use trigap::eigensolver::{ErrorModel, GapOptions};
use trigap::study::{slope_rows, SLOPE_CSV_HEADER};

fn main() -> trigap::Result<()> {
    let mut ts: Vec<f64> =
        std::env::args().skip(1).map(|s| s.parse().expect("deformation size")).collect();
    if ts.is_empty() {
        ts = vec![0.005, 0.01, 0.02];
    }
    let dir = DeformationDirection::new(0.75f64.sqrt(), -0.5)?;
    println!("d lambda1/dt = {:.10}", lambda1_slope(&dir)?);
    println!("relative eigenvalue bound per unit t at t = 0.01: {:.6}", equilateral_slope_bound(&dir, 0.01)?);
    let opts = GapOptions::new(1e-4).with_error_model(ErrorModel::Extrapolated);
    println!("{SLOPE_CSV_HEADER}");
    for r in slope_rows(&dir, &ts, &opts)? {
        println!("{}", r.csv_row());
    }
    Ok(())
}
