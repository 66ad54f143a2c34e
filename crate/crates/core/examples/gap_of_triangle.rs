//! ξ = d²(λ₂ − λ₁) with an error estimate for one apex.
//!
//! cargo run --release --example gap_of_triangle -- 0.6 0.6 1e-3 extrapolated

use std::time::Instant;

use trigap::eigensolver::{gap_with_error, ErrorModel, GapOptions, EIGEN_CSV_HEADER};
use trigap::geometry::Triangle;

fn main() -> trigap::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let num = |k: usize, default: f64| -> f64 {
        args.get(k).map(|s| s.parse().expect("numeric argument")).unwrap_or(default)
    };
    let tri = Triangle::new(num(0, 0.6), num(1, 0.6))?;
    let model = match args.get(3) {
        Some(m) => ErrorModel::parse(m)?,
        None => ErrorModel::FineLevel,
    };
    let opts = GapOptions::new(num(2, 1e-2))
        .with_max_level(GapOptions::default_max_level(tri.apex_y()))
        .with_error_model(model);
    let start = Instant::now();
    let r = gap_with_error(&tri, &opts)?;
    println!("{EIGEN_CSV_HEADER}");
    println!("{}", r.csv_row());
    println!(
        "levels {:?}, {} error model, {:.2} s",
        r.spectrum.levels,
        model.as_str(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
