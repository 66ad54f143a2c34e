//! Growth of ξ on thin triangles with apex (x0, h).
//!
//! cargo run --release --example thin_scaling -- 0.5 0.1 0.05 0.02

use trigap::eigensolver::{ErrorModel, GapOptions, THIN_MAX_LEVEL};
use trigap::study::scaling_study;

fn main() -> trigap::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|s| s.parse().expect("number")).collect();
    let x0 = args.first().copied().unwrap_or(0.5);
    let heights = if args.len() > 1 { args[1..].to_vec() } else { vec![0.1, 0.05, 0.02] };
    let opts = GapOptions::new(1.0)
        .with_max_level(THIN_MAX_LEVEL)
        .with_error_model(ErrorModel::Extrapolated);
    let report = scaling_study(&heights, x0, &opts)?;
    print!("{}", report.to_csv());
    if let Some(s) = report.slope {
        println!("fitted slope of log xi against log h: {s:.4}");
    }
    println!("min xi*h^(4/3): {:.6}", report.min_scaled());
    Ok(())
}
