//! Solver eigenvalues of deformed equilateral triangles against the metric
//! bounds γ₋λᵢ ≤ λᵢ(t) ≤ γ₊λᵢ.
//!
//! cargo run --release --example gamma_sandwich -- 50

use trigap::eigensolver::{ErrorModel, GapOptions};
use trigap::study::{sample_directions, sandwich_check, SANDWICH_CSV_HEADER};

fn main() -> trigap::Result<()> {
    let n = std::env::args().nth(1).map_or(10, |s| s.parse().expect("direction count"));
    let opts = GapOptions::new(1e-3).with_error_model(ErrorModel::Extrapolated);
    println!("{SANDWICH_CSV_HEADER}");
    let mut violations = 0;
    for dir in sample_directions(n) {
        for t in [0.01, 0.05, 0.1] {
            let row = sandwich_check(&dir, t, &opts)?;
            violations += usize::from(!row.inside());
            println!("{}", row.csv_row());
        }
    }
    eprintln!("{violations} violations in {} checks", 3 * n);
    Ok(())
}
