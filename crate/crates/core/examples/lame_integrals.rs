//! Quadrature of every tabulated integral of the equilateral
//! eigenfunctions, with mismatches flagged.
//!
//! cargo run --release --example lame_integrals -- 12

use trigap::lame::verify_integral_tables;

fn main() -> trigap::Result<()> {
    let degree = std::env::args().nth(1).map_or(12, |s| s.parse().expect("quadrature degree"));
    let report = verify_integral_tables(degree)?;
    print!("{}", report.to_csv());
    println!();
    println!("product form constant: {:.15}", report.phi1_product_constant);
    for r in report.mismatches() {
        println!(
            "{} {}: printed {:.10} computed {:.10}",
            r.name,
            r.status.as_str(),
            r.paper_value,
            r.computed_value
        );
    }
    if let Some(d) = report.third_diagnostic {
        println!("{d}");
    }
    Ok(())
}
