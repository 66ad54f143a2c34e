//! Per-level eigenvalues, Richardson estimates and timings for one apex.
//!
//! cargo run --release --example convergence -- 0.5 0.8660254037844386 8

use std::time::Instant;

use trigap::eigensolver::eigenvalues_at_level;
use trigap::geometry::{scale_to_unit_diameter, Triangle};

fn main() -> trigap::Result<()> {
    let args: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("numeric argument"))
        .collect();
    let (x, y) = (args.first().copied().unwrap_or(0.5), args.get(1).copied().unwrap_or(0.6));
    let top = args.get(2).copied().unwrap_or(8.0) as u32;
    let (tri, _) = scale_to_unit_diameter(&Triangle::new(x, y)?);
    println!("level,lambda1,lambda2,xi,extrap_xi,err_xi,seconds");
    let mut prev: Option<(f64, f64)> = None;
    for level in 3..=top {
        let start = Instant::now();
        let v = eigenvalues_at_level(&tri, level, 2)?;
        let secs = start.elapsed().as_secs_f64();
        let xi = v[1] - v[0];
        let (ex, err) = match prev {
            Some((c1, c2)) => {
                let e1 = v[0] + (v[0] - c1) / 3.0;
                let e2 = v[1] + (v[1] - c2) / 3.0;
                (e2 - e1, 2.0 * ((v[0] - e1).abs() + (v[1] - e2).abs()))
            }
            None => (f64::NAN, f64::NAN),
        };
        println!("{level},{:.12},{:.12},{:.12},{:.12},{:.3e},{secs:.3}", v[0], v[1], xi, ex, err);
        prev = Some((v[0], v[1]));
    }
    Ok(())
}
