//! Closed-form equilateral spectrum and finite-difference checks of the
//! eigenfunctions.
//!
//! cargo run --release --example lame_spectrum -- 6

use trigap::lame::{
    check_eigenfunction, distinct_spectrum, lambda1, lambda2, phi1_sum_form, second_u, second_v,
    ThirdEigenfunction,
};

fn main() {
    let count = std::env::args().nth(1).map_or(6, |s| s.parse().expect("count"));
    println!("index,lambda,lambda_over_pi2,multiplicity,pairs");
    for (k, e) in distinct_spectrum(count).iter().enumerate() {
        let pairs: Vec<String> = e
            .representative_pairs
            .iter()
            .filter(|p| p.m >= 0 && p.n >= 0)
            .map(|p| format!("({} {})", p.m, p.n))
            .collect();
        println!(
            "{},{:.12},{:.6},{},{}",
            k + 1,
            e.value,
            e.value / std::f64::consts::PI.powi(2),
            e.multiplicity,
            pairs.join(" ")
        );
    }

    println!();
    println!("function,lambda,relative_residual,boundary_max");
    for (name, f, lambda) in [
        ("phi1", phi1_sum_form(), lambda1()),
        ("u", second_u(), lambda2()),
        ("v", second_v(), lambda2()),
    ] {
        let c = check_eigenfunction(&f, lambda, 1e-4);
        println!("{name},{lambda:.10},{:.3e},{:.3e}", c.relative_residual, c.boundary_max);
    }
    let third = ThirdEigenfunction::resolve();
    println!(
        "third ({:?}),{:.10},{:.3e},{:.3e}",
        third.form,
        trigap::lame::lambda3(),
        third.reconstructed_check.relative_residual,
        third.reconstructed_check.boundary_max
    );
    if let Some(d) = third.diagnostic() {
        println!("note: {d}");
    }
}
