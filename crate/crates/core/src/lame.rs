//! Closed-form Dirichlet spectrum and eigenfunctions of the unit equilateral
//! triangle with vertices `(0,0)`, `(1,0)`, `(1/2, √3/2)`.
//!
//! Eigenvalues are `(16π²/27)(m² + n² − mn)` over admissible integer pairs.
//! Eigenfunctions are alternating sums of plane waves over a six-element
//! orbit of pairs; they are stored as [`TrigSum`]s so every derivative is
//! available in closed form.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{GapError, Result};
use crate::geometry::VertexTriangle;
use crate::quadrature::CompositeRule;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Subdivision level of the composite rule used for eigenfunction integrals.
pub const TABLE_SUBDIVISION: u32 = 4;

/// Default polynomial degree of the base rule for the integral tables.
pub const DEFAULT_QUAD_DEGREE: usize = 12;

pub fn equilateral_vertices() -> VertexTriangle {
    VertexTriangle::new([[0.0, 0.0], [1.0, 0.0], [0.5, 0.5 * SQRT3]])
}

/// `3^{3/4}`.
fn three_34() -> f64 {
    3f64.powf(0.75)
}

/// Integer pair indexing an equilateral eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LamePair {
    pub m: i64,
    pub n: i64,
}

impl LamePair {
    pub fn new(m: i64, n: i64) -> Result<Self> {
        if Self::admissible(m, n) {
            Ok(Self { m, n })
        } else {
            Err(GapError::InadmissiblePair { m, n })
        }
    }

    /// `m + n ≡ 0 (mod 3)`, `m ≠ 2n`, `n ≠ 2m`, `m ≠ −n`.
    pub fn admissible(m: i64, n: i64) -> bool {
        (m + n).rem_euclid(3) == 0 && m != 2 * n && n != 2 * m && m != -n
    }

    /// `m² + n² − mn`.
    pub fn quadratic_form(&self) -> i64 {
        self.m * self.m + self.n * self.n - self.m * self.n
    }

    /// The six pairs whose plane waves combine (with alternating signs) into
    /// one eigenfunction.
    pub fn orbit(&self) -> [LamePair; 6] {
        let (m, n) = (self.m, self.n);
        [
            LamePair { m: -n, n: m - n },
            LamePair { m: -n, n: -m },
            LamePair { m: n - m, n: -m },
            LamePair { m: n - m, n },
            LamePair { m, n },
            LamePair { m, n: m - n },
        ]
    }

    /// Wave vector of the plane wave attached to this pair,
    /// `(2π/3)·(n, (2m − n)/√3)`.
    pub fn wave_vector(&self) -> (f64, f64) {
        let c = 2.0 * PI / 3.0;
        (c * self.n as f64, c * (2 * self.m - self.n) as f64 / SQRT3)
    }
}

pub fn eigenvalue_of_pair(p: LamePair) -> Result<f64> {
    if !LamePair::admissible(p.m, p.n) {
        return Err(GapError::InadmissiblePair { m: p.m, n: p.n });
    }
    Ok(eigenvalue_of_form(p.quadratic_form()))
}

fn eigenvalue_of_form(q: i64) -> f64 {
    16.0 * PI * PI / 27.0 * q as f64
}

/// One distinct eigenvalue of the equilateral triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilateralEigenvalue {
    pub value: f64,
    pub multiplicity: usize,
    /// All admissible pairs producing this value.
    pub representative_pairs: Vec<LamePair>,
}

/// The first `count` distinct eigenvalues in ascending order.
///
/// Pairs are enumerated over `|m|, |n| ≤ B`, growing `B` until no pair
/// outside the box can undercut the `count`-th value: outside the box
/// `m² + n² − mn ≥ (3/4)(B+1)²`.
pub fn distinct_spectrum(count: usize) -> Vec<EquilateralEigenvalue> {
    if count == 0 {
        return Vec::new();
    }
    let mut bound: i64 = 4;
    loop {
        let mut by_form: std::collections::BTreeMap<i64, Vec<LamePair>> = Default::default();
        for m in -bound..=bound {
            for n in -bound..=bound {
                if LamePair::admissible(m, n) {
                    let p = LamePair { m, n };
                    by_form.entry(p.quadratic_form()).or_default().push(p);
                }
            }
        }
        if by_form.len() >= count {
            let kth = *by_form.keys().nth(count - 1).expect("len checked");
            let unseen = 3 * (bound + 1) * (bound + 1);
            // (3/4)(B+1)² > q_k  <=>  3(B+1)² > 4 q_k
            if unseen > 4 * kth {
                return by_form
                    .into_iter()
                    .take(count)
                    .map(|(q, pairs)| EquilateralEigenvalue {
                        value: eigenvalue_of_form(q),
                        multiplicity: pairs.len() / 6,
                        representative_pairs: pairs,
                    })
                    .collect();
            }
        }
        bound *= 2;
    }
}

/// `sin(θ + k·π/2)` for `k` in `0..4`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Phase(u8);

impl Phase {
    fn eval(self, theta: f64) -> f64 {
        match self.0 & 3 {
            0 => theta.sin(),
            1 => theta.cos(),
            2 => -theta.sin(),
            _ => -theta.cos(),
        }
    }
}

/// Plane wave `coef · sin(kx·x + ky·y + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    pub coef: f64,
    pub kx: f64,
    pub ky: f64,
    phase: Phase,
}

impl PlaneWave {
    pub fn sin(coef: f64, kx: f64, ky: f64) -> Self {
        Self { coef, kx, ky, phase: Phase(0) }
    }

    pub fn cos(coef: f64, kx: f64, ky: f64) -> Self {
        Self { coef, kx, ky, phase: Phase(1) }
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        self.coef * self.phase.eval(self.kx * x + self.ky * y)
    }
}

/// A finite sum of plane waves. Differentiation is exact.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigSum {
    pub terms: Vec<PlaneWave>,
}

impl TrigSum {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(x, y)).sum()
    }

    /// `∂ˣ^dx ∂ʸ^dy` of the sum.
    pub fn derivative(&self, dx: u32, dy: u32) -> TrigSum {
        let terms = self
            .terms
            .iter()
            .map(|t| PlaneWave {
                coef: t.coef * t.kx.powi(dx as i32) * t.ky.powi(dy as i32),
                kx: t.kx,
                ky: t.ky,
                phase: Phase(((t.phase.0 as u32 + dx + dy) % 4) as u8),
            })
            .collect();
        TrigSum { terms }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for t in &mut self.terms {
            t.coef *= factor;
        }
        self
    }

    /// Five-point finite-difference Laplacian.
    pub fn fd_laplacian(&self, x: f64, y: f64, h: f64) -> f64 {
        (self.eval(x + h, y) + self.eval(x - h, y) + self.eval(x, y + h) + self.eval(x, y - h)
            - 4.0 * self.eval(x, y))
            / (h * h)
    }
}

/// Which trigonometric family an orbit sum uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitKind {
    Sin,
    Cos,
}

/// Alternating orbit sum `Σ ± trig(k·x)` for the orbit of `pair`,
/// unnormalized. For orbits closed under negation the cosine sum vanishes.
pub fn orbit_sum(pair: LamePair, kind: OrbitKind) -> TrigSum {
    let terms = pair
        .orbit()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let (kx, ky) = p.wave_vector();
            match kind {
                OrbitKind::Sin => PlaneWave::sin(sign, kx, ky),
                OrbitKind::Cos => PlaneWave::cos(sign, kx, ky),
            }
        })
        .collect();
    TrigSum { terms }
}

/// Ground state, three-sine form with prefactor `2√2/3^{3/4}`.
pub fn phi1_sum_form() -> TrigSum {
    let c = 2.0 * 2f64.sqrt() / three_34();
    let tp = 2.0 * PI;
    TrigSum {
        terms: vec![
            PlaneWave::sin(c, 0.0, 4.0 * PI / SQRT3),
            PlaneWave::sin(-c, tp, tp / SQRT3),
            PlaneWave::sin(c, tp, -tp / SQRT3),
        ],
    }
}

/// Ground state, triple-product form exactly as printed (including the
/// `2√2/3^{3/4}` prefactor). It differs from the sum form by a constant; see
/// [`phi1_product_constant`].
pub fn phi1_product_printed(x: f64, y: f64) -> f64 {
    let c = 2.0 * 2f64.sqrt() / three_34();
    let s = SQRT3 * y / 3.0;
    c * (2.0 * PI * s).sin() * (PI * (x + s)).sin() * (PI * (x - s)).sin()
}

/// Which form of the ground state to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phi1Form {
    Sum,
    Product,
}

/// Constant `c` with `sum form = c · printed product form`, determined at the
/// centroid.
pub fn phi1_product_constant() -> f64 {
    let (x, y) = (0.5, SQRT3 / 6.0);
    phi1_sum_form().eval(x, y) / phi1_product_printed(x, y)
}

/// Normalized ground state. The product form is rescaled by
/// [`phi1_product_constant`] so both forms describe the same function.
pub fn phi1(x: f64, y: f64, form: Phi1Form) -> f64 {
    match form {
        Phi1Form::Sum => phi1_sum_form().eval(x, y),
        Phi1Form::Product => phi1_product_constant() * phi1_product_printed(x, y),
    }
}

fn second_terms(cosine: bool) -> TrigSum {
    let c = 2.0 / three_34();
    let k = 2.0 * PI / 3.0;
    // (sign, coefficient of x, coefficient of √3·y)
    let waves: [(f64, f64, f64); 6] = [
        (1.0, 5.0, -1.0),
        (-1.0, 5.0, 1.0),
        (1.0, -1.0, 3.0),
        (-1.0, -1.0, -3.0),
        (1.0, -4.0, -2.0),
        (-1.0, -4.0, 2.0),
    ];
    let terms = waves
        .iter()
        .map(|&(s, a, b)| {
            if cosine {
                PlaneWave::cos(s * c, k * a, k * b * SQRT3)
            } else {
                PlaneWave::sin(s * c, k * a, k * b * SQRT3)
            }
        })
        .collect();
    TrigSum { terms }
}

/// First basis function `u` of the second eigenspace (six cosines).
pub fn second_u() -> TrigSum {
    second_terms(true)
}

/// Second basis function `v` of the second eigenspace (six sines).
pub fn second_v() -> TrigSum {
    second_terms(false)
}

pub fn second_basis(x: f64, y: f64) -> (f64, f64) {
    (second_u().eval(x, y), second_v().eval(x, y))
}

/// Eigenvalues of the first three eigenspaces.
pub fn lambda1() -> f64 {
    16.0 * PI * PI / 3.0
}

pub fn lambda2() -> f64 {
    112.0 * PI * PI / 9.0
}

pub fn lambda3() -> f64 {
    64.0 * PI * PI / 3.0
}

/// The third eigenfunction exactly as printed, reading `sin (2π/3)(…)` as
/// `sin((2π/3)·(…))` and keeping the literal `π` inside the last argument.
pub fn third_printed() -> TrigSum {
    let c = 2.0 / three_34();
    let k = 2.0 * PI / 3.0;
    TrigSum {
        terms: vec![
            PlaneWave::sin(2.0 * c, 6.0 * k, 4.0 * SQRT3 * k),
            PlaneWave::sin(-2.0 * c, 6.0 * k, 2.0 * SQRT3 * k),
            PlaneWave::sin(-2.0 * c, 0.0, 2.0 * SQRT3 * PI * k),
        ],
    }
}

/// The third eigenfunction rebuilt from the sine orbit of `(6, 6)`,
/// normalized to unit L² norm. The orbit is closed under negation, so the six
/// terms collapse to three doubled ones and the prefactor is `√2/3^{3/4}`.
pub fn third_reconstructed() -> TrigSum {
    orbit_sum(LamePair { m: 6, n: 6 }, OrbitKind::Sin).scaled(2f64.sqrt() / three_34())
}

/// Finite-difference check of an eigenfunction candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenfunctionCheck {
    /// `‖Δf + λf‖ / (λ‖f‖)` over an interior sample grid.
    pub relative_residual: f64,
    /// Largest `|f|` over boundary samples, relative to the largest interior `|f|`.
    pub boundary_max: f64,
}

impl EigenfunctionCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.relative_residual < tol && self.boundary_max < tol
    }
}

/// Five-point residual with spacing `h` on an interior grid of the
/// equilateral triangle, plus boundary values on all three sides.
pub fn check_eigenfunction(f: &TrigSum, lambda: f64, h: f64) -> EigenfunctionCheck {
    let samples = 40;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut interior_max: f64 = 0.0;
    for j in 1..samples {
        for i in 1..samples - j {
            let (s, t) = (i as f64 / samples as f64, j as f64 / samples as f64);
            let x = s + 0.5 * t;
            let y = 0.5 * SQRT3 * t;
            let v = f.eval(x, y);
            let r = f.fd_laplacian(x, y, h) + lambda * v;
            num += r * r;
            den += v * v;
            interior_max = interior_max.max(v.abs());
        }
    }
    let mut boundary_max: f64 = 0.0;
    let verts = equilateral_vertices().vertices;
    for e in 0..3 {
        let (a, b) = (verts[e], verts[(e + 1) % 3]);
        for k in 0..=100 {
            let s = k as f64 / 100.0;
            let x = a[0] + s * (b[0] - a[0]);
            let y = a[1] + s * (b[1] - a[1]);
            boundary_max = boundary_max.max(f.eval(x, y).abs());
        }
    }
    EigenfunctionCheck {
        relative_residual: (num / den).sqrt() / lambda,
        boundary_max: boundary_max / interior_max.max(f64::MIN_POSITIVE),
    }
}

/// Which formula [`ThirdEigenfunction`] ended up using.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThirdForm {
    Printed,
    Reconstructed,
}

/// The third eigenfunction together with the diagnostic that decided which
/// formula is used.
#[derive(Debug, Clone)]
pub struct ThirdEigenfunction {
    pub form: ThirdForm,
    pub function: TrigSum,
    pub printed_check: EigenfunctionCheck,
    pub reconstructed_check: EigenfunctionCheck,
}

impl ThirdEigenfunction {
    /// Tests the printed formula; falls back to the orbit reconstruction if
    /// it is not a Dirichlet eigenfunction for `64π²/3`.
    pub fn resolve() -> Self {
        let printed = third_printed();
        let rebuilt = third_reconstructed();
        let printed_check = check_eigenfunction(&printed, lambda3(), 1e-4);
        let reconstructed_check = check_eigenfunction(&rebuilt, lambda3(), 1e-4);
        let (form, function) = if printed_check.passes(1e-5) {
            (ThirdForm::Printed, printed)
        } else {
            (ThirdForm::Reconstructed, rebuilt)
        };
        Self {
            form,
            function,
            printed_check,
            reconstructed_check,
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.function.eval(x, y)
    }

    /// Human-readable discrepancy note, `None` if the printed form passed.
    pub fn diagnostic(&self) -> Option<String> {
        match self.form {
            ThirdForm::Printed => None,
            ThirdForm::Reconstructed => Some(format!(
                "printed third eigenfunction fails (relative residual {:.3e}, boundary {:.3e}); \
                 using the (6,6) sine orbit (relative residual {:.3e}, boundary {:.3e})",
                self.printed_check.relative_residual,
                self.printed_check.boundary_max,
                self.reconstructed_check.relative_residual,
                self.reconstructed_check.boundary_max
            )),
        }
    }
}

/// Value of the third eigenfunction, using whichever formula passes the
/// eigenvalue check.
pub fn third_eigenfunction(x: f64, y: f64) -> f64 {
    ThirdEigenfunction::resolve().eval(x, y)
}

/// Outcome of one row of the integral report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableStatus {
    Pass,
    /// Quadrature disagrees with the tabulated value beyond tolerance.
    Mismatch,
    /// Quadrature itself did not settle between successive degrees.
    Unconverged,
}

impl TableStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TableStatus::Pass => "pass",
            TableStatus::Mismatch => "mismatch",
            TableStatus::Unconverged => "unconverged",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableRow {
    pub name: &'static str,
    pub paper_value: f64,
    pub computed_value: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    /// `|Q_d − Q_{d+2}|` between successive rule degrees.
    pub degree_change: f64,
    pub status: TableStatus,
}

#[derive(Debug, Clone)]
pub struct IntegralReport {
    pub quad_degree: usize,
    pub rows: Vec<TableRow>,
    /// Constant relating the sum and printed product forms of the ground state.
    pub phi1_product_constant: f64,
    pub third_form: ThirdForm,
    pub third_diagnostic: Option<String>,
}

/// Relative tolerance for nonzero table entries.
pub const TABLE_REL_TOL: f64 = 1e-6;
/// Absolute tolerance for entries tabulated as exactly zero.
pub const TABLE_ZERO_TOL: f64 = 1e-9;
/// Maximum change between successive quadrature degrees.
pub const TABLE_CONVERGENCE_TOL: f64 = 1e-10;

impl IntegralReport {
    pub fn mismatches(&self) -> impl Iterator<Item = &TableRow> {
        self.rows.iter().filter(|r| r.status != TableStatus::Pass)
    }

    pub fn row(&self, name: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// CSV with columns
    /// `integral_name,paper_value,computed_value,abs_error,rel_error,status`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("integral_name,paper_value,computed_value,abs_error,rel_error,status\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                r.name,
                r.paper_value,
                r.computed_value,
                r.abs_error,
                r.rel_error,
                r.status.as_str()
            );
        }
        out
    }
}

/// Integrand as a product of two derivatives `∂^a f · ∂^b g`.
struct Product {
    name: &'static str,
    paper_value: f64,
    left: TrigSum,
    right: Option<TrigSum>,
}

fn table_entries() -> Vec<Product> {
    let pi2 = PI * PI;
    let pi4 = pi2 * pi2;
    let phi = phi1_sum_form();
    let (u, v) = (second_u(), second_v());
    let d = |f: &TrigSum, a: u32, b: u32| f.derivative(a, b);
    let sq = |name, value, f: TrigSum| Product {
        name,
        paper_value: value,
        left: f.clone(),
        right: Some(f),
    };
    let mix = |name, value, f: TrigSum, g: TrigSum| Product {
        name,
        paper_value: value,
        left: f,
        right: Some(g),
    };
    let c = 6561.0 / 800.0;
    vec![
        sq("phi1_x^2", 8.0 * pi2 / 3.0, d(&phi, 1, 0)),
        sq("phi1_y^2", 8.0 * pi2 / 3.0, d(&phi, 0, 1)),
        mix("phi1_x*phi1_y", 0.0, d(&phi, 1, 0), d(&phi, 0, 1)),
        sq("phi1_xy^2", 32.0 * pi4 / 9.0, d(&phi, 1, 1)),
        sq("phi1_yy^2", 32.0 * pi4 / 3.0, d(&phi, 0, 2)),
        sq("phi1_xx^2", 32.0 * pi4 / 3.0, d(&phi, 2, 0)),
        Product {
            name: "phi1",
            paper_value: three_34() / (2f64.sqrt() * PI),
            left: phi.clone(),
            right: None,
        },
        mix("phi1_xx*phi1_xy", 0.0, d(&phi, 2, 0), d(&phi, 1, 1)),
        mix("phi1_yy*phi1_xy", 0.0, d(&phi, 0, 2), d(&phi, 1, 1)),
        sq("u_x^2", -c + 56.0 * pi2 / 9.0, d(&u, 1, 0)),
        sq("v_y^2", -c + 56.0 * pi2 / 9.0, d(&v, 0, 1)),
        mix("u_x*u_y", -c * SQRT3, d(&u, 1, 0), d(&u, 0, 1)),
        mix("v_x*v_y", c * SQRT3, d(&v, 1, 0), d(&v, 0, 1)),
        mix("u_y*v_y", c * SQRT3, d(&u, 0, 1), d(&v, 0, 1)),
        mix("u_x*v_y", c, d(&u, 1, 0), d(&v, 0, 1)),
        mix("u_x*v_x", -c * SQRT3, d(&u, 1, 0), d(&v, 1, 0)),
        sq("u_y^2", c + 56.0 * pi2 / 9.0, d(&u, 0, 1)),
        sq("v_x^2", c + 56.0 * pi2 / 9.0, d(&v, 1, 0)),
        sq("u_xy^2", -5103.0 * pi2 / 200.0 + 1568.0 * pi4 / 81.0, d(&u, 1, 1)),
        sq("u_yy^2", 5103.0 * pi2 / 40.0 + 1568.0 * pi4 / 27.0, d(&u, 0, 2)),
        sq("u_xx^2", 7.0 * pi2 * (-59049.0 + 44800.0 * pi2) / 5400.0, d(&u, 2, 0)),
        sq("v_xx^2", 7.0 * pi2 * (59049.0 + 44800.0 * pi2) / 5400.0, d(&v, 2, 0)),
        sq("v_xx^2_alt_54049", 7.0 * pi2 * (54049.0 + 44800.0 * pi2) / 5400.0, d(&v, 2, 0)),
        sq("v_xy^2", 5103.0 * pi2 / 200.0 + 1568.0 * pi4 / 81.0, d(&v, 1, 1)),
        sq("v_yy^2", -5103.0 * pi2 / 40.0 + 1568.0 * pi4 / 27.0, d(&v, 0, 2)),
        mix("v_xy*u_xy", -5103.0 * SQRT3 * pi2 / 200.0, d(&v, 1, 1), d(&u, 1, 1)),
        mix("v_xx*u_xx", -15309.0 * SQRT3 * pi2 / 200.0, d(&v, 2, 0), d(&u, 2, 0)),
        mix("v_yy*u_yy", 5103.0 * SQRT3 * pi2 / 40.0, d(&v, 0, 2), d(&u, 0, 2)),
    ]
}

/// Integrates `f·g` (or `f` alone) over the equilateral triangle.
pub fn integrate_product(rule: &CompositeRule, f: &TrigSum, g: Option<&TrigSum>) -> f64 {
    match g {
        Some(g) => rule.integrate(|x, y| f.eval(x, y) * g.eval(x, y)),
        None => rule.integrate(|x, y| f.eval(x, y)),
    }
}

/// Equilateral composite rule at the table subdivision level.
pub fn table_rule(quad_degree: usize) -> Result<CompositeRule> {
    CompositeRule::new(&equilateral_vertices(), TABLE_SUBDIVISION, quad_degree)
}

/// Recomputes every tabulated eigenfunction integral by quadrature and
/// compares with the tabulated value. Disagreements are reported, never
/// raised as errors.
pub fn verify_integral_tables(quad_degree: usize) -> Result<IntegralReport> {
    if quad_degree < 2 {
        return Err(GapError::InvalidInput(format!(
            "quadrature degree {quad_degree} too low for trigonometric integrands"
        )));
    }
    let rule = table_rule(quad_degree)?;
    let finer = table_rule(quad_degree + 2)?;
    let rows = table_entries()
        .into_iter()
        .map(|e| {
            let q = integrate_product(&rule, &e.left, e.right.as_ref());
            let q2 = integrate_product(&finer, &e.left, e.right.as_ref());
            let abs_error = (q - e.paper_value).abs();
            let rel_error = if e.paper_value == 0.0 {
                abs_error
            } else {
                abs_error / e.paper_value.abs()
            };
            let degree_change = (q - q2).abs();
            let scale = e.paper_value.abs().max(1.0);
            let ok = if e.paper_value == 0.0 {
                abs_error <= TABLE_ZERO_TOL
            } else {
                rel_error <= TABLE_REL_TOL
            };
            let status = if degree_change > TABLE_CONVERGENCE_TOL * scale {
                TableStatus::Unconverged
            } else if ok {
                TableStatus::Pass
            } else {
                TableStatus::Mismatch
            };
            TableRow {
                name: e.name,
                paper_value: e.paper_value,
                computed_value: q,
                abs_error,
                rel_error,
                degree_change,
                status,
            }
        })
        .collect();
    let third = ThirdEigenfunction::resolve();
    Ok(IntegralReport {
        quad_degree,
        rows,
        phi1_product_constant: phi1_product_constant(),
        third_form: third.form,
        third_diagnostic: third.diagnostic(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule() -> CompositeRule {
        table_rule(DEFAULT_QUAD_DEGREE).unwrap()
    }

    #[test]
    fn pair_eigenvalues() {
        let l = |m, n| eigenvalue_of_pair(LamePair::new(m, n).unwrap()).unwrap();
        assert!((l(0, 3) - 16.0 * PI * PI / 3.0).abs() < 1e-12);
        assert!((l(3, 3) - 16.0 * PI * PI / 3.0).abs() < 1e-12);
        assert!((l(1, 5) - 112.0 * PI * PI / 9.0).abs() < 1e-12);
        assert!((l(-1, 4) - 112.0 * PI * PI / 9.0).abs() < 1e-12);
        assert!((l(6, 6) - 64.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn inadmissible_pairs_rejected() {
        for (m, n) in [(1, 1), (2, 1), (1, 2), (3, -3), (0, 0), (4, 2)] {
            assert!(LamePair::new(m, n).is_err(), "({m}, {n})");
            assert!(eigenvalue_of_pair(LamePair { m, n }).is_err());
        }
    }

    #[test]
    fn first_three_distinct_values() {
        let s = distinct_spectrum(3);
        assert_eq!(s.len(), 3);
        assert!((s[0].value - lambda1()).abs() < 1e-12);
        assert_eq!(s[0].multiplicity, 1);
        assert!((s[1].value - lambda2()).abs() < 1e-12);
        assert_eq!(s[1].multiplicity, 2);
        assert!((s[2].value - lambda3()).abs() < 1e-12);
        assert_eq!(s[2].multiplicity, 1);
        let one = distinct_spectrum(1);
        assert_eq!(one.len(), 1);
        assert!((one[0].value - lambda1()).abs() < 1e-12);
    }

    #[test]
    fn spectrum_matches_brute_force() {
        // Independent oracle: every admissible pair with |m|, |n| <= 30.
        let mut forms: Vec<i64> = Vec::new();
        for m in -30i64..=30 {
            for n in -30i64..=30 {
                if (m + n) % 3 == 0 && m != 2 * n && n != 2 * m && m + n != 0 {
                    forms.push(m * m + n * n - m * n);
                }
            }
        }
        forms.sort_unstable();
        forms.dedup();
        let s = distinct_spectrum(5);
        for (e, q) in s.iter().zip(&forms) {
            assert!((e.value - 16.0 * PI * PI / 27.0 * *q as f64).abs() < 1e-9);
            assert_eq!(e.representative_pairs.len() % 6, 0);
        }
        assert_eq!(s.len(), 5);
    }

    #[test]
    fn orbit_reproduces_stated_bases() {
        // The (0,3) sine orbit is twice the three-sine ground state and the
        // (1,5) orbits are the printed u and v.
        let c = three_34() / (2.0 * 2f64.sqrt());
        let phi_orbit = orbit_sum(LamePair { m: 0, n: 3 }, OrbitKind::Sin);
        let u_orbit = orbit_sum(LamePair { m: 1, n: 5 }, OrbitKind::Cos);
        let v_orbit = orbit_sum(LamePair { m: 1, n: 5 }, OrbitKind::Sin);
        let (phi, u, v) = (phi1_sum_form(), second_u(), second_v());
        let k = three_34() / 2.0;
        for &(x, y) in &[(0.3, 0.2), (0.5, 0.4), (0.61, 0.1), (0.2, 0.05)] {
            assert!((phi_orbit.eval(x, y) - 2.0 * c * phi.eval(x, y)).abs() < 1e-12);
            assert!((u_orbit.eval(x, y) - k * u.eval(x, y)).abs() < 1e-12);
            assert!((v_orbit.eval(x, y) - k * v.eval(x, y)).abs() < 1e-12);
        }
        // Cosine orbit of a negation-closed orbit vanishes identically.
        let zero = orbit_sum(LamePair { m: 6, n: 6 }, OrbitKind::Cos);
        assert!(zero.eval(0.3, 0.2).abs() < 1e-12);
    }

    #[test]
    fn phi1_vanishes_on_boundary_and_is_positive_inside() {
        assert!(phi1(0.0, 0.0, Phi1Form::Sum).abs() < 1e-14);
        assert!(phi1(0.0, 0.0, Phi1Form::Product).abs() < 1e-14);
        assert!(phi1(0.5, SQRT3 / 6.0, Phi1Form::Sum) > 0.0);
        for j in 1..30 {
            for i in 1..30 - j {
                let (s, t) = (i as f64 / 30.0, j as f64 / 30.0);
                let (x, y) = (s + 0.5 * t, 0.5 * SQRT3 * t);
                assert!(phi1(x, y, Phi1Form::Sum) > 0.0, "({x}, {y})");
            }
        }
    }

    #[test]
    fn product_form_constant_is_four() {
        let c = phi1_product_constant();
        assert!((c - 4.0).abs() < 1e-12, "{c}");
        for &(x, y) in &[(0.3, 0.2), (0.5, 0.7), (0.7, 0.3)] {
            let a = phi1(x, y, Phi1Form::Sum);
            let b = phi1(x, y, Phi1Form::Product);
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn ground_state_is_normalized() {
        let r = rule();
        let phi = phi1_sum_form();
        let norm = integrate_product(&r, &phi, Some(&phi));
        assert!((norm - 1.0).abs() < 1e-12, "{norm}");
    }

    #[test]
    fn second_basis_is_orthonormal_and_dirichlet() {
        let r = rule();
        let (u, v) = (second_u(), second_v());
        assert!((integrate_product(&r, &u, Some(&u)) - 1.0).abs() < 1e-12);
        assert!((integrate_product(&r, &v, Some(&v)) - 1.0).abs() < 1e-12);
        assert!(integrate_product(&r, &u, Some(&v)).abs() < 1e-12);
        let (a, b) = second_basis(0.3, 0.0);
        assert!(a.abs() < 1e-12 && b.abs() < 1e-12);
        // Slanted sides.
        let (a, b) = second_basis(0.25, 0.25 * SQRT3);
        assert!(a.abs() < 1e-12 && b.abs() < 1e-12);
        let (a, b) = second_basis(0.8, 0.2 * SQRT3);
        assert!(a.abs() < 1e-12 && b.abs() < 1e-12);
    }

    #[test]
    fn eigenfunctions_satisfy_the_equation() {
        for (f, lambda) in [
            (phi1_sum_form(), lambda1()),
            (second_u(), lambda2()),
            (second_v(), lambda2()),
            (third_reconstructed(), lambda3()),
        ] {
            let c = check_eigenfunction(&f, lambda, 1e-4);
            assert!(c.relative_residual < 1e-5, "{c:?}");
            assert!(c.boundary_max < 1e-12, "{c:?}");
        }
        // Analytic Laplacian gives -λ f exactly.
        let u = second_u();
        let lap = |x, y| u.derivative(2, 0).eval(x, y) + u.derivative(0, 2).eval(x, y);
        assert!((lap(0.4, 0.3) + lambda2() * u.eval(0.4, 0.3)).abs() < 1e-9);
    }

    #[test]
    fn printed_third_eigenfunction_is_rejected() {
        let t = ThirdEigenfunction::resolve();
        assert_eq!(t.form, ThirdForm::Reconstructed);
        assert!(t.diagnostic().is_some());
        assert!(t.printed_check.relative_residual > 1e-3);
        assert!(third_eigenfunction(0.0, 0.0).abs() < 1e-14);
    }

    #[test]
    fn third_eigenfunction_normalized_and_orthogonal() {
        let r = rule();
        let a = third_reconstructed();
        let phi = phi1_sum_form();
        assert!((integrate_product(&r, &a, Some(&a)) - 1.0).abs() < 1e-12);
        assert!(integrate_product(&r, &a, Some(&phi)).abs() < 1e-12);
        assert!(integrate_product(&r, &a, Some(&second_u())).abs() < 1e-12);
    }

    #[test]
    fn table_examples() {
        let report = verify_integral_tables(DEFAULT_QUAD_DEGREE).unwrap();
        let row = report.row("phi1_y^2").unwrap();
        assert!((row.computed_value - 8.0 * PI * PI / 3.0).abs() < 1e-9);
        assert!((row.computed_value - 26.3190).abs() < 1e-4);
        let row = report.row("u_x*v_y").unwrap();
        assert!((row.paper_value - 8.20125).abs() < 1e-12);
        let row = report.row("phi1_x*phi1_y").unwrap();
        assert!(row.computed_value.abs() < 1e-9);
        assert!((report.phi1_product_constant - 4.0).abs() < 1e-12);
    }

    #[test]
    fn table_quadrature_converges_in_degree() {
        let report = verify_integral_tables(10).unwrap();
        for r in &report.rows {
            assert!(r.degree_change < 1e-10 * r.paper_value.abs().max(1.0), "{}: {}", r.name, r.degree_change);
        }
    }

    #[test]
    fn csv_has_header_and_one_line_per_row() {
        let report = verify_integral_tables(DEFAULT_QUAD_DEGREE).unwrap();
        let csv = report.to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "integral_name,paper_value,computed_value,abs_error,rel_error,status");
        assert_eq!(lines.len(), report.rows.len() + 1);
    }
}
