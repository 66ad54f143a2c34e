//! Linear deformations of a triangle: moving the apex `(j, k)` to
//! `(j, k) + t·(a, b)`.
//!
//! The deformed triangle is the original one carrying the pulled-back metric
//! `g`; the extreme eigenvalues `γ±` of `g⁻¹` sandwich every Dirichlet
//! eigenvalue, and expanding the pulled-back Laplacian in `t` gives the
//! first-order operator `L₁` whose matrix elements in the equilateral
//! eigenfunctions decide the slope of the gap.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{GapError, Result};
use crate::lame::{self, TrigSum};
use crate::quadrature::CompositeRule;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Height of the unit equilateral triangle.
pub const EQUILATERAL_HEIGHT: f64 = 0.866_025_403_784_438_6;

/// Unit direction `(a, b)` in which the apex moves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeformationDirection {
    pub a: f64,
    pub b: f64,
}

impl DeformationDirection {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if ((a * a + b * b) - 1.0).abs() > 1e-14 {
            return Err(GapError::InvalidInput(format!(
                "direction ({a}, {b}) is not a unit vector"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn from_angle(theta: f64) -> Self {
        Self {
            a: theta.cos(),
            b: theta.sin(),
        }
    }

    /// Directions that keep the diameter at one for the equilateral
    /// triangle, reduced by symmetry: `a ≥ 0` and `a + √3·b ≤ 0`.
    pub fn preserves_diameter(&self) -> bool {
        self.a >= 0.0 && self.a + SQRT3 * self.b <= 0.0
    }

    /// Apex of the equilateral triangle moved by `t` in this direction.
    pub fn deformed_equilateral_apex(&self, t: f64) -> (f64, f64) {
        (0.5 + t * self.a, EQUILATERAL_HEIGHT + t * self.b)
    }
}

fn check_no_collapse(k: f64, dir: &DeformationDirection, t: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(GapError::InvalidInput(format!("apex height must be positive, got {k}")));
    }
    if !(t >= 0.0) {
        return Err(GapError::InvalidInput(format!("magnitude must be non-negative, got {t}")));
    }
    let h = k + t * dir.b;
    if h <= 0.0 {
        return Err(GapError::Collapse(h));
    }
    Ok(h)
}

/// Linear map sending the triangle with apex `(j, k)` to the one with apex
/// `(j, k) + t·(a, b)`: `[[1, t·a/k], [0, 1 + t·b/k]]`.
pub fn deformation_matrix(
    apex: (f64, f64),
    dir: &DeformationDirection,
    t: f64,
) -> Result<[[f64; 2]; 2]> {
    let k = apex.1;
    check_no_collapse(k, dir, t)?;
    Ok([[1.0, t * dir.a / k], [0.0, 1.0 + t * dir.b / k]])
}

/// Entries of `g⁻¹ = [[A, B], [B, D]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseMetric {
    /// `A`, coefficient of `∂x²`.
    pub xx: f64,
    /// `B`, half the coefficient of `∂x∂y`.
    pub xy: f64,
    /// `D`, coefficient of `∂y²`.
    pub yy: f64,
}

impl InverseMetric {
    pub fn determinant(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }
}

pub fn inverse_metric(k: f64, dir: &DeformationDirection, t: f64) -> Result<InverseMetric> {
    let h = check_no_collapse(k, dir, t)?;
    let h2 = h * h;
    Ok(InverseMetric {
        xx: (k * k + 2.0 * dir.b * k * t + t * t) / h2,
        xy: -t * dir.a * k / h2,
        yy: k * k / h2,
    })
}

/// Extreme eigenvalues of `g⁻¹`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaBounds {
    pub gamma_minus: f64,
    pub gamma_plus: f64,
}

impl GammaBounds {
    pub fn spread(&self) -> f64 {
        self.gamma_plus - self.gamma_minus
    }

    /// `[γ₋λ, γ₊λ]`.
    pub fn sandwich(&self, lambda: f64) -> (f64, f64) {
        (self.gamma_minus * lambda, self.gamma_plus * lambda)
    }
}

pub fn gamma_bounds(k: f64, dir: &DeformationDirection, t: f64) -> Result<GammaBounds> {
    let g = inverse_metric(k, dir, t)?;
    let mean = 0.5 * (g.xx + g.yy);
    let half = 0.5 * ((g.xx - g.yy).powi(2) + 4.0 * g.xy * g.xy).sqrt();
    Ok(GammaBounds {
        gamma_minus: mean - half,
        gamma_plus: mean + half,
    })
}

/// Closed form `γ₊ − γ₋ = t·√(4k² + t² + 4bkt)/(k + tb)²`.
pub fn gamma_spread(k: f64, dir: &DeformationDirection, t: f64) -> Result<f64> {
    let h = check_no_collapse(k, dir, t)?;
    Ok(t * (4.0 * k * k + t * t + 4.0 * dir.b * k * t).sqrt() / (h * h))
}

/// Bound on `|λᵢ(t) − λᵢ| / (t·λᵢ)` for the equilateral triangle:
/// `4√(3 + 2√3·b·t + t²)/(√3 + 2tb)²`.
pub fn equilateral_slope_bound(dir: &DeformationDirection, t: f64) -> Result<f64> {
    let s = SQRT3 + 2.0 * t * dir.b;
    if s <= 0.0 {
        return Err(GapError::Collapse(s / 2.0));
    }
    Ok(4.0 * (3.0 + 2.0 * SQRT3 * dir.b * t + t * t).sqrt() / (s * s))
}

/// Constant-coefficient second-order operator
/// `xx·∂x² + xy·∂x∂y + yy·∂y²`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SecondOrderOperator {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SecondOrderOperator {
    pub fn apply(&self, f: &TrigSum, x: f64, y: f64) -> f64 {
        self.xx * f.derivative(2, 0).eval(x, y)
            + self.xy * f.derivative(1, 1).eval(x, y)
            + self.yy * f.derivative(0, 2).eval(x, y)
    }

    /// Symbolic action as a new trigonometric sum.
    pub fn applied(&self, f: &TrigSum) -> TrigSum {
        let mut terms = f.derivative(2, 0).scaled(self.xx).terms;
        terms.extend(f.derivative(1, 1).scaled(self.xy).terms);
        terms.extend(f.derivative(0, 2).scaled(self.yy).terms);
        TrigSum { terms }
    }
}

/// Coefficients of the expansion `Δ = Δ₀ + t·L₁ + t²·L₂ = Δ₀ + t·L` for the
/// deformed equilateral triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationCoeffs {
    pub l: SecondOrderOperator,
    pub l1: SecondOrderOperator,
    pub l2: SecondOrderOperator,
    /// `L₁` at `t = 0`.
    pub l1_at_zero: SecondOrderOperator,
}

pub fn perturbation_operator_coeffs(dir: &DeformationDirection, t: f64) -> Result<PerturbationCoeffs> {
    let s = SQRT3 + 2.0 * t * dir.b;
    if s <= 0.0 {
        return Err(GapError::Collapse(s / 2.0));
    }
    let (a, b) = (dir.a, dir.b);
    let c1 = 4.0 * SQRT3 / (s * s);
    let c2 = 4.0 / (s * s);
    let l1 = SecondOrderOperator {
        xx: 0.0,
        xy: -c1 * a,
        yy: -c1 * b,
    };
    let l2 = SecondOrderOperator {
        xx: c2 * a * a,
        xy: 0.0,
        yy: -c2 * b * b,
    };
    let w = 1.0 + 2.0 * t * b / SQRT3;
    let pre = 1.0 / (w * w);
    let l = SecondOrderOperator {
        xx: pre * 4.0 * t * a * a / 3.0,
        xy: -pre * 4.0 * a / SQRT3,
        yy: -pre * (4.0 * b / SQRT3 + 4.0 * t * b * b / 3.0),
    };
    let z = 4.0 * SQRT3 / 3.0;
    Ok(PerturbationCoeffs {
        l,
        l1,
        l2,
        l1_at_zero: SecondOrderOperator {
            xx: 0.0,
            xy: -z * a,
            yy: -z * b,
        },
    })
}

/// `∫ f · (L₁|₀ g)` over the equilateral triangle.
fn l1_matrix_element(
    rule: &CompositeRule,
    dir: &DeformationDirection,
    f: &TrigSum,
    g: &TrigSum,
) -> f64 {
    let op = SecondOrderOperator {
        xx: 0.0,
        xy: -4.0 * SQRT3 / 3.0 * dir.a,
        yy: -4.0 * SQRT3 / 3.0 * dir.b,
    };
    let lg = op.applied(g);
    lame::integrate_product(rule, f, Some(&lg))
}

/// First-order rate of change of `λ₁` under the deformation,
/// `−∫ φ₁ (L₁|₀) φ₁`, by quadrature with exact second derivatives.
pub fn lambda1_slope(dir: &DeformationDirection) -> Result<f64> {
    let rule = lame::table_rule(lame::DEFAULT_QUAD_DEGREE)?;
    let phi = lame::phi1_sum_form();
    Ok(-l1_matrix_element(&rule, dir, &phi, &phi))
}

/// Unit coefficients of a second eigenfunction `αu + βv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondEigenspaceCoeffs {
    pub alpha: f64,
    pub beta: f64,
}

impl SecondEigenspaceCoeffs {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if ((alpha * alpha + beta * beta) - 1.0).abs() > 1e-12 {
            return Err(GapError::InvalidInput(format!(
                "({alpha}, {beta}) is not a unit vector"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn from_angle(s: f64) -> Self {
        Self {
            alpha: s.cos(),
            beta: s.sin(),
        }
    }
}

/// First-order gap slope in closed form,
/// `I = −((25600π² + Q·59049)/(1800√3))·b − (6561/200)·R·a` with
/// `Q = α² − β² + 2√3αβ`, `R = β² − α² + 2αβ/√3`.
#[allow(non_snake_case)]
pub fn slope_gap_I(c: &SecondEigenspaceCoeffs, dir: &DeformationDirection) -> f64 {
    let (al, be) = (c.alpha, c.beta);
    let q = al * al - be * be + 2.0 * SQRT3 * al * be;
    let r = be * be - al * al + 2.0 * al * be / SQRT3;
    -((25600.0 * PI * PI + q * 59049.0) / (1800.0 * SQRT3)) * dir.b - 6561.0 / 200.0 * r * dir.a
}

/// The integrals `∫ f (L₁|₀ g)` for `f, g ∈ {φ₁, u, v}`, split by the two
/// components of `L₁|₀`, so the gap slope can be evaluated from its
/// defining integrals for any `(α, β, a, b)`.
#[derive(Debug, Clone)]
pub struct SlopeMoments {
    /// `∫ φ₁ φ₁_xy`, `∫ φ₁ φ₁_yy`.
    phi_xy: f64,
    phi_yy: f64,
    /// `[[∫u u_xy, ∫u v_xy], [∫v u_xy, ∫v v_xy]]` and the `yy` analogue.
    basis_xy: [[f64; 2]; 2],
    basis_yy: [[f64; 2]; 2],
}

impl SlopeMoments {
    pub fn compute(quad_degree: usize) -> Result<Self> {
        let rule = lame::table_rule(quad_degree)?;
        let phi = lame::phi1_sum_form();
        let basis = [lame::second_u(), lame::second_v()];
        let int = |f: &TrigSum, g: &TrigSum, dx, dy| {
            lame::integrate_product(&rule, f, Some(&g.derivative(dx, dy)))
        };
        let mut basis_xy = [[0.0; 2]; 2];
        let mut basis_yy = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                basis_xy[i][j] = int(&basis[i], &basis[j], 1, 1);
                basis_yy[i][j] = int(&basis[i], &basis[j], 0, 2);
            }
        }
        Ok(Self {
            phi_xy: int(&phi, &phi, 1, 1),
            phi_yy: int(&phi, &phi, 0, 2),
            basis_xy,
            basis_yy,
        })
    }

    /// `−∫ φ (L₁|₀) φ + ∫ φ₁ (L₁|₀) φ₁` with `φ = αu + βv`.
    #[allow(non_snake_case)]
    pub fn slope_gap_I(&self, c: &SecondEigenspaceCoeffs, dir: &DeformationDirection) -> f64 {
        let z = 4.0 * SQRT3 / 3.0;
        let w = [c.alpha, c.beta];
        let quad = |m: &[[f64; 2]; 2]| {
            let mut s = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    s += w[i] * w[j] * m[i][j];
                }
            }
            s
        };
        let phi_l1_phi = z * (-dir.a * quad(&self.basis_xy) - dir.b * quad(&self.basis_yy));
        let ground_l1_ground = z * (-dir.a * self.phi_xy - dir.b * self.phi_yy);
        -phi_l1_phi + ground_l1_ground
    }
}

/// Result of minimizing the gap slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeMinimum {
    pub value: f64,
    /// Polar angle with `(α, β) = (cos s, sin s)`.
    pub s: f64,
    pub coeffs: SecondEigenspaceCoeffs,
    pub direction: DeformationDirection,
}

/// Search grid resolution for [`minimize_I`].
pub const MINIMIZE_GRID: usize = 10_000;

/// Minimizes `I` over unit `(α, β)` and diameter-preserving unit `(a, b)`
/// with `a ∈ [0, √3/2]`, `b = −√(1 − a²)`: an exhaustive grid over
/// `(s, a)` followed by a bounded pattern search from the best grid point.
#[allow(non_snake_case)]
pub fn minimize_I() -> SlopeMinimum {
    minimize_I_with_grid(MINIMIZE_GRID)
}

#[allow(non_snake_case)]
pub fn minimize_I_with_grid(grid: usize) -> SlopeMinimum {
    let a_max = SQRT3 / 2.0;
    // I depends on s only through (cos 2s, sin 2s).
    let objective = |s: f64, a: f64| {
        let c = SecondEigenspaceCoeffs::from_angle(s);
        let d = DeformationDirection {
            a,
            b: -(1.0 - a * a).max(0.0).sqrt(),
        };
        slope_gap_I(&c, &d)
    };
    let s_step = 2.0 * PI / grid as f64;
    let a_step = a_max / grid as f64;
    // Separate I = P(s)·√(1−a²) + R'(s)·a for the inner loop.
    let k0 = 25600.0 * PI * PI / (1800.0 * SQRT3);
    let k1 = 59049.0 / (1800.0 * SQRT3);
    let k2 = 6561.0 / 200.0;
    let roots: Vec<(f64, f64)> = (0..=grid)
        .map(|j| {
            let a = if j == grid { a_max } else { j as f64 * a_step };
            (a, (1.0 - a * a).sqrt())
        })
        .collect();
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..grid {
        let s = i as f64 * s_step;
        let (c2, s2) = ((2.0 * s).cos(), (2.0 * s).sin());
        let q = c2 + SQRT3 * s2;
        let r = -c2 + s2 / SQRT3;
        let p = k0 + k1 * q;
        let m = -k2 * r;
        for &(a, root) in &roots {
            let v = p * root + m * a;
            if v < best.0 {
                best = (v, s, a);
            }
        }
    }
    // Pattern search, clamped to the admissible interval in a.
    let (mut s, mut a) = (best.1, best.2);
    let mut value = objective(s, a);
    let (mut hs, mut ha) = (s_step, a_step);
    while hs > 1e-14 || ha > 1e-16 {
        let mut improved = false;
        for (ds, da) in [(hs, 0.0), (-hs, 0.0), (0.0, ha), (0.0, -ha)] {
            let (ns, na) = (s + ds, (a + da).clamp(0.0, a_max));
            let v = objective(ns, na);
            if v < value {
                value = v;
                s = ns;
                a = na;
                improved = true;
            }
        }
        if !improved {
            hs *= 0.5;
            ha *= 0.5;
        }
    }
    let s = s.rem_euclid(2.0 * PI);
    SlopeMinimum {
        value,
        s,
        coeffs: SecondEigenspaceCoeffs::from_angle(s),
        direction: DeformationDirection {
            a,
            b: -(1.0 - a * a).max(0.0).sqrt(),
        },
    }
}

/// The closed-form minimum `(25600π² − 236196)/(3600√3)`.
pub fn slope_minimum_closed_form() -> f64 {
    (25600.0 * PI * PI - 236_196.0) / (3600.0 * SQRT3)
}

/// `I` sampled on a uniform `(s, a)` lattice, as CSV `s,a,b,alpha,beta,I`.
pub fn slope_landscape_csv(s_steps: usize, a_steps: usize) -> String {
    let mut out = String::from("s,a,b,alpha,beta,I\n");
    let a_max = SQRT3 / 2.0;
    for i in 0..s_steps {
        let s = 2.0 * PI * i as f64 / s_steps as f64;
        let c = SecondEigenspaceCoeffs::from_angle(s);
        for j in 0..a_steps {
            let a = if a_steps == 1 { 0.0 } else { a_max * j as f64 / (a_steps - 1) as f64 };
            let d = DeformationDirection {
                a,
                b: -(1.0 - a * a).sqrt(),
            };
            let _ = writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                s,
                d.a,
                d.b,
                c.alpha,
                c.beta,
                slope_gap_I(&c, &d)
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir(a: f64, b: f64) -> DeformationDirection {
        DeformationDirection::new(a, b).unwrap()
    }

    #[test]
    fn matrix_examples() {
        let d = dir(0.6, -0.8);
        let m = deformation_matrix((0.5, EQUILATERAL_HEIGHT), &d, 0.0).unwrap();
        assert_eq!(m, [[1.0, 0.0], [0.0, 1.0]]);
        let m = deformation_matrix((0.5, EQUILATERAL_HEIGHT), &dir(0.0, 1.0), EQUILATERAL_HEIGHT).unwrap();
        assert!((m[1][1] - 2.0).abs() < 1e-15 && m[0][1] == 0.0);
        let t = 0.3;
        let m = deformation_matrix((0.4, 0.7), &d, t).unwrap();
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert!((det - (1.0 + t * d.b / 0.7)).abs() < 1e-15);
    }

    #[test]
    fn collapse_is_rejected() {
        let d = dir(0.0, -1.0);
        assert!(matches!(
            deformation_matrix((0.5, 0.5), &d, 0.5),
            Err(GapError::Collapse(_))
        ));
        assert!(inverse_metric(0.5, &d, 0.6).is_err());
        assert!(gamma_bounds(0.5, &d, 0.7).is_err());
        assert!(DeformationDirection::new(1.0, 1.0).is_err());
    }

    #[test]
    fn inverse_metric_examples() {
        let g = inverse_metric(0.7, &dir(0.6, 0.8), 0.0).unwrap();
        assert!((g.xx - 1.0).abs() < 1e-15 && g.xy == 0.0 && (g.yy - 1.0).abs() < 1e-15);
        let k = EQUILATERAL_HEIGHT;
        let g = inverse_metric(k, &dir(0.0, -1.0), 0.1).unwrap();
        let h2 = (k - 0.1) * (k - 0.1);
        assert!((g.xx - (0.75 - 0.1 * SQRT3 + 0.01) / h2).abs() < 1e-14);
        assert!(g.xy.abs() < 1e-15);
        assert!((g.yy - 0.75 / h2).abs() < 1e-14);
    }

    #[test]
    fn inverse_metric_is_inverse_of_pulled_back_metric() {
        // Oracle: M⁻¹ M⁻ᵀ computed from the deformation matrix directly.
        let (k, d, t) = (0.6, dir(0.28, -0.96), 0.2);
        let m = deformation_matrix((0.3, k), &d, t).unwrap();
        let det = m[0][0] * m[1][1];
        let inv = [[1.0, -m[0][1] / det], [0.0, 1.0 / m[1][1]]];
        let xx = inv[0][0] * inv[0][0] + inv[0][1] * inv[0][1];
        let xy = inv[0][1] * inv[1][1];
        let yy = inv[1][1] * inv[1][1];
        let g = inverse_metric(k, &d, t).unwrap();
        assert!((g.xx - xx).abs() < 1e-14);
        assert!((g.xy - xy).abs() < 1e-14);
        assert!((g.yy - yy).abs() < 1e-14);
    }

    #[test]
    fn gamma_at_zero_is_one() {
        let g = gamma_bounds(0.8, &dir(0.6, -0.8), 0.0).unwrap();
        assert!((g.gamma_minus - 1.0).abs() < 1e-15);
        assert!((g.gamma_plus - 1.0).abs() < 1e-15);
        assert_eq!(gamma_spread(0.8, &dir(0.6, -0.8), 0.0).unwrap(), 0.0);
    }

    #[test]
    fn equilateral_slope_bound_matches_quoted_constant() {
        let b = equilateral_slope_bound(&dir(0.0, -1.0), 0.0004).unwrap();
        assert!(b <= 2.32, "{b}");
        // Same quantity through the general spread formula.
        let s = gamma_spread(EQUILATERAL_HEIGHT, &dir(0.0, -1.0), 0.0004).unwrap() / 0.0004;
        assert!((s - b).abs() < 1e-12);
    }

    #[test]
    fn l1_examples() {
        let c = perturbation_operator_coeffs(&dir(1.0, 0.0), 0.0).unwrap();
        assert!((c.l1.xy + 4.0 * SQRT3 / 3.0).abs() < 1e-14);
        assert_eq!(c.l1.yy, 0.0);
        assert!((c.l1.xy - c.l1_at_zero.xy).abs() < 1e-14);
        let c = perturbation_operator_coeffs(&dir(0.0, 1.0), 0.0).unwrap();
        assert!((c.l1.yy + 4.0 * SQRT3 / 3.0).abs() < 1e-14);
        assert_eq!(c.l1.xy, 0.0);
    }

    #[test]
    fn lambda1_slope_vanishes_sideways() {
        let s = lambda1_slope(&dir(1.0, 0.0)).unwrap();
        assert!(s.abs() < 1e-9, "{s}");
    }

    #[test]
    fn lambda1_slope_closed_form() {
        // −∫φ₁ L₁ φ₁ = −(4√3/3)·b·∫(φ₁)_y² = −(2b/√3)·λ₁ after integration by parts.
        for theta in [0.3, 1.2, -0.7, -PI / 2.0] {
            let d = DeformationDirection::from_angle(theta);
            let s = lambda1_slope(&d).unwrap();
            let expected = -2.0 * d.b / SQRT3 * lame::lambda1();
            assert!((s - expected).abs() < 1e-8, "{s} vs {expected}");
        }
    }

    #[test]
    fn slope_examples() {
        let v = slope_gap_I(
            &SecondEigenspaceCoeffs::new(0.0, 1.0).unwrap(),
            &dir(SQRT3 / 2.0, -0.5),
        );
        assert!((v - slope_minimum_closed_form()).abs() < 1e-12);
        assert!((v - 2.6407).abs() < 1e-4);
        let v = slope_gap_I(&SecondEigenspaceCoeffs::new(1.0, 0.0).unwrap(), &dir(0.0, -1.0));
        let expected = (25600.0 * PI * PI + 59049.0) / (1800.0 * SQRT3);
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn minimizer_finds_closed_form_minimum() {
        let m = minimize_I_with_grid(2_000);
        assert!((m.value - slope_minimum_closed_form()).abs() < 1e-9);
        assert!(m.value > 2.64);
        assert!(m.coeffs.alpha.abs() < 1e-6 && (m.coeffs.beta.abs() - 1.0).abs() < 1e-9);
        assert!((m.direction.a - SQRT3 / 2.0).abs() < 1e-9);
        assert!((m.direction.b + 0.5).abs() < 1e-9);
        assert!(m.direction.preserves_diameter());
    }

    #[test]
    fn diameter_preserving_predicate() {
        assert!(dir(SQRT3 / 2.0, -0.5).preserves_diameter());
        assert!(dir(0.0, -1.0).preserves_diameter());
        assert!(!dir(1.0, 0.0).preserves_diameter());
        assert!(!dir(-0.6, -0.8).preserves_diameter());
    }

    #[test]
    fn landscape_csv_shape() {
        let csv = slope_landscape_csv(4, 3);
        assert_eq!(csv.lines().count(), 1 + 12);
        assert!(csv.starts_with("s,a,b,alpha,beta,I\n"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn spread_formula_matches_entries(k in 0.1f64..1.0, theta in -PI..PI, t in 0.0f64..0.09) {
                let d = DeformationDirection::from_angle(theta);
                let g = gamma_bounds(k, &d, t).unwrap();
                let closed = gamma_spread(k, &d, t).unwrap();
                prop_assert!((g.spread() - closed).abs() < 1e-12);
            }

            #[test]
            fn gamma_product_and_sum(k in 0.1f64..1.0, theta in -PI..PI, t in 0.0f64..0.09) {
                let d = DeformationDirection::from_angle(theta);
                let g = inverse_metric(k, &d, t).unwrap();
                let gb = gamma_bounds(k, &d, t).unwrap();
                prop_assert!((gb.gamma_plus * gb.gamma_minus - g.determinant()).abs() < 1e-12);
                prop_assert!((gb.gamma_plus + gb.gamma_minus - g.trace()).abs() < 1e-12);
                // det g⁻¹ = k²/(k + tb)²
                let h = k + t * d.b;
                prop_assert!((g.determinant() - k * k / (h * h)).abs() < 1e-12);
                prop_assert!(g.xx > 0.0 && g.determinant() > 0.0);
            }

            #[test]
            fn laplacian_expansion_matches_full_operator(theta in -PI..PI, t in 0.0f64..0.4) {
                // Oracle: the pulled-back Laplacian written out in full,
                // (1/(1+2bt/√3)²)(((1+2tb/√3)² + 4t²a²/3)∂x² − (4ta/√3)∂x∂y + ∂y²).
                let d = DeformationDirection::from_angle(theta);
                let w = 1.0 + 2.0 * t * d.b / SQRT3;
                let full = SecondOrderOperator {
                    xx: (w * w + 4.0 * t * t * d.a * d.a / 3.0) / (w * w),
                    xy: -(4.0 * t * d.a / SQRT3) / (w * w),
                    yy: 1.0 / (w * w),
                };
                let c = perturbation_operator_coeffs(&d, t).unwrap();
                let expand = |k: fn(&SecondOrderOperator) -> f64, delta0: f64| {
                    (delta0 + t * k(&c.l1) + t * t * k(&c.l2), delta0 + t * k(&c.l))
                };
                for (k, delta0, target) in [
                    ((|o: &SecondOrderOperator| o.xx) as fn(&SecondOrderOperator) -> f64, 1.0, full.xx),
                    (|o: &SecondOrderOperator| o.xy, 0.0, full.xy),
                    (|o: &SecondOrderOperator| o.yy, 1.0, full.yy),
                ] {
                    let (via_l1_l2, via_l) = expand(k, delta0);
                    prop_assert!((via_l1_l2 - target).abs() < 1e-12);
                    prop_assert!((via_l - target).abs() < 1e-12);
                }
                // Also consistent with the inverse metric: Δ = A∂x² + 2B∂x∂y + D∂y².
                let g = inverse_metric(EQUILATERAL_HEIGHT, &d, t).unwrap();
                prop_assert!((g.xx - full.xx).abs() < 1e-12);
                prop_assert!((2.0 * g.xy - full.xy).abs() < 1e-12);
                prop_assert!((g.yy - full.yy).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_slope_matches_quadrature() {
        let moments = SlopeMoments::compute(lame::DEFAULT_QUAD_DEGREE).unwrap();
        let mut state: u64 = 0x2545_F491_4F6C_DD1D;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let c = SecondEigenspaceCoeffs::from_angle(2.0 * PI * next());
            let d = DeformationDirection::from_angle(2.0 * PI * next());
            let closed = slope_gap_I(&c, &d);
            let quad = moments.slope_gap_I(&c, &d);
            assert!((closed - quad).abs() < 1e-8, "{closed} vs {quad}");
        }
    }
}
