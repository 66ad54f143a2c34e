//! Symmetric Gauss rules on triangles and composite integration over a
//! uniformly subdivided triangle.
//!
//! The base rule is a collapsed (Duffy) tensor Gauss–Legendre rule averaged
//! over the six vertex permutations, so it is invariant under the symmetry
//! group of the triangle and exact for all polynomials up to its degree.

use crate::error::{GapError, Result};
use crate::geometry::VertexTriangle;

/// Gauss–Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Initial guess: Chebyshev-like approximation of the i-th root.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        // Map [-1, 1] -> [0, 1].
        nodes[i] = 0.5 * (1.0 - z);
        nodes[n - 1 - i] = 0.5 * (1.0 + z);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// A quadrature rule on the reference triangle in barycentric coordinates.
/// Weights sum to one, so integrals are `area * Σ wᵢ f(pᵢ)`.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// Fully symmetric rule exact for polynomials of total degree `degree`.
    pub fn symmetric_gauss(degree: usize) -> Self {
        let n = (degree + 2).div_ceil(2).max(1);
        let (g, w) = gauss_legendre_unit(n);
        let perms: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        let mut points = Vec::with_capacity(6 * n * n);
        let mut weights = Vec::with_capacity(6 * n * n);
        for i in 0..n {
            for j in 0..n {
                let (s, t) = (g[i], g[j]);
                // Reference triangle has area 1/2; normalized weights sum to 1.
                let x = s * (1.0 - t);
                let y = t;
                let bary = [1.0 - x - y, x, y];
                let wt = 2.0 * w[i] * w[j] * (1.0 - t) / 6.0;
                for p in &perms {
                    points.push([bary[p[0]], bary[p[1]], bary[p[2]]]);
                    weights.push(wt);
                }
            }
        }
        Self {
            points,
            weights,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrates `f` over a single triangle.
    pub fn integrate<F: Fn(f64, f64) -> f64>(&self, tri: &VertexTriangle, f: F) -> f64 {
        let [a, b, c] = tri.vertices;
        let area = tri.signed_area().abs();
        let mut sum = 0.0;
        for (p, w) in self.points.iter().zip(&self.weights) {
            let x = p[0] * a[0] + p[1] * b[0] + p[2] * c[0];
            let y = p[0] * a[1] + p[1] * b[1] + p[2] * c[1];
            sum += w * f(x, y);
        }
        area * sum
    }
}

/// Splits a triangle into `4^level` congruent subtriangles by repeated
/// midpoint subdivision.
pub fn subdivide(tri: &VertexTriangle, level: u32) -> Vec<VertexTriangle> {
    let n = 1usize << level;
    let [a, b, c] = tri.vertices;
    let at = |i: usize, j: usize| {
        let (s, t) = (i as f64 / n as f64, j as f64 / n as f64);
        [
            a[0] + s * (b[0] - a[0]) + t * (c[0] - a[0]),
            a[1] + s * (b[1] - a[1]) + t * (c[1] - a[1]),
        ]
    };
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n - j {
            out.push(VertexTriangle::new([at(i, j), at(i + 1, j), at(i, j + 1)]));
            if i + j + 1 < n {
                out.push(VertexTriangle::new([
                    at(i + 1, j),
                    at(i + 1, j + 1),
                    at(i, j + 1),
                ]));
            }
        }
    }
    out
}

/// A composite rule: a base rule applied on every subtriangle of a uniform
/// subdivision. Physical points and weights are precomputed so repeated
/// integrals over the same triangle are cheap.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(tri: &VertexTriangle, level: u32, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(GapError::InvalidInput("quadrature degree must be positive".into()));
        }
        if level > 10 {
            return Err(GapError::InvalidInput(format!(
                "subdivision level {level} too large"
            )));
        }
        let rule = TriangleRule::symmetric_gauss(degree);
        let subs = subdivide(tri, level);
        let mut points = Vec::with_capacity(subs.len() * rule.len());
        let mut weights = Vec::with_capacity(subs.len() * rule.len());
        for s in &subs {
            let [a, b, c] = s.vertices;
            let area = s.signed_area().abs();
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                points.push([
                    p[0] * a[0] + p[1] * b[0] + p[2] * c[0],
                    p[0] * a[1] + p[1] * b[1] + p[2] * c[1],
                ]);
                weights.push(area * w);
            }
        }
        Ok(Self { points, weights })
    }

    pub fn integrate<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        // Kahan summation.
        let mut sum = 0.0;
        let mut comp = 0.0;
        for (p, w) in self.points.iter().zip(&self.weights) {
            let term = w * f(p[0], p[1]) - comp;
            let next = sum + term;
            comp = (next - sum) - term;
            sum = next;
        }
        sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_right() -> VertexTriangle {
        VertexTriangle::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    }

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn legendre_weights_sum_to_one() {
        for n in 1..12 {
            let (x, w) = gauss_legendre_unit(n);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn legendre_integrates_monomials() {
        let (x, w) = gauss_legendre_unit(5);
        for k in 0..10 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "k = {k}");
        }
    }

    #[test]
    fn rule_is_exact_to_its_degree() {
        // ∫_T x^p y^q over the unit right triangle = p! q! / (p + q + 2)!
        for degree in [1usize, 4, 10, 12] {
            let rule = TriangleRule::symmetric_gauss(degree);
            for p in 0..=degree as u32 {
                for q in 0..=(degree as u32 - p) {
                    let exact = factorial(p) * factorial(q) / factorial(p + q + 2);
                    let got = rule.integrate(&unit_right(), |x, y| x.powi(p as i32) * y.powi(q as i32));
                    assert!(
                        (got - exact).abs() < 1e-14,
                        "degree {degree}: x^{p} y^{q}: {got} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn rule_is_symmetric() {
        let rule = TriangleRule::symmetric_gauss(10);
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let mirrored = [p[1], p[0], p[2]];
            let found = rule.points.iter().zip(&rule.weights).any(|(q, v)| {
                (0..3).all(|k| (q[k] - mirrored[k]).abs() < 1e-15) && (v - w).abs() < 1e-15
            });
            assert!(found);
        }
    }

    #[test]
    fn subdivision_counts_and_area() {
        let t = VertexTriangle::new([[0.0, 0.0], [1.0, 0.0], [0.3, 0.7]]);
        for level in 0..5 {
            let subs = subdivide(&t, level);
            assert_eq!(subs.len(), 1 << (2 * level));
            let area: f64 = subs.iter().map(|s| s.signed_area()).sum();
            assert!((area - t.signed_area()).abs() < 1e-14);
            assert!(subs.iter().all(|s| s.signed_area() > 0.0));
        }
    }

    #[test]
    fn composite_rule_integrates_smooth_function() {
        // ∫_0^1 ∫_0^{1-x} sin(x) cos(y) dy dx = ∫ sin(x) sin(1-x) dx
        //   = (sin(1) - cos(1)) / 2
        let exact = (1f64.sin() - 1f64.cos()) / 2.0;
        let rule = CompositeRule::new(&unit_right(), 2, 10).unwrap();
        let got = rule.integrate(|x, y| x.sin() * y.cos());
        assert!((got - exact).abs() < 1e-15, "{got} vs {exact}");
    }
}
