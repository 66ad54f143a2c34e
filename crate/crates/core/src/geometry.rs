//! Triangles in normalized position and the moduli region swept by the
//! certification algorithm.
//!
//! A [`Triangle`] always has base vertices `(0,0)` and `(1,0)` and an apex
//! `(x, y)` with `y > 0`. Triangles with arbitrary vertices (for example the
//! rescaled copies used to check scale invariance) are [`VertexTriangle`]s.

use std::f64::consts::PI;

use crate::error::{GapError, Result};

/// The gap value of the unit equilateral triangle, `64π²/9`.
pub const EQUILATERAL_GAP: f64 = 64.0 * PI * PI / 9.0;

/// Apex of the unit equilateral triangle in normalized position.
pub const EQUILATERAL_APEX: (f64, f64) = (0.5, 0.866_025_403_784_438_6);

/// Radius of the ball around the equilateral apex excluded from the sweep.
pub const EXCLUSION_RADIUS: f64 = 0.0004;

/// Lowest apex height handled numerically; thinner triangles are covered
/// analytically.
pub const MIN_SWEEP_HEIGHT: f64 = 0.005;

/// Triangle with vertices `(0,0)`, `(1,0)` and `(apex_x, apex_y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    apex_x: f64,
    apex_y: f64,
}

impl Triangle {
    pub fn new(apex_x: f64, apex_y: f64) -> Result<Self> {
        if !apex_x.is_finite() || !apex_y.is_finite() {
            return Err(GapError::InvalidInput(format!(
                "apex ({apex_x}, {apex_y}) is not finite"
            )));
        }
        if apex_y <= 0.0 {
            return Err(GapError::InvalidInput(format!(
                "apex height must be positive, got {apex_y}"
            )));
        }
        Ok(Self { apex_x, apex_y })
    }

    pub fn equilateral() -> Self {
        Self {
            apex_x: EQUILATERAL_APEX.0,
            apex_y: EQUILATERAL_APEX.1,
        }
    }

    pub fn apex_x(&self) -> f64 {
        self.apex_x
    }

    pub fn apex_y(&self) -> f64 {
        self.apex_y
    }

    pub fn area(&self) -> f64 {
        0.5 * self.apex_y
    }

    pub fn side_lengths(&self) -> [f64; 3] {
        let (x, y) = (self.apex_x, self.apex_y);
        [1.0, x.hypot(y), (x - 1.0).hypot(y)]
    }

    pub fn vertices(&self) -> VertexTriangle {
        VertexTriangle::new([[0.0, 0.0], [1.0, 0.0], [self.apex_x, self.apex_y]])
    }

    /// Distance from the apex to the equilateral apex `(1/2, √3/2)`.
    pub fn distance_to_equilateral(&self) -> f64 {
        distance_to_equilateral(self.apex_x, self.apex_y)
    }
}

/// A triangle given by three arbitrary vertices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexTriangle {
    pub vertices: [[f64; 2]; 3],
}

impl VertexTriangle {
    pub fn new(vertices: [[f64; 2]; 3]) -> Self {
        Self { vertices }
    }

    /// Signed area, positive for counter-clockwise orientation.
    pub fn signed_area(&self) -> f64 {
        let [a, b, c] = self.vertices;
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn diameter(&self) -> f64 {
        let [a, b, c] = self.vertices;
        let d = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
        d(a, b).max(d(b, c)).max(d(c, a))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut v = self.vertices;
        for p in v.iter_mut() {
            p[0] *= factor;
            p[1] *= factor;
        }
        Self { vertices: v }
    }
}

impl From<Triangle> for VertexTriangle {
    fn from(t: Triangle) -> Self {
        t.vertices()
    }
}

/// Largest side length.
pub fn diameter(t: &Triangle) -> f64 {
    let [a, b, c] = t.side_lengths();
    a.max(b).max(c)
}

/// `d² (λ₂ − λ₁)`.
pub fn gap_function(lambda1: f64, lambda2: f64, d: f64) -> Result<f64> {
    if !(lambda2 > lambda1) {
        return Err(GapError::EigenvalueOrder { lambda1, lambda2 });
    }
    if !(lambda1 > 0.0) || !(d > 0.0) {
        return Err(GapError::InvalidInput(format!(
            "gap needs lambda1 > 0 and d > 0, got lambda1 = {lambda1}, d = {d}"
        )));
    }
    Ok(d * d * (lambda2 - lambda1))
}

pub fn distance_to_equilateral(x: f64, y: f64) -> f64 {
    (x - EQUILATERAL_APEX.0).hypot(y - EQUILATERAL_APEX.1)
}

/// Membership in the region that must be certified numerically:
/// `x² + y² ≤ 1`, `0.5 ≤ x ≤ 1`, `0.005 ≤ y ≤ 1` and distance to the
/// equilateral apex strictly greater than `0.0004`.
///
/// Comparisons are exact; there is no tolerance.
pub fn in_sweep_region(x: f64, y: f64) -> bool {
    x * x + y * y <= 1.0
        && (0.5..=1.0).contains(&x)
        && (MIN_SWEEP_HEIGHT..=1.0).contains(&y)
        && distance_to_equilateral(x, y) > EXCLUSION_RADIUS
}

/// Coordinates on the `(τ, ν)` lattice used for plotting the gap function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauNu {
    pub tau: f64,
    pub nu: f64,
}

impl TauNu {
    pub fn new(tau: f64, nu: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 2.0) {
            return Err(GapError::InvalidInput(format!("tau must lie in (0, 2), got {tau}")));
        }
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(GapError::InvalidInput(format!("nu must lie in (0, 1], got {nu}")));
        }
        Ok(Self { tau, nu })
    }
}

/// `x = 1 − τ/2`, `y = (ν/2)·√(4 − (2−τ)²)`.
pub fn tau_nu_to_apex(p: TauNu) -> (f64, f64) {
    let x = 1.0 - 0.5 * p.tau;
    let s = 2.0 - p.tau;
    let y = 0.5 * p.nu * (4.0 - s * s).sqrt();
    (x, y)
}

/// Divides all coordinates by the diameter. Returns the rescaled vertices and
/// the diameter that was divided out; eigenvalues of the rescaled triangle are
/// `diameter²` times the originals.
pub fn scale_to_unit_diameter(t: &Triangle) -> (VertexTriangle, f64) {
    let d = diameter(t);
    (t.vertices().scaled(1.0 / d), d)
}
