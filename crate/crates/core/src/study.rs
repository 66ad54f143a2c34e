//! Studies built on the gap solver: the thin-triangle scaling table, the
//! `(τ, ν)` plot lattice, and solver checks of the deformation theory.

use rayon::prelude::*;

use crate::deformation::{gamma_bounds, DeformationDirection, EQUILATERAL_HEIGHT};
use crate::eigensolver::{gap_with_error, GapOptions, GapResult};
use crate::error::{GapError, Result};
use crate::geometry::{tau_nu_to_apex, TauNu, Triangle, EQUILATERAL_GAP};
use crate::lame;

/// Smallest height accepted by the scaling study.
pub const MIN_SCALING_HEIGHT: f64 = 0.01;

pub const SCALING_CSV_HEADER: &str = "h,xi,xi_h43,err,level,converged";

#[derive(Debug, Clone)]
pub struct ScalingRow {
    pub h: f64,
    pub result: GapResult,
}

impl ScalingRow {
    /// `ξ·h^(4/3)`, bounded below if the gap blows up at least like `h^(−4/3)`.
    pub fn scaled(&self) -> f64 {
        self.result.xi * self.h.powf(4.0 / 3.0)
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{},{}",
            self.h,
            self.result.xi,
            self.scaled(),
            self.result.err,
            self.result.level(),
            self.result.converged
        )
    }
}

#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub x0: f64,
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `log ξ` against `log h`; `None` for fewer than
    /// two rows.
    pub slope: Option<f64>,
}

impl ScalingReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{SCALING_CSV_HEADER}\n");
        for r in &self.rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    /// ξ grows strictly as the height shrinks.
    pub fn strictly_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].result.xi > w[0].result.xi)
    }

    pub fn min_scaled(&self) -> f64 {
        self.rows.iter().map(ScalingRow::scaled).fold(f64::INFINITY, f64::min)
    }

    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.result.converged)
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Gap values for apexes `(x0, h)` with heights given in descending order.
pub fn scaling_study(heights: &[f64], x0: f64, opts: &GapOptions) -> Result<ScalingReport> {
    if heights.is_empty() {
        return Err(GapError::InvalidInput("no heights given".into()));
    }
    if !(0.5..=1.0).contains(&x0) {
        return Err(GapError::InvalidInput(format!("x0 must lie in [0.5, 1], got {x0}")));
    }
    for &h in heights {
        if !(h >= MIN_SCALING_HEIGHT && h <= 1.0) {
            return Err(GapError::InvalidInput(format!(
                "heights must lie in [{MIN_SCALING_HEIGHT}, 1], got {h}"
            )));
        }
    }
    if heights.windows(2).any(|w| w[1] >= w[0]) {
        return Err(GapError::InvalidInput("heights must be strictly descending".into()));
    }
    let rows = heights
        .par_iter()
        .map(|&h| {
            let t = Triangle::new(x0, h)?;
            Ok(ScalingRow { h, result: gap_with_error(&t, opts)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let logs: Vec<(f64, f64)> = rows.iter().map(|r| (r.h.ln(), r.result.xi.ln())).collect();
    Ok(ScalingReport { x0, rows, slope: fit_slope(&logs) })
}

pub const PLOT_CSV_HEADER: &str = "tau,nu,log_xi";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotCell {
    pub tau: f64,
    pub nu: f64,
    /// `None` where the triangle is invalid or the solve failed.
    pub log_xi: Option<f64>,
}

impl PlotCell {
    pub fn csv_row(&self) -> String {
        match self.log_xi {
            Some(v) => format!("{:.17e},{:.17e},{:.17e}", self.tau, self.nu, v),
            None => format!("{:.17e},{:.17e},", self.tau, self.nu),
        }
    }
}

/// Lattice values `τ_k = 2(k+1)/(steps+1)` and `ν_l = (l+1)/steps`, open in
/// `τ` and closed at `ν = 1`. Odd `tau_steps` puts a node on `τ = 1`.
pub fn plot_lattice(tau_steps: usize, nu_steps: usize) -> Result<Vec<TauNu>> {
    if tau_steps < 2 || nu_steps < 2 {
        return Err(GapError::InvalidInput("plot grid needs at least 2 steps per axis".into()));
    }
    let mut out = Vec::with_capacity(tau_steps * nu_steps);
    for l in 0..nu_steps {
        let nu = (l + 1) as f64 / nu_steps as f64;
        for k in 0..tau_steps {
            let tau = 2.0 * (k + 1) as f64 / (tau_steps + 1) as f64;
            out.push(TauNu::new(tau, nu)?);
        }
    }
    Ok(out)
}

/// `log ξ` over the plot lattice, `ν` outer and `τ` inner. Failures become
/// missing values.
pub fn plot_grid(tau_steps: usize, nu_steps: usize, opts: &GapOptions) -> Result<Vec<PlotCell>> {
    let lattice = plot_lattice(tau_steps, nu_steps)?;
    Ok(lattice
        .par_iter()
        .map(|p| {
            let (x, y) = tau_nu_to_apex(*p);
            let log_xi = Triangle::new(x, y)
                .and_then(|t| gap_with_error(&t, opts))
                .ok()
                .filter(|r| r.xi > 0.0)
                .map(|r| r.xi.ln());
            PlotCell { tau: p.tau, nu: p.nu, log_xi }
        })
        .collect())
}

pub fn plot_csv(cells: &[PlotCell]) -> String {
    let mut s = format!("{PLOT_CSV_HEADER}\n");
    for c in cells {
        s.push_str(&c.csv_row());
        s.push('\n');
    }
    s
}

/// `n` diameter-preserving directions, angles spread over `[−90°, −30°]`
/// by the golden-ratio sequence.
pub fn sample_directions(n: usize) -> Vec<DeformationDirection> {
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (lo, hi) = (-0.5 * std::f64::consts::PI, -std::f64::consts::PI / 6.0);
    (0..n)
        .map(|k| {
            let u = ((k + 1) as f64 * golden).fract();
            DeformationDirection::from_angle(lo + u * (hi - lo))
        })
        .collect()
}

/// Solver eigenvalues of a deformed equilateral triangle against the
/// metric sandwich `[γ₋λᵢ, γ₊λᵢ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichRow {
    pub direction: DeformationDirection,
    pub t: f64,
    pub lambda: [f64; 2],
    /// Error estimate on each eigenvalue.
    pub err: [f64; 2],
    pub bounds: [(f64, f64); 2],
    pub converged: bool,
}

pub const SANDWICH_CSV_HEADER: &str =
    "a,b,t,lambda1,lower1,upper1,lambda2,lower2,upper2,err1,err2,inside";

impl SandwichRow {
    /// Both eigenvalues within their bounds widened by twice the error.
    pub fn inside(&self) -> bool {
        (0..2).all(|i| {
            let (lo, hi) = self.bounds[i];
            let slack = 2.0 * self.err[i];
            self.lambda[i] >= lo - slack && self.lambda[i] <= hi + slack
        })
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            self.direction.a,
            self.direction.b,
            self.t,
            self.lambda[0],
            self.bounds[0].0,
            self.bounds[0].1,
            self.lambda[1],
            self.bounds[1].0,
            self.bounds[1].1,
            self.err[0],
            self.err[1],
            self.inside()
        )
    }
}

pub fn sandwich_check(dir: &DeformationDirection, t: f64, opts: &GapOptions) -> Result<SandwichRow> {
    let g = gamma_bounds(EQUILATERAL_HEIGHT, dir, t)?;
    let (x, y) = dir.deformed_equilateral_apex(t);
    let r = gap_with_error(&Triangle::new(x, y)?, opts)?;
    let scale = 1.0 / (r.diameter * r.diameter);
    let e = &r.spectrum.error_bounds;
    Ok(SandwichRow {
        direction: *dir,
        t,
        lambda: [r.lambda1, r.lambda2],
        err: [e[0] * scale, e[1] * scale],
        bounds: [g.sandwich(lame::lambda1()), g.sandwich(lame::lambda2())],
        converged: r.converged,
    })
}

/// Solver gap along a deformation of the equilateral triangle, with the
/// first difference `(ξ(t) − 64π²/9)/t`.
#[derive(Debug, Clone)]
pub struct SlopeRow {
    pub t: f64,
    pub result: GapResult,
}

pub const SLOPE_CSV_HEADER: &str = "t,apex_x,apex_y,xi,err,quotient,quotient_err,converged";

impl SlopeRow {
    pub fn quotient(&self) -> f64 {
        (self.result.xi - EQUILATERAL_GAP) / self.t
    }

    pub fn quotient_err(&self) -> f64 {
        self.result.err / self.t
    }

    /// ξ above the equilateral value and a first difference of at least
    /// `min_slope`, both allowing for the solver error.
    pub fn passes(&self, min_slope: f64) -> bool {
        self.result.converged
            && self.result.xi > EQUILATERAL_GAP
            && self.quotient() + self.quotient_err() >= min_slope
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            self.t,
            self.result.apex_x,
            self.result.apex_y,
            self.result.xi,
            self.result.err,
            self.quotient(),
            self.quotient_err(),
            self.result.converged
        )
    }
}

pub fn slope_rows(dir: &DeformationDirection, ts: &[f64], opts: &GapOptions) -> Result<Vec<SlopeRow>> {
    ts.par_iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(GapError::InvalidInput(format!("t must be positive, got {t}")));
            }
            let (x, y) = dir.deformed_equilateral_apex(t);
            Ok(SlopeRow { t, result: gap_with_error(&Triangle::new(x, y)?, opts)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::EQUILATERAL_GAP;

    #[test]
    fn sampled_directions_preserve_diameter() {
        let dirs = sample_directions(50);
        assert_eq!(dirs.len(), 50);
        assert!(dirs.iter().all(|d| d.preserves_diameter()));
        let mut angles: Vec<f64> = dirs.iter().map(|d| d.b.atan2(d.a)).collect();
        angles.sort_by(f64::total_cmp);
        assert!(angles.windows(2).all(|w| w[1] - w[0] < 0.1));
    }

    #[test]
    fn sandwich_holds_for_one_deformation() {
        let opts = GapOptions::new(1e-2).with_error_model(crate::eigensolver::ErrorModel::Extrapolated);
        let dir = DeformationDirection::from_angle(-1.2);
        let row = sandwich_check(&dir, 0.05, &opts).unwrap();
        assert!(row.converged && row.inside(), "{row:?}");
        assert_eq!(row.csv_row().split(',').count(), SANDWICH_CSV_HEADER.split(',').count());
    }

    #[test]
    fn slope_rows_for_the_worst_direction() {
        let opts = GapOptions::new(1e-3).with_error_model(crate::eigensolver::ErrorModel::Extrapolated);
        let dir = DeformationDirection::new(0.75f64.sqrt(), -0.5).unwrap();
        let rows = slope_rows(&dir, &[0.02], &opts).unwrap();
        assert!(rows[0].passes(2.0), "{:?}", rows[0].quotient());
        assert!(slope_rows(&dir, &[0.0], &opts).is_err());
    }

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<_> = [0.1f64, 0.05, 0.02]
            .iter()
            .map(|h| (h.ln(), (3.0 * h.powf(-1.5)).ln()))
            .collect();
        assert!((fit_slope(&pts).unwrap() + 1.5).abs() < 1e-12);
        assert!(fit_slope(&pts[..1]).is_none());
    }

    #[test]
    fn scaling_rejects_bad_heights() {
        let o = GapOptions::new(1.0);
        assert!(scaling_study(&[0.1, 0.005], 0.5, &o).is_err());
        assert!(scaling_study(&[0.05, 0.1], 0.5, &o).is_err());
        assert!(scaling_study(&[0.1], 0.4, &o).is_err());
        assert!(scaling_study(&[], 0.5, &o).is_err());
    }

    #[test]
    fn lattice_counts_and_nodes() {
        assert_eq!(plot_lattice(2, 2).unwrap().len(), 4);
        let l = plot_lattice(5, 4).unwrap();
        assert_eq!(l.len(), 20);
        assert!(l.iter().any(|p| p.tau == 1.0 && p.nu == 1.0));
        assert!(l.iter().all(|p| p.tau > 0.0 && p.tau < 2.0 && p.nu > 0.0 && p.nu <= 1.0));
        assert!(plot_lattice(1, 3).is_err());
    }

    #[test]
    fn equilateral_cell_of_the_plot() {
        let opts = GapOptions::new(0.1).with_max_level(7);
        let cells = plot_grid(3, 2, &opts).unwrap();
        let c = cells.iter().find(|c| c.tau == 1.0 && c.nu == 1.0).unwrap();
        assert!((c.log_xi.unwrap() - EQUILATERAL_GAP.ln()).abs() < 1e-3);
        let csv = plot_csv(&cells);
        assert_eq!(csv.lines().count(), 7);
        assert_eq!(PlotCell { tau: 1.0, nu: 0.5, log_xi: None }.csv_row().split(',').count(), 3);
    }
}
