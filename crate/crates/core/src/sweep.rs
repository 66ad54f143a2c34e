//! Finite certification sweep over the moduli region.
//!
//! Each cell solves for `λ₁`, `λ₂` at an apex, turns the margin
//! `ξ − 64π²/9` into a radius through the continuity estimate
//! `ξ(x*, y*) ≥ ξ(x, y) − (2.4t/y²)(λ₁ + λ₂)`, truncates that radius to its
//! leading decimal digit and advances. Rows start at `x = x0`; the next row
//! sits one seed radius higher.
//!
//! The seed column is computed first and sequentially, because each row's
//! height depends on the previous seed. Row interiors are independent and
//! run on a thread pool; output is always written in `(j, i)` order, so the
//! CSV is identical for any thread count and across interrupted runs.

use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::eigensolver::{gap_with_error, ErrorModel, GapOptions};
use crate::error::{GapError, Result};
use crate::geometry::{
    distance_to_equilateral, in_sweep_region, Triangle, EQUILATERAL_GAP, EXCLUSION_RADIUS,
    MIN_SWEEP_HEIGHT,
};

/// Constant of the continuity estimate.
pub const CONTINUITY_CONSTANT: f64 = 2.4;

/// Radius used when the raw radius is 1 or more.
pub const CLAMPED_RADIUS: (u32, u32, f64) = (1, 9, 0.9);

pub const CELL_CSV_HEADER: &str =
    "j,i,x,y,lambda1,lambda2,xi,A_sum,t_prime,n,d,t_radius,err,accuracy_met";

/// `ξ − (2.4t/y²)·A`.
pub fn continuity_lower_bound(xi: f64, a_sum: f64, y: f64, t: f64) -> f64 {
    xi - CONTINUITY_CONSTANT * t / (y * y) * a_sum
}

/// `(ξ − 64π²/9)·y²/(2.4A)`; `None` when there is no positive margin.
pub fn certification_radius(xi: f64, a_sum: f64, y: f64) -> Option<f64> {
    let margin = xi - EQUILATERAL_GAP;
    if !(margin > 0.0) || !(a_sum > 0.0) || !(y > 0.0) {
        return None;
    }
    Some(margin * y * y / (CONTINUITY_CONSTANT * a_sum))
}

/// Truncates `t′` to its leading nonzero decimal digit: returns `(n, d, d·10⁻ⁿ)`
/// with `n` the position of that digit.
pub fn truncate_radius(t_prime: f64) -> Result<(u32, u32, f64)> {
    if !(t_prime > 0.0) || !t_prime.is_finite() {
        return Err(GapError::InvalidInput(format!(
            "radius must be positive and finite, got {t_prime}"
        )));
    }
    if t_prime >= 1.0 {
        return Ok(CLAMPED_RADIUS);
    }
    // The position of the leading digit from log10, then corrected against
    // the exact floor so that values like 0.1 (stored slightly off) land in
    // the right slot.
    let mut n = (-t_prime.log10()).floor().max(0.0) as i32 + 1;
    loop {
        let scaled = t_prime * 10f64.powi(n);
        if scaled < 1.0 {
            n += 1;
        } else if scaled >= 10.0 && n > 1 {
            n -= 1;
        } else {
            break;
        }
    }
    let digit = (t_prime * 10f64.powi(n)).floor() as u32 % 10;
    let t = f64::from(digit) / 10f64.powi(n);
    Ok((n as u32, digit, t))
}

/// Decimal place the solver must reach for a radius truncated at `10⁻ⁿ`:
/// `0.5·10^(−n−1)`.
pub fn required_accuracy(n: u32) -> f64 {
    0.5 * 10f64.powi(-(n as i32) - 1)
}

/// One certified grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedCell {
    pub j: usize,
    pub i: usize,
    pub x: f64,
    pub y: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub xi: f64,
    pub a_sum: f64,
    pub t_prime: f64,
    pub n_digits: u32,
    pub d_digit: u32,
    pub t_radius: f64,
    pub err: f64,
    /// `err ≤ 0.5·10^(−n−1)`.
    pub accuracy_met: bool,
}

impl CertifiedCell {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{:.17e},{:.17e},{}",
            self.j,
            self.i,
            self.x,
            self.y,
            self.lambda1,
            self.lambda2,
            self.xi,
            self.a_sum,
            self.t_prime,
            self.n_digits,
            self.d_digit,
            self.t_radius,
            self.err,
            self.accuracy_met
        )
    }

    pub fn parse_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 14 {
            return Err(GapError::Parse(format!("expected 14 fields, got {}", f.len())));
        }
        let fl = |k: usize| -> Result<f64> {
            f[k].parse()
                .map_err(|_| GapError::Parse(format!("bad number '{}'", f[k])))
        };
        let int = |k: usize| -> Result<u64> {
            f[k].parse()
                .map_err(|_| GapError::Parse(format!("bad integer '{}'", f[k])))
        };
        Ok(Self {
            j: int(0)? as usize,
            i: int(1)? as usize,
            x: fl(2)?,
            y: fl(3)?,
            lambda1: fl(4)?,
            lambda2: fl(5)?,
            xi: fl(6)?,
            a_sum: fl(7)?,
            t_prime: fl(8)?,
            n_digits: int(9)? as u32,
            d_digit: int(10)? as u32,
            t_radius: fl(11)?,
            err: fl(12)?,
            accuracy_met: match f[13] {
                "true" => true,
                "false" => false,
                other => return Err(GapError::Parse(format!("bad flag '{other}'"))),
            },
        })
    }
}

/// Rectangle `[x0, x1] × [y0, y1]` intersected with the sweep region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Window {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        let w = Self { x0, x1, y0, y1 };
        if !(x0 < x1 && y0 < y1) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(GapError::InvalidInput(format!("empty window {w:?}")));
        }
        if x0 < 0.5 || x1 > 1.0 || y0 < MIN_SWEEP_HEIGHT || y1 > 1.0 {
            return Err(GapError::InvalidInput(format!(
                "window {w:?} leaves the sweep region [0.5, 1] x [{MIN_SWEEP_HEIGHT}, 1]"
            )));
        }
        Ok(w)
    }

    /// The whole sweep region.
    pub fn full() -> Self {
        Self {
            x0: 0.5,
            x1: 1.0,
            y0: MIN_SWEEP_HEIGHT,
            y1: 1.0,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }

    /// Parses `x0,x1,y0,y1`.
    pub fn parse(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| GapError::Parse(format!("bad window coordinate '{p}'")))
            })
            .collect::<Result<_>>()?;
        if v.len() != 4 {
            return Err(GapError::Parse(format!(
                "window needs four values x0,x1,y0,y1, got {}",
                v.len()
            )));
        }
        Self::new(v[0], v[1], v[2], v[3])
    }
}

/// How tightly each cell is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyPolicy {
    /// Accuracy on ξ requested for the first solve of every cell.
    pub initial: f64,
    /// Re-solves for the digit rule stop tightening at this accuracy; cells
    /// that stop short of the rule are emitted with `accuracy_met = false`.
    pub floor: f64,
    /// Tightest accuracy requested when a cell's margin `ξ − 64π²/9` is too
    /// small for its error estimate. Below it the cell fails.
    pub min_target: f64,
    pub min_level: u32,
    pub max_level: u32,
    pub error_model: ErrorModel,
}

impl AccuracyPolicy {
    /// Desk-scale policy: accuracy floor `10⁻³`, extrapolated error model.
    /// The fine-level model needs level 10 for `10⁻²` and is too slow for
    /// thousands of cells.
    pub fn desk() -> Self {
        Self {
            initial: 1e-2,
            floor: 1e-3,
            min_target: 1e-6,
            min_level: 3,
            max_level: crate::eigensolver::DEFAULT_MAX_LEVEL,
            error_model: ErrorModel::Extrapolated,
        }
    }

    /// The strict digit rule with no floor.
    pub fn strict() -> Self {
        Self {
            floor: 0.0,
            ..Self::desk()
        }
    }

    fn options(&self, target: f64) -> GapOptions {
        let mut o = GapOptions::new(target)
            .with_max_level(self.max_level)
            .with_error_model(self.error_model);
        o.min_level = self.min_level;
        o
    }
}

/// How the sweep moves from one cell to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stepping {
    /// Rows advanced by each cell's radius, the next row one seed radius
    /// higher. Balls of neighbouring cells need not overlap in two
    /// dimensions, so the coverage audit can report gaps.
    Paper,
    /// The window is tiled with squares; a square is done once a certified
    /// ball contains all four corners, otherwise it is split in four. The
    /// certified balls cover the window by construction.
    #[default]
    Covering,
}

impl Stepping {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stepping::Paper => "paper",
            Stepping::Covering => "covering",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Stepping::Paper),
            "covering" => Ok(Stepping::Covering),
            _ => Err(GapError::Parse(format!(
                "unknown stepping '{s}' (expected paper or covering)"
            ))),
        }
    }
}

/// Side of the initial tiles in covering mode.
pub const COVERING_TILE: f64 = 0.05;

/// Squares smaller than this are never split further.
const MIN_SQUARE: f64 = 1e-10;

/// Everything that determines a sweep's output.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub window: Window,
    pub policy: AccuracyPolicy,
    pub stepping: Stepping,
    /// Rows (or tiles) solved concurrently. Does not affect the output.
    pub threads: usize,
}

impl SweepConfig {
    pub fn new(window: Window, policy: AccuracyPolicy) -> Self {
        Self {
            window,
            policy,
            stepping: Stepping::Covering,
            threads: 1,
        }
    }

    pub fn with_stepping(mut self, stepping: Stepping) -> Self {
        self.stepping = stepping;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    /// Row start and first height. The full region starts at `(0.5, 0.005)`.
    pub fn start(&self) -> (f64, f64) {
        (self.window.x0, self.window.y0)
    }

    fn fingerprint(&self) -> String {
        let w = &self.window;
        let p = &self.policy;
        format!(
            "{:e},{:e},{:e},{:e};{:e},{:e},{:e},{},{},{};{}",
            w.x0,
            w.x1,
            w.y0,
            w.y1,
            p.initial,
            p.floor,
            p.min_target,
            p.min_level,
            p.max_level,
            p.error_model.as_str(),
            self.stepping.as_str()
        )
    }
}

/// Solves one cell. The solve is tightened while the margin `ξ − 64π²/9`
/// does not exceed `2·err` (down to `min_target`), then while the digit rule
/// asks for more accuracy (down to `floor`).
pub fn certify_cell(j: usize, i: usize, x: f64, y: f64, policy: &AccuracyPolicy) -> Result<CertifiedCell> {
    let fail = |reason: String| GapError::CertificationFailed { j, i, x, y, reason };
    let tri = Triangle::new(x, y)?;
    let mut target = policy.initial.max(policy.floor);
    loop {
        let r = gap_with_error(&tri, &policy.options(target))?;
        if !r.converged {
            return Err(fail(format!(
                "accuracy not met: err {:e} > target {:e} at level cap {}",
                r.err, target, policy.max_level
            )));
        }
        let a_sum = r.lambda1 + r.lambda2;
        let margin = r.xi - EQUILATERAL_GAP;
        if !(margin > 2.0 * r.err) {
            let tighter = (0.25 * margin).min(0.1 * target);
            if margin > 0.0 && target > policy.min_target {
                target = tighter.max(policy.min_target);
                continue;
            }
            return Err(fail(format!(
                "xi = {} does not exceed 64pi^2/9 + 2 err = {}",
                r.xi,
                EQUILATERAL_GAP + 2.0 * r.err
            )));
        }
        // Conservative substitution: smallest ξ and largest A under the
        // error estimate.
        let t_prime = certification_radius(r.xi - r.err, a_sum + r.err, y)
            .ok_or_else(|| fail("no positive radius".into()))?;
        let (n, d, t) = truncate_radius(t_prime).map_err(|e| fail(e.to_string()))?;
        let needed = required_accuracy(n);
        let allowed = needed.max(policy.floor);
        if r.err <= allowed || target <= allowed {
            return Ok(CertifiedCell {
                j,
                i,
                x,
                y,
                lambda1: r.lambda1,
                lambda2: r.lambda2,
                xi: r.xi,
                a_sum,
                t_prime,
                n_digits: n,
                d_digit: d,
                t_radius: t,
                err: r.err,
                accuracy_met: r.err <= needed,
            });
        }
        target = allowed;
    }
}

/// Step 3 checks for the next cell in a row, plus the window's right edge.
pub fn row_continues(x: f64, y: f64, window: &Window) -> bool {
    x * x + y * y <= 1.0 && distance_to_equilateral(x, y) > EXCLUSION_RADIUS && x <= window.x1
}

/// Step 4 checks for the next row start, plus the window's top edge.
pub fn next_row_valid(x: f64, y: f64, window: &Window) -> bool {
    row_continues(x, y, window) && y <= window.y1
}

/// Cells of row `j` after its seed.
fn row_interior(seed: &CertifiedCell, cfg: &SweepConfig) -> Result<Vec<CertifiedCell>> {
    let mut cells = Vec::new();
    let (mut x, mut t) = (seed.x, seed.t_radius);
    let mut i = 0;
    loop {
        let next = x + t;
        if !row_continues(next, seed.y, &cfg.window) {
            return Ok(cells);
        }
        i += 1;
        let cell = certify_cell(seed.j, i, next, seed.y, &cfg.policy)?;
        x = next;
        t = cell.t_radius;
        cells.push(cell);
    }
}

/// An axis-aligned square by center and half-side.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Square {
    cx: f64,
    cy: f64,
    half: f64,
}

impl Square {
    fn corners(&self) -> [(f64, f64); 4] {
        let (c, d, h) = (self.cx, self.cy, self.half);
        [(c - h, d - h), (c + h, d - h), (c - h, d + h), (c + h, d + h)]
    }

    fn children(&self) -> [Square; 4] {
        let h = 0.5 * self.half;
        [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)].map(|(sx, sy)| Square {
            cx: self.cx + sx * h,
            cy: self.cy + sy * h,
            half: h,
        })
    }

    /// Largest distance from `(x, y)` to a point of the square.
    fn reach(&self, x: f64, y: f64) -> f64 {
        self.corners()
            .iter()
            .map(|(a, b)| (a - x).hypot(b - y))
            .fold(0.0, f64::max)
    }
}

/// The initial tiles covering a window, bottom row first.
fn covering_tiles(window: &Window) -> Vec<Square> {
    // The slack stops rounding noise from adding a sliver of tiles.
    let count = |span: f64| ((span / COVERING_TILE) - 1e-9).ceil().max(1.0) as usize;
    let nx = count(window.x1 - window.x0);
    let ny = count(window.y1 - window.y0);
    let half = 0.5 * COVERING_TILE;
    let mut tiles = Vec::with_capacity(nx * ny);
    for b in 0..ny {
        for a in 0..nx {
            tiles.push(Square {
                cx: window.x0 + (a as f64 + 0.5) * COVERING_TILE,
                cy: window.y0 + (b as f64 + 0.5) * COVERING_TILE,
                half,
            });
        }
    }
    tiles
}

/// Whether the square can contain a point that needs certifying: one in the
/// window and the sweep region but outside the exclusion ball. Errs on the
/// side of `true`.
fn needs_cover(sq: &Square, window: &Window) -> bool {
    let (xl, xh) = (sq.cx - sq.half, sq.cx + sq.half);
    let (yl, yh) = (sq.cy - sq.half, sq.cy + sq.half);
    let (bx0, bx1) = (window.x0.max(0.5), window.x1.min(1.0));
    let (by0, by1) = (window.y0.max(MIN_SWEEP_HEIGHT), window.y1.min(1.0));
    if xh < bx0 || xl > bx1 || yh < by0 || yl > by1 {
        return false;
    }
    // Nearest point of the clipped square to the origin must lie in the disk.
    let nx = xl.max(bx0);
    let ny = yl.max(by0);
    if nx * nx + ny * ny > 1.0 {
        return false;
    }
    sq.reach(crate::geometry::EQUILATERAL_APEX.0, crate::geometry::EQUILATERAL_APEX.1)
        > EXCLUSION_RADIUS
}

/// A point of the window and the sweep region near `(x, y)`, kept just
/// outside the exclusion ball.
pub fn clamp_to_region(x: f64, y: f64, window: &Window) -> (f64, f64) {
    let (ax, ay) = crate::geometry::EQUILATERAL_APEX;
    let lo_x = window.x0.max(0.5);
    let lo_y = window.y0.max(MIN_SWEEP_HEIGHT);
    let mut px = x.clamp(lo_x, window.x1.min(1.0));
    let mut py = y.clamp(lo_y, window.y1.min(1.0));
    if px * px + py * py > 1.0 {
        // Project onto the unit circle, then slide along it back into the box.
        let r = px.hypot(py);
        (px, py) = (px / r, py / r);
        if px < lo_x {
            (px, py) = (lo_x, (1.0 - lo_x * lo_x).sqrt());
        } else if py < lo_y {
            (px, py) = ((1.0 - lo_y * lo_y).sqrt(), lo_y);
        }
        // Rounding can leave the point a hair outside the disk.
        while px * px + py * py > 1.0 {
            py = f64::from_bits(py.to_bits() - 1);
        }
    }
    let d = (px - ax).hypot(py - ay);
    if d <= EXCLUSION_RADIUS {
        // Push out along the ray from the apex; rays into the region stay
        // in it. The apex itself is moved along the bisector of the wedge.
        let (ux, uy) = if d > 0.0 {
            ((px - ax) / d, (py - ay) / d)
        } else {
            (0.5, -(0.75f64.sqrt()))
        };
        let out = EXCLUSION_RADIUS * (1.0 + 1e-6);
        px = ax + out * ux;
        py = ay + out * uy;
    }
    (px, py)
}

/// Cells certifying one tile, in depth-first order.
fn cover_tile(j: usize, tile: Square, cfg: &SweepConfig) -> Result<Vec<CertifiedCell>> {
    let mut cells = Vec::new();
    // (square, radius of the parent's cell if it was solved)
    let mut stack = vec![(tile, None::<f64>)];
    while let Some((sq, hint)) = stack.pop() {
        if !needs_cover(&sq, &cfg.window) {
            continue;
        }
        let (px, py) = clamp_to_region(sq.cx, sq.cy, &cfg.window);
        let reach = sq.reach(px, py);
        // A parent radius far below this square's reach predicts a split;
        // skip the solve. Coverage never depends on this guess.
        let skip = hint.is_some_and(|t| t < 0.5 * reach);
        let mut radius = hint;
        if !skip {
            let cell = certify_cell(j, cells.len(), px, py, &cfg.policy)?;
            radius = Some(cell.t_radius);
            let done = reach < cell.t_radius;
            cells.push(cell);
            if done {
                continue;
            }
        }
        if sq.half < MIN_SQUARE {
            return Err(GapError::CertificationFailed {
                j,
                i: cells.len(),
                x: px,
                y: py,
                reason: "square shrank below the minimum size".into(),
            });
        }
        // Reverse so the lower-left child is processed first.
        for child in sq.children().into_iter().rev() {
            stack.push((child, radius));
        }
    }
    Ok(cells)
}

/// Progress of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepStatus {
    Running,
    Complete,
    Failed(String),
}

/// Resumable cursor: the seed column so far, how many rows (tiles, in
/// covering mode) are written and where the CSV ends.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepState {
    /// Row being worked on.
    pub j: usize,
    /// Cells of that row already written (0 while the row is pending).
    pub i: usize,
    pub x: f64,
    pub y: f64,
    /// Radius of the current row seed.
    pub t_seed: f64,
    pub completed_cells: usize,
    pub seeds: Vec<CertifiedCell>,
    pub seeds_done: bool,
    pub rows_written: usize,
    pub csv_bytes: u64,
    pub status: SweepStatus,
    fingerprint: String,
}

impl SweepState {
    fn fresh(cfg: &SweepConfig) -> Self {
        let (x, y) = cfg.start();
        Self {
            j: 0,
            i: 0,
            x,
            y,
            t_seed: 0.0,
            completed_cells: 0,
            seeds: Vec::new(),
            seeds_done: false,
            rows_written: 0,
            csv_bytes: 0,
            status: SweepStatus::Running,
            fingerprint: cfg.fingerprint(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let status = match &self.status {
            SweepStatus::Running => "running".to_string(),
            SweepStatus::Complete => "complete".to_string(),
            SweepStatus::Failed(c) => format!("failed:{}", c.replace('\n', " ")),
        };
        let _ = writeln!(s, "config={}", self.fingerprint);
        let _ = writeln!(s, "status={status}");
        let _ = writeln!(s, "j={}", self.j);
        let _ = writeln!(s, "i={}", self.i);
        let _ = writeln!(s, "x={:.17e}", self.x);
        let _ = writeln!(s, "y={:.17e}", self.y);
        let _ = writeln!(s, "t_seed={:.17e}", self.t_seed);
        let _ = writeln!(s, "completed_cells={}", self.completed_cells);
        let _ = writeln!(s, "seeds_done={}", self.seeds_done);
        let _ = writeln!(s, "rows_written={}", self.rows_written);
        let _ = writeln!(s, "csv_bytes={}", self.csv_bytes);
        let _ = writeln!(s, "seed_count={}", self.seeds.len());
        for (k, c) in self.seeds.iter().enumerate() {
            let _ = writeln!(s, "seed.{k}={}", c.csv_row());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| GapError::Parse(format!("bad state line '{line}'")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| -> Result<&String> {
            map.get(k)
                .ok_or_else(|| GapError::Parse(format!("state file lacks '{k}'")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| GapError::Parse(format!("bad value for '{k}'")))
        };
        let int = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| GapError::Parse(format!("bad value for '{k}'")))
        };
        let count = int("seed_count")? as usize;
        let seeds = (0..count)
            .map(|k| CertifiedCell::parse_csv_row(get(&format!("seed.{k}"))?))
            .collect::<Result<Vec<_>>>()?;
        let status = match get("status")?.as_str() {
            "running" => SweepStatus::Running,
            "complete" => SweepStatus::Complete,
            s => SweepStatus::Failed(s.trim_start_matches("failed:").to_string()),
        };
        Ok(Self {
            j: int("j")? as usize,
            i: int("i")? as usize,
            x: num("x")?,
            y: num("y")?,
            t_seed: num("t_seed")?,
            completed_cells: int("completed_cells")? as usize,
            seeds,
            seeds_done: get("seeds_done")? == "true",
            rows_written: int("rows_written")? as usize,
            csv_bytes: int("csv_bytes")?,
            status,
            fingerprint: get("config")?.clone(),
        })
    }
}

/// Where a sweep writes. The state file defaults to `<csv>.state`.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub csv: PathBuf,
    pub state: PathBuf,
}

impl SweepOutput {
    pub fn new(csv: impl Into<PathBuf>) -> Self {
        let csv = csv.into();
        let mut state = csv.clone().into_os_string();
        state.push(".state");
        Self {
            csv,
            state: state.into(),
        }
    }
}

/// Controls for [`run_sweep`] that do not affect its output.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunControl {
    /// Continue from the state file instead of starting over.
    pub resume: bool,
    /// Stop (as if interrupted) once this many rows are written.
    pub stop_after_rows: Option<usize>,
    /// Stop once this many seed cells exist.
    pub stop_after_seeds: Option<usize>,
}

/// What [`run_sweep`] returns.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub state: SweepState,
    /// Every cell in the CSV, in order.
    pub cells: Vec<CertifiedCell>,
}

fn write_state(path: &Path, state: &SweepState) -> Result<()> {
    let tmp = path.with_extension("state.tmp");
    fs::write(&tmp, state.to_text())?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_cells(path: &Path) -> Result<Vec<CertifiedCell>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(CertifiedCell::parse_csv_row)
        .collect()
}

/// Runs (or resumes) the sweep, streaming rows to `out.csv` and a state
/// snapshot to `out.state` after every seed cell and every row.
///
/// Returns the final state; a certification failure is reported both in the
/// state (status `failed`) and as the error.
pub fn run_sweep(cfg: &SweepConfig, out: &SweepOutput, ctl: RunControl) -> Result<SweepReport> {
    let mut state = if ctl.resume && out.state.exists() {
        let s = SweepState::from_text(&fs::read_to_string(&out.state)?)?;
        if s.fingerprint != cfg.fingerprint() {
            return Err(GapError::InvalidInput(
                "state file belongs to a sweep with a different configuration".into(),
            ));
        }
        s
    } else {
        SweepState::fresh(cfg)
    };

    // Bring the CSV back to the last recorded row boundary.
    if state.csv_bytes == 0 {
        let mut f = File::create(&out.csv)?;
        writeln!(f, "{CELL_CSV_HEADER}")?;
        f.sync_all()?;
        state.csv_bytes = fs::metadata(&out.csv)?.len();
        write_state(&out.state, &state)?;
    } else {
        let f = OpenOptions::new().write(true).open(&out.csv)?;
        f.set_len(state.csv_bytes)?;
    }

    if matches!(state.status, SweepStatus::Complete | SweepStatus::Failed(_)) {
        let cells = read_cells(&out.csv)?;
        return finish(state, cells);
    }

    let tiles = match cfg.stepping {
        Stepping::Paper => Vec::new(),
        Stepping::Covering => covering_tiles(&cfg.window),
    };
    if cfg.stepping == Stepping::Covering {
        state.seeds_done = true;
    }

    // Seed column.
    while !state.seeds_done {
        if ctl.stop_after_seeds.is_some_and(|k| state.seeds.len() >= k) {
            return finish(state, read_cells(&out.csv)?);
        }
        let j = state.seeds.len();
        let (x, y) = match state.seeds.last() {
            None => cfg.start(),
            Some(prev) => (cfg.window.x0, prev.y + prev.t_radius),
        };
        if j > 0 && !next_row_valid(x, y, &cfg.window) {
            state.seeds_done = true;
            write_state(&out.state, &state)?;
            break;
        }
        if j == 0 && !(in_sweep_region(x, y) && cfg.window.contains(x, y)) {
            return Err(GapError::InvalidInput(format!(
                "start ({x}, {y}) lies outside the window or the sweep region"
            )));
        }
        state.j = j;
        state.x = x;
        state.y = y;
        match certify_cell(j, 0, x, y, &cfg.policy) {
            Ok(cell) => {
                state.t_seed = cell.t_radius;
                state.seeds.push(cell);
                write_state(&out.state, &state)?;
            }
            Err(e) => return fail(state, out, e),
        }
    }

    // Rows (or tiles), `threads` at a time, written in order.
    let units = match cfg.stepping {
        Stepping::Paper => state.seeds.len(),
        Stepping::Covering => tiles.len(),
    };
    let unit = |k: usize| -> Result<Vec<CertifiedCell>> {
        match cfg.stepping {
            Stepping::Paper => {
                let seed = &state.seeds[k];
                let mut row = vec![seed.clone()];
                row.extend(row_interior(seed, cfg)?);
                Ok(row)
            }
            Stepping::Covering => cover_tile(k, tiles[k], cfg),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.max(1))
        .build()
        .map_err(|e| GapError::InvalidInput(e.to_string()))?;
    let mut csv = BufWriter::new(OpenOptions::new().append(true).open(&out.csv)?);
    while state.rows_written < units {
        if ctl.stop_after_rows.is_some_and(|k| state.rows_written >= k) {
            csv.flush()?;
            return finish(state, read_cells(&out.csv)?);
        }
        let first = state.rows_written;
        let mut last = (first + cfg.threads.max(1)).min(units);
        if let Some(stop) = ctl.stop_after_rows {
            last = last.min(stop.max(first + 1));
        }
        let done: Vec<Result<Vec<CertifiedCell>>> =
            pool.install(|| (first..last).into_par_iter().map(unit).collect());
        for (k, cells) in done.into_iter().enumerate() {
            let cells = match cells {
                Ok(c) => c,
                Err(e) => {
                    csv.flush()?;
                    return fail(state, out, e);
                }
            };
            let mut text = String::new();
            for c in &cells {
                text.push_str(&c.csv_row());
                text.push('\n');
            }
            csv.write_all(text.as_bytes())?;
            csv.flush()?;
            csv.get_ref().sync_data()?;
            state.csv_bytes += text.len() as u64;
            state.rows_written += 1;
            state.completed_cells += cells.len();
            state.j = first + k;
            state.i = cells.len();
            if let Some(c) = cells.last() {
                state.x = c.x;
                state.y = c.y;
            }
            write_state(&out.state, &state)?;
        }
    }
    state.status = SweepStatus::Complete;
    write_state(&out.state, &state)?;
    finish(state, read_cells(&out.csv)?)
}

fn finish(state: SweepState, cells: Vec<CertifiedCell>) -> Result<SweepReport> {
    Ok(SweepReport { state, cells })
}

fn fail(mut state: SweepState, out: &SweepOutput, e: GapError) -> Result<SweepReport> {
    state.status = SweepStatus::Failed(e.to_string());
    write_state(&out.state, &state)?;
    Err(e)
}

/// Outcome of [`coverage_audit`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub spacing: f64,
    pub lattice_points: usize,
    /// Points inside the window and the region that no certified ball contains.
    pub uncovered: Vec<(f64, f64)>,
    pub covered_by_cells: usize,
    pub excluded_by_ball: usize,
    pub outside_region: usize,
}

impl CoverageReport {
    pub fn passed(&self) -> bool {
        self.uncovered.is_empty()
    }
}

/// Default audit lattice spacing.
pub const AUDIT_SPACING: f64 = 1e-4;

/// Checks every point of a lattice over `window` (spacing `spacing`, lattice
/// anchored at the window corner) against the certified balls. A point
/// counts as covered when it lies strictly inside some cell's ball, lies in
/// the thin strip `y < 0.005`, lies within `0.0004` of the equilateral apex,
/// or lies outside the sweep region.
pub fn coverage_audit(cells: &[CertifiedCell], window: &Window, spacing: f64) -> CoverageReport {
    assert!(spacing > 0.0);
    // Spatial hash with buckets at least as large as the biggest radius.
    let max_r = cells.iter().map(|c| c.t_radius).fold(0.0, f64::max);
    let bucket = max_r.max(spacing);
    let mut grid: std::collections::HashMap<(i64, i64), Vec<usize>> =
        std::collections::HashMap::new();
    for (k, c) in cells.iter().enumerate() {
        let key = ((c.x / bucket).floor() as i64, (c.y / bucket).floor() as i64);
        grid.entry(key).or_default().push(k);
    }
    let nx = ((window.x1 - window.x0) / spacing).floor() as usize;
    let ny = ((window.y1 - window.y0) / spacing).floor() as usize;
    let mut report = CoverageReport {
        spacing,
        lattice_points: 0,
        uncovered: Vec::new(),
        covered_by_cells: 0,
        excluded_by_ball: 0,
        outside_region: 0,
    };
    for b in 0..=ny {
        let y = window.y0 + b as f64 * spacing;
        for a in 0..=nx {
            let x = window.x0 + a as f64 * spacing;
            report.lattice_points += 1;
            if !(x * x + y * y <= 1.0 && (0.5..=1.0).contains(&x) && y <= 1.0) {
                report.outside_region += 1;
                continue;
            }
            if y < MIN_SWEEP_HEIGHT || distance_to_equilateral(x, y) <= EXCLUSION_RADIUS {
                report.excluded_by_ball += 1;
                continue;
            }
            let (bx, by) = ((x / bucket).floor() as i64, (y / bucket).floor() as i64);
            let mut hit = false;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    if let Some(list) = grid.get(&(bx + dx, by + dy)) {
                        for &k in list {
                            let c = &cells[k];
                            if (x - c.x).hypot(y - c.y) < c.t_radius {
                                hit = true;
                                break 'search;
                            }
                        }
                    }
                }
            }
            if hit {
                report.covered_by_cells += 1;
            } else {
                report.uncovered.push((x, y));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cell(x: f64, y: f64, t: f64) -> CertifiedCell {
        CertifiedCell {
            j: 0,
            i: 0,
            x,
            y,
            lambda1: 60.0,
            lambda2: 140.0,
            xi: 80.0,
            a_sum: 200.0,
            t_prime: t,
            n_digits: 2,
            d_digit: 5,
            t_radius: t,
            err: 1e-4,
            accuracy_met: true,
        }
    }

    #[test]
    fn continuity_examples() {
        assert_eq!(continuity_lower_bound(75.0, 200.0, 0.5, 0.0), 75.0);
        let l1 = 16.0 * PI * PI / 3.0;
        let l2 = 112.0 * PI * PI / 9.0;
        let t = 0.003;
        let got = continuity_lower_bound(EQUILATERAL_GAP, l1 + l2, 0.75f64.sqrt(), t);
        let want = EQUILATERAL_GAP - 2.4 * t / 0.75 * (l1 + l2);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn radius_examples() {
        assert_eq!(certification_radius(EQUILATERAL_GAP, 100.0, 1.0), None);
        assert_eq!(certification_radius(EQUILATERAL_GAP - 1.0, 100.0, 1.0), None);
        let t = certification_radius(EQUILATERAL_GAP + 2.4, 100.0, 1.0).unwrap();
        assert!((t - 0.01).abs() < 1e-14);
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncate_radius(0.0234).unwrap(), (2, 2, 0.02));
        assert_eq!(truncate_radius(0.5).unwrap(), (1, 5, 0.5));
        assert_eq!(truncate_radius(0.099).unwrap(), (2, 9, 0.09));
        assert_eq!(truncate_radius(0.1).unwrap(), (1, 1, 0.1));
        assert_eq!(truncate_radius(3.0).unwrap(), (1, 9, 0.9));
        assert_eq!(truncate_radius(1.0).unwrap(), (1, 9, 0.9));
        assert_eq!(truncate_radius(0.000_012).unwrap(), (5, 1, 1e-5));
        assert!(truncate_radius(0.0).is_err());
        assert!(truncate_radius(-0.1).is_err());
        assert!(truncate_radius(f64::NAN).is_err());
    }

    #[test]
    fn required_accuracy_examples() {
        assert!((required_accuracy(2) - 5e-4).abs() < 1e-18);
        assert!((required_accuracy(1) - 5e-3).abs() < 1e-18);
    }

    #[test]
    fn csv_round_trip() {
        let c = CertifiedCell {
            j: 3,
            i: 7,
            accuracy_met: false,
            ..cell(0.612_345_678_901_234_5, 0.7, 0.004)
        };
        let row = c.csv_row();
        assert_eq!(row.split(',').count(), CELL_CSV_HEADER.split(',').count());
        assert_eq!(CertifiedCell::parse_csv_row(&row).unwrap(), c);
        assert!(CertifiedCell::parse_csv_row("1,2,3").is_err());
    }

    #[test]
    fn window_parsing() {
        let w = Window::parse("0.5,0.85,0.4,0.95").unwrap();
        assert_eq!(w, Window::new(0.5, 0.85, 0.4, 0.95).unwrap());
        assert!(Window::parse("0.5,0.85,0.4").is_err());
        assert!(Window::parse("0.4,0.85,0.4,0.95").is_err());
        assert!(Window::parse("0.6,0.5,0.4,0.95").is_err());
        assert!(Window::parse("a,b,c,d").is_err());
    }

    #[test]
    fn step_checks() {
        let w = Window::full();
        assert!(row_continues(0.7, 0.7, &w));
        assert!(!row_continues(0.9, 0.5, &w));
        // Landing inside the exclusion ball ends the row.
        assert!(!row_continues(0.5, 0.75f64.sqrt() - 0.0003, &w));
        let narrow = Window::new(0.5, 0.6, 0.3, 0.4).unwrap();
        assert!(!row_continues(0.61, 0.35, &narrow));
        assert!(!next_row_valid(0.5, 0.41, &narrow));
    }

    #[test]
    fn state_round_trip() {
        let cfg = SweepConfig::new(Window::new(0.6, 0.7, 0.5, 0.6).unwrap(), AccuracyPolicy::desk());
        let mut s = SweepState::fresh(&cfg);
        s.seeds.push(cell(0.6, 0.5, 0.01));
        s.seeds.push(CertifiedCell { j: 1, ..cell(0.6, 0.51, 0.02) });
        s.rows_written = 1;
        s.csv_bytes = 1234;
        s.status = SweepStatus::Failed("cell (1, 2)".into());
        assert_eq!(SweepState::from_text(&s.to_text()).unwrap(), s);
        assert!(SweepState::from_text("j=1").is_err());
    }

    #[test]
    fn audit_single_cell() {
        let cells = [cell(0.7, 0.7, 0.05)];
        let w = Window::new(0.67, 0.73, 0.67, 0.73).unwrap();
        let r = coverage_audit(&cells, &w, 1e-3);
        assert!(r.passed(), "{} uncovered", r.uncovered.len());
        assert!(r.covered_by_cells > 0);
        let r = coverage_audit(&[], &w, 1e-3);
        assert!(!r.passed());
    }

    #[test]
    fn audit_excludes_ball_and_outside() {
        let w = Window::new(0.5, 0.5006, 0.8656, 0.8664).unwrap();
        let r = coverage_audit(&[], &w, 1e-4);
        assert!(r.excluded_by_ball > 0);
        assert!(r.outside_region > 0);
        assert!(!r.passed());
    }

    #[test]
    fn audit_uses_strict_inequality() {
        // A point exactly on the circle of radius t is not covered.
        let cells = [cell(0.5, 0.5, 0.25)];
        let w = Window::new(0.75, 0.751, 0.5, 0.5005).unwrap();
        let r = coverage_audit(&cells, &w, 1e-3);
        assert_eq!(r.uncovered.first().copied(), Some((0.75, 0.5)));
    }

    #[test]
    fn tiles_cover_window() {
        let w = Window::new(0.5, 0.85, 0.4, 0.95).unwrap();
        let tiles = covering_tiles(&w);
        assert_eq!(tiles.len(), 7 * 11);
        for (x, y) in [(0.5, 0.4), (0.85, 0.95), (0.67, 0.81)] {
            let slack = 1e-12;
            assert!(tiles.iter().any(|t| (x - t.cx).abs() <= t.half + slack
                && (y - t.cy).abs() <= t.half + slack));
        }
    }

    #[test]
    fn squares_outside_or_in_ball_need_nothing() {
        let w = Window::full();
        let outside = Square { cx: 0.9, cy: 0.9, half: 0.01 };
        assert!(!needs_cover(&outside, &w));
        let (ax, ay) = crate::geometry::EQUILATERAL_APEX;
        let in_ball = Square { cx: ax, cy: ay - 0.0001, half: 0.0001 };
        assert!(!needs_cover(&in_ball, &w));
        let inside = Square { cx: 0.7, cy: 0.5, half: 0.01 };
        assert!(needs_cover(&inside, &w));
        let left = Square { cx: 0.4, cy: 0.5, half: 0.01 };
        assert!(!needs_cover(&left, &w));
    }

    #[test]
    fn clamp_examples() {
        let w = Window::full();
        assert_eq!(clamp_to_region(0.7, 0.5, &w), (0.7, 0.5));
        let (x, y) = clamp_to_region(0.9, 0.9, &w);
        assert!(in_sweep_region(x, y));
        assert!((x.hypot(y) - 1.0).abs() < 1e-12);
        let (ax, ay) = crate::geometry::EQUILATERAL_APEX;
        let (x, y) = clamp_to_region(ax, ay, &w);
        assert!(in_sweep_region(x, y));
        assert!(distance_to_equilateral(x, y) < 1.01 * EXCLUSION_RADIUS);
        let (x, y) = clamp_to_region(0.45, 0.95, &w);
        assert!(in_sweep_region(x, y));
    }

    #[test]
    fn stepping_names() {
        for s in [Stepping::Paper, Stepping::Covering] {
            assert_eq!(Stepping::parse(s.as_str()).unwrap(), s);
        }
        assert!(Stepping::parse("spiral").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn clamped_points_are_certifiable(x in 0.3f64..1.2, y in -0.1f64..1.2) {
                let w = Window::full();
                let (px, py) = clamp_to_region(x, y, &w);
                prop_assert!(in_sweep_region(px, py), "({px}, {py})");
                // Points already certifiable are left alone.
                if in_sweep_region(x, y) {
                    prop_assert_eq!((px, py), (x, y));
                }
            }

            #[test]
            fn children_tile_the_parent(cx in 0.5f64..1.0, cy in 0.0f64..1.0, h in 1e-6f64..0.1) {
                let sq = Square { cx, cy, half: h };
                let kids = sq.children();
                let area: f64 = kids.iter().map(|k| 4.0 * k.half * k.half).sum();
                prop_assert!((area - 4.0 * h * h).abs() <= 1e-12 * h * h);
                for k in &kids {
                    prop_assert!((k.cx - cx).abs() + k.half <= h * (1.0 + 1e-12));
                }
            }

            #[test]
            fn truncation_is_a_lower_digit_bound(t in 1e-9f64..0.999) {
                let (n, d, tr) = truncate_radius(t).unwrap();
                prop_assert!((1..=9).contains(&d));
                prop_assert!(tr <= t);
                prop_assert!(t < tr + 10f64.powi(-(n as i32)) * (1.0 + 1e-12));
                prop_assert!(t >= 10f64.powi(-(n as i32)) * (1.0 - 1e-12));
            }

            #[test]
            fn radius_keeps_bound_above_threshold(
                margin in 1e-6f64..20.0, a in 50.0f64..500.0, y in 0.005f64..1.0,
            ) {
                let xi = EQUILATERAL_GAP + margin;
                let t = certification_radius(xi, a, y).unwrap();
                let (_, _, tr) = truncate_radius(t.min(0.999)).unwrap();
                prop_assert!(continuity_lower_bound(xi, a, y, tr) >= EQUILATERAL_GAP - 1e-12);
            }
        }
    }
}
