//! Piecewise-linear finite elements for the Dirichlet Laplacian on a
//! triangle.
//!
//! Meshes are uniform midpoint refinements of the triangle, or of the two
//! right triangles cut off by the altitude of an obtuse triangle, so
//! consecutive levels are nested. The smallest
//! eigenpairs come from block inverse iteration against a sparse Cholesky
//! factor of the stiffness matrix (shift zero), with Rayleigh–Ritz in the
//! mass inner product. Eigenvalues from two consecutive levels are combined
//! by Richardson extrapolation; the error figure this produces is an
//! empirical estimate, not a rigorous enclosure.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{GapError, Result};
use crate::geometry::VertexTriangle;

/// Largest refinement level accepted by [`build_mesh`].
pub const MAX_MESH_LEVEL: u32 = 12;

/// Triangles with smaller area are rejected.
pub const MIN_AREA: f64 = 1e-14;

/// Uniform refinement of a triangle, built from one or two lattice patches.
/// Vertex `(i, j)` of a patch with corners `(v₀, v₁, v₂)` and `i + j ≤ 2^level`
/// sits at `v₀ + (i/N)(v₁ − v₀) + (j/N)(v₂ − v₀)`.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    pub level: u32,
    /// Global vertex of each lattice position, per patch, indexed by
    /// `row_offset(N, j) + i`.
    pub patches: Vec<Vec<usize>>,
}

impl Mesh {
    /// Subdivisions per patch edge, `2^level`.
    pub fn divisions(&self) -> usize {
        1 << self.level
    }

    pub fn interior_count(&self) -> usize {
        self.boundary.iter().filter(|b| !**b).count()
    }
}

/// First vertex of lattice row `j`; rows hold `n + 1 − j` vertices each.
fn row_offset(n: usize, j: usize) -> usize {
    j * (n + 1) - j * j.saturating_sub(1) / 2
}

/// Vertex count `(2^L + 1)(2^L + 2)/2` of a single patch.
pub fn vertex_count(level: u32) -> usize {
    let n = 1usize << level;
    (n + 1) * (n + 2) / 2
}

/// Index of the vertex with an obtuse angle, if any.
pub fn obtuse_vertex(tri: &VertexTriangle) -> Option<usize> {
    let v = tri.vertices;
    (0..3).find(|&k| {
        let (p, q, r) = (v[k], v[(k + 1) % 3], v[(k + 2) % 3]);
        let (u, w) = ([q[0] - p[0], q[1] - p[1]], [r[0] - p[0], r[1] - p[1]]);
        let dot = u[0] * w[0] + u[1] * w[1];
        dot < -1e-12 * u[0].hypot(u[1]) * w[0].hypot(w[1])
    })
}

/// Meshes the triangle at `level`. Acute and right triangles get a single
/// lattice, so every element is similar to the triangle. An obtuse triangle
/// is first cut along the altitude from its obtuse vertex into two right
/// triangles, each meshed by its own lattice: elements then have no angle
/// above 90°, which keeps P1 convergence at its asymptotic rate on flat
/// triangles.
pub fn build_mesh(tri: &VertexTriangle, level: u32) -> Result<Mesh> {
    if level > MAX_MESH_LEVEL {
        return Err(GapError::InvalidInput(format!(
            "refinement level {level} exceeds the cap {MAX_MESH_LEVEL}"
        )));
    }
    let area = tri.signed_area();
    if !(area.abs() >= MIN_AREA) {
        let [_, _, c] = tri.vertices;
        return Err(GapError::DegenerateTriangle {
            x: c[0],
            y: c[1],
            area: area.abs(),
        });
    }
    let mut m = Mesh {
        vertices: Vec::new(),
        elements: Vec::new(),
        boundary: Vec::new(),
        level,
        patches: Vec::new(),
    };
    match obtuse_vertex(tri) {
        None => {
            // Counter-clockwise orientation.
            let [a, mut b, mut c] = tri.vertices;
            if area < 0.0 {
                std::mem::swap(&mut b, &mut c);
            }
            add_patch(&mut m, [a, b, c], false, None);
        }
        Some(k) => {
            let v = tri.vertices;
            let (apex, p, q) = (v[k], v[(k + 1) % 3], v[(k + 2) % 3]);
            let d = [q[0] - p[0], q[1] - p[1]];
            let s = ((apex[0] - p[0]) * d[0] + (apex[1] - p[1]) * d[1]) / (d[0] * d[0] + d[1] * d[1]);
            let foot = [p[0] + s * d[0], p[1] + s * d[1]];
            // Both patches run from the foot to the apex along their first
            // lattice edge, so the shared vertices coincide exactly.
            add_patch(&mut m, [foot, p, apex], true, None);
            let shared: Vec<usize> = {
                let n = m.divisions();
                (0..=n).map(|j| m.patches[0][row_offset(n, j)]).collect()
            };
            add_patch(&mut m, [foot, q, apex], true, Some(&shared));
        }
    }
    Ok(m)
}

/// Adds the lattice over `corners`. With `cut`, lattice edge `i = 0` is
/// interior apart from its ends; with `shared`, that edge reuses existing
/// vertices.
fn add_patch(m: &mut Mesh, corners: [[f64; 2]; 3], cut: bool, shared: Option<&[usize]>) {
    let [a, b, c] = corners;
    let n = m.divisions();
    let mut index = Vec::with_capacity(vertex_count(m.level));
    for j in 0..=n {
        for i in 0..=n - j {
            if let (0, Some(sh)) = (i, shared) {
                index.push(sh[j]);
                continue;
            }
            let (s, t) = (i as f64 / n as f64, j as f64 / n as f64);
            index.push(m.vertices.len());
            m.vertices.push([
                a[0] + s * (b[0] - a[0]) + t * (c[0] - a[0]),
                a[1] + s * (b[1] - a[1]) + t * (c[1] - a[1]),
            ]);
            let on_cut = cut && i == 0;
            m.boundary.push(if on_cut { j == 0 || j == n } else { i == 0 || j == 0 || i + j == n });
        }
    }
    let ccw = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]) > 0.0;
    let idx = |i: usize, j: usize| index[row_offset(n, j) + i];
    for j in 0..n {
        for i in 0..n - j {
            let mut tri = [idx(i, j), idx(i + 1, j), idx(i, j + 1)];
            if !ccw {
                tri.swap(1, 2);
            }
            m.elements.push(tri);
            if i + j + 1 < n {
                let mut tri = [idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)];
                if !ccw {
                    tri.swap(1, 2);
                }
                m.elements.push(tri);
            }
        }
    }
    m.patches.push(index);
}

/// Element stiffness and mass matrices of a P1 triangle.
fn element_matrices(p: [[f64; 2]; 3]) -> ([[f64; 3]; 3], [[f64; 3]; 3], f64) {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
        - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    // Gradients of barycentric coordinates: ∇λᵢ = (b_i, c_i) / (2A).
    let mut bc = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        bc[i] = [p[j][1] - p[k][1], p[k][0] - p[j][0]];
    }
    let mut stiff = [[0.0; 3]; 3];
    let mut mass = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            stiff[i][j] = (bc[i][0] * bc[j][0] + bc[i][1] * bc[j][1]) / (4.0 * area);
            mass[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
        }
    }
    (stiff, mass, area)
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(trip.len());
        let mut values: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows: n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.col_idx[lo..hi].binary_search(&c) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.values[self.row_ptr[r]..self.row_ptr[r + 1]].iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.nrows {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = s;
        }
    }

    /// Largest `|A_ij − A_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst: f64 = 0.0;
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(c, r)).abs());
            }
        }
        worst / scale.max(f64::MIN_POSITIVE)
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut trip = Vec::with_capacity(self.values.len());
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                trip.push(Triplet::new(r, self.col_idx[k], self.values[k]));
            }
        }
        SparseColMat::try_new_from_triplets(self.nrows, self.nrows, &trip)
            .map_err(|e| GapError::Factorization(format!("{e:?}")))
    }
}

/// Stiffness and mass matrices restricted to interior vertices.
#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    /// Mesh vertex of each unknown.
    pub interior: Vec<usize>,
    /// Unknown of each mesh vertex, if interior.
    pub index_of: Vec<Option<usize>>,
    /// Sum of all entries of the unrestricted mass matrix (the area).
    pub full_mass_total: f64,
    pub level: u32,
    /// Lattice layout of the mesh, for prolongation.
    pub patches: Vec<Vec<usize>>,
}

impl AssembledSystem {
    pub fn size(&self) -> usize {
        self.interior.len()
    }
}

/// Assembles the unrestricted P1 stiffness and mass matrices.
pub fn assemble_full(m: &Mesh) -> (CsrMatrix, CsrMatrix) {
    let n = m.vertices.len();
    let mut ks = Vec::with_capacity(9 * m.elements.len());
    let mut ms = Vec::with_capacity(9 * m.elements.len());
    for e in &m.elements {
        let p = [m.vertices[e[0]], m.vertices[e[1]], m.vertices[e[2]]];
        let (k, mm, _) = element_matrices(p);
        for a in 0..3 {
            for b in 0..3 {
                ks.push((e[a], e[b], k[a][b]));
                ms.push((e[a], e[b], mm[a][b]));
            }
        }
    }
    (CsrMatrix::from_triplets(n, ks), CsrMatrix::from_triplets(n, ms))
}

/// P1 stiffness and mass matrices with Dirichlet conditions imposed by
/// eliminating boundary vertices.
pub fn assemble(m: &Mesh) -> Result<AssembledSystem> {
    let mut index_of = vec![None; m.vertices.len()];
    let mut interior = Vec::new();
    for (v, &b) in m.boundary.iter().enumerate() {
        if !b {
            index_of[v] = Some(interior.len());
            interior.push(v);
        }
    }
    if interior.is_empty() {
        return Err(GapError::NoInteriorVertices);
    }
    let mut ks = Vec::with_capacity(9 * m.elements.len());
    let mut ms = Vec::with_capacity(9 * m.elements.len());
    let mut full_mass_total = 0.0;
    for e in &m.elements {
        let p = [m.vertices[e[0]], m.vertices[e[1]], m.vertices[e[2]]];
        let (k, mm, _) = element_matrices(p);
        for a in 0..3 {
            for b in 0..3 {
                full_mass_total += mm[a][b];
                if let (Some(r), Some(c)) = (index_of[e[a]], index_of[e[b]]) {
                    ks.push((r, c, k[a][b]));
                    ms.push((r, c, mm[a][b]));
                }
            }
        }
    }
    let n = interior.len();
    Ok(AssembledSystem {
        stiffness: CsrMatrix::from_triplets(n, ks),
        mass: CsrMatrix::from_triplets(n, ms),
        interior,
        index_of,
        full_mass_total,
        level: m.level,
        patches: m.patches.clone(),
    })
}

/// Settings for [`smallest_eigenpairs`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    /// Relative residual `‖Kv − λMv‖ / ‖Kv‖` required of every pair.
    pub tol: f64,
    pub max_iterations: usize,
    /// Extra vectors carried in the iteration block beyond the `k` wanted.
    pub guard_vectors: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iterations: 10_000,
            guard_vectors: 3,
        }
    }
}

/// Converged eigenpairs, ascending, with mass-orthonormal vectors.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    /// Coefficient vector of each eigenvalue.
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// The remaining Ritz vectors of the iteration block, useful as a warm
    /// start on a finer mesh.
    pub guard: Vec<Vec<f64>>,
}

/// Deterministic start block (xorshift, fixed seed).
fn start_block(n: usize, p: usize) -> Mat<f64> {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    Mat::from_fn(n, p, |_, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    })
}

/// Cholesky factor of the stiffness matrix, reusable across solves.
pub struct StiffnessFactor {
    llt: Llt<usize, f64>,
}

impl StiffnessFactor {
    pub fn new(s: &AssembledSystem) -> Result<Self> {
        let k = s.stiffness.to_faer()?;
        let llt = k
            .sp_cholesky(Side::Lower)
            .map_err(|e| GapError::Factorization(format!("{e:?}")))?;
        Ok(Self { llt })
    }

    pub fn solve(&self, rhs: &Mat<f64>) -> Mat<f64> {
        self.llt.solve(rhs)
    }
}

/// Rayleigh–Ritz for the pencil `(YᵀKY, YᵀMY)`: returns ascending Ritz
/// values and the coefficient matrix `C` with `YC` mass-orthonormal.
fn rayleigh_ritz(a: &Mat<f64>, b: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let p = a.nrows();
    let sym = |m: &Mat<f64>| Mat::from_fn(p, p, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let eb = sym(b)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| GapError::Factorization(format!("{e:?}")))?;
    let top = (0..p).map(|i| eb.S()[i]).fold(0.0f64, f64::max);
    // Directions with negligible mass are numerically dependent; drop them.
    let keep: Vec<usize> = (0..p).filter(|&i| eb.S()[i] > top * 1e-24).collect();
    let whiten = Mat::from_fn(p, keep.len(), |i, j| {
        eb.U()[(i, keep[j])] / eb.S()[keep[j]].sqrt()
    });
    let reduced = whiten.transpose() * a * &whiten;
    let q = keep.len();
    let reduced = Mat::from_fn(q, q, |i, j| 0.5 * (reduced[(i, j)] + reduced[(j, i)]));
    let ea = reduced
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| GapError::Factorization(format!("{e:?}")))?;
    let theta = (0..q).map(|i| ea.S()[i]).collect();
    Ok((theta, &whiten * ea.U()))
}

/// The `k` smallest eigenpairs of `K v = λ M v`.
///
/// `start`, if given, seeds the iteration block (for example eigenvectors
/// prolongated from a coarser mesh); missing columns are filled
/// deterministically.
pub fn smallest_eigenpairs(
    s: &AssembledSystem,
    k: usize,
    opts: &EigenOptions,
    start: Option<&[Vec<f64>]>,
) -> Result<Eigenpairs> {
    let n = s.size();
    if k == 0 || k > n {
        return Err(GapError::InvalidInput(format!(
            "requested {k} eigenpairs of a system of size {n}"
        )));
    }
    // Keep every solve sequential so results do not depend on the machine.
    faer::set_global_parallelism(faer::Par::Seq);
    let p = (k + opts.guard_vectors).min(n);
    let factor = StiffnessFactor::new(s)?;
    let mass = s.mass.to_faer()?;
    let mut x = start_block(n, p);
    if let Some(cols) = start {
        for (j, col) in cols.iter().take(p).enumerate() {
            if col.len() == n {
                for i in 0..n {
                    x[(i, j)] = col[i];
                }
            }
        }
    }
    let mut mx = &mass * &x;
    let mut worst = f64::INFINITY;
    for iter in 1..=opts.max_iterations {
        // Y = K⁻¹MX, so KY = MX without another product.
        let y = factor.solve(&mx);
        let my = &mass * &y;
        let a = y.transpose() * &mx;
        let b = y.transpose() * &my;
        let (theta, c) = rayleigh_ritz(&a, &b)?;
        if theta.len() < k {
            return Err(GapError::Factorization(
                "iteration block lost rank".to_string(),
            ));
        }
        let kx = &mx * &c;
        x = &y * &c;
        mx = &my * &c;
        let mut residuals = Vec::with_capacity(k);
        for j in 0..k {
            let r = kx.col(j) - theta[j] * mx.col(j);
            residuals.push(r.norm_l2() / kx.col(j).norm_l2().max(f64::MIN_POSITIVE));
        }
        worst = residuals.iter().cloned().fold(0.0, f64::max);
        if worst <= opts.tol {
            let column = |j: usize| (0..n).map(|i| x[(i, j)]).collect::<Vec<f64>>();
            return Ok(Eigenpairs {
                values: theta[..k].to_vec(),
                vectors: (0..k).map(column).collect(),
                residuals,
                iterations: iter,
                guard: (k..x.ncols()).map(column).collect(),
            });
        }
    }
    Err(GapError::NotConverged {
        iterations: opts.max_iterations,
        residual: worst,
    })
}

/// Interpolates interior nodal values from level `L − 1` to level `L` on
/// nested lattice meshes of the same triangle.
pub fn prolongate(coarse: &AssembledSystem, fine: &AssembledSystem, values: &[f64]) -> Vec<f64> {
    let nc = 1usize << coarse.level;
    let nf = 1usize << fine.level;
    assert_eq!(nf, 2 * nc, "meshes must be consecutive levels");
    assert_eq!(coarse.patches.len(), fine.patches.len(), "meshes must share a layout");
    let mut out = vec![0.0; fine.size()];
    for (cp, fp) in coarse.patches.iter().zip(&fine.patches) {
        let coarse_at = |i: usize, j: usize| -> f64 {
            coarse.index_of[cp[row_offset(nc, j) + i]]
                .map(|k| values[k])
                .unwrap_or(0.0)
        };
        for j in 0..=nf {
            for i in 0..=nf - j {
                let Some(k) = fine.index_of[fp[row_offset(nf, j) + i]] else {
                    continue;
                };
                out[k] = match (i % 2, j % 2) {
                    (0, 0) => coarse_at(i / 2, j / 2),
                    (1, 0) => 0.5 * (coarse_at(i / 2, j / 2) + coarse_at(i / 2 + 1, j / 2)),
                    (0, 1) => 0.5 * (coarse_at(i / 2, j / 2) + coarse_at(i / 2, j / 2 + 1)),
                    _ => 0.5 * (coarse_at(i / 2 + 1, j / 2) + coarse_at(i / 2, j / 2 + 1)),
                };
            }
        }
    }
    out
}

/// Eigenvalues of one triangle with per-eigenvalue error estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Richardson-extrapolated eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub error_bounds: Vec<f64>,
    /// Raw discrete eigenvalues at the finest level.
    pub fine: Vec<f64>,
    /// Coarse and fine refinement levels.
    pub levels: (u32, u32),
    /// Observed convergence ratio per eigenvalue, when three levels were solved.
    pub observed_ratio: Vec<Option<f64>>,
}

/// How the error of an extrapolated eigenvalue is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorModel {
    /// `2·|fine − extrap|` from the last two levels: a bound on the error of
    /// the fine-level value, which is far larger than the error of the
    /// extrapolated value that is returned.
    #[default]
    FineLevel,
    /// `2·|extrap_L − extrap_(L−1)|` from the last three levels: the change
    /// of the extrapolated value itself under one more refinement.
    Extrapolated,
}

impl ErrorModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorModel::FineLevel => "fine-level",
            ErrorModel::Extrapolated => "extrapolated",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fine-level" => Ok(ErrorModel::FineLevel),
            "extrapolated" => Ok(ErrorModel::Extrapolated),
            _ => Err(GapError::Parse(format!(
                "unknown error model '{s}' (expected fine-level or extrapolated)"
            ))),
        }
    }
}

/// Settings for [`gap_with_error`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapOptions {
    /// Absolute accuracy wanted on ξ.
    pub target: f64,
    pub min_level: u32,
    pub max_level: u32,
    pub error_model: ErrorModel,
    pub eigen: EigenOptions,
}

/// Default level cap; thin triangles get one more level.
pub const DEFAULT_MAX_LEVEL: u32 = 10;
pub const THIN_MAX_LEVEL: u32 = 11;
pub const THIN_HEIGHT: f64 = 0.05;

impl GapOptions {
    pub fn new(target: f64) -> Self {
        Self {
            target,
            min_level: 3,
            max_level: DEFAULT_MAX_LEVEL,
            error_model: ErrorModel::FineLevel,
            eigen: EigenOptions::default(),
        }
    }

    pub fn with_max_level(mut self, level: u32) -> Self {
        self.max_level = level;
        self
    }

    pub fn with_error_model(mut self, model: ErrorModel) -> Self {
        self.error_model = model;
        self
    }

    /// Level cap appropriate for a triangle of the given apex height.
    pub fn default_max_level(apex_y: f64) -> u32 {
        if apex_y <= THIN_HEIGHT {
            THIN_MAX_LEVEL
        } else {
            DEFAULT_MAX_LEVEL
        }
    }
}

/// Result of [`gap_with_error`]. When `converged` is false the values are the
/// best available and must not be used to certify anything.
#[derive(Debug, Clone, PartialEq)]
pub struct GapResult {
    pub apex_x: f64,
    pub apex_y: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub xi: f64,
    /// Error estimate on ξ, `d²(e₁ + e₂)`.
    pub err: f64,
    pub diameter: f64,
    pub spectrum: Spectrum,
    pub converged: bool,
}

pub const EIGEN_CSV_HEADER: &str = "apex_x,apex_y,level,lambda1,lambda2,xi,err,converged";

impl GapResult {
    pub fn level(&self) -> u32 {
        self.spectrum.levels.1
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            self.apex_x,
            self.apex_y,
            self.level(),
            self.lambda1,
            self.lambda2,
            self.xi,
            self.err,
            self.converged
        )
    }
}

/// Solver state carried from one level to the next.
struct LevelSolve {
    system: AssembledSystem,
    pairs: Eigenpairs,
}

fn solve_level(
    tri: &VertexTriangle,
    level: u32,
    k: usize,
    opts: &EigenOptions,
    previous: Option<&LevelSolve>,
) -> Result<LevelSolve> {
    let mesh = build_mesh(tri, level)?;
    let system = assemble(&mesh)?;
    let start: Option<Vec<Vec<f64>>> = previous.map(|p| {
        p.pairs
            .vectors
            .iter()
            .chain(&p.pairs.guard)
            .map(|v| prolongate(&p.system, &system, v))
            .collect()
    });
    let pairs = smallest_eigenpairs(&system, k, opts, start.as_deref())?;
    Ok(LevelSolve { system, pairs })
}

/// Smallest `k` eigenvalues at a single refinement level.
pub fn eigenvalues_at_level(tri: &VertexTriangle, level: u32, k: usize) -> Result<Vec<f64>> {
    Ok(solve_level(tri, level, k, &EigenOptions::default(), None)?
        .pairs
        .values)
}

/// Extrapolated value and error estimate for one eigenvalue from its
/// per-level history.
///
/// Fine-level model: with two levels this is `2·|fine − extrap| =
/// (2/3)|fine − coarse|`. When a third level shows the differences shrinking
/// by less than the asymptotic factor 4, the remainder is re-estimated as
/// `|Δ|/(r − 1)` with the observed ratio `r` (floored at 1.5) before applying
/// the factor 2.
///
/// Extrapolated model: `2·|extrap_L − extrap_(L−1)|`. It needs three
/// levels; with two, or when the raw differences do not shrink at close to
/// the asymptotic rate, it falls back to the fine-level estimate.
fn richardson_with(history: &[f64], model: ErrorModel) -> (f64, f64, Option<f64>) {
    let (extrap, fine_err, ratio) = richardson(history);
    let n = history.len();
    if model == ErrorModel::FineLevel || n < 3 {
        return (extrap, fine_err, ratio);
    }
    let previous = history[n - 2] + (history[n - 2] - history[n - 3]) / 3.0;
    match ratio {
        Some(r) if (3.0..=5.0).contains(&r) => (extrap, 2.0 * (extrap - previous).abs(), ratio),
        _ => (extrap, fine_err, ratio),
    }
}

fn richardson(history: &[f64]) -> (f64, f64, Option<f64>) {
    let n = history.len();
    let (coarse, fine) = (history[n - 2], history[n - 1]);
    let delta = fine - coarse;
    let extrap = fine + delta / 3.0;
    let mut err = 2.0 * (fine - extrap).abs();
    let mut ratio = None;
    if n >= 3 {
        let prev = history[n - 2] - history[n - 3];
        if delta != 0.0 {
            let r = prev / delta;
            ratio = Some(r);
            if r < 4.0 {
                err = 2.0 * delta.abs() / (r.max(1.5) - 1.0);
            }
        }
    }
    (extrap, err, ratio)
}

/// Smallest `k` eigenvalues with Richardson error estimates, refining until
/// every estimate is at most `target` or `max_level` is reached.
pub fn spectrum_with_error(
    tri: &VertexTriangle,
    k: usize,
    target: f64,
    min_level: u32,
    max_level: u32,
    model: ErrorModel,
    opts: &EigenOptions,
) -> Result<(Spectrum, bool)> {
    if !(target > 0.0) {
        return Err(GapError::InvalidInput(format!(
            "accuracy target must be positive, got {target}"
        )));
    }
    // Level 1 has no interior vertex; level 2 has three, too few for k + guard.
    let first = min_level.max(3);
    let needed = if model == ErrorModel::Extrapolated { 2 } else { 1 };
    if max_level < first + needed {
        return Err(GapError::InvalidInput(format!(
            "level cap {max_level} leaves too few levels above {first} for the {} error model",
            model.as_str()
        )));
    }
    let mut history: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut previous: Option<LevelSolve> = None;
    let mut best = None;
    for level in first..=max_level {
        let solve = solve_level(tri, level, k, opts, previous.as_ref())?;
        for (h, v) in history.iter_mut().zip(&solve.pairs.values) {
            h.push(*v);
        }
        if level >= first + needed {
            let mut values = Vec::with_capacity(k);
            let mut errors = Vec::with_capacity(k);
            let mut ratios = Vec::with_capacity(k);
            for h in &history {
                let (e, err, r) = richardson_with(h, model);
                values.push(e);
                errors.push(err);
                ratios.push(r);
            }
            let done = errors.iter().all(|e| *e <= target);
            let spectrum = Spectrum {
                eigenvalues: values,
                error_bounds: errors,
                fine: solve.pairs.values.clone(),
                levels: (level - 1, level),
                observed_ratio: ratios,
            };
            if done {
                return Ok((spectrum, true));
            }
            best = Some(spectrum);
        }
        previous = Some(solve);
    }
    Ok((best.expect("at least two levels solved"), false))
}

/// `λ₁`, `λ₂`, `ξ = d²(λ₂ − λ₁)` and an error estimate on `ξ` for the
/// triangle with apex `t`, refining until the estimate meets `opts.target`.
pub fn gap_with_error(t: &crate::geometry::Triangle, opts: &GapOptions) -> Result<GapResult> {
    let d = crate::geometry::diameter(t);
    // Eigenvalues of the unit-diameter copy are d² times the originals, so
    // solve there and compare errors directly against the ξ target.
    let (tri, _) = crate::geometry::scale_to_unit_diameter(t);
    let per_eigen = 0.5 * opts.target;
    let (spectrum, converged) = spectrum_with_error(
        &tri,
        2,
        per_eigen,
        opts.min_level,
        opts.max_level,
        opts.error_model,
        &opts.eigen,
    )?;
    let (s1, s2) = (spectrum.eigenvalues[0], spectrum.eigenvalues[1]);
    let xi = crate::geometry::gap_function(s1, s2, 1.0)?;
    let err = spectrum.error_bounds[0] + spectrum.error_bounds[1];
    let scale = 1.0 / (d * d);
    Ok(GapResult {
        apex_x: t.apex_x(),
        apex_y: t.apex_y(),
        lambda1: s1 * scale,
        lambda2: s2 * scale,
        xi,
        err,
        diameter: d,
        spectrum,
        converged,
    })
}
