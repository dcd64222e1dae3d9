//! Problem abstraction: a smooth part paired with a penalty operator, plus
//! constructors for the built-in experiment families.
//!
//! Every problem is reduced at construction to the canonical form
//! `f(x) + beta * ||C x||_1`: fused formulations are realized by row-stacking
//! into a single `C`, and per-row weights are absorbed by pre-scaling the
//! rows, so the solver core only ever sees `(C, beta)`.

use crate::linalg::{dot, SparseMatrix};
use crate::rng::Rng;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemError {
    InvalidParameter(String),
    DimensionMismatch(String),
}

impl fmt::Display for ProblemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemError::InvalidParameter(m) => write!(f, "invalid parameter: {m}"),
            ProblemError::DimensionMismatch(m) => write!(f, "dimension mismatch: {m}"),
        }
    }
}

impl std::error::Error for ProblemError {}

/// Cost evaluation produced a non-finite value; carries the offending point.
#[derive(Debug, Clone)]
pub struct EvaluationError {
    pub value: f64,
    pub x: Vec<f64>,
}

impl fmt::Display for EvaluationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cost evaluation produced non-finite value {} (dim {})",
            self.value,
            self.x.len()
        )
    }
}

impl std::error::Error for EvaluationError {}

/// Second-order information of the smooth part at a point.
pub enum CurvatureInfo<'a> {
    /// Explicit sparse symmetric matrix.
    Matrix {
        h: &'a SparseMatrix,
        spd_guaranteed: bool,
    },
    /// Diagonal curvature; entries may be negative for nonconvex f
    /// (clamped downstream).
    Diagonal { d: Vec<f64>, spd_guaranteed: bool },
    /// H = A^T A applied as an operator, for least-squares terms too large
    /// to assemble.
    Gram { a: &'a SparseMatrix },
}

impl CurvatureInfo<'_> {
    /// Exact trace of the curvature; used to scale the SPD clamp.
    pub fn trace(&self) -> f64 {
        match self {
            CurvatureInfo::Matrix { h, .. } => h.diag().iter().sum(),
            CurvatureInfo::Diagonal { d, .. } => d.iter().sum(),
            // trace(A^T A) = sum of all squared entries
            CurvatureInfo::Gram { a } => a.col_sq_sums().iter().sum(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CurvatureInfo::Matrix { h, .. } => h.ncols(),
            CurvatureInfo::Diagonal { d, .. } => d.len(),
            CurvatureInfo::Gram { a } => a.ncols(),
        }
    }
}

enum Smooth {
    /// f(x) = 1/2 x^T H x - b^T x + c0
    Quadratic {
        h: SparseMatrix,
        b: Vec<f64>,
        c0: f64,
        diag_h: Option<Vec<f64>>,
    },
    /// f(x) = 1/2 ||A x - y||^2, with A^T A pre-assembled when affordable.
    LeastSquares {
        a: SparseMatrix,
        y: Vec<f64>,
        gram: Option<SparseMatrix>,
        aty: Vec<f64>,
    },
    /// f(u) = sum_i log(a + (u_i - f_i)^2)
    Cauchy { f_obs: Vec<f64>, scale: f64 },
}

/// A composite sparse problem: smooth part, penalty matrix C (n x m) with
/// weights already absorbed, and the penalty weight beta.
pub struct ProblemSpec {
    smooth: Smooth,
    penalty: SparseMatrix,
    beta: f64,
    kind: &'static str,
}

/// Threshold above which least-squares Gram matrices are kept in operator
/// form instead of being assembled.
pub const GRAM_ASSEMBLY_LIMIT: usize = 4000;

impl ProblemSpec {
    fn new(
        smooth: Smooth,
        penalty: SparseMatrix,
        beta: f64,
        kind: &'static str,
    ) -> Result<ProblemSpec, ProblemError> {
        if !(beta > 0.0) {
            return Err(ProblemError::InvalidParameter(format!(
                "beta must be positive, got {beta}"
            )));
        }
        Ok(ProblemSpec {
            smooth,
            penalty,
            beta,
            kind,
        })
    }

    /// Scales the rows of a penalty matrix by strictly positive weights,
    /// absorbing them so downstream code sees plain beta * ||C x||_1.
    pub fn absorb_row_weights(
        penalty: &SparseMatrix,
        weights: &[f64],
    ) -> Result<SparseMatrix, ProblemError> {
        if weights.len() != penalty.nrows() {
            return Err(ProblemError::DimensionMismatch(format!(
                "{} weights for {} penalty rows",
                weights.len(),
                penalty.nrows()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(ProblemError::InvalidParameter(
                "row weights must be strictly positive".into(),
            ));
        }
        Ok(penalty.scale_rows(weights))
    }

    pub fn dim(&self) -> usize {
        self.penalty.ncols()
    }

    pub fn penalty_matrix(&self) -> &SparseMatrix {
        &self.penalty
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }

    pub fn smooth_value(&self, x: &[f64]) -> f64 {
        match &self.smooth {
            Smooth::Quadratic { h, b, c0, .. } => 0.5 * dot(&h.matvec(x), x) - dot(b, x) + c0,
            Smooth::LeastSquares { a, y, .. } => {
                let r = a.matvec(x);
                0.5 * r
                    .iter()
                    .zip(y)
                    .map(|(ri, yi)| (ri - yi) * (ri - yi))
                    .sum::<f64>()
            }
            Smooth::Cauchy { f_obs, scale } => x
                .iter()
                .zip(f_obs)
                .map(|(ui, fi)| (scale + (ui - fi) * (ui - fi)).ln())
                .sum(),
        }
    }

    pub fn smooth_gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.smooth {
            Smooth::Quadratic { h, b, .. } => {
                let mut g = h.matvec(x);
                for (gi, bi) in g.iter_mut().zip(b) {
                    *gi -= bi;
                }
                g
            }
            Smooth::LeastSquares { a, y, .. } => {
                let mut r = a.matvec(x);
                for (ri, yi) in r.iter_mut().zip(y) {
                    *ri -= yi;
                }
                a.matvec_t(&r)
            }
            Smooth::Cauchy { f_obs, scale } => x
                .iter()
                .zip(f_obs)
                .map(|(ui, fi)| {
                    let t = ui - fi;
                    2.0 * t / (scale + t * t)
                })
                .collect(),
        }
    }

    pub fn curvature(&self, x: &[f64]) -> CurvatureInfo<'_> {
        match &self.smooth {
            Smooth::Quadratic { h, diag_h, .. } => match diag_h {
                Some(d) => CurvatureInfo::Diagonal {
                    d: d.clone(),
                    spd_guaranteed: d.iter().all(|&v| v >= 0.0),
                },
                None => CurvatureInfo::Matrix {
                    h,
                    spd_guaranteed: true,
                },
            },
            Smooth::LeastSquares { a, gram, .. } => match gram {
                Some(g) => CurvatureInfo::Matrix {
                    h: g,
                    spd_guaranteed: true,
                },
                None => CurvatureInfo::Gram { a },
            },
            Smooth::Cauchy { f_obs, scale } => {
                let d = x
                    .iter()
                    .zip(f_obs)
                    .map(|(ui, fi)| {
                        let t = ui - fi;
                        let den = scale + t * t;
                        2.0 * (scale - t * t) / (den * den)
                    })
                    .collect();
                CurvatureInfo::Diagonal {
                    d,
                    spd_guaranteed: false,
                }
            }
        }
    }

    /// (H, linear term b) when f(x) = 1/2 x^T H x - b^T x + const; used by
    /// the ADMM baseline.
    pub fn quadratic_form(&self) -> Option<(SparseMatrix, Vec<f64>)> {
        match &self.smooth {
            Smooth::Quadratic { h, b, .. } => Some((h.clone(), b.clone())),
            Smooth::LeastSquares { gram, aty, .. } => {
                gram.as_ref().map(|g| (g.clone(), aty.clone()))
            }
            Smooth::Cauchy { .. } => None,
        }
    }

    /// beta * sum_i |<c_i, x>|
    pub fn penalty_value(&self, x: &[f64]) -> f64 {
        let n = self.penalty.nrows();
        let mut s = 0.0;
        for i in 0..n {
            s += self.penalty.row_dot(i, x).abs();
        }
        self.beta * s
    }

    /// phi(x) = f(x) + beta * ||C x||_1. This is the single cost path used
    /// by the solver's descent checks.
    pub fn eval_cost(&self, x: &[f64]) -> Result<f64, EvaluationError> {
        let v = self.smooth_value(x) + self.penalty_value(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvaluationError {
                value: v,
                x: x.to_vec(),
            })
        }
    }
}

/// 2-D forward-difference matrix on a grid_n x grid_n grid (row-major
/// numbering): one (+1, -1) row per horizontal neighbor pair, then one per
/// vertical pair.
pub fn forward_difference_2d(grid_n: usize) -> SparseMatrix {
    let m = grid_n * grid_n;
    let mut triplets = Vec::new();
    let mut row = 0;
    for r in 0..grid_n {
        for c in 0..grid_n - 1 {
            let j = r * grid_n + c;
            triplets.push((row, j, 1.0));
            triplets.push((row, j + 1, -1.0));
            row += 1;
        }
    }
    for r in 0..grid_n - 1 {
        for c in 0..grid_n {
            let j = r * grid_n + c;
            triplets.push((row, j, 1.0));
            triplets.push((row, j + grid_n, -1.0));
            row += 1;
        }
    }
    SparseMatrix::from_triplets(&triplets, row, m).unwrap()
}

/// Anisotropic total-variation flow problem on a grid_n x grid_n interior
/// grid with homogeneous Dirichlet boundary:
/// f(u) = 1/2 u^T A u - b^T u with A the 5-point Laplacian stencil
/// (entries {4, -1}, the h^2 scaling folded in) and b = h^2 * forcing
/// sampled at interior nodes; penalty beta * ||C u||_1 with C the
/// forward-difference operator.
pub fn build_quadratic_tv(
    grid_n: usize,
    forcing: &dyn Fn(f64, f64) -> f64,
    beta: f64,
) -> Result<ProblemSpec, ProblemError> {
    if grid_n < 2 {
        return Err(ProblemError::InvalidParameter(format!(
            "grid_n must be at least 2, got {grid_n}"
        )));
    }
    let m = grid_n * grid_n;
    let h = 1.0 / (grid_n as f64 + 1.0);
    let mut triplets = Vec::with_capacity(5 * m);
    let mut b = vec![0.0; m];
    for r in 0..grid_n {
        for c in 0..grid_n {
            let j = r * grid_n + c;
            triplets.push((j, j, 4.0));
            if c > 0 {
                triplets.push((j, j - 1, -1.0));
            }
            if c + 1 < grid_n {
                triplets.push((j, j + 1, -1.0));
            }
            if r > 0 {
                triplets.push((j, j - grid_n, -1.0));
            }
            if r + 1 < grid_n {
                triplets.push((j, j + grid_n, -1.0));
            }
            let (xc, yc) = ((c as f64 + 1.0) * h, (r as f64 + 1.0) * h);
            b[j] = h * h * forcing(xc, yc);
        }
    }
    let a = SparseMatrix::from_triplets(&triplets, m, m).unwrap();
    ProblemSpec::new(
        Smooth::Quadratic {
            h: a,
            b,
            c0: 0.0,
            diag_h: None,
        },
        forward_difference_2d(grid_n),
        beta,
        "quadratic_tv",
    )
}

/// Deconvolution / fused-lasso problem:
/// 1/2 ||A x - y||^2 + alpha ||x||_1 + beta * sum_{(i,j) in E} |x_i - x_j|.
/// The two penalty blocks are stacked into a single C with the weights
/// absorbed.
pub fn build_deconvolution(
    a: SparseMatrix,
    y: &[f64],
    alpha: f64,
    beta: f64,
    neighbor_edges: &[(usize, usize)],
) -> Result<ProblemSpec, ProblemError> {
    if a.nrows() != y.len() {
        return Err(ProblemError::DimensionMismatch(format!(
            "A has {} rows but y has {} entries",
            a.nrows(),
            y.len()
        )));
    }
    if alpha < 0.0 || beta < 0.0 || (alpha == 0.0 && beta == 0.0) {
        return Err(ProblemError::InvalidParameter(
            "alpha and beta must be nonnegative and not both zero".into(),
        ));
    }
    let m = a.ncols();
    for &(i, j) in neighbor_edges {
        if i >= m || j >= m {
            return Err(ProblemError::DimensionMismatch(format!(
                "edge ({i}, {j}) out of range for {m} variables"
            )));
        }
    }
    let mut blocks: Vec<SparseMatrix> = Vec::new();
    if alpha > 0.0 {
        blocks.push(SparseMatrix::identity(m).scale(alpha));
    }
    if beta > 0.0 && !neighbor_edges.is_empty() {
        let triplets: Vec<_> = neighbor_edges
            .iter()
            .enumerate()
            .flat_map(|(r, &(i, j))| [(r, i, 1.0), (r, j, -1.0)])
            .collect();
        let inc = SparseMatrix::from_triplets(&triplets, neighbor_edges.len(), m).unwrap();
        blocks.push(inc.scale(beta));
    }
    let penalty = blocks
        .into_iter()
        .reduce(|top, bot| top.vstack(&bot))
        .unwrap_or_else(|| SparseMatrix::zeros(0, m));
    let gram = if m <= GRAM_ASSEMBLY_LIMIT {
        Some(a.transpose().matmul(&a))
    } else {
        None
    };
    let aty = a.matvec_t(y);
    ProblemSpec::new(
        Smooth::LeastSquares {
            a,
            y: y.to_vec(),
            gram,
            aty,
        },
        penalty,
        1.0,
        "deconvolution",
    )
}

/// Cauchy denoising of a grid image:
/// f(u) = sum_i log(a + (u_i - f_i)^2), penalty beta * ||C u||_1 with the
/// forward-difference C. Nonconvex; the curvature diagonal goes negative
/// and is clamped downstream.
pub fn build_cauchy_denoise(
    f_obs: &[f64],
    a: f64,
    beta: f64,
    grid_n: usize,
) -> Result<ProblemSpec, ProblemError> {
    if !(a > 0.0) {
        return Err(ProblemError::InvalidParameter(format!(
            "Cauchy scale must be positive, got {a}"
        )));
    }
    if f_obs.len() != grid_n * grid_n {
        return Err(ProblemError::DimensionMismatch(format!(
            "observed image has {} entries, expected {}",
            f_obs.len(),
            grid_n * grid_n
        )));
    }
    ProblemSpec::new(
        Smooth::Cauchy {
            f_obs: f_obs.to_vec(),
            scale: a,
        },
        forward_difference_2d(grid_n),
        beta,
        "cauchy",
    )
}

/// Oriented incidence matrix: one row per edge, -1 at the source, +1 at the
/// target (orientation = input order).
pub fn incidence_matrix(
    edges: &[(usize, usize)],
    nodes: usize,
) -> Result<SparseMatrix, ProblemError> {
    let mut triplets = Vec::with_capacity(2 * edges.len());
    for (r, &(s, t)) in edges.iter().enumerate() {
        if s == t {
            return Err(ProblemError::InvalidParameter(format!(
                "self-loop edge ({s}, {t}) rejected"
            )));
        }
        if s >= nodes || t >= nodes {
            return Err(ProblemError::DimensionMismatch(format!(
                "edge ({s}, {t}) out of range for {nodes} nodes"
            )));
        }
        triplets.push((r, s, -1.0));
        triplets.push((r, t, 1.0));
    }
    Ok(SparseMatrix::from_triplets(&triplets, edges.len(), nodes).unwrap())
}

/// Graph trend filtering:
/// 1/2 ||x - y||^2 + beta1 ||D2 x||_1 + beta2 ||x||_1 where D2 = D1^T D1 is
/// the graph Laplacian built from the oriented incidence matrix D1.
pub fn build_graph_trend(
    edges: &[(usize, usize)],
    y: &[f64],
    beta1: f64,
    beta2: f64,
) -> Result<ProblemSpec, ProblemError> {
    if beta1 < 0.0 || beta2 < 0.0 || (beta1 == 0.0 && beta2 == 0.0) {
        return Err(ProblemError::InvalidParameter(
            "beta1 and beta2 must be nonnegative with at least one positive".into(),
        ));
    }
    let m = y.len();
    let d1 = incidence_matrix(edges, m)?;
    let d2 = d1.transpose().matmul(&d1);
    let mut blocks: Vec<SparseMatrix> = Vec::new();
    if beta1 > 0.0 {
        blocks.push(d2.scale(beta1));
    }
    if beta2 > 0.0 {
        blocks.push(SparseMatrix::identity(m).scale(beta2));
    }
    let penalty = blocks
        .into_iter()
        .reduce(|top, bot| top.vstack(&bot))
        .unwrap();
    ProblemSpec::new(
        Smooth::Quadratic {
            h: SparseMatrix::identity(m),
            b: y.to_vec(),
            c0: 0.5 * dot(y, y),
            diag_h: Some(vec![1.0; m]),
        },
        penalty,
        1.0,
        "graph_trend",
    )
}

/// Proximal-map instance: argmin 1/2 ||x - xhat||^2 + alpha ||C x||_1.
pub fn build_prox_instance(
    xhat: &[f64],
    c: SparseMatrix,
    alpha: f64,
) -> Result<ProblemSpec, ProblemError> {
    if c.ncols() != xhat.len() {
        return Err(ProblemError::DimensionMismatch(format!(
            "C has {} columns but xhat has {} entries",
            c.ncols(),
            xhat.len()
        )));
    }
    let m = xhat.len();
    ProblemSpec::new(
        Smooth::Quadratic {
            h: SparseMatrix::identity(m),
            b: xhat.to_vec(),
            c0: 0.5 * dot(xhat, xhat),
            diag_h: Some(vec![1.0; m]),
        },
        c,
        alpha,
        "prox",
    )
}

/// Seedable synthetic data used by the experiments and tests.
pub mod synthetic {
    use super::*;

    /// Cauchy-noise contamination f = u + xi * eta1 / eta2 with eta1, eta2
    /// standard normal.
    pub fn cauchy_noise(u: &[f64], xi: f64, seed: u64) -> Vec<f64> {
        let mut rng = Rng::new(seed);
        u.iter()
            .map(|&ui| {
                let e1 = rng.normal();
                let mut e2 = rng.normal();
                // keep the heavy tail but avoid a division blow-up to inf
                while e2.abs() < 1e-8 {
                    e2 = rng.normal();
                }
                ui + xi * e1 / e2
            })
            .collect()
    }

    pub fn gaussian_noise(y: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = Rng::new(seed);
        y.iter().map(|&yi| yi + sigma * rng.normal()).collect()
    }

    /// Piecewise-constant grid image: background 0 with two constant
    /// rectangles, the classic cartoon target for TV-type penalties.
    pub fn piecewise_image(grid_n: usize) -> Vec<f64> {
        let mut img = vec![0.0; grid_n * grid_n];
        let (q, h) = (grid_n / 4, grid_n / 2);
        for r in q..h {
            for c in q..h {
                img[r * grid_n + c] = 1.0;
            }
        }
        for r in h..(h + q).min(grid_n) {
            for c in h..grid_n {
                img[r * grid_n + c] = 0.5;
            }
        }
        img
    }

    /// Edges of a rows x cols grid graph (4-neighbor), node id = r * cols + c.
    pub fn grid_graph_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let j = r * cols + c;
                if c + 1 < cols {
                    edges.push((j, j + 1));
                }
                if r + 1 < rows {
                    edges.push((j, j + cols));
                }
            }
        }
        edges
    }

    /// Random sparse matrix with `nnz_per_row` draws per row, entries
    /// uniform in [-1, 1].
    pub fn random_sparse_rows(
        nrows: usize,
        ncols: usize,
        nnz_per_row: usize,
        seed: u64,
    ) -> SparseMatrix {
        let mut rng = Rng::new(seed);
        let mut triplets = Vec::new();
        for r in 0..nrows {
            for _ in 0..nnz_per_row {
                let c = rng.index(ncols);
                let v = rng.uniform_in(-1.0, 1.0);
                if v != 0.0 {
                    triplets.push((r, c, v));
                }
            }
        }
        SparseMatrix::from_triplets(&triplets, nrows, ncols).unwrap()
    }

    /// Well-conditioned random least-squares data (A, y): diagonally
    /// dominant A so that A^T A stays comfortably positive definite.
    pub fn random_least_squares(m: usize, seed: u64) -> (SparseMatrix, Vec<f64>) {
        let mut rng = Rng::new(seed);
        let mut triplets = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let v = if i == j {
                    2.0 + rng.uniform()
                } else {
                    0.3 * rng.normal() / (m as f64).sqrt()
                };
                triplets.push((i, j, v));
            }
        }
        let a = SparseMatrix::from_triplets(&triplets, m, m).unwrap();
        let y = rng.normal_vec(m);
        (a, y)
    }
}
