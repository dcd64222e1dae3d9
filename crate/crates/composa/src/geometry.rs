//! Sign-change detection, projection onto the sparsity subspace, and the
//! projected backtracking line search.

use crate::linalg::{self, LinalgError, ProfileChol, SparseMatrix};
use crate::problems::{EvaluationError, ProblemSpec};
use crate::subgradient::{tilde_grad, SubgradientState};

/// Rows whose trial step would flip the sign of <c_i, x> against the
/// multiplier; the projection pins them to zero.
#[derive(Debug, Clone)]
pub struct SignChangeSet {
    pub indices: Vec<usize>,
    pub cs: SparseMatrix,
}

fn sign_tol(t: f64, tol: f64) -> f64 {
    if t.abs() <= tol {
        0.0
    } else {
        t.signum()
    }
}

/// Membership rule:
/// - rows with |<c_i, x>| > tol_act join when the trial product's sign (with
///   the same tolerance band) differs from the current one;
/// - active rows join when sign(xi_i) * <c_i, d> <= 0, evaluated through the
///   trial difference (trial - x = s * d with s > 0).
pub fn sign_change_set(
    c: &SparseMatrix,
    x: &[f64],
    xi: &[f64],
    trial: &[f64],
    tol_act: f64,
) -> SignChangeSet {
    let mut indices = Vec::new();
    for i in 0..c.nrows() {
        let cur = c.row_dot(i, x);
        let tri = c.row_dot(i, trial);
        let member = if cur.abs() > tol_act {
            sign_tol(tri, tol_act) != sign_tol(cur, tol_act)
        } else {
            xi[i].signum() * (tri - cur) <= 0.0 || xi[i] == 0.0
        };
        if member {
            indices.push(i);
        }
    }
    let cs = c.select_rows(&indices).unwrap();
    SignChangeSet { indices, cs }
}

/// Solves (G + maybe eps I) y = rhs for a sign-change Gram matrix. Large
/// Grams are renumbered breadth-first before factoring: difference-operator
/// row orderings (all horizontal rows, then all vertical) otherwise produce
/// a near-dense profile.
fn solve_gram(gram: &SparseMatrix, rhs: &[f64], eps_reg: f64) -> Vec<f64> {
    let n = gram.nrows();
    let (mat, perm): (SparseMatrix, Option<Vec<usize>>) = if n > 64 {
        let order = crate::direction::bfs_order(gram);
        (gram.permute_symmetric(&order), Some(order))
    } else {
        (gram.clone(), None)
    };
    let prhs: Vec<f64> = match &perm {
        Some(order) => order.iter().map(|&old| rhs[old]).collect(),
        None => rhs.to_vec(),
    };
    let py = match ProfileChol::factor(&mat) {
        Ok(f) => f.solve(&prhs),
        Err(LinalgError::NotPositiveDefinite { .. }) => {
            let max_diag = mat.diag().iter().fold(1.0f64, |m, d| m.max(d.abs()));
            let eps = eps_reg * max_diag;
            ProfileChol::factor_with_shift(&mat, eps)
                .expect("regularized projection Gram must factor")
                .solve(&prhs)
        }
        Err(e) => panic!("projection solve failed: {e}"),
    };
    match perm {
        Some(order) => {
            let mut y = vec![0.0; n];
            for (new, &old) in order.iter().enumerate() {
                y[old] = py[new];
            }
            y
        }
        None => py,
    }
}

/// Euclidean projection of `v` onto {z : Cs z = 0} via the normal equations
/// (Cs Cs^T) y = Cs v, x_tilde = v - Cs^T y.
///
/// A rank-deficient Gram matrix is retried with +eps I,
/// eps = eps_reg * max(diag, 1).
pub fn project_onto_subspace(v: &[f64], cs: &SparseMatrix, eps_reg: f64) -> (Vec<f64>, Vec<f64>) {
    if cs.nrows() == 0 {
        return (v.to_vec(), Vec::new());
    }
    let gram = cs.gram_sparse();
    let rhs = cs.matvec(v);
    let y = solve_gram(&gram, &rhs, eps_reg);
    let mut xt = v.to_vec();
    let correction = cs.matvec_t(&y);
    for (xi, ci) in xt.iter_mut().zip(&correction) {
        *xi -= ci;
    }
    (xt, y)
}

/// Default Tikhonov factor for rank-deficient sign-change Gram matrices.
pub const DEFAULT_EPS_REG: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeKind {
    /// Full minimum-norm composite residual (subgradient-aware, never
    /// steeper than the tilde slope).
    MinNorm,
    /// The composite gradient without active-row contributions.
    Tilde,
}

#[derive(Debug, Clone)]
pub struct LinesearchConfig {
    /// Armijo slope coefficient; 1.0 mirrors the plain decrease condition.
    pub sigma: f64,
    pub s_min: f64,
    pub max_backtracks: usize,
    pub slope: SlopeKind,
    pub eps_reg: f64,
}

impl Default for LinesearchConfig {
    fn default() -> Self {
        LinesearchConfig {
            sigma: 1e-2,
            s_min: 1e-12,
            max_backtracks: 40,
            slope: SlopeKind::MinNorm,
            eps_reg: DEFAULT_EPS_REG,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinesearchOutcome {
    pub step: f64,
    pub x_next: Vec<f64>,
    pub cost_next: f64,
    /// Sign-change rows pinned at the accepted (or best) trial.
    pub sign_set: Vec<usize>,
    /// No trial satisfied sufficient decrease before the step underflowed;
    /// `x_next` is the best strictly-improving trial if one exists, else `x`.
    pub stalled: bool,
    pub trials: usize,
}

/// Backtracking over s in {1, 1/2, 1/4, ...}: each trial projects
/// x + s d onto the trial-dependent sign-change subspace and tests
/// phi(candidate) <= phi(x) + sigma * v^T (candidate - x).
pub fn projected_linesearch(
    p: &ProblemSpec,
    x: &[f64],
    cost_x: f64,
    d: &[f64],
    state: &SubgradientState,
    cfg: &LinesearchConfig,
) -> Result<LinesearchOutcome, EvaluationError> {
    let c = p.penalty_matrix();
    let tol_act = state.partition.tol_act;
    let slope_vec = match cfg.slope {
        SlopeKind::MinNorm => state.residual.clone(),
        SlopeKind::Tilde => tilde_grad(p, x, &state.partition),
    };

    let mut s = 1.0;
    let mut best: Option<(f64, Vec<f64>, f64, Vec<usize>)> = None; // (cost, x, s, set)
    let mut trials = 0;
    while trials < cfg.max_backtracks && s >= cfg.s_min {
        trials += 1;
        let mut trial = x.to_vec();
        linalg::axpy(s, d, &mut trial);
        let set = sign_change_set(c, x, &state.xi, &trial, tol_act);
        let candidate = if set.indices.is_empty() {
            trial
        } else {
            project_onto_subspace(&trial, &set.cs, cfg.eps_reg).0
        };
        let cost_c = p.eval_cost(&candidate)?;
        let delta = linalg::sub(&candidate, x);
        let rhs = cost_x + cfg.sigma * linalg::dot(&slope_vec, &delta);
        if cost_c <= rhs && cost_c < cost_x {
            return Ok(LinesearchOutcome {
                step: s,
                x_next: candidate,
                cost_next: cost_c,
                sign_set: set.indices,
                stalled: false,
                trials,
            });
        }
        if best.as_ref().is_none_or(|(bc, ..)| cost_c < *bc) {
            best = Some((cost_c, candidate, s, set.indices));
        }
        s *= 0.5;
    }
    // stalled: fall back to the best strictly-improving trial, else stay
    match best {
        Some((bc, bx, bs, bset)) if bc < cost_x => Ok(LinesearchOutcome {
            step: bs,
            x_next: bx,
            cost_next: bc,
            sign_set: bset,
            stalled: true,
            trials,
        }),
        _ => Ok(LinesearchOutcome {
            step: 0.0,
            x_next: x.to_vec(),
            cost_next: cost_x,
            sign_set: Vec::new(),
            stalled: true,
            trials,
        }),
    }
}
