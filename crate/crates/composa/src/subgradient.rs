//! Index classification and the minimum-norm subgradient.
//!
//! Rows of C with |<c_i, x>| inside the activity band are set-valued in the
//! subdifferential; the multiplier on those rows is found by a small
//! box-constrained QP, solved with accelerated projected gradient
//! (fixed step 1/(1.1 * L), restart on objective increase).

use crate::linalg::{self, SparseMatrix};
use crate::problems::ProblemSpec;

/// Partition of penalty rows by the sign of <c_i, x> within tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexPartition {
    pub pos: Vec<usize>,
    pub neg: Vec<usize>,
    pub act: Vec<usize>,
    pub tol_act: f64,
}

impl IndexPartition {
    pub fn n_active(&self) -> usize {
        self.act.len()
    }
}

/// Multiplier, composite residual and solve diagnostics at a point.
#[derive(Debug, Clone)]
pub struct SubgradientState {
    pub partition: IndexPartition,
    /// Full multiplier: +1 on P, -1 on N, QP solution on A.
    pub xi: Vec<f64>,
    /// grad f(x) + beta * C^T xi
    pub residual: Vec<f64>,
    pub residual_norm: f64,
    pub qp_iters: usize,
    pub qp_converged: bool,
}

/// Classifies rows: P where <c_i, x> > tol_act, N where < -tol_act, A inside
/// the band.
pub fn classify_indices(c: &SparseMatrix, x: &[f64], tol_act: f64) -> IndexPartition {
    assert!(tol_act >= 0.0);
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    let mut act = Vec::new();
    for i in 0..c.nrows() {
        let t = c.row_dot(i, x);
        if t > tol_act {
            pos.push(i);
        } else if t < -tol_act {
            neg.push(i);
        } else {
            act.push(i);
        }
    }
    IndexPartition {
        pos,
        neg,
        act,
        tol_act,
    }
}

/// grad f(x) + beta * (sum_{i in P} c_i - sum_{i in N} c_i): the composite
/// gradient with active rows left out.
pub fn tilde_grad(p: &ProblemSpec, x: &[f64], part: &IndexPartition) -> Vec<f64> {
    let mut g = p.smooth_gradient(x);
    let c = p.penalty_matrix();
    let beta = p.beta();
    for &i in &part.pos {
        let (cols, vals) = c.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            g[j] += beta * v;
        }
    }
    for &i in &part.neg {
        let (cols, vals) = c.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            g[j] -= beta * v;
        }
    }
    g
}

fn clamp_box(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = x.clamp(-1.0, 1.0);
    }
}

/// Computes the minimum-norm subgradient multiplier and the composite
/// residual at `x`.
///
/// The active-row block solves
/// `min_{xi in [-1,1]^p} 1/2 || g + beta * C_A^T xi ||^2` where `g` is
/// [`tilde_grad`]. Hitting `maxit_qp` is flagged, not fatal: the best
/// iterate still yields a valid composite-gradient surrogate.
pub fn min_norm_subgradient(
    p: &ProblemSpec,
    x: &[f64],
    part: &IndexPartition,
    warm_start: Option<&[f64]>,
    tol_qp: f64,
    maxit_qp: usize,
) -> SubgradientState {
    let c = p.penalty_matrix();
    let beta = p.beta();
    let g = tilde_grad(p, x, part);
    let n = c.nrows();
    let p_dim = part.act.len();

    let mut xi_full = vec![0.0; n];
    for &i in &part.pos {
        xi_full[i] = 1.0;
    }
    for &i in &part.neg {
        xi_full[i] = -1.0;
    }

    if p_dim == 0 {
        let residual_norm = linalg::norm2(&g);
        return SubgradientState {
            partition: part.clone(),
            xi: xi_full,
            residual: g,
            residual_norm,
            qp_iters: 0,
            qp_converged: true,
        };
    }

    let c_a = c.select_rows(&part.act).unwrap();
    let m = c.ncols();

    // q(xi) = 1/2 ||g + beta C_A^T xi||^2, grad q = beta C_A (g + beta C_A^T xi)
    let mut w = vec![0.0; m];
    let eval_w = |xi: &[f64], w: &mut Vec<f64>| {
        w.copy_from_slice(&g);
        let mut scaled = xi.to_vec();
        linalg::scale(beta, &mut scaled);
        c_a.matvec_t_into(&scaled, w);
    };
    let q_of_w = |w: &[f64]| 0.5 * linalg::dot(w, w);
    let grad_from_w = |w: &[f64]| {
        let mut gq = c_a.matvec(w);
        linalg::scale(beta, &mut gq);
        gq
    };

    let lhat = beta * beta * linalg::op_norm_estimate(&|v| c_a.matvec(&c_a.matvec_t(v)), p_dim, 50);
    if lhat <= 1e-300 {
        // all active rows are structurally empty; the QP objective is flat
        let residual_norm = linalg::norm2(&g);
        return SubgradientState {
            partition: part.clone(),
            xi: xi_full,
            residual: g,
            residual_norm,
            qp_iters: 0,
            qp_converged: true,
        };
    }
    let tau = 1.0 / (1.1 * lhat);

    // start from the better of 0 and the (clipped) warm start
    let zero = vec![0.0; p_dim];
    eval_w(&zero, &mut w);
    let q_zero = q_of_w(&w);
    let mut xi = zero.clone();
    let mut q_xi = q_zero;
    if let Some(ws) = warm_start {
        assert_eq!(ws.len(), p_dim, "warm start must align with the active set");
        let mut wsv = ws.to_vec();
        clamp_box(&mut wsv);
        eval_w(&wsv, &mut w);
        let q_ws = q_of_w(&w);
        if q_ws < q_zero {
            xi = wsv;
            q_xi = q_ws;
        }
    }
    let mut best_xi = xi.clone();
    let mut best_q = q_xi;

    let mut xi_prev = xi.clone();
    let mut t: f64 = 1.0;
    let mut iters = 0;
    let mut converged = false;

    for k in 0..maxit_qp {
        iters = k + 1;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / t_next;
        let mut y = vec![0.0; p_dim];
        for i in 0..p_dim {
            y[i] = xi[i] + mom * (xi[i] - xi_prev[i]);
        }
        eval_w(&y, &mut w);
        let gy = grad_from_w(&w);
        let mut xi_next = y;
        for i in 0..p_dim {
            xi_next[i] -= tau * gy[i];
        }
        clamp_box(&mut xi_next);

        eval_w(&xi_next, &mut w);
        let q_next = q_of_w(&w);
        let g_next = grad_from_w(&w);
        // fixed-point residual at the new iterate
        let mut fp = 0.0f64;
        for i in 0..p_dim {
            let proj = (xi_next[i] - tau * g_next[i]).clamp(-1.0, 1.0);
            fp = fp.max((xi_next[i] - proj).abs());
        }
        if q_next < best_q {
            best_q = q_next;
            best_xi = xi_next.clone();
        }
        if q_next > q_xi {
            // objective increased: drop the momentum
            t = 1.0;
            xi_prev = xi_next.clone();
        } else {
            t = t_next;
            xi_prev = xi;
        }
        xi = xi_next;
        q_xi = q_next;
        if fp <= tol_qp {
            converged = true;
            break;
        }
    }

    // the best iterate seen is returned; recompute its residual
    eval_w(&best_xi, &mut w);
    for (slot, &i) in part.act.iter().enumerate() {
        xi_full[i] = best_xi[slot];
    }
    let residual_norm = linalg::norm2(&w);
    SubgradientState {
        partition: part.clone(),
        xi: xi_full,
        residual: w,
        residual_norm,
        qp_iters: iters,
        qp_converged: converged,
    }
}
