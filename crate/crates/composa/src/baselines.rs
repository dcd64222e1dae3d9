//! Independent reference solvers and brute-force oracles: a scaled ADMM for
//! quadratic smooth parts, the soft-thresholding operator, and exhaustive
//! grid searches used to certify the QP and tiny end-to-end minimizations.

use crate::linalg::{self, ProfileChol, SparseMatrix};
use crate::problems::ProblemSpec;
use crate::solver::{IterationRecord, SolveReport, Termination};
use std::fmt;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq)]
pub enum BaselineError {
    /// ADMM needs f(x) = 1/2 x^T H x - b^T x (+ const).
    NonQuadraticSmoothPart,
    /// Grid oracles are capped to keep enumeration exact and cheap.
    OracleTooLarge { dims: usize, max: usize },
}

impl fmt::Display for BaselineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineError::NonQuadraticSmoothPart => {
                write!(f, "ADMM baseline requires a quadratic smooth part")
            }
            BaselineError::OracleTooLarge { dims, max } => {
                write!(f, "grid oracle limited to {max} dimensions, got {dims}")
            }
        }
    }
}

impl std::error::Error for BaselineError {}

/// Componentwise sign(v) * max(|v| - t, 0).
pub fn soft_threshold(v: &[f64], t: f64) -> Vec<f64> {
    assert!(t >= 0.0);
    v.iter()
        .map(|&vi| vi.signum() * (vi.abs() - t).max(0.0))
        .collect()
}

/// Scaled ADMM on the split `min f(x) + beta ||z||_1 s.t. Cx = z`:
/// x-update solves (H + rho C^T C) x = b + rho C^T (z - u), z-update
/// soft-thresholds at beta/rho, u ascends the scaled dual. The penalty
/// parameter is rebalanced by factors of 2 when the primal/dual residual
/// ratio exceeds 10.
pub fn admm_solve(
    p: &ProblemSpec,
    rho: f64,
    tol: f64,
    maxit: usize,
) -> Result<SolveReport, BaselineError> {
    let (h, b) = p
        .quadratic_form()
        .ok_or(BaselineError::NonQuadraticSmoothPart)?;
    let t_start = Instant::now();
    let c = p.penalty_matrix();
    let beta = p.beta();
    let m = p.dim();
    let n = c.nrows();
    let cost_initial = p.eval_cost(&vec![0.0; m]).unwrap_or(f64::INFINITY);

    if n == 0 {
        // no penalty rows: one linear solve
        let x = ProfileChol::factor(&h)
            .expect("quadratic part must be SPD without a penalty")
            .solve(&b);
        let cost = p.eval_cost(&x).unwrap_or(f64::INFINITY);
        return Ok(SolveReport {
            solver: "admm".into(),
            problem_kind: p.kind().into(),
            dim: m,
            cost_initial,
            cost_final: cost,
            termination: Termination::ResidualSmall,
            iterations: 1,
            certificate_residual: None,
            wall_ms_total: t_start.elapsed().as_secs_f64() * 1e3,
            trace: vec![IterationRecord {
                iter: 1,
                cost,
                residual: 0.0,
                step: 0.0,
                n_active: 0,
                n_signchange: 0,
                n_frozen: 0,
                qp_iters: 0,
                lin_residual: 0.0,
                wall_ms: t_start.elapsed().as_secs_f64() * 1e3,
            }],
            x_final: x,
        });
    }

    let ctc = c.transpose().matmul(c);
    let mut rho = rho;
    let mut factor =
        ProfileChol::factor(&h.add_scaled(rho, &ctc)).expect("H + rho C^T C must be SPD");

    let mut x = vec![0.0; m];
    let mut z = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut trace = Vec::new();
    let mut termination = Termination::MaxIter;

    for iter in 1..=maxit {
        let t_iter = Instant::now();
        // x-update
        let mut zu = vec![0.0; n];
        for i in 0..n {
            zu[i] = z[i] - u[i];
        }
        let mut rhs = c.matvec_t(&zu);
        for (ri, bi) in rhs.iter_mut().zip(&b) {
            *ri = bi + rho * *ri;
        }
        x = factor.solve(&rhs);
        let cx = c.matvec(&x);
        // z-update
        let z_old = z;
        let mut w = vec![0.0; n];
        for i in 0..n {
            w[i] = cx[i] + u[i];
        }
        z = soft_threshold(&w, beta / rho);
        // dual ascent
        for i in 0..n {
            u[i] += cx[i] - z[i];
        }
        let primal = linalg::norm2(&linalg::sub(&cx, &z));
        let dual = rho * linalg::norm2(&c.matvec_t(&linalg::sub(&z, &z_old)));
        let cost = p.eval_cost(&x).unwrap_or(f64::INFINITY);
        trace.push(IterationRecord {
            iter,
            cost,
            residual: primal,
            step: dual,
            n_active: z.iter().filter(|v| v.abs() == 0.0).count(),
            n_signchange: 0,
            n_frozen: 0,
            qp_iters: 0,
            lin_residual: 0.0,
            wall_ms: t_iter.elapsed().as_secs_f64() * 1e3,
        });
        if primal <= tol && dual <= tol {
            termination = Termination::ResidualSmall;
            break;
        }
        // residual balancing
        if primal > 10.0 * dual && iter < maxit {
            rho *= 2.0;
            for ui in u.iter_mut() {
                *ui *= 0.5;
            }
            factor =
                ProfileChol::factor(&h.add_scaled(rho, &ctc)).expect("H + rho C^T C must be SPD");
        } else if dual > 10.0 * primal && rho > 1e-8 && iter < maxit {
            rho *= 0.5;
            for ui in u.iter_mut() {
                *ui *= 2.0;
            }
            factor =
                ProfileChol::factor(&h.add_scaled(rho, &ctc)).expect("H + rho C^T C must be SPD");
        }
    }

    let cost_final = p.eval_cost(&x).unwrap_or(f64::INFINITY);
    Ok(SolveReport {
        solver: "admm".into(),
        problem_kind: p.kind().into(),
        dim: m,
        cost_initial,
        cost_final,
        termination,
        iterations: trace.len(),
        certificate_residual: None,
        wall_ms_total: t_start.elapsed().as_secs_f64() * 1e3,
        trace,
        x_final: x,
    })
}

/// Multiplier recovered from the scaled ADMM dual: clamp(rho * u / beta).
/// At convergence it certifies first-order optimality.
pub fn admm_multiplier(u: &[f64], rho: f64, beta: f64) -> Vec<f64> {
    u.iter()
        .map(|&ui| (rho * ui / beta).clamp(-1.0, 1.0))
        .collect()
}

/// Exhaustive grid minimization of the MinSub objective
/// 1/2 || g + beta C_A^T xi ||^2 over [-1, 1]^p with the given spacing.
/// Verification plumbing: p is capped at 3.
pub fn grid_oracle_qp(
    g: &[f64],
    c_a: &SparseMatrix,
    beta: f64,
    step: f64,
) -> Result<(Vec<f64>, f64), BaselineError> {
    let p = c_a.nrows();
    if p > 3 {
        return Err(BaselineError::OracleTooLarge { dims: p, max: 3 });
    }
    if p == 0 {
        return Ok((Vec::new(), 0.5 * linalg::dot(g, g)));
    }
    // q(xi) = q0 + l^T xi + 1/2 xi^T G xi with small dense G
    let q0 = 0.5 * linalg::dot(g, g);
    let l: Vec<f64> = c_a.matvec(g).iter().map(|v| beta * v).collect();
    let gram = c_a.gram_small();
    let npts = (2.0 / step).round() as usize;
    let coord = |k: usize| -1.0 + k as f64 * step;

    let mut best = (vec![0.0; p], f64::INFINITY);
    let mut xi = vec![0.0; p];
    let mut stack = vec![0usize; p];
    // odometer enumeration over the grid
    let total = (npts + 1).pow(p as u32);
    for mut code in 0..total {
        for slot in stack.iter_mut() {
            *slot = code % (npts + 1);
            code /= npts + 1;
        }
        for (xi_i, &k) in xi.iter_mut().zip(&stack) {
            *xi_i = coord(k).min(1.0);
        }
        let mut q = q0 + linalg::dot(&l, &xi);
        for i in 0..p {
            for j in 0..p {
                q += 0.5 * beta * beta * gram.get(i, j) * xi[i] * xi[j];
            }
        }
        if q < best.1 {
            best = (xi.clone(), q);
        }
    }
    Ok(best)
}

/// Grid search plus one local refinement pass for end-to-end minimization of
/// tiny problems (m <= 2).
pub fn grid_oracle_phi(
    p: &ProblemSpec,
    lo: f64,
    hi: f64,
    step: f64,
) -> Result<(Vec<f64>, f64), BaselineError> {
    let m = p.dim();
    if m > 2 {
        return Err(BaselineError::OracleTooLarge { dims: m, max: 2 });
    }
    let sweep = |center: &[f64], half_width: f64, step: f64| -> (Vec<f64>, f64) {
        let npts = (2.0 * half_width / step).round() as usize;
        let mut best = (center.to_vec(), f64::INFINITY);
        let mut x = vec![0.0; m];
        let total = (npts + 1).pow(m as u32);
        for mut code in 0..total {
            for xj in x.iter_mut().zip(center) {
                let k = code % (npts + 1);
                code /= npts + 1;
                *xj.0 = xj.1 - half_width + k as f64 * step;
            }
            if let Ok(cost) = p.eval_cost(&x) {
                if cost < best.1 {
                    best = (x.clone(), cost);
                }
            }
        }
        best
    };
    let center = vec![0.5 * (lo + hi); m];
    let coarse = sweep(&center, 0.5 * (hi - lo), step);
    // refinement pass around the coarse winner
    let fine = sweep(&coarse.0, step, step / 100.0);
    Ok(if fine.1 < coarse.1 { fine } else { coarse })
}
