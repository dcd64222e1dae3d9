//! The GSOM driver: minimum-norm subgradient, second-order direction,
//! projected line search, projection update, stopping logic and trace
//! recording.

use crate::curvature::{assemble_system, build_huber_operator};
use crate::direction::{identify_active, solve_direction, LinsolveConfig, LinsolveKind};
use crate::geometry::{projected_linesearch, LinesearchConfig};
use crate::linalg::{self};
use crate::problems::{EvaluationError, ProblemSpec};
use crate::subgradient::{classify_indices, min_norm_subgradient, SubgradientState};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::time::Instant;

/// Optional geometric ramp gamma_k = min(gamma, gamma0 * ratio^k).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaWarmup {
    pub enabled: bool,
    pub gamma0: f64,
    pub ratio: f64,
}

impl Default for GammaWarmup {
    fn default() -> Self {
        GammaWarmup {
            enabled: false,
            gamma0: 50.0,
            ratio: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Huber parameter; 0 disables the generalized second-order term.
    pub gamma: f64,
    pub gamma_warmup: GammaWarmup,
    /// Relative step tolerance: ||x+ - x|| <= tol_x * (1 + ||x||).
    pub tol_x: f64,
    /// Relative cost tolerance, paired with tol_x.
    pub tol_f: f64,
    /// Residual stop: ||grad f + beta C^T xi|| <= tol_residual * (1 + |phi(x0)|).
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Activity band factor: |<c_i,x>| <= tol_act * (1 + ||x||_inf).
    pub tol_act: f64,
    /// Coordinate freezing factor: |r_j| <= eps_act * (1 + ||r||_inf).
    pub eps_act: f64,
    /// SPD clamp factor: kappa = kappa_min * (1 + trace(B)/m).
    pub kappa_min: f64,
    pub tol_qp: f64,
    pub maxit_qp: usize,
    pub active_set_reduction: bool,
    pub linsolve: LinsolveConfig,
    pub linesearch: LinesearchConfig,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: 1000.0,
            gamma_warmup: GammaWarmup::default(),
            tol_x: 1e-8,
            tol_f: 1e-10,
            tol_residual: 1e-6,
            max_iter: 500,
            tol_act: 1e-8,
            eps_act: 1e-6,
            kappa_min: 1e-6,
            tol_qp: 1e-8,
            maxit_qp: 500,
            active_set_reduction: true,
            linsolve: LinsolveConfig::default(),
            linesearch: LinesearchConfig::default(),
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn effective_gamma(&self, iter: usize) -> f64 {
        if self.gamma_warmup.enabled {
            let ramp = self.gamma_warmup.gamma0 * self.gamma_warmup.ratio.powi(iter as i32);
            ramp.min(self.gamma)
        } else {
            self.gamma
        }
    }

    /// Residual stopping threshold given the initial cost.
    pub fn residual_threshold(&self, cost_initial: f64) -> f64 {
        self.tol_residual * (1.0 + cost_initial.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    ResidualSmall,
    /// Both the step and the cost difference fell below tolerance.
    StepSmall,
    CostSmall,
    MaxIter,
    Stalled,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// phi at the end of the iteration.
    pub cost: f64,
    /// Min-norm composite residual at the iteration's starting point.
    pub residual: f64,
    pub step: f64,
    pub n_active: usize,
    pub n_signchange: usize,
    pub n_frozen: usize,
    pub qp_iters: usize,
    pub lin_residual: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: String,
    pub problem_kind: String,
    pub dim: usize,
    pub cost_initial: f64,
    pub cost_final: f64,
    pub termination: Termination,
    pub iterations: usize,
    /// Residual of a freshly solved MinSub QP at the final point, recorded
    /// on ResidualSmall termination.
    pub certificate_residual: Option<f64>,
    pub wall_ms_total: f64,
    pub trace: Vec<IterationRecord>,
    pub x_final: Vec<f64>,
}

#[derive(Debug)]
pub enum SolverError {
    Evaluation {
        iteration: usize,
        source: EvaluationError,
    },
    Linalg {
        iteration: usize,
        source: linalg::LinalgError,
    },
}

impl fmt::Display for SolverError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverError::Evaluation { iteration, source } => {
                write!(f, "iteration {iteration}: {source}")
            }
            SolverError::Linalg { iteration, source } => {
                write!(f, "iteration {iteration}: linear solve failed: {source}")
            }
        }
    }
}

impl std::error::Error for SolverError {}

/// Iteration snapshot consumed by [`check_stop`].
pub struct Snapshot<'a> {
    pub x: &'a [f64],
    pub cost: f64,
    pub residual_norm: f64,
}

/// First satisfied criterion in priority order: residual, then step+cost,
/// then the iteration cap.
pub fn check_stop(
    prev: &Snapshot<'_>,
    curr: &Snapshot<'_>,
    cfg: &SolverConfig,
    cost_initial: f64,
    iter: usize,
) -> Option<Termination> {
    if curr.residual_norm <= cfg.residual_threshold(cost_initial) {
        return Some(Termination::ResidualSmall);
    }
    let step = linalg::norm2(&linalg::sub(curr.x, prev.x));
    let step_small = step <= cfg.tol_x * (1.0 + linalg::norm2(prev.x));
    let cost_small = (curr.cost - prev.cost).abs() <= cfg.tol_f * (1.0 + prev.cost.abs());
    if step_small && cost_small {
        return Some(Termination::StepSmall);
    }
    if iter >= cfg.max_iter {
        return Some(Termination::MaxIter);
    }
    None
}

fn subgradient_at(
    p: &ProblemSpec,
    x: &[f64],
    warm_xi: Option<&[f64]>,
    cfg: &SolverConfig,
) -> SubgradientState {
    let band = cfg.tol_act * (1.0 + linalg::norm_inf(x));
    let part = classify_indices(p.penalty_matrix(), x, band);
    let warm: Option<Vec<f64>> = warm_xi.map(|xi| part.act.iter().map(|&i| xi[i]).collect());
    min_norm_subgradient(p, x, &part, warm.as_deref(), cfg.tol_qp, cfg.maxit_qp)
}

/// Runs the second-order method from `x0`. Deterministic for a fixed
/// problem and config.
pub fn gsom_solve(
    p: &ProblemSpec,
    x0: &[f64],
    cfg: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    assert_eq!(x0.len(), p.dim(), "x0 must match the problem dimension");
    let t_start = Instant::now();
    let m = p.dim();

    let mut x = x0.to_vec();
    let mut cost = p.eval_cost(&x).map_err(|source| SolverError::Evaluation {
        iteration: 0,
        source,
    })?;
    let cost_initial = cost;

    let mut st = subgradient_at(p, &x, None, cfg);
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut termination = Termination::MaxIter;

    if st.residual_norm <= cfg.residual_threshold(cost_initial) {
        termination = Termination::ResidualSmall;
    } else {
        for iter in 1..=cfg.max_iter {
            let t_iter = Instant::now();
            let gamma_k = cfg.effective_gamma(iter - 1);

            let curvature = p.curvature(&x);
            let kappa = cfg.kappa_min * (1.0 + curvature.trace() / m as f64);
            let huber = build_huber_operator(p.penalty_matrix(), &x, gamma_k);
            let sys = assemble_system(curvature, huber, p.beta(), kappa);

            let split = if cfg.active_set_reduction {
                let eps = cfg.eps_act * (1.0 + linalg::norm_inf(&st.residual));
                let s = identify_active(p.penalty_matrix(), &st.partition, &st.residual, eps);
                if s.free.is_empty() {
                    None
                } else {
                    Some(s)
                }
            } else {
                None
            };

            let mut dir = solve_direction(&sys, &st.residual, split.as_ref(), &cfg.linsolve)
                .map_err(|source| SolverError::Linalg {
                    iteration: iter,
                    source,
                })?;
            if linalg::dot(&dir.d, &st.residual) >= 0.0 {
                // inexact or over-reduced solve lost the descent property;
                // retry on the full system with a direct factorization
                let full = LinsolveConfig {
                    kind: LinsolveKind::Direct,
                    ..cfg.linsolve.clone()
                };
                dir = solve_direction(&sys, &st.residual, None, &full).map_err(|source| {
                    SolverError::Linalg {
                        iteration: iter,
                        source,
                    }
                })?;
                if linalg::dot(&dir.d, &st.residual) >= 0.0 {
                    termination = Termination::Stalled;
                    break;
                }
            }

            let ls = projected_linesearch(p, &x, cost, &dir.d, &st, &cfg.linesearch).map_err(
                |source| SolverError::Evaluation {
                    iteration: iter,
                    source,
                },
            )?;
            if ls.stalled && ls.cost_next >= cost {
                termination = Termination::Stalled;
                break;
            }

            let x_next = ls.x_next;
            let cost_next = ls.cost_next;
            let st_next = subgradient_at(p, &x_next, Some(&st.xi), cfg);

            trace.push(IterationRecord {
                iter,
                cost: cost_next,
                residual: st.residual_norm,
                step: ls.step,
                n_active: st.partition.n_active(),
                n_signchange: ls.sign_set.len(),
                n_frozen: dir.frozen_count,
                qp_iters: st.qp_iters,
                lin_residual: dir.linear_residual,
                wall_ms: t_iter.elapsed().as_secs_f64() * 1e3,
            });

            let stop = check_stop(
                &Snapshot {
                    x: &x,
                    cost,
                    residual_norm: st.residual_norm,
                },
                &Snapshot {
                    x: &x_next,
                    cost: cost_next,
                    residual_norm: st_next.residual_norm,
                },
                cfg,
                cost_initial,
                iter,
            );
            x = x_next;
            cost = cost_next;
            st = st_next;
            if ls.stalled {
                // a stall with a small residual is ordinary convergence,
                // otherwise it terminates with the diagnostic
                termination = if stop == Some(Termination::ResidualSmall) {
                    Termination::ResidualSmall
                } else {
                    Termination::Stalled
                };
                break;
            }
            if let Some(t) = stop {
                termination = t;
                break;
            }
        }
    }

    // first-order certificate: a cold re-solve of the MinSub QP
    let certificate_residual = if termination == Termination::ResidualSmall {
        Some(subgradient_at(p, &x, None, cfg).residual_norm)
    } else {
        None
    };

    Ok(SolveReport {
        solver: "gsom".into(),
        problem_kind: p.kind().into(),
        dim: m,
        cost_initial,
        cost_final: cost,
        termination,
        iterations: trace.len(),
        certificate_residual,
        wall_ms_total: t_start.elapsed().as_secs_f64() * 1e3,
        trace,
        x_final: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::soft_threshold;
    use crate::linalg::SparseMatrix;
    use crate::problems::{build_prox_instance, build_quadratic_tv};
    use crate::rng::Rng;

    fn tight_cfg() -> SolverConfig {
        SolverConfig {
            tol_residual: 1e-10,
            ..Default::default()
        }
    }

    #[test]
    fn prox_scalar_converges_to_soft_threshold() {
        let p = build_prox_instance(&[3.0], SparseMatrix::identity(1), 1.0).unwrap();
        let rep = gsom_solve(&p, &[0.0], &tight_cfg()).unwrap();
        assert_eq!(rep.termination, Termination::ResidualSmall);
        assert!(
            (rep.x_final[0] - 2.0).abs() <= 1e-8,
            "x = {}",
            rep.x_final[0]
        );
        assert!(rep.certificate_residual.unwrap() <= 2e-10 * (1.0 + rep.cost_initial.abs()));
    }

    #[test]
    fn prox_vector_matches_componentwise_soft_threshold() {
        let mut rng = Rng::new(77);
        let xhat = rng.normal_vec(8);
        let alpha = 0.4;
        let p = build_prox_instance(&xhat, SparseMatrix::identity(8), alpha).unwrap();
        let rep = gsom_solve(&p, &[0.0; 8], &tight_cfg()).unwrap();
        let expect = soft_threshold(&xhat, alpha);
        for (a, b) in rep.x_final.iter().zip(&expect) {
            assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn already_optimal_start_stops_immediately() {
        let p = build_prox_instance(&[3.0], SparseMatrix::identity(1), 1.0).unwrap();
        let rep = gsom_solve(&p, &[2.0], &SolverConfig::default()).unwrap();
        assert_eq!(rep.termination, Termination::ResidualSmall);
        assert!(rep.iterations <= 1);
        assert_eq!(rep.x_final, vec![2.0]);
    }

    #[test]
    fn trace_costs_strictly_decreasing_on_tv() {
        let p = build_quadratic_tv(8, &|_, _| 10.0, 0.5).unwrap();
        let cfg = SolverConfig {
            max_iter: 50,
            ..Default::default()
        };
        let rep = gsom_solve(&p, &vec![0.0; p.dim()], &cfg).unwrap();
        assert!(rep.trace.len() > 1);
        let mut prev = rep.cost_initial;
        for row in &rep.trace {
            assert!(
                row.cost < prev,
                "cost did not decrease at iter {}",
                row.iter
            );
            prev = row.cost;
        }
        assert_eq!(rep.cost_final, rep.trace.last().unwrap().cost);
        let recomputed = p.eval_cost(&rep.x_final).unwrap();
        assert!((rep.cost_final - recomputed).abs() <= 1e-12 * (1.0 + recomputed.abs()));
    }

    #[test]
    fn graph_trend_constant_signal_is_fixed_point() {
        // a constant signal already has zero second-difference penalty, so
        // the minimizer is the signal itself
        let edges = crate::problems::synthetic::grid_graph_edges(3, 3);
        let y = vec![2.5; 9];
        let p = crate::problems::build_graph_trend(&edges, &y, 1.0, 0.0).unwrap();
        let rep = gsom_solve(&p, &vec![0.0; 9], &tight_cfg()).unwrap();
        for (a, b) in rep.x_final.iter().zip(&y) {
            assert!((a - b).abs() <= 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn gamma_benefit_on_small_tv() {
        // the generalized second-order term lowers the 50-iteration cost
        let p = build_quadratic_tv(16, &|_, _| 10.0, 0.5).unwrap();
        let run = |gamma: f64| {
            let cfg = SolverConfig {
                gamma,
                max_iter: 50,
                tol_residual: 1e-300,
                tol_x: 1e-300,
                tol_f: 1e-300,
                ..Default::default()
            };
            gsom_solve(&p, &vec![0.0; p.dim()], &cfg)
                .unwrap()
                .cost_final
        };
        let without = run(0.0);
        let with = run(1000.0);
        assert!(
            with < without,
            "gamma=1000 cost {with} not below gamma=0 cost {without}"
        );
    }

    #[test]
    fn deterministic_traces() {
        let p = build_quadratic_tv(6, &|_, _| 7.0, 0.4).unwrap();
        let cfg = SolverConfig {
            max_iter: 25,
            ..Default::default()
        };
        let a = gsom_solve(&p, &vec![0.0; p.dim()], &cfg).unwrap();
        let b = gsom_solve(&p, &vec![0.0; p.dim()], &cfg).unwrap();
        assert_eq!(a.x_final, b.x_final);
        assert_eq!(a.trace.len(), b.trace.len());
        for (ra, rb) in a.trace.iter().zip(&b.trace) {
            assert_eq!(ra.cost.to_bits(), rb.cost.to_bits());
            assert_eq!(ra.residual.to_bits(), rb.residual.to_bits());
            assert_eq!(ra.step.to_bits(), rb.step.to_bits());
            assert_eq!(ra.n_active, rb.n_active);
            assert_eq!(ra.n_signchange, rb.n_signchange);
        }
    }

    #[test]
    fn gamma_warmup_schedule() {
        let cfg = SolverConfig {
            gamma: 1000.0,
            gamma_warmup: GammaWarmup {
                enabled: true,
                gamma0: 50.0,
                ratio: 2.0,
            },
            ..Default::default()
        };
        assert_eq!(cfg.effective_gamma(0), 50.0);
        assert_eq!(cfg.effective_gamma(1), 100.0);
        assert_eq!(cfg.effective_gamma(4), 800.0);
        assert_eq!(cfg.effective_gamma(5), 1000.0); // capped
        assert_eq!(cfg.effective_gamma(20), 1000.0);
        let fixed = SolverConfig::default();
        assert_eq!(fixed.effective_gamma(7), fixed.gamma);
    }

    #[test]
    fn solver_config_variants_reach_the_same_prox_solution() {
        use crate::direction::{LinsolveKind, Precond};
        use crate::geometry::SlopeKind;
        let mut rng = Rng::new(321);
        let xhat = rng.normal_vec(12);
        let p = build_prox_instance(&xhat, SparseMatrix::identity(12), 0.5).unwrap();
        let expect = soft_threshold(&xhat, 0.5);
        let mut cfgs = Vec::new();
        // tilde slope
        let mut c = tight_cfg();
        c.linesearch.slope = SlopeKind::Tilde;
        cfgs.push(c);
        // PCG with IC(0)
        let mut c = tight_cfg();
        c.linsolve.kind = LinsolveKind::Pcg;
        c.linsolve.precond = Precond::Ic0;
        cfgs.push(c);
        // direct with BFS reordering
        let mut c = tight_cfg();
        c.linsolve.kind = LinsolveKind::Direct;
        c.linsolve.bfs_reorder = true;
        cfgs.push(c);
        // block-Jacobi back end
        let mut c = tight_cfg();
        c.linsolve.kind = LinsolveKind::BlockJacobi;
        cfgs.push(c);
        // no active-set reduction
        let mut c = tight_cfg();
        c.active_set_reduction = false;
        cfgs.push(c);
        for cfg in &cfgs {
            let rep = gsom_solve(&p, &vec![0.0; 12], cfg).unwrap();
            for (a, b) in rep.x_final.iter().zip(&expect) {
                assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn check_stop_priority() {
        let cfg = SolverConfig::default();
        let x1 = [1.0, 2.0];
        // residual zero wins regardless of step
        let prev = Snapshot {
            x: &x1,
            cost: 5.0,
            residual_norm: 1.0,
        };
        let curr = Snapshot {
            x: &x1,
            cost: 5.0,
            residual_norm: 0.0,
        };
        assert_eq!(
            check_stop(&prev, &curr, &cfg, 5.0, 1),
            Some(Termination::ResidualSmall)
        );
        // identical iterates trigger the combined step+cost criterion
        let curr = Snapshot {
            x: &x1,
            cost: 5.0,
            residual_norm: 1.0,
        };
        assert_eq!(
            check_stop(&prev, &curr, &cfg, 5.0, 1),
            Some(Termination::StepSmall)
        );
        // nothing satisfied below the cap
        let x2 = [9.0, 9.0];
        let curr = Snapshot {
            x: &x2,
            cost: 1.0,
            residual_norm: 1.0,
        };
        assert_eq!(check_stop(&prev, &curr, &cfg, 5.0, 1), None);
        assert_eq!(
            check_stop(&prev, &curr, &cfg, 5.0, cfg.max_iter),
            Some(Termination::MaxIter)
        );
    }

    #[test]
    fn evaluation_error_carries_iteration() {
        // an observation with an inf makes the very first cost evaluation fail
        let p = crate::problems::build_cauchy_denoise(&[f64::INFINITY, 0.0, 0.0, 0.0], 1.0, 0.5, 2)
            .unwrap();
        let err = gsom_solve(&p, &[0.0; 4], &SolverConfig::default()).unwrap_err();
        match err {
            SolverError::Evaluation { iteration, .. } => assert_eq!(iteration, 0),
            other => panic!("unexpected error {other}"),
        }
    }
}
