//! Measurement suites behind `composa bench`: the gamma sweep, active-set
//! reduction timing, linear-solver comparison, and block-Jacobi partitioning.

use crate::curvature::{assemble_system, build_huber_operator};
use crate::direction::{
    block_jacobi_solve, identify_active, solve_direction, LinsolveConfig, LinsolveKind,
};
use crate::geometry::projected_linesearch;
use crate::linalg::{self, chol_solve, DenseMatrix, ProfileChol};
use crate::problems::{build_quadratic_tv, ProblemSpec};
use crate::solver::{gsom_solve, SolverConfig};
use crate::subgradient::{classify_indices, min_norm_subgradient};
use std::time::Instant;

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

// ---- gamma sweep -----------------------------------------------------------

pub struct GammaSweep {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    /// `costs[gi][bi]`: final cost after the iteration cap.
    pub costs: Vec<Vec<f64>>,
    pub iters: usize,
}

/// Final cost after a fixed iteration budget for each (gamma, beta) pair on
/// the anisotropic flow problem.
pub fn gamma_sweep(grid_n: usize, gammas: &[f64], betas: &[f64], iters: usize) -> GammaSweep {
    let mut costs = Vec::with_capacity(gammas.len());
    for &gamma in gammas {
        let mut row = Vec::with_capacity(betas.len());
        for &beta in betas {
            let p = build_quadratic_tv(grid_n, &|_, _| 10.0, beta).unwrap();
            let cfg = SolverConfig {
                gamma,
                max_iter: iters,
                // iteration-cap mode: disable the tolerance-based stops
                tol_residual: f64::MIN_POSITIVE,
                tol_x: f64::MIN_POSITIVE,
                tol_f: f64::MIN_POSITIVE,
                ..Default::default()
            };
            let rep = gsom_solve(&p, &vec![0.0; p.dim()], &cfg).unwrap();
            row.push(rep.cost_final);
        }
        costs.push(row);
    }
    GammaSweep {
        gammas: gammas.to_vec(),
        betas: betas.to_vec(),
        costs,
        iters,
    }
}

// ---- active-set reduction timing -------------------------------------------

pub struct ActiveSetBench {
    /// (reduced time, full time, frozen count) per qualifying iteration.
    pub samples: Vec<(f64, f64, usize)>,
    pub reduced_median: f64,
    pub full_median: f64,
    pub reduced_mean: f64,
    pub full_mean: f64,
    pub dim: usize,
}

/// Replays solver iterations on the anisotropic flow problem and times the
/// direction solve with and without the active-set reduction at iterations
/// where at least `frozen_frac` of the coordinates are frozen. Each solve is
/// timed `repeats` times; the median is kept.
pub fn active_set(
    grid_n: usize,
    betas: &[f64],
    frozen_frac: f64,
    repeats: usize,
    max_iter: usize,
) -> ActiveSetBench {
    let mut samples = Vec::new();
    let mut dim = 0;
    for &beta in betas {
        let p = build_quadratic_tv(grid_n, &|_, _| 10.0, beta).unwrap();
        let m = p.dim();
        dim = m;
        let cfg = SolverConfig::default();
        let lin = LinsolveConfig {
            kind: LinsolveKind::Direct,
            ..Default::default()
        };
        let mut x = vec![0.0; m];
        let mut cost = p.eval_cost(&x).unwrap();
        for _ in 0..max_iter {
            let band = cfg.tol_act * (1.0 + linalg::norm_inf(&x));
            let part = classify_indices(p.penalty_matrix(), &x, band);
            let st = min_norm_subgradient(&p, &x, &part, None, cfg.tol_qp, cfg.maxit_qp);
            if st.residual_norm <= 1e-10 {
                break;
            }
            let curv = p.curvature(&x);
            let kappa = cfg.kappa_min * (1.0 + curv.trace() / m as f64);
            let huber = build_huber_operator(p.penalty_matrix(), &x, cfg.gamma);
            let sys = assemble_system(curv, huber, p.beta(), kappa);
            let eps = cfg.eps_act * (1.0 + linalg::norm_inf(&st.residual));
            let split = identify_active(p.penalty_matrix(), &part, &st.residual, eps);
            let frozen = split.frozen.len();

            let mut t_full = Vec::with_capacity(repeats);
            let mut t_red = Vec::with_capacity(repeats);
            for _ in 0..repeats {
                let t = Instant::now();
                let _ = solve_direction(&sys, &st.residual, None, &lin).unwrap();
                t_full.push(t.elapsed().as_secs_f64());
                let t = Instant::now();
                let _ = solve_direction(&sys, &st.residual, Some(&split), &lin).unwrap();
                t_red.push(t.elapsed().as_secs_f64());
            }
            if (frozen as f64) >= frozen_frac * m as f64 {
                samples.push((median(&mut t_red), median(&mut t_full), frozen));
            }

            let dir = solve_direction(&sys, &st.residual, Some(&split), &lin).unwrap();
            if linalg::dot(&dir.d, &st.residual) >= 0.0 {
                break;
            }
            let ls = projected_linesearch(&p, &x, cost, &dir.d, &st, &cfg.linesearch).unwrap();
            if ls.stalled && ls.cost_next >= cost {
                break;
            }
            x = ls.x_next;
            cost = ls.cost_next;
        }
    }
    let mut red: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let mut full: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let (reduced_mean, _) = mean_variance(&red);
    let (full_mean, _) = mean_variance(&full);
    ActiveSetBench {
        reduced_median: median(&mut red),
        full_median: median(&mut full),
        reduced_mean,
        full_mean,
        samples,
        dim,
    }
}

// ---- linear-solver comparison ------------------------------------------------

pub struct LinsolveBench {
    pub sizes: Vec<usize>,
    /// (solver name, per-size (mean seconds, variance)).
    pub rows: Vec<(String, Vec<(f64, f64)>)>,
}

/// Times one direction-system solve per method on the anisotropic flow
/// system at several sizes. `direct` is a dense Cholesky factorization of
/// the assembled matrix; `pcg` is Jacobi-preconditioned CG; `block_jacobi`
/// the partitioned additive solve.
pub fn linsolve(grids: &[usize], repeats: usize) -> LinsolveBench {
    let sizes: Vec<usize> = grids.iter().map(|g| g * g).collect();
    let mut direct_cells = Vec::new();
    let mut pcg_cells = Vec::new();
    let mut bj_cells = Vec::new();
    for &g in grids {
        let p = build_quadratic_tv(g, &|_, _| 10.0, 0.5).unwrap();
        let m = p.dim();
        let x = vec![0.0; m];
        let huber = build_huber_operator(p.penalty_matrix(), &x, 1000.0);
        let sys = assemble_system(p.curvature(&x), huber, p.beta(), 1e-6);
        let rhs: Vec<f64> = p.smooth_gradient(&x).iter().map(|v| -v).collect();
        let asm = sys.assembled();

        let mut t_direct = Vec::with_capacity(repeats);
        let mut t_pcg = Vec::with_capacity(repeats);
        let mut t_bj = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let t = Instant::now();
            let dense = DenseMatrix::from_sparse(asm);
            let _ = chol_solve(&dense, &rhs).unwrap();
            t_direct.push(t.elapsed().as_secs_f64());

            let diag = sys.diag();
            let t = Instant::now();
            let res = linalg::pcg_solve(
                &|v| sys.apply(v),
                &rhs,
                &|r| r.iter().zip(&diag).map(|(ri, di)| ri / di).collect(),
                1e-8,
                10 * m,
            );
            assert!(res.converged, "pcg must converge on the benchmark system");
            t_pcg.push(t.elapsed().as_secs_f64());

            let t = Instant::now();
            let bj = block_jacobi_solve(asm, &rhs, 4, 0.2, 1e-8, 10_000).unwrap();
            assert!(bj.converged, "block-Jacobi must converge on the benchmark");
            t_bj.push(t.elapsed().as_secs_f64());
        }
        direct_cells.push(mean_variance(&t_direct));
        pcg_cells.push(mean_variance(&t_pcg));
        bj_cells.push(mean_variance(&t_bj));
    }
    LinsolveBench {
        sizes,
        rows: vec![
            ("direct".into(), direct_cells),
            ("pcg".into(), pcg_cells),
            ("block_jacobi".into(), bj_cells),
        ],
    }
}

// ---- block-Jacobi partitioning ------------------------------------------------

pub struct BlockJacobiRow {
    /// 0 means the unpartitioned full factorization.
    pub partitions: usize,
    pub max_block_dim: usize,
    pub factor_storage: usize,
    pub mean_solve_s: f64,
    pub var_solve_s: f64,
}

pub struct BlockJacobiBench {
    pub dim: usize,
    pub rows: Vec<BlockJacobiRow>,
}

/// Storage and timing of the partitioned solve against the full
/// factorization on a grid_n^2 system.
pub fn block_jacobi_bench(
    grid_n: usize,
    partition_counts: &[usize],
    overlap: f64,
    repeats: usize,
) -> BlockJacobiBench {
    let p = build_quadratic_tv(grid_n, &|_, _| 10.0, 0.5).unwrap();
    let m = p.dim();
    let x = vec![0.0; m];
    let huber = build_huber_operator(p.penalty_matrix(), &x, 1000.0);
    let sys = assemble_system(p.curvature(&x), huber, p.beta(), 1e-6);
    let rhs: Vec<f64> = p.smooth_gradient(&x).iter().map(|v| -v).collect();
    let asm = sys.assembled();

    let mut rows = Vec::new();
    // full factorization reference
    let mut times = Vec::with_capacity(repeats);
    let mut storage = 0;
    for _ in 0..repeats {
        let t = Instant::now();
        let f = ProfileChol::factor(asm).unwrap();
        let _ = f.solve(&rhs);
        times.push(t.elapsed().as_secs_f64());
        storage = f.storage_len();
    }
    let (mean, var) = mean_variance(&times);
    rows.push(BlockJacobiRow {
        partitions: 0,
        max_block_dim: m,
        factor_storage: storage,
        mean_solve_s: mean,
        var_solve_s: var,
    });

    for &pc in partition_counts {
        let mut times = Vec::with_capacity(repeats);
        let mut max_dim = 0;
        let mut storage = 0;
        for _ in 0..repeats {
            let t = Instant::now();
            let bj = block_jacobi_solve(asm, &rhs, pc, overlap, 1e-8, 10_000).unwrap();
            times.push(t.elapsed().as_secs_f64());
            max_dim = bj.max_block_dim;
            storage = bj.factor_storage;
        }
        let (mean, var) = mean_variance(&times);
        rows.push(BlockJacobiRow {
            partitions: pc,
            max_block_dim: max_dim,
            factor_storage: storage,
            mean_solve_s: mean,
            var_solve_s: var,
        });
    }
    BlockJacobiBench { dim: m, rows }
}

/// Problem handle for suites that honor config overrides of the grid size.
pub fn bench_problem(grid_n: usize, beta: f64) -> ProblemSpec {
    build_quadratic_tv(grid_n, &|_, _| 10.0, beta).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_sweep_shape_and_trend() {
        let sweep = gamma_sweep(8, &[0.0, 1000.0], &[0.5], 25);
        assert_eq!(sweep.costs.len(), 2);
        assert_eq!(sweep.costs[0].len(), 1);
        // second-order information lowers the capped-iteration cost
        assert!(sweep.costs[1][0] < sweep.costs[0][0]);
    }

    #[test]
    fn active_set_reduction_is_faster() {
        let bench = active_set(16, &[0.9], 0.3, 3, 40);
        assert!(!bench.samples.is_empty());
        assert!(bench.reduced_median < bench.full_median);
    }

    #[test]
    fn linsolve_bench_shape() {
        let b = linsolve(&[8, 10], 2);
        assert_eq!(b.sizes, vec![64, 100]);
        assert_eq!(b.rows.len(), 3);
        for (_, cells) in &b.rows {
            assert_eq!(cells.len(), 2);
        }
    }

    #[test]
    fn block_jacobi_bench_memory_drops() {
        let b = block_jacobi_bench(16, &[4], 0.2, 2);
        assert_eq!(b.rows.len(), 2);
        let full = &b.rows[0];
        let p4 = &b.rows[1];
        assert!(p4.max_block_dim < full.max_block_dim);
        let base = b.dim.div_ceil(4);
        assert!(p4.max_block_dim <= (base as f64 * 1.4) as usize + 2);
    }
}
