//! Anisotropic total-variation flow on a grid: minimizing the discrete
//! energy 1/2 u'Au - b'u + beta ||grad u||_1. Sweeps the Huber parameter to
//! show the effect of the generalized second-order term on the cost reached
//! within a fixed iteration budget.

use composa::problems::build_quadratic_tv;
use composa::solver::{gsom_solve, SolverConfig};
use std::time::Instant;

fn main() {
    let grid_n = 24;
    let beta = 0.5;
    let iters = 50;
    let p = build_quadratic_tv(grid_n, &|_, _| 10.0, beta).unwrap();
    println!(
        "anisotropic flow: {grid_n}x{grid_n} grid (m = {}), beta = {beta}, {iters} iterations",
        p.dim()
    );
    println!(
        "{:>8} {:>18} {:>8} {:>10}",
        "gamma", "final cost", "iters", "time"
    );
    for gamma in [0.0, 50.0, 500.0, 1000.0, 5000.0] {
        let cfg = SolverConfig {
            gamma,
            max_iter: iters,
            tol_residual: f64::MIN_POSITIVE,
            tol_x: f64::MIN_POSITIVE,
            tol_f: f64::MIN_POSITIVE,
            ..Default::default()
        };
        let t = Instant::now();
        let rep = gsom_solve(&p, &vec![0.0; p.dim()], &cfg).unwrap();
        println!(
            "{:>8} {:>18.10} {:>8} {:>10.2?}",
            gamma,
            rep.cost_final,
            rep.iterations,
            t.elapsed()
        );
    }
    println!("\ngamma = 0 drops the weak Hessian of the penalty; every");
    println!("positive gamma reaches a lower cost within the same budget.");
}
