//! Proximal map of the composite penalty: for C = I the solver must
//! reproduce the closed-form soft-thresholding operator.

use composa::baselines::soft_threshold;
use composa::linalg::SparseMatrix;
use composa::problems::build_prox_instance;
use composa::solver::{gsom_solve, SolverConfig};

fn main() {
    let xhat = vec![3.0, -0.4, 1.2, 0.05, -2.5];
    let alpha = 1.0;
    let p = build_prox_instance(&xhat, SparseMatrix::identity(xhat.len()), alpha).unwrap();

    let cfg = SolverConfig {
        tol_residual: 1e-12,
        ..Default::default()
    };
    let report = gsom_solve(&p, &vec![0.0; xhat.len()], &cfg).unwrap();
    let expected = soft_threshold(&xhat, alpha);

    println!(
        "prox of xhat with alpha = {alpha} (termination {:?})",
        report.termination
    );
    println!("{:>10} {:>14} {:>14}", "xhat", "solver", "soft-threshold");
    for i in 0..xhat.len() {
        println!(
            "{:>10.3} {:>14.10} {:>14.10}",
            xhat[i], report.x_final[i], expected[i]
        );
    }
    let err = report
        .x_final
        .iter()
        .zip(&expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    println!(
        "max |difference| = {err:.2e} in {} iterations",
        report.iterations
    );
}
