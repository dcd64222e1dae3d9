//! Preconditioned conjugate gradient and operator-norm estimation.

use super::{axpy, dot, norm2, LinalgError, SparseMatrix};

/// Outcome of a PCG solve. Non-convergence is flagged, not fatal; callers
/// may fall back to a direct factorization.
pub struct PcgResult {
    pub x: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
}

/// Solves A x = b for an SPD operator with an SPD preconditioner
/// (`precond` applies M^{-1}). Stops when ||Ax - b|| <= tol * ||b||.
pub fn pcg_solve(
    apply_a: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    precond: &dyn Fn(&[f64]) -> Vec<f64>,
    tol: f64,
    maxit: usize,
) -> PcgResult {
    let n = b.len();
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return PcgResult {
            x: vec![0.0; n],
            iters: 0,
            converged: true,
        };
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for iter in 0..maxit {
        if norm2(&r) <= tol * b_norm {
            return PcgResult {
                x,
                iters: iter,
                converged: true,
            };
        }
        let ap = apply_a(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // operator not SPD in working precision; bail out flagged
            return PcgResult {
                x,
                iters: iter,
                converged: false,
            };
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
    }
    let converged = norm2(&r) <= tol * b_norm;
    PcgResult {
        x,
        iters: maxit,
        converged,
    }
}

/// Power-iteration estimate of the largest eigenvalue of a symmetric PSD
/// operator. The estimate approaches the true value from below, so callers
/// scale it up (typically by 1.1) when a safe upper bound is needed.
pub fn op_norm_estimate(apply_a: &dyn Fn(&[f64]) -> Vec<f64>, dim: usize, iters: usize) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    // deterministic pseudo-random start so runs are reproducible
    let mut rng = crate::rng::Rng::new(0x9E37);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.uniform_in(-1.0, 1.0) + 0.1).collect();
    let nv = norm2(&v);
    for vi in v.iter_mut() {
        *vi /= nv;
    }
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = apply_a(&v);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        lambda = dot(&v, &w);
        v = w;
        for vi in v.iter_mut() {
            *vi /= nw;
        }
    }
    lambda.max(0.0)
}

/// Rough lower-eigenvalue estimate for a symmetric operator, via power
/// iteration on (lambda_max I - A).
pub fn min_eig_estimate(apply_a: &dyn Fn(&[f64]) -> Vec<f64>, dim: usize, iters: usize) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let lmax = op_norm_estimate(apply_a, dim, iters) * 1.1 + 1e-30;
    let shifted = |v: &[f64]| -> Vec<f64> {
        let mut w = apply_a(v);
        for (wi, vi) in w.iter_mut().zip(v) {
            *wi = lmax * vi - *wi;
        }
        w
    };
    let mu = op_norm_estimate(&shifted, dim, iters);
    lmax - mu
}

/// Zero-fill incomplete Cholesky preconditioner over the lower pattern of a
/// sparse SPD matrix.
pub struct IcPrecond {
    n: usize,
    // lower-triangular rows (strict) + diagonal
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<f64>,
}

impl IcPrecond {
    pub fn new(m: &SparseMatrix) -> Result<IcPrecond, LinalgError> {
        assert_eq!(m.nrows(), m.ncols());
        let n = m.nrows();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut diag = vec![0.0; n];
        row_ptr.push(0);
        for i in 0..n {
            let (cols, vals) = m.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if c < i {
                    col_idx.push(c);
                    values.push(v);
                } else if c == i {
                    diag[i] = v;
                }
            }
            row_ptr.push(col_idx.len());
        }
        // IC(0): walk rows, keeping updates inside the existing pattern
        for i in 0..n {
            let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
            for idx in lo..hi {
                let j = col_idx[idx];
                let mut s = values[idx];
                // dot of rows i and j over shared columns < j
                let (jlo, jhi) = (row_ptr[j], row_ptr[j + 1]);
                let (mut p, mut q) = (lo, jlo);
                while p < idx && q < jhi {
                    match col_idx[p].cmp(&col_idx[q]) {
                        std::cmp::Ordering::Less => p += 1,
                        std::cmp::Ordering::Greater => q += 1,
                        std::cmp::Ordering::Equal => {
                            s -= values[p] * values[q];
                            p += 1;
                            q += 1;
                        }
                    }
                }
                values[idx] = s / diag[j];
            }
            let mut d = diag[i];
            for idx in lo..hi {
                d -= values[idx] * values[idx];
            }
            if d <= 0.0 {
                return Err(LinalgError::NotPositiveDefinite { pivot: d, index: i });
            }
            diag[i] = d.sqrt();
        }
        Ok(IcPrecond {
            n,
            row_ptr,
            col_idx,
            values,
            diag,
        })
    }

    /// Applies (L L^T)^{-1}.
    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let mut s = x[i];
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                s -= self.values[idx] * x[self.col_idx[idx]];
            }
            x[i] = s / self.diag[i];
        }
        for i in (0..n).rev() {
            let xi = x[i] / self.diag[i];
            x[i] = xi;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                x[self.col_idx[idx]] -= self.values[idx] * xi;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{chol_solve, DenseMatrix};

    #[test]
    fn pcg_diagonal_with_jacobi() {
        let a = SparseMatrix::from_diag(&[2.0, 4.0]);
        let inv_diag = [0.5, 0.25];
        let res = pcg_solve(
            &|v| a.matvec(v),
            &[2.0, 4.0],
            &|r| r.iter().zip(inv_diag.iter()).map(|(x, d)| x * d).collect(),
            1e-12,
            100,
        );
        assert!(res.converged);
        assert!(res.iters <= 2);
        assert!((res.x[0] - 1.0).abs() < 1e-10);
        assert!((res.x[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pcg_zero_rhs() {
        let a = SparseMatrix::identity(3);
        let res = pcg_solve(&|v| a.matvec(v), &[0.0; 3], &|r| r.to_vec(), 1e-10, 50);
        assert!(res.converged);
        assert_eq!(res.iters, 0);
        assert_eq!(res.x, vec![0.0; 3]);
    }

    fn random_spd(n: usize, rng: &mut crate::rng::Rng) -> (SparseMatrix, DenseMatrix) {
        let mut d = DenseMatrix::zeros(n);
        let r: Vec<f64> = rng.normal_vec(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += r[k * n + i] * r[k * n + j];
                }
                d.set(i, j, s / n as f64 + if i == j { 1.0 } else { 0.0 });
            }
        }
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                triplets.push((i, j, d.get(i, j)));
            }
        }
        (SparseMatrix::from_triplets(&triplets, n, n).unwrap(), d)
    }

    #[test]
    fn pcg_matches_dense_cholesky() {
        let mut rng = crate::rng::Rng::new(31);
        for n in [20usize, 50, 100] {
            let (s, d) = random_spd(n, &mut rng);
            let b = rng.normal_vec(n);
            let diag = s.diag();
            let res = pcg_solve(
                &|v| s.matvec(v),
                &b,
                &|r| r.iter().zip(&diag).map(|(x, di)| x / di).collect(),
                1e-12,
                10 * n,
            );
            assert!(res.converged);
            let xd = chol_solve(&d, &b).unwrap();
            let denom = norm2(&xd).max(1.0);
            let diff: f64 = res
                .x
                .iter()
                .zip(&xd)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(diff / denom <= 1e-8, "pcg vs chol diff {diff}");
        }
    }

    #[test]
    fn op_norm_identity_and_diag() {
        let i = SparseMatrix::identity(5);
        let est = op_norm_estimate(&|v| i.matvec(v), 5, 50);
        assert!((est - 1.0).abs() <= 1e-8);

        let d = SparseMatrix::from_diag(&[1.0, 9.0]);
        let est = op_norm_estimate(&|v| d.matvec(v), 2, 50);
        assert!((est - 9.0).abs() <= 1e-6);
        assert!(est <= 9.0 + 1e-12);
    }

    /// Jacobi eigenvalue sweep, used only as an independent oracle.
    fn jacobi_eigenvalues(a: &DenseMatrix) -> Vec<f64> {
        let n = a.n();
        let mut m = a.clone();
        for _ in 0..100 {
            let mut off = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    off += m.get(i, j).abs();
                }
            }
            if off < 1e-13 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m.get(p, q);
                    if apq.abs() < 1e-15 {
                        continue;
                    }
                    let theta = 0.5 * (m.get(q, q) - m.get(p, p)) / apq;
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m.get(k, p);
                        let mkq = m.get(k, q);
                        m.set(k, p, c * mkp - s * mkq);
                        m.set(k, q, s * mkp + c * mkq);
                    }
                    for k in 0..n {
                        let mpk = m.get(p, k);
                        let mqk = m.get(q, k);
                        m.set(p, k, c * mpk - s * mqk);
                        m.set(q, k, s * mpk + c * mqk);
                    }
                }
            }
        }
        (0..n).map(|i| m.get(i, i)).collect()
    }

    #[test]
    fn op_norm_matches_dense_eigensolve() {
        let mut rng = crate::rng::Rng::new(99);
        let (s, d) = random_spd(10, &mut rng);
        let eigs = jacobi_eigenvalues(&d);
        let lmax = eigs.iter().fold(0.0f64, |m, &e| m.max(e));
        let est = op_norm_estimate(&|v| s.matvec(v), 10, 200);
        assert!(
            (est - lmax).abs() / lmax <= 1e-4,
            "estimate {est} vs oracle {lmax}"
        );
    }

    #[test]
    fn min_eig_estimate_on_diag() {
        let d = SparseMatrix::from_diag(&[0.5, 3.0, 9.0]);
        let est = min_eig_estimate(&|v| d.matvec(v), 3, 200);
        assert!((est - 0.5).abs() < 0.05, "estimate {est}");
    }

    #[test]
    fn min_eig_estimate_handles_indefinite_matrices() {
        // dominant negative eigenvalue
        let d = SparseMatrix::from_diag(&[-5.0, 1.0, 2.0]);
        let est = min_eig_estimate(&|v| d.matvec(v), 3, 200);
        assert!((est + 5.0).abs() < 0.1, "estimate {est}");
        // dominant positive eigenvalue with a negative tail
        let d = SparseMatrix::from_diag(&[-1.0, 0.5, 10.0]);
        let est = min_eig_estimate(&|v| d.matvec(v), 3, 200);
        assert!((est + 1.0).abs() < 0.1, "estimate {est}");
    }

    #[test]
    fn ic0_preconditioner_accelerates() {
        // 1-D Laplacian chain
        let n = 100;
        let mut triplets = Vec::new();
        for i in 0..n {
            triplets.push((i, i, 2.0));
            if i + 1 < n {
                triplets.push((i, i + 1, -1.0));
                triplets.push((i + 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(&triplets, n, n).unwrap();
        let ic = IcPrecond::new(&a).unwrap();
        let b = vec![1.0; n];
        let plain = pcg_solve(&|v| a.matvec(v), &b, &|r| r.to_vec(), 1e-10, 1000);
        let pre = pcg_solve(&|v| a.matvec(v), &b, &|r| ic.apply(r), 1e-10, 1000);
        assert!(plain.converged && pre.converged);
        assert!(pre.iters < plain.iters, "{} !< {}", pre.iters, plain.iters);
    }
}
