//! Small dense symmetric matrices and their Cholesky solver.

use super::LinalgError;

/// Square dense matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> DenseMatrix {
        DenseMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> DenseMatrix {
        let n = rows.len();
        let mut m = DenseMatrix::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "from_rows requires a square matrix");
            m.data[i * n..(i + 1) * n].copy_from_slice(r);
        }
        m
    }

    pub fn from_sparse(s: &super::SparseMatrix) -> DenseMatrix {
        assert_eq!(s.nrows(), s.ncols());
        let n = s.nrows();
        let mut m = DenseMatrix::zeros(n);
        for i in 0..n {
            let (cols, vals) = s.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                m.data[i * n + c] = v;
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn add_diag(&mut self, delta: f64) {
        for i in 0..self.n {
            self.data[i * self.n + i] += delta;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            y[i] = super::dot(&self.data[i * self.n..(i + 1) * self.n], x);
        }
        y
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.n).fold(0.0f64, |m, i| m.max(self.get(i, i).abs()))
    }

    /// In-place lower Cholesky factorization. Fails when a pivot drops to
    /// `pivot_tol` or below (matrix not numerically positive definite).
    pub fn cholesky(&self) -> Result<CholFactor, LinalgError> {
        let n = self.n;
        let pivot_tol = 1e-12 * self.max_diag();
        let mut l = self.data.clone();
        for j in 0..n {
            // pivot
            let mut d = l[j * n + j];
            for k in 0..j {
                let ljk = l[j * n + k];
                d -= ljk * ljk;
            }
            if d <= pivot_tol {
                return Err(LinalgError::NotPositiveDefinite { pivot: d, index: j });
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            let inv = 1.0 / d;
            // column update: L[i][j] for i > j
            for i in (j + 1)..n {
                let mut s = l[i * n + j];
                let (ri, rj) = (i * n, j * n);
                for k in 0..j {
                    s -= l[ri + k] * l[rj + k];
                }
                l[i * n + j] = s * inv;
            }
        }
        Ok(CholFactor { n, l })
    }
}

/// Lower-triangular Cholesky factor.
pub struct CholFactor {
    n: usize,
    l: Vec<f64>,
}

impl CholFactor {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let l = &self.l;
        let mut x = b.to_vec();
        // forward: L y = b
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= l[i * n + k] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        x
    }
}

/// Solves A x = b for symmetric positive definite `a` by dense Cholesky.
pub fn chol_solve(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    Ok(a.cholesky()?.solve(b))
}
