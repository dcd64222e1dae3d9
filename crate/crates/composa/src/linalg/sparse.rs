//! Row-compressed sparse matrix.

use super::LinalgError;

/// Compressed sparse row matrix. Column indices within each row are strictly
/// increasing and explicit zeros are dropped at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from (row, col, value) triplets. Duplicate entries are summed,
    /// exact zeros (including sums cancelling to zero) are dropped.
    pub fn from_triplets(
        triplets: &[(usize, usize, f64)],
        nrows: usize,
        ncols: usize,
    ) -> Result<SparseMatrix, LinalgError> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(LinalgError::IndexOutOfRange {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
        }
        // Bucket by row, then sort and merge duplicates within each row.
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            per_row[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in per_row.iter_mut() {
            row.sort_unstable_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row.len() {
                let c = row[i].0;
                let mut v = 0.0;
                while i < row.len() && row[i].0 == c {
                    v += row[i].1;
                    i += 1;
                }
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> SparseMatrix {
        SparseMatrix {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> SparseMatrix {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Diagonal matrix from `d`; zero entries are dropped.
    pub fn from_diag(d: &[f64]) -> SparseMatrix {
        let triplets: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        SparseMatrix::from_triplets(&triplets, d.len(), d.len()).unwrap()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// (column indices, values) of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// Inner product of row `i` with `x`.
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
    }

    /// y = M x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.ncols,
            "matvec dimension mismatch: {} vs {}",
            x.len(),
            self.ncols
        );
        (0..self.nrows).map(|i| self.row_dot(i, x)).collect()
    }

    /// y = M^T x
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.nrows,
            "matvec_t dimension mismatch: {} vs {}",
            x.len(),
            self.nrows
        );
        let mut y = vec![0.0; self.ncols];
        self.matvec_t_into(x, &mut y);
        y
    }

    /// y += M^T x without allocating. `y` must be zeroed by the caller when
    /// a plain product is wanted.
    pub fn matvec_t_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.nrows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xi;
            }
        }
    }

    /// Rows of `self` selected by `idx`, in `idx` order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<SparseMatrix, LinalgError> {
        let mut row_ptr = Vec::with_capacity(idx.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for &i in idx {
            if i >= self.nrows {
                return Err(LinalgError::IndexOutOfRange {
                    row: i,
                    col: 0,
                    nrows: self.nrows,
                    ncols: self.ncols,
                });
            }
            let (cols, vals) = self.row(i);
            col_idx.extend_from_slice(cols);
            values.extend_from_slice(vals);
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix {
            nrows: idx.len(),
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Keeps column `keep[j]` of every row, renumbering columns to the
    /// position of `j` in `keep`. `keep` must be strictly increasing.
    pub fn select_cols(&self, keep: &[usize]) -> SparseMatrix {
        let mut map = vec![usize::MAX; self.ncols];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if map[c] != usize::MAX {
                    col_idx.push(map[c]);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: keep.len(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.ncols];
        for &c in &self.col_idx {
            counts[c] += 1;
        }
        let mut row_ptr = vec![0usize; self.ncols + 1];
        for j in 0..self.ncols {
            row_ptr[j + 1] = row_ptr[j] + counts[j];
        }
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut next = row_ptr.clone();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let pos = next[c];
                col_idx[pos] = i;
                values[pos] = v;
                next[c] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Sparse product self * other.
    pub fn matmul(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols, other.nrows, "matmul dimension mismatch");
        let n = other.ncols;
        let mut acc = vec![0.0; n];
        let mut marked = vec![false; n];
        let mut touched: Vec<usize> = Vec::new();

        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&k, &v) in cols.iter().zip(vals) {
                let (bcols, bvals) = other.row(k);
                for (&j, &bv) in bcols.iter().zip(bvals) {
                    if !marked[j] {
                        marked[j] = true;
                        touched.push(j);
                    }
                    acc[j] += v * bv;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j] != 0.0 {
                    col_idx.push(j);
                    values.push(acc[j]);
                }
                acc[j] = 0.0;
                marked[j] = false;
            }
            touched.clear();
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: n,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// self + alpha * other (same shape).
    pub fn add_scaled(&self, alpha: f64, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.nrows, other.nrows);
        assert_eq!(self.ncols, other.ncols);
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.nrows {
            let (ac, av) = self.row(i);
            let (bc, bv) = other.row(i);
            let (mut p, mut q) = (0, 0);
            while p < ac.len() || q < bc.len() {
                let (c, v) = if q >= bc.len() || (p < ac.len() && ac[p] < bc[q]) {
                    let out = (ac[p], av[p]);
                    p += 1;
                    out
                } else if p >= ac.len() || bc[q] < ac[p] {
                    let out = (bc[q], alpha * bv[q]);
                    q += 1;
                    out
                } else {
                    let out = (ac[p], av[p] + alpha * bv[q]);
                    p += 1;
                    q += 1;
                    out
                };
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Stacks `self` on top of `other` (column counts must agree).
    pub fn vstack(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols, other.ncols, "vstack column mismatch");
        let mut row_ptr = self.row_ptr.clone();
        let base = self.nnz();
        row_ptr.extend(other.row_ptr[1..].iter().map(|p| p + base));
        let mut col_idx = self.col_idx.clone();
        col_idx.extend_from_slice(&other.col_idx);
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        SparseMatrix {
            nrows: self.nrows + other.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Multiplies every entry of row `i` by `w[i]`. Rows scaled by zero
    /// become empty.
    pub fn scale_rows(&self, w: &[f64]) -> SparseMatrix {
        assert_eq!(w.len(), self.nrows);
        let mut out = self.clone();
        for i in 0..self.nrows {
            let (lo, hi) = (out.row_ptr[i], out.row_ptr[i + 1]);
            for v in &mut out.values[lo..hi] {
                *v *= w[i];
            }
        }
        out.drop_zeros();
        out
    }

    pub fn scale(&self, alpha: f64) -> SparseMatrix {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= alpha;
        }
        out.drop_zeros();
        out
    }

    fn drop_zeros(&mut self) {
        if !self.values.contains(&0.0) {
            return;
        }
        let mut row_ptr = Vec::with_capacity(self.nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if v != 0.0 {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        self.row_ptr = row_ptr;
        self.col_idx = col_idx;
        self.values = values;
    }

    /// Dense n x n Gram matrix M M^T (row-major). Intended for small row
    /// counts; the caller enforces the size budget.
    pub fn gram_small(&self) -> super::DenseMatrix {
        let n = self.nrows;
        let mut g = super::DenseMatrix::zeros(n);
        for i in 0..n {
            let (ic, iv) = self.row(i);
            for j in i..n {
                let (jc, jv) = self.row(j);
                // sorted-merge dot product of two sparse rows
                let (mut p, mut q) = (0, 0);
                let mut s = 0.0;
                while p < ic.len() && q < jc.len() {
                    match ic[p].cmp(&jc[q]) {
                        std::cmp::Ordering::Less => p += 1,
                        std::cmp::Ordering::Greater => q += 1,
                        std::cmp::Ordering::Equal => {
                            s += iv[p] * jv[q];
                            p += 1;
                            q += 1;
                        }
                    }
                }
                g.set(i, j, s);
                g.set(j, i, s);
            }
        }
        g
    }

    /// Sparse Gram product M M^T, kept sparse. Rows of M that share no
    /// support produce no entry.
    pub fn gram_sparse(&self) -> SparseMatrix {
        self.matmul(&self.transpose())
    }

    /// Diagonal of self (length min(nrows, ncols)).
    pub fn diag(&self) -> Vec<f64> {
        let n = self.nrows.min(self.ncols);
        let mut d = vec![0.0; n];
        for (i, di) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            if let Ok(k) = cols.binary_search(&i) {
                *di = vals[k];
            }
        }
        d
    }

    /// Sum of squared entries per column; used for Jacobi preconditioning of
    /// Gram operators.
    pub fn col_sq_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.ncols];
        for (&c, &v) in self.col_idx.iter().zip(&self.values) {
            s[c] += v * v;
        }
        s
    }

    /// Symmetric permutation P M P^T: entry (i, j) moves to
    /// `(pos[i], pos[j])` where pos is the inverse of `perm` (`perm[k]` =
    /// old index placed at new position k).
    pub fn permute_symmetric(&self, perm: &[usize]) -> SparseMatrix {
        assert_eq!(self.nrows, self.ncols);
        assert_eq!(perm.len(), self.nrows);
        let mut pos = vec![0usize; self.nrows];
        for (new, &old) in perm.iter().enumerate() {
            pos[old] = new;
        }
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                triplets.push((pos[i], pos[c], v));
            }
        }
        SparseMatrix::from_triplets(&triplets, self.nrows, self.ncols).unwrap()
    }

    /// Principal submatrix on `keep` (strictly increasing indices), for
    /// square matrices.
    pub fn principal_submatrix(&self, keep: &[usize]) -> SparseMatrix {
        assert_eq!(self.nrows, self.ncols);
        self.select_rows(keep).unwrap().select_cols(keep)
    }

    /// Dense row-major copy (square or rectangular), for small matrices and
    /// the dense-solver baseline.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                d[i][c] = v;
            }
        }
        d
    }

    /// All stored entries as triplets.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                t.push((i, c, v));
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;

    #[test]
    fn triplets_sum_duplicates() {
        let m = SparseMatrix::from_triplets(&[(0, 0, 1.0), (0, 0, 1.0)], 1, 1).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.row(0), (&[0usize][..], &[2.0][..]));
    }

    #[test]
    fn triplets_drop_zeros() {
        let m = SparseMatrix::from_triplets(&[(0, 1, 0.0)], 1, 2).unwrap();
        assert_eq!(m.nnz(), 0);
        assert_eq!(m.nrows(), 1);
        // cancelling duplicates also vanish
        let m = SparseMatrix::from_triplets(&[(0, 0, 1.0), (0, 0, -1.0)], 1, 1).unwrap();
        assert_eq!(m.nnz(), 0);
    }

    #[test]
    fn triplets_sorted_rows() {
        let m = SparseMatrix::from_triplets(&[(1, 0, 3.0), (0, 1, -1.0)], 2, 2).unwrap();
        assert_eq!(m.row(0), (&[1usize][..], &[-1.0][..]));
        assert_eq!(m.row(1), (&[0usize][..], &[3.0][..]));
    }

    #[test]
    fn triplets_out_of_range() {
        let err = SparseMatrix::from_triplets(&[(2, 0, 1.0)], 2, 2).unwrap_err();
        assert!(matches!(err, LinalgError::IndexOutOfRange { row: 2, .. }));
    }

    #[test]
    fn matvec_identity() {
        let m = SparseMatrix::identity(2);
        assert_eq!(m.matvec(&[3.0, 4.0]), vec![3.0, 4.0]);
    }

    #[test]
    fn matvec_difference_row() {
        let m = SparseMatrix::from_triplets(&[(0, 0, 1.0), (0, 1, -1.0)], 1, 2).unwrap();
        assert_eq!(m.matvec(&[2.0, 2.0]), vec![0.0]);
        assert_eq!(m.matvec_t(&[1.0]), vec![1.0, -1.0]);
    }

    #[test]
    fn select_rows_cases() {
        let m = SparseMatrix::from_triplets(
            &[(0, 0, 1.0), (1, 1, 1.0), (2, 0, 1.0), (2, 1, 1.0)],
            3,
            2,
        )
        .unwrap();
        let empty = m.select_rows(&[]).unwrap();
        assert_eq!(empty.nrows(), 0);
        assert_eq!(empty.ncols(), 2);
        let all = m.select_rows(&[0, 1, 2]).unwrap();
        assert_eq!(all, m);
        let last = m.select_rows(&[2]).unwrap();
        assert_eq!(last.row(0), (&[0usize, 1][..], &[1.0, 1.0][..]));
        assert!(m.select_rows(&[3]).is_err());
    }

    #[test]
    fn gram_small_cases() {
        let m = SparseMatrix::from_triplets(&[(0, 0, 1.0), (0, 1, -1.0)], 1, 2).unwrap();
        let g = m.gram_small();
        assert_eq!(g.get(0, 0), 2.0);

        let i2 = SparseMatrix::identity(2).gram_small();
        assert_eq!(i2.get(0, 0), 1.0);
        assert_eq!(i2.get(0, 1), 0.0);
        assert_eq!(i2.get(1, 1), 1.0);

        let r1 = SparseMatrix::from_triplets(&[(0, 0, 1.0), (1, 0, 1.0)], 2, 2).unwrap();
        let g = r1.gram_small();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(g.get(i, j), 1.0);
            }
        }
    }

    #[test]
    fn gram_matches_matvec_on_unit_vectors() {
        let mut rng = crate::rng::Rng::new(11);
        let mut triplets = Vec::new();
        let (n, m) = (6, 9);
        for r in 0..n {
            for c in 0..m {
                if rng.uniform() < 0.4 {
                    triplets.push((r, c, rng.normal()));
                }
            }
        }
        let a = SparseMatrix::from_triplets(&triplets, n, m).unwrap();
        let g = a.gram_small();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = a.matvec(&a.matvec_t(&e));
            for i in 0..n {
                assert!((g.get(i, j) - col[i]).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn adjoint_identity_random() {
        let mut rng = crate::rng::Rng::new(5);
        for _ in 0..100 {
            let n = 1 + rng.index(8);
            let m = 1 + rng.index(8);
            let mut triplets = Vec::new();
            for r in 0..n {
                for c in 0..m {
                    if rng.uniform() < 0.5 {
                        triplets.push((r, c, rng.normal()));
                    }
                }
            }
            let a = SparseMatrix::from_triplets(&triplets, n, m).unwrap();
            let x = rng.normal_vec(m);
            let y = rng.normal_vec(n);
            let lhs = dot(&a.matvec(&x), &y);
            let rhs = dot(&x, &a.matvec_t(&y));
            let scale = 1.0 + lhs.abs().max(rhs.abs());
            assert!((lhs - rhs).abs() / scale <= 1e-12);
        }
    }

    #[test]
    fn transpose_matmul_roundtrip() {
        let a = SparseMatrix::from_triplets(
            &[(0, 0, -1.0), (0, 1, 1.0), (1, 1, -1.0), (1, 2, 1.0)],
            2,
            3,
        )
        .unwrap();
        let lap = a.transpose().matmul(&a);
        let expected = [[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        let dense = lap.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert!((dense[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn add_scaled_and_vstack() {
        let a = SparseMatrix::identity(2);
        let b = SparseMatrix::from_triplets(&[(0, 1, 2.0), (1, 0, 2.0)], 2, 2).unwrap();
        let s = a.add_scaled(0.5, &b);
        assert_eq!(s.to_dense(), vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        let v = a.vstack(&b);
        assert_eq!(v.nrows(), 4);
        assert_eq!(v.row(2), (&[1usize][..], &[2.0][..]));
    }

    #[test]
    fn principal_submatrix_extracts() {
        let m = SparseMatrix::from_triplets(
            &[
                (0, 0, 4.0),
                (0, 2, 1.0),
                (1, 1, 3.0),
                (2, 0, 1.0),
                (2, 2, 5.0),
            ],
            3,
            3,
        )
        .unwrap();
        let s = m.principal_submatrix(&[0, 2]);
        assert_eq!(s.to_dense(), vec![vec![4.0, 1.0], vec![1.0, 5.0]]);
    }

    #[test]
    fn permute_symmetric_roundtrip() {
        let m = SparseMatrix::from_triplets(
            &[
                (0, 0, 1.0),
                (0, 1, 2.0),
                (1, 0, 2.0),
                (1, 1, 3.0),
                (2, 2, 4.0),
            ],
            3,
            3,
        )
        .unwrap();
        let perm = [2usize, 0, 1];
        let p = m.permute_symmetric(&perm);
        // entry (old perm[0]=2 -> new 0)
        assert_eq!(p.to_dense()[0][0], 4.0);
        // applying the inverse recovers the original
        let mut inv = vec![0usize; 3];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        assert_eq!(p.permute_symmetric(&inv), m);
    }
}
