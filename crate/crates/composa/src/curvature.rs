//! Huber smoothing of the penalty and assembly of the second-order system.
//!
//! The Huberized 1-norm is C^1 with a piecewise-constant second derivative;
//! its weak Hessian is `Gamma = gamma * C^T D C` where `D` masks the rows
//! with |<c_i, x>| <= 1/gamma. The direction system matrix is
//! `M = Bhat + beta * Gamma` with `Bhat` an SPD clamp of the smooth
//! curvature, available both as an operator and (lazily) in assembled
//! sparse form.

use crate::linalg::{min_eig_estimate, SparseMatrix};
use crate::problems::CurvatureInfo;
use std::cell::OnceCell;

/// Huber regularization of |t|: gamma t^2 / 2 inside |t| <= 1/gamma,
/// |t| - 1/(2 gamma) outside.
pub fn huber_value(t: f64, gamma: f64) -> f64 {
    debug_assert!(gamma > 0.0);
    if t.abs() <= 1.0 / gamma {
        0.5 * gamma * t * t
    } else {
        t.abs() - 0.5 / gamma
    }
}

/// Derivative of [`huber_value`]: t / max(1/gamma, |t|), always in [-1, 1].
pub fn huber_grad_scalar(t: f64, gamma: f64) -> f64 {
    debug_assert!(gamma > 0.0);
    t / (1.0 / gamma).max(t.abs())
}

/// The weak Hessian `gamma * C^T D C` of the Huberized penalty at a point.
pub struct HuberOperator<'a> {
    gamma: f64,
    c: &'a SparseMatrix,
    mask: Vec<bool>,
}

/// Builds the Huber mask at `x`. `gamma = 0` is allowed and produces the
/// zero operator (no generalized second-order information).
pub fn build_huber_operator<'a>(c: &'a SparseMatrix, x: &[f64], gamma: f64) -> HuberOperator<'a> {
    assert!(gamma >= 0.0);
    let mask = if gamma == 0.0 {
        vec![true; c.nrows()]
    } else {
        let band = 1.0 / gamma;
        (0..c.nrows())
            .map(|i| c.row_dot(i, x).abs() <= band)
            .collect()
    };
    HuberOperator { gamma, c, mask }
}

impl<'a> HuberOperator<'a> {
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn masked_rows(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| if m { Some(i) } else { None })
            .collect()
    }

    /// Gamma v = gamma * C^T (D (C v))
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.c.ncols()];
        self.apply_into(v, &mut out);
        out
    }

    /// out += gamma * C^T (D (C v))
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        if self.gamma == 0.0 {
            return;
        }
        for i in 0..self.c.nrows() {
            if !self.mask[i] {
                continue;
            }
            let t = self.gamma * self.c.row_dot(i, v);
            if t == 0.0 {
                continue;
            }
            let (cols, vals) = self.c.row(i);
            for (&j, &cv) in cols.iter().zip(vals) {
                out[j] += t * cv;
            }
        }
    }

    /// Assembled sparse form gamma * C_D^T C_D.
    pub fn assemble(&self) -> SparseMatrix {
        let m = self.c.ncols();
        if self.gamma == 0.0 {
            return SparseMatrix::zeros(m, m);
        }
        let rows = self.masked_rows();
        let cd = self.c.select_rows(&rows).unwrap();
        cd.transpose().matmul(&cd).scale(self.gamma)
    }

    /// Diagonal of the assembled form.
    pub fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.c.ncols()];
        if self.gamma == 0.0 {
            return d;
        }
        for i in 0..self.c.nrows() {
            if !self.mask[i] {
                continue;
            }
            let (cols, vals) = self.c.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[j] += self.gamma * v * v;
            }
        }
        d
    }
}

enum ClampedCurvature<'a> {
    Diagonal(Vec<f64>),
    Matrix { h: &'a SparseMatrix, shift: f64 },
    Gram { a: &'a SparseMatrix, shift: f64 },
}

/// The direction-system matrix `M = Bhat + beta * Gamma`, SPD by
/// construction. Exposes operator application and a lazily assembled sparse
/// form for direct factorizations.
pub struct SystemOperator<'a> {
    bhat: ClampedCurvature<'a>,
    huber: HuberOperator<'a>,
    beta: f64,
    kappa_min: f64,
    dim: usize,
    assembled: OnceCell<SparseMatrix>,
}

/// Clamps the smooth curvature to be SPD and pairs it with the Huber term.
///
/// Diagonal curvature entries are clamped to `max(h_i, kappa_min)`; explicit
/// matrices are shifted by `max(0, kappa_min - lambda_min_estimate)` with the
/// smallest eigenvalue estimated by shifted power iteration.
pub fn assemble_system<'a>(
    b: CurvatureInfo<'a>,
    huber: HuberOperator<'a>,
    beta: f64,
    kappa_min: f64,
) -> SystemOperator<'a> {
    assert!(beta > 0.0);
    assert!(kappa_min > 0.0);
    let dim = b.dim();
    let bhat = match b {
        CurvatureInfo::Diagonal { d, .. } => {
            ClampedCurvature::Diagonal(d.iter().map(|&v| v.max(kappa_min)).collect())
        }
        CurvatureInfo::Matrix { h, .. } => {
            let lmin = min_eig_estimate(&|v| h.matvec(v), dim, 50);
            ClampedCurvature::Matrix {
                h,
                shift: (kappa_min - lmin).max(0.0),
            }
        }
        CurvatureInfo::Gram { a } => {
            let lmin = min_eig_estimate(&|v| a.matvec_t(&a.matvec(v)), dim, 50);
            ClampedCurvature::Gram {
                a,
                shift: (kappa_min - lmin).max(0.0),
            }
        }
    };
    SystemOperator {
        bhat,
        huber,
        beta,
        kappa_min,
        dim,
        assembled: OnceCell::new(),
    }
}

impl<'a> SystemOperator<'a> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kappa_min(&self) -> f64 {
        self.kappa_min
    }

    /// M v = Bhat v + beta * Gamma v
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        let mut out = match &self.bhat {
            ClampedCurvature::Diagonal(d) => d.iter().zip(v).map(|(di, vi)| di * vi).collect(),
            ClampedCurvature::Matrix { h, shift } => {
                let mut w = h.matvec(v);
                if *shift > 0.0 {
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi += shift * vi;
                    }
                }
                w
            }
            ClampedCurvature::Gram { a, shift } => {
                let mut w = a.matvec_t(&a.matvec(v));
                if *shift > 0.0 {
                    for (wi, vi) in w.iter_mut().zip(v) {
                        *wi += shift * vi;
                    }
                }
                w
            }
        };
        if self.beta != 0.0 && self.huber.gamma() != 0.0 {
            let mut gv = vec![0.0; self.dim];
            self.huber.apply_into(v, &mut gv);
            for (o, g) in out.iter_mut().zip(&gv) {
                *o += self.beta * g;
            }
        }
        out
    }

    /// Diagonal of M, for Jacobi preconditioning; computed without
    /// assembling.
    pub fn diag(&self) -> Vec<f64> {
        let mut d = match &self.bhat {
            ClampedCurvature::Diagonal(d) => d.clone(),
            ClampedCurvature::Matrix { h, shift } => {
                let mut d = h.diag();
                for di in d.iter_mut() {
                    *di += shift;
                }
                d
            }
            ClampedCurvature::Gram { a, shift } => {
                let mut d = a.col_sq_sums();
                for di in d.iter_mut() {
                    *di += shift;
                }
                d
            }
        };
        for (di, gi) in d.iter_mut().zip(self.huber.diag()) {
            *di += self.beta * gi;
        }
        d
    }

    /// Assembled sparse form, built once on first request.
    pub fn assembled(&self) -> &SparseMatrix {
        self.assembled.get_or_init(|| {
            let b = match &self.bhat {
                ClampedCurvature::Diagonal(d) => SparseMatrix::from_diag(d),
                ClampedCurvature::Matrix { h, shift } => {
                    if *shift > 0.0 {
                        let shift_i = SparseMatrix::identity(self.dim).scale(*shift);
                        h.add_scaled(1.0, &shift_i)
                    } else {
                        (*h).clone()
                    }
                }
                ClampedCurvature::Gram { a, shift } => {
                    let gram = a.transpose().matmul(a);
                    if *shift > 0.0 {
                        let shift_i = SparseMatrix::identity(self.dim).scale(*shift);
                        gram.add_scaled(1.0, &shift_i)
                    } else {
                        gram
                    }
                }
            };
            let gamma = self.huber.assemble();
            b.add_scaled(self.beta, &gamma)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::problems::{build_cauchy_denoise, synthetic};
    use crate::rng::Rng;

    #[test]
    fn huber_quadratic_branch() {
        assert!((huber_value(0.25, 2.0) - 0.0625).abs() < 1e-15);
        assert!((huber_grad_scalar(0.25, 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn huber_seam_continuity() {
        // both branches at |t| = 1/gamma agree
        let gamma = 2.0;
        let t = 0.5;
        assert!((huber_value(t, gamma) - 0.25).abs() < 1e-15);
        assert!((0.5 * gamma * t * t - (t - 0.5 / gamma)).abs() < 1e-15);
        assert!((huber_grad_scalar(t, gamma) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn huber_linear_branch() {
        assert!((huber_value(-3.0, 2.0) - 2.75).abs() < 1e-15);
        assert!((huber_grad_scalar(-3.0, 2.0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn huber_grad_bounded() {
        let mut rng = Rng::new(9);
        for _ in 0..1000 {
            let t = rng.uniform_in(-100.0, 100.0);
            let g = huber_grad_scalar(t, rng.uniform_in(0.01, 1000.0));
            assert!((-1.0..=1.0).contains(&g));
        }
    }

    #[test]
    fn mask_identity_example() {
        let c = SparseMatrix::identity(2);
        let h = build_huber_operator(&c, &[0.05, 1.0], 10.0);
        assert_eq!(h.mask(), &[true, false]);
        let g = h.assemble();
        assert_eq!(g.to_dense(), vec![vec![10.0, 0.0], vec![0.0, 0.0]]);
    }

    #[test]
    fn mask_all_active_gives_full_gram() {
        let c = SparseMatrix::from_triplets(&[(0, 0, 1.0), (0, 1, -1.0)], 1, 2).unwrap();
        // 1/gamma = 10 exceeds ||Cx||_inf
        let h = build_huber_operator(&c, &[0.3, 0.2], 0.1);
        assert_eq!(h.mask(), &[true]);
        let g = h.assemble();
        let ctc = c.transpose().matmul(&c).scale(0.1);
        assert_eq!(g, ctc);
    }

    #[test]
    fn difference_row_weak_hessian() {
        let c = SparseMatrix::from_triplets(&[(0, 0, 1.0), (0, 1, -1.0)], 1, 2).unwrap();
        let h = build_huber_operator(&c, &[2.0, 2.0], 1.0);
        let g = h.assemble();
        assert_eq!(g.to_dense(), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
    }

    #[test]
    fn operator_matches_assembled() {
        let mut rng = Rng::new(17);
        let c = synthetic::random_sparse_rows(12, 8, 3, 5);
        let x = rng.normal_vec(8);
        let h = build_huber_operator(&c, &x, 2.5);
        let g = h.assemble();
        for _ in 0..20 {
            let v = rng.normal_vec(8);
            let a = h.apply(&v);
            let b = g.matvec(&v);
            for (ai, bi) in a.iter().zip(&b) {
                assert!((ai - bi).abs() <= 1e-12 * (1.0 + bi.abs()));
            }
        }
    }

    #[test]
    fn weak_hessian_is_psd() {
        let mut rng = Rng::new(19);
        let c = synthetic::random_sparse_rows(10, 6, 2, 31);
        let x = rng.normal_vec(6);
        let h = build_huber_operator(&c, &x, 3.0);
        for _ in 0..100 {
            let v = rng.normal_vec(6);
            assert!(dot(&v, &h.apply(&v)) >= -1e-12);
        }
    }

    #[test]
    fn gamma_zero_is_zero_operator() {
        let c = SparseMatrix::identity(3);
        let h = build_huber_operator(&c, &[0.0; 3], 0.0);
        assert_eq!(h.apply(&[1.0, 2.0, 3.0]), vec![0.0; 3]);
        assert_eq!(h.assemble().nnz(), 0);
    }

    /// Huberized penalty value at x: sum_i huber(<c_i, x>).
    fn huberized(c: &SparseMatrix, x: &[f64], gamma: f64) -> f64 {
        (0..c.nrows())
            .map(|i| huber_value(c.row_dot(i, x), gamma))
            .sum()
    }

    /// Draws a point whose row products stay away from the Huber seam.
    fn point_off_seam(c: &SparseMatrix, gamma: f64, rng: &mut Rng) -> Vec<f64> {
        let band = 1.0 / gamma;
        'outer: for _ in 0..200 {
            let x = rng.normal_vec(c.ncols());
            for i in 0..c.nrows() {
                if (c.row_dot(i, &x).abs() - band).abs() < 1e-2 / gamma {
                    continue 'outer;
                }
            }
            return x;
        }
        panic!("could not sample a point away from the Huber seam");
    }

    #[test]
    fn huberized_gradient_matches_fd() {
        let mut rng = Rng::new(41);
        let gamma = 2.0;
        let c = synthetic::random_sparse_rows(5, 8, 3, 13);
        for _ in 0..20 {
            let x = point_off_seam(&c, gamma, &mut rng);
            // analytic gradient: C^T [huber'(<c_i,x>)]
            let s: Vec<f64> = (0..c.nrows())
                .map(|i| huber_grad_scalar(c.row_dot(i, &x), gamma))
                .collect();
            let g = c.matvec_t(&s);
            let mut xp = x.clone();
            for j in 0..x.len() {
                let hstep = 1e-6 * (1.0 + x[j].abs());
                xp[j] = x[j] + hstep;
                let fp = huberized(&c, &xp, gamma);
                xp[j] = x[j] - hstep;
                let fm = huberized(&c, &xp, gamma);
                xp[j] = x[j];
                let fd = (fp - fm) / (2.0 * hstep);
                assert!(
                    (g[j] - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
                    "grad {} vs fd {}",
                    g[j],
                    fd
                );
            }
        }
    }

    #[test]
    fn weak_hessian_matches_fd_hessian_off_seam() {
        let mut rng = Rng::new(43);
        let gamma = 2.0;
        for trial in 0..5 {
            let c = synthetic::random_sparse_rows(5, 8, 3, 100 + trial);
            let x = point_off_seam(&c, gamma, &mut rng);
            let g = build_huber_operator(&c, &x, gamma).assemble();
            let dense = g.to_dense();
            let h = 1e-4;
            let mut xs = x.clone();
            let eval = |xs: &[f64]| huberized(&c, xs, gamma);
            let f0 = eval(&xs);
            for j in 0..8 {
                for k in 0..8 {
                    let (oj, ok) = (x[j], x[k]);
                    let fd = if j == k {
                        xs[j] = oj + h;
                        let fp = eval(&xs);
                        xs[j] = oj - h;
                        let fm = eval(&xs);
                        xs[j] = oj;
                        (fp - 2.0 * f0 + fm) / (h * h)
                    } else {
                        xs[j] = oj + h;
                        xs[k] = ok + h;
                        let fpp = eval(&xs);
                        xs[k] = ok - h;
                        let fpm = eval(&xs);
                        xs[j] = oj - h;
                        xs[k] = ok + h;
                        let fmp = eval(&xs);
                        xs[k] = ok - h;
                        let fmm = eval(&xs);
                        xs[j] = oj;
                        xs[k] = ok;
                        (fpp - fpm - fmp + fmm) / (4.0 * h * h)
                    };
                    let scale = 1.0 + dense[j][k].abs();
                    assert!(
                        (dense[j][k] - fd).abs() / scale <= 1e-4,
                        "H[{j}][{k}] = {} vs fd {}",
                        dense[j][k],
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn clamp_rule_diagonal() {
        // Cauchy curvature at |u - f| = 2, a = 1 is -0.24; clamps to kappa
        let b = CurvatureInfo::Diagonal {
            d: vec![-0.24],
            spd_guaranteed: false,
        };
        let c = SparseMatrix::zeros(0, 1);
        let h = build_huber_operator(&c, &[0.0], 1.0);
        let m = assemble_system(b, h, 1.0, 1e-4);
        assert_eq!(m.apply(&[1.0]), vec![1e-4]);
    }

    #[test]
    fn identity_curvature_zero_huber_is_identity() {
        let b = CurvatureInfo::Diagonal {
            d: vec![1.0; 3],
            spd_guaranteed: true,
        };
        let c = SparseMatrix::identity(3);
        let h = build_huber_operator(&c, &[0.0; 3], 0.0);
        let m = assemble_system(b, h, 0.5, 1e-6);
        let v = [1.0, -2.0, 0.5];
        assert_eq!(m.apply(&v), v.to_vec());
        assert_eq!(
            m.assembled().to_dense(),
            SparseMatrix::identity(3).to_dense()
        );
    }

    #[test]
    fn system_is_symmetric_and_bounded_below() {
        let mut rng = Rng::new(87);
        let grid_n = 4;
        let f_obs = synthetic::piecewise_image(grid_n);
        let p = build_cauchy_denoise(&f_obs, 0.5, 0.3, grid_n).unwrap();
        let x = rng.normal_vec(p.dim());
        let kappa = 1e-4;
        let h = build_huber_operator(p.penalty_matrix(), &x, 100.0);
        let m = assemble_system(p.curvature(&x), h, p.beta(), kappa);
        for _ in 0..100 {
            let v = rng.normal_vec(p.dim());
            let w = rng.normal_vec(p.dim());
            let mv = m.apply(&v);
            let mw = m.apply(&w);
            let lhs = dot(&mv, &w);
            let rhs = dot(&v, &mw);
            assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            let quad = dot(&v, &mv);
            assert!(quad >= kappa * dot(&v, &v) * (1.0 - 1e-12));
        }
        // assembled form agrees with the operator
        let asm = m.assembled();
        let v = rng.normal_vec(p.dim());
        let a = m.apply(&v);
        let b = asm.matvec(&v);
        for (ai, bi) in a.iter().zip(&b) {
            assert!((ai - bi).abs() <= 1e-12 * (1.0 + bi.abs()));
        }
    }

    #[test]
    fn gram_operator_assembles_and_solves() {
        // operator-form least-squares curvature: assembled form must equal
        // A^T A + shift and feed a direct factorization
        let mut rng = Rng::new(12);
        let a = synthetic::random_sparse_rows(9, 6, 3, 44);
        let b = CurvatureInfo::Gram { a: &a };
        let cmat = SparseMatrix::identity(6);
        let x = rng.normal_vec(6);
        let h = build_huber_operator(&cmat, &x, 5.0);
        let m = assemble_system(b, h, 0.7, 1e-6);
        let asm = m.assembled();
        for _ in 0..10 {
            let v = rng.normal_vec(6);
            let via_op = m.apply(&v);
            let via_asm = asm.matvec(&v);
            for (p, q) in via_op.iter().zip(&via_asm) {
                assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
            }
        }
        let rhs = rng.normal_vec(6);
        let sol = crate::linalg::ProfileChol::factor(asm).unwrap().solve(&rhs);
        let back = m.apply(&sol);
        for (p, q) in back.iter().zip(&rhs) {
            assert!((p - q).abs() <= 1e-8 * (1.0 + q.abs()));
        }
        // Jacobi diagonal agrees with the assembled diagonal
        let d = m.diag();
        let ad = asm.diag();
        for (p, q) in d.iter().zip(&ad) {
            assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn matrix_curvature_shift_keeps_spd() {
        // rank-deficient Gram curvature gets shifted up to kappa_min
        let a = SparseMatrix::from_triplets(&[(0, 0, 1.0), (0, 1, 1.0)], 1, 2).unwrap();
        let b = CurvatureInfo::Gram { a: &a };
        let cmat = SparseMatrix::zeros(0, 2);
        let h = build_huber_operator(&cmat, &[0.0; 2], 0.0);
        let kappa = 1e-3;
        let m = assemble_system(b, h, 1.0, kappa);
        let mut rng = Rng::new(3);
        for _ in 0..50 {
            let v = rng.normal_vec(2);
            assert!(dot(&v, &m.apply(&v)) >= 0.9 * kappa * dot(&v, &v));
        }
    }
}
