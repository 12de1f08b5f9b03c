//! Small dense helpers on `DMatrix<Complex64>`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Thin SVD `m = U diag(s) V*` with `s` sorted in nonincreasing order.
///
/// Backed by faer: nalgebra's SVD returns visibly inaccurate factors on some
/// of the wide, rank-deficient design matrices used in symbol recovery.
pub fn thin_svd(m: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let (r, cols) = m.shape();
    let k = r.min(cols);
    if k == 0 {
        return (CMatrix::zeros(r, 0), Vec::new(), CMatrix::zeros(cols, 0));
    }
    let a = faer::Mat::from_fn(r, cols, |i, j| m[(i, j)]);
    let svd = a.thin_svd().expect("SVD iteration converges");
    let u = CMatrix::from_fn(r, k, |i, j| *svd.U().get(i, j));
    let v = CMatrix::from_fn(cols, k, |i, j| *svd.V().get(i, j));
    let s = (0..k).map(|i| svd.S().column_vector().get(i).re).collect();
    (u, s, v)
}

/// Singular values of `m` in nonincreasing order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    thin_svd(m).1
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// `max(‖A*A − I‖, ‖AA* − I‖)`.
pub fn unitarity_residual(m: &CMatrix) -> f64 {
    let left = m.adjoint() * m - CMatrix::identity(m.ncols(), m.ncols());
    let right = m * m.adjoint() - CMatrix::identity(m.nrows(), m.nrows());
    op_norm(&left).max(op_norm(&right))
}

/// Modified Gram–Schmidt with one re-orthogonalization pass. A candidate is
/// dropped when its residual norm is at most `drop_below`. Returns an `n × r`
/// matrix with orthonormal columns.
pub fn orthonormalize(candidates: &[CVector], n: usize, drop_below: f64) -> CMatrix {
    let mut accepted: Vec<CVector> = Vec::new();
    for v in candidates {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &accepted {
                let proj = q.dotc(&w);
                w.axpy(-proj, q, c(1.0));
            }
        }
        let r = w.norm();
        if r > drop_below {
            accepted.push(w / c(r));
        }
    }
    columns(&accepted, n)
}

pub(crate) fn columns(vs: &[CVector], n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, vs.len());
    for (j, v) in vs.iter().enumerate() {
        m.set_column(j, v);
    }
    m
}

/// Orthonormal basis of the orthogonal complement of the column span of `q`
/// (assumed orthonormal) in `C^n`, by column-pivoted Gram–Schmidt on `I − QQ*`.
pub fn orthogonal_complement(q: &CMatrix) -> CMatrix {
    let n = q.nrows();
    let target = n - q.ncols();
    let mut residual = CMatrix::identity(n, n) - q * q.adjoint();
    let mut out: Vec<CVector> = Vec::with_capacity(target);
    for _ in 0..target {
        let (best, norm) = (0..n)
            .map(|j| (j, residual.column(j).norm()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if norm <= 1e-12 {
            break;
        }
        let mut v: CVector = residual.column(best).into_owned() / c(norm);
        // re-orthogonalize against everything accepted so far
        for w in q.column_iter().map(|col| col.into_owned()).chain(out.iter().cloned()) {
            let proj = w.dotc(&v);
            v.axpy(-proj, &w, c(1.0));
        }
        v /= c(v.norm());
        for j in 0..n {
            let proj = v.dotc(&residual.column(j));
            let mut col = residual.column_mut(j);
            col.axpy(-proj, &v, c(1.0));
        }
        out.push(v);
    }
    columns(&out, n)
}

/// Numerical rank: number of singular values above `rel_tol · σ_max`.
pub fn rank(m: &CMatrix, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = singular_values(m);
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Minimum-norm least squares for a fixed design matrix, factored once.
pub struct LeastSquares {
    design: CMatrix,
    u: CMatrix,
    /// Reciprocals of the retained singular values.
    inv_s: Vec<f64>,
    v: CMatrix,
}

impl LeastSquares {
    /// Singular values at or below `rel_tol · σ_max` are treated as zero.
    pub fn new(design: CMatrix, rel_tol: f64) -> Self {
        let (u, s, v) = thin_svd(&design);
        let cutoff = rel_tol * s.first().copied().unwrap_or(0.0);
        let rank = s.iter().take_while(|&&x| x > cutoff).count();
        Self {
            design,
            u: u.columns(0, rank).into_owned(),
            inv_s: s[..rank].iter().map(|x| 1.0 / x).collect(),
            v: v.columns(0, rank).into_owned(),
        }
    }

    pub fn design(&self) -> &CMatrix {
        &self.design
    }

    /// Numerical rank of the design at the configured cutoff.
    pub fn rank(&self) -> usize {
        self.inv_s.len()
    }

    /// Minimum-norm minimizer of `‖design · x − b‖` and the attained residual.
    pub fn solve(&self, b: &CVector) -> (CVector, f64) {
        let mut y = self.u.adjoint() * b;
        for (yi, inv) in y.iter_mut().zip(&self.inv_s) {
            *yi *= *inv;
        }
        let x = &self.v * y;
        let res = (&self.design * &x - b).norm();
        (x, res)
    }
}

/// One-shot [`LeastSquares`].
pub fn lstsq_min_norm(a: &CMatrix, b: &CVector, rel_tol: f64) -> (CVector, f64) {
    LeastSquares::new(a.clone(), rel_tol).solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv(v: &[(f64, f64)]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().map(|&(a, b)| Complex64::new(a, b)))
    }

    #[test]
    fn gram_schmidt_drops_dependent_vectors() {
        let a = cv(&[(1.0, 0.0), (1.0, 0.0), (0.0, 0.0)]);
        let b = cv(&[(2.0, 0.0), (2.0, 0.0), (0.0, 0.0)]);
        let e = cv(&[(0.0, 0.0), (0.0, 1.0), (1.0, 0.0)]);
        let q = orthonormalize(&[a, b, e], 3, 1e-8);
        assert_eq!(q.ncols(), 2);
        let g = q.adjoint() * &q;
        assert!((g - CMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn complement_is_orthogonal_and_completes() {
        let a = cv(&[(1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.0, 0.0)]);
        let q = orthonormalize(&[a], 4, 1e-8);
        let p = orthogonal_complement(&q);
        assert_eq!(p.ncols(), 3);
        assert!((q.adjoint() * &p).norm() < 1e-14);
        assert!((p.adjoint() * &p - CMatrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn min_norm_solution_of_underdetermined_system() {
        // x1 + x2 = 2 has minimum-norm solution (1, 1)
        let a = CMatrix::from_row_slice(1, 2, &[c(1.0), c(1.0)]);
        let b = cv(&[(2.0, 0.0)]);
        let (x, res) = lstsq_min_norm(&a, &b, 1e-12);
        assert!((x - cv(&[(1.0, 0.0), (1.0, 0.0)])).norm() < 1e-14);
        assert!(res < 1e-14);
    }

    #[test]
    fn op_norm_of_diagonal() {
        let m = CMatrix::from_diagonal(&cv(&[(0.5, 0.0), (0.0, -2.0)]));
        assert!((op_norm(&m) - 2.0).abs() < 1e-14);
        assert_eq!(rank(&m, 1e-8), 2);
    }

    #[test]
    fn least_squares_matches_gram_schmidt_projection() {
        // Wide, complex, rank 3: the residual must equal the distance from b to
        // the column span, which Gram–Schmidt computes independently.
        let mut rng = crate::sampling::seeded(3);
        let left = crate::sampling::random_matrix(&mut rng, 6, 3);
        let right = crate::sampling::random_matrix(&mut rng, 3, 40);
        let a = &left * &right;
        let b = crate::sampling::random_vector(&mut rng, 6);
        let cols: Vec<CVector> = a.column_iter().map(|col| col.into_owned()).collect();
        let q = orthonormalize(&cols, 6, 1e-8);
        assert_eq!(q.ncols(), 3);
        let oracle = (&b - &q * (q.adjoint() * &b)).norm();
        let ls = LeastSquares::new(a.clone(), 1e-11);
        assert_eq!(ls.rank(), 3);
        let (x, res) = ls.solve(&b);
        assert!((res - oracle).abs() < 1e-12, "{res} vs {oracle}");
        // Minimum norm: x lies in the row space of a.
        let row_q = orthonormalize(&a.adjoint().column_iter().map(|c| c.into_owned()).collect::<Vec<_>>(), 40, 1e-8);
        assert!((&x - &row_q * (row_q.adjoint() * &x)).norm() < 1e-12 * x.norm());
    }

    #[test]
    fn singular_values_of_rotated_diagonal() {
        let mut rng = crate::sampling::seeded(5);
        let u = crate::sampling::random_unitary(&mut rng, 3);
        let v = crate::sampling::random_unitary(&mut rng, 3);
        let m = &u * CMatrix::from_diagonal(&cv(&[(3.0, 0.0), (1.0, 0.0), (0.0, 0.0)])) * v.adjoint();
        let sv = singular_values(&m);
        assert_eq!(sv.len(), 3);
        assert!((sv[0] - 3.0).abs() < 1e-13 && (sv[1] - 1.0).abs() < 1e-13 && sv[2].abs() < 1e-13);
        assert_eq!(rank(&m, 1e-8), 2);
    }
}
