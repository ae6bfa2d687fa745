//! Small complex linear-algebra helpers shared by the radar, gradient and
//! optimizer modules. Everything is dense and sized for antenna-count-scale
//! matrices.

use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

/// Hermitian positive-definite factorization bundle.
///
/// Wraps a Cholesky factor and exposes the quantities the KLD formulas need
/// (log-determinant, trace of the inverse, full inverse) without refactoring.
pub struct HermitianPd {
    chol: Cholesky<Complex64, Dyn>,
}

impl HermitianPd {
    /// Factor a Hermitian PD matrix. Returns `None` when the matrix is not
    /// numerically positive definite or its diagonal conditioning exceeds
    /// ~1e14.
    pub fn new(m: CMat) -> Option<Self> {
        let chol = Cholesky::new(m)?;
        let diag = chol.l_dirty().diagonal();
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for d in diag.iter() {
            let v = d.re;
            if !v.is_finite() || v <= 0.0 {
                return None;
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi / lo > 1e14 {
            return None;
        }
        Some(Self { chol })
    }

    pub fn ln_det(&self) -> f64 {
        self.chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| 2.0 * d.re.ln())
            .sum()
    }

    pub fn inverse(&self) -> CMat {
        self.chol.inverse()
    }

    pub fn trace_inverse(&self) -> f64 {
        self.inverse().diagonal().iter().map(|d| d.re).sum()
    }
}

/// Moore-Penrose pseudo-inverse of a Hermitian PSD matrix via its
/// eigendecomposition, with a relative rank cutoff.
pub fn pinv_hermitian_psd(m: &CMat, rel_tol: f64) -> CMat {
    let n = m.nrows();
    let eig = m.clone().symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let cutoff = rel_tol * max_ev.max(f64::MIN_POSITIVE);
    let mut out = CMat::zeros(n, n);
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > cutoff {
            let v = eig.eigenvectors.column(i);
            out += (&v * v.adjoint()).scale(1.0 / ev);
        }
    }
    out
}

/// Squared Frobenius norm of a complex matrix.
pub fn fro_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Squared Frobenius norm of a stack of matrices (tensor slices).
pub fn fro_sq_stack(ms: &[CMat]) -> f64 {
    ms.iter().map(fro_sq).sum()
}

/// Real inner product Re tr(A^H B); the ascent-direction pairing used by the
/// line searches.
pub fn inner_re(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Tuple form of [`inner_re`] for zipped iterators over matrix stacks.
pub fn inner_re_pair((a, b): (&CMat, &CMat)) -> f64 {
    inner_re(a, b)
}

/// Worst-case relative Hermitian residual max |M - M^H| / max |M|.
pub fn hermitian_residual(m: &CMat) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(f64::MIN_POSITIVE, f64::max);
    let adj = m.adjoint();
    m.iter()
        .zip(adj.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0_f64, f64::max)
        / scale
}

/// Force exact Hermitian symmetry: (M + M^H)/2.
pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn cholesky_quantities_match_direct_computation() {
        // [[2, i], [-i, 3]] is Hermitian PD with det = 5.
        let m = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(3.0, 0.0)]);
        let pd = HermitianPd::new(m.clone()).unwrap();
        assert!((pd.ln_det() - 5.0_f64.ln()).abs() < 1e-12);
        let inv = pd.inverse();
        let id = &m * &inv;
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - c(want, 0.0)).norm() < 1e-12);
            }
        }
        assert!((pd.trace_inverse() - (3.0 / 5.0 + 2.0 / 5.0)).abs() < 1e-12);
    }

    #[test]
    fn non_pd_is_rejected() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 2.0), c(0.0, -2.0), c(1.0, 0.0)]);
        assert!(HermitianPd::new(m).is_none());
    }

    #[test]
    fn pinv_of_rank_one_matrix() {
        let v = nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 2.0)]);
        let m: CMat = &v * v.adjoint(); // rank 1, eigenvalue 5
        let p = pinv_hermitian_psd(&m, 1e-10);
        // pinv = v v^H / |v|^4
        let expect = (&v * v.adjoint()).scale(1.0 / 25.0);
        assert!((&p - &expect).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
        // Moore-Penrose identity on the range
        let mpm = &m * &p * &m;
        assert!((&mpm - &m).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
    }
}
