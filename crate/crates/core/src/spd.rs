//! Symmetric positive definite matrices with a cached Cholesky factor.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;

/// A validated symmetric positive definite matrix. Positive definiteness is
/// established by a successful Cholesky factorization, whose lower factor is
/// kept for density evaluation and sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    m: DMatrix<f64>,
    l: DMatrix<f64>,
}

impl SpdMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidParameter(format!(
                "expected a nonempty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "matrix not symmetric at ({i},{j}): {} vs {}",
                        m[(i, j)],
                        m[(j, i)]
                    )));
                }
            }
        }
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
        }
        let chol = nalgebra::Cholesky::new(m.clone())
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?;
        Ok(Self {
            l: chol.l(),
            m,
        })
    }

    /// Symmetrize `(m + m^T)/2` first; for matrices assembled from products
    /// that are symmetric only up to floating point error.
    pub fn from_nearly_symmetric(m: DMatrix<f64>) -> Result<Self> {
        let sym = (&m + m.transpose()) * 0.5;
        Self::new(sym)
    }

    pub fn identity(r: usize) -> Self {
        Self::new(DMatrix::identity(r, r)).expect("identity is SPD")
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    pub fn scaled_identity(r: usize, s: f64) -> Result<Self> {
        Self::new(DMatrix::identity(r, r) * s)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Lower Cholesky factor L with m = L L^T.
    pub fn chol_lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> Result<SpdMatrix> {
        let inv = nalgebra::Cholesky::new(self.m.clone())
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?
            .inverse();
        SpdMatrix::from_nearly_symmetric(inv)
    }

    /// Solve L x = v.
    pub fn solve_lower(&self, v: &DVector<f64>) -> DVector<f64> {
        self.l.solve_lower_triangular(v).expect("L has positive diagonal")
    }

    /// Quadratic form v^T m^{-1} v.
    pub fn inv_quadratic(&self, v: &DVector<f64>) -> f64 {
        self.solve_lower(v).norm_squared()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_asymmetry() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5 + 1e-6, 1.0]);
        assert!(matches!(SpdMatrix::new(m), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(SpdMatrix::new(m), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn log_det_and_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let spd = SpdMatrix::new(m).unwrap();
        assert!((spd.log_det() - 3.0f64.ln()).abs() < 1e-12);
        let inv = spd.inverse().unwrap();
        let prod = spd.matrix() * inv.matrix();
        assert!((prod - DMatrix::identity(2, 2)).amax() < 1e-12);
    }
}
