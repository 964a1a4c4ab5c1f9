use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Least-squares fit of `y` on the columns of a design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub rss: f64,
    /// `rss / (n - k)`.
    pub sigma2: f64,
}

/// A column whose QR diagonal falls below this fraction of its own norm is
/// treated as a linear combination of the columns before it.
pub const RANK_TOL: f64 = 1e-10;

/// OLS through a Householder QR of the `[n × k]` design.
pub fn ols(design: &Tensor, y: &[f64]) -> Result<OlsFit> {
    if design.ndim() != 2 {
        return Err(Error::shape("ols", design.shape(), &[y.len(), 0]));
    }
    let (n, k) = (design.rows(), design.cols());
    if y.len() != n {
        return Err(Error::shape("ols", design.shape(), &[y.len()]));
    }
    if n <= k {
        return Err(Error::TooShort { needed: k, got: n });
    }
    let x = DMatrix::from_row_slice(n, k, design.data());
    ols_matrix(&x, &DVector::from_column_slice(y))
}

pub(crate) fn ols_matrix(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let (n, k) = x.shape();
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..k {
        let norm = x.column(j).norm();
        if norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * norm {
            return Err(Error::SingularDesign { column: j });
        }
    }
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::SingularDesign { column: k - 1 })?;
    let residuals = y - x * &beta;
    let rss = residuals.norm_squared();
    let sigma2 = rss / (n - k) as f64;
    // diag((XᵀX)⁻¹) = row norms² of R⁻¹.
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or(Error::SingularDesign { column: k - 1 })?;
    let standard_errors = (0..k)
        .map(|i| (sigma2 * r_inv.row(i).norm_squared()).sqrt())
        .collect();
    Ok(OlsFit {
        coefficients: beta.iter().copied().collect(),
        residuals: residuals.iter().copied().collect(),
        standard_errors,
        rss,
        sigma2,
    })
}
