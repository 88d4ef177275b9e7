//! Dense complex linear algebra over an `H`-weighted inner product.
//!
//! The weighted product is `<x, y>_H = x* H y` for a Hermitian positive
//! definite `H`. Every weighted question (adjoints, Loewner comparisons,
//! operator norms) is reduced to the standard one by conjugating with the
//! principal square root `S = H^{1/2}`: an operator `A` on the weighted space
//! corresponds to `S A S^{-1}` on the standard one, and that map is an
//! isometry of Hilbert spaces.

mod expm;

pub use expm::{expm, propagator, EXPM_RANGE};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Relative tolerance for Hermiticity and Loewner comparisons, applied as
/// `LOEWNER_RTOL * ||M||`.
pub const LOEWNER_RTOL: f64 = 1e-10;

const EIG_MAX_ITER: usize = 10_000;

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Build a complex matrix from real row-major entries.
pub fn real_matrix(rows: usize, cols: usize, entries: &[f64]) -> CMatrix {
    assert_eq!(entries.len(), rows * cols, "entry count does not match shape");
    CMatrix::from_row_iterator(rows, cols, entries.iter().map(|&x| c64(x, 0.0)))
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Maximum absolute column sum.
pub fn norm_one(a: &CMatrix) -> f64 {
    a.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest singular value.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().max()
}

/// Singular values in descending order.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

fn hermitian_residual(m: &CMatrix) -> f64 {
    (m - m.adjoint()).norm()
}

fn check_square(a: &CMatrix, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Eigen-decomposition of a Hermitian matrix in the standard inner product.
///
/// Eigenvalues come back ascending, eigenvectors as matching columns.
pub fn eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    check_square(m, "Hermitian matrix")?;
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let scale = m.norm();
    let residual = hermitian_residual(m);
    let tol = LOEWNER_RTOL * scale;
    if residual > tol {
        return Err(Error::NotHermitian { residual, tol });
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIG_MAX_ITER)
        .ok_or_else(|| Error::Numerical("Hermitian eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Principal square root of a Hermitian positive semidefinite matrix.
///
/// Eigenvalues within rounding of zero are clamped to zero.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = eigh(m)?;
    let roots = DVector::from_iterator(
        values.len(),
        values.iter().map(|&l| c64(l.max(0.0).sqrt(), 0.0)),
    );
    Ok(&vectors * CMatrix::from_diagonal(&roots) * vectors.adjoint())
}

/// Positive definite inner-product weight `H` with cached `H^{1/2}` and
/// `H^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    h: CMatrix,
    sqrt_h: CMatrix,
    inv_sqrt_h: CMatrix,
    is_identity: bool,
}

impl Weight {
    pub fn identity(n: usize) -> Self {
        Self {
            h: identity(n),
            sqrt_h: identity(n),
            inv_sqrt_h: identity(n),
            is_identity: true,
        }
    }

    pub fn new(h: CMatrix) -> Result<Self> {
        check_square(&h, "weight")?;
        let n = h.nrows();
        if h == identity(n) {
            return Ok(Self::identity(n));
        }
        let (values, vectors) = eigh(&h)?;
        let lambda_min = values.first().copied().unwrap_or(1.0);
        if lambda_min <= 0.0 || lambda_min <= LOEWNER_RTOL * values.last().copied().unwrap_or(0.0)
        {
            return Err(Error::NotPositiveDefinite(lambda_min));
        }
        let diag = |f: fn(f64) -> f64| {
            CMatrix::from_diagonal(&DVector::from_iterator(
                n,
                values.iter().map(|&l| c64(f(l), 0.0)),
            ))
        };
        let sqrt_h = &vectors * diag(f64::sqrt) * vectors.adjoint();
        let inv_sqrt_h = &vectors * diag(|l| 1.0 / l.sqrt()) * vectors.adjoint();
        let h = (&h + h.adjoint()).scale(0.5);
        Ok(Self {
            h,
            sqrt_h,
            inv_sqrt_h,
            is_identity: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.h
    }

    pub fn sqrt(&self) -> &CMatrix {
        &self.sqrt_h
    }

    pub fn inv_sqrt(&self) -> &CMatrix {
        &self.inv_sqrt_h
    }

    pub fn is_identity(&self) -> bool {
        self.is_identity
    }

    fn check_dim(&self, a: &CMatrix) -> Result<()> {
        let n = self.dim();
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::Dimension(format!(
                "expected {n}x{n} matrix for this weight, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(())
    }

    /// `S A S^{-1}`: the operator seen in standard coordinates.
    pub fn to_standard(&self, a: &CMatrix) -> CMatrix {
        if self.is_identity {
            a.clone()
        } else {
            &self.sqrt_h * a * &self.inv_sqrt_h
        }
    }

    /// Inverse of [`Weight::to_standard`].
    pub fn from_standard(&self, a: &CMatrix) -> CMatrix {
        if self.is_identity {
            a.clone()
        } else {
            &self.inv_sqrt_h * a * &self.sqrt_h
        }
    }

    /// Weighted adjoint `H^{-1} A* H`.
    pub fn adjoint(&self, a: &CMatrix) -> CMatrix {
        if self.is_identity {
            a.adjoint()
        } else {
            &self.inv_sqrt_h * &self.inv_sqrt_h * a.adjoint() * &self.h
        }
    }

    pub fn inner(&self, x: &CVector, y: &CVector) -> Complex64 {
        if self.is_identity {
            x.dotc(y)
        } else {
            x.dotc(&(&self.h * y))
        }
    }

    pub fn vector_norm(&self, x: &CVector) -> f64 {
        self.inner(x, x).re.max(0.0).sqrt()
    }

    /// Operator norm induced by the weighted vector norm.
    pub fn operator_norm(&self, a: &CMatrix) -> Result<f64> {
        self.check_dim(a)?;
        Ok(spectral_norm(&self.to_standard(a)))
    }

    /// Eigenpairs of a weighted-Hermitian `M`; eigenvectors are
    /// `H`-orthonormal columns.
    pub fn hermitian_eig(&self, m: &CMatrix) -> Result<HermitianEig> {
        self.check_dim(m)?;
        let (values, vectors) = eigh(&self.to_standard(m))?;
        let vectors = if self.is_identity {
            vectors
        } else {
            &self.inv_sqrt_h * vectors
        };
        Ok(HermitianEig { values, vectors })
    }

    /// Smallest eigenvalue of a weighted-Hermitian matrix; the largest
    /// `kappa` with `M >= kappa 1` in the weighted Loewner order.
    pub fn lambda_min(&self, m: &CMatrix) -> Result<f64> {
        self.check_dim(m)?;
        let (values, _) = eigh(&self.to_standard(m))?;
        Ok(values.first().copied().unwrap_or(0.0))
    }

    /// Principal square root of a weighted-Hermitian PSD operator, taken in
    /// the weighted sense.
    pub fn psd_sqrt(&self, m: &CMatrix) -> Result<CMatrix> {
        self.check_dim(m)?;
        Ok(self.from_standard(&psd_sqrt(&self.to_standard(m))?))
    }
}

#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

pub fn weighted_operator_norm(a: &CMatrix, weight: &Weight) -> Result<f64> {
    weight.operator_norm(a)
}

pub fn hermitian_eig(m: &CMatrix, weight: &Weight) -> Result<HermitianEig> {
    weight.hermitian_eig(m)
}

/// A square matrix on the weighted space with its skew-Hermitian and
/// Hermitian parts (both taken with respect to the weighted adjoint).
#[derive(Debug, Clone)]
pub struct WeightedOperator {
    c: CMatrix,
    weight: Weight,
    skew: CMatrix,
    herm: CMatrix,
    herm_lambda_min: f64,
    norm: f64,
}

/// Split `C` into `C_S = (C - C^+)/2` and `C_H = (C + C^+)/2` where `^+` is
/// the weighted adjoint.
pub fn split(c: &CMatrix, weight: &Weight) -> Result<WeightedOperator> {
    check_square(c, "operator")?;
    weight.check_dim(c)?;
    let adj = weight.adjoint(c);
    let skew = (c - &adj).scale(0.5);
    let herm = (c + &adj).scale(0.5);
    WeightedOperator::assemble(c.clone(), skew, herm, weight.clone())
}

impl WeightedOperator {
    /// Assemble from explicit parts. The parts are projected onto the exact
    /// skew/Hermitian structure after checking they are within tolerance of it.
    pub fn from_parts(skew: CMatrix, herm: CMatrix, weight: Weight) -> Result<Self> {
        weight.check_dim(&skew)?;
        weight.check_dim(&herm)?;
        let scale = skew.norm() + herm.norm();
        let tol = LOEWNER_RTOL * scale.max(f64::MIN_POSITIVE);
        let skew_res = (&weight.adjoint(&skew) + &skew).norm();
        if skew_res > tol {
            return Err(Error::InvalidArgument(format!(
                "skew part violates C_S^+ = -C_S by {skew_res:e}"
            )));
        }
        let herm_res = (&weight.adjoint(&herm) - &herm).norm();
        if herm_res > tol {
            return Err(Error::NotHermitian {
                residual: herm_res,
                tol,
            });
        }
        let skew = (&skew - weight.adjoint(&skew)).scale(0.5);
        let herm = (&herm + weight.adjoint(&herm)).scale(0.5);
        let c = &skew + &herm;
        Self::assemble(c, skew, herm, weight)
    }

    fn assemble(c: CMatrix, skew: CMatrix, herm: CMatrix, weight: Weight) -> Result<Self> {
        let herm_lambda_min = weight.lambda_min(&herm)?;
        let norm = weight.operator_norm(&c)?;
        Ok(Self {
            c,
            weight,
            skew,
            herm,
            herm_lambda_min,
            norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.c
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    /// `C_S`
    pub fn skew(&self) -> &CMatrix {
        &self.skew
    }

    /// `C_H`
    pub fn herm(&self) -> &CMatrix {
        &self.herm
    }

    /// Weighted operator norm of `C`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn herm_lambda_min(&self) -> f64 {
        self.herm_lambda_min
    }

    pub fn accretivity_tol(&self) -> f64 {
        LOEWNER_RTOL * self.norm
    }

    pub fn is_accretive(&self) -> bool {
        self.herm_lambda_min >= -self.accretivity_tol()
    }

    pub fn ensure_accretive(&self) -> Result<()> {
        if self.is_accretive() {
            Ok(())
        } else {
            Err(Error::NotAccretive {
                lambda_min: self.herm_lambda_min,
                tol: self.accretivity_tol(),
            })
        }
    }

    /// `C_eta = eta C_S + C_H`
    pub fn mode(&self, eta: f64) -> CMatrix {
        self.skew.scale(eta) + &self.herm
    }

    /// `L = ||C_H|| + ||C_S||`, so that `||C_eta|| <= L |eta|` for `|eta| >= 1`.
    pub fn norm_bound(&self) -> f64 {
        let w = &self.weight;
        spectral_norm(&w.to_standard(&self.herm)) + spectral_norm(&w.to_standard(&self.skew))
    }

    /// `(C_S, C_H)` conjugated to standard coordinates, with the exact
    /// skew-Hermitian / Hermitian structure restored.
    pub fn standard_parts(&self) -> (CMatrix, CMatrix) {
        let s = self.weight.to_standard(&self.skew);
        let h = self.weight.to_standard(&self.herm);
        ((&s - s.adjoint()).scale(0.5), (&h + h.adjoint()).scale(0.5))
    }
}
