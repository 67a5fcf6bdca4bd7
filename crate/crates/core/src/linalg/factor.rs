//! Direct-solver dispatch: dense factorizations below a size threshold,
//! banded factorizations above it.

use crate::error::{Error, Result};
use crate::linalg::band::{BandCholesky, BandLu};
use crate::linalg::sparse::Csr;
use nalgebra::{DMatrix, DVector};

/// Largest block factorized densely; larger blocks use band storage.
pub const DENSE_LIMIT: usize = 200;

/// Structural promise about the block being factorized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FactorKind {
    /// Symmetric positive definite: Cholesky.
    Spd,
    /// General square: LU with partial pivoting.
    General,
}

enum Storage {
    DenseChol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    DenseLu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    BandChol(BandCholesky),
    BandLu(BandLu),
}

/// A factorized subblock of a sparse matrix, tagged with the dof subset it
/// was extracted from.
pub struct Factorization {
    /// Original indices of the block's rows/columns.
    pub dofs: Vec<usize>,
    pub kind: FactorKind,
    storage: Storage,
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.dofs.len()
    }

    /// Solves the factorized block for a right-hand side given in block-local
    /// ordering.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.dim());
        match &self.storage {
            Storage::DenseChol(c) => {
                let mut b = DVector::from_column_slice(rhs);
                c.solve_mut(&mut b);
                b.data.into()
            }
            Storage::DenseLu(lu) => {
                let b = DVector::from_column_slice(rhs);
                let x = lu.solve(&b).expect("regularity checked at factor time");
                x.data.into()
            }
            Storage::BandChol(c) => c.solve(rhs),
            Storage::BandLu(lu) => lu.solve(rhs),
        }
    }
}

/// Factorizes `matrix[dofs, dofs]`. Dense below [`DENSE_LIMIT`] unknowns,
/// banded above. `label` names the block in error messages.
pub fn factorize(matrix: &Csr, dofs: &[usize], kind: FactorKind, label: &str) -> Result<Factorization> {
    let sub = matrix.submatrix(dofs, dofs);
    factorize_block(sub, dofs.to_vec(), kind, label)
}

/// Factorizes an already-extracted square block.
pub fn factorize_block(
    block: Csr,
    dofs: Vec<usize>,
    kind: FactorKind,
    label: &str,
) -> Result<Factorization> {
    assert_eq!(block.nrows, dofs.len());
    assert_eq!(block.ncols, dofs.len());
    if dofs.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{label}: cannot factorize an empty block"
        )));
    }
    let n = dofs.len();
    let storage = if n <= DENSE_LIMIT {
        let dense = block.to_dense();
        match kind {
            FactorKind::Spd => {
                let chol = nalgebra::Cholesky::new(dense).ok_or_else(|| {
                    Error::FactorizationFailure(format!("{label}: block is not positive definite"))
                })?;
                Storage::DenseChol(chol)
            }
            FactorKind::General => {
                let lu = dense.lu();
                let min_pivot = (0..n)
                    .map(|i| lu.u()[(i, i)].abs())
                    .fold(f64::INFINITY, f64::min);
                if min_pivot == 0.0 || !min_pivot.is_finite() {
                    return Err(Error::FactorizationFailure(format!(
                        "{label}: block is singular"
                    )));
                }
                Storage::DenseLu(lu)
            }
        }
    } else {
        match kind {
            FactorKind::Spd => Storage::BandChol(BandCholesky::from_csr(&block, label)?),
            FactorKind::General => Storage::BandLu(BandLu::from_csr(&block, label)?),
        }
    };
    Ok(Factorization {
        dofs,
        kind,
        storage,
    })
}

/// Materializes a linear operator as a dense matrix by applying it to basis
/// vectors. Guarded: meant for small verification problems only.
pub fn dense_operator_matrix<F>(op: F, dim: usize) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    const DENSE_OPERATOR_LIMIT: usize = 5000;
    if dim > DENSE_OPERATOR_LIMIT {
        return Err(Error::SizeGuard(format!(
            "dense operator of dimension {dim} exceeds the limit {DENSE_OPERATOR_LIMIT}"
        )));
    }
    let mut m = DMatrix::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    for j in 0..dim {
        e[j] = 1.0;
        let col = op(&e);
        assert_eq!(col.len(), dim);
        for i in 0..dim {
            m[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    Ok(m)
}
