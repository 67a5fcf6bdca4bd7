//! Sparse and banded linear algebra: CSR matrices, direct factorizations and
//! GMRES over arbitrary inner products.

pub mod band;
pub mod factor;
pub mod gmres;
pub mod sparse;

pub use band::{BandCholesky, BandLu};
pub use factor::{dense_operator_matrix, factorize, factorize_block, FactorKind, Factorization, DENSE_LIMIT};
pub use gmres::{
    estimate_convergence_bounds, gmres, EnergyInner, EuclideanInner, InnerProduct, KrylovTrace,
    BREAKDOWN_TOL,
};
pub use sparse::Csr;

/// Euclidean dot product.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// In-place `y += alpha * x`.
pub fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
