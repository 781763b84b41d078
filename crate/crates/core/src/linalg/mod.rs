//! Dense symmetric linear algebra: eigendecomposition, SPD square roots,
//! one-sided Jacobi SVD, Cholesky and LU factorisations.

mod decomp;
mod eigen;
mod matrix;

pub use decomp::{
    cholesky, column_svd, gram_sqrt_pair, inverse, spd_inv_sqrt, spd_sqrt, spd_sqrt_pair,
    spectral_norm, Cholesky, ColumnSvd, Lu, JITTER_LADDER, PD_THRESHOLD, SVD_MAX_SWEEPS,
};
pub use eigen::{sym_eigen, EigenPair, DEGENERACY_GAP, JACOBI_MAX_ORDER};
pub use matrix::{Matrix, SymMatrix};
pub(crate) use matrix::dot;
