//! Matrix-valued truncated Toeplitz operators on vector-valued model spaces.
//!
//! Functions on the unit circle are stored as samples on a uniform grid and
//! moved to Fourier coefficients by FFT. Inner functions are built from finite
//! Potapov products, and every operator on a model space `K_Θ` is represented
//! by its matrix in an orthonormal basis of that space.

pub mod circle;
pub mod error;
pub mod inner;
pub mod linalg;
pub mod model;
pub mod mtto;
pub mod sampling;
pub mod serde_complex;
pub mod tol;

pub use circle::{dft, flip, idft, inner_product, CircleGrid, FourierRep, GridFunction, Shape};
pub use error::{Error, Result};
pub use inner::{eval_inner, make_inner, tilde, GridChoice, InnerFunction, InnerFunctionSpec, PotapovFactor};
pub use linalg::{CMatrix, CVector};
pub use model::{build_basis, compressed_shift, defect_subspaces, project_model, tau_matrix, ModelPair, ModelSpaceBasis, OperatorMatrix};
pub use mtto::{
    analyze, conjugate_by_tau, mtto_matrix, quadratic_form, recover_symbol, shift_invariance_residual, verify_spatial_isomorphism, MttoReport,
    SpatialIsomorphismReport, SymbolSpec,
};
pub use num_complex::Complex64;
