//! Default decision thresholds.

/// `idft(dft(f)) = f`, relative.
pub const ROUNDTRIP: f64 = 1e-13;
/// Orthonormality of stored bases (Gram matrix vs identity).
pub const ORTHONORMALITY: f64 = 1e-10;
/// Unitarity / identity residuals of operator matrices and containment in a
/// model space.
pub const IDENTITY: f64 = 1e-9;
/// Rank decisions: Gram–Schmidt drop threshold and generator ranks.
pub const RANK: f64 = 1e-8;
/// Operator identities: intertwinings, branch formulas, shift invariance.
pub const RELATION: f64 = 1e-8;
/// Shift-invariance residual a certified non-member must exceed.
pub const NEGATIVE_CONTROL: f64 = 1e-6;
/// Largest negative-frequency norm, relative to the total, still treated as `H²`.
pub const H2_MEMBERSHIP: f64 = 1e-10;
