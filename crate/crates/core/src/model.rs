//! Model spaces `K_Θ = H²(E) ⊖ ΘH²(E)`, the compressed shift, the defect
//! subspaces and the unitary `τ: K_Θ → K_Θ̃`.
//!
//! The projection onto `K_Θ` is realized as `P_Θ = P_+ − Θ P_+ Θ*`, which
//! uses only that `Θ` is unitary on the circle. Operators are represented by
//! their matrices in deterministic orthonormal bases, so that matrix entries
//! are reproducible for a fixed grid.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circle::{analytic_project, dft, flip, idft, inner_product, negative_part_norm, GridFunction, Shape};
use crate::error::{Error, Result};
use crate::inner::{tilde, InnerFunction};
use crate::linalg::{c, op_norm, orthogonal_complement, orthonormalize, unitarity_residual, CMatrix, CVector};
use crate::sampling::{random_trig_function, seeded};
use crate::serde_complex;
use crate::tol;

/// Orthogonal projection of `L²(E)` onto `K_Θ`.
pub fn project_l2(theta: &InnerFunction, f: &GridFunction) -> Result<GridFunction> {
    check_vector(theta, f)?;
    let positive = analytic_project(f);
    let pulled = analytic_project(&theta.samples().apply_adjoint(f)?);
    positive.sub(&theta.samples().apply(&pulled)?)
}

/// `P_Θ f` for `f ∈ H²(E)`.
pub fn project_model(theta: &InnerFunction, f: &GridFunction) -> Result<GridFunction> {
    check_vector(theta, f)?;
    let total = f.norm();
    let negative = negative_part_norm(f);
    if negative > tol::H2_MEMBERSHIP * total {
        return Err(Error::Domain { negative, total });
    }
    project_l2(theta, f)
}

fn check_vector(theta: &InnerFunction, f: &GridFunction) -> Result<()> {
    if f.grid() != theta.grid() {
        return Err(Error::Grid(format!(
            "function grid M = {} vs inner function grid M = {}",
            f.grid().size(),
            theta.grid().size()
        )));
    }
    if f.shape() != Shape::Vector(theta.dim()) {
        return Err(Error::Shape(format!(
            "expected an E-valued function with d = {}, got {:?}",
            theta.dim(),
            f.shape()
        )));
    }
    Ok(())
}

fn unit(d: usize, i: usize) -> CVector {
    let mut v = CVector::zeros(d);
    v[i] = c(1.0);
    v
}

/// Orthonormal basis of `K_Θ` as grid functions.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpaceBasis {
    theta: InnerFunction,
    vectors: Vec<GridFunction>,
}

impl ModelSpaceBasis {
    pub fn theta(&self) -> &InnerFunction {
        &self.theta
    }

    pub fn vectors(&self) -> &[GridFunction] {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_pure(&self) -> bool {
        self.theta.is_pure()
    }

    /// Name of the space, `K_theta` or `K_theta_tilde`.
    pub fn label(&self) -> String {
        format!("K_{}", self.theta.label())
    }

    /// `(<f, e_i>)_i`.
    pub fn coefficients(&self, f: &GridFunction) -> Result<CVector> {
        let mut out = CVector::zeros(self.dim());
        for (i, e) in self.vectors.iter().enumerate() {
            out[i] = inner_product(f, e)?;
        }
        Ok(out)
    }

    /// `Σ_i c_i e_i`.
    pub fn synthesize(&self, coeffs: &CVector) -> GridFunction {
        let mut out = GridFunction::zeros(self.theta.grid(), Shape::Vector(self.theta.dim()));
        for (e, ci) in self.vectors.iter().zip(coeffs.iter()) {
            out.axpy_in_place(*ci, e);
        }
        out
    }

    /// `‖f − Σ <f, e_i> e_i‖`: distance from `f` to `K_Θ`.
    pub fn distance(&self, f: &GridFunction) -> Result<f64> {
        let back = self.synthesize(&self.coefficients(f)?);
        Ok(f.sub(&back)?.norm())
    }

    pub fn gram(&self) -> CMatrix {
        let n = self.dim();
        CMatrix::from_fn(n, n, |i, j| inner_product(&self.vectors[j], &self.vectors[i]).expect("same grid"))
    }

    /// `‖G − I‖` for the Gram matrix `G`.
    pub fn orthonormality_residual(&self) -> f64 {
        op_norm(&(self.gram() - CMatrix::identity(self.dim(), self.dim())))
    }

    /// `max_i ‖e_i − P_Θ e_i‖`.
    pub fn containment_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for e in &self.vectors {
            worst = worst.max(e.sub(&project_l2(&self.theta, e)?)?.norm());
        }
        Ok(worst)
    }
}

/// Basis from `P_Θ(z^k e_i)` in order of degree, then coordinate, run through
/// modified Gram–Schmidt (with re-orthogonalization) dropping residuals of norm
/// at most [`tol::RANK`].
///
/// Degrees `0..=⌈n/d⌉+2` are tried first. When the zeros of `Θ` concentrate
/// in few directions this can fall short of `n = dim K_Θ`, so degrees are
/// extended up to `n − 1`, which always suffices: no nonzero element of an
/// `n`-dimensional backward-shift invariant space vanishes to order `n` at 0.
pub fn build_basis(theta: &InnerFunction) -> Result<ModelSpaceBasis> {
    let d = theta.dim();
    let expected = theta.expected_dim();
    let spec_degree = expected.div_ceil(d) + 2;
    let grid = theta.grid();
    let mut vectors: Vec<GridFunction> = Vec::with_capacity(expected);
    let mut k = 0usize;
    while k <= spec_degree || (vectors.len() < expected && k < expected) {
        for i in 0..d {
            let candidate = project_l2(theta, &GridFunction::monomial(grid, k as i64, &unit(d, i)))?;
            let mut w = candidate;
            for _ in 0..2 {
                for q in &vectors {
                    let proj = inner_product(&w, q)?;
                    w.axpy_in_place(-proj, q);
                }
            }
            let r = w.norm();
            if r > tol::RANK {
                vectors.push(w.scale(c(1.0 / r)));
            }
        }
        k += 1;
    }
    if vectors.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: vectors.len(),
        });
    }
    Ok(ModelSpaceBasis {
        theta: theta.clone(),
        vectors,
    })
}

/// Dense matrix of an operator between two model spaces in their stored
/// orthonormal bases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorMatrix {
    pub label: String,
    pub row_space: String,
    pub col_space: String,
    #[serde(with = "serde_complex::matrix")]
    pub entries: CMatrix,
}

impl OperatorMatrix {
    pub fn new(label: impl Into<String>, row_space: impl Into<String>, col_space: impl Into<String>, entries: CMatrix) -> Self {
        Self {
            label: label.into(),
            row_space: row_space.into(),
            col_space: col_space.into(),
            entries,
        }
    }

    /// Operator on a single space.
    pub fn on(space: &ModelSpaceBasis, label: impl Into<String>, entries: CMatrix) -> Self {
        Self::new(label, space.label(), space.label(), entries)
    }

    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            label: format!("{}*", self.label),
            row_space: self.col_space.clone(),
            col_space: self.row_space.clone(),
            entries: self.entries.adjoint(),
        }
    }

    pub fn norm(&self) -> f64 {
        op_norm(&self.entries)
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Matrix of `S_Θ f = P_Θ(z f)`: entry `(i, j) = <P_Θ(z e_j), e_i>`.
pub fn compressed_shift(basis: &ModelSpaceBasis) -> Result<OperatorMatrix> {
    let n = basis.dim();
    let mut m = CMatrix::zeros(n, n);
    for (j, e) in basis.vectors.iter().enumerate() {
        let image = project_l2(&basis.theta, &e.mul_z_power(1))?;
        m.set_column(j, &basis.coefficients(&image)?);
    }
    Ok(OperatorMatrix::on(basis, "S", m))
}

/// Backward shift `(f − f(0))/z`, computed on Fourier coefficients.
pub fn backward_shift(f: &GridFunction) -> GridFunction {
    let mut rep = dft(f);
    for comp in 0..f.shape().components() {
        rep.set(comp, 0, c(0.0));
    }
    idft(&rep.shift_down())
}

/// Matrix of `S_Θ* = S*|_{K_Θ}`, computed directly from the backward shift
/// rather than by transposing [`compressed_shift`].
pub fn compressed_shift_adjoint(basis: &ModelSpaceBasis) -> Result<OperatorMatrix> {
    let n = basis.dim();
    let mut m = CMatrix::zeros(n, n);
    for (j, e) in basis.vectors.iter().enumerate() {
        m.set_column(j, &basis.coefficients(&backward_shift(e))?);
    }
    Ok(OperatorMatrix::on(basis, "S*", m))
}

/// Subspace of a model space, as orthonormal coefficient columns in the
/// parent's basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    pub label: String,
    pub parent: String,
    #[serde(with = "serde_complex::matrix")]
    pub basis: CMatrix,
}

impl Subspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn parent_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthogonal projector in coefficient space.
    pub fn projector(&self) -> CMatrix {
        &self.basis * self.basis.adjoint()
    }

    /// Orthogonal complement inside the parent space.
    pub fn complement(&self, label: impl Into<String>) -> Subspace {
        Subspace {
            label: label.into(),
            parent: self.parent.clone(),
            basis: orthogonal_complement(&self.basis),
        }
    }

    pub fn orthonormality_residual(&self) -> f64 {
        op_norm(&(self.basis.adjoint() * &self.basis - CMatrix::identity(self.dim(), self.dim())))
    }
}

/// Outcome of the `dim D = dim D* = d` check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaCheck {
    Passed,
    Failed,
    /// `Θ` is not pure; only the numerical ranks are reported.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectSubspaces {
    pub d: Subspace,
    pub d_star: Subspace,
    pub lemma_dim_check: LemmaCheck,
    /// Largest distance from a generator to the model space.
    pub containment_residual: f64,
}

/// `(I − Θ(z)Θ(0)*) x`.
pub fn defect_generator(theta: &InnerFunction, x: &CVector) -> Result<GridFunction> {
    let grid = theta.grid();
    let y = theta.theta0().adjoint() * x;
    GridFunction::constant(grid, x).sub(&theta.samples().apply(&GridFunction::constant(grid, &y))?)
}

/// `(1/z)(Θ(z) − Θ(0)) x`, with the division done by shifting Fourier
/// coefficients down one place after clearing the constant term.
pub fn defect_generator_star(theta: &InnerFunction, x: &CVector) -> Result<GridFunction> {
    let g = theta.samples().apply(&GridFunction::constant(theta.grid(), x))?;
    Ok(backward_shift(&g))
}

/// The defect subspaces `D` and `D*` of `K_Θ`, generated by the standard basis
/// of `E`. Ranks are decided at [`tol::RANK`] relative to the largest generator.
pub fn defect_subspaces(basis: &ModelSpaceBasis) -> Result<DefectSubspaces> {
    let theta = &basis.theta;
    let d = theta.dim();
    let n = basis.dim();
    let mut containment: f64 = 0.0;
    let mut collect = |generate: &dyn Fn(&CVector) -> Result<GridFunction>| -> Result<CMatrix> {
        let mut coeffs = Vec::with_capacity(d);
        let mut largest: f64 = 0.0;
        for i in 0..d {
            let g = generate(&unit(d, i))?;
            let cf = basis.coefficients(&g)?;
            containment = containment.max(g.sub(&basis.synthesize(&cf))?.norm());
            largest = largest.max(g.norm());
            coeffs.push(cf);
        }
        Ok(orthonormalize(&coeffs, n, tol::RANK * largest))
    };
    let d_cols = collect(&|x| defect_generator(theta, x))?;
    let d_star_cols = collect(&|x| defect_generator_star(theta, x))?;
    let lemma_dim_check = if !theta.is_pure() {
        LemmaCheck::Skipped
    } else if d_cols.ncols() == d && d_star_cols.ncols() == d {
        LemmaCheck::Passed
    } else {
        LemmaCheck::Failed
    };
    let label = basis.label();
    let suffix = if theta.is_tilde() { "_tilde" } else { "" };
    Ok(DefectSubspaces {
        d: Subspace {
            label: format!("D{suffix}"),
            parent: label.clone(),
            basis: d_cols,
        },
        d_star: Subspace {
            label: format!("D{suffix}_star"),
            parent: label,
            basis: d_star_cols,
        },
        lemma_dim_check,
        containment_residual: containment,
    })
}

/// Residuals of the four piecewise formulas for `S_Θ*` and `S_Θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem4Report {
    /// `S*f = f/z` on `D⊥`.
    pub adjoint_on_d_perp: f64,
    /// `S*(I − ΘΘ(0)*)x = −(1/z)(Θ − Θ(0))Θ(0)*x`.
    pub adjoint_on_d: f64,
    /// `S f = z f` on `D*⊥`.
    pub shift_on_d_star_perp: f64,
    /// `S (1/z)(Θ − Θ(0))x = −(I − ΘΘ(0)*)Θ(0)x`.
    pub shift_on_d_star: f64,
    pub max: f64,
    pub pass: bool,
}

pub fn verify_theorem4(basis: &ModelSpaceBasis) -> Result<Theorem4Report> {
    let shift = compressed_shift(basis)?;
    let defects = defect_subspaces(basis)?;
    verify_theorem4_with(basis, &shift, &defects)
}

/// As [`verify_theorem4`], reusing a computed shift matrix and defect subspaces.
pub fn verify_theorem4_with(basis: &ModelSpaceBasis, shift: &OperatorMatrix, defects: &DefectSubspaces) -> Result<Theorem4Report> {
    let theta = &basis.theta;
    let d = theta.dim();
    let s = &shift.entries;
    let s_adj = s.adjoint();
    let t0 = theta.theta0();

    let mut adjoint_on_d_perp: f64 = 0.0;
    for col in defects.d.complement("D_perp").basis.column_iter() {
        let col = col.into_owned();
        let lhs = basis.synthesize(&(&s_adj * &col));
        let rhs = basis.synthesize(&col).mul_z_power(-1);
        adjoint_on_d_perp = adjoint_on_d_perp.max(lhs.sub(&rhs)?.norm());
    }

    let mut shift_on_d_star_perp: f64 = 0.0;
    for col in defects.d_star.complement("D_star_perp").basis.column_iter() {
        let col = col.into_owned();
        let lhs = basis.synthesize(&(s * &col));
        let rhs = basis.synthesize(&col).mul_z_power(1);
        shift_on_d_star_perp = shift_on_d_star_perp.max(lhs.sub(&rhs)?.norm());
    }

    let mut adjoint_on_d: f64 = 0.0;
    let mut shift_on_d_star: f64 = 0.0;
    for i in 0..d {
        let x = unit(d, i);
        let f = defect_generator(theta, &x)?;
        let lhs = basis.synthesize(&(&s_adj * basis.coefficients(&f)?));
        let rhs = defect_generator_star(theta, &(t0.adjoint() * &x))?.scale(c(-1.0));
        adjoint_on_d = adjoint_on_d.max(lhs.sub(&rhs)?.norm());

        let f = defect_generator_star(theta, &x)?;
        let lhs = basis.synthesize(&(s * basis.coefficients(&f)?));
        let rhs = defect_generator(theta, &(t0 * &x))?.scale(c(-1.0));
        shift_on_d_star = shift_on_d_star.max(lhs.sub(&rhs)?.norm());
    }

    let max = adjoint_on_d_perp.max(adjoint_on_d).max(shift_on_d_star_perp).max(shift_on_d_star);
    Ok(Theorem4Report {
        adjoint_on_d_perp,
        adjoint_on_d,
        shift_on_d_star_perp,
        shift_on_d_star,
        max,
        pass: max < tol::RELATION,
    })
}

/// `(τf)(e^{it}) = e^{-it} Θ(e^{-it})* f(e^{-it})` on the grid.
pub fn tau_apply(theta: &InnerFunction, f: &GridFunction) -> Result<GridFunction> {
    check_vector(theta, f)?;
    Ok(flip(theta.samples()).apply_adjoint(&flip(f))?.mul_z_power(-1))
}

/// `(τ*f)(e^{it}) = e^{-it} Θ̃(e^{-it})* f(e^{-it}) = e^{-it} Θ(e^{it}) f(e^{-it})`.
pub fn tau_adjoint_apply(theta: &InnerFunction, f: &GridFunction) -> Result<GridFunction> {
    check_vector(theta, f)?;
    Ok(theta.samples().apply(&flip(f))?.mul_z_power(-1))
}

/// Matrix of `τ: K_Θ → K_Θ̃`: entry `(i, j) = <τ e_j, g_i>` with `g_i` the
/// basis of `K_Θ̃`.
pub fn tau_matrix(basis: &ModelSpaceBasis, basis_tilde: &ModelSpaceBasis) -> Result<OperatorMatrix> {
    if basis.theta.grid() != basis_tilde.theta.grid() {
        return Err(Error::Grid(format!(
            "K_Θ uses M = {}, K_Θ̃ uses M = {}",
            basis.theta.grid().size(),
            basis_tilde.theta.grid().size()
        )));
    }
    if basis.theta.dim() != basis_tilde.theta.dim() {
        return Err(Error::Shape("Θ and Θ̃ act on spaces of different dimension".into()));
    }
    let mut m = CMatrix::zeros(basis_tilde.dim(), basis.dim());
    for (j, e) in basis.vectors.iter().enumerate() {
        m.set_column(j, &basis_tilde.coefficients(&tau_apply(&basis.theta, e)?)?);
    }
    Ok(OperatorMatrix::new("T", basis_tilde.label(), basis.label(), m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    /// `max(‖T*T − I‖, ‖TT* − I‖)`.
    pub unitarity: f64,
    /// `max_j ‖(I − P_Θ̃) τ e_j‖`.
    pub range: f64,
    /// `max_j ‖τ*τ e_j − e_j‖` on the grid.
    pub roundtrip: f64,
    pub pass: bool,
}

pub fn verify_theorem1(basis: &ModelSpaceBasis, basis_tilde: &ModelSpaceBasis, tau: &OperatorMatrix) -> Result<Theorem1Report> {
    let unitarity = unitarity_residual(&tau.entries);
    let mut range: f64 = 0.0;
    let mut roundtrip: f64 = 0.0;
    for e in &basis.vectors {
        let image = tau_apply(&basis.theta, e)?;
        let projected = project_l2(&basis_tilde.theta, &image)?;
        range = range.max(image.sub(&projected)?.norm());
        let back = tau_adjoint_apply(&basis.theta, &image)?;
        roundtrip = roundtrip.max(back.sub(e)?.norm());
    }
    Ok(Theorem1Report {
        unitarity,
        range,
        roundtrip,
        pass: unitarity < tol::IDENTITY && range < tol::IDENTITY && roundtrip < tol::IDENTITY,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntertwiningReport {
    /// `‖T S_Θ − S_Θ̃* T‖ / (‖S_Θ‖ + 1)`.
    pub matrix: f64,
    /// `max_f ‖τ P_Θ f − P_Θ̃ τ f‖ / ‖f‖` over random `f ∈ L²(E)`.
    pub projection: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Random test functions are trigonometric polynomials of this band.
pub const RANDOM_FUNCTION_BAND: usize = 12;

pub fn verify_intertwinings(
    basis: &ModelSpaceBasis,
    basis_tilde: &ModelSpaceBasis,
    tau: &OperatorMatrix,
    shift: &OperatorMatrix,
    shift_tilde: &OperatorMatrix,
    samples: usize,
    seed: u64,
) -> Result<IntertwiningReport> {
    let lhs = &tau.entries * &shift.entries;
    let rhs = shift_tilde.entries.adjoint() * &tau.entries;
    let matrix = op_norm(&(lhs - rhs)) / (shift.norm() + 1.0);

    let theta = &basis.theta;
    let mut rng = seeded(seed);
    let mut projection: f64 = 0.0;
    for _ in 0..samples {
        let f = random_trig_function(&mut rng, theta.grid(), theta.dim(), RANDOM_FUNCTION_BAND);
        let left = tau_apply(theta, &project_l2(theta, &f)?)?;
        let right = project_l2(&basis_tilde.theta, &tau_apply(theta, &f)?)?;
        projection = projection.max(left.sub(&right)?.norm() / f.norm());
    }
    Ok(IntertwiningReport {
        matrix,
        projection,
        samples,
        pass: matrix < tol::RELATION && projection < tol::RELATION,
    })
}

/// Residuals of the intermediate claims used in both inclusions of the
/// spatial isomorphism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProofStepReport {
    /// `max ‖(I − P_{D⊥}) τ*f‖` over an orthonormal basis of `D̃*⊥`.
    pub tau_adjoint_into_d_perp: f64,
    /// `max ‖S S* τ*f − τ*f‖` over the same basis.
    pub shift_shift_adjoint: f64,
    /// `max ‖S f − z f‖` over an orthonormal basis of `D*⊥`.
    pub shift_is_multiplication: f64,
    /// `max ‖(I − P_{D⊥}) z f‖` over the same basis.
    pub z_into_d_perp: f64,
    /// `max ‖S* S f − f‖` over the same basis.
    pub shift_adjoint_shift: f64,
    pub max: f64,
    pub pass: bool,
}

/// Distance from `g` to the subspace `sub` of `basis`'s model space.
fn distance_to_subspace(basis: &ModelSpaceBasis, sub: &Subspace, g: &GridFunction) -> Result<f64> {
    let cf = basis.coefficients(g)?;
    let inside = basis.synthesize(&(sub.projector() * cf));
    Ok(g.sub(&inside)?.norm())
}

pub fn verify_proof_steps(pair: &ModelPair) -> Result<ProofStepReport> {
    let basis = &pair.basis;
    let theta = basis.theta();
    let s = &pair.shift.entries;
    let s_adj = s.adjoint();
    let d_perp = pair.defects.d.complement("D_perp");

    let mut tau_adjoint_into_d_perp: f64 = 0.0;
    let mut shift_shift_adjoint: f64 = 0.0;
    for col in pair.defects_tilde.d_star.complement("D_tilde_star_perp").basis.column_iter() {
        let f = pair.basis_tilde.synthesize(&col.into_owned());
        let g = tau_adjoint_apply(theta, &f)?;
        tau_adjoint_into_d_perp = tau_adjoint_into_d_perp.max(distance_to_subspace(basis, &d_perp, &g)?);
        let cf = basis.coefficients(&g)?;
        shift_shift_adjoint = shift_shift_adjoint.max((s * (&s_adj * &cf) - &cf).norm());
    }

    let mut shift_is_multiplication: f64 = 0.0;
    let mut z_into_d_perp: f64 = 0.0;
    let mut shift_adjoint_shift: f64 = 0.0;
    for col in pair.defects.d_star.complement("D_star_perp").basis.column_iter() {
        let col = col.into_owned();
        let f = basis.synthesize(&col);
        let zf = f.mul_z_power(1);
        shift_is_multiplication = shift_is_multiplication.max(basis.synthesize(&(s * &col)).sub(&zf)?.norm());
        z_into_d_perp = z_into_d_perp.max(distance_to_subspace(basis, &d_perp, &zf)?);
        shift_adjoint_shift = shift_adjoint_shift.max((&s_adj * (s * &col) - &col).norm());
    }

    let max = [
        tau_adjoint_into_d_perp,
        shift_shift_adjoint,
        shift_is_multiplication,
        z_into_d_perp,
        shift_adjoint_shift,
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(ProofStepReport {
        tau_adjoint_into_d_perp,
        shift_shift_adjoint,
        shift_is_multiplication,
        z_into_d_perp,
        shift_adjoint_shift,
        max,
        pass: max < tol::RELATION,
    })
}

/// `K_Θ` and `K_Θ̃` with everything the verifications share.
#[derive(Debug, Clone)]
pub struct ModelPair {
    pub basis: ModelSpaceBasis,
    pub basis_tilde: ModelSpaceBasis,
    pub tau: OperatorMatrix,
    pub shift: OperatorMatrix,
    pub shift_tilde: OperatorMatrix,
    pub defects: DefectSubspaces,
    pub defects_tilde: DefectSubspaces,
}

impl ModelPair {
    pub fn new(theta: &InnerFunction) -> Result<Self> {
        let basis = build_basis(theta)?;
        let basis_tilde = build_basis(&tilde(theta))?;
        let tau = tau_matrix(&basis, &basis_tilde)?;
        let shift = compressed_shift(&basis)?;
        let shift_tilde = compressed_shift(&basis_tilde)?;
        let defects = defect_subspaces(&basis)?;
        let defects_tilde = defect_subspaces(&basis_tilde)?;
        Ok(Self {
            basis,
            basis_tilde,
            tau,
            shift,
            shift_tilde,
            defects,
            defects_tilde,
        })
    }

    pub fn theta(&self) -> &InnerFunction {
        self.basis.theta()
    }

    pub fn theorem1(&self) -> Result<Theorem1Report> {
        verify_theorem1(&self.basis, &self.basis_tilde, &self.tau)
    }

    pub fn intertwinings(&self, samples: usize, seed: u64) -> Result<IntertwiningReport> {
        verify_intertwinings(&self.basis, &self.basis_tilde, &self.tau, &self.shift, &self.shift_tilde, samples, seed)
    }

    pub fn theorem4(&self) -> Result<Theorem4Report> {
        verify_theorem4_with(&self.basis, &self.shift, &self.defects)
    }

    pub fn proof_steps(&self) -> Result<ProofStepReport> {
        verify_proof_steps(self)
    }
}

/// A seeded random unit vector inside a subspace, in parent coordinates.
pub(crate) fn random_unit_in<R: Rng + ?Sized>(rng: &mut R, sub: &CMatrix) -> CVector {
    let w = crate::sampling::random_unit_vector(rng, sub.ncols());
    sub * w
}


#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use crate::inner::{make_inner, GridChoice, InnerFunctionSpec, PotapovFactor};

    fn z_power(d: usize, k: u32) -> InnerFunction {
        make_inner(&InnerFunctionSpec::new(d, vec![PotapovFactor::FullShift { k }]), GridChoice::Fixed(256)).unwrap()
    }

    fn scalar_blaschke(a: Complex64) -> InnerFunction {
        let spec = InnerFunctionSpec::new(
            1,
            vec![PotapovFactor::Rank1 {
                a,
                v: unit(1, 0),
            }],
        );
        make_inner(&spec, GridChoice::default()).unwrap()
    }

    fn pure_2x2() -> InnerFunction {
        let spec = InnerFunctionSpec::new(
            2,
            vec![
                PotapovFactor::Rank1 { a: c(0.5), v: unit(2, 0) },
                PotapovFactor::Rank1 { a: Complex64::new(0.0, 0.3), v: unit(2, 1) },
            ],
        );
        make_inner(&spec, GridChoice::default()).unwrap()
    }

    fn assert_close(a: &CMatrix, b: &CMatrix, tol: f64) {
        assert!((a - b).norm() < tol, "{a} vs {b}");
    }

    fn mat(rows: &[&[f64]]) -> CMatrix {
        let n = rows.len();
        CMatrix::from_fn(n, rows[0].len(), |i, j| c(rows[i][j]))
    }

    #[test]
    fn shared_types_are_send_and_sync() {
        fn check<T: Send + Sync>() {}
        check::<ModelSpaceBasis>();
        check::<OperatorMatrix>();
        check::<ModelPair>();
    }

    #[test]
    fn projection_on_z_squared() {
        let theta = z_power(1, 2);
        let grid = theta.grid();
        let one = GridFunction::constant(grid, &unit(1, 0));
        assert!(project_model(&theta, &one).unwrap().max_abs_diff(&one).unwrap() < 1e-14);
        let z3 = GridFunction::monomial(grid, 3, &unit(1, 0));
        assert!(project_model(&theta, &z3).unwrap().norm() < 1e-14);
    }

    #[test]
    fn projection_rejects_non_analytic_input() {
        let theta = z_power(1, 2);
        let f = GridFunction::monomial(theta.grid(), -1, &unit(1, 0));
        assert!(matches!(project_model(&theta, &f), Err(Error::Domain { .. })));
    }

    #[test]
    fn projection_of_one_onto_blaschke_model_space() {
        let theta = scalar_blaschke(c(0.5));
        let grid = theta.grid();
        let p = project_model(&theta, &GridFunction::constant(grid, &unit(1, 0))).unwrap();
        // (3/4) / (1 − z/2)
        for m in (0..grid.size()).step_by(17) {
            let z = grid.point(m);
            let expected = c(0.75) / (c(1.0) - z * 0.5);
            assert!((p.vector_at(m)[0] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn projection_annihilates_theta_h2() {
        let theta = pure_2x2();
        let grid = theta.grid();
        for k in 0..=8 {
            for i in 0..2 {
                let g = theta.samples().apply(&GridFunction::monomial(grid, k, &unit(2, i))).unwrap();
                assert!(project_model(&theta, &g).unwrap().norm() < 1e-9);
            }
        }
    }

    #[test]
    fn basis_of_shift_is_constants() {
        let theta = z_power(2, 1);
        let basis = build_basis(&theta).unwrap();
        assert_eq!(basis.dim(), 2);
        for (i, e) in basis.vectors().iter().enumerate() {
            assert!(e.max_abs_diff(&GridFunction::constant(theta.grid(), &unit(2, i))).unwrap() < 1e-14);
        }
        let s = compressed_shift(&basis).unwrap();
        assert!(s.entries.norm() < 1e-14);
    }

    #[test]
    fn z_squared_golden_matrices() {
        let theta = z_power(1, 2);
        let pair = ModelPair::new(&theta).unwrap();
        assert_eq!(pair.basis.dim(), 2);
        assert_close(&pair.shift.entries, &mat(&[&[0.0, 0.0], &[1.0, 0.0]]), 1e-14);
        assert_close(&pair.tau.entries, &mat(&[&[0.0, 1.0], &[1.0, 0.0]]), 1e-14);
        let adj = compressed_shift_adjoint(&pair.basis).unwrap();
        assert_close(&adj.entries, &pair.shift.entries.adjoint(), 1e-14);
        let lhs = &pair.tau.entries * &pair.shift.entries;
        let rhs = pair.shift_tilde.entries.adjoint() * &pair.tau.entries;
        assert_close(&lhs, &rhs, 1e-14);
    }

    #[test]
    fn tau_fixes_one_for_theta_z() {
        let theta = z_power(1, 1);
        let one = GridFunction::constant(theta.grid(), &unit(1, 0));
        assert!(tau_apply(&theta, &one).unwrap().max_abs_diff(&one).unwrap() < 1e-14);
    }

    #[test]
    fn blaschke_compressed_shift_is_zero_location() {
        for a in [c(0.5), Complex64::new(-0.3, 0.6)] {
            let basis = build_basis(&scalar_blaschke(a)).unwrap();
            assert_eq!(basis.dim(), 1);
            let s = compressed_shift(&basis).unwrap();
            assert!((s.entries[(0, 0)] - a).norm() < 1e-12);
        }
    }

    #[test]
    fn pure_2x2_basis_and_defects() {
        let theta = pure_2x2();
        let basis = build_basis(&theta).unwrap();
        assert_eq!(basis.dim(), 2);
        assert!(basis.orthonormality_residual() < 1e-10);
        assert!(basis.containment_residual().unwrap() < 1e-9);
        let defects = defect_subspaces(&basis).unwrap();
        assert_eq!(defects.d.dim(), 2);
        assert_eq!(defects.d_star.dim(), 2);
        assert_eq!(defects.lemma_dim_check, LemmaCheck::Passed);
        let s = compressed_shift(&basis).unwrap();
        assert!(s.norm() <= 1.0 + 1e-9);
        let adj = compressed_shift_adjoint(&basis).unwrap();
        assert_close(&adj.entries, &s.entries.adjoint(), 1e-10);
    }

    #[test]
    fn defects_of_z_squared() {
        let basis = build_basis(&z_power(1, 2)).unwrap();
        let defects = defect_subspaces(&basis).unwrap();
        // D = span{1}, D* = span{z}: coefficient vectors e_1 and e_2 up to phase
        assert_eq!(defects.d.dim(), 1);
        assert_eq!(defects.d_star.dim(), 1);
        assert!((defects.d.basis[(0, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((defects.d_star.basis[(1, 0)].norm() - 1.0).abs() < 1e-14);
        let report = verify_theorem4(&basis).unwrap();
        assert!(report.max < 1e-12, "{report:?}");
    }

    #[test]
    fn defects_fill_one_dimensional_space() {
        let basis = build_basis(&scalar_blaschke(c(0.5))).unwrap();
        let defects = defect_subspaces(&basis).unwrap();
        assert_eq!(defects.d.dim(), 1);
        assert_eq!(defects.d_star.dim(), 1);
    }

    #[test]
    fn non_pure_defects_report_rank() {
        let spec = InnerFunctionSpec::new(2, vec![PotapovFactor::Rank1 { a: c(0.5), v: unit(2, 0) }]);
        let theta = make_inner(&spec, GridChoice::default()).unwrap();
        let basis = build_basis(&theta).unwrap();
        let defects = defect_subspaces(&basis).unwrap();
        assert_eq!(defects.lemma_dim_check, LemmaCheck::Skipped);
        assert_eq!(defects.d.dim(), 1);
        assert_eq!(defects.d_star.dim(), 1);
    }

    #[test]
    fn defect_generators_match_formulas_pointwise() {
        let theta = pure_2x2();
        let grid = theta.grid();
        let x = CVector::from_vec(vec![Complex64::new(0.3, -1.0), c(0.7)]);
        let g = defect_generator(&theta, &x).unwrap();
        let h = defect_generator_star(&theta, &x).unwrap();
        for m in (0..grid.size()).step_by(29) {
            let z = grid.point(m);
            let t = theta.samples().matrix_at(m);
            let expected_g = &x - &t * (theta.theta0().adjoint() * &x);
            let expected_h = (&t - theta.theta0()) * &x / z;
            assert!((g.vector_at(m) - expected_g).norm() < 1e-12);
            assert!((h.vector_at(m) - expected_h).norm() < 1e-12);
        }
    }

    #[test]
    fn theorem4_on_pure_2x2() {
        let report = verify_theorem4(&build_basis(&pure_2x2()).unwrap()).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn theorem1_and_intertwinings_on_pure_2x2() {
        let pair = ModelPair::new(&pure_2x2()).unwrap();
        let t1 = pair.theorem1().unwrap();
        assert!(t1.pass, "{t1:?}");
        let tw = pair.intertwinings(20, 1).unwrap();
        assert!(tw.pass, "{tw:?}");
        let steps = pair.proof_steps().unwrap();
        assert!(steps.pass, "{steps:?}");
    }

    #[test]
    fn tau_matrix_rejects_grid_mismatch() {
        let a = build_basis(&z_power(1, 2)).unwrap();
        let theta = make_inner(&InnerFunctionSpec::new(1, vec![PotapovFactor::FullShift { k: 2 }]), GridChoice::Fixed(128)).unwrap();
        let b = build_basis(&tilde(&theta)).unwrap();
        assert!(matches!(tau_matrix(&a, &b), Err(Error::Grid(_))));
    }

    #[test]
    fn basis_extends_degrees_when_zeros_share_a_direction() {
        // six zeros along e_1 in d = 3: degrees up to ⌈6/3⌉+2 = 4 give only five candidates in that direction
        let zeros = [0.1, -0.2, 0.3, 0.4, 0.5, -0.6];
        let factors = zeros
            .iter()
            .map(|&r| PotapovFactor::Rank1 { a: c(r), v: unit(3, 0) })
            .collect();
        let theta = make_inner(&InnerFunctionSpec::new(3, factors), GridChoice::default()).unwrap();
        let basis = build_basis(&theta).unwrap();
        assert_eq!(basis.dim(), 6);
        assert!(basis.orthonormality_residual() < 1e-10);
    }
}
