//! Matrix-valued truncated Toeplitz operators `A_Φ f = P_Θ(Φ f)` on `K_Θ`.
//!
//! Membership in `T_Θ` is tested through shift invariance of the quadratic
//! form, `Q_A(f) = Q_A(zf)` whenever `f, zf ∈ K_Θ`. For pure `Θ` the set of
//! such `f` is exactly `D*⊥`, the orthogonal complement of the second defect
//! subspace, which turns the test into a finite residual.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circle::{dft, idft, CircleGrid, FourierRep, GridFunction, Shape};
use crate::error::{Error, Result};
use crate::inner::InnerFunction;
use crate::linalg::{c, CMatrix, CVector, LeastSquares};
use crate::model::{random_unit_in, DefectSubspaces, ModelPair, ModelSpaceBasis, OperatorMatrix};
use crate::sampling::{random_matrix, seeded};
use crate::serde_complex;
use crate::tol;

/// Number of random unit vectors added to the orthonormal test basis.
pub const RANDOM_TEST_VECTORS: usize = 32;
/// Seed used when the caller supplies none.
pub const DEFAULT_TEST_SEED: u64 = 0x5eed;
/// Relative singular-value cutoff in symbol recovery.
const RECOVERY_RCOND: f64 = 1e-11;

/// Trigonometric-polynomial symbol `Φ(z) = Σ_{|k| ≤ band} Φ_k z^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymbolRepr", into = "SymbolRepr")]
pub struct SymbolSpec {
    d: usize,
    band: usize,
    /// `Φ_k` at index `k + band`.
    coefficients: Vec<CMatrix>,
}

impl SymbolSpec {
    pub fn zero(d: usize, band: usize) -> Self {
        Self {
            d,
            band,
            coefficients: vec![CMatrix::zeros(d, d); 2 * band + 1],
        }
    }

    /// The constant symbol `I`.
    pub fn identity(d: usize) -> Self {
        Self::constant(CMatrix::identity(d, d))
    }

    pub fn constant(m: CMatrix) -> Self {
        let mut out = Self::zero(m.nrows(), 0);
        out.coefficients[0] = m;
        out
    }

    /// `z^k E_pq`, with `E_pq` the matrix unit.
    pub fn monomial(d: usize, k: i64, p: usize, q: usize) -> Self {
        let mut out = Self::zero(d, k.unsigned_abs() as usize);
        let mut e = CMatrix::zeros(d, d);
        e[(p, q)] = c(1.0);
        out.set(k, e);
        out
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn band(&self) -> usize {
        self.band
    }

    /// `Φ_k`, zero outside the band.
    pub fn coefficient(&self, k: i64) -> CMatrix {
        if k.unsigned_abs() as usize > self.band {
            return CMatrix::zeros(self.d, self.d);
        }
        self.coefficients[(k + self.band as i64) as usize].clone()
    }

    /// Sets `Φ_k`.
    ///
    /// # Panics
    /// If `|k|` exceeds the band or `m` is not `d × d`.
    pub fn set(&mut self, k: i64, m: CMatrix) {
        assert!(k.unsigned_abs() as usize <= self.band, "frequency {k} outside band {}", self.band);
        assert_eq!((m.nrows(), m.ncols()), (self.d, self.d));
        self.coefficients[(k + self.band as i64) as usize] = m;
    }

    /// The pointwise adjoint `Φ*`, whose coefficients are `(Φ_{-k})*`.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.d, self.band);
        let b = self.band as i64;
        for k in -b..=b {
            out.set(k, self.coefficient(-k).adjoint());
        }
        out
    }

    /// `α Φ + β Ψ`.
    pub fn combine(alpha: Complex64, phi: &SymbolSpec, beta: Complex64, psi: &SymbolSpec) -> Result<Self> {
        if phi.d != psi.d {
            return Err(Error::Shape(format!("symbol dims {} vs {}", phi.d, psi.d)));
        }
        let band = phi.band.max(psi.band);
        let mut out = Self::zero(phi.d, band);
        for k in -(band as i64)..=band as i64 {
            out.set(k, phi.coefficient(k) * alpha + psi.coefficient(k) * beta);
        }
        Ok(out)
    }

    pub fn is_finite(&self) -> bool {
        self.coefficients
            .iter()
            .all(|m| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// Samples `Φ` on `grid`; the band must not exceed `M/4`.
    pub fn samples(&self, grid: &CircleGrid) -> Result<GridFunction> {
        check_band(self.band, grid)?;
        let mut rep = FourierRep::zeros(grid, Shape::Matrix(self.d));
        let b = self.band as i64;
        for k in -b..=b {
            let m = &self.coefficients[(k + b) as usize];
            for r in 0..self.d {
                for col in 0..self.d {
                    rep.set(r * self.d + col, k, m[(r, col)]);
                }
            }
        }
        Ok(idft(&rep))
    }
}

fn check_band(band: usize, grid: &CircleGrid) -> Result<()> {
    let limit = grid.size() / 4;
    if band > limit {
        return Err(Error::Alias { band, limit });
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct CoefficientRepr {
    k: i64,
    #[serde(with = "serde_complex::matrix")]
    matrix: CMatrix,
}

#[derive(Serialize, Deserialize)]
struct SymbolRepr {
    d: usize,
    band: usize,
    coefficients: Vec<CoefficientRepr>,
}

impl TryFrom<SymbolRepr> for SymbolSpec {
    type Error = String;

    fn try_from(r: SymbolRepr) -> std::result::Result<Self, String> {
        if r.d == 0 {
            return Err("symbol dimension d must be positive".into());
        }
        let mut out = SymbolSpec::zero(r.d, r.band);
        for c in r.coefficients {
            if c.k.unsigned_abs() as usize > r.band {
                return Err(format!("coefficient k = {} lies outside band {}", c.k, r.band));
            }
            if c.matrix.nrows() != r.d || c.matrix.ncols() != r.d {
                return Err(format!("coefficient k = {} is not {}×{}", c.k, r.d, r.d));
            }
            out.set(c.k, c.matrix);
        }
        if !out.is_finite() {
            return Err("symbol has non-finite coefficients".into());
        }
        Ok(out)
    }
}

impl From<SymbolSpec> for SymbolRepr {
    fn from(s: SymbolSpec) -> Self {
        let b = s.band as i64;
        SymbolRepr {
            d: s.d,
            band: s.band,
            coefficients: (-b..=b)
                .map(|k| CoefficientRepr {
                    k,
                    matrix: s.coefficient(k),
                })
                .collect(),
        }
    }
}

/// Matrix of `A_Φ`: entry `(i, j) = <Φ e_j, e_i>`.
pub fn mtto_matrix(basis: &ModelSpaceBasis, phi: &SymbolSpec) -> Result<OperatorMatrix> {
    let theta = basis.theta();
    if phi.d() != theta.dim() {
        return Err(Error::Shape(format!("symbol is {}×{}, E has dimension {}", phi.d(), phi.d(), theta.dim())));
    }
    let samples = phi.samples(theta.grid())?;
    let n = basis.dim();
    let mut m = CMatrix::zeros(n, n);
    for (j, e) in basis.vectors().iter().enumerate() {
        m.set_column(j, &basis.coefficients(&samples.apply(e)?)?);
    }
    Ok(OperatorMatrix::on(basis, "A_phi", m))
}

/// `Q_A(f) = <A f, f>`.
pub fn quadratic_form(a: &OperatorMatrix, f: &CVector) -> Result<Complex64> {
    if a.nrows() != a.ncols() || f.len() != a.ncols() {
        return Err(Error::Shape(format!(
            "operator is {}×{}, vector has length {}",
            a.nrows(),
            a.ncols(),
            f.len()
        )));
    }
    Ok(f.dotc(&(&a.entries * f)))
}

/// The shift-invariance test domain `D*⊥` with the coefficients of `z f` for
/// each of its basis vectors `f`.
#[derive(Debug, Clone)]
pub struct ShiftDomain {
    domain: CMatrix,
    shifted: CMatrix,
}

impl ShiftDomain {
    pub fn new(basis: &ModelSpaceBasis) -> Result<Self> {
        let defects = crate::model::defect_subspaces(basis)?;
        Self::with_defects(basis, &defects)
    }

    pub fn with_defects(basis: &ModelSpaceBasis, defects: &DefectSubspaces) -> Result<Self> {
        if !basis.is_pure() {
            return Err(Error::UnsupportedDomain);
        }
        let domain = defects.d_star.complement("D_star_perp").basis;
        let mut shifted = CMatrix::zeros(domain.nrows(), domain.ncols());
        for (j, col) in domain.column_iter().enumerate() {
            let zf = basis.synthesize(&col.into_owned()).mul_z_power(1);
            shifted.set_column(j, &basis.coefficients(&zf)?);
        }
        Ok(Self { domain, shifted })
    }

    pub fn dim(&self) -> usize {
        self.domain.ncols()
    }

    /// Orthonormal basis of the domain in model-space coordinates.
    pub fn basis(&self) -> &CMatrix {
        &self.domain
    }

    /// `max |Q_A(f) − Q_A(Sf)| / (‖A‖ + 1)` over an orthonormal basis of the
    /// domain and [`RANDOM_TEST_VECTORS`] seeded random unit vectors in it.
    pub fn residual(&self, a: &OperatorMatrix, seed: u64) -> Result<f64> {
        if a.nrows() != self.domain.nrows() || a.ncols() != self.domain.nrows() {
            return Err(Error::Shape(format!(
                "operator is {}×{}, model space has dimension {}",
                a.nrows(),
                a.ncols(),
                self.domain.nrows()
            )));
        }
        let r = self.dim();
        if r == 0 {
            return Ok(0.0);
        }
        let scale = a.norm() + 1.0;
        let mut rng = seeded(seed);
        let mut worst: f64 = 0.0;
        let identity = CMatrix::identity(r, r);
        let probes = identity
            .column_iter()
            .map(|col| col.into_owned())
            .chain((0..RANDOM_TEST_VECTORS).map(|_| random_unit_in(&mut rng, &identity)));
        for w in probes {
            let f = &self.domain * &w;
            let sf = &self.shifted * &w;
            let gap = quadratic_form(a, &f)? - quadratic_form(a, &sf)?;
            worst = worst.max(gap.norm());
        }
        Ok(worst / scale)
    }

    /// The sesquilinear defect `V*AV − Z*AZ` whose vanishing is equivalent to
    /// shift invariance.
    pub fn defect_form(&self, a: &CMatrix) -> CMatrix {
        self.domain.adjoint() * a * &self.domain - self.shifted.adjoint() * a * &self.shifted
    }
}

/// Shift-invariance residual with the default probe seed. Requires pure `Θ`.
pub fn shift_invariance_residual(a: &OperatorMatrix, basis: &ModelSpaceBasis) -> Result<f64> {
    ShiftDomain::new(basis)?.residual(a, DEFAULT_TEST_SEED)
}

/// Columns are `vec(A_{z^k E_pq})` (column-major), ordered by `k`, then `p`,
/// then `q`. Entry `(i, j)` of `A_{z^k E_pq}` is the Fourier coefficient at
/// `-k` of `(e_j)_q · conj((e_i)_p)`, so the whole design costs one FFT per
/// `(i, j, p, q)`.
pub fn symbol_design_matrix(basis: &ModelSpaceBasis, band: usize) -> Result<CMatrix> {
    let theta = basis.theta();
    let grid = theta.grid();
    check_band(band, grid)?;
    let n = basis.dim();
    let d = theta.dim();
    let b = band as i64;
    let mut design = CMatrix::zeros(n * n, (2 * band + 1) * d * d);
    let mut product = GridFunction::zeros(grid, Shape::Vector(1));
    for i in 0..n {
        for j in 0..n {
            let (ei, ej) = (&basis.vectors()[i], &basis.vectors()[j]);
            for p in 0..d {
                for q in 0..d {
                    for ((out, x), y) in product.component_mut(0).iter_mut().zip(ej.component(q)).zip(ei.component(p)) {
                        *out = x * y.conj();
                    }
                    let rep = dft(&product);
                    for k in -b..=b {
                        let col = (((k + b) as usize) * d + p) * d + q;
                        design[(i + n * j, col)] = rep.get(0, -k);
                    }
                }
            }
        }
    }
    Ok(design)
}

/// Factored least-squares problem for recovering band-limited symbols on one
/// model space.
pub struct SymbolFit {
    d: usize,
    n: usize,
    band: usize,
    solver: LeastSquares,
}

impl SymbolFit {
    pub fn new(basis: &ModelSpaceBasis, band: usize) -> Result<Self> {
        let design = symbol_design_matrix(basis, band)?;
        Ok(Self {
            d: basis.theta().dim(),
            n: basis.dim(),
            band,
            solver: LeastSquares::new(design, RECOVERY_RCOND),
        })
    }

    pub fn band(&self) -> usize {
        self.band
    }

    /// Dimension of the span of `{A_{z^k E_pq} : |k| ≤ band}`.
    pub fn span_dim(&self) -> usize {
        self.solver.rank()
    }

    /// Minimum-norm symbol and the Frobenius distance from `a` to the span.
    pub fn fit(&self, a: &CMatrix) -> Result<(SymbolSpec, f64)> {
        if a.nrows() != self.n || a.ncols() != self.n {
            return Err(Error::Shape(format!("operator is {}×{}, model space has dimension {}", a.nrows(), a.ncols(), self.n)));
        }
        let rhs = CVector::from_column_slice(a.as_slice());
        let (x, residual) = self.solver.solve(&rhs);
        let mut symbol = SymbolSpec::zero(self.d, self.band);
        let b = self.band as i64;
        for k in -b..=b {
            let m = CMatrix::from_fn(self.d, self.d, |p, q| x[(((k + b) as usize) * self.d + p) * self.d + q]);
            symbol.set(k, m);
        }
        Ok((symbol, residual))
    }

    /// The fitted matrix `Σ c_{kpq} A_{z^k E_pq}`.
    pub fn fitted(&self, a: &CMatrix) -> Result<CMatrix> {
        let rhs = CVector::from_column_slice(a.as_slice());
        let (x, _) = self.solver.solve(&rhs);
        let v = self.solver.design() * x;
        Ok(CMatrix::from_column_slice(self.n, self.n, v.as_slice()))
    }
}

/// Least-squares symbol recovery; returns the minimum-norm symbol and the
/// attained Frobenius residual.
pub fn recover_symbol(a: &OperatorMatrix, basis: &ModelSpaceBasis, band: usize) -> Result<(SymbolSpec, f64)> {
    SymbolFit::new(basis, band)?.fit(&a.entries)
}

/// Symbol band used for membership witnesses: `dim K_Θ + 2`, capped at `M/4`.
pub fn recovery_band(basis: &ModelSpaceBasis) -> usize {
    (basis.dim() + 2).min(basis.theta().grid().size() / 4)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MttoReport {
    pub shift_invariance_residual: f64,
    pub membership: bool,
    pub recovered_symbol: Option<SymbolSpec>,
    pub recovery_residual: f64,
}

/// Shift-invariance test plus symbol recovery at `band`.
pub fn analyze(a: &OperatorMatrix, basis: &ModelSpaceBasis, band: usize, seed: u64) -> Result<MttoReport> {
    let shift_invariance_residual = ShiftDomain::new(basis)?.residual(a, seed)?;
    let membership = shift_invariance_residual < tol::RELATION;
    let (symbol, recovery_residual) = recover_symbol(a, basis, band)?;
    Ok(MttoReport {
        shift_invariance_residual,
        membership,
        recovered_symbol: membership.then_some(symbol),
        recovery_residual,
    })
}

/// `T A T*`.
pub fn conjugate_by_tau(a: &OperatorMatrix, t: &OperatorMatrix) -> Result<OperatorMatrix> {
    if a.nrows() != a.ncols() || t.ncols() != a.nrows() {
        return Err(Error::Shape(format!(
            "cannot conjugate a {}×{} operator by a {}×{} map",
            a.nrows(),
            a.ncols(),
            t.nrows(),
            t.ncols()
        )));
    }
    Ok(OperatorMatrix::new(
        format!("{} {} {}*", t.label, a.label, t.label),
        t.row_space.clone(),
        t.row_space.clone(),
        &t.entries * &a.entries * t.entries.adjoint(),
    ))
}

/// A matrix certified to lie at Frobenius distance `distance` from the span of
/// band-limited MTTOs.
#[derive(Debug, Clone)]
pub struct NonMember {
    pub matrix: OperatorMatrix,
    pub distance: f64,
}

/// Builds a non-member by removing from a random matrix its least-squares fit
/// by MTTO matrices and normalizing. `None` when the MTTOs already span every
/// operator on the space.
pub fn construct_non_member(basis: &ModelSpaceBasis, fit: &SymbolFit, seed: u64) -> Result<Option<NonMember>> {
    let n = basis.dim();
    let mut rng = seeded(seed);
    let raw = random_matrix(&mut rng, n, n);
    let residual = &raw - fit.fitted(&raw)?;
    let size = residual.norm();
    if size <= 1e-6 * raw.norm() {
        return Ok(None);
    }
    let candidate = residual / c(size);
    let (_, distance) = fit.fit(&candidate)?;
    Ok(Some(NonMember {
        matrix: OperatorMatrix::on(basis, "non_member", candidate),
        distance,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativeControl {
    pub distance: f64,
    pub shift_invariance_residual: f64,
    pub pass: bool,
}

/// Constructs a non-member on `basis` and checks that the shift-invariance
/// test rejects it. `None` when no non-member exists.
pub fn negative_control(basis: &ModelSpaceBasis, domain: &ShiftDomain, fit: &SymbolFit, seed: u64) -> Result<Option<NegativeControl>> {
    let Some(nm) = construct_non_member(basis, fit, seed)? else {
        return Ok(None);
    };
    let residual = domain.residual(&nm.matrix, seed)?;
    Ok(Some(NegativeControl {
        distance: nm.distance,
        shift_invariance_residual: residual,
        pass: nm.distance > 1e-3 && residual > tol::NEGATIVE_CONTROL,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    pub cases: usize,
    pub max_shift_residual: f64,
    pub max_recovery_residual: f64,
    pub pass: bool,
}

impl DirectionReport {
    fn new() -> Self {
        Self {
            cases: 0,
            max_shift_residual: 0.0,
            max_recovery_residual: 0.0,
            pass: true,
        }
    }

    fn record(&mut self, shift: f64, recovery: f64) {
        self.cases += 1;
        self.max_shift_residual = self.max_shift_residual.max(shift);
        self.max_recovery_residual = self.max_recovery_residual.max(recovery);
        self.pass = self.max_shift_residual < tol::RELATION && self.max_recovery_residual < tol::RELATION;
    }
}

/// Both inclusions `τ T_Θ τ* ⊂ T_Θ̃` and `τ* T_Θ̃ τ ⊂ T_Θ` on sampled symbols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialIsomorphismReport {
    /// `τ A_Φ τ*` tested on `K_Θ̃`.
    pub forward: DirectionReport,
    /// `τ* A_Ψ τ` tested on `K_Θ`.
    pub backward: DirectionReport,
    pub pass: bool,
}

pub fn verify_spatial_isomorphism(theta: &InnerFunction, phis: &[SymbolSpec], psis: &[SymbolSpec], seed: u64) -> Result<SpatialIsomorphismReport> {
    if !theta.is_pure() {
        return Err(Error::UnsupportedDomain);
    }
    let pair = ModelPair::new(theta)?;
    verify_spatial_isomorphism_with(&pair, phis, psis, seed)
}

pub fn verify_spatial_isomorphism_with(pair: &ModelPair, phis: &[SymbolSpec], psis: &[SymbolSpec], seed: u64) -> Result<SpatialIsomorphismReport> {
    let domain = ShiftDomain::with_defects(&pair.basis, &pair.defects)?;
    let domain_tilde = ShiftDomain::with_defects(&pair.basis_tilde, &pair.defects_tilde)?;
    let fit = SymbolFit::new(&pair.basis, recovery_band(&pair.basis))?;
    let fit_tilde = SymbolFit::new(&pair.basis_tilde, recovery_band(&pair.basis_tilde))?;
    let tau_adj = pair.tau.adjoint();

    let mut forward = DirectionReport::new();
    for phi in phis {
        let a = mtto_matrix(&pair.basis, phi)?;
        let conj = conjugate_by_tau(&a, &pair.tau)?;
        let (_, rec) = fit_tilde.fit(&conj.entries)?;
        forward.record(domain_tilde.residual(&conj, seed)?, rec);
    }
    let mut backward = DirectionReport::new();
    for psi in psis {
        let b = mtto_matrix(&pair.basis_tilde, psi)?;
        let conj = conjugate_by_tau(&b, &tau_adj)?;
        let (_, rec) = fit.fit(&conj.entries)?;
        backward.record(domain.residual(&conj, seed)?, rec);
    }
    Ok(SpatialIsomorphismReport {
        forward,
        backward,
        pass: forward.pass && backward.pass,
    })
}
