//! Matrix-valued inner functions built as Blaschke–Potapov products.
//!
//! A spec is `Θ = U · F_1 ⋯ F_n` with each `F_i` either a rank-one factor
//! `I + (b_a(z) − 1) v v*` or a full shift `z^k I`, and `U` an optional
//! constant left factor. The scalar Blaschke factor is normalized so that
//! `b_a(0) = |a|`:
//!
//! ```text
//! b_a(z) = (ā/|a|) (a − z) / (1 − ā z)    (a ≠ 0),    b_0(z) = z.
//! ```

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circle::{dft, CircleGrid, GridFunction};
use crate::error::{Error, Result};
use crate::linalg::{op_norm, CMatrix, CVector};
use crate::serde_complex;

/// Largest admissible `|a|` for a rank-one factor. Zeros closer to the circle
/// push the pole `1/ā` towards it and the adaptive grid past its cap.
pub const MAX_ZERO_MODULUS: f64 = 0.95;
/// Certification bound on `max_m ‖Θ*Θ − I‖`.
pub const UNITARITY_TOL: f64 = 1e-10;
/// `Θ` is pure when `‖Θ(0)‖ < 1 − PURITY_MARGIN`.
pub const PURITY_MARGIN: f64 = 1e-8;
/// Spectral tail energy (per entry, beyond `|k| = M/4`) accepted by the auto grid.
pub const TAIL_TOL: f64 = 1e-12;
pub const AUTO_GRID_START: usize = 256;
pub const DEFAULT_GRID_CAP: usize = 16384;

const UNIT_VECTOR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotapovFactor {
    Rank1 {
        #[serde(with = "serde_complex::complex")]
        a: Complex64,
        #[serde(with = "serde_complex::vector")]
        v: CVector,
    },
    FullShift {
        k: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerFunctionSpec {
    pub d: usize,
    pub factors: Vec<PotapovFactor>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "serde_complex::option_matrix")]
    pub u: Option<CMatrix>,
}

impl InnerFunctionSpec {
    pub fn new(d: usize, factors: Vec<PotapovFactor>) -> Self {
        Self { d, factors, u: None }
    }

    pub fn with_unitary(mut self, u: CMatrix) -> Self {
        self.u = Some(u);
        self
    }

    /// Structural checks. Unitarity of `U` is left to certification in
    /// [`make_inner`], which reports it as [`Error::NotInner`].
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Spec("dimension d must be positive".into()));
        }
        if self.factors.is_empty() {
            return Err(Error::Spec("at least one factor is required (Θ must be non-constant)".into()));
        }
        for (i, f) in self.factors.iter().enumerate() {
            match f {
                PotapovFactor::Rank1 { a, v } => {
                    let r = a.norm();
                    if !r.is_finite() || r >= 1.0 {
                        return Err(Error::Spec(format!("factor {i}: zero a must satisfy |a| < 1, got {r}")));
                    }
                    if r > MAX_ZERO_MODULUS {
                        return Err(Error::Spec(format!(
                            "factor {i}: |a| = {r} exceeds the conditioning guard {MAX_ZERO_MODULUS}"
                        )));
                    }
                    if v.len() != self.d {
                        return Err(Error::Spec(format!("factor {i}: v has length {}, expected {}", v.len(), self.d)));
                    }
                    if (v.norm() - 1.0).abs() > UNIT_VECTOR_TOL {
                        return Err(Error::Spec(format!("factor {i}: v is not a unit vector (‖v‖ = {})", v.norm())));
                    }
                }
                PotapovFactor::FullShift { k } => {
                    if *k == 0 {
                        return Err(Error::Spec(format!("factor {i}: full_shift power must be positive")));
                    }
                }
            }
        }
        if let Some(u) = &self.u {
            if u.nrows() != self.d || u.ncols() != self.d {
                return Err(Error::Spec(format!("U is {}×{}, expected {}×{}", u.nrows(), u.ncols(), self.d, self.d)));
            }
            if u.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Spec("U has non-finite entries".into()));
            }
        }
        Ok(())
    }
}

/// Scalar Blaschke factor with the `b_a(0) = |a|` normalization.
pub fn blaschke(a: Complex64, z: Complex64) -> Complex64 {
    let r = a.norm();
    if r == 0.0 {
        return z;
    }
    (a.conj() / r) * (a - z) / (Complex64::new(1.0, 0.0) - a.conj() * z)
}

#[derive(Debug, Clone, PartialEq)]
enum ChainFactor {
    Rank1 { a: Complex64, v: CVector },
    Shift { k: u32 },
    Constant(CMatrix),
}

/// Ordered product of elementary factors; closed under `Θ ↦ Θ̃`, which a
/// left-unitary spec is not.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorChain {
    d: usize,
    factors: Vec<ChainFactor>,
}

impl FactorChain {
    pub fn from_spec(spec: &InnerFunctionSpec) -> Self {
        let mut factors = Vec::with_capacity(spec.factors.len() + 1);
        if let Some(u) = &spec.u {
            factors.push(ChainFactor::Constant(u.clone()));
        }
        for f in &spec.factors {
            factors.push(match f {
                PotapovFactor::Rank1 { a, v } => ChainFactor::Rank1 { a: *a, v: v.clone() },
                PotapovFactor::FullShift { k } => ChainFactor::Shift { k: *k },
            });
        }
        Self { d: spec.d, factors }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Winding number of `det Θ` on the circle, i.e. `dim K_Θ`.
    pub fn degree(&self) -> usize {
        self.factors
            .iter()
            .map(|f| match f {
                ChainFactor::Rank1 { .. } => 1,
                ChainFactor::Shift { k } => *k as usize * self.d,
                ChainFactor::Constant(_) => 0,
            })
            .sum()
    }

    /// Chain of `Θ̃(z) = Θ(z̄)*`: reversed order, `a ↦ ā`, `U ↦ U*`.
    pub fn tilde(&self) -> Self {
        let factors = self
            .factors
            .iter()
            .rev()
            .map(|f| match f {
                ChainFactor::Rank1 { a, v } => ChainFactor::Rank1 { a: a.conj(), v: v.clone() },
                ChainFactor::Shift { k } => ChainFactor::Shift { k: *k },
                ChainFactor::Constant(u) => ChainFactor::Constant(u.adjoint()),
            })
            .collect();
        Self { d: self.d, factors }
    }

    pub fn eval(&self, z: Complex64) -> CMatrix {
        let d = self.d;
        let mut acc = CMatrix::identity(d, d);
        for f in &self.factors {
            match f {
                ChainFactor::Rank1 { a, v } => {
                    let b = blaschke(*a, z) - 1.0;
                    // acc · (I + b v v*) = acc + b (acc v) v*
                    let av = &acc * v;
                    acc += (av * v.adjoint()) * b;
                }
                ChainFactor::Shift { k } => acc *= z.powu(*k),
                ChainFactor::Constant(u) => acc = &acc * u,
            }
        }
        acc
    }
}

/// Evaluates `Θ` at points of the closed disc.
pub fn eval_inner(spec: &InnerFunctionSpec, points: &[Complex64]) -> Result<Vec<CMatrix>> {
    spec.validate()?;
    if let Some(z) = points.iter().find(|z| z.norm().is_nan() || z.norm() > 1.0 + 1e-12) {
        return Err(Error::Spec(format!("evaluation point {z} lies outside the closed disc")));
    }
    let chain = FactorChain::from_spec(spec);
    Ok(points.iter().map(|&z| chain.eval(z)).collect())
}

/// Samples `Θ` on a grid.
pub fn eval_inner_on_grid(spec: &InnerFunctionSpec, grid: &CircleGrid) -> Result<GridFunction> {
    spec.validate()?;
    Ok(sample_chain(&FactorChain::from_spec(spec), grid))
}

fn sample_chain(chain: &FactorChain, grid: &CircleGrid) -> GridFunction {
    GridFunction::from_matrix_fn(grid, chain.dim(), |_, z| chain.eval(z))
}

pub fn expected_model_dim(spec: &InnerFunctionSpec) -> usize {
    FactorChain::from_spec(spec).degree()
}

/// Grid selection for [`make_inner`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridChoice {
    Fixed(usize),
    /// Doubles `M` from [`AUTO_GRID_START`] until every entry of `Θ` has tail
    /// energy below [`TAIL_TOL`] beyond `|k| = M/4`.
    Auto { cap: usize },
}

impl Default for GridChoice {
    fn default() -> Self {
        GridChoice::Auto { cap: DEFAULT_GRID_CAP }
    }
}

/// A certified inner function on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerFunction {
    chain: FactorChain,
    grid: CircleGrid,
    samples: GridFunction,
    theta0: CMatrix,
    pure: bool,
    unitarity_residual: f64,
    is_tilde: bool,
}

impl InnerFunction {
    pub fn dim(&self) -> usize {
        self.chain.dim()
    }

    pub fn grid(&self) -> &CircleGrid {
        &self.grid
    }

    /// Matrix-valued samples of `Θ`.
    pub fn samples(&self) -> &GridFunction {
        &self.samples
    }

    /// `Θ(0)`.
    pub fn theta0(&self) -> &CMatrix {
        &self.theta0
    }

    pub fn is_pure(&self) -> bool {
        self.pure
    }

    pub fn unitarity_residual(&self) -> f64 {
        self.unitarity_residual
    }

    pub fn chain(&self) -> &FactorChain {
        &self.chain
    }

    pub fn expected_dim(&self) -> usize {
        self.chain.degree()
    }

    /// Whether this is the `Θ̃` of some spec.
    pub fn is_tilde(&self) -> bool {
        self.is_tilde
    }

    pub fn label(&self) -> &'static str {
        if self.is_tilde {
            "theta_tilde"
        } else {
            "theta"
        }
    }

    pub fn eval(&self, z: Complex64) -> CMatrix {
        self.chain.eval(z)
    }

    /// Largest per-entry spectral tail energy beyond `|k| = M/4`.
    pub fn tail_energy(&self) -> f64 {
        tail_energy(&self.samples)
    }

    /// Winding number of `det Θ(e^{it})` about 0, by phase accumulation.
    pub fn det_winding_number(&self) -> i64 {
        let n = self.grid.size();
        let dets: Vec<Complex64> = (0..n).map(|m| self.samples.matrix_at(m).determinant()).collect();
        let total: f64 = (0..n).map(|m| (dets[(m + 1) % n] / dets[m]).arg()).sum();
        (total / (2.0 * std::f64::consts::PI)).round() as i64
    }
}

fn tail_energy(samples: &GridFunction) -> f64 {
    let rep = dft(samples);
    let cutoff = samples.grid().size() / 4;
    (0..samples.shape().components())
        .map(|c| rep.tail_energy(c, cutoff))
        .fold(0.0, f64::max)
}

fn unitarity_residual(samples: &GridFunction) -> f64 {
    let n = samples.grid().size();
    let d = samples.dim();
    let eye = CMatrix::identity(d, d);
    (0..n)
        .map(|m| {
            let t = samples.matrix_at(m);
            op_norm(&(t.adjoint() * &t - &eye))
        })
        .fold(0.0, f64::max)
}

fn certify(chain: FactorChain, grid: CircleGrid, samples: GridFunction, is_tilde: bool) -> Result<InnerFunction> {
    let residual = unitarity_residual(&samples);
    if residual.is_nan() || residual >= UNITARITY_TOL {
        return Err(Error::NotInner {
            residual,
            tol: UNITARITY_TOL,
        });
    }
    let theta0 = chain.eval(Complex64::new(0.0, 0.0));
    let pure = op_norm(&theta0) < 1.0 - PURITY_MARGIN;
    Ok(InnerFunction {
        chain,
        grid,
        samples,
        theta0,
        pure,
        unitarity_residual: residual,
        is_tilde,
    })
}

/// Samples and certifies `Θ`.
pub fn make_inner(spec: &InnerFunctionSpec, grid: GridChoice) -> Result<InnerFunction> {
    spec.validate()?;
    let chain = FactorChain::from_spec(spec);
    let (grid, samples) = match grid {
        GridChoice::Fixed(size) => {
            let grid = CircleGrid::new(size)?;
            let samples = sample_chain(&chain, &grid);
            (grid, samples)
        }
        GridChoice::Auto { cap } => {
            let mut size = AUTO_GRID_START.min(cap.max(CircleGrid::MIN_SIZE)).next_power_of_two();
            loop {
                let grid = CircleGrid::new(size)?;
                let samples = sample_chain(&chain, &grid);
                let tail = tail_energy(&samples);
                if tail < TAIL_TOL {
                    break (grid, samples);
                }
                if size * 2 > cap {
                    return Err(Error::GridTooCoarse { cap, tail });
                }
                size *= 2;
            }
        }
    };
    certify(chain, grid, samples, false)
}

/// `Θ̃(z) = Θ(z̄)*` on the same grid. Samples are an exact index permutation
/// followed by conjugate transposition; the result is re-certified.
pub fn tilde(theta: &InnerFunction) -> InnerFunction {
    let grid = theta.grid.clone();
    let n = grid.size();
    let mut samples = GridFunction::zeros(&grid, theta.samples.shape());
    for m in 0..n {
        samples.set_matrix(m, &theta.samples.matrix_at(grid.flip_index(m)).adjoint());
    }
    let residual = unitarity_residual(&samples);
    debug_assert!(residual < UNITARITY_TOL * 10.0, "tilde lost innerness: {residual}");
    InnerFunction {
        chain: theta.chain.tilde(),
        grid,
        samples,
        theta0: theta.theta0.adjoint(),
        pure: theta.pure,
        unitarity_residual: residual,
        is_tilde: !theta.is_tilde,
    }
}

/// `Θ(0)` for a spec, without sampling.
pub fn theta_at_zero(spec: &InnerFunctionSpec) -> Result<DMatrix<Complex64>> {
    Ok(eval_inner(spec, &[Complex64::new(0.0, 0.0)])?.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn e(d: usize, i: usize) -> CVector {
        let mut v = CVector::zeros(d);
        v[i] = c(1.0, 0.0);
        v
    }

    fn rank1(a: Complex64, v: CVector) -> PotapovFactor {
        PotapovFactor::Rank1 { a, v }
    }

    #[test]
    fn full_shift_scalar() {
        let spec = InnerFunctionSpec::new(1, vec![PotapovFactor::FullShift { k: 1 }]);
        let vals = eval_inner(&spec, &[c(0.0, 0.0), c(0.3, 0.4)]).unwrap();
        assert_eq!(vals[0][(0, 0)], c(0.0, 0.0));
        assert!((vals[1][(0, 0)] - c(0.3, 0.4)).norm() < 1e-15);
    }

    #[test]
    fn blaschke_value_at_origin_is_modulus() {
        let spec = InnerFunctionSpec::new(1, vec![rank1(c(0.5, 0.0), e(1, 0))]);
        let t0 = theta_at_zero(&spec).unwrap();
        assert!((t0[(0, 0)] - c(0.5, 0.0)).norm() < 1e-15);
        let a = c(-0.2, 0.6);
        assert!((blaschke(a, c(0.0, 0.0)) - c(a.norm(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn single_factor_in_two_dims_is_not_pure() {
        let spec = InnerFunctionSpec::new(2, vec![rank1(c(0.5, 0.0), e(2, 0))]);
        let t0 = theta_at_zero(&spec).unwrap();
        let expected = CMatrix::from_diagonal(&CVector::from_vec(vec![c(0.5, 0.0), c(1.0, 0.0)]));
        assert!((t0 - expected).norm() < 1e-15);
        let theta = make_inner(&spec, GridChoice::default()).unwrap();
        assert!(!theta.is_pure());
    }

    #[test]
    fn shift_is_certified_on_small_grid() {
        let spec = InnerFunctionSpec::new(2, vec![PotapovFactor::FullShift { k: 1 }]);
        let theta = make_inner(&spec, GridChoice::Fixed(256)).unwrap();
        assert!(theta.unitarity_residual() < 1e-14);
        assert!(theta.is_pure());
        assert_eq!(theta.theta0(), &CMatrix::zeros(2, 2));
    }

    #[test]
    fn two_rank_one_factors_are_pure() {
        let spec = InnerFunctionSpec::new(2, vec![rank1(c(0.5, 0.0), e(2, 0)), rank1(c(0.0, 0.3), e(2, 1))]);
        let theta = make_inner(&spec, GridChoice::default()).unwrap();
        assert!(theta.is_pure());
        let t0 = theta.theta0();
        assert!((t0[(0, 0)].norm() - 0.5).abs() < 1e-15);
        assert!((t0[(1, 1)].norm() - 0.3).abs() < 1e-15);
        assert!(t0[(0, 1)].norm() < 1e-15 && t0[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn conditioning_guard() {
        let spec = InnerFunctionSpec::new(1, vec![rank1(c(0.99, 0.0), e(1, 0))]);
        assert!(matches!(make_inner(&spec, GridChoice::default()), Err(Error::Spec(_))));
        let spec = InnerFunctionSpec::new(1, vec![rank1(c(1.0, 0.0), e(1, 0))]);
        assert!(matches!(spec.validate(), Err(Error::Spec(_))));
        let spec = InnerFunctionSpec::new(1, vec![rank1(c(0.95, 0.0), e(1, 0))]);
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn rejects_non_unit_v_and_empty_factor_list() {
        let spec = InnerFunctionSpec::new(2, vec![rank1(c(0.5, 0.0), e(2, 0) * c(1.1, 0.0))]);
        assert!(matches!(spec.validate(), Err(Error::Spec(_))));
        assert!(matches!(InnerFunctionSpec::new(2, vec![]).validate(), Err(Error::Spec(_))));
    }

    #[test]
    fn non_unitary_constant_factor_fails_certification() {
        let u = CMatrix::identity(2, 2) * c(1.01, 0.0);
        let spec = InnerFunctionSpec::new(2, vec![PotapovFactor::FullShift { k: 1 }]).with_unitary(u);
        assert!(matches!(make_inner(&spec, GridChoice::Fixed(64)), Err(Error::NotInner { .. })));
    }

    #[test]
    fn auto_grid_cap_is_enforced() {
        let spec = InnerFunctionSpec::new(1, vec![rank1(c(0.95, 0.0), e(1, 0))]);
        let err = make_inner(&spec, GridChoice::Auto { cap: 256 }).unwrap_err();
        assert!(matches!(err, Error::GridTooCoarse { cap: 256, .. }));
        let theta = make_inner(&spec, GridChoice::default()).unwrap();
        assert!(theta.grid().size() <= DEFAULT_GRID_CAP);
        assert!(theta.tail_energy() < TAIL_TOL);
    }

    #[test]
    fn tilde_of_scalar_blaschke_conjugates_zero() {
        let a = c(0.3, 0.5);
        let spec = InnerFunctionSpec::new(1, vec![rank1(a, e(1, 0))]);
        let theta = make_inner(&spec, GridChoice::Fixed(512)).unwrap();
        let tt = tilde(&theta);
        for m in (0..512).step_by(37) {
            let z = theta.grid().point(m);
            assert!((tt.samples().matrix_at(m)[(0, 0)] - blaschke(a.conj(), z)).norm() < 1e-14);
            assert!((tt.eval(z)[(0, 0)] - blaschke(a.conj(), z)).norm() < 1e-14);
        }
        assert_eq!(tt.theta0(), &theta.theta0().adjoint());
    }

    #[test]
    fn tilde_of_power_of_z_is_itself() {
        let spec = InnerFunctionSpec::new(2, vec![PotapovFactor::FullShift { k: 3 }]);
        let theta = make_inner(&spec, GridChoice::Fixed(64)).unwrap();
        let tt = tilde(&theta);
        assert!(tt.samples().max_abs_diff(theta.samples()).unwrap() < 1e-14);
        assert_eq!(tilde(&tt), theta);
    }

    #[test]
    fn expected_dimensions() {
        let z2 = InnerFunctionSpec::new(1, vec![PotapovFactor::FullShift { k: 2 }]);
        assert_eq!(expected_model_dim(&z2), 2);
        let z3 = InnerFunctionSpec::new(3, vec![PotapovFactor::FullShift { k: 1 }]);
        assert_eq!(expected_model_dim(&z3), 3);
        let mixed = InnerFunctionSpec::new(
            2,
            vec![
                rank1(c(0.5, 0.0), e(2, 0)),
                rank1(c(0.0, 0.3), e(2, 1)),
                PotapovFactor::FullShift { k: 1 },
            ],
        );
        assert_eq!(expected_model_dim(&mixed), 4);
        let theta = make_inner(&mixed, GridChoice::default()).unwrap();
        assert_eq!(theta.det_winding_number(), 4);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = InnerFunctionSpec::new(2, vec![rank1(c(0.5, 0.1), e(2, 1)), PotapovFactor::FullShift { k: 2 }])
            .with_unitary(CMatrix::identity(2, 2));
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"rank1\""));
        assert!(text.contains("\"kind\":\"full_shift\""));
        let back: InnerFunctionSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
