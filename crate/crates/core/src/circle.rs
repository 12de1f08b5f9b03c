//! Functions on the unit circle sampled at `M` uniform points.
//!
//! A [`GridFunction`] stores the values of an `E`-valued (vector) or
//! `L(E)`-valued (matrix) function at `t_m = 2πm/M`. Fourier coefficients use
//! the convention `c_k = (1/M) Σ_m f(e^{it_m}) e^{-ikt_m}` with frequencies
//! `k ∈ [-M/2, M/2)`; negative frequencies occupy the upper half of the
//! coefficient array, as in the usual FFT ordering.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform grid of `M` points on the unit circle, `M` a power of two.
///
/// Carries its own FFT plans so that no process-wide plan cache is needed.
#[derive(Clone)]
pub struct CircleGrid {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl CircleGrid {
    pub const MIN_SIZE: usize = 8;

    pub fn new(size: usize) -> Result<Self> {
        if size < Self::MIN_SIZE || !size.is_power_of_two() {
            return Err(Error::Grid(format!(
                "grid size {size} must be a power of two and at least {}",
                Self::MIN_SIZE
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        })
    }

    /// Number of sample points `M`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn angle(&self, m: usize) -> f64 {
        2.0 * PI * m as f64 / self.size as f64
    }

    /// `e^{it_m}`.
    pub fn point(&self, m: usize) -> Complex64 {
        Complex64::from_polar(1.0, self.angle(m))
    }

    /// `e^{ik t_m}`, computed from the reduced exponent so large `k` stays exact.
    pub fn point_power(&self, m: usize, k: i64) -> Complex64 {
        let e = (k.rem_euclid(self.size as i64) as usize * m) % self.size;
        self.point(e)
    }

    /// Index of `e^{-it_m}`.
    pub fn flip_index(&self, m: usize) -> usize {
        (self.size - m) % self.size
    }

    /// Storage slot of frequency `k`, for `k ∈ [-M/2, M/2)`.
    pub fn slot(&self, k: i64) -> usize {
        k.rem_euclid(self.size as i64) as usize
    }

    /// Frequency stored in `slot`.
    pub fn frequency(&self, slot: usize) -> i64 {
        if slot < self.size / 2 {
            slot as i64
        } else {
            slot as i64 - self.size as i64
        }
    }

    fn check_same(&self, other: &CircleGrid) -> Result<()> {
        if self.size != other.size {
            return Err(Error::Grid(format!(
                "grid sizes differ: {} vs {}",
                self.size, other.size
            )));
        }
        Ok(())
    }
}

impl PartialEq for CircleGrid {
    fn eq(&self, other: &Self) -> bool {
        self.size == other.size
    }
}

impl Eq for CircleGrid {}

impl fmt::Debug for CircleGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CircleGrid").field("size", &self.size).finish()
    }
}

/// Value type of a sampled function: `E = C^d` or `L(E) = C^{d×d}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Vector(usize),
    Matrix(usize),
}

impl Shape {
    pub fn dim(&self) -> usize {
        match *self {
            Shape::Vector(d) | Shape::Matrix(d) => d,
        }
    }

    /// Number of scalar components per sample.
    pub fn components(&self) -> usize {
        match *self {
            Shape::Vector(d) => d,
            Shape::Matrix(d) => d * d,
        }
    }
}

/// Samples of a function on a [`CircleGrid`], stored component-major:
/// entry `(c, m)` lives at `c * M + m`. Matrix components are row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: CircleGrid,
    shape: Shape,
    data: Vec<Complex64>,
}

impl GridFunction {
    pub fn zeros(grid: &CircleGrid, shape: Shape) -> Self {
        Self {
            grid: grid.clone(),
            shape,
            data: vec![Complex64::new(0.0, 0.0); shape.components() * grid.size()],
        }
    }

    /// Builds a function from component-major samples.
    pub fn from_samples(grid: &CircleGrid, shape: Shape, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != shape.components() * grid.size() {
            return Err(Error::Shape(format!(
                "expected {} samples, got {}",
                shape.components() * grid.size(),
                data.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            shape,
            data,
        })
    }

    /// Vector-valued function from a per-sample closure receiving `(m, e^{it_m})`.
    pub fn from_vector_fn<F>(grid: &CircleGrid, d: usize, mut f: F) -> Self
    where
        F: FnMut(usize, Complex64) -> DVector<Complex64>,
    {
        let mut out = Self::zeros(grid, Shape::Vector(d));
        for m in 0..grid.size() {
            let v = f(m, grid.point(m));
            out.set_vector(m, &v);
        }
        out
    }

    /// Matrix-valued function from a per-sample closure receiving `(m, e^{it_m})`.
    pub fn from_matrix_fn<F>(grid: &CircleGrid, d: usize, mut f: F) -> Self
    where
        F: FnMut(usize, Complex64) -> DMatrix<Complex64>,
    {
        let mut out = Self::zeros(grid, Shape::Matrix(d));
        for m in 0..grid.size() {
            let v = f(m, grid.point(m));
            out.set_matrix(m, &v);
        }
        out
    }

    /// `z^k x` for a fixed vector `x`.
    pub fn monomial(grid: &CircleGrid, k: i64, x: &DVector<Complex64>) -> Self {
        Self::from_vector_fn(grid, x.len(), |m, _| x * grid.point_power(m, k))
    }

    pub fn constant(grid: &CircleGrid, x: &DVector<Complex64>) -> Self {
        Self::monomial(grid, 0, x)
    }

    pub fn grid(&self) -> &CircleGrid {
        &self.grid
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.data
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.size();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.grid.size();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn vector_at(&self, m: usize) -> DVector<Complex64> {
        let n = self.grid.size();
        DVector::from_fn(self.shape.components(), |c, _| self.data[c * n + m])
    }

    pub fn matrix_at(&self, m: usize) -> DMatrix<Complex64> {
        let n = self.grid.size();
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, c| self.data[(r * d + c) * n + m])
    }

    pub fn set_vector(&mut self, m: usize, v: &DVector<Complex64>) {
        let n = self.grid.size();
        for (c, x) in v.iter().enumerate() {
            self.data[c * n + m] = *x;
        }
    }

    pub fn set_matrix(&mut self, m: usize, v: &DMatrix<Complex64>) {
        let n = self.grid.size();
        let d = self.dim();
        for r in 0..d {
            for c in 0..d {
                self.data[(r * d + c) * n + m] = v[(r, c)];
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `L²` norm, `sqrt(<f, f>)`.
    pub fn norm(&self) -> f64 {
        let s: f64 = self.data.iter().map(|z| z.norm_sqr()).sum();
        (s / self.grid.size() as f64).sqrt()
    }

    pub fn scale(&self, alpha: Complex64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= alpha);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(Complex64::new(-1.0, 0.0), other)
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: Complex64, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += alpha * b);
        Ok(out)
    }

    pub(crate) fn axpy_in_place(&mut self, alpha: Complex64, other: &Self) {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += alpha * b);
    }

    /// Pointwise multiplication by `e^{ikt}`.
    pub fn mul_z_power(&self, k: i64) -> Self {
        let n = self.grid.size();
        let mut out = self.clone();
        for c in 0..self.shape.components() {
            for m in 0..n {
                out.data[c * n + m] *= self.grid.point_power(m, k);
            }
        }
        out
    }

    /// Pointwise multiplication by a scalar function given by its samples.
    pub fn mul_scalar_samples(&self, s: &[Complex64]) -> Self {
        let n = self.grid.size();
        let mut out = self.clone();
        for chunk in out.data.chunks_mut(n) {
            for (x, w) in chunk.iter_mut().zip(s) {
                *x *= w;
            }
        }
        out
    }

    /// Pointwise conjugate transpose of a matrix-valued function.
    pub fn adjoint_pointwise(&self) -> Result<Self> {
        let Shape::Matrix(d) = self.shape else {
            return Err(Error::Shape("adjoint of a vector-valued function".into()));
        };
        let n = self.grid.size();
        let mut out = Self::zeros(&self.grid, self.shape);
        for r in 0..d {
            for c in 0..d {
                for m in 0..n {
                    out.data[(c * d + r) * n + m] = self.data[(r * d + c) * n + m].conj();
                }
            }
        }
        Ok(out)
    }

    /// Pointwise `Θ(e^{it}) f(e^{it})` for matrix-valued `self` and vector-valued `f`.
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.apply_impl(f, false)
    }

    /// Pointwise `Θ(e^{it})* f(e^{it})`.
    pub fn apply_adjoint(&self, f: &GridFunction) -> Result<GridFunction> {
        self.apply_impl(f, true)
    }

    fn apply_impl(&self, f: &GridFunction, adjoint: bool) -> Result<GridFunction> {
        let (Shape::Matrix(d), Shape::Vector(e)) = (self.shape, f.shape) else {
            return Err(Error::Shape(format!(
                "pointwise apply needs matrix × vector, got {:?} × {:?}",
                self.shape, f.shape
            )));
        };
        if d != e {
            return Err(Error::Shape(format!("matrix dim {d} vs vector dim {e}")));
        }
        self.grid.check_same(&f.grid)?;
        let n = self.grid.size();
        let mut out = GridFunction::zeros(&self.grid, f.shape);
        for r in 0..d {
            for c in 0..d {
                let src = if adjoint { c * d + r } else { r * d + c };
                for m in 0..n {
                    let a = self.data[src * n + m];
                    let a = if adjoint { a.conj() } else { a };
                    out.data[r * n + m] += a * f.data[c * n + m];
                }
            }
        }
        Ok(out)
    }

    /// Pointwise matrix-vector product with a constant matrix.
    pub fn apply_constant(&self, a: &DMatrix<Complex64>) -> Result<GridFunction> {
        let Shape::Vector(d) = self.shape else {
            return Err(Error::Shape("constant apply needs a vector-valued function".into()));
        };
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::Shape(format!(
                "matrix is {}×{}, function dim {d}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = self.grid.size();
        let mut out = GridFunction::zeros(&self.grid, self.shape);
        for r in 0..d {
            for c in 0..d {
                let arc = a[(r, c)];
                for m in 0..n {
                    out.data[r * n + m] += arc * self.data[c * n + m];
                }
            }
        }
        Ok(out)
    }

    /// Largest absolute sample difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }
}

/// Fourier coefficients of a [`GridFunction`], same component-major layout,
/// frequency `k` stored in slot `k mod M`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierRep {
    grid: CircleGrid,
    shape: Shape,
    coeffs: Vec<Complex64>,
}

impl FourierRep {
    pub fn zeros(grid: &CircleGrid, shape: Shape) -> Self {
        Self {
            grid: grid.clone(),
            shape,
            coeffs: vec![Complex64::new(0.0, 0.0); shape.components() * grid.size()],
        }
    }

    pub fn grid(&self) -> &CircleGrid {
        &self.grid
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn get(&self, component: usize, k: i64) -> Complex64 {
        self.coeffs[component * self.grid.size() + self.grid.slot(k)]
    }

    pub fn set(&mut self, component: usize, k: i64, value: Complex64) {
        let slot = self.grid.slot(k);
        self.coeffs[component * self.grid.size() + slot] = value;
    }

    /// Coefficient `c_k` of a vector-valued function.
    pub fn vector(&self, k: i64) -> DVector<Complex64> {
        DVector::from_fn(self.shape.components(), |c, _| self.get(c, k))
    }

    /// Coefficient `c_k` of a matrix-valued function.
    pub fn matrix(&self, k: i64) -> DMatrix<Complex64> {
        let d = self.shape.dim();
        DMatrix::from_fn(d, d, |r, c| self.get(r * d + c, k))
    }

    /// Replaces `c_k` by `c_{k+1}` for every slot (cyclically): the coefficient
    /// form of division by `z`.
    pub fn shift_down(&self) -> Self {
        let n = self.grid.size();
        let mut out = self.clone();
        for c in 0..self.shape.components() {
            let src = &self.coeffs[c * n..(c + 1) * n];
            let dst = &mut out.coeffs[c * n..(c + 1) * n];
            for s in 0..n {
                dst[s] = src[(s + 1) % n];
            }
        }
        out
    }

    /// Energy `Σ |c_k|²` of component `c` over `|k| ≥ cutoff` (including the
    /// Nyquist slot).
    pub fn tail_energy(&self, component: usize, cutoff: usize) -> f64 {
        let n = self.grid.size();
        let block = &self.coeffs[component * n..(component + 1) * n];
        block
            .iter()
            .enumerate()
            .filter(|(s, _)| self.grid.frequency(*s).unsigned_abs() as usize >= cutoff)
            .map(|(_, z)| z.norm_sqr())
            .sum()
    }

    /// Coefficient-space pairing `Σ_k <c_k(self), c_k(other)>`.
    pub fn parseval_pairing(&self, other: &FourierRep) -> Result<Complex64> {
        self.grid.check_same(&other.grid)?;
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "{:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b.conj())
            .sum())
    }
}

/// Forward transform with the `1/M` normalization.
pub fn dft(f: &GridFunction) -> FourierRep {
    let n = f.grid.size();
    let scale = 1.0 / n as f64;
    let mut coeffs = f.data.clone();
    for chunk in coeffs.chunks_exact_mut(n) {
        f.grid.forward.process(chunk);
        chunk.iter_mut().for_each(|z| *z *= scale);
    }
    FourierRep {
        grid: f.grid.clone(),
        shape: f.shape,
        coeffs,
    }
}

/// Inverse of [`dft`]: `f(e^{it_m}) = Σ_k c_k e^{ikt_m}`.
pub fn idft(c: &FourierRep) -> GridFunction {
    let n = c.grid.size();
    let mut data = c.coeffs.clone();
    for chunk in data.chunks_exact_mut(n) {
        c.grid.inverse.process(chunk);
    }
    GridFunction {
        grid: c.grid.clone(),
        shape: c.shape,
        data,
    }
}

/// Orthogonal projection onto `H²`: zero every coefficient with `k < 0`.
pub fn analytic_project(f: &GridFunction) -> GridFunction {
    let mut c = dft(f);
    zero_negative(&mut c);
    idft(&c)
}

pub(crate) fn zero_negative(c: &mut FourierRep) {
    let n = c.grid.size();
    for chunk in c.coeffs.chunks_exact_mut(n) {
        chunk[n / 2..].iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    }
}

/// `L²` norm of the negative-frequency part of `f`.
pub fn negative_part_norm(f: &GridFunction) -> f64 {
    let c = dft(f);
    let n = c.grid.size();
    c.coeffs
        .chunks_exact(n)
        .flat_map(|chunk| chunk[n / 2..].iter())
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `<f, g> = (1/M) Σ_m <f(e^{it_m}), g(e^{it_m})>`, linear in `f`. Matrix-valued
/// arguments use the Hilbert–Schmidt pairing at each point.
pub fn inner_product(f: &GridFunction, g: &GridFunction) -> Result<Complex64> {
    f.check_compatible(g)?;
    let s: Complex64 = f.data.iter().zip(&g.data).map(|(a, b)| a * b.conj()).sum();
    Ok(s / f.grid.size() as f64)
}

/// `f(e^{it}) ↦ f(e^{-it})`.
pub fn flip(f: &GridFunction) -> GridFunction {
    let n = f.grid.size();
    let mut out = f.clone();
    for c in 0..f.shape.components() {
        for m in 0..n {
            out.data[c * n + m] = f.data[c * n + f.grid.flip_index(m)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn vec2(a: Complex64, b: Complex64) -> DVector<Complex64> {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn rejects_bad_grid_sizes() {
        assert!(matches!(CircleGrid::new(96), Err(Error::Grid(_))));
        assert!(matches!(CircleGrid::new(4), Err(Error::Grid(_))));
        assert!(CircleGrid::new(8).is_ok());
    }

    #[test]
    fn constant_has_only_zero_coefficient() {
        let grid = CircleGrid::new(32).unwrap();
        let x = vec2(c(1.0, -2.0), c(0.5, 0.25));
        let rep = dft(&GridFunction::constant(&grid, &x));
        for k in -16..16 {
            let ck = rep.vector(k);
            let expected = if k == 0 { x.clone() } else { DVector::zeros(2) };
            assert!((ck - expected).norm() < 1e-15, "k = {k}");
        }
    }

    #[test]
    fn single_frequency() {
        let grid = CircleGrid::new(16).unwrap();
        let x = vec2(c(0.0, 1.0), c(3.0, 0.0));
        let rep = dft(&GridFunction::monomial(&grid, 1, &x));
        assert!((rep.vector(1) - &x).norm() < 1e-15);
        assert!(rep.vector(0).norm() < 1e-15);
        assert!(rep.vector(-1).norm() < 1e-15);
    }

    #[test]
    fn analytic_projection_drops_negative_frequencies() {
        let grid = CircleGrid::new(64).unwrap();
        let x = vec2(c(1.0, 0.0), c(0.0, 2.0));
        let y = vec2(c(-1.0, 1.0), c(0.5, 0.0));
        let f = GridFunction::monomial(&grid, -1, &x)
            .add(&GridFunction::constant(&grid, &x))
            .unwrap()
            .add(&GridFunction::monomial(&grid, 1, &y))
            .unwrap();
        let expected = GridFunction::constant(&grid, &x)
            .add(&GridFunction::monomial(&grid, 1, &y))
            .unwrap();
        let p = analytic_project(&f);
        assert!(p.max_abs_diff(&expected).unwrap() < 1e-14);
        // idempotent on analytic polynomials
        assert!(analytic_project(&expected).max_abs_diff(&expected).unwrap() < 1e-14);
    }

    #[test]
    fn inner_product_orthogonality_and_normalization() {
        let grid = CircleGrid::new(16).unwrap();
        let x = vec2(c(1.0, 0.0), c(0.0, 0.0));
        let one = GridFunction::constant(&grid, &x);
        let zx = GridFunction::monomial(&grid, 1, &x);
        assert!((inner_product(&one, &one).unwrap() - 1.0).norm() < 1e-15);
        assert!(inner_product(&zx, &one).unwrap().norm() < 1e-15);
    }

    #[test]
    fn inner_product_shape_mismatch() {
        let grid = CircleGrid::new(16).unwrap();
        let f = GridFunction::zeros(&grid, Shape::Vector(2));
        let g = GridFunction::zeros(&grid, Shape::Vector(3));
        assert!(matches!(inner_product(&f, &g), Err(Error::Shape(_))));
        let h = GridFunction::zeros(&CircleGrid::new(32).unwrap(), Shape::Vector(2));
        assert!(matches!(inner_product(&f, &h), Err(Error::Grid(_))));
    }

    #[test]
    fn flip_negates_frequency() {
        let grid = CircleGrid::new(32).unwrap();
        let x = vec2(c(1.0, 1.0), c(2.0, 0.0));
        let f = GridFunction::monomial(&grid, 1, &x);
        let g = GridFunction::monomial(&grid, -1, &x);
        assert!(flip(&f).max_abs_diff(&g).unwrap() < 1e-15);
        let k = GridFunction::constant(&grid, &x);
        assert_eq!(flip(&k), k);
        assert_eq!(flip(&flip(&f)), f);
    }

    #[test]
    fn shift_down_divides_by_z() {
        let grid = CircleGrid::new(16).unwrap();
        let x = vec2(c(1.0, 0.0), c(0.0, 1.0));
        let f = GridFunction::monomial(&grid, 3, &x);
        let g = idft(&dft(&f).shift_down());
        assert!(g.max_abs_diff(&GridFunction::monomial(&grid, 2, &x)).unwrap() < 1e-14);
    }

    #[test]
    fn pointwise_apply_and_adjoint() {
        let grid = CircleGrid::new(8).unwrap();
        let a = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 2.0), c(3.0, 0.0), c(0.0, 0.0)]);
        let theta = GridFunction::from_matrix_fn(&grid, 2, |_, z| &a * z);
        let x = vec2(c(1.0, 0.0), c(1.0, 1.0));
        let f = GridFunction::constant(&grid, &x);
        let tf = theta.apply(&f).unwrap();
        let taf = theta.apply_adjoint(&f).unwrap();
        for m in 0..8 {
            let z = grid.point(m);
            assert!((tf.vector_at(m) - &a * &x * z).norm() < 1e-14);
            assert!((taf.vector_at(m) - a.adjoint() * &x * z.conj()).norm() < 1e-14);
        }
        let adj = theta.adjoint_pointwise().unwrap();
        assert!((adj.matrix_at(3) - theta.matrix_at(3).adjoint()).norm() < 1e-15);
    }
}
