//! Delay-Doppler grid geometry and frames.

use std::ops::{Index, IndexMut};

use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Grid dimensions and the physical sampling that goes with them.
///
/// `n` counts Doppler bins (time slots), `m` counts delay bins (subcarriers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridDims {
    pub n: usize,
    pub m: usize,
    /// Subcarrier spacing in Hz.
    pub delta_f: f64,
    /// Symbol time in seconds.
    pub symbol_time: f64,
}

impl GridDims {
    /// Grid with `T·Δf = 1`.
    pub fn new(n: usize, m: usize, delta_f: f64) -> Result<Self> {
        Self::with_symbol_time(n, m, delta_f, 1.0 / delta_f)
    }

    pub fn with_symbol_time(n: usize, m: usize, delta_f: f64, symbol_time: f64) -> Result<Self> {
        if n < 2 || m < 2 {
            return Err(Error::Grid(format!("need N, M >= 2, got N={n}, M={m}")));
        }
        if !(delta_f > 0.0 && delta_f.is_finite()) {
            return Err(Error::Grid(format!("subcarrier spacing must be positive, got {delta_f}")));
        }
        if !(symbol_time > 0.0 && symbol_time.is_finite()) {
            return Err(Error::Grid(format!("symbol time must be positive, got {symbol_time}")));
        }
        Ok(Self { n, m, delta_f, symbol_time })
    }

    /// Unit-spacing grid for tests and small experiments (Δf = 15 kHz).
    pub fn square(n: usize, m: usize) -> Self {
        Self::new(n, m, 15e3).expect("valid small grid")
    }

    #[inline]
    pub fn cells(&self) -> usize {
        self.n * self.m
    }

    /// Frame duration `N·T`.
    pub fn frame_duration(&self) -> f64 {
        self.n as f64 * self.symbol_time
    }

    /// Bandwidth `M·Δf`.
    pub fn bandwidth(&self) -> f64 {
        self.m as f64 * self.delta_f
    }

    /// Phase of the delay-Doppler coupling term, `2π·ν_taps·l / (NT·MΔf)`.
    #[inline]
    pub fn coupling_angle<T: Real>(&self, doppler_taps: T, delay_tap: T) -> T {
        let scale = 1.0 / (self.frame_duration() * self.bandwidth());
        T::TAU() * doppler_taps * delay_tap * T::of(scale)
    }

    #[inline]
    pub fn index(&self, k: usize, l: usize) -> usize {
        k * self.m + l
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / self.m, idx % self.m)
    }
}

/// `N×M` grid of complex delay-Doppler symbols, row-major in `[k][l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DdFrame<T> {
    dims: GridDims,
    cells: Vec<Complex<T>>,
}

impl<T: Real> DdFrame<T> {
    pub fn zeros(dims: GridDims) -> Self {
        Self { dims, cells: vec![Complex::zero(); dims.cells()] }
    }

    pub fn from_cells(dims: GridDims, cells: Vec<Complex<T>>) -> Result<Self> {
        if cells.len() != dims.cells() {
            return Err(Error::LengthMismatch(cells.len(), dims.cells()));
        }
        Ok(Self { dims, cells })
    }

    /// Frame with a single nonzero cell.
    pub fn delta(dims: GridDims, k: usize, l: usize, value: Complex<T>) -> Self {
        let mut f = Self::zeros(dims);
        f[(k, l)] = value;
        f
    }

    #[inline]
    pub fn dims(&self) -> GridDims {
        self.dims
    }

    #[inline]
    pub fn cells(&self) -> &[Complex<T>] {
        &self.cells
    }

    #[inline]
    pub fn cells_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.cells
    }

    pub fn into_cells(self) -> Vec<Complex<T>> {
        self.cells
    }

    /// Largest absolute cell-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.cells
            .iter()
            .zip(&other.cells)
            .map(|(a, b)| (a - b).norm())
            .fold(T::zero(), T::max)
    }

    pub fn energy(&self) -> T {
        self.cells.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn scale(&self, a: Complex<T>) -> Self {
        Self { dims: self.dims, cells: self.cells.iter().map(|&c| c * a).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            dims: self.dims,
            cells: self.cells.iter().zip(&other.cells).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.cells.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub(crate) fn check_dims(&self, dims: &GridDims) -> Result<()> {
        if self.dims.n != dims.n || self.dims.m != dims.m {
            return Err(Error::DimMismatch {
                got_n: self.dims.n,
                got_m: self.dims.m,
                want_n: dims.n,
                want_m: dims.m,
            });
        }
        Ok(())
    }
}

impl<T> Index<(usize, usize)> for DdFrame<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (k, l): (usize, usize)) -> &Complex<T> {
        &self.cells[k * self.dims.m + l]
    }
}

impl<T> IndexMut<(usize, usize)> for DdFrame<T> {
    #[inline]
    fn index_mut(&mut self, (k, l): (usize, usize)) -> &mut Complex<T> {
        &mut self.cells[k * self.dims.m + l]
    }
}
