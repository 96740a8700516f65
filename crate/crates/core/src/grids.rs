//! Uniform periodic grids for x and the (y, η) phase plane, and the fields living on them.
//!
//! Every grid excludes its right endpoint: the point `b` is identified with `a`
//! (likewise `d` with `c` and `β` with `α`). Discrete integrals are plain
//! Δ-weighted sums over the grid points, which on a periodic grid coincide with
//! the trapezoidal rule.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex;

use crate::error::{Result, SleError};
use crate::scalar::Real;

/// Periodic grid `x_j = a + j·dx`, `j = 0..M`, with `M` even.
#[derive(Debug, Clone, PartialEq)]
pub struct XGrid<T> {
    a: T,
    b: T,
    m: usize,
    dx: T,
    points: Vec<T>,
    /// Angular frequencies in FFT storage order (slot `i` holds mode `ℓ = i` for
    /// `i < M/2` and `ℓ = i − M` otherwise).
    omegas: Vec<T>,
}

impl<T: Real> XGrid<T> {
    pub fn new(a: T, b: T, m: usize) -> Result<Self> {
        if m == 0 || !m.is_multiple_of(2) {
            return Err(SleError::InvalidGrid(format!(
                "x point count must be even and positive, got {m}"
            )));
        }
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(SleError::InvalidGrid(format!(
                "x interval must satisfy a < b, got ({a}, {b})"
            )));
        }
        let len = b - a;
        let dx = len / T::from_usize_lossy(m);
        let points = (0..m).map(|j| a + T::from_usize_lossy(j) * dx).collect();
        let base = T::TAU() / len;
        let omegas = (0..m)
            .map(|i| base * T::lit(Self::mode_of_slot(m, i) as f64))
            .collect();
        Ok(Self {
            a,
            b,
            m,
            dx,
            points,
            omegas,
        })
    }

    #[inline]
    fn mode_of_slot(m: usize, slot: usize) -> isize {
        if slot < m / 2 {
            slot as isize
        } else {
            slot as isize - m as isize
        }
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn b(&self) -> T {
        self.b
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn length(&self) -> T {
        self.b - self.a
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// Frequencies `ω_ℓ` in FFT storage order.
    pub fn fft_omegas(&self) -> &[T] {
        &self.omegas
    }

    /// `ω_ℓ = 2πℓ/(b − a)` for `ℓ = −M/2..M/2−1`.
    pub fn omega(&self, mode: isize) -> T {
        T::TAU() / self.length() * T::lit(mode as f64)
    }

    /// Storage slot of Fourier mode `ℓ`.
    pub fn slot_of_mode(&self, mode: isize) -> usize {
        let half = (self.m / 2) as isize;
        assert!((-half..half).contains(&mode), "mode {mode} out of range");
        mode.rem_euclid(self.m as isize) as usize
    }

    pub fn mode_of(&self, slot: usize) -> isize {
        Self::mode_of_slot(self.m, slot)
    }

    /// Slot of the Nyquist mode `ℓ = −M/2`.
    pub fn nyquist_slot(&self) -> usize {
        self.m / 2
    }
}

/// Periodic phase-space grid `y_j = c + jΔy`, `η_k = α + kΔη`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid<T> {
    c: T,
    d: T,
    alpha: T,
    beta: T,
    dy: T,
    deta: T,
    y: Vec<T>,
    eta: Vec<T>,
}

impl<T: Real> PhaseGrid<T> {
    pub fn new(c: T, d: T, j_count: usize, alpha: T, beta: T, k_count: usize) -> Result<Self> {
        if j_count == 0 || k_count == 0 {
            return Err(SleError::InvalidGrid(format!(
                "phase grid counts must be positive, got J = {j_count}, K = {k_count}"
            )));
        }
        if !(d > c) || !(beta > alpha) {
            return Err(SleError::InvalidGrid(format!(
                "phase intervals must be non-degenerate, got y in ({c}, {d}), eta in ({alpha}, {beta})"
            )));
        }
        let dy = (d - c) / T::from_usize_lossy(j_count);
        let deta = (beta - alpha) / T::from_usize_lossy(k_count);
        let y = (0..j_count)
            .map(|j| c + T::from_usize_lossy(j) * dy)
            .collect();
        let eta = (0..k_count)
            .map(|k| alpha + T::from_usize_lossy(k) * deta)
            .collect();
        Ok(Self {
            c,
            d,
            alpha,
            beta,
            dy,
            deta,
            y,
            eta,
        })
    }

    pub fn c(&self) -> T {
        self.c
    }

    pub fn d(&self) -> T {
        self.d
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn j_count(&self) -> usize {
        self.y.len()
    }

    pub fn k_count(&self) -> usize {
        self.eta.len()
    }

    pub fn dy(&self) -> T {
        self.dy
    }

    pub fn deta(&self) -> T {
        self.deta
    }

    pub fn cell_area(&self) -> T {
        self.dy * self.deta
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn eta(&self) -> &[T] {
        &self.eta
    }

    pub fn max_abs_eta(&self) -> T {
        self.eta.iter().fold(T::zero(), |acc, e| acc.max(e.abs()))
    }

    /// Cyclic index along y.
    #[inline]
    pub fn wrap_j(&self, j: isize) -> usize {
        j.rem_euclid(self.y.len() as isize) as usize
    }

    /// Cyclic index along η.
    #[inline]
    pub fn wrap_k(&self, k: isize) -> usize {
        k.rem_euclid(self.eta.len() as isize) as usize
    }

    /// Index of the grid point nearest to `(y, η)`, with periodic wrap.
    pub fn nearest_cell(&self, y: T, eta: T) -> (usize, usize) {
        let j = ((y - self.c) / self.dy).round().to_isize().unwrap_or(0);
        let k = ((eta - self.alpha) / self.deta)
            .round()
            .to_isize()
            .unwrap_or(0);
        (self.wrap_j(j), self.wrap_k(k))
    }
}

pub fn make_xgrid<T: Real>(a: T, b: T, m: usize) -> Result<XGrid<T>> {
    XGrid::new(a, b, m)
}

pub fn make_phasegrid<T: Real>(
    c: T,
    d: T,
    j_count: usize,
    alpha: T,
    beta: T,
    k_count: usize,
) -> Result<PhaseGrid<T>> {
    PhaseGrid::new(c, d, j_count, alpha, beta, k_count)
}

/// Wave function samples on an [`XGrid`] together with the semiclassical parameter.
#[derive(Debug, Clone)]
pub struct WaveField<T> {
    grid: Arc<XGrid<T>>,
    values: Vec<Complex<T>>,
    h: T,
}

impl<T: Real> WaveField<T> {
    pub fn new(grid: Arc<XGrid<T>>, values: Vec<Complex<T>>, h: T) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SleError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if !(h > T::zero() && h <= T::one()) {
            return Err(SleError::InvalidParameter(format!(
                "semiclassical parameter must satisfy 0 < h <= 1, got {h}"
            )));
        }
        if values
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(SleError::NonFinite("wave field"));
        }
        Ok(Self { grid, values, h })
    }

    pub fn from_fn(grid: Arc<XGrid<T>>, h: T, f: impl Fn(T) -> Complex<T>) -> Result<Self> {
        let values = grid.points().iter().map(|&x| f(x)).collect();
        Self::new(grid, values, h)
    }

    pub fn grid(&self) -> &Arc<XGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn h(&self) -> T {
        self.h
    }

    /// Rescales the samples to unit discrete ℓ² norm.
    pub fn normalize(&mut self) -> Result<()> {
        let norm = l2_norm_discrete(self);
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(SleError::InvalidParameter(
                "cannot normalize a zero or non-finite wave field".into(),
            ));
        }
        let inv = norm.recip();
        self.values.iter_mut().for_each(|z| *z = z.scale(inv));
        Ok(())
    }
}

/// Non-negative phase-space density `μ_jk` on a [`PhaseGrid`]; rows are y, columns η.
#[derive(Debug, Clone)]
pub struct PhaseDensity<T> {
    grid: Arc<PhaseGrid<T>>,
    values: Array2<T>,
}

impl<T: Real> PhaseDensity<T> {
    pub fn new(grid: Arc<PhaseGrid<T>>, values: Array2<T>) -> Result<Self> {
        let shape = (grid.j_count(), grid.k_count());
        if values.dim() != shape {
            return Err(SleError::LengthMismatch {
                expected: shape.0 * shape.1,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SleError::NonFinite("phase density"));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<PhaseGrid<T>>) -> Self {
        let values = Array2::from_elem((grid.j_count(), grid.k_count()), T::zero());
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<PhaseGrid<T>>, f: impl Fn(T, T) -> T) -> Result<Self> {
        let values = Array2::from_shape_fn((grid.j_count(), grid.k_count()), |(j, k)| {
            f(grid.y()[j], grid.eta()[k])
        });
        Self::new(grid, values)
    }

    /// Unit mass concentrated in cell `(j, k)`: `μ_jk = 1/(ΔyΔη)`.
    pub fn point_mass(grid: Arc<PhaseGrid<T>>, j: usize, k: usize) -> Self {
        let mut mu = Self::zeros(grid);
        let area = mu.grid.cell_area();
        mu.values[[j, k]] = area.recip();
        mu
    }

    pub fn grid(&self) -> &Arc<PhaseGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<T> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<T> {
        self.values
    }

    /// Cyclic read: `(j + J, k)` and `(j, k − K)` address the same entry as `(j, k)`.
    #[inline]
    pub fn at(&self, j: isize, k: isize) -> T {
        self.values[[self.grid.wrap_j(j), self.grid.wrap_k(k)]]
    }

    /// `η`-marginal `Σ_k μ_jk Δη`, one entry per `y_j`.
    pub fn y_marginal(&self) -> Vec<T> {
        let deta = self.grid.deta();
        self.values
            .rows()
            .into_iter()
            .map(|row| row.iter().copied().sum::<T>() * deta)
            .collect()
    }

    /// Cell `(j, k)` holding the largest value (first one on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = ((0, 0), T::neg_infinity());
        for ((j, k), &v) in self.values.indexed_iter() {
            if v > best.1 {
                best = ((j, k), v);
            }
        }
        best.0
    }
}

/// `‖ψ‖_{ℓ²} = ((b − a)/M · Σ_j |ψ_j|²)^{1/2}`.
pub fn l2_norm_discrete<T: Real>(field: &WaveField<T>) -> T {
    l2_norm(field.values(), field.grid().dx())
}

/// Discrete ℓ² norm of complex samples with spacing `dx`.
pub fn l2_norm<T: Real>(values: &[Complex<T>], dx: T) -> T {
    (values.iter().map(|z| z.norm_sqr()).sum::<T>() * dx).sqrt()
}

/// Discrete ℓ² norm of real samples with spacing `dx`.
pub fn l2_norm_real<T: Real>(values: &[T], dx: T) -> T {
    (values.iter().map(|&v| v * v).sum::<T>() * dx).sqrt()
}

/// `Σ_jk μ_jk ΔyΔη`.
pub fn phase_mass<T: Real>(mu: &PhaseDensity<T>) -> T {
    mu.values().iter().copied().sum::<T>() * mu.grid().cell_area()
}

/// `(ΔyΔη Σ_jk |μ_jk|²)^{1/2}`.
pub fn phase_l2_norm<T: Real>(values: &Array2<T>, grid: &PhaseGrid<T>) -> T {
    (values.iter().map(|&v| v * v).sum::<T>() * grid.cell_area()).sqrt()
}
