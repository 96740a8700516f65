//! Discrete h-scaled Wigner transform of a periodic wave function.
//!
//! With `s = hy/2` the transform reads
//! `w(x, ξ) = (1/πh) ∫ f(x − s) f̄(x + s) e^{2iξs/h} ds`.
//! The integrand is sampled at `s_n = nΔx/2`; odd `n` need `f` half-way between
//! grid points, which is taken from the trigonometric interpolant by a spectral
//! phase shift. Offsets wrap periodically and only minimum-image lags
//! `|2s| < b − a` contribute. The lag buffer is zero-padded to `2M` samples so
//! the result lives on
//! `ξ_m = m·πh/(b − a)`, `m = −M..M−1`, which spans `[−Ξ, Ξ)` with
//! `Ξ = h·ω_{M/2}`. On that lattice the transform of the interpolant is exact:
//! the zeroth moment reproduces `|ψ_j|²` to rounding.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, SleError};
use crate::grids::{WaveField, XGrid};
use crate::scalar::Real;
use crate::schrodinger::Spectral;

/// `w(x_j, ξ_m)` on the full `M × 2M` lattice.
#[derive(Debug, Clone)]
pub struct WignerField<T> {
    pub xg: Arc<XGrid<T>>,
    pub xi: Vec<T>,
    pub values: Array2<T>,
    pub h: T,
    /// Largest `|Im w|` seen before discarding the imaginary part.
    pub max_imag_residue: T,
}

impl<T: Real> WignerField<T> {
    pub fn dxi(&self) -> T {
        xi_spacing(&self.xg, self.h)
    }

    /// `(Σ_jm |w_jm|² ΔxΔξ)^{1/2}`.
    pub fn l2_norm(&self) -> T {
        (self.values.iter().map(|&w| w * w).sum::<T>() * self.xg.dx() * self.dxi()).sqrt()
    }
}

/// ξ-moments of the transform at every grid point.
#[derive(Debug, Clone)]
pub struct WignerMoments<T> {
    /// `Δξ Σ_m w`
    pub zeroth: Vec<T>,
    /// `Δξ Σ_m ξ_m w`
    pub first: Vec<T>,
    /// `Δξ Σ_m (ξ_m²/2) w`
    pub second: Vec<T>,
    pub max_imag_residue: T,
}

pub fn xi_spacing<T: Real>(xg: &XGrid<T>, h: T) -> T {
    T::PI() * h / xg.length()
}

/// The `2M` ξ-points, ascending.
pub fn xi_points<T: Real>(xg: &XGrid<T>, h: T) -> Vec<T> {
    let m = xg.len() as isize;
    let dxi = xi_spacing(xg, h);
    (-m..m).map(|i| T::lit(i as f64) * dxi).collect()
}

/// Samples of the trigonometric interpolant at spacing `Δx/2`.
fn half_grid_samples<T: Real>(psi: &WaveField<T>) -> Result<Vec<Complex<T>>> {
    let xg = psi.grid();
    let m = xg.len();
    let mut spectral = Spectral::new(m);
    let mut shifted = psi.values().to_vec();
    spectral.forward(&mut shifted)?;
    let half_dx = T::lit(0.5) * xg.dx();
    shifted
        .iter_mut()
        .zip(xg.fft_omegas())
        .for_each(|(z, &w)| *z = *z * Complex::from_polar(T::one(), w * half_dx));
    spectral.inverse(&mut shifted)?;
    let mut fine = Vec::with_capacity(2 * m);
    for (a, b) in psi.values().iter().zip(&shifted) {
        fine.push(*a);
        fine.push(*b);
    }
    Ok(fine)
}

struct RowTransform<T: Real> {
    fine: Vec<Complex<T>>,
    plan: Arc<dyn Fft<T>>,
    prefactor: T,
}

impl<T: Real> RowTransform<T> {
    fn new(psi: &WaveField<T>) -> Result<Self> {
        let fine = half_grid_samples(psi)?;
        let plan = FftPlanner::new().plan_fft_inverse(fine.len());
        let prefactor = psi.grid().dx() / (T::TAU() * psi.h());
        Ok(Self {
            fine,
            plan,
            prefactor,
        })
    }

    fn scratch(&self) -> (Vec<Complex<T>>, Vec<Complex<T>>) {
        let zero = Complex::new(T::zero(), T::zero());
        (
            vec![zero; self.fine.len()],
            vec![zero; self.plan.get_inplace_scratch_len()],
        )
    }

    /// Writes `w(x_row, ξ_m)` for ascending `m` into `out`; returns the max imaginary residue.
    fn row(
        &self,
        row: usize,
        buf: &mut [Complex<T>],
        scratch: &mut [Complex<T>],
        out: &mut [T],
    ) -> T {
        let n2 = self.fine.len();
        let m = n2 / 2;
        let centre = 2 * row;
        let zero = Complex::new(T::zero(), T::zero());
        for (n, slot) in buf.iter_mut().enumerate() {
            // lag index n ≥ M stands for n − 2M
            let lag = if n < m { n } else { n2 - n };
            *slot = if lag < m / 2 {
                let left = (centre + n2 - n) % n2;
                let right = (centre + n) % n2;
                self.fine[left] * self.fine[right].conj()
            } else {
                zero
            };
        }
        self.plan.process_with_scratch(buf, scratch);
        let mut residue = T::zero();
        for (i, o) in out.iter_mut().enumerate() {
            // ascending m = −M..M−1 maps to FFT slot (m mod 2M)
            let z = buf[(i + m) % n2];
            residue = residue.max((z.im * self.prefactor).abs());
            *o = z.re * self.prefactor;
        }
        residue
    }
}

/// Full transform on the `M × 2M` lattice. Memory grows as `2M²`; use
/// [`wigner_moments`] or [`wigner_rows`] for large grids.
pub fn wigner_transform<T: Real>(psi: &WaveField<T>) -> Result<WignerField<T>> {
    let rows: Vec<usize> = (0..psi.grid().len()).collect();
    let (xi, values, max_imag_residue) = wigner_rows(psi, &rows)?;
    Ok(WignerField {
        xg: psi.grid().clone(),
        xi,
        values,
        h: psi.h(),
        max_imag_residue,
    })
}

/// Transform restricted to the grid points `rows`; returns `(ξ, values, max |Im|)`.
pub fn wigner_rows<T: Real>(psi: &WaveField<T>, rows: &[usize]) -> Result<(Vec<T>, Array2<T>, T)> {
    let xg = psi.grid();
    let rt = RowTransform::new(psi)?;
    let n2 = 2 * xg.len();
    let mut values = Array2::from_elem((rows.len(), n2), T::zero());
    let residues: Vec<T> = values
        .as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(n2)
        .zip(rows.par_iter())
        .map_init(
            || rt.scratch(),
            |(buf, scratch), (out, &row)| rt.row(row, buf, scratch, out),
        )
        .collect();
    let residue = residues.into_iter().fold(T::zero(), T::max);
    Ok((xi_points(xg, psi.h()), values, residue))
}

/// Zeroth, first and second ξ-moments at every grid point, without storing the transform.
pub fn wigner_moments<T: Real>(psi: &WaveField<T>) -> Result<WignerMoments<T>> {
    let xg = psi.grid();
    let rt = RowTransform::new(psi)?;
    let xi = xi_points(xg, psi.h());
    let dxi = xi_spacing(xg, psi.h());
    let half = T::lit(0.5);
    let per_row: Vec<(T, T, T, T)> = (0..xg.len())
        .into_par_iter()
        .map_init(
            || (rt.scratch(), vec![T::zero(); 2 * xg.len()]),
            |((buf, scratch), out), row| {
                let residue = rt.row(row, buf, scratch, out);
                let (mut m0, mut m1, mut m2) = (T::zero(), T::zero(), T::zero());
                for (&w, &x) in out.iter().zip(&xi) {
                    m0 = m0 + w;
                    m1 = m1 + x * w;
                    m2 = m2 + half * x * x * w;
                }
                (m0 * dxi, m1 * dxi, m2 * dxi, residue)
            },
        )
        .collect();
    let mut moments = WignerMoments {
        zeroth: Vec::with_capacity(per_row.len()),
        first: Vec::with_capacity(per_row.len()),
        second: Vec::with_capacity(per_row.len()),
        max_imag_residue: T::zero(),
    };
    for (a, b, c, r) in per_row {
        moments.zeroth.push(a);
        moments.first.push(b);
        moments.second.push(c);
        moments.max_imag_residue = moments.max_imag_residue.max(r);
    }
    Ok(moments)
}

/// Averages of `w` over the cells of a coarse `(x, ξ)` lattice.
///
/// Coarse x-cell `i` is centred on `x_{i·r}` with `r = M / nx` and averages the
/// rows in `[x_{i·r} − rΔx/2, x_{i·r} + rΔx/2]` by the trapezoidal rule. Coarse
/// ξ-cell `c` is centred on `xi_start + c·dxi_cell`; ξ-samples outside every cell
/// are dropped.
pub fn wigner_binned<T: Real>(
    psi: &WaveField<T>,
    nx: usize,
    xi_start: T,
    dxi_cell: T,
    nxi: usize,
) -> Result<Array2<T>> {
    let xg = psi.grid();
    let m = xg.len();
    if nx == 0 || !m.is_multiple_of(nx) {
        return Err(SleError::IncompatibleGrids(format!(
            "coarse x-cells ({nx}) must evenly divide the {m} grid points"
        )));
    }
    let window = cell_window::<T>(m / nx);
    let rt = RowTransform::new(psi)?;
    let xi = xi_points(xg, psi.h());
    let scale = xi_spacing(xg, psi.h()) / dxi_cell;
    let bins: Vec<Option<usize>> = xi
        .iter()
        .map(|&x| {
            let c = ((x - xi_start) / dxi_cell).round();
            (c >= T::zero() && c < T::from_usize_lossy(nxi)).then(|| c.to_usize().unwrap_or(0))
        })
        .collect();
    let r = m / nx;
    let mut out = Array2::from_elem((nx, nxi), T::zero());
    out.as_slice_mut()
        .expect("standard layout")
        .par_chunks_mut(nxi)
        .enumerate()
        .for_each_init(
            || (rt.scratch(), vec![T::zero(); 2 * m]),
            |((buf, scratch), row_out), (i, cell)| {
                for &(offset, weight) in &window {
                    let row = (i * r) as isize + offset;
                    let row = row.rem_euclid(m as isize) as usize;
                    rt.row(row, buf, scratch, row_out);
                    for (&w, bin) in row_out.iter().zip(&bins) {
                        if let Some(c) = *bin {
                            cell[c] = cell[c] + weight * scale * w;
                        }
                    }
                }
            },
        );
    Ok(out)
}

/// Trapezoidal weights, summing to one, for averaging `r` grid spacings around a point.
pub fn cell_window<T: Real>(r: usize) -> Vec<(isize, T)> {
    let inv = T::from_usize_lossy(r).recip();
    if r % 2 == 1 {
        let half = (r / 2) as isize;
        (-half..=half).map(|o| (o, inv)).collect()
    } else {
        let half = (r / 2) as isize;
        (-half..=half)
            .map(|o| {
                let w = if o.abs() == half {
                    T::lit(0.5) * inv
                } else {
                    inv
                };
                (o, w)
            })
            .collect()
    }
}
