//! Coupling potential `V(x, y)` and the mean-field quantities built from it:
//! the discrete Ehrenfest potential `Υ_d`, the force `F_j` on the classical
//! density, and the energy integrand `G_j`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Result, SleError};
use crate::grids::{PhaseDensity, PhaseGrid, WaveField, XGrid};
use crate::scalar::Real;

pub type ScalarFn2<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// `V(x, y)` with analytic partial derivatives and their sup-norms on the
/// computational box (the product of the x and y grids).
#[derive(Clone)]
pub struct CouplingPotential<T> {
    name: String,
    v: ScalarFn2<T>,
    dv_dx: ScalarFn2<T>,
    dv_dy: ScalarFn2<T>,
    sup_dv_dx: T,
    sup_dv_dy: T,
}

impl<T> fmt::Debug for CouplingPotential<T>
where
    T: fmt::Debug,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CouplingPotential")
            .field("name", &self.name)
            .field("sup_dv_dx", &self.sup_dv_dx)
            .field("sup_dv_dy", &self.sup_dv_dy)
            .finish()
    }
}

const SELF_CHECK_SAMPLES: usize = 17;

impl<T: Real> CouplingPotential<T> {
    /// Builds a potential from user callbacks.
    ///
    /// Rejects potentials that are negative somewhere on the box and derivative
    /// callbacks that disagree with central differences of `v`.
    pub fn new(
        name: impl Into<String>,
        v: ScalarFn2<T>,
        dv_dx: ScalarFn2<T>,
        dv_dy: ScalarFn2<T>,
        xg: &XGrid<T>,
        pg: &PhaseGrid<T>,
    ) -> Result<Self> {
        let name = name.into();
        let xs = xg.points();
        let ys = pg.y();

        let (sup_dv_dx, sup_dv_dy, min_v) = xs
            .par_iter()
            .map(|&x| {
                ys.iter()
                    .fold((T::zero(), T::zero(), T::infinity()), |(sx, sy, mv), &y| {
                        (
                            sx.max(dv_dx(x, y).abs()),
                            sy.max(dv_dy(x, y).abs()),
                            mv.min(v(x, y)),
                        )
                    })
            })
            .reduce(
                || (T::zero(), T::zero(), T::infinity()),
                |a, b| (a.0.max(b.0), a.1.max(b.1), a.2.min(b.2)),
            );

        if !sup_dv_dx.is_finite() || !sup_dv_dy.is_finite() || !min_v.is_finite() {
            return Err(SleError::InvalidPotential(format!(
                "{name}: non-finite values on the computational box"
            )));
        }
        if min_v < T::zero() {
            return Err(SleError::InvalidPotential(format!(
                "{name}: V must be non-negative on the box, found min V = {min_v}"
            )));
        }

        let pot = Self {
            name,
            v,
            dv_dx,
            dv_dy,
            sup_dv_dx,
            sup_dv_dy,
        };
        pot.check_derivatives(xs, ys)?;
        Ok(pot)
    }

    fn check_derivatives(&self, xs: &[T], ys: &[T]) -> Result<()> {
        let eps = T::epsilon();
        let tol = T::lit(1e-6).max(T::lit(10.0) * eps.powf(T::lit(2.0 / 3.0)));
        let stride_x = (xs.len() / SELF_CHECK_SAMPLES).max(1);
        let stride_y = (ys.len() / SELF_CHECK_SAMPLES).max(1);
        let two = T::lit(2.0);
        for &x in xs.iter().step_by(stride_x) {
            for &y in ys.iter().step_by(stride_y) {
                let hx = eps.cbrt() * x.abs().max(T::one());
                let hy = eps.cbrt() * y.abs().max(T::one());
                let fd_x = ((self.v)(x + hx, y) - (self.v)(x - hx, y)) / (two * hx);
                let fd_y = ((self.v)(x, y + hy) - (self.v)(x, y - hy)) / (two * hy);
                let ax = (self.dv_dx)(x, y);
                let ay = (self.dv_dy)(x, y);
                if (fd_x - ax).abs() > tol * ax.abs().max(T::one())
                    || (fd_y - ay).abs() > tol * ay.abs().max(T::one())
                {
                    return Err(SleError::InvalidPotential(format!(
                        "{}: derivative callbacks inconsistent with V at ({x}, {y}): \
                         dV/dx {ax} vs {fd_x}, dV/dy {ay} vs {fd_y}",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// `V(x, y) = (x + y)²/2`, registered as `"quadratic_coupling"`.
    pub fn quadratic_coupling(xg: &XGrid<T>, pg: &PhaseGrid<T>) -> Result<Self> {
        let half = T::lit(0.5);
        Self::new(
            "quadratic_coupling",
            Arc::new(move |x, y| half * (x + y) * (x + y)),
            Arc::new(|x, y| x + y),
            Arc::new(|x, y| x + y),
            xg,
            pg,
        )
    }

    /// `V ≡ 0`; decouples the quantum and classical parts.
    pub fn zero(xg: &XGrid<T>, pg: &PhaseGrid<T>) -> Result<Self> {
        Self::new(
            "zero",
            Arc::new(|_, _| T::zero()),
            Arc::new(|_, _| T::zero()),
            Arc::new(|_, _| T::zero()),
            xg,
            pg,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    #[inline]
    pub fn v(&self, x: T, y: T) -> T {
        (self.v)(x, y)
    }

    #[inline]
    pub fn dv_dx(&self, x: T, y: T) -> T {
        (self.dv_dx)(x, y)
    }

    #[inline]
    pub fn dv_dy(&self, x: T, y: T) -> T {
        (self.dv_dy)(x, y)
    }

    /// `‖∂_x V‖_∞` on the box.
    pub fn sup_dv_dx(&self) -> T {
        self.sup_dv_dx
    }

    /// `L = ‖∂_y V‖_∞` on the box.
    pub fn sup_dv_dy(&self) -> T {
        self.sup_dv_dy
    }
}

/// Discrete Ehrenfest potential `Υ_d(x_j)` on the x-grid.
#[derive(Debug, Clone)]
pub struct EhrenfestPotential<T> {
    grid: Arc<XGrid<T>>,
    values: Vec<T>,
}

impl<T: Real> EhrenfestPotential<T> {
    pub fn new(grid: Arc<XGrid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SleError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Arc<XGrid<T>>, c: T) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<XGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// `Υ_d(x_j) = Σ_{j'k'} V(x_j, y_{j'}) μ_{j'k'} ΔyΔη`.
pub fn ehrenfest_potential<T: Real>(
    v: &CouplingPotential<T>,
    mu: &PhaseDensity<T>,
    xg: &Arc<XGrid<T>>,
) -> EhrenfestPotential<T> {
    let marginal = mu.y_marginal();
    let pg = mu.grid();
    let dy = pg.dy();
    let values = xg
        .points()
        .par_iter()
        .map(|&x| {
            pg.y()
                .iter()
                .zip(&marginal)
                .map(|(&y, &m)| v.v(x, y) * m)
                .sum::<T>()
                * dy
        })
        .collect();
    EhrenfestPotential {
        grid: xg.clone(),
        values,
    }
}

/// `∂_x Υ_d(x_j) = Σ_{j'k'} ∂_xV(x_j, y_{j'}) μ_{j'k'} ΔyΔη`.
pub fn ehrenfest_potential_dx<T: Real>(
    v: &CouplingPotential<T>,
    mu: &PhaseDensity<T>,
    xs: &[T],
) -> Vec<T> {
    let marginal = mu.y_marginal();
    let pg = mu.grid();
    let dy = pg.dy();
    xs.iter()
        .map(|&x| {
            pg.y()
                .iter()
                .zip(&marginal)
                .map(|(&y, &m)| v.dv_dx(x, y) * m)
                .sum::<T>()
                * dy
        })
        .collect()
}

fn weighted_over_density<T: Real>(
    f: impl Fn(T, T) -> T + Sync,
    psi: &WaveField<T>,
    pg: &PhaseGrid<T>,
) -> Vec<T> {
    let xs = psi.grid().points();
    let dx = psi.grid().dx();
    let rho: Vec<T> = psi.values().iter().map(|z| z.norm_sqr()).collect();
    pg.y()
        .par_iter()
        .map(|&y| xs.iter().zip(&rho).map(|(&x, &r)| f(x, y) * r).sum::<T>() * dx)
        .collect()
}

/// `F_j = −Δx Σ_m ∂_yV(x_m, y_j) |ψ_m|²`.
pub fn mean_force<T: Real>(
    v: &CouplingPotential<T>,
    psi: &WaveField<T>,
    pg: &PhaseGrid<T>,
) -> Vec<T> {
    weighted_over_density(|x, y| -v.dv_dy(x, y), psi, pg)
}

/// `G_j = Δx Σ_m V(x_m, y_j) |ψ_m|²`.
pub fn g_integrand<T: Real>(
    v: &CouplingPotential<T>,
    psi: &WaveField<T>,
    pg: &PhaseGrid<T>,
) -> Vec<T> {
    weighted_over_density(|x, y| v.v(x, y), psi, pg)
}

/// `V` and `∂_yV` tabulated on the grid product, for repeated use inside a time loop.
///
/// Tables are stored row-major with one row of length `M` per `y_j`.
#[derive(Debug, Clone)]
pub struct SampledCoupling<T> {
    m: usize,
    v: Vec<T>,
    dv_dy: Vec<T>,
}

impl<T: Real> SampledCoupling<T> {
    pub fn new(pot: &CouplingPotential<T>, xg: &XGrid<T>, pg: &PhaseGrid<T>) -> Self {
        let m = xg.len();
        let xs = xg.points();
        let mut v = vec![T::zero(); m * pg.j_count()];
        let mut dv_dy = vec![T::zero(); m * pg.j_count()];
        v.par_chunks_mut(m)
            .zip(dv_dy.par_chunks_mut(m))
            .zip(pg.y().par_iter())
            .for_each(|((vr, dr), &y)| {
                for ((vv, dd), &x) in vr.iter_mut().zip(dr.iter_mut()).zip(xs) {
                    *vv = pot.v(x, y);
                    *dd = pot.dv_dy(x, y);
                }
            });
        Self { m, v, dv_dy }
    }

    /// `Υ_d` from the η-marginal `Σ_k μ_jk Δη` of the phase density.
    pub fn ehrenfest_potential(&self, marginal: &[T], dy: T) -> Vec<T> {
        const CHUNK: usize = 1024;
        let mut out = vec![T::zero(); self.m];
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                let start = c * CHUNK;
                for (row, &w) in self.v.chunks_exact(self.m).zip(marginal) {
                    if w == T::zero() {
                        continue;
                    }
                    let w = w * dy;
                    let len = chunk.len();
                    for (o, &vv) in chunk.iter_mut().zip(&row[start..start + len]) {
                        *o = *o + vv * w;
                    }
                }
            });
        out
    }

    /// `F_j` from the position density `|ψ_m|²`.
    pub fn mean_force(&self, rho: &[T], dx: T) -> Vec<T> {
        self.dv_dy
            .par_chunks_exact(self.m)
            .map(|row| -row.iter().zip(rho).map(|(&d, &r)| d * r).sum::<T>() * dx)
            .collect()
    }

    /// `G_j` from the position density `|ψ_m|²`.
    pub fn g_integrand(&self, rho: &[T], dx: T) -> Vec<T> {
        self.v
            .par_chunks_exact(self.m)
            .map(|row| row.iter().zip(rho).map(|(&v, &r)| v * r).sum::<T>() * dx)
            .collect()
    }
}
