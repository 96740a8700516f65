//! Classical limit of the coupled system: a Liouville density `ν(x, ξ)` for the
//! quantum part coupled to the phase density `μ(y, η)`.
//!
//! Step A moves `ν` along `x` with speed `ξ` and `μ` with the force of `ν`;
//! step B moves `ν` along `ξ` with speed `−∂_xΥ⁰` built from the updated `μ`,
//! which is frozen during B. Both densities use the upwind stencil of the
//! Liouville transport; the `ν` transports are sub-stepped to respect their
//! own CFL bounds.

use std::sync::Arc;

use log::warn;
use ndarray::Zip;

use crate::error::{Result, SleError};
use crate::grids::{phase_mass, PhaseDensity, PhaseGrid, WaveField, XGrid};
use crate::liouville::{transport_max_dt, transport_rhs, transport_step, CflMode, CflStatus};
use crate::potential::CouplingPotential;
use crate::scalar::Real;
use crate::wigner::{cell_window, wigner_binned};

/// `ν_{im}` on a periodic `(x, ξ)` grid. Rows are `x_i`, columns `ξ_m`.
#[derive(Debug, Clone)]
pub struct NuField<T> {
    pub density: PhaseDensity<T>,
}

impl<T: Real> NuField<T> {
    pub fn new(density: PhaseDensity<T>) -> Self {
        Self { density }
    }

    pub fn grid(&self) -> &Arc<PhaseGrid<T>> {
        self.density.grid()
    }

    pub fn x(&self) -> &[T] {
        self.grid().y()
    }

    pub fn xi(&self) -> &[T] {
        self.grid().eta()
    }

    pub fn dx(&self) -> T {
        self.grid().dy()
    }

    pub fn dxi(&self) -> T {
        self.grid().deta()
    }

    /// `Σ_im ν_im ΔxΔξ`.
    pub fn mass(&self) -> T {
        phase_mass(&self.density)
    }

    /// Position density `∫ν dξ` at every `x_i`.
    pub fn rho(&self) -> Vec<T> {
        self.density.y_marginal()
    }

    /// Point mass in the cell nearest to `(x, ξ)`.
    pub fn point_mass(grid: Arc<PhaseGrid<T>>, x: T, xi: T) -> Self {
        let (i, m) = grid.nearest_cell(x, xi);
        Self::new(PhaseDensity::point_mass(grid, i, m))
    }
}

/// Grid for `ν`: periodic `x` on `[a, b)` with `nx` points and `ξ` on `[ξ_min, ξ_max)`.
pub fn make_nu_grid<T: Real>(
    xg: &XGrid<T>,
    nx: usize,
    xi_min: T,
    xi_max: T,
    nxi: usize,
) -> Result<PhaseGrid<T>> {
    PhaseGrid::new(xg.a(), xg.b(), nx, xi_min, xi_max, nxi)
}

/// Outcome of projecting a wave function onto a `ν` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuProjection<T> {
    /// Mass of the binned Wigner transform before clipping.
    pub binned_mass: T,
    /// Mass removed by clipping negative cells.
    pub clipped_mass: T,
}

/// `ν_in`: the Wigner transform of `ψ` averaged over the cells of `grid`,
/// clipped at zero and renormalized to unit mass.
pub fn nu_from_wave<T: Real>(
    psi: &WaveField<T>,
    grid: Arc<PhaseGrid<T>>,
) -> Result<(NuField<T>, NuProjection<T>)> {
    let xg = psi.grid();
    if grid.c() != xg.a() || grid.d() != xg.b() {
        return Err(SleError::IncompatibleGrids(
            "ν grid must span the same x-interval as the wave function".into(),
        ));
    }
    let mut values = wigner_binned(
        psi,
        grid.j_count(),
        grid.alpha(),
        grid.deta(),
        grid.k_count(),
    )?;
    let area = grid.cell_area();
    let binned_mass = values.iter().copied().sum::<T>() * area;
    let clipped_mass = -values
        .iter()
        .filter(|v| **v < T::zero())
        .copied()
        .sum::<T>()
        * area;
    values.mapv_inplace(|v| v.max(T::zero()));
    let mass = values.iter().copied().sum::<T>() * area;
    if !(mass > T::zero()) {
        return Err(SleError::InvalidGrid(
            "ν grid captures none of the wave function's phase-space support".into(),
        ));
    }
    values.mapv_inplace(|v| v / mass);
    let density = PhaseDensity::new(grid, values)?;
    Ok((
        NuField::new(density),
        NuProjection {
            binned_mass,
            clipped_mass,
        },
    ))
}

/// Averages of `values` (samples on an `M`-point periodic grid) over `nx` coarse cells
/// centred on every `(M/nx)`-th sample.
pub fn coarse_average<T: Real>(values: &[T], nx: usize) -> Result<Vec<T>> {
    let m = values.len();
    if nx == 0 || !m.is_multiple_of(nx) {
        return Err(SleError::IncompatibleGrids(format!(
            "coarse cells ({nx}) must evenly divide the {m} samples"
        )));
    }
    let r = m / nx;
    let window = cell_window::<T>(r);
    Ok((0..nx)
        .map(|i| {
            window
                .iter()
                .map(|&(o, w)| {
                    let idx = ((i * r) as isize + o).rem_euclid(m as isize) as usize;
                    w * values[idx]
                })
                .sum()
        })
        .collect())
}

/// `F⁰_j = −ΔxΔξ Σ_{im} ∂_yV(x_i, y_j) ν_im`.
pub fn limit_force<T: Real>(
    v: &CouplingPotential<T>,
    nu: &NuField<T>,
    pg: &PhaseGrid<T>,
) -> Vec<T> {
    let rho = nu.rho();
    let dx = nu.dx();
    pg.y()
        .iter()
        .map(|&y| {
            -nu.x()
                .iter()
                .zip(&rho)
                .map(|(&x, &r)| v.dv_dy(x, y) * r)
                .sum::<T>()
                * dx
        })
        .collect()
}

/// Time stepper for `(ν, μ)`.
pub struct LimitSolver<T: Real> {
    pg: Arc<PhaseGrid<T>>,
    ng: Arc<PhaseGrid<T>>,
    /// `∂_yV(x_i, y_j)`, one row per `y_j`.
    dv_dy: Vec<T>,
    /// `∂_xV(x_i, y_j)`, one row per `x_i`.
    dv_dx: Vec<T>,
    cfl: CflMode,
    cfl_violations: usize,
}

impl<T: Real> LimitSolver<T> {
    pub fn new(
        pg: Arc<PhaseGrid<T>>,
        ng: Arc<PhaseGrid<T>>,
        potential: &CouplingPotential<T>,
        cfl: CflMode,
    ) -> Self {
        let xs = ng.y();
        let ys = pg.y();
        let dv_dy = ys
            .iter()
            .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
            .map(|(x, y)| potential.dv_dy(x, y))
            .collect();
        let dv_dx = xs
            .iter()
            .flat_map(|&x| ys.iter().map(move |&y| (x, y)))
            .map(|(x, y)| potential.dv_dx(x, y))
            .collect();
        Self {
            pg,
            ng,
            dv_dy,
            dv_dx,
            cfl,
            cfl_violations: 0,
        }
    }

    pub fn cfl_violations(&self) -> usize {
        self.cfl_violations
    }

    pub fn force(&self, nu: &NuField<T>) -> Vec<T> {
        let rho = nu.rho();
        let dx = nu.dx();
        self.dv_dy
            .chunks_exact(rho.len())
            .map(|row| -row.iter().zip(&rho).map(|(&d, &r)| d * r).sum::<T>() * dx)
            .collect()
    }

    /// `∂_xΥ⁰(x_i) = Σ_j ∂_xV(x_i, y_j) (Σ_k μ_jk Δη) Δy`.
    pub fn upsilon_dx(&self, mu: &PhaseDensity<T>) -> Vec<T> {
        let marginal = mu.y_marginal();
        let dy = self.pg.dy();
        self.dv_dx
            .chunks_exact(marginal.len())
            .map(|row| row.iter().zip(&marginal).map(|(&d, &m)| d * m).sum::<T>() * dy)
            .collect()
    }

    fn check(&self, nu: &NuField<T>, mu: &PhaseDensity<T>) -> Result<()> {
        if nu.grid().as_ref() != self.ng.as_ref() || mu.grid().as_ref() != self.pg.as_ref() {
            return Err(SleError::IncompatibleGrids(
                "densities do not live on the limit solver's grids".into(),
            ));
        }
        Ok(())
    }

    /// Explicit transport of `ν` over `dt`, split into substeps that satisfy the CFL bound.
    fn transport_nu(&self, nu: &mut NuField<T>, speed0: &[T], speed1: &[T], dt: T) {
        let max_abs = |v: &[T]| v.iter().fold(T::zero(), |a, s| a.max(s.abs()));
        let dt_max = transport_max_dt(max_abs(speed0), nu.dx(), max_abs(speed1), nu.dxi());
        let n = if dt_max.is_finite() {
            (dt.abs() / dt_max).as_f64().ceil().max(1.0) as usize
        } else {
            1
        };
        let sub = dt / T::from_usize_lossy(n);
        let (dx, dxi) = (nu.dx(), nu.dxi());
        for _ in 0..n {
            let rhs = transport_rhs(nu.density.values(), speed0, speed1, dx, dxi);
            Zip::from(nu.density.values_mut())
                .and(&rhs)
                .for_each(|v, &r| *v = *v + sub * r);
        }
    }

    pub fn limit_step(
        &mut self,
        nu: &mut NuField<T>,
        mu: &mut PhaseDensity<T>,
        dt: T,
    ) -> Result<()> {
        self.check(nu, mu)?;
        let force = self.force(nu);
        let status = transport_step(mu, &force, dt, self.cfl)?;
        if let CflStatus::Violated { dt_max } = status {
            if self.cfl_violations == 0 {
                warn!(
                    "transport step dt = {:e} exceeds the CFL bound {:e}",
                    dt.as_f64(),
                    dt_max
                );
            }
            self.cfl_violations += 1;
        }
        let xi = nu.xi().to_vec();
        self.transport_nu(nu, &xi, &[], dt);

        let speed: Vec<T> = self.upsilon_dx(mu).into_iter().map(|d| -d).collect();
        self.transport_nu(nu, &[], &speed, dt);
        Ok(())
    }

    /// Integrates over `duration` with steps of at most `dt`.
    pub fn run(
        &mut self,
        nu: &mut NuField<T>,
        mu: &mut PhaseDensity<T>,
        dt: T,
        duration: T,
    ) -> Result<usize> {
        if !(dt > T::zero()) {
            return Err(SleError::InvalidParameter(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let span = (duration / dt).as_f64();
        let steps = if span > 0.0 {
            (span - 1e-9).ceil() as usize
        } else {
            0
        };
        let mut t = T::zero();
        for n in 1..=steps {
            let target = if n == steps {
                duration
            } else {
                T::from_usize_lossy(n) * dt
            };
            self.limit_step(nu, mu, target - t)?;
            t = target;
        }
        Ok(steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{make_phasegrid, make_xgrid};
    use crate::initial::{DensityInit, WaveInit};
    use crate::observables::position_density;
    use std::f64::consts::PI;

    fn grids() -> (Arc<XGrid<f64>>, Arc<PhaseGrid<f64>>, Arc<PhaseGrid<f64>>) {
        let xg = Arc::new(make_xgrid(-PI, PI, 1024).unwrap());
        let pg =
            Arc::new(make_phasegrid(-2.0 * PI, 2.0 * PI, 64, -2.0 * PI, 2.0 * PI, 64).unwrap());
        let ng = Arc::new(make_nu_grid(&xg, 128, -4.0, 4.0, 64).unwrap());
        (xg, pg, ng)
    }

    fn potentials(
        xg: &XGrid<f64>,
        pg: &PhaseGrid<f64>,
    ) -> (CouplingPotential<f64>, CouplingPotential<f64>) {
        (
            CouplingPotential::quadratic_coupling(xg, pg).unwrap(),
            CouplingPotential::zero(xg, pg).unwrap(),
        )
    }

    #[test]
    fn force_of_point_mass() {
        let (xg, pg, ng) = grids();
        let (quad, zero) = potentials(&xg, &pg);
        let nu = NuField::point_mass(ng.clone(), 0.3, 1.0);
        let x0 = ng.y()[ng.nearest_cell(0.3, 1.0).0];
        for (f, &y) in limit_force(&quad, &nu, &pg).iter().zip(pg.y()) {
            assert!((f + (x0 + y)).abs() < 1e-12);
        }
        assert!(limit_force(&zero, &nu, &pg).iter().all(|f| *f == 0.0));
    }

    #[test]
    fn force_is_minus_mean_position_plus_y() {
        let (xg, pg, ng) = grids();
        let (quad, _) = potentials(&xg, &pg);
        let density = PhaseDensity::from_fn(ng.clone(), |x, xi| {
            (-8.0 * (x - 0.4).powi(2) - xi * xi).exp()
        })
        .unwrap();
        let mut nu = NuField::new(density);
        let mass = nu.mass();
        nu.density.values_mut().mapv_inplace(|v| v / mass);
        let rho = nu.rho();
        let mean_x: f64 = nu.x().iter().zip(&rho).map(|(x, r)| x * r).sum::<f64>() * nu.dx();
        let solver = LimitSolver::new(pg.clone(), ng, &quad, CflMode::Warn);
        let tab = solver.force(&nu);
        for ((f, t), &y) in limit_force(&quad, &nu, &pg).iter().zip(&tab).zip(pg.y()) {
            assert!((f + (mean_x + y)).abs() < 1e-12);
            assert!((f - t).abs() < 1e-12);
        }
    }

    #[test]
    fn free_advection_and_mass_conservation() {
        let (xg, pg, ng) = grids();
        let (quad, zero) = potentials(&xg, &pg);
        for pot in [&zero, &quad] {
            let mut solver = LimitSolver::new(pg.clone(), ng.clone(), pot, CflMode::Strict);
            let mut nu = NuField::point_mass(ng.clone(), 0.0, 1.0);
            let mut mu = DensityInit::Bump.build(pg.clone()).unwrap();
            for _ in 0..10 {
                solver.limit_step(&mut nu, &mut mu, 0.005).unwrap();
                assert!((nu.mass() - 1.0).abs() < 1e-13);
                assert!((phase_mass(&mu) - 1.0).abs() < 1e-13);
                assert!(nu.density.values().iter().all(|v| *v >= 0.0));
            }
        }
        // with V = 0, the x-mean of ν moves at speed ξ and ξ is untouched
        let mut solver = LimitSolver::new(pg.clone(), ng.clone(), &zero, CflMode::Strict);
        let mut nu = NuField::point_mass(ng.clone(), 0.0, 1.0);
        let mut mu = DensityInit::Bump.build(pg.clone()).unwrap();
        let xi0 = ng.eta()[ng.nearest_cell(0.0, 1.0).1];
        let x0 = ng.y()[ng.nearest_cell(0.0, 1.0).0];
        let mu0 = mu.clone();
        solver.run(&mut nu, &mut mu, 0.01, 0.2).unwrap();
        let rho = nu.rho();
        let mean_x: f64 = nu.x().iter().zip(&rho).map(|(x, r)| x * r).sum::<f64>() * nu.dx();
        assert!((mean_x - (x0 + 0.2 * xi0)).abs() < 1e-10);
        let xi_mass: f64 = nu
            .density
            .values()
            .column(ng.nearest_cell(0.0, 1.0).1)
            .sum()
            * ng.cell_area();
        assert!((xi_mass - 1.0).abs() < 1e-12);
        // μ advects freely: its η-marginal is unchanged
        let eta_marg = |m: &PhaseDensity<f64>| -> Vec<f64> {
            m.values().columns().into_iter().map(|c| c.sum()).collect()
        };
        for (a, b) in eta_marg(&mu).iter().zip(eta_marg(&mu0)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn projection_of_wkb_state() {
        let (xg, _, ng) = grids();
        let h = 1.0 / 64.0;
        let psi = WaveInit::WkbCosh.build(xg.clone(), h).unwrap();
        let (nu, report) = nu_from_wave(&psi, ng.clone()).unwrap();
        assert!((nu.mass() - 1.0).abs() < 1e-12);
        assert!(nu.density.values().iter().all(|v| *v >= 0.0));
        // the binned transform keeps the mass of ψ
        assert!((report.binned_mass - 1.0).abs() < 1e-6, "{report:?}");
        assert!(report.clipped_mass >= 0.0 && report.clipped_mass < 0.2);
        // and its position density agrees with the cell-averaged |ψ|²
        let coarse = coarse_average(&position_density(&psi), ng.j_count()).unwrap();
        let err: f64 = nu
            .rho()
            .iter()
            .zip(&coarse)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = coarse.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(err / norm < 0.2, "relative {}", err / norm);
    }

    #[test]
    fn coarse_average_preserves_integral() {
        let v: Vec<f64> = (0..64).map(|i| (i as f64 * 0.3).sin() + 2.0).collect();
        let c = coarse_average(&v, 8).unwrap();
        let fine: f64 = v.iter().sum();
        let coarse: f64 = c.iter().sum::<f64>() * 8.0;
        assert!((fine - coarse).abs() < 1e-12);
        assert!(coarse_average(&v, 7).is_err());
        assert_eq!(coarse_average(&v, 64).unwrap(), v);
    }
}
