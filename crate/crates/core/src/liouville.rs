//! Flux-split upwind transport on a periodic 2D grid with explicit time marching.
//!
//! The same stencil advances both the classical density `μ(y, η)` (speeds `η_k`
//! along y and `F_j` along η) and the limit density `ν(x, ξ)`.

use ndarray::{Array2, Zip};

use crate::error::{Result, SleError};
use crate::grids::{PhaseDensity, PhaseGrid};
use crate::scalar::Real;

/// What to do when a step exceeds the CFL bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CflMode {
    /// Report the violation to the caller and continue.
    #[default]
    Warn,
    /// Fail the step.
    Strict,
}

/// Time integrator for the semi-discrete transport equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransportScheme {
    #[default]
    ForwardEuler,
    /// Two-stage Heun (explicit trapezoid) method, second order in time.
    Heun,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CflStatus {
    Satisfied,
    Violated { dt_max: f64 },
}

impl CflStatus {
    pub fn is_violated(&self) -> bool {
        matches!(self, CflStatus::Violated { .. })
    }
}

#[inline]
fn upwind<T: Real>(speed: T, left: T, center: T, right: T, inv_d: T) -> T {
    let half = T::lit(0.5);
    let pos = half * (speed + speed.abs());
    let neg = half * (speed - speed.abs());
    pos * (center - left) * inv_d + neg * (right - center) * inv_d
}

/// `η_k (D_y μ)_{jk}` for every `j` at fixed `k`.
pub fn upwind_dy<T: Real>(mu: &PhaseDensity<T>, k: usize) -> Vec<T> {
    let pg = mu.grid();
    let eta = pg.eta()[k];
    let inv = pg.dy().recip();
    let k = k as isize;
    (0..pg.j_count() as isize)
        .map(|j| upwind(eta, mu.at(j - 1, k), mu.at(j, k), mu.at(j + 1, k), inv))
        .collect()
}

/// `F_j (D_η μ)_{jk}` for every `k` at fixed `j`.
pub fn upwind_deta<T: Real>(mu: &PhaseDensity<T>, force: T, j: usize) -> Vec<T> {
    let pg = mu.grid();
    let inv = pg.deta().recip();
    let j = j as isize;
    (0..pg.k_count() as isize)
        .map(|k| upwind(force, mu.at(j, k - 1), mu.at(j, k), mu.at(j, k + 1), inv))
        .collect()
}

/// Right-hand side `−(a0 D_0 u + a1 D_1 u)` of the semi-discrete transport equation.
///
/// `speed0[k]` is the axis-0 speed in column `k`; `speed1[j]` the axis-1 speed in row `j`.
/// Either speed slice may be empty, meaning no transport along that axis.
pub fn transport_rhs<T: Real>(
    values: &Array2<T>,
    speed0: &[T],
    speed1: &[T],
    d0: T,
    d1: T,
) -> Array2<T> {
    let (n0, n1) = values.dim();
    let inv0 = d0.recip();
    let inv1 = d1.recip();
    let mut out = Array2::from_elem((n0, n1), T::zero());
    for i in 0..n0 {
        let im = (i + n0 - 1) % n0;
        let ip = (i + 1) % n0;
        for k in 0..n1 {
            let km = (k + n1 - 1) % n1;
            let kp = (k + 1) % n1;
            let c = values[[i, k]];
            let mut r = T::zero();
            if !speed0.is_empty() {
                r = r + upwind(speed0[k], values[[im, k]], c, values[[ip, k]], inv0);
            }
            if !speed1.is_empty() {
                r = r + upwind(speed1[i], values[[i, km]], c, values[[i, kp]], inv1);
            }
            out[[i, k]] = -r;
        }
    }
    out
}

/// Largest stable step for the given speeds: `1 / (max|a0|/Δ0 + max|a1|/Δ1)`,
/// `+∞` when both speeds vanish.
pub fn transport_max_dt<T: Real>(max_speed0: T, d0: T, max_speed1: T, d1: T) -> T {
    let rate = max_speed0.abs() / d0 + max_speed1.abs() / d1;
    if rate > T::zero() {
        rate.recip()
    } else {
        T::infinity()
    }
}

/// `Δt_max = 1 / (max_k|η_k|/Δy + L/Δη)`.
pub fn cfl_max_dt<T: Real>(pg: &PhaseGrid<T>, sup_force: T) -> T {
    transport_max_dt(pg.max_abs_eta(), pg.dy(), sup_force, pg.deta())
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

/// Checks `|dt| ≤ dt_max` and applies the CFL policy.
pub fn check_cfl<T: Real>(dt: T, dt_max: T, mode: CflMode) -> Result<CflStatus> {
    // relative slack for dt chosen exactly at the bound
    if dt.abs() <= dt_max * (T::one() + T::lit(8.0) * T::epsilon()) {
        return Ok(CflStatus::Satisfied);
    }
    match mode {
        CflMode::Warn => Ok(CflStatus::Violated {
            dt_max: dt_max.as_f64(),
        }),
        CflMode::Strict => Err(SleError::CflViolation {
            dt: dt.as_f64(),
            dt_max: dt_max.as_f64(),
        }),
    }
}

fn check_forces<T: Real>(force: &[T], pg: &PhaseGrid<T>) -> Result<()> {
    if force.len() != pg.j_count() {
        return Err(SleError::LengthMismatch {
            expected: pg.j_count(),
            got: force.len(),
        });
    }
    if force.iter().any(|f| !f.is_finite()) {
        return Err(SleError::NonFinite("force"));
    }
    Ok(())
}

/// One forward-Euler step of `∂_t μ = −η D_y μ − F D_η μ`, in place.
///
/// The CFL bound is evaluated with the realized speeds `max|η_k|` and `max|F_j|`.
/// A violation is returned as [`CflStatus::Violated`] under [`CflMode::Warn`]
/// and as an error under [`CflMode::Strict`].
pub fn transport_step<T: Real>(
    mu: &mut PhaseDensity<T>,
    force: &[T],
    dt: T,
    mode: CflMode,
) -> Result<CflStatus> {
    let pg = mu.grid().clone();
    check_forces(force, &pg)?;
    let status = check_cfl(dt, cfl_max_dt(&pg, max_abs(force)), mode)?;
    let rhs = transport_rhs(mu.values(), pg.eta(), force, pg.dy(), pg.deta());
    Zip::from(mu.values_mut())
        .and(&rhs)
        .for_each(|m, &r| *m = *m + dt * r);
    Ok(status)
}

/// One Heun step where the force varies over the step from `force_start` to `force_end`.
pub fn transport_step_heun<T: Real>(
    mu: &mut PhaseDensity<T>,
    force_start: &[T],
    force_end: &[T],
    dt: T,
    mode: CflMode,
) -> Result<CflStatus> {
    let pg = mu.grid().clone();
    check_forces(force_start, &pg)?;
    check_forces(force_end, &pg)?;
    let sup = max_abs(force_start).max(max_abs(force_end));
    let status = check_cfl(dt, cfl_max_dt(&pg, sup), mode)?;
    let k1 = transport_rhs(mu.values(), pg.eta(), force_start, pg.dy(), pg.deta());
    let mut stage = mu.values().clone();
    Zip::from(&mut stage)
        .and(&k1)
        .for_each(|s, &k| *s = *s + dt * k);
    let k2 = transport_rhs(&stage, pg.eta(), force_end, pg.dy(), pg.deta());
    let half = T::lit(0.5) * dt;
    Zip::from(mu.values_mut())
        .and(&k1)
        .and(&k2)
        .for_each(|m, &a, &b| *m = *m + half * (a + b));
    Ok(status)
}
