//! Schrödinger equation coupled to a single classical trajectory `(y(t), η(t))`.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Result, SleError};
use crate::grids::{WaveField, XGrid};
use crate::potential::CouplingPotential;
use crate::scalar::Real;
use crate::schrodinger::{KineticPropagator, Spectral};

/// Point-particle state.
#[derive(Debug, Clone)]
pub struct OdeState<T> {
    pub psi: WaveField<T>,
    pub y: T,
    pub eta: T,
    pub t: T,
}

pub struct EhrenfestOde<T: Real> {
    xg: Arc<XGrid<T>>,
    potential: Arc<CouplingPotential<T>>,
    spectral: Spectral<T>,
    propagator: Option<KineticPropagator<T>>,
}

impl<T: Real> EhrenfestOde<T> {
    pub fn new(xg: Arc<XGrid<T>>, potential: Arc<CouplingPotential<T>>) -> Self {
        let spectral = Spectral::new(xg.len());
        Self {
            xg,
            potential,
            spectral,
            propagator: None,
        }
    }

    /// `−∂_y V_E(y) = −Δx Σ_m ∂_yV(x_m, y)|ψ_m|²`.
    pub fn force(&self, psi: &WaveField<T>, y: T) -> T {
        -psi.values()
            .iter()
            .zip(self.xg.points())
            .map(|(z, &x)| self.potential.dv_dy(x, y) * z.norm_sqr())
            .sum::<T>()
            * self.xg.dx()
    }

    /// Symplectic Euler for the particle with `ψ` frozen: `η += dt·F(y)`, then `y += dt·η`.
    pub fn particle_step(&self, psi: &WaveField<T>, y: &mut T, eta: &mut T, dt: T) {
        *eta = *eta + dt * self.force(psi, *y);
        *y = *y + dt * *eta;
    }

    /// Free flight of `ψ`, particle update with the force of the incoming `ψ`,
    /// then phase rotation of `ψ` by `V(x, y_new)·dt/h`.
    pub fn ode_step(&mut self, state: &mut OdeState<T>, dt: T) -> Result<()> {
        if !(dt > T::zero()) {
            return Err(SleError::InvalidParameter(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if state.psi.grid().as_ref() != self.xg.as_ref() {
            return Err(SleError::IncompatibleGrids(
                "wave field does not live on the integrator's x-grid".into(),
            ));
        }
        let f = self.force(&state.psi, state.y);
        let h = state.psi.h();
        let stale = self
            .propagator
            .as_ref()
            .is_none_or(|p| p.dt() != dt || p.h() != h);
        if stale {
            self.propagator = Some(KineticPropagator::new(&self.xg, h, dt));
        }
        self.propagator
            .as_ref()
            .expect("propagator initialized above")
            .apply(&mut state.psi, &mut self.spectral)?;

        state.eta = state.eta + dt * f;
        state.y = state.y + dt * state.eta;

        let scale = dt / h;
        let y = state.y;
        for (z, &x) in state.psi.values_mut().iter_mut().zip(self.xg.points()) {
            *z = *z * Complex::from_polar(T::one(), -self.potential.v(x, y) * scale);
        }
        state.t = state.t + dt;
        Ok(())
    }

    /// Integrates to `t_final` with steps of at most `dt`; returns `(t, y, η)` after every step.
    pub fn trajectory(
        &mut self,
        state: &mut OdeState<T>,
        dt: T,
        t_final: T,
    ) -> Result<Vec<(T, T, T)>> {
        let mut out = vec![(state.t, state.y, state.eta)];
        let t0 = state.t;
        let span = ((t_final - t0) / dt).as_f64();
        let steps = if span > 0.0 {
            (span - 1e-9).ceil() as usize
        } else {
            0
        };
        for n in 1..=steps {
            let target = if n == steps {
                t_final
            } else {
                t0 + T::from_usize_lossy(n) * dt
            };
            self.ode_step(state, target - state.t)?;
            state.t = target;
            out.push((state.t, state.y, state.eta));
        }
        Ok(out)
    }
}
