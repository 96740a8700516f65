//! Coupled time splitting for `(ψ, μ)`.
//!
//! Sub-flow A advances `ψ` by the free Schrödinger flow and `μ` by the upwind
//! transport with the mean-field force of the current `ψ`. Sub-flow B rotates
//! the phase of `ψ` by the Ehrenfest potential of the updated `μ`, which does
//! not change during B. Lie splitting applies A then B; Strang applies
//! A/2, B, A/2.

use std::sync::Arc;

use log::warn;

use crate::error::{Result, SleError};
use crate::grids::{l2_norm_discrete, phase_mass, PhaseDensity, PhaseGrid, WaveField, XGrid};
use crate::liouville::{transport_step, transport_step_heun, CflMode, CflStatus, TransportScheme};
use crate::observables::{
    current_density, discrete_energy, hgrad_norm, kinetic_density, position_density, EnergyBound,
    ObservableRecord, OscillationBound,
};
use crate::potential::{CouplingPotential, EhrenfestPotential, SampledCoupling};
use crate::scalar::Real;
use crate::schrodinger::{potential_phase_step, KineticPropagator, Spectral};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Splitting {
    #[default]
    Lie,
    Strang,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SolverOptions {
    pub splitting: Splitting,
    pub transport: TransportScheme,
    pub cfl: CflMode,
}

/// The pair `(ψ, μ)` at time `t`.
#[derive(Debug, Clone)]
pub struct SleState<T> {
    pub psi: WaveField<T>,
    pub mu: PhaseDensity<T>,
    pub t: T,
}

impl<T: Real> SleState<T> {
    pub fn new(psi: WaveField<T>, mu: PhaseDensity<T>) -> Self {
        Self {
            psi,
            mu,
            t: T::zero(),
        }
    }
}

/// Which records carry the `ρ`, `j`, `κ` profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProfileMode {
    Never,
    #[default]
    Final,
    Always,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunParams<T> {
    pub dt: T,
    /// Length of the time interval to integrate over, starting at the state's `t`.
    pub duration: T,
    /// Record observables every `cadence` steps (plus the first and last state).
    pub cadence: usize,
    pub profiles: ProfileMode,
}

impl<T: Real> RunParams<T> {
    pub fn new(dt: T, duration: T) -> Self {
        Self {
            dt,
            duration,
            cadence: 10,
            profiles: ProfileMode::Final,
        }
    }

    /// Step count `⌈duration/dt⌉`, ignoring a rounding-level remainder.
    pub fn step_count(&self) -> usize {
        let ratio = (self.duration / self.dt).as_f64();
        let n = ratio.round();
        if (ratio - n).abs() <= 1e-9 * n.max(1.0) {
            n as usize
        } else {
            ratio.ceil() as usize
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(SleError::InvalidParameter(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if !(self.duration >= T::zero()) || !self.duration.is_finite() {
            return Err(SleError::InvalidParameter(format!(
                "final time must be non-negative, got {}",
                self.duration
            )));
        }
        if self.cadence == 0 {
            return Err(SleError::InvalidParameter(
                "output cadence must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Counters for the a-priori bounds checked at every record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monitors<T> {
    pub energy: EnergyBound<T>,
    pub oscillation: OscillationBound<T>,
    pub energy_violations: usize,
    pub oscillation_violations: usize,
    pub mass_psi0: T,
    pub mass_mu0: T,
    pub max_mass_psi_drift: T,
    pub max_mass_mu_drift: T,
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub records: Vec<ObservableRecord<T>>,
    pub state: SleState<T>,
    pub steps: usize,
    pub cfl_violations: usize,
    pub monitors: Monitors<T>,
}

/// Time-splitting solver bound to one set of grids and one coupling potential.
pub struct SleSolver<T: Real> {
    xg: Arc<XGrid<T>>,
    pg: Arc<PhaseGrid<T>>,
    potential: Arc<CouplingPotential<T>>,
    sampled: SampledCoupling<T>,
    options: SolverOptions,
    spectral: Spectral<T>,
    propagators: Vec<KineticPropagator<T>>,
    cfl_violations: usize,
}

impl<T: Real> SleSolver<T> {
    pub fn new(
        xg: Arc<XGrid<T>>,
        pg: Arc<PhaseGrid<T>>,
        potential: Arc<CouplingPotential<T>>,
        options: SolverOptions,
    ) -> Self {
        let sampled = SampledCoupling::new(&potential, &xg, &pg);
        let spectral = Spectral::new(xg.len());
        Self {
            xg,
            pg,
            potential,
            sampled,
            options,
            spectral,
            propagators: Vec::new(),
            cfl_violations: 0,
        }
    }

    pub fn options(&self) -> SolverOptions {
        self.options
    }

    pub fn potential(&self) -> &Arc<CouplingPotential<T>> {
        &self.potential
    }

    pub fn xgrid(&self) -> &Arc<XGrid<T>> {
        &self.xg
    }

    pub fn phase_grid(&self) -> &Arc<PhaseGrid<T>> {
        &self.pg
    }

    /// Number of transport steps so far that exceeded the CFL bound (warn mode).
    pub fn cfl_violations(&self) -> usize {
        self.cfl_violations
    }

    fn check_state(&self, state: &SleState<T>) -> Result<()> {
        if state.psi.grid().as_ref() != self.xg.as_ref() {
            return Err(SleError::IncompatibleGrids(
                "wave field does not live on the solver's x-grid".into(),
            ));
        }
        if state.mu.grid().as_ref() != self.pg.as_ref() {
            return Err(SleError::IncompatibleGrids(
                "phase density does not live on the solver's phase grid".into(),
            ));
        }
        Ok(())
    }

    /// `F_j = −Δx Σ_m ∂_yV(x_m, y_j)|ψ_m|²`.
    pub fn force(&self, psi: &WaveField<T>) -> Vec<T> {
        self.sampled
            .mean_force(&position_density(psi), self.xg.dx())
    }

    /// `Υ_d` of the phase density.
    pub fn upsilon(&self, mu: &PhaseDensity<T>) -> EhrenfestPotential<T> {
        let values = self
            .sampled
            .ehrenfest_potential(&mu.y_marginal(), self.pg.dy());
        EhrenfestPotential::new(self.xg.clone(), values).expect("tabulated rows span the x-grid")
    }

    fn kinetic(&mut self, psi: &mut WaveField<T>, dt: T) -> Result<()> {
        let h = psi.h();
        let idx = match self
            .propagators
            .iter()
            .position(|p| p.dt() == dt && p.h() == h)
        {
            Some(i) => i,
            None => {
                if self.propagators.len() >= 4 {
                    self.propagators.remove(0);
                }
                self.propagators
                    .push(KineticPropagator::new(&self.xg, h, dt));
                self.propagators.len() - 1
            }
        };
        self.propagators[idx].apply(psi, &mut self.spectral)
    }

    fn note_cfl(&mut self, status: CflStatus, dt: T) {
        if let CflStatus::Violated { dt_max } = status {
            if self.cfl_violations == 0 {
                warn!(
                    "transport step dt = {:e} exceeds the CFL bound {:e}; the upwind scheme may lose positivity",
                    dt.as_f64(),
                    dt_max
                );
            }
            self.cfl_violations += 1;
        }
    }

    /// Sub-flow A over `dt`.
    fn flow_a(&mut self, state: &mut SleState<T>, dt: T) -> Result<()> {
        let f_start = self.force(&state.psi);
        self.kinetic(&mut state.psi, dt)?;
        let status = match self.options.transport {
            TransportScheme::ForwardEuler => {
                transport_step(&mut state.mu, &f_start, dt, self.options.cfl)?
            }
            TransportScheme::Heun => {
                let f_end = self.force(&state.psi);
                transport_step_heun(&mut state.mu, &f_start, &f_end, dt, self.options.cfl)?
            }
        };
        self.note_cfl(status, dt);
        Ok(())
    }

    /// Sub-flow B over `dt`.
    fn flow_b(&mut self, state: &mut SleState<T>, dt: T) -> Result<()> {
        let upsilon = self.upsilon(&state.mu);
        potential_phase_step(&mut state.psi, &upsilon, dt)
    }

    pub fn lie_step(&mut self, state: &mut SleState<T>, dt: T) -> Result<()> {
        self.check_state(state)?;
        self.flow_a(state, dt)?;
        self.flow_b(state, dt)?;
        state.t = state.t + dt;
        Ok(())
    }

    pub fn strang_step(&mut self, state: &mut SleState<T>, dt: T) -> Result<()> {
        self.check_state(state)?;
        let half = T::lit(0.5) * dt;
        self.flow_a(state, half)?;
        self.flow_b(state, dt)?;
        self.flow_a(state, half)?;
        state.t = state.t + dt;
        Ok(())
    }

    /// One step with the configured splitting.
    pub fn step(&mut self, state: &mut SleState<T>, dt: T) -> Result<()> {
        match self.options.splitting {
            Splitting::Lie => self.lie_step(state, dt),
            Splitting::Strang => self.strang_step(state, dt),
        }
    }

    pub fn record(&self, state: &SleState<T>, profiles: bool) -> Result<ObservableRecord<T>> {
        let upsilon = self.upsilon(&state.mu);
        let (rho, current, kinetic) = if profiles {
            (
                Some(position_density(&state.psi)),
                Some(current_density(&state.psi)?),
                Some(kinetic_density(&state.psi)?),
            )
        } else {
            (None, None, None)
        };
        Ok(ObservableRecord {
            t: state.t,
            mass_psi: l2_norm_discrete(&state.psi).powi(2),
            mass_mu: phase_mass(&state.mu),
            energy_ed: discrete_energy(&state.psi, &state.mu, &upsilon)?,
            hgrad_norm: hgrad_norm(&state.psi)?,
            rho,
            current,
            kinetic,
        })
    }

    fn monitors(&self, first: &ObservableRecord<T>) -> Monitors<T> {
        let mass = first.mass_mu;
        Monitors {
            energy: EnergyBound::new(
                first.energy_ed,
                self.potential.sup_dv_dy(),
                mass,
                self.pg.deta(),
            ),
            oscillation: OscillationBound {
                initial: first.hgrad_norm,
                rate: self.potential.sup_dv_dx() * mass * first.mass_psi.sqrt(),
            },
            energy_violations: 0,
            oscillation_violations: 0,
            mass_psi0: first.mass_psi,
            mass_mu0: first.mass_mu,
            max_mass_psi_drift: T::zero(),
            max_mass_mu_drift: T::zero(),
        }
    }

    /// Integrates from `state.t` over `params.duration`; the last step is shortened
    /// so the run ends exactly at `state.t + duration`.
    pub fn run(&mut self, state: SleState<T>, params: &RunParams<T>) -> Result<RunOutput<T>> {
        self.run_with(state, params, |_| Ok(()))
    }

    /// As [`run`](Self::run), calling `observe` with the state after every step.
    pub fn run_with(
        &mut self,
        mut state: SleState<T>,
        params: &RunParams<T>,
        mut observe: impl FnMut(&SleState<T>) -> Result<()>,
    ) -> Result<RunOutput<T>> {
        params.validate()?;
        self.check_state(&state)?;
        let steps = if params.duration > T::zero() {
            params.step_count()
        } else {
            0
        };
        let start_violations = self.cfl_violations;
        let t0 = state.t;
        let end = t0 + params.duration;
        let first = self.record(
            &state,
            params.profiles == ProfileMode::Always
                || (steps == 0 && params.profiles == ProfileMode::Final),
        )?;
        let mut monitors = self.monitors(&first);
        let mut records = vec![first];
        for n in 1..=steps {
            let target = if n == steps {
                end
            } else {
                t0 + T::from_usize_lossy(n) * params.dt
            };
            let dt = target - state.t;
            self.step(&mut state, dt)?;
            state.t = target;
            observe(&state)?;
            let last = n == steps;
            if last || n % params.cadence == 0 {
                let profiles = match params.profiles {
                    ProfileMode::Never => false,
                    ProfileMode::Final => last,
                    ProfileMode::Always => true,
                };
                let rec = self.record(&state, profiles)?;
                check_monitors(&mut monitors, &rec, t0);
                if !rec.energy_ed.is_finite() {
                    return Err(SleError::NonFinite("discrete energy"));
                }
                records.push(rec);
            }
        }
        Ok(RunOutput {
            records,
            state,
            steps,
            cfl_violations: self.cfl_violations - start_violations,
            monitors,
        })
    }
}

fn check_monitors<T: Real>(m: &mut Monitors<T>, rec: &ObservableRecord<T>, t0: T) {
    // rounding allowance for quantities that sit on their bound
    let slack = T::lit(1e-12);
    let elapsed = rec.t - t0;
    let e_bound = m.energy.at(elapsed);
    if rec.energy_ed > e_bound + slack * e_bound.abs().max(T::one()) {
        m.energy_violations += 1;
    }
    let o_bound = m.oscillation.at(elapsed);
    if rec.hgrad_norm > o_bound + slack * o_bound.max(T::one()) {
        m.oscillation_violations += 1;
    }
    m.max_mass_psi_drift = m.max_mass_psi_drift.max((rec.mass_psi - m.mass_psi0).abs());
    m.max_mass_mu_drift = m.max_mass_mu_drift.max((rec.mass_mu - m.mass_mu0).abs());
}
