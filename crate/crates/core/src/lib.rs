//! Time-splitting spectral/upwind solver for the semiclassical
//! Schrödinger–Liouville–Ehrenfest system in one dimension.
//!
//! The quantum wave function `ψ(x)` is advanced with an exact spectral free
//! flight and an exact phase rotation by the Ehrenfest potential; the classical
//! phase-space density `μ(y, η)` is transported by a conservative flux-split
//! upwind scheme. All numerics are generic over [`Real`] (`f32` or `f64`);
//! the `*64` aliases below fix the scalar to `f64`.

pub mod ehrenfest;
pub mod error;
pub mod grids;
pub mod initial;
pub mod limit;
pub mod liouville;
pub mod observables;
pub mod potential;
pub mod scalar;
pub mod schrodinger;
pub mod solver;
pub mod wigner;

pub use error::{Result, SleError};
pub use grids::{
    l2_norm_discrete, make_phasegrid, make_xgrid, phase_mass, PhaseDensity, PhaseGrid, WaveField,
    XGrid,
};
pub use liouville::{CflMode, TransportScheme};
pub use observables::ObservableRecord;
pub use potential::{CouplingPotential, EhrenfestPotential};
pub use scalar::Real;
pub use solver::{RunOutput, SleSolver, SleState, SolverOptions, Splitting};

pub type XGrid64 = grids::XGrid<f64>;
pub type PhaseGrid64 = grids::PhaseGrid<f64>;
pub type WaveField64 = grids::WaveField<f64>;
pub type PhaseDensity64 = grids::PhaseDensity<f64>;
pub type CouplingPotential64 = potential::CouplingPotential<f64>;
pub type EhrenfestPotential64 = potential::EhrenfestPotential<f64>;
pub type SleState64 = solver::SleState<f64>;
pub type SleSolver64 = solver::SleSolver<f64>;
pub type ObservableRecord64 = observables::ObservableRecord<f64>;
pub type WignerField64 = wigner::WignerField<f64>;
pub type NuField64 = limit::NuField<f64>;
pub type LimitSolver64 = limit::LimitSolver<f64>;
pub type EhrenfestOde64 = ehrenfest::EhrenfestOde<f64>;

pub type XGrid32 = grids::XGrid<f32>;
pub type WaveField32 = grids::WaveField<f32>;
pub type PhaseDensity32 = grids::PhaseDensity<f32>;
pub type SleSolver32 = solver::SleSolver<f32>;
