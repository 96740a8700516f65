//! Quadratic observables of the wave function, the discrete energy, and the
//! a-priori bounds the scheme guarantees for them.

use num_complex::Complex;

use crate::error::Result;
use crate::grids::{l2_norm, PhaseDensity, WaveField};
use crate::potential::EhrenfestPotential;
use crate::scalar::Real;
use crate::schrodinger::{spectral_derivative, Spectral};

/// Snapshot of the monitored quantities at one output time.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableRecord<T> {
    pub t: T,
    pub mass_psi: T,
    pub mass_mu: T,
    pub energy_ed: T,
    pub hgrad_norm: T,
    pub rho: Option<Vec<T>>,
    pub current: Option<Vec<T>>,
    pub kinetic: Option<Vec<T>>,
}

/// `ρ_j = |ψ_j|²`.
pub fn position_density<T: Real>(psi: &WaveField<T>) -> Vec<T> {
    psi.values().iter().map(|z| z.norm_sqr()).collect()
}

fn derivative<T: Real>(psi: &WaveField<T>) -> Result<Vec<Complex<T>>> {
    let mut spectral = Spectral::new(psi.grid().len());
    spectral_derivative(psi.values(), psi.grid(), &mut spectral)
}

/// `j_m = h Im(ψ̄_m (∂_xψ)_m)` with a spectral derivative.
pub fn current_density<T: Real>(psi: &WaveField<T>) -> Result<Vec<T>> {
    let d = derivative(psi)?;
    let h = psi.h();
    Ok(psi
        .values()
        .iter()
        .zip(&d)
        .map(|(z, dz)| h * (z.conj() * dz).im)
        .collect())
}

/// `κ_m = (h²/2) |(∂_xψ)_m|²`.
pub fn kinetic_density<T: Real>(psi: &WaveField<T>) -> Result<Vec<T>> {
    let d = derivative(psi)?;
    let c = T::lit(0.5) * psi.h() * psi.h();
    Ok(d.iter().map(|dz| c * dz.norm_sqr()).collect())
}

/// `‖h ∂_x ψ‖_{ℓ²}`.
pub fn hgrad_norm<T: Real>(psi: &WaveField<T>) -> Result<T> {
    let d = derivative(psi)?;
    Ok(psi.h() * l2_norm(&d, psi.grid().dx()))
}

/// `E_d = Δx Σ (h²/2)|∂_xψ|² + Δx Σ Υ_d |ψ|² + Σ_jk (η_k²/2) μ_jk ΔyΔη`.
pub fn discrete_energy<T: Real>(
    psi: &WaveField<T>,
    mu: &PhaseDensity<T>,
    upsilon: &EhrenfestPotential<T>,
) -> Result<T> {
    let dx = psi.grid().dx();
    let kinetic = kinetic_density(psi)?.into_iter().sum::<T>() * dx;
    let coupling = psi
        .values()
        .iter()
        .zip(upsilon.values())
        .map(|(z, &u)| u * z.norm_sqr())
        .sum::<T>()
        * dx;
    Ok(kinetic + coupling + classical_kinetic_energy(mu))
}

/// `Σ_jk (η_k²/2) μ_jk ΔyΔη`.
pub fn classical_kinetic_energy<T: Real>(mu: &PhaseDensity<T>) -> T {
    let pg = mu.grid();
    let half = T::lit(0.5);
    mu.values()
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(pg.eta())
                .map(|(&m, &e)| half * e * e * m)
                .sum::<T>()
        })
        .sum::<T>()
        * pg.cell_area()
}

/// Gronwall bound `(C₁ + E_d(0)) e^t − C₁` with `C₁ = 2L²C + (LC/2)Δη`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBound<T> {
    pub e0: T,
    pub c1: T,
}

impl<T: Real> EnergyBound<T> {
    /// `sup_force` is `L = ‖∂_yV‖_∞`, `mass` is the conserved phase mass `C`.
    pub fn new(e0: T, sup_force: T, mass: T, deta: T) -> Self {
        let two = T::lit(2.0);
        let c1 = two * sup_force * sup_force * mass + sup_force * mass / two * deta;
        Self { e0, c1 }
    }

    pub fn at(&self, t: T) -> T {
        (self.c1 + self.e0) * t.exp() - self.c1
    }
}

/// Linear-growth bound `‖h∂_xψ⁰‖ + C₀ t` on the h-oscillation norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillationBound<T> {
    pub initial: T,
    pub rate: T,
}

impl<T: Real> OscillationBound<T> {
    pub fn at(&self, t: T) -> T {
        self.initial + self.rate * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{l2_norm_discrete, make_phasegrid, make_xgrid};
    use crate::schrodinger::potential_phase_step;
    use std::f64::consts::PI;
    use std::sync::Arc;

    type C = Complex<f64>;

    fn xg(m: usize) -> Arc<crate::grids::XGrid<f64>> {
        Arc::new(make_xgrid(-PI, PI, m).unwrap())
    }

    #[test]
    fn position_density_cases() {
        let g = xg(64);
        let psi = WaveField::from_fn(g.clone(), 0.1, |x| C::from_polar(1.0, 3.0 * x)).unwrap();
        assert!(position_density(&psi)
            .iter()
            .all(|r| (r - 1.0).abs() < 1e-14));

        let mut psi =
            WaveField::from_fn(g.clone(), 0.1, |x| C::new((-x * x).exp(), x.sin())).unwrap();
        let before = position_density(&psi);
        let ups = crate::potential::EhrenfestPotential::new(
            g.clone(),
            g.points().iter().map(|x| x * x).collect(),
        )
        .unwrap();
        potential_phase_step(&mut psi, &ups, 0.4).unwrap();
        for (a, b) in position_density(&psi).iter().zip(&before) {
            assert!((a - b).abs() < 1e-14);
        }
        let total: f64 = before.iter().sum::<f64>() * g.dx();
        assert!((total - l2_norm_discrete(&psi).powi(2)).abs() < 1e-13);
    }

    #[test]
    fn current_density_cases() {
        let g = xg(256);
        let h = 1.0 / 32.0;
        let real = WaveField::from_fn(g.clone(), h, |x| C::new((-4.0 * x * x).exp(), 0.0)).unwrap();
        assert!(current_density(&real)
            .unwrap()
            .iter()
            .all(|j| j.abs() < 1e-12));

        // WKB plane-wave phase S = p x, p = 1/4 so that p/h is an integer mode
        let p = 0.25;
        let amp = |x: f64| (-4.0 * x * x).exp();
        let psi = WaveField::from_fn(g.clone(), h, |x| C::from_polar(amp(x), p * x / h)).unwrap();
        let j = current_density(&psi).unwrap();
        for (jm, &x) in j.iter().zip(g.points()) {
            assert!((jm - amp(x).powi(2) * p).abs() < 1e-10);
        }

        let mut rotated = psi.clone();
        rotated
            .values_mut()
            .iter_mut()
            .for_each(|z| *z *= C::from_polar(1.0, 0.77));
        for (a, b) in current_density(&rotated).unwrap().iter().zip(&j) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_trivial_cases() {
        let g = xg(32);
        let pg = Arc::new(make_phasegrid(-1.0, 1.0, 8, -2.0, 2.0, 8).unwrap());
        let psi =
            WaveField::from_fn(g.clone(), 0.5, |_| C::new((2.0 * PI).sqrt().recip(), 0.0)).unwrap();
        let zero_ups = EhrenfestPotential::constant(g.clone(), 0.0);

        let k_zero = pg.eta().iter().position(|e| *e == 0.0).unwrap();
        let at_rest = PhaseDensity::point_mass(pg.clone(), 3, k_zero);
        assert!(discrete_energy(&psi, &at_rest, &zero_ups).unwrap().abs() < 1e-14);

        let k_one = pg
            .eta()
            .iter()
            .position(|e| (*e - 1.0).abs() < 1e-14)
            .unwrap();
        let moving = PhaseDensity::point_mass(pg, 3, k_one);
        assert!((discrete_energy(&psi, &moving, &zero_ups).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn bounds_evaluate() {
        let b = EnergyBound::new(1.0_f64, 2.0, 1.0, 0.1);
        assert!((b.c1 - (8.0 + 0.1)).abs() < 1e-14);
        assert!((b.at(0.0) - 1.0).abs() < 1e-14);
        assert!(b.at(0.5) > 1.0);
        let o = OscillationBound {
            initial: 0.3_f64,
            rate: 2.0,
        };
        assert!((o.at(0.25) - 0.8).abs() < 1e-15);
    }
}
