//! Exact-in-time sub-steps of the quantum part: spectral free flight and
//! pointwise phase rotation by a frozen potential.
//!
//! Transform convention: `ψ̂_ℓ = Σ_j ψ_j e^{−iω_ℓ(x_j − a)}` and
//! `ψ_j = (1/M) Σ_ℓ ψ̂_ℓ e^{iω_ℓ(x_j − a)}`, coefficients stored in FFT order
//! (see [`XGrid::fft_omegas`]).

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, SleError};
use crate::grids::{WaveField, XGrid};
use crate::potential::EhrenfestPotential;
use crate::scalar::Real;

/// Planned forward/inverse transforms of a fixed length.
pub struct Spectral<T: Real> {
    len: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: Real> Spectral<T> {
    pub fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            len,
            forward,
            inverse,
            scratch: vec![Complex::new(T::zero(), T::zero()); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.len {
            return Err(SleError::LengthMismatch {
                expected: self.len,
                got: n,
            });
        }
        Ok(())
    }

    pub fn forward(&mut self, values: &mut [Complex<T>]) -> Result<()> {
        self.check(values.len())?;
        self.forward.process_with_scratch(values, &mut self.scratch);
        Ok(())
    }

    /// Inverse transform including the `1/M` factor, so `inverse ∘ forward = id`.
    pub fn inverse(&mut self, values: &mut [Complex<T>]) -> Result<()> {
        self.check(values.len())?;
        self.inverse.process_with_scratch(values, &mut self.scratch);
        let inv = T::from_usize_lossy(self.len).recip();
        values.iter_mut().for_each(|z| *z = z.scale(inv));
        Ok(())
    }
}

/// Forward transform of an even-length vector.
pub fn dft<T: Real>(values: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    if values.is_empty() || !values.len().is_multiple_of(2) {
        return Err(SleError::InvalidParameter(format!(
            "transform length must be even and positive, got {}",
            values.len()
        )));
    }
    let mut out = values.to_vec();
    Spectral::new(values.len()).forward(&mut out)?;
    Ok(out)
}

/// Normalized inverse of [`dft`].
pub fn idft<T: Real>(coeffs: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    if coeffs.is_empty() || !coeffs.len().is_multiple_of(2) {
        return Err(SleError::InvalidParameter(format!(
            "transform length must be even and positive, got {}",
            coeffs.len()
        )));
    }
    let mut out = coeffs.to_vec();
    Spectral::new(coeffs.len()).inverse(&mut out)?;
    Ok(out)
}

/// Fourier multiplier `e^{−i h dt ω_ℓ²/2}` for a fixed `(grid, h, dt)`.
#[derive(Debug, Clone)]
pub struct KineticPropagator<T> {
    h: T,
    dt: T,
    multiplier: Vec<Complex<T>>,
}

impl<T: Real> KineticPropagator<T> {
    pub fn new(grid: &XGrid<T>, h: T, dt: T) -> Self {
        let half = T::lit(0.5);
        let multiplier = grid
            .fft_omegas()
            .iter()
            .map(|&w| Complex::from_polar(T::one(), -h * dt * w * w * half))
            .collect();
        Self { h, dt, multiplier }
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn apply(&self, psi: &mut WaveField<T>, spectral: &mut Spectral<T>) -> Result<()> {
        if self.multiplier.len() != psi.values().len() {
            return Err(SleError::LengthMismatch {
                expected: self.multiplier.len(),
                got: psi.values().len(),
            });
        }
        let values = psi.values_mut();
        spectral.forward(values)?;
        values
            .iter_mut()
            .zip(&self.multiplier)
            .for_each(|(z, m)| *z = *z * m);
        spectral.inverse(values)
    }
}

/// Free flight over `dt`: each Fourier coefficient gains the phase `e^{−i h dt ω_ℓ²/2}`.
pub fn kinetic_step<T: Real>(psi: &mut WaveField<T>, dt: T) -> Result<()> {
    let prop = KineticPropagator::new(psi.grid(), psi.h(), dt);
    let mut spectral = Spectral::new(psi.grid().len());
    prop.apply(psi, &mut spectral)
}

/// `ψ_j ← e^{−i Υ_d(x_j) dt / h} ψ_j`.
pub fn potential_phase_step<T: Real>(
    psi: &mut WaveField<T>,
    upsilon: &EhrenfestPotential<T>,
    dt: T,
) -> Result<()> {
    if upsilon.values().len() != psi.values().len() || upsilon.grid().dx() != psi.grid().dx() {
        return Err(SleError::IncompatibleGrids(
            "Ehrenfest potential and wave field live on different x-grids".into(),
        ));
    }
    let scale = dt / psi.h();
    psi.values_mut()
        .iter_mut()
        .zip(upsilon.values())
        .for_each(|(z, &u)| *z = *z * Complex::from_polar(T::one(), -u * scale));
    Ok(())
}

/// Spectral derivative `∂_x ψ` (coefficients times `iω_ℓ`, Nyquist mode dropped).
pub fn spectral_derivative<T: Real>(
    values: &[Complex<T>],
    grid: &XGrid<T>,
    spectral: &mut Spectral<T>,
) -> Result<Vec<Complex<T>>> {
    let mut coeffs = values.to_vec();
    spectral.forward(&mut coeffs)?;
    coeffs
        .iter_mut()
        .zip(grid.fft_omegas())
        .for_each(|(z, &w)| *z = Complex::new(-z.im * w, z.re * w));
    coeffs[grid.nyquist_slot()] = Complex::new(T::zero(), T::zero());
    spectral.inverse(&mut coeffs)?;
    Ok(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{l2_norm, l2_norm_discrete, make_xgrid};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    type C = Complex<f64>;

    fn grid(m: usize) -> Arc<XGrid<f64>> {
        Arc::new(make_xgrid(-PI, PI, m).unwrap())
    }

    fn random_field(m: usize, seed: u64) -> Vec<C> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m)
            .map(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    fn hgrad(psi: &WaveField<f64>) -> f64 {
        let mut sp = Spectral::new(psi.grid().len());
        let d = spectral_derivative(psi.values(), psi.grid(), &mut sp).unwrap();
        psi.h() * l2_norm(&d, psi.grid().dx())
    }

    #[test]
    fn dft_of_constant_and_single_mode() {
        let g = grid(16);
        let ones = vec![C::new(1.0, 0.0); 16];
        let hat = dft(&ones).unwrap();
        assert!((hat[0] - C::new(16.0, 0.0)).norm() < 1e-12);
        assert!(hat[1..].iter().all(|z| z.norm() < 1e-12));

        let w1 = g.omega(1);
        let mode: Vec<C> = g
            .points()
            .iter()
            .map(|&x| C::from_polar(1.0, w1 * (x - g.a())))
            .collect();
        let hat = dft(&mode).unwrap();
        for (slot, z) in hat.iter().enumerate() {
            let expect = if slot == g.slot_of_mode(1) { 16.0 } else { 0.0 };
            assert!((z - C::new(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn dft_round_trip_and_errors() {
        let v = random_field(64, 7);
        let back = idft(&dft(&v).unwrap()).unwrap();
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(dft(&random_field(7, 1)).is_err());
        let mut sp = Spectral::<f64>::new(8);
        assert!(sp.forward(&mut random_field(6, 1)).is_err());
    }

    #[test]
    fn discrete_parseval() {
        let g = grid(128);
        let psi = WaveField::new(g.clone(), random_field(128, 3), 0.5).unwrap();
        let hat = dft(psi.values()).unwrap();
        let lhs = l2_norm_discrete(&psi).powi(2);
        let rhs = g.length() / (128.0 * 128.0) * hat.iter().map(|z| z.norm_sqr()).sum::<f64>();
        assert!(((lhs - rhs) / lhs).abs() < 1e-12);
    }

    #[test]
    fn kinetic_step_single_mode_and_constant() {
        let g = grid(32);
        let (h, dt) = (0.1, 0.37);
        let w1 = g.omega(1);
        let mut psi =
            WaveField::from_fn(g.clone(), h, |x| C::from_polar(1.0, w1 * (x - g.a()))).unwrap();
        let before = psi.values().to_vec();
        kinetic_step(&mut psi, dt).unwrap();
        let phase = C::from_polar(1.0, -h * dt / 2.0 * w1 * w1);
        for (a, b) in psi.values().iter().zip(&before) {
            assert!((a - phase * b).norm() < 1e-13);
        }

        let mut c = WaveField::from_fn(g, h, |_| C::new(0.3, -0.2)).unwrap();
        kinetic_step(&mut c, dt).unwrap();
        assert!(c
            .values()
            .iter()
            .all(|z| (z - C::new(0.3, -0.2)).norm() < 1e-14));
    }

    #[test]
    fn kinetic_step_matches_free_gaussian() {
        // analytic solution of i h ψ_t = −(h²/2) ψ_xx for a boosted Gaussian
        let g = grid(256);
        let (h, sigma, x0, k0, t) = (0.1, 0.3, -0.5, 5.0, 0.5);
        let exact = |x: f64, t: f64| -> C {
            let s = C::new(sigma * sigma, h * t);
            let u = x - h * k0 * t - x0;
            (C::new(sigma * sigma, 0.0) / s).sqrt()
                * (-(u * u) / (2.0 * s)).exp()
                * C::from_polar(1.0, k0 * x - h * k0 * k0 * t / 2.0)
        };
        let mut psi = WaveField::from_fn(g.clone(), h, |x| exact(x, 0.0)).unwrap();
        // two half steps must agree with one full step
        kinetic_step(&mut psi, t / 2.0).unwrap();
        kinetic_step(&mut psi, t / 2.0).unwrap();
        let err: Vec<C> = psi
            .values()
            .iter()
            .zip(g.points())
            .map(|(z, &x)| z - exact(x, t))
            .collect();
        assert!(l2_norm(&err, g.dx()) < 1e-8, "{}", l2_norm(&err, g.dx()));
    }

    #[test]
    fn phase_step_cases() {
        let g = grid(64);
        let h = 0.05;
        let psi0 = WaveField::new(g.clone(), random_field(64, 11), h).unwrap();

        let mut psi = psi0.clone();
        potential_phase_step(&mut psi, &EhrenfestPotential::constant(g.clone(), 0.0), 0.1).unwrap();
        assert_eq!(psi.values(), psi0.values());

        let (c, dt) = (2.5, 0.1);
        let mut psi = psi0.clone();
        potential_phase_step(&mut psi, &EhrenfestPotential::constant(g.clone(), c), dt).unwrap();
        let phase = C::from_polar(1.0, -c * dt / h);
        for (a, b) in psi.values().iter().zip(psi0.values()) {
            assert!((a - phase * b).norm() < 1e-13);
        }

        let ups =
            EhrenfestPotential::new(g.clone(), g.points().iter().map(|x| x * x).collect()).unwrap();
        let mut psi = psi0.clone();
        potential_phase_step(&mut psi, &ups, 0.3).unwrap();
        for (a, b) in psi.values().iter().zip(psi0.values()) {
            assert!((a.norm() - b.norm()).abs() < 1e-14);
        }

        let other = grid(32);
        assert!(
            potential_phase_step(&mut psi, &EhrenfestPotential::constant(other, 1.0), 0.1).is_err()
        );
    }

    #[test]
    fn kinetic_step_conserves_hgrad() {
        let g = grid(128);
        let mut psi = WaveField::from_fn(g, 1.0 / 16.0, |x| {
            C::new((-4.0 * x * x).exp(), 0.0) * C::from_polar(1.0, 16.0 * x.sin())
        })
        .unwrap();
        let before = hgrad(&psi);
        for _ in 0..10 {
            kinetic_step(&mut psi, 0.05).unwrap();
        }
        assert!(((hgrad(&psi) - before) / before).abs() < 1e-12);
    }

    #[test]
    fn phase_step_hgrad_growth_is_bounded() {
        // Υ = 1 + sin x has ‖∂_xΥ‖_∞ = 1
        let g = grid(256);
        let h = 1.0 / 32.0;
        let ups = EhrenfestPotential::new(
            g.clone(),
            g.points().iter().map(|x| 1.0 + x.sin()).collect(),
        )
        .unwrap();
        let mut psi = WaveField::from_fn(g, h, |x| {
            C::new((-3.0 * x * x).exp(), 0.0) * C::from_polar(1.0, x / h)
        })
        .unwrap();
        psi.normalize().unwrap();
        let dt = 0.02;
        for _ in 0..20 {
            let before = hgrad(&psi);
            potential_phase_step(&mut psi, &ups, dt).unwrap();
            assert!(hgrad(&psi) <= before + dt + 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn mass_is_conserved_by_both_substeps(seed in 0u64..1000, steps in 1usize..20, dt in 0.001f64..0.5) {
            let g = grid(64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut psi = WaveField::new(g.clone(), random_field(64, seed), 0.1).unwrap();
            let ups = EhrenfestPotential::new(g.clone(), (0..64).map(|_| rng.gen_range(0.0..5.0)).collect()).unwrap();
            let before = l2_norm_discrete(&psi);
            let prop = KineticPropagator::new(&g, 0.1, dt);
            let mut sp = Spectral::new(64);
            for _ in 0..steps {
                prop.apply(&mut psi, &mut sp).unwrap();
                potential_phase_step(&mut psi, &ups, dt).unwrap();
            }
            prop_assert!(((l2_norm_discrete(&psi) - before) / before).abs() < 1e-12);
        }
    }
}
