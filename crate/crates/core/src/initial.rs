//! Built-in initial data.

use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Result, SleError};
use crate::grids::{phase_mass, PhaseDensity, PhaseGrid, WaveField, XGrid};
use crate::scalar::Real;

/// Initial wave functions, normalized to unit ℓ² norm after sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WaveInit {
    /// `exp(−25(x+0.2)²) · exp(−i ln(2cosh(5(x+0.2))) / (5h))`
    WkbCosh,
    /// `exp(−5(x+0.1)²) · exp(i sin(x) / h)`
    WkbSine,
    /// `exp(−(x−x0)²/(2σ²)) · exp(i p x / h)`
    Gaussian { x0: f64, sigma: f64, p: f64 },
}

impl WaveInit {
    pub fn name(&self) -> &'static str {
        match self {
            WaveInit::WkbCosh => "wkb_cosh",
            WaveInit::WkbSine => "wkb_sine",
            WaveInit::Gaussian { .. } => "gaussian",
        }
    }

    pub fn build<T: Real>(&self, grid: Arc<XGrid<T>>, h: T) -> Result<WaveField<T>> {
        let hf = h.as_f64();
        let sample = |x: T| -> Complex<T> {
            let x = x.as_f64();
            let (amp, phase) = match *self {
                WaveInit::WkbCosh => {
                    let s = x + 0.2;
                    (
                        (-25.0 * s * s).exp(),
                        -(2.0 * (5.0 * s).cosh()).ln() / (5.0 * hf),
                    )
                }
                WaveInit::WkbSine => {
                    let s = x + 0.1;
                    ((-5.0 * s * s).exp(), x.sin() / hf)
                }
                WaveInit::Gaussian { x0, sigma, p } => {
                    let s = x - x0;
                    ((-s * s / (2.0 * sigma * sigma)).exp(), p * x / hf)
                }
            };
            // reduce the phase in f64 before narrowing
            let phase = phase.rem_euclid(std::f64::consts::TAU);
            Complex::from_polar(T::lit(amp), T::lit(phase))
        };
        let mut psi = WaveField::from_fn(grid, h, sample)?;
        psi.normalize()?;
        Ok(psi)
    }
}

impl FromStr for WaveInit {
    type Err = SleError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wkb_cosh" => Ok(WaveInit::WkbCosh),
            "wkb_sine" => Ok(WaveInit::WkbSine),
            other => Err(SleError::InvalidParameter(format!(
                "unknown initial wave function '{other}' (expected wkb_cosh or wkb_sine)"
            ))),
        }
    }
}

/// Initial phase densities, normalized to unit phase mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityInit {
    /// `C_N exp(−1/(1−y²)) exp(−1/(1−η²))` on `|y|, |η| < 1`.
    Bump,
    /// All mass in the cell nearest to `(y, η)`.
    PointMass { y: f64, eta: f64 },
}

impl DensityInit {
    pub fn name(&self) -> &'static str {
        match self {
            DensityInit::Bump => "bump",
            DensityInit::PointMass { .. } => "point_mass",
        }
    }

    pub fn build<T: Real>(&self, grid: Arc<PhaseGrid<T>>) -> Result<PhaseDensity<T>> {
        match *self {
            DensityInit::Bump => {
                let mut mu = PhaseDensity::from_fn(grid, |y, eta| {
                    T::lit(bump_1d(y.as_f64()) * bump_1d(eta.as_f64()))
                })?;
                let mass = phase_mass(&mu);
                if !(mass > T::zero()) {
                    return Err(SleError::InvalidGrid(
                        "phase grid does not resolve the bump support |y|, |η| < 1".into(),
                    ));
                }
                mu.values_mut().mapv_inplace(|v| v / mass);
                Ok(mu)
            }
            DensityInit::PointMass { y, eta } => {
                let (j, k) = grid.nearest_cell(T::lit(y), T::lit(eta));
                Ok(PhaseDensity::point_mass(grid, j, k))
            }
        }
    }
}

impl FromStr for DensityInit {
    type Err = SleError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bump" => Ok(DensityInit::Bump),
            other => Err(SleError::InvalidParameter(format!(
                "unknown initial phase density '{other}' (expected bump or point_mass)"
            ))),
        }
    }
}

fn bump_1d(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{l2_norm_discrete, make_phasegrid, make_xgrid};
    use std::f64::consts::PI;

    fn standard_grids(h: f64) -> (Arc<XGrid<f64>>, Arc<PhaseGrid<f64>>) {
        let m = (16.0 / h).round() as usize;
        (
            Arc::new(make_xgrid(-PI, PI, m).unwrap()),
            Arc::new(make_phasegrid(-2.0 * PI, 2.0 * PI, 128, -2.0 * PI, 2.0 * PI, 128).unwrap()),
        )
    }

    #[test]
    fn waves_are_normalized() {
        let (xg, _) = standard_grids(1.0 / 256.0);
        for init in [WaveInit::WkbCosh, WaveInit::WkbSine] {
            let psi = init.build(xg.clone(), 1.0 / 256.0).unwrap();
            assert!((l2_norm_discrete(&psi) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wkb_cosh_amplitude_matches_quadrature() {
        // ∫ exp(−50 s²) ds = sqrt(π/50); the tails are negligible on [−π, π)
        let (xg, _) = standard_grids(1.0 / 64.0);
        let h = 1.0 / 64.0;
        let raw = WaveField::from_fn(xg.clone(), h, |x| {
            Complex::new((-25.0 * (x + 0.2) * (x + 0.2)).exp(), 0.0)
        })
        .unwrap();
        let norm2 = l2_norm_discrete(&raw).powi(2);
        assert!((norm2 - (PI / 50.0).sqrt()).abs() < 1e-12);

        let psi = WaveInit::WkbCosh.build(xg, h).unwrap();
        let j = xg_index(&psi, -0.2);
        let x = psi.grid().points()[j];
        let expected = (-25.0 * (x + 0.2) * (x + 0.2)).exp() / norm2.sqrt();
        assert!((psi.values()[j].norm() - expected).abs() < 1e-12);
    }

    fn xg_index(psi: &WaveField<f64>, x: f64) -> usize {
        let g = psi.grid();
        ((x - g.a()) / g.dx()).round() as usize
    }

    #[test]
    fn bump_has_unit_mass_and_support() {
        let (_, pg) = standard_grids(1.0 / 256.0);
        let mu = DensityInit::Bump.build(pg.clone()).unwrap();
        assert!((phase_mass(&mu) - 1.0).abs() < 1e-14);
        for ((j, k), &v) in mu.values().indexed_iter() {
            assert!(v >= 0.0);
            if pg.y()[j].abs() >= 1.0 || pg.eta()[k].abs() >= 1.0 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn bump_rejects_unresolved_grid() {
        let pg = Arc::new(make_phasegrid(1.5, 5.5, 4, 1.5, 5.5, 4).unwrap());
        assert!(DensityInit::Bump.build(pg).is_err());
    }

    #[test]
    fn point_mass_lands_in_nearest_cell() {
        let (_, pg) = standard_grids(1.0 / 256.0);
        let mu = DensityInit::PointMass { y: 0.5, eta: 1.0 }
            .build(pg.clone())
            .unwrap();
        assert!((phase_mass(&mu) - 1.0).abs() < 1e-14);
        let (j, k) = mu.argmax();
        assert!((pg.y()[j] - 0.5).abs() <= pg.dy() / 2.0);
        assert!((pg.eta()[k] - 1.0).abs() <= pg.deta() / 2.0);
    }

    #[test]
    fn names_round_trip() {
        for init in [WaveInit::WkbCosh, WaveInit::WkbSine] {
            assert_eq!(init.name().parse::<WaveInit>().unwrap(), init);
        }
        assert!("plane".parse::<WaveInit>().is_err());
        assert_eq!("bump".parse::<DensityInit>().unwrap(), DensityInit::Bump);
    }
}
