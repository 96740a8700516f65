//! Experiment drivers: single runs, parameter sweeps against reference runs,
//! the classical-limit comparison and the point-particle cross-check.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use rayon::prelude::*;
use sle_core::ehrenfest::OdeState;
use sle_core::grids::{l2_norm, l2_norm_real, phase_l2_norm};
use sle_core::initial::{DensityInit, WaveInit};
use sle_core::limit::{coarse_average, make_nu_grid, nu_from_wave, LimitSolver, NuProjection};
use sle_core::observables::position_density;
use sle_core::solver::{ProfileMode, RunOutput, RunParams};
use sle_core::{EhrenfestOde64, SleSolver64, SleState64};

use crate::config::{
    DensityKind, ExperimentKind, ExperimentSpec, LimitConfig, OdeConfig, RunConfig,
};
use crate::error::CliError;
use crate::output::{write_table, CsvWriter, Provenance};

pub type RunOutput64 = RunOutput<f64>;

/// Builds the solver and initial state of a run.
pub fn build(cfg: &RunConfig) -> Result<(SleSolver64, SleState64), CliError> {
    let xg = cfg.grid.xgrid(cfg.h)?;
    let pg = cfg.grid.phase_grid()?;
    let potential = Arc::new(cfg.potential.build(&xg, &pg)?);
    let psi = WaveInit::from(cfg.wave).build(xg.clone(), cfg.h)?;
    let mu = DensityInit::from(cfg.density).build(pg.clone())?;
    let solver = SleSolver64::new(xg, pg, potential, cfg.solver_options());
    Ok((solver, SleState64::new(psi, mu)))
}

/// Runs `cfg` from its initial data to `t_final`.
pub fn simulate(cfg: &RunConfig) -> Result<RunOutput64, CliError> {
    let (mut solver, state) = build(cfg)?;
    let mut params = RunParams::new(cfg.dt, cfg.t_final);
    params.cadence = cfg.cadence;
    params.profiles = cfg.profile_mode();
    info!(
        "run h = {:e}, dt = {:e}, T = {}, M = {}",
        cfg.h,
        cfg.dt,
        cfg.t_final,
        solver.xgrid().len()
    );
    Ok(solver.run(state, &params)?)
}

/// Aggregated monitor counts over every run of an experiment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Tally {
    pub runs: usize,
    pub energy_violations: usize,
    pub oscillation_violations: usize,
    pub cfl_violations: usize,
    pub max_mass_psi_drift: f64,
    pub max_mass_mu_drift: f64,
}

impl Tally {
    pub fn add(&mut self, out: &RunOutput64) {
        let m = &out.monitors;
        self.runs += 1;
        self.energy_violations += m.energy_violations;
        self.oscillation_violations += m.oscillation_violations;
        self.cfl_violations += out.cfl_violations;
        self.max_mass_psi_drift = self.max_mass_psi_drift.max(m.max_mass_psi_drift);
        self.max_mass_mu_drift = self.max_mass_mu_drift.max(m.max_mass_mu_drift);
    }

    pub fn merge(&mut self, other: &Tally) {
        self.runs += other.runs;
        self.energy_violations += other.energy_violations;
        self.oscillation_violations += other.oscillation_violations;
        self.cfl_violations += other.cfl_violations;
        self.max_mass_psi_drift = self.max_mass_psi_drift.max(other.max_mass_psi_drift);
        self.max_mass_mu_drift = self.max_mass_mu_drift.max(other.max_mass_mu_drift);
    }
}

/// ℓ² differences between two runs on identical grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub parameter: f64,
    pub err_psi: f64,
    pub err_rho: f64,
    pub err_mu: f64,
}

impl ErrorRow {
    fn as_vec(&self) -> Vec<f64> {
        vec![self.parameter, self.err_psi, self.err_rho, self.err_mu]
    }
}

const ERROR_COLUMNS: [&str; 4] = ["parameter", "err_psi", "err_rho", "err_mu"];

/// Absolute ℓ² differences of `ψ`, `|ψ|²` and `μ` between `a` and the reference `b`.
pub fn differences(a: &SleState64, b: &SleState64) -> (f64, f64, f64) {
    let dx = a.psi.grid().dx();
    let dpsi: Vec<_> = a
        .psi
        .values()
        .iter()
        .zip(b.psi.values())
        .map(|(x, y)| x - y)
        .collect();
    let ra = position_density(&a.psi);
    let rb = position_density(&b.psi);
    let drho: Vec<f64> = ra.iter().zip(&rb).map(|(x, y)| x - y).collect();
    let dmu = a.mu.values() - b.mu.values();
    (
        l2_norm(&dpsi, dx),
        l2_norm_real(&drho, dx),
        phase_l2_norm(&dmu, b.mu.grid()),
    )
}

/// Norms of `ψ`, `|ψ|²` and `μ`.
pub fn norms(s: &SleState64) -> (f64, f64, f64) {
    let dx = s.psi.grid().dx();
    (
        l2_norm(s.psi.values(), dx),
        l2_norm_real(&position_density(&s.psi), dx),
        phase_l2_norm(s.mu.values(), s.mu.grid()),
    )
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slopes {
    pub psi: f64,
    pub rho: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApRow {
    pub h: f64,
    pub dist_rho: f64,
    pub dist_mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeRow {
    pub t: f64,
    pub y_ode: f64,
    pub eta_ode: f64,
    pub y_peak: f64,
    pub eta_peak: f64,
    /// Cell distance (max over both axes, with periodic wrap) between the peak of μ and the trajectory.
    pub cell_offset: usize,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Single(Box<RunOutput64>),
    DtIndependence(Vec<ErrorRow>),
    ErrorVsH(Vec<ErrorRow>),
    TimeConvergence {
        rows: Vec<ErrorRow>,
        slopes: Slopes,
    },
    Ap {
        rows: Vec<ApRow>,
        projection: NuProjection<f64>,
    },
    Ode(Vec<OdeRow>),
}

#[derive(Debug, Clone)]
pub struct Report {
    pub outcome: Outcome,
    pub tally: Tally,
    pub files: Vec<PathBuf>,
}

/// Runs every `(h, dt)` job in parallel; failed jobs surface after the successful ones are kept.
fn sweep(base: &RunConfig, jobs: &[(f64, f64)]) -> (Vec<Option<RunOutput64>>, Option<CliError>) {
    let results: Vec<Result<RunOutput64, CliError>> = jobs
        .par_iter()
        .map(|&(h, dt)| {
            let mut cfg = base.with_h_dt(h, dt);
            cfg.profiles = crate::config::ProfilesKind::Never;
            simulate(&cfg)
        })
        .collect();
    let mut first_err = None;
    let outs = results
        .into_iter()
        .map(|r| match r {
            Ok(o) => Some(o),
            Err(e) => {
                first_err.get_or_insert(e);
                None
            }
        })
        .collect();
    (outs, first_err)
}

fn ensure_dir(out: Option<&Path>) -> Result<(), CliError> {
    if let Some(dir) = out {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    Ok(())
}

pub fn run_experiment(
    spec: &ExperimentSpec,
    provenance: &Provenance,
    out: Option<&Path>,
) -> Result<Report, CliError> {
    ensure_dir(out)?;
    let mut prov = provenance.clone();
    if let Some(note) = &spec.note {
        prov = prov.with_note(note.clone());
    }
    match spec.kind {
        ExperimentKind::SingleRun => {
            let output = simulate(&spec.base)?;
            let mut tally = Tally::default();
            tally.add(&output);
            let files = match out {
                Some(dir) => write_run(dir, &prov, &spec.base, &output)?,
                None => Vec::new(),
            };
            Ok(Report {
                outcome: Outcome::Single(Box::new(output)),
                tally,
                files,
            })
        }
        ExperimentKind::DtIndependence | ExperimentKind::ErrorVsH => pairwise(spec, &prov, out),
        ExperimentKind::TimeConvergence => time_convergence(spec, &prov, out),
        ExperimentKind::ApStudy => ap_study(spec, &prov, out),
        ExperimentKind::OdeCrosscheck => ode_crosscheck(spec, &prov, out),
    }
}

/// One run at `spec.dt` and one at the reference step for every `h`.
fn pairwise(
    spec: &ExperimentSpec,
    prov: &Provenance,
    out: Option<&Path>,
) -> Result<Report, CliError> {
    let relative = spec.kind == ExperimentKind::DtIndependence;
    let jobs: Vec<(f64, f64)> = spec
        .h_values
        .iter()
        .flat_map(|&h| [(h, spec.dt), (h, spec.reference_dt.at(h))])
        .collect();
    let (outs, err) = sweep(&spec.base, &jobs);
    let mut tally = Tally::default();
    let mut rows = Vec::new();
    for (pair, &h) in outs.chunks(2).zip(&spec.h_values) {
        if let [Some(a), Some(b)] = pair {
            tally.add(a);
            tally.add(b);
            let (mut ep, mut er, mut em) = differences(&a.state, &b.state);
            if relative {
                let (np, nr, nm) = norms(&b.state);
                ep /= np;
                er /= nr;
                em /= nm;
            }
            rows.push(ErrorRow {
                parameter: h,
                err_psi: ep,
                err_rho: er,
                err_mu: em,
            });
        }
    }
    let mut files = Vec::new();
    if let Some(dir) = out {
        let name = if relative {
            "dt_independence.csv"
        } else {
            "error_vs_h.csv"
        };
        let prov = if relative {
            prov.clone()
                .with_note("errors are relative: |a - b| / |b| with b the reference-step run")
        } else {
            prov.clone()
        };
        let table: Vec<Vec<f64>> = rows.iter().map(ErrorRow::as_vec).collect();
        files.push(write_table(&dir.join(name), &prov, &ERROR_COLUMNS, &table)?);
    }
    if let Some(e) = err {
        return Err(e);
    }
    let outcome = if relative {
        Outcome::DtIndependence(rows)
    } else {
        Outcome::ErrorVsH(rows)
    };
    Ok(Report {
        outcome,
        tally,
        files,
    })
}

fn time_convergence(
    spec: &ExperimentSpec,
    prov: &Provenance,
    out: Option<&Path>,
) -> Result<Report, CliError> {
    let h = spec.h_values[0];
    let mut jobs: Vec<(f64, f64)> = spec.dt_values.iter().map(|&dt| (h, dt)).collect();
    jobs.push((h, spec.reference_dt.at(h)));
    let (outs, err) = sweep(&spec.base, &jobs);
    let mut tally = Tally::default();
    let mut rows = Vec::new();
    if let Some(Some(reference)) = outs.last() {
        tally.add(reference);
        for (o, &dt) in outs.iter().zip(&spec.dt_values) {
            if let Some(o) = o {
                tally.add(o);
                let (ep, er, em) = differences(&o.state, &reference.state);
                rows.push(ErrorRow {
                    parameter: dt,
                    err_psi: ep,
                    err_rho: er,
                    err_mu: em,
                });
            }
        }
    }
    let dts: Vec<f64> = rows.iter().map(|r| r.parameter).collect();
    let slope = |f: fn(&ErrorRow) -> f64| {
        let e: Vec<f64> = rows.iter().map(f).collect();
        loglog_slope(&dts, &e)
    };
    let slopes = Slopes {
        psi: slope(|r| r.err_psi),
        rho: slope(|r| r.err_rho),
        mu: slope(|r| r.err_mu),
    };
    let mut files = Vec::new();
    if let Some(dir) = out {
        let table: Vec<Vec<f64>> = rows.iter().map(ErrorRow::as_vec).collect();
        files.push(write_table(
            &dir.join("time_convergence.csv"),
            prov,
            &ERROR_COLUMNS,
            &table,
        )?);
        files.push(write_table(
            &dir.join("time_convergence_slopes.csv"),
            prov,
            &["slope_psi", "slope_rho", "slope_mu"],
            &[vec![slopes.psi, slopes.rho, slopes.mu]],
        )?);
    }
    if let Some(e) = err {
        return Err(e);
    }
    Ok(Report {
        outcome: Outcome::TimeConvergence { rows, slopes },
        tally,
        files,
    })
}

/// Final `(ν, μ)` of the classical-limit run seeded from the wave function at `limit.nu_h`.
pub fn limit_run(
    base: &RunConfig,
    limit: &LimitConfig,
) -> Result<
    (
        sle_core::limit::NuField<f64>,
        sle_core::PhaseDensity64,
        NuProjection<f64>,
    ),
    CliError,
> {
    let xg = base.grid.xgrid(limit.nu_h)?;
    let pg = base.grid.phase_grid()?;
    let ng = Arc::new(make_nu_grid(
        &xg,
        limit.nu_x_points,
        limit.xi_min,
        limit.xi_max,
        limit.xi_points,
    )?);
    let psi = WaveInit::from(base.wave).build(xg.clone(), limit.nu_h)?;
    let (mut nu, projection) = nu_from_wave(&psi, ng.clone())?;
    let mut mu = DensityInit::from(base.density).build(pg.clone())?;
    let potential = base.potential.build(&xg, &pg)?;
    let mut solver = LimitSolver::new(pg, ng, &potential, base.solver_options().cfl);
    solver.run(&mut nu, &mut mu, limit.dt, base.t_final)?;
    Ok((nu, mu, projection))
}

fn ap_study(
    spec: &ExperimentSpec,
    prov: &Provenance,
    out: Option<&Path>,
) -> Result<Report, CliError> {
    let limit = spec
        .limit
        .as_ref()
        .ok_or_else(|| CliError::Config("experiment.limit: required for ap_study".into()))?;
    let (limit_result, (outs, err)) = rayon::join(
        || limit_run(&spec.base, limit),
        || {
            let jobs: Vec<(f64, f64)> = spec.h_values.iter().map(|&h| (h, spec.dt)).collect();
            sweep(&spec.base, &jobs)
        },
    );
    let (nu, mu_lim, projection) = limit_result?;
    let rho_nu = nu.rho();
    let mut tally = Tally::default();
    let mut rows = Vec::new();
    for (o, &h) in outs.iter().zip(&spec.h_values) {
        if let Some(o) = o {
            tally.add(o);
            let rho = coarse_average(&position_density(&o.state.psi), limit.nu_x_points)?;
            let diff: Vec<f64> = rho.iter().zip(&rho_nu).map(|(a, b)| a - b).collect();
            let dmu = o.state.mu.values() - mu_lim.values();
            rows.push(ApRow {
                h,
                dist_rho: l2_norm_real(&diff, nu.dx()),
                dist_mu: phase_l2_norm(&dmu, mu_lim.grid()),
            });
        }
    }
    let mut files = Vec::new();
    if let Some(dir) = out {
        let prov = prov
            .clone()
            .with_note(format!(
                "limit run: nu_in is the cell-averaged Wigner transform of psi_in at h = {:e}, clipped at 0 and renormalized (clipped mass {:.3e})",
                limit.nu_h, projection.clipped_mass
            ))
            .with_note("run type: sle rows compared against the limit run");
        let table: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| vec![r.h, r.dist_rho, r.dist_mu])
            .collect();
        files.push(write_table(
            &dir.join("ap_study.csv"),
            &prov,
            &["parameter", "dist_rho", "dist_mu"],
            &table,
        )?);
        let lim_prov = prov.clone().with_note("run type: limit");
        let profile: Vec<Vec<f64>> = nu
            .x()
            .iter()
            .zip(&rho_nu)
            .map(|(&x, &r)| vec![x, r])
            .collect();
        files.push(write_table(
            &dir.join("limit_profile.csv"),
            &lim_prov,
            &["x", "rho"],
            &profile,
        )?);
    }
    if let Some(e) = err {
        return Err(e);
    }
    Ok(Report {
        outcome: Outcome::Ap { rows, projection },
        tally,
        files,
    })
}

fn wrapped_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

/// Couples an SLE run whose `μ` starts as a single-cell point mass with the point-particle model.
pub fn ode_crosscheck_rows(
    base: &RunConfig,
    ode: &OdeConfig,
) -> Result<(Vec<OdeRow>, Tally), CliError> {
    let mut cfg = base.clone();
    cfg.grid = cfg.grid.with_phase_points(ode.phase_points);
    cfg.density = DensityKind::PointMass {
        y0: ode.y0,
        eta0: ode.eta0,
    };
    cfg.dt = ode.dt;
    let (mut solver, state) = build(&cfg)?;
    let pg = solver.phase_grid().clone();
    let (j0, k0) = state.mu.argmax();
    let mut ode_state = OdeState {
        psi: state.psi.clone(),
        y: pg.y()[j0],
        eta: pg.eta()[k0],
        t: 0.0,
    };
    let mut integrator = EhrenfestOde64::new(solver.xgrid().clone(), solver.potential().clone());
    let params = RunParams {
        dt: cfg.dt,
        duration: cfg.t_final,
        cadence: 1,
        profiles: ProfileMode::Never,
    };
    let mut rows = Vec::with_capacity(params.step_count() + 1);
    let row = |state: &SleState64, o: &OdeState<f64>| {
        let (j, k) = state.mu.argmax();
        let (jo, ko) = pg.nearest_cell(o.y, o.eta);
        OdeRow {
            t: state.t,
            y_ode: o.y,
            eta_ode: o.eta,
            y_peak: pg.y()[j],
            eta_peak: pg.eta()[k],
            cell_offset: wrapped_distance(j, jo, pg.j_count()).max(wrapped_distance(
                k,
                ko,
                pg.k_count(),
            )),
        }
    };
    rows.push(row(&state, &ode_state));
    let output = solver.run_with(state, &params, |s| {
        let dt = s.t - ode_state.t;
        integrator.ode_step(&mut ode_state, dt)?;
        ode_state.t = s.t;
        rows.push(row(s, &ode_state));
        Ok(())
    })?;
    let mut tally = Tally::default();
    tally.add(&output);
    Ok((rows, tally))
}

fn ode_crosscheck(
    spec: &ExperimentSpec,
    prov: &Provenance,
    out: Option<&Path>,
) -> Result<Report, CliError> {
    let ode = spec
        .ode
        .as_ref()
        .ok_or_else(|| CliError::Config("experiment.ode: required for ode_crosscheck".into()))?;
    let base = spec.base.with_h_dt(spec.h_values[0], ode.dt);
    let (rows, tally) = ode_crosscheck_rows(&base, ode)?;
    let mut files = Vec::new();
    if let Some(dir) = out {
        let table: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                vec![
                    r.t,
                    r.y_ode,
                    r.eta_ode,
                    r.y_peak,
                    r.eta_peak,
                    r.cell_offset as f64,
                ]
            })
            .collect();
        files.push(write_table(
            &dir.join("ode_crosscheck.csv"),
            prov,
            &["t", "y", "eta", "y_peak", "eta_peak", "cell_offset"],
            &table,
        )?);
    }
    Ok(Report {
        outcome: Outcome::Ode(rows),
        tally,
        files,
    })
}

/// Observables and profiles of a single run.
pub fn write_run(
    dir: &Path,
    prov: &Provenance,
    cfg: &RunConfig,
    output: &RunOutput64,
) -> Result<Vec<PathBuf>, CliError> {
    ensure_dir(Some(dir))?;
    let mut files = Vec::new();
    let mut w = CsvWriter::create(
        &dir.join("observables.csv"),
        prov,
        &["t", "mass_psi", "mass_mu", "energy_Ed", "hgrad_norm"],
    )?;
    for r in &output.records {
        w.row(&[r.t, r.mass_psi, r.mass_mu, r.energy_ed, r.hgrad_norm])?;
    }
    files.push(w.finish()?);
    let xs = cfg.grid.xgrid(cfg.h)?;
    for r in &output.records {
        if let (Some(rho), Some(j)) = (&r.rho, &r.current) {
            let kinetic = r
                .kinetic
                .clone()
                .unwrap_or_else(|| vec![f64::NAN; rho.len()]);
            let rows: Vec<Vec<f64>> = xs
                .points()
                .iter()
                .zip(rho)
                .zip(j)
                .zip(&kinetic)
                .map(|(((&x, &a), &b), &c)| vec![x, a, b, c])
                .collect();
            let name = format!("profile_t{:.6}.csv", r.t);
            files.push(write_table(
                &dir.join(name),
                prov,
                &["x", "rho", "current", "kinetic"],
                &rows,
            )?);
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [0.1, 0.05, 0.025, 0.0125];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        assert!((loglog_slope(&x, &y) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn wrapped_cell_distance() {
        assert_eq!(wrapped_distance(0, 127, 128), 1);
        assert_eq!(wrapped_distance(5, 3, 128), 2);
        assert_eq!(wrapped_distance(64, 0, 128), 64);
    }
}
