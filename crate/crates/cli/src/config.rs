//! TOML configuration: raw file schema, validation, and the resolved form
//! echoed into every output file.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sle_core::initial::{DensityInit, WaveInit};
use sle_core::liouville::{CflMode, TransportScheme};
use sle_core::solver::{ProfileMode, SolverOptions, Splitting};
use sle_core::{make_phasegrid, make_xgrid, CouplingPotential64, PhaseGrid64, XGrid64};

use crate::error::CliError;
use crate::expr::Num;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub run: RawRun,
    #[serde(default)]
    pub grid: RawGrid,
    #[serde(default)]
    pub initial: RawInitial,
    pub experiment: Option<RawExperiment>,
    pub paper_exact: Option<RawExperiment>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRun {
    pub h: Option<Num>,
    pub dt: Option<Num>,
    pub t_final: Option<Num>,
    pub splitting: Option<String>,
    pub transport: Option<String>,
    pub potential: Option<String>,
    pub cadence: Option<usize>,
    pub profiles: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub x_interval: Option<[Num; 2]>,
    pub points_per_wavelength: Option<usize>,
    pub x_points: Option<usize>,
    pub y_interval: Option<[Num; 2]>,
    pub y_points: Option<usize>,
    pub eta_interval: Option<[Num; 2]>,
    pub eta_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInitial {
    pub wave: Option<String>,
    pub density: Option<String>,
    pub y0: Option<Num>,
    pub eta0: Option<Num>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawExperiment {
    pub kind: Option<String>,
    pub h_values: Option<Vec<Num>>,
    pub dt: Option<Num>,
    pub dt_values: Option<Vec<Num>>,
    pub reference_dt: Option<Num>,
    pub note: Option<String>,
    pub limit: Option<RawLimit>,
    pub ode: Option<RawOde>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLimit {
    pub nu_x_points: Option<usize>,
    pub xi_interval: Option<[Num; 2]>,
    pub xi_points: Option<usize>,
    pub nu_h: Option<Num>,
    pub dt: Option<Num>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOde {
    pub y0: Option<Num>,
    pub eta0: Option<Num>,
    pub dt: Option<Num>,
    pub phase_points: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    QuadraticCoupling,
    Zero,
}

impl PotentialKind {
    pub fn build(&self, xg: &XGrid64, pg: &PhaseGrid64) -> Result<CouplingPotential64, CliError> {
        Ok(match self {
            PotentialKind::QuadraticCoupling => CouplingPotential64::quadratic_coupling(xg, pg)?,
            PotentialKind::Zero => CouplingPotential64::zero(xg, pg)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum XSpacing {
    /// `Δx = 2πh / n`
    PerWavelength {
        points: usize,
    },
    Points {
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub x_spacing: XSpacing,
    pub y_min: f64,
    pub y_max: f64,
    pub y_points: usize,
    pub eta_min: f64,
    pub eta_max: f64,
    pub eta_points: usize,
}

impl GridConfig {
    /// Number of x-points for a given `h`.
    pub fn x_points(&self, h: f64) -> Result<usize, CliError> {
        let m = match self.x_spacing {
            XSpacing::Points { count } => count,
            XSpacing::PerWavelength { points } => {
                let exact = (self.x_max - self.x_min) * points as f64 / (2.0 * PI * h);
                let m = exact.round();
                if (exact - m).abs() > 1e-6 * m.max(1.0) {
                    return Err(CliError::Config(format!(
                        "grid.points_per_wavelength: interval length {} is not a multiple of 2πh/{points} for h = {h}",
                        self.x_max - self.x_min
                    )));
                }
                m as usize
            }
        };
        if m == 0 || m % 2 == 1 {
            return Err(CliError::Config(format!(
                "grid: x point count must be even and positive, got {m} for h = {h}"
            )));
        }
        Ok(m)
    }

    pub fn xgrid(&self, h: f64) -> Result<Arc<XGrid64>, CliError> {
        Ok(Arc::new(make_xgrid(
            self.x_min,
            self.x_max,
            self.x_points(h)?,
        )?))
    }

    pub fn phase_grid(&self) -> Result<Arc<PhaseGrid64>, CliError> {
        Ok(Arc::new(make_phasegrid(
            self.y_min,
            self.y_max,
            self.y_points,
            self.eta_min,
            self.eta_max,
            self.eta_points,
        )?))
    }

    pub fn with_phase_points(&self, n: usize) -> Self {
        Self {
            y_points: n,
            eta_points: n,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveKind {
    WkbCosh,
    WkbSine,
}

impl From<WaveKind> for WaveInit {
    fn from(w: WaveKind) -> Self {
        match w {
            WaveKind::WkbCosh => WaveInit::WkbCosh,
            WaveKind::WkbSine => WaveInit::WkbSine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DensityKind {
    Bump,
    PointMass { y0: f64, eta0: f64 },
}

impl From<DensityKind> for DensityInit {
    fn from(d: DensityKind) -> Self {
        match d {
            DensityKind::Bump => DensityInit::Bump,
            DensityKind::PointMass { y0, eta0 } => DensityInit::PointMass { y: y0, eta: eta0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplittingKind {
    Lie,
    Strang,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    Euler,
    Heun,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfilesKind {
    Never,
    Final,
    Always,
}

/// A fully resolved single run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub h: f64,
    pub dt: f64,
    pub t_final: f64,
    pub splitting: SplittingKind,
    pub transport: TransportKind,
    pub potential: PotentialKind,
    pub cadence: usize,
    pub profiles: ProfilesKind,
    pub strict_cfl: bool,
    pub wave: WaveKind,
    pub density: DensityKind,
    pub grid: GridConfig,
}

impl RunConfig {
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            splitting: match self.splitting {
                SplittingKind::Lie => Splitting::Lie,
                SplittingKind::Strang => Splitting::Strang,
            },
            transport: match self.transport {
                TransportKind::Euler => TransportScheme::ForwardEuler,
                TransportKind::Heun => TransportScheme::Heun,
            },
            cfl: if self.strict_cfl {
                CflMode::Strict
            } else {
                CflMode::Warn
            },
        }
    }

    pub fn profile_mode(&self) -> ProfileMode {
        match self.profiles {
            ProfilesKind::Never => ProfileMode::Never,
            ProfilesKind::Final => ProfileMode::Final,
            ProfilesKind::Always => ProfileMode::Always,
        }
    }

    pub fn with_h_dt(&self, h: f64, dt: f64) -> Self {
        Self {
            h,
            dt,
            ..self.clone()
        }
    }

    /// Derived grid quantities for the resolved-config echo.
    pub fn derived(&self) -> Result<BTreeMap<&'static str, String>, CliError> {
        let g = &self.grid;
        let m = g.x_points(self.h)?;
        let dx = (g.x_max - g.x_min) / m as f64;
        let mut d = BTreeMap::new();
        d.insert("x_points", m.to_string());
        d.insert("dx", format!("{dx:.15e}"));
        if let XSpacing::PerWavelength { points } = g.x_spacing {
            d.insert("dx_rule", format!("2*pi*h/{points}"));
        }
        d.insert(
            "dy",
            format!("{:.15e}", (g.y_max - g.y_min) / g.y_points as f64),
        );
        d.insert(
            "deta",
            format!("{:.15e}", (g.eta_max - g.eta_min) / g.eta_points as f64),
        );
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SingleRun,
    DtIndependence,
    ErrorVsH,
    TimeConvergence,
    ApStudy,
    OdeCrosscheck,
}

/// Reference time step: a fixed value or a multiple of `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RefDt {
    Fixed { dt: f64 },
    PerH { factor: f64 },
}

impl RefDt {
    pub fn at(&self, h: f64) -> f64 {
        match *self {
            RefDt::Fixed { dt } => dt,
            RefDt::PerH { factor } => factor * h,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitConfig {
    pub nu_x_points: usize,
    pub xi_min: f64,
    pub xi_max: f64,
    pub xi_points: usize,
    /// `h` of the wave function whose Wigner transform seeds `ν`.
    pub nu_h: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeConfig {
    pub y0: f64,
    pub eta0: f64,
    pub dt: f64,
    pub phase_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub h_values: Vec<f64>,
    pub dt: f64,
    pub dt_values: Vec<f64>,
    pub reference_dt: RefDt,
    pub paper_exact: bool,
    pub note: Option<String>,
    pub limit: Option<LimitConfig>,
    pub ode: Option<OdeConfig>,
    pub base: RunConfig,
}

/// Everything a config file resolves to.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub run: RunConfig,
    pub experiment: Option<ExperimentSpec>,
}

impl Resolved {
    /// Resolved configuration rendered as TOML.
    pub fn to_toml(&self) -> Result<String, CliError> {
        #[derive(Serialize)]
        struct Echo<'a> {
            run: &'a RunConfig,
            derived: BTreeMap<&'static str, String>,
            #[serde(skip_serializing_if = "Option::is_none")]
            experiment: Option<ExperimentEcho<'a>>,
        }
        #[derive(Serialize)]
        struct ExperimentEcho<'a> {
            kind: ExperimentKind,
            h_values: &'a [f64],
            dt: f64,
            dt_values: &'a [f64],
            reference_dt: RefDt,
            paper_exact: bool,
            #[serde(skip_serializing_if = "Option::is_none")]
            note: &'a Option<String>,
            #[serde(skip_serializing_if = "Option::is_none")]
            limit: &'a Option<LimitConfig>,
            #[serde(skip_serializing_if = "Option::is_none")]
            ode: &'a Option<OdeConfig>,
        }
        let echo = Echo {
            run: &self.run,
            derived: self.run.derived()?,
            experiment: self.experiment.as_ref().map(|e| ExperimentEcho {
                kind: e.kind,
                h_values: &e.h_values,
                dt: e.dt,
                dt_values: &e.dt_values,
                reference_dt: e.reference_dt,
                paper_exact: e.paper_exact,
                note: &e.note,
                limit: &e.limit,
                ode: &e.ode,
            }),
        };
        toml::to_string(&echo).map_err(|e| CliError::Config(format!("cannot render config: {e}")))
    }
}

/// Command-line switches that modify the file's settings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides {
    pub strict_cfl: bool,
    pub paper_exact: bool,
}

pub fn load_config(path: &Path, overrides: Overrides) -> Result<Resolved, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, overrides).map_err(|e| e.in_file(path))
}

pub fn parse_config(text: &str, overrides: Overrides) -> Result<Resolved, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    resolve(raw, overrides)
}

fn field(name: &str, n: &Num, h: Option<f64>) -> Result<f64, CliError> {
    let v = n
        .eval(h)
        .map_err(|e| CliError::Config(format!("{name}: {e}")))?;
    if !v.is_finite() {
        return Err(CliError::Config(format!("{name}: value must be finite")));
    }
    Ok(v)
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Config(format!(
            "{name}: must be positive, got {v}"
        )))
    }
}

fn interval(
    name: &str,
    raw: &Option<[Num; 2]>,
    default: (f64, f64),
) -> Result<(f64, f64), CliError> {
    let (lo, hi) = match raw {
        Some([a, b]) => (field(name, a, None)?, field(name, b, None)?),
        None => default,
    };
    if !(hi > lo) {
        return Err(CliError::Config(format!(
            "{name}: interval must satisfy min < max, got [{lo}, {hi}]"
        )));
    }
    Ok((lo, hi))
}

fn semiclassical(name: &str, h: f64) -> Result<f64, CliError> {
    if h > 0.0 && h <= 1.0 {
        Ok(h)
    } else {
        Err(CliError::Config(format!(
            "{name}: must satisfy 0 < h ≤ 1, got {h}"
        )))
    }
}

fn choice<T: Copy>(
    name: &str,
    value: &Option<String>,
    default: T,
    options: &[(&str, T)],
) -> Result<T, CliError> {
    match value {
        None => Ok(default),
        Some(s) => options
            .iter()
            .find(|(k, _)| k == s)
            .map(|(_, v)| *v)
            .ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(k, _)| *k).collect();
                CliError::Config(format!(
                    "{name}: unknown value '{s}' (expected one of {})",
                    names.join(", ")
                ))
            }),
    }
}

fn resolve_grid(g: &RawGrid) -> Result<GridConfig, CliError> {
    let (x_min, x_max) = interval("grid.x_interval", &g.x_interval, (-PI, PI))?;
    let (y_min, y_max) = interval("grid.y_interval", &g.y_interval, (-2.0 * PI, 2.0 * PI))?;
    let (eta_min, eta_max) = interval("grid.eta_interval", &g.eta_interval, (-2.0 * PI, 2.0 * PI))?;
    let x_spacing = match (g.points_per_wavelength, g.x_points) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "grid: give either points_per_wavelength or x_points, not both".into(),
            ))
        }
        (Some(0), None) => {
            return Err(CliError::Config(
                "grid.points_per_wavelength: must be positive".into(),
            ))
        }
        (Some(points), None) => XSpacing::PerWavelength { points },
        (None, Some(count)) => XSpacing::Points { count },
        (None, None) => XSpacing::PerWavelength { points: 16 },
    };
    let y_points = g.y_points.unwrap_or(128);
    let eta_points = g.eta_points.unwrap_or(128);
    if y_points == 0 || eta_points == 0 {
        return Err(CliError::Config(
            "grid: y_points and eta_points must be positive".into(),
        ));
    }
    Ok(GridConfig {
        x_min,
        x_max,
        x_spacing,
        y_min,
        y_max,
        y_points,
        eta_min,
        eta_max,
        eta_points,
    })
}

fn resolve(raw: RawConfig, overrides: Overrides) -> Result<Resolved, CliError> {
    let grid = resolve_grid(&raw.grid)?;
    let r = &raw.run;
    let has_experiment = raw.experiment.is_some();
    // experiments supply their own h sweep; a base h is then optional
    let h = match (&r.h, has_experiment) {
        (Some(n), _) => semiclassical("run.h", field("run.h", n, None)?)?,
        (None, true) => 1.0 / 256.0,
        (None, false) => return Err(CliError::Config("run.h: missing required field".into())),
    };
    let dt = match &r.dt {
        Some(n) => positive("run.dt", field("run.dt", n, Some(h))?)?,
        None if has_experiment => 0.01,
        None => return Err(CliError::Config("run.dt: missing required field".into())),
    };
    let t_final = match &r.t_final {
        Some(n) => field("run.t_final", n, Some(h))?,
        None => 0.5,
    };
    if t_final < 0.0 {
        return Err(CliError::Config(format!(
            "run.t_final: must be non-negative, got {t_final}"
        )));
    }
    if t_final > 0.0 && t_final < dt {
        return Err(CliError::Config(format!(
            "run.t_final: must be at least run.dt ({dt}), got {t_final}"
        )));
    }
    let cadence = r.cadence.unwrap_or(10);
    if cadence == 0 {
        return Err(CliError::Config("run.cadence: must be at least 1".into()));
    }
    let splitting = choice(
        "run.splitting",
        &r.splitting,
        SplittingKind::Lie,
        &[
            ("lie", SplittingKind::Lie),
            ("strang", SplittingKind::Strang),
        ],
    )?;
    let transport = choice(
        "run.transport",
        &r.transport,
        TransportKind::Euler,
        &[
            ("euler", TransportKind::Euler),
            ("heun", TransportKind::Heun),
        ],
    )?;
    let potential = choice(
        "run.potential",
        &r.potential,
        PotentialKind::QuadraticCoupling,
        &[
            ("quadratic_coupling", PotentialKind::QuadraticCoupling),
            ("zero", PotentialKind::Zero),
        ],
    )?;
    let profiles = choice(
        "run.profiles",
        &r.profiles,
        ProfilesKind::Final,
        &[
            ("never", ProfilesKind::Never),
            ("final", ProfilesKind::Final),
            ("always", ProfilesKind::Always),
        ],
    )?;
    let i = &raw.initial;
    let wave = choice(
        "initial.wave",
        &i.wave,
        WaveKind::WkbCosh,
        &[
            ("wkb_cosh", WaveKind::WkbCosh),
            ("wkb_sine", WaveKind::WkbSine),
        ],
    )?;
    let density = match i.density.as_deref() {
        None | Some("bump") => DensityKind::Bump,
        Some("point_mass") => DensityKind::PointMass {
            y0: i
                .y0
                .as_ref()
                .map_or(Ok(0.0), |n| field("initial.y0", n, None))?,
            eta0: i
                .eta0
                .as_ref()
                .map_or(Ok(0.0), |n| field("initial.eta0", n, None))?,
        },
        Some(other) => {
            return Err(CliError::Config(format!(
                "initial.density: unknown value '{other}' (expected one of bump, point_mass)"
            )))
        }
    };
    let run = RunConfig {
        h,
        dt,
        t_final,
        splitting,
        transport,
        potential,
        cadence,
        profiles,
        strict_cfl: overrides.strict_cfl,
        wave,
        density,
        grid,
    };
    run.grid.x_points(h)?;

    let experiment = match raw.experiment {
        None => None,
        Some(mut e) => {
            if overrides.paper_exact {
                if let Some(p) = raw.paper_exact {
                    merge(&mut e, p);
                }
            }
            Some(resolve_experiment(e, &run, overrides.paper_exact)?)
        }
    };
    Ok(Resolved { run, experiment })
}

fn merge(base: &mut RawExperiment, over: RawExperiment) {
    macro_rules! take {
        ($($f:ident),*) => { $( if over.$f.is_some() { base.$f = over.$f; } )* };
    }
    take!(
        kind,
        h_values,
        dt,
        dt_values,
        reference_dt,
        note,
        limit,
        ode
    );
}

fn resolve_experiment(
    e: RawExperiment,
    run: &RunConfig,
    paper_exact: bool,
) -> Result<ExperimentSpec, CliError> {
    let kind = choice(
        "experiment.kind",
        &e.kind,
        ExperimentKind::SingleRun,
        &[
            ("single_run", ExperimentKind::SingleRun),
            ("dt_independence", ExperimentKind::DtIndependence),
            ("error_vs_h", ExperimentKind::ErrorVsH),
            ("time_convergence", ExperimentKind::TimeConvergence),
            ("ap_study", ExperimentKind::ApStudy),
            ("ode_crosscheck", ExperimentKind::OdeCrosscheck),
        ],
    )?;
    if e.kind.is_none() {
        return Err(CliError::Config(
            "experiment.kind: missing required field".into(),
        ));
    }
    let h_values = match &e.h_values {
        Some(list) => list
            .iter()
            .map(|n| {
                semiclassical(
                    "experiment.h_values",
                    field("experiment.h_values", n, None)?,
                )
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![run.h],
    };
    if h_values.is_empty() {
        return Err(CliError::Config(
            "experiment.h_values: must not be empty".into(),
        ));
    }
    for &h in &h_values {
        run.grid.x_points(h)?;
    }
    let dt = match &e.dt {
        Some(n) => positive("experiment.dt", field("experiment.dt", n, None)?)?,
        None => run.dt,
    };
    let dt_values = match &e.dt_values {
        Some(list) => list
            .iter()
            .map(|n| {
                positive(
                    "experiment.dt_values",
                    field("experiment.dt_values", n, None)?,
                )
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![dt],
    };
    if dt_values.is_empty() {
        return Err(CliError::Config(
            "experiment.dt_values: must not be empty".into(),
        ));
    }
    let reference_dt = match &e.reference_dt {
        None => RefDt::PerH { factor: 0.1 },
        Some(n) if n.mentions_h() => {
            let factor = field("experiment.reference_dt", n, Some(1.0))?;
            RefDt::PerH {
                factor: positive("experiment.reference_dt", factor)?,
            }
        }
        Some(n) => RefDt::Fixed {
            dt: positive(
                "experiment.reference_dt",
                field("experiment.reference_dt", n, None)?,
            )?,
        },
    };
    let needs_reference = matches!(
        kind,
        ExperimentKind::DtIndependence | ExperimentKind::ErrorVsH | ExperimentKind::TimeConvergence
    );
    if needs_reference {
        let tested: &[f64] = if kind == ExperimentKind::TimeConvergence {
            &dt_values
        } else {
            std::slice::from_ref(&dt)
        };
        for &h in &h_values {
            let r = reference_dt.at(h);
            if let Some(bad) = tested.iter().find(|&&d| d <= r) {
                return Err(CliError::Config(format!(
                    "experiment.reference_dt: reference step {r} must be smaller than every tested step (found {bad}) at h = {h}"
                )));
            }
        }
    }
    if kind == ExperimentKind::TimeConvergence && dt_values.len() < 2 {
        return Err(CliError::Config(
            "experiment.dt_values: need at least two steps to fit a convergence slope".into(),
        ));
    }
    let limit = if kind == ExperimentKind::ApStudy {
        let l = e.limit.clone().unwrap_or_default();
        let (xi_min, xi_max) =
            interval("experiment.limit.xi_interval", &l.xi_interval, (-4.0, 4.0))?;
        let finest = h_values.iter().copied().fold(f64::INFINITY, f64::min);
        let nu_h = match &l.nu_h {
            Some(n) => semiclassical(
                "experiment.limit.nu_h",
                field("experiment.limit.nu_h", n, None)?,
            )?,
            None => finest,
        };
        let nu_x_points = l.nu_x_points.unwrap_or(512);
        for &h in h_values.iter().chain(std::iter::once(&nu_h)) {
            let m = run.grid.x_points(h)?;
            if nu_x_points == 0 || m % nu_x_points != 0 {
                return Err(CliError::Config(format!(
                    "experiment.limit.nu_x_points: {nu_x_points} must divide the x point count {m} at h = {h}"
                )));
            }
        }
        let xi_points = l.xi_points.unwrap_or(256);
        if xi_points == 0 {
            return Err(CliError::Config(
                "experiment.limit.xi_points: must be positive".into(),
            ));
        }
        let dt = match &l.dt {
            Some(n) => positive(
                "experiment.limit.dt",
                field("experiment.limit.dt", n, None)?,
            )?,
            None => dt,
        };
        Some(LimitConfig {
            nu_x_points,
            xi_min,
            xi_max,
            xi_points,
            nu_h,
            dt,
        })
    } else {
        None
    };
    let ode = if kind == ExperimentKind::OdeCrosscheck {
        let o = e.ode.clone().unwrap_or_default();
        let get = |name: &str, n: &Option<Num>, d: f64| {
            n.as_ref().map_or(Ok(d), |n| field(name, n, None))
        };
        let phase_points = o.phase_points.unwrap_or(256);
        if phase_points == 0 {
            return Err(CliError::Config(
                "experiment.ode.phase_points: must be positive".into(),
            ));
        }
        Some(OdeConfig {
            y0: get("experiment.ode.y0", &o.y0, 0.5)?,
            eta0: get("experiment.ode.eta0", &o.eta0, 1.0)?,
            dt: positive("experiment.ode.dt", get("experiment.ode.dt", &o.dt, 1e-3)?)?,
            phase_points,
        })
    } else {
        None
    };
    Ok(ExperimentSpec {
        kind,
        h_values,
        dt,
        dt_values,
        reference_dt,
        paper_exact,
        note: e.note,
        limit,
        ode,
        base: run.clone(),
    })
}
