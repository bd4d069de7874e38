//! Configuration-driven experiment runs with JSON manifests and CSV tables.
//!
//! Each acceptance criterion is owned by exactly one experiment:
//!
//! | experiment               | criteria |
//! |--------------------------|----------|
//! | `cellular-singularity`   | 1, 2     |
//! | `eulerian-decay`         | 3, 4     |
//! | `phi-construction`       | 5        |
//! | `majorant-table`         | 6        |
//! | `lagrangian-persistence` | 7, 8     |
//! | `strip-rotation`         | 9        |

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::{
    cellular_cos_x1, cellular_pole_newton, cellular_singularity_radius, cellular_y22, cellular_y22_field,
    g_coefficients_field, g_derivative, shear_radius_prediction, shear_u3_field, shear_uniform_radius, ShearFlow,
};
use crate::counterexample::{
    arctanh_asymptote, g11_partial_sums, hat_big_h, hat_h, phi_triple_prime_imag_axis, tail_constants,
    PeriodicCounterexample,
};
use crate::euler2d::{EulerState2D, SolverConfig};
use crate::gevrey::{build_ladder, estimate_radius, gevrey_norm, LadderMode};
use crate::lagrangian::{
    advect, advect_with_solver, cauchy_invariant_residual_3d, curl_div_residual, lagrangian_vorticity_residual_2d,
    vorticity_transport_residual_3d, volume_defect, CellularSource, FlowMapState, Mat, SpectralHistory,
    SpectralVelocity2D, VelocitySource,
};
use crate::majorant::{
    comb_inequality_check, geometric_datum, persistence_time, recursion_consistency_check, solve_recursion,
    stirling_check, truncation_stability_check, MajorantConfig, MajorantState,
};
use crate::spectral::{write_snapshot, Grid, SpectralField};
use crate::strip::{run_strip, StripConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    LagrangianPersistence,
    EulerianDecay,
    CellularSingularity,
    StripRotation,
    PhiConstruction,
    MajorantTable,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::CellularSingularity,
        Experiment::EulerianDecay,
        Experiment::PhiConstruction,
        Experiment::MajorantTable,
        Experiment::LagrangianPersistence,
        Experiment::StripRotation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::LagrangianPersistence => "lagrangian-persistence",
            Experiment::EulerianDecay => "eulerian-decay",
            Experiment::CellularSingularity => "cellular-singularity",
            Experiment::StripRotation => "strip-rotation",
            Experiment::PhiConstruction => "phi-construction",
            Experiment::MajorantTable => "majorant-table",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "unknown experiment '{name}' (expected one of: {})",
                    Self::ALL.map(|e| e.name()).join(", ")
                ))
            })
    }

    /// Criteria owned by this experiment.
    pub fn criteria(self) -> &'static [&'static str] {
        match self {
            Experiment::CellularSingularity => &["1", "2"],
            Experiment::EulerianDecay => &["3", "4"],
            Experiment::PhiConstruction => &["5"],
            Experiment::MajorantTable => &["6"],
            Experiment::LagrangianPersistence => &["7", "8"],
            Experiment::StripRotation => &["9"],
        }
    }
}

/// Flat JSON run configuration. Numeric fields left out take the
/// experiment's defaults; fields an experiment does not use are ignored.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub serial: bool,
    /// Grid size (per axis).
    pub n: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    /// Sample times for tabulated experiments.
    pub times: Option<Vec<f64>>,
    /// Label count: points on the cellular axis, or label grid size per axis.
    pub labels: Option<usize>,
    /// Solver steps per particle step.
    pub particle_multiple: Option<usize>,
    /// Mode truncation for point evaluation of solver fields.
    pub rel_tol: Option<f64>,
    /// Label grid size per axis for the 3D shear identities.
    pub shear_labels: Option<usize>,
    /// Highest derivative order in ladders and partial sums.
    pub n_max: Option<usize>,
    /// Fourier truncation of the periodized profile.
    pub k_max: Option<usize>,
    pub m_values: Option<Vec<f64>>,
    pub s: Option<f64>,
    pub delta: Option<f64>,
    pub c0: Option<f64>,
    pub c1: Option<f64>,
    pub m_max: Option<usize>,
    pub trials: Option<usize>,
    pub comb_m_max: Option<usize>,
    pub stirling_n_max: Option<usize>,
    /// Strip datum sharpness `k`.
    pub strip_k: Option<u32>,
    pub probe_radius: Option<f64>,
    pub y_values: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment: experiment.name().to_string(),
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("bad config: {e}")))
    }

    pub fn kind(&self) -> Result<Experiment> {
        Experiment::parse(&self.experiment)
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Validation(format!("{name} must be positive and finite, got {v}")))
    }
}

fn at_least(name: &str, v: usize, min: usize) -> Result<usize> {
    if v >= min {
        Ok(v)
    } else {
        Err(Error::Validation(format!("{name} must be at least {min}, got {v}")))
    }
}

fn power_of_two(name: &str, v: usize) -> Result<usize> {
    if v >= 4 && v.is_power_of_two() {
        Ok(v)
    } else {
        Err(Error::Validation(format!("{name} must be a power of two >= 4, got {v}")))
    }
}

fn sorted_times(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() || v.iter().any(|t| !(*t > 0.0 && t.is_finite())) || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation(format!("times must be positive and increasing, got {v:?}")));
    }
    Ok(v.to_vec())
}

fn step_count(name: &str, t: f64, dt: f64) -> Result<usize> {
    let s = t / dt;
    let r = s.round();
    if (s - r).abs() > 1e-9 * s.max(1.0) || r < 1.0 {
        return Err(Error::Validation(format!("{name} = {t} is not a whole number of steps of {dt}")));
    }
    Ok(r as usize)
}

// ------------------------------------------------------------ manifests

/// One measured quantity against its tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub criterion: String,
    pub name: String,
    pub measured: f64,
    /// `"<"`, `"<="`, `">"` or `">="`: the relation `measured ~ tolerance` required to pass.
    pub relation: String,
    pub tolerance: f64,
    pub passed: bool,
    /// Set when the check is known not to be attainable as stated; the
    /// string explains why. Such a failure is reported, not hidden.
    pub known_unattainable: Option<String>,
}

impl Check {
    pub fn new(criterion: &str, name: impl Into<String>, measured: f64, relation: &str, tolerance: f64) -> Self {
        let passed = match relation {
            "<" => measured < tolerance,
            "<=" => measured <= tolerance,
            ">" => measured > tolerance,
            ">=" => measured >= tolerance,
            _ => false,
        };
        Self {
            criterion: criterion.to_string(),
            name: name.into(),
            measured,
            relation: relation.to_string(),
            tolerance,
            passed,
            known_unattainable: None,
        }
    }

    /// A boolean property, measured as 1 (true) or 0 (false).
    pub fn flag(criterion: &str, name: impl Into<String>, ok: bool) -> Self {
        Self::new(criterion, name, if ok { 1.0 } else { 0.0 }, ">=", 1.0)
    }

    pub fn unattainable(mut self, why: impl Into<String>) -> Self {
        self.known_unattainable = Some(why.into());
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionVerdict {
    pub criterion: String,
    pub passed: bool,
    pub checks: usize,
    pub failed: Vec<String>,
    /// Failed checks that are documented as unattainable.
    pub known_unattainable: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub experiment: String,
    pub code_version: String,
    pub wall_time_s: f64,
    pub complete: bool,
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub criteria: Vec<CriterionVerdict>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    /// All criteria passed (a criterion with a failing check fails, even if
    /// the failure is documented as unattainable).
    pub fn passed(&self) -> bool {
        self.complete && self.criteria.iter().all(|c| c.passed)
    }

    /// Every failing check is documented as unattainable.
    pub fn passed_except_unattainable(&self) -> bool {
        self.complete
            && self
                .checks
                .iter()
                .all(|c| c.passed || c.known_unattainable.is_some())
    }
}

fn verdicts(kind: Experiment, checks: &[Check]) -> Vec<CriterionVerdict> {
    kind.criteria()
        .iter()
        .map(|id| {
            let mine: Vec<&Check> = checks
                .iter()
                .filter(|c| c.criterion == *id || c.criterion.starts_with(&format!("{id}.")))
                .collect();
            let failed: Vec<String> = mine.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
            let known: Vec<String> = mine
                .iter()
                .filter(|c| !c.passed && c.known_unattainable.is_some())
                .map(|c| c.name.clone())
                .collect();
            CriterionVerdict {
                criterion: id.to_string(),
                passed: !mine.is_empty() && failed.is_empty(),
                checks: mine.len(),
                failed,
                known_unattainable: known,
            }
        })
        .collect()
}

// ------------------------------------------------------------ outputs

struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

impl Outputs {
    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn snapshot(&mut self, name: &str, field: &SpectralField, label: &str, time: f64) -> Result<()> {
        write_snapshot(&self.dir.join(name), field, label, time, 0.0)?;
        self.written.push(name.to_string());
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Default output directory for a config without `out`.
pub fn default_out_dir(kind: Experiment) -> PathBuf {
    PathBuf::from("results").join(kind.name())
}

/// Validate, run, and write the manifest (also on failure, flagged
/// incomplete). With `serial` set all work runs on one thread.
pub fn run(config: &ExperimentConfig) -> Result<RunManifest> {
    let kind = config.kind()?;
    validate(kind, config)?;
    let dir = config.out.clone().unwrap_or_else(|| default_out_dir(kind));
    std::fs::create_dir_all(&dir)?;
    let mut out = Outputs {
        dir: dir.clone(),
        written: Vec::new(),
    };
    let start = Instant::now();
    let body = |out: &mut Outputs| dispatch(kind, config, out);
    let result = if config.serial {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .map_err(|e| Error::Internal(e.to_string()))?;
        pool.install(|| body(&mut out))
    } else {
        body(&mut out)
    };
    let (checks, error) = match result {
        Ok(c) => (c, None),
        Err(e) => (Vec::new(), Some(format!("{}: {e}", kind.name()))),
    };
    let manifest = RunManifest {
        config: config.clone(),
        experiment: kind.name().to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        complete: error.is_none(),
        error: error.clone(),
        criteria: verdicts(kind, &checks),
        checks,
        outputs: out.written.clone(),
    };
    write_manifest(&dir.join("manifest.json"), &manifest)?;
    match error {
        Some(e) => Err(Error::Internal(e)),
        None => Ok(manifest),
    }
}

fn write_manifest(path: &Path, m: &RunManifest) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(m)?)?;
    Ok(())
}

fn dispatch(kind: Experiment, cfg: &ExperimentConfig, out: &mut Outputs) -> Result<Vec<Check>> {
    match kind {
        Experiment::CellularSingularity => cellular_singularity(&CellularParams::from_config(cfg)?, out),
        Experiment::EulerianDecay => eulerian_decay(&DecayParams::from_config(cfg)?, out),
        Experiment::PhiConstruction => phi_construction(&PhiParams::from_config(cfg)?, out),
        Experiment::MajorantTable => majorant_table(&MajorantParams::from_config(cfg)?, out),
        Experiment::LagrangianPersistence => lagrangian_persistence(&PersistenceParams::from_config(cfg)?, out),
        Experiment::StripRotation => strip_rotation(&strip_params(cfg)?, out),
    }
}

/// Resolve and check every parameter of the named experiment.
pub fn validate(kind: Experiment, cfg: &ExperimentConfig) -> Result<()> {
    match kind {
        Experiment::CellularSingularity => CellularParams::from_config(cfg).map(|_| ()),
        Experiment::EulerianDecay => DecayParams::from_config(cfg).map(|_| ()),
        Experiment::PhiConstruction => PhiParams::from_config(cfg).map(|_| ()),
        Experiment::MajorantTable => MajorantParams::from_config(cfg).map(|_| ()),
        Experiment::LagrangianPersistence => PersistenceParams::from_config(cfg).map(|_| ()),
        Experiment::StripRotation => strip_params(cfg).map(|_| ()),
    }
}

// ------------------------------------------------------------ criteria 1, 2

#[derive(Debug, Clone)]
pub struct CellularParams {
    pub times: Vec<f64>,
    pub dt: f64,
    pub labels: usize,
    pub n: usize,
}

impl CellularParams {
    pub fn from_config(c: &ExperimentConfig) -> Result<Self> {
        let p = Self {
            times: sorted_times(c.times.as_deref().unwrap_or(&[0.5, 1.0, 2.0]))?,
            dt: positive("dt", c.dt.unwrap_or(1e-4))?,
            labels: at_least("labels", c.labels.unwrap_or(32), 1)?,
            n: power_of_two("n", c.n.unwrap_or(512))?,
        };
        for t in &p.times {
            step_count("time", *t, p.dt)?;
        }
        Ok(p)
    }
}

/// Axis labels `a1 = -pi + 2 pi i / labels`, `a2 = 0`.
fn axis_labels(count: usize) -> Vec<[f64; 2]> {
    (0..count)
        .map(|i| [-std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / count as f64, 0.0])
        .collect()
}

fn cellular_singularity(p: &CellularParams, out: &mut Outputs) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let pts = axis_labels(p.labels);
    let mut flow = FlowMapState::from_points(pts.clone())?;
    let mut rows = Vec::new();
    let mut done = 0usize;
    for &t in &p.times {
        let target = step_count("time", t, p.dt)?;
        for _ in done..target {
            advect(&mut flow, &CellularSource, p.dt)?;
        }
        done = target;
        let mut err_cos = 0.0f64;
        let mut err_y = 0.0f64;
        for (i, a) in pts.iter().enumerate() {
            err_cos = err_cos.max((flow.positions()[i][0].cos() - cellular_cos_x1(a[0], t)).abs());
            err_y = err_y.max((flow.inverse_jacobians()[i][1][1] - cellular_y22(a[0], t)).abs());
        }
        checks.push(Check::new("1", format!("max |cos X1 - closed form| at t={t}"), err_cos, "<", 1e-8));
        checks.push(Check::new("1", format!("max |Y22 - closed form| at t={t}"), err_y, "<", 1e-8));
        rows.push(vec![fmt(t), fmt(err_cos), fmt(err_y)]);
    }
    out.csv("cellular_closed_forms.csv", &["t", "max_err_cos_x1", "max_err_y22"], &rows)?;

    let fits: Vec<Result<Vec<String>>> = p
        .times
        .par_iter()
        .map(|&t| {
            let f = cellular_y22_field(t, p.n)?;
            let r = estimate_radius(&f, None)?;
            let exact = cellular_singularity_radius(t)?;
            let pole = cellular_pole_newton(t, Complex64::new(0.1, 1.2 * exact))?;
            Ok(vec![
                fmt(t),
                fmt(r.delta_hat),
                fmt(exact),
                fmt(pole.im),
                fmt(r.delta_hat / exact - 1.0),
                r.reliable.to_string(),
            ])
        })
        .collect();
    let mut rows = Vec::new();
    for (row, &t) in fits.into_iter().zip(&p.times) {
        let row = row?;
        let rel: f64 = row[4].parse().unwrap_or(f64::INFINITY);
        checks.push(Check::new("2", format!("|radius fit / exact - 1| at t={t}"), rel.abs(), "<", 0.02));
        checks.push(Check::flag("2", format!("radius fit reliable at t={t}"), row[5] == "true"));
        rows.push(row);
    }
    out.csv(
        "cellular_radius.csv",
        &["t", "fitted_radius", "exact_radius", "newton_pole_im", "rel_err", "reliable"],
        &rows,
    )?;
    let t_snap = p.times[p.times.len() / 2];
    out.snapshot("y22.snap", &cellular_y22_field(t_snap, p.n)?, "Y22", t_snap)?;
    Ok(checks)
}

// ------------------------------------------------------------ criteria 3, 4

#[derive(Debug, Clone)]
pub struct DecayParams {
    pub times: Vec<f64>,
    pub n: usize,
    pub n_max: usize,
}

impl DecayParams {
    pub fn from_config(c: &ExperimentConfig) -> Result<Self> {
        Ok(Self {
            times: sorted_times(c.times.as_deref().unwrap_or(&[0.5, 1.0, 2.0]))?,
            n: power_of_two("n", c.n.unwrap_or(512))?,
            n_max: at_least("n_max", c.n_max.unwrap_or(60), 8)?,
        })
    }
}

fn eulerian_decay(p: &DecayParams, out: &mut Outputs) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let flow = ShearFlow::default();
    let fits: Vec<Result<(f64, bool)>> = p
        .times
        .par_iter()
        .map(|&t| {
            let r = estimate_radius(&shear_u3_field(&flow, t, p.n)?, None)?;
            Ok((r.delta_hat, r.reliable))
        })
        .collect();
    let mut rows = Vec::new();
    for (fit, &t) in fits.into_iter().zip(&p.times) {
        let (delta_hat, reliable) = fit?;
        let pred = shear_radius_prediction(t);
        let rel = delta_hat / pred - 1.0;
        checks.push(Check::new("3", format!("|radius fit (t+1) - 1| at t={t}"), rel.abs(), "<", 0.05));
        checks.push(Check::flag("3", format!("radius fit reliable at t={t}"), reliable));
        rows.push(vec![fmt(t), fmt(delta_hat), fmt(pred), fmt(shear_uniform_radius(t)?), fmt(rel)]);
    }
    out.csv(
        "eulerian_decay.csv",
        &["t", "fitted_radius", "one_over_t_plus_1", "polystrip_radius", "rel_err"],
        &rows,
    )?;
    let t_last = *p.times.last().expect("nonempty");
    out.snapshot("u3.snap", &shear_u3_field(&flow, t_last, p.n)?, "u3", t_last)?;

    // g(y) = 1 / (sinh^2 1 + sin^2 y): coefficients decay exactly like e^{-|k|}
    let n_g = (4 * (p.n_max + 8)).next_power_of_two().max(256);
    let ladder = build_ladder(&g_coefficients_field(n_g)?, LadderMode::Axis(0), 2.0, p.n_max)?;
    let at1 = gevrey_norm(&ladder, 1.0, 1.0)?;
    let at08 = gevrey_norm(&ladder, 1.0, 0.8)?;
    checks.push(Check::flag("4", "G_{1,1} verdict for g is divergent at delta=1", at1.verdict.is_divergent()));
    checks.push(Check::flag("4", "G_{1,1} verdict for g is convergent at delta=0.8", at08.verdict.is_convergent()));
    let rows: Vec<Vec<String>> = (0..=p.n_max)
        .map(|m| vec![m.to_string(), fmt(at1.log_terms[m]), fmt(at08.log_terms[m])])
        .collect();
    out.csv("g_gevrey_terms.csv", &["order", "log_term_delta_1", "log_term_delta_0.8"], &rows)?;

    let mut rows = Vec::new();
    let mut fact = 1.0;
    let mut worst = f64::INFINITY;
    for n in 1..=8usize {
        fact *= ((2 * n - 1) * (2 * n)) as f64;
        let d = g_derivative(0.0, 2 * n);
        let signed = if n % 2 == 0 { d } else { -d };
        let ratio = signed / (fact / 4.0);
        worst = worst.min(ratio);
        rows.push(vec![n.to_string(), fmt(signed), fmt(fact / 4.0), fmt(ratio)]);
    }
    checks.push(Check::new("4", "min_n<=8 (-1)^n g^(2n)(0) / ((2n)!/4)", worst, ">=", 1.0));
    out.csv("g_derivative_bound.csv", &["n", "signed_derivative", "bound", "ratio"], &rows)?;
    Ok(checks)
}

// ------------------------------------------------------------ criterion 5

#[derive(Debug, Clone)]
pub struct PhiParams {
    pub k_max: usize,
    pub n_max: usize,
    pub y_values: Vec<f64>,
}

impl PhiParams {
    pub fn from_config(c: &ExperimentConfig) -> Result<Self> {
        let p = Self {
            k_max: at_least("k_max", c.k_max.unwrap_or(128), 8)?,
            n_max: at_least("n_max", c.n_max.unwrap_or(60), 12)?,
            y_values: c.y_values.clone().unwrap_or_else(|| vec![-0.9, -0.99, -0.999, -0.9999]),
        };
        if 2 * (p.n_max + 2) > p.k_max {
            return Err(Error::Validation(format!(
                "k_max = {} too small for n_max = {} (need k_max >= 2 (n_max + 2))",
                p.k_max, p.n_max
            )));
        }
        if p.y_values.len() < 2 || p.y_values.iter().any(|y| !(y.abs() < 1.0)) {
            return Err(Error::Validation("y_values needs at least two points in (-1, 1)".into()));
        }
        Ok(p)
    }
}

/// Least-squares slope of `log T_n` against `log n` over `orders`.
fn log_log_slope(log_terms: &[f64], orders: std::ops::RangeInclusive<usize>) -> f64 {
    let pts: Vec<(f64, f64)> = orders.map(|n| ((n as f64).ln(), log_terms[n])).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn phi_construction(p: &PhiParams, out: &mut Outputs) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    let grid: Vec<f64> = (0..=2000).map(|i| -10.0 + 0.01 * i as f64).collect();
    let identity = grid
        .iter()
        .map(|&xi| (hat_big_h(xi) * xi.powi(4) - hat_h(xi)).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new("5.a", "max |H_hat xi^4 - h_hat| on [-10, 10]", identity, "<", 1e-12));

    let pc = PeriodicCounterexample::new(p.k_max)?;
    let rows: Vec<Vec<String>> = (0..=p.k_max)
        .map(|k| {
            let kf = k as f64;
            vec![k.to_string(), fmt(pc.coeffs[k]), fmt(pc.errors[k]), fmt(kf.powi(4) * kf.exp() * pc.coeffs[k])]
        })
        .collect();
    out.csv("phi_coefficients.csv", &["k", "coefficient", "quadrature_error", "k4_ek_coefficient"], &rows)?;

    let conv = g11_partial_sums(&pc, 1.0, 1.0, p.n_max)?;
    let div = g11_partial_sums(&pc, 1.2, 1.0, p.n_max)?;
    let (c_all, c_upper) = tail_constants(&conv);
    let slope = log_log_slope(&conv.log_terms, p.n_max / 2..=p.n_max);
    checks.push(Check::flag("5.b", "G_{1,1} partial sums of phi convergent at delta=1", conv.verdict.is_convergent()));
    checks.push(Check::new(
        "5.b",
        "max_{n >= n_max/2} n^{9/4} T_n relative to max_{n >= 5}",
        c_upper / c_all,
        "<=",
        1.0,
    ));
    checks.push(Check::new("5.b", "log-log slope of T_n over upper half of orders", slope, "<=", -2.25));
    checks.push(Check::flag("5.b", "G_{1,1} partial sums of phi divergent at delta=1.2", div.verdict.is_divergent()));
    let rows: Vec<Vec<String>> = (0..=p.n_max)
        .map(|n| {
            let scaled = conv.log_terms[n] + 2.25 * (n.max(1) as f64).ln();
            vec![
                n.to_string(),
                fmt(conv.log_terms[n].exp()),
                fmt(conv.partial_sums[n]),
                fmt(scaled.exp()),
                fmt(div.log_terms[n].exp()),
            ]
        })
        .collect();
    out.csv(
        "phi_g11.csv",
        &["order", "term_delta_1", "partial_sum_delta_1", "n94_term_delta_1", "term_delta_1.2"],
        &rows,
    )?;

    let vals: Vec<Result<(f64, f64, f64, f64)>> = p
        .y_values
        .par_iter()
        .map(|&y| {
            let t = phi_triple_prime_imag_axis(y)?;
            let img: f64 = t.images.iter().map(|c| c.norm()).sum();
            Ok((t.total.norm(), arctanh_asymptote(y), img, t.total.im))
        })
        .collect();
    let vals: Vec<(f64, f64, f64, f64)> = vals.into_iter().collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = p
        .y_values
        .iter()
        .zip(&vals)
        .map(|(y, v)| vec![fmt(*y), fmt(v.3), fmt(v.0), fmt(v.1), fmt(v.0 / v.1), fmt(v.2)])
        .collect();
    out.csv(
        "phi_triple_prime.csv",
        &["y", "im_phi3", "abs_phi3", "asymptote", "ratio", "image_magnitude"],
        &rows,
    )?;
    let increasing = vals.windows(2).all(|w| w[1].0 > w[0].0);
    checks.push(Check::flag("5.c", "|phi'''(iy)| strictly increasing as y -> -1", increasing));
    let last = vals.last().expect("two or more");
    let prev = &vals[vals.len() - 2];
    let ratio = last.0 / last.1;
    checks.push(
        Check::new("5.c", "|ratio to sqrt(2/pi) e^{y^2/2} |arctanh y| - 1| at the last y", (ratio - 1.0).abs(), "<", 0.05)
            .unattainable(
                "|phi'''(iy)| = asymptote + bounded offset (about 2.4 at y = -0.9999); the ratio tends to 1 \
                 only like 1/|log(1+y)|, and reaching 5% needs 1 + y of order e^-80, beyond double precision",
            ),
    );
    let increment = (last.0 - prev.0) / (last.1 - prev.1);
    checks.push(Check::new(
        "5.c",
        "|growth of |phi'''| / growth of asymptote - 1| over the last two y",
        (increment - 1.0).abs(),
        "<",
        0.05,
    ));
    Ok(checks)
}

// ------------------------------------------------------------ criterion 6

#[derive(Debug, Clone)]
pub struct MajorantParams {
    pub config: MajorantConfig,
    pub m_values: Vec<f64>,
    pub trials: usize,
    pub comb_m_max: usize,
    pub stirling_n_max: usize,
    pub seed: u64,
}

impl MajorantParams {
    pub fn from_config(c: &ExperimentConfig) -> Result<Self> {
        let config = MajorantConfig {
            s: c.s.unwrap_or(1.0),
            delta: c.delta.unwrap_or(1.0),
            c0: c.c0.unwrap_or(1.0),
            c1: c.c1.unwrap_or(1.0),
            m_max: at_least("m_max", c.m_max.unwrap_or(30), 1)?,
            ..MajorantConfig::default()
        };
        config.validate().map_err(|e| Error::Validation(e.to_string()))?;
        let m_values = c.m_values.clone().unwrap_or_else(|| vec![0.1, 1.0, 10.0]);
        if m_values.is_empty() || m_values.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::Validation(format!("m_values must be positive, got {m_values:?}")));
        }
        let comb_m_max = c.comb_m_max.unwrap_or(6);
        if comb_m_max > 10 {
            return Err(Error::Validation(format!("comb_m_max must be <= 10, got {comb_m_max}")));
        }
        let stirling_n_max = c.stirling_n_max.unwrap_or(200);
        if !(1..=300).contains(&stirling_n_max) {
            return Err(Error::Validation(format!("stirling_n_max must lie in 1..=300, got {stirling_n_max}")));
        }
        Ok(Self {
            config,
            m_values,
            trials: at_least("trials", c.trials.unwrap_or(1000), 1)?,
            comb_m_max,
            stirling_n_max,
            seed: c.seed,
        })
    }
}

/// Seeded per-case RNG so that parallel and serial runs agree.
fn case_rng(seed: u64, tag: u64, m: usize, j: usize, k: usize) -> ChaCha8Rng {
    let mix = seed
        ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ ((m as u64) << 32)
        ^ ((j as u64) << 16)
        ^ (k as u64);
    ChaCha8Rng::seed_from_u64(mix)
}

fn majorant_table(p: &MajorantParams, out: &mut Outputs) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let cfg = p.config;
    let solved: Vec<Result<(f64, crate::majorant::PersistenceTime, MajorantState)>> = p
        .m_values
        .par_iter()
        .map(|&m| {
            let pt = persistence_time(m, &cfg)?;
            let omega = geometric_datum(m, cfg.m_max);
            let st = solve_recursion(&omega, m, pt.t, &cfg)?;
            Ok((m, pt, st))
        })
        .collect();
    let solved: Vec<_> = solved.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (m, pt, st) in &solved {
        let sum = st.weighted_sum();
        let bound = 4.0 * cfg.c1 * m;
        checks.push(Check::new(
            "6",
            format!("binding constraint residual at M={m}"),
            pt.binding_residual.abs(),
            "<=",
            1e-10,
        ));
        checks.push(Check::new("6", format!("weighted sum / (4 C1 M) at M={m}"), sum / bound, "<=", 1.0));
        let cons = recursion_consistency_check(st);
        checks.push(Check::flag("6", format!("V + Z dominated by B at M={m}"), cons.passed()));
        let tr = truncation_stability_check(st, cfg.m_max)?;
        checks.push(Check::flag(
            "6",
            format!("truncated sums monotone and below 4 C1 M at M={m}"),
            tr.monotone && tr.bounded,
        ));
        rows.push(vec![
            fmt(*m),
            fmt(pt.t1),
            fmt(pt.t),
            serde_json::to_value(pt.binding)?.as_str().unwrap_or("").to_string(),
            fmt(pt.self_term_residual),
            fmt(pt.weighted_sum_residual),
            fmt(sum),
            fmt(bound),
        ]);
        let raw_o = st.raw(&st.omega);
        let raw_v = st.raw(&st.v);
        let raw_z = st.raw(&st.z);
        let raw_b = st.raw(&st.b);
        let ladder: Vec<Vec<String>> = (0..=cfg.m_max)
            .map(|k| vec![k.to_string(), fmt(raw_o[k]), fmt(raw_v[k]), fmt(raw_z[k]), fmt(raw_b[k])])
            .collect();
        out.csv(&format!("majorant_ladder_M{m}.csv"), &["m", "omega", "v", "z", "b"], &ladder)?;
    }
    out.csv(
        "majorant_times.csv",
        &["M", "T1", "T", "binding", "self_term_residual", "weighted_sum_residual", "weighted_sum", "bound_4C1M"],
        &rows,
    )?;
    let mut ordered: Vec<(f64, f64)> = solved.iter().map(|(m, pt, _)| (*m, pt.t)).collect();
    ordered.sort_by(|a, b| a.0.total_cmp(&b.0));
    checks.push(Check::flag(
        "6",
        "T strictly decreasing in M",
        ordered.windows(2).all(|w| w[1].1 < w[0].1),
    ));

    let mut cases = Vec::new();
    for m in 0..=p.comb_m_max {
        for j in 0..=m {
            cases.push((m, j, None));
            for k in 0..=m - j {
                cases.push((m, j, Some(k)));
            }
        }
    }
    let reports: Vec<Result<crate::majorant::CombReport>> = cases
        .par_iter()
        .map(|&(m, j, k)| {
            let mut rng = case_rng(p.seed, k.map_or(2, |_| 3), m, j, k.unwrap_or(0));
            comb_inequality_check(m, j, k, 3, p.trials, &mut rng)
        })
        .collect();
    let reports: Vec<_> = reports.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let (mut bil, mut tril) = (0usize, 0usize);
    for r in &reports {
        if r.k.is_some() {
            tril += r.violations;
        } else {
            bil += r.violations;
        }
        rows.push(vec![
            r.m.to_string(),
            r.j.to_string(),
            r.k.map_or(String::new(), |k| k.to_string()),
            r.trials.to_string(),
            r.violations.to_string(),
            fmt(r.max_ratio),
        ]);
    }
    out.csv("comb_checks.csv", &["m", "j", "k", "trials", "violations", "max_ratio"], &rows)?;
    checks.push(Check::new(
        "6",
        format!("bilinear multi-index inequality violations, m <= {}, {} trials per case", p.comb_m_max, p.trials),
        bil as f64,
        "<=",
        0.0,
    ));
    checks.push(Check::new(
        "6",
        format!("trilinear multi-index inequality violations, m <= {}, {} trials per case", p.comb_m_max, p.trials),
        tril as f64,
        "<=",
        0.0,
    ));

    let st = stirling_check(p.stirling_n_max)?;
    checks.push(Check::new(
        "6",
        format!("Stirling bracket failures for n <= {}", p.stirling_n_max),
        (st.lower_failures.len() + st.upper_failures.len()) as f64,
        "<=",
        0.0,
    ));
    checks.push(Check::new(
        "6",
        format!("k^(-1/4) bound failures for k <= {}", p.stirling_n_max),
        st.consequence_failures.len() as f64,
        "<=",
        0.0,
    ));
    checks.push(Check::new("6", "L2 identity relative error, k <= 20", st.l2_max_rel_err, "<=", 1e-10));
    Ok(checks)
}

// ------------------------------------------------------------ criteria 7, 8

#[derive(Debug, Clone)]
pub struct PersistenceParams {
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub labels: usize,
    pub particle_multiple: usize,
    pub rel_tol: f64,
    pub shear_labels: usize,
    /// Particle steps between diagnostic rows.
    pub report_every: usize,
    pub times: Vec<f64>,
}

impl PersistenceParams {
    pub fn from_config(c: &ExperimentConfig) -> Result<Self> {
        let p = Self {
            n: power_of_two("n", c.n.unwrap_or(256))?,
            dt: positive("dt", c.dt.unwrap_or(5e-4))?,
            t_final: positive("t_final", c.t_final.unwrap_or(1.0))?,
            labels: power_of_two("labels", c.labels.unwrap_or(64))?,
            particle_multiple: c.particle_multiple.unwrap_or(20),
            rel_tol: c.rel_tol.unwrap_or(1e-14),
            shear_labels: power_of_two("shear_labels", c.shear_labels.unwrap_or(16))?,
            report_every: 10,
            times: sorted_times(c.times.as_deref().unwrap_or(&[0.25, 0.5, 1.0, 2.0]))?,
        };
        if p.particle_multiple == 0 || p.particle_multiple % 2 != 0 {
            return Err(Error::Validation(format!(
                "particle_multiple must be a positive even integer, got {}",
                p.particle_multiple
            )));
        }
        if !(0.0..1.0).contains(&p.rel_tol) {
            return Err(Error::Validation(format!("rel_tol must lie in [0, 1), got {}", p.rel_tol)));
        }
        let steps = step_count("t_final", p.t_final, p.dt)?;
        if steps % p.particle_multiple != 0 {
            return Err(Error::Validation(format!(
                "t_final / dt = {steps} is not a multiple of particle_multiple = {}",
                p.particle_multiple
            )));
        }
        Ok(p)
    }
}

/// Mean-zero smooth datum `sum c cos(a x1 + b x2 + p)` used for the solver checks.
pub const GENERIC_MODES: [(f64, f64, f64, f64); 6] = [
    (1.0, 0.0, 0.8, 0.3),
    (0.0, 1.0, -0.6, 1.1),
    (1.0, 1.0, 0.5, 2.0),
    (2.0, -1.0, 0.3, 0.7),
    (1.0, -3.0, 0.15, 4.0),
    (3.0, 2.0, 0.1, 5.0),
];

pub fn generic_vorticity(x: &[f64]) -> f64 {
    GENERIC_MODES
        .iter()
        .map(|(a, b, c, p)| c * (a * x[0] + b * x[1] + p).cos())
        .sum()
}

/// Diagnostics of the coupled solver/flow-map run at one time.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InvariantRow {
    pub t: f64,
    pub energy_drift: f64,
    pub enstrophy_drift: f64,
    pub vorticity_residual: f64,
    pub curl_residual: f64,
    pub div_residual: f64,
    pub volume_defect: f64,
    pub inverse_consistency: f64,
    pub max_cfl: f64,
}

fn invariant_row(
    state: &EulerState2D,
    flow: &FlowMapState<2>,
    omega0: &SpectralField,
    e0: f64,
    z0: f64,
    rel_tol: f64,
) -> Result<InvariantRow> {
    let omega_t = state.omega()?;
    let vort = lagrangian_vorticity_residual_2d(flow, omega0, &omega_t)?;
    let mut hist = SpectralHistory::new();
    hist.push(SpectralVelocity2D::from_state(state, rel_tol)?);
    let samples = hist.sample(state.time(), flow.positions())?;
    let v: Vec<[f64; 2]> = samples.iter().map(|s| s.0).collect();
    let v_grad = flow.label_gradient(&v, false)?;
    let om0: Vec<f64> = (0..v.len()).map(|p| generic_vorticity(&flow.label(p))).collect();
    let (curl, div) = curl_div_residual(flow.inverse_jacobians(), &v_grad, &om0)?;
    Ok(InvariantRow {
        t: state.time(),
        energy_drift: (state.energy() - e0) / e0,
        enstrophy_drift: (state.enstrophy() - z0) / z0,
        vorticity_residual: vort.rel,
        curl_residual: curl.rel,
        div_residual: div.rel,
        volume_defect: volume_defect(flow)?,
        inverse_consistency: flow.inverse_consistency()?,
        max_cfl: state.max_cfl(),
    })
}

fn lagrangian_persistence(p: &PersistenceParams, out: &mut Outputs) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    // stationary cellular flow: Eulerian u is a trigonometric polynomial
    // (entire), while the Lagrangian Y22 radius shrinks
    let rows: Vec<Vec<String>> = p
        .times
        .iter()
        .map(|&t| {
            let f = cellular_y22_field(t, 512)?;
            let r = estimate_radius(&f, None)?;
            Ok(vec![fmt(t), fmt(r.delta_hat), fmt(cellular_singularity_radius(t)?), "inf".to_string()])
        })
        .collect::<Result<_>>()?;
    out.csv(
        "cellular_radius_vs_time.csv",
        &["t", "lagrangian_fit", "lagrangian_exact", "eulerian_radius"],
        &rows,
    )?;

    let grid = Grid::new(2, p.n)?;
    let omega0 = SpectralField::from_fn(grid, generic_vorticity)?;
    let mut state = EulerState2D::new(&omega0, SolverConfig::new(p.n, p.dt))?;
    let (e0, z0) = (state.energy(), state.enstrophy());
    let mut flow = FlowMapState::<2>::new(p.labels)?;
    let particle_steps = step_count("t_final", p.t_final, p.dt)? / p.particle_multiple;
    let mut rows = Vec::new();
    let mut done = 0;
    while done < particle_steps {
        let chunk = p.report_every.min(particle_steps - done);
        advect_with_solver(&mut state, &mut flow, p.particle_multiple, chunk, p.rel_tol)?;
        done += chunk;
        rows.push(invariant_row(&state, &flow, &omega0, e0, z0, p.rel_tol)?);
    }
    let last = *rows.last().expect("at least one particle step");
    checks.push(Check::new("7", "relative energy drift", last.energy_drift.abs(), "<", 1e-6));
    checks.push(Check::new("7", "relative enstrophy drift", last.enstrophy_drift.abs(), "<", 1e-6));
    checks.push(Check::new("7", "Lagrangian vorticity residual (relative L2)", last.vorticity_residual, "<", 1e-4));
    checks.push(Check::new("7", "curl residual (relative)", last.curl_residual, "<", 1e-4));
    checks.push(Check::new("7", "divergence residual (relative)", last.div_residual, "<", 1e-4));
    checks.push(Check::new("7", "max |det grad X - 1|", last.volume_defect, "<", 1e-6));
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                fmt(r.t),
                fmt(r.energy_drift),
                fmt(r.enstrophy_drift),
                fmt(r.vorticity_residual),
                fmt(r.curl_residual),
                fmt(r.div_residual),
                fmt(r.volume_defect),
                fmt(r.inverse_consistency),
                fmt(r.max_cfl),
            ]
        })
        .collect();
    out.csv(
        "solver_invariants.csv",
        &[
            "t",
            "energy_drift",
            "enstrophy_drift",
            "vorticity_residual",
            "curl_residual",
            "div_residual",
            "volume_defect",
            "inverse_consistency",
            "max_cfl",
        ],
        &table,
    )?;
    out.snapshot("omega_final.snap", &state.omega()?, "omega", state.time())?;

    // exact shear flow, closed-form derivatives at t = 1
    let sf = ShearFlow::default();
    let t = 1.0;
    let lg = Grid::new(3, p.shear_labels)?;
    let labels: Vec<[f64; 3]> = (0..lg.len()).map(|f| lg.point(f)).collect();
    let jac: Vec<Mat<3>> = labels.iter().map(|a| sf.flow_jacobian(a, t)).collect();
    let y: Vec<Mat<3>> = labels.iter().map(|a| sf.inverse_jacobian(a, t)).collect();
    let w: Vec<Mat<3>> = labels.iter().map(|a| sf.lagrangian_velocity_gradient(a)).collect();
    let o: Vec<[f64; 3]> = labels.iter().map(|a| sf.initial_vorticity(a)).collect();
    let flat: Vec<f64> = o.iter().flatten().copied().collect();
    let cauchy = cauchy_invariant_residual_3d(&jac, &w, &o)?;
    let (curl, div) = curl_div_residual(&y, &w, &flat)?;
    let zeta: Vec<[f64; 3]> = labels.iter().map(|a| sf.vorticity(&sf.flow_map(a, t), t)).collect();
    let transport = vorticity_transport_residual_3d(&jac, &o, &zeta)?;
    checks.push(Check::new("8", "Cauchy invariant residual at t=1", cauchy.abs, "<", 1e-8));
    checks.push(Check::new("8", "3D curl residual at t=1", curl.abs, "<", 1e-8));
    checks.push(Check::new("8", "3D divergence residual at t=1", div.abs, "<", 1e-8));
    checks.push(Check::new("8", "vorticity transport residual at t=1", transport.abs, "<", 1e-8));
    out.csv(
        "shear_identities.csv",
        &["t", "cauchy_abs", "cauchy_rel", "curl_abs", "curl_rel", "div_abs", "div_rel", "transport_abs"],
        &[vec![
            fmt(t),
            fmt(cauchy.abs),
            fmt(cauchy.rel),
            fmt(curl.abs),
            fmt(curl.rel),
            fmt(div.abs),
            fmt(div.rel),
            fmt(transport.abs),
        ]],
    )?;
    Ok(checks)
}

// ------------------------------------------------------------ criterion 9

pub fn strip_params(c: &ExperimentConfig) -> Result<StripConfig> {
    let mut s = StripConfig::default();
    if let Some(k) = c.strip_k {
        s.k = k;
    }
    if let Some(n) = c.n {
        s.n = power_of_two("n", n)?;
    }
    if let Some(dt) = c.dt {
        s.dt = positive("dt", dt)?;
    }
    if let Some(t) = c.t_final {
        s.t_final = positive("t_final", t)?;
    }
    if let Some(r) = c.probe_radius {
        s.probe_radius = positive("probe_radius", r)?;
    }
    s.validate().map_err(|e| Error::Validation(e.to_string()))?;
    Ok(s)
}

fn strip_rotation(cfg: &StripConfig, out: &mut Outputs) -> Result<Vec<Check>> {
    let run = run_strip(cfg)?;
    let mut checks = vec![
        Check::new("9", format!("left probe at t={}", cfg.t_final), run.final_probe.left, "<", 1e-6),
        Check::new(
            "9",
            format!("right probe at t={} relative to t=0", cfg.t_final),
            run.final_probe.right / run.initial.right,
            ">",
            0.1,
        ),
        Check::new(
            "9",
            "left probe after time reversal, |reversed - initial|",
            (run.reversed.left - run.initial.left).abs(),
            "<",
            1e-5,
        ),
        Check::new(
            "9",
            "right probe after time reversal, |reversed - initial|",
            (run.reversed.right - run.initial.right).abs(),
            "<",
            1e-5,
        ),
    ];
    // the probe values are of order e^-600, so the absolute thresholds above
    // hold trivially; the logarithms carry the actual signature
    let rel_log = |a: f64, b: f64| ((a - b) / b).abs();
    checks.push(Check::new(
        "9",
        "reversal, relative change of log left probe",
        rel_log(run.reversed.log_left, run.initial.log_left),
        "<",
        1e-5,
    ));
    checks.push(Check::new(
        "9",
        "reversal, relative change of log right probe",
        rel_log(run.reversed.log_right, run.initial.log_right),
        "<",
        1e-5,
    ));
    checks.push(Check::flag(
        "9",
        "log left probe decreases while log right probe increases",
        run.final_probe.log_left < run.initial.log_left && run.final_probe.log_right > run.initial.log_right,
    ));
    checks.push(Check::flag(
        "9",
        "small-radius left probe vanishes exactly while the right one does not",
        run.small_final.log_left == f64::NEG_INFINITY
            && run.small_final.log_right.is_finite()
            && run.small_initial.log_left.is_finite(),
    ));
    checks.push(Check::new("9", "relative L2 vorticity reversal error", run.field_reversal_error, "<", 1e-10));
    let rows: Vec<Vec<String>> = run
        .series
        .iter()
        .map(|r| vec![fmt(r.t), fmt(r.log_left), fmt(r.log_right), fmt(r.left), fmt(r.right)])
        .collect();
    out.csv("strip_probes.csv", &["t", "log_left", "log_right", "left", "right"], &rows)?;
    let summary = vec![
        vec!["initial".to_string(), fmt(run.initial.t), fmt(run.initial.log_left), fmt(run.initial.log_right)],
        vec!["final".to_string(), fmt(run.final_probe.t), fmt(run.final_probe.log_left), fmt(run.final_probe.log_right)],
        vec!["reversed".to_string(), fmt(run.reversed.t), fmt(run.reversed.log_left), fmt(run.reversed.log_right)],
        vec!["small_initial".to_string(), fmt(run.small_initial.t), fmt(run.small_initial.log_left), fmt(run.small_initial.log_right)],
        vec!["small_final".to_string(), fmt(run.small_final.t), fmt(run.small_final.log_left), fmt(run.small_final.log_right)],
    ];
    out.csv("strip_summary.csv", &["probe", "t", "log_left", "log_right"], &summary)?;
    std::fs::write(out.dir.join("strip_run.json"), serde_json::to_string_pretty(&run)?)?;
    out.written.push("strip_run.json".into());
    Ok(checks)
}
