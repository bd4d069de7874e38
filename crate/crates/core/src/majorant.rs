//! Majorant sequences for the Lagrangian Gevrey a-priori estimates.
//!
//! Every quantity is carried in weighted form `x_m delta^m / m!^s`, where the
//! binomial convolutions become `binom^{1-s}`-weighted convolutions and stay
//! O(1) for any order.

use num_bigint::BigUint;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::quadrature::{integrate, QuadConfig};
use crate::{Error, Result};

/// Spatial dimension of the recursion (fixes the coefficient structure).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dim {
    Two,
    Three,
}

/// How `B_0` is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum B0Mode {
    /// `B_0 = 2 C_1 Omega_0`, the `m = 0` case of the recursion with equality.
    Recursion,
    /// `B_0 = 3 C_0 M + 1/2`, the local-existence bound.
    LocalBound,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MajorantConfig {
    pub d: Dim,
    pub s: f64,
    pub delta: f64,
    pub c0: f64,
    pub c1: f64,
    pub m_max: usize,
    pub b0_mode: B0Mode,
    /// Power `p` in `Z_m = sup t^{-p} ||...||`. Only the separate V/Z
    /// recursions use it; the B recursion and the constraints assume 1/2.
    pub z_power: f64,
    /// Overrides the default `T_1` (the Z_0 fixed-point time).
    pub t1: Option<f64>,
}

impl Default for MajorantConfig {
    fn default() -> Self {
        Self {
            d: Dim::Two,
            s: 1.0,
            delta: 1.0,
            c0: 1.0,
            c1: 1.0,
            m_max: 30,
            b0_mode: B0Mode::Recursion,
            z_power: 0.5,
            t1: None,
        }
    }
}

impl MajorantConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s >= 1.0) {
            return Err(Error::Domain(format!("Gevrey index must be >= 1, got {}", self.s)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Domain(format!("delta must be positive, got {}", self.delta)));
        }
        if !(self.c0 > 0.0 && self.c1 >= 1.0) {
            return Err(Error::Domain(format!(
                "need C0 > 0 and C1 >= 1, got C0 = {}, C1 = {}",
                self.c0, self.c1
            )));
        }
        if !(self.z_power > 0.0 && self.z_power < 1.0) {
            return Err(Error::Domain(format!("z_power must lie in (0, 1), got {}", self.z_power)));
        }
        if let Some(t1) = self.t1 {
            if !(t1 > 0.0) {
                return Err(Error::Domain(format!("T1 must be positive, got {t1}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// `T <= T_1`.
    LocalTime,
    /// `C_1 T^{1/2}(1 + B_0 + ...) <= 1/2`.
    SelfTerm,
    /// The smallness condition closing the weighted-sum bound at `4 C_1 M`.
    WeightedSum,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PersistenceTime {
    pub m: f64,
    pub t1: f64,
    pub t: f64,
    pub binding: Constraint,
    /// The `B_0` bound used in the self-term constraint.
    pub b0_bound: f64,
    /// `lhs - 1/2` for the self-term constraint at `t`.
    pub self_term_residual: f64,
    /// `lhs - 1/4` for the weighted-sum constraint at `t`.
    pub weighted_sum_residual: f64,
    /// `lhs - 1/2` for the Z_0 fixed point at `t` (zero when `T_1` is overridden and binds).
    pub local_time_residual: f64,
    /// Residual of the binding constraint.
    pub binding_residual: f64,
}

fn self_term_lhs(t: f64, b0: f64, c1: f64, d: Dim) -> f64 {
    let r = t.sqrt();
    let inner = match d {
        Dim::Two => 1.0 + b0 + r * b0 + t * b0 * b0,
        Dim::Three => 1.0 + b0 + r * b0 + r * b0 * b0 + t * b0 * b0,
    };
    c1 * r * inner
}

fn weighted_sum_lhs(t: f64, m: f64, c1: f64, d: Dim) -> f64 {
    let r = t.sqrt();
    let cubic = match d {
        Dim::Two => t * r,
        Dim::Three => t * (1.0 + r),
    };
    8.0 * c1 * c1 * r * (1.0 + r) * m + 32.0 * c1 * c1 * c1 * cubic * m * m
}

/// `Z_0 = C_0 T^{1/2} (1 + T^{1/2} Z_0)^2 V_0` at `Z_0 = 1/2`, `V_0 = 3 C_0 M`.
fn local_time_lhs(t: f64, m: f64, c0: f64) -> f64 {
    let r = t.sqrt();
    c0 * r * (1.0 + 0.5 * r).powi(2) * 3.0 * c0 * m
}

/// Largest `t` with `f(t) <= target`, for `f` increasing with `f(0) < target`.
fn bisect_increasing<F: Fn(f64) -> f64>(f: F, target: f64) -> Result<f64> {
    let mut hi = 1.0;
    let mut guard = 0;
    while f(hi) <= target {
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Internal("constraint never binds".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-13 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if !(lo > 0.0) {
        return Err(Error::Internal("no positive time satisfies the constraint".into()));
    }
    Ok(lo)
}

/// The `B_0` bound entering the self-term constraint.
pub fn b0_bound(m: f64, omega0: f64, cfg: &MajorantConfig) -> f64 {
    let local = 3.0 * cfg.c0 * m + 0.5;
    match cfg.b0_mode {
        B0Mode::LocalBound => local,
        B0Mode::Recursion => local.max(2.0 * cfg.c1 * omega0),
    }
}

/// Largest `T <= T_1` satisfying the self-term and weighted-sum constraints.
/// `B_0` is bounded by `3 C_0 M + 1/2` (or `2 C_1 M` if larger).
pub fn persistence_time(m: f64, cfg: &MajorantConfig) -> Result<PersistenceTime> {
    cfg.validate()?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Domain(format!("M must be positive and finite, got {m}")));
    }
    let b0 = b0_bound(m, m, cfg);
    let t1 = match cfg.t1 {
        Some(t1) => t1,
        None => bisect_increasing(|t| local_time_lhs(t, m, cfg.c0), 0.5)?,
    };
    let t2 = bisect_increasing(|t| self_term_lhs(t, b0, cfg.c1, cfg.d), 0.5)?;
    let t27 = bisect_increasing(|t| weighted_sum_lhs(t, m, cfg.c1, cfg.d), 0.25)?;
    let (t, binding) = [
        (t1, Constraint::LocalTime),
        (t2, Constraint::SelfTerm),
        (t27, Constraint::WeightedSum),
    ]
    .into_iter()
    .fold((f64::INFINITY, Constraint::LocalTime), |acc, c| if c.0 < acc.0 { c } else { acc });
    let self_term_residual = self_term_lhs(t, b0, cfg.c1, cfg.d) - 0.5;
    let weighted_sum_residual = weighted_sum_lhs(t, m, cfg.c1, cfg.d) - 0.25;
    let local_time_residual = if cfg.t1.is_some() {
        0.0
    } else {
        local_time_lhs(t, m, cfg.c0) - 0.5
    };
    let binding_residual = match binding {
        Constraint::LocalTime => local_time_residual,
        Constraint::SelfTerm => self_term_residual,
        Constraint::WeightedSum => weighted_sum_residual,
    };
    Ok(PersistenceTime {
        m,
        t1,
        t,
        binding,
        b0_bound: b0,
        self_term_residual,
        weighted_sum_residual,
        local_time_residual,
        binding_residual,
    })
}

/// Persistence times for a sweep of `M` values.
pub fn persistence_sweep(ms: &[f64], cfg: &MajorantConfig) -> Result<Vec<PersistenceTime>> {
    ms.par_iter().map(|&m| persistence_time(m, cfg)).collect()
}

/// `ln n!` for `n = 0..=m_max`.
fn log_factorials(m_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; m_max + 1];
    for n in 1..=m_max {
        out[n] = out[n - 1] + (n as f64).ln();
    }
    out
}

/// Weight tables `binom(m, j)^{1-s}` and `(m; j, k)^{1-s}`.
struct Weights {
    lf: Vec<f64>,
    one_minus_s: f64,
}

impl Weights {
    fn new(m_max: usize, s: f64) -> Self {
        Self {
            lf: log_factorials(m_max),
            one_minus_s: 1.0 - s,
        }
    }
    fn binom(&self, m: usize, j: usize) -> f64 {
        if self.one_minus_s == 0.0 {
            return 1.0;
        }
        (self.one_minus_s * (self.lf[m] - self.lf[j] - self.lf[m - j])).exp()
    }
    fn trinom(&self, m: usize, j: usize, k: usize) -> f64 {
        if self.one_minus_s == 0.0 {
            return 1.0;
        }
        (self.one_minus_s * (self.lf[m] - self.lf[j] - self.lf[k] - self.lf[m - j - k])).exp()
    }
    /// `sum_{0<j<m} w a_j b_{m-j}`.
    fn double(&self, m: usize, a: &[f64], b: &[f64]) -> f64 {
        (1..m).map(|j| self.binom(m, j) * a[j] * b[m - j]).sum()
    }
    /// `sum_{j,k >= 0, 0 < j+k < m} w a_j b_k c_{m-j-k}`.
    fn triple(&self, m: usize, a: &[f64], b: &[f64], c: &[f64]) -> f64 {
        let mut acc = 0.0;
        for j in 0..m {
            for k in 0..m - j {
                if j + k == 0 {
                    continue;
                }
                acc += self.trinom(m, j, k) * a[j] * b[k] * c[m - j - k];
            }
        }
        acc
    }
}

/// Filled majorant arrays. `v`, `z`, `b`, `omega` are the weighted values
/// `x_m delta^m / m!^s`; the raw values are available through [`MajorantState::raw`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MajorantState {
    pub config: MajorantConfig,
    pub m: f64,
    pub t: f64,
    pub omega: Vec<f64>,
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub b: Vec<f64>,
}

impl MajorantState {
    /// Weighted sum `sum_m B_m delta^m / m!^s`.
    pub fn weighted_sum(&self) -> f64 {
        self.b.iter().sum()
    }

    /// `x_m = w_m m!^s / delta^m` for a weighted array.
    pub fn raw(&self, weighted: &[f64]) -> Vec<f64> {
        let lf = log_factorials(weighted.len().saturating_sub(1));
        weighted
            .iter()
            .enumerate()
            .map(|(m, w)| w * (self.config.s * lf[m] - m as f64 * self.config.delta.ln()).exp())
            .collect()
    }
}

/// Weighted initial ladder from raw `Omega_m`.
pub fn weight_ladder(raw: &[f64], s: f64, delta: f64) -> Vec<f64> {
    let lf = log_factorials(raw.len().saturating_sub(1));
    raw.iter()
        .enumerate()
        .map(|(m, o)| o * (m as f64 * delta.ln() - s * lf[m]).exp())
        .collect()
}

/// The synthetic datum `Omega_m = M m!^s 2^{-(m+1)} / delta^m`, whose weighted
/// sum is `M (1 - 2^{-(m_max+1)})`. Returned in weighted form.
pub fn geometric_datum(m: f64, m_max: usize) -> Vec<f64> {
    (0..=m_max).map(|k| m * 0.5f64.powi(k as i32 + 1)).collect()
}

/// Minimal solution of the B recursion (and the separate V/Z recursions)
/// with the inequalities read as equalities.
///
/// `omega` is the weighted ladder; `m` is the Gevrey norm bound `M` used in
/// the constraints and in `B0Mode::LocalBound`.
pub fn solve_recursion(omega: &[f64], m: f64, t: f64, cfg: &MajorantConfig) -> Result<MajorantState> {
    cfg.validate()?;
    if omega.len() != cfg.m_max + 1 {
        return Err(Error::Config(format!(
            "ladder has {} entries, expected m_max + 1 = {}",
            omega.len(),
            cfg.m_max + 1
        )));
    }
    if omega.iter().any(|o| !(*o >= 0.0 && o.is_finite())) {
        return Err(Error::Domain("ladder entries must be finite and nonnegative".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("T must be nonnegative, got {t}")));
    }
    if !(m >= omega.iter().sum::<f64>() * (1.0 - 1e-12)) {
        return Err(Error::Domain(format!(
            "M = {m} is below the weighted ladder sum {}",
            omega.iter().sum::<f64>()
        )));
    }
    let b0_bar = b0_bound(m, omega[0], cfg);
    let lhs = self_term_lhs(t, b0_bar, cfg.c1, cfg.d);
    if lhs > 0.5 {
        return Err(Error::Constraint(format!(
            "self-term constraint C1 T^(1/2)(1 + B0 + ...) <= 1/2 fails: lhs = {lhs} at T = {t}, B0 = {b0_bar}"
        )));
    }

    let w = Weights::new(cfg.m_max, cfg.s);
    let c1 = cfg.c1;
    let r = t.sqrt();
    let a = 2.0 * c1 * r * (1.0 + r);
    let cubic = match cfg.d {
        Dim::Two => 2.0 * c1 * t * r,
        Dim::Three => 2.0 * c1 * t * (1.0 + r),
    };
    let mut b = vec![0.0; cfg.m_max + 1];
    b[0] = match cfg.b0_mode {
        B0Mode::Recursion => 2.0 * c1 * omega[0],
        B0Mode::LocalBound => 3.0 * cfg.c0 * m + 0.5,
    };
    for k in 1..=cfg.m_max {
        b[k] = 2.0 * c1 * omega[k] + a * w.double(k, &b, &b) + cubic * w.triple(k, &b, &b, &b);
    }

    let (v, z) = solve_vz(omega, t, cfg, &w)?;
    Ok(MajorantState {
        config: *cfg,
        m,
        t,
        omega: omega.to_vec(),
        v,
        z,
        b,
    })
}

/// Time factors `(T^p, T^{1-p})` of the V/Z recursions.
fn vz_factors(t: f64, p: f64) -> (f64, f64) {
    (t.powf(p), t.powf(1.0 - p))
}

/// Right-hand sides of the V and Z recursions at order `k >= 1`, split into
/// the part linear in `(V_k, Z_k)` and the rest.
struct VzRow {
    /// `V_k = cv + a11 V_k + a12 Z_k`
    cv: f64,
    a11: f64,
    a12: f64,
    /// `Z_k = cz + a21 V_k + a22 Z_k`
    cz: f64,
    a21: f64,
    a22: f64,
}

fn vz_row(k: usize, omega: &[f64], v: &[f64], z: &[f64], t: f64, cfg: &MajorantConfig, w: &Weights) -> VzRow {
    let c = 0.5 * cfg.c1;
    let (tz, ti) = vz_factors(t, cfg.z_power);
    let (v0, z0) = (v[0], z[0]);
    let zv = w.double(k, z, v);
    let zzv = w.triple(k, z, z, v);
    let (cv, a11, a12) = match cfg.d {
        Dim::Two => (
            c * omega[k] + c * tz * zv,
            c * tz * z0,
            c * tz * v0,
        ),
        Dim::Three => (
            c * omega[k] + c * tz * zv + c * tz * tz * zzv,
            c * tz * tz * z0 * z0 + c * tz * z0,
            c * tz * tz * z0 * v0 + c * tz * v0,
        ),
    };
    VzRow {
        cv,
        a11,
        a12,
        cz: c * ti * tz * tz * zzv + c * ti * tz * zv,
        a21: c * ti * (tz * tz * z0 * z0 + tz * z0 + 1.0),
        a22: c * ti * (tz * tz * z0 * v0 + tz * v0),
    }
}

/// `m = 0`: `V_0 = C_0 Omega_0 + C_0 T^p (..) Z_0 V_0`, `Z_0 = C_0 T^{1-p} (1 + T^p Z_0)^2 V_0`.
fn solve_vz0(omega0: f64, t: f64, cfg: &MajorantConfig) -> Result<(f64, f64)> {
    let c0 = cfg.c0;
    let (tz, ti) = vz_factors(t, cfg.z_power);
    let (mut v0, mut z0) = (c0 * omega0, 0.0);
    for _ in 0..10_000 {
        let coupling = match cfg.d {
            Dim::Two => c0 * tz * z0,
            Dim::Three => c0 * tz * (tz * z0 * z0 + z0),
        };
        if coupling >= 1.0 {
            break;
        }
        let nv = c0 * omega0 / (1.0 - coupling);
        let nz = c0 * ti * (1.0 + tz * z0).powi(2) * nv;
        let done = (nv - v0).abs() <= 1e-15 * nv.max(1e-300) && (nz - z0).abs() <= 1e-15 * nz.max(1e-300);
        v0 = nv;
        z0 = nz;
        if done {
            return Ok((v0, z0));
        }
    }
    Err(Error::Constraint(format!(
        "the V_0/Z_0 fixed point has no bounded solution at T = {t}"
    )))
}

fn solve_vz(omega: &[f64], t: f64, cfg: &MajorantConfig, w: &Weights) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut v = vec![0.0; omega.len()];
    let mut z = vec![0.0; omega.len()];
    let (v0, z0) = solve_vz0(omega[0], t, cfg)?;
    v[0] = v0;
    z[0] = z0;
    for k in 1..omega.len() {
        let row = vz_row(k, omega, &v, &z, t, cfg, w);
        let (m11, m12, m21, m22) = (1.0 - row.a11, -row.a12, -row.a21, 1.0 - row.a22);
        let det = m11 * m22 - m12 * m21;
        if !(det > 0.0 && m11 > 0.0 && m22 > 0.0) {
            return Err(Error::Constraint(format!(
                "V/Z system at order {k} is not diagonally dominant (det = {det})"
            )));
        }
        v[k] = (row.cv * m22 - m12 * row.cz) / det;
        z[k] = (m11 * row.cz - m21 * row.cv) / det;
    }
    Ok((v, z))
}

/// Result of comparing the separate V/Z recursions with the B recursion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// Orders where `V_m + Z_m > B_m`.
    pub sum_violations: Vec<usize>,
    /// Orders where the summed V/Z right-hand sides exceed the B right-hand side
    /// evaluated at `V + Z`.
    pub term_violations: Vec<usize>,
    /// `max_m (V_m + Z_m) / B_m`.
    pub max_sum_ratio: f64,
}

impl ConsistencyReport {
    pub fn passed(&self) -> bool {
        self.sum_violations.is_empty() && self.term_violations.is_empty()
    }
}

/// Checks that the V and Z recursions, added, are dominated by the B
/// recursion (before the self term is absorbed), and that `V + Z <= B`.
pub fn recursion_consistency_check(state: &MajorantState) -> ConsistencyReport {
    let cfg = &state.config;
    let w = Weights::new(cfg.m_max, cfg.s);
    let (v, z) = (&state.v, &state.z);
    let sum: Vec<f64> = v.iter().zip(z).map(|(a, b)| a + b).collect();
    let t = state.t;
    let r = t.sqrt();
    let mut sum_violations = Vec::new();
    let mut term_violations = Vec::new();
    let mut max_sum_ratio: f64 = 0.0;
    for k in 0..=cfg.m_max {
        let ratio = if state.b[k] > 0.0 {
            sum[k] / state.b[k]
        } else if sum[k] > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        max_sum_ratio = max_sum_ratio.max(ratio);
        if ratio > 1.0 + 1e-12 {
            sum_violations.push(k);
        }
        if k == 0 {
            continue;
        }
        let row = vz_row(k, &state.omega, v, z, t, cfg, &w);
        let lhs = row.cv + row.a11 * v[k] + row.a12 * z[k] + row.cz + row.a21 * v[k] + row.a22 * z[k];
        let b0 = sum[0];
        let self_coeff = match cfg.d {
            Dim::Two => 1.0 + b0 + r * b0 + t * b0 * b0,
            Dim::Three => 1.0 + b0 + r * b0 + r * b0 * b0 + t * b0 * b0,
        };
        let cubic = match cfg.d {
            Dim::Two => t * r,
            Dim::Three => t * (1.0 + r),
        };
        let rhs = cfg.c1 * state.omega[k]
            + cfg.c1 * r * self_coeff * sum[k]
            + cfg.c1 * r * (1.0 + r) * w.double(k, &sum, &sum)
            + cfg.c1 * cubic * w.triple(k, &sum, &sum, &sum);
        if lhs > rhs * (1.0 + 1e-12) {
            term_violations.push(k);
        }
    }
    ConsistencyReport {
        sum_violations,
        term_violations,
        max_sum_ratio,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationReport {
    /// `S_{m0}` for `m0 = 0..=m0_max`.
    pub partial_sums: Vec<f64>,
    pub bound: f64,
    pub monotone: bool,
    pub bounded: bool,
    /// `full weighted sum - S_{m0_max}`.
    pub tail: f64,
}

/// Truncated weighted sums `S_{m0} = sum_{m <= m0} B_m delta^m / m!^s`.
pub fn truncation_stability_check(state: &MajorantState, m0: usize) -> Result<TruncationReport> {
    if m0 >= state.b.len() {
        return Err(Error::Domain(format!(
            "truncation level {m0} exceeds m_max = {}",
            state.b.len() - 1
        )));
    }
    let mut partial_sums = Vec::with_capacity(m0 + 1);
    let mut acc = 0.0;
    for b in &state.b[..=m0] {
        acc += b;
        partial_sums.push(acc);
    }
    let bound = 4.0 * state.config.c1 * state.m;
    let monotone = partial_sums.windows(2).all(|p| p[1] >= p[0]);
    let bounded = partial_sums.iter().all(|s| *s <= bound);
    Ok(TruncationReport {
        tail: state.weighted_sum() - acc,
        partial_sums,
        bound,
        monotone,
        bounded,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CombReport {
    pub m: usize,
    pub j: usize,
    pub k: Option<usize>,
    pub dim: usize,
    pub trials: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` seen (0 when every rhs vanished).
    pub max_ratio: f64,
}

/// All multi-indices in `N_0^dim` of order `m`.
pub fn multi_indices(dim: usize, m: usize) -> Vec<Vec<usize>> {
    if dim == 1 {
        return vec![vec![m]];
    }
    let mut out = Vec::new();
    for first in 0..=m {
        for mut rest in multi_indices(dim - 1, m - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn binom_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn trinom_u128(n: usize, j: usize, k: usize) -> u128 {
    binom_u128(n, j) * binom_u128(n - j, k)
}

/// Brute-force check of the multi-index Leibniz inequalities with random
/// integer sequences (exact arithmetic). With `k = None` the bilinear form
///
/// `sum binom(alpha, beta) a_beta b_{alpha-beta} <= binom(m, j) (sum a)(sum b)`
///
/// is tested; with `k = Some(k)` the trilinear multinomial form.
pub fn comb_inequality_check<R: Rng>(
    m: usize,
    j: usize,
    k: Option<usize>,
    dim: usize,
    trials: usize,
    rng: &mut R,
) -> Result<CombReport> {
    if m > 10 || !(1..=3).contains(&dim) {
        return Err(Error::Domain(format!("need m <= 10 and dim in 1..=3, got m = {m}, dim = {dim}")));
    }
    if j + k.unwrap_or(0) > m {
        return Err(Error::Domain(format!("orders j = {j}, k = {k:?} exceed m = {m}")));
    }
    let index = |dim: usize, order: usize| {
        let list = multi_indices(dim, order);
        let pos: std::collections::HashMap<Vec<usize>, usize> =
            list.iter().cloned().enumerate().map(|(i, a)| (a, i)).collect();
        (list, pos)
    };
    let (betas, _) = index(dim, j);
    let mut violations = 0;
    let mut max_ratio: f64 = 0.0;
    for _ in 0..trials {
        let (lhs, rhs) = match k {
            None => {
                let (gammas, gpos) = index(dim, m - j);
                let a: Vec<u128> = betas.iter().map(|_| rng.gen_range(0..1000u128)).collect();
                let b: Vec<u128> = gammas.iter().map(|_| rng.gen_range(0..1000u128)).collect();
                let mut lhs: u128 = 0;
                for alpha in multi_indices(dim, m) {
                    for (bi, beta) in betas.iter().enumerate() {
                        if beta.iter().zip(&alpha).any(|(x, y)| x > y) {
                            continue;
                        }
                        let rest: Vec<usize> = alpha.iter().zip(beta).map(|(x, y)| x - y).collect();
                        let coeff: u128 = alpha.iter().zip(beta).map(|(x, y)| binom_u128(*x, *y)).product();
                        lhs += coeff * a[bi] * b[gpos[&rest]];
                    }
                }
                let rhs = binom_u128(m, j) * a.iter().sum::<u128>() * b.iter().sum::<u128>();
                (lhs, rhs)
            }
            Some(k) => {
                let (gammas, _) = index(dim, k);
                let (deltas, dpos) = index(dim, m - j - k);
                let a: Vec<u128> = betas.iter().map(|_| rng.gen_range(0..1000u128)).collect();
                let b: Vec<u128> = gammas.iter().map(|_| rng.gen_range(0..1000u128)).collect();
                let c: Vec<u128> = deltas.iter().map(|_| rng.gen_range(0..1000u128)).collect();
                let mut lhs: u128 = 0;
                for alpha in multi_indices(dim, m) {
                    for (bi, beta) in betas.iter().enumerate() {
                        if beta.iter().zip(&alpha).any(|(x, y)| x > y) {
                            continue;
                        }
                        for (gi, gamma) in gammas.iter().enumerate() {
                            if gamma.iter().zip(beta).zip(&alpha).any(|((g, b), a)| g + b > *a) {
                                continue;
                            }
                            let rest: Vec<usize> = alpha
                                .iter()
                                .zip(beta)
                                .zip(gamma)
                                .map(|((a, b), g)| a - b - g)
                                .collect();
                            let coeff: u128 = (0..dim).map(|i| trinom_u128(alpha[i], beta[i], gamma[i])).product();
                            lhs += coeff * a[bi] * b[gi] * c[dpos[&rest]];
                        }
                    }
                }
                let rhs = trinom_u128(m, j, k) * a.iter().sum::<u128>() * b.iter().sum::<u128>() * c.iter().sum::<u128>();
                (lhs, rhs)
            }
        };
        if lhs > rhs {
            violations += 1;
        }
        if rhs > 0 {
            max_ratio = max_ratio.max(lhs as f64 / rhs as f64);
        }
    }
    Ok(CombReport {
        m,
        j,
        k,
        dim,
        trials,
        violations,
        max_ratio,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StirlingReport {
    pub n_max: usize,
    /// `n` for which `sqrt(2 pi) n^{n+1/2} e^{-n} <= n!` failed.
    pub lower_failures: Vec<usize>,
    /// `n` for which `n! <= e n^{n+1/2} e^{-n}` failed.
    pub upper_failures: Vec<usize>,
    /// `k` for which `sqrt((2k)!) / (2^k k!) <= k^{-1/4}` failed.
    pub consequence_failures: Vec<usize>,
    /// Largest relative error of `|| |xi|^k e^{-|xi|} ||_{L^2}` against `sqrt((2k)!) / 2^k`.
    pub l2_max_rel_err: f64,
}

impl StirlingReport {
    pub fn passed(&self, l2_tol: f64) -> bool {
        self.lower_failures.is_empty()
            && self.upper_failures.is_empty()
            && self.consequence_failures.is_empty()
            && self.l2_max_rel_err <= l2_tol
    }
}

// decimal brackets of e and pi over 10^12
const E_LO: u64 = 2_718_281_828_459;
const E_HI: u64 = 2_718_281_828_460;
const PI_HI: u64 = 3_141_592_653_590;
const SCALE: u64 = 1_000_000_000_000;

/// Exact big-integer check of the Stirling brackets and of the
/// `k^{-1/4}` consequence for `1 <= n, k <= n_max`, plus quadrature of the
/// L^2 identity for `k <= 20`. The transcendental constants enter through
/// rational brackets, so every accepted inequality is a proof.
pub fn stirling_check(n_max: usize) -> Result<StirlingReport> {
    if n_max == 0 || n_max > 300 {
        return Err(Error::Domain(format!("n_max must lie in 1..=300, got {n_max}")));
    }
    let big = |x: u64| BigUint::from(x);
    let scale = big(SCALE);
    let mut lower_failures = Vec::new();
    let mut upper_failures = Vec::new();
    let mut consequence_failures = Vec::new();

    let mut fact = big(1);
    for n in 1..=n_max {
        fact *= big(n as u64);
        let nn = big(n as u64);
        let f2 = &fact * &fact;
        let n_pow = nn.pow(2 * n as u32 + 1);
        // (n!)^2 e^{2n} >= 2 pi n^{2n+1}, with e from below and pi from above
        let lhs = &f2 * big(E_LO).pow(2 * n as u32) * &scale;
        let rhs = big(2) * big(PI_HI) * &n_pow * scale.pow(2 * n as u32);
        if lhs < rhs {
            lower_failures.push(n);
        }
        // (n!)^2 e^{2n-2} <= n^{2n+1}, with e from above
        let lhs = &f2 * big(E_HI).pow(2 * n as u32 - 2);
        let rhs = &n_pow * scale.pow(2 * n as u32 - 2);
        if lhs > rhs {
            upper_failures.push(n);
        }
    }

    // ((2k)!)^2 k <= (k!)^4 16^k
    let mut fk = big(1);
    let mut f2k = big(1);
    for k in 1..=n_max {
        fk *= big(k as u64);
        f2k *= big((2 * k - 1) as u64) * big((2 * k) as u64);
        let lhs = &f2k * &f2k * big(k as u64);
        let rhs = fk.pow(4) * big(16).pow(k as u32);
        if lhs > rhs {
            consequence_failures.push(k);
        }
    }

    let cfg = QuadConfig::with_tolerances(0.0, 1e-13);
    let lf = log_factorials(40);
    let mut l2_max_rel_err: f64 = 0.0;
    for k in 0..=20usize {
        let p = 2 * k as i32;
        // the integrand peaks at xi = k; 60 + 2k covers the tail to roundoff
        let upper = 60.0 + 2.0 * k as f64;
        let half = integrate(|x: f64| x.powi(p) * (-2.0 * x).exp(), 0.0, upper, &[k as f64], &cfg)?;
        let norm = (2.0 * half.value).sqrt();
        let exact = (0.5 * lf[2 * k] - k as f64 * 2f64.ln()).exp();
        l2_max_rel_err = l2_max_rel_err.max((norm - exact).abs() / exact);
    }
    Ok(StirlingReport {
        n_max,
        lower_failures,
        upper_failures,
        consequence_failures,
        l2_max_rel_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(d: Dim) -> MajorantConfig {
        MajorantConfig {
            d,
            ..MajorantConfig::default()
        }
    }

    #[test]
    fn binding_constraints() {
        let c = cfg(Dim::Two);
        let small = persistence_time(0.1, &c).unwrap();
        assert_eq!(small.binding, Constraint::SelfTerm);
        assert!((small.t - 0.06).abs() < 0.01, "{}", small.t);
        let large = persistence_time(10.0, &c).unwrap();
        assert_eq!(large.binding, Constraint::WeightedSum);
        assert!((large.t - 9.5e-6).abs() < 1e-6, "{}", large.t);
        for p in [small, large] {
            assert!(p.binding_residual.abs() <= 1e-10);
            assert!(p.self_term_residual <= 1e-12 && p.weighted_sum_residual <= 1e-12);
            assert!(p.t <= p.t1);
        }
    }

    #[test]
    fn persistence_time_decreases_in_m() {
        for d in [Dim::Two, Dim::Three] {
            let ts: Vec<f64> = persistence_sweep(&[0.01, 0.1, 1.0, 10.0, 100.0], &cfg(d))
                .unwrap()
                .iter()
                .map(|p| p.t)
                .collect();
            assert!(ts.windows(2).all(|w| w[1] < w[0]), "{ts:?}");
        }
    }

    #[test]
    fn small_m_limit() {
        // B_0 -> 1/2: C1 T^{1/2} (3/2 + T^{1/2}/2 + T/4) = 1/2
        let cap = bisect_increasing(|t| t.sqrt() * (1.5 + 0.5 * t.sqrt() + 0.25 * t), 0.5).unwrap();
        let p = persistence_time(1e-9, &cfg(Dim::Two)).unwrap();
        assert!((p.t - cap).abs() < 1e-6 * cap);
    }

    #[test]
    fn t1_override_binds() {
        let c = MajorantConfig {
            t1: Some(1e-3),
            ..cfg(Dim::Two)
        };
        let p = persistence_time(0.1, &c).unwrap();
        assert_eq!(p.binding, Constraint::LocalTime);
        assert_eq!(p.t, 1e-3);
    }

    #[test]
    fn zero_datum_stays_zero() {
        let c = MajorantConfig {
            b0_mode: B0Mode::LocalBound,
            ..cfg(Dim::Two)
        };
        let mut omega = vec![0.0; c.m_max + 1];
        omega[0] = 1e-3;
        let st = solve_recursion(&omega, 1e-3, 1e-3, &c).unwrap();
        assert!(st.b[0] > 0.0);
        assert!(st.b[1..].iter().all(|b| *b == 0.0));
    }

    #[test]
    fn zero_time_is_linear() {
        let c = cfg(Dim::Three);
        let omega = geometric_datum(1.0, c.m_max);
        let st = solve_recursion(&omega, 1.0, 0.0, &c).unwrap();
        for k in 1..=c.m_max {
            assert!((st.b[k] - 2.0 * omega[k]).abs() <= 1e-15 * omega[k]);
        }
    }

    #[test]
    fn point_datum_weighted_sum() {
        let c = cfg(Dim::Two);
        let mut omega = vec![0.0; c.m_max + 1];
        omega[0] = 1.0;
        let p = persistence_time(1.0, &c).unwrap();
        let st = solve_recursion(&omega, 1.0, p.t, &c).unwrap();
        assert!(st.weighted_sum() <= 4.0 * c.c1);
    }

    #[test]
    fn constraint_error() {
        let c = cfg(Dim::Two);
        let omega = geometric_datum(1.0, c.m_max);
        match solve_recursion(&omega, 1.0, 1.0, &c) {
            Err(Error::Constraint(msg)) => assert!(msg.contains("self-term")),
            other => panic!("expected constraint error, got {other:?}"),
        }
    }

    #[test]
    fn raw_round_trip() {
        let c = MajorantConfig {
            s: 1.5,
            delta: 0.7,
            ..cfg(Dim::Two)
        };
        let omega = geometric_datum(2.0, c.m_max);
        let st = solve_recursion(&omega, 2.0, 0.0, &c).unwrap();
        let raw = st.raw(&st.omega);
        let back = weight_ladder(&raw, c.s, c.delta);
        for (a, b) in omega.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn weighted_sum_bound_and_truncation() {
        for d in [Dim::Two, Dim::Three] {
            let c = cfg(d);
            for m in [0.1, 1.0, 10.0] {
                let p = persistence_time(m, &c).unwrap();
                let omega = geometric_datum(m, c.m_max);
                let st = solve_recursion(&omega, m, p.t, &c).unwrap();
                assert!(st.weighted_sum() <= 4.0 * c.c1 * m, "{d:?} M={m}: {}", st.weighted_sum());
                let tr = truncation_stability_check(&st, c.m_max).unwrap();
                assert!(tr.monotone && tr.bounded);
                assert!(tr.tail.abs() < 1e-12);
                let rep = recursion_consistency_check(&st);
                assert!(rep.passed(), "{d:?} M={m}: {rep:?}");
            }
        }
    }

    #[test]
    fn gevrey_index_monotonicity() {
        let m = 1.0;
        let base = cfg(Dim::Two);
        let p = persistence_time(m, &base).unwrap();
        // same raw ladder, read at s = 1 and s = 2
        let omega1 = geometric_datum(m, base.m_max);
        let st1 = solve_recursion(&omega1, m, p.t, &base).unwrap();
        let raw = st1.raw(&omega1);
        let c2 = MajorantConfig { s: 2.0, ..base };
        let omega2 = weight_ladder(&raw, 2.0, 1.0);
        let st2 = solve_recursion(&omega2, m, p.t, &c2).unwrap();
        assert!(st2.weighted_sum() <= st1.weighted_sum());
    }

    #[test]
    fn comb_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = comb_inequality_check(4, 2, None, 3, 1000, &mut rng).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.max_ratio <= 1.0);
        let r = comb_inequality_check(5, 2, Some(1), 3, 200, &mut rng).unwrap();
        assert_eq!(r.violations, 0);
        // a single block: alpha = beta
        let r = comb_inequality_check(3, 3, None, 2, 50, &mut rng).unwrap();
        assert_eq!(r.violations, 0);
        assert!((r.max_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multi_index_counts() {
        for (dim, m) in [(1, 4), (2, 5), (3, 6)] {
            let n = multi_indices(dim, m).len();
            assert_eq!(n as u128, binom_u128(m + dim - 1, dim - 1));
        }
    }

    #[test]
    fn stirling_examples() {
        let rep = stirling_check(200).unwrap();
        assert!(rep.passed(1e-10), "{rep:?}");
        // k = 4: integral of xi^8 e^{-2 xi} over the line is 8!/2^8
        let cfg = QuadConfig::with_tolerances(0.0, 1e-13);
        let half = integrate(|x: f64| x.powi(8) * (-2.0 * x).exp(), 0.0, 80.0, &[4.0], &cfg).unwrap();
        assert!((2.0 * half.value - 40320.0 / 256.0).abs() < 1e-10 * 157.5);
    }

    #[test]
    fn consistency_on_random_ladders() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for d in [Dim::Two, Dim::Three] {
            let c = MajorantConfig { m_max: 20, ..cfg(d) };
            for _ in 0..100 {
                let omega: Vec<f64> = (0..=20).map(|k| rng.gen::<f64>() * 0.5f64.powi(k)).collect();
                let m = omega.iter().sum::<f64>();
                let p = persistence_time(m, &c).unwrap();
                let st = solve_recursion(&omega, m, p.t, &c).unwrap();
                assert!(recursion_consistency_check(&st).passed());
            }
        }
    }

    #[test]
    fn solve_recursion_monotone_in_omega() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = MajorantConfig { m_max: 15, ..cfg(Dim::Two) };
        for _ in 0..50 {
            let lo: Vec<f64> = (0..=15).map(|k| rng.gen::<f64>() * 0.5f64.powi(k)).collect();
            let hi: Vec<f64> = lo.iter().map(|x| x * (1.0 + rng.gen::<f64>())).collect();
            let m = hi.iter().sum::<f64>();
            let t = persistence_time(m, &c).unwrap().t;
            let a = solve_recursion(&lo, m, t, &c).unwrap();
            let b = solve_recursion(&hi, m, t, &c).unwrap();
            assert!(a.b.iter().zip(&b.b).all(|(x, y)| x <= y));
        }
    }
}
