//! Derivative ladders, Gevrey norms and Fourier-decay radius estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralField;

/// Largest supported ladder order.
pub const MAX_ORDER: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LadderMode {
    /// `L_m = sum_{|beta| = m} ||d^beta f||_{H^r}`.
    Isotropic,
    /// `L_m = ||d_j^m f||_{H^r}` for the given axis.
    Axis(usize),
}

/// `log L_m` for `m = 0..=m_max`; a vanishing term is stored as `-inf`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivativeLadder {
    pub mode: LadderMode,
    pub r: f64,
    pub m_max: usize,
    pub log_terms: Vec<f64>,
}

impl DerivativeLadder {
    /// Build directly from known values `L_m` (used for synthetic data).
    pub fn from_terms(mode: LadderMode, r: f64, terms: &[f64]) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Domain("ladder needs at least one term".into()));
        }
        if terms.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::Domain("ladder terms must be nonnegative".into()));
        }
        Ok(Self {
            mode,
            r,
            m_max: terms.len() - 1,
            log_terms: terms.iter().map(|t| t.ln()).collect(),
        })
    }

    pub fn terms(&self) -> Vec<f64> {
        self.log_terms.iter().map(|l| l.exp()).collect()
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Nonzero modes of a field: `(2 log|c| + r log(1 + |kappa|^2), log|kappa_j| per axis, nyquist flags)`.
struct ModeTable {
    weight: Vec<f64>,
    log_kappa: Vec<[f64; 3]>,
    nyquist: Vec<[bool; 3]>,
}

fn mode_table(field: &SpectralField, r: f64, coeff_floor: f64) -> ModeTable {
    let grid = field.grid();
    let cmax = field.coeffs().iter().fold(0.0f64, |m, c| m.max(c.norm()));
    let floor = coeff_floor * cmax;
    let mut t = ModeTable {
        weight: Vec::new(),
        log_kappa: Vec::new(),
        nyquist: Vec::new(),
    };
    for (flat, c) in field.coeffs().iter().enumerate() {
        let a = c.norm();
        if a == 0.0 || a <= floor {
            continue;
        }
        let k = grid.wavevector(flat);
        let mut lk = [f64::NEG_INFINITY; 3];
        let mut ny = [false; 3];
        let mut k2 = 0.0;
        for ax in 0..grid.dim {
            let kap = grid.kappa(k[ax]);
            k2 += kap * kap;
            lk[ax] = kap.abs().ln();
            ny[ax] = k[ax] == -(grid.n as i64) / 2;
        }
        t.weight.push(2.0 * a.ln() + r * (1.0 + k2).ln());
        t.log_kappa.push(lk);
        t.nyquist.push(ny);
    }
    t
}

/// `log ||d^beta f||_{H^r}` with odd derivatives killing Nyquist modes.
fn log_derivative_norm(table: &ModeTable, beta: &[usize]) -> f64 {
    let terms = table.weight.iter().enumerate().map(|(i, w)| {
        let mut s = *w;
        for (ax, &b) in beta.iter().enumerate() {
            if b == 0 {
                continue;
            }
            if b % 2 == 1 && table.nyquist[i][ax] {
                return f64::NEG_INFINITY;
            }
            s += 2.0 * b as f64 * table.log_kappa[i][ax];
        }
        s
    });
    0.5 * log_sum_exp(terms)
}

fn multi_indices(dim: usize, m: usize) -> Vec<Vec<usize>> {
    match dim {
        1 => vec![vec![m]],
        2 => (0..=m).map(|a| vec![a, m - a]).collect(),
        _ => {
            let mut out = Vec::new();
            for a in 0..=m {
                for b in 0..=(m - a) {
                    out.push(vec![a, b, m - a - b]);
                }
            }
            out
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LadderConfig {
    /// Coefficients at or below this fraction of the largest one are dropped.
    ///
    /// The default 0 keeps every mode, which is right for fields built from
    /// exact coefficients. Sampled fields carry roundoff near 1e-16 that the
    /// `|k|^m` multipliers amplify; a floor around 1e-13 removes it, at the
    /// cost of truncating genuinely small modes.
    pub coeff_floor: f64,
}

/// Compute `L_0..L_{m_max}` in the log domain.
pub fn build_ladder(field: &SpectralField, mode: LadderMode, r: f64, m_max: usize) -> Result<DerivativeLadder> {
    build_ladder_with(field, mode, r, m_max, &LadderConfig::default())
}

pub fn build_ladder_with(
    field: &SpectralField,
    mode: LadderMode,
    r: f64,
    m_max: usize,
    cfg: &LadderConfig,
) -> Result<DerivativeLadder> {
    let dim = field.dim();
    if m_max > MAX_ORDER {
        return Err(Error::Domain(format!("ladder order {m_max} exceeds the supported maximum {MAX_ORDER}")));
    }
    if !(r > dim as f64 / 2.0) {
        return Err(Error::Domain(format!("Sobolev index r = {r} must exceed d/2 = {}", dim as f64 / 2.0)));
    }
    if let LadderMode::Axis(j) = mode {
        if j >= dim {
            return Err(Error::Domain(format!("axis {j} out of range for a {dim}-D field")));
        }
    }
    let table = mode_table(field, r, cfg.coeff_floor);
    let log_terms: Vec<f64> = (0..=m_max)
        .into_par_iter()
        .map(|m| match mode {
            LadderMode::Axis(j) => {
                let mut beta = vec![0; dim];
                beta[j] = m;
                log_derivative_norm(&table, &beta)
            }
            LadderMode::Isotropic => {
                let parts: Vec<f64> = multi_indices(dim, m)
                    .iter()
                    .map(|b| log_derivative_norm(&table, b))
                    .collect();
                log_sum_exp(parts.into_iter())
            }
        })
        .collect();
    if let Some(m) = log_terms.iter().position(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::NumericRange(format!("ladder term of order {m} is not finite")));
    }
    Ok(DerivativeLadder {
        mode,
        r,
        m_max,
        log_terms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Convergent { value: f64 },
    Divergent,
    Inconclusive,
}

impl Verdict {
    pub fn is_convergent(&self) -> bool {
        matches!(self, Verdict::Convergent { .. })
    }
    pub fn is_divergent(&self) -> bool {
        matches!(self, Verdict::Divergent)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GevreyEstimate {
    pub s: f64,
    pub delta: f64,
    /// `log(L_m delta^m / m!^s)`.
    pub log_terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub verdict: Verdict,
    /// Largest consecutive-term ratio over the final window.
    pub tail_ratio: f64,
    /// Geometric tail bound `T_last q / (1 - q)` when convergent, else infinity.
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GevreyConfig {
    pub window: usize,
}

impl Default for GevreyConfig {
    fn default() -> Self {
        Self { window: 5 }
    }
}

pub fn gevrey_norm(ladder: &DerivativeLadder, s: f64, delta: f64) -> Result<GevreyEstimate> {
    gevrey_norm_with(ladder, s, delta, &GevreyConfig::default())
}

/// Partial sums of `sum_m L_m delta^m / m!^s` with a windowed verdict.
pub fn gevrey_norm_with(ladder: &DerivativeLadder, s: f64, delta: f64, cfg: &GevreyConfig) -> Result<GevreyEstimate> {
    if !(s >= 1.0) {
        return Err(Error::Domain(format!("Gevrey index must be >= 1, got {s}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Domain(format!("radius must be positive, got {delta}")));
    }
    if cfg.window == 0 || ladder.log_terms.len() < cfg.window + 1 {
        return Err(Error::Domain(format!(
            "ladder of {} terms too short for a window of {}",
            ladder.log_terms.len(),
            cfg.window
        )));
    }
    let mut log_fact = 0.0;
    let mut log_terms = Vec::with_capacity(ladder.log_terms.len());
    for (m, l) in ladder.log_terms.iter().enumerate() {
        if m > 0 {
            log_fact += (m as f64).ln();
        }
        log_terms.push(l + m as f64 * delta.ln() - s * log_fact);
    }
    let mut partial_sums = Vec::with_capacity(log_terms.len());
    let mut acc = f64::NEG_INFINITY;
    for lt in &log_terms {
        acc = log_sum_exp([acc, *lt].into_iter());
        partial_sums.push(acc.exp());
    }

    let last = log_terms.len() - 1;
    let window = &log_terms[last - cfg.window..];
    let ratios: Vec<f64> = window.windows(2).map(|w| (w[1] - w[0]).exp()).collect();
    let total = *partial_sums.last().expect("nonempty");
    let (verdict, tail_ratio, tail_bound) = if log_terms[last] == f64::NEG_INFINITY {
        (Verdict::Convergent { value: total }, 0.0, 0.0)
    } else if ratios.iter().all(|q| *q > 1.0) {
        (Verdict::Divergent, ratios.iter().copied().fold(f64::INFINITY, f64::min), f64::INFINITY)
    } else if ratios.iter().all(|q| *q < 1.0) && total.is_finite() {
        let q = ratios.iter().copied().fold(0.0, f64::max);
        let bound = log_terms[last].exp() * q / (1.0 - q);
        (Verdict::Convergent { value: total }, q, bound)
    } else {
        (Verdict::Inconclusive, *ratios.last().unwrap_or(&f64::NAN), f64::INFINITY)
    };
    Ok(GevreyEstimate {
        s,
        delta,
        log_terms,
        partial_sums,
        verdict,
        tail_ratio,
        tail_bound,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusEstimate {
    pub delta_hat: f64,
    pub k_window: [usize; 2],
    pub r_squared: f64,
    /// Max coefficient modulus per shell, indexed by shell number.
    pub shell_amplitudes: Vec<f64>,
    pub shells_used: usize,
    pub reliable: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct RadiusConfig {
    pub k_lo: usize,
    /// Upper window edge as a fraction of the dealiasing cutoff `n/3`.
    pub hi_fraction: f64,
    /// Shells below `noise_floor * max amplitude` are treated as roundoff.
    pub noise_floor: f64,
    pub min_window: usize,
    pub min_shells: usize,
    pub min_r_squared: f64,
}

impl Default for RadiusConfig {
    fn default() -> Self {
        Self {
            k_lo: 8,
            hi_fraction: 0.8,
            noise_floor: 2e-15,
            min_window: 16,
            min_shells: 8,
            min_r_squared: 0.95,
        }
    }
}

pub fn estimate_radius(field: &SpectralField, axis: Option<usize>) -> Result<RadiusEstimate> {
    estimate_radius_with(field, axis, &RadiusConfig::default())
}

/// Fit `log A_k ~ a - (pi delta / L) k` to shell-max amplitudes.
///
/// With `axis = None` shells are `|k|_1 = sum_j |k_j|`, so the rate is the
/// width of the largest complex polystrip `sum_j |Im z_j| < delta`. With
/// `axis = Some(j)` shells are `|k_j|`, maximized over the other indices.
pub fn estimate_radius_with(field: &SpectralField, axis: Option<usize>, cfg: &RadiusConfig) -> Result<RadiusEstimate> {
    let grid = field.grid();
    if let Some(j) = axis {
        if j >= grid.dim {
            return Err(Error::Domain(format!("axis {j} out of range for a {}-D field", grid.dim)));
        }
    }
    let half = grid.n / 2;
    let nshells = match axis {
        None => grid.dim * half + 1,
        Some(_) => half + 1,
    };
    let mut amp = vec![0.0f64; nshells];
    for (flat, c) in field.coeffs().iter().enumerate() {
        let k = grid.wavevector(flat);
        if (0..grid.dim).any(|ax| k[ax] == -(half as i64)) {
            continue;
        }
        let shell = match axis {
            None => (0..grid.dim).map(|ax| k[ax].unsigned_abs() as usize).sum(),
            Some(j) => k[j].unsigned_abs() as usize,
        };
        amp[shell] = amp[shell].max(c.norm());
    }
    let amax = amp.iter().copied().fold(0.0, f64::max);
    let floor = cfg.noise_floor * amax;
    let cap = ((cfg.hi_fraction * grid.n as f64 / 3.0).floor() as usize).min(nshells - 1);

    let unreliable = |k_window: [usize; 2], amp: Vec<f64>| RadiusEstimate {
        delta_hat: 0.0,
        k_window,
        r_squared: 0.0,
        shell_amplitudes: amp,
        shells_used: 0,
        reliable: false,
    };
    if amax == 0.0 || cap < 1 {
        return Ok(unreliable([cfg.k_lo, cap], amp));
    }
    let mut k_lo = cfg.k_lo.min(cap);
    // Last resolved shell; isolated empty shells (e.g. odd modes of an
    // even-frequency field) below it are skipped, not treated as the end.
    let k_hi = (1..=cap).rev().find(|&k| amp[k] > floor).unwrap_or(1);
    if k_hi + 1 < k_lo + cfg.min_window {
        k_lo = k_hi.saturating_sub(cfg.min_window - 1).max(1);
    }
    let pts: Vec<(f64, f64)> = (k_lo..=k_hi)
        .filter(|&k| amp[k] > floor)
        .map(|k| (k as f64, amp[k].ln()))
        .collect();
    if pts.len() < cfg.min_shells {
        return Ok(unreliable([k_lo, k_hi], amp));
    }
    let npts = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / npts;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / npts;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 0.0 };
    let delta_hat = -slope * grid.half_width / std::f64::consts::PI;
    let reliable = r_squared >= cfg.min_r_squared && delta_hat > 0.0;
    Ok(RadiusEstimate {
        delta_hat,
        k_window: [k_lo, k_hi],
        r_squared,
        shell_amplitudes: amp,
        shells_used: pts.len(),
        reliable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn exp_decay(n: usize, rate: f64) -> SpectralField {
        let grid = Grid::new(1, n).unwrap();
        SpectralField::from_coeff_fn(grid, |k| Complex64::new((-rate * k[0].abs() as f64).exp(), 0.0)).unwrap()
    }

    #[test]
    fn constant_field_ladder() {
        let grid = Grid::new(1, 16).unwrap();
        let f = SpectralField::from_fn(grid, |_| -2.0).unwrap();
        let l = build_ladder(&f, LadderMode::Axis(0), 2.0, 10).unwrap();
        assert!((l.log_terms[0].exp() - 2.0).abs() < 1e-13);
        assert!(l.log_terms[1..].iter().all(|t| *t == f64::NEG_INFINITY));
        let e = gevrey_norm(&l, 1.5, 3.0).unwrap();
        match e.verdict {
            Verdict::Convergent { value } => assert!((value - 2.0).abs() < 1e-13),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn sine_ladder_and_norm() {
        let grid = Grid::new(2, 16).unwrap();
        let f = SpectralField::from_fn(grid, |x| x[0].sin()).unwrap();
        let cfg = LadderConfig { coeff_floor: 1e-13 };
        let l = build_ladder_with(&f, LadderMode::Axis(0), 2.0, 40, &cfg).unwrap();
        for t in l.terms() {
            assert!((t - 2f64.sqrt()).abs() < 1e-12);
        }
        let delta = 1.3;
        let e = gevrey_norm(&l, 1.0, delta).unwrap();
        let Verdict::Convergent { value } = e.verdict else {
            panic!("expected convergence")
        };
        assert!((value - 2f64.sqrt() * delta.exp()).abs() <= e.tail_bound + 1e-12);
        // constant in x_2 (built from exact coefficients, sampling leaves roundoff)
        let exact = SpectralField::from_coeff_fn(grid, |k| match (k[0], k[1]) {
            (1, 0) => Complex64::new(0.0, -0.5),
            (-1, 0) => Complex64::new(0.0, 0.5),
            _ => Complex64::new(0.0, 0.0),
        })
        .unwrap();
        let l2 = build_ladder(&exact, LadderMode::Axis(1), 2.0, 5).unwrap();
        assert!(l2.log_terms[1..].iter().all(|t| *t == f64::NEG_INFINITY));
    }

    #[test]
    fn single_mode_axis_ladder_scales_by_k() {
        let grid = Grid::new(2, 32).unwrap();
        let f = SpectralField::from_fn(grid, |x| (3.0 * x[0] - 2.0 * x[1]).cos()).unwrap();
        let l = build_ladder(&f, LadderMode::Axis(0), 2.0, 12).unwrap();
        for m in 0..=12 {
            let expect = l.log_terms[0] + m as f64 * 3f64.ln();
            assert!((l.log_terms[m] - expect).abs() < 1e-12);
        }
        // isotropic: sum over beta of 3^{b0} 2^{b1} L_0 = (3^{m+1} - 2^{m+1}) L_0
        let li = build_ladder(&f, LadderMode::Isotropic, 2.0, 6).unwrap();
        for m in 0..=6 {
            let factor = 3f64.powi(m as i32 + 1) - 2f64.powi(m as i32 + 1);
            assert!((li.log_terms[m] - (li.log_terms[0] + factor.ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_decay_ladder_ratio_oracle() {
        let f = exp_decay(128, 1.0);
        let l = build_ladder(&f, LadderMode::Axis(0), 2.0, 30).unwrap();
        for m in [0usize, 7, 30] {
            let mut s = 0.0;
            for k in -63i64..=63 {
                let kk = k as f64;
                s += (1.0 + kk * kk).powi(2) * kk.abs().powi(2 * m as i32) * (-2.0 * kk.abs()).exp();
            }
            if m % 2 == 0 {
                s += (1.0 + 64f64.powi(2)).powi(2) * 64f64.powi(2 * m as i32) * (-128f64).exp();
            }
            let oracle = 0.5 * s.ln();
            assert!((l.log_terms[m] - oracle).abs() < 1e-12 * oracle.abs().max(1.0));
        }
        let r: Vec<f64> = l.log_terms.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(r.windows(2).all(|w| w[1] >= w[0] - 1e-12), "log L_m not convex-increasing");
    }

    #[test]
    fn rejects_bad_parameters() {
        let f = exp_decay(32, 1.0);
        assert!(build_ladder(&f, LadderMode::Axis(0), 0.4, 5).is_err());
        assert!(build_ladder(&f, LadderMode::Axis(1), 2.0, 5).is_err());
        assert!(build_ladder(&f, LadderMode::Axis(0), 2.0, 61).is_err());
        let l = build_ladder(&f, LadderMode::Axis(0), 2.0, 10).unwrap();
        assert!(matches!(gevrey_norm(&l, 0.5, 1.0), Err(Error::Domain(_))));
        assert!(matches!(gevrey_norm(&l, 1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn verdict_flips_around_decay_rate() {
        let delta0 = 0.7;
        let f = exp_decay(1024, delta0);
        let l = build_ladder(&f, LadderMode::Axis(0), 2.0, 60).unwrap();
        assert!(gevrey_norm(&l, 1.0, 0.9 * delta0).unwrap().verdict.is_convergent());
        assert!(gevrey_norm(&l, 1.0, 1.1 * delta0).unwrap().verdict.is_divergent());
        assert!(gevrey_norm(&l, 2.0, 1.1 * delta0).unwrap().verdict.is_convergent());
    }

    #[test]
    fn radius_of_exponential_decay() {
        let f = exp_decay(256, 0.5);
        let r = estimate_radius(&f, None).unwrap();
        assert!(r.reliable);
        assert!((r.delta_hat - 0.5).abs() < 0.005, "{r:?}");
    }

    #[test]
    fn radius_with_empty_odd_shells() {
        let grid = Grid::new(1, 256).unwrap();
        // e^{-|k|} on even k only, sampled (so the tail sits on roundoff)
        let exact = SpectralField::from_coeff_fn(grid, |k| {
            let c = if k[0] % 2 == 0 { (-(k[0].abs() as f64)).exp() } else { 0.0 };
            Complex64::new(c, 0.0)
        })
        .unwrap();
        let f = SpectralField::from_samples(grid, exact.values().to_vec()).unwrap();
        let r = estimate_radius(&f, None).unwrap();
        assert!(r.reliable, "{r:?}");
        assert!((r.delta_hat - 1.0).abs() < 0.02, "{r:?}");
    }

    #[test]
    fn band_limited_field_is_unreliable() {
        let grid = Grid::new(1, 128).unwrap();
        let f = SpectralField::from_fn(grid, |x| x[0].sin()).unwrap();
        assert!(!estimate_radius(&f, None).unwrap().reliable);
    }

    #[test]
    fn radius_on_rescaled_box() {
        let grid = Grid::with_half_width(1, 256, 2.0 * std::f64::consts::PI).unwrap();
        // f(x) = sum_k e^{-0.6 |kappa|} e^{i kappa x}, kappa = k / 2
        let f = SpectralField::from_coeff_fn(grid, |k| Complex64::new((-0.3 * k[0].abs() as f64).exp(), 0.0)).unwrap();
        let r = estimate_radius(&f, Some(0)).unwrap();
        assert!((r.delta_hat - 0.6).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn norm_is_homogeneous_and_monotone_in_delta(c in 0.1f64..10.0, d1 in 0.05f64..0.5, d2 in 0.05f64..0.5) {
            let f = exp_decay(256, 0.8);
            let g = f.scaled(c);
            let lf = build_ladder(&f, LadderMode::Axis(0), 2.0, 40).unwrap();
            let lg = build_ladder(&g, LadderMode::Axis(0), 2.0, 40).unwrap();
            let ef = gevrey_norm(&lf, 1.0, d1).unwrap();
            let eg = gevrey_norm(&lg, 1.0, d1).unwrap();
            if let (Verdict::Convergent { value: a }, Verdict::Convergent { value: b }) = (ef.verdict, eg.verdict) {
                prop_assert!((b - c * a).abs() <= 1e-10 * b);
            }
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            let a = gevrey_norm(&lf, 1.0, lo).unwrap();
            let b = gevrey_norm(&lf, 1.0, hi).unwrap();
            for (x, y) in a.partial_sums.iter().zip(&b.partial_sums) {
                prop_assert!(x <= y);
            }
            prop_assert!(a.partial_sums.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
