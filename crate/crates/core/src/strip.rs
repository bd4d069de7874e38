//! Concentrated vortex on a strip: the vorticity `c0 k^2 exp(-k^2 |x|^2) psi(x2)`
//! is supported in `|x2| < 1`. The induced rotation uncovers the strip edge
//! near `(-1, 1)` and covers it near `(1, 1)`.
//!
//! Near the probe points the vorticity is of size `exp(-2 k^2)`, far below
//! anything a grid solution resolves. The probes therefore transport the
//! closed-form datum along back-traced trajectories (vorticity is conserved
//! along particle paths) and work with `log omega`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler2d::{EulerState2D, SolverConfig};
use crate::quadrature::{integrate, QuadConfig};
use crate::spectral::{Grid, SpectralField};

/// Largest admissible boundary value of the Gaussian factor.
pub const TAIL_TOLERANCE: f64 = 1e-10;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log S(tau)` for the smooth step `S = 1 / (1 + exp(1/tau - 1/(1-tau)))`.
fn log_step(tau: f64) -> f64 {
    if tau <= 0.0 {
        f64::NEG_INFINITY
    } else if tau >= 1.0 {
        0.0
    } else {
        -softplus(1.0 / tau - 1.0 / (1.0 - tau))
    }
}

fn step_integral(q: f64) -> f64 {
    let cfg = QuadConfig::with_tolerances(1e-15, 1e-13);
    integrate(|t: f64| log_step(t.powf(q)).exp(), 0.0, 1.0, &[], &cfg)
        .expect("smooth step integral")
        .value
}

/// Exponent `q` of the bump profile, chosen so that `int psi = 1`.
pub fn bump_exponent() -> f64 {
    static Q: OnceLock<f64> = OnceLock::new();
    *Q.get_or_init(|| {
        // int psi = 1/2 + 3/2 int_0^1 S(tau^q) dtau
        let (mut lo, mut hi) = (1.0f64, 8.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if step_integral(mid) > 1.0 / 3.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    })
}

/// `log psi(y)`; `-inf` off the support `|y| < 1`.
pub fn log_bump(y: f64) -> f64 {
    let a = y.abs();
    if a >= 1.0 {
        f64::NEG_INFINITY
    } else if a <= 0.25 {
        0.0
    } else {
        log_step(((1.0 - a) / 0.75).powf(bump_exponent()))
    }
}

/// Smooth bump: 1 on `[-1/4, 1/4]`, positive on `(-1, 1)`, zero elsewhere,
/// unit integral.
pub fn bump(y: f64) -> f64 {
    log_bump(y).exp()
}

/// Normalization making `int omega^(k) -> 1`.
pub fn default_c0() -> f64 {
    1.0 / std::f64::consts::PI
}

/// `log omega^(k)(x)`.
pub fn strip_log_vorticity(k: f64, c0: f64, x: &[f64; 2]) -> f64 {
    (c0 * k * k).ln() - k * k * (x[0] * x[0] + x[1] * x[1]) + log_bump(x[1])
}

fn validate(k: u32, c0: f64, half_width: f64) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("strip vorticity needs k >= 1".into()));
    }
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::Config(format!("c0 must be positive, got {c0}")));
    }
    if !(half_width > 1.0) {
        return Err(Error::Config(format!(
            "box half-width {half_width} does not contain the strip |x2| < 1"
        )));
    }
    let kf = k as f64;
    let tail = c0 * kf * kf * (-kf * kf * half_width * half_width).exp();
    if tail > TAIL_TOLERANCE {
        return Err(Error::Config(format!(
            "Gaussian tail {tail:.3e} at the box edge exceeds {TAIL_TOLERANCE:e}; enlarge the box"
        )));
    }
    Ok(())
}

/// Samples `omega^(k)` on the `n x n` periodic box of half-width `half_width`.
pub fn strip_vorticity(k: u32, c0: f64, half_width: f64, n: usize) -> Result<SpectralField> {
    validate(k, c0, half_width)?;
    let grid = Grid::with_half_width(2, n, half_width)?;
    let kf = k as f64;
    SpectralField::from_fn(grid, |x| strip_log_vorticity(kf, c0, &[x[0], x[1]]).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripConfig {
    pub k: u32,
    pub c0: f64,
    pub half_width: f64,
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub probe_radius: f64,
    pub patch_half_width: f64,
    pub centers: [[f64; 2]; 2],
}

impl Default for StripConfig {
    fn default() -> Self {
        Self {
            k: 16,
            c0: default_c0(),
            half_width: 4.0 * std::f64::consts::PI,
            n: 2048,
            dt: 2.5e-3,
            t_final: 0.05,
            probe_radius: 0.05,
            patch_half_width: 0.3,
            centers: [[-1.0, 1.0], [1.0, 1.0]],
        }
    }
}

impl StripConfig {
    pub fn steps(&self) -> Result<usize> {
        let s = self.t_final / self.dt;
        let r = s.round();
        if !(self.dt > 0.0) || (s - r).abs() > 1e-9 * s.max(1.0) || r < 2.0 || (r as usize) % 2 != 0 {
            return Err(Error::Config(format!(
                "t_final / dt must be a positive even integer, got {s}"
            )));
        }
        Ok(r as usize)
    }

    pub fn validate(&self) -> Result<()> {
        validate(self.k, self.c0, self.half_width)?;
        self.steps()?;
        if !(self.probe_radius > 0.0 && self.patch_half_width > 2.0 * self.probe_radius) {
            return Err(Error::Config("patch must be wider than twice the probe radius".into()));
        }
        Ok(())
    }
}

/// Grid velocity samples on a square patch.
#[derive(Debug, Clone)]
struct Patch {
    i0: usize,
    j0: usize,
    m: usize,
    u1: Vec<f64>,
    u2: Vec<f64>,
}

const STENCIL: usize = 8;

fn lagrange_weights(s: f64, w: &mut [f64; STENCIL]) {
    // nodes 0..STENCIL, evaluation at s
    for (j, wj) in w.iter_mut().enumerate() {
        let mut p = 1.0;
        for m in 0..STENCIL {
            if m != j {
                p *= (s - m as f64) / (j as f64 - m as f64);
            }
        }
        *wj = p;
    }
}

/// Velocity samples around the probe centers at every recorded step.
#[derive(Debug, Clone)]
pub struct StripHistory {
    grid: Grid,
    times: Vec<f64>,
    patches: Vec<Vec<Patch>>,
}

impl StripHistory {
    fn new(grid: Grid) -> Self {
        Self {
            grid,
            times: Vec::new(),
            patches: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn record(&mut self, state: &mut EulerState2D, centers: &[[f64; 2]], half: f64) {
        let (u1, u2) = state.velocity_samples();
        let n = self.grid.n;
        let h = self.grid.spacing();
        let half = half + STENCIL as f64 * h;
        let m = (2.0 * half / h).ceil() as usize + 1;
        let patches = centers
            .iter()
            .map(|c| {
                let i0 = ((c[0] - half + self.grid.half_width) / h).floor() as usize;
                let j0 = ((c[1] - half + self.grid.half_width) / h).floor() as usize;
                let mut p1 = Vec::with_capacity(m * m);
                let mut p2 = Vec::with_capacity(m * m);
                for a in 0..m {
                    for b in 0..m {
                        let f = ((i0 + a) % n) * n + (j0 + b) % n;
                        p1.push(u1[f]);
                        p2.push(u2[f]);
                    }
                }
                Patch { i0, j0, m, u1: p1, u2: p2 }
            })
            .collect();
        self.times.push(state.time());
        self.patches.push(patches);
    }

    /// Interpolated velocity at `x` from record `idx`.
    fn velocity(&self, idx: usize, x: &[f64; 2]) -> Result<[f64; 2]> {
        let h = self.grid.spacing();
        for p in &self.patches[idx] {
            let s1 = (x[0] + self.grid.half_width) / h - p.i0 as f64;
            let s2 = (x[1] + self.grid.half_width) / h - p.j0 as f64;
            let b1 = s1.floor() as i64 - (STENCIL as i64 / 2 - 1);
            let b2 = s2.floor() as i64 - (STENCIL as i64 / 2 - 1);
            if b1 < 0 || b2 < 0 || b1 as usize + STENCIL > p.m || b2 as usize + STENCIL > p.m {
                continue;
            }
            let (b1, b2) = (b1 as usize, b2 as usize);
            let mut w1 = [0.0; STENCIL];
            let mut w2 = [0.0; STENCIL];
            lagrange_weights(s1 - b1 as f64, &mut w1);
            lagrange_weights(s2 - b2 as f64, &mut w2);
            let mut u = [0.0; 2];
            for a in 0..STENCIL {
                for b in 0..STENCIL {
                    let f = (b1 + a) * p.m + b2 + b;
                    let w = w1[a] * w2[b];
                    u[0] += w * p.u1[f];
                    u[1] += w * p.u2[f];
                }
            }
            return Ok(u);
        }
        Err(Error::Domain(format!(
            "point ({:.4}, {:.4}) left the recorded velocity patches",
            x[0], x[1]
        )))
    }

    /// Position at record 0 of the particle found at `x` at record `idx`
    /// (RK4 over pairs of records, `idx` even).
    pub fn departure_point(&self, idx: usize, x: &[f64; 2]) -> Result<[f64; 2]> {
        if idx % 2 != 0 || idx >= self.len() {
            return Err(Error::Domain(format!("record index {idx} must be even and < {}", self.len())));
        }
        let mut p = *x;
        let mut i = idx;
        while i >= 2 {
            let h = self.times[i] - self.times[i - 2];
            let k1 = self.velocity(i, &p)?;
            let q = [p[0] - 0.5 * h * k1[0], p[1] - 0.5 * h * k1[1]];
            let k2 = self.velocity(i - 1, &q)?;
            let q = [p[0] - 0.5 * h * k2[0], p[1] - 0.5 * h * k2[1]];
            let k3 = self.velocity(i - 1, &q)?;
            let q = [p[0] - h * k3[0], p[1] - h * k3[1]];
            let k4 = self.velocity(i - 2, &q)?;
            for c in 0..2 {
                p[c] -= h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            i -= 2;
        }
        Ok(p)
    }
}

/// Probe values at one record. `log_*` are natural logs of the max of
/// `omega` over the disc (`-inf` when the disc sees no vorticity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub t: f64,
    pub radius: f64,
    pub log_left: f64,
    pub log_right: f64,
    pub left: f64,
    pub right: f64,
}

/// Disc sample points: center plus 8 rings of 32 points.
pub fn disc_points(center: &[f64; 2], radius: f64) -> Vec<[f64; 2]> {
    let mut pts = vec![*center];
    for j in 1..=8 {
        let r = radius * j as f64 / 8.0;
        for a in 0..32 {
            let th = 2.0 * std::f64::consts::PI * a as f64 / 32.0;
            pts.push([center[0] + r * th.cos(), center[1] + r * th.sin()]);
        }
    }
    pts
}

/// Max of the transported datum over discs around the two centers.
pub fn strip_rotation_probe(
    history: &StripHistory,
    idx: usize,
    cfg: &StripConfig,
    radius: f64,
) -> Result<ProbeRecord> {
    let k = cfg.k as f64;
    let mut logs = [f64::NEG_INFINITY; 2];
    for (side, c) in cfg.centers.iter().enumerate() {
        for x in disc_points(c, radius) {
            let a = history.departure_point(idx, &x)?;
            logs[side] = logs[side].max(strip_log_vorticity(k, cfg.c0, &a));
        }
    }
    Ok(ProbeRecord {
        t: history.times[idx],
        radius,
        log_left: logs[0],
        log_right: logs[1],
        left: logs[0].exp(),
        right: logs[1].exp(),
    })
}

/// Max |omega| over grid samples inside a disc.
pub fn grid_disc_max(field: &SpectralField, center: &[f64; 2], radius: f64) -> f64 {
    let g = field.grid();
    let mut m = 0.0f64;
    for (flat, v) in field.values().iter().enumerate() {
        let x = g.point(flat);
        if (x[0] - center[0]).hypot(x[1] - center[1]) <= radius {
            m = m.max(v.abs());
        }
    }
    m
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StripRun {
    pub config: StripConfig,
    pub initial: ProbeRecord,
    pub final_probe: ProbeRecord,
    /// Probe after running forward then backward, traced through both legs.
    pub reversed: ProbeRecord,
    /// Probes at the small radius used for the exact-zero signature.
    pub small_initial: ProbeRecord,
    pub small_final: ProbeRecord,
    /// Relative L2 distance of the reversed vorticity to the initial one.
    pub field_reversal_error: f64,
    pub energy_drift: f64,
    pub max_cfl: f64,
    /// Grid-sample maxima `(left, right)` of the solver field at t = 0 and t_final.
    pub eulerian_initial: [f64; 2],
    pub eulerian_final: [f64; 2],
    pub series: Vec<ProbeRecord>,
}

/// Radius of the secondary probe; small enough that the whole left disc is
/// uncovered by the final time.
pub const SMALL_PROBE_RADIUS: f64 = 0.002;

pub fn run_strip(cfg: &StripConfig) -> Result<StripRun> {
    cfg.validate()?;
    let steps = cfg.steps()?;
    let omega0 = strip_vorticity(cfg.k, cfg.c0, cfg.half_width, cfg.n)?;
    let mut scfg = SolverConfig::new(cfg.n, cfg.dt);
    scfg.half_width = cfg.half_width;
    let mut state = EulerState2D::new(&omega0, scfg)?;
    let grid = *state.grid();
    let e0 = state.energy();
    let eulerian_initial = [
        grid_disc_max(&omega0, &cfg.centers[0], cfg.probe_radius),
        grid_disc_max(&omega0, &cfg.centers[1], cfg.probe_radius),
    ];
    let w_init = state.omega()?;
    drop(omega0);

    let mut hist = StripHistory::new(grid);
    hist.record(&mut state, &cfg.centers, cfg.patch_half_width);
    for _ in 0..steps {
        state.advance(cfg.dt)?;
        hist.record(&mut state, &cfg.centers, cfg.patch_half_width);
    }
    let energy_drift = ((state.energy() - e0) / e0).abs();
    let w_final = state.omega()?;
    let eulerian_final = [
        grid_disc_max(&w_final, &cfg.centers[0], cfg.probe_radius),
        grid_disc_max(&w_final, &cfg.centers[1], cfg.probe_radius),
    ];
    drop(w_final);

    let series = (0..=steps)
        .step_by(2)
        .map(|i| strip_rotation_probe(&hist, i, cfg, cfg.probe_radius))
        .collect::<Result<Vec<_>>>()?;
    let initial = series[0];
    let final_probe = *series.last().expect("nonempty series");
    let small_initial = strip_rotation_probe(&hist, 0, cfg, SMALL_PROBE_RADIUS)?;
    let small_final = strip_rotation_probe(&hist, steps, cfg, SMALL_PROBE_RADIUS)?;

    for _ in 0..steps {
        state.advance(-cfg.dt)?;
        hist.record(&mut state, &cfg.centers, cfg.patch_half_width);
    }
    let reversed = strip_rotation_probe(&hist, 2 * steps, cfg, cfg.probe_radius)?;
    let w_back = state.omega()?;
    let field_reversal_error = w_back.linear_combination(1.0, &w_init, -1.0)?.l2_norm() / w_init.l2_norm();

    Ok(StripRun {
        config: cfg.clone(),
        initial,
        final_probe,
        reversed,
        small_initial,
        small_final,
        field_reversal_error,
        energy_drift,
        max_cfl: state.max_cfl(),
        eulerian_initial,
        eulerian_final,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::euler2d::biot_savart;
    use crate::spectral::PointEvaluator;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn bump_properties() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(0.25), 1.0);
        assert_eq!(bump(-0.2), 1.0);
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(bump(-1.3), 0.0);
        for i in 1..1000 {
            let y = 0.25 + 0.75 * i as f64 / 1000.0;
            let v = bump(y);
            assert!(v > 0.0 || log_bump(y) > f64::NEG_INFINITY);
            assert!(v <= 1.0);
            assert!(bump(y + 1e-4) <= v);
        }
        let total = simpson(bump, -1.0, 1.0, 200_000);
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn support_and_tail_check() {
        let w = strip_vorticity(4, default_c0(), 4.0 * std::f64::consts::PI, 128).unwrap();
        let g = *w.grid();
        for (flat, v) in w.values().iter().enumerate() {
            if g.point(flat)[1].abs() >= 1.0 {
                assert_eq!(*v, 0.0);
            }
        }
        assert!(matches!(strip_vorticity(1, default_c0(), std::f64::consts::PI, 64), Err(Error::Config(_))));
        assert!(matches!(strip_vorticity(16, default_c0(), 0.9, 64), Err(Error::Config(_))));
        assert!(matches!(strip_vorticity(0, default_c0(), 10.0, 64), Err(Error::Config(_))));
    }

    #[test]
    fn total_vorticity_tends_to_one() {
        // int omega = c0 k sqrt(pi) int exp(-k^2 y^2) psi(y) dy
        let k = 16.0;
        let inner = simpson(|y| (-k * k * y * y).exp() * bump(y), -1.0, 1.0, 100_000);
        let total = default_c0() * k * std::f64::consts::PI.sqrt() * inner;
        assert!((total - 1.0).abs() < 1e-3, "{total}");

        let w = strip_vorticity(16, default_c0(), 4.0 * std::f64::consts::PI, 1024).unwrap();
        let area = (8.0 * std::f64::consts::PI).powi(2);
        assert!((w.mean() * area - total).abs() < 1e-8);
    }

    #[test]
    fn induced_velocity_signs() {
        let l = 4.0 * std::f64::consts::PI;
        let w = strip_vorticity(16, default_c0(), l, 512).unwrap();
        let w = w.linear_combination(1.0, &SpectralField::from_fn(*w.grid(), |_| 1.0).unwrap(), -w.mean()).unwrap();
        let (u1, u2) = biot_savart(&w).unwrap();
        let ev = PointEvaluator::new(&[&u1, &u2], 1e-14).unwrap();
        let mut out = [0.0; 2];
        // point-vortex oracle: u = (-x2, x1) / (2 pi |x|^2)
        for (x, sgn) in [([1.0, 1.0], 1.0), ([-1.0, 1.0], -1.0)] {
            ev.eval(&x, &mut out);
            let v = 1.0 / (4.0 * std::f64::consts::PI);
            assert!(sgn * out[1] > 0.0);
            assert!((out[1] - sgn * v).abs() < 0.05 * v, "{out:?}");
            assert!((out[0] + v).abs() < 0.05 * v, "{out:?}");
        }
    }

    #[test]
    fn step_count_validation() {
        let mut c = StripConfig::default();
        c.t_final = 0.0525;
        assert!(c.validate().is_err());
        c.t_final = 0.05;
        assert_eq!(c.steps().unwrap(), 20);
    }

    #[test]
    fn small_run_signature() {
        let cfg = StripConfig {
            k: 6,
            n: 256,
            dt: 5e-3,
            t_final: 0.1,
            ..StripConfig::default()
        };
        let run = run_strip(&cfg).unwrap();
        assert!(run.initial.log_left.is_finite());
        assert!(run.initial.log_right.is_finite());
        assert!(run.final_probe.log_right > run.initial.log_right + (0.1f64).ln());
        assert!(run.final_probe.log_left < run.initial.log_left);
        assert!((run.reversed.log_right - run.initial.log_right).abs() < 1e-4);
        assert!((run.reversed.log_left - run.initial.log_left).abs() < 1e-4);
        assert!(run.small_initial.log_left.is_finite());
        assert_eq!(run.small_final.left, 0.0);
        assert!(run.small_final.log_right.is_finite());
        assert!(run.energy_drift < 1e-8);
    }
}
