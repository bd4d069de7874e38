//! Particle flow map `X(a, t)` and inverse Jacobian `Y = (grad_a X)^{-1}`,
//! with the Lagrangian identities used as diagnostics.
//!
//! Index convention: `Y[k][i]` is the `(k, i)` entry of the matrix inverse
//! of `J[i][k] = d X^i / d a_k`, so `Y[k][i] = d a_k / d x_i`. Velocity
//! gradients are stored as `G[i][j] = d u^i / d x_j`.

use serde::{Deserialize, Serialize};

use crate::closed_form::{cellular_gradient, cellular_velocity, ShearFlow};
use crate::error::{Error, Result};
use crate::euler2d::EulerState2D;
use crate::spectral::{spectral_derivative, Grid, PointEvaluator, SpectralField};

pub type Mat<const D: usize> = [[f64; D]; D];

/// Default threshold on `max |Y|` (Frobenius) for the blowup event.
pub const DEFAULT_Y_BOUND: f64 = 1e6;

fn identity<const D: usize>() -> Mat<D> {
    let mut m = [[0.0; D]; D];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn matmul<const D: usize>(a: &Mat<D>, b: &Mat<D>) -> Mat<D> {
    let mut c = [[0.0; D]; D];
    for i in 0..D {
        for j in 0..D {
            c[i][j] = (0..D).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn frobenius<const D: usize>(a: &Mat<D>) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Determinant for `D = 2, 3`.
pub fn det<const D: usize>(m: &Mat<D>) -> f64 {
    match D {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => unreachable!("dimension {D} unsupported"),
    }
}

/// Velocity and velocity gradient at a batch of points.
pub trait VelocitySource<const D: usize> {
    fn sample(&self, t: f64, points: &[[f64; D]]) -> Result<Vec<([f64; D], Mat<D>)>>;
}

pub struct ZeroVelocity;

impl<const D: usize> VelocitySource<D> for ZeroVelocity {
    fn sample(&self, _t: f64, points: &[[f64; D]]) -> Result<Vec<([f64; D], Mat<D>)>> {
        Ok(vec![([0.0; D], [[0.0; D]; D]); points.len()])
    }
}

pub struct UniformTranslation<const D: usize>(pub [f64; D]);

impl<const D: usize> VelocitySource<D> for UniformTranslation<D> {
    fn sample(&self, _t: f64, points: &[[f64; D]]) -> Result<Vec<([f64; D], Mat<D>)>> {
        Ok(vec![(self.0, [[0.0; D]; D]); points.len()])
    }
}

/// Stationary cellular flow `u = (sin x1 cos x2, -cos x1 sin x2)`.
pub struct CellularSource;

impl VelocitySource<2> for CellularSource {
    fn sample(&self, _t: f64, points: &[[f64; 2]]) -> Result<Vec<([f64; 2], Mat<2>)>> {
        Ok(points.iter().map(|x| (cellular_velocity(x), cellular_gradient(x))).collect())
    }
}

/// Non-solenoidal `u = (sin x1, 0)`, a negative control for volume checks.
/// Its flow is `tan(X1/2) = e^t tan(a1/2)`.
pub struct CompressibleSine;

impl VelocitySource<2> for CompressibleSine {
    fn sample(&self, _t: f64, points: &[[f64; 2]]) -> Result<Vec<([f64; 2], Mat<2>)>> {
        Ok(points
            .iter()
            .map(|x| ([x[0].sin(), 0.0], [[x[0].cos(), 0.0], [0.0, 0.0]]))
            .collect())
    }
}

impl VelocitySource<3> for ShearFlow {
    fn sample(&self, t: f64, points: &[[f64; 3]]) -> Result<Vec<([f64; 3], Mat<3>)>> {
        Ok(points.iter().map(|x| (self.velocity(x, t), self.velocity_gradient(x, t))).collect())
    }
}

/// Solver velocity at one instant, evaluated exactly from its truncated
/// Fourier series.
pub struct SpectralVelocity2D {
    t: f64,
    eval: PointEvaluator,
}

impl SpectralVelocity2D {
    pub fn from_state(state: &EulerState2D, rel_tol: f64) -> Result<Self> {
        let fields = state.velocity_and_gradient()?;
        let refs: Vec<&SpectralField> = fields.iter().collect();
        Ok(Self {
            t: state.time(),
            eval: PointEvaluator::new(&refs, rel_tol)?,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }
}

/// A few solver snapshots; sampling requires an exact time match.
#[derive(Default)]
pub struct SpectralHistory {
    entries: Vec<SpectralVelocity2D>,
}

impl SpectralHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, v: SpectralVelocity2D) {
        self.entries.push(v);
    }

    /// Keep only the most recent entry.
    pub fn retain_last(&mut self) {
        let n = self.entries.len();
        if n > 1 {
            self.entries.drain(..n - 1);
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl VelocitySource<2> for SpectralHistory {
    fn sample(&self, t: f64, points: &[[f64; 2]]) -> Result<Vec<([f64; 2], Mat<2>)>> {
        let tol = 1e-9 * t.abs().max(1.0);
        let Some(e) = self.entries.iter().find(|e| (e.t - t).abs() <= tol) else {
            return Err(Error::Domain(format!("no solver snapshot stored at t = {t}")));
        };
        let mut out = [0.0; 6];
        Ok(points
            .iter()
            .map(|x| {
                e.eval.eval(x, &mut out);
                ([out[0], out[1]], [[out[2], out[3]], [out[4], out[5]]])
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YBoundEvent {
    pub step: usize,
    pub t: f64,
    pub max_y: f64,
}

/// Flow map on a uniform label grid over the periodic box.
#[derive(Debug, Clone)]
pub struct FlowMapState<const D: usize> {
    labels: Grid,
    x: Vec<[f64; D]>,
    y: Vec<Mat<D>>,
    t: f64,
    steps: usize,
    y_bound: f64,
    event: Option<YBoundEvent>,
}

impl<const D: usize> FlowMapState<D> {
    /// `X = a`, `Y = I` on an `n^D` label grid.
    pub fn new(n: usize) -> Result<Self> {
        let labels = Grid::new(D, n)?;
        let x = (0..labels.len())
            .map(|f| {
                let p = labels.point(f);
                std::array::from_fn(|i| p[i])
            })
            .collect();
        Ok(Self {
            labels,
            x,
            y: vec![identity::<D>(); labels.len()],
            t: 0.0,
            steps: 0,
            y_bound: DEFAULT_Y_BOUND,
            event: None,
        })
    }

    /// Flow map started from arbitrary label points (not a periodic grid;
    /// spectral label derivatives are unavailable).
    pub fn from_points(points: Vec<[f64; D]>) -> Result<Self> {
        let mut s = Self::new(2)?;
        s.y = vec![identity::<D>(); points.len()];
        s.x = points;
        s.labels = Grid { n: 0, ..s.labels };
        Ok(s)
    }

    pub fn with_y_bound(mut self, bound: f64) -> Self {
        self.y_bound = bound;
        self
    }

    pub fn labels(&self) -> &Grid {
        &self.labels
    }
    pub fn positions(&self) -> &[[f64; D]] {
        &self.x
    }
    pub fn inverse_jacobians(&self) -> &[Mat<D>] {
        &self.y
    }
    pub fn time(&self) -> f64 {
        self.t
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn y_bound_event(&self) -> Option<YBoundEvent> {
        self.event
    }

    pub fn max_y_norm(&self) -> f64 {
        self.y.iter().map(frobenius).fold(0.0, f64::max)
    }

    /// Label point for entry `flat` (periodic grids only).
    pub fn label(&self, flat: usize) -> [f64; D] {
        let p = self.labels.point(flat);
        std::array::from_fn(|i| p[i])
    }

    fn require_grid(&self) -> Result<()> {
        if self.labels.n == 0 {
            return Err(Error::Domain("flow map was not started from a label grid".into()));
        }
        Ok(())
    }

    /// `grad_a F` for per-label vectors `F` with `F - a` periodic
    /// (`shift = true`) or `F` periodic (`shift = false`).
    pub fn label_gradient(&self, field: &[[f64; D]], shift: bool) -> Result<Vec<Mat<D>>> {
        self.require_grid()?;
        let mut out = vec![[[0.0; D]; D]; field.len()];
        for i in 0..D {
            let vals: Vec<f64> = field
                .iter()
                .enumerate()
                .map(|(f, v)| if shift { v[i] - self.labels.point(f)[i] } else { v[i] })
                .collect();
            let s = SpectralField::from_samples(self.labels, vals)?;
            for k in 0..D {
                let mut beta = [0usize; 3];
                beta[k] = 1;
                let d = spectral_derivative(&s, &beta[..D])?;
                for (f, v) in d.values().iter().enumerate() {
                    out[f][i][k] = v + if shift && i == k { 1.0 } else { 0.0 };
                }
            }
        }
        Ok(out)
    }

    /// `J = grad_a X` computed spectrally from the periodic displacement.
    pub fn jacobian(&self) -> Result<Vec<Mat<D>>> {
        self.label_gradient(&self.x, true)
    }

    /// Max over labels of `|Y J - I|` (entrywise).
    pub fn inverse_consistency(&self) -> Result<f64> {
        let j = self.jacobian()?;
        Ok(inverse_consistency(&self.y, &j))
    }
}

/// Max entrywise deviation of `Y J` from the identity.
pub fn inverse_consistency<const D: usize>(y: &[Mat<D>], j: &[Mat<D>]) -> f64 {
    let id = identity::<D>();
    y.iter()
        .zip(j)
        .map(|(y, j)| {
            let p = matmul(y, j);
            (0..D)
                .flat_map(|a| (0..D).map(move |b| (a, b)))
                .map(|(a, b)| (p[a][b] - id[a][b]).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

fn y_rhs<const D: usize>(y: &Mat<D>, g: &Mat<D>) -> Mat<D> {
    let p = matmul(y, g);
    let mut r = [[0.0; D]; D];
    for i in 0..D {
        for j in 0..D {
            r[i][j] = -p[i][j];
        }
    }
    r
}

fn axpy<const D: usize>(a: &Mat<D>, s: f64, b: &Mat<D>) -> Mat<D> {
    let mut r = *a;
    for i in 0..D {
        for j in 0..D {
            r[i][j] += s * b[i][j];
        }
    }
    r
}

/// One RK4 step of `Y_t = -Y A Y` with `A = grad_a v` frozen over the step.
pub fn step_y_riccati<const D: usize>(y: &Mat<D>, a: &Mat<D>, dt: f64) -> Mat<D> {
    let f = |y: &Mat<D>| {
        let p = matmul(&matmul(y, a), y);
        let mut r = [[0.0; D]; D];
        for i in 0..D {
            for j in 0..D {
                r[i][j] = -p[i][j];
            }
        }
        r
    };
    let k1 = f(y);
    let k2 = f(&axpy(y, 0.5 * dt, &k1));
    let k3 = f(&axpy(y, 0.5 * dt, &k2));
    let k4 = f(&axpy(y, dt, &k3));
    let mut r = *y;
    for i in 0..D {
        for j in 0..D {
            r[i][j] += dt / 6.0 * (k1[i][j] + 2.0 * k2[i][j] + 2.0 * k3[i][j] + k4[i][j]);
        }
    }
    r
}

/// One RK4 step of `X' = u(X, t)`, `Y' = -Y G(X, t)` (equivalent to the
/// Riccati form with `grad_a v = G J`). The source is sampled at `t`,
/// `t + dt/2` and `t + dt`.
pub fn advect<const D: usize, S: VelocitySource<D> + ?Sized>(
    flow: &mut FlowMapState<D>,
    source: &S,
    dt: f64,
) -> Result<()> {
    if dt == 0.0 {
        return Ok(());
    }
    let t = flow.t;
    let n = flow.x.len();
    let x0 = flow.x.clone();
    let y0 = flow.y.clone();

    let s1 = source.sample(t, &x0)?;
    let k1: Vec<([f64; D], Mat<D>)> = s1.iter().zip(&y0).map(|((u, g), y)| (*u, y_rhs(y, g))).collect();
    let stage = |k: &[([f64; D], Mat<D>)], h: f64| -> (Vec<[f64; D]>, Vec<Mat<D>>) {
        let xs = (0..n).map(|p| std::array::from_fn(|i| x0[p][i] + h * k[p].0[i])).collect();
        let ys = (0..n).map(|p| axpy(&y0[p], h, &k[p].1)).collect();
        (xs, ys)
    };
    let eval = |xs: &[[f64; D]], ys: &[Mat<D>], tt: f64| -> Result<Vec<([f64; D], Mat<D>)>> {
        let s = source.sample(tt, xs)?;
        Ok(s.iter().zip(ys).map(|((u, g), y)| (*u, y_rhs(y, g))).collect())
    };
    let (x2, y2) = stage(&k1, 0.5 * dt);
    let k2 = eval(&x2, &y2, t + 0.5 * dt)?;
    let (x3, y3) = stage(&k2, 0.5 * dt);
    let k3 = eval(&x3, &y3, t + 0.5 * dt)?;
    let (x4, y4) = stage(&k3, dt);
    let k4 = eval(&x4, &y4, t + dt)?;

    for p in 0..n {
        for i in 0..D {
            flow.x[p][i] += dt / 6.0 * (k1[p].0[i] + 2.0 * k2[p].0[i] + 2.0 * k3[p].0[i] + k4[p].0[i]);
            for j in 0..D {
                flow.y[p][i][j] +=
                    dt / 6.0 * (k1[p].1[i][j] + 2.0 * k2[p].1[i][j] + 2.0 * k3[p].1[i][j] + k4[p].1[i][j]);
            }
        }
    }
    flow.t += dt;
    flow.steps += 1;
    if flow.x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Blowup {
            step: flow.steps,
            time: flow.t,
        });
    }
    if flow.event.is_none() {
        let m = flow.max_y_norm();
        if m > flow.y_bound {
            flow.event = Some(YBoundEvent {
                step: flow.steps,
                t: flow.t,
                max_y: m,
            });
        }
    }
    Ok(())
}

/// Advance solver and particles together. Each particle step spans `multiple`
/// (even) solver steps, so the stage times fall on solver states.
pub fn advect_with_solver(
    state: &mut EulerState2D,
    flow: &mut FlowMapState<2>,
    multiple: usize,
    particle_steps: usize,
    rel_tol: f64,
) -> Result<()> {
    if multiple == 0 || multiple % 2 != 0 {
        return Err(Error::Config(format!("particle step must span an even number of solver steps, got {multiple}")));
    }
    if (state.time() - flow.time()).abs() > 1e-12 {
        return Err(Error::Config("solver and flow map clocks differ".into()));
    }
    let dt = state.config().dt;
    let mut hist = SpectralHistory::new();
    hist.push(SpectralVelocity2D::from_state(state, rel_tol)?);
    for _ in 0..particle_steps {
        state.run_steps(multiple / 2, false)?;
        hist.push(SpectralVelocity2D::from_state(state, rel_tol)?);
        state.run_steps(multiple / 2, false)?;
        hist.push(SpectralVelocity2D::from_state(state, rel_tol)?);
        let t_end = state.time();
        advect(flow, &hist, multiple as f64 * dt)?;
        // snap the particle clock onto the solver clock
        flow.t = t_end;
        hist.retain_last();
    }
    Ok(())
}

/// Max over labels of `|det grad_a X - 1|`, with `grad_a X` spectral.
pub fn volume_defect<const D: usize>(flow: &FlowMapState<D>) -> Result<f64> {
    Ok(flow.jacobian()?.iter().map(|j| (det(j) - 1.0).abs()).fold(0.0, f64::max))
}

fn rms(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}

/// Absolute and relative RMS of a residual over labels. The relative value
/// divides by the RMS of the reference quantity (or is the absolute value
/// when that vanishes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub abs: f64,
    pub rel: f64,
}

impl Residual {
    fn new(abs: f64, scale: f64) -> Self {
        Self {
            abs,
            rel: if scale > 0.0 { abs / scale } else { abs },
        }
    }
}

/// `|omega(X(a,t), t) - omega0(a)|` relative to `omega0`, in RMS over labels.
pub fn lagrangian_vorticity_residual_2d(
    flow: &FlowMapState<2>,
    omega0: &SpectralField,
    omega_t: &SpectralField,
) -> Result<Residual> {
    flow.require_grid()?;
    let e0 = PointEvaluator::new(&[omega0], 0.0)?;
    let et = PointEvaluator::new(&[omega_t], 0.0)?;
    let mut a = [0.0];
    let mut b = [0.0];
    let mut diffs = Vec::with_capacity(flow.x.len());
    let mut refs = Vec::with_capacity(flow.x.len());
    for (f, x) in flow.x.iter().enumerate() {
        e0.eval(&flow.label(f), &mut a);
        et.eval(x, &mut b);
        diffs.push(b[0] - a[0]);
        refs.push(a[0]);
    }
    Ok(Residual::new(rms(diffs.into_iter()), rms(refs.into_iter())))
}

/// Curl and divergence residuals of the Lagrangian system. `v_grad[p][j][k]`
/// is `d v^j / d a_k`; `omega0` holds one component per label in 2D and
/// three in 3D.
pub fn curl_div_residual<const D: usize>(
    y: &[Mat<D>],
    v_grad: &[Mat<D>],
    omega0: &[f64],
) -> Result<(Residual, Residual)> {
    let comps = match D {
        2 => 1,
        3 => 3,
        _ => return Err(Error::Domain(format!("curl-div system defined for d = 2, 3, not {D}"))),
    };
    if v_grad.len() != y.len() || omega0.len() != comps * y.len() {
        return Err(Error::Domain(format!(
            "length mismatch: {} Y, {} grad v, {} vorticity components (expected {} per label)",
            y.len(),
            v_grad.len(),
            omega0.len(),
            comps
        )));
    }
    let mut curl_err = Vec::with_capacity(omega0.len());
    let mut div_err = Vec::with_capacity(y.len());
    let mut grad_scale = Vec::with_capacity(y.len());
    for (p, (yp, w)) in y.iter().zip(v_grad).enumerate() {
        // Eulerian gradient d u^j / d x_i = (W Y)[j][i]
        let g = matmul(w, yp);
        div_err.push((0..D).map(|i| g[i][i]).sum());
        grad_scale.push(frobenius(&g));
        if D == 2 {
            curl_err.push(g[1][0] - g[0][1] - omega0[p]);
        } else {
            let c = [g[2][1] - g[1][2], g[0][2] - g[2][0], g[1][0] - g[0][1]];
            for m in 0..3 {
                let z: f64 = (0..3).map(|i| yp[m][i] * c[i]).sum();
                curl_err.push(z - omega0[3 * p + m]);
            }
        }
    }
    let w_scale = rms(omega0.iter().copied()) * (comps as f64).sqrt();
    let curl = Residual::new(rms(curl_err.into_iter()) * (comps as f64).sqrt(), w_scale);
    let div = Residual::new(rms(div_err.into_iter()), rms(grad_scale.into_iter()));
    Ok((curl, div))
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// `eps_ijk (d v^l / d a_j)(d X^l / d a_k) - omega0^i`, RMS of the vector
/// norm over labels.
pub fn cauchy_invariant_residual_3d(jac: &[Mat<3>], v_grad: &[Mat<3>], omega0: &[[f64; 3]]) -> Result<Residual> {
    if jac.len() != v_grad.len() || jac.len() != omega0.len() {
        return Err(Error::Domain("length mismatch in Cauchy invariant inputs".into()));
    }
    let mut err = Vec::with_capacity(jac.len());
    for ((j, w), o) in jac.iter().zip(v_grad).zip(omega0) {
        let mut e2 = 0.0;
        for i in 0..3 {
            let mut s = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    let e = levi_civita(i, a, b);
                    if e != 0.0 {
                        s += e * (0..3).map(|l| w[l][a] * j[l][b]).sum::<f64>();
                    }
                }
            }
            e2 += (s - o[i]).powi(2);
        }
        err.push(e2.sqrt());
    }
    let scale = rms(omega0.iter().map(|o| (o[0] * o[0] + o[1] * o[1] + o[2] * o[2]).sqrt()));
    Ok(Residual::new(rms(err.into_iter()), scale))
}

/// `zeta^i - J[i][k] omega0^k`, RMS of the vector norm.
pub fn vorticity_transport_residual_3d(jac: &[Mat<3>], omega0: &[[f64; 3]], zeta: &[[f64; 3]]) -> Result<Residual> {
    if jac.len() != omega0.len() || jac.len() != zeta.len() {
        return Err(Error::Domain("length mismatch in vorticity transport inputs".into()));
    }
    let err = jac.iter().zip(omega0).zip(zeta).map(|((j, o), z)| {
        (0..3)
            .map(|i| (z[i] - (0..3).map(|k| j[i][k] * o[k]).sum::<f64>()).powi(2))
            .sum::<f64>()
            .sqrt()
    });
    let scale = rms(zeta.iter().map(|z| (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt()));
    Ok(Residual::new(rms(err), scale))
}

/// Diagnostics row for one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowDiagnostics {
    pub t: f64,
    pub volume_defect: f64,
    pub curl_residual: f64,
    pub div_residual: f64,
    pub cauchy_residual: f64,
    pub max_y: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{cellular_x1, cellular_y22};
    use proptest::prelude::*;

    #[test]
    fn zero_velocity_keeps_labels() {
        let mut f = FlowMapState::<2>::new(8).unwrap();
        let x0 = f.positions().to_vec();
        for _ in 0..10 {
            advect(&mut f, &ZeroVelocity, 0.1).unwrap();
        }
        assert_eq!(f.positions(), &x0[..]);
        assert!(f.inverse_jacobians().iter().all(|y| *y == identity::<2>()));
        assert_eq!(volume_defect(&f).unwrap(), 0.0);
    }

    #[test]
    fn uniform_translation() {
        let mut f = FlowMapState::<2>::new(8).unwrap();
        for _ in 0..100 {
            advect(&mut f, &UniformTranslation([1.0, 0.0]), 0.01).unwrap();
        }
        for (p, x) in f.positions().iter().enumerate() {
            let a = f.label(p);
            assert!((x[0] - a[0] - 1.0).abs() < 1e-13);
            assert_eq!(x[1], a[1]);
        }
        assert!(volume_defect(&f).unwrap() < 1e-12);
    }

    #[test]
    fn cellular_axis_matches_closed_form() {
        let pts: Vec<[f64; 2]> = (0..8).map(|i| [-3.0 + 0.8 * i as f64, 0.0]).collect();
        let mut f = FlowMapState::from_points(pts.clone()).unwrap();
        for _ in 0..10_000 {
            advect(&mut f, &CellularSource, 1e-4).unwrap();
        }
        for (p, a) in pts.iter().enumerate() {
            assert!((f.positions()[p][0] - cellular_x1(a[0], 1.0)).abs() < 1e-8);
            assert!((f.inverse_jacobians()[p][1][1] - cellular_y22(a[0], 1.0)).abs() < 1e-8);
        }
    }

    #[test]
    fn cellular_volume_and_reversal() {
        let mut f = FlowMapState::<2>::new(128).unwrap();
        for _ in 0..1000 {
            advect(&mut f, &CellularSource, 1e-3).unwrap();
        }
        assert!(volume_defect(&f).unwrap() < 1e-6);
        assert!(f.inverse_consistency().unwrap() < 1e-6);
        for _ in 0..1000 {
            advect(&mut f, &CellularSource, -1e-3).unwrap();
        }
        for (p, x) in f.positions().iter().enumerate() {
            let a = f.label(p);
            assert!((x[0] - a[0]).abs() < 1e-7 && (x[1] - a[1]).abs() < 1e-7);
        }
    }

    #[test]
    fn compressible_control_defect() {
        let mut f = FlowMapState::<2>::new(64).unwrap();
        for _ in 0..1000 {
            advect(&mut f, &CompressibleSine, 1e-3).unwrap();
        }
        let d = volume_defect(&f).unwrap();
        let want = 1f64.exp() - 1.0;
        assert!((d - want).abs() < 1e-6 * want, "{d} vs {want}");
        // closed-form trajectory
        for (p, x) in f.positions().iter().enumerate() {
            let a = f.label(p)[0];
            let want = 2.0 * ((a / 2.0).tan() * 1f64.exp()).atan();
            if a.abs() < 3.0 {
                assert!((x[0] - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn riccati_step() {
        let y = [[1.0, 0.5], [0.0, 1.0]];
        assert_eq!(step_y_riccati(&y, &[[0.0; 2]; 2], 0.3), y);
        // scalar Y' = -a Y^2, Y(0) = 1 => Y = 1 / (1 + a t)
        let mut s = [[1.0]];
        for _ in 0..100 {
            s = step_y_riccati(&s, &[[2.0]], 0.01);
        }
        assert!((s[0][0] - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn y_bound_event_recorded() {
        // near the corner the cellular flow stretches exponentially
        let mut f = FlowMapState::from_points(vec![[0.3, 0.0]]).unwrap().with_y_bound(5.0);
        for _ in 0..1000 {
            advect(&mut f, &CellularSource, 1e-2).unwrap();
        }
        let e = f.y_bound_event().expect("event");
        assert!(e.max_y > 5.0 && e.t < 10.0);
    }

    #[test]
    fn curl_div_at_identity() {
        let n = 16;
        let f = FlowMapState::<2>::new(n).unwrap();
        let v: Vec<[f64; 2]> = (0..f.positions().len()).map(|p| cellular_velocity(&f.label(p))).collect();
        let w = f.label_gradient(&v, false).unwrap();
        let om: Vec<f64> = (0..v.len()).map(|p| crate::closed_form::cellular_vorticity(&f.label(p))).collect();
        let (c, d) = curl_div_residual(f.inverse_jacobians(), &w, &om).unwrap();
        assert!(c.rel < 1e-13 && d.abs < 1e-13);
        assert!(curl_div_residual::<2>(&[identity()], &[], &[0.0]).is_err());
    }

    #[test]
    fn shear_identities_closed_form() {
        let sf = ShearFlow::default();
        let t = 1.0;
        let n = 8;
        let grid = Grid::new(3, n).unwrap();
        let labels: Vec<[f64; 3]> = (0..grid.len()).map(|f| {
            let p = grid.point(f);
            [p[0], p[1], p[2]]
        }).collect();
        let jac: Vec<Mat<3>> = labels.iter().map(|a| sf.flow_jacobian(a, t)).collect();
        let y: Vec<Mat<3>> = labels.iter().map(|a| sf.inverse_jacobian(a, t)).collect();
        let w: Vec<Mat<3>> = labels.iter().map(|a| sf.lagrangian_velocity_gradient(a)).collect();
        let o: Vec<[f64; 3]> = labels.iter().map(|a| sf.initial_vorticity(a)).collect();
        let flat: Vec<f64> = o.iter().flatten().copied().collect();
        let (c, d) = curl_div_residual(&y, &w, &flat).unwrap();
        assert!(c.abs < 1e-12 && d.abs < 1e-12, "{c:?} {d:?}");
        assert!(cauchy_invariant_residual_3d(&jac, &w, &o).unwrap().abs < 1e-12);
        let zeta: Vec<[f64; 3]> = labels.iter().map(|a| sf.vorticity(&sf.flow_map(a, t), t)).collect();
        assert!(vorticity_transport_residual_3d(&jac, &o, &zeta).unwrap().abs < 1e-12);
    }

    #[test]
    fn shear_flow_map_by_integration() {
        let sf = ShearFlow::default();
        let mut f = FlowMapState::<3>::new(8).unwrap();
        for _ in 0..200 {
            advect(&mut f, &sf, 5e-3).unwrap();
        }
        for (p, x) in f.positions().iter().enumerate() {
            let want = sf.flow_map(&f.label(p), 1.0);
            for i in 0..3 {
                assert!((x[i] - want[i]).abs() < 1e-10);
            }
            let yw = sf.inverse_jacobian(&f.label(p), 1.0);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((f.inverse_jacobians()[p][i][j] - yw[i][j]).abs() < 1e-9);
                }
            }
        }
        assert!(volume_defect(&f).unwrap() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cauchy_negative_control(entries in proptest::collection::vec(-1.0f64..1.0, 18)) {
            let mut j = identity::<3>();
            let mut w = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    j[a][b] += entries[3 * a + b];
                    w[a][b] = entries[9 + 3 * a + b];
                }
            }
            // omega0 taken from the identity map, then a perturbed map
            let o = [w[2][1] - w[1][2], w[0][2] - w[2][0], w[1][0] - w[0][1]];
            let base = cauchy_invariant_residual_3d(&[identity()], &[w], &[o]).unwrap();
            prop_assert!(base.abs < 1e-14);
            let r = cauchy_invariant_residual_3d(&[j], &[w], &[o]).unwrap();
            prop_assert!(r.abs.is_finite());
        }

        #[test]
        fn riccati_preserves_inverse(a in proptest::collection::vec(-0.5f64..0.5, 4), dt in 1e-3f64..1e-2) {
            // constant A: J' = A, so Y(t) = (I + t A)^{-1}
            let am = [[a[0], a[1]], [a[2], a[3]]];
            let mut y = identity::<2>();
            for _ in 0..20 {
                y = step_y_riccati(&y, &am, dt);
            }
            let t = 20.0 * dt;
            let j = [[1.0 + t * a[0], t * a[1]], [t * a[2], 1.0 + t * a[3]]];
            prop_assert!(inverse_consistency(&[y], &[j]) < 1e-9);
        }
    }

    #[test]
    fn randomized_map_breaks_cauchy() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let sf = ShearFlow::default();
        let labels: Vec<[f64; 3]> = (0..200).map(|_| [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]).collect();
        let w: Vec<Mat<3>> = labels.iter().map(|a| sf.lagrangian_velocity_gradient(a)).collect();
        let o: Vec<[f64; 3]> = labels.iter().map(|a| sf.initial_vorticity(a)).collect();
        let jac: Vec<Mat<3>> = labels
            .iter()
            .map(|_| {
                let mut j = identity::<3>();
                for row in j.iter_mut() {
                    for v in row.iter_mut() {
                        *v += rng.gen_range(-1.0..1.0);
                    }
                }
                j
            })
            .collect();
        let r = cauchy_invariant_residual_3d(&jac, &w, &o).unwrap();
        assert!(r.rel > 0.1, "{r:?}");
    }
}
