//! Pseudo-spectral 2D incompressible Euler solver in vorticity form.
//!
//! `omega_t + u . grad omega = 0`, `u = grad^perp Delta^{-1} omega` with
//! `grad^perp = (-d_2, d_1)`. Products are formed on the grid and the
//! tendency is projected with the two-thirds rule; time stepping is
//! classical RK4 with a fixed step.
//!
//! Internally the state is kept as raw DFT coefficients (`DFT / N`, indexed
//! by grid position). They differ from the [`SpectralField`] convention by
//! the sign `(-1)^{i_1 + i_2}` only, which commutes with every Fourier
//! multiplier used here.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{dealias_mask, Grid, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n: usize,
    pub dt: f64,
    pub dealias: bool,
    pub half_width: f64,
}

impl SolverConfig {
    pub fn new(n: usize, dt: f64) -> Self {
        Self {
            n,
            dt,
            dealias: true,
            half_width: std::f64::consts::PI,
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::with_half_width(2, self.n, self.half_width)
    }
}

/// Row FFTs plus a transpose, on an `n x n` complex array.
struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Fft2 {
    fn new(n: usize) -> Self {
        let mut p = FftPlanner::new();
        let fwd = p.plan_fft_forward(n);
        let inv = p.plan_fft_inverse(n);
        let len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Self {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); len],
            tmp: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    fn transpose(n: usize, src: &[Complex64], dst: &mut [Complex64]) {
        const B: usize = 32;
        for ib in (0..n).step_by(B) {
            for jb in (0..n).step_by(B) {
                for i in ib..(ib + B).min(n) {
                    for j in jb..(jb + B).min(n) {
                        dst[j * n + i] = src[i * n + j];
                    }
                }
            }
        }
    }

    fn run(&mut self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        plan.process_with_scratch(data, &mut self.scratch);
        Self::transpose(self.n, data, &mut self.tmp);
        plan.process_with_scratch(&mut self.tmp, &mut self.scratch);
        Self::transpose(self.n, &self.tmp, data);
    }
}

/// Precomputed multipliers for one grid.
struct Operators {
    /// `kappa_1`, `kappa_2` for derivatives (zero on Nyquist rows/columns).
    k1: Vec<f64>,
    k2: Vec<f64>,
    /// `1 / |kappa|^2`, zero at the mean mode.
    inv_k2: Vec<f64>,
    mask: Vec<bool>,
}

impl Operators {
    fn new(grid: &Grid, dealias: bool) -> Self {
        let len = grid.len();
        let mut k1 = vec![0.0; len];
        let mut k2 = vec![0.0; len];
        let mut inv_k2 = vec![0.0; len];
        let half = (grid.n / 2) as i64;
        for flat in 0..len {
            let k = grid.wavevector(flat);
            let (a, b) = (grid.kappa(k[0]), grid.kappa(k[1]));
            let m = a * a + b * b;
            inv_k2[flat] = if m > 0.0 { 1.0 / m } else { 0.0 };
            k1[flat] = if k[0] == -half { 0.0 } else { a };
            k2[flat] = if k[1] == -half { 0.0 } else { b };
        }
        let mask = if dealias { dealias_mask(grid) } else { vec![true; len] };
        Self { k1, k2, inv_k2, mask }
    }
}

/// Scalar vorticity state of the 2D solver.
pub struct EulerState2D {
    config: SolverConfig,
    grid: Grid,
    t: f64,
    steps: usize,
    /// Raw coefficients of omega.
    w: Vec<Complex64>,
    ops: Operators,
    fft: Fft2,
    bufs: [Vec<Complex64>; 3],
    /// Largest CFL number `dt max|u| kappa_max` seen at a step start.
    max_cfl: f64,
}

impl Clone for EulerState2D {
    fn clone(&self) -> Self {
        Self {
            config: self.config,
            grid: self.grid,
            t: self.t,
            steps: self.steps,
            w: self.w.clone(),
            ops: Operators::new(&self.grid, self.config.dealias),
            fft: Fft2::new(self.grid.n),
            bufs: self.bufs.clone(),
            max_cfl: self.max_cfl,
        }
    }
}

fn sign(grid: &Grid, flat: usize) -> f64 {
    let i = grid.unflatten(flat);
    if (i[0] + i[1]) % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl EulerState2D {
    /// Initialize from a vorticity field on the solver grid. With
    /// dealiasing on, the datum is projected onto the retained modes.
    pub fn new(omega: &SpectralField, config: SolverConfig) -> Result<Self> {
        let grid = config.grid()?;
        if *omega.grid() != grid {
            return Err(Error::Config(format!(
                "initial vorticity grid {:?} does not match solver grid {:?}",
                omega.grid(),
                grid
            )));
        }
        if !(config.dt.is_finite() && config.dt >= 0.0) {
            return Err(Error::Config(format!("time step must be finite and >= 0, got {}", config.dt)));
        }
        let ops = Operators::new(&grid, config.dealias);
        let w = omega
            .coeffs()
            .iter()
            .enumerate()
            .map(|(flat, c)| if ops.mask[flat] { c * sign(&grid, flat) } else { Complex64::new(0.0, 0.0) })
            .collect();
        let len = grid.len();
        Ok(Self {
            config,
            grid,
            t: 0.0,
            steps: 0,
            w,
            ops,
            fft: Fft2::new(grid.n),
            bufs: [
                vec![Complex64::new(0.0, 0.0); len],
                vec![Complex64::new(0.0, 0.0); len],
                vec![Complex64::new(0.0, 0.0); len],
            ],
            max_cfl: 0.0,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn config(&self) -> &SolverConfig {
        &self.config
    }
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn max_cfl(&self) -> f64 {
        self.max_cfl
    }

    fn to_field(&self, raw: &[Complex64]) -> Result<SpectralField> {
        let coeffs = raw.iter().enumerate().map(|(f, c)| c * sign(&self.grid, f)).collect();
        SpectralField::from_coeffs(self.grid, coeffs)
    }

    /// Current vorticity.
    pub fn omega(&self) -> Result<SpectralField> {
        self.to_field(&self.w)
    }

    pub fn mean(&self) -> f64 {
        self.w[0].re
    }

    /// `(1/2) mean |u|^2`.
    pub fn energy(&self) -> f64 {
        0.5 * self.w.iter().zip(&self.ops.inv_k2).map(|(c, ik)| c.norm_sqr() * ik).sum::<f64>()
    }

    /// `mean omega^2` of the fluctuation (the conserved mean is excluded).
    pub fn enstrophy(&self) -> f64 {
        self.w[1..].iter().map(|c| c.norm_sqr()).sum()
    }

    /// Velocity components `(u1, u2)` as fields.
    pub fn velocity(&self) -> Result<(SpectralField, SpectralField)> {
        let f = self.velocity_and_gradient()?;
        let mut it = f.into_iter();
        Ok((it.next().expect("u1"), it.next().expect("u2")))
    }

    /// `[u1, u2, d1 u1, d2 u1, d1 u2, d2 u2]`.
    pub fn velocity_and_gradient(&self) -> Result<Vec<SpectralField>> {
        let i = Complex64::new(0.0, 1.0);
        let o = &self.ops;
        let u1: Vec<Complex64> = (0..self.w.len()).map(|f| i * o.k2[f] * o.inv_k2[f] * self.w[f]).collect();
        let u2: Vec<Complex64> = (0..self.w.len()).map(|f| -i * o.k1[f] * o.inv_k2[f] * self.w[f]).collect();
        let d = |u: &[Complex64], k: &[f64]| -> Vec<Complex64> { u.iter().zip(k).map(|(c, kk)| i * kk * c).collect() };
        let fields = [
            d(&u1, &o.k1),
            d(&u1, &o.k2),
            d(&u2, &o.k1),
            d(&u2, &o.k2),
        ];
        let mut out = vec![self.to_field(&u1)?, self.to_field(&u2)?];
        for f in fields.iter() {
            out.push(self.to_field(f)?);
        }
        Ok(out)
    }

    /// Velocity samples on the grid, `(u1, u2)` row-major.
    pub fn velocity_samples(&mut self) -> (Vec<f64>, Vec<f64>) {
        let i = Complex64::new(0.0, 1.0);
        let o = &self.ops;
        let buf = &mut self.bufs[0];
        for f in 0..buf.len() {
            let psi = -self.w[f] * o.inv_k2[f];
            // u1 = -d2 psi, u2 = d1 psi, packed as u1 + i u2
            buf[f] = -i * o.k2[f] * psi + i * (i * o.k1[f] * psi);
        }
        let mut b = std::mem::take(&mut self.bufs[0]);
        self.fft.run(&mut b, true);
        let u1 = b.iter().map(|z| z.re).collect();
        let u2 = b.iter().map(|z| z.im).collect();
        self.bufs[0] = b;
        (u1, u2)
    }

    /// `-P(u . grad omega)` for raw coefficients `w`, written into `out`.
    /// Returns `max |u|` on the grid.
    fn tendency(&mut self, w: &[Complex64], out: &mut [Complex64]) -> f64 {
        let i = Complex64::new(0.0, 1.0);
        let o = &self.ops;
        let [a, b, _] = &mut self.bufs;
        for f in 0..w.len() {
            let c = w[f];
            let (k1, k2, ik) = (o.k1[f], o.k2[f], o.inv_k2[f]);
            let u1 = i * k2 * ik * c;
            let u2 = -i * k1 * ik * c;
            let wx = i * k1 * c;
            let wy = i * k2 * c;
            a[f] = u1 + i * wx;
            b[f] = u2 + i * wy;
        }
        let mut a = std::mem::take(&mut self.bufs[0]);
        let mut b = std::mem::take(&mut self.bufs[1]);
        self.fft.run(&mut a, true);
        self.fft.run(&mut b, true);
        let mut umax = 0.0f64;
        for (za, zb) in a.iter_mut().zip(b.iter()) {
            let (u1, wx, u2, wy) = (za.re, za.im, zb.re, zb.im);
            umax = umax.max((u1 * u1 + u2 * u2).sqrt());
            *za = Complex64::new(u1 * wx + u2 * wy, 0.0);
        }
        self.fft.run(&mut a, false);
        let norm = 1.0 / w.len() as f64;
        for f in 0..w.len() {
            out[f] = if self.ops.mask[f] && f != 0 { -a[f] * norm } else { Complex64::new(0.0, 0.0) };
        }
        self.bufs[0] = a;
        self.bufs[1] = b;
        umax
    }

    /// Advance by one RK4 step of size `dt` (negative `dt` runs backwards).
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        if dt == 0.0 {
            return Ok(());
        }
        let len = self.w.len();
        let w0 = self.w.clone();
        let mut k = vec![Complex64::new(0.0, 0.0); len];
        let mut acc = w0.clone();
        let mut stage = vec![Complex64::new(0.0, 0.0); len];

        let umax = self.tendency(&w0, &mut k);
        let kmax = self.grid.kappa((self.grid.n / 2) as i64);
        self.max_cfl = self.max_cfl.max(dt.abs() * umax * kmax);
        for f in 0..len {
            acc[f] += k[f] * (dt / 6.0);
            stage[f] = w0[f] + k[f] * (0.5 * dt);
        }
        self.tendency(&stage.clone(), &mut k);
        for f in 0..len {
            acc[f] += k[f] * (dt / 3.0);
            stage[f] = w0[f] + k[f] * (0.5 * dt);
        }
        self.tendency(&stage.clone(), &mut k);
        for f in 0..len {
            acc[f] += k[f] * (dt / 3.0);
            stage[f] = w0[f] + k[f] * dt;
        }
        self.tendency(&stage.clone(), &mut k);
        for f in 0..len {
            acc[f] += k[f] * (dt / 6.0);
        }
        self.steps += 1;
        self.t += dt;
        if acc.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Blowup {
                step: self.steps,
                time: self.t,
            });
        }
        self.w = acc;
        Ok(())
    }

    /// Functional form of [`Self::advance`].
    pub fn step(&self, dt: f64) -> Result<Self> {
        let mut s = self.clone();
        s.advance(dt)?;
        Ok(s)
    }

    /// Advance `count` steps of the configured `dt` (sign flips with `backward`).
    pub fn run_steps(&mut self, count: usize, backward: bool) -> Result<()> {
        let dt = if backward { -self.config.dt } else { self.config.dt };
        for _ in 0..count {
            self.advance(dt)?;
        }
        Ok(())
    }
}

/// `u = grad^perp Delta^{-1} omega` for a mean-zero vorticity.
pub fn biot_savart(omega: &SpectralField) -> Result<(SpectralField, SpectralField)> {
    if omega.dim() != 2 {
        return Err(Error::Domain(format!("Biot-Savart needs a 2-D field, got {}-D", omega.dim())));
    }
    let mean = omega.mean();
    let scale = omega.coeffs().iter().fold(0.0f64, |m, c| m.max(c.norm()));
    if mean.abs() > 1e-12 * scale.max(1e-300) && mean.abs() > 1e-300 {
        return Err(Error::Gauge { mean });
    }
    let grid = *omega.grid();
    let i = Complex64::new(0.0, 1.0);
    let half = (grid.n / 2) as i64;
    let mut u1 = Vec::with_capacity(grid.len());
    let mut u2 = Vec::with_capacity(grid.len());
    for (flat, c) in omega.coeffs().iter().enumerate() {
        let k = grid.wavevector(flat);
        let (a, b) = (grid.kappa(k[0]), grid.kappa(k[1]));
        let m = a * a + b * b;
        if m == 0.0 || k[0] == -half || k[1] == -half {
            u1.push(Complex64::new(0.0, 0.0));
            u2.push(Complex64::new(0.0, 0.0));
            continue;
        }
        let psi = -c / m;
        u1.push(-i * b * psi);
        u2.push(i * a * psi);
    }
    Ok((SpectralField::from_coeffs(grid, u1)?, SpectralField::from_coeffs(grid, u2)?))
}

/// `d1 u2 - d2 u1`.
pub fn curl(u1: &SpectralField, u2: &SpectralField) -> Result<SpectralField> {
    let a = crate::spectral::spectral_derivative(u2, &[1, 0])?;
    let b = crate::spectral::spectral_derivative(u1, &[0, 1])?;
    a.linear_combination(1.0, &b, -1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::spectral_derivative;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_random(n: usize, seed: u64) -> SpectralField {
        let grid = Grid::new(2, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modes = Vec::new();
        for _ in 0..12 {
            modes.push((
                rng.gen_range(-4i32..=4) as f64,
                rng.gen_range(-4i32..=4) as f64,
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            ));
        }
        SpectralField::from_fn(grid, |x| {
            modes
                .iter()
                .filter(|m| m.0 != 0.0 || m.1 != 0.0)
                .map(|(a, b, c, p)| c * (a * x[0] + b * x[1] + p).cos())
                .sum()
        })
        .unwrap()
    }

    #[test]
    fn biot_savart_examples() {
        let grid = Grid::new(2, 32).unwrap();
        let zero = SpectralField::zeros(grid);
        let (a, b) = biot_savart(&zero).unwrap();
        assert_eq!(a.max_abs() + b.max_abs(), 0.0);

        let w = SpectralField::from_fn(grid, |x| x[0].cos()).unwrap();
        let (u1, u2) = biot_savart(&w).unwrap();
        for flat in 0..grid.len() {
            let x = grid.point(flat);
            assert!(u1.values()[flat].abs() < 1e-12);
            assert!((u2.values()[flat] - x[0].sin()).abs() < 1e-12);
        }
        let c = curl(&u1, &u2).unwrap();
        for (p, q) in c.values().iter().zip(w.values()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn biot_savart_round_trip_and_divergence() {
        let w = smooth_random(64, 3);
        let (u1, u2) = biot_savart(&w).unwrap();
        let c = curl(&u1, &u2).unwrap();
        let err = c.linear_combination(1.0, &w, -1.0).unwrap().l2_norm();
        assert!(err < 1e-11 * w.l2_norm());
        let div = spectral_derivative(&u1, &[1, 0])
            .unwrap()
            .linear_combination(1.0, &spectral_derivative(&u2, &[0, 1]).unwrap(), 1.0)
            .unwrap();
        assert!(div.coeffs().iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn nonzero_mean_is_a_gauge_error() {
        let grid = Grid::new(2, 16).unwrap();
        let w = SpectralField::from_fn(grid, |x| 1.0 + x[0].cos()).unwrap();
        assert!(matches!(biot_savart(&w), Err(Error::Gauge { .. })));
    }

    #[test]
    fn stationary_cellular_flow() {
        let grid = Grid::new(2, 64).unwrap();
        let w0 = SpectralField::from_fn(grid, crate::closed_form::cellular_vorticity).unwrap();
        let mut s = EulerState2D::new(&w0, SolverConfig::new(64, 1e-3)).unwrap();
        let e0 = s.energy();
        s.run_steps(1000, false).unwrap();
        let w1 = s.omega().unwrap();
        let rel = w1.linear_combination(1.0, &w0, -1.0).unwrap().l2_norm() / w0.l2_norm();
        assert!(rel < 1e-8, "{rel}");
        assert!(((s.energy() - e0) / e0).abs() < 1e-8);
        assert!((s.time() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_step_is_identity() {
        let w0 = smooth_random(32, 1);
        let s = EulerState2D::new(&w0, SolverConfig::new(32, 0.0)).unwrap();
        let s1 = s.step(0.0).unwrap();
        assert_eq!(s.omega().unwrap().values(), s1.omega().unwrap().values());
    }

    #[test]
    fn conservation_and_mean() {
        let grid = Grid::new(2, 64).unwrap();
        let base = smooth_random(64, 9);
        let w0 = SpectralField::from_fn(grid, |_| 0.3).unwrap().linear_combination(1.0, &base, 1.0).unwrap();
        let mut s = EulerState2D::new(&w0, SolverConfig::new(64, 2e-3)).unwrap();
        let (e0, z0, m0) = (s.energy(), s.enstrophy(), s.mean());
        s.run_steps(250, false).unwrap();
        assert!(((s.energy() - e0) / e0).abs() < 1e-7);
        assert!(((s.enstrophy() - z0) / z0).abs() < 1e-7);
        assert_eq!(s.mean(), m0);
    }

    #[test]
    fn velocity_samples_match_fields() {
        let w0 = smooth_random(32, 5);
        let mut s = EulerState2D::new(&w0, SolverConfig::new(32, 1e-3)).unwrap();
        let (a, b) = s.velocity_samples();
        let (u1, u2) = s.velocity().unwrap();
        for f in 0..a.len() {
            assert!((a[f] - u1.values()[f]).abs() < 1e-12);
            assert!((b[f] - u2.values()[f]).abs() < 1e-12);
        }
    }

    #[test]
    fn nan_is_reported_as_blowup() {
        let grid = Grid::new(2, 16).unwrap();
        let w0 = SpectralField::from_fn(grid, |x| x[0].cos()).unwrap();
        let mut s = EulerState2D::new(&w0, SolverConfig::new(16, 1e-3)).unwrap();
        s.w[1] = Complex64::new(f64::NAN, 0.0);
        assert!(matches!(s.advance(1e-3), Err(Error::Blowup { step: 1, .. })));
    }
}
