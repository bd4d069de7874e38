//! Exact evaluators: the stationary cellular flow and its Lagrangian data,
//! the 3D shear flow `(f(x2), 0, g(x1 - t f(x2)))`, and the profile
//! `g(y) = 1 / (sinh^2 1 + sin^2 y)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField};

/// Denominators smaller than this are reported as a pole.
pub const POLE_TOLERANCE: f64 = 1e-14;

/// Outcome of a complex evaluation that may land on a pole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evaluation<T> {
    Value(T),
    Pole,
}

impl<T> Evaluation<T> {
    pub fn value(self) -> Option<T> {
        match self {
            Evaluation::Value(v) => Some(v),
            Evaluation::Pole => None,
        }
    }
}

// ---------------------------------------------------------------- cellular

/// `u = (sin x1 cos x2, -cos x1 sin x2)`.
pub fn cellular_velocity(x: &[f64; 2]) -> [f64; 2] {
    [x[0].sin() * x[1].cos(), -x[0].cos() * x[1].sin()]
}

/// `G[i][j] = d_j u^i`.
pub fn cellular_gradient(x: &[f64; 2]) -> [[f64; 2]; 2] {
    let (s1, c1) = x[0].sin_cos();
    let (s2, c2) = x[1].sin_cos();
    [[c1 * c2, -s1 * s2], [s1 * s2, -c1 * c2]]
}

/// `omega = 2 sin x1 sin x2`.
pub fn cellular_vorticity(x: &[f64]) -> f64 {
    2.0 * x[0].sin() * x[1].sin()
}

fn cellular_ab(t: f64) -> (f64, f64) {
    let e2 = (2.0 * t).exp();
    (e2 + 1.0, (2.0 * t).exp_m1())
}

/// `cos X1(a1, t)` on the invariant axis `a2 = 0`.
pub fn cellular_cos_x1(a1: f64, t: f64) -> f64 {
    let (a, b) = cellular_ab(t);
    let c = a1.cos();
    (a * c - b) / (a - b * c)
}

/// `X1(a1, t)` itself, from `tan(X1/2) = e^t tan(a1/2)`; branch chosen so
/// that `X1` stays in the same period cell as `a1`.
pub fn cellular_x1(a1: f64, t: f64) -> f64 {
    let turns = ((a1 + PI) / (2.0 * PI)).floor();
    let base = a1 - 2.0 * PI * turns;
    let x = if base == -PI { -PI } else { 2.0 * ((base / 2.0).tan() * t.exp()).atan() };
    x + 2.0 * PI * turns
}

/// `Y22(a1, t) = d X1 / d a1` on the invariant axis.
pub fn cellular_y22(a1: f64, t: f64) -> f64 {
    let (a, b) = cellular_ab(t);
    2.0 * t.exp() / (a - b * a1.cos())
}

pub fn cellular_cos_x1_complex(a1: Complex64, t: f64) -> Evaluation<Complex64> {
    let (a, b) = cellular_ab(t);
    let c = a1.cos();
    let den = a - b * c;
    if den.norm() < POLE_TOLERANCE {
        return Evaluation::Pole;
    }
    Evaluation::Value((a * c - b) / den)
}

pub fn cellular_y22_complex(a1: Complex64, t: f64) -> Evaluation<Complex64> {
    let (a, b) = cellular_ab(t);
    let den = a - b * a1.cos();
    if den.norm() < POLE_TOLERANCE {
        return Evaluation::Pole;
    }
    Evaluation::Value(2.0 * t.exp() / den)
}

/// `ln((e^t + 1)/(e^t - 1))`, written to stay accurate for large and small `t`.
fn coth_log(x: f64) -> f64 {
    (2.0 / x.exp_m1()).ln_1p()
}

/// Distance of the nearest complex singularity of `a1 -> Y22(a1, t)` from
/// the real axis.
pub fn cellular_singularity_radius(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("singularity radius needs t > 0 (infinite at t = 0), got {t}")));
    }
    Ok(coth_log(t))
}

/// Time `T(delta)` during which the Lagrangian radius stays above `delta`.
/// Same function as [`cellular_singularity_radius`], hence an involution.
pub fn persistence_time_t(delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("persistence time needs delta > 0, got {delta}")));
    }
    Ok(coth_log(delta))
}

/// Newton iteration on the denominator `(e^{2t}+1) - (e^{2t}-1) cos a` of
/// `Y22`, from `seed`. Returns the located zero.
pub fn cellular_pole_newton(t: f64, seed: Complex64) -> Result<Complex64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("pole search needs t > 0, got {t}")));
    }
    let (a, b) = cellular_ab(t);
    let mut z = seed;
    for _ in 0..100 {
        let d = a - b * z.cos();
        let dp = b * z.sin();
        if dp.norm() == 0.0 {
            return Err(Error::Internal("Newton derivative vanished in pole search".into()));
        }
        let step = d / dp;
        z -= step;
        if step.norm() < 1e-15 * (1.0 + z.norm()) {
            return Ok(z);
        }
    }
    Err(Error::Internal(format!("pole search from {seed} did not converge")))
}

/// `a1 -> Y22(a1, t)` sampled on `n` points of `[-pi, pi)`.
pub fn cellular_y22_field(t: f64, n: usize) -> Result<SpectralField> {
    SpectralField::from_fn(Grid::new(1, n)?, |x| cellular_y22(x[0], t))
}

/// Exact Fourier coefficients of `Y22(., t)`: `q^{|k|}` with
/// `q = (e^t - 1)/(e^t + 1)`.
pub fn cellular_y22_coefficients(t: f64, n: usize) -> Result<SpectralField> {
    let q = (t / 2.0).tanh();
    SpectralField::from_coeff_fn(Grid::new(1, n)?, |k| Complex64::new(q.powi(k[0].abs() as i32), 0.0))
}

// ---------------------------------------------------------------- g profile

/// `g(y) = 1 / (sinh^2 1 + sin^2 y) = 2 / (cosh 2 - cos 2y)`.
pub fn g_profile(y: f64) -> f64 {
    2.0 / (2f64.cosh() - (2.0 * y).cos())
}

/// Fourier coefficient of `g` at integer frequency `k`:
/// `(2 / sinh 2) e^{-|k|}` for even `k`, zero for odd `k`.
pub fn g_fourier(k: i64) -> f64 {
    if k % 2 != 0 {
        0.0
    } else {
        2.0 / 2f64.sinh() * (-(k.abs() as f64)).exp()
    }
}

/// `g^{(m)}(y)` from the cosine series `(2/sinh 2)(1 + 2 sum e^{-2n} cos 2ny)`.
pub fn g_derivative(y: f64, m: usize) -> f64 {
    if m == 0 {
        return g_profile(y);
    }
    let pref = 4.0 / 2f64.sinh();
    let shift = m as f64 * PI / 2.0;
    let mut sum = 0.0;
    let mut peak = 0.0f64;
    let mut n = 1usize;
    loop {
        let w = 2.0 * n as f64;
        let log_mag = -w + m as f64 * w.ln();
        let mag = log_mag.exp();
        sum += mag * (w * y + shift).cos();
        peak = peak.max(mag);
        if w > m as f64 && mag < 1e-18 * peak {
            break;
        }
        n += 1;
    }
    pref * sum
}

/// Coefficients of `g` on an `n`-point grid, from the closed form.
pub fn g_coefficients_field(n: usize) -> Result<SpectralField> {
    SpectralField::from_coeff_fn(Grid::new(1, n)?, |k| Complex64::new(g_fourier(k[0]), 0.0))
}

// ---------------------------------------------------------------- shear flow

/// Periodic profile functions for the shear flow.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Profile {
    Sin,
    G,
    /// Finite Fourier series `sum_{k=-K}^{K} c_k e^{iky}`; `coeffs[k + K]`.
    Fourier { coeffs: Vec<Complex64> },
}

impl Profile {
    pub fn fourier(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() % 2 == 0 {
            return Err(Error::Domain("Fourier profile needs 2K + 1 coefficients".into()));
        }
        Ok(Profile::Fourier { coeffs })
    }

    pub fn value(&self, y: f64) -> f64 {
        self.derivative(y, 0)
    }

    /// `m`-th derivative (sin/cos cycle, Fourier series otherwise).
    pub fn derivative(&self, y: f64, m: usize) -> f64 {
        match self {
            Profile::Sin => match m % 4 {
                0 => y.sin(),
                1 => y.cos(),
                2 => -y.sin(),
                _ => -y.cos(),
            },
            Profile::G => g_derivative(y, m),
            Profile::Fourier { coeffs } => {
                let kmax = (coeffs.len() / 2) as i64;
                let im = Complex64::new(0.0, 1.0);
                let mut s = Complex64::new(0.0, 0.0);
                for (i, c) in coeffs.iter().enumerate() {
                    let k = i as i64 - kmax;
                    if k == 0 && m > 0 {
                        continue;
                    }
                    let mult = (im * k as f64).powi(m as i32);
                    s += c * mult * Complex64::from_polar(1.0, k as f64 * y);
                }
                s.re
            }
        }
    }
}

/// `u(x, t) = (f(x2), 0, g(x1 - t f(x2)))`, an exact Euler solution with
/// zero pressure. Labels evolve as `X = (a1 + t f(a2), a2, a3 + t g(a1))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShearFlow {
    pub f: Profile,
    pub g: Profile,
}

impl Default for ShearFlow {
    fn default() -> Self {
        Self {
            f: Profile::Sin,
            g: Profile::G,
        }
    }
}

pub type Mat3 = [[f64; 3]; 3];

impl ShearFlow {
    pub fn velocity(&self, x: &[f64; 3], t: f64) -> [f64; 3] {
        let fx = self.f.value(x[1]);
        [fx, 0.0, self.g.value(x[0] - t * fx)]
    }

    /// `G[i][j] = d_j u^i`.
    pub fn velocity_gradient(&self, x: &[f64; 3], t: f64) -> Mat3 {
        let fx = self.f.value(x[1]);
        let fp = self.f.derivative(x[1], 1);
        let gp = self.g.derivative(x[0] - t * fx, 1);
        [[0.0, fp, 0.0], [0.0, 0.0, 0.0], [gp, -t * fp * gp, 0.0]]
    }

    pub fn vorticity(&self, x: &[f64; 3], t: f64) -> [f64; 3] {
        let g = self.velocity_gradient(x, t);
        [g[2][1] - g[1][2], g[0][2] - g[2][0], g[1][0] - g[0][1]]
    }

    pub fn flow_map(&self, a: &[f64; 3], t: f64) -> [f64; 3] {
        [a[0] + t * self.f.value(a[1]), a[1], a[2] + t * self.g.value(a[0])]
    }

    /// `J[i][k] = d X^i / d a_k`.
    pub fn flow_jacobian(&self, a: &[f64; 3], t: f64) -> Mat3 {
        let fp = self.f.derivative(a[1], 1);
        let gp = self.g.derivative(a[0], 1);
        [[1.0, t * fp, 0.0], [0.0, 1.0, 0.0], [t * gp, 0.0, 1.0]]
    }

    /// Closed-form inverse of [`Self::flow_jacobian`].
    pub fn inverse_jacobian(&self, a: &[f64; 3], t: f64) -> Mat3 {
        let p = t * self.f.derivative(a[1], 1);
        let q = t * self.g.derivative(a[0], 1);
        [[1.0, -p, 0.0], [0.0, 1.0, 0.0], [-q, p * q, 1.0]]
    }

    /// Lagrangian velocity `v(a, t) = u(X(a, t), t) = (f(a2), 0, g(a1))`.
    pub fn lagrangian_velocity(&self, a: &[f64; 3]) -> [f64; 3] {
        [self.f.value(a[1]), 0.0, self.g.value(a[0])]
    }

    /// `[j][k] = d v^j / d a_k`.
    pub fn lagrangian_velocity_gradient(&self, a: &[f64; 3]) -> Mat3 {
        [
            [0.0, self.f.derivative(a[1], 1), 0.0],
            [0.0, 0.0, 0.0],
            [self.g.derivative(a[0], 1), 0.0, 0.0],
        ]
    }

    /// `omega_0(a) = curl u(a, 0) = (0, -g'(a1), -f'(a2))`.
    pub fn initial_vorticity(&self, a: &[f64; 3]) -> [f64; 3] {
        [0.0, -self.g.derivative(a[0], 1), -self.f.derivative(a[1], 1)]
    }

    /// Residual of `u_t + u . grad u` (pressure is zero), by exact
    /// derivatives.
    pub fn euler_residual(&self, x: &[f64; 3], t: f64) -> [f64; 3] {
        let u = self.velocity(x, t);
        let grad = self.velocity_gradient(x, t);
        let fx = self.f.value(x[1]);
        let ut3 = -fx * self.g.derivative(x[0] - t * fx, 1);
        let mut r = [0.0, 0.0, ut3];
        for i in 0..3 {
            for j in 0..3 {
                r[i] += u[j] * grad[i][j];
            }
        }
        r
    }
}

/// Predicted decay `1 / (t + 1)` of the shear-flow analyticity radius.
pub fn shear_radius_prediction(t: f64) -> f64 {
    1.0 / (t + 1.0)
}

/// Width `rho` of the largest equal-width polystrip `|Im x1|, |Im x2| < rho`
/// on which `g(x1 - t sin x2)` is analytic: the root of `rho + t sinh rho = 1`.
pub fn shear_uniform_radius(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid + t * mid.sinh() > 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `u3(x1, x2, t)` sampled on an `n x n` grid (u does not depend on x3).
pub fn shear_u3_field(flow: &ShearFlow, t: f64, n: usize) -> Result<SpectralField> {
    SpectralField::from_fn(Grid::new(2, n)?, |x| flow.velocity(&[x[0], x[1], 0.0], t)[2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gevrey::estimate_radius;
    use crate::quadrature::{integrate, QuadConfig};
    use crate::spectral::spectral_derivative;

    fn rk4_cellular(a1: f64, t_end: f64, dt: f64) -> (f64, f64) {
        let rhs = |x: f64, y: f64| (x.sin(), x.cos() * y);
        let (mut x, mut y) = (a1, 1.0);
        let steps = (t_end / dt).round() as usize;
        for _ in 0..steps {
            let k1 = rhs(x, y);
            let k2 = rhs(x + 0.5 * dt * k1.0, y + 0.5 * dt * k1.1);
            let k3 = rhs(x + 0.5 * dt * k2.0, y + 0.5 * dt * k2.1);
            let k4 = rhs(x + dt * k3.0, y + dt * k3.1);
            x += dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            y += dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (x, y)
    }

    #[test]
    fn cellular_trivial_cases() {
        assert!((cellular_cos_x1(0.7, 0.0) - 0.7f64.cos()).abs() < 1e-15);
        assert!((cellular_y22(0.7, 0.0) - 1.0).abs() < 1e-15);
        assert!((cellular_cos_x1(0.0, 3.0) - 1.0).abs() < 1e-15);
        assert!((cellular_x1(0.7, 0.0) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn cellular_closed_forms_match_ode() {
        let (x, y) = rk4_cellular(1.0, 1.0, 1e-4);
        assert!((x.cos() - cellular_cos_x1(1.0, 1.0)).abs() < 1e-8);
        assert!((x - cellular_x1(1.0, 1.0)).abs() < 1e-8);
        assert!((y - cellular_y22(1.0, 1.0)).abs() < 1e-8);
    }

    #[test]
    fn cellular_closed_forms_satisfy_ode_by_differences() {
        let h = 1e-5;
        for &(a, t) in &[(0.4, 0.3), (2.0, 1.2), (-1.5, 0.8)] {
            let dx = (cellular_x1(a, t + h) - cellular_x1(a, t - h)) / (2.0 * h);
            assert!((dx - cellular_x1(a, t).sin()).abs() < 1e-6);
            let dy = (cellular_y22(a, t + h) - cellular_y22(a, t - h)) / (2.0 * h);
            assert!((dy - cellular_x1(a, t).cos() * cellular_y22(a, t)).abs() < 1e-6);
        }
    }

    #[test]
    fn singularity_radius_values() {
        assert!(matches!(cellular_singularity_radius(0.0), Err(Error::Domain(_))));
        assert!(cellular_singularity_radius(1e-6).unwrap() > 14.0);
        let e = 1f64.exp();
        assert!((cellular_singularity_radius(1.0).unwrap() - ((e + 1.0) / (e - 1.0)).ln()).abs() < 1e-15);
        assert!((cellular_singularity_radius(1.0).unwrap() - 0.7719).abs() < 1e-4);
        assert!(persistence_time_t(20.0).unwrap() < 1e-8);
        assert!(matches!(persistence_time_t(-1.0), Err(Error::Domain(_))));
        for &d in &[0.01, 0.3, 1.0, 2.5, 7.0] {
            let tt = persistence_time_t(persistence_time_t(d).unwrap()).unwrap();
            assert!((tt - d).abs() < 1e-12 * d.max(1.0));
            assert_eq!(cellular_singularity_radius(d).unwrap(), persistence_time_t(d).unwrap());
        }
    }

    #[test]
    fn pole_found_by_newton() {
        for &t in &[0.5, 1.0, 2.0] {
            let rho = cellular_singularity_radius(t).unwrap();
            let z = cellular_pole_newton(t, Complex64::new(0.2, 1.3 * rho)).unwrap();
            assert!(z.re.abs() < 1e-10 && (z.im - rho).abs() < 1e-10, "{z}");
            assert_eq!(cellular_y22_complex(Complex64::new(0.0, rho), t), Evaluation::Pole);
            assert!(cellular_y22_complex(Complex64::new(0.0, 0.5 * rho), t).value().is_some());
        }
    }

    #[test]
    fn y22_radius_fit() {
        for &t in &[0.5, 1.0, 2.0] {
            let f = cellular_y22_field(t, 512).unwrap();
            let r = estimate_radius(&f, None).unwrap();
            let exact = cellular_singularity_radius(t).unwrap();
            assert!(r.reliable && (r.delta_hat / exact - 1.0).abs() < 0.02, "t={t}: {r:?}");
        }
    }

    #[test]
    fn y22_coefficients_are_geometric() {
        let t = 0.8;
        let sampled = cellular_y22_field(t, 128).unwrap();
        let exact = cellular_y22_coefficients(t, 128).unwrap();
        for (a, b) in sampled.coeffs().iter().zip(exact.coeffs()).take(30) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn g_values_and_coefficients() {
        let s1 = 1f64.sinh();
        assert!((g_profile(0.0) - 1.0 / (s1 * s1)).abs() < 1e-14);
        assert!((g_profile(0.9) - 1.0 / (s1 * s1 + 0.9f64.sin().powi(2))).abs() < 1e-14);
        let cfg = QuadConfig::with_tolerances(1e-14, 1e-13);
        let re = integrate(|y: f64| g_profile(y) * (10.0 * y).cos(), -PI, PI, &[], &cfg).unwrap().value / (2.0 * PI);
        assert!((re - g_fourier(10)).abs() < 1e-10);
        assert_eq!(g_fourier(7), 0.0);
    }

    #[test]
    fn g_derivatives_series_vs_spectral() {
        let field = g_coefficients_field(256).unwrap();
        for m in [1usize, 2, 5] {
            let d = spectral_derivative(&field, &[m]).unwrap();
            let y = field.grid().coordinate(37);
            assert!((d.values()[37] - g_derivative(y, m)).abs() < 1e-10 * (1.0 + d.values()[37].abs()));
        }
    }

    #[test]
    fn g_even_derivative_lower_bound() {
        let field = g_coefficients_field(256).unwrap();
        let mut fact = 1.0;
        for n in 1..=8usize {
            fact *= ((2 * n - 1) * (2 * n)) as f64;
            let d = spectral_derivative(&field, &[2 * n]).unwrap();
            let at0 = d.eval_at(&[0.0]);
            let signed = if n % 2 == 0 { at0 } else { -at0 };
            assert!(signed >= fact / 4.0, "n={n}: {signed} vs {}", fact / 4.0);
        }
    }

    #[test]
    fn shear_flow_basics() {
        let flow = ShearFlow::default();
        let x = [0.3, -1.2, 2.0];
        let u0 = flow.velocity(&x, 0.0);
        assert_eq!(u0, [(-1.2f64).sin(), 0.0, g_profile(0.3)]);
        let u = flow.velocity(&[0.3, 0.0, 0.0], 1.7);
        assert!((u[2] - g_profile(0.3)).abs() < 1e-15);
        for t in [0.0, 0.5, 1.0] {
            let r = flow.euler_residual(&x, t);
            assert!(r.iter().all(|v| v.abs() < 1e-10), "{r:?}");
        }
        assert!((shear_radius_prediction(1.0) - 0.5).abs() < 1e-15);
        assert!((shear_radius_prediction(0.0) - 1.0).abs() < 1e-15);
        let rho = shear_uniform_radius(1.0).unwrap();
        assert!((rho + f64::sinh(rho) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn shear_divergence_free_spectrally() {
        let flow = ShearFlow::default();
        let grid = Grid::new(3, 64).unwrap();
        let t = 0.5;
        let comp = |i: usize| {
            SpectralField::from_fn(grid, |x| flow.velocity(&[x[0], x[1], x[2]], t)[i]).unwrap()
        };
        let d1 = spectral_derivative(&comp(0), &[1, 0, 0]).unwrap();
        let d3 = spectral_derivative(&comp(2), &[0, 0, 1]).unwrap();
        let div = d1.values().iter().zip(d3.values()).fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
        assert!(div < 1e-12, "{div}");
    }

    #[test]
    fn jacobian_inverse_is_exact() {
        let flow = ShearFlow::default();
        let a = [0.4, 1.1, -0.6];
        let j = flow.flow_jacobian(&a, 1.3);
        let y = flow.inverse_jacobian(&a, 1.3);
        for i in 0..3 {
            for k in 0..3 {
                let s: f64 = (0..3).map(|l| j[i][l] * y[l][k]).sum();
                assert!((s - if i == k { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn fourier_profile_derivatives() {
        // 0.5 e^{-2iy} + 1 + 0.5 e^{2iy} = 1 + cos 2y
        let c = vec![
            Complex64::new(0.5, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.5, 0.0),
        ];
        let p = Profile::fourier(c).unwrap();
        assert!((p.value(0.3) - (1.0 + 0.6f64.cos())).abs() < 1e-15);
        assert!((p.derivative(0.3, 1) + 2.0 * 0.6f64.sin()).abs() < 1e-14);
    }
}
