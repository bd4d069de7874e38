//! A 2π-periodic profile `phi` with finite `G_{1,1}` norm whose third
//! derivative blows up at `z = -i`.
//!
//! On the line, `h_hat(xi) = e^{-|xi|} - p(|xi|) e^{-xi^2}` with
//! `p(x) = 1 - x + 3/2 x^2 - 7/6 x^3`, `H` is the fourfold antiderivative of
//! `h` from 0, `Phi = e^{-x^2/2} H`, and `phi` is the periodization of `Phi`.
//! Fourier transforms use `F_hat(xi) = (2 pi)^{-1/2} int F(x) e^{-i x xi} dx`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gevrey::{build_ladder, gevrey_norm, GevreyEstimate, LadderMode};
use crate::quadrature::{integrate, integrate_segment, QuadConfig};
use crate::spectral::{Grid, SpectralField};

/// `sqrt(2 / pi)`.
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

/// Below this `|xi|`, `h_hat` and `H_hat` are summed from their Taylor series.
pub const SERIES_CUTOFF: f64 = 0.5;

/// Smallest allowed distance from the branch cuts of `arctan` and `log(1+z^2)`.
pub const BRANCH_GUARD: f64 = 1e-12;

const SERIES_TERMS: usize = 40;

fn poly_p(x: f64) -> f64 {
    1.0 - x + 1.5 * x * x - 7.0 / 6.0 * x * x * x
}

/// Coefficients `s_n` with `h_hat(x) = x^4 sum_n s_n x^n` for `x >= 0`.
fn series() -> &'static [f64] {
    static S: OnceLock<Vec<f64>> = OnceLock::new();
    S.get_or_init(|| {
        let len = SERIES_TERMS + 4;
        let mut fact = vec![1.0f64; len + 1];
        for i in 1..=len {
            fact[i] = fact[i - 1] * i as f64;
        }
        let mut exp_x = vec![0.0; len];
        let mut exp_x2 = vec![0.0; len];
        for n in 0..len {
            exp_x[n] = if n % 2 == 0 { 1.0 } else { -1.0 } / fact[n];
            if n % 2 == 0 {
                let m = n / 2;
                exp_x2[n] = if m % 2 == 0 { 1.0 } else { -1.0 } / fact[m];
            }
        }
        let p = [1.0, -1.0, 1.5, -7.0 / 6.0];
        let mut c = exp_x;
        for n in 0..len {
            for (j, pj) in p.iter().enumerate() {
                if n >= j {
                    c[n] -= pj * exp_x2[n - j];
                }
            }
        }
        c[4..].to_vec()
    })
}

fn series_eval(x: f64) -> f64 {
    series().iter().rev().fold(0.0, |acc, s| acc * x + s)
}

/// `h_hat(xi)`.
pub fn hat_h(xi: f64) -> f64 {
    let x = xi.abs();
    if x < SERIES_CUTOFF {
        x.powi(4) * series_eval(x)
    } else {
        (-x).exp() - poly_p(x) * (-x * x).exp()
    }
}

/// `H_hat(xi) = h_hat(xi) / xi^4`, equal to `25/24` at 0.
pub fn hat_big_h(xi: f64) -> f64 {
    let x = xi.abs();
    if x < SERIES_CUTOFF {
        series_eval(x)
    } else {
        ((-x).exp() - poly_p(x) * (-x * x).exp()) / x.powi(4)
    }
}

/// `e^{|xi|} H_hat(xi)`.
fn hat_big_h_scaled(xi: f64) -> f64 {
    let x = xi.abs();
    if x < SERIES_CUTOFF {
        x.exp() * series_eval(x)
    } else {
        (1.0 - poly_p(x) * (x - x * x).exp()) / x.powi(4)
    }
}

fn quad_cfg(abs_tol: f64, rel_tol: f64) -> QuadConfig {
    QuadConfig {
        max_intervals: 4000,
        ..QuadConfig::with_tolerances(abs_tol, rel_tol)
    }
}

/// `H_F(0)` and `H_F''(0)` for the Fourier-side antiderivative `H_F` with
/// transform `H_hat`. The antiderivative from 0 is
/// `H = H_F - H_F(0) - H_F''(0) x^2 / 2` (odd derivatives vanish by symmetry).
pub fn fourier_antiderivative_moments() -> Result<(f64, f64)> {
    static M: OnceLock<(f64, f64)> = OnceLock::new();
    if let Some(m) = M.get() {
        return Ok(*m);
    }
    let cfg = quad_cfg(1e-15, 1e-14);
    let bps = [0.5, 1.0, 2.0, 5.0, 10.0, 20.0];
    let i0 = integrate(hat_big_h, 0.0, 60.0, &bps, &cfg)?.value;
    let i2 = integrate(|e: f64| e * e * hat_big_h(e), 0.0, 80.0, &bps, &cfg)?.value;
    let norm = 2.0 / (2.0 * PI).sqrt();
    let m = (norm * i0, -norm * i2);
    Ok(*M.get_or_init(|| m))
}

/// `Phi_hat(xi)` with its quadrature error estimate.
///
/// The convolution with the Gaussian is computed for `e^{|xi|} Phi_hat`,
/// whose integrand is O(1) near its peak at `eta = |xi| - 1`, so the tail
/// `~ e^{-|xi|} / |xi|^4` keeps full relative accuracy.
pub fn hat_big_phi(xi: f64) -> Result<(f64, f64)> {
    let x = xi.abs();
    let norm = 1.0 / (2.0 * PI).sqrt();
    let f = |eta: f64| (-(x - eta).powi(2) / 2.0 + x - eta.abs()).exp() * hat_big_h_scaled(eta);
    let lo = x.min(0.0) - 14.0;
    let hi = x + 14.0;
    let mut bps = vec![0.0, x - 1.0, x];
    bps.retain(|b| *b > lo && *b < hi);
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let r = integrate(f, lo, hi, &bps, &quad_cfg(1e-15, 1e-13))?;
    let (hf0, hf2) = fourier_antiderivative_moments()?;
    // transform of exp(-x^2/2)(c0 + c2 x^2) is exp(-xi^2/2)(c0 + c2 (1 - xi^2))
    let (c0, c2) = (-hf0, -hf2 / 2.0);
    let scaled = norm * r.value + (x - x * x / 2.0).exp() * (c0 + c2 * (1.0 - x * x));
    Ok(((-x).exp() * scaled, (-x).exp() * norm * r.error))
}

/// Fourier coefficients `phi_hat(k) = Phi_hat(k) / sqrt(2 pi)` for `|k| <= k_max`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicCounterexample {
    pub k_max: usize,
    /// `phi_hat(k)` for `k = 0..=k_max` (the profile is even and real).
    pub coeffs: Vec<f64>,
    pub errors: Vec<f64>,
}

impl PeriodicCounterexample {
    pub fn new(k_max: usize) -> Result<Self> {
        if k_max < 8 {
            return Err(Error::Config(format!("k_max must be at least 8, got {k_max}")));
        }
        let norm = 1.0 / (2.0 * PI).sqrt();
        let mut coeffs = Vec::with_capacity(k_max + 1);
        let mut errors = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let (v, e) = hat_big_phi(k as f64)?;
            coeffs.push(norm * v);
            errors.push(norm * e);
        }
        Ok(Self { k_max, coeffs, errors })
    }

    pub fn coeff(&self, k: i64) -> f64 {
        let a = k.unsigned_abs() as usize;
        if a <= self.k_max {
            self.coeffs[a]
        } else {
            0.0
        }
    }

    /// `max_k |k|^4 e^{|k|} |phi_hat(k)|` over `1 <= |k| <= k_max`.
    pub fn decay_constant(&self) -> f64 {
        (1..=self.k_max)
            .map(|k| (k as f64).powi(4) * (k as f64).exp() * self.coeffs[k].abs())
            .fold(0.0, f64::max)
    }

    /// `phi` as a field on `n` points of `[-pi, pi)` (`n >= 2 k_max + 2`).
    pub fn field(&self, n: usize) -> Result<SpectralField> {
        if n < 2 * self.k_max + 2 {
            return Err(Error::Config(format!("grid of {n} points cannot hold |k| <= {}", self.k_max)));
        }
        let grid = Grid::new(1, n)?;
        SpectralField::from_coeff_fn(grid, |k| Complex64::new(self.coeff(k[0]), 0.0))
    }

    /// Truncated Fourier series of `phi` at real `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs[0]
            + 2.0
                * (1..=self.k_max)
                    .map(|k| self.coeffs[k] * (k as f64 * x).cos())
                    .sum::<f64>()
    }
}

/// Partial sums of `sum_n ||phi^{(n)}||_{H^2} delta^n / n!^s`.
pub fn g11_partial_sums(pc: &PeriodicCounterexample, delta: f64, s: f64, n_max: usize) -> Result<GevreyEstimate> {
    // the summand at order n is carried by |k| near n; leave room above it
    if 2 * (n_max + 2) > pc.k_max {
        return Err(Error::Truncation(format!(
            "k_max = {} too small for order {n_max} (need k_max >= {})",
            pc.k_max,
            2 * (n_max + 2)
        )));
    }
    let n = (2 * pc.k_max + 2).next_power_of_two();
    let ladder = build_ladder(&pc.field(n)?, LadderMode::Axis(0), 2.0, n_max)?;
    gevrey_norm(&ladder, s, delta)
}

/// `max_{n >= 5} n^{9/4} T_n` for the terms of a Gevrey estimate, and the
/// same maximum restricted to the upper half of the orders.
pub fn tail_constants(est: &GevreyEstimate) -> (f64, f64) {
    let n_max = est.log_terms.len() - 1;
    let scaled = |n: usize| (est.log_terms[n] + 2.25 * (n as f64).ln()).exp();
    let all = (5..=n_max).map(scaled).fold(0.0, f64::max);
    let upper = (n_max / 2..=n_max).map(scaled).fold(0.0, f64::max);
    (all, upper)
}

fn branch_check(z: Complex64) -> Result<()> {
    let d = if z.im.abs() >= 1.0 {
        z.re.abs()
    } else {
        z.re.hypot(z.im.abs() - 1.0)
    };
    if d < BRANCH_GUARD {
        return Err(Error::Branch {
            re: z.re,
            im: z.im,
            distance: d,
        });
    }
    Ok(())
}

/// The combination `H_1 - 3z H_2 + 3(z^2-1) H_3 + z(3-z^2) H_4` of the
/// iterated integrals of `h_1 = sqrt(2/pi) / (1 + z^2)`, in closed form.
pub fn script_h(z: Complex64) -> Result<Complex64> {
    branch_check(z)?;
    let z2 = z * z;
    let z4 = z2 * z2;
    let z6 = z4 * z2;
    let poly = z * (-18.0 + 33.0 * z2 - 5.0 * z4);
    let at = (15.0 - 45.0 * z2 + 15.0 * z4 - z6) * z.atan() * 2.0;
    let lg = z * (39.0 - 28.0 * z2 + 3.0 * z4) * (1.0 + z2).ln();
    Ok((poly + at + lg) * (SQRT_2_OVER_PI / 12.0))
}

/// `script_h(i y)` for real `|y| < 1`, written with real `arctanh` and
/// `log(1 - y^2)`.
pub fn script_h_imag_axis(y: f64) -> Result<Complex64> {
    if !(y.abs() < 1.0) {
        return Err(Error::Domain(format!("imaginary-axis form needs |y| < 1, got {y}")));
    }
    let c = SQRT_2_OVER_PI;
    let (y2, y4, y6) = (y * y, y.powi(4), y.powi(6));
    let at = y.atanh();
    let v = c * y2 * at
        + c / 12.0 * y * (-18.0 - 33.0 * y2 - 5.0 * y4)
        + c / 12.0 * (39.0 + 28.0 * y2 + 3.0 * y4) * (2.0 * at + y * (1.0 - y2).ln())
        + c / 6.0 * (-24.0 + 11.0 * y2 + 12.0 * y4 + y6) * at;
    Ok(Complex64::new(0.0, v))
}

/// Fourfold antiderivative of `h_1` from 0, in closed form.
pub fn script_h4(z: Complex64) -> Result<Complex64> {
    branch_check(z)?;
    let z2 = z * z;
    Ok((5.0 * z2 + 2.0 * z * (z2 - 3.0) * z.atan() - (3.0 * z2 - 1.0) * (1.0 + z2).ln()) * (SQRT_2_OVER_PI / 12.0))
}

/// `h_1(z) = sqrt(2/pi) / (1 + z^2)`.
pub fn h1(z: Complex64) -> Complex64 {
    SQRT_2_OVER_PI / (1.0 + z * z)
}

/// `E_0 = H'''' - h_1`, the entire part of `h`:
/// `E_0(w) = -sqrt(2/pi) int_0^inf p(xi) e^{-xi^2} cos(w xi) d xi`.
pub fn script_e0(w: Complex64) -> Result<Complex64> {
    let cfg = quad_cfg(1e-16, 1e-14);
    let r = integrate(
        |xi: f64| (w * xi).cos() * (poly_p(xi) * (-xi * xi).exp()),
        0.0,
        12.0,
        &[1.0, 2.0, 4.0, 8.0],
        &cfg,
    )?;
    Ok(r.value * -SQRT_2_OVER_PI)
}

/// Iterated integrals `E_1..E_4` of `E_0` from 0 along the segment to `z`:
/// `E_j(z) = z^j int_0^1 (1-tau)^{j-1}/(j-1)! E_0(z tau) d tau`.
pub fn script_e_parts(z: Complex64) -> Result<[Complex64; 4]> {
    let cfg = quad_cfg(1e-14, 1e-12);
    let fact = [1.0, 1.0, 2.0, 6.0];
    let mut out = [Complex64::new(0.0, 0.0); 4];
    if z == Complex64::new(0.0, 0.0) {
        return Ok(out);
    }
    // tabulate E_0 on a GK-friendly partition by integrating each weight
    let e0 = |tau: f64| script_e0(z * tau).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
    for j in 1..=4 {
        let r = integrate(
            |tau: f64| e0(tau) * ((1.0 - tau).powi(j as i32 - 1) / fact[j - 1]),
            0.0,
            1.0,
            &[],
            &cfg,
        )?;
        if !(r.value.re.is_finite() && r.value.im.is_finite()) {
            return Err(Error::Precision {
                context: "inner E_0 quadrature".into(),
                estimate: f64::NAN,
                tolerance: cfg.abs_tol,
            });
        }
        out[j - 1] = r.value * z.powi(j as i32);
    }
    Ok(out)
}

/// `E_1 - 3z E_2 + 3(z^2-1) E_3 + z(3-z^2) E_4`.
pub fn script_e(z: Complex64) -> Result<Complex64> {
    let e = script_e_parts(z)?;
    Ok(e[0] - 3.0 * z * e[1] + 3.0 * (z * z - 1.0) * e[2] + z * (3.0 - z * z) * e[3])
}

/// `Phi'''(z) = e^{-z^2/2} (script_h(z) + script_e(z))`.
pub fn big_phi_triple_prime(z: Complex64) -> Result<Complex64> {
    Ok((-(z * z) / 2.0).exp() * (script_h(z)? + script_e(z)?))
}

/// `phi'''(iy)` split into the principal term and the images `m = 1, -1, 2, -2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriplePrime {
    pub y: f64,
    pub principal: Complex64,
    pub images: [Complex64; 4],
    pub total: Complex64,
}

/// Images with `|m| > 2` are below `e^{1/2 - 18 pi^2}` and dropped.
pub fn phi_triple_prime_imag_axis(y: f64) -> Result<TriplePrime> {
    if !(y.abs() < 1.0) {
        return Err(Error::Domain(format!("phi''' on the imaginary axis needs |y| < 1, got {y}")));
    }
    let z = Complex64::new(0.0, y);
    let principal = big_phi_triple_prime(z)?;
    let mut images = [Complex64::new(0.0, 0.0); 4];
    for (slot, m) in [1.0, -1.0, 2.0, -2.0].iter().enumerate() {
        images[slot] = big_phi_triple_prime(z - 2.0 * PI * m)?;
    }
    let total = principal + images.iter().sum::<Complex64>();
    Ok(TriplePrime {
        y,
        principal,
        images,
        total,
    })
}

/// `sqrt(2/pi) e^{y^2/2} |arctanh y|`, the leading growth of `|Phi'''(iy)|`.
pub fn arctanh_asymptote(y: f64) -> f64 {
    SQRT_2_OVER_PI * (y * y / 2.0).exp() * y.atanh().abs()
}

/// `R_t = 1 - 3t/4`.
pub fn r_t(t: f64) -> f64 {
    1.0 - 0.75 * t
}

/// `psi(i y2, i log 2) = phi'''(i (y2 - 3t/4))`, using `sin(i log 2) = 3i/4`.
pub fn psi_eval(y2: f64, t: f64) -> Result<Complex64> {
    if !(t > 0.0 && t <= 0.1) {
        return Err(Error::Domain(format!("t must lie in (0, 1/10], got {t}")));
    }
    let y = y2 - 0.75 * t;
    if !(y.abs() < 1.0) {
        return Err(Error::Domain(format!("|y2 - 3t/4| = {} must be < 1", y.abs())));
    }
    Ok(phi_triple_prime_imag_axis(y)?.total)
}

/// `sup_{|xi| <= 1} |H_hat| + sup_{|xi| >= 1} |xi|^4 e^{|xi|} |H_hat|` over a grid.
pub fn scan_h_bound(xi_max: f64, points: usize) -> f64 {
    let mut inner = 0.0f64;
    let mut outer = 0.0f64;
    for i in 0..=points {
        let xi = xi_max * i as f64 / points as f64;
        if xi <= 1.0 {
            inner = inner.max(hat_big_h(xi).abs());
        }
        if xi >= 1.0 {
            outer = outer.max(hat_big_h_scaled(xi).abs() * xi.powi(4));
        }
    }
    inner + outer
}

/// Same scan for `Phi_hat`.
pub fn scan_phi_bound(xi_max: f64, points: usize) -> Result<f64> {
    let mut inner = 0.0f64;
    let mut outer = 0.0f64;
    for i in 0..=points {
        let xi = xi_max * i as f64 / points as f64;
        let v = hat_big_phi(xi)?.0.abs();
        if xi <= 1.0 {
            inner = inner.max(v);
        }
        if xi >= 1.0 {
            outer = outer.max(v * xi.powi(4) * xi.exp());
        }
    }
    Ok(inner + outer)
}

/// `H(x)` on the real line by direct quadrature of `h = h_1 + E_0`:
/// `H(x) = int_0^x (x - s)^3 / 6 h(s) ds`.
pub fn big_h_by_quadrature(x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    let cfg = quad_cfg(1e-14, 1e-12);
    let r = integrate(
        |s: f64| {
            let h = h1(Complex64::new(s, 0.0)).re + script_e0(Complex64::new(s, 0.0)).map(|v| v.re).unwrap_or(f64::NAN);
            (x - s).powi(3) / 6.0 * h
        },
        0.0,
        x,
        &[],
        &cfg,
    )?;
    Ok(r.value)
}

/// `Phi'''(z)` from iterated path integrals of `h = h_1 + E_0` (no closed
/// forms): `H^{(4-j)}(z) = int_0^z (z-w)^{j-1}/(j-1)! h(w) dw`.
pub fn big_phi_triple_prime_by_quadrature(z: Complex64) -> Result<Complex64> {
    let cfg = quad_cfg(1e-13, 1e-11);
    let fact = [1.0, 1.0, 2.0, 6.0];
    let mut d = [Complex64::new(0.0, 0.0); 4];
    for j in 1..=4 {
        let r = integrate_segment(
            |w| (h1(w) + script_e0(w).unwrap_or(Complex64::new(f64::NAN, 0.0))) * ((z - w).powi(j as i32 - 1) / fact[j - 1]),
            Complex64::new(0.0, 0.0),
            z,
            &cfg,
        )?;
        d[j - 1] = r.value;
    }
    // d[0] = H''', d[1] = H'', d[2] = H', d[3] = H
    let v = d[0] - 3.0 * z * d[1] + 3.0 * (z * z - 1.0) * d[2] + z * (3.0 - z * z) * d[3];
    Ok((-(z * z) / 2.0).exp() * v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hat_h_limits() {
        assert_eq!(hat_h(0.0), 0.0);
        assert!((hat_h(1e-3) / 1e-12 - 25.0 / 24.0).abs() < 1e-3 * 25.0 / 24.0);
        assert_eq!(hat_big_h(0.0), 25.0 / 24.0);
        let xi = 30.0f64;
        assert!((hat_big_h(xi) * xi.powi(4) * xi.exp() - 1.0).abs() < 1e-6);
        assert_eq!(hat_h(-0.7), hat_h(0.7));
        // series and closed form agree where both are accurate
        for &x in &[0.45f64, 0.5, 0.55] {
            let direct = (-x).exp() - poly_p(x) * (-x * x).exp();
            assert!((x.powi(4) * series_eval(x) - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn h_identity_on_grid() {
        for i in 0..=2000 {
            let xi = -10.0 + 0.01 * i as f64;
            assert!((hat_big_h(xi) * xi.powi(4) - hat_h(xi)).abs() < 1e-12);
        }
    }

    #[test]
    fn bounds_are_finite() {
        let c0 = scan_h_bound(40.0, 4000);
        assert!(c0.is_finite() && c0 > 1.0 && c0 < 10.0, "{c0}");
        let c1 = scan_phi_bound(25.0, 100).unwrap();
        assert!(c1.is_finite() && c1 < 100.0, "{c1}");
    }

    #[test]
    fn phi_hat_even_and_accurate() {
        let (a, ea) = hat_big_phi(2.5).unwrap();
        let (b, _) = hat_big_phi(-2.5).unwrap();
        assert_eq!(a, b);
        assert!(ea < 1e-10);
        let (far, ef) = hat_big_phi(60.0).unwrap();
        assert!(far > 0.0 && ef < 1e-10 * far.abs(), "{far} {ef}");
    }

    #[test]
    fn phi_hat_matches_sampled_transform() {
        // Phi is even; trapezoid sum of Phi(x) cos(x xi) over x >= 0
        let h = 0.05;
        let m = 240;
        let samples: Vec<f64> = (0..=m)
            .map(|i| {
                let x = i as f64 * h;
                (-x * x / 2.0).exp() * big_h_by_quadrature(x).unwrap()
            })
            .collect();
        for &xi in &[0.0, 0.5, 1.0, 2.0, 3.5] {
            let mut s = samples[0];
            for (i, v) in samples.iter().enumerate().skip(1) {
                s += 2.0 * v * (i as f64 * h * xi).cos();
            }
            let direct = s * h / (2.0 * PI).sqrt();
            let quad = hat_big_phi(xi).unwrap().0;
            assert!((direct - quad).abs() < 1e-6, "xi={xi}: {direct} vs {quad}");
        }
    }

    #[test]
    fn script_h_forms_agree() {
        assert_eq!(script_h(c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        for i in 0..40 {
            let y = -0.9999 + 1.9 * i as f64 / 39.0;
            let a = script_h(c(0.0, y)).unwrap();
            let b = script_h_imag_axis(y).unwrap();
            assert!(a.re.abs() < 1e-12);
            assert!((a - b).norm() < 1e-12 * (1.0 + b.norm()), "y={y}: {a} vs {b}");
        }
        assert!(matches!(script_h(c(0.0, 1.0)), Err(Error::Branch { .. })));
        assert!(matches!(script_h(c(0.0, -2.0)), Err(Error::Branch { .. })));
        assert!(script_h(c(1e-3, -2.0)).is_ok());
    }

    #[test]
    fn script_h_reference_values() {
        // 40-digit references
        let refs = [
            (0.3, 0.291_878_813_173_307_714_7),
            (-0.5, -0.662_296_018_340_791_346_1),
            (-0.9, -2.905_096_424_100_293_584_7),
            (-0.99, -4.699_963_257_099_120_094_9),
        ];
        for (y, v) in refs {
            let h = script_h(c(0.0, y)).unwrap();
            assert!((h.im - v).abs() < 1e-13 * v.abs().max(1.0), "y={y}: {} vs {v}", h.im);
        }
    }

    #[test]
    fn script_h4_derivative() {
        // fourth difference of H_4 against h_1 at a real point
        let x = 0.3;
        let e = 1e-2;
        let f = |t: f64| script_h4(c(t, 0.0)).unwrap().re;
        let d4 = (f(x + 2.0 * e) - 4.0 * f(x + e) + 6.0 * f(x) - 4.0 * f(x - e) + f(x - 2.0 * e)) / e.powi(4);
        assert!((d4 - h1(c(x, 0.0)).re).abs() < 1e-3);
        assert_eq!(script_h4(c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn script_e_properties() {
        assert_eq!(script_e(c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        for &x in &[0.3, -0.8, 2.0] {
            assert!(script_e(c(x, 0.0)).unwrap().im.abs() < 1e-10);
        }
        let mut sup = 0.0f64;
        for i in 0..=10 {
            sup = sup.max(script_e(c(0.0, -0.1 * i as f64)).unwrap().norm());
        }
        assert!(sup.is_finite() && sup < 10.0);
    }

    #[test]
    fn closed_form_matches_path_quadrature() {
        for i in 0..10 {
            let y = -0.95 + 0.19 * i as f64;
            let z = c(0.0, y);
            let a = big_phi_triple_prime(z).unwrap();
            let b = big_phi_triple_prime_by_quadrature(z).unwrap();
            assert!((a - b).norm() < 1e-7, "y={y}: {a} vs {b}");
        }
    }

    #[test]
    fn triple_prime_reference_values() {
        // 20-digit references for Phi'''(iy) (imaginary part) and |m = 1 image|
        let refs = [
            (-0.9, -2.893_082_221_739_669_7, 3.624_115_451_476_796e-6),
            (-0.99, -5.625_331_545_524_915_5, 4.012_260_703_684_666e-6),
            (-0.999, -7.343_868_094_582_179_2, 4.055_410_086_691_939e-6),
            (-0.9999, -8.884_685_534_285_495_7, 4.059_771_638_450_326e-6),
        ];
        for (y, v, img) in refs {
            let t = phi_triple_prime_imag_axis(y).unwrap();
            assert!(t.principal.re.abs() < 1e-12);
            assert!((t.principal.im - v).abs() < 1e-9 * v.abs(), "y={y}: {} vs {v}", t.principal.im);
            assert!((t.images[0].norm() - img).abs() < 1e-6 * img);
        }
    }

    #[test]
    fn images_are_negligible() {
        let t = phi_triple_prime_imag_axis(-0.9).unwrap();
        assert!(t.images[2].norm() < 1e-15 * t.images[0].norm());
        assert!(t.images[3].norm() < 1e-15 * t.images[1].norm());
        assert!(t.images[0].norm() < 1e-5 * t.principal.norm());
    }

    #[test]
    fn psi_reduction() {
        let s = Complex64::new(0.0, 2f64.ln()).sin();
        assert!((s - c(0.0, 0.75)).norm() < 1e-15);
        assert!((r_t(0.08) - 0.94).abs() < 1e-15);
        let t = 0.1;
        let end = -r_t(t);
        let vals: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|d| psi_eval(end + d, t).unwrap().norm()).collect();
        assert!(vals[0] < vals[1] && vals[1] < vals[2], "{vals:?}");
        assert!(psi_eval(end, t).is_err());
        assert!(psi_eval(0.0, 0.2).is_err());
    }
}
