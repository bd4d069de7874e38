//! Globally adaptive Gauss-Kronrod (10/21 point) quadrature on finite
//! intervals, for real and complex integrands.
//!
//! The interval with the largest error estimate is bisected until the
//! summed estimate falls below `max(abs_tol, rel_tol * |I|)`. Breakpoints
//! can be supplied to pre-split the range at kinks or known features.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Values that can be integrated: reals and complex numbers.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn modulus(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_intervals: 2000,
        }
    }
}

impl QuadConfig {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    /// Summed |Kronrod - Gauss| estimate over the final partition.
    pub error: f64,
    pub intervals: usize,
}

/// One Gauss-Kronrod 21 panel: (kronrod, |kronrod - gauss|).
fn gk21<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = T::zero();
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let s = f1 + f2;
        kronrod = kronrod + s * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + s * WG[j / 2];
        }
    }
    let k = kronrod * half;
    let g = gauss * half;
    (k, (k - g).modulus())
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrate `f` over `[a, b]`, pre-splitting at any `breakpoints` that lie
/// strictly inside the interval.
pub fn integrate<T, F>(f: F, a: f64, b: f64, breakpoints: &[f64], cfg: &QuadConfig) -> Result<QuadResult<T>>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("integration bounds must be finite: [{a}, {b}]")));
    }
    if a == b {
        return Ok(QuadResult {
            value: T::zero(),
            error: 0.0,
            intervals: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut cuts: Vec<f64> = vec![lo];
    let mut inner: Vec<f64> = breakpoints.iter().copied().filter(|&p| p > lo && p < hi).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner);
    cuts.push(hi);

    let mut heap = BinaryHeap::new();
    let mut total = T::zero();
    let mut total_err = 0.0;
    for w in cuts.windows(2) {
        let (v, e) = gk21(&f, w[0], w[1]);
        total = total + v;
        total_err += e;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }

    // Panels too narrow to split further are parked here.
    let mut frozen: Vec<Panel<T>> = Vec::new();
    loop {
        let target = cfg.abs_tol.max(cfg.rel_tol * total.modulus());
        if total_err <= target {
            break;
        }
        if heap.len() + frozen.len() >= cfg.max_intervals {
            return Err(Error::Precision {
                context: format!("interval budget {} exhausted on [{lo}, {hi}]", cfg.max_intervals),
                estimate: total_err,
                tolerance: target,
            });
        }
        let Some(worst) = heap.pop() else {
            return Err(Error::Precision {
                context: format!("no splittable panels left on [{lo}, {hi}]"),
                estimate: total_err,
                tolerance: target,
            });
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) < 1e-14 * (1.0 + worst.a.abs()) {
            frozen.push(worst);
            continue;
        }
        let (v1, e1) = gk21(&f, worst.a, mid);
        let (v2, e2) = gk21(&f, mid, worst.b);
        total = total - worst.value + v1 + v2;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }

    // Re-sum to shed drift from the incremental updates.
    let mut value = T::zero();
    let mut error = 0.0;
    let intervals = heap.len() + frozen.len();
    for p in heap.into_iter().chain(frozen) {
        value = value + p.value;
        error += p.error;
    }
    Ok(QuadResult {
        value: value * sign,
        error,
        intervals,
    })
}

/// Integrate a complex-valued function along the straight segment from
/// `z0` to `z1`, parameterised as `z0 + s (z1 - z0)`, `s in [0, 1]`.
pub fn integrate_segment<F>(f: F, z0: Complex64, z1: Complex64, cfg: &QuadConfig) -> Result<QuadResult<Complex64>>
where
    F: Fn(Complex64) -> Complex64,
{
    let dz = z1 - z0;
    let r = integrate(|s: f64| f(z0 + dz * s) * dz, 0.0, 1.0, &[], cfg)?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let cfg = QuadConfig::default();
        let r = integrate(|x: f64| x.powi(7) - 3.0 * x * x, -1.0, 2.0, &[], &cfg).unwrap();
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-13);
    }

    #[test]
    fn gaussian_integral() {
        let cfg = QuadConfig::default();
        let r = integrate(|x: f64| (-x * x).exp(), -10.0, 10.0, &[0.0], &cfg).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn kink_handled_with_breakpoint() {
        let cfg = QuadConfig::default();
        let r = integrate(|x: f64| (x - 0.3).abs(), 0.0, 1.0, &[0.3], &cfg).unwrap();
        assert!((r.value - (0.045 + 0.245)).abs() < 1e-14);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let cfg = QuadConfig::default();
        let a = integrate(|x: f64| x.sin(), 0.0, 1.0, &[], &cfg).unwrap().value;
        let b = integrate(|x: f64| x.sin(), 1.0, 0.0, &[], &cfg).unwrap().value;
        assert!((a + b).abs() < 1e-15);
    }

    #[test]
    fn complex_segment() {
        let cfg = QuadConfig::default();
        // integral of exp(z) from 0 to i = exp(i) - 1
        let r = integrate_segment(|z| z.exp(), Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0), &cfg).unwrap();
        let exact = Complex64::new(0.0, 1.0).exp() - 1.0;
        assert!((r.value - exact).norm() < 1e-14);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let cfg = QuadConfig {
            abs_tol: 1e-30,
            rel_tol: 0.0,
            max_intervals: 4,
        };
        let err = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &[], &cfg).unwrap_err();
        assert!(matches!(err, Error::Precision { .. }));
    }
}
