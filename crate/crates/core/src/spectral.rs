//! Periodic grids, Fourier transforms, spectral differentiation,
//! dealiasing and discrete Sobolev norms.
//!
//! A field lives on `[-L, L]^d` sampled at `x_j = -L + 2 L j / n`. Fourier
//! coefficients use the normalization
//! `f^(k) = (2L)^{-d} \int f(x) e^{-i kappa . x} dx`, `kappa = k pi / L`,
//! so the inverse is the plain sum `f(x) = sum_k f^(k) e^{i kappa . x}` and a
//! constant `c` has coefficient `c` at `k = 0`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Orders above this are multiplied in log-magnitude / phase form.
pub const LOG_DOMAIN_ORDER: usize = 20;

/// Uniform periodic grid on `[-L, L]^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
    pub half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        Self::with_half_width(dim, n, std::f64::consts::PI)
    }

    pub fn with_half_width(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Config(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::Config(format!("grid size must be a power of two >= 2, got {n}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Config(format!("box half-width must be positive, got {half_width}")));
        }
        Ok(Self { dim, n, half_width })
    }

    /// Total number of samples.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Physical coordinate of grid index `i` along any axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + self.spacing() * i as f64
    }

    /// Signed integer wavenumber stored at index `i` (Nyquist maps to `-n/2`).
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Storage index of integer wavenumber `k`, if representable.
    pub fn index_of_wavenumber(&self, k: i64) -> Option<usize> {
        let n = self.n as i64;
        if k >= -n / 2 && k < n / 2 {
            Some(k.rem_euclid(n) as usize)
        } else {
            None
        }
    }

    /// Angular wavenumber `kappa = k pi / L`.
    pub fn kappa(&self, k: i64) -> f64 {
        k as f64 * std::f64::consts::PI / self.half_width
    }

    /// Per-axis indices of flat row-major index `flat` (axis 0 slowest).
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for ax in (0..self.dim).rev() {
            idx[ax] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().take(self.dim).fold(0, |acc, &i| acc * self.n + i)
    }

    /// Integer wavevector at flat index.
    pub fn wavevector(&self, flat: usize) -> [i64; 3] {
        let idx = self.unflatten(flat);
        let mut k = [0i64; 3];
        for ax in 0..self.dim {
            k[ax] = self.wavenumber(idx[ax]);
        }
        k
    }

    /// Physical position of flat index.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut x = [0.0; 3];
        for ax in 0..self.dim {
            x[ax] = self.coordinate(idx[ax]);
        }
        x
    }

    fn is_nyquist(&self, k: i64) -> bool {
        k == -(self.n as i64) / 2
    }
}

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut p = planner().lock().expect("fft planner poisoned");
            (p.plan_fft_forward(n), p.plan_fft_inverse(n))
        })
        .clone()
}

/// Unnormalized DFT along every axis of a row-major `n^dim` array.
pub(crate) fn fft_nd(dim: usize, n: usize, data: &mut [Complex64], inverse: bool) {
    let (fwd, inv) = plans(n);
    let plan = if inverse { inv } else { fwd };
    let total = data.len();
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    for ax in 0..dim {
        let stride = n.pow((dim - 1 - ax) as u32);
        if stride == 1 {
            plan.process_with_scratch(data, &mut scratch);
            continue;
        }
        let mut lines = vec![Complex64::new(0.0, 0.0); total];
        let outer = total / (n * stride);
        let mut line = 0;
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * n * stride + inner;
                let dst = &mut lines[line * n..(line + 1) * n];
                for (j, d) in dst.iter_mut().enumerate() {
                    *d = data[base + j * stride];
                }
                line += 1;
            }
        }
        plan.process_with_scratch(&mut lines, &mut scratch);
        line = 0;
        for o in 0..outer {
            for inner in 0..stride {
                let base = o * n * stride + inner;
                let src = &lines[line * n..(line + 1) * n];
                for (j, s) in src.iter().enumerate() {
                    data[base + j * stride] = *s;
                }
                line += 1;
            }
        }
    }
}

/// `(-1)^{sum of indices}`: the shift from a grid starting at `-L`.
fn phase_sign(grid: &Grid, flat: usize) -> f64 {
    let idx = grid.unflatten(flat);
    let s: usize = idx.iter().take(grid.dim).sum();
    if s % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Samples to coefficients.
pub fn forward_coefficients(grid: &Grid, values: &[f64]) -> Result<Vec<Complex64>> {
    if values.len() != grid.len() {
        return Err(Error::Config(format!(
            "expected {} samples for a {}-D grid of size {}, got {}",
            grid.len(),
            grid.dim,
            grid.n,
            values.len()
        )));
    }
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(grid.dim, grid.n, &mut data, false);
    let norm = 1.0 / grid.len() as f64;
    for (flat, c) in data.iter_mut().enumerate() {
        *c *= norm * phase_sign(grid, flat);
    }
    Ok(data)
}

/// Coefficients to (complex) samples.
pub fn inverse_samples(grid: &Grid, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    if coeffs.len() != grid.len() {
        return Err(Error::Config(format!(
            "expected {} coefficients, got {}",
            grid.len(),
            coeffs.len()
        )));
    }
    let mut data: Vec<Complex64> = coeffs
        .iter()
        .enumerate()
        .map(|(flat, &c)| c * phase_sign(grid, flat))
        .collect();
    fft_nd(grid.dim, grid.n, &mut data, true);
    Ok(data)
}

/// A real periodic field with both its samples and its Fourier coefficients.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Grid,
    values: Vec<f64>,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    /// Build from samples; runs the forward transform.
    pub fn from_samples(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let coeffs = forward_coefficients(&grid, &values)?;
        Ok(Self { grid, values, coeffs })
    }

    /// Sample `f` at every grid point (only the first `dim` coordinates are
    /// meaningful).
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Grid, f: F) -> Result<Self> {
        let values = (0..grid.len())
            .map(|flat| {
                let x = grid.point(flat);
                f(&x[..grid.dim])
            })
            .collect();
        Self::from_samples(grid, values)
    }

    /// Build from coefficients. The samples are the real part of the
    /// inverse transform, so callers should pass conjugate-symmetric data.
    pub fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        let values = inverse_samples(&grid, &coeffs)?.into_iter().map(|z| z.re).collect();
        Ok(Self { grid, values, coeffs })
    }

    /// Build from a coefficient function of the integer wavevector.
    pub fn from_coeff_fn<F: Fn(&[i64]) -> Complex64>(grid: Grid, f: F) -> Result<Self> {
        let coeffs = (0..grid.len())
            .map(|flat| {
                let k = grid.wavevector(flat);
                f(&k[..grid.dim])
            })
            .collect();
        Self::from_coeffs(grid, coeffs)
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn dim(&self) -> usize {
        self.grid.dim
    }
    pub fn n(&self) -> usize {
        self.grid.n
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient at integer wavevector `k` (zero if not representable).
    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        let mut idx = [0usize; 3];
        for ax in 0..self.grid.dim {
            match self.grid.index_of_wavenumber(k[ax]) {
                Some(i) => idx[ax] = i,
                None => return Complex64::new(0.0, 0.0),
            }
        }
        self.coeffs[self.grid.flatten(&idx[..self.grid.dim])]
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Normalized grid L2 norm, `(mean |f|^2)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    /// Coefficient-side L2 norm; equals [`Self::l2_norm`] by Parseval.
    pub fn coeff_l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
            coeffs: self.coeffs.iter().map(|z| z * c).collect(),
        }
    }

    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Domain("fields live on different grids".into()));
        }
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x * a + y * b).collect(),
        })
    }

    /// Evaluate the truncated Fourier series at an arbitrary point (Nyquist
    /// modes are skipped: they have no unique off-grid interpolant).
    pub fn eval_at(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (flat, c) in self.coeffs.iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let k = self.grid.wavevector(flat);
            if (0..self.grid.dim).any(|ax| self.grid.is_nyquist(k[ax])) {
                continue;
            }
            let phase: f64 = (0..self.grid.dim).map(|ax| self.grid.kappa(k[ax]) * x[ax]).sum();
            s += c.re * phase.cos() - c.im * phase.sin();
        }
        s
    }
}

/// Recompute coefficients from samples (the explicit transform step).
pub fn forward_transform(grid: Grid, values: Vec<f64>) -> Result<SpectralField> {
    SpectralField::from_samples(grid, values)
}

/// Multiply coefficients by `prod_j (i kappa_j)^{beta_j}`.
///
/// Odd derivatives annihilate the Nyquist mode along their axis. Orders
/// above [`LOG_DOMAIN_ORDER`] are formed as `exp(log|c| + sum beta_j log|kappa_j|)`
/// with the phase tracked separately.
pub fn spectral_derivative(field: &SpectralField, beta: &[usize]) -> Result<SpectralField> {
    let grid = *field.grid();
    if beta.len() != grid.dim {
        return Err(Error::Domain(format!(
            "multi-index has {} entries for a {}-D field",
            beta.len(),
            grid.dim
        )));
    }
    let order: usize = beta.iter().sum();
    if order == 0 {
        return Ok(field.clone());
    }
    let i_pow = match order % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    let mut out = Vec::with_capacity(grid.len());
    for (flat, &c) in field.coeffs().iter().enumerate() {
        let k = grid.wavevector(flat);
        let mut zero = c.re == 0.0 && c.im == 0.0;
        for ax in 0..grid.dim {
            if beta[ax] > 0 && (k[ax] == 0 || (beta[ax] % 2 == 1 && grid.is_nyquist(k[ax]))) {
                zero = true;
            }
        }
        if zero {
            out.push(Complex64::new(0.0, 0.0));
            continue;
        }
        if order <= LOG_DOMAIN_ORDER {
            let mut m = 1.0;
            for ax in 0..grid.dim {
                m *= grid.kappa(k[ax]).powi(beta[ax] as i32);
            }
            out.push(c * i_pow * m);
        } else {
            let mut log_mag = c.norm().ln();
            let mut sign_neg = false;
            for ax in 0..grid.dim {
                let kap = grid.kappa(k[ax]);
                log_mag += beta[ax] as f64 * kap.abs().ln();
                if kap < 0.0 && beta[ax] % 2 == 1 {
                    sign_neg = !sign_neg;
                }
            }
            if log_mag > 709.0 {
                return Err(Error::NumericRange(format!(
                    "derivative of order {order} overflows at wavevector {:?}",
                    &k[..grid.dim]
                )));
            }
            let unit = c / c.norm();
            let s = if sign_neg { -1.0 } else { 1.0 };
            out.push(unit * i_pow * (s * log_mag.exp()));
        }
    }
    SpectralField::from_coeffs(grid, out)
}

/// `(sum_k (1 + |kappa|^2)^r |f^(k)|^2)^{1/2}`.
pub fn sobolev_norm(field: &SpectralField, r: f64) -> Result<f64> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("Sobolev index must be >= 0, got {r}")));
    }
    let grid = field.grid();
    let mut s = 0.0;
    for (flat, c) in field.coeffs().iter().enumerate() {
        let k = grid.wavevector(flat);
        let k2: f64 = (0..grid.dim).map(|ax| grid.kappa(k[ax]).powi(2)).sum();
        s += (1.0 + k2).powf(r) * c.norm_sqr();
    }
    Ok(s.sqrt())
}

/// Two-thirds rule: true for modes that survive (`3 |k_j| <= n` on every axis).
pub fn dealias_mask(grid: &Grid) -> Vec<bool> {
    (0..grid.len())
        .map(|flat| {
            let k = grid.wavevector(flat);
            (0..grid.dim).all(|ax| 3 * k[ax].unsigned_abs() as usize <= grid.n)
        })
        .collect()
}

pub fn dealias(field: &SpectralField) -> Result<SpectralField> {
    let mask = dealias_mask(field.grid());
    let coeffs = field
        .coeffs()
        .iter()
        .zip(&mask)
        .map(|(&c, &keep)| if keep { c } else { Complex64::new(0.0, 0.0) })
        .collect();
    SpectralField::from_coeffs(*field.grid(), coeffs)
}

/// Evaluates the Fourier series of several fields on one grid at arbitrary
/// points.
///
/// Modes below `rel_tol` times the largest coefficient (over all fields)
/// are cut, and the remaining box `|k_j| <= K_j` is summed exactly with
/// separable phase tables. Fields are assumed real.
pub struct PointEvaluator {
    grid: Grid,
    kmax: [usize; 3],
    /// Per field, coefficients on the half box `k_0 >= 0` (2D/3D) or the
    /// full line (1D), laid out row-major.
    tables: Vec<Vec<Complex64>>,
}

impl PointEvaluator {
    pub fn new(fields: &[&SpectralField], rel_tol: f64) -> Result<Self> {
        let Some(first) = fields.first() else {
            return Err(Error::Domain("point evaluator needs at least one field".into()));
        };
        let grid = *first.grid();
        if fields.iter().any(|f| *f.grid() != grid) {
            return Err(Error::Domain("point evaluator fields must share one grid".into()));
        }
        let cmax = fields
            .iter()
            .flat_map(|f| f.coeffs().iter())
            .fold(0.0f64, |m, c| m.max(c.norm()));
        let floor = rel_tol * cmax;
        let mut kmax = [0usize; 3];
        for f in fields {
            for (flat, c) in f.coeffs().iter().enumerate() {
                if c.norm() > floor {
                    let k = grid.wavevector(flat);
                    for ax in 0..grid.dim {
                        if !grid.is_nyquist(k[ax]) {
                            kmax[ax] = kmax[ax].max(k[ax].unsigned_abs() as usize);
                        }
                    }
                }
            }
        }
        let mut tables = Vec::with_capacity(fields.len());
        for f in fields {
            let mut t = Vec::new();
            match grid.dim {
                1 => {
                    for k0 in -(kmax[0] as i64)..=kmax[0] as i64 {
                        t.push(f.coeff(&[k0]));
                    }
                }
                2 => {
                    for k0 in 0..=kmax[0] as i64 {
                        for k1 in -(kmax[1] as i64)..=kmax[1] as i64 {
                            t.push(f.coeff(&[k0, k1]));
                        }
                    }
                }
                _ => {
                    for k0 in 0..=kmax[0] as i64 {
                        for k1 in -(kmax[1] as i64)..=kmax[1] as i64 {
                            for k2 in -(kmax[2] as i64)..=kmax[2] as i64 {
                                t.push(f.coeff(&[k0, k1, k2]));
                            }
                        }
                    }
                }
            }
            tables.push(t);
        }
        Ok(Self { grid, kmax, tables })
    }

    pub fn field_count(&self) -> usize {
        self.tables.len()
    }

    /// Retained mode bound per axis.
    pub fn kmax(&self) -> [usize; 3] {
        self.kmax
    }

    fn phases(&self, ax: usize, x: f64, out: &mut Vec<Complex64>, half: bool) {
        out.clear();
        let km = self.kmax[ax] as i64;
        let start = if half { 0 } else { -km };
        let base = Complex64::from_polar(1.0, self.grid.kappa(1) * x);
        // Direct evaluation at the ends keeps rounding from accumulating.
        let mut z = Complex64::from_polar(1.0, self.grid.kappa(start) * x);
        for (i, _) in (start..=km).enumerate() {
            if i % 32 == 0 {
                z = Complex64::from_polar(1.0, self.grid.kappa(start + i as i64) * x);
            }
            out.push(z);
            z *= base;
        }
    }

    /// Evaluate all fields at `x`, writing one value per field into `out`.
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        let nf = self.tables.len();
        let mut e0 = Vec::new();
        let mut e1 = Vec::new();
        let mut e2 = Vec::new();
        match self.grid.dim {
            1 => {
                self.phases(0, x[0], &mut e0, false);
                for (f, t) in self.tables.iter().enumerate() {
                    let s: f64 = t.iter().zip(&e0).map(|(c, e)| (c * e).re).sum();
                    out[f] = s;
                }
            }
            2 => {
                self.phases(0, x[0], &mut e0, true);
                self.phases(1, x[1], &mut e1, false);
                let w1 = e1.len();
                let mut acc = vec![0.0; nf];
                for (i0, p0) in e0.iter().enumerate() {
                    let weight = if i0 == 0 { 1.0 } else { 2.0 };
                    for (f, t) in self.tables.iter().enumerate() {
                        let row = &t[i0 * w1..(i0 + 1) * w1];
                        let mut s = Complex64::new(0.0, 0.0);
                        for (c, p1) in row.iter().zip(&e1) {
                            s += c * p1;
                        }
                        acc[f] += weight * (s * p0).re;
                    }
                }
                out[..nf].copy_from_slice(&acc);
            }
            _ => {
                self.phases(0, x[0], &mut e0, true);
                self.phases(1, x[1], &mut e1, false);
                self.phases(2, x[2], &mut e2, false);
                let w1 = e1.len();
                let w2 = e2.len();
                let mut acc = vec![0.0; nf];
                for (i0, p0) in e0.iter().enumerate() {
                    let weight = if i0 == 0 { 1.0 } else { 2.0 };
                    for (f, t) in self.tables.iter().enumerate() {
                        let mut s0 = Complex64::new(0.0, 0.0);
                        for (i1, p1) in e1.iter().enumerate() {
                            let base = (i0 * w1 + i1) * w2;
                            let mut s = Complex64::new(0.0, 0.0);
                            for (c, p2) in t[base..base + w2].iter().zip(&e2) {
                                s += c * p2;
                            }
                            s0 += s * p1;
                        }
                        acc[f] += weight * (s0 * p0).re;
                    }
                }
                out[..nf].copy_from_slice(&acc);
            }
        }
    }
}

/// Header line of a field snapshot file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub n: usize,
    pub r: f64,
    pub time: f64,
    pub field: String,
    pub domain_scale: f64,
}

/// Write a snapshot: one JSON header line, then the samples as raw
/// little-endian f64 in row-major order.
pub fn write_snapshot(path: &Path, field: &SpectralField, name: &str, time: f64, r: f64) -> Result<()> {
    let header = SnapshotHeader {
        dim: field.dim(),
        n: field.n(),
        r,
        time,
        field: name.to_string(),
        domain_scale: field.grid().half_width,
    };
    let mut file = std::io::BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut file, &header)?;
    file.write_all(b"\n")?;
    for v in field.values() {
        file.write_all(&v.to_le_bytes())?;
    }
    file.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, SpectralField)> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: SnapshotHeader = serde_json::from_str(line.trim_end())?;
    let grid = Grid::with_half_width(header.dim, header.n, header.domain_scale)?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() != grid.len() * 8 {
        return Err(Error::Config(format!(
            "snapshot payload has {} bytes, expected {}",
            bytes.len(),
            grid.len() * 8
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((header, SpectralField::from_samples(grid, values)?))
}
