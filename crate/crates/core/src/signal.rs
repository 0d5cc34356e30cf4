//! Sampled functions on the line, their Fourier transforms, and the elementary
//! operators and functionals used throughout the crate.
//!
//! Conventions: `f̂(ξ) = ∫ f(x) e^{-2πiξx} dx`, discretized as a Riemann sum on the
//! sample grid. A signal with `n` samples, origin `x₀` and spacing `Δx` is dual to the
//! frequency grid `ξ_k = k/(nΔx)`, `k = -n/2, ..., n/2 - 1`.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("sample count {0} must be a power of two and at least 2")]
    Length(usize),
    #[error("spacing must be positive and finite, got {0}")]
    Spacing(f64),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("grids differ")]
    GridMismatch,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse: {0}")]
    Parse(String),
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    thread_local! {
        static PLANNER: std::cell::RefCell<FftPlanner<f64>> = std::cell::RefCell::new(FftPlanner::new());
    }
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// In-place unnormalized forward DFT, `X_k = Σ x_j e^{-2πijk/n}`.
pub fn dft_forward(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

/// In-place unnormalized inverse DFT, `x_j = Σ X_k e^{2πijk/n}`.
pub fn dft_inverse(buf: &mut [Complex64]) {
    plan(buf.len(), true).process(buf);
}

pub fn cis(t: f64) -> Complex64 {
    Complex64::new(t.cos(), t.sin())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    pub origin: f64,
    pub spacing: f64,
    pub samples: Vec<Complex64>,
    /// Set when an operator pushed part of the function off the grid.
    #[serde(default)]
    pub truncated: bool,
}

/// Values of `f̂` at `ξ_k = k·dξ`, stored in increasing frequency order starting at
/// `k = -n/2`. Carries the dual signal grid so the inverse is unambiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub origin: f64,
    pub spacing: f64,
    pub values: Vec<Complex64>,
}

fn check_grid(n: usize, spacing: f64) -> Result<(), SignalError> {
    if n < 2 || !n.is_power_of_two() {
        return Err(SignalError::Length(n));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(SignalError::Spacing(spacing));
    }
    Ok(())
}

impl SampledSignal {
    pub fn new(origin: f64, spacing: f64, samples: Vec<Complex64>) -> Result<Self, SignalError> {
        check_grid(samples.len(), spacing)?;
        if let Some(i) = samples.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(SignalError::NonFinite(i));
        }
        Ok(SampledSignal {
            origin,
            spacing,
            samples,
            truncated: false,
        })
    }

    pub fn from_fn(
        origin: f64,
        spacing: f64,
        n: usize,
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self, SignalError> {
        check_grid(n, spacing)?;
        let samples = (0..n).map(|j| f(origin + j as f64 * spacing)).collect();
        SampledSignal::new(origin, spacing, samples)
    }

    pub fn from_real_fn(
        origin: f64,
        spacing: f64,
        n: usize,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self, SignalError> {
        SampledSignal::from_fn(origin, spacing, n, |x| Complex64::new(f(x), 0.0))
    }

    pub fn zeros_like(&self) -> Self {
        SampledSignal {
            origin: self.origin,
            spacing: self.spacing,
            samples: vec![Complex64::new(0.0, 0.0); self.len()],
            truncated: false,
        }
    }

    pub fn with_samples(&self, samples: Vec<Complex64>) -> Self {
        assert_eq!(samples.len(), self.len());
        SampledSignal {
            origin: self.origin,
            spacing: self.spacing,
            samples,
            truncated: false,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn x(&self, j: usize) -> f64 {
        self.origin + j as f64 * self.spacing
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.x(j)).collect()
    }

    /// Length `nΔx` of the periodic span `[x₀, x₀ + nΔx)`.
    pub fn span(&self) -> f64 {
        self.len() as f64 * self.spacing
    }

    pub fn dxi(&self) -> f64 {
        1.0 / self.span()
    }

    pub fn same_grid(&self, other: &SampledSignal) -> bool {
        self.len() == other.len() && self.origin == other.origin && self.spacing == other.spacing
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self.samples.iter().map(|z| z.norm().powf(p)).sum();
        (s * self.spacing).powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.samples.iter().map(|z| z.norm_sqr()).sum();
        (s * self.spacing).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `⟨f, g⟩ = ∫ f ḡ`.
    pub fn inner(&self, other: &SampledSignal) -> Result<Complex64, SignalError> {
        if !self.same_grid(other) {
            return Err(SignalError::GridMismatch);
        }
        let s: Complex64 = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(s * self.spacing)
    }

    pub fn integral(&self) -> Complex64 {
        self.samples.iter().sum::<Complex64>() * self.spacing
    }

    pub fn add(&self, other: &SampledSignal) -> Result<SampledSignal, SignalError> {
        if !self.same_grid(other) {
            return Err(SignalError::GridMismatch);
        }
        let mut out = self.with_samples(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a + b)
                .collect(),
        );
        out.truncated = self.truncated || other.truncated;
        Ok(out)
    }

    pub fn sub(&self, other: &SampledSignal) -> Result<SampledSignal, SignalError> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> SampledSignal {
        let mut out = self.with_samples(self.samples.iter().map(|z| z * c).collect());
        out.truncated = self.truncated;
        out
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> SampledSignal {
        let mut out = self.with_samples(
            self.samples
                .iter()
                .enumerate()
                .map(|(j, &z)| f(self.x(j), z))
                .collect(),
        );
        out.truncated = self.truncated;
        out
    }

    pub fn transform(&self) -> Spectrum {
        let n = self.len();
        let mut buf = self.samples.clone();
        dft_forward(&mut buf);
        let dxi = self.dxi();
        let half = (n / 2) as i64;
        let values = (0..n)
            .map(|idx| {
                let k = idx as i64 - half;
                let xi = k as f64 * dxi;
                buf[k.rem_euclid(n as i64) as usize] * cis(-2.0 * PI * xi * self.origin) * self.spacing
            })
            .collect();
        Spectrum {
            origin: self.origin,
            spacing: self.spacing,
            values,
        }
    }

    /// Band-limited (trigonometric) interpolation at an arbitrary point.
    pub fn interpolate(&self, spec: &Spectrum, y: f64) -> Complex64 {
        let dxi = spec.dxi();
        let mut s = Complex64::new(0.0, 0.0);
        for (idx, v) in spec.values.iter().enumerate() {
            s += v * cis(2.0 * PI * spec.xi(idx) * y);
        }
        s * dxi
    }

    /// Fraction of squared mass at samples where `pred(x)` is false.
    fn mass_outside(&self, pred: impl Fn(f64) -> bool) -> f64 {
        let total: f64 = self.samples.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let out: f64 = self
            .samples
            .iter()
            .enumerate()
            .filter(|(j, _)| !pred(self.x(*j)))
            .map(|(_, z)| z.norm_sqr())
            .sum();
        out / total
    }

    pub fn apply(&self, op: ElementaryOp) -> Result<SampledSignal, SignalError> {
        const TRUNCATION_MASS: f64 = 1e-20;
        let lo = self.origin;
        let hi = self.origin + self.span();
        match op {
            ElementaryOp::Dil { s, p } => {
                if !(s > 0.0 && s.is_finite()) || !(p >= 1.0) {
                    return Err(SignalError::Domain(format!("Dil needs s > 0, p >= 1; got s={s}, p={p}")));
                }
                if s == 1.0 {
                    return Ok(self.clone());
                }
                let spec = self.transform();
                let amp = s.powf(-1.0 / p);
                let samples = (0..self.len())
                    .map(|j| {
                        let y = self.x(j) / s;
                        if y >= lo && y < hi {
                            self.interpolate(&spec, y) * amp
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect();
                let mut out = self.with_samples(samples);
                // mass of f outside the preimage of the grid is lost
                out.truncated = self.truncated
                    || self.mass_outside(|x| x * s >= lo && x * s < hi) > TRUNCATION_MASS;
                Ok(out)
            }
            ElementaryOp::Tr { y } => {
                let mut spec = self.transform();
                for idx in 0..spec.values.len() {
                    let xi = spec.xi(idx);
                    spec.values[idx] *= cis(-2.0 * PI * xi * y);
                }
                let mut out = spec.inverse();
                out.truncated =
                    self.truncated || self.mass_outside(|x| x + y >= lo && x + y < hi) > TRUNCATION_MASS;
                Ok(out)
            }
            ElementaryOp::Mod { theta } => {
                Ok(self.map(|x, z| z * cis(2.0 * PI * theta * x)))
            }
        }
    }

    /// `t ↦ (1/2r)∫_{|t|≤r}|f(x+t)|^p dt` maximized over radii from one sample to the
    /// full span, evaluated at every sample; values outside the grid count as zero.
    pub fn maximal_p(&self, p: f64) -> Result<SampledSignal, SignalError> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(SignalError::Domain(format!("maximal_p needs p >= 1, got {p}")));
        }
        let n = self.len();
        let mut prefix = vec![0.0f64; n + 1];
        for j in 0..n {
            prefix[j + 1] = prefix[j] + self.samples[j].norm().powf(p);
        }
        let samples = (0..n)
            .map(|j| {
                let mut best: f64 = 0.0;
                for k in 0..n {
                    let a = j.saturating_sub(k);
                    let b = (j + k + 1).min(n);
                    let avg = (prefix[b] - prefix[a]) / (2 * k + 1) as f64;
                    best = best.max(avg);
                }
                Complex64::new(best.powf(1.0 / p), 0.0)
            })
            .collect();
        Ok(self.with_samples(samples))
    }

    /// Sup of mean oscillation over windows of `2^a` consecutive samples (`a >= 1`),
    /// taken cyclically so the value is invariant under grid rotations.
    pub fn bmo_norm(&self) -> f64 {
        let n = self.len();
        let mut best: f64 = 0.0;
        let mut len = 2;
        while len <= n {
            for start in 0..n {
                let mean: Complex64 =
                    (0..len).map(|t| self.samples[(start + t) % n]).sum::<Complex64>() / len as f64;
                let osc: f64 = (0..len)
                    .map(|t| (self.samples[(start + t) % n] - mean).norm())
                    .sum::<f64>()
                    / len as f64;
                best = best.max(osc);
            }
            len *= 2;
        }
        best
    }

    pub fn poisson(&self, t: f64) -> Result<SampledSignal, SignalError> {
        if !(t > 0.0) {
            return Err(SignalError::Domain(format!("Poisson parameter must be positive, got {t}")));
        }
        let mut spec = self.transform();
        for idx in 0..spec.values.len() {
            let xi = spec.xi(idx);
            spec.values[idx] *= (-t * xi.abs()).exp();
        }
        Ok(spec.inverse())
    }

    /// Centered finite-difference derivative (one-sided at the ends).
    pub fn derivative(&self) -> SampledSignal {
        let n = self.len();
        let h = self.spacing;
        let s = &self.samples;
        let d = (0..n)
            .map(|j| {
                if j == 0 {
                    (s[1] - s[0]) / h
                } else if j == n - 1 {
                    (s[n - 1] - s[n - 2]) / h
                } else {
                    (s[j + 1] - s[j - 1]) / (2.0 * h)
                }
            })
            .collect();
        self.with_samples(d)
    }

    /// Exact derivative of the band-limited interpolant, by spectral multiplication.
    pub fn spectral_derivative(&self) -> SampledSignal {
        let mut spec = self.transform();
        for idx in 0..spec.values.len() {
            let xi = spec.xi(idx);
            spec.values[idx] *= Complex64::new(0.0, 2.0 * PI * xi);
        }
        spec.inverse()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SignalError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "re", "im"])?;
        for (j, z) in self.samples.iter().enumerate() {
            w.write_record([
                format!("{:e}", self.x(j)),
                format!("{:e}", z.re),
                format!("{:e}", z.im),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `x, re, im` rows; the grid is inferred from the first two abscissae.
    pub fn read_csv<R: Read>(rdr: R) -> Result<Self, SignalError> {
        let mut r = csv::Reader::from_reader(rdr);
        let mut xs = Vec::new();
        let mut samples = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let get = |i: usize| -> Result<f64, SignalError> {
                rec.get(i)
                    .ok_or_else(|| SignalError::Parse(format!("missing column {i}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| SignalError::Parse(e.to_string()))
            };
            xs.push(get(0)?);
            samples.push(Complex64::new(get(1)?, get(2)?));
        }
        if xs.len() < 2 {
            return Err(SignalError::Length(xs.len()));
        }
        let spacing = xs[1] - xs[0];
        for (j, x) in xs.iter().enumerate() {
            let want = xs[0] + j as f64 * spacing;
            if (x - want).abs() > 1e-9 * spacing.max(1.0) * (j as f64 + 1.0) {
                return Err(SignalError::Parse(format!("abscissa {j} is off the uniform grid")));
            }
        }
        SampledSignal::new(xs[0], spacing, samples)
    }

    /// Header `origin: f64, spacing: f64, n: u64` then `n` little-endian `(re, im)` pairs.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<(), SignalError> {
        out.write_all(&self.origin.to_le_bytes())?;
        out.write_all(&self.spacing.to_le_bytes())?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        for z in &self.samples {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut rdr: R) -> Result<Self, SignalError> {
        let mut b8 = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8], SignalError> {
            r.read_exact(&mut b8)?;
            Ok(b8)
        };
        let origin = f64::from_le_bytes(next(&mut rdr)?);
        let spacing = f64::from_le_bytes(next(&mut rdr)?);
        let n = u64::from_le_bytes(next(&mut rdr)?) as usize;
        check_grid(n, spacing)?;
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let re = f64::from_le_bytes(next(&mut rdr)?);
            let im = f64::from_le_bytes(next(&mut rdr)?);
            samples.push(Complex64::new(re, im));
        }
        SampledSignal::new(origin, spacing, samples)
    }
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dxi(&self) -> f64 {
        1.0 / (self.len() as f64 * self.spacing)
    }

    pub fn xi(&self, idx: usize) -> f64 {
        (idx as i64 - (self.len() / 2) as i64) as f64 * self.dxi()
    }

    pub fn xis(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.xi(i)).collect()
    }

    /// Spectrum on the grid dual to `(origin, spacing, n)` sampled from `g(ξ)`.
    pub fn from_fn(
        origin: f64,
        spacing: f64,
        n: usize,
        g: impl Fn(f64) -> Complex64,
    ) -> Result<Self, SignalError> {
        check_grid(n, spacing)?;
        let mut s = Spectrum {
            origin,
            spacing,
            values: vec![Complex64::new(0.0, 0.0); n],
        };
        for idx in 0..n {
            s.values[idx] = g(s.xi(idx));
        }
        Ok(s)
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dxi()).sqrt()
    }

    pub fn inverse(&self) -> SampledSignal {
        let n = self.len();
        let dxi = self.dxi();
        let half = (n / 2) as i64;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for idx in 0..n {
            let k = idx as i64 - half;
            let xi = k as f64 * dxi;
            buf[k.rem_euclid(n as i64) as usize] = self.values[idx] * cis(2.0 * PI * xi * self.origin);
        }
        dft_inverse(&mut buf);
        for z in buf.iter_mut() {
            *z *= dxi;
        }
        SampledSignal {
            origin: self.origin,
            spacing: self.spacing,
            samples: buf,
            truncated: false,
        }
    }

    pub fn multiply(&self, m: impl Fn(f64) -> Complex64) -> Spectrum {
        let mut out = self.clone();
        for idx in 0..out.values.len() {
            out.values[idx] *= m(self.xi(idx));
        }
        out
    }
}

/// The dilation, translation and modulation operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ElementaryOp {
    /// `Dil_s^p f(x) = s^{-1/p} f(x/s)`.
    Dil { s: f64, p: f64 },
    /// `Tr_y f(x) = f(x - y)`.
    Tr { y: f64 },
    /// `Mod_θ f(x) = e^{2πiθx} f(x)`.
    Mod { theta: f64 },
}

/// `χ_I(x)^M = (1 + |x - c(I)|/|I|)^{-M}`.
pub fn chi_weight(lo: f64, hi: f64, x: f64, m: f64) -> f64 {
    let len = hi - lo;
    assert!(len > 0.0, "interval must have positive length");
    let c = 0.5 * (lo + hi);
    (1.0 + (x - c).abs() / len).powf(-m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptedEntry {
    pub m: f64,
    /// Smallest `A` with `|φ| <= A·C|I|^{-1/2}χ_I^M` at every sample.
    pub a_value: f64,
    /// Smallest `A` with `|φ'| <= A·C|I|^{-3/2}χ_I^M` at every sample.
    pub a_derivative: f64,
    pub a_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptedReport {
    pub interval: (f64, f64),
    pub c: f64,
    pub entries: Vec<AdaptedEntry>,
}

impl AdaptedReport {
    pub fn admissible(&self, a_bound: &dyn Fn(f64) -> f64) -> bool {
        self.entries.iter().all(|e| e.a_min <= a_bound(e.m))
    }
}

/// Measures the adaptedness constants of `phi` to `[lo, hi]` for each `M`.
/// `derivative` defaults to centered differences of `phi`.
pub fn adapted_check(
    phi: &SampledSignal,
    derivative: Option<&SampledSignal>,
    lo: f64,
    hi: f64,
    c: f64,
    m_list: &[f64],
) -> AdaptedReport {
    let owned;
    let d = match derivative {
        Some(d) => d,
        None => {
            owned = phi.derivative();
            &owned
        }
    };
    let len = hi - lo;
    let entries = m_list
        .iter()
        .map(|&m| {
            let mut a_value: f64 = 0.0;
            let mut a_derivative: f64 = 0.0;
            for j in 0..phi.len() {
                let w = chi_weight(lo, hi, phi.x(j), m);
                a_value = a_value.max(phi.samples[j].norm() * len.sqrt() / (c * w));
                a_derivative = a_derivative.max(d.samples[j].norm() * len.powf(1.5) / (c * w));
            }
            AdaptedEntry {
                m,
                a_value,
                a_derivative,
                a_min: a_value.max(a_derivative),
            }
        })
        .collect();
    AdaptedReport {
        interval: (lo, hi),
        c,
        entries,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanZero {
    pub residual: f64,
    pub l1: f64,
    pub pass: bool,
}

/// `|∫ φ(x) e^{-2πicx} dx|` against `10⁻⁸·‖φ‖₁`.
pub fn mean_zero_check(phi: &SampledSignal, c: f64) -> MeanZero {
    let s: Complex64 = phi
        .samples
        .iter()
        .enumerate()
        .map(|(j, z)| z * cis(-2.0 * PI * c * phi.x(j)))
        .sum::<Complex64>()
        * phi.spacing;
    let l1 = phi.lp_norm(1.0);
    MeanZero {
        residual: s.norm(),
        l1,
        pass: s.norm() <= 1e-8 * l1,
    }
}

/// C^∞ bump `exp(-1/(1 - t²))` on `(-1, 1)`, zero elsewhere.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// C^∞ transition from 0 (t <= 0) to 1 (t >= 1).
pub fn smooth_step(t: f64) -> f64 {
    fn e(t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            (-1.0 / t).exp()
        }
    }
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = e(t);
        a / (a + e(1.0 - t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gaussian() -> SampledSignal {
        SampledSignal::from_real_fn(-8.0, 16.0 / 1024.0, 1024, |x| (-PI * x * x).exp()).unwrap()
    }

    #[test]
    fn gaussian_is_self_dual() {
        let spec = gaussian().transform();
        for (idx, v) in spec.values.iter().enumerate() {
            let xi = spec.xi(idx);
            let want = (-PI * xi * xi).exp();
            // relative where the Gaussian is resolvable, absolute in the far tail
            let tol = if want >= 1e-6 { 1e-6 * want } else { 1e-12 };
            assert!((v - want).norm() <= tol,
                "xi={xi} got {v} want {want}");
        }
    }

    #[test]
    fn roundtrip_and_plancherel() {
        let f = SampledSignal::from_fn(-3.0, 0.05, 256, |x| cis(x * 1.3) * (1.0 / (1.0 + x * x))).unwrap();
        let spec = f.transform();
        let g = spec.inverse();
        let err: f64 = f.samples.iter().zip(&g.samples).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-10 * f.sup_norm());
        assert!((f.l2_norm() - spec.l2_norm()).abs() <= 1e-10 * f.l2_norm());
        let back = g.transform();
        let err: f64 = spec.values.iter().zip(&back.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10);
    }

    #[test]
    fn delta_has_flat_modulus() {
        let mut s = vec![Complex64::new(0.0, 0.0); 64];
        s[17] = Complex64::new(2.0, 0.0);
        let f = SampledSignal::new(-1.0, 0.125, s).unwrap();
        let spec = f.transform();
        for v in &spec.values {
            assert_abs_diff_eq!(v.norm(), 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn grid_validation() {
        assert!(SampledSignal::new(0.0, 1.0, vec![Complex64::new(0.0, 0.0); 3]).is_err());
        assert!(SampledSignal::new(0.0, 0.0, vec![Complex64::new(0.0, 0.0); 4]).is_err());
        assert!(SampledSignal::new(0.0, 1.0, vec![Complex64::new(f64::NAN, 0.0); 4]).is_err());
    }

    #[test]
    fn elementary_operators() {
        let f = gaussian();
        let id = f.apply(ElementaryOp::Dil { s: 1.0, p: 3.0 }).unwrap();
        assert_eq!(id.samples, f.samples);
        let d = f.apply(ElementaryOp::Dil { s: 2.0, p: 2.0 }).unwrap();
        assert!((d.l2_norm() - f.l2_norm()).abs() < 1e-8);
        assert!(!d.truncated);
        let wide = f.apply(ElementaryOp::Dil { s: 64.0, p: 2.0 }).unwrap();
        assert!(wide.truncated);

        let t = f.apply(ElementaryOp::Tr { y: 0.7 }).unwrap();
        for j in (0..f.len()).step_by(37) {
            let x = f.x(j);
            assert_abs_diff_eq!(t.samples[j].re, (-PI * (x - 0.7) * (x - 0.7)).exp(), epsilon = 1e-10);
        }

        // Mod in x is a translation of the spectrum; use a grid-representable shift
        let m = 5;
        let theta = m as f64 * f.dxi();
        let g = f.apply(ElementaryOp::Mod { theta }).unwrap().transform();
        let h = f.transform();
        for idx in m..h.len() {
            assert!((g.values[idx] - h.values[idx - m]).norm() < 1e-8);
        }
    }

    #[test]
    fn chi_examples() {
        assert_eq!(chi_weight(0.0, 2.0, 1.0, 3.0), 1.0);
        assert_abs_diff_eq!(chi_weight(0.0, 2.0, 3.0, 1.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(chi_weight(0.0, 2.0, 7.0, 2.0), 1.0 / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn maximal_examples() {
        let h = 1.0 / 64.0;
        let f = SampledSignal::from_real_fn(-4.0, h, 512, |x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 })
            .unwrap();
        let m = f.maximal_p(1.0).unwrap();
        let j = ((2.0 + 4.0) / h) as usize;
        // continuum optimum: r = 2, (1/2r)|[0,1]| = 1/4
        assert!((m.samples[j].re - 0.25).abs() < 1e-2, "{}", m.samples[j].re);

        let c = SampledSignal::from_real_fn(0.0, 0.1, 64, |_| 3.0).unwrap();
        for p in [1.0, 2.0, 5.0] {
            for z in &c.maximal_p(p).unwrap().samples {
                assert_abs_diff_eq!(z.re, 3.0, epsilon = 1e-12);
            }
        }
        for (a, b) in f.samples.iter().zip(&m.samples) {
            assert!(b.re >= a.norm() - 1e-15);
        }
    }

    #[test]
    fn bmo_examples() {
        let c = SampledSignal::from_real_fn(0.0, 0.25, 16, |_| 2.0).unwrap();
        assert_eq!(c.bmo_norm(), 0.0);
        let sq = SampledSignal::from_real_fn(0.0, 0.25, 16, |x| if x.rem_euclid(2.0) < 1.0 { 1.0 } else { -1.0 })
            .unwrap();
        let b = sq.bmo_norm();
        assert!(b >= 1.0 - 1e-15);
        let shifted = sq.map(|_, z| z + 5.0);
        assert_abs_diff_eq!(shifted.bmo_norm(), b, epsilon = 1e-12);
    }

    #[test]
    fn adapted_examples() {
        let (lo, hi) = (-0.5, 0.5);
        let phi = SampledSignal::from_real_fn(-16.0, 1.0 / 128.0, 4096, |x| bump(2.0 * x)).unwrap();
        let rep = adapted_check(&phi, None, lo, hi, 1.0, &[0.0, 1.0, 2.0, 4.0]);
        for e in &rep.entries {
            assert!(e.a_min < 20.0, "{e:?}");
        }
        let zero = phi.zeros_like();
        let rep = adapted_check(&zero, None, lo, hi, 1.0, &[1.0, 2.0]);
        assert!(rep.entries.iter().all(|e| e.a_min == 0.0));

        let mut spike = phi.zeros_like();
        let j = ((10.0 + 16.0) * 128.0) as usize;
        spike.samples[j] = Complex64::new(1.0, 0.0);
        let rep = adapted_check(&spike, None, lo, hi, 1.0, &[1.0, 2.0, 3.0]);
        let r1 = rep.entries[1].a_value / rep.entries[0].a_value;
        let r2 = rep.entries[2].a_value / rep.entries[1].a_value;
        assert_abs_diff_eq!(r1, 11.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r2, 11.0, epsilon = 1e-9);
    }

    #[test]
    fn poisson_examples() {
        let f = SampledSignal::from_fn(-8.0, 1.0 / 32.0, 512, |x| cis(2.0 * PI * 0.5 * x) * (-x * x).exp()).unwrap();
        let p = f.poisson(1e-6).unwrap();
        let err = p.sub(&f).unwrap().l2_norm();
        assert!(err < 1e-3 * f.l2_norm());
        let g = SampledSignal::from_real_fn(-8.0, 1.0 / 32.0, 512, |x| (-x * x).exp() + 0.3 * x.sin()).unwrap();
        let pg = g.poisson(0.8).unwrap();
        assert_abs_diff_eq!(pg.integral().re, g.integral().re, epsilon = 1e-9);
        assert!(pg.l2_norm() <= g.l2_norm());
        assert!(f.poisson(0.0).is_err());
    }

    #[test]
    fn mean_zero_detects_vanishing_transform() {
        // derivative of a Gaussian has f̂(0) = 0
        let f = SampledSignal::from_real_fn(-8.0, 1.0 / 64.0, 1024, |x| -2.0 * PI * x * (-PI * x * x).exp()).unwrap();
        assert!(mean_zero_check(&f, 0.0).pass);
        assert!(!mean_zero_check(&gaussian(), 0.0).pass);
    }

    #[test]
    fn csv_and_binary_roundtrip() {
        let f = SampledSignal::from_fn(-1.0, 0.25, 8, |x| Complex64::new(x, -x * x)).unwrap();
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 16 * 8);
        assert_eq!(SampledSignal::read_binary(buf.as_slice()).unwrap(), f);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = SampledSignal::read_csv(buf.as_slice()).unwrap();
        assert_eq!(g.samples, f.samples);
        assert_eq!(g.spacing, f.spacing);
    }

    #[test]
    fn smooth_step_shape() {
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(1.5), 1.0);
        assert_abs_diff_eq!(smooth_step(0.5), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(smooth_step(0.3) + smooth_step(0.7), 1.0, epsilon = 1e-15);
    }
}
