//! Kernel catalog, frequency cutoffs and the integer transfer kernels.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::integrate;
use crate::signal::{bump, Spectrum};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("frequency samples must avoid 0")]
    ZeroFrequency,
    #[error("scale k must be >= 1, got {0}")]
    Scale(i64),
    #[error("kernel `{0}` does not equal 1/y for |y| >= 1")]
    NotInverseY(String),
    #[error("unknown kernel `{0}` (expected inverse_y, bump or poisson)")]
    Unknown(String),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `K(y) = (1 - b(y))/y` with `b` an even smooth cutoff, `b(0) = 1` with all
    /// derivatives vanishing there, `b = 0` on `|y| >= 1`.
    InverseY,
    /// `K̂` a smooth bump supported in `[-3/8, 3/8]` with `K̂(0) = 1`.
    Bump,
    /// `K̂(ξ) = e^{-|ξ|}`, `K(y) = 2/(1 + 4π²y²)`.
    Poisson,
    /// `K̂ ≡ 1`; not an `L²` kernel, kept as a negative control.
    Constant,
    Zero,
}

impl std::str::FromStr for KernelKind {
    type Err = KernelError;
    fn from_str(s: &str) -> Result<Self, KernelError> {
        match s {
            "inverse_y" => Ok(KernelKind::InverseY),
            "bump" => Ok(KernelKind::Bump),
            "poisson" => Ok(KernelKind::Poisson),
            "constant" => Ok(KernelKind::Constant),
            "zero" => Ok(KernelKind::Zero),
            other => Err(KernelError::Unknown(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub derivative_order_max: usize,
}

const BUMP_HALF_WIDTH: f64 = 3.0 / 8.0;

/// Even cutoff for the `1/y` kernel: flat at 0 with value 1, vanishing from `|y| = 1` on.
fn inverse_y_cutoff(y: f64) -> f64 {
    1.0 - crate::signal::smooth_step(y.abs())
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        KernelSpec {
            kind,
            derivative_order_max: 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            KernelKind::InverseY => "inverse_y",
            KernelKind::Bump => "bump",
            KernelKind::Poisson => "poisson",
            KernelKind::Constant => "constant",
            KernelKind::Zero => "zero",
        }
    }

    /// `K(y)`.
    pub fn k(&self, y: f64) -> f64 {
        match self.kind {
            KernelKind::InverseY => {
                if y == 0.0 {
                    0.0
                } else {
                    (1.0 - inverse_y_cutoff(y)) / y
                }
            }
            KernelKind::Bump => {
                let panels = 8 + (y.abs() * 2.0) as usize;
                2.0 * integrate(0.0, BUMP_HALF_WIDTH, panels, |xi| {
                    self.khat(xi).re * (2.0 * PI * xi * y).cos()
                })
            }
            KernelKind::Poisson => 2.0 / (1.0 + 4.0 * PI * PI * y * y),
            KernelKind::Constant => {
                if y == 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            KernelKind::Zero => 0.0,
        }
    }

    /// `K̂(ξ)`; the value at `ξ = 0` is the average of the one-sided limits.
    pub fn khat(&self, xi: f64) -> Complex64 {
        match self.kind {
            KernelKind::InverseY => {
                if xi == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                Complex64::new(0.0, -PI * xi.signum() + 2.0 * self.inverse_y_sine_integral(xi, 0))
            }
            KernelKind::Bump => {
                Complex64::new(bump(xi / BUMP_HALF_WIDTH) * std::f64::consts::E, 0.0)
            }
            KernelKind::Poisson => Complex64::new((-xi.abs()).exp(), 0.0),
            KernelKind::Constant => Complex64::new(1.0, 0.0),
            KernelKind::Zero => Complex64::new(0.0, 0.0),
        }
    }

    /// `d^n/dξ^n ∫_0^1 b(y) sin(2πξy)/y dy`.
    fn inverse_y_sine_integral(&self, xi: f64, n: usize) -> f64 {
        let panels = 8 + (2.0 * xi.abs()) as usize;
        let shift = n as f64 * PI / 2.0;
        integrate(0.0, 1.0, panels, |y| {
            if y == 0.0 {
                return 0.0;
            }
            let t = 2.0 * PI * xi * y;
            inverse_y_cutoff(y) * (2.0 * PI).powi(n as i32) * y.powi(n as i32 - 1) * (t + shift).sin()
        })
    }

    /// Closed-form derivative where the catalog provides one.
    pub fn khat_derivative(&self, n: usize, xi: f64) -> Option<Complex64> {
        match self.kind {
            KernelKind::InverseY if xi != 0.0 => {
                if n == 0 {
                    Some(self.khat(xi))
                } else {
                    Some(Complex64::new(0.0, 2.0 * self.inverse_y_sine_integral(xi, n)))
                }
            }
            KernelKind::Poisson if xi != 0.0 => {
                let s: f64 = if xi > 0.0 { -1.0 } else { 1.0 };
                Some(Complex64::new(s.powi(n as i32) * (-xi.abs()).exp(), 0.0))
            }
            KernelKind::Constant | KernelKind::Zero if n >= 1 => Some(Complex64::new(0.0, 0.0)),
            _ => None,
        }
    }

    /// `lim_{ξ→0±} K̂(ξ)`.
    pub fn khat_limit(&self, right: bool) -> Complex64 {
        match self.kind {
            KernelKind::InverseY => Complex64::new(0.0, if right { -PI } else { PI }),
            KernelKind::Bump | KernelKind::Poisson | KernelKind::Constant => Complex64::new(1.0, 0.0),
            KernelKind::Zero => Complex64::new(0.0, 0.0),
        }
    }

    /// Whether `K(y) = 1/y` for `|y| >= 1`.
    pub fn is_inverse_y(&self) -> bool {
        self.kind == KernelKind::InverseY
    }
}

/// Central finite difference of order `n` with step `h`, second-order accurate.
pub fn finite_difference(f: &dyn Fn(f64) -> Complex64, x: f64, n: usize, h: f64) -> Complex64 {
    match n {
        0 => f(x),
        1 => (f(x + h) - f(x - h)) / (2.0 * h),
        2 => (f(x + h) - f(x) * 2.0 + f(x - h)) / (h * h),
        3 => (f(x + 2.0 * h) - f(x + h) * 2.0 + f(x - h) * 2.0 - f(x - 2.0 * h)) / (2.0 * h.powi(3)),
        4 => {
            (f(x + 2.0 * h) - f(x + h) * 4.0 + f(x) * 6.0 - f(x - h) * 4.0 + f(x - 2.0 * h)) / h.powi(4)
        }
        _ => {
            // recursive first differences for higher orders
            let g = |y: f64| finite_difference(f, y, n - 1, h);
            (g(x + h) - g(x - h)) / (2.0 * h)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub name: String,
    /// Smallest constant making the condition hold at every sample.
    pub c_min: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleReport {
    pub kernel: String,
    pub threshold: f64,
    pub samples: usize,
    pub conditions: Vec<ConditionResult>,
}

impl AdmissibleReport {
    pub fn pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

/// Measures the decay constants of `K̂` and its derivatives on `xi_samples`.
///
/// Condition `decay` is `|K̂| <= C min(1, 1/|ξ|)`; condition `derivative_n` is
/// `|K̂^{(n)}| <= C |ξ|^{-n} min(|ξ|, 1/|ξ|)`. Derivatives are central finite
/// differences with step proportional to `min(|ξ|, 1)`.
pub fn check_admissible(
    spec: &KernelSpec,
    xi_samples: &[f64],
    n_max: usize,
    threshold: f64,
) -> Result<AdmissibleReport, KernelError> {
    if xi_samples.contains(&0.0) {
        return Err(KernelError::ZeroFrequency);
    }
    let f = |x: f64| spec.khat(x);
    let mut conditions = Vec::new();
    let c0 = xi_samples
        .iter()
        .map(|&x| f(x).norm() / (1.0f64).min(1.0 / x.abs()))
        .fold(0.0, f64::max);
    conditions.push(ConditionResult {
        name: "decay".into(),
        c_min: c0,
        pass: c0 <= threshold,
    });
    for n in 1..=n_max {
        let c = xi_samples
            .iter()
            .map(|&x| {
                let a = x.abs();
                let h = 0.02 * a.min(1.0);
                let d = finite_difference(&f, x, n, h).norm();
                d / (a.powi(-(n as i32)) * a.min(1.0 / a))
            })
            .fold(0.0, f64::max);
        conditions.push(ConditionResult {
            name: format!("derivative_{n}"),
            c_min: c,
            pass: c <= threshold,
        });
    }
    Ok(AdmissibleReport {
        kernel: spec.name().to_string(),
        threshold,
        samples: xi_samples.len(),
        conditions,
    })
}

/// Degree-7 polynomial smoothstep `t⁴(35 - 84t + 70t² - 20t³)`, clamped to `[0, 1]`.
pub fn smoothstep7(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t.powi(4) * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t.powi(3))
    }
}

/// Even low-pass profile: 1 on `|ξ| <= 1/8`, 0 on `|ξ| >= 3/8`.
pub fn eta_profile(xi: f64) -> f64 {
    1.0 - smoothstep7((xi.abs() - 0.125) / 0.25)
}

/// `η̂(ξ)`: the one-sided limits of `K̂` at 0 carried by the low-pass profile.
pub fn eta_hat(spec: &KernelSpec, xi: f64) -> Complex64 {
    let side = if xi > 0.0 {
        spec.khat_limit(true)
    } else if xi < 0.0 {
        spec.khat_limit(false)
    } else {
        (spec.khat_limit(true) + spec.khat_limit(false)) * 0.5
    };
    side * eta_profile(xi)
}

/// `η̂` sampled on the frequency grid dual to `(origin, spacing, n)`.
pub fn build_eta(spec: &KernelSpec, origin: f64, spacing: f64, n: usize) -> Spectrum {
    Spectrum::from_fn(origin, spacing, n, |xi| eta_hat(spec, xi)).expect("valid grid")
}

/// `ψ_i(ξ) = ψ(2^i ξ) - ψ(2^{i+1} ξ)`.
pub fn lp_piece(psi: &dyn Fn(f64) -> f64, i: i32, xi: f64) -> f64 {
    psi(xi * 2f64.powi(i)) - psi(xi * 2f64.powi(i + 1))
}

/// `ψ_i` sampled on the frequency grid of `template`.
pub fn lp_pieces(psi: &dyn Fn(f64) -> f64, i: i32, template: &Spectrum) -> Spectrum {
    let mut out = template.clone();
    for idx in 0..out.len() {
        out.values[idx] = Complex64::new(lp_piece(psi, i, template.xi(idx)), 0.0);
    }
    out
}

/// Annulus profile `q(ξ) = ρ(ξ) - ρ(2ξ)` with `ρ` equal to 1 on `|ξ| <= 1/4` and
/// 0 on `|ξ| >= 3/8`, so that `Σ_j q(ξ/2^j) = 1` for `ξ ≠ 0` by telescoping.
pub fn q_annulus(xi: f64) -> f64 {
    let rho = |x: f64| 1.0 - smoothstep7((x.abs() - 0.25) / 0.125);
    rho(xi) - rho(2.0 * xi)
}

/// `sup_ξ |d^n/dξ^n g_j(2^j ξ)|` for `g_j = (K̂ - η̂) q(·/2^j)`, `n = 0..=n_max`,
/// sampled on the annulus `1/8 <= |ξ| <= 3/8`.
pub fn g_j_bounds(spec: &KernelSpec, j: i32, n_max: usize, samples: usize) -> Vec<f64> {
    let scale = 2f64.powi(j);
    let g = move |xi: f64| {
        let x = xi * scale;
        (spec.khat(x) - eta_hat(spec, x)) * q_annulus(xi)
    };
    (0..=n_max)
        .map(|n| {
            let mut m: f64 = 0.0;
            for t in 0..samples {
                let a = 0.125 + 0.25 * (t as f64 + 0.5) / samples as f64;
                for xi in [a, -a] {
                    m = m.max(finite_difference(&g, xi, n, 1e-3).norm());
                }
            }
            m
        })
        .collect()
}

/// A kernel value kept as an exact formal combination
/// `Σ_k c_k·2^{-k}K(i/2^k) + r·(1/i)` at a fixed integer `i`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelEntry {
    pub samples: BTreeMap<u32, i64>,
    pub reciprocal: i64,
}

impl KernelEntry {
    fn sample(k: u32) -> Self {
        KernelEntry {
            samples: BTreeMap::from([(k, 1)]),
            reciprocal: 0,
        }
    }

    fn reciprocal() -> Self {
        KernelEntry {
            samples: BTreeMap::new(),
            reciprocal: 1,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.reciprocal == 0 && self.samples.values().all(|&c| c == 0)
    }

    pub fn combine(&self, other: &KernelEntry, sign: i64) -> KernelEntry {
        let mut out = self.clone();
        for (&k, &c) in &other.samples {
            *out.samples.entry(k).or_insert(0) += sign * c;
        }
        out.samples.retain(|_, c| *c != 0);
        out.reciprocal += sign * other.reciprocal;
        out
    }

    pub fn eval(&self, spec: &KernelSpec, i: i64) -> f64 {
        let mut v = 0.0;
        for (&k, &c) in &self.samples {
            let s = 2f64.powi(k as i32);
            v += c as f64 * spec.k(i as f64 / s) / s;
        }
        if self.reciprocal != 0 {
            v += self.reciprocal as f64 / i as f64;
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteKernel {
    pub name: String,
    pub k: u32,
    /// Entries outside `[-radius, radius]` are not stored.
    pub radius: i64,
    pub entries: BTreeMap<i64, KernelEntry>,
}

impl DiscreteKernel {
    pub fn entry(&self, i: i64) -> KernelEntry {
        self.entries.get(&i).cloned().unwrap_or_default()
    }

    pub fn value(&self, spec: &KernelSpec, i: i64) -> f64 {
        self.entries.get(&i).map_or(0.0, |e| e.eval(spec, i))
    }

    pub fn minus(&self, other: &DiscreteKernel) -> DiscreteKernel {
        let radius = self.radius.max(other.radius);
        let mut entries = BTreeMap::new();
        for i in -radius..=radius {
            let e = self.entry(i).combine(&other.entry(i), -1);
            if !e.is_zero() {
                entries.insert(i, e);
            }
        }
        DiscreteKernel {
            name: format!("{}-{}", self.name, other.name),
            k: self.k,
            radius,
            entries,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferKernels {
    pub h: DiscreteKernel,
    pub a: DiscreteKernel,
    pub s: DiscreteKernel,
    pub o: DiscreteKernel,
    /// `Σ_{|i| > radius} |H_k(i)|` is infinite; the recorded bound is the size of the
    /// dropped tail differences `Σ_{|i|>R} |1/i - 1/(i+1)| = 2/(R+1)`.
    pub tail_difference_bound: f64,
}

impl TransferKernels {
    /// `H_k(i)` without truncation: `1/i` beyond the stored radius.
    pub fn h_entry(&self, i: i64) -> KernelEntry {
        if i.abs() > self.h.radius {
            KernelEntry::reciprocal()
        } else {
            self.h.entry(i)
        }
    }
}

/// `H_k, A_k, S_k, O_k` at integer points, `H_k` truncated to `|i| <= 2^{k+6}`.
pub fn discrete_kernels(spec: &KernelSpec, k: i64) -> Result<TransferKernels, KernelError> {
    if k < 1 {
        return Err(KernelError::Scale(k));
    }
    if !spec.is_inverse_y() {
        return Err(KernelError::NotInverseY(spec.name().to_string()));
    }
    let ku = k as u32;
    let w = 1i64 << k;
    let radius = w << 6;
    let mut h = BTreeMap::new();
    let mut a = BTreeMap::new();
    let mut s = BTreeMap::new();
    let mut o = BTreeMap::new();
    for i in -radius..=radius {
        let hv = if (-w..w).contains(&i) {
            KernelEntry::sample(ku)
        } else {
            KernelEntry::reciprocal()
        };
        if (-w..=w).contains(&i) {
            let sv = if i == 0 {
                KernelEntry::default()
            } else {
                KernelEntry::reciprocal()
            };
            let ov = hv.combine(&sv, -1);
            a.insert(i, hv.clone());
            if !sv.is_zero() {
                s.insert(i, sv);
            }
            if !ov.is_zero() {
                o.insert(i, ov);
            }
        }
        h.insert(i, hv);
    }
    let mk = |name: &str, r: i64, entries| DiscreteKernel {
        name: format!("{name}_{k}"),
        k: ku,
        radius: r,
        entries,
    };
    Ok(TransferKernels {
        h: mk("H", radius, h),
        a: mk("A", w, a),
        s: mk("S", w, s),
        o: mk("O", w, o),
        tail_difference_bound: 2.0 / (radius as f64 + 1.0),
    })
}

/// Rows `(k, n, H, A, S, O)` for `|n| <= window`.
pub fn write_kernels_csv<W: Write>(
    out: W,
    spec: &KernelSpec,
    kernels: &[TransferKernels],
    window: i64,
) -> Result<(), KernelError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| KernelError::Csv(e.to_string());
    w.write_record(["k", "n", "H", "A", "S", "O"]).map_err(err)?;
    for t in kernels {
        for n in -window..=window {
            w.write_record([
                t.h.k.to_string(),
                n.to_string(),
                format!("{:e}", t.h.value(spec, n)),
                format!("{:e}", t.a.value(spec, n)),
                format!("{:e}", t.s.value(spec, n)),
                format!("{:e}", t.o.value(spec, n)),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| KernelError::Csv(e.to_string()))
}

/// `H_k(y)` for real `y` (piecewise constant on `[i, i+1)`).
pub fn h_k_at(spec: &KernelSpec, k: i64, y: f64) -> f64 {
    let i = y.floor() as i64;
    let w = 1i64 << k;
    if (-w..w).contains(&i) {
        spec.k(i as f64 / w as f64) / w as f64
    } else {
        1.0 / i as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxError {
    pub k: i64,
    /// `sup_{|y| <= 2^k} 2^{2k}|H_k(y) - 2^{-k}K(y/2^k)|`.
    pub inner: f64,
    /// `sup_{2^k < |y| <= 2^{k+6}} y²|H_k(y) - 2^{-k}K(y/2^k)|`.
    pub outer: f64,
    pub inner_points: usize,
    pub outer_points: usize,
}

pub fn kernel_approx_error(spec: &KernelSpec, k: i64) -> Result<ApproxError, KernelError> {
    if k < 1 {
        return Err(KernelError::Scale(k));
    }
    if !spec.is_inverse_y() {
        return Err(KernelError::NotInverseY(spec.name().to_string()));
    }
    let w = 2f64.powi(k as i32);
    let dil = |y: f64| spec.k(y / w) / w;
    // H_k is constant on each cell [i, i+1); the sup of the continuous difference over
    // the cell is taken on the closed cell, including the left limit at i+1
    let cell_sup = |i: i64, per_unit: i64, weight: &dyn Fn(f64) -> f64| -> f64 {
        let h = h_k_at(spec, k, i as f64);
        (0..=per_unit)
            .map(|t| {
                let y = i as f64 + t as f64 / per_unit as f64;
                weight(y) * (h - dil(y)).abs()
            })
            .fold(0.0, f64::max)
    };
    let wi = w as i64;
    let per_unit_inner = 8;
    let per_unit_outer = 4;
    let inner_weight = |_: f64| w * w;
    let mut inner: f64 = 0.0;
    let mut inner_points = 0;
    for i in -wi..wi {
        inner = inner.max(cell_sup(i, per_unit_inner, &inner_weight));
        inner_points += per_unit_inner as usize + 1;
    }
    let outer_weight = |y: f64| y * y;
    let mut outer: f64 = 0.0;
    let mut outer_points = 0;
    for i in wi..(wi << 6) {
        for cell in [i, -i - 1] {
            outer = outer.max(cell_sup(cell, per_unit_outer, &outer_weight));
            outer_points += per_unit_outer as usize + 1;
        }
    }
    Ok(ApproxError {
        k,
        inner,
        outer,
        inner_points,
        outer_points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbpWeights {
    pub k: i64,
    /// `w_k(n) = n(A_k(n) - A_k(n+1))` for `n = 1..=2^k`.
    pub weights: Vec<f64>,
    pub abs_sum: f64,
}

pub fn summation_by_parts_weights(spec: &KernelSpec, k: i64) -> Result<SbpWeights, KernelError> {
    let t = discrete_kernels(spec, k)?;
    let w = 1i64 << k;
    let weights: Vec<f64> = (1..=w)
        .map(|n| n as f64 * (t.a.value(spec, n) - t.a.value(spec, n + 1)))
        .collect();
    let abs_sum = weights.iter().map(|x| x.abs()).sum();
    Ok(SbpWeights {
        k,
        weights,
        abs_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn inv() -> KernelSpec {
        KernelSpec::new(KernelKind::InverseY)
    }

    #[test]
    fn inverse_y_kernel_shape() {
        let s = inv();
        assert!(s.k(0.05).abs() < 1e-6);
        assert_eq!(s.k(0.0), 0.0);
        assert_eq!(s.k(1.0), 1.0);
        assert_eq!(s.k(-3.0), -1.0 / 3.0);
        assert_eq!(s.k(0.5), -s.k(-0.5));
    }

    #[test]
    fn inverse_y_transform_matches_direct_quadrature() {
        // K̂(ξ) = -2i ∫_0^∞ K(y) sin(2πξy) dy; split at y = 1 and use the
        // closed form of ∫_1^∞ sin(2πξy)/y dy = π/2 - Si(2πξ).
        let s = inv();
        for xi in [0.3, 1.0, 2.5] {
            let near = integrate(0.0, 1.0, 64, |y| s.k(y) * (2.0 * PI * xi * y).sin());
            let si = integrate(0.0, 2.0 * PI * xi, 256, |t| if t == 0.0 { 1.0 } else { t.sin() / t });
            let want = -2.0 * (near + PI / 2.0 - si);
            assert_abs_diff_eq!(s.khat(xi).im, want, epsilon = 1e-10);
            assert_abs_diff_eq!(s.khat(xi).re, 0.0);
        }
    }

    #[test]
    fn admissibility_catalog() {
        let logspace = |lo: f64, hi: f64, m: usize| -> Vec<f64> {
            (0..m)
                .flat_map(|t| {
                    let x = lo * (hi / lo).powf(t as f64 / (m - 1) as f64);
                    [x, -x]
                })
                .collect()
        };
        let xs = logspace(1e-3, 1e2, 120);
        let rep = check_admissible(&inv(), &xs, 3, 1e3).unwrap();
        assert!(rep.pass(), "{rep:?}");
        // bounded: widening the range does not raise the constants
        let below: Vec<f64> = xs.iter().copied().filter(|x| x.abs() <= 30.0).collect();
        let narrow = check_admissible(&inv(), &below, 3, 1e3).unwrap();
        for (a, b) in rep.conditions.iter().zip(&narrow.conditions) {
            assert!(a.c_min <= 1.01 * b.c_min, "{} {} {}", a.name, a.c_min, b.c_min);
        }
        let rep = check_admissible(&KernelSpec::new(KernelKind::Poisson), &xs, 3, 1e3).unwrap();
        assert!(rep.pass(), "{rep:?}");
        let rep = check_admissible(&KernelSpec::new(KernelKind::Zero), &xs, 3, 1e3).unwrap();
        assert!(rep.conditions.iter().all(|c| c.c_min == 0.0));
        let control = KernelSpec::new(KernelKind::Constant);
        let rep = check_admissible(&control, &logspace(1e-3, 1e4, 120), 3, 1e3).unwrap();
        assert!(!rep.condition("decay").unwrap().pass);
        let small = check_admissible(&control, &logspace(1e-3, 1e2, 120), 3, 1e3).unwrap();
        let growth = rep.condition("decay").unwrap().c_min / small.condition("decay").unwrap().c_min;
        assert!((growth - 100.0).abs() < 1e-6);
        assert!(check_admissible(&inv(), &[0.0], 1, 1.0).is_err());
    }

    #[test]
    fn finite_differences_agree_with_closed_forms() {
        let s = inv();
        let f = |x: f64| s.khat(x);
        for xi in [0.2, 0.7, 1.9] {
            for n in 1..=3 {
                let fd = finite_difference(&f, xi, n, 0.02 * xi.min(1.0));
                let cf = s.khat_derivative(n, xi).unwrap();
                assert!((fd - cf).norm() < 1e-2 * (1.0 + cf.norm()), "n={n} xi={xi} {fd} {cf}");
            }
        }
    }

    #[test]
    fn eta_limits_and_support() {
        let s = inv();
        assert_eq!(eta_hat(&s, 0.1), Complex64::new(0.0, -PI));
        assert_eq!(eta_hat(&s, -0.05), Complex64::new(0.0, PI));
        let b = KernelSpec::new(KernelKind::Bump);
        assert_eq!(eta_hat(&b, 0.125), b.khat(0.0));
        assert_eq!(eta_hat(&b, -0.02), b.khat(0.0));
        let e = build_eta(&b, -64.0, 1.0 / 16.0, 2048);
        for (idx, v) in e.values.iter().enumerate() {
            if e.xi(idx).abs() > 0.375 {
                assert_eq!(*v, Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn k_minus_eta_is_linear_at_zero() {
        let s = inv();
        let c = (1..=100)
            .map(|t| {
                let xi = t as f64 * 1e-3;
                (s.khat(xi) - eta_hat(&s, xi)).norm() / xi
            })
            .fold(0.0, f64::max);
        assert!(c < 20.0, "{c}");
    }

    #[test]
    fn lp_pieces_telescope_and_separate() {
        let psi = |x: f64| eta_profile(x);
        for t in 1..200 {
            let xi = t as f64 * 0.01;
            let k = 2;
            let s: f64 = (k..=k + 20).map(|i| lp_piece(&psi, i, xi)).sum();
            assert_abs_diff_eq!(s, psi(xi * 4.0), epsilon = 1e-12);
            for i in -3..6 {
                let v = lp_piece(&psi, i, xi);
                if v != 0.0 {
                    let lo = 2f64.powi(-i) / 16.0;
                    let hi = 3.0 * 2f64.powi(-i) / 8.0;
                    assert!(xi >= lo && xi <= hi, "i={i} xi={xi}");
                    assert_eq!(v * lp_piece(&psi, i + 3, xi), 0.0);
                }
            }
        }
        let zero = |_: f64| 0.0;
        assert_eq!(lp_piece(&zero, 3, 0.1), 0.0);
    }

    #[test]
    fn q_partitions_unity() {
        for t in 1..100 {
            let xi = 0.013 * t as f64;
            let s: f64 = (-20..20).map(|j| q_annulus(xi / 2f64.powi(j))).sum();
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn discrete_kernel_formulas() {
        let s = inv();
        let t = discrete_kernels(&s, 3).unwrap();
        for i in 1..8 {
            assert_abs_diff_eq!(t.o.value(&s, i), s.k(i as f64 / 8.0) / 8.0 - 1.0 / i as f64, epsilon = 1e-15);
        }
        for i in 8..100 {
            assert_eq!(t.h.value(&s, i), 1.0 / i as f64);
        }
        assert_eq!(t.a.value(&s, 9), 0.0);
        assert_eq!(t.a.value(&s, 8), 1.0 / 8.0);
        assert_eq!(t.s.value(&s, 0), 0.0);
        let u = discrete_kernels(&s, 5).unwrap();
        let lhs = t.h.minus(&u.h);
        let rhs = t.o.minus(&u.o);
        for i in -40..=40 {
            assert_eq!(lhs.entry(i), rhs.entry(i), "i={i}");
        }
        let one = discrete_kernels(&s, 1).unwrap();
        assert_eq!(one.h.entry(200), KernelEntry::default());
        assert_eq!(one.h_entry(200), KernelEntry::reciprocal());
        for i in -300..=300 {
            assert_eq!(one.h_entry(i).combine(&u.h_entry(i), -1), one.o.entry(i).combine(&u.o.entry(i), -1), "i={i}");
        }
        assert!(discrete_kernels(&s, 0).is_err());
        assert!(discrete_kernels(&KernelSpec::new(KernelKind::Bump), 2).is_err());
    }

    #[test]
    fn approx_error_examples() {
        let s = inv();
        let w = 2f64.powi(4);
        for i in [16i64, 17, 40, 900] {
            let y = i as f64;
            assert_eq!(h_k_at(&s, 4, y) - s.k(y / w) / w, 0.0);
        }
        let v = (h_k_at(&s, 1, 0.5) - s.k(0.25) / 2.0).abs();
        assert_eq!(v, (s.k(0.0) / 2.0 - s.k(0.25) / 2.0).abs());
        let e = kernel_approx_error(&s, 3).unwrap();
        assert!(e.inner.is_finite() && e.outer.is_finite());
    }

    #[test]
    fn sbp_weights() {
        let s = inv();
        for k in 1..=8 {
            let w = summation_by_parts_weights(&s, k).unwrap();
            let last = *w.weights.last().unwrap();
            let a = discrete_kernels(&s, k).unwrap().a.value(&s, 1 << k);
            assert_abs_diff_eq!(last, (1i64 << k) as f64 * a, epsilon = 1e-15);
        }
    }

    #[test]
    fn kernel_csv_header() {
        let s = inv();
        let t = discrete_kernels(&s, 1).unwrap();
        let mut buf = Vec::new();
        write_kernels_csv(&mut buf, &s, &[t], 2).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,n,H,A,S,O\n"));
        assert_eq!(text.lines().count(), 6);
    }
}
