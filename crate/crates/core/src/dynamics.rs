//! Measure-preserving systems, sampled orbits and the weighted averages and
//! series built from them.

use std::io::Write;

use num_complex::Complex64;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::{ChaCha20Rng, ChaCha8Rng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probe::{self, MaxFunctional, ProbeEstimate, ProbeProtocol};

/// `(√5 − 1)/2`.
pub const GOLDEN: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("rotation angle must lie in [0, 1), got {0}")]
    Angle(f64),
    #[error("cyclic shift needs K >= 1")]
    Modulus,
    #[error("N must be >= 1")]
    Length,
    #[error("orbit window [{lo}, {hi}) does not cover index {n}")]
    Window { lo: i64, hi: i64, n: i64 },
    #[error("empty probe set")]
    NoProbes,
    #[error("state {0:?} does not belong to this system")]
    State(State),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemKind {
    Rotation {
        alpha: f64,
    },
    /// Two-sided doubling (Bernoulli shift on binary digits).
    Doubling,
    CyclicShift {
        #[serde(rename = "K")]
        k: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSystem {
    #[serde(flatten)]
    pub kind: SystemKind,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum State {
    Point(f64),
    Site(u64),
}

impl State {
    pub fn x(&self) -> f64 {
        match *self {
            State::Point(x) => x,
            State::Site(s) => s as f64,
        }
    }

    /// Index of the cell containing the state when the phase space is cut into
    /// `m` equal cells (`Site` states need the system modulus).
    pub fn cell(&self, m: usize, modulus: u64) -> usize {
        match *self {
            State::Point(x) => ((x * m as f64) as usize).min(m - 1),
            State::Site(s) => ((s as u128 * m as u128) / modulus as u128) as usize,
        }
    }
}

const BIT_OFFSET: i64 = 1 << 40;

fn doubling_bits(seed: u64, x0: f64, lo: i64, hi: i64) -> Vec<u8> {
    // digits b_t, t in [lo, hi); b_0..b_51 come from x0, the rest from the stream
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ x0.to_bits());
    let first_word = (lo + BIT_OFFSET).div_euclid(64);
    rng.set_word_pos(2 * first_word as u128);
    let mant = (x0 * (1u64 << 52) as f64) as u64;
    let mut out = Vec::with_capacity((hi - lo) as usize);
    let mut word = rng.next_u64();
    let mut wi = first_word;
    for t in lo..hi {
        let w = (t + BIT_OFFSET).div_euclid(64);
        while wi < w {
            word = rng.next_u64();
            wi += 1;
        }
        let b = if (0..52).contains(&t) {
            ((mant >> (51 - t)) & 1) as u8
        } else {
            ((word >> (t + BIT_OFFSET).rem_euclid(64)) & 1) as u8
        };
        out.push(b);
    }
    out
}

fn digits_to_point(bits: &[u8]) -> f64 {
    let mut v: u64 = 0;
    for &b in bits.iter().take(53) {
        v = (v << 1) | b as u64;
    }
    v as f64 / (1u64 << 53) as f64
}

/// `frac(x + nα)` with the product error carried by an fma.
fn rotate(x: f64, alpha: f64, n: i64) -> f64 {
    let nf = n as f64;
    let p = nf * alpha;
    let err = nf.mul_add(alpha, -p);
    let ip = p.floor();
    let mut r = (p - ip) + err + x;
    r -= r.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl DiscreteSystem {
    pub fn rotation(alpha: f64) -> Result<Self, DynamicsError> {
        let s = DiscreteSystem {
            kind: SystemKind::Rotation { alpha },
            seed: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn doubling(seed: u64) -> Self {
        DiscreteSystem {
            kind: SystemKind::Doubling,
            seed,
        }
    }

    pub fn cyclic(k: u64) -> Result<Self, DynamicsError> {
        let s = DiscreteSystem {
            kind: SystemKind::CyclicShift { k },
            seed: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        match self.kind {
            SystemKind::Rotation { alpha } if !(0.0..1.0).contains(&alpha) => {
                Err(DynamicsError::Angle(alpha))
            }
            SystemKind::CyclicShift { k: 0 } => Err(DynamicsError::Modulus),
            _ => Ok(()),
        }
    }

    pub fn modulus(&self) -> u64 {
        match self.kind {
            SystemKind::CyclicShift { k } => k,
            _ => 1,
        }
    }

    fn check(&self, x0: State) -> Result<(), DynamicsError> {
        match (self.kind, x0) {
            (SystemKind::CyclicShift { k }, State::Site(s)) if s < k => Ok(()),
            (SystemKind::CyclicShift { .. }, _) => Err(DynamicsError::State(x0)),
            (_, State::Point(x)) if (0.0..1.0).contains(&x) => Ok(()),
            _ => Err(DynamicsError::State(x0)),
        }
    }

    /// `τ^n x₀`.
    pub fn point(&self, x0: State, n: i64) -> Result<State, DynamicsError> {
        Ok(self.orbit(x0, n, n + 1)?[0])
    }

    /// `τ^n x₀` for `n` in `[lo, hi)`.
    pub fn orbit(&self, x0: State, lo: i64, hi: i64) -> Result<Vec<State>, DynamicsError> {
        self.check(x0)?;
        Ok(match self.kind {
            SystemKind::Rotation { alpha } => {
                let x = x0.x();
                (lo..hi).map(|n| State::Point(rotate(x, alpha, n))).collect()
            }
            SystemKind::CyclicShift { k } => {
                let s = match x0 {
                    State::Site(s) => s as i128,
                    State::Point(_) => unreachable!(),
                };
                (lo..hi)
                    .map(|n| State::Site((s + n as i128).rem_euclid(k as i128) as u64))
                    .collect()
            }
            SystemKind::Doubling => {
                let bits = doubling_bits(self.seed, x0.x(), lo, hi.max(lo) + 53);
                (0..(hi - lo).max(0) as usize)
                    .map(|i| State::Point(digits_to_point(&bits[i..i + 53])))
                    .collect()
            }
        })
    }

    /// Representative state of the `j`-th of `m` equal cells.
    pub fn sample_point(&self, j: usize, m: usize) -> State {
        match self.kind {
            SystemKind::CyclicShift { k } => State::Site(((j as u128 * k as u128) / m as u128) as u64),
            _ => State::Point((j as f64 + 0.5) / m as f64),
        }
    }
}

/// `f(τ^n x)` for `n` in `[start, start + values.len())`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitWeights {
    pub start: i64,
    pub values: Vec<Complex64>,
}

impl OrbitWeights {
    pub fn new(
        sys: &DiscreteSystem,
        x0: State,
        f: &dyn Fn(State) -> Complex64,
        lo: i64,
        hi: i64,
    ) -> Result<Self, DynamicsError> {
        let states = sys.orbit(x0, lo, hi)?;
        Ok(OrbitWeights {
            start: lo,
            values: states.into_iter().map(f).collect(),
        })
    }

    pub fn from_values(start: i64, values: Vec<Complex64>) -> Self {
        OrbitWeights { start, values }
    }

    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64
    }

    pub fn get(&self, n: i64) -> Result<Complex64, DynamicsError> {
        if n < self.start || n >= self.end() {
            return Err(DynamicsError::Window {
                lo: self.start,
                hi: self.end(),
                n,
            });
        }
        Ok(self.values[(n - self.start) as usize])
    }

    fn covers(&self, lo: i64, hi: i64) -> Result<(), DynamicsError> {
        if lo < self.start {
            return Err(DynamicsError::Window {
                lo: self.start,
                hi: self.end(),
                n: lo,
            });
        }
        if hi > self.end() {
            return Err(DynamicsError::Window {
                lo: self.start,
                hi: self.end(),
                n: hi - 1,
            });
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "f_re", "f_im"])?;
        for (i, v) in self.values.iter().enumerate() {
            wr.write_record(&[
                (self.start + i as i64).to_string(),
                format!("{:.17e}", v.re),
                format!("{:.17e}", v.im),
            ])?;
        }
        wr.flush()
    }
}

fn g_along(
    sys_y: &DiscreteSystem,
    g: &dyn Fn(State) -> Complex64,
    y: State,
    lo: i64,
    hi: i64,
) -> Result<Vec<Complex64>, DynamicsError> {
    Ok(sys_y.orbit(y, lo, hi)?.into_iter().map(g).collect())
}

/// `(1/N) Σ_{n<N} f(τⁿx) g(σⁿy)`.
pub fn return_avg(
    fw: &OrbitWeights,
    sys_y: &DiscreteSystem,
    g: &dyn Fn(State) -> Complex64,
    y: State,
    n: usize,
) -> Result<Complex64, DynamicsError> {
    if n == 0 {
        return Err(DynamicsError::Length);
    }
    fw.covers(0, n as i64)?;
    let gs = g_along(sys_y, g, y, 0, n as i64)?;
    let s: Complex64 = gs.iter().enumerate().map(|(i, gv)| fw.values[(i as i64 - fw.start) as usize] * gv).sum();
    Ok(s / n as f64)
}

/// Running averages `(1/N) Σ_{n<N} f(τⁿx) g(σⁿy)` for `N = 1..=n_max`.
pub fn return_avg_path(
    fw: &OrbitWeights,
    sys_y: &DiscreteSystem,
    g: &dyn Fn(State) -> Complex64,
    y: State,
    n_max: usize,
) -> Result<Vec<Complex64>, DynamicsError> {
    fw.covers(0, n_max as i64)?;
    let gs = g_along(sys_y, g, y, 0, n_max as i64)?;
    let mut acc = Complex64::new(0.0, 0.0);
    Ok(gs
        .iter()
        .enumerate()
        .map(|(i, gv)| {
            acc += fw.values[(i as i64 - fw.start) as usize] * gv;
            acc / (i + 1) as f64
        })
        .collect())
}

/// `Σ'_{n=-N}^{N} f(τⁿx) g(σⁿy)/n`.
pub fn hilbert_series(
    fw: &OrbitWeights,
    sys_y: &DiscreteSystem,
    g: &dyn Fn(State) -> Complex64,
    y: State,
    n: usize,
) -> Result<Complex64, DynamicsError> {
    if n == 0 {
        return Err(DynamicsError::Length);
    }
    let n = n as i64;
    fw.covers(-n, n + 1)?;
    let gs = g_along(sys_y, g, y, -n, n + 1)?;
    // pair ±m so that the odd cancellation happens term by term
    let mut s = Complex64::new(0.0, 0.0);
    for m in (1..=n).rev() {
        let plus = fw.get(m)? * gs[(m + n) as usize];
        let minus = fw.get(-m)? * gs[(n - m) as usize];
        s += (plus - minus) / m as f64;
    }
    Ok(s)
}

/// `(1/N) Σ_{n<N} f(τⁿx) e^{2πinθ}`.
pub fn wiener_wintner(fw: &OrbitWeights, theta: f64, n: usize) -> Result<Complex64, DynamicsError> {
    if n == 0 {
        return Err(DynamicsError::Length);
    }
    fw.covers(0, n as i64)?;
    let s: Complex64 = (0..n as i64)
        .map(|k| {
            let ph = (k as f64 * theta).rem_euclid(1.0);
            fw.values[(k - fw.start) as usize] * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * ph)
        })
        .sum();
    Ok(s / n as f64)
}

/// `Σ'_{n=-N}^{N} f(τⁿx)/n`.
pub fn cotlar_series(fw: &OrbitWeights, n: usize) -> Result<Complex64, DynamicsError> {
    if n == 0 {
        return Err(DynamicsError::Length);
    }
    let n = n as i64;
    fw.covers(-n, n + 1)?;
    let mut s = Complex64::new(0.0, 0.0);
    for m in (1..=n).rev() {
        s += (fw.get(m)? - fw.get(-m)?) / m as f64;
    }
    Ok(s)
}

/// `|v_{m+1} − v_m|` for consecutive entries.
pub fn cauchy_differences(values: &[Complex64]) -> Vec<f64> {
    values.windows(2).map(|w| (w[1] - w[0]).norm()).collect()
}

/// Root-mean-square over `points` equally spaced base points `x_i = (i + 1/2)/points`
/// of the lacunary differences `|S_{2^{m+1}} − S_{2^m}|`, `m` in `ms`. `S_N` is
/// the Cotlar series when `second` is `None`, otherwise the return-times Hilbert
/// series with `(σ, g)` sampled at `y_i = x_i`.
pub fn lacunary_rms(
    sys: &DiscreteSystem,
    f: &(dyn Fn(State) -> Complex64 + Sync),
    second: Option<(&DiscreteSystem, &(dyn Fn(State) -> Complex64 + Sync))>,
    points: usize,
    ms: std::ops::RangeInclusive<u32>,
) -> Result<Vec<f64>, DynamicsError> {
    use rayon::prelude::*;
    let top = 1i64 << *ms.end();
    let per_point: Vec<Vec<f64>> = (0..points)
        .into_par_iter()
        .map(|i| {
            let x = State::Point((i as f64 + 0.5) / points as f64);
            let fw = OrbitWeights::new(sys, x, f, -top, top + 1)?;
            let vals = ms
                .clone()
                .map(|m| match second {
                    None => cotlar_series(&fw, 1 << m),
                    Some((sy, g)) => hilbert_series(&fw, sy, g, x, 1 << m),
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(cauchy_differences(&vals))
        })
        .collect::<Result<_, DynamicsError>>()?;
    let len = per_point.first().map_or(0, Vec::len);
    Ok((0..len)
        .map(|k| (per_point.iter().map(|d| d[k] * d[k]).sum::<f64>() / points as f64).sqrt())
        .collect())
}

/// Number of places where a sequence increases.
pub fn inversions(xs: &[f64]) -> usize {
    xs.windows(2).filter(|w| w[1] > w[0]).count()
}

/// One-sample Kolmogorov–Smirnov distance to the uniform law on `[0, 1)`.
pub fn ks_uniform(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let lo = x - i as f64 / n;
            let hi = (i + 1) as f64 / n - x;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// A maximal functional `g ↦ ‖sup_N |Σ_{t ∈ level ≤ N} c_t g(cell_t(j))·s_N|‖_{ℓ²_j}`
/// over a cell model of the second system.
#[derive(Debug, Clone)]
pub struct ReturnFunctional {
    rows: usize,
    cells: usize,
    row_weight: f64,
    cell_weight: f64,
    level_end: Vec<usize>,
    level_scale: Vec<f64>,
    coef: Vec<Complex64>,
    /// `term * rows + row`; `u32::MAX` marks a term outside the cell model.
    cell_of: Vec<u32>,
}

const NONE: u32 = u32::MAX;

impl ReturnFunctional {
    fn orbit_cells(
        sys_y: &DiscreteSystem,
        cells: usize,
        ns: &[i64],
    ) -> Result<Vec<u32>, DynamicsError> {
        let lo = *ns.iter().min().unwrap_or(&0);
        let hi = *ns.iter().max().unwrap_or(&0) + 1;
        let mut table = vec![NONE; ns.len() * cells];
        for j in 0..cells {
            let y = sys_y.sample_point(j, cells);
            let orbit = sys_y.orbit(y, lo, hi)?;
            for (t, &n) in ns.iter().enumerate() {
                table[t * cells + j] = orbit[(n - lo) as usize].cell(cells, sys_y.modulus()) as u32;
            }
        }
        Ok(table)
    }

    /// Averages `N = 1..=n_max` with `g` a step function on `cells` equal cells
    /// of `Y`, sampled at one point per cell. Norms are taken in `L²(Y)`.
    pub fn averages(
        fw: &OrbitWeights,
        sys_y: &DiscreteSystem,
        cells: usize,
        n_max: usize,
    ) -> Result<Self, DynamicsError> {
        if n_max == 0 {
            return Err(DynamicsError::Length);
        }
        fw.covers(0, n_max as i64)?;
        let ns: Vec<i64> = (0..n_max as i64).collect();
        Ok(ReturnFunctional {
            rows: cells,
            cells,
            row_weight: 1.0 / cells as f64,
            cell_weight: 1.0 / cells as f64,
            level_end: (1..=n_max).collect(),
            level_scale: (1..=n_max).map(|n| 1.0 / n as f64).collect(),
            coef: ns.iter().map(|&n| fw.get(n)).collect::<Result<_, _>>()?,
            cell_of: Self::orbit_cells(sys_y, cells, &ns)?,
        })
    }

    /// Truncated series `Σ'_{|n|≤N} f(τⁿx) g(σⁿy)/n`, `N = 1..=n_max`.
    pub fn hilbert(
        fw: &OrbitWeights,
        sys_y: &DiscreteSystem,
        cells: usize,
        n_max: usize,
    ) -> Result<Self, DynamicsError> {
        if n_max == 0 {
            return Err(DynamicsError::Length);
        }
        let m = n_max as i64;
        fw.covers(-m, m + 1)?;
        let ns: Vec<i64> = (1..=m).flat_map(|n| [n, -n]).collect();
        Ok(ReturnFunctional {
            rows: cells,
            cells,
            row_weight: 1.0 / cells as f64,
            cell_weight: 1.0 / cells as f64,
            level_end: (1..=n_max).map(|n| 2 * n).collect(),
            level_scale: vec![1.0; n_max],
            coef: ns.iter().map(|&n| fw.get(n).map(|v| v / n as f64)).collect::<Result<_, _>>()?,
            cell_of: Self::orbit_cells(sys_y, cells, &ns)?,
        })
    }

    /// `ψ ↦ ‖sup_N (1/N) Σ_{b<N} φ(a+b) ψ(c+b)‖_{ℓ²_c}` with `ψ` supported on
    /// `[0, width)`. `phi[i]` is `φ(phi_start + i)`.
    pub fn transfer(phi_start: i64, phi: &[f64], a: i64, width: usize) -> Option<Self> {
        let last = phi_start + phi.len() as i64 - 1;
        if phi.is_empty() || a > last || width == 0 {
            return None;
        }
        // beyond the support of φ(a + ·) the partial sums freeze and 1/N decays
        let n_max = (last - a + 1) as usize;
        let c_lo = -(n_max as i64) + 1;
        let rows = width + n_max - 1;
        let mut cell_of = vec![NONE; n_max * rows];
        let mut coef = Vec::with_capacity(n_max);
        for b in 0..n_max as i64 {
            let idx = a + b - phi_start;
            coef.push(Complex64::new(
                if (0..phi.len() as i64).contains(&idx) { phi[idx as usize] } else { 0.0 },
                0.0,
            ));
            for r in 0..rows {
                let c = c_lo + r as i64;
                let pos = c + b;
                if (0..width as i64).contains(&pos) {
                    cell_of[b as usize * rows + r] = pos as u32;
                }
            }
        }
        Some(ReturnFunctional {
            rows,
            cells: width,
            row_weight: 1.0,
            cell_weight: 1.0,
            level_end: (1..=n_max).collect(),
            level_scale: (1..=n_max).map(|n| 1.0 / n as f64).collect(),
            coef,
            cell_of,
        })
    }

    pub fn levels(&self) -> usize {
        self.level_end.len()
    }

    fn row_path(&self, g: &[Complex64], j: usize, out: &mut Vec<Complex64>) {
        out.clear();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut t = 0;
        for (l, &end) in self.level_end.iter().enumerate() {
            while t < end {
                let c = self.cell_of[t * self.rows + j];
                if c != NONE {
                    acc += self.coef[t] * g[c as usize];
                }
                t += 1;
            }
            out.push(acc * self.level_scale[l]);
        }
    }

    /// `sup_N |A_N g(y_j)|` for every row.
    pub fn row_maxima(&self, g: &[Complex64]) -> Vec<f64> {
        let mut path = Vec::with_capacity(self.levels());
        (0..self.rows)
            .map(|j| {
                self.row_path(g, j, &mut path);
                path.iter().map(|z| z.norm()).fold(0.0, f64::max)
            })
            .collect()
    }
}

impl MaxFunctional for ReturnFunctional {
    fn dim(&self) -> usize {
        self.cells
    }

    fn coord_weight(&self) -> f64 {
        self.cell_weight
    }

    fn value(&self, g: &[Complex64]) -> f64 {
        (self.row_weight * self.row_maxima(g).iter().map(|m| m * m).sum::<f64>()).sqrt()
    }

    fn surrogate(&self, g: &[Complex64], p: f64) -> (f64, Vec<Complex64>) {
        let mut grad = vec![Complex64::new(0.0, 0.0); self.cells];
        let mut path = Vec::with_capacity(self.levels());
        let mut total = 0.0;
        let mut w = vec![Complex64::new(0.0, 0.0); self.levels()];
        for j in 0..self.rows {
            self.row_path(g, j, &mut path);
            let m = path.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if m == 0.0 {
                continue;
            }
            let s: f64 = path.iter().map(|z| (z.norm() / m).powf(p)).sum();
            let u = m * s.powf(1.0 / p);
            total += u * u;
            for (l, z) in path.iter().enumerate() {
                w[l] = z * (z.norm() / u).powf(p - 2.0) * self.level_scale[l];
            }
            // suffix sums: term t contributes to every level that contains it
            let mut suffix = Complex64::new(0.0, 0.0);
            let mut t = self.coef.len();
            for l in (0..self.levels()).rev() {
                suffix += w[l];
                let start = if l == 0 { 0 } else { self.level_end[l - 1] };
                while t > start {
                    t -= 1;
                    let c = self.cell_of[t * self.rows + j];
                    if c != NONE {
                        grad[c as usize] += self.coef[t].conj() * suffix;
                    }
                }
            }
        }
        ((self.row_weight * total).sqrt(), grad)
    }
}

/// Largest `‖sup_{N≤N_max}|avg|‖_{L²_y}` over the given probes, each taken as
/// a step function on `probes[0].len()` cells of `Y` and normalized.
pub fn max_return_norm(
    fw: &OrbitWeights,
    sys_y: &DiscreteSystem,
    probes: &[Vec<Complex64>],
    n_max: usize,
) -> Result<f64, DynamicsError> {
    let cells = probes.first().ok_or(DynamicsError::NoProbes)?.len();
    let f = ReturnFunctional::averages(fw, sys_y, cells, n_max)?;
    Ok(probe::max_over(&f, probes).map(|(_, v)| v).unwrap_or(0.0))
}

/// Probe-protocol estimate of the same quantity over the whole unit ball.
pub fn max_return_estimate(
    fw: &OrbitWeights,
    sys_y: &DiscreteSystem,
    cells: usize,
    n_max: usize,
    protocol: &ProbeProtocol,
    rng: &mut ChaCha20Rng,
) -> Result<ProbeEstimate, DynamicsError> {
    let f = ReturnFunctional::averages(fw, sys_y, cells, n_max)?;
    Ok(probe::estimate_sup(&f, protocol, rng))
}

/// Lower-bound estimate of `C(φ)(a)` over `ψ` supported on `[0, width)`.
pub fn transfer_best_constant(
    phi_start: i64,
    phi: &[f64],
    a: i64,
    width: usize,
    protocol: &ProbeProtocol,
    rng: &mut ChaCha20Rng,
) -> ProbeEstimate {
    match ReturnFunctional::transfer(phi_start, phi, a, width) {
        Some(f) if phi.iter().any(|v| *v != 0.0) => probe::estimate_sup(&f, protocol, rng),
        _ => ProbeEstimate {
            value: 0.0,
            initial: 0.0,
            source: "zero".into(),
            probes: 0,
            ascent_accepted: 0,
            best: Vec::new(),
        },
    }
}
