//! Fourier multiplier norms, Bourgain's band operators `Δ_k`, nested-band
//! variation and the return-times model operator.

use std::f64::consts::PI;
use std::fmt;
use std::ops::RangeInclusive;
use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{pow2, rat, rat_floor, rat_to_f64, GridError, GridInterval, GridSpec, Rational};
use crate::probe::{estimate_sup, protocol_probes, MaxFunctional, ProbeEstimate, ProbeProtocol};
use crate::seqnorms::{osc_var_norm, NormError, PartitionPoints, VariationMode, VectorSequence};
use crate::signal::{cis, dft_forward, dft_inverse, SampledSignal, SignalError, Spectrum};
use crate::tf::{packet_hat, psi0, CoefficientTable, PacketFamily, TfError, Tile};

/// Bins a band must cover before a band multiplier is applied to it.
pub const MIN_BAND_BINS: usize = 8;

#[derive(Debug, Error)]
pub enum MultiplierError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("band {band} is resolved by {bins} bins, need at least {MIN_BAND_BINS}")]
    Resolution { band: String, bins: usize },
    #[error("model operator used before its θ-grid was precomputed")]
    State,
    #[error("grid: {0}")]
    Grid(#[from] GridError),
    #[error("signal: {0}")]
    Signal(#[from] SignalError),
    #[error("norm: {0}")]
    Norm(#[from] NormError),
    #[error("tiles: {0}")]
    Tf(#[from] TfError),
}

type Result<T> = std::result::Result<T, MultiplierError>;

fn domain(msg: impl Into<String>) -> MultiplierError {
    MultiplierError::Domain(msg.into())
}

/// The finite frequency set `Λ = {λ_1, ..., λ_L}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyPointSet {
    points: Vec<Rational>,
    separated: bool,
}

impl FrequencyPointSet {
    /// Distinct rationals; with `separated`, every unit interval `[n, n+1)` holds at most one point.
    pub fn new(points: Vec<Rational>, separated: bool) -> Result<Self> {
        if points.is_empty() {
            return Err(domain("empty frequency set"));
        }
        let mut sorted = points.clone();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(domain("frequency points must be distinct"));
        }
        if separated {
            let cells: Vec<BigInt> = sorted.iter().map(rat_floor).collect();
            if let Some(w) = cells.windows(2).find(|w| w[0] == w[1]) {
                return Err(domain(format!("two points in the unit interval [{}, {})", w[0], &w[0] + 1)));
            }
        }
        Ok(FrequencyPointSet { points, separated })
    }

    /// `L` points with denominators `2^bits`: one per unit cell `[l, l+1)` when
    /// separated, otherwise anywhere in `[0, L)`.
    pub fn random(l: usize, separated: bool, bits: u32, rng: &mut impl Rng) -> Result<Self> {
        if l == 0 || bits > 40 {
            return Err(domain(format!("need L >= 1 and bits <= 40, got L={l}, bits={bits}")));
        }
        let den = 1i64 << bits;
        let points = if separated {
            (0..l as i64).map(|c| rat(c * den + rng.gen_range(0..den), den)).collect()
        } else {
            let mut nums: Vec<i64> = Vec::with_capacity(l);
            while nums.len() < l {
                let v = rng.gen_range(0..l as i64 * den);
                if !nums.contains(&v) {
                    nums.push(v);
                }
            }
            nums.into_iter().map(|v| rat(v, den)).collect()
        };
        FrequencyPointSet::new(points, separated)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Rational] {
        &self.points
    }

    pub fn separated(&self) -> bool {
        self.separated
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.points.iter().map(rat_to_f64).collect()
    }
}

/// One member of `R_k`, together with the indices of the points of `Λ` it contains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Band {
    pub k: i64,
    pub interval: GridInterval,
    pub members: Vec<usize>,
}

impl Band {
    /// Half-open `[lo, hi)` in `f64`.
    pub fn bounds(&self) -> (f64, f64) {
        self.interval.to_f64()
    }

    pub fn contains(&self, xi: f64) -> bool {
        let (lo, hi) = self.bounds();
        lo <= xi && xi < hi
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lo, hi) = self.interval.endpoints();
        write!(f, "[{lo}, {hi}) at k={}", self.k)
    }
}

pub type CustomMultiplier = Arc<dyn Fn(&Band, f64) -> Complex64 + Send + Sync>;

/// The multipliers `m_ω` attached to the bands.
#[derive(Clone)]
pub enum BandMultiplier {
    One,
    /// `m_ω ≡ e^{iφ_l}` with `l` the first point of `Λ` in `ω`.
    Phases(Vec<f64>),
    Custom(CustomMultiplier),
}

impl fmt::Debug for BandMultiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandMultiplier::One => write!(f, "One"),
            BandMultiplier::Phases(p) => f.debug_tuple("Phases").field(p).finish(),
            BandMultiplier::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// `Λ`, the frequency grid the bands are taken from and the band multipliers.
#[derive(Debug, Clone)]
pub struct BandFamily {
    pub points: FrequencyPointSet,
    pub grid: GridSpec,
    pub multiplier: BandMultiplier,
}

impl BandFamily {
    pub fn new(points: FrequencyPointSet, multiplier: BandMultiplier) -> Result<Self> {
        BandFamily::on_grid(points, GridSpec::standard(), multiplier)
    }

    pub fn on_grid(points: FrequencyPointSet, grid: GridSpec, multiplier: BandMultiplier) -> Result<Self> {
        grid.validate()?;
        if let BandMultiplier::Phases(p) = &multiplier {
            if p.len() != points.len() {
                return Err(domain(format!("{} phases for {} points", p.len(), points.len())));
            }
        }
        Ok(BandFamily {
            points,
            grid,
            multiplier,
        })
    }

    /// `R_k`: the grid intervals of length `2^{-k}` that contain a point of `Λ`, sorted.
    pub fn bands(&self, k: i64) -> Result<Vec<Band>> {
        let scale = i32::try_from(-k).map_err(|_| domain(format!("k = {k} out of range")))?;
        let off = self
            .grid
            .offset_at_scale(scale)
            .ok_or_else(|| domain(format!("grid has no intervals of length 2^{scale}")))?;
        let shift = rat(off, self.grid.modulus);
        let mut bands: Vec<Band> = Vec::new();
        for (l, p) in self.points.points().iter().enumerate() {
            let idx = rat_floor(&(p / pow2(scale) - &shift))
                .to_i64()
                .ok_or_else(|| domain("band index overflows i64"))?;
            let interval = self.grid.interval_at(scale, idx).expect("offset checked above");
            match bands.iter_mut().find(|b| b.interval == interval) {
                Some(b) => b.members.push(l),
                None => bands.push(Band {
                    k,
                    interval,
                    members: vec![l],
                }),
            }
        }
        bands.sort_by_key(|a| a.interval.left());
        Ok(bands)
    }

    pub fn multiplier_at(&self, band: &Band, xi: f64) -> Complex64 {
        match &self.multiplier {
            BandMultiplier::One => Complex64::new(1.0, 0.0),
            BandMultiplier::Phases(p) => cis(p[band.members[0]]),
            BandMultiplier::Custom(m) => m(band, xi),
        }
    }
}

/// Spectrum indices `k` (relative to `-n/2`) whose frequency lies in `[lo, hi)`.
fn bins_in(spec: &Spectrum, lo: f64, hi: f64) -> std::ops::Range<usize> {
    let dxi = spec.dxi();
    let half = (spec.len() / 2) as i64;
    // smallest integer j with j·dξ >= x, robust to rounding at exact multiples
    let first_at_or_above = |x: f64| {
        let j = (x / dxi).round();
        if (j * dxi - x).abs() <= 1e-12 * x.abs().max(1.0) {
            j as i64
        } else {
            (x / dxi).ceil() as i64
        }
    };
    let a = first_at_or_above(lo).clamp(-half, half);
    let b = first_at_or_above(hi).clamp(-half, half);
    ((a + half) as usize)..((b.max(a) + half) as usize)
}

fn check_band(spec: &Spectrum, band: &Band) -> Result<std::ops::Range<usize>> {
    let (lo, hi) = band.bounds();
    let r = bins_in(spec, lo, hi);
    if r.len() < MIN_BAND_BINS {
        return Err(MultiplierError::Resolution {
            band: band.to_string(),
            bins: r.len(),
        });
    }
    Ok(r)
}

fn delta_spectrum(family: &BandFamily, k: i64, spec: &Spectrum) -> Result<Spectrum> {
    let mut out = spec.clone();
    out.values.iter_mut().for_each(|z| *z = Complex64::zero());
    for band in family.bands(k)? {
        for idx in check_band(spec, &band)? {
            out.values[idx] = spec.values[idx] * family.multiplier_at(&band, spec.xi(idx));
        }
    }
    Ok(out)
}

/// `Δ_k f = Σ_{ω ∈ R_k} ∫_ω m_ω f̂ e^{2πiξx} dξ` by spectral multiplication.
pub fn apply_band_multiplier(family: &BandFamily, k: i64, f: &SampledSignal) -> Result<SampledSignal> {
    Ok(delta_spectrum(family, k, &f.transform())?.inverse())
}

fn delta_range(family: &BandFamily, f: &SampledSignal, ks: &[i64]) -> Result<Vec<SampledSignal>> {
    let spec = f.transform();
    ks.par_iter()
        .map(|&k| Ok(delta_spectrum(family, k, &spec)?.inverse()))
        .collect()
}

fn l2_real(values: &[f64], dx: f64) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() * dx).sqrt()
}

/// Pointwise `sup_k |Δ_k f(x)|` over `ks`, as a real signal.
pub fn maximal_delta(family: &BandFamily, f: &SampledSignal, ks: RangeInclusive<i64>) -> Result<SampledSignal> {
    let ks: Vec<i64> = ks.collect();
    if ks.is_empty() {
        return Err(domain("empty k range"));
    }
    let deltas = delta_range(family, f, &ks)?;
    let samples = (0..f.len())
        .map(|j| {
            let m = deltas.iter().map(|d| d.samples[j].norm()).fold(0.0, f64::max);
            Complex64::new(m, 0.0)
        })
        .collect();
    Ok(f.with_samples(samples))
}

/// `(Σ_j ‖sup_{u_j ≤ k < u_{j+1}} |Δ_k f - Δ_{u_j} f|‖₂²)^{1/2}`.
pub fn oscillation_delta(family: &BandFamily, f: &SampledSignal, u: &PartitionPoints) -> Result<f64> {
    let pts = u.points();
    let ks: Vec<i64> = (pts[0]..pts[pts.len() - 1]).collect();
    let deltas = delta_range(family, f, &ks)?;
    let at = |k: i64| &deltas[(k - pts[0]) as usize];
    let mut total = 0.0;
    for w in pts.windows(2) {
        let anchor = at(w[0]);
        let sup: Vec<f64> = (0..f.len())
            .map(|j| {
                (w[0]..w[1])
                    .map(|k| (at(k).samples[j] - anchor.samples[j]).norm())
                    .fold(0.0, f64::max)
            })
            .collect();
        total += l2_real(&sup, f.spacing).powi(2);
    }
    Ok(total.sqrt())
}

/// Nested dyadic intervals `ω_{k0} ⊃ ω_{k0+1} ⊃ ...` with `|ω_k| = 2^{-k}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NestedChain {
    pub k0: i64,
    pub intervals: Vec<GridInterval>,
}

impl NestedChain {
    pub fn new(k0: i64, indices: Vec<i64>) -> Result<Self> {
        if indices.is_empty() {
            return Err(domain("empty chain"));
        }
        for (i, w) in indices.windows(2).enumerate() {
            if w[1].div_euclid(2) != w[0] {
                return Err(domain(format!(
                    "chain not nested at k = {}: index {} is not a son of {}",
                    k0 + i as i64 + 1,
                    w[1],
                    w[0]
                )));
            }
        }
        let intervals = indices
            .iter()
            .enumerate()
            .map(|(i, &n)| GridInterval::dyadic(-(k0 as i32) - i as i32, n))
            .collect();
        Ok(NestedChain { k0, intervals })
    }

    /// Random descent of `len` intervals starting from `[n0 2^{-k0}, (n0+1) 2^{-k0})`.
    pub fn random(k0: i64, n0: i64, len: usize, rng: &mut impl Rng) -> Result<Self> {
        let mut idx = vec![n0];
        while idx.len() < len {
            let last = *idx.last().unwrap();
            idx.push(2 * last + rng.gen_range(0..2));
        }
        NestedChain::new(k0, idx)
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// `‖ ‖P_{ω_k} f(x)‖_{O_U ∩ V^r_k} ‖_{L²_x}` with `‖·‖_{O_U ∩ V^r} = ‖·‖_{O_U} + ‖·‖_{V^r}`.
pub fn nested_band_variation(
    chain: &NestedChain,
    f: &SampledSignal,
    r: f64,
    u: &PartitionPoints,
) -> Result<f64> {
    if !(r > 2.0 && r.is_finite()) {
        return Err(domain(format!("need r > 2, got {r}")));
    }
    let spec = f.transform();
    let proj: Vec<SampledSignal> = chain
        .intervals
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let band = Band {
                k: chain.k0 + i as i64,
                interval: *w,
                members: Vec::new(),
            };
            let bins = check_band(&spec, &band)?;
            let mut s = spec.clone();
            for (idx, z) in s.values.iter_mut().enumerate() {
                if !bins.contains(&idx) {
                    *z = Complex64::zero();
                }
            }
            Ok(s.inverse())
        })
        .collect::<Result<_>>()?;
    let per_x: Vec<f64> = (0..f.len())
        .into_par_iter()
        .map(|j| {
            let vals: Vec<Complex64> = proj.iter().map(|p| p.samples[j]).collect();
            osc_var_norm(&VectorSequence::from_complex(chain.k0, &vals), u, r, VariationMode::DpLower)
        })
        .collect::<std::result::Result<_, _>>()?;
    Ok(l2_real(&per_x, f.spacing))
}

/// `A_M = ‖sup_{j ∈ 2^{levels-M}{1..2^M}} |S_j f|‖₂` for `M = 0..=levels`, where `S_j`
/// projects onto the first `j` of `2^levels` consecutive bands `[lo + iw, lo + (i+1)w)`.
pub fn dyadic_block_maxima(f: &SampledSignal, lo: f64, width: f64, levels: u32) -> Result<Vec<f64>> {
    if levels > 10 || !(width > 0.0) {
        return Err(domain(format!("need levels <= 10 and width > 0, got {levels}, {width}")));
    }
    let count = 1usize << levels;
    let spec = f.transform();
    let partial: Vec<SampledSignal> = (1..=count)
        .into_par_iter()
        .map(|j| {
            let mut s = spec.clone();
            let keep = bins_in(&spec, lo, lo + j as f64 * width);
            for (idx, z) in s.values.iter_mut().enumerate() {
                if !keep.contains(&idx) {
                    *z = Complex64::zero();
                }
            }
            s.inverse()
        })
        .collect();
    Ok((0..=levels)
        .map(|m| {
            let step = 1usize << (levels - m);
            let sup: Vec<f64> = (0..f.len())
                .map(|x| {
                    (1..=(1usize << m))
                        .map(|t| partial[t * step - 1].samples[x].norm())
                        .fold(0.0, f64::max)
                })
                .collect();
            l2_real(&sup, f.spacing)
        })
        .collect())
}

/// Samples `m(ξ)` on the DFT bins of an `n`-point grid of spacing `dx`, in DFT order.
pub fn sample_multiplier(n: usize, dx: f64, m: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
    let dxi = 1.0 / (n as f64 * dx);
    (0..n)
        .map(|c| {
            let k = if c < n / 2 { c as i64 } else { c as i64 - n as i64 };
            m(k as f64 * dxi)
        })
        .collect()
}

/// `g ↦ (Σ_b ‖sup_{k} |T_{b,k} g|‖₂²)^{1/2}` for blocks of multipliers in DFT order.
///
/// In spatial mode the coordinates are samples of `g` with weight `dx`; in spectral
/// mode they are samples of `ĝ` on a frequency grid with weight `dθ`.
#[derive(Debug, Clone)]
pub struct BlockMaximal {
    n: usize,
    in_weight: f64,
    out_weight: f64,
    spatial: bool,
    blocks: Vec<Vec<Vec<Complex64>>>,
}

impl BlockMaximal {
    fn build(n: usize, spatial: bool, step: f64, blocks: Vec<Vec<Vec<Complex64>>>) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(domain(format!("length {n} is not a power of two")));
        }
        if blocks.iter().all(|b| b.is_empty()) {
            return Err(domain("empty multiplier family"));
        }
        if let Some(m) = blocks.iter().flatten().find(|m| m.len() != n) {
            return Err(domain(format!("multiplier has {} samples, expected {n}", m.len())));
        }
        let (in_weight, out_weight) = if spatial { (step, step) } else { (step, 1.0 / (n as f64 * step)) };
        Ok(BlockMaximal {
            n,
            in_weight,
            out_weight,
            spatial,
            blocks,
        })
    }

    pub fn spatial(dx: f64, blocks: Vec<Vec<Vec<Complex64>>>) -> Result<Self> {
        let n = blocks.iter().flatten().next().map_or(0, |m| m.len());
        BlockMaximal::build(n, true, dx, blocks)
    }

    pub fn spectral(dtheta: f64, blocks: Vec<Vec<Vec<Complex64>>>) -> Result<Self> {
        let n = blocks.iter().flatten().next().map_or(0, |m| m.len());
        BlockMaximal::build(n, false, dtheta, blocks)
    }

    fn input_spectrum(&self, g: &[Complex64]) -> Vec<Complex64> {
        let mut buf = g.to_vec();
        if self.spatial {
            dft_forward(&mut buf);
        }
        buf
    }

    fn apply(&self, ghat: &[Complex64], m: &[Complex64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = ghat.iter().zip(m).map(|(a, b)| a * b).collect();
        dft_inverse(&mut buf);
        let c = if self.spatial { 1.0 / self.n as f64 } else { self.in_weight };
        buf.iter_mut().for_each(|z| *z *= c);
        buf
    }

    fn adjoint_into(&self, w: &[Complex64], m: &[Complex64], acc: &mut [Complex64]) {
        let mut buf = w.to_vec();
        dft_forward(&mut buf);
        for (b, mk) in buf.iter_mut().zip(m) {
            *b *= mk.conj();
        }
        let c = if self.spatial {
            dft_inverse(&mut buf);
            1.0 / self.n as f64
        } else {
            self.in_weight
        };
        for (a, b) in acc.iter_mut().zip(buf) {
            *a += b * c;
        }
    }

    /// `max_θ (Σ_b max_k |m_{b,k}(θ)|²)^{1/2}`, attained by a point mass in `ĝ`.
    pub fn point_mass_bound(&self) -> f64 {
        (0..self.n)
            .map(|c| {
                self.blocks
                    .iter()
                    .map(|b| b.iter().map(|m| m[c].norm()).fold(0.0, f64::max).powi(2))
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
            .sqrt()
    }
}

impl MaxFunctional for BlockMaximal {
    fn dim(&self) -> usize {
        self.n
    }

    fn coord_weight(&self) -> f64 {
        self.in_weight
    }

    fn value(&self, g: &[Complex64]) -> f64 {
        let ghat = self.input_spectrum(g);
        let mut total = 0.0;
        for block in &self.blocks {
            let mut sup = vec![0.0f64; self.n];
            for m in block {
                for (s, z) in sup.iter_mut().zip(self.apply(&ghat, m)) {
                    *s = s.max(z.norm());
                }
            }
            total += sup.iter().map(|s| s * s).sum::<f64>();
        }
        (total * self.out_weight).sqrt()
    }

    fn surrogate(&self, g: &[Complex64], p: f64) -> (f64, Vec<Complex64>) {
        let ghat = self.input_spectrum(g);
        let mut total = 0.0;
        let mut grad = vec![Complex64::zero(); self.n];
        for block in &self.blocks {
            let outs: Vec<Vec<Complex64>> = block.iter().map(|m| self.apply(&ghat, m)).collect();
            let s: Vec<f64> = (0..self.n)
                .map(|c| outs.iter().map(|z| z[c].norm().powf(p)).sum::<f64>().powf(1.0 / p))
                .collect();
            total += s.iter().map(|v| v * v).sum::<f64>();
            for (m, z) in block.iter().zip(&outs) {
                let w: Vec<Complex64> = (0..self.n)
                    .map(|c| {
                        let a = z[c].norm();
                        if s[c] == 0.0 || a == 0.0 {
                            Complex64::zero()
                        } else {
                            z[c] * ((a / s[c]).powf(p - 2.0))
                        }
                    })
                    .collect();
                self.adjoint_into(&w, m, &mut grad);
            }
        }
        ((total * self.out_weight).sqrt(), grad)
    }
}

fn probe_count(protocol: &ProbeProtocol, dim: usize) -> usize {
    protocol.gaussian + protocol.constant as usize + protocol.frequencies.min(dim)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpEstimate {
    pub p: f64,
    /// Largest probe ratio; a certified lower bound for `‖m‖_{M_p}`.
    pub value: f64,
    /// `‖m‖_∞` over the grid bins, which equals `‖m‖_{M_2}`; only for `p = 2`.
    pub exact: Option<f64>,
    pub source: String,
    pub probes: usize,
}

impl MpEstimate {
    /// Whether the probe estimate reaches the exact `M_2` norm within `rel`.
    pub fn reaches_exact(&self, rel: f64) -> Option<bool> {
        self.exact.map(|e| self.value >= (1.0 - rel) * e)
    }
}

fn lp_samples(z: &[Complex64], p: f64, dx: f64) -> f64 {
    (z.iter().map(|v| v.norm().powf(p)).sum::<f64>() * dx).powf(1.0 / p)
}

/// Probe lower bound for `‖m‖_{M_p}` on an `n`-point grid of spacing `dx`.
pub fn mp_norm_estimate(
    m: impl Fn(f64) -> Complex64,
    p: f64,
    n: usize,
    dx: f64,
    protocol: &ProbeProtocol,
    rng: &mut ChaCha20Rng,
) -> Result<MpEstimate> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(domain(format!("need 1 <= p < ∞, got {p}")));
    }
    if probe_count(protocol, n) == 0 {
        return Err(domain("probe protocol has no probes"));
    }
    let ms = sample_multiplier(n, dx, m);
    let exact = ms.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let op = BlockMaximal::spatial(dx, vec![vec![ms]])?;
    if p == 2.0 {
        let est = estimate_sup(&op, protocol, rng);
        return Ok(MpEstimate {
            p,
            value: est.value,
            exact: Some(exact),
            source: est.source,
            probes: est.probes,
        });
    }
    let probes = protocol_probes(n, protocol, rng);
    let ratios: Vec<f64> = probes
        .par_iter()
        .map(|(_, h)| {
            let out = op.apply(&op.input_spectrum(h), &op.blocks[0][0]);
            let d = lp_samples(h, p, dx);
            if d > 0.0 {
                lp_samples(&out, p, dx) / d
            } else {
                0.0
            }
        })
        .collect();
    let (i, v) = ratios
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
    Ok(MpEstimate {
        p,
        value: v,
        exact: None,
        source: probes[i].0.clone(),
        probes: probes.len(),
    })
}

/// Probe lower bound for the `M_2^*` norm of a multiplier sequence.
pub fn m2star_estimate(
    ms: &[&(dyn Fn(f64) -> Complex64 + Sync)],
    n: usize,
    dx: f64,
    protocol: &ProbeProtocol,
    rng: &mut ChaCha20Rng,
) -> Result<ProbeEstimate> {
    if ms.is_empty() {
        return Err(domain("empty multiplier family"));
    }
    if probe_count(protocol, n) == 0 {
        return Err(domain("probe protocol has no probes"));
    }
    let block = ms.iter().map(|m| sample_multiplier(n, dx, m)).collect();
    Ok(estimate_sup(&BlockMaximal::spatial(dx, vec![block])?, protocol, rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignPatternReport {
    pub l: usize,
    pub q: f64,
    pub draws: usize,
    /// `‖f_L‖_q` with `f̂_L = 1_{[0, L)}`.
    pub f_norm: f64,
    /// `‖(Σ_l |P_{[l,l+1)} f_L|²)^{1/2}‖_q`.
    pub square_norm: f64,
    /// `max_ε ‖Σ_l ε_l P_{[l,l+1)} f_L‖_q` over the draws.
    pub max_norm: f64,
    pub min_norm: f64,
    pub max_signs: Vec<i8>,
    pub min_signs: Vec<i8>,
    /// `max_norm / f_norm`.
    pub direct_ratio: f64,
    /// `f_norm / min_norm`: the sign multiplier maps `g_ε` back to `f_L`, so this
    /// bounds its `M_q` norm from below.
    pub multiplier_ratio: f64,
}

/// Random sign search for `f̂_L = 1_{[0,L)}` split into unit bands.
pub fn sign_pattern_lower_bound(
    l: usize,
    q: f64,
    draws: usize,
    n: usize,
    dx: f64,
    rng: &mut impl Rng,
) -> Result<SignPatternReport> {
    if !(q > 2.0 && q.is_finite()) {
        return Err(domain(format!("need q in (2, ∞), got {q}")));
    }
    if l == 0 || l > 64 || draws == 0 {
        return Err(domain(format!("need 1 <= L <= 64 and draws >= 1, got L={l}, draws={draws}")));
    }
    let f0 = SampledSignal::new(0.0, dx, vec![Complex64::zero(); n])?;
    let spec = f0.transform();
    let bands: Vec<std::ops::Range<usize>> = (0..l)
        .map(|b| {
            let band = Band {
                k: 0,
                interval: GridInterval::dyadic(0, b as i64),
                members: Vec::new(),
            };
            check_band(&spec, &band)
        })
        .collect::<Result<_>>()?;
    let synth = |signs: &[i8]| {
        let mut s = spec.clone();
        for (r, &e) in bands.iter().zip(signs) {
            for idx in r.clone() {
                s.values[idx] = Complex64::new(e as f64, 0.0);
            }
        }
        s.inverse()
    };
    let f = synth(&vec![1; l]);
    let f_norm = f.lp_norm(q);
    let pieces: Vec<SampledSignal> = (0..l)
        .into_par_iter()
        .map(|b| {
            let mut e = vec![0i8; l];
            e[b] = 1;
            synth(&e)
        })
        .collect();
    let square: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(pieces.iter().map(|p| p.samples[j].norm_sqr()).sum::<f64>().sqrt(), 0.0))
        .collect();
    let square_norm = f.with_samples(square).lp_norm(q);
    let patterns: Vec<Vec<i8>> = (0..draws)
        .map(|_| (0..l).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect())
        .collect();
    let norms: Vec<f64> = patterns.par_iter().map(|e| synth(e).lp_norm(q)).collect();
    let imax = (0..draws).fold(0, |b, i| if norms[i] > norms[b] { i } else { b });
    let imin = (0..draws).fold(0, |b, i| if norms[i] < norms[b] { i } else { b });
    Ok(SignPatternReport {
        l,
        q,
        draws,
        f_norm,
        square_norm,
        max_norm: norms[imax],
        min_norm: norms[imin],
        max_signs: patterns[imax].clone(),
        min_signs: patterns[imin].clone(),
        direct_ratio: norms[imax] / f_norm,
        multiplier_ratio: f_norm / norms[imin],
    })
}

/// `x`-points and the `θ`-grid on which `φ_s(x, θ)` is tabulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelGrid {
    pub x: Vec<f64>,
    pub dx: f64,
    pub theta0: f64,
    pub dtheta: f64,
    /// A power of two.
    pub n_theta: usize,
}

impl ModelGrid {
    /// `nx` points `x_lo + (i + 1/2) dx` and a `θ`-grid of spacing `dθ` covering the
    /// `θ`-support of every tile's model function.
    pub fn covering(tiles: &[Tile], x_lo: f64, x_hi: f64, nx: usize, dtheta: f64) -> Result<Self> {
        if nx == 0 || !(x_hi > x_lo) || !(dtheta > 0.0) {
            return Err(domain("need nx >= 1, x_hi > x_lo and dθ > 0"));
        }
        let dx = (x_hi - x_lo) / nx as f64;
        let x = (0..nx).map(|i| x_lo + (i as f64 + 0.5) * dx).collect();
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        if let Some(t) = tiles.first() {
            lo = t.freq.to_f64().0;
            hi = lo;
        }
        for t in tiles {
            let (a, b) = t.freq.to_f64();
            let len = 2f64.powi(t.time.scale);
            lo = lo.min(a);
            hi = hi.max(b + 0.375 / len);
        }
        let theta0 = (lo / dtheta).floor() * dtheta;
        let needed = ((hi - theta0) / dtheta).ceil() as usize + 2;
        Ok(ModelGrid {
            x,
            dx,
            theta0,
            dtheta,
            n_theta: needed.next_power_of_two(),
        })
    }

    pub fn theta(&self, i: usize) -> f64 {
        self.theta0 + i as f64 * self.dtheta
    }
}

#[derive(Debug, Clone)]
struct ModelTable {
    grid: ModelGrid,
    /// `[x][scale level][θ]`: `Σ_{|I_s| = 2^{level}} ⟨f, φ_s⟩ φ_s(x, θ)`.
    per_scale: Vec<Vec<Vec<Complex64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelNorm {
    pub p: f64,
    /// `‖·‖_{L^p_x}` of the per-point values.
    pub value: f64,
    pub per_x: Vec<f64>,
    /// Points where a protocol probe beat the point-mass bound.
    pub probe_wins: usize,
}

/// `Σ_{s ∈ S, |I_s| < 2^k} ⟨f, φ_s⟩ φ_s(x, θ)` and its maximal, square and oscillation forms.
#[derive(Debug, Clone)]
pub struct ModelOperator {
    family: PacketFamily,
    tiles: Vec<Tile>,
    coeffs: Vec<Complex64>,
    scales: Vec<i32>,
    table: Option<ModelTable>,
}

impl ModelOperator {
    pub fn new(coeffs: &CoefficientTable, tiles: &[Tile]) -> Result<Self> {
        let values = coeffs.values_for(tiles)?;
        let mut scales: Vec<i32> = tiles.iter().map(|t| t.time.scale).collect();
        scales.sort();
        scales.dedup();
        Ok(ModelOperator {
            family: coeffs.family,
            tiles: tiles.to_vec(),
            coeffs: values,
            scales,
            table: None,
        })
    }

    /// Distinct tile scales `log2 |I_s|`, ascending.
    pub fn scales(&self) -> &[i32] {
        &self.scales
    }

    /// Truncation levels `k` at which the partial sums change: `min scale ..= max scale + 1`.
    pub fn levels(&self) -> Vec<i64> {
        match (self.scales.first(), self.scales.last()) {
            (Some(&a), Some(&b)) => (a as i64..=b as i64 + 1).collect(),
            _ => Vec::new(),
        }
    }

    pub fn grid(&self) -> Option<&ModelGrid> {
        self.table.as_ref().map(|t| &t.grid)
    }

    /// Tabulates the per-scale sums on `grid` (Riemann sum in `ξ` on the `θ`-grid,
    /// evaluated as an FFT convolution with `ψ₀(2^j ·)`).
    pub fn precompute(&mut self, grid: ModelGrid) -> Result<()> {
        let nt = grid.n_theta;
        if nt < 2 || !nt.is_power_of_two() {
            return Err(domain(format!("n_theta = {nt} is not a power of two")));
        }
        // c_s φ̂_s on the θ-grid, grouped by scale
        let mut spectra: Vec<Vec<Complex64>> = vec![vec![Complex64::zero(); nt]; self.scales.len()];
        for (tile, c) in self.tiles.iter().zip(&self.coeffs) {
            let level = self.scales.binary_search(&tile.time.scale).expect("scale listed");
            let (lo, hi) = tile.freq.to_f64();
            let a = (((lo - grid.theta0) / grid.dtheta).floor() as i64).max(0) as usize;
            let b = ((((hi - grid.theta0) / grid.dtheta).ceil() as i64).max(0) as usize).min(nt - 1);
            for i in a..=b {
                spectra[level][i] += c * packet_hat(self.family, tile, grid.theta(i))?;
            }
        }
        let pad = (2 * nt).next_power_of_two();
        let kernels: Vec<Vec<Complex64>> = self
            .scales
            .iter()
            .map(|&j| {
                let len = 2f64.powi(j);
                let mut k: Vec<Complex64> = (0..pad)
                    .map(|d| {
                        let t = d as f64 * grid.dtheta;
                        Complex64::new(psi0(len * t) * grid.dtheta, 0.0)
                    })
                    .collect();
                dft_forward(&mut k);
                k
            })
            .collect();
        let per_scale = grid
            .x
            .par_iter()
            .map(|&x| {
                let phase: Vec<Complex64> = (0..nt).map(|i| cis(2.0 * PI * grid.theta(i) * x)).collect();
                spectra
                    .iter()
                    .zip(&kernels)
                    .map(|(s, kh)| {
                        let mut buf = vec![Complex64::zero(); pad];
                        for i in 0..nt {
                            buf[i] = s[i] * phase[i];
                        }
                        dft_forward(&mut buf);
                        buf.iter_mut().zip(kh).for_each(|(a, b)| *a *= b);
                        dft_inverse(&mut buf);
                        buf.truncate(nt);
                        buf.iter_mut().for_each(|z| *z /= pad as f64);
                        buf
                    })
                    .collect()
            })
            .collect();
        self.table = Some(ModelTable { grid, per_scale });
        Ok(())
    }

    fn table(&self) -> Result<&ModelTable> {
        self.table.as_ref().ok_or(MultiplierError::State)
    }

    /// Tabulated `Σ_{|I_s| < 2^k} ⟨f, φ_s⟩ φ_s(x_i, θ_t)`.
    pub fn value(&self, xi: usize, ti: usize, k: i64) -> Result<Complex64> {
        let t = self.table()?;
        let row = t
            .per_scale
            .get(xi)
            .ok_or_else(|| domain(format!("x index {xi} out of range")))?;
        if ti >= t.grid.n_theta {
            return Err(domain(format!("θ index {ti} out of range")));
        }
        Ok(self
            .scales
            .iter()
            .zip(row)
            .filter(|(&j, _)| (j as i64) < k)
            .map(|(_, v)| v[ti])
            .sum())
    }

    /// Direct quadrature of the same sum at an arbitrary `(x, θ)`; no table needed.
    pub fn direct(&self, x: f64, theta: f64, k: i64) -> Result<Complex64> {
        let mut total = Complex64::zero();
        for (tile, c) in self.tiles.iter().zip(&self.coeffs) {
            if tile.time.scale as i64 >= k {
                continue;
            }
            let len = 2f64.powi(tile.time.scale);
            let (lo, hi) = tile.freq.to_f64();
            let a = lo.max(theta - 0.375 / len);
            let b = hi.min(theta - 0.125 / len);
            if a >= b {
                continue;
            }
            let integrand = |xi: f64| -> Complex64 {
                let h = packet_hat(self.family, tile, xi).expect("family checked at construction");
                h * cis(2.0 * PI * xi * x) * psi0(len * (theta - xi))
            };
            let re = crate::quad::integrate(a, b, 32, |xi| integrand(xi).re);
            let im = crate::quad::integrate(a, b, 32, |xi| integrand(xi).im);
            total += c * Complex64::new(re, im);
        }
        Ok(total)
    }

    /// `θ ↦ Σ_{|I_s| < 2^k}` from one row of the table.
    fn partial(&self, row: &[Vec<Complex64>], k: i64) -> Vec<Complex64> {
        let nt = row.first().map_or(0, |v| v.len());
        let mut acc = vec![Complex64::zero(); nt];
        for (&j, v) in self.scales.iter().zip(row) {
            if (j as i64) < k {
                acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            }
        }
        acc
    }

    fn lp(values: &[f64], p: f64, dx: f64) -> f64 {
        (values.iter().map(|v| v.powf(p)).sum::<f64>() * dx).powf(1.0 / p)
    }

    fn probe_norm(
        &self,
        p: f64,
        protocol: &ProbeProtocol,
        seed: u64,
        blocks_at: impl Fn(&[Vec<Complex64>]) -> Vec<Vec<Vec<Complex64>>> + Sync,
    ) -> Result<ModelNorm> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(domain(format!("need 1 <= p < ∞, got {p}")));
        }
        let t = self.table()?;
        if self.tiles.is_empty() {
            return Ok(ModelNorm {
                p,
                value: 0.0,
                per_x: vec![0.0; t.grid.x.len()],
                probe_wins: 0,
            });
        }
        let results: Vec<(f64, bool)> = t
            .per_scale
            .par_iter()
            .enumerate()
            .map(|(i, row)| {
                let op = BlockMaximal::spectral(t.grid.dtheta, blocks_at(row))?;
                let point = op.point_mass_bound();
                let mut rng = ChaCha20Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let est = estimate_sup(&op, protocol, &mut rng);
                Ok((est.value.max(point), est.value > point))
            })
            .collect::<Result<_>>()?;
        let per_x: Vec<f64> = results.iter().map(|r| r.0).collect();
        Ok(ModelNorm {
            p,
            value: Self::lp(&per_x, p, t.grid.dx),
            probe_wins: results.iter().filter(|r| r.1).count(),
            per_x,
        })
    }

    /// `‖ ‖(m_k(x, ·))_k‖_{M_2^*} ‖_{L^p_x}` as a probe lower bound per `x`.
    pub fn maximal_norm(&self, p: f64, protocol: &ProbeProtocol, seed: u64) -> Result<ModelNorm> {
        let levels = self.levels();
        self.probe_norm(p, protocol, seed, |row| {
            vec![levels.iter().skip(1).map(|&k| self.partial(row, k)).collect()]
        })
    }

    /// Oscillation form: block `j` carries `m_k - m_{u_j}` for `u_j <= k < u_{j+1}`.
    pub fn oscillation_norm(
        &self,
        u: &PartitionPoints,
        p: f64,
        protocol: &ProbeProtocol,
        seed: u64,
    ) -> Result<ModelNorm> {
        let pts = u.points();
        self.probe_norm(p, protocol, seed, |row| {
            pts.windows(2)
                .map(|w| {
                    let anchor = self.partial(row, w[0]);
                    (w[0]..w[1])
                        .map(|k| self.partial(row, k).iter().zip(&anchor).map(|(a, b)| a - b).collect())
                        .collect()
                })
                .collect()
        })
    }

    /// `‖ sup_θ (Σ_j |Σ_{|I_s| = 2^j} ⟨f, φ_s⟩ φ_s(x, θ)|²)^{1/2} ‖_{L^p_x}`; the `M_2`
    /// norm of a single multiplier is its sup, so this is exact on the grid.
    pub fn square_norm(&self, p: f64) -> Result<ModelNorm> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(domain(format!("need 1 <= p < ∞, got {p}")));
        }
        let t = self.table()?;
        let per_x: Vec<f64> = t
            .per_scale
            .iter()
            .map(|row| {
                (0..t.grid.n_theta)
                    .map(|c| row.iter().map(|v| v[c].norm_sqr()).sum::<f64>())
                    .fold(0.0, f64::max)
                    .sqrt()
            })
            .collect();
        Ok(ModelNorm {
            p,
            value: Self::lp(&per_x, p, t.grid.dx),
            per_x,
            probe_wins: 0,
        })
    }
}

/// Uniformly random phases for `Λ`, for `BandMultiplier::Phases`.
pub fn random_phases(l: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..l).map(|_| rng.gen_range(0.0..2.0 * PI)).collect()
}
