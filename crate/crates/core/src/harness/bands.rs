//! Band operators, sign patterns and the model operator.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::tiles::random_tiles;
use super::{parse, require, Cell, Ctx, Params, Result};
use crate::multiplier::{
    maximal_delta, oscillation_delta, random_phases, sign_pattern_lower_bound, BandFamily, BandMultiplier,
    FrequencyPointSet, ModelGrid, ModelOperator,
};
use crate::probe::ProbeProtocol;
use crate::seqnorms::PartitionPoints;
use crate::signal::{SampledSignal, Spectrum};
use crate::tf::{analyze, PacketFamily};

/// Complex white noise on the spectrum bins with `ξ ∈ [lo, hi)`, centred signal grid.
fn white_signal(dx: f64, n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> SampledSignal {
    let origin = -(n as f64) * dx / 2.0;
    let mut spec = Spectrum::from_fn(origin, dx, n, |_| Complex64::new(0.0, 0.0)).expect("valid grid");
    for idx in 0..n {
        let xi = spec.xi(idx);
        if (lo..hi).contains(&xi) {
            spec.values[idx] = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
    }
    spec.inverse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierKind {
    One,
    Phases,
}

fn family(l: usize, separated: bool, bits: u32, kind: MultiplierKind, rng: &mut impl Rng) -> std::result::Result<BandFamily, String> {
    let points = FrequencyPointSet::random(l, separated, bits, rng).map_err(|e| e.to_string())?;
    let m = match kind {
        MultiplierKind::One => BandMultiplier::One,
        MultiplierKind::Phases => BandMultiplier::Phases(random_phases(l, rng)),
    };
    BandFamily::new(points, m).map_err(|e| e.to_string())
}

fn distinct(v: &[usize]) -> usize {
    v.iter().collect::<std::collections::BTreeSet<_>>().len()
}

fn check_signal_grid(log2_n: u32, dx: f64, band_top: f64, k_hi: i64) -> std::result::Result<(), String> {
    require((10..=20).contains(&log2_n), || format!("log2_n must be in 10..=20, got {log2_n}"))?;
    require(dx > 0.0 && dx.log2().fract() == 0.0, || "dx must be a power of two".into())?;
    require(band_top < 0.5 / dx, || "frequency band exceeds the Nyquist frequency".into())?;
    let bins = 2f64.powi(-(k_hi as i32)) * (1u64 << log2_n) as f64 * dx;
    require(bins >= crate::multiplier::MIN_BAND_BINS as f64, || {
        format!("bands of length 2^-{k_hi} get {bins} bins; refine the grid or lower k_hi")
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BourgainLParams {
    #[serde(rename = "L_values")]
    pub l_values: Vec<usize>,
    pub seeds: usize,
    pub k_lo: i64,
    pub k_hi: i64,
    pub log2_n: u32,
    pub dx: f64,
    /// One point of `Λ` per unit cell.
    pub separated: bool,
    /// Points of `Λ` have denominator `2^bits`.
    pub bits: u32,
    pub multiplier: MultiplierKind,
}

impl Default for BourgainLParams {
    fn default() -> Self {
        BourgainLParams {
            l_values: vec![2, 4, 8, 16, 32],
            seeds: 10,
            k_lo: 0,
            k_hi: 7,
            log2_n: 17,
            dx: 1.0 / 128.0,
            separated: true,
            bits: 10,
            multiplier: MultiplierKind::One,
        }
    }
}

impl Params for BourgainLParams {
    fn check(&self) -> std::result::Result<(), String> {
        require(distinct(&self.l_values) >= 2 && self.l_values.len() * self.seeds >= 3, || {
            "the L fit needs two distinct L values and at least three (L, seed) cells".into()
        })?;
        require(self.l_values.iter().all(|&l| (1..=64).contains(&l)), || "L values must be in 1..=64".into())?;
        require(self.seeds >= 1, || "seeds must be >= 1".into())?;
        require(self.bits <= 40, || "bits must be <= 40".into())?;
        require(self.k_lo <= self.k_hi, || "need k_lo <= k_hi".into())?;
        let top = *self.l_values.iter().max().unwrap_or(&1) as f64;
        check_signal_grid(self.log2_n, self.dx, top, self.k_hi)
    }
}

pub fn bourgain_l(v: &Value, ctx: &mut Ctx) -> Result<()> {
    let p: BourgainLParams = parse(v, ctx)?;
    let jobs: Vec<(usize, usize, u64)> = p
        .l_values
        .iter()
        .flat_map(|&l| (0..p.seeds).map(move |s| (l, s)))
        .map(|(l, s)| (l, s, ctx.seed(&format!("L={l},seed={s}"))))
        .collect();
    let n = 1usize << p.log2_n;
    let ratios = jobs
        .par_iter()
        .map(|&(l, _, seed)| {
            let mut rng = <rand_chacha::ChaCha20Rng as rand::SeedableRng>::seed_from_u64(seed);
            let fam = family(l, p.separated, p.bits, p.multiplier, &mut rng)?;
            let f = white_signal(p.dx, n, 0.0, l as f64, &mut rng);
            let m = maximal_delta(&fam, &f, p.k_lo..=p.k_hi).map_err(|e| e.to_string())?;
            Ok(m.l2_norm() / f.l2_norm())
        })
        .collect::<std::result::Result<Vec<f64>, String>>()
        .map_err(|e| ctx.fail(e))?;
    for (&(l, s, seed), r) in jobs.iter().zip(&ratios) {
        ctx.cell(Cell::new("maximal-ratio", format!("L={l},seed={s}"), *r).at(l as f64).seeded(seed));
    }
    let fit = ctx.fit("maximal-ratio", "L")?;
    let bound = 0.5 + 2.0 * fit.stderr;
    ctx.check(
        "L-exponent",
        fit.exponent <= bound,
        fit.exponent,
        Some(bound),
        format!("‖sup_k|Δ_k f|‖₂/‖f‖₂ ~ L^e, stderr {}", fit.stderr),
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BourgainJParams {
    #[serde(rename = "J_values")]
    pub j_values: Vec<usize>,
    #[serde(rename = "L")]
    pub l: usize,
    pub seeds: usize,
    pub k_lo: i64,
    pub k_hi: i64,
    /// Random partitions tried per `J` besides the evenly spaced one.
    pub random_partitions: usize,
    pub log2_n: u32,
    pub dx: f64,
    /// One point of `Λ` per unit cell.
    pub separated: bool,
    /// Points of `Λ` have denominator `2^bits`.
    pub bits: u32,
    pub multiplier: MultiplierKind,
}

impl Default for BourgainJParams {
    fn default() -> Self {
        BourgainJParams {
            j_values: vec![2, 4, 8, 16],
            l: 8,
            seeds: 3,
            k_lo: -10,
            k_hi: 9,
            random_partitions: 8,
            log2_n: 17,
            dx: 1.0 / 32.0,
            separated: true,
            bits: 10,
            multiplier: MultiplierKind::One,
        }
    }
}

impl Params for BourgainJParams {
    fn check(&self) -> std::result::Result<(), String> {
        let span = (self.k_hi - self.k_lo + 1).max(0) as usize;
        require(distinct(&self.j_values) >= 2 && self.j_values.len() * self.seeds >= 3, || {
            "the J fit needs two distinct J values and at least three (J, seed) cells".into()
        })?;
        require(self.j_values.iter().all(|&j| j >= 2 && j <= span + 1), || {
            format!("J values must be in 2..={} for the k range", span + 1)
        })?;
        require((1..=64).contains(&self.l), || "L must be in 1..=64".into())?;
        require(self.seeds >= 1, || "seeds must be >= 1".into())?;
        require(self.bits <= 40, || "bits must be <= 40".into())?;
        require(self.k_lo < self.k_hi, || "need k_lo < k_hi".into())?;
        check_signal_grid(self.log2_n, self.dx, self.l as f64, self.k_hi)
    }
}

/// `J` points from `k_lo` to `k_hi + 1`: evenly spaced first, then random interiors.
fn partitions(j: usize, k_lo: i64, k_hi: i64, random: usize, rng: &mut impl Rng) -> Vec<Vec<i64>> {
    let span = k_hi + 1 - k_lo;
    let even: Vec<i64> = (0..j)
        .map(|t| k_lo + ((t as i64 * span) as f64 / (j - 1) as f64).round() as i64)
        .collect();
    let mut out = vec![even];
    let interior: Vec<i64> = (k_lo + 1..=k_hi).collect();
    for _ in 0..random {
        let mut pool = interior.clone();
        for i in 0..j - 2 {
            let k = rng.gen_range(i..pool.len());
            pool.swap(i, k);
        }
        let mut u: Vec<i64> = pool[..j - 2].to_vec();
        u.extend([k_lo, k_hi + 1]);
        u.sort_unstable();
        out.push(u);
    }
    out
}

pub fn bourgain_j(v: &Value, ctx: &mut Ctx) -> Result<()> {
    let p: BourgainJParams = parse(v, ctx)?;
    let n = 1usize << p.log2_n;
    for s in 0..p.seeds {
        let seed = ctx.seed(&format!("seed={s}"));
        let mut rng = <rand_chacha::ChaCha20Rng as rand::SeedableRng>::seed_from_u64(seed);
        let fam = family(p.l, p.separated, p.bits, p.multiplier, &mut rng).map_err(|e| ctx.fail(e))?;
        let f = white_signal(p.dx, n, 0.0, p.l as f64, &mut rng);
        let norm = f.l2_norm();
        for &j in &p.j_values {
            let cands = partitions(j, p.k_lo, p.k_hi, p.random_partitions, &mut rng);
            let vals = cands
                .par_iter()
                .map(|u| {
                    let u = PartitionPoints::new(u.clone()).map_err(|e| e.to_string())?;
                    oscillation_delta(&fam, &f, &u).map_err(|e| e.to_string())
                })
                .collect::<std::result::Result<Vec<f64>, String>>()
                .map_err(|e| ctx.fail(e))?;
            let best = vals.iter().copied().fold(0.0, f64::max) / norm;
            ctx.cell(Cell::new("oscillation-ratio", format!("J={j},seed={s}"), best).at(j as f64).seeded(seed));
        }
    }
    let fit = ctx.fit("oscillation-ratio", "J")?;
    let bound = 0.5 + 2.0 * fit.stderr;
    ctx.check(
        "J-exponent",
        fit.exponent < bound,
        fit.exponent,
        Some(bound),
        format!("best oscillation over {} partitions per J, stderr {}", p.random_partitions + 1, fit.stderr),
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignParams {
    #[serde(rename = "L_values")]
    pub l_values: Vec<usize>,
    pub q: f64,
    pub draws: usize,
    pub log2_n: u32,
    pub dx: f64,
    /// Allowed distance of the `‖f_L‖_q` exponent from `1 - 1/q`.
    pub norm_tolerance: f64,
    /// Allowed shortfall of the ratio exponent below `|1/2 - 1/q|`.
    pub ratio_slack: f64,
}

impl Default for SignParams {
    fn default() -> Self {
        SignParams {
            l_values: vec![4, 8, 16, 32],
            q: 4.0,
            draws: 256,
            log2_n: 15,
            dx: 1.0 / 128.0,
            norm_tolerance: 0.05,
            ratio_slack: 0.1,
        }
    }
}

impl Params for SignParams {
    fn check(&self) -> std::result::Result<(), String> {
        require(distinct(&self.l_values) >= 3, || "need at least three distinct L values".into())?;
        require(self.l_values.iter().all(|&l| (1..=64).contains(&l)), || "L values must be in 1..=64".into())?;
        require(self.q > 2.0 && self.q.is_finite(), || format!("q must lie in (2, ∞), got {}", self.q))?;
        require(self.draws >= 1, || "draws must be >= 1".into())?;
        require(self.norm_tolerance > 0.0 && self.ratio_slack >= 0.0, || "tolerances must be positive".into())?;
        let top = *self.l_values.iter().max().unwrap_or(&1) as f64;
        check_signal_grid(self.log2_n, self.dx, top, 0)
    }
}

pub fn sign_lower_bound(v: &Value, ctx: &mut Ctx) -> Result<()> {
    let p: SignParams = parse(v, ctx)?;
    let n = 1usize << p.log2_n;
    let mut rows = Vec::new();
    for &l in &p.l_values {
        let mut rng = ctx.rng(&format!("L={l}"));
        let r = sign_pattern_lower_bound(l, p.q, p.draws, n, p.dx, &mut rng).map_err(|e| ctx.fail(e))?;
        ctx.cell(Cell::new("f-norm", format!("L={l}"), r.f_norm).at(l as f64));
        ctx.cell(Cell::new("multiplier-ratio", format!("L={l}"), r.multiplier_ratio).at(l as f64));
        ctx.cell(Cell::new("direct-ratio", format!("L={l}"), r.direct_ratio).at(l as f64));
        ctx.cell(Cell::new("square-ratio", format!("L={l}"), r.square_norm / r.f_norm).at(l as f64));
        let signs: String = r.min_signs.iter().map(|&e| if e > 0 { '+' } else { '-' }).collect();
        rows.push(vec![l.to_string(), r.min_norm.to_string(), r.max_norm.to_string(), signs]);
    }
    ctx.plot("sign_patterns", &["L", "min_norm", "max_norm", "min_signs"], rows);
    let target = 1.0 - 1.0 / p.q;
    let fit = ctx.fit("f-norm", "L")?;
    ctx.check(
        "f-norm-exponent",
        (fit.exponent - target).abs() <= p.norm_tolerance,
        fit.exponent,
        Some(target),
        format!("‖f_L‖_q ~ L^e, expected e = 1 - 1/q within {}", p.norm_tolerance),
    );
    let floor = (0.5 - 1.0 / p.q).abs() - p.ratio_slack;
    let fit = ctx.fit("multiplier-ratio", "L")?;
    ctx.check(
        "ratio-exponent",
        fit.exponent >= floor,
        fit.exponent,
        Some(floor),
        "‖f_L‖_q / min_ε ‖Σ ε_l P_l f_L‖_q ~ L^e",
    );
    let fit = ctx.fit("direct-ratio", "L")?;
    ctx.inform("direct-ratio-exponent", fit.exponent, "max_ε ‖Σ ε_l P_l f_L‖_q / ‖f_L‖_q ~ L^e");
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub tiles: usize,
    /// Grid doublings after the base resolution.
    pub doublings: u32,
    pub p: f64,
    /// Base signal spacing; the signal spans `span` starting at `origin`.
    pub dx: f64,
    pub origin: f64,
    pub span: f64,
    /// `f̂` is white noise on `[0, band)`.
    pub band: f64,
    /// Base number of x-points over the tile window `[0, 16)`.
    pub nx: usize,
    pub dtheta: f64,
    /// Allowed max/min ratio of the normalized norms across resolutions.
    pub factor: f64,
    pub protocol: ProbeProtocol,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            tiles: 200,
            doublings: 3,
            p: 2.0,
            dx: 1.0 / 16.0,
            origin: -48.0,
            span: 128.0,
            band: 4.5,
            nx: 32,
            dtheta: 1.0 / 128.0,
            factor: 2.0,
            protocol: ProbeProtocol {
                gaussian: 16,
                frequencies: 16,
                ascent_steps: 10,
                ..ProbeProtocol::default()
            },
        }
    }
}

impl Params for ModelParams {
    fn check(&self) -> std::result::Result<(), String> {
        require((1..=4096).contains(&self.tiles), || "tiles must be in 1..=4096".into())?;
        require(self.doublings <= 5, || "doublings must be <= 5".into())?;
        require(self.p >= 1.0 && self.p.is_finite(), || "p must be >= 1".into())?;
        require(self.dx > 0.0 && self.dx.log2().fract() == 0.0, || "dx must be a power of two".into())?;
        let n = self.span / self.dx;
        require(n.fract() == 0.0 && (n as u64).is_power_of_two(), || "span/dx must be a power of two".into())?;
        require(self.origin <= 0.0 && self.origin + self.span >= 16.0, || "signal must cover [0, 16)".into())?;
        require(self.band > 0.0 && self.band < 0.5 / self.dx, || "band must lie below the Nyquist frequency".into())?;
        require(self.nx >= 1 && self.dtheta > 0.0, || "need nx >= 1 and dtheta > 0".into())?;
        require(self.factor >= 1.0, || "factor must be >= 1".into())?;
        require(
            self.protocol.gaussian + self.protocol.frequencies + self.protocol.constant as usize >= 1,
            || "probe protocol has no probes".into(),
        )
    }
}

pub fn model_op(v: &Value, ctx: &mut Ctx) -> Result<()> {
    let p: ModelParams = parse(v, ctx)?;
    let mut rng = ctx.rng("tiles");
    let tiles = random_tiles(&mut rng, p.tiles, 16, 3, 4);
    // f̂ is fixed on the bins of spacing 1/span, which every resolution shares
    let dxi = 1.0 / p.span;
    let bins = (p.band / dxi).ceil() as usize;
    let mut srng = ctx.rng("signal");
    let values: Vec<Complex64> = (0..bins)
        .map(|_| Complex64::new(srng.sample(StandardNormal), srng.sample(StandardNormal)))
        .collect();
    let probe_seed = ctx.seed("probes");
    let mut ratios = Vec::new();
    for r in 0..=p.doublings {
        let scale = 2f64.powi(r as i32);
        let dx = p.dx / scale;
        let n = (p.span / dx).round() as usize;
        let mut spec = Spectrum::from_fn(p.origin, dx, n, |_| Complex64::new(0.0, 0.0)).map_err(|e| ctx.fail(e))?;
        for (b, v) in values.iter().enumerate() {
            spec.values[n / 2 + b] = *v;
        }
        let f = spec.inverse();
        let table = analyze(&f, &tiles, PacketFamily::Bump).map_err(|e| ctx.fail(e))?;
        let mut op = ModelOperator::new(&table, &tiles).map_err(|e| ctx.fail(e))?;
        let grid = ModelGrid::covering(&tiles, 0.0, 16.0, p.nx << r, p.dtheta / scale).map_err(|e| ctx.fail(e))?;
        op.precompute(grid).map_err(|e| ctx.fail(e))?;
        let m = op.maximal_norm(p.p, &p.protocol, probe_seed).map_err(|e| ctx.fail(e))?;
        let sq = op.square_norm(p.p).map_err(|e| ctx.fail(e))?;
        let norm = f.l2_norm();
        ratios.push(m.value / norm);
        ctx.cell(Cell::new("maximal-ratio", format!("doubling={r}"), m.value / norm).at(scale));
        ctx.cell(Cell::new("square-ratio", format!("doubling={r}"), sq.value / norm).at(scale));
        ctx.cell(Cell::new("probe-wins", format!("doubling={r}"), m.probe_wins as f64).at(scale));
    }
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    ctx.check(
        "resolution-stability",
        hi < p.factor * lo,
        hi / lo,
        Some(p.factor),
        format!("maximal model norm over ‖f‖₂ in [{lo}, {hi}] across {} doublings", p.doublings),
    );
    ctx.inform("maximal-ratio", hi, "probe lower bound of the M_2^* model norm over ‖f‖₂");
    Ok(())
}
