//! Ergodic averages, Hilbert series and transfer constants on concrete systems.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{parse, require, Cell, Ctx, Params, Result};
use crate::dynamics::{self,
    cauchy_differences, cotlar_series, hilbert_series, inversions, ks_uniform, lacunary_rms, max_return_estimate,
    max_return_norm, return_avg, return_avg_path, transfer_best_constant, DiscreteSystem,
    OrbitWeights, State, GOLDEN,
};
use crate::probe::ProbeProtocol;
use crate::signal::cis;

/// A rotation number given as a value in `[0, 1)` or by name (`golden`, `sqrt2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Value(f64),
    Named(String),
}

impl Alpha {
    pub fn resolve(&self) -> std::result::Result<f64, String> {
        let a = match self {
            Alpha::Value(a) => *a,
            Alpha::Named(n) => match n.as_str() {
                "golden" => GOLDEN,
                "sqrt2" => std::f64::consts::SQRT_2 - 1.0,
                other => return Err(format!("unknown rotation `{other}` (expected golden, sqrt2 or a number)")),
            },
        };
        require((0.0..1.0).contains(&a), || format!("rotation number must lie in [0, 1), got {a}"))?;
        Ok(a)
    }
}

fn golden() -> Alpha {
    Alpha::Named("golden".into())
}

fn rotation(a: &Alpha, ctx: &Ctx) -> Result<DiscreteSystem> {
    let alpha = a.resolve().map_err(|e| ctx.fail(e))?;
    DiscreteSystem::rotation(alpha).map_err(|e| ctx.fail(e))
}

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn half_indicator(s: State) -> Complex64 {
    real(if s.x() < 0.5 { 1.0 } else { 0.0 })
}

fn character(s: State) -> Complex64 {
    cis(2.0 * PI * s.x())
}

/// `1, 2, 5, 10, 20, 50, ...` up to and including `n`.
fn decades(n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 1u64;
    while d <= n {
        for m in [1, 2, 5] {
            if d * m <= n {
                out.push(d * m);
            }
        }
        d *= 10;
    }
    if out.last() != Some(&n) {
        out.push(n);
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BirkhoffParams {
    pub alpha: Alpha,
    #[serde(rename = "N")]
    pub n: i64,
    pub x0: f64,
    /// `g = 1_[a, b)` on `[0, 1)`.
    pub interval: [f64; 2],
    pub tolerance: f64,
    /// Orbit length for the equidistribution checks.
    pub ks_n: i64,
    pub ks_tolerance: f64,
}

impl Default for BirkhoffParams {
    fn default() -> Self {
        BirkhoffParams {
            alpha: golden(),
            n: 100_000,
            x0: 0.0,
            interval: [0.0, 0.5],
            tolerance: 0.01,
            ks_n: 100_000,
            ks_tolerance: 0.02,
        }
    }
}

impl Params for BirkhoffParams {
    fn check(&self) -> std::result::Result<(), String> {
        self.alpha.resolve()?;
        require((1..=10_000_000).contains(&self.n), || format!("N must be in 1..=1e7, got {}", self.n))?;
        require((1..=10_000_000).contains(&self.ks_n), || format!("ks_n must be in 1..=1e7, got {}", self.ks_n))?;
        require((0.0..1.0).contains(&self.x0), || "x0 must lie in [0, 1)".into())?;
        let [a, b] = self.interval;
        require(0.0 <= a && a < b && b <= 1.0, || "interval must satisfy 0 <= a < b <= 1".into())?;
        require(self.tolerance > 0.0 && self.ks_tolerance > 0.0, || "tolerances must be > 0".into())
    }
}

pub fn birkhoff(v: &Value, ctx: &mut Ctx) -> Result<()> {
    let p: BirkhoffParams = parse(v, ctx)?;
    let alpha = p.alpha.resolve().map_err(|e| ctx.fail(e))?;
    let sys = rotation(&p.alpha, ctx)?;
    let n = p.n as usize;
    let [a, b] = p.interval;
    let g = move |s: State| real(if (a..b).contains(&s.x()) { 1.0 } else { 0.0 });
    let ones = OrbitWeights::from_values(0, vec![real(1.0); n]);
    let y = State::Point(p.x0);
    let path = return_avg_path(&ones, &sys, &g, y, n).map_err(|e| ctx.fail(e))?;
    let target = b - a;
    for m in decades(p.n as u64) {
        let avg = path[m as usize - 1].re;
        ctx.cell(Cell::new("average", format!("N={m}"), avg).at(m as f64).against(target));
    }
    let avg = return_avg(&ones, &sys, &g, y, n).map_err(|e| ctx.fail(e))?.re;
    ctx.check(
        "birkhoff-average",
        (avg - target).abs() <= p.tolerance,
        (avg - target).abs(),
        Some(p.tolerance),
        format!("average {avg} at N = {n}, integral {target}"),
    );
    // independent oracle: direct summation of x0 + nα mod 1
    let hits = (0..n)
        .filter(|&k| (a..b).contains(&(p.x0 + k as f64 * alpha).rem_euclid(1.0)))
        .count();
    let direct = hits as f64 / n as f64;
    ctx.check(
        "direct-summation-agrees",
        (direct - avg).abs() <= 1e-9,
        (direct - avg).abs(),
        Some(1e-9),
        "return_avg with f = 1 against a direct count",
    );

    let m = p.ks_n;
    let rot: Vec<f64> = sys
        .orbit(y, 0, m)
        .map_err(|e| ctx.fail(e))?
        .iter()
        .map(|s| s.x())
        .collect();
    let dbl = DiscreteSystem::doubling(ctx.seed("doubling"));
    let dbl_pts: Vec<f64> = dbl
        .orbit(State::Point(0.5 * (5f64.sqrt() - 1.0)), 0, m)
        .map_err(|e| ctx.fail(e))?
        .iter()
        .map(|s| s.x())
        .collect();
    for (name, xs) in [("ks-rotation", &rot), ("ks-doubling", &dbl_pts)] {
        let d = ks_uniform(xs);
        ctx.cell(Cell::new("ks", name, d).at(m as f64).against(p.ks_tolerance));
        ctx.check(name, d <= p.ks_tolerance, d, Some(p.ks_tolerance), format!("orbit length {m}"));
    }
    let step = (n / 512).max(1);
    let rows = (0..n)
        .step_by(step)
        .map(|k| vec![(k + 1).to_string(), path[k].re.to_string()])
        .collect();
    ctx.plot("running_average", &["N", "average"], rows);
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WwParams {
    pub alpha: Alpha,
    #[serde(rename = "N")]
    pub n: i64,
    pub x0: f64,
    /// Random frequencies tested against the geometric-sum bound.
    pub thetas: usize,
    /// Largest `m` of the Hilbert-series reduction `N = 2^m`.
    pub hilbert_m: u32,
}

impl Default for WwParams {
    fn default() -> Self {
        WwParams {
            alpha: golden(),
            n: 100_000,
            x0: 0.3,
            thetas: 32,
            hilbert_m: 14,
        }
    }
}

impl Params for WwParams {
    fn check(&self) -> std::result::Result<(), String> {
        self.alpha.resolve()?;
        require((1..=10_000_000).contains(&self.n), || format!("N must be in 1..=1e7, got {}", self.n))?;
        require((0.0..1.0).contains(&self.x0), || "x0 must lie in [0, 1)".into())?;
        require(self.thetas >= 1, || "thetas must be >= 1".into())?;
        require((5..=20).contains(&self.hilbert_m), || "hilbert_m must be in 5..=20".into())
    }
}

pub fn wiener_wintner(v: &Value, ctx: &mut Ctx) -> Result<()> {
    let p: WwParams = parse(v, ctx)?;
    let alpha = p.alpha.resolve().map_err(|e| ctx.fail(e))?;
    let sys = rotation(&p.alpha, ctx)?;
    let n = p.n as usize;
    let fw = OrbitWeights::new(&sys, State::Point(p.x0), &character, 0, p.n).map_err(|e| ctx.fail(e))?;
    let res = dynamics::wiener_wintner(&fw, -alpha, n).map_err(|e| ctx.fail(e))?;
    let want = cis(2.0 * PI * p.x0);
    let err = (res - want).norm();
    ctx.cell(Cell::new("resonance", "theta=-alpha", res.norm()).against(1.0));
    ctx.check("resonance", err <= 1e-9, err, Some(1e-9), "average equals e^{2πi x0} at θ = -α");

    let mut rng = ctx.rng("thetas");
    let mut worst: f64 = 0.0;
    for t in 0..p.thetas {
        let theta: f64 = rng.gen_range(0.0..1.0);
        let avg = dynamics::wiener_wintner(&fw, theta, n).map_err(|e| ctx.fail(e))?.norm();
        let beta = (theta + alpha).rem_euclid(1.0);
        let dist = beta.min(1.0 - beta);
        let bound = 1.0 / (2.0 * n as f64 * dist);
        worst = worst.max(avg / bound);
        ctx.cell(Cell::new("off-spectrum", format!("theta#{t}"), avg).at(theta).against(bound));
    }
    ctx.check(
        "geometric-sum-bound",
        worst <= 1.0 + 1e-9,
        worst,
        Some(1.0),
        "|average| <= 1/(2N‖θ+α‖) at random θ",
    );

    // Σ' f(τ^n x) e^{2πinθ}/n through the return-times series with g(y) = e^{2πiy}
    let theta = rng.gen_range(0.0..1.0);
    let sigma = DiscreteSystem::rotation(theta).map_err(|e| ctx.fail(e))?;
    let top = 1i64 << p.hilbert_m;
    let f = |s: State| half_indicator(s) - real(0.5);
    let wide = OrbitWeights::new(&sys, State::Point(p.x0), &f, -top, top + 1).map_err(|e| ctx.fail(e))?;
    let vals = (4..=p.hilbert_m)
        .map(|m| hilbert_series(&wide, &sigma, &character, State::Point(0.0), 1 << m))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ctx.fail(e))?;
    for (m, v) in (4..).zip(&vals) {
        ctx.cell(Cell::new("hilbert", format!("m={m}"), v.norm()).at((1u64 << m) as f64));
    }
    let diffs = cauchy_differences(&vals);
    ctx.inform(
        "hilbert-last-difference",
        *diffs.last().unwrap_or(&0.0),
        format!("θ = {theta}; lacunary differences {diffs:?}"),
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CotlarParams {
    pub alpha: Alpha,
    /// Base points `x_i = (i + 1/2)/points` of the root-mean-square.
    pub points: usize,
    pub m_lo: u32,
    pub m_hi: u32,
    pub max_inversions: usize,
    /// Bound for `|S_N|` on the doubling map, `N = 2^4..2^16`.
    pub doubling_bound: f64,
}

impl Default for CotlarParams {
    fn default() -> Self {
        CotlarParams {
            alpha: golden(),
            points: 64,
            m_lo: 8,
            m_hi: 16,
            max_inversions: 1,
            doubling_bound: 5.0,
        }
    }
}

fn check_lacunary(points: usize, m_lo: u32, m_hi: u32) -> std::result::Result<(), String> {
    require(points >= 1, || "points must be >= 1".into())?;
    require(m_lo + 2 <= m_hi && m_hi <= 22, || "need m_lo + 2 <= m_hi <= 22".into())
}

impl Params for CotlarParams {
    fn check(&self) -> std::result::Result<(), String> {
        self.alpha.resolve()?;
        check_lacunary(self.points, self.m_lo, self.m_hi)?;
        require(self.doubling_bound > 0.0, || "doubling_bound must be > 0".into())
    }
}

fn lacunary_cells(ctx: &mut Ctx, group: &str, m_lo: u32, d: &[f64]) {
    for (m, v) in (m_lo..).zip(d) {
        ctx.cell(Cell::new(group, format!("m={m}"), *v).at((1u64 << m) as f64));
    }
}

pub fn cotlar(v: &Value, ctx: &mut Ctx) -> Result<()> {
    let p: CotlarParams = parse(v, ctx)?;
    let sys = rotation(&p.alpha, ctx)?;
    let d = lacunary_rms(&sys, &half_indicator, None, p.points, p.m_lo..=p.m_hi).map_err(|e| ctx.fail(e))?;
    lacunary_cells(ctx, "lacunary-rms", p.m_lo, &d);
    let inv = inversions(&d);
    ctx.check(
        "lacunary-decrease",
        inv <= p.max_inversions,
        inv as f64,
        Some(p.max_inversions as f64),
        format!("inversions among {} lacunary differences", d.len()),
    );

    let dbl = DiscreteSystem::doubling(ctx.seed("doubling"));
    let top = 1i64 << 16;
    let f = |s: State| real(if s.x() >= 0.5 { 0.5 } else { -0.5 });
    let fw = OrbitWeights::new(&dbl, State::Point(0.37), &f, -top, top + 1).map_err(|e| ctx.fail(e))?;
    let mut largest: f64 = 0.0;
    for m in 4..=16 {
        let s = cotlar_series(&fw, 1 << m).map_err(|e| ctx.fail(e))?.norm();
        largest = largest.max(s);
        ctx.cell(Cell::new("doubling", format!("m={m}"), s).at((1u64 << m) as f64));
    }
    ctx.check(
        "doubling-bounded",
        largest <= p.doubling_bound,
        largest,
        Some(p.doubling_bound),
        "sup over N = 2^4..2^16 of the doubling-map series",
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReturnParams {
    /// Rotation `τ` carrying the weights `f(τ^n x)`.
    pub alpha: Alpha,
    /// Rotation `σ` of the second system.
    pub beta: Alpha,
    pub points: usize,
    pub m_lo: u32,
    pub m_hi: u32,
    pub max_inversions: usize,
    /// Cyclic shift `Z_K` for the maximal return-times norm.
    #[serde(rename = "K")]
    pub k: i64,
    pub n_max_values: Vec<usize>,
    pub probes: usize,
    pub protocol: ProbeProtocol,
}

impl Default for ReturnParams {
    fn default() -> Self {
        ReturnParams {
            alpha: golden(),
            beta: Alpha::Named("sqrt2".into()),
            points: 64,
            m_lo: 8,
            m_hi: 16,
            max_inversions: 1,
            k: 256,
            n_max_values: vec![8, 16, 32, 64, 128, 256],
            probes: 64,
            protocol: ProbeProtocol {
                gaussian: 128,
                frequencies: 32,
                ascent_steps: 20,
                ..ProbeProtocol::default()
            },
        }
    }
}

fn check_protocol(p: &ProbeProtocol) -> std::result::Result<(), String> {
    require(p.gaussian + p.frequencies + p.constant as usize >= 1, || "probe protocol has no probes".into())?;
    require(p.surrogate_p >= 2.0 && p.surrogate_p.is_finite(), || "surrogate_p must be >= 2".into())
}

impl Params for ReturnParams {
    fn check(&self) -> std::result::Result<(), String> {
        self.alpha.resolve()?;
        self.beta.resolve()?;
        check_lacunary(self.points, self.m_lo, self.m_hi)?;
        require((1..=1 << 16).contains(&self.k), || format!("K must be in 1..=65536, got {}", self.k))?;
        require(!self.n_max_values.is_empty(), || "n_max_values must be nonempty".into())?;
        require(self.n_max_values.iter().all(|&n| (1..=1 << 14).contains(&n)), || "n_max values must be in 1..=16384".into())?;
        require(self.probes >= 1, || "probes must be >= 1".into())?;
        check_protocol(&self.protocol)
    }
}

pub fn return_times(v: &Value, ctx: &mut Ctx) -> Result<()> {
    let p: ReturnParams = parse(v, ctx)?;
    let tau = rotation(&p.alpha, ctx)?;
    let sigma = rotation(&p.beta, ctx)?;
    let d = lacunary_rms(&tau, &half_indicator, Some((&sigma, &character)), p.points, p.m_lo..=p.m_hi)
        .map_err(|e| ctx.fail(e))?;
    lacunary_cells(ctx, "lacunary-rms", p.m_lo, &d);
    let inv = inversions(&d);
    ctx.check(
        "lacunary-decrease",
        inv <= p.max_inversions,
        inv as f64,
        Some(p.max_inversions as f64),
        format!("inversions among {} lacunary differences", d.len()),
    );

    let k = p.k as u64;
    let cyc = DiscreteSystem::cyclic(k).map_err(|e| ctx.fail(e))?;
    let mut rng = ctx.rng("weights");
    let top = *p.n_max_values.iter().max().expect("nonempty");
    let fw = OrbitWeights::from_values(0, (0..top).map(|_| real(rng.sample(StandardNormal))).collect());
    let probes: Vec<Vec<Complex64>> = (0..p.probes)
        .map(|_| {
            (0..k)
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect()
        })
        .collect();
    let mut sorted = p.n_max_values.clone();
    sorted.sort_unstable();
    sorted.dedup();
    let fixed = sorted
        .par_iter()
        .map(|&n| max_return_norm(&fw, &cyc, &probes, n))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ctx.fail(e))?;
    let seeds: Vec<u64> = sorted.iter().map(|n| ctx.seed(&format!("estimate-{n}"))).collect();
    let estimates = sorted
        .par_iter()
        .zip(&seeds)
        .map(|(&n, &s)| {
            let mut r = <rand_chacha::ChaCha20Rng as rand::SeedableRng>::seed_from_u64(s);
            max_return_estimate(&fw, &cyc, k as usize, n, &p.protocol, &mut r)
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ctx.fail(e))?;
    for ((n, v), e) in sorted.iter().zip(&fixed).zip(&estimates) {
        ctx.cell(Cell::new("fixed-probes", format!("N_max={n}"), *v).at(*n as f64));
        ctx.cell(Cell::new("protocol", format!("N_max={n}"), e.value).at(*n as f64));
    }
    let monotone = fixed.windows(2).all(|w| w[1] >= w[0]);
    ctx.check(
        "monotone-in-n-max",
        monotone,
        inversions(&fixed.iter().map(|v| -v).collect::<Vec<_>>()) as f64,
        Some(0.0),
        "fixed probe set: the maximal norm cannot decrease as N_max grows",
    );
    let last = estimates.last().expect("nonempty");
    ctx.inform(
        "max-return-norm",
        last.value,
        format!("probe lower bound at N_max = {top} ({} probes, best from {})", last.probes, last.source),
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferParams {
    /// `φ = 1` on `[0, support)`.
    pub support: i64,
    /// Translates `a` range over `[-a_radius, support)`.
    pub a_radius: i64,
    /// `ψ` supported on `[0, width)`.
    pub width: usize,
    pub p_values: Vec<f64>,
    pub protocol: ProbeProtocol,
}

impl Default for TransferParams {
    fn default() -> Self {
        TransferParams {
            support: 64,
            a_radius: 64,
            width: 16,
            p_values: vec![1.5, 2.0, 3.0],
            protocol: ProbeProtocol {
                gaussian: 32,
                frequencies: 8,
                ascent_steps: 10,
                ..ProbeProtocol::default()
            },
        }
    }
}

impl Params for TransferParams {
    fn check(&self) -> std::result::Result<(), String> {
        require((1..=1024).contains(&self.support), || format!("support must be in 1..=1024, got {}", self.support))?;
        require((0..=4096).contains(&self.a_radius), || "a_radius must be in 0..=4096".into())?;
        require((1..=1024).contains(&self.width), || "width must be in 1..=1024".into())?;
        require(!self.p_values.is_empty() && self.p_values.iter().all(|p| *p >= 1.0 && p.is_finite()), || {
            "p_values must be finite and >= 1".into()
        })?;
        check_protocol(&self.protocol)
    }
}

pub fn transfer_constants(v: &Value, ctx: &mut Ctx) -> Result<()> {
    let p: TransferParams = parse(v, ctx)?;
    // a spike φ = c·δ_0 has C(φ)(a) = |c|/(1 - a) for a <= 0
    let c = 3.0;
    let mut spike_err: f64 = 0.0;
    for a in -4i64..=1 {
        let mut rng = ctx.rng(&format!("spike-{a}"));
        let est = transfer_best_constant(0, &[c], a, p.width, &p.protocol, &mut rng);
        let want = if a > 0 { 0.0 } else { c / (1 - a) as f64 };
        spike_err = spike_err.max((est.value - want).abs());
        ctx.cell(Cell::new("spike", format!("a={a}"), est.value).at(a as f64).against(want));
    }
    ctx.check("spike", spike_err <= 1e-12, spike_err, Some(1e-12), "C(c·δ_0)(a) = |c|/(1 - a)");

    let phi = vec![1.0; p.support as usize];
    let az: Vec<i64> = (-p.a_radius..p.support).collect();
    let seeds: Vec<u64> = az.iter().map(|a| ctx.seed(&format!("a={a}"))).collect();
    let consts: Vec<f64> = az
        .par_iter()
        .zip(&seeds)
        .map(|(&a, &s)| {
            let mut rng = <rand_chacha::ChaCha20Rng as rand::SeedableRng>::seed_from_u64(s);
            transfer_best_constant(0, &phi, a, p.width, &p.protocol, &mut rng).value
        })
        .collect();
    for (a, v) in az.iter().zip(&consts) {
        ctx.cell(Cell::new("constant", format!("a={a}"), *v).at(*a as f64));
    }
    let mut ratios = Vec::new();
    for &q in &p.p_values {
        let lhs: f64 = consts.iter().map(|c| c.powf(q)).sum::<f64>().powf(1.0 / q);
        let rhs: f64 = phi.iter().map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q);
        let r = lhs / rhs;
        ratios.push(r);
        ctx.cell(Cell::new("aggregate", format!("p={q}"), r).at(q));
        ctx.inform(&format!("c_p(p={q})"), r, "‖C(φ)‖_{l^p_a} / ‖φ‖_{l^p}, probe lower bound");
    }
    let spread = ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    ctx.inform("c_p-spread", spread, "max/min of the recorded C_p across p");
    Ok(())
}
