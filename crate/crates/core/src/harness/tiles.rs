//! Tree selection and the single-scale wave packet frame.

use std::collections::BTreeSet;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{parse, require, Cell, Ctx, Params, Result};
use crate::grid::GridInterval;
use crate::signal::{smooth_step, SampledSignal};
use crate::tf::{
    analyze, partition_sum, select_forest, single_scale_reconstruct, window_hat, Grid, PacketFamily, Tile, SHIFTS,
};

/// `count` distinct tiles with `I_s ⊆ [0, span)`, `|I_s| = 2^i` for `i <= max_scale`
/// and `ω_s ⊆ [0, base)`.
pub(crate) fn random_tiles(rng: &mut impl Rng, count: usize, span: i64, max_scale: i32, base: i64) -> Vec<Tile> {
    let mut set = BTreeSet::new();
    while set.len() < count {
        let i = rng.gen_range(0..=max_scale);
        let m = rng.gen_range(0..(span >> i));
        let w = rng.gen_range(0..(base << i));
        set.insert(Tile::new(GridInterval::dyadic(i, m), GridInterval::dyadic(-i, w)).expect("dyadic tile"));
    }
    set.into_iter().collect()
}

fn tile_capacity(span: i64, max_scale: i32, base: i64) -> usize {
    (0..=max_scale).map(|i| ((span >> i) * (base << i)) as usize).sum()
}

/// Complex white noise with `f̂` tapered to zero at `|ξ| = band`.
fn random_band_limited(grid: &Grid, band: f64, lo: f64, rng: &mut impl Rng) -> SampledSignal {
    let mut spec = grid.spectrum(|_| Complex64::new(0.0, 0.0)).expect("valid grid");
    for idx in 0..grid.n {
        let xi = grid.xi(idx);
        if xi >= lo {
            let w = smooth_step(2.0 * (1.0 - xi.abs() / band));
            spec.values[idx] = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * w;
        }
    }
    spec.inverse()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub instances: usize,
    pub tiles: usize,
    /// Allowed max/min ratio of the counting constant across instances.
    pub counting_factor: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            instances: 20,
            tiles: 200,
            counting_factor: 4.0,
        }
    }
}

const TREE_SPAN: i64 = 16;
const TREE_SCALES: i32 = 3;
const TREE_BASE: i64 = 4;

impl Params for TreeParams {
    fn check(&self) -> std::result::Result<(), String> {
        let cap = tile_capacity(TREE_SPAN, TREE_SCALES, TREE_BASE);
        require(self.instances >= 2, || "instances must be >= 2".into())?;
        require((1..=cap).contains(&self.tiles), || format!("tiles must be in 1..={cap}"))?;
        require(self.counting_factor >= 1.0, || "counting_factor must be >= 1".into())
    }
}

pub fn tree_select(v: &Value, ctx: &mut Ctx) -> Result<()> {
    let p: TreeParams = parse(v, ctx)?;
    let grid = Grid::new(-48.0, 1.0 / 16.0, 2048).map_err(|e| ctx.fail(e))?;
    let seeds: Vec<u64> = (0..p.instances).map(|s| ctx.seed(&format!("instance={s}"))).collect();
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = <rand_chacha::ChaCha20Rng as rand::SeedableRng>::seed_from_u64(seed);
            let tiles = random_tiles(&mut rng, p.tiles, TREE_SPAN, TREE_SCALES, TREE_BASE);
            let f = random_band_limited(&grid, TREE_BASE as f64 + 1.0, 0.0, &mut rng);
            let table = analyze(&f, &tiles, PacketFamily::Bump)?;
            let forest = select_forest(&tiles, &table, f.l2_norm().powi(2))?;
            let check = forest.verify(&tiles, &table)?;
            Ok((forest, check))
        })
        .collect::<std::result::Result<Vec<_>, crate::tf::TfError>>()
        .map_err(|e| ctx.fail(e))?;
    let mut all_ok = true;
    let mut constants = Vec::new();
    let mut rows = Vec::new();
    for (s, ((forest, check), &seed)) in runs.iter().zip(&seeds).enumerate() {
        all_ok &= check.ok();
        let c = forest.levels.iter().map(|l| l.counting_constant).fold(0.0, f64::max);
        constants.push(c);
        ctx.cell(Cell::new("counting-constant", format!("instance={s}"), c).seeded(seed));
        ctx.cell(Cell::new("levels", format!("instance={s}"), forest.levels.len() as f64).seeded(seed));
        for level in &forest.levels {
            for t in &level.trees {
                rows.push(vec![
                    s.to_string(),
                    t.n.to_string(),
                    t.top.to_string(),
                    t.members.len().to_string(),
                    t.energy.to_string(),
                ]);
            }
        }
    }
    ctx.plot("forest", &["instance", "n", "top", "members", "energy"], rows);
    ctx.check(
        "selection-valid",
        all_ok,
        runs.iter().filter(|(_, c)| c.ok()).count() as f64,
        Some(p.instances as f64),
        "partition, trees below their tops and size(P_n) <= 2^-n",
    );
    let hi = constants.iter().copied().fold(0.0, f64::max);
    let lo = constants.iter().copied().fold(f64::INFINITY, f64::min);
    ctx.check(
        "counting-constant-stable",
        lo > 0.0 && hi <= p.counting_factor * lo,
        hi / lo,
        Some(p.counting_factor),
        format!("max_n Σ|I_T| / (2^2n ‖f‖₂²) in [{lo}, {hi}]"),
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveParams {
    pub signals: usize,
    pub origin: f64,
    pub spacing: f64,
    pub n: usize,
    /// `f̂` is tapered to zero at `|ξ| = band`.
    pub band: f64,
    pub scale: i32,
    /// Sample frequencies for the partition of unity.
    pub frequencies: usize,
    pub partition_tolerance: f64,
    pub reconstruction_tolerance: f64,
    /// Allowed relative spread `(max - min)/min` of the Parseval ratio across signals.
    pub parseval_spread: f64,
}

impl Default for WaveParams {
    fn default() -> Self {
        WaveParams {
            signals: 20,
            origin: -128.0,
            spacing: 0.25,
            n: 2048,
            band: 1.2,
            scale: 1,
            frequencies: 4096,
            partition_tolerance: 1e-8,
            reconstruction_tolerance: 1e-3,
            parseval_spread: 1e-3,
        }
    }
}

impl Params for WaveParams {
    fn check(&self) -> std::result::Result<(), String> {
        require(self.signals >= 1, || "signals must be >= 1".into())?;
        require(self.n >= 64 && self.n.is_power_of_two(), || "n must be a power of two >= 64".into())?;
        require(self.spacing > 0.0, || "spacing must be positive".into())?;
        require(self.band > 0.0 && self.band < 0.5 / self.spacing, || {
            "band must lie below the Nyquist frequency".into()
        })?;
        require((-8..=8).contains(&self.scale), || "scale must be in -8..=8".into())?;
        require(self.frequencies >= 1, || "frequencies must be >= 1".into())?;
        require(
            self.partition_tolerance > 0.0 && self.reconstruction_tolerance > 0.0 && self.parseval_spread > 0.0,
            || "tolerances must be positive".into(),
        )
    }
}

pub fn wavepacket(v: &Value, ctx: &mut Ctx) -> Result<()> {
    let p: WaveParams = parse(v, ctx)?;
    let period = 1.0 / SHIFTS as f64;
    let mut rng = ctx.rng("frequencies");
    let mut worst: f64 = 0.0;
    let mut leak: f64 = 0.0;
    for _ in 0..p.frequencies {
        let u = rng.gen_range(-4.0..4.0);
        worst = worst.max((partition_sum(u) - 1.0).abs());
        if !(0.0..2.0 * period).contains(&u) {
            leak = leak.max(window_hat(u).abs());
        }
    }
    let support = [0.0, 2.0 * period, -1e-12, 2.0 * period + 1e-12];
    leak = support.iter().fold(leak, |a, &u| a.max(window_hat(u).abs()));
    ctx.check(
        "partition-of-unity",
        worst < p.partition_tolerance,
        worst,
        Some(p.partition_tolerance),
        format!("max |Σ_l |φ̂(ξ - l/41)|² - 1| over {} random ξ", p.frequencies),
    );
    ctx.check("window-support", leak == 0.0, leak, Some(0.0), "max |φ̂| outside (0, 2/41)");

    let grid = Grid::new(p.origin, p.spacing, p.n).map_err(|e| ctx.fail(e))?;
    let seeds: Vec<u64> = (0..p.signals).map(|s| ctx.seed(&format!("signal={s}"))).collect();
    let out = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = <rand_chacha::ChaCha20Rng as rand::SeedableRng>::seed_from_u64(seed);
            let f = random_band_limited(&grid, p.band, f64::NEG_INFINITY, &mut rng);
            let (g, c) = single_scale_reconstruct(&f, p.scale)?;
            let norm = f.l2_norm();
            let err = g.sub(&f).map_err(crate::tf::TfError::from)?.l2_norm() / norm;
            Ok((err, c.energy() / (norm * norm)))
        })
        .collect::<std::result::Result<Vec<_>, crate::tf::TfError>>()
        .map_err(|e| ctx.fail(e))?;
    for (s, (&(err, parseval), &seed)) in out.iter().zip(&seeds).enumerate() {
        ctx.cell(Cell::new("reconstruction", format!("signal={s}"), err).seeded(seed));
        ctx.cell(Cell::new("parseval", format!("signal={s}"), parseval).seeded(seed).against(1.0));
    }
    let err = out.iter().map(|o| o.0).fold(0.0, f64::max);
    ctx.check(
        "reconstruction",
        err <= p.reconstruction_tolerance,
        err,
        Some(p.reconstruction_tolerance),
        "max ‖f - Σ⟨f,φ⟩φ‖₂/‖f‖₂ at one scale",
    );
    let hi = out.iter().map(|o| o.1).fold(0.0, f64::max);
    let lo = out.iter().map(|o| o.1).fold(f64::INFINITY, f64::min);
    ctx.check(
        "parseval-constant",
        (hi - lo) / lo <= p.parseval_spread,
        (hi - lo) / lo,
        Some(p.parseval_spread),
        format!("Σ|⟨f,φ⟩|² / ‖f‖₂² in [{lo}, {hi}]"),
    );
    Ok(())
}
