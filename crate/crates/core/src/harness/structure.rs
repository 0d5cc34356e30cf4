//! Exact structural checks: grids, sequence norms and transfer kernels.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{parse, require, Cell, Ctx, Params, Result};
use crate::grid::{self, rat, GridSpec, Lattice, RatInterval};
use crate::kernels::{self, KernelKind, KernelSpec};
use crate::seqnorms::{
    entropy_sup, oscillation_norm, variation_norm, Anchor, PartitionPoints, VariationMode, VectorSequence,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridParams {
    #[serde(rename = "N")]
    pub modulus: i64,
    /// Number of residue periods of `N - 1` scales covered per grid.
    pub periods: i64,
    /// Half-open integer window `[lo, hi)`.
    pub window: [i64; 2],
    /// Residues `j` to check; all of `0..N-1` when absent.
    pub j: Option<Vec<i64>>,
    /// Offsets `L` to check; all of `0..N` when absent.
    #[serde(rename = "L")]
    pub offsets: Option<Vec<i64>>,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            modulus: 41,
            periods: 3,
            window: [0, 8],
            j: None,
            offsets: None,
        }
    }
}

impl Params for GridParams {
    fn check(&self) -> std::result::Result<(), String> {
        let n = self.modulus;
        require(n >= 3 && n % 2 == 1 && n <= 257, || format!("N must be an odd integer in [3, 257], got {n}"))?;
        require((1..=8).contains(&self.periods), || format!("periods must be in 1..=8, got {}", self.periods))?;
        require(self.window[0] < self.window[1], || "window must satisfy lo < hi".into())?;
        require(self.window[1] - self.window[0] <= 64, || "window longer than 64".into())?;
        if let Some(js) = &self.j {
            require(js.iter().all(|j| (0..n - 1).contains(j)), || format!("j values must lie in [0, {})", n - 1))?;
        }
        if let Some(ls) = &self.offsets {
            require(ls.iter().all(|l| (0..n).contains(l)), || format!("L values must lie in [0, {n})"))?;
        }
        Ok(())
    }
}

/// Base scales `j + (N-1)t`, `t = -1..periods-1`, plus two saturated descendant
/// scales below every base scale but the lowest.
fn grid_scales(modulus: i64, j: i64, periods: i64) -> Vec<i32> {
    let period = modulus - 1;
    let base: Vec<i64> = (-1..periods - 1).map(|t| j + period * t).collect();
    let mut scales: Vec<i32> = base.iter().map(|&s| s as i32).collect();
    for &s in &base[1..] {
        scales.extend([(s - 1) as i32, (s - 2) as i32]);
    }
    scales.sort_unstable();
    scales.dedup();
    scales
}

pub fn verify_grid(v: &Value, ctx: &mut Ctx) -> Result<()> {
    let p: GridParams = parse(v, ctx)?;
    let n = p.modulus;
    let window = RatInterval::new(rat(p.window[0], 1), rat(p.window[1], 1));
    let js = p.j.clone().unwrap_or_else(|| (0..n - 1).collect());
    let ls = p.offsets.clone().unwrap_or_else(|| (0..n).collect());
    let pairs: Vec<(i64, i64)> = js.iter().flat_map(|&j| ls.iter().map(move |&l| (j, l))).collect();
    let reports = pairs
        .par_iter()
        .map(|&(j, l)| {
            let spec = GridSpec::new(n, j, l, true)?;
            grid::verify_grid(&spec, &grid_scales(n, j, p.periods), &window)
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ctx.fail(e))?;
    let mut violations = 0usize;
    let mut certified: u128 = 0;
    for (&(j, l), r) in pairs.iter().zip(&reports) {
        violations += r.violations.len();
        certified = certified.saturating_add(r.pairs_certified);
        ctx.cell(Cell::new("nestedness", format!("N={n},j={j},L={l}"), r.violations.len() as f64).at(j as f64));
    }
    ctx.check(
        "nestedness",
        violations == 0,
        violations as f64,
        Some(0.0),
        format!("{} grids, {certified} interval pairs certified", pairs.len()),
    );

    let period = n - 1;
    let all_scales: Vec<i32> = (-period..period * (p.periods - 1)).map(|s| s as i32).collect();
    let plain: Vec<GridSpec> = pairs
        .iter()
        .map(|&(j, l)| GridSpec::new(n, j, l, false))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| ctx.fail(e))?;
    let disjoint = grid::verify_disjoint(&plain, &all_scales, &window).map_err(|e| ctx.fail(e))?;
    ctx.cell(Cell::new("disjointness", format!("N={n}"), disjoint.shared.len() as f64));
    ctx.check(
        "disjointness",
        disjoint.shared.is_empty(),
        disjoint.shared.len() as f64,
        Some(0.0),
        format!("{} lattices over {} grids", disjoint.lattices_checked, disjoint.grids),
    );

    // negative control: a scale-1 lattice of G_{N,1,3} mixed into G_{N,0,3}
    let control_spec = GridSpec::new(n, 0, 3 % n, false).map_err(|e| ctx.fail(e))?;
    let mut family = grid::lattices(&control_spec, &grid_scales(n, 0, p.periods));
    family.push(Lattice {
        scale: 1,
        offset: 3 % n,
        modulus: n,
    });
    let control = grid::verify_lattices(&family, &window, 1 << 16).map_err(|e| ctx.fail(e))?;
    ctx.cell(Cell::new("control", "mixed residue", control.violations.len() as f64));
    ctx.check(
        "negative-control-detected",
        !control.violations.is_empty(),
        control.violations.len() as f64,
        None,
        "a lattice of the wrong residue class must produce violations",
    );

    let spec = GridSpec::new(n, 0, 0, true).map_err(|e| ctx.fail(e))?;
    let listed = grid::enumerate(&spec, &[0, -1, -2], &window, 4096).map_err(|e| ctx.fail(e))?;
    let rows = listed
        .iter()
        .map(|g| {
            let a = g.left();
            vec![
                g.scale.to_string(),
                g.index.to_string(),
                g.offset.to_string(),
                g.modulus.to_string(),
                a.numer().to_string(),
                a.denom().to_string(),
            ]
        })
        .collect();
    ctx.plot("intervals", &["i", "l", "L", "N", "left_num", "left_den"], rows);
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormParams {
    pub instances: usize,
    pub max_len: usize,
    pub r_values: Vec<f64>,
    pub product_constant: f64,
    pub entropy_constant: f64,
}

impl Default for NormParams {
    fn default() -> Self {
        NormParams {
            instances: 10_000,
            max_len: 12,
            r_values: vec![1.0, 1.5, 2.0, 3.0, 4.0],
            product_constant: 2.0,
            entropy_constant: 4.0,
        }
    }
}

impl Params for NormParams {
    fn check(&self) -> std::result::Result<(), String> {
        require(self.instances >= 1, || "instances must be >= 1".into())?;
        require((2..=16).contains(&self.max_len), || format!("max_len must be in 2..=16, got {}", self.max_len))?;
        require(!self.r_values.is_empty(), || "r_values must be nonempty".into())?;
        require(self.r_values.iter().all(|r| r.is_finite() && *r >= 1.0), || "every r must be >= 1".into())?;
        require(self.product_constant > 0.0, || "product_constant must be > 0".into())?;
        require(self.entropy_constant > 0.0, || "entropy_constant must be > 0".into())
    }
}

const PROPERTIES: [&str; 6] = [
    "monotone-in-r",
    "subadditive",
    "product-variation",
    "product-oscillation",
    "entropy",
    "oscillation-sup",
];

/// Worst `lhs / rhs` and violation count per property.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    worst: f64,
    violations: usize,
    checked: usize,
}

impl Tally {
    fn add(&mut self, lhs: f64, rhs: f64) {
        self.checked += 1;
        // rounding slack only
        if lhs > rhs + 1e-12 * (1.0 + rhs.abs()) {
            self.violations += 1;
        }
        if rhs > 0.0 {
            self.worst = self.worst.max(lhs / rhs);
        }
    }

    fn merge(mut self, o: Tally) -> Tally {
        self.worst = self.worst.max(o.worst);
        self.violations += o.violations;
        self.checked += o.checked;
        self
    }
}

fn random_scalars(rng: &mut impl Rng, n: usize) -> Vec<Complex64> {
    let integer = rng.gen::<bool>();
    (0..n)
        .map(|_| {
            if integer {
                Complex64::new(rng.gen_range(-3..=3) as f64, 0.0)
            } else {
                Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
            }
        })
        .collect()
}

fn norm_instance(p: &NormParams, rng: &mut impl Rng) -> std::result::Result<[Tally; 6], crate::seqnorms::NormError> {
    let mut t = [Tally::default(); 6];
    let n = rng.gen_range(2..=p.max_len);
    let start = rng.gen_range(-5..=5);
    let a = VectorSequence::from_complex(start, &random_scalars(rng, n));
    let b = VectorSequence::from_complex(start, &random_scalars(rng, n));
    let sum = a.add(&b);
    let prod = a.scale_by(&b);
    let exact = |s: &VectorSequence, r: f64| variation_norm(s, r, VariationMode::Exact);
    let mut rs = p.r_values.clone();
    rs.sort_by(f64::total_cmp);
    let mut prev: Option<f64> = None;
    for &r in &rs {
        let va = exact(&a, r)?;
        let vb = exact(&b, r)?;
        if let Some(v) = prev {
            t[0].add(va, v);
        }
        prev = Some(va);
        t[1].add(exact(&sum, r)?, va + vb);
        t[2].add(exact(&prod, r)?, p.product_constant * va * vb);
        t[4].add(entropy_sup(&a, r)?.value, p.entropy_constant * va);
    }
    let j = rng.gen_range(2..=n);
    let mut idx: Vec<i64> = (start..start + n as i64).collect();
    for i in 0..j {
        let k = rng.gen_range(i..idx.len());
        idx.swap(i, k);
    }
    let mut u = idx[..j].to_vec();
    u.sort_unstable();
    let u = PartitionPoints::new(u)?;
    let oa = oscillation_norm(&a, &u, Anchor::Left)?;
    let ob = oscillation_norm(&b, &u, Anchor::Left)?;
    t[3].add(
        oscillation_norm(&prod, &u, Anchor::Left)?,
        b.sup_norm() * oa + a.sup_norm() * ob,
    );
    for anchor in [Anchor::Left, Anchor::Right] {
        t[5].add(
            oscillation_norm(&a, &u, anchor)?,
            ((j - 1) as f64).sqrt() * 2.0 * a.sup_norm(),
        );
    }
    Ok(t)
}

pub fn verify_norms(v: &Value, ctx: &mut Ctx) -> Result<()> {
    let p: NormParams = parse(v, ctx)?;
    let seeds: Vec<u64> = (0..p.instances).map(|i| ctx.seed(&format!("instance-{i}"))).collect();
    let tallies = seeds
        .par_iter()
        .map(|&s| {
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(s);
            norm_instance(&p, &mut rng)
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ctx.fail(e))?;
    let total = tallies.into_iter().fold([Tally::default(); 6], |mut acc, t| {
        for (a, b) in acc.iter_mut().zip(t) {
            *a = a.merge(b);
        }
        acc
    });
    for (name, t) in PROPERTIES.iter().zip(total) {
        ctx.cell(Cell::new("properties", *name, t.worst).against(1.0));
        ctx.check(
            name,
            t.violations == 0,
            t.violations as f64,
            Some(0.0),
            format!("{} comparisons, worst lhs/rhs = {}", t.checked, t.worst),
        );
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelParams {
    pub kernel: String,
    /// Identities and approximation constants over `k = 1..=k_max`.
    pub k_max: i64,
    /// Summation-by-parts sums over `k = 1..=sbp_k_max`.
    pub sbp_k_max: i64,
    /// Identity window `|i| <= window`.
    pub window: i64,
    /// Allowed max/min ratio of the approximation constants across `k`.
    pub approx_factor: f64,
    /// Allowed ratio of the largest summation-by-parts sum to the one at `k = 1`.
    pub sbp_factor: f64,
    pub admissibility_threshold: f64,
    /// Admissibility samples: `±ξ` log-spaced over `[xi_min, xi_max]`.
    pub xi_min: f64,
    pub xi_max: f64,
    pub xi_samples: usize,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            kernel: "inverse_y".into(),
            k_max: 10,
            sbp_k_max: 12,
            window: 256,
            approx_factor: 2.0,
            sbp_factor: 2.0,
            admissibility_threshold: 1e3,
            xi_min: 1e-3,
            xi_max: 1e2,
            xi_samples: 120,
        }
    }
}

impl Params for KernelParams {
    fn check(&self) -> std::result::Result<(), String> {
        self.kernel.parse::<KernelKind>().map_err(|e| e.to_string())?;
        require((2..=14).contains(&self.k_max), || format!("k_max must be in 2..=14, got {}", self.k_max))?;
        require((2..=14).contains(&self.sbp_k_max), || format!("sbp_k_max must be in 2..=14, got {}", self.sbp_k_max))?;
        require((1..=1 << 16).contains(&self.window), || "window must be in 1..=65536".into())?;
        require(self.approx_factor >= 1.0 && self.sbp_factor >= 1.0, || "factors must be >= 1".into())?;
        require(self.admissibility_threshold > 0.0, || "admissibility_threshold must be > 0".into())?;
        require(0.0 < self.xi_min && self.xi_min < self.xi_max && self.xi_max.is_finite(), || {
            "need 0 < xi_min < xi_max".into()
        })?;
        require((2..=10_000).contains(&self.xi_samples), || "xi_samples must be in 2..=10000".into())
    }
}

pub fn verify_kernels(v: &Value, ctx: &mut Ctx) -> Result<()> {
    let p: KernelParams = parse(v, ctx)?;
    let kind: KernelKind = p.kernel.parse().map_err(|e| ctx.fail(e))?;
    let spec = KernelSpec::new(kind);
    let last = (p.xi_samples - 1) as f64;
    let xs: Vec<f64> = (0..p.xi_samples)
        .flat_map(|t| {
            let x = p.xi_min * (p.xi_max / p.xi_min).powf(t as f64 / last);
            [x, -x]
        })
        .collect();
    let adm = kernels::check_admissible(&spec, &xs, 3, p.admissibility_threshold).map_err(|e| ctx.fail(e))?;
    for c in &adm.conditions {
        ctx.cell(Cell::new("admissibility", c.name.clone(), c.c_min).against(p.admissibility_threshold));
    }
    let worst = adm.conditions.iter().map(|c| c.c_min).fold(0.0, f64::max);
    ctx.check(
        "admissible",
        adm.pass(),
        worst,
        Some(p.admissibility_threshold),
        format!("{} on {} samples", spec.name(), adm.samples),
    );
    if !spec.is_inverse_y() {
        ctx.inform(
            "transfer-kernels",
            0.0,
            format!("{} is not 1/y outside [-1, 1]; transfer kernels skipped", spec.name()),
        );
        return Ok(());
    }

    let top = p.k_max.max(p.sbp_k_max);
    let kernels = (1..=top)
        .into_par_iter()
        .map(|k| kernels::discrete_kernels(&spec, k))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ctx.fail(e))?;
    let mut mismatches = 0usize;
    let mut compared = 0usize;
    for a in 1..=p.k_max {
        for b in a + 1..=p.k_max {
            let (ta, tb) = (&kernels[a as usize - 1], &kernels[b as usize - 1]);
            for i in -p.window..=p.window {
                let lhs = ta.h_entry(i).combine(&tb.h_entry(i), -1);
                let rhs = ta.o.entry(i).combine(&tb.o.entry(i), -1);
                compared += 1;
                if lhs != rhs {
                    mismatches += 1;
                }
            }
        }
    }
    ctx.cell(Cell::new("identity", "H_k-H_k'=O_k-O_k'", mismatches as f64));
    ctx.check(
        "h-minus-o-identity",
        mismatches == 0,
        mismatches as f64,
        Some(0.0),
        format!("{compared} exact comparisons"),
    );

    let approx = (1..=p.k_max)
        .into_par_iter()
        .map(|k| kernels::kernel_approx_error(&spec, k))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ctx.fail(e))?;
    for (name, vals) in [
        ("approx-inner", approx.iter().map(|e| e.inner).collect::<Vec<_>>()),
        ("approx-outer", approx.iter().map(|e| e.outer).collect()),
    ] {
        for (k, v) in (1..).zip(&vals) {
            ctx.cell(Cell::new(name, format!("k={k}"), *v).at(k as f64));
        }
        let hi = vals.iter().copied().fold(0.0, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let ratio = hi / lo;
        ctx.check(
            &format!("{name}-stable"),
            ratio <= p.approx_factor,
            ratio,
            Some(p.approx_factor),
            format!("constants in [{lo}, {hi}] for k = 1..={}", p.k_max),
        );
    }

    let sums = (1..=p.sbp_k_max)
        .into_par_iter()
        .map(|k| kernels::summation_by_parts_weights(&spec, k).map(|w| w.abs_sum))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| ctx.fail(e))?;
    for (k, s) in (1..).zip(&sums) {
        ctx.cell(Cell::new("sbp", format!("k={k}"), *s).at(k as f64));
    }
    let hi = sums.iter().copied().fold(0.0, f64::max);
    ctx.check(
        "sbp-bounded",
        hi <= p.sbp_factor * sums[0],
        hi / sums[0],
        Some(p.sbp_factor),
        format!("largest weight sum {hi}, at k = 1: {}", sums[0]),
    );

    let mut buf = Vec::new();
    kernels::write_kernels_csv(&mut buf, &spec, &kernels[..3.min(kernels.len())], 16).map_err(|e| ctx.fail(e))?;
    super::plot_from_csv(ctx, "kernels", &buf)?;
    Ok(())
}
