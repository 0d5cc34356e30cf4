//! The window `φ`, the frame packets `φ_{i,m,l/41}`, generic tile packets and
//! coefficient tables.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Tile, TfError};
use crate::grid::rat_to_f64;
use crate::quad;
use crate::signal::{bump, cis, dft_forward, dft_inverse, SampledSignal, Spectrum};

/// Number of frequency shifts per unit in the window partition.
pub const SHIFTS: i64 = 41;

/// `φ̂` as a function of `t = 41u`; support `(0, 2)` in `t`.
fn hat_t(t: f64) -> f64 {
    let own = bump(t - 1.0);
    if own == 0.0 {
        return 0.0;
    }
    // only the shifts l = floor(t) - 1 and floor(t) overlap t
    let f = t - t.floor();
    own / (bump(f).powi(2) + bump(f - 1.0).powi(2)).sqrt()
}

/// `φ̂(u) = b̂(u) / (Σ_l b̂(u - l/41)²)^{1/2}` with `b̂(u) = bump(41u - 1)`.
pub fn window_hat(u: f64) -> f64 {
    hat_t(SHIFTS as f64 * u)
}

/// `Σ_l |φ̂(u - l/41)|²`, summed over every shift that meets `u`.
pub fn partition_sum(u: f64) -> f64 {
    let t = SHIFTS as f64 * u;
    let l0 = t.floor() as i64;
    (l0 - 2..=l0 + 1)
        .map(|l| hat_t(t - l as f64).powi(2))
        .sum()
}

/// `‖φ‖₂² = ∫|φ̂|²`, by quadrature.
pub fn window_energy() -> f64 {
    quad::integrate(0.0, 2.0 / SHIFTS as f64, 64, |u| window_hat(u).powi(2))
}

/// `φ(x) = ∫ φ̂(u) e^{2πiux} du`, by quadrature.
pub fn window_value(x: f64) -> Complex64 {
    let b = 2.0 / SHIFTS as f64;
    let panels = 32 + (x.abs() * b * 4.0) as usize;
    let re = quad::integrate(0.0, b, panels, |u| window_hat(u) * (2.0 * PI * u * x).cos());
    let im = quad::integrate(0.0, b, panels, |u| window_hat(u) * (2.0 * PI * u * x).sin());
    Complex64::new(re, im)
}

/// Sample grid shared by a signal and its spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: f64,
    pub spacing: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(origin: f64, spacing: f64, n: usize) -> Result<Self, TfError> {
        Spectrum::from_fn(origin, spacing, 2, |_| Complex64::new(0.0, 0.0))?;
        if n < 2 || !n.is_power_of_two() {
            return Err(TfError::Domain(format!("sample count {n} must be a power of two")));
        }
        Ok(Grid { origin, spacing, n })
    }

    pub fn of(f: &SampledSignal) -> Self {
        Grid {
            origin: f.origin,
            spacing: f.spacing,
            n: f.len(),
        }
    }

    pub fn period(&self) -> f64 {
        self.n as f64 * self.spacing
    }

    pub fn dxi(&self) -> f64 {
        1.0 / self.period()
    }

    pub fn xi(&self, idx: usize) -> f64 {
        (idx as i64 - (self.n / 2) as i64) as f64 * self.dxi()
    }

    pub fn spectrum(&self, g: impl Fn(f64) -> Complex64) -> Result<Spectrum, TfError> {
        Ok(Spectrum::from_fn(self.origin, self.spacing, self.n, g)?)
    }
}

/// `φ̂_{i,m,l}(ξ) = 2^{i/2} φ̂(2^iξ - l/41) e^{-2πim(2^iξ - l/41)}`.
pub fn frame_hat(i: i32, m: i64, l: i64, xi: f64) -> Complex64 {
    let u = 2f64.powi(i) * xi - l as f64 / SHIFTS as f64;
    let a = window_hat(u);
    if a == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    cis(-2.0 * PI * m as f64 * u) * (a * 2f64.powf(0.5 * i as f64))
}

/// `φ_{i,m,l/41}(x) = 2^{-i/2} φ(2^{-i}x - m) e^{2πi2^{-i}xl/41}`, sampled on `grid`
/// as the periodic function with the sampled spectrum. `truncated` is set when the
/// packet is not negligible where the period wraps.
pub fn wave_packet(i: i32, m: i64, l: i64, grid: &Grid) -> Result<SampledSignal, TfError> {
    let spec = grid.spectrum(|xi| frame_hat(i, m, l, xi))?;
    let mut out = spec.inverse();
    let s = 2f64.powi(i);
    let centre = s * m as f64;
    let inside = centre >= grid.origin && centre <= grid.origin + grid.period();
    let wrap = window_value(0.5 * grid.period() / s).norm();
    out.truncated = !inside || wrap > 1e-8 * window_value(0.0).norm();
    Ok(out)
}

/// Packet family used to attach a function `φ_s` to an arbitrary tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketFamily {
    /// The frame packets `φ_{i,m,l/41}`; tiles must come from `Tile::frame`.
    Frame,
    /// `|I|^{1/2} χ̂(|I|(ξ - a_ω)) e^{-2πiξ·left(I)}` with `χ̂` an L²-normalized bump
    /// on `[0, 1/2]`, so that the spectrum lies in `ω_{s,1}`.
    Bump,
}

fn bump_norm() -> f64 {
    static N: OnceLock<f64> = OnceLock::new();
    *N.get_or_init(|| quad::integrate(0.0, 0.5, 64, |u| bump(4.0 * u - 1.0).powi(2)).sqrt())
}

/// Spectral description of one tile's packet, in `f64`.
#[derive(Debug, Clone, Copy)]
struct PacketShape {
    family: PacketFamily,
    scale: i32,
    m: i64,
    l: i64,
    len: f64,
    left: f64,
    freq_lo: f64,
    freq_hi: f64,
}

impl PacketShape {
    fn new(family: PacketFamily, tile: &Tile) -> Result<Self, TfError> {
        let (m, l) = match family {
            PacketFamily::Frame => {
                let (_, m, l) = tile
                    .frame_params()
                    .ok_or_else(|| TfError::Domain(format!("{tile} is not a frame tile")))?;
                (m, l)
            }
            PacketFamily::Bump => (0, 0),
        };
        let (lo, hi) = tile.freq.to_f64();
        Ok(PacketShape {
            family,
            scale: tile.time.scale,
            m,
            l,
            len: 2f64.powi(tile.time.scale),
            left: rat_to_f64(&tile.time.left()),
            freq_lo: lo,
            freq_hi: hi,
        })
    }

    fn hat(&self, xi: f64) -> Complex64 {
        match self.family {
            PacketFamily::Frame => frame_hat(self.scale, self.m, self.l, xi),
            PacketFamily::Bump => {
                let u = self.len * (xi - self.freq_lo);
                let a = bump(4.0 * u - 1.0);
                if a == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    cis(-2.0 * PI * xi * self.left) * (self.len.sqrt() * a / bump_norm())
                }
            }
        }
    }
}

/// `φ̂_s(ξ)` for a tile in the given family.
pub fn packet_hat(family: PacketFamily, tile: &Tile, xi: f64) -> Result<Complex64, TfError> {
    Ok(PacketShape::new(family, tile)?.hat(xi))
}

/// `φ_s` sampled on `grid` (periodic, spectrally exact).
pub fn packet(family: PacketFamily, tile: &Tile, grid: &Grid) -> Result<SampledSignal, TfError> {
    let shape = PacketShape::new(family, tile)?;
    Ok(grid.spectrum(|xi| shape.hat(xi))?.inverse())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TileCoefficient {
    pub tile: Tile,
    pub value: Complex64,
}

/// `s ↦ ⟨f, φ_s⟩`, sorted by tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub family: PacketFamily,
    pub entries: Vec<TileCoefficient>,
}

impl CoefficientTable {
    pub fn from_entries(family: PacketFamily, mut entries: Vec<TileCoefficient>) -> Self {
        entries.sort_by_key(|a| a.tile);
        entries.dedup_by(|a, b| a.tile == b.tile);
        CoefficientTable { family, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, tile: &Tile) -> Option<Complex64> {
        self.entries
            .binary_search_by(|e| e.tile.cmp(tile))
            .ok()
            .map(|i| self.entries[i].value)
    }

    /// Coefficients in the order of `tiles`; a missing tile is an error.
    pub fn values_for(&self, tiles: &[Tile]) -> Result<Vec<Complex64>, TfError> {
        tiles
            .iter()
            .map(|t| {
                self.get(t)
                    .ok_or_else(|| TfError::Domain(format!("no coefficient for tile {t}")))
            })
            .collect()
    }

    pub fn tiles(&self) -> Vec<Tile> {
        self.entries.iter().map(|e| e.tile).collect()
    }
}

/// `⟨f, φ_s⟩ = Σ_k f̂(ξ_k) conj(φ̂_s(ξ_k)) dξ` for every tile.
pub fn analyze(
    f: &SampledSignal,
    tiles: &[Tile],
    family: PacketFamily,
) -> Result<CoefficientTable, TfError> {
    let grid = Grid::of(f);
    let spec = f.transform();
    let shapes = tiles
        .iter()
        .map(|t| PacketShape::new(family, t))
        .collect::<Result<Vec<_>, _>>()?;
    let dxi = grid.dxi();
    let half = (grid.n / 2) as i64;
    let entries = tiles
        .par_iter()
        .zip(&shapes)
        .map(|(tile, shape)| {
            // both families have spectrum inside ω_s
            let lo = ((shape.freq_lo / dxi).floor() as i64 - 1).max(-half);
            let hi = ((shape.freq_hi / dxi).ceil() as i64 + 1).min(half - 1);
            let mut s = Complex64::new(0.0, 0.0);
            for k in lo..=hi {
                let idx = (k + half) as usize;
                s += spec.values[idx] * shape.hat(k as f64 * dxi).conj();
            }
            TileCoefficient {
                tile: *tile,
                value: s * dxi,
            }
        })
        .collect();
    Ok(CoefficientTable::from_entries(family, entries))
}

/// All frame coefficients of one scale `i`: `values[l - l_lo][m - m0]`.
///
/// The period `P = nΔx` must be a multiple of `2^i`; the `M = P/2^i` translates
/// starting at `m0` represent every `m` of the periodized frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCoefficients {
    pub scale: i32,
    pub m0: i64,
    pub period: usize,
    pub l_lo: i64,
    pub values: Vec<Vec<Complex64>>,
}

impl ScaleCoefficients {
    pub fn get(&self, m: i64, l: i64) -> Option<Complex64> {
        let j = usize::try_from(m - self.m0).ok()?;
        let r = usize::try_from(l - self.l_lo).ok()?;
        self.values.get(r)?.get(j).copied()
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }

    /// `(m, l, ⟨f, φ_{i,m,l/41}⟩)` in `(l, m)` order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, i64, Complex64)> + '_ {
        self.values.iter().enumerate().flat_map(move |(r, row)| {
            row.iter()
                .enumerate()
                .map(move |(j, &c)| (self.m0 + j as i64, self.l_lo + r as i64, c))
        })
    }

    pub fn to_table(&self) -> CoefficientTable {
        let entries = self
            .iter()
            .map(|(m, l, value)| TileCoefficient {
                tile: Tile::frame(self.scale, m, l),
                value,
            })
            .collect();
        CoefficientTable::from_entries(PacketFamily::Frame, entries)
    }
}

fn frame_period(grid: &Grid, i: i32) -> Result<usize, TfError> {
    let m = grid.period() / 2f64.powi(i);
    let r = m.round();
    if r < 1.0 || (m - r).abs() > 1e-9 * r {
        return Err(TfError::Domain(format!(
            "period {} is not a multiple of 2^{i}",
            grid.period()
        )));
    }
    Ok(r as usize)
}

/// Range of shifts `l` whose packets meet the sampled band, and the bin range of one shift.
fn shift_range(grid: &Grid, i: i32) -> (i64, i64) {
    let half = (grid.n / 2) as f64;
    let s = SHIFTS as f64 * 2f64.powi(i) * grid.dxi();
    ((-half * s).floor() as i64 - 2, ((half - 1.0) * s).ceil() as i64 + 1)
}

fn bins(l: i64, period: usize, half: i64) -> (i64, i64) {
    let m = period as i64;
    let lo = (l * m).div_euclid(SHIFTS);
    let hi = ((l + 2) * m).div_euclid(SHIFTS) + 1;
    (lo.max(-half), hi.min(half - 1))
}

/// `e^{2πi·num/den}` with the angle reduced in integers.
fn root(num: i64, den: i64) -> Complex64 {
    cis(2.0 * PI * num.rem_euclid(den) as f64 / den as f64)
}

/// Frame coefficients `⟨f, φ_{i,m,l/41}⟩` of one scale via one length-`M` FFT per `l`.
pub fn analyze_scale(f: &SampledSignal, i: i32) -> Result<ScaleCoefficients, TfError> {
    let grid = Grid::of(f);
    let period = frame_period(&grid, i)?;
    let m0 = (grid.origin / 2f64.powi(i) - 1e-9).ceil() as i64;
    let spec = f.transform();
    let half = (grid.n / 2) as i64;
    let (l_lo, l_hi) = shift_range(&grid, i);
    let norm = 2f64.powf(0.5 * i as f64) * grid.dxi();
    let mm = period as i64;
    let values = (l_lo..=l_hi)
        .into_par_iter()
        .map(|l| {
            let mut b = vec![Complex64::new(0.0, 0.0); period];
            let (lo, hi) = bins(l, period, half);
            for k in lo..=hi {
                // 41u = (41k - lM)/M exactly in the numerator
                let a = hat_t((SHIFTS * k - l * mm) as f64 / mm as f64);
                if a != 0.0 {
                    b[k.rem_euclid(mm) as usize] += spec.values[(k + half) as usize] * a;
                }
            }
            dft_inverse(&mut b);
            (0..period)
                .map(|j| {
                    let m = m0 + j as i64;
                    b[m.rem_euclid(mm) as usize] * root(-(m.rem_euclid(SHIFTS) * l), SHIFTS) * norm
                })
                .collect()
        })
        .collect();
    Ok(ScaleCoefficients {
        scale: i,
        m0,
        period,
        l_lo,
        values,
    })
}

/// `Σ ⟨f, φ_s⟩ φ_s` over the coefficients with `|c| > threshold`, on `grid`.
pub fn synthesize_scale(
    c: &ScaleCoefficients,
    grid: &Grid,
    threshold: f64,
) -> Result<SampledSignal, TfError> {
    let period = frame_period(grid, c.scale)?;
    if period != c.period {
        return Err(TfError::Domain("grid period differs from the analysis grid".into()));
    }
    let half = (grid.n / 2) as i64;
    let mm = period as i64;
    let norm = 2f64.powf(0.5 * c.scale as f64);
    let parts: Vec<Vec<(usize, Complex64)>> = c
        .values
        .par_iter()
        .enumerate()
        .map(|(r, row)| {
            let l = c.l_lo + r as i64;
            let mut d: Vec<Complex64> = row
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    if v.norm() <= threshold {
                        return Complex64::new(0.0, 0.0);
                    }
                    let m = c.m0 + j as i64;
                    v * root(m.rem_euclid(SHIFTS) * l, SHIFTS)
                })
                .collect();
            dft_forward(&mut d);
            let (lo, hi) = bins(l, period, half);
            let mut out = Vec::new();
            for k in lo..=hi {
                let a = hat_t((SHIFTS * k - l * mm) as f64 / mm as f64);
                if a != 0.0 {
                    let phase = root(-(c.m0.rem_euclid(mm) * k.rem_euclid(mm)), mm);
                    out.push(((k + half) as usize, d[k.rem_euclid(mm) as usize] * phase * (a * norm)));
                }
            }
            out
        })
        .collect();
    let mut spec = grid.spectrum(|_| Complex64::new(0.0, 0.0))?;
    for part in parts {
        for (idx, v) in part {
            spec.values[idx] += v;
        }
    }
    Ok(spec.inverse())
}

/// Reconstruction from the scale-`i` coefficients with `|c| > 10⁻⁸‖f‖₂`.
pub fn single_scale_reconstruct(
    f: &SampledSignal,
    i: i32,
) -> Result<(SampledSignal, ScaleCoefficients), TfError> {
    let c = analyze_scale(f, i)?;
    let g = synthesize_scale(&c, &Grid::of(f), 1e-8 * f.l2_norm())?;
    Ok((g, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_band_limited(grid: &Grid, band: f64, seed: u64) -> SampledSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spec = grid.spectrum(|_| Complex64::new(0.0, 0.0)).unwrap();
        for idx in 0..grid.n {
            let w = crate::signal::smooth_step(2.0 * (1.0 - grid.xi(idx).abs() / band));
            spec.values[idx] = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) * w;
        }
        spec.inverse()
    }

    #[test]
    fn squared_shifts_partition_unity() {
        let mut worst: f64 = 0.0;
        for k in 0..4096 {
            let u = -3.0 + 6.0 * k as f64 / 4096.0 + 1e-4;
            worst = worst.max((partition_sum(u) - 1.0).abs());
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn window_support_and_energy() {
        assert_eq!(window_hat(0.0), 0.0);
        assert_eq!(window_hat(-1e-9), 0.0);
        assert_eq!(window_hat(2.0 / 41.0), 0.0);
        assert_eq!(window_hat(0.05), 0.0);
        assert!(window_hat(1.0 / 41.0) > 0.0);
        assert!((window_energy() - 1.0 / 41.0).abs() < 1e-12);
    }

    #[test]
    fn packet_norm_matches_window() {
        let grid = Grid::new(-4096.0, 0.25, 32768).unwrap();
        let e = window_energy().sqrt();
        for &(i, m, l) in &[(0, 0, 0), (0, 3, 20), (1, -5, 7), (-1, 10, -30)] {
            let p = wave_packet(i, m, l, &grid).unwrap();
            assert!((p.l2_norm() - e).abs() < 1e-8, "{i} {m} {l}");
            assert!(!p.truncated);
        }
        let small = Grid::new(0.0, 0.5, 64).unwrap();
        assert!(wave_packet(0, 0, 0, &small).unwrap().truncated);
    }

    #[test]
    fn packet_zero_is_the_window() {
        let grid = Grid::new(-4096.0, 1.0, 8192).unwrap();
        let p = wave_packet(0, 0, 0, &grid).unwrap();
        for j in (0..p.len()).step_by(97) {
            let d = (p.samples[j] - window_value(p.x(j))).norm();
            assert!(d < 1e-10, "{}", p.x(j));
        }
    }

    #[test]
    fn packet_spectrum_support() {
        let grid = Grid::new(-256.0, 0.25, 4096).unwrap();
        for &(i, l) in &[(0, 18), (1, 5), (-1, -7)] {
            let s = 2f64.powi(i);
            let spec = wave_packet(i, 2, l, &grid).unwrap().transform();
            for (idx, v) in spec.values.iter().enumerate() {
                let xi = spec.xi(idx);
                if xi < l as f64 / 41.0 / s - 1e-12 || xi > (l + 2) as f64 / 41.0 / s + 1e-12 {
                    assert!(v.norm() < 1e-10, "{i} {l} {xi}");
                }
            }
        }
    }

    #[test]
    fn translates_decorrelate_slowly() {
        // supp φ̂ has length 2/41, so φ spreads over tens of units
        let grid = Grid::new(-4096.0, 1.0, 8192).unwrap();
        let e = window_energy();
        let p0 = wave_packet(0, 0, 0, &grid).unwrap();
        let at = |m: i64| p0.inner(&wave_packet(0, m, 0, &grid).unwrap()).unwrap().norm() / e;
        assert!(at(5) > 0.5);
        assert!(at(20) > 0.1);
        let far = at(1200);
        assert!(far < 1e-6, "{far}");
        // φ̂² has period-1/41 shifts summing to 1, so its Fourier coefficients at
        // nonzero multiples of 41 vanish
        for k in 1..4 {
            assert!(at(41 * k) < 1e-12);
        }
    }

    #[test]
    fn inner_product_oracle_for_translates() {
        // <φ_0, φ_m> = ∫ φ̂(u)² e^{2πimu} du
        let grid = Grid::new(-2048.0, 1.0, 4096).unwrap();
        let p0 = wave_packet(0, 0, 0, &grid).unwrap();
        for m in [1i64, 5, 20] {
            let direct = p0.inner(&wave_packet(0, m, 0, &grid).unwrap()).unwrap();
            let re = quad::integrate(0.0, 2.0 / 41.0, 64, |u| {
                window_hat(u).powi(2) * (2.0 * PI * m as f64 * u).cos()
            });
            let im = quad::integrate(0.0, 2.0 / 41.0, 64, |u| {
                window_hat(u).powi(2) * (2.0 * PI * m as f64 * u).sin()
            });
            assert!((direct - Complex64::new(re, im)).norm() < 1e-9, "{m}");
        }
    }

    #[test]
    fn fast_analysis_matches_direct_inner_products() {
        let grid = Grid::new(-64.0, 0.25, 1024).unwrap();
        let f = random_band_limited(&grid, 1.5, 3);
        for i in [0, 1, -1] {
            let c = analyze_scale(&f, i).unwrap();
            for &(m, l) in &[(0i64, 0i64), (3, 18), (-7, -20), (10, 41)] {
                let p = wave_packet(i, m, l, &grid).unwrap();
                let direct = f.inner(&p).unwrap();
                let fast = c.get(m, l).unwrap();
                assert!((direct - fast).norm() < 1e-10 * f.l2_norm(), "{i} {m} {l}");
            }
        }
    }

    #[test]
    fn scale_analysis_is_a_tight_frame() {
        let grid = Grid::new(-128.0, 0.25, 2048).unwrap();
        for seed in 0..5 {
            let f = random_band_limited(&grid, 1.2, seed);
            let c = analyze_scale(&f, 1).unwrap();
            let ratio = c.energy() / f.l2_norm().powi(2);
            assert!((ratio - 1.0).abs() < 1e-10, "{ratio}");
            let g = synthesize_scale(&c, &grid, 0.0).unwrap();
            assert!(g.sub(&f).unwrap().l2_norm() < 1e-10 * f.l2_norm());
        }
    }

    #[test]
    fn frame_reproduces_its_own_elements() {
        let grid = Grid::new(-256.0, 0.5, 2048).unwrap();
        let f = wave_packet(1, 4, 23, &grid).unwrap();
        let (g, _) = single_scale_reconstruct(&f, 1).unwrap();
        assert!(g.sub(&f).unwrap().l2_norm() < 1e-6 * f.l2_norm());
    }

    #[test]
    fn zero_signal_has_zero_coefficients() {
        let grid = Grid::new(0.0, 0.5, 256).unwrap();
        let f = SampledSignal::from_fn(0.0, 0.5, 256, |_| Complex64::new(0.0, 0.0)).unwrap();
        let c = analyze_scale(&f, 0).unwrap();
        assert!(c.iter().all(|(_, _, v)| v == Complex64::new(0.0, 0.0)));
        let tiles = [Tile::frame(0, 1, 18)];
        let t = analyze(&f, &tiles, PacketFamily::Frame).unwrap();
        assert_eq!(t.get(&tiles[0]), Some(Complex64::new(0.0, 0.0)));
        assert!(grid.period() > 0.0);
    }

    #[test]
    fn table_entries_regenerate_from_packets() {
        let grid = Grid::new(-64.0, 0.125, 2048).unwrap();
        let f = random_band_limited(&grid, 2.0, 11);
        let frame = [Tile::frame(0, 2, 18), Tile::frame(1, -3, 40), Tile::frame(-1, 5, -12)];
        let bump = [
            Tile::new(
                crate::grid::GridInterval::dyadic(1, 3),
                crate::grid::GridInterval::dyadic(-1, 1),
            )
            .unwrap(),
            Tile::new(
                crate::grid::GridInterval::dyadic(-2, -9),
                crate::grid::GridInterval::dyadic(2, -1),
            )
            .unwrap(),
        ];
        for (family, tiles) in [(PacketFamily::Frame, &frame[..]), (PacketFamily::Bump, &bump[..])] {
            let table = analyze(&f, tiles, family).unwrap();
            for t in tiles {
                let p = packet(family, t, &grid).unwrap();
                let direct = f.inner(&p).unwrap();
                assert!((table.get(t).unwrap() - direct).norm() < 1e-10 * f.l2_norm());
            }
        }
        let fast = analyze_scale(&f, 1).unwrap();
        let table = analyze(&f, &frame[1..2], PacketFamily::Frame).unwrap();
        assert!((fast.get(-3, 40).unwrap() - table.entries[0].value).norm() < 1e-12);
    }

    #[test]
    fn bump_packets_are_normalized_and_in_lower_half() {
        let grid = Grid::new(-32.0, 0.125, 1024).unwrap();
        let t = Tile::new(
            crate::grid::GridInterval::dyadic(0, 2),
            crate::grid::GridInterval::dyadic(0, 1),
        )
        .unwrap();
        let p = packet(PacketFamily::Bump, &t, &grid).unwrap();
        assert!((p.l2_norm() - 1.0).abs() < 1e-8);
        for k in 0..200 {
            let xi = 0.9 + k as f64 * 0.01;
            let v = packet_hat(PacketFamily::Bump, &t, xi).unwrap();
            if !(1.0..=1.5).contains(&xi) {
                assert_eq!(v, Complex64::new(0.0, 0.0));
            }
        }
    }
}
