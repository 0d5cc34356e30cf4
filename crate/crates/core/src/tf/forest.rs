//! Size of tile collections and greedy forest selection.
//!
//! Containment tests run on integer coordinates: every time endpoint is scaled by
//! `2^T` and every frequency endpoint by `lcm(moduli)·2^F`, so all comparisons are
//! exact. Energies are summed in ascending tile index, which makes the `f64` energy
//! of a subset never exceed that of a superset.

use std::collections::BTreeSet;
use std::io::Write;

use num_complex::Complex64;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use super::{CoefficientTable, Tile, TfError, Top, Tree};
use crate::grid::{rat_to_f64, GridInterval};

#[derive(Debug, Clone, Copy)]
struct Layout {
    t_shift: i32,
    f_shift: i32,
    lcm: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TileBox {
    t_lo: i128,
    t_hi: i128,
    f_lo: i128,
    f_mid: i128,
    f_hi: i128,
}

fn shl(x: i128, e: i32) -> Result<i128, TfError> {
    if !(0..=100).contains(&e) {
        return Err(TfError::Overflow);
    }
    x.checked_mul(1i128 << e).ok_or(TfError::Overflow)
}

impl Layout {
    fn time(&self, g: &GridInterval) -> Result<(i128, i128), TfError> {
        let lo = shl(g.index as i128, g.scale + self.t_shift)?;
        Ok((lo, lo + shl(1, g.scale + self.t_shift)?))
    }

    fn freq(&self, g: &GridInterval) -> Result<(i128, i128, i128), TfError> {
        // 2^s (index + offset/modulus), scaled by lcm·2^F
        let num = (g.index as i128 * g.modulus as i128 + g.offset as i128) * (self.lcm / g.modulus) as i128;
        let lo = shl(num, g.scale + self.f_shift)?;
        let len = shl(self.lcm as i128, g.scale + self.f_shift)?;
        Ok((lo, lo + len / 2, lo + len))
    }

    fn tile(&self, t: &Tile) -> Result<TileBox, TfError> {
        let (t_lo, t_hi) = self.time(&t.time)?;
        let (f_lo, f_mid, f_hi) = self.freq(&t.freq)?;
        Ok(TileBox {
            t_lo,
            t_hi,
            f_lo,
            f_mid,
            f_hi,
        })
    }
}

impl TileBox {
    fn time_inside(&self, top: &TileBox) -> bool {
        top.t_lo <= self.t_lo && self.t_hi <= top.t_hi
    }

    /// `self ≤ top`.
    fn below(&self, top: &TileBox) -> bool {
        self.time_inside(top) && self.f_lo <= top.f_lo && top.f_hi <= self.f_hi
    }

    /// Member of the 2-tree with top `top` (other than the top itself).
    fn in_two_tree(&self, top: &TileBox) -> bool {
        self.time_inside(top) && self.f_mid <= top.f_lo && top.f_hi <= self.f_hi
    }
}

/// Candidate tops of 2-trees for a finite tile set, with their member lists.
///
/// A 2-tree with top `T` at time scale `k` lies inside
/// `{s : I_s ⊆ I_T, ω_T ⊆ ω_{s,2}} ∪ {T}`, so `I_T` is a dyadic ancestor of some
/// `I_s` and `ω_T` a scale-`k` piece of `ω_{s,2}`, unless `T` itself is the only
/// member. Above `k = max(i_max + 1, k_span)` member sets stop growing while `|I_T|`
/// doubles, so larger tops never attain the supremum.
struct Collection {
    coeffs: Vec<f64>,
    tops: Vec<Tile>,
    top_box: Vec<TileBox>,
    top_len: Vec<f64>,
    members: Vec<Vec<u32>>,
    below: Vec<Vec<u32>>,
}

fn ancestor(g: &GridInterval, k: i32) -> GridInterval {
    let d = k - g.scale;
    GridInterval::dyadic(k, g.index.div_euclid(1i64 << d))
}

fn pieces(w: GridInterval, scale: i32, out: &mut Vec<GridInterval>) {
    if w.scale == scale {
        out.push(w);
    } else {
        let (a, b) = w.sons();
        pieces(a, scale, out);
        pieces(b, scale, out);
    }
}

fn span_scale(tiles: &[Tile], from: i32) -> Result<i32, TfError> {
    let mut k = from;
    loop {
        if tiles.iter().all(|t| {
            let a = ancestor(&t.time, k).index;
            a == 0 || a == -1
        }) {
            return Ok(k);
        }
        k += 1;
        if k > 62 {
            return Err(TfError::Overflow);
        }
    }
}

const MAX_CANDIDATES: usize = 2_000_000;

impl Collection {
    fn new(tiles: &[Tile], coeffs: &[Complex64]) -> Result<Self, TfError> {
        let mut seen = BTreeSet::new();
        for t in tiles {
            if !t.heisenberg() || t.time.modulus != 1 {
                return Err(TfError::Tile(t.to_string()));
            }
            if !seen.insert(*t) {
                return Err(TfError::Domain(format!("duplicate tile {t}")));
            }
        }
        let coeffs: Vec<f64> = coeffs.iter().map(|c| c.norm_sqr()).collect();
        if tiles.is_empty() {
            return Ok(Collection {
                coeffs,
                tops: Vec::new(),
                top_box: Vec::new(),
                top_len: Vec::new(),
                members: Vec::new(),
                below: Vec::new(),
            });
        }
        let i_min = tiles.iter().map(|t| t.time.scale).min().unwrap();
        let i_max = tiles.iter().map(|t| t.time.scale).max().unwrap();
        let k_max = (i_max + 1).max(span_scale(tiles, i_max)?);
        let mut cand: BTreeSet<Tile> = tiles.iter().copied().collect();
        for k in i_min + 1..=k_max {
            for t in tiles.iter().filter(|t| t.time.scale < k) {
                let time = ancestor(&t.time, k);
                let mut ws = Vec::new();
                pieces(t.half(2), -k, &mut ws);
                for w in ws {
                    cand.insert(Tile { time, freq: w });
                }
                if cand.len() > MAX_CANDIDATES {
                    return Err(TfError::Domain("too many candidate tops".into()));
                }
            }
        }
        let lcm = tiles.iter().fold(1i64, |a, t| a.lcm(&t.freq.modulus));
        let layout = Layout {
            t_shift: (-i_min).max(0),
            f_shift: k_max + 1,
            lcm,
        };
        let boxes = tiles
            .iter()
            .map(|t| layout.tile(t))
            .collect::<Result<Vec<_>, _>>()?;
        let tops: Vec<Tile> = cand.into_iter().collect();
        let top_box = tops
            .iter()
            .map(|t| layout.tile(t))
            .collect::<Result<Vec<_>, _>>()?;
        let top_len = tops.iter().map(|t| 2f64.powi(t.time.scale)).collect();
        let lists: Vec<(Vec<u32>, Vec<u32>)> = {
            use rayon::prelude::*;
            top_box
                .par_iter()
                .zip(tops.par_iter())
                .map(|(tb, top)| {
                    let mut members = Vec::new();
                    let mut below = Vec::new();
                    for (idx, (b, t)) in boxes.iter().zip(tiles).enumerate() {
                        if t == top || b.in_two_tree(tb) {
                            members.push(idx as u32);
                        }
                        if b.below(tb) {
                            below.push(idx as u32);
                        }
                    }
                    (members, below)
                })
                .collect()
        };
        let (members, below) = lists.into_iter().unzip();
        Ok(Collection {
            coeffs,
            tops,
            top_box,
            top_len,
            members,
            below,
        })
    }

    fn energy(&self, c: usize, alive: &[bool]) -> f64 {
        let mut e = 0.0;
        for &i in &self.members[c] {
            if alive[i as usize] {
                e += self.coeffs[i as usize];
            }
        }
        e
    }

    /// `size²` over the alive tiles and the candidate attaining it (first in order).
    fn size_sq(&self, alive: &[bool]) -> (f64, Option<usize>) {
        let mut best = (0.0, None);
        for c in 0..self.tops.len() {
            let r = self.energy(c, alive) / self.top_len[c];
            if r > best.0 {
                best = (r, Some(c));
            }
        }
        best
    }

    /// Among tops with `size² >= threshold`: lowest frequency, then leftmost, then longest.
    fn pick(&self, alive: &[bool], threshold: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for c in 0..self.tops.len() {
            let e = self.energy(c, alive);
            if e == 0.0 || e / self.top_len[c] < threshold {
                continue;
            }
            let key = |c: usize| {
                let b = &self.top_box[c];
                (b.f_lo, b.t_lo, -(b.t_hi - b.t_lo))
            };
            if best.is_none_or(|(b, _)| key(c) < key(b)) {
                best = Some((c, e));
            }
        }
        best
    }
}

/// `(Σ_{s∈T} |⟨f,φ_s⟩|² / |I_T|)^{1/2}` for a single tree.
pub fn tree_size(tree: &Tree, coeffs: &CoefficientTable) -> Result<f64, TfError> {
    let len = rat_to_f64(&tree.top_interval().len());
    let e: f64 = coeffs
        .values_for(&tree.members)?
        .iter()
        .map(|c| c.norm_sqr())
        .sum();
    Ok((e / len).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub size: f64,
    /// A top attaining the supremum, if the size is positive.
    pub top: Option<Tile>,
    pub energy: f64,
    pub candidates: usize,
}

/// `size(S') = sup_T (|I_T|^{-1} Σ_{s∈T} |⟨f,φ_s⟩|²)^{1/2}` over all 2-trees `T ⊆ S'`.
pub fn collection_size(tiles: &[Tile], coeffs: &CoefficientTable) -> Result<SizeReport, TfError> {
    let c = Collection::new(tiles, &coeffs.values_for(tiles)?)?;
    let alive = vec![true; tiles.len()];
    let (s2, top) = c.size_sq(&alive);
    Ok(SizeReport {
        size: s2.sqrt(),
        top: top.map(|t| c.tops[t]),
        energy: top.map_or(0.0, |t| c.energy(t, &alive)),
        candidates: c.tops.len(),
    })
}

/// `size²` of the tiles at `idx`, summing in ascending index.
fn subset_size_sq(tiles: &[Tile], coeffs: &[Complex64], idx: &[usize]) -> Result<f64, TfError> {
    let mut idx = idx.to_vec();
    idx.sort_unstable();
    let t: Vec<Tile> = idx.iter().map(|&i| tiles[i]).collect();
    let c: Vec<Complex64> = idx.iter().map(|&i| coeffs[i]).collect();
    let col = Collection::new(&t, &c)?;
    Ok(col.size_sq(&vec![true; t.len()]).0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedTree {
    pub n: i32,
    pub top: Tile,
    /// Indices into the input tile list, ascending.
    pub members: Vec<usize>,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestLevel {
    pub n: i32,
    pub trees: Vec<SelectedTree>,
    /// `Σ_{T∈F_n} |I_T|`.
    pub top_length: f64,
    /// `Σ_{T∈F_n} |I_T| / (2^{2n} ‖f‖₂²)`.
    pub counting_constant: f64,
}

impl ForestLevel {
    pub fn tiles(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.trees.iter().flat_map(|t| t.members.iter().copied()).collect();
        v.sort_unstable();
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestSelection {
    /// `Δ = floor(-log₂ size(S'))`, absent when the size is zero.
    pub delta: Option<i32>,
    pub levels: Vec<ForestLevel>,
    /// Tiles with zero coefficient that no selected tree absorbed.
    pub null: Vec<usize>,
    pub candidates: usize,
}

/// Largest `n` with `s2 <= 4^{-n}`.
fn level_of(s2: f64) -> i32 {
    let mut n = (-0.5 * s2.log2()).floor() as i32;
    while s2 > 4f64.powi(-n) {
        n -= 1;
    }
    while s2 <= 4f64.powi(-(n + 1)) {
        n += 1;
    }
    n
}

/// Greedy decomposition `S' = ⋃_{n≥Δ} P_n`: at level `n`, while the remaining size
/// exceeds `2^{-n-1}`, select a 2-tree of size at least `2^{-n-1}` and remove every
/// remaining tile below its top into `P_n`.
pub fn select_forest(
    tiles: &[Tile],
    coeffs: &CoefficientTable,
    f_norm_sq: f64,
) -> Result<ForestSelection, TfError> {
    let col = Collection::new(tiles, &coeffs.values_for(tiles)?)?;
    let mut alive = vec![true; tiles.len()];
    let (s2, _) = col.size_sq(&alive);
    let mut levels = Vec::new();
    let delta = if s2 > 0.0 { Some(level_of(s2)) } else { None };
    if let Some(mut n) = delta {
        loop {
            let threshold = 4f64.powi(-(n + 1));
            let mut trees = Vec::new();
            while col.size_sq(&alive).0 > threshold {
                let (c, energy) = col.pick(&alive, threshold).expect("size attained by a candidate");
                let mut members = Vec::new();
                for &i in &col.below[c] {
                    if alive[i as usize] {
                        alive[i as usize] = false;
                        members.push(i as usize);
                    }
                }
                trees.push(SelectedTree {
                    n,
                    top: col.tops[c],
                    members,
                    energy,
                });
            }
            let top_length: f64 = trees.iter().map(|t| 2f64.powi(t.top.time.scale)).sum();
            levels.push(ForestLevel {
                n,
                counting_constant: top_length / (4f64.powi(n) * f_norm_sq),
                trees,
                top_length,
            });
            if col.size_sq(&alive).0 == 0.0 {
                break;
            }
            n += 1;
        }
    }
    let null = (0..tiles.len()).filter(|&i| alive[i]).collect();
    Ok(ForestSelection {
        delta,
        levels,
        null,
        candidates: col.tops.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionCheck {
    pub partition: bool,
    pub trees_below_tops: bool,
    /// `(n, recomputed size(P_n))`.
    pub level_sizes: Vec<(i32, f64)>,
    pub sizes_bounded: bool,
}

impl SelectionCheck {
    pub fn ok(&self) -> bool {
        self.partition && self.trees_below_tops && self.sizes_bounded
    }
}

impl ForestSelection {
    /// Recomputes the partition, the tree structure and `size(P_n) <= 2^{-n}`.
    pub fn verify(&self, tiles: &[Tile], coeffs: &CoefficientTable) -> Result<SelectionCheck, TfError> {
        let values = coeffs.values_for(tiles)?;
        let mut count = vec![0usize; tiles.len()];
        let mut trees_ok = true;
        for level in &self.levels {
            for t in &level.trees {
                for &i in &t.members {
                    count[i] += 1;
                    trees_ok &= super::tile_le(&tiles[i], &t.top);
                }
            }
        }
        for &i in &self.null {
            count[i] += 1;
            trees_ok &= values[i] == Complex64::new(0.0, 0.0);
        }
        let mut level_sizes = Vec::new();
        let mut bounded = true;
        for level in &self.levels {
            let s2 = subset_size_sq(tiles, &values, &level.tiles())?;
            bounded &= s2 <= 4f64.powi(-level.n);
            level_sizes.push((level.n, s2.sqrt()));
        }
        Ok(SelectionCheck {
            partition: count.iter().all(|&c| c == 1),
            trees_below_tops: trees_ok,
            level_sizes,
            sizes_bounded: bounded,
        })
    }

    pub fn trees(&self) -> impl Iterator<Item = &SelectedTree> {
        self.levels.iter().flat_map(|l| l.trees.iter())
    }

    /// One JSON object per tree: level, top and member indices.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), TfError> {
        for t in self.trees() {
            serde_json::to_writer(&mut out, t)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str) -> Result<Vec<SelectedTree>, TfError> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| Ok(serde_json::from_str(l)?))
            .collect()
    }

    /// The selected trees as `Tree` values.
    pub fn as_trees(&self, tiles: &[Tile]) -> Vec<Tree> {
        self.trees()
            .map(|t| Tree {
                top: Top::Tile(t.top),
                members: t.members.iter().map(|&i| tiles[i]).collect(),
                flavor: super::Flavor::Tree,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tf::{Flavor, PacketFamily, TileCoefficient};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(entries: &[(Tile, f64)]) -> CoefficientTable {
        CoefficientTable::from_entries(
            PacketFamily::Bump,
            entries
                .iter()
                .map(|&(tile, v)| TileCoefficient {
                    tile,
                    value: Complex64::new(v, 0.0),
                })
                .collect(),
        )
    }

    fn tile(i: i32, m: i64, w: i64) -> Tile {
        Tile::new(GridInterval::dyadic(i, m), GridInterval::dyadic(-i, w)).unwrap()
    }

    /// Random tiles in `[0, 16)` with scales 0..=3 and frequencies in `[0, 4)`.
    fn random_instance(seed: u64, n: usize) -> (Vec<Tile>, CoefficientTable) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut set = BTreeSet::new();
        while set.len() < n {
            let i = rng.gen_range(0..=3);
            let m = rng.gen_range(0..(16 >> i));
            let w = rng.gen_range(0..(4i64 << i));
            set.insert(tile(i, m, w));
        }
        let tiles: Vec<Tile> = set.into_iter().collect();
        let entries: Vec<(Tile, f64)> = tiles.iter().map(|&t| (t, rng.gen_range(-1.0..1.0))).collect();
        (tiles, table(&entries))
    }

    /// Exhaustive 2-tree size: every top at scales `i_min..=k_max` meeting the tiles.
    fn brute_size_sq(tiles: &[Tile], coeffs: &CoefficientTable) -> f64 {
        let mut best: f64 = 0.0;
        for k in 0..=6 {
            for m in -1..(64 >> k) {
                for w in -2..(2i64 << k) + 2 {
                    let top = Tile::new(GridInterval::dyadic(k, m), GridInterval::dyadic(-k, w)).unwrap();
                    let e: f64 = tiles
                        .iter()
                        .filter(|s| {
                            **s == top
                                || (top.interval().contains(&s.interval())
                                    && s.half(2).interval().contains(&top.omega()))
                        })
                        .map(|s| coeffs.get(s).unwrap().norm_sqr())
                        .sum();
                    best = best.max(e / 2f64.powi(k));
                }
            }
        }
        best
    }

    #[test]
    fn single_tile_size() {
        let s = tile(2, 1, 3);
        let t = table(&[(s, 0.3)]);
        let r = collection_size(&[s], &t).unwrap();
        assert!((r.size - 0.3 / 2.0).abs() < 1e-15);
        let tree = Tree {
            top: Top::Tile(s),
            members: vec![s],
            flavor: Flavor::TwoTree,
        };
        assert!((tree_size(&tree, &t).unwrap() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn stacked_tiles_size() {
        // top [0,1]×[1,2], a finer tile below it in the 2-tree
        let top = tile(0, 0, 1);
        let below = Tile::new(GridInterval::dyadic(-1, 0), GridInterval::dyadic(1, 0)).unwrap();
        assert!(below.half(2).interval().contains(&top.omega()));
        let c = 0.4;
        let t = table(&[(top, c), (below, c)]);
        let r = collection_size(&[top, below], &t).unwrap();
        assert!((r.size - 2f64.sqrt() * c).abs() < 1e-15);
    }

    #[test]
    fn size_matches_exhaustive_search() {
        for seed in 0..6 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let mut set = BTreeSet::new();
            while set.len() < 12 {
                let i = rng.gen_range(0..=2);
                let m = rng.gen_range(0..(8 >> i));
                let w = rng.gen_range(0..(2i64 << i));
                set.insert(tile(i, m, w));
            }
            let tiles: Vec<Tile> = set.into_iter().collect();
            let entries: Vec<(Tile, f64)> = tiles.iter().map(|&t| (t, rng.gen_range(-1.0..1.0))).collect();
            let t = table(&entries);
            let fast = collection_size(&tiles, &t).unwrap().size.powi(2);
            let brute = brute_size_sq(&tiles, &t);
            assert!((fast - brute).abs() <= 1e-14 * brute.max(1e-300), "{seed}: {fast} vs {brute}");
        }
    }

    #[test]
    fn single_tile_forest() {
        let s = tile(0, 3, 1);
        let t = table(&[(s, 0.3)]);
        let f = select_forest(&[s], &t, 1.0).unwrap();
        // size 0.3 lies in (2^{-2}, 2^{-1}]
        assert_eq!(f.delta, Some(1));
        let trees: Vec<_> = f.trees().collect();
        assert_eq!(trees.len(), 1);
        assert_eq!(trees[0].n, 1);
        assert_eq!(trees[0].members, vec![0]);
        assert!(f.verify(&[s], &t).unwrap().ok());
    }

    #[test]
    fn zero_coefficients_give_empty_forests() {
        let (tiles, _) = random_instance(4, 30);
        let zero: Vec<(Tile, f64)> = tiles.iter().map(|&t| (t, 0.0)).collect();
        let t = table(&zero);
        let f = select_forest(&tiles, &t, 1.0).unwrap();
        assert_eq!(f.delta, None);
        assert!(f.levels.is_empty());
        assert_eq!(f.null.len(), tiles.len());
        assert!(f.verify(&tiles, &t).unwrap().ok());
    }

    #[test]
    fn random_selection_is_a_bounded_partition() {
        for seed in 0..5 {
            let (tiles, t) = random_instance(seed, 200);
            let energy: f64 = t.entries.iter().map(|e| e.value.norm_sqr()).sum();
            let f = select_forest(&tiles, &t, energy).unwrap();
            let check = f.verify(&tiles, &t).unwrap();
            assert!(check.ok(), "{seed}: {check:?}");
            for (n, s) in &check.level_sizes {
                assert!(*s <= 2f64.powi(-n));
            }
            for tree in f.as_trees(&tiles) {
                tree.check().unwrap();
            }
        }
    }

    #[test]
    fn selection_is_deterministic_and_round_trips() {
        let (tiles, t) = random_instance(9, 80);
        let a = select_forest(&tiles, &t, 1.0).unwrap();
        let b = select_forest(&tiles, &t, 1.0).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_jsonl(&mut buf).unwrap();
        let back = ForestSelection::read_jsonl(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, a.trees().cloned().collect::<Vec<_>>());
    }

    #[test]
    fn duplicate_tiles_are_rejected() {
        let s = tile(0, 0, 0);
        let t = table(&[(s, 1.0)]);
        assert!(collection_size(&[s, s], &t).is_err());
    }
}
