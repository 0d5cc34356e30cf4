//! Tiles, the tile order, trees and quasitrees.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::TfError;
use crate::grid::{pow2, rat_floor, GridInterval, RatInterval, Rational};

/// `s = I_s × ω_s` with `I_s` a standard dyadic interval and `|I_s|·|ω_s| = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tile {
    pub time: GridInterval,
    pub freq: GridInterval,
}

/// `ω_{i,l} = [2^{-i}(l-18)/41, 2^{-i}((l-18)/41 + 1)]`.
pub fn tile_omega(i: i32, l: i64) -> GridInterval {
    GridInterval::new(-i, 0, l - 18, 41).expect("41 is a valid modulus")
}

impl Tile {
    pub fn new(time: GridInterval, freq: GridInterval) -> Result<Self, TfError> {
        if time.modulus != 1 || time.offset != 0 {
            return Err(TfError::Tile(format!("time interval {time} is not standard dyadic")));
        }
        if time.scale.checked_add(freq.scale) != Some(0) {
            return Err(TfError::Tile(format!("|I|·|ω| = 2^{}", time.scale + freq.scale)));
        }
        Ok(Tile { time, freq })
    }

    /// `I = [2^i m, 2^i (m+1)]`, `ω = ω_{i,l}`.
    pub fn frame(i: i32, m: i64, l: i64) -> Self {
        Tile {
            time: GridInterval::dyadic(i, m),
            freq: tile_omega(i, l),
        }
    }

    /// `(i, m, l)` when the tile is a frame tile.
    pub fn frame_params(&self) -> Option<(i32, i64, i64)> {
        if self.freq.modulus != 41 || self.time.modulus != 1 {
            return None;
        }
        let l = 41 * self.freq.index + self.freq.offset + 18;
        Some((self.time.scale, self.time.index, l))
    }

    pub fn heisenberg(&self) -> bool {
        self.time.length() * self.freq.length() == Rational::one()
    }

    pub fn interval(&self) -> RatInterval {
        self.time.interval()
    }

    pub fn omega(&self) -> RatInterval {
        self.freq.interval()
    }

    /// `ω_{s,1}` (lower half) or `ω_{s,2}` (upper half).
    pub fn half(&self, which: u8) -> GridInterval {
        let (a, b) = self.freq.sons();
        if which == 1 {
            a
        } else {
            b
        }
    }
}

impl fmt::Display for Tile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} × {}", self.time, self.freq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileOrder {
    Equal,
    /// `s ≤ s'`: `I_s ⊆ I_{s'}` and `ω_{s'} ⊆ ω_s`.
    Le,
    Ge,
    Incomparable,
}

pub fn tile_le(a: &Tile, b: &Tile) -> bool {
    b.interval().contains(&a.interval()) && a.omega().contains(&b.omega())
}

pub fn tile_order(a: &Tile, b: &Tile) -> TileOrder {
    if a == b {
        TileOrder::Equal
    } else if tile_le(a, b) {
        TileOrder::Le
    } else if tile_le(b, a) {
        TileOrder::Ge
    } else {
        TileOrder::Incomparable
    }
}

/// A rational whose reduced denominator has a factor 3, hence not dyadic.
pub fn is_non_dyadic(x: &Rational) -> bool {
    x.denom().is_multiple_of(&BigInt::from(3))
}

/// Top `(I_T, ξ_T)` of a quasitree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuasiTop {
    pub interval: RatInterval,
    pub xi: Rational,
}

impl QuasiTop {
    pub fn new(interval: RatInterval, xi: Rational) -> Result<Self, TfError> {
        if !is_non_dyadic(&xi) {
            return Err(TfError::Domain(format!("ξ_T = {xi} must have a factor 3 in its denominator")));
        }
        Ok(QuasiTop { interval, xi })
    }

    /// `(I_T, left(ω_T) + |ω_T|/3)`, a point of `ω_{T,1}`.
    pub fn of_tile(t: &Tile) -> Self {
        let xi = t.freq.left() + t.freq.length() / Rational::from_integer(BigInt::from(3));
        QuasiTop {
            interval: t.interval(),
            xi,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct QuasiTopRepr {
    lo: String,
    hi: String,
    xi: String,
}

fn parse_rat(s: &str) -> Result<Rational, String> {
    s.parse::<Rational>().map_err(|e| format!("{s}: {e}"))
}

impl Serialize for QuasiTop {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        QuasiTopRepr {
            lo: self.interval.lo.to_string(),
            hi: self.interval.hi.to_string(),
            xi: self.xi.to_string(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuasiTop {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let r = QuasiTopRepr::deserialize(d)?;
        let lo = parse_rat(&r.lo).map_err(D::Error::custom)?;
        let hi = parse_rat(&r.hi).map_err(D::Error::custom)?;
        let xi = parse_rat(&r.xi).map_err(D::Error::custom)?;
        if lo > hi {
            return Err(D::Error::custom("interval endpoints out of order"));
        }
        QuasiTop::new(RatInterval::new(lo, hi), xi).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Top {
    Tile(Tile),
    Quasi(QuasiTop),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flavor {
    #[serde(rename = "tree")]
    Tree,
    #[serde(rename = "quasitree")]
    Quasitree,
    #[serde(rename = "1-tree")]
    OneTree,
    #[serde(rename = "2-tree")]
    TwoTree,
    #[serde(rename = "1-quasitree")]
    OneQuasitree,
    #[serde(rename = "2-quasitree")]
    TwoQuasitree,
}

impl Flavor {
    fn half(self) -> Option<u8> {
        match self {
            Flavor::OneTree | Flavor::OneQuasitree => Some(1),
            Flavor::TwoTree | Flavor::TwoQuasitree => Some(2),
            _ => None,
        }
    }

    fn is_quasi(self) -> bool {
        matches!(self, Flavor::Quasitree | Flavor::OneQuasitree | Flavor::TwoQuasitree)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tree {
    pub top: Top,
    pub members: Vec<Tile>,
    pub flavor: Flavor,
}

impl Tree {
    pub fn top_interval(&self) -> RatInterval {
        match &self.top {
            Top::Tile(t) => t.interval(),
            Top::Quasi(q) => q.interval.clone(),
        }
    }

    /// Checks the membership and flavor conditions for every member.
    pub fn check(&self) -> Result<(), TfError> {
        let bad = |s: &Tile, why: &str| Err(TfError::Domain(format!("member {s}: {why}")));
        match (&self.top, self.flavor.is_quasi()) {
            (Top::Tile(t), false) => {
                for s in &self.members {
                    if !tile_le(s, t) {
                        return bad(s, "not below the top");
                    }
                    if s == t {
                        continue;
                    }
                    if let Some(h) = self.flavor.half() {
                        if !s.half(h).interval().contains(&t.omega()) {
                            return bad(s, "top frequency not in the required half");
                        }
                    }
                }
                Ok(())
            }
            (Top::Quasi(q), true) => {
                for s in &self.members {
                    if !q.interval.contains(&s.interval()) || !s.omega().contains_point(&q.xi) {
                        return bad(s, "not in the quasitree");
                    }
                    if let Some(h) = self.flavor.half() {
                        if !s.half(h).interval().contains_point(&q.xi) {
                            return bad(s, "ξ_T not in the required half");
                        }
                    }
                }
                Ok(())
            }
            _ => Err(TfError::Domain("flavor does not match the top".into())),
        }
    }
}

/// Splits a quasitree into `{ξ_T ∈ ω_{s,1}}` and `{ξ_T ∈ ω_{s,2}}`.
pub fn standard_decomposition(tree: &Tree) -> Result<(Tree, Tree), TfError> {
    let Top::Quasi(q) = &tree.top else {
        return Err(TfError::Domain("standard decomposition needs a quasitree top".into()));
    };
    if !is_non_dyadic(&q.xi) {
        return Err(TfError::Domain(format!("ξ_T = {} is dyadic", q.xi)));
    }
    let mut one = Vec::new();
    let mut two = Vec::new();
    for s in &tree.members {
        let lower = s.half(1).interval();
        let upper = s.half(2).interval();
        match (lower.contains_point(&q.xi), upper.contains_point(&q.xi)) {
            (true, false) => one.push(*s),
            (false, true) => two.push(*s),
            (true, true) => {
                return Err(TfError::Domain(format!("ξ_T is the midpoint of ω_s for {s}")))
            }
            (false, false) => return Err(TfError::Domain(format!("ξ_T ∉ ω_s for {s}"))),
        }
    }
    let mk = |members, flavor| Tree {
        top: tree.top.clone(),
        members,
        flavor,
    };
    Ok((mk(one, Flavor::OneQuasitree), mk(two, Flavor::TwoQuasitree)))
}

/// `G(T) = {s ∈ P : ω_T ⊆ ω_s}`.
pub fn saturation(ambient: &[Tile], top: &Tile) -> Vec<Tile> {
    let w = top.omega();
    ambient.iter().filter(|s| s.omega().contains(&w)).copied().collect()
}

/// `J_m = 2^l I_T + 2^l m |I_T|`.
pub fn band_interval(top: &RatInterval, l: u32, m: i64) -> RatInterval {
    let f = pow2(l as i32);
    let j0 = top.dilate(&f);
    j0.shift(&(Rational::from_integer(BigInt::from(m)) * f * top.len()))
}

/// The two membership rules of `T_{l,m}`.
pub fn in_tlm(s: &Tile, top: &RatInterval, l: u32, m: i64) -> bool {
    let i = s.interval();
    let half = i.len() / Rational::from_integer(BigInt::from(2));
    let here = i.overlap(&band_interval(top, l, m));
    let before = i.overlap(&band_interval(top, l, m - 1));
    here >= half && (here != half || before != half)
}

/// The unique `m` with `s ∈ T_{l,m}`, or `None` if `|I_s| > 2^l|I_T|`.
pub fn tlm_index(s: &Tile, top: &RatInterval, l: u32) -> Option<i64> {
    let j0 = band_interval(top, l, 0);
    let w = j0.len();
    if s.interval().len() > w {
        return None;
    }
    let guess = rat_floor(&((s.interval().center() - &j0.lo) / &w)).to_i64()?;
    (guess - 1..=guess + 1).find(|&m| in_tlm(s, top, l, m))
}

/// `{T_{l,m}}_m` for the saturation of `top` in `ambient`, each with top
/// `(2 × J_m, ξ_T)`.
pub fn tlm_partition(ambient: &[Tile], top: &Tile, l: u32) -> Result<BTreeMap<i64, Tree>, TfError> {
    let q = QuasiTop::of_tile(top);
    let two = Rational::from_integer(BigInt::from(2));
    let mut out: BTreeMap<i64, Tree> = BTreeMap::new();
    for s in saturation(ambient, top) {
        let m = tlm_index(&s, &q.interval, l)
            .ok_or_else(|| TfError::Domain(format!("{s} is wider than 2^l I_T")))?;
        out.entry(m)
            .or_insert_with(|| Tree {
                top: Top::Quasi(QuasiTop {
                    interval: band_interval(&q.interval, l, m).dilate(&two),
                    xi: q.xi.clone(),
                }),
                members: Vec::new(),
                flavor: Flavor::Quasitree,
            })
            .members
            .push(s);
    }
    Ok(out)
}

/// `N_F(x) = Σ_T 1_{I_T}(x)`, with half-open `I_T = [a, b)`.
pub fn counting_function(tops: &[RatInterval], x: &Rational) -> usize {
    tops.iter().filter(|t| &t.lo <= x && x < &t.hi).count()
}

/// `∫ N_F` computed from the step function between consecutive endpoints.
pub fn counting_integral(tops: &[RatInterval]) -> Rational {
    let mut pts: Vec<Rational> = tops.iter().flat_map(|t| [t.lo.clone(), t.hi.clone()]).collect();
    pts.sort();
    pts.dedup();
    let mut total = Rational::zero();
    for w in pts.windows(2) {
        let n = counting_function(tops, &w[0]);
        total += (&w[1] - &w[0]) * Rational::from_integer(BigInt::from(n));
    }
    total
}

/// Exact `|I|` as a positive rational, for summing top lengths.
pub fn total_length(tops: &[RatInterval]) -> Rational {
    tops.iter().map(|t| t.len().abs()).fold(Rational::zero(), |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::rat;
    use proptest::prelude::*;

    fn dy(s: i32, i: i64) -> GridInterval {
        GridInterval::dyadic(s, i)
    }

    #[test]
    fn omega_at_the_reference_shift_is_the_unit_interval() {
        let w = tile_omega(0, 18);
        assert_eq!(w.interval(), RatInterval::new(rat(0, 1), rat(1, 1)));
    }

    #[test]
    fn packet_supports_land_in_the_halves() {
        for i in -3..=3 {
            for l in -50..=50 {
                let t = Tile::frame(i, 0, l);
                let s = pow2(-i);
                let xi = RatInterval::new(rat(l, 41) * &s, rat(l + 2, 41) * &s);
                assert!(t.half(1).interval().contains(&xi), "{i} {l}");
                let theta = RatInterval::new(
                    (rat(l, 41) + rat(1, 16)) * &s,
                    (rat(l + 2, 41) + rat(3, 8)) * &s,
                );
                assert!(t.half(2).interval().contains(&theta), "{i} {l}");
            }
        }
    }

    #[test]
    fn heisenberg_holds_and_is_enforced() {
        assert!(Tile::frame(3, -2, 100).heisenberg());
        assert!(Tile::new(dy(1, 0), dy(0, 0)).is_err());
        assert!(Tile::new(tile_omega(0, 0), dy(0, 0)).is_err());
        assert_eq!(Tile::frame(2, 5, 77).frame_params(), Some((2, 5, 77)));
    }

    #[test]
    fn order_examples() {
        let s = Tile::new(dy(0, 0), dy(0, 0)).unwrap();
        assert_eq!(tile_order(&s, &s), TileOrder::Equal);
        let finer = Tile::new(dy(-1, 0), dy(1, 0)).unwrap();
        assert_eq!(tile_order(&finer, &s), TileOrder::Le);
        assert_eq!(tile_order(&s, &finer), TileOrder::Ge);
        let other = Tile::new(dy(0, 0), dy(0, 3)).unwrap();
        assert_eq!(tile_order(&s, &other), TileOrder::Incomparable);
    }

    #[test]
    fn decomposition_of_single_tiles() {
        let s = Tile::new(dy(0, 0), dy(0, 0)).unwrap();
        let mk = |xi| Tree {
            top: Top::Quasi(QuasiTop::new(s.interval(), xi).unwrap()),
            members: vec![s],
            flavor: Flavor::Quasitree,
        };
        let (a, b) = standard_decomposition(&mk(rat(1, 3))).unwrap();
        assert_eq!((a.members.len(), b.members.len()), (1, 0));
        let (a, b) = standard_decomposition(&mk(rat(2, 3))).unwrap();
        assert_eq!((a.members.len(), b.members.len()), (0, 1));
        assert!(QuasiTop::new(s.interval(), rat(1, 4)).is_err());
    }

    #[test]
    fn mixed_quasitree_split_is_exact() {
        // ξ_T = 1/3 lies in ω_s for these nested frequency intervals
        let xi = rat(1, 3);
        let mut members = Vec::new();
        for k in 0..10 {
            let f = GridInterval::dyadic(-k, rat_floor(&(&xi * pow2(k))).to_i64().unwrap());
            members.push(Tile::new(dy(k, 0), f).unwrap());
        }
        let tree = Tree {
            top: Top::Quasi(QuasiTop::new(RatInterval::new(rat(0, 1), rat(1024, 1)), xi.clone()).unwrap()),
            members,
            flavor: Flavor::Quasitree,
        };
        tree.check().unwrap();
        let (a, b) = standard_decomposition(&tree).unwrap();
        assert_eq!(a.members.len() + b.members.len(), 10);
        assert!(!a.members.is_empty() && !b.members.is_empty());
        a.check().unwrap();
        b.check().unwrap();
        for s in &a.members {
            assert!(s.half(1).interval().contains_point(&xi));
        }
        for s in &b.members {
            assert!(s.half(2).interval().contains_point(&xi));
        }
    }

    #[test]
    fn top_tile_lands_in_the_one_quasitree() {
        let t = Tile::frame(2, 1, 30);
        let below = Tile::frame(1, 2, 18);
        let q = QuasiTop::of_tile(&t);
        let tree = Tree {
            top: Top::Quasi(q),
            members: vec![t, below],
            flavor: Flavor::Quasitree,
        };
        let (a, _) = standard_decomposition(&tree).unwrap();
        assert!(a.members.contains(&t));
    }

    #[test]
    fn lone_top_saturates_to_itself() {
        let t = Tile::new(dy(0, 0), dy(0, 0)).unwrap();
        let p = tlm_partition(&[t], &t, 0).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p[&0].members, vec![t]);
    }

    #[test]
    fn far_tile_index_tracks_its_offset() {
        let top = Tile::new(dy(2, 0), dy(-2, 1)).unwrap();
        let s = Tile::new(dy(0, 41), dy(0, 1)).unwrap();
        for l in 0..4u32 {
            let m = tlm_index(&s, &top.interval(), l).unwrap();
            // centre of I_s is 41.5, of I_T is 2
            let expect = ((41.5 - 2.0) / (4.0 * 2f64.powi(l as i32))).round() as i64;
            assert!((m - expect).abs() <= 1, "{l}: {m} vs {expect}");
            assert!(in_tlm(&s, &top.interval(), l, m));
        }
    }

    #[test]
    fn tie_goes_to_the_left_band() {
        // I_T = [0,1]; with l = 0 the bands are [m, m+1]; I_s = [1/2, 3/2] is impossible
        // for dyadic I_s, so use l = 1 where J_m = [-1/2 + 2m, 3/2 + 2m]
        let top = RatInterval::new(rat(0, 1), rat(1, 1));
        let s = Tile::new(dy(0, 1), dy(0, 0)).unwrap();
        assert!(in_tlm(&s, &top, 1, 0));
        assert!(!in_tlm(&s, &top, 1, 1));
    }

    #[test]
    fn counting_examples() {
        let x = rat(1, 4);
        assert_eq!(counting_function(&[], &x), 0);
        let tops = [
            RatInterval::new(rat(0, 1), rat(1, 1)),
            RatInterval::new(rat(0, 1), rat(1, 2)),
        ];
        assert_eq!(counting_function(&tops, &x), 2);
        assert_eq!(counting_integral(&tops), rat(3, 2));
    }

    fn arb_tile() -> impl Strategy<Value = Tile> {
        (-2i32..=2, -6i64..6, -4i64..4).prop_map(|(i, m, w)| {
            Tile::new(GridInterval::dyadic(i, m), GridInterval::dyadic(-i, w)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn tlm_partitions_the_saturation(
            tiles in prop::collection::vec(arb_tile(), 1..100),
            pick in 0usize..100,
            l in 0u32..4,
        ) {
            let top = tiles[pick % tiles.len()];
            let g = saturation(&tiles, &top);
            let parts = tlm_partition(&tiles, &top, l).unwrap();
            let total: usize = parts.values().map(|t| t.members.len()).sum();
            prop_assert_eq!(total, g.len());
            for (m, tree) in &parts {
                tree.check().unwrap();
                for s in &tree.members {
                    let hits: Vec<i64> = (m - 3..=m + 3)
                        .filter(|&k| in_tlm(s, &top.interval(), l, k))
                        .collect();
                    prop_assert_eq!(hits, vec![*m]);
                }
            }
        }

        #[test]
        fn counting_integral_is_total_length(
            tops in prop::collection::vec((-20i64..20, 1i64..16, 0i32..4), 0..30)
        ) {
            let tops: Vec<RatInterval> = tops
                .into_iter()
                .map(|(a, w, e)| RatInterval::new(rat(a, 1) * pow2(-e), (rat(a, 1) + rat(w, 1)) * pow2(-e)))
                .collect();
            prop_assert_eq!(counting_integral(&tops), total_length(&tops));
        }

        #[test]
        fn order_is_antisymmetric(a in arb_tile(), b in arb_tile()) {
            let ab = tile_order(&a, &b);
            let ba = tile_order(&b, &a);
            let flipped = match ab {
                TileOrder::Le => TileOrder::Ge,
                TileOrder::Ge => TileOrder::Le,
                o => o,
            };
            prop_assert_eq!(ba, flipped);
        }
    }
}
