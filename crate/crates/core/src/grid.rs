//! Exact dyadic and N-adic grids.
//!
//! An interval of a grid `G_{N,j,L}` is `[2^i (l + L/N), 2^i (l + L/N + 1)]`.
//! The standard dyadic grid is the case `N = 1`. All endpoint arithmetic is
//! carried out in arbitrary-precision rationals, so nestedness checks are
//! equality-exact.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("invalid grid modulus {0}: must be 1 or an odd integer >= 3")]
    InvalidModulus(i64),
    #[error("scale residue {residue} out of range for modulus {modulus}")]
    InvalidResidue { modulus: i64, residue: i64 },
    #[error("offset {offset} out of range [0, {modulus})")]
    InvalidOffset { modulus: i64, offset: i64 },
    #[error("enumeration would produce {count} intervals, above the limit of {limit}")]
    TooManyIntervals { count: u128, limit: usize },
}

/// `2^e` as an exact rational, for any sign of `e`.
pub fn pow2(e: i32) -> Rational {
    let two = BigInt::from(2);
    if e >= 0 {
        Rational::from_integer(num_traits::pow(two, e as usize))
    } else {
        Rational::new(BigInt::one(), num_traits::pow(two, (-e) as usize))
    }
}

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn rat_floor(r: &Rational) -> BigInt {
    r.numer().div_floor(r.denom())
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    // numerators may exceed f64 range in intermediate form; divide as f64 of reduced parts
    let n = r.numer().to_f64().unwrap_or(f64::NAN);
    let d = r.denom().to_f64().unwrap_or(f64::NAN);
    if n.is_finite() && d.is_finite() {
        n / d
    } else {
        // fall back to scaled division
        let shift = r.denom().bits().saturating_sub(60) as i32;
        let scaled = r.numer() >> shift as usize;
        let dscaled = r.denom() >> shift as usize;
        scaled.to_f64().unwrap_or(f64::NAN) / dscaled.to_f64().unwrap_or(f64::NAN)
    }
}

/// A closed interval with exact rational endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RatInterval {
    pub lo: Rational,
    pub hi: Rational,
}

impl RatInterval {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        debug_assert!(lo <= hi);
        RatInterval { lo, hi }
    }

    pub fn len(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn center(&self) -> Rational {
        (&self.lo + &self.hi) / Rational::from_integer(BigInt::from(2))
    }

    pub fn contains_point(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interior(&self, x: &Rational) -> bool {
        &self.lo < x && x < &self.hi
    }

    /// `other ⊆ self`.
    pub fn contains(&self, other: &RatInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Length of the intersection (zero when disjoint).
    pub fn overlap(&self, other: &RatInterval) -> Rational {
        let lo = if self.lo > other.lo { &self.lo } else { &other.lo };
        let hi = if self.hi < other.hi { &self.hi } else { &other.hi };
        if hi > lo {
            hi - lo
        } else {
            Rational::zero()
        }
    }

    /// Dilation by `factor` about the center.
    pub fn dilate(&self, factor: &Rational) -> RatInterval {
        let c = self.center();
        let half = self.len() * factor / Rational::from_integer(BigInt::from(2));
        RatInterval::new(&c - &half, &c + &half)
    }

    pub fn shift(&self, by: &Rational) -> RatInterval {
        RatInterval::new(&self.lo + by, &self.hi + by)
    }

    pub fn left_half(&self) -> RatInterval {
        RatInterval::new(self.lo.clone(), self.center())
    }

    pub fn right_half(&self) -> RatInterval {
        RatInterval::new(self.center(), self.hi.clone())
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (rat_to_f64(&self.lo), rat_to_f64(&self.hi))
    }
}

impl fmt::Display for RatInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

/// Outcome of comparing two intervals under the grid nestedness axiom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Interiors do not meet; a shared endpoint counts as disjoint.
    Disjoint,
    Equal,
    AInsideB,
    BInsideA,
    Violation,
}

pub fn relate(a: &RatInterval, b: &RatInterval) -> Relation {
    if a.hi <= b.lo || b.hi <= a.lo {
        return Relation::Disjoint;
    }
    match (a.lo.cmp(&b.lo), a.hi.cmp(&b.hi)) {
        (Ordering::Equal, Ordering::Equal) => Relation::Equal,
        (lo, hi) if lo != Ordering::Less && hi != Ordering::Greater => Relation::AInsideB,
        (lo, hi) if lo != Ordering::Greater && hi != Ordering::Less => Relation::BInsideA,
        _ => Relation::Violation,
    }
}

/// Interval `[2^scale (index + offset/modulus), 2^scale (index + offset/modulus + 1)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridInterval {
    pub scale: i32,
    pub index: i64,
    pub offset: i64,
    pub modulus: i64,
}

impl GridInterval {
    /// Builds an interval, folding `offset` into `[0, modulus)`.
    pub fn new(scale: i32, index: i64, offset: i64, modulus: i64) -> Result<Self, GridError> {
        check_modulus(modulus)?;
        let (q, r) = offset.div_mod_floor(&modulus);
        Ok(GridInterval {
            scale,
            index: index + q,
            offset: r,
            modulus,
        })
    }

    /// Standard dyadic interval `[2^scale·index, 2^scale·(index+1)]`.
    pub fn dyadic(scale: i32, index: i64) -> Self {
        GridInterval {
            scale,
            index,
            offset: 0,
            modulus: 1,
        }
    }

    pub fn left(&self) -> Rational {
        let num = BigInt::from(self.index) * BigInt::from(self.modulus) + BigInt::from(self.offset);
        Rational::new(num, BigInt::from(self.modulus)) * pow2(self.scale)
    }

    pub fn right(&self) -> Rational {
        self.left() + pow2(self.scale)
    }

    pub fn endpoints(&self) -> (Rational, Rational) {
        let a = self.left();
        let b = &a + pow2(self.scale);
        (a, b)
    }

    pub fn interval(&self) -> RatInterval {
        let (a, b) = self.endpoints();
        RatInterval::new(a, b)
    }

    pub fn length(&self) -> Rational {
        pow2(self.scale)
    }

    /// Left and right halves, both members of the same N-adic family one scale down.
    pub fn sons(&self) -> (GridInterval, GridInterval) {
        // 2^i (l + L/N) = 2^{i-1} (2l + 2L/N)
        let twice = 2 * self.offset;
        let (q, r) = twice.div_mod_floor(&self.modulus);
        let left = GridInterval {
            scale: self.scale - 1,
            index: 2 * self.index + q,
            offset: r,
            modulus: self.modulus,
        };
        let right = GridInterval {
            index: left.index + 1,
            ..left
        };
        (left, right)
    }

    /// The unique interval one scale up in the same lattice family containing `self`,
    /// provided the offset at the parent scale is `parent_offset`.
    pub fn parent_with_offset(&self, parent_offset: i64) -> GridInterval {
        let parent_scale = self.scale + 1;
        let x = self.left() / pow2(parent_scale) - rat(parent_offset, self.modulus);
        let idx = rat_floor(&x).to_i64().expect("index overflow");
        GridInterval {
            scale: parent_scale,
            index: idx,
            offset: parent_offset,
            modulus: self.modulus,
        }
    }

    pub fn to_f64(&self) -> (f64, f64) {
        self.interval().to_f64()
    }
}

impl fmt::Display for GridInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.interval())
    }
}

fn check_modulus(n: i64) -> Result<(), GridError> {
    if n == 1 || (n >= 3 && n % 2 == 1) {
        Ok(())
    } else {
        Err(GridError::InvalidModulus(n))
    }
}

/// `G_{N,j,L}` (or its saturation), or the standard grid when `N = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "N")]
    pub modulus: i64,
    pub j: i64,
    #[serde(rename = "L")]
    pub offset: i64,
    #[serde(default)]
    pub saturated: bool,
}

impl GridSpec {
    pub fn standard() -> Self {
        GridSpec {
            modulus: 1,
            j: 0,
            offset: 0,
            saturated: true,
        }
    }

    pub fn new(modulus: i64, j: i64, offset: i64, saturated: bool) -> Result<Self, GridError> {
        let spec = GridSpec {
            modulus,
            j,
            offset,
            saturated,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        check_modulus(self.modulus)?;
        if self.modulus == 1 {
            if self.j != 0 {
                return Err(GridError::InvalidResidue {
                    modulus: 1,
                    residue: self.j,
                });
            }
        } else if self.j < 0 || self.j >= self.modulus - 1 {
            return Err(GridError::InvalidResidue {
                modulus: self.modulus,
                residue: self.j,
            });
        }
        if self.offset < 0 || self.offset >= self.modulus {
            return Err(GridError::InvalidOffset {
                modulus: self.modulus,
                offset: self.offset,
            });
        }
        Ok(())
    }

    pub fn is_standard(&self) -> bool {
        self.modulus == 1
    }

    /// Whether `scale` is one of the defining scales `i ≡ j (mod N-1)`.
    pub fn is_base_scale(&self, scale: i32) -> bool {
        if self.modulus == 1 {
            return true;
        }
        (scale as i64 - self.j).rem_euclid(self.modulus - 1) == 0
    }

    /// Lattice offset (numerator over `N`) of the member intervals at `scale`, or `None`
    /// when the grid has no intervals at that scale.
    ///
    /// Descendant scales of the saturated grid inherit the offset of the nearest base
    /// scale above, shifted by the dyadic refinement: `2^{s'-i} L mod N`.
    pub fn offset_at_scale(&self, scale: i32) -> Option<i64> {
        if self.modulus == 1 {
            return Some(0);
        }
        if self.is_base_scale(scale) {
            return Some(self.offset);
        }
        if !self.saturated {
            return None;
        }
        let period = self.modulus - 1;
        let up = (self.j - scale as i64).rem_euclid(period);
        // 2^up * L mod N
        let mut v = self.offset % self.modulus;
        for _ in 0..up {
            v = (2 * v) % self.modulus;
        }
        Some(v)
    }

    /// Arithmetic membership test; saturation is decided without materializing descendants.
    pub fn contains(&self, w: &GridInterval) -> bool {
        let Some(off) = self.offset_at_scale(w.scale) else {
            return false;
        };
        let t = w.left() / pow2(w.scale) - rat(off, self.modulus);
        t.is_integer()
    }

    pub fn interval_at(&self, scale: i32, index: i64) -> Option<GridInterval> {
        self.offset_at_scale(scale).map(|off| GridInterval {
            scale,
            index,
            offset: off,
            modulus: self.modulus,
        })
    }

    /// Index range `[first, last]` of members at `scale` whose interior meets `[lo, hi)`.
    pub fn index_range(&self, scale: i32, window: &RatInterval) -> Option<(BigInt, BigInt)> {
        let off = self.offset_at_scale(scale)?;
        lattice_index_range(scale, off, self.modulus, window)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.modulus == 1 {
            write!(f, "S")
        } else {
            write!(
                f,
                "G{}_{{{},{},{}}}",
                if self.saturated { "'" } else { "" },
                self.modulus,
                self.j,
                self.offset
            )
        }
    }
}

fn lattice_index_range(
    scale: i32,
    offset: i64,
    modulus: i64,
    window: &RatInterval,
) -> Option<(BigInt, BigInt)> {
    if window.hi <= window.lo {
        return None;
    }
    let unit = pow2(scale);
    let shift = rat(offset, modulus);
    // a < hi  <=>  l < hi/2^i - L/N ;  b > lo  <=>  l > lo/2^i - L/N - 1
    let upper = &window.hi / &unit - &shift;
    let lower = &window.lo / &unit - &shift - Rational::one();
    let last = upper.ceil().to_integer() - BigInt::one();
    let first = rat_floor(&lower) + BigInt::one();
    if first > last {
        None
    } else {
        Some((first, last))
    }
}

/// Every member interval with scale in `scales` whose interior meets the half-open
/// window `[lo, hi)`, sorted by `(scale, left endpoint)`.
pub fn enumerate(
    spec: &GridSpec,
    scales: &[i32],
    window: &RatInterval,
    limit: usize,
) -> Result<Vec<GridInterval>, GridError> {
    spec.validate()?;
    let mut scales: Vec<i32> = scales.to_vec();
    scales.sort_unstable();
    scales.dedup();
    let mut ranges = Vec::new();
    let mut total: u128 = 0;
    for &s in &scales {
        if let Some((a, b)) = spec.index_range(s, window) {
            let count = (&b - &a + BigInt::one()).to_u128().unwrap_or(u128::MAX);
            total = total.saturating_add(count);
            ranges.push((s, a, b));
        }
    }
    if total > limit as u128 {
        return Err(GridError::TooManyIntervals {
            count: total,
            limit,
        });
    }
    let mut out = Vec::with_capacity(total as usize);
    for (s, a, b) in ranges {
        let off = spec.offset_at_scale(s).expect("range implies membership");
        let a = a.to_i64().expect("index fits i64");
        let b = b.to_i64().expect("index fits i64");
        for l in a..=b {
            out.push(GridInterval {
                scale: s,
                index: l,
                offset: off,
                modulus: spec.modulus,
            });
        }
    }
    Ok(out)
}

/// One translation lattice of intervals at a fixed scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lattice {
    pub scale: i32,
    pub offset: i64,
    pub modulus: i64,
}

impl Lattice {
    fn member(&self, index: BigInt) -> RatInterval {
        let num = index * BigInt::from(self.modulus) + BigInt::from(self.offset);
        let a = Rational::new(num, BigInt::from(self.modulus)) * pow2(self.scale);
        let b = &a + pow2(self.scale);
        RatInterval::new(a, b)
    }

    fn phase(&self) -> Rational {
        rat(self.offset, self.modulus)
    }
}

/// Lattices making up a grid spec over the given scales.
pub fn lattices(spec: &GridSpec, scales: &[i32]) -> Vec<Lattice> {
    let mut out: Vec<Lattice> = scales
        .iter()
        .filter_map(|&s| {
            spec.offset_at_scale(s).map(|off| Lattice {
                scale: s,
                offset: off,
                modulus: spec.modulus,
            })
        })
        .collect();
    out.sort_by_key(|l| (l.scale, l.offset));
    out.dedup();
    out
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridViolation {
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridReport {
    /// Member intervals meeting the window (counted arithmetically when not materialized).
    pub intervals: u128,
    /// Pairs of window intervals whose relation is certified by the check.
    pub pairs_certified: u128,
    /// Explicit `relate` evaluations performed.
    pub relations_evaluated: u64,
    pub violations: Vec<GridViolation>,
}

impl GridReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Nestedness check over a family of lattices restricted to a window.
///
/// For a finer interval `F` and coarser interval `C` (`|F| <= |C|`) the axiom fails
/// exactly when an endpoint of `C` lies in the interior of `F`. So it suffices to
/// visit the endpoints of the coarser lattice's window members, which keeps the check
/// exhaustive without materializing very fine scales.
pub fn verify_lattices(
    family: &[Lattice],
    window: &RatInterval,
    coarse_limit: usize,
) -> Result<GridReport, GridError> {
    let mut family: Vec<Lattice> = family.to_vec();
    family.sort_by_key(|l| (l.scale, l.offset, l.modulus));
    family.dedup();

    let ranges: Vec<Option<(BigInt, BigInt)>> = family
        .iter()
        .map(|l| lattice_index_range(l.scale, l.offset, l.modulus, window))
        .collect();
    let counts: Vec<u128> = ranges
        .iter()
        .map(|r| match r {
            Some((a, b)) => (b - a + BigInt::one()).to_u128().unwrap_or(u128::MAX),
            None => 0,
        })
        .collect();

    let mut report = GridReport {
        intervals: counts.iter().fold(0u128, |acc, c| acc.saturating_add(*c)),
        pairs_certified: 0,
        relations_evaluated: 0,
        violations: Vec::new(),
    };

    for (ci, coarse) in family.iter().enumerate() {
        let Some((c_first, c_last)) = &ranges[ci] else {
            continue;
        };
        for (fi, fine) in family.iter().enumerate() {
            if fi == ci || counts[fi] == 0 {
                continue;
            }
            // each unordered pair of lattices once: the finer one plays `fine`,
            // ties broken by position in the sorted family
            let finer = fine.scale < coarse.scale || (fine.scale == coarse.scale && fi < ci);
            if !finer {
                continue;
            }
            report.pairs_certified = report
                .pairs_certified
                .saturating_add(counts[fi].saturating_mul(counts[ci]));
            if counts[ci] > coarse_limit as u128 {
                return Err(GridError::TooManyIntervals {
                    count: counts[ci],
                    limit: coarse_limit,
                });
            }
            let mut idx = c_first.clone();
            while &idx <= c_last {
                let c = coarse.member(idx.clone());
                for e in [&c.lo, &c.hi] {
                    let t = e / pow2(fine.scale) - fine.phase();
                    report.relations_evaluated += 1;
                    if t.is_integer() {
                        continue;
                    }
                    let f = fine.member(rat_floor(&t));
                    let meets_window = f.lo < window.hi && f.hi > window.lo;
                    if meets_window && relate(&f, &c) == Relation::Violation {
                        report.violations.push(GridViolation {
                            a: f.to_string(),
                            b: c.to_string(),
                        });
                    }
                }
                idx += BigInt::one();
            }
        }
    }
    Ok(report)
}

/// Literal pairwise `relate` over an explicit interval list.
pub fn verify_pairwise(intervals: &[GridInterval]) -> GridReport {
    let ivs: Vec<RatInterval> = intervals.iter().map(|g| g.interval()).collect();
    let mut report = GridReport {
        intervals: ivs.len() as u128,
        pairs_certified: 0,
        relations_evaluated: 0,
        violations: Vec::new(),
    };
    for a in 0..ivs.len() {
        for b in a + 1..ivs.len() {
            report.relations_evaluated += 1;
            report.pairs_certified += 1;
            if relate(&ivs[a], &ivs[b]) == Relation::Violation {
                report.violations.push(GridViolation {
                    a: ivs[a].to_string(),
                    b: ivs[b].to_string(),
                });
            }
        }
    }
    report
}

/// Nestedness check of one grid spec over `scales` inside `window`.
pub fn verify_grid(
    spec: &GridSpec,
    scales: &[i32],
    window: &RatInterval,
) -> Result<GridReport, GridError> {
    spec.validate()?;
    const PAIRWISE_LIMIT: usize = 2048;
    match enumerate(spec, scales, window, PAIRWISE_LIMIT) {
        Ok(list) => Ok(verify_pairwise(&list)),
        Err(GridError::TooManyIntervals { .. }) => {
            verify_lattices(&lattices(spec, scales), window, 1 << 16)
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DisjointReport {
    pub grids: usize,
    pub lattices_checked: usize,
    /// `(grid a, grid b, scale)` triples sharing an interval inside the window.
    pub shared: Vec<(String, String, i32)>,
}

/// Checks that distinct grid specs share no interval meeting the window.
///
/// Two members at the same scale coincide exactly when their lattice offsets agree,
/// so grids are compared through their `(scale, offset/N)` keys.
pub fn verify_disjoint(
    specs: &[GridSpec],
    scales: &[i32],
    window: &RatInterval,
) -> Result<DisjointReport, GridError> {
    let mut seen: HashMap<(i32, Rational), usize> = HashMap::new();
    let mut report = DisjointReport {
        grids: specs.len(),
        lattices_checked: 0,
        shared: Vec::new(),
    };
    for (k, spec) in specs.iter().enumerate() {
        spec.validate()?;
        for &s in scales {
            let Some(off) = spec.offset_at_scale(s) else {
                continue;
            };
            if lattice_index_range(s, off, spec.modulus, window).is_none() {
                continue;
            }
            report.lattices_checked += 1;
            let key = (s, rat(off, spec.modulus));
            if let Some(&prev) = seen.get(&key) {
                report
                    .shared
                    .push((specs[prev].to_string(), spec.to_string(), s));
            } else {
                seen.insert(key, k);
            }
        }
    }
    Ok(report)
}

/// CSV rows `(i, l, L, N, left_num, left_den)`.
pub fn write_intervals_csv<W: std::io::Write>(
    out: W,
    intervals: &[GridInterval],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "l", "L", "N", "left_num", "left_den"])?;
    for g in intervals {
        let a = g.left();
        w.write_record([
            g.scale.to_string(),
            g.index.to_string(),
            g.offset.to_string(),
            g.modulus.to_string(),
            a.numer().to_string(),
            a.denom().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `true` when `x` is the endpoint of some member of `spec` at one of `scales`.
pub fn is_grid_point(spec: &GridSpec, scales: &[i32], x: &Rational) -> bool {
    scales.iter().any(|&s| match spec.offset_at_scale(s) {
        Some(off) => (x / pow2(s) - rat(off, spec.modulus)).is_integer(),
        None => false,
    })
}

/// Absolute value helper kept here so the rational API stays in one place.
pub fn rat_abs(r: &Rational) -> Rational {
    r.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(a: (i64, i64), b: (i64, i64)) -> RatInterval {
        RatInterval::new(rat(a.0, a.1), rat(b.0, b.1))
    }

    #[test]
    fn endpoints_examples() {
        let g = GridInterval::new(0, 0, 0, 1).unwrap();
        assert_eq!(g.endpoints(), (rat(0, 1), rat(1, 1)));
        let g = GridInterval::new(0, 0, 3, 41).unwrap();
        assert_eq!(g.endpoints(), (rat(3, 41), rat(44, 41)));
        let g = GridInterval::new(-3, 5, 1, 41).unwrap();
        assert_eq!(g.endpoints(), (rat(206, 328), rat(247, 328)));
        assert_eq!(g.right() - g.left(), pow2(-3));
    }

    #[test]
    fn offset_is_folded() {
        let g = GridInterval::new(0, 0, 44, 41).unwrap();
        assert_eq!((g.index, g.offset), (1, 3));
        assert!(GridInterval::new(0, 0, 0, 4).is_err());
    }

    #[test]
    fn relate_examples() {
        assert_eq!(relate(&iv((0, 1), (1, 1)), &iv((0, 1), (1, 2))), Relation::BInsideA);
        assert_eq!(
            relate(&iv((3, 41), (44, 41)), &iv((44, 41), (85, 41))),
            Relation::Disjoint
        );
        assert_eq!(relate(&iv((0, 1), (1, 1)), &iv((1, 2), (3, 2))), Relation::Violation);
        assert_eq!(relate(&iv((0, 1), (1, 1)), &iv((0, 1), (1, 1))), Relation::Equal);
    }

    #[test]
    fn sons_examples() {
        let (a, b) = GridInterval::dyadic(0, 0).sons();
        assert_eq!(a.endpoints(), (rat(0, 1), rat(1, 2)));
        assert_eq!(b.endpoints(), (rat(1, 2), rat(1, 1)));
        let (a, b) = GridInterval::new(0, 0, 3, 41).unwrap().sons();
        let mid = (rat(3, 41) + rat(44, 41)) / rat(2, 1);
        assert_eq!(mid, rat(47, 82));
        assert_eq!(a.endpoints(), (rat(3, 41), mid.clone()));
        assert_eq!(b.endpoints(), (mid, rat(44, 41)));
        // descendant chain of [0,2]
        let (s, _) = GridInterval::dyadic(1, 0).sons();
        let (ss, _) = s.sons();
        assert_eq!(ss.endpoints(), (rat(0, 1), rat(1, 2)));
    }

    #[test]
    fn enumerate_examples() {
        let w = iv((0, 1), (3, 1));
        let got = enumerate(&GridSpec::standard(), &[0], &w, 100).unwrap();
        let ends: Vec<_> = got.iter().map(|g| g.endpoints()).collect();
        assert_eq!(
            ends,
            vec![
                (rat(0, 1), rat(1, 1)),
                (rat(1, 1), rat(2, 1)),
                (rat(2, 1), rat(3, 1))
            ]
        );

        let spec = GridSpec::new(41, 0, 3, false).unwrap();
        let got = enumerate(&spec, &[0], &iv((0, 1), (2, 1)), 100).unwrap();
        let ends: Vec<_> = got.iter().map(|g| g.endpoints()).collect();
        assert_eq!(
            ends,
            vec![
                (rat(-38, 41), rat(3, 41)),
                (rat(3, 41), rat(44, 41)),
                (rat(44, 41), rat(85, 41))
            ]
        );

        let spec = GridSpec::new(41, 0, 0, true).unwrap();
        let got = enumerate(&spec, &[0, -1], &iv((0, 1), (1, 1)), 100).unwrap();
        assert_eq!(got.len(), 3);
        let (a, b) = GridInterval::new(0, 0, 0, 41).unwrap().sons();
        assert!(got.contains(&a) && got.contains(&b));
    }

    #[test]
    fn empty_window_is_empty() {
        let got = enumerate(&GridSpec::standard(), &[0, 1], &iv((2, 1), (2, 1)), 10).unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn enumerate_limit_guard() {
        let err = enumerate(&GridSpec::standard(), &[-40], &iv((0, 1), (8, 1)), 1000);
        assert!(matches!(err, Err(GridError::TooManyIntervals { .. })));
    }

    #[test]
    fn verify_examples() {
        let spec = GridSpec::new(41, 0, 0, false).unwrap();
        let r = verify_grid(&spec, &[-40, 0, 40], &iv((0, 1), (4, 1))).unwrap();
        assert!(r.ok(), "{:?}", r.violations);
        assert!(r.pairs_certified > 0);

        let scales: Vec<i32> = (-2..=2).collect();
        let r = verify_grid(&GridSpec::standard(), &scales, &iv((0, 1), (4, 1))).unwrap();
        assert!(r.ok());
        assert_eq!(r.relations_evaluated, r.pairs_certified as u64);
    }

    #[test]
    fn corrupted_family_is_caught() {
        let spec = GridSpec::new(41, 0, 3, false).unwrap();
        let mut fam = lattices(&spec, &[-40, 0, 40]);
        // scale 1 is not ≡ 0 (mod 40); giving it the raw offset breaks nestedness
        fam.push(Lattice {
            scale: 1,
            offset: 3,
            modulus: 41,
        });
        let r = verify_lattices(&fam, &iv((0, 1), (4, 1)), 1 << 12).unwrap();
        assert!(!r.ok());
    }

    #[test]
    fn saturated_membership() {
        let spec = GridSpec::new(41, 0, 3, true).unwrap();
        let base = spec.interval_at(0, 2).unwrap();
        let (a, b) = base.sons();
        assert!(spec.contains(&a) && spec.contains(&b));
        let (aa, _) = a.sons();
        assert!(spec.contains(&aa));
        let unsat = GridSpec::new(41, 0, 3, false).unwrap();
        assert!(!unsat.contains(&a));
        assert!(unsat.contains(&base));
        // the same descendants seen from a base 40 scales up
        let big = spec.interval_at(40, 0).unwrap();
        let mut w = big;
        for _ in 0..40 {
            w = w.sons().0;
        }
        assert!(spec.contains(&w));
    }

    #[test]
    fn distinct_grids_disjoint() {
        let specs: Vec<GridSpec> = (0..5)
            .flat_map(|j| (0..5).map(move |l| GridSpec::new(5, j % 4, l, false).unwrap()))
            .collect::<std::collections::HashSet<_>>()
            .into_iter()
            .collect();
        let r = verify_disjoint(&specs, &(-8..=8).collect::<Vec<_>>(), &iv((0, 1), (8, 1))).unwrap();
        assert!(r.shared.is_empty());
    }

    #[test]
    fn csv_rows() {
        let mut buf = Vec::new();
        write_intervals_csv(&mut buf, &[GridInterval::new(0, 0, 3, 41).unwrap()]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "i,l,L,N,left_num,left_den\n0,0,3,41,3,41\n");
    }

    #[test]
    fn spec_json_shape() {
        let spec: GridSpec = serde_json::from_str(r#"{"N":41,"j":0,"L":3,"saturated":false}"#).unwrap();
        assert_eq!(spec, GridSpec::new(41, 0, 3, false).unwrap());
    }
}
