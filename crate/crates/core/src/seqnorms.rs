//! Variation, oscillation and entropy quantities of finite vector sequences.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("empty sequence")]
    Empty,
    #[error("sequence of length {len} exceeds the exact-mode limit {limit}")]
    TooLong { len: usize, limit: usize },
    #[error("vector dimensions disagree: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("partition points invalid: {0}")]
    Partition(String),
    #[error("exponent r = {0} must be >= 1")]
    Exponent(f64),
    #[error("radius must be positive, got {0}")]
    Radius(f64),
    #[error("csv: {0}")]
    Csv(String),
}

pub const EXACT_VARIATION_MAX_LEN: usize = 22;
pub const EXACT_COVERING_MAX_LEN: usize = 18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorSequence {
    pub index_start: i64,
    pub values: Vec<Vec<Complex64>>,
}

impl VectorSequence {
    pub fn new(index_start: i64, values: Vec<Vec<Complex64>>) -> Result<Self, NormError> {
        if let Some(first) = values.first() {
            let d = first.len();
            for v in &values {
                if v.len() != d {
                    return Err(NormError::Dimension(d, v.len()));
                }
            }
        }
        Ok(VectorSequence {
            index_start,
            values,
        })
    }

    pub fn from_reals(index_start: i64, xs: &[f64]) -> Self {
        VectorSequence {
            index_start,
            values: xs.iter().map(|&x| vec![Complex64::new(x, 0.0)]).collect(),
        }
    }

    pub fn from_complex(index_start: i64, xs: &[Complex64]) -> Self {
        VectorSequence {
            index_start,
            values: xs.iter().map(|&x| vec![x]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    pub fn index_end(&self) -> i64 {
        self.index_start + self.values.len() as i64 - 1
    }

    pub fn norm_at(&self, pos: usize) -> f64 {
        vec_norm(&self.values[pos])
    }

    pub fn dist(&self, a: usize, b: usize) -> f64 {
        self.values[a]
            .iter()
            .zip(&self.values[b])
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        (0..self.len()).map(|i| self.norm_at(i)).fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut d: f64 = 0.0;
        for a in 0..n {
            for b in a + 1..n {
                d = d.max(self.dist(a, b));
            }
        }
        d
    }

    /// Entrywise sum; both sequences must share indexing and dimension.
    pub fn add(&self, other: &VectorSequence) -> VectorSequence {
        assert_eq!(self.index_start, other.index_start);
        assert_eq!(self.len(), other.len());
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        VectorSequence {
            index_start: self.index_start,
            values,
        }
    }

    /// Product of a scalar sequence with this one.
    pub fn scale_by(&self, scalars: &VectorSequence) -> VectorSequence {
        assert_eq!(scalars.dim(), 1);
        let values = self
            .values
            .iter()
            .zip(&scalars.values)
            .map(|(v, s)| v.iter().map(|x| x * s[0]).collect())
            .collect();
        VectorSequence {
            index_start: self.index_start,
            values,
        }
    }

    fn pos(&self, k: i64) -> Option<usize> {
        if k < self.index_start || k > self.index_end() {
            None
        } else {
            Some((k - self.index_start) as usize)
        }
    }

    /// Reads rows `index, re_1, im_1, ...`; indices must be contiguous.
    pub fn from_csv<R: std::io::Read>(rdr: R) -> Result<Self, NormError> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(rdr);
        let mut start = None;
        let mut values = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| NormError::Csv(e.to_string()))?;
            let Some(first) = rec.get(0) else { continue };
            let Ok(idx) = first.parse::<i64>() else {
                // header line
                continue;
            };
            let nums: Result<Vec<f64>, _> = rec.iter().skip(1).map(str::parse::<f64>).collect();
            let nums = nums.map_err(|e| NormError::Csv(e.to_string()))?;
            if nums.len() % 2 != 0 {
                return Err(NormError::Csv(format!("odd number of components at index {idx}")));
            }
            let expected = start.map(|s: i64| s + values.len() as i64);
            match expected {
                None => start = Some(idx),
                Some(e) if e != idx => {
                    return Err(NormError::Csv(format!("index {idx} breaks contiguity (expected {e})")))
                }
                _ => {}
            }
            values.push(
                nums.chunks(2)
                    .map(|c| Complex64::new(c[0], c[1]))
                    .collect::<Vec<_>>(),
            );
        }
        VectorSequence::new(start.unwrap_or(0), values)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), NormError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["index".to_string()];
        for c in 1..=self.dim() {
            header.push(format!("re_{c}"));
            header.push(format!("im_{c}"));
        }
        w.write_record(&header)
            .map_err(|e| NormError::Csv(e.to_string()))?;
        for (p, v) in self.values.iter().enumerate() {
            let mut row = vec![(self.index_start + p as i64).to_string()];
            for z in v {
                row.push(format!("{:e}", z.re));
                row.push(format!("{:e}", z.im));
            }
            w.write_record(&row)
                .map_err(|e| NormError::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| NormError::Csv(e.to_string()))
    }
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariationMode {
    /// Enumerates every increasing index subsequence.
    Exact,
    /// Dynamic program over chains; the value is attained by an explicit subsequence.
    DpLower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Left,
    Right,
}

/// Strictly increasing partition indices `u_1 < ... < u_J`, `J >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPoints(Vec<i64>);

impl PartitionPoints {
    pub fn new(u: Vec<i64>) -> Result<Self, NormError> {
        if u.len() < 2 {
            return Err(NormError::Partition(format!("need J >= 2 points, got {}", u.len())));
        }
        if u.windows(2).any(|w| w[0] >= w[1]) {
            return Err(NormError::Partition("points not strictly increasing".into()));
        }
        Ok(PartitionPoints(u))
    }

    pub fn points(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_r(r: f64) -> Result<(), NormError> {
    if r.is_finite() && r >= 1.0 {
        Ok(())
    } else {
        Err(NormError::Exponent(r))
    }
}

fn increment_powers(seq: &VectorSequence, r: f64) -> Vec<Vec<f64>> {
    let n = seq.len();
    let mut w = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            w[a][b] = seq.dist(a, b).powf(r);
        }
    }
    w
}

/// Homogeneous part `sup (Σ ||x_{k_m} - x_{k_{m-1}}||^r)^{1/r}` by exhaustive search.
fn homogeneous_exact(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    // depth-first over subsequences: every increasing chain is visited once
    fn dfs(w: &[Vec<f64>], last: usize, acc: f64, best: &mut f64) {
        if acc > *best {
            *best = acc;
        }
        for next in last + 1..w.len() {
            dfs(w, next, acc + w[last][next], best);
        }
    }
    let mut best = 0.0;
    for start in 0..n {
        dfs(w, start, 0.0, &mut best);
    }
    best
}

/// Longest-path dynamic program over the chain DAG.
fn homogeneous_dp(w: &[Vec<f64>]) -> f64 {
    let n = w.len();
    let mut best_end = vec![0.0f64; n];
    let mut best: f64 = 0.0;
    for b in 0..n {
        let mut v: f64 = 0.0;
        for a in 0..b {
            v = v.max(best_end[a] + w[a][b]);
        }
        best_end[b] = v;
        best = best.max(v);
    }
    best
}

pub fn variation_norm(seq: &VectorSequence, r: f64, mode: VariationMode) -> Result<f64, NormError> {
    check_r(r)?;
    if seq.is_empty() {
        return Err(NormError::Empty);
    }
    let w = increment_powers(seq, r);
    let s = match mode {
        VariationMode::Exact => {
            if seq.len() > EXACT_VARIATION_MAX_LEN {
                return Err(NormError::TooLong {
                    len: seq.len(),
                    limit: EXACT_VARIATION_MAX_LEN,
                });
            }
            homogeneous_exact(&w)
        }
        VariationMode::DpLower => homogeneous_dp(&w),
    };
    Ok(seq.sup_norm() + s.powf(1.0 / r))
}

/// Homogeneous part only (no sup term), dynamic program.
pub fn homogeneous_variation(seq: &VectorSequence, r: f64) -> Result<f64, NormError> {
    check_r(r)?;
    if seq.is_empty() {
        return Err(NormError::Empty);
    }
    Ok(homogeneous_dp(&increment_powers(seq, r)).powf(1.0 / r))
}

pub fn oscillation_norm(
    seq: &VectorSequence,
    u: &PartitionPoints,
    anchor: Anchor,
) -> Result<f64, NormError> {
    if seq.is_empty() {
        return Err(NormError::Empty);
    }
    let pts = u.points();
    let pos: Vec<usize> = pts
        .iter()
        .map(|&k| {
            seq.pos(k).ok_or_else(|| {
                NormError::Partition(format!(
                    "point {k} outside index range [{}, {}]",
                    seq.index_start,
                    seq.index_end()
                ))
            })
        })
        .collect::<Result<_, _>>()?;
    let mut total = 0.0;
    for w in pos.windows(2) {
        let a = match anchor {
            Anchor::Left => w[0],
            Anchor::Right => w[1],
        };
        let m = (w[0]..w[1]).map(|k| seq.dist(k, a)).fold(0.0, f64::max);
        total += m * m;
    }
    Ok(total.sqrt())
}

pub fn osc_var_norm(
    seq: &VectorSequence,
    u: &PartitionPoints,
    r: f64,
    mode: VariationMode,
) -> Result<f64, NormError> {
    Ok(oscillation_norm(seq, u, Anchor::Left)? + variation_norm(seq, r, mode)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Covering {
    pub count: usize,
    /// `false` when the count is a greedy upper bound.
    pub exact: bool,
}

/// Minimum number of closed radius-`lambda` balls centered at sequence elements covering it.
pub fn covering_number(seq: &VectorSequence, lambda: f64) -> Result<Covering, NormError> {
    if !(lambda > 0.0) {
        return Err(NormError::Radius(lambda));
    }
    if seq.is_empty() {
        return Err(NormError::Empty);
    }
    let n = seq.len();
    let balls = ball_masks(seq, lambda);
    if n <= EXACT_COVERING_MAX_LEN {
        Ok(Covering {
            count: exact_cover(&balls, n),
            exact: true,
        })
    } else {
        Ok(Covering {
            count: greedy_cover(seq, lambda),
            exact: false,
        })
    }
}

fn ball_masks(seq: &VectorSequence, lambda: f64) -> Vec<u64> {
    let n = seq.len().min(64);
    (0..n)
        .map(|c| {
            (0..n)
                .filter(|&p| seq.dist(c, p) <= lambda)
                .fold(0u64, |m, p| m | (1 << p))
        })
        .collect()
}

fn exact_cover(balls: &[u64], n: usize) -> usize {
    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    fn search(balls: &[u64], left: usize, covered: u64, full: u64) -> bool {
        if covered == full {
            return true;
        }
        if left == 0 {
            return false;
        }
        // the lowest uncovered point must lie in one of the chosen balls
        let p = (!covered & full).trailing_zeros() as usize;
        balls
            .iter()
            .any(|&b| b & (1 << p) != 0 && search(balls, left - 1, covered | b, full))
    }
    for k in 1..=n {
        if search(balls, k, 0, full) {
            return k;
        }
    }
    n
}

fn greedy_cover(seq: &VectorSequence, lambda: f64) -> usize {
    let n = seq.len();
    let mut covered = vec![false; n];
    let mut count = 0;
    while covered.iter().any(|c| !c) {
        let (best, _) = (0..n)
            .map(|c| {
                let gain = (0..n)
                    .filter(|&p| !covered[p] && seq.dist(c, p) <= lambda)
                    .count();
                (c, gain)
            })
            .max_by_key(|&(c, g)| (g, std::cmp::Reverse(c)))
            .expect("nonempty");
        for p in 0..n {
            if seq.dist(best, p) <= lambda {
                covered[p] = true;
            }
        }
        count += 1;
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    pub value: f64,
    pub lambda: f64,
    pub count: usize,
    pub exact: bool,
}

/// `sup_λ λ M_λ^{1/r}` over `0 < λ <= diam`.
///
/// `M_λ` is a step function that only changes at pairwise distances, so the sup over
/// each step is its left limit `d_t · M(d_{t-1})^{1/r}`.
pub fn entropy_sup(seq: &VectorSequence, r: f64) -> Result<EntropyValue, NormError> {
    check_r(r)?;
    if seq.is_empty() {
        return Err(NormError::Empty);
    }
    let n = seq.len();
    let mut d: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            d.push(seq.dist(a, b));
        }
    }
    d.retain(|x| *x > 0.0);
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    d.dedup();
    let mut out = EntropyValue {
        value: 0.0,
        lambda: 0.0,
        count: 1,
        exact: true,
    };
    // below the smallest positive distance every distinct point needs its own ball
    let mut prev_count = {
        let mut distinct = 0;
        for a in 0..n {
            if (0..a).all(|b| seq.dist(a, b) > 0.0) {
                distinct += 1;
            }
        }
        Covering {
            count: distinct,
            exact: true,
        }
    };
    for &dt in &d {
        let v = dt * (prev_count.count as f64).powf(1.0 / r);
        if v > out.value {
            out = EntropyValue {
                value: v,
                lambda: dt,
                count: prev_count.count,
                exact: prev_count.exact,
            };
        }
        prev_count = covering_number(seq, dt)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub norm_name: String,
    pub r: Option<f64>,
    pub anchor: Option<Anchor>,
    pub value: f64,
    pub mode: Option<VariationMode>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn s(xs: &[f64]) -> VectorSequence {
        VectorSequence::from_reals(1, xs)
    }

    #[test]
    fn variation_examples() {
        for r in [1.0, 2.0, 3.5] {
            let v = variation_norm(&s(&[2.0, 2.0, 2.0]), r, VariationMode::Exact).unwrap();
            assert_abs_diff_eq!(v, 2.0, epsilon = 1e-15);
        }
        let x = s(&[0.0, 1.0, 0.0, 1.0]);
        let v2 = variation_norm(&x, 2.0, VariationMode::Exact).unwrap();
        assert_abs_diff_eq!(v2, 1.0 + 3f64.sqrt(), epsilon = 1e-12);
        let v1 = variation_norm(&x, 1.0, VariationMode::Exact).unwrap();
        assert_abs_diff_eq!(v1, 4.0, epsilon = 1e-12);
        assert_eq!(
            variation_norm(&s(&[]), 2.0, VariationMode::Exact),
            Err(NormError::Empty)
        );
    }

    #[test]
    fn exact_length_guard() {
        let x = s(&[0.0; 23]);
        assert!(matches!(
            variation_norm(&x, 2.0, VariationMode::Exact),
            Err(NormError::TooLong { .. })
        ));
        assert!(variation_norm(&x, 2.0, VariationMode::DpLower).is_ok());
    }

    #[test]
    fn oscillation_examples() {
        let x = s(&[1.0, 2.0, 3.0, 4.0]);
        let u = PartitionPoints::new(vec![1, 3]).unwrap();
        assert_eq!(oscillation_norm(&x, &u, Anchor::Left).unwrap(), 1.0);
        assert_eq!(oscillation_norm(&x, &u, Anchor::Right).unwrap(), 2.0);
        let c = s(&[5.0; 4]);
        assert_eq!(oscillation_norm(&c, &u, Anchor::Left).unwrap(), 0.0);
        let bad = PartitionPoints::new(vec![0, 3]).unwrap();
        assert!(oscillation_norm(&x, &bad, Anchor::Left).is_err());
        assert!(PartitionPoints::new(vec![3]).is_err());
        assert!(PartitionPoints::new(vec![3, 3]).is_err());
    }

    #[test]
    fn osc_var_examples() {
        let c = s(&[-3.0, -3.0, -3.0]);
        let u = PartitionPoints::new(vec![1, 3]).unwrap();
        assert_abs_diff_eq!(
            osc_var_norm(&c, &u, 2.0, VariationMode::Exact).unwrap(),
            3.0,
            epsilon = 1e-15
        );
        let x = s(&[0.0, 1.0, 0.0, 1.0]);
        // blocks: k in {1,2} anchored at x_1 = 0 -> sup 1
        let got = osc_var_norm(&x, &u, 2.0, VariationMode::Exact).unwrap();
        assert_abs_diff_eq!(got, 1.0 + 1.0 + 3f64.sqrt(), epsilon = 1e-12);
        assert_eq!(
            osc_var_norm(&s(&[0.0; 3]), &u, 2.0, VariationMode::Exact).unwrap(),
            0.0
        );
    }

    #[test]
    fn covering_examples() {
        assert_eq!(covering_number(&s(&[0.0, 1.0, 2.0]), 0.4).unwrap().count, 3);
        assert_eq!(covering_number(&s(&[0.0, 0.1, 2.0]), 0.15).unwrap().count, 2);
        assert_eq!(covering_number(&s(&[0.0, 0.3, 2.0]), 2.0).unwrap().count, 1);
        assert!(covering_number(&s(&[0.0]), 0.0).is_err());
        let long = s(&(0..30).map(|i| i as f64).collect::<Vec<_>>());
        let c = covering_number(&long, 1.0).unwrap();
        assert!(!c.exact);
        assert_eq!(c.count, 10);
    }

    #[test]
    fn entropy_small() {
        // {0, 1}: λ -> 1^- needs 2 balls, λ M^{1/2} -> √2
        let e = entropy_sup(&s(&[0.0, 1.0]), 2.0).unwrap();
        assert_abs_diff_eq!(e.value, 2f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn csv_roundtrip() {
        let x = VectorSequence::new(
            -2,
            vec![
                vec![Complex64::new(1.0, 2.0), Complex64::new(0.5, -1.0)],
                vec![Complex64::new(3.0, 0.0), Complex64::new(0.0, 0.25)],
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        x.write_csv(&mut buf).unwrap();
        let y = VectorSequence::from_csv(buf.as_slice()).unwrap();
        assert_eq!(x, y);
        assert!(VectorSequence::from_csv("0,1,0\n2,1,0\n".as_bytes()).is_err());
    }
}
