//! Seeded lower-bound search for the sup of a maximal functional over a unit ball.
//!
//! A functional `F` is positively homogeneous of degree one in its argument; the
//! quantity estimated is `sup F(g)/‖g‖`. Every value reported is attained by an
//! explicit probe, so the estimate is a certified lower bound.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub trait MaxFunctional: Sync {
    fn dim(&self) -> usize;

    /// Measure attached to each coordinate in `‖g‖² = w Σ|g_c|²`.
    fn coord_weight(&self) -> f64 {
        1.0
    }

    fn value(&self, g: &[Complex64]) -> f64;

    /// Smooth surrogate (sup replaced by an `ℓ^p` sum) and its gradient with
    /// respect to `conj(g)`, up to a positive factor.
    fn surrogate(&self, g: &[Complex64], p: f64) -> (f64, Vec<Complex64>);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeProtocol {
    pub gaussian: usize,
    pub constant: bool,
    pub frequencies: usize,
    pub ascent_steps: usize,
    pub surrogate_p: f64,
}

impl Default for ProbeProtocol {
    fn default() -> Self {
        ProbeProtocol {
            gaussian: 512,
            constant: true,
            frequencies: 64,
            ascent_steps: 50,
            surrogate_p: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEstimate {
    pub value: f64,
    /// Best ratio before the ascent phase.
    pub initial: f64,
    pub source: String,
    pub probes: usize,
    pub ascent_accepted: usize,
    #[serde(skip)]
    pub best: Vec<Complex64>,
}

pub fn norm(g: &[Complex64], w: f64) -> f64 {
    (w * g.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}

pub fn normalize(g: &mut [Complex64], w: f64) {
    let n = norm(g, w);
    if n > 0.0 {
        g.iter_mut().for_each(|z| *z /= n);
    }
}

pub fn ratio<F: MaxFunctional + ?Sized>(f: &F, g: &[Complex64]) -> f64 {
    let n = norm(g, f.coord_weight());
    if n == 0.0 {
        0.0
    } else {
        f.value(g) / n
    }
}

/// The fixed probe family: Gaussian, constant, then equispaced pure frequencies.
pub fn protocol_probes(
    dim: usize,
    protocol: &ProbeProtocol,
    rng: &mut ChaCha20Rng,
) -> Vec<(String, Vec<Complex64>)> {
    let mut out = Vec::new();
    for i in 0..protocol.gaussian {
        let g: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        out.push((format!("gaussian#{i}"), g));
    }
    if protocol.constant {
        out.push(("constant".to_string(), vec![Complex64::new(1.0, 0.0); dim]));
    }
    let nf = protocol.frequencies.min(dim);
    for i in 0..nf {
        let k = (i * dim) / nf.max(1);
        let g = (0..dim)
            .map(|c| Complex64::from_polar(1.0, 2.0 * PI * (k * c) as f64 / dim as f64))
            .collect();
        out.push((format!("frequency#{k}"), g));
    }
    out
}

/// Largest ratio over an explicit probe list; ties resolve to the lowest index.
pub fn max_over<F: MaxFunctional + ?Sized>(
    f: &F,
    probes: &[Vec<Complex64>],
) -> Option<(usize, f64)> {
    let values: Vec<f64> = probes.par_iter().map(|g| ratio(f, g)).collect();
    values
        .into_iter()
        .enumerate()
        .fold(None, |best, (i, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
}

/// Projected ascent on the surrogate, started from `start`.
pub fn ascend<F: MaxFunctional + ?Sized>(
    f: &F,
    start: &[Complex64],
    steps: usize,
    p: f64,
) -> (Vec<Complex64>, f64, usize) {
    let w = f.coord_weight();
    let mut g = start.to_vec();
    normalize(&mut g, w);
    let mut best_g = g.clone();
    let mut best = f.value(&g);
    let (mut s, mut grad) = f.surrogate(&g, p);
    let mut eta = 0.5;
    let mut accepted = 0;
    for _ in 0..steps {
        // remove the radial component
        let dot: Complex64 = g.iter().zip(&grad).map(|(a, b)| a.conj() * b).sum::<Complex64>() * w;
        let tangent: Vec<Complex64> = grad.iter().zip(&g).map(|(d, x)| d - x * dot.re).collect();
        let tn = norm(&tangent, w);
        if tn == 0.0 || !tn.is_finite() {
            break;
        }
        let mut trial: Vec<Complex64> = g.iter().zip(&tangent).map(|(x, d)| x + d * (eta / tn)).collect();
        normalize(&mut trial, w);
        let (ts, tg) = f.surrogate(&trial, p);
        if ts > s {
            g = trial;
            s = ts;
            grad = tg;
            accepted += 1;
            let v = f.value(&g);
            if v > best {
                best = v;
                best_g = g.clone();
            }
            eta = (eta * 1.5).min(1.0);
        } else {
            eta *= 0.5;
            if eta < 1e-6 {
                break;
            }
        }
    }
    (best_g, best, accepted)
}

/// Runs the full protocol: probe family, then ascent from the best probe.
pub fn estimate_sup<F: MaxFunctional + ?Sized>(
    f: &F,
    protocol: &ProbeProtocol,
    rng: &mut ChaCha20Rng,
) -> ProbeEstimate {
    let labelled = protocol_probes(f.dim(), protocol, rng);
    let (labels, probes): (Vec<String>, Vec<Vec<Complex64>>) = labelled.into_iter().unzip();
    let Some((idx, initial)) = max_over(f, &probes) else {
        return ProbeEstimate {
            value: 0.0,
            initial: 0.0,
            source: "none".into(),
            probes: 0,
            ascent_accepted: 0,
            best: Vec::new(),
        };
    };
    let (g, v, accepted) = ascend(f, &probes[idx], protocol.ascent_steps, protocol.surrogate_p);
    let (value, source, best) = if v > initial {
        (v, format!("{}+ascent", labels[idx]), g)
    } else {
        let mut b = probes[idx].clone();
        normalize(&mut b, f.coord_weight());
        (initial, labels[idx].clone(), b)
    };
    ProbeEstimate {
        value,
        initial,
        source,
        probes: probes.len(),
        ascent_accepted: accepted,
        best,
    }
}
