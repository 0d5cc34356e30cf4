//! The model functions `φ_s(x, θ)` and the splitting `φ_s = φ̃^{(l)} + φ^{(l)}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Grid, PacketFamily, Tile, TfError};
use crate::grid::rat_to_f64;
use crate::kernels::q_annulus;
use crate::signal::{adapted_check, cis, smooth_step, AdaptedReport, SampledSignal};

/// `ψ₀`, smooth with support `[1/8, 3/8]`.
pub fn psi0(t: f64) -> f64 {
    if t > 0.0 {
        q_annulus(t)
    } else {
        0.0
    }
}

/// `φ_s(x, θ) = ∫ ψ₀(|I_s|(θ - ξ)) φ̂_s(ξ) e^{2πiξx} dξ`, sampled in `x`.
pub fn phi_model(
    family: PacketFamily,
    tile: &Tile,
    theta: f64,
    grid: &Grid,
) -> Result<SampledSignal, TfError> {
    super::packet_hat(family, tile, 0.0)?;
    let len = 2f64.powi(tile.time.scale);
    let spec = grid.spectrum(|xi| {
        let w = psi0(len * (theta - xi));
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        super::packet_hat(family, tile, xi).expect("checked above") * w
    })?;
    Ok(spec.inverse())
}

/// Cutoff `η` with support `[-1/2, 1/2]`, equal to 1 on `[-1/4, 1/4]`.
pub fn eta_cutoff(t: f64) -> f64 {
    1.0 - smooth_step(4.0 * (t.abs() - 0.25))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPieces {
    pub l: u32,
    pub phi: SampledSignal,
    /// `φ̃^{(l)}`, supported in `2^{l-1} I_s`.
    pub tilde: SampledSignal,
    /// `φ^{(l)}`.
    pub main: SampledSignal,
}

/// `φ̃ = φ_s D - P` and `φ^{(l)} = P + φ_s(1 - D)` with `D(x) = η((x - c(I_s))/(2^{l-1}|I_s|))`
/// and `P = e^{2πiξ_T x} D/∫D · ∫ φ_s e^{-2πiξ_T x} D`. For `l = 0`, `(0, φ_s)`.
pub fn phi_split(phi: &SampledSignal, tile: &Tile, xi_t: f64, l: u32) -> SplitPieces {
    if l == 0 {
        return SplitPieces {
            l,
            phi: phi.clone(),
            tilde: phi.zeros_like(),
            main: phi.clone(),
        };
    }
    let (lo, hi) = tile.time.to_f64();
    let c = 0.5 * (lo + hi);
    let width = 2f64.powi(l as i32 - 1) * (hi - lo);
    let d: Vec<f64> = (0..phi.len()).map(|j| eta_cutoff((phi.x(j) - c) / width)).collect();
    let mass: f64 = d.iter().sum::<f64>() * phi.spacing;
    let proj: Complex64 = (0..phi.len())
        .map(|j| phi.samples[j] * cis(-2.0 * PI * xi_t * phi.x(j)) * d[j])
        .sum::<Complex64>()
        * phi.spacing;
    let p: Vec<Complex64> = (0..phi.len())
        .map(|j| cis(2.0 * PI * xi_t * phi.x(j)) * (d[j] / mass) * proj)
        .collect();
    let tilde = (0..phi.len()).map(|j| phi.samples[j] * d[j] - p[j]).collect();
    let main = (0..phi.len())
        .map(|j| p[j] + phi.samples[j] * (1.0 - d[j]))
        .collect();
    SplitPieces {
        l,
        phi: phi.clone(),
        tilde: phi.with_samples(tilde),
        main: phi.with_samples(main),
    }
}

/// Demodulates `g` by `e^{-2πicx}`.
pub fn demodulate(g: &SampledSignal, c: f64) -> SampledSignal {
    g.map(|x, z| z * cis(-2.0 * PI * c * x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub l: u32,
    /// `max |φ̃ + φ^{(l)} - φ_s|`.
    pub reconstitution: f64,
    /// `|∫ φ̃ e^{-2πiξ_T x}|`.
    pub tilde_mean: f64,
    /// `|∫ φ^{(l)} e^{-2πiξ_T x}|`, relative to `‖φ^{(l)}‖₁`.
    pub main_mean: f64,
    /// Largest `|φ̃|` outside `2^{l-1} I_s`.
    pub tilde_outside: f64,
    /// Adaptedness of the demodulated `φ^{(l)}` to `I_s`.
    pub adapted: AdaptedReport,
}

fn mean(g: &SampledSignal, c: f64) -> f64 {
    (demodulate(g, c).integral()).norm()
}

/// Measures the properties of one split.
pub fn split_report(pieces: &SplitPieces, tile: &Tile, xi_t: f64, m_list: &[f64]) -> SplitReport {
    let (lo, hi) = tile.time.to_f64();
    let c = 0.5 * (lo + hi);
    let half = 0.5 * 2f64.powi(pieces.l as i32 - 1) * (hi - lo);
    let reconstitution = (0..pieces.phi.len())
        .map(|j| (pieces.tilde.samples[j] + pieces.main.samples[j] - pieces.phi.samples[j]).norm())
        .fold(0.0, f64::max);
    let tilde_outside = (0..pieces.tilde.len())
        .filter(|&j| (pieces.tilde.x(j) - c).abs() > half)
        .map(|j| pieces.tilde.samples[j].norm())
        .fold(0.0, f64::max);
    let l1 = pieces.main.lp_norm(1.0).max(f64::MIN_POSITIVE);
    let demod = demodulate(&pieces.main, xi_t);
    SplitReport {
        l: pieces.l,
        reconstitution,
        tilde_mean: mean(&pieces.tilde, xi_t),
        main_mean: mean(&pieces.main, xi_t) / l1,
        tilde_outside,
        // finite differences: the cutoff is not band-limited
        adapted: adapted_check(&demod, None, lo, hi, 1.0, m_list),
    }
}

/// A point of `ω_{s,2}` at two thirds of `ω_s`, which is non-dyadic.
pub fn upper_point(tile: &Tile) -> f64 {
    let (lo, hi) = tile.freq.to_f64();
    lo + (hi - lo) * 2.0 / 3.0
}

/// `|I_s|^{-1/2}`-normalized decay constants of `φ_s(·, θ)` for each `M`.
pub fn localization(
    family: PacketFamily,
    tile: &Tile,
    theta: f64,
    grid: &Grid,
    m_list: &[f64],
) -> Result<AdaptedReport, TfError> {
    let g = demodulate(&phi_model(family, tile, theta, grid)?, theta);
    let (lo, hi) = tile.time.to_f64();
    Ok(adapted_check(&g, Some(&g.spectral_derivative()), lo, hi, 1.0, m_list))
}

/// Centre of `I_s` as `f64`.
pub fn centre(tile: &Tile) -> f64 {
    rat_to_f64(&tile.interval().center())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Tile, Grid, f64, f64) {
        let tile = Tile::frame(0, 0, 18);
        let grid = Grid::new(-4096.0, 0.5, 16384).unwrap();
        // θ-support of the model is 2^{-i}[l/41 + 1/8, (l+2)/41 + 3/8]
        let theta = 18.0 / 41.0 + 0.25;
        (tile, grid, theta, upper_point(&tile))
    }

    #[test]
    fn model_vanishes_off_the_theta_support() {
        let (tile, grid, _, _) = setup();
        let below = phi_model(PacketFamily::Frame, &tile, 18.0 / 41.0 + 0.1, &grid).unwrap();
        assert_eq!(below.sup_norm(), 0.0);
        let above = phi_model(PacketFamily::Frame, &tile, 20.0 / 41.0 + 0.38, &grid).unwrap();
        assert_eq!(above.sup_norm(), 0.0);
        let inside = phi_model(PacketFamily::Frame, &tile, 0.7, &grid).unwrap();
        assert!(inside.sup_norm() > 0.0);
    }

    #[test]
    fn split_reconstitutes_and_has_mean_zero() {
        let (tile, grid, theta, xi_t) = setup();
        let phi = phi_model(PacketFamily::Frame, &tile, theta, &grid).unwrap();
        for l in 1..=5 {
            let pieces = phi_split(&phi, &tile, xi_t, l);
            let r = split_report(&pieces, &tile, xi_t, &[2.0]);
            assert!(r.reconstitution <= 1e-10 * phi.sup_norm(), "{l}");
            assert_eq!(r.tilde_outside, 0.0);
            assert!(r.tilde_mean <= 1e-12 * phi.lp_norm(1.0), "{l}");
            assert!(r.main_mean < 1e-8, "{l}: {}", r.main_mean);
        }
        let zero = phi_split(&phi, &tile, xi_t, 0);
        assert_eq!(zero.tilde.sup_norm(), 0.0);
        assert_eq!(zero.main, phi);
    }

    #[test]
    fn adaptedness_decays_once_the_cutoff_clears_the_packet() {
        let tile = Tile::frame(0, 0, 18);
        let grid = Grid::new(-8192.0, 0.5, 32768).unwrap();
        let theta = 18.0 / 41.0 + 0.25;
        let xi_t = upper_point(&tile);
        let phi = phi_model(PacketFamily::Frame, &tile, theta, &grid).unwrap();
        let c: Vec<f64> = (1..=13)
            .map(|l| split_report(&phi_split(&phi, &tile, xi_t, l), &tile, xi_t, &[2.0]).adapted.entries[0].a_value)
            .collect();
        for w in c.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{c:?}");
        }
        // l = 10..13 sit beyond the spatial spread ~41|I_s| of the packet
        for l in 10..13 {
            assert!(c[l] <= c[l - 1] / 4.0, "{l}: {c:?}");
        }
        let envelope = c.iter().enumerate().map(|(k, v)| v * 4f64.powi(k as i32 + 1)).fold(0.0, f64::max);
        assert!(envelope.is_finite() && envelope < 1e7);
    }

    #[test]
    fn localization_constants_grow_with_m() {
        let tile = Tile::frame(1, 3, 25);
        let grid = Grid::new(-8192.0, 0.5, 32768).unwrap();
        let theta = (25.0 / 41.0 + 0.25) / 2.0;
        let r = localization(PacketFamily::Frame, &tile, theta, &grid, &[1.0, 2.0, 4.0]).unwrap();
        let a: Vec<f64> = r.entries.iter().map(|e| e.a_value).collect();
        assert!(a.iter().all(|v| v.is_finite() && *v > 0.0));
        assert!(a[0] <= a[1] && a[1] <= a[2]);
    }
}
