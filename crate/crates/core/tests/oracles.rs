//! Public operations against brute-force oracles written independently here.

use num_complex::Complex64;
use proptest::prelude::*;
use rtlab_core::seqnorms::{variation_norm, VariationMode, VectorSequence};
use rtlab_core::signal::SampledSignal;
use rtlab_core::tf::{analyze_scale, synthesize_scale, Grid};

/// `sup|a| + (max over increasing subsequences Σ|a_{n+1} - a_n|^r)^{1/r}` by bitmask.
fn variation_oracle(a: &[f64], r: f64) -> f64 {
    let sup = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut best = 0.0f64;
    for mask in 1u32..(1 << a.len()) {
        let picked: Vec<f64> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| a[i]).collect();
        let s: f64 = picked.windows(2).map(|w| (w[1] - w[0]).abs().powf(r)).sum();
        best = best.max(s);
    }
    sup + best.powf(1.0 / r)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn exact_variation_matches_enumeration(
        a in prop::collection::vec(-4i32..=4, 1..=9),
        r in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0]),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let seq = VectorSequence::from_reals(0, &a);
        let got = variation_norm(&seq, r, VariationMode::Exact).unwrap();
        let want = variation_oracle(&a, r);
        prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want), "{} vs {}", got, want);
        let lower = variation_norm(&seq, r, VariationMode::DpLower).unwrap();
        prop_assert!(lower <= got * (1.0 + 1e-12));
    }

    #[test]
    fn frame_analysis_is_isometric(seed in 0u64..1000, i in -1i32..=1) {
        use rand::{Rng, SeedableRng};
        let grid = Grid::new(-64.0, 0.25, 512).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut spec = grid.spectrum(|_| Complex64::new(0.0, 0.0)).unwrap();
        for idx in 0..grid.n {
            if grid.xi(idx).abs() < 1.0 {
                spec.values[idx] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let f: SampledSignal = spec.inverse();
        let c = analyze_scale(&f, i).unwrap();
        let energy = f.l2_norm().powi(2);
        prop_assert!((c.energy() - energy).abs() <= 1e-9 * energy);
        let g = synthesize_scale(&c, &grid, 0.0).unwrap();
        prop_assert!(g.sub(&f).unwrap().l2_norm() <= 1e-9 * energy.sqrt());
    }
}
