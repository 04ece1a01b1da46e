//! Property tests of the crate-level invariants: symmetries of the energy,
//! agreement of the two evaluation routes, kernel rescaling, and the
//! per-boundary penalization bound on random profiles.

use proptest::prelude::*;
use stripes_core::{
    decomposed_energy, direct_energy, k1, k_tau, kernel_constants, r_tau_1d, ModelParams,
    PeriodicSet, QuadratureSpec, SliceProfile,
};

fn random_grid_strategy(n: usize) -> impl Strategy<Value = Vec<u8>> {
    // Blocky random sets: random cells biased away from salt-and-pepper noise
    // by OR-ing a shifted copy, so perimeters stay moderate.
    prop::collection::vec(prop::bool::weighted(0.45), n * n).prop_map(move |bits| {
        let mut cells = vec![0u8; n * n];
        for j2 in 0..n {
            for j1 in 0..n {
                let a = bits[j1 + n * j2];
                let b = bits[(j1 + 1) % n + n * j2];
                let c = bits[j1 + n * ((j2 + 1) % n)];
                cells[j1 + n * j2] = (a && (b || c)) as u8;
            }
        }
        cells
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    // The energy is blind to translations, axis relabeling, and swapping the
    // set with its complement.
    #[test]
    fn energy_respects_the_lattice_symmetries(
        cells in random_grid_strategy(16),
        sh1 in 0usize..16,
        sh2 in 0usize..16,
    ) {
        let params = ModelParams::new(2, 4.0, 0.05).unwrap();
        let l = 6.0;
        let n = 16usize;
        let dx = l / n as f64;
        let e = PeriodicSet::from_grid(2, l, n, cells).unwrap();
        let quad = QuadratureSpec::for_box(l, n);
        let base = direct_energy(&e, &params, &quad).unwrap().total;

        let moved = e.translate(&[sh1 as f64 * dx, sh2 as f64 * dx]).unwrap();
        let flipped = e.complement().unwrap();
        let swapped = e.permute_axes(&[1, 0]).unwrap();
        for other in [moved, flipped, swapped] {
            let v = direct_energy(&other, &params, &quad).unwrap().total;
            prop_assert!(
                (v - base).abs() <= 1e-9 * base.abs().max(1.0),
                "symmetry breaks the energy: {base} vs {v}"
            );
        }
    }

    // The sliced decomposition reproduces the direct evaluation (and in
    // particular never exceeds it beyond quadrature noise).
    #[test]
    fn decomposition_agrees_with_direct_on_random_sets(
        cells in random_grid_strategy(16),
    ) {
        let params = ModelParams::new(2, 4.0, 0.05).unwrap();
        let l = 6.0;
        let e = PeriodicSet::from_grid(2, l, 16, cells).unwrap();
        let quad = QuadratureSpec::for_box(l, 16);
        let direct = direct_energy(&e, &params, &quad).unwrap().total;
        let split = decomposed_energy(&e, &params, &quad).unwrap().total;
        prop_assert!(split <= direct + 1e-6, "direct {direct} split {split}");
        prop_assert!((direct - split).abs() <= 1e-6, "direct {direct} split {split}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    // Rescaling lengths by a = tau^{1/beta} turns the regularized kernel into
    // the unregularized one: K_tau(z) = a^{-p} K_1(z/a).
    #[test]
    fn kernel_rescales_onto_the_unit_profile(
        dim in 1usize..=3,
        extra in 0.0f64..3.0,
        tau in 1e-3f64..1.0,
        coords in prop::collection::vec(-8.0f64..8.0, 3),
    ) {
        let p = (dim + 2) as f64 + extra;
        let params = ModelParams::new(dim, p, tau).unwrap();
        let a = params.a();
        let z = &coords[..dim];
        let scaled: Vec<f64> = z.iter().map(|v| v / a).collect();
        let lhs = k_tau(&params, z).unwrap();
        let rhs = a.powf(-p) * k1(&params, &scaled).unwrap();
        prop_assert!(
            (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-300),
            "dim {dim} p {p} tau {tau}: {lhs} vs {rhs}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    // Every boundary of a 1D profile pays at least the gap-driven
    // penalization, capped by 1/tau.
    #[test]
    fn penalization_dominates_the_gap_bound(
        raw in prop::collection::vec(0.01f64..1.0, 4..12),
        tau in 0.02f64..0.2,
    ) {
        let params = ModelParams::new(1, 3.0, tau).unwrap();
        let konst = kernel_constants(&params).unwrap();
        let c12 = konst.c1 * konst.c2;
        let beta = params.beta();

        // Normalized cumulative positions with a floor keep gaps positive.
        let count = raw.len() - raw.len() % 2;
        let total: f64 = raw[..count].iter().sum();
        let period = 20.0;
        let mut acc = 0.0;
        let mut boundaries = Vec::with_capacity(count);
        for v in &raw[..count] {
            boundaries.push(acc / total * period);
            acc += v;
        }
        let min_gap = boundaries
            .windows(2)
            .map(|w| w[1] - w[0])
            .chain(std::iter::once(boundaries[0] + period - boundaries[count - 1]))
            .fold(f64::INFINITY, f64::min);
        prop_assume!(min_gap > 4.0 * params.a());

        let profile = SliceProfile { period, boundaries, starts_inside: true };
        let quad = QuadratureSpec::for_box(period, 32);
        for &s in &profile.boundaries {
            let (prev, next) = profile.neighbors(s).unwrap();
            let r = r_tau_1d(&profile, s, &params, &quad).unwrap();
            let bound = -1.0
                + c12 * (s - prev).powf(-beta).min(1.0 / tau)
                + c12 * (next - s).powf(-beta).min(1.0 / tau);
            prop_assert!(r >= bound - 1e-9, "r {r} below bound {bound}");
        }
    }
}
