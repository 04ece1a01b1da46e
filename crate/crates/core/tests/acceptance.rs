//! End-to-end acceptance gate: one numbered check per quantitative claim the
//! library is built to satisfy, each printing a pass/fail line with the
//! observed margins. Run with `--nocapture` to see the lines on success.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use stripes_core::{
    check_1d_optimization, check_penalization, compare_patterns, d2e_tau, decomposed_energy,
    direct_energy, d_eta, e_tau, fit_profile, h_box, h_star, kernel_constants, khat_tau,
    Cube, ModelParams, PeriodicSet, QuadratureSpec, GL8_NODES, GL8_WEIGHTS,
};

const SEED: u64 = 0x2026_0825;

fn blocky_grid(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    let bits: Vec<bool> = (0..n * n).map(|_| rng.gen_bool(0.45)).collect();
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
}

fn criterion_1() -> (bool, String) {
    let params = ModelParams::new(1, 3.0, 0.0).unwrap();
    let opt = h_star(&params, 1e-12).unwrap();
    let h_exact = 4.0 * std::f64::consts::LN_2;
    let e_exact = -1.0 / (8.0 * std::f64::consts::LN_2);
    let dh = (opt.h - h_exact).abs();
    let de = (opt.energy - e_exact).abs();
    (
        dh <= 1e-8 && de <= 1e-10,
        format!("|h - 4ln2| = {dh:.2e} (tol 1e-8), |e - (-1/8ln2)| = {de:.2e} (tol 1e-10)"),
    )
}

fn criterion_2() -> (bool, String) {
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    for dim in [1usize, 2] {
        let p = (dim + 2) as f64;
        for it in 0..5 {
            let tau = 0.01 * (5.0f64).powf(it as f64 / 4.0);
            let params = ModelParams::new(dim, p, tau).unwrap();
            for ih in 0..5 {
                let h = 1.0 + ih as f64;
                let l = 4.0 * h;
                let e = PeriodicSet::make_stripes(dim, l, 0, h, 0.0).unwrap();
                let quad = QuadratureSpec::for_box(l, 64);
                let direct = direct_energy(&e, &params, &quad).unwrap().total;
                let series = e_tau(&params, h).unwrap();
                let dev = (direct - series).abs() / series.abs();
                if dev > worst {
                    worst = dev;
                    worst_at = format!("d={dim} tau={tau:.4} h={h}");
                }
            }
        }
    }
    (
        worst <= 1e-5,
        format!("max relative deviation {worst:.2e} at {worst_at} (tol 1e-5, 50 cases)"),
    )
}

fn criterion_3() -> (bool, String) {
    let params = ModelParams::new(2, 4.0, 0.02).unwrap();
    let h = h_star(&params, 1e-10).unwrap().h;
    let l = 6.0 * h;
    let e = PeriodicSet::make_stripes(2, l, 0, h, 0.0).unwrap();
    let quad = QuadratureSpec::for_box(l, 96);
    let direct = direct_energy(&e, &params, &quad).unwrap().total;
    let split = decomposed_energy(&e, &params, &quad).unwrap().total;
    let dev = (direct - split).abs() / direct.abs();
    (
        dev <= 1e-5,
        format!("stripes at 3 periods: |direct - decomposed|/|direct| = {dev:.2e} (tol 1e-5)"),
    )
}

fn criterion_4() -> (bool, String) {
    let params = ModelParams::new(2, 4.0, 0.05).unwrap();
    let l = 8.0;
    let n = 64;
    let quad = QuadratureSpec::for_box(l, n);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 4);
    let mut max_excess = f64::NEG_INFINITY;
    let mut max_gap = 0.0f64;
    for _ in 0..100 {
        let e = PeriodicSet::from_grid(2, l, n, blocky_grid(&mut rng, n)).unwrap();
        let direct = direct_energy(&e, &params, &quad).unwrap().total;
        let split = decomposed_energy(&e, &params, &quad).unwrap().total;
        max_excess = max_excess.max(split - direct);
        max_gap = max_gap.max((direct - split).abs());
    }
    (
        max_excess <= 1e-6,
        format!(
            "100 random grids: max(decomposed - direct) = {max_excess:.2e} (tol 1e-6), max |gap| = {max_gap:.2e}"
        ),
    )
}

fn criterion_5() -> (bool, String) {
    let mut worst = 0.0f64;
    for dim in [1usize, 2, 3] {
        let p = (dim + 2) as f64;
        for tau in [1.0, 0.1, 0.01] {
            let params = ModelParams::new(dim, p, tau).unwrap();
            let a = params.a();
            let konst = kernel_constants(&params).unwrap();
            let expected = 2.0 * konst.c1 * konst.c2 / tau;
            // One-sided moment on geometric panels, doubled by symmetry.
            let mut value = 0.0;
            let mut lo = 0.0f64;
            let mut hi = a;
            for _ in 0..36 {
                let (c, hw) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                for (x, w) in GL8_NODES.iter().zip(GL8_WEIGHTS) {
                    let rho = c + hw * x;
                    value += w * hw * rho * khat_tau(&params, rho).unwrap();
                }
                lo = hi;
                hi *= 2.0;
            }
            let dev = (2.0 * value - expected).abs() / expected;
            worst = worst.max(dev);
        }
    }
    (
        worst <= 1e-8,
        format!("marginal-kernel moment vs 2 c1 c2 / tau: max rel dev {worst:.2e} (tol 1e-8, 9 cases)"),
    )
}

fn brute_fit(a: &[f64], bin: f64, eta: f64) -> f64 {
    let res = a.len();
    let m = ((eta / bin - 1e-9).ceil() as usize).max(1).min(res + 1);
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << res) {
        let g: Vec<bool> = (0..res).map(|t| mask >> t & 1 == 1).collect();
        let mut ok = true;
        let mut start = 0;
        for t in 1..=res {
            if t == res || g[t] != g[start] {
                let interior = start > 0 && t < res;
                if interior && t - start < m {
                    ok = false;
                    break;
                }
                start = t;
            }
        }
        if !ok {
            continue;
        }
        let cost: f64 = a
            .iter()
            .zip(&g)
            .map(|(&av, &gv)| if gv { 1.0 - av } else { av })
            .sum::<f64>()
            * bin;
        best = best.min(cost);
    }
    best
}

fn criterion_6() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 6);
    let mut max_dp_dev = 0.0f64;
    for _ in 0..200 {
        let res = rng.gen_range(4..=12usize);
        let a: Vec<f64> = (0..res).map(|_| rng.gen()).collect();
        let bin = rng.gen_range(0.05..0.5);
        let eta = bin * rng.gen_range(1.0..(res as f64 + 2.0));
        let (cost, _) = fit_profile(&a, bin, eta);
        max_dp_dev = max_dp_dev.max((cost - brute_fit(&a, bin, eta)).abs());
    }
    let dp_ok = max_dp_dev <= 1e-12;

    // Window-shift stability of the stripe distance.
    let params_l = 8.0;
    let n = 32;
    let side = 4.0;
    let eta = 0.5;
    let res = 32;
    let bin = side / res as f64;
    let mut fitted = 0.0f64;
    let mut bound_ok = true;
    for probe in 0..500 {
        let e = PeriodicSet::from_grid(2, params_l, n, blocky_grid(&mut rng, n)).unwrap();
        let z = vec![rng.gen_range(0.0..params_l), rng.gen_range(0.0..params_l)];
        let axis = probe % 2;
        let s = rng.gen_range(0.25..1.0);
        let mut z2 = z.clone();
        z2[axis] += s;
        let d0 = d_eta(&e, &Cube::new(z, side), eta, res).unwrap().distance;
        let d1 = d_eta(&e, &Cube::new(z2, side), eta, res).unwrap().distance;
        let dd = (d1 - d0).abs();
        bound_ok &= dd <= (4.0 * s + 2.0 * bin) / side + 1e-12;
        fitted = fitted.max(dd * side / s);
    }
    let lip_ok = bound_ok && fitted <= 5.0;
    (
        dp_ok && lip_ok,
        format!(
            "DP vs brute force: max |cost gap| = {max_dp_dev:.2e} over 200 instances; \
             shift stability: fitted constant {fitted:.3} (cap 5.0) over 500 probes"
        ),
    )
}

fn criterion_7() -> (bool, String) {
    let params = ModelParams::new(1, 3.0, 0.05).unwrap();
    let out = check_penalization(&params, 1000, SEED ^ 7).unwrap();
    let witness: Value = serde_json::from_str(&out.witness).unwrap();
    let eta0 = witness["empirical_eta0"]
        .as_f64()
        .map_or("none observed (all r > 0)".to_string(), |v| format!("{v:.3}"));
    (
        out.passed,
        format!(
            "gap bound margin >= {:.3e} over {} boundaries; empirical eta0 = {eta0}",
            out.margin, out.samples
        ),
    )
}

fn criterion_8() -> (bool, String) {
    let params = ModelParams::new(1, 3.0, 0.05).unwrap();
    let hs = h_star(&params, 1e-10).unwrap().h;
    let mut all_ok = true;
    let mut details = Vec::new();
    for (i, mult) in [10.0, 20.0, 40.0].iter().enumerate() {
        let out = check_1d_optimization(&params, mult * hs, 334, SEED ^ (8 + i as u64)).unwrap();
        let witness: Value = serde_json::from_str(&out.witness).unwrap();
        let c0 = witness["empirical_c0"].as_f64().unwrap();
        let comm = witness["commensurate_margin"].as_f64().unwrap();
        all_ok &= out.passed && comm.abs() <= 1.0;
        details.push(format!("|I|={mult}h*: c0={c0:.3}, commensurate gap={comm:.1e}"));
    }
    (all_ok, format!("1002 profiles; {}", details.join("; ")))
}

fn criterion_9() -> (bool, String) {
    let mut ok = true;
    let mut max_product = 0.0f64;
    let mut cap = f64::INFINITY;
    for tau in [0.01, 0.005] {
        let params = ModelParams::new(1, 3.0, tau).unwrap();
        let hs = h_star(&params, 1e-12).unwrap().h;
        cap = cap.min(4.0 * hs * hs);
        for l in [20.0, 40.0, 80.0, 160.0, 320.0] {
            let hb = h_box(&params, l, 1e-10).unwrap();
            let product = (hb.h - hs).abs() * l;
            max_product = max_product.max(product);
            ok &= product <= 4.0 * hs * hs;
            ok &= d2e_tau(&params, hb.h).unwrap() > 0.0;
        }
    }
    (
        ok,
        format!(
            "max |h_box - h_star|*L = {max_product:.3} over 10 cases (cap 4 h*^2 = {cap:.3}); d2e(h_box) > 0 throughout"
        ),
    )
}

fn criterion_10() -> (bool, String) {
    let params = ModelParams::new(2, 4.0, 0.02).unwrap();
    let hs = h_star(&params, 1e-10).unwrap().h;
    let rows = compare_patterns(&params, 16.0 * hs, 240).unwrap();
    let stripes_first = rows[0].name.starts_with("stripes-optimal");
    let margin = rows[1].energy - rows[0].energy;
    let sweeps = rows.iter().filter(|r| r.name.starts_with("checkerboard")).count();
    (
        stripes_first && margin > 0.0 && sweeps == 10,
        format!(
            "best = {} ({:.6}); runner-up = {} (+{margin:.2e}); {} competitors incl. {sweeps} checkerboards",
            rows[0].name,
            rows[0].energy,
            rows[1].name,
            rows.len() - 1,
        ),
    )
}

#[test]
fn acceptance() {
    let checks: Vec<(usize, fn() -> (bool, String))> = vec![
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut all = true;
    for (i, f) in checks {
        let start = std::time::Instant::now();
        let (ok, detail) = f();
        all &= ok;
        println!(
            "acceptance {i}: {} — {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    assert!(all, "at least one acceptance criterion failed; see lines above");
}
