//! Executable checks of the library's quantitative behavior: decomposition
//! equality on stripes, the per-boundary penalization bound, interval-level
//! optimization margins, convexity windows with period drift, the scaling of
//! kernel-difference bounds, pattern rankings, and a local-rigidity probe.
//!
//! Each check returns a [`CheckOutcome`] whose `margin` is the worst slack
//! observed (nonnegative exactly when the check passes) and whose `witness`
//! serializes the worst-case instance for replay.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::functional::{
    decomposed_energy, direct_energy, local_energy, r_tau_1d, QuadratureSpec,
};
use crate::kernel::kernel_constants;
use crate::params::ModelParams;
use crate::setgeom::{PeriodicSet, SliceProfile};
use crate::stripe1d::{
    convexity_window, d2e_tau, de_tau, e_tau, h_box, h_interval, h_star, ConvexityWindow,
};
use crate::stripedist::{d_eta, Cube};
use crate::{Error, Result};

/// Result of one verification check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    /// JSON description of the worst-case instance observed.
    pub witness: String,
    /// Worst slack across samples; the check passes iff it is >= 0.
    pub margin: f64,
    pub samples: u64,
}

/// Report of a full verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub outcomes: Vec<CheckOutcome>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Numerics(format!("report serialization failed: {e}")))
    }

    /// Human-readable table, one line per check.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let width = self.outcomes.iter().map(|o| o.name.len()).max().unwrap_or(4).max(4);
        for o in &self.outcomes {
            out.push_str(&format!(
                "[{}] {:width$}  margin = {:>12.4e}  samples = {}\n",
                if o.passed { "PASS" } else { "FAIL" },
                o.name,
                o.margin,
                o.samples,
            ));
        }
        out.push_str(&format!(
            "overall: {}\n",
            if self.passed { "PASS" } else { "FAIL" }
        ));
        out
    }
}

// ---------------------------------------------------------------------------
// Random profile ensembles.

fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> usize {
    let cutoff = (-lambda).exp();
    let mut k = 0usize;
    let mut prod = 1.0;
    loop {
        prod *= rng.gen::<f64>();
        if prod <= cutoff || k > (4.0 * lambda) as usize + 30 {
            return k;
        }
        k += 1;
    }
}

/// Random periodic profile: Poisson boundary count (rounded up to even),
/// uniform positions, resampled until every cyclic gap exceeds `floor`.
fn sample_profile(
    rng: &mut ChaCha8Rng,
    period: f64,
    lambda: f64,
    floor: f64,
) -> SliceProfile {
    let mut lam = lambda;
    for attempt in 0..1200 {
        if attempt > 0 && attempt % 150 == 0 {
            lam *= 0.75;
        }
        let mut count = poisson(rng, lam);
        if count % 2 == 1 {
            count += 1;
        }
        if count < 2 {
            continue;
        }
        let mut b: Vec<f64> = (0..count).map(|_| rng.gen_range(0.0..period)).collect();
        b.sort_unstable_by(f64::total_cmp);
        let interior_ok = b.windows(2).all(|w| w[1] - w[0] >= floor);
        let wrap_ok = b[0] + period - b[count - 1] >= floor;
        if interior_ok && wrap_ok {
            return SliceProfile { period, boundaries: b, starts_inside: rng.gen() };
        }
    }
    // Dense rejection regions degrade to plain half-filled stripes.
    let h = period / 4.0;
    SliceProfile {
        period,
        boundaries: vec![0.0, h, 2.0 * h, 3.0 * h],
        starts_inside: true,
    }
}

fn stripes_profile(period: f64, h: f64) -> SliceProfile {
    let k = (period / (2.0 * h)).round().max(1.0) as usize;
    let w = period / (2 * k) as f64;
    SliceProfile {
        period,
        boundaries: (0..2 * k).map(|j| j as f64 * w).collect(),
        starts_inside: true,
    }
}

fn sum_r(profile: &SliceProfile, params: &ModelParams, quad: &QuadratureSpec) -> Result<f64> {
    profile
        .boundaries
        .iter()
        .map(|&s| r_tau_1d(profile, s, params, quad))
        .sum()
}

// ---------------------------------------------------------------------------
// Stripe equality.

/// Checks that the direct and decomposed evaluations agree on unions of
/// stripes to the given relative tolerance. Stripe widths are snapped to the
/// nearest commensurate width `L/2k`.
pub fn check_stripe_equality(
    cases: &[(ModelParams, f64, f64)],
    tol_rel: f64,
) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    let mut witness = json!(null);
    for (params, h, l) in cases {
        let k = (l / (2.0 * h)).round().max(1.0) as usize;
        let h_snap = l / (2 * k) as f64;
        let n = (16 * k).max(32);
        let e = PeriodicSet::make_stripes(params.dim, *l, 0, h_snap, 0.0)?;
        let quad = QuadratureSpec::for_box(*l, n);
        let direct = direct_energy(&e, params, &quad)?;
        let split = decomposed_energy(&e, params, &quad)?;
        let dev = (direct.total - split.total).abs() / direct.total.abs().max(1e-300);
        if dev >= worst {
            worst = dev;
            witness = json!({
                "dim": params.dim, "p": params.p, "tau": params.tau,
                "h": h_snap, "L": l, "grid_n": n,
                "direct": direct.total, "decomposed": split.total,
                "relative_deviation": dev,
            });
        }
    }
    Ok(CheckOutcome {
        name: "stripe-equality".into(),
        passed: worst <= tol_rel,
        witness: witness.to_string(),
        margin: tol_rel - worst,
        samples: cases.len() as u64,
    })
}

// ---------------------------------------------------------------------------
// Penalization bound.

/// Checks the per-boundary lower bound
/// `r >= -1 + C1 C2 [min(gap_+^{-beta}, 1/tau) + min(gap_-^{-beta}, 1/tau)]`
/// on random profiles, and reports the empirical largest `eta0` such that
/// every boundary with a gap below `eta0` had `r > 0`.
pub fn check_penalization(
    params: &ModelParams,
    ensemble: usize,
    seed: u64,
) -> Result<CheckOutcome> {
    params.require_positive_tau("penalization check")?;
    let konst = kernel_constants(params)?;
    let c12 = konst.c1 * konst.c2;
    let beta = params.beta();
    let hs = h_star(params, 1e-10)?.h;
    let period = 12.0 * hs;
    let floor = 4.0 * params.a();
    let quad = QuadratureSpec::for_box(period, 32);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profiles: Vec<SliceProfile> = (0..ensemble)
        .map(|i| {
            let lam = if i % 2 == 0 { 12.0 } else { 30.0 };
            sample_profile(&mut rng, period, lam, floor)
        })
        .collect();

    struct Probe {
        margin: f64,
        min_gap: f64,
        r: f64,
        bound: f64,
        nonpositive_r: bool,
    }
    let probes: Vec<Vec<Probe>> = profiles
        .par_iter()
        .map(|profile| -> Result<Vec<Probe>> {
            profile
                .boundaries
                .iter()
                .map(|&s| {
                    let (prev, next) = profile.neighbors(s)?;
                    let (gm, gp) = (s - prev, next - s);
                    let r = r_tau_1d(profile, s, params, &quad)?;
                    let bound = -1.0
                        + c12 * gp.powf(-beta).min(1.0 / params.tau)
                        + c12 * gm.powf(-beta).min(1.0 / params.tau);
                    Ok(Probe {
                        margin: r - bound,
                        min_gap: gm.min(gp),
                        r,
                        bound,
                        nonpositive_r: r <= 0.0,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut min_margin = f64::INFINITY;
    let mut worst = json!(null);
    let mut eta0 = f64::INFINITY;
    let mut samples = 0u64;
    for row in &probes {
        for pr in row {
            samples += 1;
            if pr.nonpositive_r {
                eta0 = eta0.min(pr.min_gap);
            }
            if pr.margin < min_margin {
                min_margin = pr.margin;
                worst = json!({
                    "r": pr.r, "bound": pr.bound, "min_gap": pr.min_gap,
                    "margin": pr.margin,
                });
            }
        }
    }
    let witness = json!({
        "worst": worst,
        "empirical_eta0": if eta0.is_finite() { Some(eta0) } else { None },
        "gap_floor": floor,
        "period": period,
    });
    Ok(CheckOutcome {
        name: "penalization-bound".into(),
        passed: min_margin >= -1e-9,
        witness: witness.to_string(),
        margin: min_margin,
        samples,
    })
}

// ---------------------------------------------------------------------------
// Interval optimization.

/// Cap on the additive constant allowed in the interval optimization bound.
const C0_CAP: f64 = 5.0;

/// Checks that the summed penalization terms of random profiles on an
/// interval stay above `|I| * e_tau(h(I)) - C0` for a fixed small `C0`, and
/// that commensurate periodic profiles sit at the bound itself.
pub fn check_1d_optimization(
    params: &ModelParams,
    interval_len: f64,
    ensemble: usize,
    seed: u64,
) -> Result<CheckOutcome> {
    params.require_positive_tau("interval optimization check")?;
    let hs = h_star(params, 1e-10)?.h;
    if interval_len < 4.0 * hs {
        return Err(Error::InvalidParams(format!(
            "interval length {interval_len} below the observed validity threshold {}",
            4.0 * hs
        )));
    }
    let hi = h_interval(params, interval_len, 1e-10)?;
    let rhs = interval_len * hi.energy;
    let floor = 4.0 * params.a();
    let quad = QuadratureSpec::for_box(interval_len, 32);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lam = interval_len / hs;
    let profiles: Vec<SliceProfile> = (0..ensemble)
        .map(|i| {
            let lam_i = if i % 3 == 2 { 2.5 * lam } else { lam };
            sample_profile(&mut rng, interval_len, lam_i, floor)
        })
        .collect();
    let margins: Vec<f64> = profiles
        .par_iter()
        .map(|pr| Ok(sum_r(pr, params, &quad)? - rhs))
        .collect::<Result<_>>()?;

    let (mut min_margin, mut worst_idx) = (f64::INFINITY, 0);
    for (i, &m) in margins.iter().enumerate() {
        if m < min_margin {
            min_margin = m;
            worst_idx = i;
        }
    }
    // A profile striped at exactly the commensurate optimum matches the
    // bound: its summed terms equal the interval energy.
    let comm = stripes_profile(interval_len, hi.h);
    let comm_margin = sum_r(&comm, params, &quad)? - rhs;

    let witness = json!({
        "interval_len": interval_len,
        "h_interval": hi.h,
        "interval_energy_density": hi.energy,
        "empirical_c0": (-min_margin).max(0.0),
        "commensurate_margin": comm_margin,
        "worst_profile_boundaries": profiles[worst_idx].boundaries,
    });
    let margin = (min_margin + C0_CAP).min(1.0 - comm_margin.abs());
    Ok(CheckOutcome {
        name: "interval-optimization".into(),
        passed: margin >= 0.0,
        witness: witness.to_string(),
        margin,
        samples: ensemble as u64 + 1,
    })
}

// ---------------------------------------------------------------------------
// Convexity window and period drift.

/// Checks, for each `(params, L)`, that the box-constrained optimal width
/// lies inside the energy sublevel window, that the energy is strictly
/// convex there, and that the drift `|h_box - h_star| * L` and the induced
/// slope/energy gaps respect the snapping bounds derived from convexity.
pub fn check_convexity_and_window(
    grid: &[(ModelParams, f64)],
    eps: f64,
) -> Result<CheckOutcome> {
    let mut windows: Vec<(usize, f64, f64, ConvexityWindow, f64, f64)> = Vec::new();
    let mut min_margin = f64::INFINITY;
    let mut worst = json!(null);
    for (params, l) in grid {
        let key = windows
            .iter()
            .position(|(d, p, t, ..)| *d == params.dim && *p == params.p && *t == params.tau);
        let (window, d2max) = match key {
            Some(i) => (windows[i].3, windows[i].4),
            None => {
                let w = convexity_window(params, eps)?;
                let mut d2max = 0.0f64;
                for i in 0..=48 {
                    let h = w.c1bar + (w.c2bar - w.c1bar) * i as f64 / 48.0;
                    d2max = d2max.max(d2e_tau(params, h)?);
                }
                windows.push((params.dim, params.p, params.tau, w, d2max, 0.0));
                (w, d2max)
            }
        };
        let hs = h_star(params, 1e-12)?.h;
        let hb = h_box(params, *l, 1e-10)?;
        let containment = (hb.h - window.c1bar).min(window.c2bar - hb.h);
        let convexity = d2e_tau(params, hb.h)? - window.c3bar;
        // Snapping to widths L/2k moves the optimum by at most two slots,
        // roughly 4 h*^2 / L; slope and energy gaps follow from convexity.
        let drift = (hb.h - hs).abs() * l;
        let drift_margin = 4.0 * hs * hs - drift;
        let slope = de_tau(params, hb.h)?.abs();
        let slope_margin = 4.0 * hs * hs * d2max / l - slope;
        let egap = (e_tau(params, hb.h)? - e_tau(params, hs)?).abs();
        let egap_margin = 8.0 * d2max * hs.powi(4) - egap * l * l;
        let margin = containment
            .min(convexity)
            .min(drift_margin)
            .min(slope_margin)
            .min(egap_margin);
        if margin < min_margin {
            min_margin = margin;
            worst = json!({
                "dim": params.dim, "p": params.p, "tau": params.tau, "L": l,
                "h_box": hb.h, "h_star": hs,
                "window": [window.c1bar, window.c2bar], "c3bar": window.c3bar,
                "drift_product": drift, "slope": slope, "energy_gap": egap,
                "margins": {
                    "containment": containment, "convexity": convexity,
                    "drift": drift_margin, "slope": slope_margin, "energy_gap": egap_margin,
                },
            });
        }
    }
    Ok(CheckOutcome {
        name: "convexity-window".into(),
        passed: min_margin >= 0.0,
        witness: worst.to_string(),
        margin: min_margin,
        samples: grid.len() as u64,
    })
}

// ---------------------------------------------------------------------------
// Kernel difference scaling.

/// Checks that the sup over the convexity window of the differences between
/// the regularized and unregularized stripe energy (and its first two width
/// derivatives) scales linearly in `tau^{1/beta}`: log-log slope `1 ± 0.1`.
pub fn check_kernel_difference_bounds(
    dim: usize,
    p: f64,
    tau_grid: &[f64],
) -> Result<CheckOutcome> {
    if tau_grid.len() < 2 {
        return Err(Error::InvalidParams("need at least two tau samples".into()));
    }
    let zero = ModelParams::new(dim, p, 0.0)?;
    let window = convexity_window(&zero, 0.02)?;
    let hs: Vec<f64> = (0..=48)
        .map(|i| window.c1bar + (window.c2bar - window.c1bar) * i as f64 / 48.0)
        .collect();
    let mut xs = Vec::new();
    let mut ys = [Vec::new(), Vec::new(), Vec::new()];
    let mut sups_table = Vec::new();
    for &tau in tau_grid {
        let params = ModelParams::new(dim, p, tau)?;
        let mut sups = [0.0f64; 3];
        for &h in &hs {
            sups[0] = sups[0].max((e_tau(&params, h)? - e_tau(&zero, h)?).abs());
            sups[1] = sups[1].max((de_tau(&params, h)? - de_tau(&zero, h)?).abs());
            sups[2] = sups[2].max((d2e_tau(&params, h)? - d2e_tau(&zero, h)?).abs());
        }
        xs.push(params.a().ln());
        for (k, s) in sups.iter().enumerate() {
            ys[k].push(s.ln());
        }
        sups_table.push(json!({ "tau": tau, "sups": sups }));
    }
    let slope = |y: &[f64]| -> f64 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let cov: f64 = xs.iter().zip(y).map(|(x, y)| (x - mx) * (y - my)).sum();
        let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        cov / var
    };
    let slopes = [slope(&ys[0]), slope(&ys[1]), slope(&ys[2])];
    let dev = slopes.iter().map(|s| (s - 1.0).abs()).fold(0.0f64, f64::max);
    let witness = json!({
        "dim": dim, "p": p, "slopes": slopes, "per_tau": sups_table,
        "window": [window.c1bar, window.c2bar],
    });
    Ok(CheckOutcome {
        name: format!("kernel-difference-scaling-d{dim}"),
        passed: dev <= 0.1,
        witness: witness.to_string(),
        margin: 0.1 - dev,
        samples: (tau_grid.len() * hs.len() * 3) as u64,
    })
}

// ---------------------------------------------------------------------------
// Pattern comparison.

/// One row of a pattern-energy ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternEnergy {
    pub name: String,
    pub energy: f64,
    pub volume_fraction: f64,
}

fn grid_pattern<F: Fn(usize, usize) -> bool>(
    l: f64,
    n: usize,
    f: F,
) -> Result<PeriodicSet> {
    let mut cells = vec![0u8; n * n];
    for j2 in 0..n {
        for j1 in 0..n {
            cells[j1 + n * j2] = f(j1, j2) as u8;
        }
    }
    PeriodicSet::from_grid(2, l, n, cells)
}

fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n % d == 0).collect()
}

/// Evaluates the energy of a family of density-1/2-ish competitors on a
/// shared grid and returns rows sorted by energy: stripes at the
/// box-commensurate optimal width, off-width stripes, a sweep of
/// checkerboards, a square droplet lattice, and diagonal staircase bands.
pub fn compare_patterns(
    params: &ModelParams,
    l: f64,
    grid_n: usize,
) -> Result<Vec<PatternEnergy>> {
    if params.dim != 2 {
        return Err(Error::InvalidParams("pattern comparison is two-dimensional".into()));
    }
    let hb = h_box(params, l, 1e-10)?;
    let k = (l / (2.0 * hb.h)).round() as usize;
    if grid_n % (2 * k) != 0 {
        return Err(Error::InvalidParams(format!(
            "grid_n = {grid_n} must be a multiple of 2k = {} to resolve the optimal stripes",
            2 * k
        )));
    }
    let w = grid_n / (2 * k);
    // Fine checkerboards push the a-posteriori quadrature estimate past the
    // default budget; ranking gaps are orders of magnitude above it.
    let mut quad = QuadratureSpec::for_box(l, grid_n);
    quad.tol = 1e-6;
    let mut jobs: Vec<(String, PeriodicSet)> = Vec::new();

    let stripe_cells = |w: usize| grid_pattern(l, grid_n, |j1, _| (j1 / w) % 2 == 0);
    jobs.push((format!("stripes-optimal-w{w}"), stripe_cells(w)?));
    let divs = divisors(grid_n / 2);
    let mut offs: Vec<usize> = Vec::new();
    if let Some(&below) = divs.iter().filter(|&&d| d < w).last() {
        offs.push(below);
    }
    if let Some(&above) = divs.iter().find(|&&d| d > w) {
        offs.push(above);
    }
    if divs.contains(&(2 * w)) {
        offs.push(2 * w);
    }
    if w % 2 == 0 && divs.contains(&(w / 2)) {
        offs.push(w / 2);
    }
    offs.sort_unstable();
    offs.dedup();
    offs.retain(|&d| d != w && grid_n % (2 * d) == 0);
    for d in offs {
        jobs.push((format!("stripes-off-w{d}"), stripe_cells(d)?));
    }
    let mut tiles: Vec<usize> = divs
        .iter()
        .copied()
        .filter(|&t| grid_n % (2 * t) == 0)
        .collect();
    tiles.reverse();
    tiles.truncate(10);
    for t in tiles {
        jobs.push((
            format!("checkerboard-t{t}"),
            grid_pattern(l, grid_n, |j1, j2| (j1 / t + j2 / t) % 2 == 0)?,
        ));
    }
    // Square droplets at density near 1/2 on the optimal-period pitch.
    let pitch = 2 * w;
    let side = ((pitch as f64) / std::f64::consts::SQRT_2).round() as usize;
    jobs.push((
        format!("droplets-p{pitch}-s{side}"),
        grid_pattern(l, grid_n, |j1, j2| (j1 % pitch) < side && (j2 % pitch) < side)?,
    ));
    jobs.push((
        format!("staircase-w{w}"),
        grid_pattern(l, grid_n, |j1, j2| ((j1 + j2) % (2 * w)) < w)?,
    ));

    let mut rows: Vec<PatternEnergy> = jobs
        .par_iter()
        .map(|(name, e)| -> Result<PatternEnergy> {
            Ok(PatternEnergy {
                name: name.clone(),
                energy: direct_energy(e, params, &quad)?.total,
                volume_fraction: e.volume_fraction(),
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(rows)
}

/// Wraps [`compare_patterns`] into a pass/fail outcome: the optimal stripes
/// must rank strictly first, and their complement must tie their energy.
pub fn check_pattern_ranking(
    params: &ModelParams,
    l: f64,
    grid_n: usize,
) -> Result<CheckOutcome> {
    let rows = compare_patterns(params, l, grid_n)?;
    let gap = rows[1].energy - rows[0].energy;
    let stripes_first = rows[0].name.starts_with("stripes-optimal");

    let hb = h_box(params, l, 1e-10)?;
    let k = (l / (2.0 * hb.h)).round() as usize;
    let w = grid_n / (2 * k);
    let quad = QuadratureSpec::for_box(l, grid_n);
    let stripes = grid_pattern(l, grid_n, |j1, _| (j1 / w) % 2 == 0)?;
    let e_s = direct_energy(&stripes, params, &quad)?.total;
    let e_c = direct_energy(&stripes.complement()?, params, &quad)?.total;
    let comp_dev = (e_s - e_c).abs() / e_s.abs().max(1e-300);

    let witness = json!({
        "ranking": rows,
        "runner_up_gap": gap,
        "complement_relative_deviation": comp_dev,
    });
    let margin = if stripes_first && comp_dev <= 1e-8 { gap } else { -1.0 };
    Ok(CheckOutcome {
        name: "pattern-ranking".into(),
        passed: margin > 0.0,
        witness: witness.to_string(),
        margin,
        samples: rows.len() as u64 + 1,
    })
}

// ---------------------------------------------------------------------------
// Rigidity probe.

/// One probe row: windows of one test set at one `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityRow {
    pub set: String,
    pub tau: f64,
    /// Windows whose localized energy stays at or below the cap.
    pub bounded_windows: usize,
    pub total_windows: usize,
    /// Largest stripe distance among bounded windows, if any.
    pub max_d_eta_bounded: Option<f64>,
    pub max_f_bar: f64,
}

/// Probes local rigidity: for fixed test sets and decreasing `tau`, reports
/// how many windows keep localized energy below `m_cap` and how far those
/// windows are from stripes. Informational: the claim is asymptotic, so no
/// pass/fail is attached.
pub fn rigidity_probe(
    base: &ModelParams,
    taus: &[f64],
    m_cap: f64,
    l_window: f64,
) -> Result<Vec<RigidityRow>> {
    if base.dim != 2 {
        return Err(Error::InvalidParams("rigidity probe is two-dimensional".into()));
    }
    let l = 2.0 * l_window;
    let n = (4.0 * l).round() as usize;
    let dx = l / n as f64;
    let h = l_window / 4.0;
    let w = (h / dx).round() as usize;
    let band = |j: usize| (j / w) % 2 == 0;
    let sets: Vec<(String, PeriodicSet)> = vec![
        ("stripes".into(), grid_pattern(l, n, |j1, _| band(j1))?),
        (
            "wiggly".into(),
            grid_pattern(l, n, |j1, j2| {
                let shift = (2.0 * (2.0 * std::f64::consts::PI * j2 as f64 / n as f64).sin())
                    .round() as i64;
                band((j1 as i64 - shift).rem_euclid(n as i64) as usize)
            })?,
        ),
        (
            "notched-stripes".into(),
            grid_pattern(l, n, |j1, j2| band(j1) != (j1 < 2 * w && j2 < 2 * w))?,
        ),
    ];
    let kc = n / 4;
    let centers: Vec<Vec<f64>> = (0..16)
        .map(|i| {
            vec![
                ((i % 4) * kc) as f64 * dx + 0.5 * l_window,
                ((i / 4) * kc) as f64 * dx + 0.5 * l_window,
            ]
        })
        .collect();
    let eta = h / 2.0;
    let resolution = (4.0 * l_window / eta).ceil() as usize;

    let mut rows = Vec::new();
    for &tau in taus {
        let params = ModelParams::new(base.dim, base.p, tau)?;
        let quad = QuadratureSpec::for_box(l, n);
        for (name, set) in &sets {
            let mut bounded = 0usize;
            let mut max_d: Option<f64> = None;
            let mut max_f = f64::NEG_INFINITY;
            for z in &centers {
                let (_, total) = local_energy(set, z, l_window, &params, &quad)?;
                max_f = max_f.max(total);
                if total <= m_cap {
                    bounded += 1;
                    let cube = Cube::new(z.clone(), l_window);
                    let d = d_eta(set, &cube, eta, resolution)?.distance;
                    max_d = Some(max_d.map_or(d, |m: f64| m.max(d)));
                }
            }
            rows.push(RigidityRow {
                set: name.clone(),
                tau,
                bounded_windows: bounded,
                total_windows: centers.len(),
                max_d_eta_bounded: max_d,
                max_f_bar: max_f,
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Full run.

type Job = Box<dyn Fn() -> Result<Vec<CheckOutcome>> + Sync + Send>;

/// Names accepted by [`run_suite`], besides `"all"`.
pub fn suite_names() -> Vec<&'static str> {
    vec![
        "stripe-equality",
        "penalization-bound",
        "interval-optimization",
        "convexity-window",
        "kernel-difference-scaling",
        "pattern-ranking",
        "rigidity-probe",
    ]
}

fn default_jobs(seed: u64) -> Result<Vec<(&'static str, Job)>> {
    let p1 = ModelParams::new(1, 3.0, 0.05)?;
    let p2 = ModelParams::new(2, 4.0, 0.02)?;
    let h1 = h_star(&p1, 1e-10)?.h;
    let h2 = h_star(&p2, 1e-10)?.h;

    let jobs: Vec<(&'static str, Job)> = vec![
        (
            "stripe-equality",
            Box::new(move || {
                check_stripe_equality(
                    &[
                        (ModelParams::new(1, 3.0, 0.05)?, h1, 2.0 * h1),
                        (ModelParams::new(2, 4.0, 0.02)?, h2, 4.0 * h2),
                    ],
                    1e-5,
                )
                .map(|o| vec![o])
            }),
        ),
        (
            "penalization-bound",
            Box::new(move || {
                check_penalization(&ModelParams::new(1, 3.0, 0.05)?, 200, seed).map(|o| vec![o])
            }),
        ),
        (
            "interval-optimization",
            Box::new(move || {
                check_1d_optimization(&ModelParams::new(1, 3.0, 0.05)?, 10.0 * h1, 200, seed ^ 1)
                    .map(|o| vec![o])
            }),
        ),
        (
            "convexity-window",
            Box::new(|| {
                let mut grid = Vec::new();
                for tau in [0.01, 0.005] {
                    for l in [20.0, 40.0, 80.0, 160.0] {
                        grid.push((ModelParams::new(1, 3.0, tau)?, l));
                    }
                }
                for l in [30.0, 60.0] {
                    grid.push((ModelParams::new(2, 4.0, 0.01)?, l));
                }
                check_convexity_and_window(&grid, 0.015).map(|o| vec![o])
            }),
        ),
        (
            "kernel-difference-scaling",
            Box::new(|| {
                Ok(vec![
                    check_kernel_difference_bounds(1, 3.0, &[1e-2, 1e-3, 1e-4])?,
                    check_kernel_difference_bounds(2, 4.0, &[1e-2, 1e-3, 1e-4])?,
                ])
            }),
        ),
        (
            "pattern-ranking",
            Box::new(move || {
                let params = ModelParams::new(2, 4.0, 0.02)?;
                check_pattern_ranking(&params, 8.0 * h2, 96).map(|o| vec![o])
            }),
        ),
        (
            "rigidity-probe",
            Box::new(|| {
                let rows =
                    rigidity_probe(&ModelParams::new(2, 4.0, 0.1)?, &[0.1, 0.05, 0.02], 0.0, 8.0)?;
                Ok(vec![CheckOutcome {
                    name: "rigidity-probe (informational)".into(),
                    passed: true,
                    witness: json!({ "rows": rows }).to_string(),
                    margin: 0.0,
                    samples: rows.len() as u64,
                }])
            }),
        ),
    ];
    Ok(jobs)
}

/// Runs every check with library defaults; ensembles derive from `seed`.
pub fn run_all(seed: u64) -> Result<VerifyReport> {
    let jobs = default_jobs(seed)?;
    let nested: Vec<Vec<CheckOutcome>> =
        jobs.par_iter().map(|(_, job)| job()).collect::<Result<_>>()?;
    let mut outcomes: Vec<CheckOutcome> = nested.into_iter().flatten().collect();
    outcomes.sort_by(|a, b| a.name.cmp(&b.name));
    let passed = outcomes.iter().all(|o| o.passed);
    Ok(VerifyReport { outcomes, passed })
}

/// Runs one named check (or `"all"`) with the same defaults as [`run_all`].
pub fn run_suite(name: &str, seed: u64) -> Result<VerifyReport> {
    if name == "all" {
        return run_all(seed);
    }
    let mut jobs = default_jobs(seed)?;
    let pos = jobs.iter().position(|(n, _)| *n == name).ok_or_else(|| {
        Error::InvalidParams(format!(
            "unknown suite {name:?}; available: all, {}",
            suite_names().join(", ")
        ))
    })?;
    let outcomes = (jobs.remove(pos).1)()?;
    let passed = outcomes.iter().all(|o| o.passed);
    Ok(VerifyReport { outcomes, passed })
}
