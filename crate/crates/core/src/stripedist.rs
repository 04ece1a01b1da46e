//! L¹ distance from a local window to unions of stripes, computed by dynamic
//! programming over column occupancies, plus the partition of the period cell
//! into nearly-constant, unstructured, and stripe-oriented regions.
//!
//! The reduction: for a cube window and an axis `i`, the best union of
//! stripes varying along `e_i` depends on the data only through the
//! cross-sectional average `a(t)` of the indicator along `i` (the column
//! occupancy). The fit minimizes `∫ g(1−a) + (1−g)a` over binary profiles
//! `g` whose interior runs are at least `eta` long; runs touching the window
//! edges are unconstrained because their far boundaries lie outside the
//! window.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write as IoWrite;

use crate::setgeom::{PeriodicSet, SetRepr, SliceProfile};
use crate::{Error, Result};

/// Axis-aligned cube window `Q_side(center)`, cyclic within the period cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub center: Vec<f64>,
    pub side: f64,
}

impl Cube {
    pub fn new(center: Vec<f64>, side: f64) -> Self {
        Self { center, side }
    }
}

/// Result of fitting stripe profiles to a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripeFitResult {
    /// Volume-normalized L¹ distance, in [0, 1].
    pub distance: f64,
    /// Axis along which the fitted profile varies.
    pub direction: usize,
    /// The fitted profile over the window; positions are relative to the low
    /// corner of the window and `period` equals the window side.
    pub profile: SliceProfile,
    /// Minimal gap constraint the fit honored.
    pub eta: f64,
    /// Worst-case cost of snapping boundaries to the bin grid: one bin per
    /// reported boundary, normalized like the distance.
    pub discretization_bound: f64,
}

/// Region classification of one window center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionLabel {
    /// Nearly full or nearly empty: at least two directions fit within the
    /// threshold, which forces the window to be almost constant.
    AMinus1,
    /// Far from stripes in every direction.
    AZero,
    /// Locally a union of stripes varying along the given axis.
    Oriented(usize),
}

/// Label and per-direction distances of one window center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeLabel {
    pub label: RegionLabel,
    /// Distance to stripes varying along each axis.
    pub d_eta_values: Vec<f64>,
    /// True when the point survives the end-trimming of its oriented
    /// interval (the stable core of a striped region).
    pub in_core: bool,
}

/// Classification of a full z-grid of window centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedCubes {
    pub dim: usize,
    /// Window centers per axis; spacing = period / points_per_axis.
    pub points_per_axis: usize,
    pub spacing: f64,
    pub cube_side: f64,
    pub eta: f64,
    pub delta: f64,
    /// Row-major over the z-grid, axis 0 fastest.
    pub labels: Vec<CubeLabel>,
}

impl ClassifiedCubes {
    /// Flat index of the grid point with the given per-axis coordinates.
    pub fn index(&self, coords: &[usize]) -> usize {
        let k = self.points_per_axis;
        coords.iter().rev().fold(0, |acc, &c| acc * k + (c % k))
    }

    /// Writes rows `z1,...,zd,label,d1,...,dd` with labels −1, 0, or the
    /// 1-based variation axis.
    pub fn write_csv(&self, w: &mut dyn IoWrite) -> Result<()> {
        let zs: Vec<String> = (1..=self.dim).map(|i| format!("z{i}")).collect();
        let ds: Vec<String> = (1..=self.dim).map(|i| format!("d{i}")).collect();
        writeln!(w, "{},label,{}", zs.join(","), ds.join(","))?;
        let k = self.points_per_axis;
        for (idx, cl) in self.labels.iter().enumerate() {
            let mut rest = idx;
            let mut row = String::new();
            for _ in 0..self.dim {
                row.push_str(&format!("{:.16e},", (rest % k) as f64 * self.spacing));
                rest /= k;
            }
            let code = match cl.label {
                RegionLabel::AMinus1 => -1i64,
                RegionLabel::AZero => 0,
                RegionLabel::Oriented(i) => i as i64 + 1,
            };
            row.push_str(&format!("{code}"));
            for d in &cl.d_eta_values {
                row.push_str(&format!(",{d:.16e}"));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// Sup-norm Lipschitz constant of `z ↦ distance(Q_l(z))` in units of `1/l`:
/// shifting the window by `s` alters it on a slab of volume at most
/// `2d·s·l^{d-1}`, so the distance moves by at most `2d·s/l`.
pub fn lipschitz_constant(dim: usize) -> f64 {
    2.0 * dim as f64
}

// ---------------------------------------------------------------------------
// Occupancy.

/// Overlap measure of each of the `n` cells with the cyclic interval
/// `[start, start+len)`, `len ≤ l`.
fn cell_overlap_weights(n: usize, l: f64, start: f64, len: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    let dxc = l / n as f64;
    let s0 = start.rem_euclid(l);
    let spans: [(f64, f64); 2] = if s0 + len <= l + 1e-12 * l {
        [(s0, (s0 + len).min(l)), (0.0, 0.0)]
    } else {
        [(s0, l), (0.0, s0 + len - l)]
    };
    for (a, b) in spans {
        if b <= a {
            continue;
        }
        let ia = ((a / dxc).floor() as usize).min(n - 1);
        let ib = ((b / dxc).ceil() as usize).min(n);
        for (c, slot) in w.iter_mut().enumerate().take(ib).skip(ia) {
            let ov = b.min((c + 1) as f64 * dxc) - a.max(c as f64 * dxc);
            if ov > 0.0 {
                *slot += ov;
            }
        }
    }
    w
}

/// Overlap of the non-wrapping interval `[lo, hi)` with the cyclic interval
/// `[s, s+len)` on a circle of circumference `l`.
fn interval_overlap_cyclic(lo: f64, hi: f64, s: f64, len: f64, l: f64) -> f64 {
    let s0 = s.rem_euclid(l);
    let mut ov = 0.0;
    let spans: [(f64, f64); 2] = if s0 + len <= l {
        [(s0, s0 + len), (0.0, 0.0)]
    } else {
        [(s0, l), (0.0, s0 + len - l)]
    };
    for (a, b) in spans {
        ov += (hi.min(b) - lo.max(a)).max(0.0);
    }
    ov
}

fn check_cube(e: &PeriodicSet, q: &Cube) -> Result<()> {
    let l = e.period();
    if q.center.len() != e.dim() {
        return Err(Error::InvalidParams("cube center arity mismatch".into()));
    }
    if !(q.side > 0.0) || q.side > l + 1e-12 * l {
        return Err(Error::InvalidParams(format!(
            "cube side must lie in (0, {l}], got {}",
            q.side
        )));
    }
    Ok(())
}

/// Cross-sectional average of the indicator along `axis`, in `resolution`
/// bins across the window: `a(t) = vol(E ∩ slab_t) / (bin · side^{d-1})`.
pub fn column_occupancy(
    e: &PeriodicSet,
    q: &Cube,
    axis: usize,
    resolution: usize,
) -> Result<Vec<f64>> {
    check_cube(e, q)?;
    let dim = e.dim();
    if axis >= dim {
        return Err(Error::InvalidParams(format!("axis {axis} out of range for dim {dim}")));
    }
    if resolution == 0 {
        return Err(Error::InvalidParams("resolution must be positive".into()));
    }
    let l = e.period();
    let bin = q.side / resolution as f64;
    let cross = q.side.powi(dim as i32 - 1);
    let lo: Vec<f64> = q.center.iter().map(|c| c - 0.5 * q.side).collect();
    let mut a = vec![0.0; resolution];
    match e.repr() {
        SetRepr::Grid { n, cells } => {
            let n = *n;
            // Collapse perpendicular axes once: s[c] = Σ over cells in the
            // perpendicular window of the occupancy, per axis-cell c.
            let perp_w: Vec<Option<Vec<f64>>> = (0..dim)
                .map(|ax| {
                    (ax != axis).then(|| cell_overlap_weights(n, l, lo[ax], q.side))
                })
                .collect();
            let mut s = vec![0.0f64; n];
            for (j, &cell) in cells.iter().enumerate() {
                if cell == 0 {
                    continue;
                }
                let mut wprod = 1.0;
                let mut cax = 0;
                let mut rest = j;
                for wopt in perp_w.iter().take(dim) {
                    let digit = rest % n;
                    rest /= n;
                    match wopt {
                        Some(wv) => wprod *= wv[digit],
                        None => cax = digit,
                    }
                }
                s[cax] += wprod;
            }
            for (t, at) in a.iter_mut().enumerate() {
                let wt = cell_overlap_weights(n, l, lo[axis] + t as f64 * bin, bin);
                *at = wt.iter().zip(&s).map(|(w, sv)| w * sv).sum::<f64>() / (bin * cross);
            }
        }
        SetRepr::Boxes(boxes) => {
            // Perpendicular overlap factor is bin-independent.
            let factors: Vec<f64> = boxes
                .iter()
                .map(|b| {
                    (0..dim)
                        .filter(|&ax| ax != axis)
                        .map(|ax| interval_overlap_cyclic(b.lo[ax], b.hi[ax], lo[ax], q.side, l))
                        .product()
                })
                .collect();
            for (t, at) in a.iter_mut().enumerate() {
                let start = lo[axis] + t as f64 * bin;
                let vol: f64 = boxes
                    .iter()
                    .zip(&factors)
                    .map(|(b, f)| {
                        f * interval_overlap_cyclic(b.lo[axis], b.hi[axis], start, bin, l)
                    })
                    .sum();
                *at = vol / (bin * cross);
            }
        }
    }
    for at in a.iter_mut() {
        *at = at.clamp(0.0, 1.0);
    }
    Ok(a)
}

// ---------------------------------------------------------------------------
// Profile fitting.

/// Minimizes `Σ_t [g_t(1−a_t) + (1−g_t)a_t]·bin` over binary profiles whose
/// interior runs span at least `eta`; edge runs are unconstrained. Returns
/// the optimal cost (length units) and profile. `a` holds per-bin occupancy
/// fractions in `[0, 1]` of bins of width `bin`.
pub fn fit_profile(a: &[f64], bin: f64, eta: f64) -> (f64, Vec<bool>) {
    let res = a.len();
    // Bins per minimal gap; anything longer than the window can never be
    // satisfied by an interior run, so clamp to res + 1.
    let m = (((eta / bin) - 1e-9).ceil().max(1.0) as usize).min(res + 1);
    let states = 2 * m;
    let idx = |phase: usize, age: usize| phase * m + (age - 1);
    let cost = |phase: usize, t: usize| {
        if phase == 1 {
            (1.0 - a[t]) * bin
        } else {
            a[t] * bin
        }
    };
    let mut dp = vec![f64::INFINITY; states];
    // Edge runs are free to end at any time: start them at full age.
    dp[idx(0, m)] = cost(0, 0);
    dp[idx(1, m)] = cost(1, 0);
    let mut parent = vec![u32::MAX; states * res];
    for t in 1..res {
        let mut next = vec![f64::INFINITY; states];
        for phase in 0..2 {
            for age in 1..=m {
                let c = dp[idx(phase, age)];
                if !c.is_finite() {
                    continue;
                }
                // Continue the current run.
                let na = (age + 1).min(m);
                let cand = c + cost(phase, t);
                let slot = idx(phase, na);
                if cand < next[slot] {
                    next[slot] = cand;
                    parent[t * states + slot] = idx(phase, age) as u32;
                }
                // Close it and switch, if it is long enough.
                if age == m {
                    let cand = c + cost(1 - phase, t);
                    let slot = idx(1 - phase, 1.min(m));
                    if cand < next[slot] {
                        next[slot] = cand;
                        parent[t * states + slot] = idx(phase, age) as u32;
                    }
                }
            }
        }
        dp = next;
    }
    let (mut best_state, mut best) = (0usize, f64::INFINITY);
    for (stt, &c) in dp.iter().enumerate() {
        if c < best {
            best = c;
            best_state = stt;
        }
    }
    let mut g = vec![false; res];
    let mut state = best_state;
    for t in (0..res).rev() {
        g[t] = state >= m;
        if t > 0 {
            state = parent[t * states + state] as usize;
        }
    }
    (best, g)
}

/// Distance of the window content to unions of stripes varying along `axis`,
/// with interior stripe gaps at least `eta`.
pub fn d_eta_i(
    e: &PeriodicSet,
    q: &Cube,
    axis: usize,
    eta: f64,
    resolution: usize,
) -> Result<StripeFitResult> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParams("eta must be positive".into()));
    }
    if resolution == 0 {
        return Err(Error::InvalidParams("resolution must be positive".into()));
    }
    let bin = q.side / resolution as f64;
    if bin > eta / 4.0 + 1e-12 {
        return Err(Error::InvalidParams(format!(
            "resolution too coarse: bin {bin:.3e} exceeds eta/4 = {:.3e}",
            eta / 4.0
        )));
    }
    let a = column_occupancy(e, q, axis, resolution)?;
    let (cost, g) = fit_profile(&a, bin, eta);
    let mut boundaries = Vec::new();
    for t in 1..resolution {
        if g[t] != g[t - 1] {
            boundaries.push(t as f64 * bin);
        }
    }
    let distance = cost / q.side;
    let discretization_bound = boundaries.len() as f64 * bin / q.side;
    // Encode as a cyclic profile: with an odd switch count the window edge
    // itself is a value change, marked by a boundary at 0.
    let starts_inside = if boundaries.is_empty() {
        g[0]
    } else if boundaries.len() % 2 == 1 {
        boundaries.insert(0, 0.0);
        g[0]
    } else {
        !g[0]
    };
    Ok(StripeFitResult {
        distance,
        direction: axis,
        profile: SliceProfile { period: q.side, boundaries, starts_inside },
        eta,
        discretization_bound,
    })
}

/// Distance to unions of stripes in the best direction; ties break toward
/// the lowest axis index.
pub fn d_eta(e: &PeriodicSet, q: &Cube, eta: f64, resolution: usize) -> Result<StripeFitResult> {
    let mut best: Option<StripeFitResult> = None;
    for axis in 0..e.dim() {
        let fit = d_eta_i(e, q, axis, eta, resolution)?;
        let better = match &best {
            None => true,
            Some(b) => fit.distance < b.distance,
        };
        if better {
            best = Some(fit);
        }
    }
    Ok(best.expect("dim >= 1"))
}

// ---------------------------------------------------------------------------
// Cube classification.

fn dilate_mask(mask: &[bool], k: usize, dim: usize, steps: usize) -> Vec<bool> {
    if steps == 0 {
        return mask.to_vec();
    }
    let steps = steps.min(k / 2);
    let mut cur: Vec<u32> = mask.iter().map(|&b| b as u32).collect();
    let total = cur.len();
    for axis in 0..dim {
        let stride = k.pow(axis as u32);
        let mut next = vec![0u32; total];
        for base in 0..total {
            if (base / stride) % k != 0 {
                continue;
            }
            // Sliding cyclic window sum of half-width `steps` along the line.
            let at = |t: usize| cur[base + (t % k) * stride];
            let mut window: u32 = 0;
            for off in 0..=2 * steps {
                window += at(k - steps + off);
            }
            for t in 0..k {
                next[base + t * stride] = window;
                window += at(t + steps + 1);
                window -= at(t + k - steps);
            }
        }
        cur = next.iter().map(|&v| (v > 0) as u32).collect();
    }
    cur.into_iter().map(|v| v > 0).collect()
}

/// Labels a grid of window centers: nearly-constant (two directions fit),
/// unstructured (no direction fits), or stripe-oriented, with the oriented
/// regions' cores trimmed away from their ends. The center grid spacing is
/// derived from `delta`, the cube side, and the Lipschitz constant so that
/// threshold crossings cannot slip between grid points.
pub fn classify_cubes(
    e: &PeriodicSet,
    l: f64,
    eta: f64,
    delta: f64,
    resolution: usize,
) -> Result<ClassifiedCubes> {
    let dim = e.dim();
    let big_l = e.period();
    if !(l > 0.0) || l >= big_l {
        return Err(Error::InvalidParams(format!(
            "window side must satisfy 0 < l < {big_l}, got {l}"
        )));
    }
    if !(delta > 0.0) || !(eta > 0.0) {
        return Err(Error::InvalidParams("eta and delta must be positive".into()));
    }
    if l / resolution.max(1) as f64 > eta / 4.0 + 1e-12 {
        return Err(Error::InvalidParams(
            "resolution too coarse for eta (need bin <= eta/4)".into(),
        ));
    }
    let rho = delta * l / lipschitz_constant(dim);
    let k = (big_l / (rho / 4.0)).ceil() as usize;
    let total = k.pow(dim as u32);
    if total > (1 << 21) {
        return Err(Error::InvalidParams(format!(
            "classification grid would need {k}^{dim} windows; increase delta or the window side"
        )));
    }
    let spacing = big_l / k as f64;

    let dvals: Vec<Vec<f64>> = (0..total)
        .into_par_iter()
        .map(|idx| -> Result<Vec<f64>> {
            let mut rest = idx;
            let mut center = Vec::with_capacity(dim);
            for _ in 0..dim {
                center.push((rest % k) as f64 * spacing);
                rest /= k;
            }
            let q = Cube::new(center, l);
            (0..dim).map(|ax| Ok(d_eta_i(e, &q, ax, eta, resolution)?.distance)).collect()
        })
        .collect::<Result<_>>()?;

    let a0_seed: Vec<bool> =
        dvals.iter().map(|d| d.iter().all(|&v| v >= delta)).collect();
    let am1_seed: Vec<bool> =
        dvals.iter().map(|d| d.iter().filter(|&&v| v <= delta).count() >= 2).collect();
    let a0 = dilate_mask(&a0_seed, k, dim, (rho / spacing + 1e-9).floor() as usize);
    let am1 = dilate_mask(&am1_seed, k, dim, (1.0 / spacing + 1e-9).floor() as usize);

    // Orientation of the remaining points: the unique direction that fits.
    let mut orient = vec![usize::MAX; total];
    for idx in 0..total {
        if a0[idx] || am1[idx] {
            continue;
        }
        let fits: Vec<usize> = (0..dim).filter(|&i| dvals[idx][i] <= delta).collect();
        match fits.as_slice() {
            [one] => orient[idx] = *one,
            _ => {
                return Err(Error::Numerics(format!(
                    "window at flat index {idx} fits {} directions after masking; \
                     grid too coarse",
                    fits.len()
                )))
            }
        }
    }

    // Connected components of the oriented region must not mix directions.
    let mut seen = vec![false; total];
    let mut stack = Vec::new();
    for start in 0..total {
        if seen[start] || orient[start] == usize::MAX {
            continue;
        }
        let dir = orient[start];
        seen[start] = true;
        stack.push(start);
        while let Some(p) = stack.pop() {
            if orient[p] != dir {
                let fmt = |i: usize| {
                    let mut rest = i;
                    let mut c = Vec::new();
                    for _ in 0..dim {
                        c.push(format!("{:.4}", (rest % k) as f64 * spacing));
                        rest /= k;
                    }
                    c.join(", ")
                };
                return Err(Error::Numerics(format!(
                    "oriented region mixes directions {dir} and {} between z = ({}) and z = ({}); \
                     refine the classification grid",
                    orient[p],
                    fmt(start),
                    fmt(p)
                )));
            }
            for axis in 0..dim {
                let stride = k.pow(axis as u32);
                let digit = (p / stride) % k;
                for np in [
                    p - digit * stride + ((digit + 1) % k) * stride,
                    p - digit * stride + ((digit + k - 1) % k) * stride,
                ] {
                    if !seen[np] && orient[np] != usize::MAX {
                        seen[np] = true;
                        stack.push(np);
                    }
                }
            }
        }
    }

    // Core trimming: along each oriented run in its own direction, drop a
    // quarter window from each end and entire runs shorter than the window.
    let mut in_core = vec![false; total];
    let trim = ((l / 4.0) / spacing - 1e-9).ceil() as usize;
    for axis in 0..dim {
        let stride = k.pow(axis as u32);
        for base in 0..total {
            if (base / stride) % k != 0 {
                continue;
            }
            let line: Vec<usize> = (0..k).map(|t| base + t * stride).collect();
            let is_run = |t: usize| orient[line[t % k]] == axis;
            if (0..k).all(&is_run) {
                for &p in &line {
                    in_core[p] = true;
                }
                continue;
            }
            // Walk cyclic runs starting just after a non-run point.
            let anchor = (0..k).find(|&t| !is_run(t)).unwrap();
            let mut t = anchor;
            loop {
                t += 1;
                if t >= anchor + k {
                    break;
                }
                if !is_run(t) {
                    continue;
                }
                let start = t;
                while t < anchor + k && is_run(t) {
                    t += 1;
                }
                let count = t - start;
                if count as f64 * spacing + 1e-9 >= l {
                    for u in (start + trim)..(t - trim) {
                        in_core[line[u % k]] = true;
                    }
                }
            }
        }
    }

    let labels = (0..total)
        .map(|idx| {
            let label = if am1[idx] {
                RegionLabel::AMinus1
            } else if a0[idx] {
                RegionLabel::AZero
            } else {
                RegionLabel::Oriented(orient[idx])
            };
            CubeLabel { label, d_eta_values: dvals[idx].clone(), in_core: in_core[idx] }
        })
        .collect();
    Ok(ClassifiedCubes {
        dim,
        points_per_axis: k,
        spacing,
        cube_side: l,
        eta,
        delta,
        labels,
    })
}
