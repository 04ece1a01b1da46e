//! `L`-periodic sets: box unions and occupancy grids, slicing, anisotropic
//! perimeter, and a line-oriented text format.
//!
//! All geometry lives on the torus `[0, L)^d` with half-open boxes (lower face
//! inside), which resolves every measure-zero ambiguity once and for all.
//! Box unions are normalized at construction — wrapped mod `L`, split at the
//! seam, and checked pairwise disjoint — so that volumes are plain sums and
//! per-axis perimeters follow from an exact arc-union sweep per perpendicular
//! strip. Grid sets identify the boundary with faces between differing cells.

use std::io::{BufRead, Write as IoWrite};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const SEAM_EPS: f64 = 1e-12;

/// One axis-aligned half-open box `∏ [lo_i, hi_i)` with `0 ≤ lo < hi ≤ L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpan {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Underlying representation of a periodic set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SetRepr {
    /// Pairwise-disjoint normalized boxes.
    Boxes(Vec<BoxSpan>),
    /// Row-major binary occupancy, axis 0 fastest; cell side `L/n`.
    Grid { n: usize, cells: Vec<u8> },
}

/// An `L`-periodic subset of `ℝ^d`, `d ≤ 3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSet {
    dim: usize,
    l: f64,
    repr: SetRepr,
}

/// One-dimensional trace of a set along an axis: boundary points on the
/// period circle plus the phase right after the first boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceProfile {
    /// Circle length `L`.
    pub period: f64,
    /// Strictly increasing boundary positions in `[0, L)`; even count.
    pub boundaries: Vec<f64>,
    /// Indicator value immediately after `boundaries[0]` (or the constant
    /// value when there are no boundaries).
    pub starts_inside: bool,
}

impl SliceProfile {
    /// Cyclic neighbors of the boundary `s`, unwrapped so `s⁻ < s < s⁺` as
    /// reals; the differences are the true gaps to the adjacent boundaries.
    pub fn neighbors(&self, s: f64) -> Result<(f64, f64)> {
        let n = self.boundaries.len();
        if n < 2 {
            return Err(Error::InvalidSet(
                "neighbors need a profile with at least two boundaries".into(),
            ));
        }
        let tol = SEAM_EPS * self.period.max(1.0);
        let i = self
            .boundaries
            .iter()
            .position(|b| (b - s).abs() <= tol)
            .ok_or_else(|| Error::InvalidSet(format!("{s} is not a boundary of the profile")))?;
        let prev = if i == 0 { self.boundaries[n - 1] - self.period } else { self.boundaries[i - 1] };
        let next =
            if i == n - 1 { self.boundaries[0] + self.period } else { self.boundaries[i + 1] };
        Ok((prev, next))
    }

    /// Interior measure of the slice over one period.
    pub fn inside_measure(&self) -> f64 {
        if self.boundaries.is_empty() {
            return if self.starts_inside { self.period } else { 0.0 };
        }
        let mut total = 0.0;
        let n = self.boundaries.len();
        let mut inside = self.starts_inside;
        for i in 0..n {
            let a = self.boundaries[i];
            let b = if i + 1 == n { self.boundaries[0] + self.period } else { self.boundaries[i + 1] };
            if inside {
                total += b - a;
            }
            inside = !inside;
        }
        total
    }
}

/// Splits `[lo, lo+width)` (mod `L`) into seam-free segments within `[0, L]`.
fn wrap_segments(lo: f64, width: f64, l: f64) -> Result<Vec<(f64, f64)>> {
    if !(width > 0.0) || width > l * (1.0 + SEAM_EPS) {
        return Err(Error::InvalidSet(format!("box width {width} outside (0, L = {l}]")));
    }
    if width >= l * (1.0 - SEAM_EPS) {
        return Ok(vec![(0.0, l)]);
    }
    let mut start = lo.rem_euclid(l);
    if l - start < SEAM_EPS * l {
        start = 0.0;
    }
    let end = start + width;
    if end <= l * (1.0 + SEAM_EPS) && end >= l * (1.0 - SEAM_EPS) {
        Ok(vec![(start, l)])
    } else if end <= l {
        Ok(vec![(start, end)])
    } else {
        Ok(vec![(start, l), (0.0, end - l)])
    }
}

/// Merges half-open arcs on the circle `[0, L)`; returns the union's boundary
/// positions (sorted, even count) and whether the point after the first
/// boundary is inside. Arcs must be seam-free (`0 ≤ lo < hi ≤ L`).
fn arc_union_boundaries(arcs: &[(f64, f64)], l: f64) -> (Vec<f64>, bool) {
    if arcs.is_empty() {
        return (Vec::new(), false);
    }
    // Depth just below the seam: arcs reaching hi = L cover it.
    let mut depth: i64 = arcs.iter().filter(|(_, hi)| *hi >= l * (1.0 - SEAM_EPS)).count() as i64;
    let mut events: Vec<(f64, i64)> = Vec::with_capacity(2 * arcs.len());
    for &(lo, hi) in arcs {
        events.push((lo, 1));
        if hi < l * (1.0 - SEAM_EPS) {
            events.push((hi, -1));
        } else {
            events.push((0.0, -1)); // close at the seam, paired with the preload
        }
    }
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut boundaries = Vec::new();
    let mut first_starts_inside = false;
    let mut i = 0;
    while i < events.len() {
        let pos = events[i].0;
        let mut net = 0;
        while i < events.len() && (events[i].0 - pos).abs() <= SEAM_EPS * l.max(1.0) {
            net += events[i].1;
            i += 1;
        }
        let new_depth = depth + net;
        if (depth == 0) != (new_depth == 0) {
            if boundaries.is_empty() {
                first_starts_inside = new_depth > 0;
            }
            boundaries.push(pos);
        }
        depth = new_depth;
    }
    let starts = if boundaries.is_empty() { depth > 0 } else { first_starts_inside };
    (boundaries, starts)
}

impl PeriodicSet {
    /// Builds a box-union set. Input boxes may wrap (`hi` up to `lo + L`);
    /// they are normalized mod `L`, split at the seam, and must come out
    /// pairwise disjoint.
    pub fn from_boxes(dim: usize, l: f64, boxes: &[(Vec<f64>, Vec<f64>)]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidSet(format!("dim must be 1..=3, got {dim}")));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidSet(format!("period must be positive, got {l}")));
        }
        let mut normalized: Vec<BoxSpan> = Vec::new();
        for (lo, hi) in boxes {
            if lo.len() != dim || hi.len() != dim {
                return Err(Error::InvalidSet("box corner arity does not match dim".into()));
            }
            // Per-axis seam-free segments, then their cartesian product.
            let mut per_axis: Vec<Vec<(f64, f64)>> = Vec::with_capacity(dim);
            for ax in 0..dim {
                per_axis.push(wrap_segments(lo[ax], hi[ax] - lo[ax], l)?);
            }
            let mut pieces = vec![BoxSpan { lo: Vec::new(), hi: Vec::new() }];
            for segs in &per_axis {
                let mut next = Vec::with_capacity(pieces.len() * segs.len());
                for piece in &pieces {
                    for &(a, b) in segs {
                        let mut p = piece.clone();
                        p.lo.push(a);
                        p.hi.push(b);
                        next.push(p);
                    }
                }
                pieces = next;
            }
            normalized.extend(pieces);
        }
        for i in 0..normalized.len() {
            for j in 0..i {
                let (a, b) = (&normalized[i], &normalized[j]);
                let overlap = (0..dim).all(|ax| a.lo[ax] < b.hi[ax] && b.lo[ax] < a.hi[ax]);
                if overlap {
                    return Err(Error::InvalidSet(format!(
                        "boxes overlap after normalization (pieces {j} and {i})"
                    )));
                }
            }
        }
        Ok(Self { dim, l, repr: SetRepr::Boxes(normalized) })
    }

    /// Builds a grid set from row-major 0/1 occupancy (`n ≥ 4`, axis 0
    /// fastest).
    pub fn from_grid(dim: usize, l: f64, n: usize, cells: Vec<u8>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidSet(format!("dim must be 1..=3, got {dim}")));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidSet(format!("period must be positive, got {l}")));
        }
        if n < 4 {
            return Err(Error::InvalidSet(format!("grid resolution must be >= 4, got {n}")));
        }
        if cells.len() != n.pow(dim as u32) {
            return Err(Error::InvalidSet(format!(
                "grid needs n^d = {} cells, got {}",
                n.pow(dim as u32),
                cells.len()
            )));
        }
        if cells.iter().any(|&c| c > 1) {
            return Err(Error::InvalidSet("grid cells must be 0 or 1".into()));
        }
        Ok(Self { dim, l, repr: SetRepr::Grid { n, cells } })
    }

    /// Stripes of width `h`, gap `h`, alternating along `direction`, full
    /// along every other axis, shifted by `phase`. Errors unless `L` is an
    /// exact multiple of the period `2h`.
    pub fn make_stripes(dim: usize, l: f64, direction: usize, h: f64, phase: f64) -> Result<Self> {
        if direction >= dim {
            return Err(Error::InvalidSet(format!("direction {direction} out of range for dim {dim}")));
        }
        if !(h > 0.0) || 2.0 * h > l * (1.0 + SEAM_EPS) {
            return Err(Error::InvalidSet(format!("need 0 < 2h <= L, got h = {h}, L = {l}")));
        }
        let periods = l / (2.0 * h);
        if (periods - periods.round()).abs() > 1e-12 * periods.max(1.0) {
            return Err(Error::InvalidSet(format!(
                "stripes of period 2h = {} do not tile a box of side {l}",
                2.0 * h
            )));
        }
        let m = periods.round() as usize;
        let mut boxes = Vec::with_capacity(m);
        for k in 0..m {
            let mut lo = vec![0.0; dim];
            let mut hi = vec![l; dim];
            lo[direction] = phase + 2.0 * k as f64 * h;
            hi[direction] = lo[direction] + h;
            boxes.push((lo, hi));
        }
        Self::from_boxes(dim, l, &boxes)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> f64 {
        self.l
    }

    pub fn repr(&self) -> &SetRepr {
        &self.repr
    }

    /// Grid resolution and cells, when this is a grid set.
    pub fn grid(&self) -> Option<(usize, &[u8])> {
        match &self.repr {
            SetRepr::Grid { n, cells } => Some((*n, cells)),
            SetRepr::Boxes(_) => None,
        }
    }

    /// Lebesgue measure of one period cell's worth of the set.
    pub fn volume(&self) -> f64 {
        match &self.repr {
            SetRepr::Boxes(boxes) => boxes
                .iter()
                .map(|b| (0..self.dim).map(|ax| b.hi[ax] - b.lo[ax]).product::<f64>())
                .sum(),
            SetRepr::Grid { n, cells } => {
                let dx = self.l / *n as f64;
                cells.iter().filter(|&&c| c == 1).count() as f64 * dx.powi(self.dim as i32)
            }
        }
    }

    pub fn volume_fraction(&self) -> f64 {
        self.volume() / self.l.powi(self.dim as i32)
    }

    /// Periodic membership with the lower-face-inside convention.
    pub fn contains(&self, x: &[f64]) -> bool {
        assert_eq!(x.len(), self.dim, "point arity mismatch");
        match &self.repr {
            SetRepr::Boxes(boxes) => {
                let xm: Vec<f64> = x.iter().map(|v| v.rem_euclid(self.l)).collect();
                boxes.iter().any(|b| (0..self.dim).all(|ax| b.lo[ax] <= xm[ax] && xm[ax] < b.hi[ax]))
            }
            SetRepr::Grid { n, cells } => {
                let dx = self.l / *n as f64;
                let mut idx = 0usize;
                let mut stride = 1usize;
                for ax in 0..self.dim {
                    let c = (x[ax].rem_euclid(self.l) / dx) as usize % n;
                    idx += c * stride;
                    stride *= n;
                }
                cells[idx] == 1
            }
        }
    }

    /// The 1D profile of the set along `axis` at perpendicular offset
    /// `xperp` (the other coordinates, in increasing axis order). Exact for
    /// box unions; cell-resolution for grids.
    pub fn slice(&self, axis: usize, xperp: &[f64]) -> Result<SliceProfile> {
        if axis >= self.dim {
            return Err(Error::InvalidSet(format!("axis {axis} out of range for dim {}", self.dim)));
        }
        if xperp.len() != self.dim - 1 {
            return Err(Error::InvalidSet(format!(
                "xperp needs {} coordinates, got {}",
                self.dim - 1,
                xperp.len()
            )));
        }
        match &self.repr {
            SetRepr::Boxes(boxes) => {
                let mut arcs = Vec::new();
                for b in boxes {
                    let mut hit = true;
                    let mut k = 0;
                    for ax in 0..self.dim {
                        if ax == axis {
                            continue;
                        }
                        let v = xperp[k].rem_euclid(self.l);
                        k += 1;
                        if !(b.lo[ax] <= v && v < b.hi[ax]) {
                            hit = false;
                            break;
                        }
                    }
                    if hit {
                        arcs.push((b.lo[axis], b.hi[axis]));
                    }
                }
                let (boundaries, starts_inside) = arc_union_boundaries(&arcs, self.l);
                Ok(SliceProfile { period: self.l, boundaries, starts_inside })
            }
            SetRepr::Grid { n, cells } => {
                let n = *n;
                let dx = self.l / n as f64;
                let mut base = 0usize;
                let mut stride_axis = 1usize;
                let mut stride = 1usize;
                let mut k = 0;
                for ax in 0..self.dim {
                    if ax == axis {
                        stride_axis = stride;
                    } else {
                        let c = (xperp[k].rem_euclid(self.l) / dx) as usize % n;
                        base += c * stride;
                        k += 1;
                    }
                    stride *= n;
                }
                let at = |j: usize| cells[base + (j % n) * stride_axis];
                let mut boundaries = Vec::new();
                for j in 0..n {
                    // Face between cells j and j+1 sits at (j+1)·dx (mod L).
                    if at(j) != at(j + 1) {
                        boundaries.push(((j + 1) % n) as f64 * dx);
                    }
                }
                boundaries.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let starts_inside = if boundaries.is_empty() {
                    at(0) == 1
                } else {
                    at((boundaries[0] / dx).round() as usize) == 1
                };
                Ok(SliceProfile { period: self.l, boundaries, starts_inside })
            }
        }
    }

    /// Perimeter contribution of faces orthogonal to `axis` per period cell.
    pub fn per1i(&self, axis: usize) -> Result<f64> {
        if axis >= self.dim {
            return Err(Error::InvalidSet(format!("axis {axis} out of range for dim {}", self.dim)));
        }
        match &self.repr {
            SetRepr::Boxes(_) => {
                // The slicing formula reduces to strip measure × boundary
                // count on each strip where the active arc set is constant.
                let mut total = 0.0;
                for (mid, measure) in self.perp_strips(axis)? {
                    let profile = self.slice(axis, &mid)?;
                    total += profile.boundaries.len() as f64 * measure;
                }
                Ok(total)
            }
            SetRepr::Grid { n, cells } => {
                let n = *n;
                let dx = self.l / n as f64;
                let stride: usize = n.pow(axis as u32);
                let plane: usize = n.pow(self.dim as u32);
                let mut faces = 0usize;
                for idx in 0..plane {
                    // Neighbor along `axis` with cyclic wrap in that digit.
                    let digit = (idx / stride) % n;
                    let nidx = if digit + 1 == n { idx - digit * stride } else { idx + stride };
                    if cells[idx] != cells[nidx] {
                        faces += 1;
                    }
                }
                Ok(faces as f64 * dx.powi(self.dim as i32 - 1))
            }
        }
    }

    /// Anisotropic perimeter `Per₁ = Σ_i per1i`.
    pub fn per1(&self) -> Result<f64> {
        (0..self.dim).map(|ax| self.per1i(ax)).sum()
    }

    /// Cuts the perpendicular cell `[0,L)^{d-1}` into strips on which every
    /// slice along `axis` is the same profile; yields (midpoint, measure)
    /// pairs. Box unions only.
    pub(crate) fn perp_strips(&self, axis: usize) -> Result<Vec<(Vec<f64>, f64)>> {
        if axis >= self.dim {
            return Err(Error::InvalidSet(format!("axis {axis} out of range for dim {}", self.dim)));
        }
        let boxes = match &self.repr {
            SetRepr::Boxes(boxes) => boxes,
            SetRepr::Grid { .. } => {
                return Err(Error::InvalidSet("strip decomposition needs a box union".into()))
            }
        };
        let perp_axes: Vec<usize> = (0..self.dim).filter(|&a| a != axis).collect();
        let mut cuts: Vec<Vec<f64>> = Vec::new();
        for &pax in &perp_axes {
            let mut v: Vec<f64> = vec![0.0, self.l];
            for b in boxes {
                v.push(b.lo[pax]);
                v.push(b.hi[pax]);
            }
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v.dedup_by(|a, b| (*a - *b).abs() <= SEAM_EPS * self.l);
            cuts.push(v);
        }
        let mut strips = Vec::new();
        let mut strip = vec![0usize; perp_axes.len()];
        loop {
            let mut measure = 1.0;
            let mut mid = Vec::with_capacity(perp_axes.len());
            for (k, c) in cuts.iter().enumerate() {
                let (a, b) = (c[strip[k]], c[strip[k] + 1]);
                measure *= b - a;
                mid.push(0.5 * (a + b));
            }
            if measure > 0.0 {
                strips.push((mid, measure));
            }
            // Odometer over strips.
            let mut k = 0;
            loop {
                if k == strip.len() {
                    return Ok(strips);
                }
                strip[k] += 1;
                if strip[k] + 1 < cuts[k].len() {
                    break;
                }
                strip[k] = 0;
                k += 1;
            }
        }
    }

    /// The complement within the period cell.
    pub fn complement(&self) -> Result<Self> {
        match &self.repr {
            SetRepr::Grid { n, cells } => {
                let flipped = cells.iter().map(|c| 1 - c).collect();
                Self::from_grid(self.dim, self.l, *n, flipped)
            }
            SetRepr::Boxes(_) => {
                // Rasterization-free complement of a general box union would
                // need a full box-subdivision pass; grids cover every current
                // caller.
                Err(Error::InvalidSet(
                    "complement is implemented for grid sets; rasterize first".into(),
                ))
            }
        }
    }

    /// Translation by `shift` (mod `L`). Grid sets require the shift to be a
    /// multiple of the cell side within 1e-9.
    pub fn translate(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim {
            return Err(Error::InvalidSet("shift arity mismatch".into()));
        }
        match &self.repr {
            SetRepr::Boxes(boxes) => {
                let moved: Vec<(Vec<f64>, Vec<f64>)> = boxes
                    .iter()
                    .map(|b| {
                        let lo: Vec<f64> =
                            b.lo.iter().zip(shift).map(|(v, s)| (v + s).rem_euclid(self.l)).collect();
                        let hi: Vec<f64> =
                            lo.iter().zip(b.lo.iter().zip(&b.hi)).map(|(nl, (ol, oh))| nl + (oh - ol)).collect();
                        (lo, hi)
                    })
                    .collect();
                Self::from_boxes(self.dim, self.l, &moved)
            }
            SetRepr::Grid { n, cells } => {
                let n = *n;
                let dx = self.l / n as f64;
                let mut offs = vec![0usize; self.dim];
                for ax in 0..self.dim {
                    let c = shift[ax] / dx;
                    if (c - c.round()).abs() > 1e-9 {
                        return Err(Error::InvalidSet(format!(
                            "grid translation must be a multiple of the cell side, got {}",
                            shift[ax]
                        )));
                    }
                    offs[ax] = (c.round() as i64).rem_euclid(n as i64) as usize;
                }
                let total = cells.len();
                let mut moved = vec![0u8; total];
                for idx in 0..total {
                    let mut rest = idx;
                    let mut nidx = 0usize;
                    let mut stride = 1usize;
                    for off in offs.iter().take(self.dim) {
                        let digit = rest % n;
                        rest /= n;
                        nidx += ((digit + off) % n) * stride;
                        stride *= n;
                    }
                    moved[nidx] = cells[idx];
                }
                Self::from_grid(self.dim, self.l, n, moved)
            }
        }
    }

    /// Relabels axes: new axis `k` carries what old axis `perm[k]` carried.
    pub fn permute_axes(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.dim || {
            let mut sorted = perm.to_vec();
            sorted.sort_unstable();
            sorted != (0..self.dim).collect::<Vec<_>>()
        } {
            return Err(Error::InvalidSet(format!("{perm:?} is not a permutation of the axes")));
        }
        match &self.repr {
            SetRepr::Boxes(boxes) => {
                let moved: Vec<(Vec<f64>, Vec<f64>)> = boxes
                    .iter()
                    .map(|b| {
                        let lo = perm.iter().map(|&o| b.lo[o]).collect();
                        let hi = perm.iter().map(|&o| b.hi[o]).collect();
                        (lo, hi)
                    })
                    .collect();
                Self::from_boxes(self.dim, self.l, &moved)
            }
            SetRepr::Grid { n, cells } => {
                let n = *n;
                let total = cells.len();
                let mut moved = vec![0u8; total];
                for idx in 0..total {
                    let mut digits = [0usize; 3];
                    let mut rest = idx;
                    for digit in digits.iter_mut().take(self.dim) {
                        *digit = rest % n;
                        rest /= n;
                    }
                    let mut nidx = 0usize;
                    let mut stride = 1usize;
                    for &src in perm.iter().take(self.dim) {
                        nidx += digits[src] * stride;
                        stride *= n;
                    }
                    // moved[new coords] where new axis k reads old axis perm[k]:
                    // destination index uses digits permuted accordingly.
                    moved[nidx] = cells[idx];
                }
                Self::from_grid(self.dim, self.l, n, moved)
            }
        }
    }

    /// Samples the set on an `n^d` grid by cell-center membership.
    pub fn rasterize(&self, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidSet(format!("grid resolution must be >= 4, got {n}")));
        }
        let dx = self.l / n as f64;
        let total = n.pow(self.dim as u32);
        let mut cells = vec![0u8; total];
        let mut x = vec![0.0; self.dim];
        for (idx, cell) in cells.iter_mut().enumerate() {
            let mut rest = idx;
            for coord in x.iter_mut().take(self.dim) {
                *coord = ((rest % n) as f64 + 0.5) * dx;
                rest /= n;
            }
            *cell = self.contains(&x) as u8;
        }
        Self::from_grid(self.dim, self.l, n, cells)
    }

    /// Writes the line-oriented text form (`dim L repr [n]`, then box rows or
    /// run-length-encoded cells). Floats use the shortest round-trip form, so
    /// read-back is bit-exact.
    pub fn write_to(&self, w: &mut dyn IoWrite) -> Result<()> {
        match &self.repr {
            SetRepr::Boxes(boxes) => {
                writeln!(w, "{} {} boxes", self.dim, self.l)?;
                for b in boxes {
                    let row: Vec<String> = (0..self.dim)
                        .flat_map(|ax| [format!("{}", b.lo[ax]), format!("{}", b.hi[ax])])
                        .collect();
                    writeln!(w, "{}", row.join(" "))?;
                }
            }
            SetRepr::Grid { n, cells } => {
                writeln!(w, "{} {} grid {}", self.dim, self.l, n)?;
                let mut tokens = Vec::new();
                let mut run_bit = cells[0];
                let mut run_len = 0usize;
                for &c in cells {
                    if c == run_bit {
                        run_len += 1;
                    } else {
                        tokens.push(format!("{run_len}*{run_bit}"));
                        run_bit = c;
                        run_len = 1;
                    }
                }
                tokens.push(format!("{run_len}*{run_bit}"));
                writeln!(w, "{}", tokens.join(" "))?;
            }
        }
        Ok(())
    }

    /// Reads the text form written by [`Self::write_to`].
    pub fn read_from(r: &mut dyn BufRead) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() < 3 {
            return Err(Error::Parse(format!("bad header line: {header:?}")));
        }
        let dim: usize =
            parts[0].parse().map_err(|_| Error::Parse(format!("bad dim {:?}", parts[0])))?;
        let l: f64 =
            parts[1].parse().map_err(|_| Error::Parse(format!("bad period {:?}", parts[1])))?;
        match parts[2] {
            "boxes" => {
                let mut boxes = Vec::new();
                let mut line = String::new();
                loop {
                    line.clear();
                    if r.read_line(&mut line)? == 0 {
                        break;
                    }
                    let nums: Vec<f64> = line
                        .split_whitespace()
                        .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {t:?}"))))
                        .collect::<Result<_>>()?;
                    if nums.is_empty() {
                        continue;
                    }
                    if nums.len() != 2 * dim {
                        return Err(Error::Parse(format!(
                            "box row needs {} numbers, got {}",
                            2 * dim,
                            nums.len()
                        )));
                    }
                    let lo = (0..dim).map(|ax| nums[2 * ax]).collect();
                    let hi = (0..dim).map(|ax| nums[2 * ax + 1]).collect();
                    boxes.push((lo, hi));
                }
                Self::from_boxes(dim, l, &boxes)
            }
            "grid" => {
                if parts.len() < 4 {
                    return Err(Error::Parse("grid header missing n".into()));
                }
                let n: usize =
                    parts[3].parse().map_err(|_| Error::Parse(format!("bad n {:?}", parts[3])))?;
                let mut body = String::new();
                r.read_to_string(&mut body)?;
                let mut cells = Vec::with_capacity(n.pow(dim as u32));
                for tok in body.split_whitespace() {
                    let (len, bit) = tok
                        .split_once('*')
                        .ok_or_else(|| Error::Parse(format!("bad run token {tok:?}")))?;
                    let len: usize =
                        len.parse().map_err(|_| Error::Parse(format!("bad run length {len:?}")))?;
                    let bit: u8 =
                        bit.parse().map_err(|_| Error::Parse(format!("bad run bit {bit:?}")))?;
                    cells.extend(std::iter::repeat_n(bit, len));
                }
                Self::from_grid(dim, l, n, cells)
            }
            other => Err(Error::Parse(format!("unknown representation {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stripes2d() -> PeriodicSet {
        PeriodicSet::make_stripes(2, 8.0, 0, 2.0, 0.0).unwrap()
    }

    #[test]
    fn stripes_match_their_blueprint() {
        let s = stripes2d();
        assert!((s.volume_fraction() - 0.5).abs() < 1e-15);
        assert!(s.contains(&[1.0, 5.0]));
        assert!(!s.contains(&[3.0, 5.0]));
        assert!(s.contains(&[4.5, 0.0]));
        assert!(!s.contains(&[6.5, 7.9]));
        // d=1 single period: one interval, two boundary points.
        let s1 = PeriodicSet::make_stripes(1, 4.0, 0, 2.0, 0.0).unwrap();
        assert_eq!(s1.per1().unwrap(), 2.0);
        // Opposite phase is the complement.
        let s_apart = PeriodicSet::make_stripes(2, 8.0, 0, 2.0, 2.0).unwrap();
        assert!((s.volume() + s_apart.volume() - 64.0).abs() < 1e-12);
        for pt in [[0.3, 1.0], [2.7, 6.0], [5.9, 3.3], [7.1, 0.1]] {
            assert_ne!(s.contains(&pt), s_apart.contains(&pt), "{pt:?}");
        }
    }

    #[test]
    fn stripes_reject_incommensurate_periods() {
        assert!(PeriodicSet::make_stripes(2, 8.0, 0, 1.7, 0.0).is_err());
        assert!(PeriodicSet::make_stripes(2, 8.0, 0, 5.0, 0.0).is_err());
        assert!(PeriodicSet::make_stripes(2, 8.0, 2, 2.0, 0.0).is_err());
    }

    #[test]
    fn slicing_stripes_both_ways() {
        let s = stripes2d();
        let along = s.slice(0, &[3.3]).unwrap();
        assert_eq!(along.boundaries, vec![0.0, 2.0, 4.0, 6.0]);
        assert!(along.starts_inside);
        assert!((along.inside_measure() - 4.0).abs() < 1e-15);
        let across = s.slice(1, &[1.0]).unwrap();
        assert!(across.boundaries.is_empty() && across.starts_inside);
        let across_out = s.slice(1, &[3.0]).unwrap();
        assert!(across_out.boundaries.is_empty() && !across_out.starts_inside);
    }

    #[test]
    fn perimeter_closed_forms() {
        let s = stripes2d();
        assert!((s.per1i(0).unwrap() - 32.0).abs() < 1e-12);
        assert_eq!(s.per1i(1).unwrap(), 0.0);
        let b = PeriodicSet::from_boxes(2, 8.0, &[(vec![0.0, 0.0], vec![2.0, 3.0])]).unwrap();
        assert!((b.per1i(0).unwrap() - 6.0).abs() < 1e-12);
        assert!((b.per1i(1).unwrap() - 4.0).abs() < 1e-12);
        assert!((b.per1().unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn coincident_faces_cancel() {
        // Two boxes sharing the face x = 2 fuse into one rectangle.
        let b = PeriodicSet::from_boxes(
            2,
            8.0,
            &[(vec![0.0, 0.0], vec![2.0, 4.0]), (vec![2.0, 0.0], vec![5.0, 4.0])],
        )
        .unwrap();
        assert!((b.per1i(0).unwrap() - 8.0).abs() < 1e-12);
        assert!((b.per1i(1).unwrap() - 10.0).abs() < 1e-12);
        let profile = b.slice(0, &[1.0]).unwrap();
        assert_eq!(profile.boundaries, vec![0.0, 5.0]);
    }

    #[test]
    fn wrapping_boxes_normalize() {
        // [6, 10) wraps to [6,8) ∪ [0,2).
        let b = PeriodicSet::from_boxes(1, 8.0, &[(vec![6.0], vec![10.0])]).unwrap();
        assert!((b.volume() - 4.0).abs() < 1e-15);
        assert!(b.contains(&[7.5]) && b.contains(&[1.5]) && !b.contains(&[3.0]));
        let profile = b.slice(0, &[]).unwrap();
        assert_eq!(profile.boundaries, vec![2.0, 6.0]);
        assert!(!profile.starts_inside);
        // Overlap across the seam is rejected.
        assert!(PeriodicSet::from_boxes(
            1,
            8.0,
            &[(vec![6.0], vec![10.0]), (vec![1.0], vec![3.0])]
        )
        .is_err());
    }

    #[test]
    fn checkerboard_perimeter_by_faces_and_by_slicing() {
        // 4×4 cells of side 1 on L=4, alternating: every interior face of the
        // pattern separates phases, so per1i = n·L per axis... counted exactly.
        let mut cells = vec![0u8; 16];
        for iy in 0..4 {
            for ix in 0..4 {
                cells[ix + 4 * iy] = ((ix + iy) % 2) as u8;
            }
        }
        let cb = PeriodicSet::from_grid(2, 4.0, 4, cells).unwrap();
        // Face count per axis: all 16 faces differ ⇒ 16·(L/n)^{d-1} = 16.
        assert!((cb.per1i(0).unwrap() - 16.0).abs() < 1e-12);
        assert!((cb.per1i(1).unwrap() - 16.0).abs() < 1e-12);
        // Slicing-formula oracle: integrate boundary counts over offsets.
        let dx = 1.0;
        for axis in [0usize, 1] {
            let mut integral = 0.0;
            for j in 0..4 {
                let profile = cb.slice(axis, &[(j as f64 + 0.5) * dx]).unwrap();
                integral += profile.boundaries.len() as f64 * dx;
            }
            assert!((integral - cb.per1i(axis).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn neighbors_unwrap_cyclically() {
        let p = SliceProfile {
            period: 8.0,
            boundaries: vec![1.0, 3.0, 5.0, 7.0],
            starts_inside: true,
        };
        assert_eq!(p.neighbors(1.0).unwrap(), (-1.0, 3.0));
        assert_eq!(p.neighbors(7.0).unwrap(), (5.0, 9.0));
        let two = SliceProfile { period: 8.0, boundaries: vec![0.0, 6.0], starts_inside: true };
        assert_eq!(two.neighbors(6.0).unwrap(), (0.0, 8.0));
        let one = SliceProfile { period: 8.0, boundaries: vec![2.0], starts_inside: true };
        assert!(one.neighbors(2.0).is_err());
        assert!(two.neighbors(3.0).is_err());
    }

    #[test]
    fn complement_and_translate_preserve_the_right_things() {
        let s = stripes2d().rasterize(16).unwrap();
        let c = s.complement().unwrap();
        assert!((s.volume() + c.volume() - 64.0).abs() < 1e-12);
        assert_eq!(s.per1().unwrap(), c.per1().unwrap());
        let t = s.translate(&[1.0, 0.5]).unwrap();
        assert_eq!(s.volume(), t.volume());
        assert_eq!(s.per1().unwrap(), t.per1().unwrap());
        assert!(s.translate(&[0.3, 0.0]).is_err());
        // Box translation is exact.
        let b = stripes2d().translate(&[0.7, 0.0]).unwrap();
        let profile = b.slice(0, &[0.0]).unwrap();
        assert_eq!(profile.boundaries, vec![0.7, 2.7, 4.7, 6.7]);
        assert!(b.contains(&[0.8, 4.0]) && !b.contains(&[0.5, 4.0]));
    }

    #[test]
    fn permute_axes_swaps_profiles() {
        let s = stripes2d();
        let swapped = s.permute_axes(&[1, 0]).unwrap();
        let profile = swapped.slice(1, &[0.5]).unwrap();
        assert_eq!(profile.boundaries, vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(swapped.per1i(0).unwrap(), 0.0);
        assert!((swapped.per1i(1).unwrap() - 32.0).abs() < 1e-12);
    }

    #[test]
    fn rasterization_tracks_volume_and_perimeter() {
        let b = PeriodicSet::from_boxes(
            2,
            8.0,
            &[(vec![0.31, 1.07], vec![2.9, 3.4]), (vec![4.22, 5.0], vec![7.1, 7.77])],
        )
        .unwrap();
        let n = 256;
        let g = b.rasterize(n).unwrap();
        let cell = 8.0 / n as f64;
        assert!((g.volume() - b.volume()).abs() <= b.per1().unwrap() * cell);
        let (pb, pg) = (b.per1().unwrap(), g.per1().unwrap());
        assert!((pg - pb).abs() / pb <= 4.0 / n as f64);
        // Profiles agree to one cell.
        let pb = b.slice(0, &[2.0]).unwrap();
        let pg = g.slice(0, &[2.0]).unwrap();
        assert_eq!(pb.boundaries.len(), pg.boundaries.len());
        for (x, y) in pb.boundaries.iter().zip(&pg.boundaries) {
            assert!((x - y).abs() <= cell, "{x} vs {y}");
        }
    }

    #[test]
    fn text_roundtrip_is_bit_exact() {
        let b = PeriodicSet::from_boxes(
            2,
            8.0,
            &[(vec![0.1 + 0.2, 1.0 / 3.0], vec![1.9, 2.0 / 3.0 + 1.0])],
        )
        .unwrap();
        let mut buf = Vec::new();
        b.write_to(&mut buf).unwrap();
        let back = PeriodicSet::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(b, back);
        let g = stripes2d().rasterize(16).unwrap();
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        let back = PeriodicSet::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(g, back);
        // Garbage is rejected, not misparsed.
        assert!(PeriodicSet::read_from(&mut "2 8 blobs\n".as_bytes()).is_err());
        assert!(PeriodicSet::read_from(&mut "2 8 grid 4\n15*0 2*1\n".as_bytes()).is_err());
    }
}
