//! The interaction kernel, its one-dimensional marginal, moments, and box
//! periodizations.
//!
//! Closed forms used throughout (`a = τ^{1/β}`, `q = p − d + 1`):
//!
//! * `K_τ(ζ) = (‖ζ‖₁ + a)^{-p}` — the rescaling `τ^{-p/β} K₁(ζ τ^{-1/β})` in
//!   closed form.
//! * `K̂_τ(ρ) = c1 · (|ρ| + a)^{-q}` with `c1 = 2^{d-1} Γ(p−d+1)/Γ(p)` — the
//!   marginal over the `d−1` perpendicular coordinates.
//! * `m1 = ∫ |ρ| K̂_τ(ρ) dρ = 2 c1 c2 / τ` with `c2 = 1/((q−1)(q−2))`.
//!
//! Periodized variants (`K̄`, sums over the lattice `L·ℤ^d` of translates) are
//! evaluated with a few explicit images plus Euler–Maclaurin-closed tails from
//! [`crate::special`]; the "far" flavors omit the central image, which keeps
//! every summand positive and avoids cancellation against the near-origin
//! spike `~ a^{-p}`.

use serde::{Deserialize, Serialize};

use crate::params::ModelParams;
use crate::special::{gamma, power_tail, power_tail_weighted};
use crate::{quad, Error, Result};

/// Derived kernel constants; see [`kernel_constants`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KernelConstants {
    /// Perpendicular mass `∫_{ℝ^{d-1}} (‖ξ‖₁+1)^{-p} dξ = 2^{d-1} Γ(p−d+1)/Γ(p)`.
    pub c1: f64,
    /// `1/((q−1)(q−2))`.
    pub c2: f64,
    /// First marginal moment `∫_ℝ |ρ| K̂_τ(ρ) dρ = 2 c1 c2 / τ`.
    pub m1: f64,
    /// The same moment at `τ = 1`, i.e. `2 c1 c2`.
    pub jc_analogue: f64,
}

fn check_zeta(params: &ModelParams, zeta: &[f64]) -> Result<f64> {
    if zeta.len() != params.dim {
        return Err(Error::InvalidParams(format!(
            "zeta has length {}, expected dim = {}",
            zeta.len(),
            params.dim
        )));
    }
    Ok(zeta.iter().map(|z| z.abs()).sum())
}

/// Unit-scale kernel `K₁(ζ) = (‖ζ‖₁ + 1)^{-p}`.
pub fn k1(params: &ModelParams, zeta: &[f64]) -> Result<f64> {
    let n1 = check_zeta(params, zeta)?;
    Ok((n1 + 1.0).powf(-params.p))
}

/// Rescaled kernel `K_τ(ζ) = τ^{-p/β} K₁(ζ τ^{-1/β}) = (‖ζ‖₁ + τ^{1/β})^{-p}`.
pub fn k_tau(params: &ModelParams, zeta: &[f64]) -> Result<f64> {
    params.require_positive_tau("kernel evaluation")?;
    let n1 = check_zeta(params, zeta)?;
    Ok((n1 + params.a()).powf(-params.p))
}

/// Marginal at unit scale: `K̂₁(ρ) = c1 (|ρ| + 1)^{-q}`.
pub fn khat1(params: &ModelParams, rho: f64) -> f64 {
    c1_of(params) * (rho.abs() + 1.0).powf(-params.q())
}

/// Marginal `K̂_τ(ρ) = ∫_{ℝ^{d-1}} K_τ(ρ e_i + ξ) dξ = c1 (|ρ| + a)^{-q}`.
pub fn khat_tau(params: &ModelParams, rho: f64) -> Result<f64> {
    params.require_positive_tau("marginal kernel evaluation")?;
    Ok(c1_of(params) * (rho.abs() + params.a()).powf(-params.q()))
}

pub(crate) fn c1_of(params: &ModelParams) -> f64 {
    let d = params.dim as f64;
    if params.dim == 1 {
        1.0
    } else {
        2f64.powi(params.dim as i32 - 1) * gamma(params.p - d + 1.0) / gamma(params.p)
    }
}

/// Closed-form constants `c1`, `c2`, the moment `m1` (needs `τ > 0`), and the
/// `τ = 1` moment.
pub fn kernel_constants(params: &ModelParams) -> Result<KernelConstants> {
    params.require_positive_tau("the moment m1")?;
    let c1 = c1_of(params);
    let q = params.q();
    let c2 = 1.0 / ((q - 1.0) * (q - 2.0));
    Ok(KernelConstants { c1, c2, m1: 2.0 * c1 * c2 / params.tau, jc_analogue: 2.0 * c1 * c2 })
}

/// Total mass `∫_{ℝ^d} K_τ = 2^d Γ(p−d)/Γ(p) · a^{d−p}` (needs `τ > 0`).
pub fn kernel_mass(params: &ModelParams) -> Result<f64> {
    params.require_positive_tau("the kernel mass")?;
    let d = params.dim as f64;
    Ok(2f64.powi(params.dim as i32) * gamma(params.p - d) / gamma(params.p)
        * params.a().powf(d - params.p))
}

/// `∫_x^∞ t (t+a)^{-q} dt`, the tail of the first-moment integrand.
pub(crate) fn moment_tail(x: f64, a: f64, q: f64) -> f64 {
    (x + a).powf(2.0 - q) / (q - 2.0) - a * (x + a).powf(1.0 - q) / (q - 1.0)
}

/// One-axis periodization `Σ_{k∈ℤ} (|z + kL| + c)^{-p}` for `|z| ≤ L/2`, `c > 0`.
pub(crate) fn s1_line(z: f64, c: f64, l: f64, p: f64) -> f64 {
    (z.abs() + c).powf(-p) + s1_line_far(z, c, l, p)
}

/// Same sum without the `k = 0` term.
pub(crate) fn s1_line_far(z: f64, c: f64, l: f64, p: f64) -> f64 {
    debug_assert!(z.abs() <= 0.5 * l + 1e-9 * l);
    power_tail(p, z + c + l, l) + power_tail(p, -z + c + l, l)
}

/// Periodized marginal `Σ_k K̂_τ(ρ + kL)` for `|ρ| ≤ L/2`.
pub fn periodized_marginal(params: &ModelParams, l: f64, rho: f64) -> Result<f64> {
    params.require_positive_tau("marginal kernel evaluation")?;
    Ok(c1_of(params) * s1_line(rho, params.a(), l, params.q()))
}

/// Far part of the periodized marginal (central image removed).
pub(crate) fn periodized_marginal_far(params: &ModelParams, l: f64, rho: f64) -> f64 {
    c1_of(params) * s1_line_far(rho, params.a(), l, params.q())
}

/// Two-axis periodization `Σ_{k∈ℤ²} (|z₁+k₁L| + |z₂+k₂L| + a)^{-p}` on the
/// fundamental square, optionally without the `k = 0` image.
///
/// Row sums over `k₁` are [`s1_line`] evaluations; the `k₂` stack is closed
/// with weighted tails. `images` explicit `k₂` rows per sign (≥ 1) keep the
/// closure error near machine precision.
pub(crate) fn kbar_2d(z1: f64, z2: f64, a: f64, l: f64, p: f64, images: usize, far_only: bool) -> f64 {
    debug_assert!(z1.abs() <= 0.5 * l + 1e-9 * l && z2.abs() <= 0.5 * l + 1e-9 * l);
    let k2 = images.max(1);
    // Central row (k₂ = 0): distance offset a + |z₂|.
    let mut acc = if far_only {
        s1_line_far(z1, a + z2.abs(), l, p)
    } else {
        s1_line(z1, a + z2.abs(), l, p)
    };
    for k in 1..=k2 {
        let kl = k as f64 * l;
        acc += s1_line(z1, a + z2 + kl, l, p);
        acc += s1_line(z1, a - z2 + kl, l, p);
    }
    // Remaining rows: Σ_{j≥0} s1_line(z₁, c + jL) for both signs of z₂.
    for sign in [1.0, -1.0] {
        let c = a + sign * z2 + (k2 as f64 + 1.0) * l;
        acc += power_tail(p, z1.abs() + c, l);
        acc += power_tail_weighted(p, z1 + c + l, l);
        acc += power_tail_weighted(p, -z1 + c + l, l);
    }
    acc
}

/// Moment defect `T_L = ∫_ℝ K̂_τ(ρ)(|ρ| − tri_L(ρ)) dρ ≥ 0`, where `tri_L` is
/// `|·|` wrapped to `[-L/2, L/2)`.
///
/// Equivalently `m1 − ∫_{-L/2}^{L/2} |ρ| Σ_k K̂_τ(ρ+kL) dρ`; computed from the
/// central-image closed form plus an adaptive integral of the smooth far part,
/// which avoids the `m1`-scale cancellation.
pub(crate) fn moment_defect(params: &ModelParams, l: f64) -> Result<f64> {
    params.require_positive_tau("the periodized moment")?;
    let (a, q, c1) = (params.a(), params.q(), c1_of(params));
    let central_tail = 2.0 * c1 * moment_tail(0.5 * l, a, q);
    let far = quad::integrate(
        |rho| periodized_marginal_far(params, l, rho) * rho,
        0.0,
        0.5 * l,
        1e-13 * central_tail.max(1e-300),
    )?;
    Ok(central_tail - 2.0 * far.value)
}

/// `J_L = ∫_ℝ K̂_τ(ρ)·tri_L(ρ) dρ = m1 − T_L`.
pub(crate) fn folded_moment(params: &ModelParams, l: f64) -> Result<f64> {
    Ok(kernel_constants(params)?.m1 - moment_defect(params, l)?)
}
