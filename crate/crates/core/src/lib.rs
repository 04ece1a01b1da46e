//! Numerics for an anisotropic sharp-interface energy with a long-range
//! antiferromagnetic tail.
//!
//! The model assigns to an `L`-periodic set `E ⊂ ℝ^d` the energy
//!
//! ```text
//! F(E) = (1/L^d) · [ −Per₁(E) + ∬ K(ζ) · ( Σᵢ Perᵢ(E)|ζᵢ| − g_E(ζ) ) dζ ]
//! ```
//!
//! where `Per₁` is the 1-perimeter per cell, `g_E(ζ)` is the symmetric-difference
//! volume between `E` and its translate by `ζ`, and `K(ζ) = (‖ζ‖₁ + a)^{-p}` is a
//! regularized anisotropic power-law kernel (`a = τ^{1/β}`, `β = p − d − 1`).
//! The local term rewards interface, the tail penalizes it at long range, and the
//! competition selects striped phases with a definite period.
//!
//! Module map:
//!
//! * [`params`] — validated model parameters `(d, p, τ)` and derived exponents.
//! * [`special`] — gamma function and tail-closed power sums shared by everything.
//! * [`quad`] — adaptive 1-D quadrature.
//! * [`kernel`] — kernel closed forms, marginals, moments, and box periodization.
//! * [`stripe1d`] — the one-dimensional stripe energy `e(h)`, its derivatives,
//!   optimal periods, and convexity windows.
//! * [`setgeom`] — periodic sets (box unions and occupancy grids), slicing,
//!   perimeters, pattern constructors, and text I/O.
//! * [`functional`] — the energy itself: direct quadrature route and the
//!   per-boundary decomposition route, plus localized energies on subcubes.
//! * [`stripedist`] — L¹ distance from a set to the family of striped profiles
//!   (dynamic program), and cube classification built on it.
//! * [`verify`] — seeded self-checks that exercise the quantitative statements
//!   the library is built around, with machine-readable outcomes.

pub mod params;
pub mod special;
pub mod quad;
pub mod kernel;
pub mod stripe1d;
pub mod setgeom;
pub mod functional;
pub mod stripedist;
pub mod verify;

pub use functional::{
    decomposed_energy, direct_energy, local_energy, r_tau_1d, rvw_terms, DirectionTerms,
    EnergyMethod, EnergyReport, QuadratureSpec, RvwLine,
};
pub use kernel::{k1, k_tau, kernel_constants, khat_tau, KernelConstants};
pub use params::ModelParams;
pub use quad::{integrate, Quadrature, GL8_NODES, GL8_WEIGHTS};
pub use setgeom::{BoxSpan, PeriodicSet, SetRepr, SliceProfile};
pub use stripe1d::{
    c_series, convexity_window, d2e_tau, de_tau, e_tau, h_box, h_interval, h_star,
    ConvexityWindow, PeriodResult, SeriesValue,
};
pub use stripedist::{
    classify_cubes, column_occupancy, d_eta, d_eta_i, fit_profile, lipschitz_constant,
    ClassifiedCubes, Cube, CubeLabel, RegionLabel, StripeFitResult,
};
pub use verify::{
    check_1d_optimization, check_convexity_and_window, check_kernel_difference_bounds,
    check_pattern_ranking, check_penalization, check_stripe_equality, compare_patterns,
    rigidity_probe, run_all, run_suite, suite_names, CheckOutcome, PatternEnergy, RigidityRow,
    VerifyReport,
};

/// Errors reported by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Model or algorithm parameters outside the supported domain.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    /// A geometric input (set, box, slice) that the operation cannot accept.
    #[error("invalid set: {0}")]
    InvalidSet(String),
    /// Failure to reach the requested tolerance or to bracket a root/minimum.
    #[error("numerical failure: {0}")]
    Numerics(String),
    /// Malformed on-disk representation of a set or config.
    #[error("parse error: {0}")]
    Parse(String),
    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
