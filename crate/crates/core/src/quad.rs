//! One-dimensional adaptive quadrature and fixed Gauss–Legendre rules.
//!
//! The adaptive routine is a 15-point Kronrod / 7-point Gauss pair with
//! bisection; the embedded difference drives both refinement and the reported
//! error estimate. Integrands in this crate are smooth away from isolated
//! kinks, so plain bisection converges quickly.

use crate::{Error, Result};

/// Positive abscissae of the 15-point Kronrod rule (center last).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_17,
    0.207_784_955_007_898_47,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_84,
];
/// Weights of the embedded 7-point Gauss rule (applied at XGK[1,3,5,7]).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of embedded-rule differences over accepted panels; an estimate,
    /// in practice an overestimate for smooth integrands.
    pub error: f64,
    pub evaluations: usize,
}

fn kronrod_panel(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64, usize) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut resk = 0.0;
    let mut resg = 0.0;
    for i in 0..8 {
        let (fv, w) = if i == 7 {
            (f(c), WGK[7])
        } else {
            (f(c - h * XGK[i]) + f(c + h * XGK[i]), WGK[i])
        };
        resk += w * fv;
        if i % 2 == 1 {
            resg += WG[i / 2] * fv;
        } else if i == 7 {
            resg += WG[3] * fv;
        }
    }
    (resk * h, (resk - resg).abs() * h, 15)
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<Quadrature> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParams("integration bounds must be finite".into()));
    }
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0, evaluations: 0 });
    }
    const MAX_DEPTH: u32 = 48;
    let mut value = 0.0;
    let mut err_acc = 0.0;
    let mut evals = 0usize;
    // Work stack of (lo, hi, local tolerance, depth).
    let mut stack = vec![(a, b, tol.max(1e-300), 0u32)];
    while let Some((lo, hi, t, depth)) = stack.pop() {
        let (v, e, n) = kronrod_panel(&mut f, lo, hi);
        evals += n;
        if e <= t || depth >= MAX_DEPTH {
            value += v;
            err_acc += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * t, depth + 1));
            stack.push((mid, hi, 0.5 * t, depth + 1));
        }
    }
    if !value.is_finite() {
        return Err(Error::Numerics(format!(
            "integrand produced a non-finite panel on [{a}, {b}]"
        )));
    }
    Ok(Quadrature { value, error: err_acc, evaluations: evals })
}

/// 8-point Gauss–Legendre nodes on `[-1, 1]`.
pub const GL8_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
/// Weights matching [`GL8_NODES`].
pub const GL8_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];
