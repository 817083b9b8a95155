//! Closed-form large-N limits, Gaussian absolute moments and the
//! ground-state/Lagrangian transform.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `E|g|^q = 2^{q/2} Γ((q+1)/2) / √π` for a standard Gaussian `g`.
pub fn gaussian_abs_moment(q: f64) -> Result<f64> {
    if !(q > -1.0) || !q.is_finite() {
        return Err(Error::Domain(format!("moment order must exceed -1, got {q}")));
    }
    Ok((0.5 * q * 2f64.ln() + ln_gamma(0.5 * (q + 1.0)) - 0.5 * PI.ln()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `p = 1`
    One,
    /// `1 < p < 2`
    Sub,
    /// `p = 2`
    Two,
    /// `p > 2`
    Super,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scaling {
    /// `N^{1/p*}` with `p*` the conjugate exponent.
    PowerConjugate(f64),
    SqrtLogN,
    SqrtN,
    /// `N^{3/2 − 2/p}`
    Power(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Constant {
    Value(f64),
    /// Given only through the Lagrangian variational problem.
    Variational,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitResult {
    pub p: f64,
    pub regime: Regime,
    pub scaling: Scaling,
    pub constant: Constant,
}

impl LimitResult {
    pub fn value(&self) -> Option<f64> {
        match self.constant {
            Constant::Value(v) => Some(v),
            Constant::Variational => None,
        }
    }
}

/// Hölder conjugate `p/(p−1)`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// `2^{1/2−2/p} (E|g|^{p*})^{1/p*}`, the `1 < p < 2` constant.
///
/// As `p → 2⁻` this tends to `2^{-1/2}`, while the `p = 2` limit is `√2`:
/// the two regimes normalize by different powers of `N` only in name
/// (`N^{1/p*}` and `√N` coincide at `p = 2`), so the constants genuinely jump.
pub fn sub_quadratic_constant(p: f64) -> Result<f64> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::Domain(format!("formula needs 1 < p <= 2, got {p}")));
    }
    let q = conjugate(p);
    Ok(2f64.powf(0.5 - 2.0 / p) * gaussian_abs_moment(q)?.powf(1.0 / q))
}

/// Large-N limit of the maximum over the unit `ℓ^p` sphere for `p ∈ [1, 2]`;
/// `p > 2` is reported as variational.
pub fn limit_constant(p: f64) -> Result<LimitResult> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("p must be at least 1, got {p}")));
    }
    let r = if p == 1.0 {
        LimitResult { p, regime: Regime::One, scaling: Scaling::SqrtLogN, constant: Constant::Value(SQRT_2) }
    } else if p < 2.0 {
        LimitResult {
            p,
            regime: Regime::Sub,
            scaling: Scaling::PowerConjugate(1.0 / conjugate(p)),
            constant: Constant::Value(sub_quadratic_constant(p)?),
        }
    } else if p == 2.0 {
        LimitResult { p, regime: Regime::Two, scaling: Scaling::SqrtN, constant: Constant::Value(SQRT_2) }
    } else {
        LimitResult { p, regime: Regime::Super, scaling: Scaling::Power(1.5 - 2.0 / p), constant: Constant::Variational }
    };
    Ok(r)
}

fn transform_factor(p: f64, t: f64) -> f64 {
    0.5 * p * (0.5 * p - 1.0).powf(2.0 / p - 1.0) * t.powf(2.0 / p)
}

fn check_pt(p: f64, t: f64) -> Result<()> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(Error::Domain(format!("p must exceed 2, got {p}")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    Ok(())
}

/// Ground-state energy from the Lagrangian value at penalty `t`:
/// `(p/2)(p/2−1)^{2/p−1} t^{2/p} L^{1−2/p}`.
pub fn gse_transform(l_value: f64, p: f64, t: f64) -> Result<f64> {
    check_pt(p, t)?;
    if !(l_value > 0.0) {
        return Err(Error::Domain(format!("Lagrangian value must be positive, got {l_value}")));
    }
    Ok(transform_factor(p, t) * l_value.powf(1.0 - 2.0 / p))
}

/// Inverse of [`gse_transform`] in the Lagrangian value.
pub fn gse_transform_inverse(gse: f64, p: f64, t: f64) -> Result<f64> {
    check_pt(p, t)?;
    if !(gse > 0.0) {
        return Err(Error::Domain(format!("ground-state value must be positive, got {gse}")));
    }
    Ok((gse / transform_factor(p, t)).powf(1.0 / (1.0 - 2.0 / p)))
}

/// Edge of the spectrum of `(G + Gᵀ)/√2`: `2√N`.
pub fn goe_edge_reference(n: usize) -> f64 {
    2.0 * (n as f64).sqrt()
}
