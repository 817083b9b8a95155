use super::recursion::{recursion, PositiveTemperature, ZeroTemperature};
use super::types::{DiscreteMeasure, Flavor, LagrangeMultiplier, Path, QuadratureSpec};
use crate::error::{Error, Result};

/// `∫ζ(s) Sum(π(s)⊙π'(s)) ds = ½ Σ_{j<r} ζ_j (‖γ_{j+1}‖²_HS − ‖γ_j‖²_HS)`.
pub fn integral_term(weights: &DiscreteMeasure, path: &Path) -> Result<f64> {
    weights.check_against(path)?;
    let hs = path.hs_norms_squared();
    Ok(0.5 * (0..path.r()).map(|j| weights.weights()[j] * (hs[j + 1] - hs[j])).sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParisiValue {
    pub value: f64,
    /// Root value of the recursion before the penalty terms.
    pub root: f64,
    pub stderr: f64,
}

fn check_common(lambda: &LagrangeMultiplier, weights: &DiscreteMeasure, path: &Path) -> Result<()> {
    weights.check_against(path)?;
    if lambda.kappa() != path.kappa() {
        return Err(Error::Shape("multiplier and path have different kappa".into()));
    }
    Ok(())
}

/// Zero-temperature functional `Y_0 − Σλ D − ∫ζ Sum(π⊙π')`.
pub fn parisi_inf(
    lambda: &LagrangeMultiplier,
    p: f64,
    t: f64,
    zeta: &DiscreteMeasure,
    path: &Path,
    quad: &QuadratureSpec,
) -> Result<ParisiValue> {
    check_common(lambda, zeta, path)?;
    let term = ZeroTemperature { lambda, p, t };
    let y = recursion(&term, zeta.weights(), path, quad)?;
    let value = y.value - lambda.pairing(path.endpoint())? - integral_term(zeta, path)?;
    Ok(ParisiValue { value, root: y.value, stderr: y.stderr })
}

/// Positive-temperature functional `X_0 − Σλ D − β∫α Sum(π⊙π')`.
pub fn parisi_beta(
    lambda: &LagrangeMultiplier,
    beta: f64,
    p: f64,
    t: f64,
    alpha: &DiscreteMeasure,
    path: &Path,
    quad: &QuadratureSpec,
) -> Result<ParisiValue> {
    check_common(lambda, alpha, path)?;
    if alpha.flavor() != Flavor::Probability {
        return Err(Error::Input("the positive-temperature functional takes a probability measure".into()));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be positive and finite, got {beta}")));
    }
    let term = PositiveTemperature { lambda, beta, p, t, quad: quad.clone() };
    let layer: Vec<f64> = alpha.weights().iter().map(|a| beta * a).collect();
    let x = recursion(&term, &layer, path, quad)?;
    let value = x.value - lambda.pairing(path.endpoint())? - beta * integral_term(alpha, path)?;
    Ok(ParisiValue { value, root: x.value, stderr: x.stderr })
}
