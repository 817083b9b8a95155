use super::terminal::{terminal_beta_detail, terminal_inf};
use super::types::{LagrangeMultiplier, QuadratureSpec};
use crate::asymptotics::ln_gamma;
use crate::error::{Error, Result};

/// Both sandwich inequalities between the terminal conditions at one `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalComparison {
    pub x: Vec<f64>,
    pub f_beta: f64,
    pub f_inf: f64,
    /// Relative error estimate of the `f^β` integral.
    pub quad_rel_error: f64,
    /// Upper bound on `f^β_t` through `f^∞_{t−δ}`; `None` unless `δ < t`.
    pub upper_rhs: Option<f64>,
    /// `upper_rhs − f^β`; the bound holds when non-negative.
    pub upper_slack: Option<f64>,
    /// Upper bound on `f^∞` through `f^β`; `None` unless `δ < L^{1/(p−1)}`.
    pub lower_rhs: Option<f64>,
    /// `lower_rhs − f^∞`.
    pub lower_slack: Option<f64>,
}

impl TerminalComparison {
    /// Every applicable bound holds.
    pub fn holds(&self) -> bool {
        self.upper_slack.is_none_or(|s| s >= 0.0) && self.lower_slack.is_none_or(|s| s >= 0.0)
    }
}

/// `log ∫_{ℝ^κ} e^{−‖σ‖^p} dσ = log(2 π^{κ/2} Γ(κ/p) / (p Γ(κ/2)))`.
pub fn log_radial_integral(kappa: usize, p: f64) -> f64 {
    let k = kappa as f64;
    (2.0f64).ln() + 0.5 * k * std::f64::consts::PI.ln() + ln_gamma(k / p) - p.ln() - ln_gamma(0.5 * k)
}

/// Convexifying constant of the cube mean-value bound at centre `ρ`.
pub fn cube_curvature_constant(lambda: &LagrangeMultiplier, p: f64, t: f64, rho_norm: f64, delta: f64) -> f64 {
    let k = lambda.kappa();
    let kf = k as f64;
    let radial = (t * p * (p - 1.0) + t * p * (p - 2.0) * kf) * ((2.0 * rho_norm).powf(p - 2.0) + (2.0 * kf.sqrt() * delta).powf(p - 2.0));
    let lam = (0..k)
        .map(|a| 2.0 * lambda.get(a, a).abs() + (0..k).filter(|&b| b != a).map(|b| lambda.get(a, b).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    radial + lam
}

/// Evaluates
/// `f^β_t(x) ≤ f^∞_{t−δ}(x) − κ log(βδ)/(pβ) + (1/β) log ∫e^{−‖σ‖^p}` and
/// `f^∞(x) ≤ f^β(x) + κδ² h(σ*)/6 − κ log(2δ)/β` on every grid point.
pub fn compare_terminals(
    lambda: &LagrangeMultiplier,
    p: f64,
    t: f64,
    beta: f64,
    delta: f64,
    x_grid: &[Vec<f64>],
    quad: &QuadratureSpec,
) -> Result<Vec<TerminalComparison>> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta must be positive, got {delta}")));
    }
    let k = lambda.kappa();
    let kf = k as f64;
    let big_l = x_grid.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
    let upper_ok = delta < t;
    let lower_ok = delta < big_l.powf(1.0 / (p - 1.0));
    x_grid
        .iter()
        .map(|x| {
            let fb = terminal_beta_detail(lambda, beta, p, t, x, quad)?;
            let (finf, argmax) = terminal_inf(lambda, p, t, x)?;
            let (upper_rhs, upper_slack) = if upper_ok {
                let shifted = terminal_inf(lambda, p, t - delta, x)?.0;
                let rhs = shifted - kf * (beta * delta).ln() / (p * beta) + log_radial_integral(k, p) / beta;
                (Some(rhs), Some(rhs - fb.value))
            } else {
                (None, None)
            };
            let (lower_rhs, lower_slack) = if lower_ok {
                let rho = argmax.iter().map(|v| v * v).sum::<f64>().sqrt();
                let h = cube_curvature_constant(lambda, p, t, rho, delta);
                let rhs = fb.value + kf * delta * delta * h / 6.0 - kf * (2.0 * delta).ln() / beta;
                (Some(rhs), Some(rhs - finf))
            } else {
                (None, None)
            };
            Ok(TerminalComparison {
                x: x.clone(),
                f_beta: fb.value,
                f_inf: finf,
                quad_rel_error: fb.rel_error,
                upper_rhs,
                upper_slack,
                lower_rhs,
                lower_slack,
            })
        })
        .collect()
}

/// Cube-average lower bound `(1/|C|)∫_C g + κ log(2δ)/β` on `f^β(x)` for a
/// scalar spin, with the cube centred at `ρ`.
pub fn jensen_lower_bound_scalar(lam: f64, p: f64, t: f64, beta: f64, delta: f64, x: f64, rho: f64) -> f64 {
    // ∫ |σ|^p over [a, b] in closed form.
    let abs_pow_int = |a: f64, b: f64| {
        let prim = |s: f64| s.signum() * s.abs().powf(p + 1.0) / (p + 1.0);
        prim(b) - prim(a)
    };
    let (a, b) = (rho - delta, rho + delta);
    let len = 2.0 * delta;
    let lin = x * rho;
    let quad = lam * (rho * rho + delta * delta / 3.0);
    let pen = t * abs_pow_int(a, b) / len;
    lin + quad - pen + (2.0 * delta).ln() / beta
}
