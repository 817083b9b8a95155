use super::terminal::{terminal_beta_scalar, terminal_inf};
use super::types::{DiscreteMeasure, LagrangeMultiplier, Path};
use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite, integrate_adaptive};
use crate::rng::{stream, Purpose};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Zero,
    Positive(f64),
}

/// Scalar terminal with its derivative: `f^∞` (derivative = maximizer) or
/// `f^β` (derivative = Gibbs mean).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarTerminal {
    pub lambda: f64,
    pub p: f64,
    pub t: f64,
    pub temperature: Temperature,
}

impl ScalarTerminal {
    pub fn value_and_slope(&self, x: f64) -> Result<(f64, f64)> {
        match self.temperature {
            Temperature::Zero => {
                let (v, s) = terminal_inf(&LagrangeMultiplier::scalar(self.lambda)?, self.p, self.t, &[x])?;
                Ok((v, s[0]))
            }
            Temperature::Positive(beta) => {
                let (b, m) = terminal_beta_scalar(self.lambda, beta, self.p, self.t, x, true)?;
                Ok((b.value, m.expect("mean requested")))
            }
        }
    }

    /// Weight of a layer: `ζ_j` at zero temperature, `β α_j` otherwise.
    pub fn layer_weight(&self, w: f64) -> f64 {
        match self.temperature {
            Temperature::Zero => w,
            Temperature::Positive(beta) => beta * w,
        }
    }
}

/// Cubic Hermite table of a function and its derivative on a uniform grid.
pub(crate) struct Table {
    lo: f64,
    h: f64,
    vals: Vec<f64>,
    ders: Vec<f64>,
}

impl Table {
    pub(crate) fn build(f: impl Fn(f64) -> Result<(f64, f64)> + Sync, lo: f64, hi: f64, h: f64) -> Result<Table> {
        let n = ((hi - lo) / h).ceil() as usize + 1;
        let pts: Vec<(f64, f64)> = (0..n).into_par_iter().map(|i| f(lo + i as f64 * h)).collect::<Result<Vec<_>>>()?;
        Ok(Table { lo, h, vals: pts.iter().map(|p| p.0).collect(), ders: pts.iter().map(|p| p.1).collect() })
    }

    /// Value and derivative; `None` outside the table.
    pub(crate) fn eval(&self, x: f64) -> Option<(f64, f64)> {
        let u = (x - self.lo) / self.h;
        if !(u >= 0.0) || u > (self.vals.len() - 1) as f64 {
            return None;
        }
        let i = (u.floor() as usize).min(self.vals.len() - 2);
        let s = u - i as f64;
        let (y0, y1) = (self.vals[i], self.vals[i + 1]);
        let (d0, d1) = (self.ders[i] * self.h, self.ders[i + 1] * self.h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * d1;
        let dv = ((6.0 * s2 - 6.0 * s) * y0 + (3.0 * s2 - 4.0 * s + 1.0) * d0 + (-6.0 * s2 + 6.0 * s) * y1 + (3.0 * s2 - 2.0 * s) * d1) / self.h;
        Some((v, dv))
    }
}

/// `Φ(s, x) = (1/m) log E exp(m G(x + √v w))` and `Φ_x`, by Gauss–Hermite over
/// `w` with `v = 2π'(q − s)`.
pub(crate) fn smoothed(table: &Table, m: f64, v: f64, x: f64, nodes: usize) -> Option<(f64, f64)> {
    let rule = gauss_hermite(nodes);
    let sd = v.max(0.0).sqrt();
    let mut gs = Vec::with_capacity(nodes);
    for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
        let (g, dg) = table.eval(x + sd * z)?;
        gs.push((w, g, dg));
    }
    if m == 0.0 {
        let phi = gs.iter().map(|(w, g, _)| w * g).sum();
        let dphi = gs.iter().map(|(w, _, d)| w * d).sum();
        return Some((phi, dphi));
    }
    let mx = gs.iter().map(|g| g.1).fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut zd) = (0.0, 0.0);
    for (w, g, dg) in &gs {
        let e = w * (m * (g - mx)).exp();
        z += e;
        zd += e * dg;
    }
    Some((mx + z.ln() / m, zd / z))
}

/// Largest node of the `nodes`-point Gauss–Hermite rule plus one, in standard
/// deviations.
pub(crate) fn node_reach(nodes: usize) -> f64 {
    gauss_hermite(nodes).nodes.iter().fold(0.0f64, |a, z| a.max(z.abs())) + 1.0
}

/// Distance of the mode of `exp(m G(x) − x²/(2v))` from the origin, the
/// centre of the tilted terminal law; zero when `m = 0`.
fn tilted_mode(terminal: &ScalarTerminal, m: f64, v: f64) -> Result<f64> {
    if m == 0.0 {
        return Ok(0.0);
    }
    let mut far = 0.0f64;
    for sign in [1.0, -1.0] {
        let mut x = sign * v.sqrt();
        for _ in 0..200 {
            let next = (m * v * terminal.value_and_slope(x)?.1).clamp(-1e3, 1e3);
            if (next - x).abs() <= 1e-6 * (1.0 + x.abs()) {
                x = next;
                break;
            }
            x = 0.5 * (x + next);
        }
        far = far.max(x.abs());
    }
    Ok(far)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    None,
    Optimal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcReport {
    pub estimate: f64,
    pub stderr: f64,
    /// `E X(1)²` over the retained paths.
    pub second_moment: f64,
    pub paths: usize,
    /// Paths that left the precomputed grid.
    pub exploded: usize,
}

/// Euler–Maruyama for `dX = 2 m π' Φ_x(s, X) ds + √(2π') dW` (or `v ≡ 0` with
/// no control), returning the Monte Carlo mean of
/// `f(X(1)) − ∫ m π' v² ds`. Restricted to `κ = 1`, `r = 1`.
#[allow(clippy::too_many_arguments)]
pub fn ac_simulate(
    terminal: &ScalarTerminal,
    weights: &DiscreteMeasure,
    path: &Path,
    control: Control,
    n_paths: usize,
    dt: f64,
    nodes: usize,
    seed: u64,
) -> Result<AcReport> {
    if path.kappa() != 1 || path.r() != 1 {
        return Err(Error::Input("the control simulation supports kappa = 1 and r = 1 only".into()));
    }
    weights.check_against(path)?;
    if !(dt > 0.0 && dt <= 1e-3) {
        return Err(Error::Domain(format!("dt must lie in (0, 1e-3], got {dt}")));
    }
    if n_paths < 2 {
        return Err(Error::Input("need at least two paths".into()));
    }
    let q0 = path.knots()[0];
    let slope = path.slope(0)?.get(0, 0);
    let d = path.endpoint().get(0, 0);
    let m = terminal.layer_weight(weights.weights()[0]);
    let sd1 = (2.0 * d).sqrt().max(1e-3);
    let reach = 10.0 * sd1 + tilted_mode(terminal, m, sd1 * sd1)?;
    let table = Table::build(|x| terminal.value_and_slope(x), -reach - node_reach(nodes) * sd1, reach + node_reach(nodes) * sd1, sd1 / 400.0)?;

    // Φ_x on an (s, x) grid over [q0, 1] × [−reach, reach].
    let ns = 201;
    let nx = 1601;
    let hs = (1.0 - q0) / (ns - 1) as f64;
    let hx = 2.0 * reach / (nx - 1) as f64;
    let grid: Vec<f64> = if control == Control::Optimal {
        (0..ns * nx)
            .into_par_iter()
            .map(|idx| {
                let (i, j) = (idx / nx, idx % nx);
                let s = q0 + i as f64 * hs;
                let x = -reach + j as f64 * hx;
                smoothed(&table, m, 2.0 * slope * (1.0 - s), x, nodes).map(|r| r.1).unwrap_or(f64::NAN)
            })
            .collect()
    } else {
        Vec::new()
    };
    let drift_field = |s: f64, x: f64| -> Option<f64> {
        let u = ((s - q0) / hs).clamp(0.0, (ns - 1) as f64);
        let w = (x + reach) / hx;
        if !(w >= 0.0 && w <= (nx - 1) as f64) {
            return None;
        }
        let i = (u.floor() as usize).min(ns - 2);
        let j = (w.floor() as usize).min(nx - 2);
        let (a, b) = (u - i as f64, w - j as f64);
        let g = |ii: usize, jj: usize| grid[ii * nx + jj];
        Some((1.0 - a) * ((1.0 - b) * g(i, j) + b * g(i, j + 1)) + a * ((1.0 - b) * g(i + 1, j) + b * g(i + 1, j + 1)))
    };

    let steps = ((1.0 - q0) / dt).ceil() as usize;
    let h = (1.0 - q0) / steps as f64;
    const CHUNK: usize = 1024;
    let chunks = n_paths.div_ceil(CHUNK);
    let partial: Vec<(f64, f64, f64, usize, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream(seed, Purpose::Paths, c as u64);
            let count = CHUNK.min(n_paths - c * CHUNK);
            let (mut s1, mut s2, mut m2, mut kept, mut exploded) = (0.0, 0.0, 0.0, 0, 0);
            'paths: for _ in 0..count {
                let mut x = 0.0f64;
                let mut cost = 0.0;
                for k in 0..steps {
                    let s = q0 + k as f64 * h;
                    let v = match control {
                        Control::None => 0.0,
                        Control::Optimal => match drift_field(s, x) {
                            Some(v) => v,
                            None => {
                                exploded += 1;
                                continue 'paths;
                            }
                        },
                    };
                    cost += m * slope * v * v * h;
                    let z: f64 = rng.sample(StandardNormal);
                    x += 2.0 * m * slope * v * h + (2.0 * slope * h).sqrt() * z;
                }
                let Some((fx, _)) = table.eval(x) else {
                    exploded += 1;
                    continue;
                };
                let y = fx - cost;
                s1 += y;
                s2 += y * y;
                m2 += x * x;
                kept += 1;
            }
            (s1, s2, m2, kept, exploded)
        })
        .collect();
    let (s1, s2, m2, kept, exploded) = partial.iter().fold((0.0, 0.0, 0.0, 0, 0), |a, p| (a.0 + p.0, a.1 + p.1, a.2 + p.2, a.3 + p.3, a.4 + p.4));
    if exploded as f64 > 1e-3 * n_paths as f64 {
        return Err(Error::Numeric(format!("{exploded} of {n_paths} paths left the grid [{}, {}]", -reach, reach)));
    }
    let n = kept as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(AcReport { estimate: mean, stderr: (var / n).sqrt(), second_moment: m2 / n, paths: kept, exploded })
}

/// `Φ(0, 0) = (1/m) log E exp(m f(√(2D) z))` for `r = 1`, `κ = 1`, by
/// adaptive quadrature around the tilted mode, as an oracle for
/// [`ac_simulate`].
pub fn root_value_scalar(terminal: &ScalarTerminal, weights: &DiscreteMeasure, path: &Path) -> Result<f64> {
    if path.kappa() != 1 || path.r() != 1 {
        return Err(Error::Input("kappa = 1 and r = 1 only".into()));
    }
    weights.check_against(path)?;
    let sd = (2.0 * path.endpoint().get(0, 0)).sqrt();
    let m = terminal.layer_weight(weights.weights()[0]);
    if sd == 0.0 {
        return Ok(terminal.value_and_slope(0.0)?.0);
    }
    let mode = tilted_mode(terminal, m, sd * sd)? / sd;
    let mut failure = None;
    let mut g = |z: f64| match terminal.value_and_slope(sd * z) {
        Ok(v) => v.0,
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let log_w = |g: f64, z: f64| m * g - 0.5 * z * z;
    let shift = if m == 0.0 { 0.0 } else { [0.0, mode, -mode].iter().map(|&z| log_w(g(z), z)).fold(f64::NEG_INFINITY, f64::max) };
    let far = mode + 40.0;
    let mut breaks = vec![-far, -mode - 8.0, -mode, 0.0, mode, mode + 8.0, far];
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    let norm = (2.0 * std::f64::consts::PI).sqrt();
    let (value, _) = if m == 0.0 {
        integrate_adaptive(|z| g(z) * (-0.5 * z * z).exp() / norm, &breaks, 1e-13, 0.0, 20_000)?
    } else {
        integrate_adaptive(|z| (log_w(g(z), z) - shift).exp() / norm, &breaks, 1e-13, 0.0, 20_000)?
    };
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(if m == 0.0 { value } else { (shift + value.ln()) / m })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentDiagnostic {
    pub second_moment: f64,
    pub eta: f64,
    /// Growth exponent `2/(2−η)` of the moment bound in `‖ζ‖_∞`.
    pub exponent: f64,
    /// Largest admissible empirical log-log slope.
    pub slope_cap: f64,
}

/// Moment bound exponent with `η = max(1 + 1/(p−1), 2/(p−1))`.
pub fn moment_diagnostic(report: &AcReport, p: f64) -> MomentDiagnostic {
    let eta = (1.0 + 1.0 / (p - 1.0)).max(2.0 / (p - 1.0));
    let exponent = 2.0 / (2.0 - eta);
    MomentDiagnostic { second_moment: report.second_moment, eta, exponent, slope_cap: exponent + 0.2 }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::GramMatrix;
    use crate::parisi::recursion::{recursion, PositiveTemperature};
    use crate::parisi::types::QuadratureSpec;

    #[test]
    fn hermite_table_accuracy() {
        let t = Table::build(|x: f64| Ok((x.sin(), x.cos())), -3.0, 3.0, 0.01).unwrap();
        for &x in &[-2.9, -0.123, 0.5, 2.999] {
            let (v, d) = t.eval(x).unwrap();
            assert!((v - x.sin()).abs() < 1e-10 && (d - x.cos()).abs() < 1e-6);
        }
        assert!(t.eval(3.5).is_none());
    }

    #[test]
    fn zero_weight_is_plain_expectation() {
        let term = ScalarTerminal { lambda: 0.0, p: 3.0, t: 1.0, temperature: Temperature::Positive(5.0) };
        let path = Path::single_level(GramMatrix::identity(1));
        let w = DiscreteMeasure::new(vec![0.0, 1.0], crate::parisi::Flavor::Probability).unwrap();
        let rep = ac_simulate(&term, &w, &path, Control::Optimal, 20_000, 1e-3, 48, 1).unwrap();
        let lam = LagrangeMultiplier::zeros(1);
        let exact = recursion(&PositiveTemperature { lambda: &lam, beta: 5.0, p: 3.0, t: 1.0, quad: QuadratureSpec::grid(64) }, &[0.0], &path, &QuadratureSpec::grid(64))
            .unwrap()
            .value;
        assert!((rep.estimate - exact).abs() < 4.0 * rep.stderr);
        // Itô isometry: E X(1)² = 2D.
        assert!((rep.second_moment - 2.0).abs() < 0.1);
    }

    #[test]
    fn root_value_matches_simpson_oracle() {
        let term = ScalarTerminal { lambda: 0.3, p: 3.0, t: 1.0, temperature: Temperature::Zero };
        let path = Path::single_level(GramMatrix::identity(1));
        let zeta = 1.5;
        let w = DiscreteMeasure::finite(vec![zeta, zeta]).unwrap();
        // Composite Simpson on [−12, 12] with a node at the kink z = 0.
        let n = 24_000;
        let h = 24.0 / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let z = -12.0 + i as f64 * h;
            let f = term.value_and_slope(2f64.sqrt() * z).unwrap().0;
            let c = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += c * (zeta * f - 0.5 * z * z).exp();
        }
        let oracle = (acc * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt()).ln() / zeta;
        let adaptive = root_value_scalar(&term, &w, &path).unwrap();
        assert!((adaptive - oracle).abs() < 1e-9, "{adaptive} vs {oracle}");
        // Gauss–Hermite loses accuracy at the kink of the terminal.
        let lam = LagrangeMultiplier::scalar(0.3).unwrap();
        let gh = recursion(&crate::parisi::ZeroTemperature { lambda: &lam, p: 3.0, t: 1.0 }, &[zeta], &path, &QuadratureSpec::grid(64))
            .unwrap()
            .value;
        assert!((gh - oracle).abs() < 1e-3);
    }

    #[test]
    fn moment_exponent() {
        let rep = AcReport { estimate: 0.0, stderr: 0.0, second_moment: 2.0, paths: 1, exploded: 0 };
        let d = moment_diagnostic(&rep, 3.0);
        assert_eq!(d.eta, 1.5);
        assert!((d.slope_cap - 4.2).abs() < 1e-12);
        assert!((log_log_slope(&[1.0, 10.0, 100.0], &[2.0, 20.0, 200.0]) - 1.0).abs() < 1e-12);
    }
}
