use super::types::{LagrangeMultiplier, QuadMode, QuadratureSpec};
use crate::error::{Error, Result};
use crate::quadrature::integrate_adaptive;
use crate::rng::{stream, Purpose};
use rand::Rng;
use rand_distr::StandardNormal;

/// `g(σ) = (σ, x) + Σ_{k≤k'} λ_{k,k'} σ_k σ_k' − t‖σ‖^p` and its derivatives.
struct SingleSite<'a> {
    lambda: &'a LagrangeMultiplier,
    p: f64,
    t: f64,
    x: &'a [f64],
}

fn norm(s: &[f64]) -> f64 {
    s.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_params(lambda: &LagrangeMultiplier, p: f64, t: f64, x: &[f64]) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    if !(p > 2.0) || !p.is_finite() {
        return Err(Error::Domain(format!("p must exceed 2, got {p}")));
    }
    if x.len() != lambda.kappa() {
        return Err(Error::Shape(format!("x has length {}, kappa is {}", x.len(), lambda.kappa())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("x must be finite".into()));
    }
    Ok(())
}

/// Bound on `|σᵀΛσ| / ‖σ‖²`: the larger of the max-entry norm and the spectral
/// norm of the quadratic-form matrix, so the radius below is valid for all `κ`.
fn quad_bound(lambda: &LagrangeMultiplier) -> f64 {
    let e = lambda.quadratic_form_matrix().eigen();
    let spec = e.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    spec.max(lambda.max_abs())
}

/// `max((2‖λ‖/t)^{1/(p−2)}, (2‖x‖/t)^{1/(p−1)})`: every maximizer of `g` lies
/// in this ball.
pub fn argmax_radius(lambda: &LagrangeMultiplier, p: f64, t: f64, x: &[f64]) -> f64 {
    let a = (2.0 * quad_bound(lambda) / t).powf(1.0 / (p - 2.0));
    let b = (2.0 * norm(x) / t).powf(1.0 / (p - 1.0));
    a.max(b)
}

impl SingleSite<'_> {
    fn value(&self, s: &[f64]) -> f64 {
        let lin: f64 = s.iter().zip(self.x).map(|(a, b)| a * b).sum();
        lin + self.lambda.quad_form(s) - self.t * norm(s).powf(self.p)
    }

    fn grad(&self, s: &[f64]) -> Vec<f64> {
        let k = s.len();
        let r = norm(s);
        let c = if r > 0.0 { self.t * self.p * r.powf(self.p - 2.0) } else { 0.0 };
        (0..k)
            .map(|a| {
                let quad: f64 = (0..k).map(|b| if a == b { 2.0 * self.lambda.get(a, a) * s[a] } else { self.lambda.get(a, b) * s[b] }).sum();
                self.x[a] + quad - c * s[a]
            })
            .collect()
    }

    fn hessian(&self, s: &[f64]) -> Vec<f64> {
        let k = s.len();
        let r = norm(s);
        let (c, d) = if r > 0.0 {
            let rp = r.powf(self.p - 2.0);
            (self.t * self.p * rp, self.t * self.p * (self.p - 2.0) * rp / (r * r))
        } else {
            (0.0, 0.0)
        };
        let mut h = vec![0.0; k * k];
        for a in 0..k {
            for b in 0..k {
                let lam = if a == b { 2.0 * self.lambda.get(a, a) } else { self.lambda.get(a, b) };
                h[a * k + b] = lam - d * s[a] * s[b] - if a == b { c } else { 0.0 };
            }
        }
        h
    }

    /// Newton step `−H⁻¹∇g` if `−H` is positive definite.
    fn newton_direction(&self, s: &[f64], grad: &[f64]) -> Option<Vec<f64>> {
        let k = s.len();
        let neg: Vec<f64> = self.hessian(s).iter().map(|v| -v).collect();
        let l = cholesky(&neg, k)?;
        Some(cholesky_solve(&l, k, grad))
    }

    fn ascend(&self, s0: Vec<f64>, lip: f64) -> (f64, Vec<f64>) {
        let k = s0.len();
        let mut s = s0;
        let mut f = self.value(&s);
        let gtol = 1e-12 * (1.0 + norm(self.x));
        for _ in 0..5000 {
            let g = self.grad(&s);
            let gn = norm(&g);
            if gn <= gtol {
                break;
            }
            let (d, mut eta) = match self.newton_direction(&s, &g) {
                Some(d) => (d, 1.0),
                None => (g.clone(), 1.0 / lip),
            };
            let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
            if !(slope > 0.0) {
                break;
            }
            let mut moved = false;
            for _ in 0..60 {
                let cand: Vec<f64> = (0..k).map(|i| s[i] + eta * d[i]).collect();
                let fc = self.value(&cand);
                if fc >= f + 1e-4 * eta * slope {
                    moved = fc > f || cand != s;
                    s = cand;
                    f = fc;
                    break;
                }
                eta *= 0.5;
            }
            if !moved {
                break;
            }
        }
        (f, s)
    }
}

fn cholesky(a: &[f64], k: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut sum = a[i * k + j];
            for m in 0..j {
                sum -= l[i * k + m] * l[j * k + m];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l[i * k + i] = sum.sqrt();
            } else {
                l[i * k + j] = sum / l[j * k + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], k: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; k];
    for i in 0..k {
        y[i] = (b[i] - (0..i).map(|m| l[i * k + m] * y[m]).sum::<f64>()) / l[i * k + i];
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        x[i] = (y[i] - (i + 1..k).map(|m| l[m * k + i] * x[m]).sum::<f64>()) / l[i * k + i];
    }
    x
}

/// Maximizer of `s ↦ a s + λ s² − t s^p` over `s ≥ 0`, with `a ≥ 0`.
///
/// The derivative is concave on `s > 0` and non-negative at 0, so it has a
/// single zero; Newton from the right of it converges monotonically.
fn half_line_max(a: f64, lam: f64, p: f64, t: f64) -> f64 {
    if a == 0.0 && lam <= 0.0 {
        return 0.0;
    }
    if a == 0.0 {
        return (2.0 * lam / (t * p)).powf(1.0 / (p - 2.0));
    }
    let dphi = |s: f64| a + 2.0 * lam * s - t * p * s.powf(p - 1.0);
    let d2phi = |s: f64| 2.0 * lam - t * p * (p - 1.0) * s.powf(p - 2.0);
    let mut hi = ((2.0 * lam.abs() / t).powf(1.0 / (p - 2.0))).max((2.0 * a / t).powf(1.0 / (p - 1.0)));
    while dphi(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    let mut s = hi;
    for _ in 0..200 {
        let f = dphi(s);
        if f > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let d = d2phi(s);
        let mut next = if d < 0.0 { s - f / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - s).abs() <= 1e-15 * s.abs().max(1e-300) {
            return next;
        }
        s = next;
    }
    s
}

/// `f^∞(x) = sup_σ g(σ)` with its maximizer.
pub fn terminal_inf(lambda: &LagrangeMultiplier, p: f64, t: f64, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_params(lambda, p, t, x)?;
    let k = x.len();
    if k == 1 {
        let lam = lambda.get(0, 0);
        let s = half_line_max(x[0].abs(), lam, p, t);
        let sigma = if x[0] < 0.0 { -s } else { s };
        let v = x[0].abs() * s + lam * s * s - t * s.powf(p);
        return Ok((v.max(0.0), vec![if v > 0.0 { sigma } else { 0.0 }]));
    }
    let site = SingleSite { lambda, p, t, x };
    let radius = argmax_radius(lambda, p, t, x);
    let lip = 2.0 * quad_bound(lambda) * (k as f64) + t * p * (p - 1.0) * radius.max(1e-12).powf(p - 2.0) + 1e-12;
    let mut best = (0.0, vec![0.0; k]);
    let mut try_seed = |s0: Vec<f64>| {
        let (v, s) = site.ascend(s0, lip);
        if v > best.0 {
            best = (v, s);
        }
    };
    try_seed(vec![0.0; k]);
    let xn = norm(x);
    if xn > 0.0 {
        try_seed(x.iter().map(|v| 0.5 * radius * v / xn).collect());
    }
    for code in 1..3usize.pow(k as u32) {
        let mut c = code;
        let dir: Vec<f64> = (0..k)
            .map(|_| {
                let d = (c % 3) as f64 - 1.0;
                c /= 3;
                d
            })
            .collect();
        let dn = norm(&dir);
        if dn > 0.0 {
            try_seed(dir.iter().map(|v| 0.5 * radius * v / dn).collect());
        }
    }
    Ok(best)
}

/// Number of `β·(log-integrand)` units below the peak at which tails are cut.
const TAIL_CUT: f64 = 45.0;

/// Result of a positive-temperature terminal evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaTerminal {
    pub value: f64,
    /// Estimated relative error of the integral.
    pub rel_error: f64,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("beta must be positive and finite, got {beta}")));
    }
    Ok(())
}

/// Radius beyond which `β(g − g*) ≤ −TAIL_CUT` and `g` decreases radially.
fn integration_radius(lambda: &LagrangeMultiplier, beta: f64, p: f64, t: f64, x: &[f64], gstar: f64) -> f64 {
    let xn = norm(x);
    let q = quad_bound(lambda);
    let upper = |r: f64| xn * r + q * r * r - t * r.powf(p);
    let dupper = |r: f64| xn + 2.0 * q * r - t * p * r.powf(p - 1.0);
    let mut r = argmax_radius(lambda, p, t, x).max((1.0 / (beta * t)).powf(1.0 / p)).max(1e-8);
    while !(beta * (upper(r) - gstar) <= -TAIL_CUT && dupper(r) < 0.0) {
        r *= 1.25;
    }
    r
}

/// Scalar `f^β(x)` and the Gibbs mean of `σ` (its derivative in `x`).
pub fn terminal_beta_scalar(lam: f64, beta: f64, p: f64, t: f64, x: f64, with_mean: bool) -> Result<(BetaTerminal, Option<f64>)> {
    let lambda = LagrangeMultiplier::scalar(lam)?;
    check_params(&lambda, p, t, &[x])?;
    check_beta(beta)?;
    let sp = half_line_max(x.abs(), lam, p, t);
    let phi = |s: f64| x * s + lam * s * s - t * s.abs().powf(p);
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let mut peaks = vec![sign * sp];
    if let Some(o) = opposite_branch_max(x.abs(), lam, p, t) {
        peaks.push(-sign * o);
    }
    let gstar = peaks.iter().map(|&s| phi(s)).fold(0.0f64, f64::max);
    let r = integration_radius(&lambda, beta, p, t, &[x], gstar);
    let mut breaks = vec![-r, 0.0, r];
    for &c in &peaks {
        let curv = (t * p * (p - 1.0) * c.abs().powf(p - 2.0) - 2.0 * lam).abs().max(1e-300);
        let w = 1.0 / (beta * curv).sqrt();
        for m in [-10.0, -3.0, 0.0, 3.0, 10.0] {
            breaks.push(c + m * w);
        }
    }
    breaks.retain(|b| b.abs() <= r);
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    // Exponent relative to the nearest peak `c`, written as a difference that
    // avoids cancelling two large values of `φ` near the peak.
    let offsets: Vec<f64> = peaks.iter().map(|&c| phi(c) - gstar).collect();
    let slopes: Vec<f64> = peaks.iter().map(|&c| x + 2.0 * lam * c - t * p * c.abs().powf(p - 1.0) * c.signum()).collect();
    let excess = |s: f64| {
        let (k, c) = peaks
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| (a.1 - s).abs().total_cmp(&(b.1 - s).abs()))
            .expect("at least one peak");
        if c == 0.0 || s.signum() != c.signum() || s == 0.0 {
            return phi(s) - gstar;
        }
        let u = s - c;
        let v = (s.abs() - c.abs()) / c.abs();
        slopes[k] * u + lam * u * u - t * c.abs().powf(p) * pow_excess(v, p) + offsets[k]
    };
    let integrand = |s: f64| (beta * excess(s)).exp();
    let (i0, err) = integrate_adaptive(integrand, &breaks, 1e-12, 0.0, 20_000)?;
    let rel_error = err / i0;
    if !(i0 > 0.0) || !(rel_error <= 1e-8) {
        return Err(Error::Numeric(format!(
            "terminal integral not certified: x={x}, beta={beta}, value {i0:e}, relative error {rel_error:e}, {} breakpoints on [-{r}, {r}]",
            breaks.len()
        )));
    }
    let mean = if with_mean {
        let (i1, _) = integrate_adaptive(|s: f64| s * integrand(s), &breaks, 1e-12, 1e-13 * i0 * r, 20_000)?;
        Some(i1 / i0)
    } else {
        None
    };
    Ok((BetaTerminal { value: gstar + i0.ln() / beta, rel_error }, mean))
}

/// `(1 + v)^p − 1 − p v` for `v > −1`, by series when `|v|` is small.
fn pow_excess(v: f64, p: f64) -> f64 {
    if v.abs() > 1e-2 {
        return (p * v.ln_1p()).exp_m1() - p * v;
    }
    let mut term = p * v;
    let mut sum = 0.0;
    for k in 2..40 {
        term *= (p - (k - 1) as f64) * v / k as f64;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Maximizer of `−a s + λ s² − t s^p` over `s > 0`, if an interior local
/// maximum exists.
fn opposite_branch_max(a: f64, lam: f64, p: f64, t: f64) -> Option<f64> {
    if lam <= 0.0 {
        return None;
    }
    // φ'(s) = −a + 2λs − tps^{p−1} is concave with maximum at s0.
    let s0 = (2.0 * lam / (t * p * (p - 1.0))).powf(1.0 / (p - 2.0));
    let dphi = |s: f64| -a + 2.0 * lam * s - t * p * s.powf(p - 1.0);
    if dphi(s0) <= 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (s0, s0.max(1e-300));
    while dphi(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if dphi(m) > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// `f^β(x) = (1/β) log ∫ exp(β g(σ)) dσ`.
///
/// `κ = 1` uses certified adaptive quadrature. For `κ ≥ 2`, grid mode nests
/// adaptive quadrature over a box centred on the zero-temperature maximizer
/// and Monte Carlo mode uses Gaussian importance sampling around it.
pub fn terminal_beta(lambda: &LagrangeMultiplier, beta: f64, p: f64, t: f64, x: &[f64], quad: &QuadratureSpec) -> Result<f64> {
    terminal_beta_detail(lambda, beta, p, t, x, quad).map(|b| b.value)
}

pub fn terminal_beta_detail(
    lambda: &LagrangeMultiplier,
    beta: f64,
    p: f64,
    t: f64,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<BetaTerminal> {
    check_params(lambda, p, t, x)?;
    check_beta(beta)?;
    quad.validate()?;
    if x.len() == 1 {
        return terminal_beta_scalar(lambda.get(0, 0), beta, p, t, x[0], false).map(|r| r.0);
    }
    let (gstar, center) = terminal_inf(lambda, p, t, x)?;
    let site = SingleSite { lambda, p, t, x };
    match quad.mode {
        QuadMode::Grid => {
            let r = integration_radius(lambda, beta, p, t, x, gstar);
            let mut point = vec![0.0; x.len()];
            let (i0, err) = nested_integral(&site, beta, gstar, r, &center, 0, &mut point)?;
            let rel_error = err / i0;
            if !(i0 > 0.0) || !(rel_error <= 1e-8) {
                return Err(Error::Numeric(format!(
                    "nested terminal integral not certified: x={x:?}, beta={beta}, value {i0:e}, relative error {rel_error:e}, box radius {r}"
                )));
            }
            Ok(BetaTerminal { value: gstar + i0.ln() / beta, rel_error })
        }
        QuadMode::MonteCarlo => importance_sample(&site, beta, gstar, &center, quad),
    }
}

fn nested_integral(
    site: &SingleSite,
    beta: f64,
    gstar: f64,
    r: f64,
    center: &[f64],
    dim: usize,
    point: &mut Vec<f64>,
) -> Result<(f64, f64)> {
    let k = center.len();
    let mut breaks = vec![-r, 0.0, r, center[dim]];
    let w = 1.0 / (beta * site.t * site.p * (site.p - 1.0) * norm(center).max(1e-3).powf(site.p - 2.0)).sqrt();
    for m in [-10.0, -3.0, 3.0, 10.0] {
        breaks.push(center[dim] + m * w);
    }
    breaks.retain(|b| b.abs() <= r);
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    let mut failure = None;
    let mut inner_err = 0.0;
    let out = integrate_adaptive(
        |s: f64| {
            point[dim] = s;
            if dim + 1 == k {
                (beta * (site.value(point) - gstar)).exp()
            } else {
                match nested_integral(site, beta, gstar, r, center, dim + 1, &mut point.clone()) {
                    Ok((v, e)) => {
                        inner_err = f64::max(inner_err, e / v.max(1e-300));
                        v
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                }
            }
        },
        &breaks,
        if dim == 0 { 1e-11 } else { 1e-12 },
        0.0,
        4000,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let (v, e) = out?;
    Ok((v, e + inner_err * v))
}

fn importance_sample(site: &SingleSite, beta: f64, gstar: f64, center: &[f64], quad: &QuadratureSpec) -> Result<BetaTerminal> {
    let k = center.len();
    // Proposal covariance: twice the inverse curvature at the maximizer.
    let neg: Vec<f64> = site.hessian(center).iter().map(|v| -beta * v * 0.5).collect();
    let chol_prec = cholesky(&neg, k);
    let iso = {
        let r = argmax_radius(site.lambda, site.p, site.t, site.x).max(1.0);
        r / 4.0
    };
    let mut rng = stream(quad.seed, Purpose::Quadrature, 0);
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    let n = quad.samples;
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    for _ in 0..n {
        let w: Vec<f64> = (0..k).map(|_| truncated_normal(&mut rng, quad.truncation_sd)).collect();
        let (s, log_q) = match &chol_prec {
            Some(l) => {
                // σ = c + L⁻ᵀ w for precision L Lᵀ.
                let mut y = vec![0.0; k];
                for i in (0..k).rev() {
                    y[i] = (w[i] - (i + 1..k).map(|m| l[m * k + i] * y[m]).sum::<f64>()) / l[i * k + i];
                }
                let logdet: f64 = (0..k).map(|i| l[i * k + i].ln()).sum();
                let s: Vec<f64> = (0..k).map(|i| center[i] + y[i]).collect();
                (s, logdet - 0.5 * (k as f64) * ln2pi - 0.5 * w.iter().map(|v| v * v).sum::<f64>())
            }
            None => {
                let s: Vec<f64> = (0..k).map(|i| center[i] + iso * w[i]).collect();
                (s, -(k as f64) * iso.ln() - 0.5 * (k as f64) * ln2pi - 0.5 * w.iter().map(|v| v * v).sum::<f64>())
            }
        };
        let ratio = (beta * (site.value(&s) - gstar) - log_q).exp();
        sum += ratio;
        sum2 += ratio * ratio;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum2 / nf - mean * mean).max(0.0);
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::Numeric("importance sampling produced a non-positive estimate".into()));
    }
    Ok(BetaTerminal { value: gstar + mean.ln() / beta, rel_error: (var / nf).sqrt() / mean })
}

pub(crate) fn truncated_normal<R: Rng>(rng: &mut R, cut: f64) -> f64 {
    loop {
        let w: f64 = rng.sample(StandardNormal);
        if w.abs() <= cut {
            return w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::ln_gamma;

    fn lam1(v: f64) -> LagrangeMultiplier {
        LagrangeMultiplier::scalar(v).unwrap()
    }

    /// Dense grid search on `[−R, R]` followed by golden-section refinement.
    fn grid_sup(lam: f64, p: f64, t: f64, x: f64) -> f64 {
        let g = |s: f64| x * s + lam * s * s - t * s.abs().powf(p);
        let r = 20.0;
        let n = 400_000;
        let (mut best, mut arg) = (f64::NEG_INFINITY, 0.0);
        for i in 0..=n {
            let s = -r + 2.0 * r * i as f64 / n as f64;
            if g(s) > best {
                best = g(s);
                arg = s;
            }
        }
        let h = 2.0 * r / n as f64;
        let (mut a, mut b) = (arg - h, arg + h);
        for _ in 0..200 {
            let m1 = a + (b - a) * 0.381_966;
            let m2 = b - (b - a) * 0.381_966;
            if g(m1) < g(m2) {
                a = m1;
            } else {
                b = m2;
            }
        }
        g(0.5 * (a + b))
    }

    #[test]
    fn trivial_and_closed_form() {
        let (v, s) = terminal_inf(&lam1(0.0), 3.0, 1.0, &[0.0]).unwrap();
        assert_eq!((v, s[0]), (0.0, 0.0));
        let (v, s) = terminal_inf(&lam1(0.0), 3.0, 1.0, &[3.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-13);
        assert!((s[0] - 1.0).abs() < 1e-13);
        assert!((argmax_radius(&lam1(0.0), 3.0, 1.0, &[3.0]) - 6f64.sqrt()).abs() < 1e-14);
        let (v, s) = terminal_inf(&lam1(0.0), 3.0, 1.0, &[-3.0]).unwrap();
        assert!((v - 2.0).abs() < 1e-13 && (s[0] + 1.0).abs() < 1e-13);
        assert!(terminal_inf(&lam1(0.0), 3.0, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn scalar_matches_grid_oracle() {
        for &(lam, p, t, x) in &[(0.5, 3.0, 1.0, 0.7), (-0.5, 3.0, 1.0, 2.0), (0.5, 2.5, 0.8, -1.3), (1.0, 4.0, 2.0, 0.0), (0.3, 3.0, 1.0, -0.05)] {
            let (v, s) = terminal_inf(&lam1(lam), p, t, &[x]).unwrap();
            let oracle = grid_sup(lam, p, t, x);
            assert!((v - oracle).abs() < 1e-10, "{lam} {p} {t} {x}: {v} vs {oracle}");
            assert!(s[0].abs() <= argmax_radius(&lam1(lam), p, t, &[x]) + 1e-6);
        }
    }

    #[test]
    fn vector_case_reduces_to_scalar() {
        // Diagonal λ and x along the first axis: the scalar problem in that axis
        // competes with the second axis when λ_22 > 0.
        let l = LagrangeMultiplier::new(2, vec![0.3, 0.0, -0.2]).unwrap();
        let (v, s) = terminal_inf(&l, 3.0, 1.0, &[1.2, 0.0]).unwrap();
        let (v1, s1) = terminal_inf(&lam1(0.3), 3.0, 1.0, &[1.2]).unwrap();
        assert!((v - v1).abs() < 1e-10);
        assert!((s[0] - s1[0]).abs() < 1e-6 && s[1].abs() < 1e-6);
        // Rotational symmetry for λ = 0.
        let z = LagrangeMultiplier::zeros(3);
        let (v, _) = terminal_inf(&z, 3.0, 1.0, &[1.0, 2.0, 2.0]).unwrap();
        let (v1, _) = terminal_inf(&lam1(0.0), 3.0, 1.0, &[3.0]).unwrap();
        assert!((v - v1).abs() < 1e-10);
    }

    #[test]
    fn indefinite_multiplier_picks_global_max() {
        let l = LagrangeMultiplier::new(2, vec![-1.0, 0.0, 0.8]).unwrap();
        let (v, s) = terminal_inf(&l, 3.0, 1.0, &[0.1, 0.0]).unwrap();
        // Oracle: brute-force 2-D grid.
        let site = SingleSite { lambda: &l, p: 3.0, t: 1.0, x: &[0.1, 0.0] };
        let mut best = 0.0f64;
        for i in -400..=400 {
            for j in -400..=400 {
                best = best.max(site.value(&[i as f64 * 0.005, j as f64 * 0.005]));
            }
        }
        assert!(v >= best - 1e-12 && v - best < 1e-4);
        assert!(s[1].abs() > 0.1);
    }

    #[test]
    fn beta_closed_form_at_origin() {
        for &(beta, p, t) in &[(1.0, 3.0, 1.0), (10.0, 3.0, 1.0), (1000.0, 4.0, 0.5), (0.1, 2.5, 2.0)] {
            let v = terminal_beta(&lam1(0.0), beta, p, t, &[0.0], &QuadratureSpec::default_for(1)).unwrap();
            let oracle = ((2.0f64).ln() + ln_gamma(1.0 + 1.0 / p) - (beta * t).ln() / p) / beta;
            assert!((v - oracle).abs() < 1e-10 * (1.0 + oracle.abs()), "{beta} {p} {t}: {v} vs {oracle}");
        }
    }

    #[test]
    fn beta_approaches_zero_temperature() {
        for &x in &[0.0, 1.0, 3.0] {
            let (finf, _) = terminal_inf(&lam1(0.5), 3.0, 1.0, &[x]).unwrap();
            let fb = terminal_beta(&lam1(0.5), 1000.0, 3.0, 1.0, &[x], &QuadratureSpec::default_for(1)).unwrap();
            assert!((fb - finf).abs() <= 3.0 * (1000f64).ln() / 1000.0 + 1.0);
            assert!((fb - finf).abs() < 0.02);
        }
    }

    #[test]
    fn gibbs_mean_is_derivative() {
        let (lam, beta, p, t, x) = (0.4, 5.0, 3.0, 1.0, 0.8);
        let (_, m) = terminal_beta_scalar(lam, beta, p, t, x, true).unwrap();
        let h = 1e-5;
        let fp = terminal_beta_scalar(lam, beta, p, t, x + h, false).unwrap().0.value;
        let fm = terminal_beta_scalar(lam, beta, p, t, x - h, false).unwrap().0.value;
        assert!((m.unwrap() - (fp - fm) / (2.0 * h)).abs() < 1e-7);
    }

    #[test]
    fn two_dimensional_grid_matches_product() {
        // λ diagonal and p-norm coupling make the integral non-separable; with
        // λ = 0 and x = 0 the radial integral has a closed form.
        let beta = 2.0;
        let (p, t) = (3.0, 1.0);
        let v = terminal_beta(&LagrangeMultiplier::zeros(2), beta, p, t, &[0.0, 0.0], &QuadratureSpec::default_for(2)).unwrap();
        // ∫_{R²} e^{−βt‖σ‖^p} = 2π Γ(2/p) / (p (βt)^{2/p})
        let oracle = ((2.0 * std::f64::consts::PI).ln() + ln_gamma(2.0 / p) - p.ln() - 2.0 / p * (beta * t).ln()) / beta;
        assert!((v - oracle).abs() < 1e-8, "{v} vs {oracle}");
        let mc = terminal_beta(&LagrangeMultiplier::zeros(2), beta, p, t, &[0.0, 0.0], &QuadratureSpec::monte_carlo(200_000, 1)).unwrap();
        assert!((mc - oracle).abs() < 2e-2, "{mc} vs {oracle}");
    }
}
