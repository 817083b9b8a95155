use super::{best_run, dot, norm2, GroundStateResult, RunOutcome, SolverConfig};
use crate::error::{Error, Result};
use crate::model::{Coupling, Disorder, SpinConfig};
use crate::rng::{stream, Purpose};
use rayon::prelude::*;

/// Maximize `a·H°(σ)` subject to `b·‖σ‖_{p,2} = 1`.
struct SphereProblem<'a> {
    coupling: &'a Coupling,
    kappa: usize,
    p: f64,
    a: f64,
    b: f64,
}

impl SphereProblem<'_> {
    fn pnorm(&self, x: &[f64]) -> f64 {
        super::row_pow_sum(x, self.kappa, self.p).powf(1.0 / self.p)
    }

    /// `‖s + ηd‖_{p,2}` without materializing the sum.
    fn pnorm_shifted(&self, s: &[f64], d: &[f64], eta: f64) -> f64 {
        let k = self.kappa;
        let mut acc = 0.0;
        for (sr, dr) in s.chunks_exact(k).zip(d.chunks_exact(k)) {
            let r2: f64 = sr.iter().zip(dr).map(|(x, y)| (x + eta * y) * (x + eta * y)).sum();
            if r2 > 0.0 {
                acc += r2.powf(0.5 * self.p);
            }
        }
        acc.powf(1.0 / self.p)
    }

    fn ascend(&self, mut s: Vec<f64>, cfg: &SolverConfig) -> RunOutcome {
        let (k, p, a, b) = (self.kappa, self.p, self.a, self.b);
        let len = s.len();
        let nrm0 = self.pnorm(&s);
        if !(nrm0 > 0.0) {
            s.iter_mut().for_each(|x| *x = 1.0);
        }
        let c = 1.0 / (b * self.pnorm(&s));
        s.iter_mut().for_each(|x| *x *= c);

        let mut ms = vec![0.0; len];
        let mut md = vec![0.0; len];
        let mut d = vec![0.0; len];
        self.coupling.apply(&s, k, &mut ms);
        let mut eta_prev: Option<f64> = None;
        let mut converged = false;
        let mut iterations = 0;
        for it in 0..cfg.max_iter {
            iterations = it;
            if it > 0 && it % 25 == 0 {
                self.coupling.apply(&s, k, &mut ms);
            }
            let h = 0.5 * dot(&s, &ms);
            let nrm = self.pnorm(&s);
            let bn = b * nrm;
            let f = a * h / (bn * bn);
            // ∇F = a·Mσ/(b‖σ‖)² − 2aH°·b·∇‖σ‖/(b‖σ‖)³
            let c_lin = a / (bn * bn);
            let c_nrm = 2.0 * a * h * b / (bn * bn * bn) * nrm.powf(1.0 - p);
            for ((dr, sr), mr) in d.chunks_exact_mut(k).zip(s.chunks_exact(k)).zip(ms.chunks_exact(k)) {
                let r2 = dot(sr, sr);
                let w = if r2 > 0.0 { r2.powf(0.5 * (p - 2.0)) } else { 0.0 };
                for j in 0..k {
                    dr[j] = c_lin * mr[j] - c_nrm * w * sr[j];
                }
            }
            let gnorm = norm2(&d);
            let snorm = norm2(&s);
            let scale = f.abs().max(1e-300);
            if gnorm * snorm <= cfg.grad_tol * scale {
                converged = true;
                break;
            }
            self.coupling.apply(&d, k, &mut md);
            let lin = dot(&d, &ms);
            let quad = 0.5 * dot(&d, &md);
            let mut eta = eta_prev.map(|e| 2.0 * e).unwrap_or(cfg.step0 * snorm / gnorm);
            let g2 = gnorm * gnorm;
            let mut accepted = None;
            for _ in 0..=cfg.max_halvings {
                let hx = h + eta * lin + eta * eta * quad;
                let nx = self.pnorm_shifted(&s, &d, eta);
                let fx = a * hx / (b * nx * b * nx);
                if fx.is_finite() && fx >= f + 1e-4 * eta * g2 {
                    accepted = Some(nx);
                    break;
                }
                eta *= 0.5;
            }
            let Some(nx) = accepted else {
                converged = gnorm * snorm <= cfg.grad_tol.sqrt() * scale;
                break;
            };
            let c = 1.0 / (b * nx);
            for i in 0..len {
                s[i] = (s[i] + eta * d[i]) * c;
                ms[i] = (ms[i] + eta * md[i]) * c;
            }
            eta_prev = Some(eta);
        }
        self.coupling.apply(&s, k, &mut ms);
        let nrm = self.pnorm(&s);
        let value = a * 0.5 * dot(&s, &ms) / (b * nrm * b * nrm);
        RunOutcome { value, sigma: s, iterations, converged }
    }
}

/// Star-shaped starting points for `1 < p < 2`: one heavy center and leaves
/// aligned with the center's couplings, weighted by `|h_j|^{p*−1}`. Centers
/// are ranked by `Σ_j |h_j|^{p*}`.
fn star_seeds(coupling: &Coupling, kappa: usize, p: f64, count: usize) -> Vec<Vec<f64>> {
    let n = coupling.n();
    let q = p / (p - 1.0);
    let m = coupling.entries();
    let mut scores: Vec<(f64, usize)> = (0..n)
        .map(|c| {
            let s: f64 = (0..n).filter(|&j| j != c).map(|j| m[c * n + j].abs().powf(q)).sum();
            (s, c)
        })
        .collect();
    scores.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    scores
        .into_iter()
        .take(count)
        .filter(|(s, _)| *s > 0.0)
        .map(|(s, c)| {
            let a = 0.5f64.powf(1.0 / p);
            let bl = (0.5 / s).powf(1.0 / p);
            let mut x = vec![0.0; n * kappa];
            for j in 0..n {
                let h = m[c * n + j];
                x[j * kappa] = if j == c { a } else { bl * h.signum() * h.abs().powf(q - 1.0) };
            }
            x
        })
        .collect()
}

fn starts(coupling: &Coupling, kappa: usize, p: f64, cfg: &SolverConfig) -> Vec<Vec<f64>> {
    let n = coupling.n();
    let mut out = Vec::with_capacity(cfg.restarts);
    if cfg.structured_seeds && p > 1.0 && p < 2.0 && n > 1 {
        out.extend(star_seeds(coupling, kappa, p, cfg.restarts.min(4)));
    }
    let mut r = 0u64;
    while out.len() < cfg.restarts {
        let mut rng = stream(cfg.seed, Purpose::Restart, r);
        out.push(SpinConfig::gaussian(n, kappa, &mut rng).into_data());
        r += 1;
    }
    out
}

fn sphere_run(g: &Disorder, p: f64, kappa: usize, cfg: &SolverConfig, a: f64, b: f64) -> Result<GroundStateResult> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("p must be at least 1, got {p}")));
    }
    if kappa == 0 {
        return Err(Error::Input("kappa must be positive".into()));
    }
    cfg.validate()?;
    let coupling = g.coupling();
    let prob = SphereProblem { coupling: &coupling, kappa, p, a, b };
    let runs: Vec<RunOutcome> = starts(&coupling, kappa, p, cfg)
        .into_par_iter()
        .map(|s0| prob.ascend(s0, cfg))
        .collect();
    let restarts_used = runs.len();
    let (_, best) = best_run(runs);
    Ok(GroundStateResult {
        value: best.value,
        config: SpinConfig::new(g.n(), kappa, best.sigma)?,
        iterations: best.iterations,
        restarts_used,
        converged: best.converged,
    })
}

/// Best local maximum of `H°_N(σ) = Σ g_ij (σ_i, σ_j)` on the unit
/// `ℓ^{p,2}` sphere.
pub fn maximize_sphere(g: &Disorder, p: f64, kappa: usize, cfg: &SolverConfig) -> Result<GroundStateResult> {
    sphere_run(g, p, kappa, cfg, 1.0, 1.0)
}

fn check_super(p: f64) -> Result<()> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(Error::Domain(format!("p must exceed 2, got {p}")));
    }
    Ok(())
}

/// Ground-state energy `N^{2/p−3/2}·GP_{N,p}`.
pub fn gse(g: &Disorder, p: f64, kappa: usize, cfg: &SolverConfig) -> Result<f64> {
    check_super(p)?;
    let n = g.n() as f64;
    Ok(n.powf(2.0 / p - 1.5) * maximize_sphere(g, p, kappa, cfg)?.value)
}

/// Ground-state energy computed directly as `(1/N)·max H_N` over the
/// normalized sphere `⦀σ⦀_{p,2} = 1`.
pub fn gse_normalized(g: &Disorder, p: f64, kappa: usize, cfg: &SolverConfig) -> Result<GroundStateResult> {
    check_super(p)?;
    let n = g.n() as f64;
    sphere_run(g, p, kappa, cfg, n.powf(-1.5), n.powf(-1.0 / p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualityReport {
    pub scalar: f64,
    pub vector: f64,
    pub gap: f64,
    pub relative_gap: f64,
}

/// Compares the scalar (`κ = 1`) and vector sphere maxima of `Σ a_ij (σ_i, σ_j)`.
pub fn scalar_vector_equality_check(a: &Disorder, p: f64, kappa: usize, cfg: &SolverConfig) -> Result<EqualityReport> {
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::Domain(format!("equality holds for 1 <= p <= 2, got {p}")));
    }
    let scalar = maximize_sphere(a, p, 1, cfg)?.value;
    let vector = if kappa == 1 { scalar } else { maximize_sphere(a, p, kappa, cfg)?.value };
    let gap = vector - scalar;
    Ok(EqualityReport { scalar, vector, gap, relative_gap: gap.abs() / scalar.abs().max(1e-300) })
}
