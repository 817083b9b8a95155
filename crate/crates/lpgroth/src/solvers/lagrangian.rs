use super::{best_run, dot, norm2, row_pow_sum, GroundStateResult, RunOutcome, SolverConfig};
use crate::asymptotics::gse_transform;
use crate::error::{Error, Result};
use crate::model::{opnorm_scaled, Coupling, Disorder, SpinConfig};
use crate::rng::{stream, Purpose};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Maximize `a·H_N(σ) − b·‖σ‖_{p,2}^p`, optionally over `‖σ‖₂² ≤ radius2`.
struct PenaltyProblem<'a> {
    coupling: &'a Coupling,
    kappa: usize,
    p: f64,
    a: f64,
    b: f64,
    radius2: Option<f64>,
}

impl PenaltyProblem<'_> {
    fn inv_sqrt_n(&self) -> f64 {
        1.0 / (self.coupling.n() as f64).sqrt()
    }

    fn value(&self, s: &[f64], ms: &[f64]) -> f64 {
        self.a * 0.5 * dot(s, ms) * self.inv_sqrt_n() - self.b * row_pow_sum(s, self.kappa, self.p)
    }

    /// Exact maximization along the ray through `s`.
    fn radial(&self, s: &mut [f64], ms: &mut [f64]) {
        let hn = self.a * 0.5 * dot(s, ms) * self.inv_sqrt_n();
        let pen = self.b * row_pow_sum(s, self.kappa, self.p);
        if !(hn > 0.0) || !(pen > 0.0) {
            return;
        }
        let mut c = (2.0 * hn / (self.p * pen)).powf(1.0 / (self.p - 2.0));
        if let Some(r2) = self.radius2 {
            c = c.min((r2 / dot(s, s)).sqrt());
        }
        if c.is_finite() && c > 0.0 {
            s.iter_mut().for_each(|x| *x *= c);
            ms.iter_mut().for_each(|x| *x *= c);
        }
    }

    fn project_factor(&self, norm2_sq: f64) -> f64 {
        match self.radius2 {
            Some(r2) if norm2_sq > r2 => (r2 / norm2_sq).sqrt(),
            _ => 1.0,
        }
    }

    fn ascend(&self, mut s: Vec<f64>, cfg: &SolverConfig) -> RunOutcome {
        let (k, p) = (self.kappa, self.p);
        let len = s.len();
        let isn = self.inv_sqrt_n();
        let c0 = self.project_factor(dot(&s, &s));
        s.iter_mut().for_each(|x| *x *= c0);
        let mut ms = vec![0.0; len];
        let mut md = vec![0.0; len];
        let mut d = vec![0.0; len];
        self.coupling.apply(&s, k, &mut ms);
        self.radial(&mut s, &mut ms);
        let mut eta_prev: Option<f64> = None;
        let mut converged = false;
        let mut iterations = 0;
        for it in 0..cfg.max_iter {
            iterations = it;
            if it > 0 && it % 25 == 0 {
                self.coupling.apply(&s, k, &mut ms);
            }
            let snorm = norm2(&s);
            if snorm == 0.0 {
                converged = true;
                break;
            }
            let h = 0.5 * dot(&s, &ms);
            let f = self.a * h * isn - self.b * row_pow_sum(&s, k, p);
            for ((dr, sr), mr) in d.chunks_exact_mut(k).zip(s.chunks_exact(k)).zip(ms.chunks_exact(k)) {
                let r2 = dot(sr, sr);
                let w = if r2 > 0.0 { self.b * p * r2.powf(0.5 * (p - 2.0)) } else { 0.0 };
                for j in 0..k {
                    dr[j] = self.a * isn * mr[j] - w * sr[j];
                }
            }
            let ds = dot(&d, &s);
            let gnorm = norm2(&d);
            let on_boundary = self.radius2.is_some_and(|r2| snorm * snorm >= r2 * (1.0 - 1e-12));
            let tangential = if on_boundary && ds > 0.0 {
                (gnorm * gnorm - ds * ds / (snorm * snorm)).max(0.0).sqrt()
            } else {
                gnorm
            };
            let scale = f.abs().max(1e-300);
            if tangential * snorm <= cfg.grad_tol * scale {
                converged = true;
                break;
            }
            self.coupling.apply(&d, k, &mut md);
            let lin = dot(&d, &ms);
            let quad = 0.5 * dot(&d, &md);
            let g2 = gnorm * gnorm;
            let mut eta = eta_prev.map(|e| 2.0 * e).unwrap_or(cfg.step0 * snorm / gnorm);
            let mut accepted = None;
            for _ in 0..=cfg.max_halvings {
                let n2 = snorm * snorm + 2.0 * eta * ds + eta * eta * g2;
                let c = self.project_factor(n2);
                let hx = c * c * (h + eta * lin + eta * eta * quad);
                let mut pen = 0.0;
                for (sr, dr) in s.chunks_exact(k).zip(d.chunks_exact(k)) {
                    let r2: f64 = sr.iter().zip(dr).map(|(x, y)| (x + eta * y) * (x + eta * y)).sum();
                    if r2 > 0.0 {
                        pen += r2.powf(0.5 * p);
                    }
                }
                let fx = self.a * hx * isn - self.b * c.powf(p) * pen;
                let ascent = c * (ds + eta * g2) - ds;
                if fx.is_finite() && fx >= f + 1e-4 * ascent.max(0.0) && fx >= f {
                    accepted = Some(c);
                    break;
                }
                eta *= 0.5;
            }
            let Some(c) = accepted else {
                converged = tangential * snorm <= cfg.grad_tol.sqrt() * scale;
                break;
            };
            for i in 0..len {
                s[i] = c * (s[i] + eta * d[i]);
                ms[i] = c * (ms[i] + eta * md[i]);
            }
            self.radial(&mut s, &mut ms);
            eta_prev = Some(eta);
        }
        self.coupling.apply(&s, k, &mut ms);
        RunOutcome { value: self.value(&s, &ms), sigma: s, iterations, converged }
    }
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

fn scaled_opnorm(g: &Disorder) -> f64 {
    opnorm_scaled(g).unwrap_or_else(|_| {
        // Frobenius norm dominates the operator norm.
        g.couplings().iter().map(|x| x * x).sum::<f64>().sqrt() / (g.n() as f64).sqrt()
    })
}

/// Radius `(‖G‖₂/(t√N))^{1/(p−2)}` in the normalized `ℓ^{2,2}` norm that
/// contains every optimizer with non-negative value.
pub fn lagrangian_search_radius(g: &Disorder, p: f64, t: f64) -> Result<f64> {
    check_pt(p, t)?;
    Ok((scaled_opnorm(g) / t).powf(1.0 / (p - 2.0)))
}

/// Gaussian starting directions scaled to normalized radius `rho`.
fn gaussian_starts(n: usize, kappa: usize, rho: f64, cfg: &SolverConfig) -> Vec<Vec<f64>> {
    (0..cfg.restarts as u64)
        .map(|r| {
            let mut x = SpinConfig::gaussian(n, kappa, &mut stream(cfg.seed, Purpose::Restart, r)).into_data();
            let c = rho * (n as f64).sqrt() / norm2(&x).max(1e-300);
            x.iter_mut().for_each(|v| *v *= c);
            x
        })
        .collect()
}

fn run(prob: &PenaltyProblem, starts: Vec<Vec<f64>>, n: usize, cfg: &SolverConfig) -> Result<GroundStateResult> {
    let runs: Vec<RunOutcome> = starts.into_par_iter().map(|s0| prob.ascend(s0, cfg)).collect();
    let restarts_used = runs.len();
    let (_, best) = best_run(runs);
    let kappa = prob.kappa;
    let (value, config) = if best.value > 0.0 {
        (best.value / n as f64, SpinConfig::new(n, kappa, best.sigma)?)
    } else {
        (0.0, SpinConfig::zeros(n, kappa))
    };
    Ok(GroundStateResult { value, config, iterations: best.iterations, restarts_used, converged: best.converged })
}

/// `L_{N,p}(t) = (1/N) max_σ (H_N(σ) − t‖σ‖_{p,2}^p)`.
pub fn lagrangian_max(g: &Disorder, p: f64, t: f64, kappa: usize, cfg: &SolverConfig) -> Result<GroundStateResult> {
    lagrangian_max_seeded(g, p, t, kappa, cfg, &[])
}

/// As [`lagrangian_max`], with extra starting configurations tried first.
pub fn lagrangian_max_seeded(
    g: &Disorder,
    p: f64,
    t: f64,
    kappa: usize,
    cfg: &SolverConfig,
    seeds: &[SpinConfig],
) -> Result<GroundStateResult> {
    check_pt(p, t)?;
    cfg.validate()?;
    let n = g.n();
    let rho = lagrangian_search_radius(g, p, t)?;
    let coupling = g.coupling();
    let prob = PenaltyProblem { coupling: &coupling, kappa, p, a: 1.0, b: t, radius2: None };
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for s in seeds {
        if s.n() != n || s.kappa() != kappa {
            return Err(Error::Shape("seed configuration has the wrong shape".into()));
        }
        starts.push(s.data().to_vec());
    }
    starts.extend(gaussian_starts(n, kappa, 0.5 * rho, cfg));
    run(&prob, starts, n, cfg)
}

fn check_u(u: f64) -> Result<()> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::Domain(format!("u must be positive, got {u}")));
    }
    Ok(())
}

/// `(1/N) max_{⦀σ⦀²_{2,2} ≤ u} (H_N(σ) − t‖σ‖_{p,2}^p)`.
pub fn localized_lagrangian(g: &Disorder, p: f64, t: f64, u: f64, kappa: usize, cfg: &SolverConfig) -> Result<GroundStateResult> {
    check_pt(p, t)?;
    check_u(u)?;
    cfg.validate()?;
    let n = g.n();
    let rho = lagrangian_search_radius(g, p, t)?;
    let coupling = g.coupling();
    let prob = PenaltyProblem { coupling: &coupling, kappa, p, a: 1.0, b: t, radius2: Some(u * n as f64) };
    run(&prob, gaussian_starts(n, kappa, (0.5 * rho).min(u.sqrt()), cfg), n, cfg)
}

/// The localized Lagrangian computed on the unit ball:
/// `(1/N) max_{⦀σ⦀_{2,2} ≤ 1} (u·H_N(σ) − t·u^{p/2}‖σ‖_{p,2}^p)`.
pub fn localized_lagrangian_rescaled(
    g: &Disorder,
    p: f64,
    t: f64,
    u: f64,
    kappa: usize,
    cfg: &SolverConfig,
) -> Result<GroundStateResult> {
    check_pt(p, t)?;
    check_u(u)?;
    cfg.validate()?;
    let n = g.n();
    let rho = lagrangian_search_radius(g, p, t)?;
    let coupling = g.coupling();
    let prob = PenaltyProblem { coupling: &coupling, kappa, p, a: u, b: t * u.powf(0.5 * p), radius2: Some(n as f64) };
    run(&prob, gaussian_starts(n, kappa, (0.5 * rho / u.sqrt()).min(1.0), cfg), n, cfg)
}

/// Lagrangian values on a grid of penalties.
///
/// After independent solves, the best optimizer is rescaled to every other
/// penalty (optimizers scale as `t^{-1/(p−2)}`) and polished there, so all
/// grid points share the best basin found.
pub fn lagrangian_family(g: &Disorder, p: f64, ts: &[f64], kappa: usize, cfg: &SolverConfig) -> Result<Vec<GroundStateResult>> {
    let mut out: Vec<GroundStateResult> =
        ts.iter().map(|&t| lagrangian_max(g, p, t, kappa, cfg)).collect::<Result<_>>()?;
    let expo = 2.0 / (p - 2.0);
    let best = (0..ts.len())
        .max_by(|&i, &j| {
            let ci = out[i].value * ts[i].powf(expo);
            let cj = out[j].value * ts[j].powf(expo);
            ci.total_cmp(&cj).then(j.cmp(&i))
        });
    let Some(best) = best else { return Ok(out) };
    let coupling = g.coupling();
    let one = SolverConfig { restarts: 1, ..cfg.clone() };
    for (j, &t) in ts.iter().enumerate() {
        if j == best {
            continue;
        }
        let seed = out[best].config.scaled((ts[best] / t).powf(1.0 / (p - 2.0)));
        let prob = PenaltyProblem { coupling: &coupling, kappa, p, a: 1.0, b: t, radius2: None };
        let polished = run(&prob, vec![seed.into_data()], g.n(), &one)?;
        if polished.value > out[j].value {
            out[j] = GroundStateResult { restarts_used: out[j].restarts_used + 1, ..polished };
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub t: f64,
    pub h: f64,
    pub l_minus: f64,
    pub l: f64,
    pub l_plus: f64,
    pub derivative: f64,
    /// `|L + t(p/2−1)L'| / (|L| + 1e−12)`
    pub residual: f64,
    /// `⦀σ*(t)⦀_{p,2}^p`, which equals `−L'(t)`.
    pub optimizer_norm: f64,
    pub norm_identity_gap: f64,
    /// `(p/2)(p/2−1)^{2/p−1} t^{2/p} L^{1−2/p}`, or NaN when `L = 0`.
    pub transform: f64,
    pub converged: bool,
}

/// Central-difference check of `L(t) = −t(p/2−1)L'(t)` on one disorder.
pub fn derivative_relation_check(
    g: &Disorder,
    p: f64,
    t: f64,
    kappa: usize,
    cfg: &SolverConfig,
    h: Option<f64>,
) -> Result<DerivativeReport> {
    let mut reps = derivative_relation_family(g, p, &[t], kappa, cfg, h)?;
    Ok(reps.remove(0))
}

/// [`derivative_relation_check`] at every penalty in `ts`, with all `3·|ts|`
/// solves sharing one [`lagrangian_family`]. The step is `h` or `1e−4·t`.
pub fn derivative_relation_family(
    g: &Disorder,
    p: f64,
    ts: &[f64],
    kappa: usize,
    cfg: &SolverConfig,
    h: Option<f64>,
) -> Result<Vec<DerivativeReport>> {
    let mut grid = Vec::with_capacity(3 * ts.len());
    for &t in ts {
        check_pt(p, t)?;
        let h = h.unwrap_or(1e-4 * t);
        if !(h > 0.0 && h < t) {
            return Err(Error::Domain(format!("step must lie in (0, t), got {h}")));
        }
        grid.extend([t - h, t, t + h]);
    }
    let fam = lagrangian_family(g, p, &grid, kappa, cfg)?;
    Ok(ts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let (lo, mid, hi) = (&fam[3 * i], &fam[3 * i + 1], &fam[3 * i + 2]);
            let h = t - grid[3 * i];
            let (lm, l, lp) = (lo.value, mid.value, hi.value);
            let derivative = (lp - lm) / (2.0 * h);
            let residual = (l + t * (0.5 * p - 1.0) * derivative).abs() / (l.abs() + 1e-12);
            let optimizer_norm = row_pow_sum(mid.config.data(), kappa, p) / g.n() as f64;
            DerivativeReport {
                t,
                h,
                l_minus: lm,
                l,
                l_plus: lp,
                derivative,
                residual,
                optimizer_norm,
                norm_identity_gap: (optimizer_norm + derivative).abs(),
                transform: gse_transform(l, p, t).unwrap_or(f64::NAN),
                converged: lo.converged && mid.converged && hi.converged,
            }
        })
        .collect())
}
