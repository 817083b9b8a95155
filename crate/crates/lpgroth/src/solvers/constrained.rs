use super::{best_run, dot, row_pow_sum, GroundStateResult, RunOutcome, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_pd, sqrt_psd, GramMatrix, Matrix, SymMatrix};
use crate::model::{Coupling, Disorder, SpinConfig};
use crate::rng::{stream, Purpose};
use rayon::prelude::*;

/// `X·A` for an `N×κ` row-major block and a `κ×κ` matrix.
fn right_mul(x: &[f64], a: &Matrix) -> Vec<f64> {
    let k = a.rows();
    let mut out = vec![0.0; x.len()];
    for (orow, xrow) in out.chunks_exact_mut(k).zip(x.chunks_exact(k)) {
        for (l, &xl) in xrow.iter().enumerate() {
            for j in 0..k {
                orow[j] += xl * a.get(l, j);
            }
        }
    }
    out
}

/// `XᵀY` for two `N×κ` blocks.
fn gram(x: &[f64], y: &[f64], k: usize) -> Matrix {
    let mut out = Matrix::zeros(k, k);
    for (xr, yr) in x.chunks_exact(k).zip(y.chunks_exact(k)) {
        for a in 0..k {
            for b in 0..k {
                out.set(a, b, out.get(a, b) + xr[a] * yr[b]);
            }
        }
    }
    out
}

/// `(XᵀX)^{-1/2}`, the polar retraction factor.
fn polar_factor(x: &[f64], k: usize) -> Option<Matrix> {
    let p = SymMatrix::from_matrix(&gram(x, x, k)).ok()?;
    inv_sqrt_pd(&p).ok().map(|m| m.to_matrix())
}

struct StiefelProblem<'a> {
    coupling: &'a Coupling,
    kappa: usize,
    p: f64,
    t: f64,
    /// `√N · D^{1/2}`, so that `σ = U·W` for `UᵀU = I`.
    w: Matrix,
}

impl StiefelProblem<'_> {
    fn value_of(&self, sigma: &[f64], msigma: &[f64]) -> f64 {
        let n = self.coupling.n() as f64;
        0.5 * dot(sigma, msigma) / n.sqrt() - self.t * row_pow_sum(sigma, self.kappa, self.p)
    }

    fn ascend(&self, x0: Vec<f64>, cfg: &SolverConfig) -> RunOutcome {
        let (k, p, t) = (self.kappa, self.p, self.t);
        let isn = 1.0 / (self.coupling.n() as f64).sqrt();
        let z = polar_factor(&x0, k).expect("gaussian start has full rank");
        let mut u = right_mul(&x0, &z);
        let mut mu = vec![0.0; u.len()];
        let mut mxi = vec![0.0; u.len()];
        self.coupling.apply(&u, k, &mut mu);
        let mut eta_prev: Option<f64> = None;
        let mut converged = false;
        let mut iterations = 0;
        for it in 0..cfg.max_iter {
            iterations = it;
            if it > 0 && it % 25 == 0 {
                self.coupling.apply(&u, k, &mut mu);
            }
            let sigma = right_mul(&u, &self.w);
            let msigma = right_mul(&mu, &self.w);
            let f = self.value_of(&sigma, &msigma);
            let mut gs = vec![0.0; sigma.len()];
            for ((gr, sr), mr) in gs.chunks_exact_mut(k).zip(sigma.chunks_exact(k)).zip(msigma.chunks_exact(k)) {
                let r2 = dot(sr, sr);
                let c = if r2 > 0.0 { t * p * r2.powf(0.5 * (p - 2.0)) } else { 0.0 };
                for j in 0..k {
                    gr[j] = isn * mr[j] - c * sr[j];
                }
            }
            let gu = right_mul(&gs, &self.w);
            let ug = gram(&u, &gu, k);
            let sym = Matrix::from_fn(k, k, |a, b| 0.5 * (ug.get(a, b) + ug.get(b, a)));
            let usym = right_mul(&u, &sym);
            let xi: Vec<f64> = gu.iter().zip(&usym).map(|(a, b)| a - b).collect();
            let xnorm2 = dot(&xi, &xi);
            let scale = f.abs().max(1e-300);
            if xnorm2.sqrt() * (k as f64).sqrt() <= cfg.grad_tol * scale {
                converged = true;
                break;
            }
            self.coupling.apply(&xi, k, &mut mxi);
            let mut eta = eta_prev.map(|e| 2.0 * e).unwrap_or(cfg.step0 / xnorm2.sqrt());
            let mut accepted = None;
            for _ in 0..=cfg.max_halvings {
                let x: Vec<f64> = u.iter().zip(&xi).map(|(a, b)| a + eta * b).collect();
                if let Some(zf) = polar_factor(&x, k) {
                    let zw = zf.matmul(&self.w).expect("square");
                    let sx = right_mul(&x, &zw);
                    let mx: Vec<f64> = mu.iter().zip(&mxi).map(|(a, b)| a + eta * b).collect();
                    let msx = right_mul(&mx, &zw);
                    let fx = self.value_of(&sx, &msx);
                    if fx.is_finite() && fx >= f + 1e-4 * eta * xnorm2 {
                        accepted = Some((x, mx, zf));
                        break;
                    }
                }
                eta *= 0.5;
            }
            let Some((x, mx, zf)) = accepted else {
                converged = xnorm2.sqrt() * (k as f64).sqrt() <= cfg.grad_tol.sqrt() * scale;
                break;
            };
            u = right_mul(&x, &zf);
            mu = right_mul(&mx, &zf);
            eta_prev = Some(eta);
        }
        self.coupling.apply(&u, k, &mut mu);
        let sigma = right_mul(&u, &self.w);
        let msigma = right_mul(&mu, &self.w);
        RunOutcome { value: self.value_of(&sigma, &msigma), sigma, iterations, converged }
    }
}

/// `L_{N,p,D}(t) = (1/N) max_{R(σ,σ)=D} (H_N(σ) − t‖σ‖_{p,2}^p)`.
///
/// Configurations are parameterized as `σ = Q·D^{1/2}` with `(1/N)QᵀQ = I`
/// and optimized on that Stiefel manifold with a polar retraction.
pub fn constrained_lagrangian(g: &Disorder, p: f64, t: f64, d: &GramMatrix, cfg: &SolverConfig) -> Result<GroundStateResult> {
    if !(p > 2.0) || !(t > 0.0) {
        return Err(Error::Domain(format!("need p > 2 and t > 0, got p={p}, t={t}")));
    }
    cfg.validate()?;
    let n = g.n();
    let kappa = d.dim();
    if n < kappa {
        return Err(Error::Infeasible(format!("N={n} is smaller than kappa={kappa}")));
    }
    if d.sym().max_abs() == 0.0 {
        return Ok(GroundStateResult {
            value: 0.0,
            config: SpinConfig::zeros(n, kappa),
            iterations: 0,
            restarts_used: 0,
            converged: true,
        });
    }
    let w = sqrt_psd(d)?.sym().to_matrix().scale((n as f64).sqrt());
    let coupling = g.coupling();
    let prob = StiefelProblem { coupling: &coupling, kappa, p, t, w };
    let runs: Vec<RunOutcome> = (0..cfg.restarts as u64)
        .into_par_iter()
        .map(|r| {
            let x0 = SpinConfig::gaussian(n, kappa, &mut stream(cfg.seed, Purpose::Restart, r)).into_data();
            prob.ascend(x0, cfg)
        })
        .collect();
    let restarts_used = runs.len();
    let (_, best) = best_run(runs);
    Ok(GroundStateResult {
        value: best.value / n as f64,
        config: SpinConfig::new(n, kappa, best.sigma)?,
        iterations: best.iterations,
        restarts_used,
        converged: best.converged,
    })
}
