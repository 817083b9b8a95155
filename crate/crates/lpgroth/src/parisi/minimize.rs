use super::functional::{parisi_beta, parisi_inf};
use super::types::{DiscreteMeasure, Flavor, LagrangeMultiplier, Path, QuadratureSpec};
use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_pd, sqrt_psd, GramMatrix, Matrix, SymMatrix};
use crate::rng::{stream, Purpose};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    /// Zero-temperature functional.
    Inf,
    /// Positive-temperature functional at this `β`.
    Beta(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOptions {
    pub quad: QuadratureSpec,
    /// Random re-seeds after the initial run.
    pub reseeds: usize,
    /// Function evaluations per Nelder–Mead run.
    pub max_evals: usize,
    /// Stop when the simplex values spread by less than this.
    pub ftol: f64,
    pub seed: u64,
}

impl MinimizeOptions {
    pub fn new(kappa: usize) -> Self {
        MinimizeOptions { quad: QuadratureSpec::default_for(kappa), reseeds: 8, max_evals: 600, ftol: 1e-9, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    /// 0 for the initial run, then one per re-seed.
    pub run: usize,
    pub evaluations: usize,
    pub value: f64,
    /// Stopped on the spread tolerance rather than the evaluation budget.
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub lambda: LagrangeMultiplier,
    pub weights: DiscreteMeasure,
    pub path: Path,
    pub value: f64,
    pub stderr: f64,
    pub converged: bool,
    pub params: Vec<f64>,
    pub trace: Vec<TraceEntry>,
}

/// Maps unconstrained reals to a feasible `(λ, weights, path)` triple.
struct Parameterization<'a> {
    d: &'a GramMatrix,
    d_half: SymMatrix,
    r: usize,
    mode: Mode,
}

impl Parameterization<'_> {
    fn kappa(&self) -> usize {
        self.d.dim()
    }

    fn n_lambda(&self) -> usize {
        self.kappa() * (self.kappa() + 1) / 2
    }

    fn n_path(&self) -> usize {
        if self.r > 1 {
            self.r * self.kappa() * self.kappa()
        } else {
            0
        }
    }

    fn dim(&self) -> usize {
        self.n_lambda() + self.r + self.n_path()
    }

    fn initial(&self) -> Vec<f64> {
        let k = self.kappa();
        let mut x = vec![0.0; self.dim()];
        let off = self.n_lambda() + self.r;
        for j in 0..self.n_path() / (k * k).max(1) {
            for a in 0..k {
                x[off + j * k * k + a * k + a] = 1.0;
            }
        }
        x
    }

    fn decode(&self, x: &[f64]) -> Result<(LagrangeMultiplier, DiscreteMeasure, Path)> {
        let k = self.kappa();
        let r = self.r;
        let lambda = LagrangeMultiplier::new(k, x[..self.n_lambda()].to_vec())?;
        let u = &x[self.n_lambda()..self.n_lambda() + r];
        let mut cum = 0.0;
        let mut w = Vec::with_capacity(r + 1);
        for &ui in u {
            cum += ui.clamp(-50.0, 50.0).exp();
            w.push(match self.mode {
                Mode::Inf => cum,
                Mode::Beta(_) => cum / (1.0 + cum),
            });
        }
        w.push(match self.mode {
            Mode::Inf => cum,
            Mode::Beta(_) => 1.0,
        });
        let flavor = match self.mode {
            Mode::Inf => Flavor::Finite,
            Mode::Beta(_) => Flavor::Probability,
        };
        let weights = DiscreteMeasure::new(w, flavor)?;
        let q: Vec<f64> = (0..=r).map(|j| j as f64 / r as f64).collect();
        let path = if r == 1 {
            Path::new(q, vec![GramMatrix::zeros(k), self.d.clone()])?
        } else {
            let off = self.n_lambda() + r;
            let raw: Vec<SymMatrix> = (0..r)
                .map(|j| {
                    let t = Matrix::from_vec(k, k, x[off + j * k * k..off + (j + 1) * k * k].to_vec()).expect("square");
                    let tt = t.matmul(&t.transpose()).expect("square");
                    SymMatrix::from_matrix(&tt).expect("finite").add(&SymMatrix::identity(k).scale(1e-12)).expect("dim")
                })
                .collect::<Vec<_>>();
            let total = raw.iter().skip(1).fold(raw[0].clone(), |acc, m| acc.add(m).expect("dim"));
            let norm = inv_sqrt_pd(&total)?.to_matrix();
            let dh = self.d_half.to_matrix();
            let mut gamma = vec![GramMatrix::zeros(k)];
            let mut acc = SymMatrix::zeros(k);
            for (j, s) in raw.iter().enumerate() {
                if j + 1 == r {
                    gamma.push(self.d.clone());
                    break;
                }
                let sj = norm.matmul(&s.to_matrix())?.matmul(&norm)?;
                let delta = dh.matmul(&sj)?.matmul(&dh)?;
                acc = acc.add(&SymMatrix::from_matrix(&delta)?)?;
                gamma.push(GramMatrix::new(acc.clone())?);
            }
            Path::new(q, gamma)?
        };
        Ok((lambda, weights, path))
    }
}

/// Nelder–Mead with standard coefficients. Returns `(x, f, evals, converged)`.
fn nelder_mead(f: &mut impl FnMut(&[f64]) -> f64, x0: &[f64], step: f64, max_evals: usize, ftol: f64) -> (Vec<f64>, f64, usize, bool) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    simplex.push((x0.to_vec(), eval(x0, &mut evals)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    let mut converged = false;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if (worst - best).abs() <= ftol * (1.0 + best.abs()) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|i| simplex[..n].iter().map(|p| p.0[i]).sum::<f64>() / n as f64).collect();
        let along = |c: f64| -> Vec<f64> { (0..n).map(|i| centroid[i] + c * (simplex[n].0[i] - centroid[i])).collect() };
        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < fr.min(worst) {
                simplex[n] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    let xs: Vec<f64> = (0..n).map(|i| x0[i] + 0.5 * (p.0[i] - x0[i])).collect();
                    let v = eval(&xs, &mut evals);
                    *p = (xs, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v, evals, converged)
}

/// Minimizes the Parisi functional over `(λ, weights, path)` with `r` levels.
///
/// Weights are cumulative sums of exponentials (squashed into `(0,1)` at
/// positive temperature). Path increments are `D^{1/2} S_j D^{1/2}` with
/// `S_j = M^{-1/2} T_j T_jᵀ M^{-1/2}`, `M = Σ T_i T_iᵀ`, so the path is
/// monotone and ends at `D` by construction. Knots are fixed at `j/r`: the
/// functional does not depend on them.
pub fn minimize_parisi(d: &GramMatrix, p: f64, t: f64, r: usize, mode: Mode, opts: &MinimizeOptions) -> Result<MinimizeResult> {
    if r == 0 {
        return Err(Error::Input("r must be at least 1".into()));
    }
    if let Mode::Beta(b) = mode {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::Domain(format!("beta must be positive and finite, got {b}")));
        }
    }
    opts.quad.validate()?;
    let param = Parameterization { d, d_half: sqrt_psd(d)?.sym().clone(), r, mode };
    let evaluate = |x: &[f64]| -> Result<(f64, f64)> {
        let (lambda, w, path) = param.decode(x)?;
        let v = match mode {
            Mode::Inf => parisi_inf(&lambda, p, t, &w, &path, &opts.quad)?,
            Mode::Beta(beta) => parisi_beta(&lambda, beta, p, t, &w, &path, &opts.quad)?,
        };
        Ok((v.value, v.stderr))
    };
    let mut objective = |x: &[f64]| evaluate(x).map(|v| v.0).unwrap_or(f64::INFINITY);

    let mut trace = Vec::new();
    let (mut best_x, mut best_v, evals, mut best_conv) = nelder_mead(&mut objective, &param.initial(), 0.5, opts.max_evals, opts.ftol);
    trace.push(TraceEntry { run: 0, evaluations: evals, value: best_v, converged: best_conv });
    let mut rng = stream(opts.seed, Purpose::Minimizer, 0);
    for run in 1..=opts.reseeds {
        let start: Vec<f64> = best_x.iter().map(|v| v + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let (x, v, evals, conv) = nelder_mead(&mut objective, &start, 0.25, opts.max_evals, opts.ftol);
        trace.push(TraceEntry { run, evaluations: evals, value: v, converged: conv });
        if v < best_v {
            best_x = x;
            best_v = v;
            best_conv = conv;
        }
    }
    if !best_v.is_finite() {
        return Err(Error::Numeric("no finite functional value found".into()));
    }
    let (value, stderr) = evaluate(&best_x)?;
    let (lambda, weights, path) = param.decode(&best_x)?;
    Ok(MinimizeResult { lambda, weights, path, value, stderr, converged: best_conv, params: best_x, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::loewner_leq;

    #[test]
    fn rosenbrock() {
        let mut f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let (x, v, _, conv) = nelder_mead(&mut f, &[-1.2, 1.0], 0.5, 5000, 1e-14);
        assert!(conv && v < 1e-8 && (x[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn decoded_paths_are_feasible() {
        let d = GramMatrix::from_rows(2, vec![1.0, 0.4, 0.4, 0.7]).unwrap();
        let param = Parameterization { d: &d, d_half: sqrt_psd(&d).unwrap().sym().clone(), r: 3, mode: Mode::Beta(4.0) };
        let mut rng = stream(1, Purpose::Verify, 0);
        for _ in 0..20 {
            let x: Vec<f64> = (0..param.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let (_, w, path) = param.decode(&x).unwrap();
            assert_eq!(path.endpoint(), &d);
            for g in path.values().windows(2) {
                assert!(loewner_leq(&g[0], &g[1], 1e-10).unwrap());
            }
            assert_eq!(*w.weights().last().unwrap(), 1.0);
            assert!(w.weights()[..3].iter().all(|&a| a > 0.0 && a < 1.0));
        }
    }

    #[test]
    fn single_level_beats_coarse_grid() {
        let d = GramMatrix::identity(1);
        let mut opts = MinimizeOptions::new(1);
        opts.quad = QuadratureSpec::grid(32);
        opts.reseeds = 2;
        let res = minimize_parisi(&d, 3.0, 1.0, 1, Mode::Inf, &opts).unwrap();
        let path = Path::single_level(d.clone());
        let mut grid_min = f64::INFINITY;
        for i in 0..=12 {
            for j in 0..=12 {
                let lam = LagrangeMultiplier::scalar(-1.5 + 0.25 * i as f64).unwrap();
                let z = 0.1 * 1.4f64.powi(j);
                let w = DiscreteMeasure::finite(vec![z, z]).unwrap();
                if let Ok(v) = parisi_inf(&lam, 3.0, 1.0, &w, &path, &opts.quad) {
                    grid_min = grid_min.min(v.value);
                }
            }
        }
        assert!(res.value <= grid_min + 1e-9, "{} vs {grid_min}", res.value);
    }
}
