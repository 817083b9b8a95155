//! Subcommand implementations. Every command fans out over
//! `(parameter point, replica)` tasks on the configured worker pool and
//! collects results in task order, so output is independent of scheduling.

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::record::{mean_stderr, ResultRecord};
use lpgroth::asymptotics::{limit_constant, Constant, Scaling};
use lpgroth::model::{goe, lambda_max_symmetric, sample_disorder_replica};
use lpgroth::parisi::{minimize_parisi, parisi_beta, parisi_inf, Flavor, MinimizeOptions, Mode, ParisiDocument};
use lpgroth::solvers::{derivative_relation_family, gse_normalized, maximize_sphere};
use lpgroth::verify::{run_suite, Check, Suite};
use rayon::prelude::*;
use std::time::Instant;

/// Records plus, for `parisi min`, the best parameter document.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub records: Vec<ResultRecord>,
    pub document: Option<ParisiDocument>,
}

impl Outcome {
    fn records(records: Vec<ResultRecord>) -> Self {
        Outcome { records, document: None }
    }
}

fn in_pool<T: Send>(cfg: &ExperimentConfig, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    Ok(cfg.pool()?.install(f))
}

#[derive(Debug, Clone, Copy)]
struct Point {
    n: usize,
    p: f64,
    kappa: usize,
}

/// `(point index, point, replica)` in output order.
fn tasks(cfg: &ExperimentConfig) -> Vec<(usize, Point, u64)> {
    let mut out = Vec::new();
    let mut i = 0;
    for &n in &cfg.n_grid {
        for &p in &cfg.p {
            for &kappa in &cfg.kappa {
                for rep in 0..cfg.replicas as u64 {
                    out.push((i, Point { n, p, kappa }, rep));
                }
                i += 1;
            }
        }
    }
    out
}

fn single<T: Copy>(field: &str, v: &[T]) -> CliResult<T> {
    match v {
        [x] => Ok(*x),
        _ => Err(CliError::config(field, "this subcommand takes a single value")),
    }
}

/// `N`-normalization of the sphere maximum for `p ≤ 2`.
pub fn gp_scale(n: usize, p: f64) -> CliResult<f64> {
    let nf = n as f64;
    Ok(match limit_constant(p)?.scaling {
        Scaling::PowerConjugate(e) | Scaling::Power(e) => nf.powf(e),
        Scaling::SqrtN => nf.sqrt(),
        Scaling::SqrtLogN => nf.ln().sqrt().max(1.0),
    })
}

/// Mean row over replica rows that share a parameter point.
fn mean_row(quantity: &str, rows: &[&ResultRecord], pick: impl Fn(&ResultRecord) -> Option<f64>) -> ResultRecord {
    let xs: Vec<f64> = rows.iter().filter_map(|r| pick(r)).collect();
    let (mean, se) = mean_stderr(&xs);
    let first = rows[0];
    ResultRecord {
        quantity: quantity.into(),
        replica: None,
        value: mean,
        stderr: se,
        transform: None,
        residual: None,
        iterations: None,
        converged: Some(rows.iter().all(|r| r.converged.unwrap_or(true))),
        note: format!("replicas={}", xs.len()),
        wall_time_s: None,
        ..first.clone()
    }
}

/// One sphere maximum for a replica: the normalized ground-state energy for
/// `p > 2`; otherwise the maximum divided by the `N`-scaling of its limit,
/// with `p = 2` taken as the top eigenvalue of `(G + Gᵀ)/2`.
pub fn ground_state_replica(cfg: &ExperimentConfig, n: usize, p: f64, kappa: usize, replica: u64) -> CliResult<ResultRecord> {
    let start = Instant::now();
    let g = sample_disorder_replica(cfg.seed, replica, n)?;
    let (quantity, value, iterations, converged) = if p > 2.0 {
        let r = gse_normalized(&g, p, kappa, &cfg.solver(replica))?;
        ("gse", r.value, Some(r.iterations), r.converged)
    } else if p == 2.0 {
        let lmax = lambda_max_symmetric(&goe(&g), 1e-12, 200 * n.max(50))?;
        ("scaled_gp", lmax * std::f64::consts::FRAC_1_SQRT_2 / gp_scale(n, p)?, None, true)
    } else {
        let r = maximize_sphere(&g, p, kappa, &cfg.solver(replica))?;
        ("scaled_gp", r.value / gp_scale(n, p)?, Some(r.iterations), r.converged)
    };
    Ok(ResultRecord {
        n: Some(n),
        p: Some(p),
        kappa: Some(kappa),
        replica: Some(replica),
        iterations,
        converged: Some(converged),
        wall_time_s: cfg.timing.then(|| start.elapsed().as_secs_f64()),
        ..ResultRecord::new("ground-state", quantity, cfg.seed, value)
    })
}

/// Sphere maxima per `(N, p, κ, replica)` followed by one mean row per point.
pub fn ground_state(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let tasks = tasks(cfg);
    let rows: Vec<ResultRecord> = in_pool(cfg, || {
        tasks
            .par_iter()
            .map(|&(_, pt, rep)| ground_state_replica(cfg, pt.n, pt.p, pt.kappa, rep))
            .collect::<CliResult<Vec<_>>>()
    })??;
    let mut out = rows.clone();
    for chunk in rows.chunks(cfg.replicas) {
        let refs: Vec<&ResultRecord> = chunk.iter().collect();
        out.push(mean_row(&format!("{}_mean", chunk[0].quantity), &refs, |r| Some(r.value)));
    }
    Ok(Outcome::records(out))
}

/// Lagrangian values on the `t` grid per `(N, p, κ, replica)`, solved as one
/// family so every `t` shares the best basin. Each row carries the
/// ground-state energy recovered from `L(t)` in the `transform` column and
/// the central-difference residual of `L = −t(p/2−1)L'`. Mean rows per
/// `(point, t)` follow, then a `transform_spread` row per point:
/// `(max − min)/mean` of the mean transforms over the grid.
pub fn lagrangian(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    const CMD: &str = "lagrangian";
    if let Some(&p) = cfg.p.iter().find(|&&p| p <= 2.0) {
        return Err(CliError::config("p", format!("the Lagrangian needs p > 2, got {p}")));
    }
    let tasks = tasks(cfg);
    let per_task: Vec<Vec<ResultRecord>> = in_pool(cfg, || {
        tasks
            .par_iter()
            .map(|&(_, pt, rep)| -> CliResult<Vec<ResultRecord>> {
                let start = Instant::now();
                let g = sample_disorder_replica(cfg.seed, rep, pt.n)?;
                let reps = derivative_relation_family(&g, pt.p, &cfg.t_grid, pt.kappa, &cfg.solver(rep), None)?;
                let wall = cfg.timing.then(|| start.elapsed().as_secs_f64());
                Ok(reps
                    .into_iter()
                    .map(|d| ResultRecord {
                        n: Some(pt.n),
                        p: Some(pt.p),
                        kappa: Some(pt.kappa),
                        t: Some(d.t),
                        replica: Some(rep),
                        transform: d.transform.is_finite().then_some(d.transform),
                        residual: Some(d.residual),
                        converged: Some(d.converged),
                        wall_time_s: wall,
                        ..ResultRecord::new(CMD, "lagrangian", cfg.seed, d.l)
                    })
                    .collect())
            })
            .collect::<CliResult<Vec<_>>>()
    })??;
    let mut out: Vec<ResultRecord> = per_task.iter().flatten().cloned().collect();
    for group in per_task.chunks(cfg.replicas) {
        let mut transforms = Vec::new();
        for (k, _) in cfg.t_grid.iter().enumerate() {
            let rows: Vec<&ResultRecord> = group.iter().map(|g| &g[k]).collect();
            let mut l = mean_row("lagrangian_mean", &rows, |r| Some(r.value));
            let tr = mean_row("transform_mean", &rows, |r| r.transform);
            let res = mean_row("", &rows, |r| r.residual);
            l.transform = Some(tr.value);
            l.residual = Some(res.value);
            transforms.push(tr.value);
            out.push(l);
            out.push(tr);
        }
        let mean = transforms.iter().sum::<f64>() / transforms.len() as f64;
        let (lo, hi) = transforms.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let first = &group[0][0];
        out.push(ResultRecord {
            n: first.n,
            p: first.p,
            kappa: first.kappa,
            note: format!("t_points={}", transforms.len()),
            ..ResultRecord::new(CMD, "transform_spread", cfg.seed, (hi - lo) / mean.abs())
        });
    }
    Ok(Outcome::records(out))
}

/// Evaluates the functional at a stored `(λ, weights, path)` document: the
/// zero-temperature form for finite weights, the `β` form for probability
/// weights. Uses the first `p` and `t`.
pub fn parisi_eval(cfg: &ExperimentConfig, doc: &ParisiDocument) -> CliResult<Outcome> {
    let p = single("p", &cfg.p)?;
    let t = single("t-grid", &cfg.t_grid)?;
    let (lambda, weights, path) = doc.into_parts().map_err(|e| CliError::config("document", e))?;
    let quad = cfg.quadrature(path.kappa());
    let (quantity, v, beta) = in_pool(cfg, || -> CliResult<_> {
        Ok(match weights.flavor() {
            Flavor::Finite => ("parisi_inf", parisi_inf(&lambda, p, t, &weights, &path, &quad)?, None),
            Flavor::Probability => {
                let beta = cfg.beta.ok_or_else(|| CliError::config("beta", "required for probability weights"))?;
                ("parisi_beta", parisi_beta(&lambda, beta, p, t, &weights, &path, &quad)?, Some(beta))
            }
        })
    })??;
    Ok(Outcome::records(vec![ResultRecord {
        p: Some(p),
        kappa: Some(path.kappa()),
        t: Some(t),
        beta,
        r: Some(path.r()),
        stderr: Some(v.stderr),
        note: format!("root={}", crate::record::fmt_f64(v.root)),
        ..ResultRecord::new("parisi eval", quantity, cfg.seed, v.value)
    }]))
}

/// Minimizes the functional for every `r ≤ r_max` at the single `(p, κ, t)`
/// and `D`, at zero temperature or at `--beta`. The document holds the
/// lowest value found.
pub fn parisi_min(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let p = single("p", &cfg.p)?;
    let t = single("t-grid", &cfg.t_grid)?;
    let kappa = single("kappa", &cfg.kappa)?;
    let d = cfg.d.for_kappa(kappa)?;
    let mode = cfg.beta.map_or(Mode::Inf, Mode::Beta);
    let opts = MinimizeOptions { quad: cfg.quadrature(kappa), seed: cfg.seed, ..MinimizeOptions::new(kappa) };
    let results = in_pool(cfg, || {
        (1..=cfg.r_max)
            .map(|r| {
                let start = Instant::now();
                minimize_parisi(&d, p, t, r, mode, &opts).map(|m| (r, m, start.elapsed().as_secs_f64()))
            })
            .collect::<lpgroth::Result<Vec<_>>>()
    })??;
    let quantity = if cfg.beta.is_some() { "parisi_beta_min" } else { "parisi_inf_min" };
    let records = results
        .iter()
        .map(|(r, m, wall)| ResultRecord {
            p: Some(p),
            kappa: Some(kappa),
            t: Some(t),
            beta: cfg.beta,
            r: Some(*r),
            stderr: Some(m.stderr),
            converged: Some(m.converged),
            iterations: Some(m.trace.iter().map(|e| e.evaluations).sum()),
            wall_time_s: cfg.timing.then_some(*wall),
            ..ResultRecord::new("parisi min", quantity, cfg.seed, m.value)
        })
        .collect();
    let best = results
        .iter()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
        .map(|(_, m, _)| m)
        .expect("r_max >= 1");
    let doc = ParisiDocument::from_parts(&best.lambda, &best.weights, &best.path)?;
    Ok(Outcome { records, document: Some(doc) })
}

/// Large-`N` constants for each `p`; the note names the regime and scaling.
pub fn asymptotics(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let rows = cfg
        .p
        .iter()
        .map(|&p| {
            let lim = limit_constant(p)?;
            let scaling = match lim.scaling {
                Scaling::PowerConjugate(e) | Scaling::Power(e) => format!("N^{e}"),
                Scaling::SqrtN => "N^0.5".into(),
                Scaling::SqrtLogN => "sqrt(log N)".into(),
            };
            let value = match lim.constant {
                Constant::Value(v) => v,
                Constant::Variational => f64::NAN,
            };
            let kind = if matches!(lim.constant, Constant::Variational) { "; variational" } else { "" };
            Ok(ResultRecord {
                p: Some(p),
                note: format!("{}; {scaling}{kind}", format!("{:?}", lim.regime).to_lowercase()),
                ..ResultRecord::new("asymptotics", "limit_constant", cfg.seed, value)
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Outcome::records(rows))
}

/// Runs the named suites (`all` for every suite) and returns the checks with
/// one record each.
pub fn verify(cfg: &ExperimentConfig, suite: &str) -> CliResult<(Vec<Check>, Outcome)> {
    let suites: Vec<Suite> = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![suite.parse().map_err(|e| CliError::config("suite", e))?]
    };
    let checks: Vec<Check> = in_pool(cfg, || suites.iter().flat_map(|&s| run_suite(s, cfg.seed)).collect())?;
    let records = checks
        .iter()
        .map(|c| ResultRecord {
            residual: Some(c.tolerance),
            converged: Some(c.passed),
            iterations: Some(c.cases),
            note: c.counterexample.clone().unwrap_or_default(),
            ..ResultRecord::new("verify", &format!("{}/{}", c.suite, c.name), cfg.seed, c.worst)
        })
        .collect();
    Ok((checks, Outcome::records(records)))
}
