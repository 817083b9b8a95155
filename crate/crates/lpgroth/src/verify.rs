//! Seeded randomized property suites, shared by the command-line `verify`
//! subcommand and the acceptance tests.
//!
//! Every check draws its instances from `stream(seed, Verify, ·)`, records
//! the worst observed error against a tolerance and keeps the full inputs of
//! the first failing instance.

use crate::asymptotics::{
    gaussian_abs_moment, goe_edge_reference, gse_transform, gse_transform_inverse, limit_constant,
    sub_quadratic_constant,
};
use crate::error::{Error, Result};
use crate::linalg::{
    gershgorin_psd_certificate, hs_norm, is_psd, loewner_leq, pd_perturbation_threshold, sqrt_psd, trace_product,
    GramMatrix, SymMatrix,
};
use crate::model::{
    goe, grad_hamiltonian, hamiltonian, lambda_max_symmetric, norm_p2, pnorm_pow_sum, sample_disorder_replica,
    self_overlap, Disorder, SpinConfig,
};
use crate::parisi::{
    ac_simulate, compare_terminals, integral_term, log_log_slope, moment_diagnostic, pde_residual, pde_residual_with, recursion,
    root_value_scalar, terminal_beta, terminal_inf, Control, DiscreteMeasure, Flavor, LagrangeMultiplier, Mesh,
    Path, QuadratureSpec, ScalarTerminal, Temperature, ZeroTemperature,
};
use crate::rng::{stream, Purpose};
use crate::solvers::{
    constrained_lagrangian, correct_overlap_matrix, lift_to_positive, localized_lagrangian, maximize_sphere,
    SolverConfig,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Linalg,
    Model,
    Terminals,
    Pde,
    Ac,
    Asymptotics,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::Linalg, Suite::Model, Suite::Terminals, Suite::Pde, Suite::Ac, Suite::Asymptotics];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Linalg => "linalg",
            Suite::Model => "model",
            Suite::Terminals => "terminals",
            Suite::Pde => "pde",
            Suite::Ac => "ac",
            Suite::Asymptotics => "asymptotics",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Suite> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown suite '{s}'")))
    }
}

/// Outcome of one property check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub cases: usize,
    /// Largest error seen, in the units of `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Inputs of the first failing case.
    pub counterexample: Option<String>,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}/{}: {} cases, worst {:.3e} (tol {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.cases,
            self.worst,
            self.tolerance
        )?;
        if let Some(c) = &self.counterexample {
            write!(f, "\n  first counterexample: {c}")?;
        }
        Ok(())
    }
}

/// Accumulates cases for one check.
struct Tracker {
    check: Check,
}

impl Tracker {
    fn new(suite: Suite, name: &str, tolerance: f64) -> Tracker {
        Tracker {
            check: Check {
                suite,
                name: name.to_string(),
                cases: 0,
                worst: 0.0,
                tolerance,
                passed: true,
                counterexample: None,
            },
        }
    }

    /// Records an error value; NaN and errors count as failures.
    fn case(&mut self, err: Result<f64>, inputs: impl FnOnce() -> String) {
        self.check.cases += 1;
        let (bad, shown) = match err {
            Ok(e) if e.is_nan() => (true, f64::INFINITY),
            Ok(e) => (e > self.check.tolerance, e),
            Err(e) => {
                let msg = format!("{} (error: {e})", inputs());
                self.fail(f64::INFINITY, msg);
                return;
            }
        };
        self.check.worst = self.check.worst.max(shown);
        if bad {
            let msg = inputs();
            self.fail(shown, msg);
        }
    }

    /// Records a boolean property.
    fn holds(&mut self, ok: Result<bool>, inputs: impl FnOnce() -> String) {
        self.case(ok.map(|b| if b { 0.0 } else { 1.0 }), inputs)
    }

    fn fail(&mut self, shown: f64, msg: String) {
        self.check.passed = false;
        self.check.worst = self.check.worst.max(shown);
        if self.check.counterexample.is_none() {
            self.check.counterexample = Some(msg);
        }
    }

    fn finish(self) -> Check {
        self.check
    }
}

fn rng(seed: u64, tag: u64) -> ChaCha8Rng {
    stream(seed, Purpose::Verify, tag)
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

/// Random PSD matrix `Σ_{l<rank} v_l v_lᵀ`.
fn random_psd(r: &mut ChaCha8Rng, k: usize, rank: usize, scale: f64) -> GramMatrix {
    let vs: Vec<Vec<f64>> = (0..rank).map(|_| (0..k).map(|_| scale * normal(r)).collect()).collect();
    let m = SymMatrix::from_fn(k, |i, j| vs.iter().map(|v| v[i] * v[j]).sum()).expect("finite");
    GramMatrix::new(m).expect("sum of outer products")
}

fn random_sym(r: &mut ChaCha8Rng, k: usize, scale: f64) -> SymMatrix {
    let raw: Vec<f64> = (0..k * k).map(|_| scale * normal(r)).collect();
    SymMatrix::from_fn(k, |i, j| 0.5 * (raw[i * k + j] + raw[j * k + i])).expect("finite")
}

fn show(m: &SymMatrix) -> String {
    format!("{:?}", m.data())
}

// ---------------------------------------------------------------- linalg

/// `‖M‖_HS ≤ tr M` on random PSD `M`, with equality for rank one.
pub fn check_hs_trace(seed: u64, cases: usize) -> Check {
    let mut tr = Tracker::new(Suite::Linalg, "hs_norm_below_trace", 1e-10);
    let mut r = rng(seed, 101);
    for _ in 0..cases {
        let k = r.random_range(1..=6);
        let rank = r.random_range(0..=k + 1);
        let m = random_psd(&mut r, k, rank, 1.0);
        let (hs, t) = (hs_norm(m.sym()), m.trace());
        let scale = 1.0 + t;
        let err = if rank <= 1 { (t - hs).abs() / scale } else { ((hs - t) / scale).max(0.0) };
        tr.case(Ok(err), || format!("rank={rank} M={}", show(m.sym())));
    }
    tr.finish()
}

/// `B ≤ C` implies `tr(AB) ≤ tr(AC)` and `‖B‖_HS ≤ ‖C‖_HS` for PSD `A`, `B`.
pub fn check_loewner_trace(seed: u64, cases: usize) -> Check {
    let mut tr = Tracker::new(Suite::Linalg, "loewner_order_preserved", 1e-10);
    let mut r = rng(seed, 102);
    for _ in 0..cases {
        let k = r.random_range(1..=6);
        let a = {
            let rank = r.random_range(1..=k + 1);
            random_psd(&mut r, k, rank, 1.0)
        };
        let b = {
            let rank = r.random_range(0..=k + 1);
            random_psd(&mut r, k, rank, 1.0)
        };
        let gap = {
            let rank = r.random_range(0..=k);
            random_psd(&mut r, k, rank, 1.0)
        };
        let c = GramMatrix::new(b.sym().add(gap.sym()).expect("same dim")).expect("PSD sum");
        let res = (|| {
            if !loewner_leq(&b, &c, 1e-10)? {
                return Ok(f64::INFINITY);
            }
            let scale = 1.0 + trace_product(a.sym(), c.sym())?.abs();
            let e1 = (trace_product(a.sym(), b.sym())? - trace_product(a.sym(), c.sym())?) / scale;
            let e2 = (hs_norm(b.sym()) - hs_norm(c.sym())) / (1.0 + hs_norm(c.sym()));
            Ok(e1.max(e2).max(0.0))
        })();
        tr.case(res, || format!("A={} B={} C={}", show(a.sym()), show(b.sym()), show(c.sym())));
    }
    tr.finish()
}

/// Diagonally dominant matrices with non-negative diagonal are PSD.
pub fn check_gershgorin(seed: u64, cases: usize) -> Check {
    let mut tr = Tracker::new(Suite::Linalg, "gershgorin_certificate", 1e-10);
    let mut r = rng(seed, 103);
    for _ in 0..cases {
        let k = r.random_range(1..=6);
        let off = random_sym(&mut r, k, 1.0);
        let tight = r.random_bool(0.3);
        let margin: Vec<f64> = (0..k).map(|_| if tight { 0.0 } else { r.random::<f64>() }).collect();
        let m = SymMatrix::from_fn(k, |i, j| {
            if i == j {
                (0..k).filter(|&l| l != i).map(|l| off.get(i, l).abs()).sum::<f64>() + margin[i]
            } else {
                off.get(i, j)
            }
        })
        .expect("finite");
        let res = if gershgorin_psd_certificate(&m) { is_psd(&m, 1e-10) } else { Ok(false) };
        tr.holds(res, || format!("M={}", show(&m)));
    }
    tr.finish()
}

/// `sqrt_psd(M)² = M` on random PSD `M`.
pub fn check_sqrt_roundtrip(seed: u64, cases: usize) -> Check {
    let mut tr = Tracker::new(Suite::Linalg, "sqrt_psd_roundtrip", 1e-10);
    let mut r = rng(seed, 104);
    for _ in 0..cases {
        let k = r.random_range(1..=6);
        let m = {
            let rank = r.random_range(0..=k + 1);
            random_psd(&mut r, k, rank, 1.0)
        };
        let res = sqrt_psd(&m).and_then(|s| {
            let sq = s.sym().to_matrix().matmul(&s.sym().to_matrix())?;
            Ok(sq.sub(&m.sym().to_matrix())?.max_abs() / (1.0 + m.sym().max_abs()))
        });
        tr.case(res, || format!("M={}", show(m.sym())));
    }
    tr.finish()
}

/// `A + εP` stays PSD for every `ε` below the perturbation threshold.
pub fn check_perturbation(seed: u64, cases: usize) -> Check {
    let mut tr = Tracker::new(Suite::Linalg, "pd_perturbation_threshold", 0.0);
    let mut r = rng(seed, 105);
    for _ in 0..cases {
        let k = r.random_range(1..=6);
        let base = {
            let rank = r.random_range(0..=k + 1);
            random_psd(&mut r, k, rank, 1.0)
        };
        let a = GramMatrix::new(base.sym().add(&SymMatrix::identity(k).scale(0.1)).expect("same dim")).expect("PD");
        let scale = 1.0 + 10.0 * r.random::<f64>();
        let p = random_sym(&mut r, k, scale);
        let u = 0.999 * r.random::<f64>();
        let res = pd_perturbation_threshold(&a, &p).and_then(|th| is_psd(&a.sym().add(&p.scale(u * th))?, 0.0));
        tr.holds(res, || format!("A={} P={} fraction={u}", show(a.sym()), show(&p)));
    }
    tr.finish()
}

// ---------------------------------------------------------------- model

/// `(∇H_{N,p,t}(σ), σ) = 2H_N(σ) − tp‖σ‖_{p,2}^p`, scaled by `1 + |H_N|`.
pub fn check_gradient_identity(seed: u64, cases: usize) -> Check {
    let mut tr = Tracker::new(Suite::Model, "gradient_euler_identity", 1e-10);
    let mut r = rng(seed, 201);
    for case in 0..cases {
        let n = r.random_range(1..=64);
        let k = r.random_range(1..=3);
        let p = [2.5, 3.0, 4.0][r.random_range(0..3)];
        let t = r.random_range(0.1..2.0);
        let res = (|| {
            let g = sample_disorder_replica(seed, case as u64, n)?;
            let s = SpinConfig::gaussian(n, k, &mut r);
            let grad = grad_hamiltonian(&g, &s, p, t)?;
            let lhs: f64 = grad.data().iter().zip(s.data()).map(|(a, b)| a * b).sum();
            let h = hamiltonian(&g, &s)?;
            let rhs = 2.0 * h - t * p * pnorm_pow_sum(&s, p);
            Ok((lhs - rhs).abs() / (1.0 + h.abs()))
        })();
        tr.case(res, || format!("disorder=(seed {seed}, replica {case}) N={n} kappa={k} p={p} t={t}"));
    }
    tr.finish()
}

/// The overlap correction hits `D_ε` exactly and respects the explicit
/// distortion bound `(κ⁴ tr D + 2κ)√ε`.
pub fn check_overlap_correction(seed: u64, cases: usize) -> Check {
    let mut tr = Tracker::new(Suite::Model, "overlap_correction", 1e-8);
    let mut r = rng(seed, 202);
    for _ in 0..cases {
        let k = r.random_range(1..=4);
        let d = {
            let rank = r.random_range(0..=k + 1);
            random_psd(&mut r, k, rank, 1.0)
        };
        let cap = 1.0 / (k * k) as f64;
        let eps = cap * 10f64.powf(-6.0 * r.random::<f64>()) * 0.999;
        let raw: Vec<f64> = (0..k * k).map(|_| r.random_range(-1.0..1.0)).collect();
        let e = SymMatrix::from_fn(k, |i, j| raw[i.min(j) * k + i.max(j)]).expect("finite");
        let rmat = d.sym().add(&e.scale(0.5 * eps)).expect("same dim");
        let res = correct_overlap_matrix(&rmat, &d, eps).and_then(|c| {
            let ara = c.a.matmul(&rmat.to_matrix())?.matmul(&c.a.transpose())?;
            let exact = ara.sub(&c.d_eps.sym().to_matrix())?.max_abs();
            // The bound violation is reported in the same units as the fit.
            let over = (c.distortion - c.bound).max(0.0);
            Ok(exact.max(if over > 0.0 { f64::INFINITY } else { 0.0 }))
        });
        tr.case(res, || format!("kappa={k} eps={eps:e} D={} R={}", show(d.sym()), show(&rmat)));
    }
    tr.finish()
}

/// Lifting shifts the self-overlap by exactly `εI` and moves the
/// configuration by `ε` per channel.
pub fn check_lift(seed: u64, cases: usize) -> Check {
    let mut tr = Tracker::new(Suite::Model, "lift_to_positive", 1e-10);
    let mut r = rng(seed, 203);
    for case in 0..cases {
        let k = r.random_range(1..=3);
        let n = r.random_range(2 * k + 1..=40);
        let eps = r.random::<f64>();
        let s = SpinConfig::gaussian(n, k, &mut r);
        let res = lift_to_positive(&s, eps, seed ^ case as u64).map(|rho| {
            let shift = self_overlap(&rho).sym().sub(self_overlap(&s).sym()).expect("same dim");
            let err = shift.sub(&SymMatrix::identity(k).scale(eps)).expect("same dim").max_abs();
            let moved: f64 = rho.data().iter().zip(s.data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64;
            err.max((moved - k as f64 * eps).abs())
        });
        tr.case(res, || format!("N={n} kappa={k} eps={eps} sigma={:?}", s.data()));
    }
    tr.finish()
}

/// Solver outputs satisfy their constraint sets.
pub fn check_solver_constraints(seed: u64, cases: usize) -> Check {
    let mut tr = Tracker::new(Suite::Model, "solver_constraints", 1e-8);
    let mut r = rng(seed, 204);
    let cfg = SolverConfig { restarts: 3, max_iter: 2000, seed, ..Default::default() };
    for case in 0..cases {
        let n = r.random_range(4..=16);
        let k = r.random_range(1..=2);
        let p = [1.5, 2.0, 3.0][r.random_range(0..3)];
        let u = r.random_range(0.1..2.0);
        let res = (|| {
            let g = sample_disorder_replica(seed ^ 0xc0de, case as u64, n)?;
            let sphere = maximize_sphere(&g, p, k, &cfg)?;
            let e1 = (norm_p2(&sphere.config, p, false)? - 1.0).abs();
            let pp = p.max(2.5);
            let ball = localized_lagrangian(&g, pp, 1.0, u, k, &cfg)?;
            let nb = norm_p2(&ball.config, 2.0, true)?.powi(2);
            let e2 = (nb - u).max(0.0) / u;
            let d = GramMatrix::scaled_identity(k, u)?;
            let con = constrained_lagrangian(&g, pp, 1.0, &d, &cfg)?;
            let e3 = self_overlap(&con.config).sym().sub(d.sym())?.max_abs();
            Ok(e1.max(e2).max(e3))
        })();
        tr.case(res, || format!("disorder=(seed {}, replica {case}) N={n} kappa={k} p={p} u={u}", seed ^ 0xc0de));
    }
    tr.finish()
}

// ---------------------------------------------------------------- terminals

fn random_lambda(r: &mut ChaCha8Rng, k: usize, scale: f64) -> LagrangeMultiplier {
    let vals = (0..k * (k + 1) / 2).map(|_| scale * r.random_range(-1.0..1.0)).collect();
    LagrangeMultiplier::new(k, vals).expect("finite")
}

fn random_point(r: &mut ChaCha8Rng, k: usize, scale: f64) -> Vec<f64> {
    (0..k).map(|_| scale * normal(r)).collect()
}

/// `f^∞` is non-negative, dominates the objective at random `σ` and its
/// maximizer lies in the certified radius.
pub fn check_terminal_sup(seed: u64, cases: usize) -> Check {
    let mut tr = Tracker::new(Suite::Terminals, "terminal_sup_property", 1e-9);
    let mut r = rng(seed, 301);
    for _ in 0..cases {
        let k = r.random_range(1..=2);
        let p = [2.5, 3.0, 4.0][r.random_range(0..3)];
        let t = r.random_range(0.3..2.0);
        let lam = random_lambda(&mut r, k, 1.0);
        let x = random_point(&mut r, k, 2.0);
        let probes: Vec<Vec<f64>> = (0..16).map(|_| random_point(&mut r, k, 1.5)).collect();
        let res = terminal_inf(&lam, p, t, &x).map(|(v, arg)| {
            let obj = |s: &[f64]| {
                let lin: f64 = s.iter().zip(&x).map(|(a, b)| a * b).sum();
                let nrm = s.iter().map(|a| a * a).sum::<f64>().sqrt();
                lin + lam.quad_form(s) - t * nrm.powf(p)
            };
            let worst_probe = probes.iter().map(|s| obj(s) - v).fold(0.0f64, f64::max);
            let radius = crate::parisi::argmax_radius(&lam, p, t, &x);
            let nrm = arg.iter().map(|a| a * a).sum::<f64>().sqrt();
            let outside = (nrm - radius - 1e-6).max(0.0);
            (-v).max(0.0).max(worst_probe / (1.0 + v.abs())).max(outside)
        });
        tr.case(res, || format!("kappa={k} p={p} t={t} lambda={:?} x={x:?}", lam.values()));
    }
    tr.finish()
}

/// Midpoint convexity of `f^∞` in `x`.
pub fn check_terminal_convexity(seed: u64, cases: usize) -> Check {
    let mut tr = Tracker::new(Suite::Terminals, "terminal_convexity", 1e-8);
    let mut r = rng(seed, 302);
    for _ in 0..cases {
        let k = r.random_range(1..=2);
        let p = [2.5, 3.0, 4.0][r.random_range(0..3)];
        let t = r.random_range(0.3..2.0);
        let lam = random_lambda(&mut r, k, 1.0);
        let a = random_point(&mut r, k, 3.0);
        let b = random_point(&mut r, k, 3.0);
        let m: Vec<f64> = a.iter().zip(&b).map(|(u, v)| 0.5 * (u + v)).collect();
        let res = (|| {
            let fa = terminal_inf(&lam, p, t, &a)?.0;
            let fb = terminal_inf(&lam, p, t, &b)?.0;
            let fm = terminal_inf(&lam, p, t, &m)?.0;
            Ok((fm - 0.5 * (fa + fb)).max(0.0) / (1.0 + fm.abs()))
        })();
        tr.case(res, || format!("kappa={k} p={p} t={t} lambda={:?} a={a:?} b={b:?}", lam.values()));
    }
    tr.finish()
}

/// Growth envelopes: `|f| ≲ 1 + |x|^{p/(p−1)}` and `|f'| ≲ 1 + |x|^{1/(p−1)}`
/// for the scalar terminals. The local log-log growth rates over
/// `|x| ∈ [10⁴, 10⁶]` may exceed the envelope exponents by at most the
/// tolerance, and the envelope ratios stay finite on `|x| ∈ [1, 10⁶]`.
pub fn check_terminal_growth() -> Check {
    let mut tr = Tracker::new(Suite::Terminals, "terminal_growth_envelope", 0.02);
    let xs: Vec<f64> = (0..=48).map(|i| 10f64.powf(i as f64 / 8.0)).collect();
    let tail = 32;
    for &lam in &[0.0, 0.5, -0.5] {
        for &p in &[2.5, 3.0, 4.0] {
            for &temp in &[Temperature::Zero, Temperature::Positive(10.0)] {
                let term = ScalarTerminal { lambda: lam, p, t: 1.0, temperature: temp };
                for sign in [1.0, -1.0] {
                    let res = (|| {
                        let mut fs = Vec::new();
                        let mut ds = Vec::new();
                        for &x in &xs {
                            let x = sign * x;
                            let h = 1e-4 * (1.0 + x.abs());
                            let f = term.value_and_slope(x)?.0;
                            let d = (term.value_and_slope(x + h)?.0 - term.value_and_slope(x - h)?.0) / (2.0 * h);
                            fs.push(f.abs());
                            ds.push(d.abs());
                        }
                        let bounded = fs.iter().zip(&ds).zip(&xs).all(|((f, d), x)| {
                            (f / (1.0 + x.powf(p / (p - 1.0)))).is_finite() && (d / (1.0 + x.powf(1.0 / (p - 1.0)))).is_finite()
                        });
                        if !bounded {
                            return Ok(f64::INFINITY);
                        }
                        let sf = log_log_slope(&xs[tail..], &fs[tail..]) - p / (p - 1.0);
                        let sd = log_log_slope(&xs[tail..], &ds[tail..]) - 1.0 / (p - 1.0);
                        Ok(sf.max(sd).max(0.0))
                    })();
                    tr.case(res, || format!("lambda={lam} p={p} t=1 temperature={temp:?} sign={sign}"));
                }
            }
        }
    }
    tr.finish()
}

/// Both sandwich inequalities between `f^β` and `f^∞` on `x ∈ {0, 1, 3}` for
/// `κ = 1`, `λ ∈ {0, ±0.5}`, `β ∈ {10, 100, 1000}`, `δ ∈ {0.01, 0.1}`, with
/// the quadrature certified to `1e−8`. The error is the worst negative slack.
pub fn check_terminal_comparison() -> Check {
    let mut tr = Tracker::new(Suite::Terminals, "terminal_sandwich", 0.0);
    let grid: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![3.0]];
    let quad = QuadratureSpec::default_for(1);
    for &lam in &[0.0, 0.5, -0.5] {
        for &beta in &[10.0, 100.0, 1000.0] {
            for &delta in &[0.01, 0.1] {
                let res = LagrangeMultiplier::scalar(lam)
                    .and_then(|l| compare_terminals(&l, 3.0, 1.0, beta, delta, &grid, &quad))
                    .map(|rows| {
                        rows.iter()
                            .map(|c| {
                                let (Some(u), Some(l)) = (c.upper_slack, c.lower_slack) else { return f64::INFINITY };
                                let q = if c.quad_rel_error <= 1e-8 { 0.0 } else { f64::INFINITY };
                                (-u).max(-l).max(0.0).max(q)
                            })
                            .fold(0.0, f64::max)
                    });
                tr.case(res, || format!("p=3 t=1 lambda={lam} beta={beta} delta={delta} x=[0,1,3]"));
            }
        }
    }
    tr.finish()
}

fn random_path(r: &mut ChaCha8Rng, k: usize, levels: usize) -> Path {
    let mut q: Vec<f64> = (0..levels).map(|_| r.random::<f64>()).collect();
    q.sort_by(|a, b| a.total_cmp(b));
    q.push(1.0);
    let mut gamma = vec![GramMatrix::zeros(k)];
    let mut acc = SymMatrix::zeros(k);
    for _ in 0..levels {
        let inc = {
            let rank = r.random_range(1..=k);
            random_psd(r, k, rank, 0.7)
        };
        acc = acc.add(inc.sym()).expect("same dim");
        gamma.push(GramMatrix::new(acc.clone()).expect("PSD sum"));
    }
    Path::new(q, gamma).expect("monotone by construction")
}

/// Recursion output is non-decreasing in every layer weight and continuous
/// as a weight drops to zero.
pub fn check_recursion_monotone(seed: u64, cases: usize) -> Check {
    let mut tr = Tracker::new(Suite::Terminals, "recursion_monotone_in_weights", 1e-9);
    let mut r = rng(seed, 303);
    let quad = QuadratureSpec::grid(24);
    for _ in 0..cases {
        let levels = r.random_range(1..=2);
        let path = random_path(&mut r, 1, levels);
        let lam = random_lambda(&mut r, 1, 0.5);
        let mut w: Vec<f64> = (0..levels).map(|_| r.random_range(0.0..2.0)).collect();
        w.sort_by(|a, b| a.total_cmp(b));
        let j = r.random_range(0..levels);
        let bump = r.random_range(0.01..1.0);
        let res = (|| {
            let term = ZeroTemperature { lambda: &lam, p: 3.0, t: 1.0 };
            let base = recursion(&term, &w, &path, &quad)?.value;
            let mut up = w.clone();
            up[j] += bump;
            let raised = recursion(&term, &up, &path, &quad)?.value;
            let mut zero = w.clone();
            zero[j] = 0.0;
            let mut tiny = w.clone();
            tiny[j] = 1e-9;
            let z0 = recursion(&term, &zero, &path, &quad)?.value;
            let z1 = recursion(&term, &tiny, &path, &quad)?.value;
            let drop = (base - raised).max(0.0) / (1.0 + base.abs());
            let jump = (z0 - z1).abs() / (1.0 + z0.abs());
            Ok(drop.max(jump * 1e-3))
        })();
        tr.case(res, || format!("path q={:?} gamma={:?} lambda={:?} weights={w:?} layer={j} bump={bump}", path.knots(), path.values().iter().map(|g| g.get(0, 0)).collect::<Vec<_>>(), lam.values()));
    }
    tr.finish()
}

/// Closed-form integral term against the trapezoid rule with `10⁴` points
/// per knot interval.
pub fn check_integral_term(seed: u64, cases: usize) -> Check {
    let mut tr = Tracker::new(Suite::Terminals, "integral_term_closed_form", 1e-6);
    let mut r = rng(seed, 304);
    for _ in 0..cases {
        let k = r.random_range(1..=3);
        let levels = r.random_range(1..=4);
        let path = random_path(&mut r, k, levels);
        let mut w: Vec<f64> = (0..=levels).map(|_| r.random_range(0.0..3.0)).collect();
        w.sort_by(|a, b| a.total_cmp(b));
        let res = DiscreteMeasure::finite(w.clone()).and_then(|z| {
            let exact = integral_term(&z, &path)?;
            let q = path.knots();
            let mut numeric = 0.0;
            let mut lo = 0.0;
            for j in 1..=path.r() {
                let hi = q[j];
                if hi > lo {
                    let slope = path.slope(j - 1)?;
                    let m = 10_000;
                    let h = (hi - lo) / m as f64;
                    for i in 0..=m {
                        let s = lo + i as f64 * h;
                        let f: f64 = path.at(s).data().iter().zip(slope.data()).map(|(a, b)| a * b).sum::<f64>() * w[j - 1];
                        numeric += if i == 0 || i == m { 0.5 * f * h } else { f * h };
                    }
                }
                lo = hi;
            }
            Ok((exact - numeric).abs() / (1.0 + exact.abs()))
        });
        tr.case(res, || format!("kappa={k} q={:?} weights={w:?}", path.knots()));
    }
    tr.finish()
}

// ---------------------------------------------------------------- pde

/// Constant and heat-equation terminals, where the residual is known exactly.
pub fn check_pde_closed_forms() -> Check {
    let mut tr = Tracker::new(Suite::Pde, "pde_closed_forms", 1e-6);
    let mesh = Mesh { s_lo: 0.0, s_hi: 0.9, x_lo: -3.0, x_hi: 3.0, ns: 41, nx: 41 };
    for &(m, slope) in &[(2.0, 1.0), (0.5, 0.3)] {
        tr.case(pde_residual_with(|_| Ok((1.5, 0.0)), m, slope, 1.0, &mesh, 32).map(|r| r.residual), || {
            format!("constant terminal, weight={m}, slope={slope}")
        });
    }
    for &slope in &[0.7, 2.0] {
        tr.case(pde_residual_with(|x| Ok((0.5 * x * x, x)), 0.0, slope, 1.0, &mesh, 32).map(|r| r.residual), || {
            format!("quadratic terminal, zero weight, slope={slope}")
        });
    }
    tr.finish()
}

/// Residual of the full positive-temperature terminal on an `n × n` mesh is
/// below `1e−3` and at least halves under refinement.
pub fn check_pde_full(n: usize) -> Check {
    let mut tr = Tracker::new(Suite::Pde, "pde_full_terminal", 1e-3);
    let path = Path::single_level(GramMatrix::identity(1));
    for &(lam, beta, alpha, nodes) in &[(0.2, 5.0, 0.3, 48), (0.0, 10.0, 0.1, 128)] {
        let term = ScalarTerminal { lambda: lam, p: 3.0, t: 1.0, temperature: Temperature::Positive(beta) };
        let res = DiscreteMeasure::new(vec![alpha, 1.0], Flavor::Probability).and_then(|w| {
            let rep = pde_residual(&term, &w, &path, &Mesh::default_for(&path, n), nodes)?;
            Ok(if rep.ratio <= 0.5 { rep.residual } else { f64::INFINITY })
        });
        tr.case(res, || format!("lambda={lam} beta={beta} alpha_0={alpha} p=3 t=1 D=1 mesh={n}x{n} nodes={nodes}"));
    }
    tr.finish()
}

// ---------------------------------------------------------------- ac

/// Stochastic-control representation checks at `κ = 1`, `r = 1`, `D = 1`,
/// `λ = 0`, `p = 3`, `t = 1`, `β = 10`. Errors are measured in standard
/// errors; the tolerance is four.
pub fn check_ac(seed: u64, n_paths: usize) -> Vec<Check> {
    let path = Path::single_level(GramMatrix::identity(1));
    let beta = 10.0;
    let term = ScalarTerminal { lambda: 0.0, p: 3.0, t: 1.0, temperature: Temperature::Positive(beta) };
    let dt = 1e-3;
    let nodes = 64;
    let mut optimal = Tracker::new(Suite::Ac, "optimal_control_matches_root", 4.0);
    let mut zero = Tracker::new(Suite::Ac, "zero_control_lower_bound", 4.0);
    let mut flat = Tracker::new(Suite::Ac, "zero_weight_is_expectation", 4.0);
    let ctx = |what: &str, a: f64| format!("{what}: lambda=0 p=3 t=1 beta={beta} D=1 alpha_0={a} paths={n_paths} dt={dt} seed={seed}");
    for &a in &[0.05, 0.1] {
        let res = DiscreteMeasure::new(vec![a, 1.0], Flavor::Probability).and_then(|w| {
            let root = root_value_scalar(&term, &w, &path)?;
            let opt = ac_simulate(&term, &w, &path, Control::Optimal, n_paths, dt, nodes, seed)?;
            let none = ac_simulate(&term, &w, &path, Control::None, n_paths, dt, nodes, seed ^ 1)?;
            Ok(((opt.estimate - root).abs() / opt.stderr, (none.estimate - root) / none.stderr))
        });
        match res {
            Ok((e_opt, e_none)) => {
                optimal.case(Ok(e_opt), || ctx("optimal", a));
                zero.case(Ok(e_none.max(0.0)), || ctx("zero control", a));
            }
            Err(e) => {
                optimal.case(Err(e.clone()), || ctx("optimal", a));
                zero.case(Err(e), || ctx("zero control", a));
            }
        }
    }
    // α ≡ 0: no drift; compare with direct quadrature of E f(√2 z).
    let res = DiscreteMeasure::new(vec![0.0, 1.0], Flavor::Probability).and_then(|w| {
        let rep = ac_simulate(&term, &w, &path, Control::Optimal, n_paths, dt, nodes, seed ^ 2)?;
        let lam = LagrangeMultiplier::zeros(1);
        let direct = terminal_expectation(&lam, beta, 2.0)?;
        let moment = moment_diagnostic(&rep, 3.0);
        // Itô isometry: E X(1)² = 2 tr D; its sample sd is about √8 / √paths.
        let ito = (moment.second_moment - 2.0).abs() / (8f64.sqrt() / (rep.paths as f64).sqrt());
        Ok(((rep.estimate - direct).abs() / rep.stderr).max(ito))
    });
    flat.case(res, || ctx("no drift", 0.0));
    vec![optimal.finish(), zero.finish(), flat.finish()]
}

/// `E f^β(z)` for `z ~ N(0, var)` by 64-node Gauss–Hermite.
fn terminal_expectation(lam: &LagrangeMultiplier, beta: f64, var: f64) -> Result<f64> {
    let rule = crate::quadrature::gauss_hermite(64);
    let quad = QuadratureSpec::default_for(1);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&z, &w)| Ok(w * terminal_beta(lam, beta, 3.0, 1.0, &[var.sqrt() * z], &quad)?))
        .sum()
}

// ---------------------------------------------------------------- asymptotics

pub fn check_asymptotics() -> Check {
    let mut tr = Tracker::new(Suite::Asymptotics, "closed_forms", 1e-10);
    let mut df = 1.0;
    for k in 1..=5 {
        df *= (2 * k - 1) as f64;
        tr.case(gaussian_abs_moment(2.0 * k as f64).map(|m| (m - df).abs() / df), || format!("moment order {}", 2 * k));
    }
    tr.case(limit_constant(4.0 / 3.0).map(|l| (l.value().unwrap_or(f64::NAN) - 0.5 * 3f64.powf(0.25)).abs()), || {
        "limit constant at p=4/3".into()
    });
    tr.case(limit_constant(2.0).map(|l| (l.value().unwrap_or(f64::NAN) - 2f64.sqrt()).abs()), || "limit constant at p=2".into());
    // Continuity up to p → 2⁻ at the sub-quadratic scaling.
    tr.case(
        sub_quadratic_constant(2.0 - 1e-6).map(|c| ((c - std::f64::consts::FRAC_1_SQRT_2).abs() - 1e-4).max(0.0)),
        || "sub-quadratic constant at p=2-1e-6".into(),
    );
    let mut r = rng(0, 601);
    for _ in 0..200 {
        let p = r.random_range(2.1..8.0);
        let t = r.random_range(0.1..5.0);
        let l = r.random_range(0.01..10.0);
        let res = gse_transform(l, p, t).and_then(|g| gse_transform_inverse(g, p, t)).map(|back| (back - l).abs() / l);
        tr.case(res, || format!("transform round trip p={p} t={t} L={l}"));
    }
    tr.finish()
}

/// `λ_max(Ḡ_N) / 2√N` over `replicas` disorders lies in `[0.93, 1.05]`.
pub fn check_goe_edge(seed: u64, n: usize, replicas: usize) -> Check {
    let mut tr = Tracker::new(Suite::Asymptotics, "goe_edge_band", 0.0);
    for rep in 0..replicas {
        let res = sample_disorder_replica(seed, rep as u64, n).and_then(|g: Disorder| {
            let l = lambda_max_symmetric(&goe(&g), 1e-10, 50_000)? / goe_edge_reference(n);
            Ok(if (0.93..=1.05).contains(&l) { 0.0 } else { (l - 1.0).abs() })
        });
        tr.case(res, || format!("disorder=(seed {seed}, replica {rep}) N={n}"));
    }
    tr.finish()
}

// ---------------------------------------------------------------- runners

/// All checks of one suite at default sizes.
pub fn run_suite(suite: Suite, seed: u64) -> Vec<Check> {
    match suite {
        Suite::Linalg => vec![
            check_hs_trace(seed, 1000),
            check_loewner_trace(seed, 1000),
            check_gershgorin(seed, 1000),
            check_sqrt_roundtrip(seed, 1000),
            check_perturbation(seed, 1000),
        ],
        Suite::Model => vec![
            check_gradient_identity(seed, 1000),
            check_overlap_correction(seed, 1000),
            check_lift(seed, 200),
            check_solver_constraints(seed, 10),
        ],
        Suite::Terminals => vec![
            check_terminal_sup(seed, 200),
            check_terminal_convexity(seed, 200),
            check_terminal_growth(),
            check_terminal_comparison(),
            check_recursion_monotone(seed, 20),
            check_integral_term(seed, 20),
        ],
        Suite::Pde => vec![check_pde_closed_forms(), check_pde_full(200)],
        Suite::Ac => check_ac(seed, 100_000),
        Suite::Asymptotics => vec![check_asymptotics(), check_goe_edge(seed, 1024, 8)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn tracker_keeps_first_counterexample() {
        let mut tr = Tracker::new(Suite::Linalg, "demo", 1.0);
        tr.case(Ok(0.5), || "a".into());
        tr.case(Ok(2.0), || "b".into());
        tr.case(Err(Error::Numeric("x".into())), || "c".into());
        let c = tr.finish();
        assert!(!c.passed);
        assert_eq!(c.cases, 3);
        assert_eq!(c.counterexample.as_deref(), Some("b"));
        assert_eq!(c.worst, f64::INFINITY);
    }

    #[test]
    fn fast_checks_pass() {
        for c in [check_hs_trace(1, 100), check_gershgorin(1, 100), check_gradient_identity(1, 20), check_overlap_correction(1, 100)] {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn broken_property_is_caught() {
        // A Loewner check on reversed arguments must fail somewhere.
        let mut tr = Tracker::new(Suite::Linalg, "reversed", 0.0);
        let mut r = rng(0, 1);
        for _ in 0..20 {
            let b = random_psd(&mut r, 3, 2, 1.0);
            let c = GramMatrix::new(b.sym().add(&SymMatrix::identity(3)).unwrap()).unwrap();
            tr.holds(loewner_leq(&c, &b, 1e-10), || "reversed".into());
        }
        assert!(!tr.finish().passed);
    }
}
