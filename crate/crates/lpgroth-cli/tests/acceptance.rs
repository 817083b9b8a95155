//! End-to-end acceptance criteria. Each test prints one `PASS`/`FAIL` line
//! to stderr (bypassing output capture) and then asserts.

use lpgroth::asymptotics::sub_quadratic_constant;
use lpgroth::linalg::GramMatrix;
use lpgroth::model::sample_disorder_replica;
use lpgroth::parisi::{
    log_log_slope, minimize_parisi, parisi_beta, parisi_inf, recursion, terminal_inf, DiscreteMeasure, LagrangeMultiplier, MinimizeOptions, Mode,
    Path, QuadratureSpec, ZeroTemperature,
};
use lpgroth::rng::{stream, Purpose};
use lpgroth::solvers::{constrained_lagrangian, maximize_sphere, scalar_vector_equality_check, SolverConfig};
use lpgroth::verify::{self, Check};
use lpgroth_cli::commands::{ground_state, lagrangian};
use lpgroth_cli::config::ExperimentConfig;
use lpgroth_cli::record::{mean_stderr, read_csv, ResultRecord};
use rand::Rng;
use rand_distr::StandardNormal;
use std::io::Write;
use std::time::Instant;

const SEED: u64 = 20240611;

fn report(criterion: u32, title: &str, passed: bool, detail: &str, start: Instant) {
    let line = format!(
        "{} criterion {criterion:>2} ({title}): {detail} [{:.1}s]\n",
        if passed { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn checks_pass(checks: &[Check]) -> (bool, String) {
    let ok = checks.iter().all(|c| c.passed);
    let detail = checks.iter().map(|c| c.to_string().replace('\n', " ")).collect::<Vec<_>>().join("; ");
    (ok, detail)
}

fn replica_means(records: &[ResultRecord], quantity: &str) -> Vec<ResultRecord> {
    records.iter().filter(|r| r.quantity == quantity).cloned().collect()
}

#[test]
fn criterion_01_sub_quadratic_limit() {
    let start = Instant::now();
    let limit = sub_quadratic_constant(1.5).unwrap();
    let cfg = ExperimentConfig {
        seed: SEED,
        n_grid: vec![256, 1024, 4096],
        p: vec![1.5],
        kappa: vec![1, 2],
        replicas: 32,
        restarts: 1,
        max_iter: 200,
        ..Default::default()
    };
    let out = ground_state(&cfg).unwrap();
    let means = replica_means(&out.records, "scaled_gp_mean");
    let mut ok = true;
    let mut detail = format!("limit {limit:.4};");
    for kappa in [1, 2] {
        let devs: Vec<f64> = cfg
            .n_grid
            .iter()
            .map(|&n| {
                let m = means.iter().find(|r| r.n == Some(n) && r.kappa == Some(kappa)).unwrap();
                (m.value - limit).abs() / limit
            })
            .collect();
        ok &= devs[2] <= 0.15 && devs.windows(2).all(|w| w[1] < w[0]);
        detail += &format!(" kappa={kappa} relative deviations {:.4}/{:.4}/{:.4};", devs[0], devs[1], devs[2]);
    }
    report(1, "scaled sphere maximum for p = 1.5", ok, &detail, start);
    assert!(ok, "{detail}");
}

#[test]
fn criterion_02_quadratic_limit() {
    let start = Instant::now();
    let cfg = ExperimentConfig { seed: SEED, n_grid: vec![2048], p: vec![2.0], replicas: 8, ..Default::default() };
    let out = ground_state(&cfg).unwrap();
    let m = &replica_means(&out.records, "scaled_gp_mean")[0];
    let dev = (m.value - std::f64::consts::SQRT_2).abs() / std::f64::consts::SQRT_2;
    let ok = dev <= 0.05;
    report(2, "top eigenvalue over sqrt(N) at N = 2048", ok, &format!("mean {:.5}, relative deviation {dev:.4}", m.value), start);
    assert!(ok);
}

/// `max uᵀAu / ‖u‖_p²` over a spherical grid of directions in ℝ³, then
/// refined by a shrinking compass search in the angles.
fn scalar_brute_force(a: &[f64], p: f64) -> f64 {
    let f = |th: f64, ph: f64| {
        let u = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
        let q: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| a[i * 3 + j] * u[i] * u[j]).sum();
        let np = u.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p);
        q / (np * np)
    };
    let (nt, np) = (400, 800);
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..=nt {
        for j in 0..np {
            let (th, ph) = (std::f64::consts::PI * i as f64 / nt as f64, 2.0 * std::f64::consts::PI * j as f64 / np as f64);
            let v = f(th, ph);
            if v > best.0 {
                best = (v, th, ph);
            }
        }
    }
    let mut step = 0.01;
    while step > 1e-12 {
        let mut moved = false;
        for (dt, dp) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let v = f(best.1 + dt, best.2 + dp);
            if v > best.0 {
                best = (v, best.1 + dt, best.2 + dp);
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    best.0
}

/// Random-perturbation hill climb on the `ℓ^{p,2}` sphere from `s`.
fn vector_polish(a: &[f64], n: usize, kappa: usize, p: f64, s: &[f64], seed: u64) -> f64 {
    let value = |s: &[f64]| {
        let norm = (0..n).map(|i| s[i * kappa..(i + 1) * kappa].iter().map(|x| x * x).sum::<f64>().sqrt().powf(p)).sum::<f64>().powf(1.0 / p);
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += a[i * n + j] * (0..kappa).map(|k| s[i * kappa + k] * s[j * kappa + k]).sum::<f64>();
            }
        }
        q / (norm * norm)
    };
    let mut rng = stream(seed, Purpose::Verify, 3);
    let mut cur = s.to_vec();
    let mut best = value(&cur);
    let mut step = 0.05;
    for it in 0..20_000 {
        let cand: Vec<f64> = cur.iter().map(|x| x + step * rng.sample::<f64, _>(StandardNormal)).collect();
        let v = value(&cand);
        if v > best {
            best = v;
            cur = cand;
        }
        if it % 2000 == 1999 {
            step *= 0.3;
        }
    }
    best
}

#[test]
fn criterion_03_scalar_vector_equality() {
    let start = Instant::now();
    let (n, p, kappa) = (3, 1.5, 2);
    let cfg = SolverConfig { restarts: 64, seed: SEED, ..Default::default() };
    let mut worst = 0.0f64;
    for i in 0..20 {
        let g = sample_disorder_replica(SEED, i, n).unwrap();
        let rep = scalar_vector_equality_check(&g, p, kappa, &cfg).unwrap();
        let scalar = scalar_brute_force(g.couplings(), p);
        let sol = maximize_sphere(&g, p, kappa, &cfg).unwrap();
        let vector = vector_polish(g.couplings(), n, kappa, p, sol.config.data(), i).max(rep.vector);
        let scale = scalar.abs();
        worst = worst.max((vector - scalar).abs() / scale).max((rep.scalar - scalar).abs() / scale);
    }
    let ok = worst <= 1e-3;
    report(3, "scalar and vector sphere maxima agree", ok, &format!("20 matrices, worst relative gap {worst:.2e} (tol 1e-3)"), start);
    assert!(ok);
}

#[test]
fn criterion_04_gradient_identity() {
    let start = Instant::now();
    let c = verify::check_gradient_identity(SEED, 1000);
    report(4, "gradient identity", c.passed, &c.to_string().replace('\n', " "), start);
    assert!(c.passed);
}

#[test]
fn criterion_05_derivative_relation_and_transform() {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        seed: SEED,
        n_grid: vec![32],
        p: vec![3.0],
        kappa: vec![1],
        t_grid: vec![0.5, 0.75, 1.0, 1.5, 2.0],
        replicas: 8,
        ..Default::default()
    };
    let out = lagrangian(&cfg).unwrap();
    let means = replica_means(&out.records, "lagrangian_mean");
    let worst_residual = means.iter().map(|r| r.residual.unwrap()).fold(0.0, f64::max);
    let spread = replica_means(&out.records, "transform_spread")[0].value;
    let ok = worst_residual <= 1e-3 && spread < 0.01;
    report(
        5,
        "derivative relation and t-independent transform",
        ok,
        &format!("N=32, 8 replicas: worst mean residual {worst_residual:.2e} (tol 1e-3), transform spread {spread:.2e} (tol 1e-2)"),
        start,
    );
    assert!(ok);
}

#[test]
fn criterion_06_overlap_correction() {
    let start = Instant::now();
    let c = verify::check_overlap_correction(SEED, 1000);
    report(6, "overlap correction construction", c.passed, &c.to_string().replace('\n', " "), start);
    assert!(c.passed);
}

#[test]
fn criterion_07_terminal_sandwich() {
    let start = Instant::now();
    let c = verify::check_terminal_comparison();
    report(7, "terminal condition inequalities", c.passed, &c.to_string().replace('\n', " "), start);
    assert!(c.passed);
}

/// Plain nested Monte Carlo for `Y_0` at `κ = 1` with one or two levels:
/// `m_outer` outer draws, each with `m_inner` inner draws for `r = 2`.
/// The standard error is the delta-method error of the outer average.
fn nested_mc(lam: f64, zeta: &[f64], path: &Path, m_outer: usize, m_inner: usize, seed: u64) -> (f64, f64) {
    let l = LagrangeMultiplier::scalar(lam).unwrap();
    let term = |x: f64| terminal_inf(&l, 3.0, 1.0, &[x]).unwrap().0;
    let sds: Vec<f64> = (0..path.r()).map(|j| (2.0 * path.increment(j).unwrap().get(0, 0)).sqrt()).collect();
    let soft = |vals: &[f64], z: f64| -> f64 {
        let n = vals.len() as f64;
        if z == 0.0 {
            return vals.iter().sum::<f64>() / n;
        }
        let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + (vals.iter().map(|v| (z * (v - m)).exp()).sum::<f64>() / n).ln() / z
    };
    let mut rng = stream(seed, Purpose::Verify, 0x8e57);
    let outer: Vec<f64> = (0..m_outer)
        .map(|_| {
            let x1 = sds[0] * rng.sample::<f64, _>(StandardNormal);
            if path.r() == 1 {
                return term(x1);
            }
            let inner: Vec<f64> = (0..m_inner).map(|_| term(x1 + sds[1] * rng.sample::<f64, _>(StandardNormal))).collect();
            soft(&inner, zeta[1])
        })
        .collect();
    let z = zeta[0];
    let value = soft(&outer, z);
    let n = outer.len() as f64;
    let se = if z == 0.0 {
        mean_stderr(&outer).1.unwrap()
    } else {
        let m = outer.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = outer.iter().map(|v| (z * (v - m)).exp()).collect();
        let (mean, se_e) = mean_stderr(&e);
        let _ = n;
        se_e.unwrap() / (z * mean)
    };
    (value, se)
}

#[test]
fn criterion_08_recursion_matches_nested_mc() {
    let start = Instant::now();
    let quad = QuadratureSpec::default_for(1);
    let one = |d: f64| Path::single_level(GramMatrix::scaled_identity(1, d).unwrap());
    let two = |q: f64, g1: f64, d: f64| {
        Path::new(vec![0.0, q, 1.0], vec![GramMatrix::zeros(1), GramMatrix::scaled_identity(1, g1).unwrap(), GramMatrix::scaled_identity(1, d).unwrap()])
            .unwrap()
    };
    let cases: Vec<(f64, Vec<f64>, Path)> = vec![
        (0.0, vec![1.0, 1.0], one(1.0)),
        (0.5, vec![0.5, 0.5], one(1.0)),
        (-0.5, vec![2.0, 2.0], one(0.5)),
        (0.3, vec![0.0, 0.0], one(2.0)),
        (-0.2, vec![1.5, 1.5], one(1.5)),
        (0.0, vec![0.5, 1.5, 1.5], two(0.5, 0.5, 1.0)),
        (0.5, vec![0.2, 1.0, 1.0], two(0.3, 0.4, 1.0)),
        (-0.5, vec![1.0, 2.0, 2.0], two(0.5, 0.25, 0.5)),
        (0.3, vec![0.0, 1.0, 1.0], two(0.6, 1.2, 2.0)),
        (-0.2, vec![0.8, 0.8, 0.8], two(0.5, 0.7, 1.5)),
    ];
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for (i, (lam, zeta, path)) in cases.iter().enumerate() {
        let l = LagrangeMultiplier::scalar(*lam).unwrap();
        let rec = recursion(&ZeroTemperature { lambda: &l, p: 3.0, t: 1.0 }, zeta, path, &quad).unwrap().value;
        let (mc, se) = if path.r() == 1 { nested_mc(*lam, zeta, path, 1_000_000, 1, SEED + i as u64) } else { nested_mc(*lam, zeta, path, 1000, 1000, SEED + i as u64) };
        let z = (rec - mc).abs() / se;
        worst = worst.max(z);
        detail += &format!(" r={} {:.2}σ;", path.r(), z);
    }
    let ok = worst <= 4.0;
    report(8, "recursion against nested Monte Carlo", ok, &format!("10 triples, 10^6 samples each, worst {worst:.2}σ (tol 4σ):{detail}"), start);
    assert!(ok);
}

#[test]
fn criterion_09_pde_residual() {
    let start = Instant::now();
    let c = verify::check_pde_full(200);
    report(9, "PDE residual on a 200x200 mesh", c.passed, &c.to_string().replace('\n', " "), start);
    assert!(c.passed);
}

#[test]
fn criterion_10_control_representation() {
    let start = Instant::now();
    let checks = verify::check_ac(SEED, 100_000);
    let (ok, detail) = checks_pass(&checks);
    report(10, "stochastic control representation", ok, &detail, start);
    assert!(ok);
}

#[test]
fn criterion_11_functional_bounds_finite_lagrangian() {
    let start = Instant::now();
    let d = GramMatrix::identity(1);
    let opts = MinimizeOptions { seed: SEED, ..MinimizeOptions::new(1) };
    let par = (1..=2).map(|r| minimize_parisi(&d, 3.0, 1.0, r, Mode::Inf, &opts).unwrap().value).fold(f64::INFINITY, f64::min);
    let cfg = SolverConfig { restarts: 8, ..Default::default() };
    let stats: Vec<(f64, f64)> = [32usize, 128]
        .iter()
        .map(|&n| {
            let vals: Vec<f64> = (0..32)
                .map(|k| {
                    let g = sample_disorder_replica(SEED, k, n).unwrap();
                    constrained_lagrangian(&g, 3.0, 1.0, &d, &SolverConfig { seed: SEED + k, ..cfg.clone() }).unwrap().value
                })
                .collect();
            let (m, se) = mean_stderr(&vals);
            (m, se.unwrap())
        })
        .collect();
    let (m32, _) = stats[0];
    let (m128, se128) = stats[1];
    let ok = par >= m128 - 3.0 * se128 && (par - m128).abs() < (par - m32).abs();
    report(
        11,
        "minimized functional bounds the finite-N Lagrangian",
        ok,
        &format!("functional {par:.5}; N=32 mean {m32:.5}; N=128 mean {m128:.5} ± {se128:.5}"),
        start,
    );
    assert!(ok);
}

#[test]
fn criterion_12_temperature_correspondence() {
    let start = Instant::now();
    let quad = QuadratureSpec::default_for(1);
    let path1 = Path::single_level(GramMatrix::identity(1));
    let path2 =
        Path::new(vec![0.0, 0.5, 1.0], vec![GramMatrix::zeros(1), GramMatrix::scaled_identity(1, 0.4).unwrap(), GramMatrix::identity(1)]).unwrap();
    let triples = [(0.0, vec![1.0, 1.0], &path1), (0.5, vec![2.0, 2.0], &path1), (-0.3, vec![0.5, 2.0, 2.0], &path2)];
    let betas = [10.0, 100.0, 1000.0];
    let mut ok = true;
    let mut detail = String::new();
    for (lam, z, path) in &triples {
        let l = LagrangeMultiplier::scalar(*lam).unwrap();
        let zeta = DiscreteMeasure::finite(z.clone()).unwrap();
        let zero = parisi_inf(&l, 3.0, 1.0, &zeta, path, &quad).unwrap().value;
        let gaps: Vec<f64> = betas
            .iter()
            .map(|&b| {
                let alpha = DiscreteMeasure::probability_from_finite(&zeta, b).unwrap();
                (parisi_beta(&l, b, 3.0, 1.0, &alpha, path, &quad).unwrap().value - zero).abs()
            })
            .collect();
        let slope = log_log_slope(&betas, &gaps);
        ok &= gaps.windows(2).all(|w| w[1] < w[0]) && (-1.3..=-0.7).contains(&slope);
        detail += &format!(" lambda={lam} r={} slope {slope:.3};", path.r());
    }
    report(12, "positive-temperature gap decay", ok, &format!("beta in 10..1000:{detail} (range [-1.3, -0.7])"), start);
    assert!(ok);
}

#[test]
fn criterion_13_matrix_inequalities() {
    let start = Instant::now();
    let checks = [
        verify::check_hs_trace(SEED, 1000),
        verify::check_loewner_trace(SEED, 1000),
        verify::check_gershgorin(SEED, 1000),
        verify::check_perturbation(SEED, 1000),
    ];
    let (ok, detail) = checks_pass(&checks);
    report(13, "matrix inequality suites", ok, &detail, start);
    assert!(ok);
}

fn run_cli(args: &[&str], out: &std::path::Path) -> Vec<u8> {
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_lpgroth"))
        .args(args)
        .arg("--out")
        .arg(out)
        .status()
        .unwrap();
    assert!(status.success(), "{args:?} exited with {status}");
    std::fs::read(out).unwrap()
}

#[test]
fn criterion_14_deterministic_csv() {
    let start = Instant::now();
    let dir = std::env::temp_dir().join(format!("lpgroth-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let runs: [&[&str]; 3] = [
        &["ground-state", "--n-grid", "16,48", "--p", "1.5,3", "--kappa", "1,2", "--replicas", "3", "--restarts", "2", "--seed", "9", "--workers", "2"],
        &["lagrangian", "--n-grid", "12", "--t-grid", "0.5,1,2", "--replicas", "2", "--restarts", "2", "--seed", "9", "--workers", "2"],
        &["parisi", "min", "--r-max", "2", "--seed", "9", "--workers", "2"],
    ];
    let mut ok = true;
    let mut rows = 0;
    for (i, args) in runs.iter().enumerate() {
        let a = run_cli(args, &dir.join(format!("a{i}.csv")));
        let b = run_cli(args, &dir.join(format!("b{i}.csv")));
        ok &= a == b;
        let parsed = read_csv(a.as_slice()).unwrap();
        let mut again = Vec::new();
        lpgroth_cli::record::write_csv(&parsed, &mut again).unwrap();
        ok &= again == a;
        rows += parsed.len();
    }
    std::fs::remove_dir_all(&dir).unwrap();
    report(14, "bit-identical CSV across runs", ok, &format!("3 subcommands run twice, {rows} rows, all parse back"), start);
    assert!(ok);
}
