//! Gaussian quadrature rules and adaptive Gauss–Kronrod integration.

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Nodes and weights; for Hermite rules the weights sum to one.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Golub–Welsch on a symmetric tridiagonal Jacobi matrix with zero diagonal.
fn golub_welsch(off: &[f64], mass: f64) -> Rule {
    let n = off.len() + 1;
    let j = SymMatrix::from_fn(n, |a, b| {
        if a + 1 == b {
            off[a]
        } else if b + 1 == a {
            off[b]
        } else {
            0.0
        }
    })
    .expect("finite");
    let e = j.eigen();
    let mut pairs: Vec<(f64, f64)> =
        (0..n).map(|k| (e.values[k], mass * e.vectors.get(0, k).powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrize to remove round-off asymmetry.
    for k in 0..n / 2 {
        let (a, b) = (pairs[k], pairs[n - 1 - k]);
        let x = 0.5 * (b.0 - a.0);
        let w = 0.5 * (a.1 + b.1);
        pairs[k] = (-x, w);
        pairs[n - 1 - k] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1 * mass / total).collect(),
    }
}

fn cached(kind: u8, n: usize, build: impl FnOnce() -> Rule) -> Arc<Rule> {
    static CACHE: OnceLock<Mutex<HashMap<(u8, usize), Arc<Rule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().expect("cache lock").get(&(kind, n)) {
        return r.clone();
    }
    let rule = Arc::new(build());
    cache.lock().expect("cache lock").insert((kind, n), rule.clone());
    rule
}

/// `n`-point rule for `E f(w)`, `w ~ N(0, 1)`.
pub fn gauss_hermite(n: usize) -> Arc<Rule> {
    assert!(n >= 1);
    cached(0, n, || {
        if n == 1 {
            return Rule { nodes: vec![0.0], weights: vec![1.0] };
        }
        let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
        let rough = golub_welsch(&off, 1.0);
        // Eigenvector weights are only accurate in absolute terms; the far
        // tail needs relative accuracy, so polish each node by Newton on the
        // orthonormal recurrence and take Christoffel weights `1 / Σ ψ_k²`.
        let mut nodes = rough.nodes;
        let mut weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (psi, prev, _) = hermite_orthonormal(n, *x);
                *x -= psi / ((n as f64).sqrt() * prev);
            }
            weights.push(1.0 / hermite_orthonormal(n, *x).2);
        }
        for k in 0..n / 2 {
            let x = 0.5 * (nodes[n - 1 - k] - nodes[k]);
            nodes[k] = -x;
            nodes[n - 1 - k] = x;
            let w = 0.5 * (weights[k] + weights[n - 1 - k]);
            weights[k] = w;
            weights[n - 1 - k] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        let total: f64 = weights.iter().sum();
        Rule { nodes, weights: weights.into_iter().map(|w| w / total).collect() }
    })
}

/// `(ψ_n(x), ψ_{n−1}(x), Σ_{k<n} ψ_k(x)²)` for the Hermite polynomials
/// orthonormal under the standard Gaussian.
fn hermite_orthonormal(n: usize, x: f64) -> (f64, f64, f64) {
    let (mut prev, mut cur) = (0.0, 1.0);
    let mut sum = 0.0;
    for k in 0..n {
        sum += cur * cur;
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev, sum)
}

/// `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Arc<Rule> {
    assert!(n >= 1);
    cached(1, n, || {
        if n == 1 {
            return Rule { nodes: vec![0.0], weights: vec![2.0] };
        }
        let off: Vec<f64> = (1..n)
            .map(|k| {
                let k = k as f64;
                k / (4.0 * k * k - 1.0).sqrt()
            })
            .collect();
        golub_welsch(&off, 2.0)
    })
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integration of `f` over the consecutive
/// intervals given by `breaks`. Returns the value and an error estimate.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<(f64, f64)> {
    let mut heap: Vec<(f64, f64, f64, f64)> = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (v, e) = gk15(&mut f, w[0], w[1]);
            heap.push((w[0], w[1], v, e));
        }
    }
    loop {
        let total: f64 = heap.iter().map(|x| x.2).sum();
        let err: f64 = heap.iter().map(|x| x.3).sum();
        if !total.is_finite() {
            return Err(Error::Numeric("non-finite integrand".into()));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok((total, err));
        }
        if heap.len() >= max_intervals {
            return Err(Error::Numeric(format!(
                "adaptive quadrature stalled at {} intervals (value {total:e}, error {err:e})",
                heap.len()
            )));
        }
        let (idx, _) = heap
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .expect("non-empty");
        let (a, b, _, _) = heap.swap_remove(idx);
        let m = 0.5 * (a + b);
        if !(m > a && m < b) {
            return Err(Error::Numeric("interval cannot be bisected further".into()));
        }
        let (v1, e1) = gk15(&mut f, a, m);
        let (v2, e2) = gk15(&mut f, m, b);
        heap.push((a, m, v1, e1));
        heap.push((m, b, v2, e2));
    }
}
