use super::terminal::{terminal_beta, terminal_inf, truncated_normal};
use super::types::{LagrangeMultiplier, Path, QuadMode, QuadratureSpec};
use crate::error::{Error, Result};
use crate::linalg::sqrt_psd;
use crate::quadrature::gauss_hermite;
use crate::rng::{stream, Purpose};
use rayon::prelude::*;

/// Innermost function of the recursion.
pub trait Terminal: Sync {
    fn kappa(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<f64>;
}

pub struct ZeroTemperature<'a> {
    pub lambda: &'a LagrangeMultiplier,
    pub p: f64,
    pub t: f64,
}

impl Terminal for ZeroTemperature<'_> {
    fn kappa(&self) -> usize {
        self.lambda.kappa()
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        terminal_inf(self.lambda, self.p, self.t, x).map(|r| r.0)
    }
}

pub struct PositiveTemperature<'a> {
    pub lambda: &'a LagrangeMultiplier,
    pub beta: f64,
    pub p: f64,
    pub t: f64,
    /// Used for `κ ≥ 2` terminal integrals.
    pub quad: QuadratureSpec,
}

impl Terminal for PositiveTemperature<'_> {
    fn kappa(&self) -> usize {
        self.lambda.kappa()
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        terminal_beta(self.lambda, self.beta, self.p, self.t, x, &self.quad)
    }
}

/// Terminal given by a closure, for tests and diagnostics.
pub struct FnTerminal<F> {
    pub kappa: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Terminal for FnTerminal<F> {
    fn kappa(&self) -> usize {
        self.kappa
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionValue {
    pub value: f64,
    /// Zero for deterministic grids.
    pub stderr: f64,
}

/// Displacements `√2·z` of one layer with their probabilities.
struct Layer {
    points: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

fn grid_layer(path: &Path, j: usize, nodes: usize) -> Result<Layer> {
    let k = path.kappa();
    let inc = path.increment(j)?;
    if inc.sym().max_abs() == 0.0 {
        return Ok(Layer { points: vec![vec![0.0; k]], probs: vec![1.0] });
    }
    let a = sqrt_psd(&inc)?;
    let rule = gauss_hermite(nodes);
    let total = nodes.pow(k as u32);
    let mut points = Vec::with_capacity(total);
    let mut probs = Vec::with_capacity(total);
    for code in 0..total {
        let mut c = code;
        let mut w = vec![0.0; k];
        let mut prob = 1.0;
        for wi in w.iter_mut() {
            let idx = c % nodes;
            c /= nodes;
            *wi = rule.nodes[idx];
            prob *= rule.weights[idx];
        }
        points.push((0..k).map(|r| 2f64.sqrt() * (0..k).map(|s| a.get(r, s) * w[s]).sum::<f64>()).collect());
        probs.push(prob);
    }
    Ok(Layer { points, probs })
}

fn mc_layer(path: &Path, j: usize, quad: &QuadratureSpec, batch: u64, samples: usize) -> Result<Layer> {
    let k = path.kappa();
    let inc = path.increment(j)?;
    if inc.sym().max_abs() == 0.0 {
        return Ok(Layer { points: vec![vec![0.0; k]], probs: vec![1.0] });
    }
    let a = sqrt_psd(&inc)?;
    let mut rng = stream(quad.seed, Purpose::Quadrature, (batch << 16) | j as u64);
    let mut points = Vec::with_capacity(samples);
    for _ in 0..samples {
        let w: Vec<f64> = (0..k).map(|_| truncated_normal(&mut rng, quad.truncation_sd)).collect();
        points.push((0..k).map(|r| 2f64.sqrt() * (0..k).map(|s| a.get(r, s) * w[s]).sum::<f64>()).collect());
    }
    Ok(Layer { points, probs: vec![1.0 / samples as f64; samples] })
}

/// `(1/ζ) log Σ p_i e^{ζ v_i}`, with `ζ = 0` the mean and `ζ = ∞` the maximum.
pub(crate) fn soft_max(values: &[f64], probs: &[f64], zeta: f64) -> f64 {
    if zeta == 0.0 {
        return values.iter().zip(probs).map(|(v, p)| v * p).sum();
    }
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if zeta.is_infinite() {
        return m;
    }
    let s: f64 = values.iter().zip(probs).map(|(v, p)| p * (zeta * (v - m)).exp()).sum();
    m + s.ln() / zeta
}

fn eval_level(terminal: &dyn Terminal, layers: &[Layer], weights: &[f64], l: usize, x: &[f64], parallel: bool) -> Result<f64> {
    if l == layers.len() {
        return terminal.eval(x);
    }
    let layer = &layers[l];
    let child = |pt: &Vec<f64>| {
        let y: Vec<f64> = x.iter().zip(pt).map(|(a, b)| a + b).collect();
        eval_level(terminal, layers, weights, l + 1, &y, false)
    };
    let values: Vec<f64> = if parallel {
        layer.points.par_iter().map(child).collect::<Result<Vec<_>>>()?
    } else {
        layer.points.iter().map(child).collect::<Result<Vec<_>>>()?
    };
    let v = soft_max(&values, &layer.probs, weights[l]);
    if !v.is_finite() {
        return Err(Error::Numeric(format!("layer {l} produced a non-finite value at x={x:?}")));
    }
    Ok(v)
}

/// Backward induction for `Y_0`: the terminal is applied at `√2 Σ z_j` and
/// layer `l` computes `(1/ζ_l) log E exp(ζ_l ·)` over `z_{l+1}`.
///
/// `weights[l]` is the layer weight `ζ_l` for `l < r`; `0` gives a plain
/// expectation and `f64::INFINITY` the maximum over the layer's nodes.
pub fn recursion(terminal: &dyn Terminal, weights: &[f64], path: &Path, quad: &QuadratureSpec) -> Result<RecursionValue> {
    let r = path.r();
    if terminal.kappa() != path.kappa() {
        return Err(Error::Shape("terminal and path have different kappa".into()));
    }
    if weights.len() < r {
        return Err(Error::Shape(format!("need {r} layer weights, got {}", weights.len())));
    }
    if weights[..r].iter().any(|w| w.is_nan() || *w < 0.0) {
        return Err(Error::Domain(format!("layer weights must be non-negative: {weights:?}")));
    }
    quad.validate()?;
    let origin = vec![0.0; path.kappa()];
    match quad.mode {
        QuadMode::Grid => {
            let layers = (0..r).map(|j| grid_layer(path, j, quad.nodes_per_dim)).collect::<Result<Vec<_>>>()?;
            let value = eval_level(terminal, &layers, weights, 0, &origin, true)?;
            Ok(RecursionValue { value, stderr: 0.0 })
        }
        QuadMode::MonteCarlo => {
            const BATCHES: u64 = 8;
            let per = quad.samples.div_ceil(BATCHES as usize).max(1);
            let vals = (0..BATCHES)
                .map(|b| {
                    let layers = (0..r).map(|j| mc_layer(path, j, quad, b, per)).collect::<Result<Vec<_>>>()?;
                    eval_level(terminal, &layers, weights, 0, &origin, true)
                })
                .collect::<Result<Vec<_>>>()?;
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            Ok(RecursionValue { value: mean, stderr: (var / n).sqrt() })
        }
    }
}
