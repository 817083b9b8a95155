use crate::error::{Error, Result};
use crate::linalg::{hs_norm, loewner_leq, GramMatrix, SymMatrix};
use serde::{Deserialize, Serialize};

const LOEWNER_TOL: f64 = 1e-10;

/// Piecewise-linear matrix path through `(q_j, γ_j)`, `j = 0..=r`, with
/// `γ_0 = 0`, `q_r = 1` and `γ_r = D`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    q: Vec<f64>,
    gamma: Vec<GramMatrix>,
}

impl Path {
    pub fn new(q: Vec<f64>, gamma: Vec<GramMatrix>) -> Result<Self> {
        if q.len() != gamma.len() {
            return Err(Error::Shape(format!("{} knots but {} path values", q.len(), gamma.len())));
        }
        if q.len() < 2 {
            return Err(Error::Input("a path needs r >= 1".into()));
        }
        let k = gamma[0].dim();
        if gamma.iter().any(|g| g.dim() != k) {
            return Err(Error::Shape("path values have different dimensions".into()));
        }
        if !(q[0] >= 0.0) || q.windows(2).any(|w| !(w[1] >= w[0])) || *q.last().unwrap() != 1.0 {
            return Err(Error::Domain(format!("knots must be nondecreasing in [0,1] and end at 1: {q:?}")));
        }
        if gamma[0].sym().max_abs() != 0.0 {
            return Err(Error::Domain("path must start at 0".into()));
        }
        for (j, w) in gamma.windows(2).enumerate() {
            if !loewner_leq(&w[0], &w[1], LOEWNER_TOL)? {
                return Err(Error::Domain(format!("path is not Loewner-monotone between levels {j} and {}", j + 1)));
            }
        }
        Ok(Path { q, gamma })
    }

    /// `r = 1` path jumping from 0 at `q_0 = 0` to `D` at `q_1 = 1`.
    pub fn single_level(d: GramMatrix) -> Self {
        let k = d.dim();
        Path { q: vec![0.0, 1.0], gamma: vec![GramMatrix::zeros(k), d] }
    }

    pub fn r(&self) -> usize {
        self.q.len() - 1
    }

    pub fn kappa(&self) -> usize {
        self.gamma[0].dim()
    }

    pub fn knots(&self) -> &[f64] {
        &self.q
    }

    pub fn values(&self) -> &[GramMatrix] {
        &self.gamma
    }

    pub fn endpoint(&self) -> &GramMatrix {
        self.gamma.last().unwrap()
    }

    /// Covariance `γ_{j+1} − γ_j` of layer `j`, for `j = 0..r`.
    pub fn increment(&self, j: usize) -> Result<GramMatrix> {
        let diff = self.gamma[j + 1].sym().sub(self.gamma[j].sym())?;
        // Clip round-off negative eigenvalues admitted by the Loewner tolerance.
        GramMatrix::new(diff.map_spectrum(|l| l.max(0.0)))
    }

    /// `π'` on `[q_j, q_{j+1})`; zero on a degenerate interval.
    pub fn slope(&self, j: usize) -> Result<SymMatrix> {
        let dq = self.q[j + 1] - self.q[j];
        let inc = self.increment(j)?;
        Ok(if dq > 0.0 { inc.sym().scale(1.0 / dq) } else { SymMatrix::zeros(self.kappa()) })
    }

    /// `π(s)` by linear interpolation.
    pub fn at(&self, s: f64) -> SymMatrix {
        let r = self.r();
        if s <= self.q[0] {
            return SymMatrix::zeros(self.kappa());
        }
        for j in 0..r {
            if s <= self.q[j + 1] {
                let dq = self.q[j + 1] - self.q[j];
                let w = if dq > 0.0 { (s - self.q[j]) / dq } else { 1.0 };
                let a = self.gamma[j].sym();
                let b = self.gamma[j + 1].sym();
                return a.add(&b.sub(a).expect("same dim").scale(w)).expect("same dim");
            }
        }
        self.endpoint().sym().clone()
    }

    pub fn hs_norms_squared(&self) -> Vec<f64> {
        self.gamma.iter().map(|g| hs_norm(g.sym()).powi(2)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// Finite measure, weights `ζ_j` unbounded.
    Finite,
    /// Probability measure, weights `α_j ≤ 1` with `α_r = 1`.
    Probability,
}

/// Cumulative weights `ζ_0 ≤ … ≤ ζ_r` on the knots of a [`Path`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
    flavor: Flavor,
}

impl DiscreteMeasure {
    pub fn new(weights: Vec<f64>, flavor: Flavor) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Input("empty weight sequence".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Domain(format!("weights must be finite and non-negative: {weights:?}")));
        }
        if weights.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain(format!("weights must be nondecreasing: {weights:?}")));
        }
        if flavor == Flavor::Probability && *weights.last().unwrap() != 1.0 {
            return Err(Error::Domain("probability weights must end at 1".into()));
        }
        Ok(DiscreteMeasure { weights, flavor })
    }

    pub fn finite(weights: Vec<f64>) -> Result<Self> {
        DiscreteMeasure::new(weights, Flavor::Finite)
    }

    /// `α = ζ/β` with the final weight set to 1. Fails unless `ζ_j ≤ β` for `j < r`.
    pub fn probability_from_finite(zeta: &DiscreteMeasure, beta: f64) -> Result<Self> {
        let r = zeta.r();
        let mut w: Vec<f64> = zeta.weights.iter().map(|z| z / beta).collect();
        w[r] = 1.0;
        DiscreteMeasure::new(w, Flavor::Probability)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn r(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn max(&self) -> f64 {
        *self.weights.last().unwrap()
    }

    pub(crate) fn check_against(&self, path: &Path) -> Result<()> {
        if self.r() != path.r() {
            return Err(Error::Shape(format!("measure has r={} but path has r={}", self.r(), path.r())));
        }
        Ok(())
    }
}

/// Coefficients `λ_{k,k'}`, `k ≤ k'`, stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangeMultiplier {
    kappa: usize,
    values: Vec<f64>,
}

impl LagrangeMultiplier {
    pub fn new(kappa: usize, values: Vec<f64>) -> Result<Self> {
        if kappa == 0 {
            return Err(Error::Input("kappa must be positive".into()));
        }
        if values.len() != kappa * (kappa + 1) / 2 {
            return Err(Error::Shape(format!("kappa={kappa} needs {} multipliers, got {}", kappa * (kappa + 1) / 2, values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("multipliers must be finite".into()));
        }
        Ok(LagrangeMultiplier { kappa, values })
    }

    pub fn zeros(kappa: usize) -> Self {
        LagrangeMultiplier { kappa, values: vec![0.0; kappa * (kappa + 1) / 2] }
    }

    pub fn scalar(v: f64) -> Result<Self> {
        LagrangeMultiplier::new(1, vec![v])
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn index(&self, k: usize, l: usize) -> usize {
        let (a, b) = if k <= l { (k, l) } else { (l, k) };
        a * self.kappa - a * (a + 1) / 2 + b
    }

    /// `λ_{k,k'}` for either index order.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.values[self.index(k, l)]
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Symmetric `Λ` with `σᵀΛσ = Σ_{k≤k'} λ_{k,k'} σ_k σ_k'`.
    pub fn quadratic_form_matrix(&self) -> SymMatrix {
        SymMatrix::from_fn(self.kappa, |k, l| if k == l { self.get(k, k) } else { 0.5 * self.get(k, l) })
            .expect("finite")
    }

    pub fn quad_form(&self, s: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.kappa {
            for l in k..self.kappa {
                acc += self.get(k, l) * s[k] * s[l];
            }
        }
        acc
    }

    /// `Σ_{k≤k'} λ_{k,k'} D_{k,k'}`.
    pub fn pairing(&self, d: &GramMatrix) -> Result<f64> {
        if d.dim() != self.kappa {
            return Err(Error::Shape("multiplier and D have different kappa".into()));
        }
        let mut acc = 0.0;
        for k in 0..self.kappa {
            for l in k..self.kappa {
                acc += self.get(k, l) * d.get(k, l);
            }
        }
        Ok(acc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadMode {
    Grid,
    MonteCarlo,
}

/// How Gaussian layer expectations (and multi-dimensional terminal integrals)
/// are evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub mode: QuadMode,
    /// Gauss–Hermite nodes per dimension in grid mode.
    pub nodes_per_dim: usize,
    /// Samples per layer in Monte Carlo mode.
    pub samples: usize,
    /// Monte Carlo normals beyond this many standard deviations are redrawn.
    pub truncation_sd: f64,
    pub seed: u64,
}

impl QuadratureSpec {
    pub fn grid(nodes_per_dim: usize) -> Self {
        QuadratureSpec { mode: QuadMode::Grid, nodes_per_dim, samples: 100_000, truncation_sd: 8.0, seed: 0 }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        QuadratureSpec { mode: QuadMode::MonteCarlo, nodes_per_dim: 24, samples, truncation_sd: 8.0, seed }
    }

    /// 64 nodes for `κ = 1`, `24^κ` for `κ ∈ {2, 3}`, Monte Carlo beyond.
    pub fn default_for(kappa: usize) -> Self {
        match kappa {
            1 => QuadratureSpec::grid(64),
            2 | 3 => QuadratureSpec::grid(24),
            _ => QuadratureSpec::monte_carlo(100_000, 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_dim == 0 || self.samples == 0 {
            return Err(Error::Input("quadrature counts must be positive".into()));
        }
        if !(self.truncation_sd > 0.0) {
            return Err(Error::Input("truncation radius must be positive".into()));
        }
        Ok(())
    }
}

/// Serialized `(λ, weights, path)` triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParisiDocument {
    pub kappa: usize,
    pub r: usize,
    pub q: Vec<f64>,
    /// Each `γ_j` as a row-major `κ×κ` list.
    pub gamma: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub lambda: Vec<f64>,
    pub flavor: Flavor,
}

impl ParisiDocument {
    pub fn from_parts(lambda: &LagrangeMultiplier, weights: &DiscreteMeasure, path: &Path) -> Result<Self> {
        weights.check_against(path)?;
        if lambda.kappa() != path.kappa() {
            return Err(Error::Shape("multiplier and path have different kappa".into()));
        }
        Ok(ParisiDocument {
            kappa: path.kappa(),
            r: path.r(),
            q: path.knots().to_vec(),
            gamma: path.values().iter().map(|g| g.sym().data().to_vec()).collect(),
            weights: weights.weights().to_vec(),
            lambda: lambda.values().to_vec(),
            flavor: weights.flavor(),
        })
    }

    pub fn into_parts(&self) -> Result<(LagrangeMultiplier, DiscreteMeasure, Path)> {
        if self.q.len() != self.r + 1 || self.gamma.len() != self.r + 1 {
            return Err(Error::Shape("document lengths disagree with r".into()));
        }
        let gamma = self
            .gamma
            .iter()
            .map(|g| GramMatrix::from_rows(self.kappa, g.clone()))
            .collect::<Result<Vec<_>>>()?;
        let path = Path::new(self.q.clone(), gamma)?;
        let weights = DiscreteMeasure::new(self.weights.clone(), self.flavor)?;
        weights.check_against(&path)?;
        let lambda = LagrangeMultiplier::new(self.kappa, self.lambda.clone())?;
        Ok((lambda, weights, path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_validation() {
        let d = GramMatrix::identity(1);
        assert!(Path::new(vec![0.0, 0.5, 1.0], vec![GramMatrix::zeros(1), GramMatrix::scaled_identity(1, 0.5).unwrap(), d.clone()]).is_ok());
        assert!(Path::new(vec![0.0, 0.5, 1.0], vec![GramMatrix::zeros(1), GramMatrix::scaled_identity(1, 1.5).unwrap(), d.clone()]).is_err());
        assert!(Path::new(vec![0.0, 0.7, 0.5], vec![GramMatrix::zeros(1), d.clone(), d.clone()]).is_err());
        assert!(Path::new(vec![0.0, 0.9], vec![GramMatrix::zeros(1), d.clone()]).is_err());
        assert!(Path::new(vec![0.0, 1.0], vec![d.clone(), d]).is_err());
    }

    #[test]
    fn path_interpolation() {
        let p = Path::new(vec![0.2, 0.6, 1.0], vec![GramMatrix::zeros(1), GramMatrix::scaled_identity(1, 0.4).unwrap(), GramMatrix::identity(1)]).unwrap();
        assert_eq!(p.at(0.1).get(0, 0), 0.0);
        assert!((p.at(0.4).get(0, 0) - 0.2).abs() < 1e-15);
        assert!((p.at(0.8).get(0, 0) - 0.7).abs() < 1e-15);
        assert!((p.slope(1).unwrap().get(0, 0) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::finite(vec![0.0, 1.0, 3.0]).is_ok());
        assert!(DiscreteMeasure::finite(vec![1.0, 0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![0.2, 0.9], Flavor::Probability).is_err());
        let z = DiscreteMeasure::finite(vec![2.0, 5.0]).unwrap();
        let a = DiscreteMeasure::probability_from_finite(&z, 10.0).unwrap();
        assert_eq!(a.weights(), &[0.2, 1.0]);
    }

    #[test]
    fn multiplier_indexing() {
        let l = LagrangeMultiplier::new(3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(l.get(0, 2), 3.0);
        assert_eq!(l.get(2, 1), 5.0);
        assert_eq!(l.get(2, 2), 6.0);
        let s = [1.0, -2.0, 0.5];
        let m = l.quadratic_form_matrix();
        let direct: f64 = (0..3).map(|i| (0..3).map(|j| s[i] * m.get(i, j) * s[j]).sum::<f64>()).sum();
        assert!((direct - l.quad_form(&s)).abs() < 1e-13);
    }

    #[test]
    fn document_round_trip() {
        let d = GramMatrix::from_rows(2, vec![1.0, 0.2, 0.2, 0.5]).unwrap();
        let path = Path::single_level(d);
        let w = DiscreteMeasure::finite(vec![1.5, 2.0]).unwrap();
        let l = LagrangeMultiplier::new(2, vec![0.1, -0.2, 0.3]).unwrap();
        let doc = ParisiDocument::from_parts(&l, &w, &path).unwrap();
        let json = serde_json::to_string(&doc).unwrap();
        assert!(json.starts_with("{\"kappa\":2,\"r\":1,\"q\":"));
        let back: ParisiDocument = serde_json::from_str(&json).unwrap();
        let (l2, w2, p2) = back.into_parts().unwrap();
        assert_eq!((l2, w2, p2), (l, w, path));
    }
}
