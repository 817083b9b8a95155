//! Gaussian disorder, vector spin configurations, the SK Hamiltonian and its
//! penalized variant.

use crate::error::{Error, Result};
use crate::linalg::{GramMatrix, Matrix, SymMatrix};
use crate::rng::{stream, Purpose};
use rand::Rng;
use rand_distr::StandardNormal;

/// `N×N` matrix of i.i.d. standard Gaussian couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct Disorder {
    n: usize,
    g: Vec<f64>,
    seed: u64,
}

impl Disorder {
    /// Wraps a user-supplied coupling matrix (row-major).
    pub fn from_matrix(n: usize, g: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("n must be positive".into()));
        }
        if g.len() != n * n {
            return Err(Error::Shape(format!("expected {} couplings, got {}", n * n, g.len())));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("non-finite coupling".into()));
        }
        Ok(Disorder { n, g, seed: 0 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn couplings(&self) -> &[f64] {
        &self.g
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.g[i * self.n + j]
    }

    /// Symmetric coupling `G + Gᵀ`, the matrix that drives gradients.
    pub fn coupling(&self) -> Coupling {
        let n = self.n;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = self.g[i * n + j] + self.g[j * n + i];
            }
        }
        Coupling { n, m }
    }
}

/// Disorder for replica 0 of `seed`.
pub fn sample_disorder(seed: u64, n: usize) -> Result<Disorder> {
    sample_disorder_replica(seed, 0, n)
}

/// Disorder drawn from the stream `(seed, replica)`.
pub fn sample_disorder_replica(seed: u64, replica: u64, n: usize) -> Result<Disorder> {
    if n == 0 {
        return Err(Error::Input("n must be positive".into()));
    }
    let mut rng = stream(seed, Purpose::Disorder, replica);
    let g = (0..n * n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Ok(Disorder { n, g, seed })
}

/// Symmetric matrix `M = G + Gᵀ` with `H°(σ) = ½⟨σ, Mσ⟩`.
#[derive(Debug, Clone)]
pub struct Coupling {
    n: usize,
    m: Vec<f64>,
}

impl Coupling {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.m
    }

    /// `out = M · s` for an `N×κ` row-major block.
    pub fn apply(&self, s: &[f64], kappa: usize, out: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(s.len(), n * kappa);
        debug_assert_eq!(out.len(), n * kappa);
        if kappa == 1 {
            for (i, o) in out.iter_mut().enumerate() {
                let row = &self.m[i * n..(i + 1) * n];
                *o = row.iter().zip(s).map(|(a, b)| a * b).sum();
            }
            return;
        }
        out.fill(0.0);
        for i in 0..n {
            let row = &self.m[i * n..(i + 1) * n];
            let acc = &mut out[i * kappa..(i + 1) * kappa];
            for (j, &mij) in row.iter().enumerate() {
                let sj = &s[j * kappa..(j + 1) * kappa];
                for k in 0..kappa {
                    acc[k] += mij * sj[k];
                }
            }
        }
    }
}

/// `N` vector spins in `ℝ^κ`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinConfig {
    n: usize,
    kappa: usize,
    sigma: Vec<f64>,
}

impl SpinConfig {
    pub fn new(n: usize, kappa: usize, sigma: Vec<f64>) -> Result<Self> {
        if n == 0 || kappa == 0 {
            return Err(Error::Input("n and kappa must be positive".into()));
        }
        if sigma.len() != n * kappa {
            return Err(Error::Shape(format!("expected {} entries, got {}", n * kappa, sigma.len())));
        }
        if sigma.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("non-finite spin entry".into()));
        }
        Ok(SpinConfig { n, kappa, sigma })
    }

    pub fn zeros(n: usize, kappa: usize) -> Self {
        SpinConfig { n, kappa, sigma: vec![0.0; n * kappa] }
    }

    /// I.i.d. standard Gaussian entries.
    pub fn gaussian<R: Rng>(n: usize, kappa: usize, rng: &mut R) -> Self {
        let sigma = (0..n * kappa).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        SpinConfig { n, kappa, sigma }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn data(&self) -> &[f64] {
        &self.sigma
    }

    #[cfg(test)]
    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.sigma
    }

    pub fn into_data(self) -> Vec<f64> {
        self.sigma
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.sigma[i * self.kappa..(i + 1) * self.kappa]
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.sigma[i * self.kappa + k]
    }

    /// Coordinate channel `σ(k) ∈ ℝ^N`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, k)).collect()
    }

    pub fn scaled(&self, c: f64) -> SpinConfig {
        SpinConfig { n: self.n, kappa: self.kappa, sigma: self.sigma.iter().map(|x| x * c).collect() }
    }

    fn same_shape(&self, other: &SpinConfig) -> Result<()> {
        if self.n != other.n || self.kappa != other.kappa {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.n, self.kappa, other.n, other.kappa
            )));
        }
        Ok(())
    }
}

/// Cross overlap `(1/N) Σ_i σ_i^a (σ_i^b)ᵀ`.
pub fn overlap(a: &SpinConfig, b: &SpinConfig) -> Result<Matrix> {
    a.same_shape(b)?;
    let kappa = a.kappa;
    let inv_n = 1.0 / a.n as f64;
    Ok(Matrix::from_fn(kappa, kappa, |k, l| {
        (0..a.n).map(|i| a.get(i, k) * b.get(i, l)).sum::<f64>() * inv_n
    }))
}

/// Self overlap `R(σ, σ)`, PSD as a sum of outer products.
pub fn self_overlap(s: &SpinConfig) -> GramMatrix {
    let r = overlap(s, s).expect("same shape");
    GramMatrix::from_outer_products(SymMatrix::from_matrix(&r).expect("square, finite"))
}

/// `Σ_i ‖σ_i‖₂^p`.
pub fn pnorm_pow_sum(s: &SpinConfig, p: f64) -> f64 {
    (0..s.n)
        .map(|i| {
            let r2: f64 = s.row(i).iter().map(|x| x * x).sum();
            if r2 == 0.0 {
                0.0
            } else {
                r2.powf(0.5 * p)
            }
        })
        .sum()
}

/// `ℓ^{p,2}` norm; the normalized variant divides the p-th power by `N`.
pub fn norm_p2(s: &SpinConfig, p: f64, normalized: bool) -> Result<f64> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Domain(format!("p must be at least 1, got {p}")));
    }
    let mut sum = pnorm_pow_sum(s, p);
    if normalized {
        sum /= s.n as f64;
    }
    Ok(sum.powf(1.0 / p))
}

fn check_n(g: &Disorder, s: &SpinConfig) -> Result<()> {
    if g.n != s.n {
        return Err(Error::Shape(format!("disorder has N={}, config has N={}", g.n, s.n)));
    }
    Ok(())
}

/// Unscaled `Σ_ij g_ij (σ_i, σ_j)`.
pub fn pre_hamiltonian(g: &Disorder, s: &SpinConfig) -> Result<f64> {
    check_n(g, s)?;
    let n = g.n;
    let mut total = 0.0;
    for i in 0..n {
        let si = s.row(i);
        let mut acc = 0.0;
        for j in 0..n {
            let dot: f64 = si.iter().zip(s.row(j)).map(|(a, b)| a * b).sum();
            acc += g.get(i, j) * dot;
        }
        total += acc;
    }
    Ok(total)
}

/// `H_N(σ) = N^{-1/2} Σ_ij g_ij (σ_i, σ_j)`.
pub fn hamiltonian(g: &Disorder, s: &SpinConfig) -> Result<f64> {
    Ok(pre_hamiltonian(g, s)? / (g.n as f64).sqrt())
}

/// Scalar SK Hamiltonian of one coordinate channel.
pub fn channel_hamiltonian(g: &Disorder, x: &[f64]) -> Result<f64> {
    if x.len() != g.n {
        return Err(Error::Shape(format!("channel length {} vs N={}", x.len(), g.n)));
    }
    let n = g.n;
    let mut total = 0.0;
    for (i, xi) in x.iter().enumerate() {
        total += xi * (0..n).map(|j| g.get(i, j) * x[j]).sum::<f64>();
    }
    Ok(total / (n as f64).sqrt())
}

fn check_penalty(p: f64, t: f64) -> Result<()> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(Error::Domain(format!("p must exceed 2, got {p}")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    Ok(())
}

/// `H_N(σ) − t ‖σ‖_{p,2}^p`.
pub fn lagrangian_hamiltonian(g: &Disorder, s: &SpinConfig, p: f64, t: f64) -> Result<f64> {
    check_penalty(p, t)?;
    Ok(hamiltonian(g, s)? - t * pnorm_pow_sum(s, p))
}

/// Gradient of `H_N − t‖σ‖_{p,2}^p`; rows with `σ_i = 0` get no penalty term.
pub fn grad_hamiltonian(g: &Disorder, s: &SpinConfig, p: f64, t: f64) -> Result<SpinConfig> {
    check_n(g, s)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be non-negative, got {t}")));
    }
    if t > 0.0 && !(p >= 1.0) {
        return Err(Error::Domain(format!("p must be at least 1, got {p}")));
    }
    let n = g.n;
    let kappa = s.kappa;
    let scale = 1.0 / (n as f64).sqrt();
    let mut out = vec![0.0; n * kappa];
    for i in 0..n {
        for j in 0..n {
            let w = (g.get(i, j) + g.get(j, i)) * scale;
            for k in 0..kappa {
                out[i * kappa + k] += w * s.get(j, k);
            }
        }
        if t > 0.0 {
            let r2: f64 = s.row(i).iter().map(|x| x * x).sum();
            if r2 > 0.0 {
                let c = t * p * r2.powf(0.5 * (p - 2.0));
                for k in 0..kappa {
                    out[i * kappa + k] -= c * s.get(i, k);
                }
            }
        }
    }
    SpinConfig::new(n, kappa, out)
}

/// `Ḡ = (G + Gᵀ)/√2`.
pub fn goe(g: &Disorder) -> Matrix {
    let c = std::f64::consts::FRAC_1_SQRT_2;
    Matrix::from_fn(g.n, g.n, |i, j| (g.get(i, j) + g.get(j, i)) * c)
}

/// `‖G‖₂ / √N` by power iteration on `GᵀG`.
pub fn opnorm_scaled(g: &Disorder) -> Result<f64> {
    opnorm_scaled_with(g, 1e-8, 10 * g.n.max(10))
}

pub fn opnorm_scaled_with(g: &Disorder, tol: f64, max_iter: usize) -> Result<f64> {
    let n = g.n;
    let mut v: Vec<f64> = start_vector(n);
    let mut w = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut prev = 0.0;
    for it in 0..max_iter {
        // w = G v ; u = Gᵀ w
        for i in 0..n {
            w[i] = g.g[i * n..(i + 1) * n].iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        u.fill(0.0);
        for i in 0..n {
            let wi = w[i];
            for (uj, gij) in u.iter_mut().zip(&g.g[i * n..(i + 1) * n]) {
                *uj += gij * wi;
            }
        }
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        // Rayleigh quotient of GᵀG at the unit vector v.
        let est: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        for (vi, ui) in v.iter_mut().zip(&u) {
            *vi = ui / norm;
        }
        if it > 0 && (est - prev).abs() <= tol * est.abs() {
            return Ok(est.sqrt() / (n as f64).sqrt());
        }
        prev = est;
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge in {max_iter} iterations (last estimate {:e})",
        prev.sqrt() / (n as f64).sqrt()
    )))
}

fn start_vector(n: usize) -> Vec<f64> {
    let mut rng = stream(0x5eed, Purpose::Verify, n as u64);
    let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// Largest eigenvalue of a symmetric matrix by shifted power iteration.
///
/// The shift makes the iterated matrix (nearly) PSD so the iteration
/// converges to the top of the spectrum rather than the largest modulus. It
/// is `1.01 ρ̂`, with `ρ̂ ≤ ρ(M)` from 30 unshifted power steps, capped by the
/// Gershgorin radius; the smaller shift converges much faster than the
/// Gershgorin radius alone.
pub fn lambda_max_symmetric(m: &Matrix, tol: f64, max_iter: usize) -> Result<f64> {
    let n = m.rows();
    if n != m.cols() {
        return Err(Error::Shape("matrix must be square".into()));
    }
    let data = m.data();
    let shift = (0..n)
        .map(|i| data[i * n..(i + 1) * n].iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if shift == 0.0 {
        return Ok(0.0);
    }
    let mut v = start_vector(n);
    let mut w = vec![0.0; n];
    let mut radius = 0.0f64;
    for _ in 0..30 {
        for i in 0..n {
            w[i] = data[i * n..(i + 1) * n].iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        radius = radius.max(norm);
        if norm == 0.0 {
            break;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    let shift = if radius > 0.0 { shift.min(1.01 * radius) } else { shift };
    let mut v = start_vector(n);
    let mut prev = f64::NAN;
    for _ in 0..max_iter {
        for i in 0..n {
            w[i] = data[i * n..(i + 1) * n].iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() + shift * v[i];
        }
        let est: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if (est - prev).abs() <= tol * est.abs() {
            return Ok(est - shift);
        }
        prev = est;
    }
    Err(Error::Numeric(format!(
        "power iteration did not converge in {max_iter} iterations (last estimate {:e})",
        prev - shift
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hs_norm;

    fn random_config(seed: u64, n: usize, kappa: usize) -> SpinConfig {
        SpinConfig::gaussian(n, kappa, &mut stream(seed, Purpose::Verify, 99))
    }

    #[test]
    fn disorder_is_deterministic() {
        let a = sample_disorder(0, 2).unwrap();
        let b = sample_disorder(0, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_disorder_replica(0, 1, 2).unwrap());
        assert!(sample_disorder(0, 0).is_err());
    }

    #[test]
    fn disorder_moments() {
        let g = sample_disorder(11, 512).unwrap();
        let m = g.couplings();
        let len = m.len() as f64;
        let mean = m.iter().sum::<f64>() / len;
        let var = m.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (len - 1.0);
        assert!(mean.abs() < 4.0 / 512.0);
        // sd of the sample variance is sqrt(2/len)
        assert!((var - 1.0).abs() < 4.0 * (2.0 / len).sqrt());
    }

    #[test]
    fn overlap_examples() {
        let z = SpinConfig::zeros(3, 2);
        assert_eq!(overlap(&z, &z).unwrap().max_abs(), 0.0);
        let e = SpinConfig::new(1, 2, vec![1.0, 0.0]).unwrap();
        assert_eq!(overlap(&e, &e).unwrap().data(), &[1.0, 0.0, 0.0, 0.0]);
        let a = random_config(1, 5, 2);
        let tr = self_overlap(&a).trace();
        let direct: f64 = a.data().iter().map(|x| x * x).sum::<f64>() / 5.0;
        assert!((tr - direct).abs() < 1e-13);
        assert!(overlap(&a, &random_config(2, 4, 2)).is_err());
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm_p2(&SpinConfig::zeros(4, 2), 3.0, false).unwrap(), 0.0);
        let ones = SpinConfig::new(6, 1, vec![1.0; 6]).unwrap();
        for p in [1.0, 1.5, 2.0, 3.0, 7.0] {
            assert!((norm_p2(&ones, p, true).unwrap() - 1.0).abs() < 1e-14);
        }
        let s = SpinConfig::new(2, 2, vec![3.0, 4.0, 0.0, 0.0]).unwrap();
        assert!((norm_p2(&s, 3.0, false).unwrap() - 5.0).abs() < 1e-13);
        assert!(norm_p2(&s, 0.5, false).is_err());
    }

    #[test]
    fn hamiltonian_examples() {
        let g = Disorder::from_matrix(1, vec![0.7]).unwrap();
        let s = SpinConfig::new(1, 1, vec![2.0]).unwrap();
        assert!((hamiltonian(&g, &s).unwrap() - 0.7 * 4.0).abs() < 1e-15);
        assert!((lagrangian_hamiltonian(&g, &SpinConfig::new(1, 1, vec![1.0]).unwrap(), 3.0, 0.4).unwrap() - 0.3).abs() < 1e-15);
        let g = sample_disorder(3, 4).unwrap();
        assert_eq!(hamiltonian(&g, &SpinConfig::zeros(4, 3)).unwrap(), 0.0);
        let s = random_config(4, 4, 3);
        let h = hamiltonian(&g, &s).unwrap();
        let channels: f64 = (0..3).map(|k| channel_hamiltonian(&g, &s.column(k)).unwrap()).sum();
        assert!((h - channels).abs() < 1e-12);
        let lh = lagrangian_hamiltonian(&g, &s, 3.0, 0.5).unwrap();
        assert!((lh - (h - 0.5 * norm_p2(&s, 3.0, false).unwrap().powi(3))).abs() < 1e-12);
    }

    #[test]
    fn coupling_matches_pre_hamiltonian() {
        let g = sample_disorder(5, 7).unwrap();
        let s = random_config(6, 7, 2);
        let mut out = vec![0.0; 14];
        g.coupling().apply(s.data(), 2, &mut out);
        let q: f64 = 0.5 * out.iter().zip(s.data()).map(|(a, b)| a * b).sum::<f64>();
        assert!((q - pre_hamiltonian(&g, &s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let g = sample_disorder(8, 6).unwrap();
        let s = random_config(9, 6, 2);
        let (p, t) = (3.0, 0.7);
        let grad = grad_hamiltonian(&g, &s, p, t).unwrap();
        let h = 1e-5;
        for idx in 0..12 {
            let mut plus = s.clone();
            plus.data_mut()[idx] += h;
            let mut minus = s.clone();
            minus.data_mut()[idx] -= h;
            let fd = (lagrangian_hamiltonian(&g, &plus, p, t).unwrap()
                - lagrangian_hamiltonian(&g, &minus, p, t).unwrap())
                / (2.0 * h);
            let an = grad.data()[idx];
            assert!((fd - an).abs() <= 1e-5 * (1.0 + an.abs()), "{fd} vs {an}");
        }
        let zero = grad_hamiltonian(&g, &SpinConfig::zeros(6, 2), p, t).unwrap();
        assert!(zero.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn euler_identity() {
        for (seed, p) in [(1u64, 2.5), (2, 3.0), (3, 4.0)] {
            let g = sample_disorder(seed, 16).unwrap();
            let s = random_config(seed + 10, 16, 3);
            let t = 0.8;
            let grad = grad_hamiltonian(&g, &s, p, t).unwrap();
            let lhs: f64 = grad.data().iter().zip(s.data()).map(|(a, b)| a * b).sum();
            let h = hamiltonian(&g, &s).unwrap();
            let rhs = 2.0 * h - t * p * pnorm_pow_sum(&s, p);
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + h.abs()));
        }
    }

    #[test]
    fn goe_examples() {
        let g = Disorder::from_matrix(2, vec![1.0, 2.0, 2.0, -1.0]).unwrap();
        let m = goe(&g);
        assert!((m.get(0, 1) - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        let g1 = Disorder::from_matrix(1, vec![0.3]).unwrap();
        assert!((goe(&g1).get(0, 0) - 0.3 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn power_iterations() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!((lambda_max_symmetric(&m, 1e-14, 10_000).unwrap() - 3.0).abs() < 1e-10);
        let m = Matrix::from_vec(2, 2, vec![-5.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((lambda_max_symmetric(&m, 1e-14, 10_000).unwrap() - 1.0).abs() < 1e-10);
        for seed in 0..4 {
            let g = sample_disorder(seed, 30).unwrap();
            let m = goe(&g).scale(if seed % 2 == 0 { 1.0 } else { -1.0 });
            let exact = SymMatrix::from_matrix(&m).unwrap().eigen().values[0];
            assert!((lambda_max_symmetric(&m, 1e-15, 200_000).unwrap() - exact).abs() < 1e-8 * exact.abs());
        }
        // ‖G‖₂ for diag(3, -4) is 4
        let g = Disorder::from_matrix(2, vec![3.0, 0.0, 0.0, -4.0]).unwrap();
        assert!((opnorm_scaled(&g).unwrap() - 4.0 / 2f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn goe_edge_at_n_1024() {
        let g = sample_disorder(21, 1024).unwrap();
        let l = lambda_max_symmetric(&goe(&g), 1e-10, 50_000).unwrap() / 32.0;
        assert!((1.85..=2.1).contains(&l), "{l}");
    }

    #[test]
    fn self_overlap_bounds() {
        let s = random_config(12, 9, 3);
        let r = self_overlap(&s);
        assert!(crate::linalg::is_psd(r.sym(), 1e-12).unwrap());
        assert!(hs_norm(r.sym()) <= r.trace() + 1e-12);
    }
}
