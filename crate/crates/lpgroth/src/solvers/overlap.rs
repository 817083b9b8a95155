use super::{dot, norm2};
use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_pd, GramMatrix, Matrix, SymMatrix};
use crate::model::{self_overlap, SpinConfig};
use crate::rng::{stream, Purpose};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub struct OverlapCorrection {
    /// Linear map applied to every spin.
    pub a: Matrix,
    /// `Q Λ_ε Qᵀ`: the constraint with eigenvalues below `√ε` dropped.
    pub d_eps: GramMatrix,
    /// Number of retained eigen-directions.
    pub rank: usize,
    /// `tr((A−I) R (A−I)ᵀ)`
    pub distortion: f64,
    /// `(κ⁴ tr(D) + 2κ) √ε`
    pub bound: f64,
}

/// Builds `A` with `A R Aᵀ = D_ε` for an overlap `R` within `ε` of `D`.
///
/// In the eigenbasis of `D` only directions with eigenvalue at least `√ε`
/// are kept; on those, `R` is whitened and re-colored to match `Λ` exactly.
pub fn correct_overlap_matrix(r: &SymMatrix, d: &GramMatrix, eps: f64) -> Result<OverlapCorrection> {
    let k = d.dim();
    if r.dim() != k {
        return Err(Error::Shape(format!("R is {}x{}, D is {k}x{k}", r.dim(), r.dim())));
    }
    if !(eps > 0.0 && eps < 1.0 / (k * k) as f64) {
        return Err(Error::Domain(format!("eps must lie in (0, 1/kappa^2), got {eps}")));
    }
    let dev = r.sub(d.sym())?.max_abs();
    if !(dev < eps) {
        return Err(Error::Domain(format!("overlap is {dev:e} from D, outside the eps-ball")));
    }
    let eig = d.sym().eigen();
    let q = &eig.vectors;
    let lam = &eig.values;
    let m = lam.iter().take_while(|&&l| l >= eps.sqrt()).count();
    let rot = q.transpose().matmul(&r.to_matrix())?.matmul(q)?;

    let mut a_rot = Matrix::zeros(k, k);
    if m > 0 {
        let rt = SymMatrix::from_fn(m, |i, j| rot.get(i, j) / (lam[i] * lam[j]).sqrt())?;
        let rt_is = inv_sqrt_pd(&rt)
            .map_err(|e| Error::Numeric(format!("whitened overlap not positive definite: {e}")))?;
        for i in 0..m {
            for j in 0..m {
                a_rot.set(i, j, lam[i].sqrt() * rt_is.get(i, j) / lam[j].sqrt());
            }
        }
    }
    let a = q.matmul(&a_rot)?.matmul(&q.transpose())?;
    let d_eps = SymMatrix::from_fn(k, |i, j| (0..m).map(|l| q.get(i, l) * lam[l] * q.get(j, l)).sum())?;

    let ami = a.sub(&Matrix::identity(k))?;
    let distortion = ami.matmul(&r.to_matrix())?.matmul(&ami.transpose())?.trace();
    let kf = k as f64;
    Ok(OverlapCorrection {
        a,
        d_eps: GramMatrix::new(d_eps)?,
        rank: m,
        distortion,
        bound: (kf.powi(4) * d.trace() + 2.0 * kf) * eps.sqrt(),
    })
}

/// Applies [`correct_overlap_matrix`] to the self-overlap of `s` and maps
/// every spin by `A`.
pub fn correct_overlap(s: &SpinConfig, d: &GramMatrix, eps: f64) -> Result<(OverlapCorrection, SpinConfig)> {
    if s.kappa() != d.dim() {
        return Err(Error::Shape("configuration and D have different kappa".into()));
    }
    let r = self_overlap(s);
    let corr = correct_overlap_matrix(r.sym(), d, eps)?;
    let k = s.kappa();
    let mut out = vec![0.0; s.n() * k];
    for i in 0..s.n() {
        let row = s.row(i);
        for a in 0..k {
            out[i * k + a] = (0..k).map(|b| corr.a.get(a, b) * row[b]).sum();
        }
    }
    let moved = SpinConfig::new(s.n(), k, out)?;
    Ok((corr, moved))
}

/// Adds `√ε·τ(k)` to every channel, with the `τ(k)` orthonormal in the
/// normalized inner product `(1/N)Σ_i` and orthogonal to all channels of `s`.
/// The self-overlap grows by exactly `ε·I`.
pub fn lift_to_positive(s: &SpinConfig, eps: f64, seed: u64) -> Result<SpinConfig> {
    let (n, k) = (s.n(), s.kappa());
    if n <= 2 * k {
        return Err(Error::Domain(format!("need N > 2 kappa, got N={n}, kappa={k}")));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::Domain(format!("eps must be non-negative, got {eps}")));
    }
    if eps == 0.0 {
        return Ok(s.clone());
    }
    // Orthonormal basis (plain Euclidean) of the span of the channels.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for c in 0..k {
        let mut v = s.column(c);
        let before = norm2(&v);
        orthogonalize(&mut v, &basis);
        let after = norm2(&v);
        if after > 1e-12 * before.max(1e-300) && after > 0.0 {
            v.iter_mut().for_each(|x| *x /= after);
            basis.push(v);
        }
    }
    let mut rng = stream(seed, Purpose::Lift, 0);
    let mut taus = Vec::with_capacity(k);
    while taus.len() < k {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let before = norm2(&v);
        orthogonalize(&mut v, &basis);
        let after = norm2(&v);
        if after < 1e-8 * before {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= after);
        basis.push(v.clone());
        taus.push(v);
    }
    // unit Euclidean norm → normalized norm 1 after scaling by √N
    let c = (eps * n as f64).sqrt();
    let mut out = s.data().to_vec();
    for (kk, tau) in taus.iter().enumerate() {
        for i in 0..n {
            out[i * k + kk] += c * tau[i];
        }
    }
    SpinConfig::new(n, k, out)
}

/// Two passes of modified Gram–Schmidt against an orthonormal basis.
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
}
