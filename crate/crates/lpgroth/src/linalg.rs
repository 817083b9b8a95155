//! Small dense matrices: symmetric/PSD kernels used for overlaps, constraint
//! matrices and path values.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dense row-major rectangular matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} entries for {rows}x{cols}, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(l, j);
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * c).collect() }
    }

    fn zip(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Square symmetric matrix. Symmetry is enforced on construction by averaging
/// with the transpose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymMatrixRepr", into = "SymMatrixRepr")]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SymMatrixRepr {
    dim: usize,
    entries: Vec<f64>,
}

impl TryFrom<SymMatrixRepr> for SymMatrix {
    type Error = Error;
    fn try_from(r: SymMatrixRepr) -> Result<Self> {
        SymMatrix::new(r.dim, r.entries)
    }
}

impl From<SymMatrix> for SymMatrixRepr {
    fn from(m: SymMatrix) -> Self {
        SymMatrixRepr { dim: m.n, entries: m.data }
    }
}

impl SymMatrix {
    /// Builds from row-major entries, replacing `M` by `(M + Mᵀ)/2`.
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("matrix dimension must be positive".into()));
        }
        if data.len() != n * n {
            return Err(Error::Shape(format!("expected {} entries, got {}", n * n, data.len())));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("non-finite matrix entry".into()));
        }
        let mut m = SymMatrix { n, data };
        m.symmetrize();
        Ok(m)
    }

    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::Shape("symmetric matrix must be square".into()));
        }
        SymMatrix::new(m.rows(), m.data().to_vec())
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        SymMatrix::new(n, Matrix::from_fn(n, n, f).data)
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix { n, data: Matrix::identity(n).data }
    }

    pub fn diag(d: &[f64]) -> Result<Self> {
        SymMatrix::from_fn(d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    fn symmetrize(&mut self) {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = v;
                self.data[j * n + i] = v;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix { rows: self.n, cols: self.n, data: self.data.clone() }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        check_dims(self, other)?;
        SymMatrix::new(self.n, self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        check_dims(self, other)?;
        SymMatrix::new(self.n, self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix { n: self.n, data: self.data.iter().map(|x| x * c).collect() }
    }

    /// Eigendecomposition with eigenvalues in descending order.
    pub fn eigen(&self) -> SymEigen {
        jacobi_eigen(self)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigen().values.last().expect("non-empty")
    }

    /// Rebuilds `V diag(f(λ)) Vᵀ`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let e = self.eigen();
        let n = self.n;
        let mapped: Vec<f64> = e.values.iter().map(|&l| f(l)).collect();
        let v = &e.vectors;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let s: f64 = (0..n).map(|k| v.get(i, k) * mapped[k] * v.get(j, k)).sum();
                data[i * n + j] = s;
                data[j * n + i] = s;
            }
        }
        SymMatrix { n, data }
    }
}

fn check_dims(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.n != b.n {
        return Err(Error::Shape(format!("dimension {} vs {}", a.n, b.n)));
    }
    Ok(())
}

/// Eigenvalues (descending) and orthonormal eigenvectors stored as columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

fn jacobi_eigen(m: &SymMatrix) -> SymEigen {
    let n = m.n;
    let mut a = m.data.clone();
    let mut v = Matrix::identity(n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale > 0.0 {
        let threshold = 1e-14 * scale;
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i * n + j] * a[i * n + j])
                .sum::<f64>()
                .sqrt();
            if off < threshold {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a[p * n + p];
                    let aqq = a[q * n + q];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v.get(k, p);
                        let vkq = v.get(k, q);
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v.get(r, order[c]));
    SymEigen { values, vectors }
}

/// PSD tolerance relative to the trace scale of `m`.
pub fn psd_tolerance(m: &SymMatrix) -> f64 {
    let scale = (0..m.dim()).map(|i| m.get(i, i).abs()).sum::<f64>();
    1e-10 * scale.max(1.0)
}

/// Symmetric matrix known to be positive semidefinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    base: SymMatrix,
    certified_psd: bool,
}

impl GramMatrix {
    /// Validates PSD-ness at [`psd_tolerance`].
    pub fn new(base: SymMatrix) -> Result<Self> {
        let tol = psd_tolerance(&base);
        let min = base.min_eigenvalue();
        if min < -tol {
            return Err(Error::Domain(format!("matrix is not PSD (min eigenvalue {min:e})")));
        }
        Ok(GramMatrix { base, certified_psd: true })
    }

    /// Wraps a matrix that is PSD by construction (sum of outer products).
    pub(crate) fn from_outer_products(base: SymMatrix) -> Self {
        GramMatrix { base, certified_psd: true }
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        GramMatrix::new(SymMatrix::new(n, data)?)
    }

    pub fn identity(n: usize) -> Self {
        GramMatrix { base: SymMatrix::identity(n), certified_psd: true }
    }

    pub fn zeros(n: usize) -> Self {
        GramMatrix { base: SymMatrix::zeros(n), certified_psd: true }
    }

    pub fn scaled_identity(n: usize, c: f64) -> Result<Self> {
        GramMatrix::new(SymMatrix::identity(n).scale(c))
    }

    pub fn sym(&self) -> &SymMatrix {
        &self.base
    }

    pub fn certified_psd(&self) -> bool {
        self.certified_psd
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.base.get(i, j)
    }

    pub fn trace(&self) -> f64 {
        self.base.trace()
    }
}

pub fn is_psd(m: &SymMatrix, tol: f64) -> Result<bool> {
    if !(tol >= 0.0) || !tol.is_finite() {
        return Err(Error::Input(format!("tolerance must be finite and non-negative, got {tol}")));
    }
    Ok(m.min_eigenvalue() >= -tol)
}

/// `A ≤ B` in the Loewner order, i.e. `B − A` is PSD at tolerance `tol`.
pub fn loewner_leq(a: &GramMatrix, b: &GramMatrix, tol: f64) -> Result<bool> {
    is_psd(&b.sym().sub(a.sym())?, tol)
}

pub fn sqrt_psd(m: &GramMatrix) -> Result<GramMatrix> {
    let tol = psd_tolerance(m.sym());
    let e = m.sym().eigen();
    if let Some(&min) = e.values.last() {
        if min < -tol {
            return Err(Error::Domain(format!("matrix is not PSD (min eigenvalue {min:e})")));
        }
    }
    Ok(GramMatrix::from_outer_products(m.sym().map_spectrum(|l| l.max(0.0).sqrt())))
}

/// `M^{-1/2}` for a strictly positive definite matrix.
pub fn inv_sqrt_pd(m: &SymMatrix) -> Result<SymMatrix> {
    let min = m.min_eigenvalue();
    if !(min > 0.0) {
        return Err(Error::Domain(format!("matrix is not positive definite (min eigenvalue {min:e})")));
    }
    Ok(m.map_spectrum(|l| 1.0 / l.sqrt()))
}

pub fn hs_norm(m: &SymMatrix) -> f64 {
    m.data().iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sum_entries(m: &SymMatrix) -> f64 {
    m.data().iter().sum()
}

pub fn hadamard(a: &SymMatrix, b: &SymMatrix) -> Result<SymMatrix> {
    check_dims(a, b)?;
    SymMatrix::new(a.dim(), a.data().iter().zip(b.data()).map(|(x, y)| x * y).collect())
}

/// `tr(AB)` for symmetric `A`, `B`.
pub fn trace_product(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    check_dims(a, b)?;
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum())
}

/// Diagonal dominance with non-negative diagonal; sufficient for PSD.
pub fn gershgorin_psd_certificate(m: &SymMatrix) -> bool {
    let n = m.dim();
    (0..n).all(|i| {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| m.get(i, j).abs()).sum();
        m.get(i, i) >= off
    })
}

/// `λ_min(A) / (n ‖P‖_∞)`: below this, `A + εP` stays positive definite.
pub fn pd_perturbation_threshold(a: &GramMatrix, p: &SymMatrix) -> Result<f64> {
    check_dims(a.sym(), p)?;
    let lmin = a.sym().min_eigenvalue();
    if !(lmin > 0.0) {
        return Err(Error::Domain(format!("A must be positive definite (min eigenvalue {lmin:e})")));
    }
    let pinf = p.max_abs();
    if pinf == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(lmin / (a.dim() as f64 * pinf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym2(a: f64, b: f64, c: f64) -> SymMatrix {
        SymMatrix::new(2, vec![a, b, b, c]).unwrap()
    }

    #[test]
    fn psd_examples() {
        assert!(is_psd(&SymMatrix::identity(2), 0.0).unwrap());
        assert!(!is_psd(&sym2(1.0, 2.0, 1.0), 1e-9).unwrap());
        assert!(is_psd(&sym2(2.0, 1.0, 2.0), 0.0).unwrap());
        assert!(is_psd(&sym2(1.0, 0.0, 1.0), -1.0).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(SymMatrix::new(2, vec![1.0, f64::NAN, 0.0, 1.0]).is_err());
    }

    #[test]
    fn symmetrized_on_construction() {
        let m = SymMatrix::new(2, vec![1.0, 2.0, 4.0, 1.0]).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
    }

    #[test]
    fn eigenvalues_of_two_by_two() {
        let e = sym2(1.0, 2.0, 1.0).eigen();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn loewner_examples() {
        let d = GramMatrix::from_rows(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        assert!(loewner_leq(&GramMatrix::zeros(2), &d, 0.0).unwrap());
        assert!(loewner_leq(&d, &d, 0.0).unwrap());
        assert!(loewner_leq(&GramMatrix::identity(2), &d, 1e-12).unwrap());
        assert!(!loewner_leq(&d, &GramMatrix::identity(2), 1e-12).unwrap());
        assert!(loewner_leq(&d, &GramMatrix::identity(3), 0.0).is_err());
    }

    #[test]
    fn sqrt_examples() {
        let s = sqrt_psd(&GramMatrix::identity(3)).unwrap();
        assert!(s.sym().sub(&SymMatrix::identity(3)).unwrap().max_abs() < 1e-15);
        let s = sqrt_psd(&GramMatrix::from_rows(2, vec![4.0, 0.0, 0.0, 9.0]).unwrap()).unwrap();
        assert!((s.get(0, 0) - 2.0).abs() < 1e-14 && (s.get(1, 1) - 3.0).abs() < 1e-14);
        let m = GramMatrix::from_rows(2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let s = sqrt_psd(&m).unwrap().sym().to_matrix();
        let sq = s.matmul(&s).unwrap();
        assert!(sq.sub(&m.sym().to_matrix()).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let m = GramMatrix { base: sym2(1.0, 2.0, 1.0), certified_psd: false };
        assert!(sqrt_psd(&m).is_err());
        assert!(GramMatrix::new(sym2(1.0, 2.0, 1.0)).is_err());
    }

    #[test]
    fn norms_and_sums() {
        assert!((hs_norm(&SymMatrix::identity(2)) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(sum_entries(&SymMatrix::identity(4)), 4.0);
        let a = sym2(1.5, -2.0, 3.0);
        let ones = sym2(1.0, 1.0, 1.0);
        assert_eq!(hadamard(&a, &ones).unwrap(), a);
    }

    #[test]
    fn gershgorin_examples() {
        assert!(gershgorin_psd_certificate(&SymMatrix::identity(3)));
        assert!(gershgorin_psd_certificate(&sym2(2.0, 1.0, 2.0)));
        let m = sym2(1.0, 2.0, 5.0);
        assert!(!gershgorin_psd_certificate(&m));
        assert!(is_psd(&m, 0.0).unwrap());
    }

    #[test]
    fn perturbation_threshold_examples() {
        let p = SymMatrix::new(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!((pd_perturbation_threshold(&GramMatrix::identity(2), &p).unwrap() - 0.5).abs() < 1e-14);
        let a = GramMatrix::scaled_identity(3, 2.0).unwrap();
        let p3 = SymMatrix::from_fn(3, |i, j| if i == j { -1.0 } else { 0.25 }).unwrap();
        assert!((pd_perturbation_threshold(&a, &p3).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(pd_perturbation_threshold(&a, &SymMatrix::zeros(3)).unwrap(), f64::INFINITY);
        assert!(pd_perturbation_threshold(&GramMatrix::zeros(2), &p).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let m = sym2(1.0, 0.5, 2.0);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<SymMatrix>(&s).unwrap(), m);
    }
}
