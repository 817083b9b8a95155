use super::control::{smoothed, ScalarTerminal, Table, node_reach};
use super::types::{DiscreteMeasure, Path};
use crate::error::{Error, Result};
use rayon::prelude::*;

/// Rectangular `(s, x)` mesh with `ns × nx` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    pub s_lo: f64,
    pub s_hi: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub ns: usize,
    pub nx: usize,
}

impl Mesh {
    /// `n × n` nodes over `x ∈ [−3, 3]` and the first 90% of the last knot
    /// interval of `path`.
    pub fn default_for(path: &Path, n: usize) -> Mesh {
        let q = path.knots();
        let (a, b) = (q[q.len() - 2], q[q.len() - 1]);
        Mesh { s_lo: a, s_hi: a + 0.9 * (b - a), x_lo: -3.0, x_hi: 3.0, ns: n, nx: n }
    }

    fn refined(&self) -> Mesh {
        Mesh { ns: 2 * self.ns - 1, nx: 2 * self.nx - 1, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeReport {
    /// Max residual on the given mesh.
    pub residual: f64,
    /// Max residual with both spacings halved.
    pub refined_residual: f64,
    /// `refined_residual / residual`.
    pub ratio: f64,
    /// Refinement reduced the residual by less than half.
    pub too_coarse: bool,
}

/// Max of `|∂_sΦ + π'Φ_xx + m π'(Φ_x)²|` over interior mesh nodes by central
/// differences, where `Φ` is the Gaussian smoothing of `g` toward the end
/// `q_end` of a knot interval with slope `slope` and layer weight `m`.
fn max_residual(g: &Table, m: f64, slope: f64, q_end: f64, mesh: &Mesh, nodes: usize) -> Result<f64> {
    let ds = (mesh.s_hi - mesh.s_lo) / (mesh.ns - 1) as f64;
    let dx = (mesh.x_hi - mesh.x_lo) / (mesh.nx - 1) as f64;
    let phi = |s: f64, x: f64| smoothed(g, m, 2.0 * slope * (q_end - s), x, nodes).map(|r| r.0);
    let rows: Vec<Option<f64>> = (1..mesh.ns - 1)
        .into_par_iter()
        .map(|i| {
            let s = mesh.s_lo + i as f64 * ds;
            let mut worst = 0.0f64;
            for j in 1..mesh.nx - 1 {
                let x = mesh.x_lo + j as f64 * dx;
                let c = phi(s, x)?;
                let phi_s = (phi(s + ds, x)? - phi(s - ds, x)?) / (2.0 * ds);
                let (xp, xm) = (phi(s, x + dx)?, phi(s, x - dx)?);
                let phi_x = (xp - xm) / (2.0 * dx);
                let phi_xx = (xp - 2.0 * c + xm) / (dx * dx);
                worst = worst.max((phi_s + slope * phi_xx + m * slope * phi_x * phi_x).abs());
            }
            Some(worst)
        })
        .collect();
    rows.into_iter()
        .try_fold(0.0f64, |a, r| r.map(|v| a.max(v)))
        .ok_or_else(|| Error::Numeric("mesh reaches beyond the tabulated terminal".into()))
}

/// Residual of the Parisi PDE for `κ = 1` on a mesh inside the last knot
/// interval, with the value refined once by halving both spacings.
pub fn pde_residual_with(
    g: impl Fn(f64) -> Result<(f64, f64)> + Sync,
    m: f64,
    slope: f64,
    q_end: f64,
    mesh: &Mesh,
    nodes: usize,
) -> Result<PdeReport> {
    if mesh.ns < 3 || mesh.nx < 3 {
        return Err(Error::Input("mesh needs at least 3 nodes per axis".into()));
    }
    if !(mesh.s_lo < mesh.s_hi && mesh.s_hi < q_end && mesh.x_lo < mesh.x_hi) {
        return Err(Error::Domain("mesh must lie strictly inside the knot interval".into()));
    }
    let sd = (2.0 * slope * (q_end - mesh.s_lo)).max(0.0).sqrt();
    let pad = node_reach(nodes) * sd + 1.0;
    let h = (sd / 400.0).clamp(1e-4, 5e-3);
    let table = Table::build(g, mesh.x_lo - pad, mesh.x_hi + pad, h)?;
    let residual = max_residual(&table, m, slope, q_end, mesh, nodes)?;
    let refined_residual = max_residual(&table, m, slope, q_end, &mesh.refined(), nodes)?;
    let ratio = if residual > 0.0 { refined_residual / residual } else { 0.0 };
    Ok(PdeReport { residual, refined_residual, ratio, too_coarse: ratio > 0.5 })
}

/// [`pde_residual_with`] for the scalar terminal of the functional.
pub fn pde_residual(terminal: &ScalarTerminal, weights: &DiscreteMeasure, path: &Path, mesh: &Mesh, nodes: usize) -> Result<PdeReport> {
    if path.kappa() != 1 {
        return Err(Error::Input("the PDE check supports kappa = 1 only".into()));
    }
    weights.check_against(path)?;
    let r = path.r();
    let slope = path.slope(r - 1)?.get(0, 0);
    let m = terminal.layer_weight(weights.weights()[r - 1]);
    if !(mesh.s_lo >= path.knots()[r - 1]) {
        return Err(Error::Domain("mesh must lie in the last knot interval".into()));
    }
    pde_residual_with(|x| terminal.value_and_slope(x), m, slope, 1.0, mesh, nodes)
}
